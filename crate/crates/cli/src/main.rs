use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use preserve_core::canonize::DEFAULT_BUDGET;
use preserve_core::harness::{case_rng, gen_norm_mult_pair, gen_sesqui_pair};
use preserve_core::{
    analyze, run_suite, su2_lift, Error, FamilyDescriptor, Field, Mat64, MatLinOp64, Relation, Side, SuiteConfig,
    ToleranceProfile,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Analyze, synthesize and test linear preservers of unitaries and of
/// norm-multiplicative pairs.
#[derive(Parser, Debug)]
#[command(name = "preserve", version)]
struct Cli {
    /// Print only the verdict line (analyze) and nothing else for other commands.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify an operator against a relation and print the report as JSON.
    Analyze {
        #[arg(long)]
        op: PathBuf,
        #[arg(long, value_enum)]
        relation: RelationArg,
        /// Tolerance profile; defaults to $PRESERVER_TOL, then built-in values.
        #[arg(long)]
        tol_profile: Option<PathBuf>,
        /// Candidate pairs tried when searching for a witness.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Build an operator from a family descriptor.
    Synth {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tol_profile: Option<PathBuf>,
    },
    /// Generate seeded pairs satisfying a relation.
    Pairs {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum)]
        field: FieldArg,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = RelationArg::Product)]
        relation: RelationArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the seeded verification suites.
    Suite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lift a rotation in SO(3) to SU(2).
    Lift {
        #[arg(long)]
        so3: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tol_profile: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum RelationArg {
    Product,
    StarLeft,
    StarRight,
    Unitary,
}

impl From<RelationArg> for Relation {
    fn from(r: RelationArg) -> Self {
        match r {
            RelationArg::Product => Relation::Product,
            RelationArg::StarLeft => Relation::StarLeft,
            RelationArg::StarRight => Relation::StarRight,
            RelationArg::Unitary => Relation::Unitary,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FamilyArg {
    Sandwich,
    PhiC,
    MuTwist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FieldArg {
    #[value(name = "R", alias = "r")]
    R,
    #[value(name = "C", alias = "c")]
    C,
}

/// Failure with its exit code: 1 for I/O and input errors, 2 for internal inconsistency.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Inconsistent(_)) { 2 } else { 1 };
        Failure { code, message: e.to_string() }
    }
}

fn input_error(message: String) -> Failure {
    Failure { code: 1, message }
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input_error(format!("invalid {what} in {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    fs::write(path, to_json(value)).map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
}

fn tolerance(explicit: Option<&Path>) -> Result<ToleranceProfile, Failure> {
    let path = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os("PRESERVER_TOL").map(PathBuf::from),
    };
    let tol = match path {
        Some(p) => read_json::<ToleranceProfile>(&p, "tolerance profile")?,
        None => ToleranceProfile::default(),
    };
    tol.validate()?;
    Ok(tol)
}

#[derive(Serialize)]
struct PairsFile {
    n: usize,
    field: Field,
    relation: Relation,
    seed: u64,
    pairs: Vec<PairEntry>,
}

#[derive(Serialize)]
struct PairEntry {
    a: Mat64,
    b: Mat64,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Analyze { op, relation, tol_profile, budget } => {
            let tol = tolerance(tol_profile.as_deref())?;
            let op: MatLinOp64 = read_json(&op, "operator")?;
            let report = analyze(&op, relation.into(), &tol, budget)?;
            if quiet {
                println!("verdict: {}", report.verdict);
            } else {
                print!("{}", to_json(&report));
            }
        }
        Command::Synth { family, params, out, tol_profile } => {
            let tol = tolerance(tol_profile.as_deref())?;
            let text = fs::read_to_string(&params)
                .map_err(|e| input_error(format!("cannot read {}: {e}", params.display())))?;
            let params: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| input_error(format!("invalid parameters in {}: {e}", params.display())))?;
            let tag = match family {
                FamilyArg::Sandwich => "sandwich",
                FamilyArg::PhiC => "phi_c",
                FamilyArg::MuTwist => "mu_twist",
            };
            let desc: FamilyDescriptor<f64> = serde_json::from_value(serde_json::json!({"family": tag, "params": params}))
                .map_err(|e| input_error(format!("invalid {tag} parameters: {e}")))?;
            let op = desc.build(&tol)?;
            write_json(&out, &op)?;
            if !quiet {
                println!("wrote {tag} operator on {}x{} matrices to {}", op.n(), op.n(), out.display());
            }
        }
        Command::Pairs { n, field, count, seed, relation, out } => {
            if n == 0 {
                return Err(input_error("--n must be positive".into()));
            }
            let field = match field {
                FieldArg::R => Field::R,
                FieldArg::C => Field::C,
            };
            let relation = Relation::from(relation);
            if relation == Relation::Unitary {
                return Err(input_error("pairs are generated for product, star_left or star_right".into()));
            }
            let pairs = (0..count)
                .map(|i| {
                    let mut rng = case_rng(seed, "pairs", i as u64);
                    let (a, b) = match relation {
                        Relation::Product => gen_norm_mult_pair(n, field, &mut rng),
                        Relation::StarLeft => gen_sesqui_pair(n, field, Side::StarLeft, &mut rng),
                        Relation::StarRight => gen_sesqui_pair(n, field, Side::StarRight, &mut rng),
                        Relation::Unitary => unreachable!("rejected above"),
                    };
                    PairEntry { a, b }
                });
            let file = PairsFile { n, field, relation, seed, pairs: pairs.collect() };
            write_json(&out, &file)?;
            if !quiet {
                println!("wrote {count} {relation} pairs to {}", out.display());
            }
        }
        Command::Suite { config, out } => {
            let cfg: SuiteConfig = read_json(&config, "suite config")?;
            let report = run_suite(&cfg)?;
            write_json(&out, &report)?;
            if !quiet {
                for s in &report.suites {
                    let status = if s.ok() { "PASS" } else { "FAIL" };
                    println!("{status} {:<15} {}/{} cases", s.name, s.passed, s.cases);
                }
            }
        }
        Command::Lift { so3, out, tol_profile } => {
            let tol = tolerance(tol_profile.as_deref())?;
            let r: Mat64 = read_json(&so3, "rotation matrix")?;
            let u = su2_lift(&r, &tol)?;
            write_json(&out, &u)?;
            if !quiet {
                println!("wrote SU(2) lift to {}", out.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors are input errors; exit code 2 is reserved for inconsistency.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(Failure::from(Error::Inconsistent("x".into())).code, 2);
        assert_eq!(Failure::from(Error::Precondition("x".into())).code, 1);
        assert_eq!(Failure::from(Error::ZeroMatrix).code, 1);
    }

    #[test]
    fn command_line_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        assert!(Cli::try_parse_from(["preserve", "analyze", "--op", "x.json", "--relation", "star_left"]).is_ok());
        assert!(Cli::try_parse_from(["preserve", "analyze", "--op", "x.json", "--relation", "other"]).is_err());
        assert!(Cli::try_parse_from(["preserve", "suite", "--config", "c.json", "--out", "o.json", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["preserve"]).is_err());
    }
}
