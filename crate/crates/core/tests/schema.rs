//! Golden JSON for the wire formats.

use preserve_core::canonize::FormPayload;
use preserve_core::harness::{run_suite, SuiteConfig};
use preserve_core::{analyze, CanonicalForm, Field, Mat64, MatLinOp64, Relation, ToleranceProfile, Variant};
use serde_json::{json, Value};

fn keys(v: &Value) -> Vec<&str> {
    let mut k: Vec<&str> = v.as_object().expect("object").keys().map(String::as_str).collect();
    k.sort();
    k
}

#[test]
fn real_matrix_omits_imaginary_part() {
    let m = Mat64::from_real_rows(&[&[1.0, 2.0], &[3.0, -0.5]]);
    let v = serde_json::to_value(&m).unwrap();
    assert_eq!(v, json!({"field": "R", "n": 2, "re": [[1.0, 2.0], [3.0, -0.5]]}));
    assert_eq!(serde_json::from_value::<Mat64>(v).unwrap(), m);
}

#[test]
fn complex_matrix_round_trip() {
    let text = r#"{"field":"C","n":2,"re":[[1.0,0.0],[0.0,0.1]],"im":[[0.0,-2.0],[0.3333333333333333,0.0]]}"#;
    let m: Mat64 = serde_json::from_str(text).unwrap();
    assert_eq!(m[(1, 0)].im, 1.0 / 3.0);
    assert_eq!(serde_json::to_string(&m).unwrap(), text);
}

#[test]
fn matrix_loader_rejects_bad_shapes() {
    for bad in [
        r#"{"field":"R","n":2,"re":[[1.0,2.0]]}"#,
        r#"{"field":"C","n":1,"re":[[1.0]]}"#,
        r#"{"field":"R","n":1,"re":[[1.0]],"im":[[2.0]]}"#,
        r#"{"field":"R","n":0,"re":[]}"#,
    ] {
        assert!(serde_json::from_str::<Mat64>(bad).is_err(), "{bad}");
    }
}

#[test]
fn operator_lists_real_then_imaginary_basis_images() {
    let op = MatLinOp64::identity(1, Field::C);
    let v = serde_json::to_value(&op).unwrap();
    assert_eq!(
        v,
        json!({
            "field": "C",
            "n": 1,
            "images": [
                {"re_kl": [0, 0], "image": {"field": "C", "n": 1, "re": [[1.0]], "im": [[0.0]]}},
                {"im_kl": [0, 0], "image": {"field": "C", "n": 1, "re": [[0.0]], "im": [[1.0]]}}
            ]
        })
    );
    let mut incomplete = v.clone();
    incomplete["images"].as_array_mut().unwrap().pop();
    assert!(serde_json::from_value::<MatLinOp64>(incomplete).is_err());
}

#[test]
fn canonical_form_is_tagged_and_flat() {
    let tol = ToleranceProfile::default();
    let id = Mat64::identity(3, Field::R);
    let op = preserve_core::sandwich_op(2.0, &id, &id, Variant::Transpose, &tol).unwrap();
    let form = preserve_core::decompose_sandwich(&op, &tol).unwrap();
    assert!(matches!(form.payload, FormPayload::Sandwich { variant: Variant::Transpose, .. }));
    let v = serde_json::to_value(&form).unwrap();
    assert_eq!(v["tag"], "Sandwich");
    assert_eq!(v["variant"], "transpose");
    assert_eq!(v["r"], 2.0);
    assert!(v["residual"].as_f64().unwrap() <= 1e-12);

    let un = CanonicalForm::<f64>::unclassified("no structure");
    assert_eq!(serde_json::to_value(&un).unwrap(), json!({"tag": "Unclassified", "diagnostic": "no structure", "residual": null}));
}

#[test]
fn report_keys() {
    let tol = ToleranceProfile::default();
    let op = MatLinOp64::transposition(3, Field::R);
    let r = serde_json::to_value(analyze(&op, Relation::Product, &tol, 100).unwrap()).unwrap();
    assert_eq!(keys(&r), ["checks", "form", "residual", "verdict", "witness"]);
    assert_eq!(keys(&r["witness"]), ["a", "b", "image", "origin"]);
    assert_eq!(keys(&r["witness"]["image"]), ["holds", "lhs", "residual", "rhs"]);
    for c in r["checks"].as_array().unwrap() {
        assert_eq!(keys(c), ["detail", "name", "pass"]);
    }
}

#[test]
fn suite_report_keys() {
    let cfg: SuiteConfig = serde_json::from_value(json!({"dims": [3], "fields": ["R"], "trials_per_case": 3, "suites": ["lam1"]})).unwrap();
    let r = serde_json::to_value(run_suite(&cfg).unwrap()).unwrap();
    assert_eq!(keys(&r), ["all_passed", "config", "suites"]);
    assert_eq!(keys(&r["suites"][0]), ["cases", "controls_rejected", "failures", "name", "passed"]);
    assert_eq!(r["suites"][0]["name"], "lam1");
    assert!(serde_json::from_value::<SuiteConfig>(json!({"dims": [3], "colour": 1})).is_err());
}
