//! Model documents: JSON text describing a parametrized pair.
//!
//! ```json
//! {
//!   "name": "optional",
//!   "description": "optional",
//!   "dimension": 1, "m": 0, "n": -1,
//!   "state": ["u"], "x0": 0.0, "u0": ["1"], "vector_field": ["u"],
//!   "P": {"0": [["u"]]},
//!   "Q": {"-1": [["1"]]}
//! }
//! ```
//!
//! Expressions use `+ - * / ^`, parentheses, decimal literals, the imaginary
//! unit `i`, the variable `x` and the state names. Complex literals in `u0`
//! are strings such as `"0.5"`, `"2i"` or `"1-0.25i"`.
//! Structural problems are reported as `Error::Schema` with a JSON-pointer
//! path; expression errors as `Error::Syntax` with the path in the message.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::expr::{format_complex, parse_complex, parse_expression, Expr};
use crate::model::{ExprMatrix, ModelSpec, PQPairModel};

const KEYS: [&str; 11] = ["name", "description", "dimension", "m", "n", "state", "x0", "u0", "vector_field", "P", "Q"];

fn schema(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), msg: msg.into() }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| schema(format!("/{key}"), "missing required key"))
}

fn integer(v: &Value, path: &str) -> Result<i64> {
    v.as_i64().ok_or_else(|| schema(path, "expected an integer"))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(path, "expected an array"))
}

fn string<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| schema(path, "expected a string"))
}

fn expression(v: &Value, path: &str) -> Result<Expr> {
    parse_expression(string(v, path)?).map_err(|e| match e {
        Error::Syntax { pos, msg } => Error::Syntax { pos, msg: format!("{path}: {msg}") },
        other => other,
    })
}

fn matrix_family(v: &Value, key: &str, dim: usize) -> Result<BTreeMap<i32, ExprMatrix>> {
    let obj = v.as_object().ok_or_else(|| schema(format!("/{key}"), "expected an object of order -> matrix"))?;
    let mut out = BTreeMap::new();
    for (order_text, mat) in obj {
        let path = format!("/{key}/{order_text}");
        let order: i32 = order_text
            .trim()
            .parse()
            .map_err(|_| schema(&path, "order keys must be integers"))?;
        if out.contains_key(&order) {
            return Err(schema(&path, "duplicate order"));
        }
        let rows = array(mat, &path)?;
        if rows.len() != dim {
            return Err(schema(&path, format!("expected {dim} rows, found {}", rows.len())));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for (r, row) in rows.iter().enumerate() {
            let rpath = format!("{path}/{r}");
            let cols = array(row, &rpath)?;
            if cols.len() != dim {
                return Err(schema(&rpath, format!("expected {dim} entries, found {}", cols.len())));
            }
            for (c, e) in cols.iter().enumerate() {
                entries.push(expression(e, &format!("{rpath}/{c}"))?);
            }
        }
        out.insert(order, entries);
    }
    Ok(out)
}

/// Reads the document without validating the model invariants.
pub fn parse_spec(text: &str) -> Result<ModelSpec> {
    let root: Value = serde_json::from_str(text).map_err(|e| schema("", format!("invalid JSON: {e}")))?;
    let obj = root.as_object().ok_or_else(|| schema("", "document must be a JSON object"))?;
    if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(schema(format!("/{k}"), "unknown key"));
    }
    let opt_string = |key: &str| -> Result<Option<String>> {
        obj.get(key).map(|v| string(v, &format!("/{key}")).map(str::to_string)).transpose()
    };
    let name = opt_string("name")?;
    let description = opt_string("description")?;

    let dim = integer(field(obj, "dimension")?, "/dimension")?;
    if !(1..=64).contains(&dim) {
        return Err(schema("/dimension", "dimension must be between 1 and 64"));
    }
    let dim = dim as usize;
    let small = |key: &str| -> Result<i32> {
        let v = integer(field(obj, key)?, &format!("/{key}"))?;
        i32::try_from(v).map_err(|_| schema(format!("/{key}"), "out of range"))
    };
    let m = small("m")?;
    let n = small("n")?;

    let state_names = array(field(obj, "state")?, "/state")?
        .iter()
        .enumerate()
        .map(|(k, v)| string(v, &format!("/state/{k}")).map(str::to_string))
        .collect::<Result<Vec<_>>>()?;
    let d = state_names.len();

    let x0 = field(obj, "x0")?.as_f64().ok_or_else(|| schema("/x0", "expected a number"))?;

    let u0_items = array(field(obj, "u0")?, "/u0")?;
    if u0_items.len() != d {
        return Err(schema("/u0", format!("expected {d} initial values, found {}", u0_items.len())));
    }
    let u0 = u0_items
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let path = format!("/u0/{k}");
            parse_complex(string(v, &path)?).map_err(|e| schema(&path, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    let vf_items = array(field(obj, "vector_field")?, "/vector_field")?;
    if vf_items.len() != d {
        return Err(schema("/vector_field", format!("expected {d} expressions, found {}", vf_items.len())));
    }
    let vector_field = vf_items
        .iter()
        .enumerate()
        .map(|(k, v)| expression(v, &format!("/vector_field/{k}")))
        .collect::<Result<Vec<_>>>()?;

    let p = matrix_family(field(obj, "P")?, "P", dim)?;
    let q = matrix_family(field(obj, "Q")?, "Q", dim)?;
    Ok(ModelSpec { name, description, dim, m, n, state_names, vector_field, x0, u0, p, q })
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<PQPairModel> {
    PQPairModel::new(parse_spec(text)?)
}

fn family_value(map: &BTreeMap<i32, ExprMatrix>, dim: usize) -> Value {
    let mut obj = Map::new();
    for (order, mat) in map {
        let rows = mat
            .chunks(dim)
            .map(|row| Value::Array(row.iter().map(|e| Value::String(e.to_string())).collect()))
            .collect();
        obj.insert(order.to_string(), Value::Array(rows));
    }
    Value::Object(obj)
}

pub fn spec_to_value(spec: &ModelSpec) -> Value {
    let mut obj = Map::new();
    if let Some(name) = &spec.name {
        obj.insert("name".into(), name.clone().into());
    }
    if let Some(d) = &spec.description {
        obj.insert("description".into(), d.clone().into());
    }
    obj.insert("dimension".into(), spec.dim.into());
    obj.insert("m".into(), spec.m.into());
    obj.insert("n".into(), spec.n.into());
    obj.insert("state".into(), spec.state_names.clone().into());
    obj.insert("x0".into(), spec.x0.into());
    obj.insert("u0".into(), spec.u0.iter().map(|z| format_complex(*z)).collect::<Vec<_>>().into());
    obj.insert("vector_field".into(), spec.vector_field.iter().map(|e| e.to_string()).collect::<Vec<_>>().into());
    obj.insert("P".into(), family_value(&spec.p, spec.dim));
    obj.insert("Q".into(), family_value(&spec.q, spec.dim));
    Value::Object(obj)
}

/// Pretty-printed document; parsing it back yields an equal model.
pub fn serialize_model(model: &PQPairModel) -> String {
    let mut s = serde_json::to_string_pretty(&spec_to_value(model.spec())).expect("JSON values always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"dimension": 1, "m": 0, "n": -1, "state": [], "x0": 0, "u0": [],
        "vector_field": [], "P": {"0": [["0"]]}, "Q": {"-1": [["1"]]}}"#;

    fn with(key: &str, value: Value) -> String {
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        v.as_object_mut().unwrap().insert(key.into(), value);
        v.to_string()
    }

    fn without(key: &str) -> String {
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        v.as_object_mut().unwrap().remove(key);
        v.to_string()
    }

    fn schema_path(text: &str) -> String {
        match parse_model(text) {
            Err(Error::Schema { path, .. }) => path,
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_scalar_document() {
        let m = parse_model(MINIMAL).unwrap();
        assert_eq!((m.dim(), m.m(), m.n(), m.state_dim()), (1, 0, -1, 0));
    }

    #[test]
    fn missing_keys_are_path_addressed() {
        for key in ["dimension", "m", "n", "state", "x0", "u0", "vector_field", "P", "Q"] {
            assert_eq!(schema_path(&without(key)), format!("/{key}"));
        }
    }

    #[test]
    fn structural_errors() {
        assert_eq!(schema_path("[1, 2]"), "");
        assert_eq!(schema_path("{"), "");
        assert_eq!(schema_path(&with("dimension", "2".into())), "/dimension");
        assert_eq!(schema_path(&with("dimension", 2.into())), "/P/0");
        assert_eq!(schema_path(&with("extra", 1.into())), "/extra");
        assert_eq!(schema_path(&with("P", serde_json::json!({"zero": [["0"]]}))), "/P/zero");
        assert_eq!(schema_path(&with("Q", serde_json::json!({"-1": [["1", "2"]]}))), "/Q/-1/0");
        assert_eq!(schema_path(&with("Q", serde_json::json!({"-1": [[1]]}))), "/Q/-1/0/0");
        assert_eq!(schema_path(&with("u0", serde_json::json!(["1"]))), "/u0");
        assert_eq!(schema_path(&with("x0", "0".into())), "/x0");
    }

    #[test]
    fn expression_errors_keep_position_and_path() {
        match parse_model(&with("Q", serde_json::json!({"-1": [["1 + * 2"]]}))) {
            Err(Error::Syntax { pos, msg }) => {
                assert_eq!(pos, 4);
                assert!(msg.starts_with("/Q/-1/0/0"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            parse_model(&with("Q", serde_json::json!({"-1": [["y"]]}))),
            Err(Error::UnknownSymbol("y".into()))
        );
    }

    #[test]
    fn model_invariants_are_enforced() {
        assert!(matches!(parse_model(&with("n", 0.into())), Err(Error::InvalidModel(_))));
        assert!(matches!(parse_model(&with("m", 1.into())), Err(Error::InvalidModel(_))));
        assert!(matches!(
            parse_model(&with("Q", serde_json::json!({"-2": [["1"]]}))),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn round_trip() {
        let text = r#"{"name": "t", "dimension": 2, "m": 0, "n": -2, "state": ["a", "b"], "x0": 0.25,
            "u0": ["1-0.5i", "3"], "vector_field": ["b", "-a*x^2"],
            "P": {"0": [["a", "0"], ["1/3", "-b"]]},
            "Q": {"-2": [["1", "0"], ["0", "-1"]], "1": [["a*b - 2", "i*a"], ["(a+b)^3", "0.1"]]}}"#;
        let model = parse_model(text).unwrap();
        let again = parse_model(&serialize_model(&model)).unwrap();
        assert_eq!(model, again);
        assert_eq!(serialize_model(&model), serialize_model(&again));
    }
}
