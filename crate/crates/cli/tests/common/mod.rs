#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_prior-forge");

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub struct Example {
    pub family: &'static str,
    pub formula: &'static str,
}

pub const EXAMPLES: [Example; 3] = [
    Example {
        family: "gaussian",
        formula: "y ~ x1 + x2 + grp + (x1 | site)",
    },
    Example {
        family: "binomial",
        formula: "y ~ x1 + x2 + (1 | site)",
    },
    Example {
        family: "poisson",
        formula: "y ~ x1 + grp + (x2 | site)",
    },
];

impl Example {
    pub fn data(&self) -> PathBuf {
        crate_dir().join("data").join(format!("{}.csv", self.family))
    }

    pub fn golden(&self) -> PathBuf {
        crate_dir()
            .join("tests/golden")
            .join(format!("{}.json", self.family))
    }

    pub fn run(&self) -> Output {
        run(&[
            "priors",
            "--data",
            self.data().to_str().unwrap(),
            "--formula",
            self.formula,
            "--family",
            self.family,
        ])
    }
}

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

pub fn run_with_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(BIN)
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

pub fn schema() -> Value {
    let path = crate_dir().join("schema/prior-report.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Validates `doc` against the subset of JSON Schema used by the published
/// report schema: type, const, enum, required, properties,
/// additionalProperties, items, oneOf, local $ref and numeric bounds.
pub fn validate(doc: &Value, schema: &Value) -> Result<(), String> {
    check(doc, schema, schema, "$")
}

fn resolve<'a>(root: &'a Value, reference: &str) -> &'a Value {
    let path = reference.strip_prefix("#/").expect("local reference");
    path.split('/').fold(root, |v, key| &v[key])
}

fn type_matches(doc: &Value, ty: &str) -> bool {
    match ty {
        "object" => doc.is_object(),
        "array" => doc.is_array(),
        "string" => doc.is_string(),
        "number" => doc.is_number(),
        "integer" => doc.is_u64() || doc.is_i64(),
        "boolean" => doc.is_boolean(),
        "null" => doc.is_null(),
        other => panic!("unsupported type `{other}`"),
    }
}

fn check(doc: &Value, schema: &Value, root: &Value, at: &str) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        return check(doc, resolve(root, r), root, at);
    }
    if let Some(ty) = schema.get("type").and_then(Value::as_str) {
        if !type_matches(doc, ty) {
            return Err(format!("{at}: expected {ty}"));
        }
    }
    if let Some(c) = schema.get("const") {
        if doc != c {
            return Err(format!("{at}: expected {c}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(doc) {
            return Err(format!("{at}: {doc} not in {options:?}"));
        }
    }
    if let Some(x) = doc.as_f64() {
        if let Some(m) = schema.get("minimum").and_then(Value::as_f64) {
            if x < m {
                return Err(format!("{at}: {x} < {m}"));
            }
        }
        if let Some(m) = schema.get("maximum").and_then(Value::as_f64) {
            if x > m {
                return Err(format!("{at}: {x} > {m}"));
            }
        }
        if let Some(m) = schema.get("exclusiveMinimum").and_then(Value::as_f64) {
            if x <= m {
                return Err(format!("{at}: {x} <= {m}"));
            }
        }
    }
    if let Some(obj) = doc.as_object() {
        let props = schema.get("properties").and_then(Value::as_object);
        for key in schema
            .get("required")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
        {
            let key = key.as_str().unwrap();
            if !obj.contains_key(key) {
                return Err(format!("{at}: missing `{key}`"));
            }
        }
        for (key, value) in obj {
            match props.and_then(|p| p.get(key)) {
                Some(sub) => check(value, sub, root, &format!("{at}.{key}"))?,
                None if schema.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    return Err(format!("{at}: unexpected `{key}`"))
                }
                None => {}
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), doc.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            check(v, items, root, &format!("{at}[{i}]"))?;
        }
    }
    if let Some(options) = schema.get("oneOf").and_then(Value::as_array) {
        let matched = options
            .iter()
            .filter(|s| check(doc, s, root, at).is_ok())
            .count();
        if matched != 1 {
            return Err(format!("{at}: matches {matched} oneOf branches"));
        }
    }
    Ok(())
}
