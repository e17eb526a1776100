//! Layered JSON configuration: built-in defaults, then the `--config` file,
//! then `--set key=value` overrides (dotted keys address nested objects).

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub fn resolve<T: Serialize + DeserializeOwned>(
    defaults: &T,
    file: Option<&Path>,
    overrides: &[String],
) -> Result<T, CliError> {
    let mut value = serde_json::to_value(defaults).expect("defaults serialize");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let layer: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if !layer.is_object() {
            return Err(CliError::Config(format!("{}: top level must be an object", path.display())));
        }
        merge(&mut value, layer);
    }
    for kv in overrides {
        let (key, raw) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {kv:?}")))?;
        set_path(&mut value, key, parse_scalar(raw))?;
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}

/// JSON if it parses (numbers, booleans, arrays, objects), else a bare string.
fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn merge(base: &mut Value, layer: Value) {
    match (base, layer) {
        (Value::Object(b), Value::Object(l)) => {
            for (k, v) in l {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("malformed override key {key:?}")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(CliError::Config(format!("override {key:?}: {part:?} is not inside an object")));
        }
        node = node
            .as_object_mut()
            .expect("checked above")
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    match node.as_object_mut() {
        Some(obj) => {
            obj.insert(parts[parts.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(CliError::Config(format!("override {key:?} does not address an object field"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Inner {
        a: f64,
        b: String,
    }

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Outer {
        n: usize,
        inner: Inner,
        list: Vec<u32>,
    }

    fn defaults() -> Outer {
        Outer {
            n: 1,
            inner: Inner { a: 0.5, b: "x".into() },
            list: vec![1],
        }
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let sets = ["n=7", "inner.a=2.5", "inner.b=logistic", "list=[3,4]"].map(String::from);
        let c: Outer = resolve(&defaults(), None, &sets).unwrap();
        assert_eq!(c.n, 7);
        assert_eq!(c.inner, Inner { a: 2.5, b: "logistic".into() });
        assert_eq!(c.list, vec![3, 4]);
    }

    #[test]
    fn file_layer_merges_and_set_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"inner": {"a": 9.0}, "n": 3}"#).unwrap();
        let c: Outer = resolve(&defaults(), Some(&path), &["n=4".into()]).unwrap();
        assert_eq!((c.n, c.inner.a, c.inner.b.as_str()), (4, 9.0, "x"));
    }

    #[test]
    fn bad_input_is_a_config_error() {
        for sets in [vec!["nope"], vec!["typo=1"], vec!["n=-1"], vec!["n.x=1"], vec!["inner..a=1"]] {
            let sets: Vec<String> = sets.into_iter().map(String::from).collect();
            assert!(matches!(resolve(&defaults(), None, &sets), Err(CliError::Config(_))), "{sets:?}");
        }
        let missing = Path::new("/nonexistent/config.json");
        assert!(matches!(resolve(&defaults(), Some(missing), &[]), Err(CliError::Config(_))));
    }
}
