//! Artifact writers.  Every file carries the full run configuration and a
//! SHA-256 hash of its payload, so identical runs produce identical bytes.

use std::fs;
use std::io::Write;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{CliError, RunConfig};

pub fn content_hash(payload: &str) -> String {
    let digest = Sha256::digest(payload.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

/// Writes to `dest`, or to standard output when `dest` is `None` or `-`.
pub fn emit(dest: Option<&str>, text: &str) -> Result<(), CliError> {
    match dest {
        None | Some("-") => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
        Some(path) => Ok(fs::write(path, text)?),
    }
}

/// JSON payload with `runConfig` and `contentHash` added at the top level.
pub fn json_document(cfg: &RunConfig, payload: Value) -> Result<String, CliError> {
    let body = serde_json::to_string(&payload)?;
    let mut map = match payload {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    map.insert("runConfig".into(), serde_json::to_value(cfg)?);
    map.insert("contentHash".into(), Value::String(content_hash(&body)));
    let mut text = serde_json::to_string_pretty(&Value::Object(map))?;
    text.push('\n');
    Ok(text)
}

/// CSV rows preceded by `# runConfig:` and `# contentHash:` comment lines and
/// any extra `# key: value` lines.
pub fn csv_document(cfg: &RunConfig, extra: &[(&str, String)], body: &str) -> Result<String, CliError> {
    let mut text = format!("# runConfig: {}\n# contentHash: {}\n", serde_json::to_string(cfg)?, content_hash(body));
    for (k, v) in extra {
        text.push_str(&format!("# {k}: {v}\n"));
    }
    text.push_str(body);
    Ok(text)
}

/// SVG with the configuration in a leading XML comment.
pub fn svg_document(cfg: &RunConfig, svg: &str) -> Result<String, CliError> {
    let cfg_json = serde_json::to_string(cfg)?.replace("--", "- -");
    Ok(format!("<!-- runConfig: {cfg_json} contentHash: {} -->\n{svg}", content_hash(svg)))
}

/// Header lines `# key: value` of a CSV written by [`csv_document`].
pub fn csv_header_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# ").and_then(|l| l.strip_prefix(key)).and_then(|l| l.strip_prefix(": ")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn cfg() -> RunConfig {
        RunConfig::from_map("series", BTreeMap::new()).unwrap()
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        assert_eq!(content_hash("abc"), content_hash("abc"));
        assert_ne!(content_hash("abc"), content_hash("abd"));
        assert!(content_hash("").starts_with("sha256:e3b0c442"));
    }

    #[test]
    fn csv_header_round_trip() {
        let text = csv_document(&cfg(), &[("resultEquation", "{}".into())], "a,b\n1,2\n").unwrap();
        assert_eq!(csv_header_value(&text, "resultEquation"), Some("{}"));
        assert!(csv_header_value(&text, "runConfig").unwrap().contains("\"subcommand\":\"series\""));
    }

    #[test]
    fn json_document_embeds_config() {
        let text = json_document(&cfg(), serde_json::json!({"x": 1})).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["x"], 1);
        assert_eq!(v["runConfig"]["subcommand"], "series");
        assert_eq!(v["contentHash"], content_hash("{\"x\":1}"));
    }
}
