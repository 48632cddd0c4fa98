//! Run configuration.  Values come from defaults, then the config file
//! (flat `key=value` text with `[section]` headers, or JSON), then flags.

use std::collections::BTreeMap;
use std::str::FromStr;

use pnlv::{EquationSpec, GammaBranch, C};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn run(e: impl std::fmt::Display) -> Self {
        CliError::Run(e.to_string())
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Keys every subcommand understands.
const COMMON_KEYS: [&str; 11] =
    ["eq", "alpha", "beta", "gammaBranch", "seed", "path", "region", "tol", "maxSteps", "out", "randomSeed"];

/// Subcommand-specific keys, kept in [`RunConfig::options`].
pub fn option_keys(subcommand: &str) -> &'static [&'static str] {
    match subcommand {
        "integrate" => &["events"],
        "polefield" => &["spacing", "detectLevel", "rays", "svg"],
        "strings" => &["in"],
        "backlund" => &["in", "transform", "steps", "history"],
        "series" => &["kind", "family", "branch", "pair", "order"],
        "rescale" => &["center", "grid", "ray", "rRange", "deltaFloor"],
        "special" => &["which", "at", "tolerance"],
        "verify" => &["suite", "all"],
        _ => &[],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub subcommand: String,
    pub eq: Option<String>,
    pub alpha: Option<String>,
    pub beta: Option<String>,
    pub gamma_branch: Option<String>,
    pub seed: Option<String>,
    pub path: Option<String>,
    pub region: Option<String>,
    pub tol: f64,
    pub max_steps: usize,
    pub out: Option<String>,
    pub random_seed: u64,
    pub options: BTreeMap<String, String>,
}

/// `gamma-branch` and `gamma_branch` both become `gammaBranch`.
pub fn camel(key: &str) -> String {
    let mut out = String::new();
    let mut up = false;
    for ch in key.trim().chars() {
        if ch == '-' || ch == '_' {
            up = true;
        } else if up {
            out.extend(ch.to_uppercase());
            up = false;
        } else {
            out.push(ch);
        }
    }
    out
}

/// Keys of a config file that apply to `subcommand`: unsectioned keys and
/// keys under `[common]`, overridden by keys under `[<subcommand>]`.
pub fn parse_config_text(text: &str, subcommand: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut common = BTreeMap::new();
    let mut own = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let obj = v.as_object().ok_or_else(|| usage("JSON config must be an object"))?;
        for (k, val) in obj {
            match val {
                serde_json::Value::Object(inner) => {
                    if k == subcommand || k == "common" {
                        let dst = if k == subcommand { &mut own } else { &mut common };
                        for (ik, iv) in inner {
                            dst.insert(camel(ik), scalar(iv)?);
                        }
                    }
                }
                other => {
                    common.insert(camel(k), scalar(other)?);
                }
            }
        }
    } else {
        let mut section: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(name.trim().to_string());
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| usage(format!("config line {}: expected key=value", n + 1)))?;
            let (k, v) = (camel(k), v.trim().to_string());
            match section.as_deref() {
                None | Some("common") => {
                    common.insert(k, v);
                }
                Some(s) if s == subcommand => {
                    own.insert(k, v);
                }
                Some(_) => {}
            }
        }
    }
    common.extend(own);
    Ok(common)
}

fn scalar(v: &serde_json::Value) -> Result<String, CliError> {
    Ok(match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Number(n) => n.to_string(),
        serde_json::Value::Bool(b) => b.to_string(),
        _ => return Err(usage(format!("config value {v} is not a scalar"))),
    })
}

impl RunConfig {
    /// Build from the merged key map, rejecting keys the subcommand does not know.
    pub fn from_map(subcommand: &str, mut map: BTreeMap<String, String>) -> Result<Self, CliError> {
        let known = option_keys(subcommand);
        for k in map.keys() {
            if !COMMON_KEYS.contains(&k.as_str()) && !known.contains(&k.as_str()) {
                return Err(usage(format!("unknown key '{k}' for {subcommand}")));
            }
        }
        let mut take = |k: &str| map.remove(k);
        let tol = take("tol").map(|s| parse_f64("tol", &s)).transpose()?.unwrap_or(1e-10);
        let max_steps = take("maxSteps").map(|s| parse_usize("maxSteps", &s)).transpose()?.unwrap_or(2_000_000);
        let random_seed = take("randomSeed").map(|s| parse_usize("randomSeed", &s)).transpose()?.unwrap_or(0) as u64;
        // Normalize complex parameters so reruns with `1` and `1+0i` hash the same.
        let alpha = take("alpha").map(|s| parse_c("alpha", &s).map(fmt_c)).transpose()?;
        let beta = take("beta").map(|s| parse_c("beta", &s).map(fmt_c)).transpose()?;
        let cfg = RunConfig {
            subcommand: subcommand.to_string(),
            eq: take("eq").map(|s| s.to_lowercase()),
            alpha,
            beta,
            gamma_branch: take("gammaBranch").map(|s| s.to_lowercase()),
            seed: take("seed"),
            path: take("path"),
            region: take("region"),
            tol,
            max_steps,
            out: take("out"),
            random_seed,
            options: map,
        };
        cfg.equation()?;
        Ok(cfg)
    }

    pub fn opt(&self, key: &str) -> Option<&str> {
        self.options.get(key).map(String::as_str)
    }

    pub fn equation_given(&self) -> bool {
        self.eq.is_some()
    }

    /// The equation named by `eq`, `alpha`, `beta`, `gammaBranch` (default: IV with zero parameters).
    pub fn equation(&self) -> Result<EquationSpec, CliError> {
        let alpha = self.alpha.as_deref().map(|s| parse_c("alpha", s)).transpose()?.unwrap_or_default();
        let beta = self.beta.as_deref().map(|s| parse_c("beta", s)).transpose()?.unwrap_or_default();
        let branch = match self.gamma_branch.as_deref() {
            None | Some("plus") | Some("+") => GammaBranch::Plus,
            Some("minus") | Some("-") => GammaBranch::Minus,
            Some(o) => return Err(usage(format!("gammaBranch must be plus or minus, got {o}"))),
        };
        parse_equation(self.eq.as_deref().unwrap_or("iv"), alpha, beta, branch)
    }
}

pub fn parse_equation(name: &str, alpha: C, beta: C, branch: GammaBranch) -> Result<EquationSpec, CliError> {
    match name.to_lowercase().trim_start_matches('p') {
        "i" | "1" => Ok(EquationSpec::first()),
        "ii" | "2" => Ok(EquationSpec::second(alpha)),
        "iv" | "4" => Ok(EquationSpec::fourth(alpha, beta, branch)),
        _ => Err(usage(format!("eq must be i, ii or iv, got {name}"))),
    }
}

pub fn parse_c(key: &str, s: &str) -> Result<C, CliError> {
    C::from_str(s.trim()).map_err(|_| usage(format!("{key}: '{s}' is not a complex number (use a+bi)")))
}

pub fn fmt_c(z: C) -> String {
    if z.im < 0.0 || (z.im == 0.0 && z.im.is_sign_negative()) {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

pub fn parse_f64(key: &str, s: &str) -> Result<f64, CliError> {
    s.trim().parse().map_err(|_| usage(format!("{key}: '{s}' is not a number")))
}

pub fn parse_usize(key: &str, s: &str) -> Result<usize, CliError> {
    s.trim().parse().map_err(|_| usage(format!("{key}: '{s}' is not a non-negative integer")))
}

pub fn parse_bool(key: &str, s: &str) -> Result<bool, CliError> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(usage(format!("{key}: '{s}' is not true or false"))),
    }
}

/// `kind:rest` split at the first colon.
pub fn split_kind(desc: &str) -> (String, &str) {
    match desc.split_once(':') {
        Some((k, rest)) => (k.trim().to_lowercase(), rest),
        None => (desc.trim().to_lowercase(), ""),
    }
}

/// `a=1,b=2+3i` as a map.
pub fn kv_list(rest: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| usage(format!("expected key=value, got '{item}'")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Comma-separated complex numbers.
pub fn c_list(key: &str, rest: &str) -> Result<Vec<C>, CliError> {
    rest.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_c(key, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        assert_eq!(parse_c("x", "0.3+0.2i").unwrap(), C::new(0.3, 0.2));
        assert_eq!(parse_c("x", "-2").unwrap(), C::new(-2.0, 0.0));
        assert_eq!(parse_c("x", "1e-3-2i").unwrap(), C::new(1e-3, -2.0));
        assert_eq!(parse_c("x", "2i").unwrap(), C::new(0.0, 2.0));
        assert!(parse_c("x", "abc").is_err());
        assert_eq!(fmt_c(C::new(1.0, -0.5)), "1-0.5i");
    }

    #[test]
    fn sections_override_common_keys() {
        let text = "# comment\neq=iv\nalpha=1\n[integrate]\nalpha=2\n[polefield]\nalpha=3\n";
        let m = parse_config_text(text, "integrate").unwrap();
        assert_eq!(m["alpha"], "2");
        assert_eq!(m["eq"], "iv");
        let m = parse_config_text(text, "strings").unwrap();
        assert_eq!(m["alpha"], "1");
    }

    #[test]
    fn json_config_matches_text_config() {
        let j = r#"{"eq":"ii","alpha":0.5,"polefield":{"max-steps":10}}"#;
        let m = parse_config_text(j, "polefield").unwrap();
        assert_eq!(m["eq"], "ii");
        assert_eq!(m["maxSteps"], "10");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut m = BTreeMap::new();
        m.insert("bogus".to_string(), "1".to_string());
        assert!(RunConfig::from_map("integrate", m).is_err());
    }

    #[test]
    fn kebab_and_snake_become_camel() {
        assert_eq!(camel("gamma-branch"), "gammaBranch");
        assert_eq!(camel("max_steps"), "maxSteps");
        assert_eq!(camel("r-range"), "rRange");
    }
}
