//! Report types shared by every subcommand.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

/// Either exact equality or an absolute bound on a residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Tolerance {
    Exact(ExactTag),
    Bound(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExactTag {
    Exact,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub tolerance: Tolerance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn exact(name: impl Into<String>, pass: bool) -> Check {
        Check { name: name.into(), pass, tolerance: Tolerance::Exact(ExactTag::Exact), value: None, detail: None }
    }

    /// `value <= tol`; NaN fails.
    pub fn bound(name: impl Into<String>, value: f64, tol: f64) -> Check {
        Check { name: name.into(), pass: value <= tol, tolerance: Tolerance::Bound(tol), value: Some(value), detail: None }
    }

    /// A check whose computation itself failed.
    pub fn error(name: impl Into<String>, tol: Tolerance, err: impl std::fmt::Display) -> Check {
        Check { name: name.into(), pass: false, tolerance: tol, value: None, detail: Some(format!("error: {err}")) }
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Check {
        self.detail = Some(d.into());
        self
    }
}

/// The outcome of one subcommand.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: BTreeMap<String, Value>,
    pub version: String,
    /// Only present with `--timing`, so reports stay byte-identical across runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub result: Value,
    /// Replaces the generic rendering of `result` in text output.
    #[serde(skip)]
    pub text_body: Option<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, parameters: BTreeMap<String, Value>, checks: Vec<Check>, result: Value) -> RunManifest {
        RunManifest {
            subcommand: subcommand.into(),
            parameters,
            version: env!("CARGO_PKG_VERSION").into(),
            wall_time_s: None,
            pass: checks.iter().all(|c| c.pass),
            checks,
            result,
            text_body: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only finite JSON values")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("ayang {} {}\n", self.version, self.subcommand);
        for (k, v) in &self.parameters {
            out += &format!("  {k} = {v}\n");
        }
        if let Some(t) = self.wall_time_s {
            out += &format!("  wall time {t:.3} s\n");
        }
        match &self.text_body {
            Some(t) => out += t,
            None => out += &render_result(&self.result),
        }
        for c in &self.checks {
            out += &format!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            match (c.value, c.tolerance) {
                (Some(v), Tolerance::Bound(t)) => out += &format!("  value={v:.3e} tol={t:.1e}"),
                (None, Tolerance::Bound(t)) => out += &format!("  tol={t:.1e}"),
                (_, Tolerance::Exact(_)) => out += "  (exact)",
            }
            if let Some(d) = &c.detail {
                out += &format!("  {d}");
            }
            out.push('\n');
        }
        out += &format!("{}\n", if self.pass { "OK" } else { "FAILED" });
        out
    }
}

/// Top-level scalars and short arrays of the result, one per line.
fn render_result(v: &Value) -> String {
    let mut out = String::new();
    if let Value::Object(map) = v {
        for (k, x) in map {
            let s = x.to_string();
            if s.len() <= 160 {
                out += &format!("  {k}: {s}\n");
            } else {
                out += &format!("  {k}: ({} bytes, see --format json)\n", s.len());
            }
        }
    }
    out
}

/// JSON `{num, den}` for a rational.
pub fn exact_q(x: &ayang_core::Q) -> Value {
    serde_json::to_value(ayang_core::exact::ExactQ::from(x)).expect("strings serialize")
}
