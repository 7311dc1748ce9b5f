//! Machine-readable run reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA: u32 = 1;

/// Largest denominator tried by [`rational`].
pub const MAX_DENOMINATOR: u64 = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Identifier of the claim the check validates.
    pub anchor: String,
    pub expected: String,
    pub measured: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl Check {
    /// `|measured − expected| ≤ tolerance`.
    pub fn close(name: &str, anchor: &str, expected: f64, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            expected: format_probability(expected),
            measured: format_probability(measured),
            tolerance: Some(tolerance),
            pass: (measured - expected).abs() <= tolerance,
        }
    }

    /// `measured ≥ bound − tolerance`.
    pub fn at_least(name: &str, anchor: &str, bound: f64, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            expected: format!("≥ {}", format_probability(bound)),
            measured: format_probability(measured),
            tolerance: Some(tolerance),
            pass: measured >= bound - tolerance,
        }
    }

    /// `measured < bound`.
    pub fn below(name: &str, anchor: &str, bound: f64, measured: f64) -> Self {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            expected: format!("< {bound:e}"),
            measured: format!("{measured:e}"),
            tolerance: None,
            pass: measured < bound,
        }
    }

    /// `measured > bound`.
    pub fn above(name: &str, anchor: &str, bound: f64, measured: f64) -> Self {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            expected: format!("> {bound}"),
            measured: format!("{measured:.12}"),
            tolerance: None,
            pass: measured > bound,
        }
    }

    pub fn equal<T: std::fmt::Display + PartialEq>(name: &str, anchor: &str, expected: T, measured: T) -> Self {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            pass: expected == measured,
            expected: expected.to_string(),
            measured: measured.to_string(),
            tolerance: None,
        }
    }

    pub fn holds(name: &str, anchor: &str, expected: &str, measured: String, pass: bool) -> Self {
        Check { name: name.into(), anchor: anchor.into(), expected: expected.into(), measured, tolerance: None, pass }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub scenario: String,
    pub parameters: BTreeMap<String, Value>,
    /// Named tables of outcome → formatted probability.
    pub tables: BTreeMap<String, BTreeMap<String, String>>,
    pub checks: Vec<Check>,
    pub seed: u64,
    pub wall_time_ms: f64,
}

impl RunReport {
    pub fn new(scenario: &str, seed: u64) -> Self {
        RunReport {
            schema: SCHEMA,
            scenario: scenario.into(),
            parameters: BTreeMap::new(),
            tables: BTreeMap::new(),
            checks: Vec::new(),
            seed,
            wall_time_ms: 0.0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.parameters.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn table(&mut self, name: &str, rows: impl IntoIterator<Item = (String, f64)>) -> &mut Self {
        let t = self.tables.entry(name.into()).or_default();
        for (k, p) in rows {
            t.insert(k, format_probability(p));
        }
        self
    }

    pub fn check(&mut self, c: Check) -> &mut Self {
        self.checks.push(c);
        self
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The JSON form with the wall time zeroed.
    pub fn to_json_untimed(&self) -> String {
        let mut r = self.clone();
        r.wall_time_ms = 0.0;
        r.to_json()
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("scenario {} (seed {})\n", self.scenario, self.seed);
        for (k, v) in &self.parameters {
            out += &format!("  {k} = {v}\n");
        }
        for (name, rows) in &self.tables {
            out += &format!("{name}\n");
            for (k, p) in rows {
                out += &format!("  {k:<40} {p}\n");
            }
        }
        for c in &self.checks {
            let tol = c.tolerance.map(|t| format!(" ±{t:e}")).unwrap_or_default();
            out += &format!(
                "[{}] {}: expected {}{tol}, measured {} ({})\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.expected,
                c.measured,
                c.anchor
            );
        }
        out += &format!("wall time {:.1} ms\n", self.wall_time_ms);
        out
    }
}

/// `p/q` within `1e-9` of `x` with the smallest `q ≤ 64`.
pub fn rational(x: f64) -> Option<(u64, u64)> {
    if !(0.0..=1.0 + 1e-9).contains(&x) {
        return None;
    }
    (1..=MAX_DENOMINATOR).find_map(|q| {
        let p = (x * q as f64).round();
        ((x - p / q as f64).abs() <= 1e-9).then_some((p as u64, q))
    })
}

/// Twelve decimals plus a rational annotation; eighths and sixteenths are
/// written over 32.
pub fn format_probability(x: f64) -> String {
    let x = if x.abs() < 5e-13 { 0.0 } else { x };
    match rational(x) {
        Some((p, q)) => {
            let (p, q) = if q == 8 || q == 16 { (p * 32 / q, 32) } else { (p, q) };
            format!("{x:.12} ({p}/{q})")
        }
        None => format!("{x:.12}"),
    }
}
