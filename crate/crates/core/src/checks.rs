//! Aggregated pass/fail records for inequality suites.

use serde::{Deserialize, Serialize};

/// One inequality family evaluated over many instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub evaluated: usize,
    pub violations: usize,
    pub skipped: usize,
    /// Smallest `rhs - lhs` seen (for `lhs <= rhs`); negative means violated.
    /// Infinite until something is evaluated, written as `null`.
    #[serde(with = "margin")]
    pub worst_margin: f64,
    pub worst_at: String,
    /// Why instances were skipped, if any were.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
}

mod margin {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            evaluated: 0,
            violations: 0,
            skipped: 0,
            worst_margin: f64::INFINITY,
            worst_at: String::new(),
            skip_reason: None,
        }
    }

    /// Records `lhs <= rhs + tol`.
    pub fn le(&mut self, lhs: f64, rhs: f64, tol: f64, at: impl FnOnce() -> String) {
        self.evaluated += 1;
        let margin = rhs - lhs;
        let ok = margin >= -tol && !margin.is_nan();
        if !ok {
            self.violations += 1;
        }
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
            self.worst_at = at();
        }
    }

    /// Records `lhs >= rhs - tol`.
    pub fn ge(&mut self, lhs: f64, rhs: f64, tol: f64, at: impl FnOnce() -> String) {
        self.le(rhs, lhs, tol, at)
    }

    pub fn skip(&mut self, reason: impl Into<String>) {
        self.skipped += 1;
        if self.skip_reason.is_none() {
            self.skip_reason = Some(reason.into());
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn push(&mut self, c: CheckOutcome) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: CheckReport) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn evaluated(&self) -> usize {
        self.checks.iter().map(|c| c.evaluated).sum()
    }

    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Merges outcomes with equal names, for suites run over many chains.
    pub fn merge(&mut self, other: CheckReport) {
        for c in other.checks {
            match self.checks.iter_mut().find(|m| m.name == c.name) {
                Some(m) => {
                    m.evaluated += c.evaluated;
                    m.violations += c.violations;
                    m.skipped += c.skipped;
                    if c.worst_margin < m.worst_margin {
                        m.worst_margin = c.worst_margin;
                        m.worst_at = c.worst_at;
                    }
                    if m.skip_reason.is_none() {
                        m.skip_reason = c.skip_reason;
                    }
                }
                None => self.checks.push(c),
            }
        }
    }

    /// Fixed-column text table.
    pub fn render(&self) -> String {
        let mut out = format!("{:<28} {:>6} {:>9} {:>6} {:>7} {:>13}  {}\n", "check", "status", "evaluated", "failed", "skipped", "worst margin", "worst at");
        for c in &self.checks {
            let status = if c.passed() { "ok" } else { "FAIL" };
            let margin = if c.evaluated == 0 { "-".to_string() } else { format!("{:.3e}", c.worst_margin) };
            out.push_str(&format!(
                "{:<28} {:>6} {:>9} {:>6} {:>7} {:>13}  {}\n",
                c.name, status, c.evaluated, c.violations, c.skipped, margin, c.worst_at
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unevaluated_margin_round_trips() {
        let mut r = CheckReport::default();
        r.push(CheckOutcome::new("empty"));
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"worst_margin\":null"));
        let back: CheckReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn records_worst_instance() {
        let mut c = CheckOutcome::new("x");
        c.le(1.0, 2.0, 0.0, || "a".into());
        c.le(1.0, 1.5, 0.0, || "b".into());
        assert!(c.passed());
        assert_eq!(c.worst_at, "b");
        c.ge(1.0, 1.0 + 1e-12, 1e-10, || "c".into());
        assert!(c.passed());
        c.le(2.0, 1.0, 1e-10, || "d".into());
        assert!(!c.passed());
        assert_eq!(c.violations, 1);
        assert_eq!(c.worst_at, "d");
    }

    #[test]
    fn merge_sums_counts() {
        let mut a = CheckReport::default();
        let mut c = CheckOutcome::new("x");
        c.le(0.0, 1.0, 0.0, String::new);
        a.push(c.clone());
        let mut b = CheckReport::default();
        c.le(2.0, 1.0, 0.0, || "bad".into());
        b.push(c);
        a.merge(b);
        assert_eq!(a.checks.len(), 1);
        assert_eq!(a.evaluated(), 3);
        assert_eq!(a.violations(), 1);
        assert!(a.render().contains("FAIL"));
    }
}
