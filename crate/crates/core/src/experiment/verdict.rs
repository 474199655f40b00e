use std::io::Write;

use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Verdict {
    pub checks: Vec<Check>,
}

impl Verdict {
    pub fn push(&mut self, name: impl Into<String>, value: f64, threshold: f64, pass: bool) {
        self.checks.push(Check { name: name.into(), value, threshold, pass });
    }

    /// Passes when `value ≤ threshold`.
    pub fn at_most(&mut self, name: impl Into<String>, value: f64, threshold: f64) {
        self.push(name, value, threshold, value <= threshold);
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(&mut self, name: impl Into<String>, value: f64, threshold: f64) {
        self.push(name, value, threshold, value >= threshold);
    }

    /// Passes when `value > threshold`.
    pub fn above(&mut self, name: impl Into<String>, value: f64, threshold: f64) {
        self.push(name, value, threshold, value > threshold);
    }

    /// True iff there is at least one check and every check passes.
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Columns `check, value, threshold, pass`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "check,value,threshold,pass")?;
        for c in &self.checks {
            writeln!(w, "{},{},{},{}", c.name, c.value, c.threshold, c.pass)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_pass_needs_every_check() {
        let mut v = Verdict::default();
        assert!(!v.passed());
        v.at_most("a", 1.0, 2.0);
        v.at_least("b", 1.0, 1.0);
        assert!(v.passed());
        v.above("c", f64::NAN, 0.0);
        assert!(!v.passed());
        let mut out = Vec::new();
        v.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "check,value,threshold,pass\na,1,2,true\nb,1,1,true\nc,NaN,0,false\n");
    }
}
