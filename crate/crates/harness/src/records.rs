//! CSV rows produced by the studies.

use std::fmt::Write as _;
use std::path::Path;

use gof_core::diagnostics::{wilson_interval, Z95};

use crate::error::{HarnessError, Result};

pub const POWER_HEADER: &str =
    "study,method,filter,family,d,theta,n,m,N,lambda,rate,lo,hi,reps,seed";
pub const VARIANCE_HEADER: &str = "setting,n,m,d,lambda,ours_variance,hagrass_variance,reps,seed";

/// Empirical rejection rate of one method at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRecord {
    pub study: String,
    pub method: String,
    /// Filter family, or `none` for the baselines.
    pub filter: String,
    pub family: String,
    pub d: usize,
    pub theta: f64,
    pub n: usize,
    pub m: usize,
    pub big_n: usize,
    /// A lambda value, a `lo:hi` grid id, or `none`.
    pub lambda: String,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
    pub reps: usize,
    pub seed: u64,
}

impl PowerRecord {
    /// Sets `rate = rejections / reps` and its Wilson 95% interval.
    pub fn set_counts(&mut self, rejections: usize, reps: usize) {
        let (lo, hi) = wilson_interval(rejections, reps, Z95);
        self.rate = rejections as f64 / reps as f64;
        self.lo = lo;
        self.hi = hi;
        self.reps = reps;
    }

    /// Identifies the curve this row belongs to inside a panel.
    pub fn series(&self) -> String {
        if self.filter == "none" {
            self.method.clone()
        } else {
            format!("{} {} {}", self.method, self.filter, self.lambda)
        }
    }

    fn to_line(&self, out: &mut String) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.study,
            self.method,
            self.filter,
            self.family,
            self.d,
            self.theta,
            self.n,
            self.m,
            self.big_n,
            self.lambda,
            self.rate,
            self.lo,
            self.hi,
            self.reps,
            self.seed
        )
        .expect("writing to a String");
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRecord {
    /// `vary_n`, `vary_d` or `vary_lambda`.
    pub setting: String,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub lambda: f64,
    pub ours_variance: f64,
    pub hagrass_variance: f64,
    pub reps: usize,
    pub seed: u64,
}

pub fn power_csv(records: &[PowerRecord]) -> String {
    let mut out = String::from(POWER_HEADER);
    out.push('\n');
    for r in records {
        r.to_line(&mut out);
    }
    out
}

pub fn variance_csv(records: &[VarianceRecord]) -> String {
    let mut out = String::from(VARIANCE_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.setting, r.n, r.m, r.d, r.lambda, r.ours_variance, r.hagrass_variance, r.reps, r.seed
        )
        .expect("writing to a String");
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::write(path, e))
}

fn field<T: std::str::FromStr>(value: &str, name: &str, row: usize) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Input(format!("row {row}: cannot parse {name} from {value:?}")))
}

/// Parses a power CSV. Row numbers in errors count the header as row 1.
pub fn parse_power_csv(text: &str) -> Result<Vec<PowerRecord>> {
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some(h) if h == POWER_HEADER => {}
        Some(h) => {
            return Err(HarnessError::Input(format!(
                "row 1: expected header {POWER_HEADER:?}, found {h:?}"
            )))
        }
        None => return Err(HarnessError::Input("empty CSV file".into())),
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 15 {
            return Err(HarnessError::Input(format!(
                "row {row}: expected 15 fields, found {}",
                f.len()
            )));
        }
        let rec = PowerRecord {
            study: f[0].trim().to_string(),
            method: f[1].trim().to_string(),
            filter: f[2].trim().to_string(),
            family: f[3].trim().to_string(),
            d: field(f[4], "d", row)?,
            theta: field(f[5], "theta", row)?,
            n: field(f[6], "n", row)?,
            m: field(f[7], "m", row)?,
            big_n: field(f[8], "N", row)?,
            lambda: f[9].trim().to_string(),
            rate: field(f[10], "rate", row)?,
            lo: field(f[11], "lo", row)?,
            hi: field(f[12], "hi", row)?,
            reps: field(f[13], "reps", row)?,
            seed: field(f[14], "seed", row)?,
        };
        let finite = [rec.theta, rec.rate, rec.lo, rec.hi]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(0.0..=1.0).contains(&rec.rate) || rec.lo > rec.rate || rec.rate > rec.hi {
            return Err(HarnessError::Input(format!(
                "row {row}: rate and interval must satisfy 0 <= lo <= rate <= hi <= 1"
            )));
        }
        records.push(rec);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(theta: f64, k: usize) -> PowerRecord {
        let mut r = PowerRecord {
            study: "method_comparison".into(),
            method: "energy_perm".into(),
            filter: "none".into(),
            family: "gaussian_mean".into(),
            d: 10,
            theta,
            n: 200,
            m: 400,
            big_n: 100,
            lambda: "none".into(),
            rate: 0.0,
            lo: 0.0,
            hi: 0.0,
            reps: 0,
            seed: 7,
        };
        r.set_counts(k, 20);
        r
    }

    #[test]
    fn rate_is_exact_fraction_inside_interval() {
        let r = record(0.2, 3);
        assert_eq!(r.rate, 0.15);
        assert!(r.lo <= r.rate && r.rate <= r.hi);
        for k in [0, 20] {
            let r = record(0.0, k);
            assert!(r.lo <= r.rate && r.rate <= r.hi);
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![record(0.0, 1), record(0.2, 7), record(1.2, 20)];
        let text = power_csv(&rows);
        assert!(text.starts_with(POWER_HEADER));
        assert_eq!(parse_power_csv(&text).unwrap(), rows);
    }

    #[test]
    fn parse_errors_name_the_row() {
        let mut text = power_csv(&[record(0.0, 1), record(0.2, 2)]);
        text = text.replace(",0.2,", ",zero point two,");
        let e = parse_power_csv(&text).unwrap_err();
        assert!(e.to_string().contains("row 3"), "{e}");
        assert_eq!(e.exit_code(), 3);
        let e = parse_power_csv("a,b\n").unwrap_err();
        assert!(e.to_string().contains("row 1"), "{e}");
        let e = parse_power_csv(&format!("{POWER_HEADER}\n1,2,3\n")).unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
    }
}
