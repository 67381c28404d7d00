//! CSV and metadata emission for experiment results.
//!
//! Output is byte-deterministic: fixed headers, comma separators, `\n` line
//! endings, six significant digits, no locale formatting. MSE experiments emit
//!
//! ```text
//! d,Model-free_empirical,CI_MF_LB,CI_MF_UB,Model-based_empirical,CI_MB_LB,CI_MB_UB
//! ```
//!
//! and ratio experiments emit
//!
//! ```text
//! d,Ratio_empirical,CI_ratios_LB,CI_ratios_UB,Ratio_theoretical
//! ```
//!
//! with an empty last field when no closed form exists.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Duration;

use crate::error::{Error, Result};

use super::{Ci, ExperimentConfig, ExperimentKind, ExperimentRow};

/// Formats with `digits` significant digits, plain decimal notation inside
/// `[1e-4, 1e15)` and exponent notation outside.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp10 = x.abs().log10().floor() as i32;
    if (-4..15).contains(&exp10) {
        let decimals = (digits as i32 - 1 - exp10).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.*e}", digits - 1)
    }
}

fn fmt(x: f64) -> String {
    format_significant(x, 6)
}

fn fmt_ci(ci: &Option<Ci>) -> (String, String, String) {
    match ci {
        Some(ci) => (fmt(ci.point), fmt(ci.lb), fmt(ci.ub)),
        None => ("nan".into(), "nan".into(), "nan".into()),
    }
}

/// Writes the rows of one experiment to `path`, creating parent directories.
pub fn write_csv(kind: ExperimentKind, rows: &[ExperimentRow], path: &Path) -> Result<()> {
    let mut out = String::new();
    if kind.is_ratio() {
        out.push_str("d,Ratio_empirical,CI_ratios_LB,CI_ratios_UB,Ratio_theoretical\n");
        for row in rows {
            let (point, lb, ub) = fmt_ci(&row.ratio);
            let theo = row.ratio_theoretical.map(fmt).unwrap_or_default();
            out.push_str(&format!("{},{point},{lb},{ub},{theo}\n", row.d));
        }
    } else {
        out.push_str(
            "d,Model-free_empirical,CI_MF_LB,CI_MF_UB,Model-based_empirical,CI_MB_LB,CI_MB_UB\n",
        );
        for row in rows {
            let (mf, mf_lb, mf_ub) = fmt_ci(&row.mf);
            let (mb, mb_lb, mb_ub) = fmt_ci(&row.mb);
            out.push_str(&format!(
                "{},{mf},{mf_lb},{mf_ub},{mb},{mb_lb},{mb_ub}\n",
                row.d
            ));
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Writes the run-metadata sidecar: configuration, seed, per-row failure
/// counts, and wall-clock time, in `key=value` lines.
pub fn write_meta(
    cfg: &ExperimentConfig,
    rows: &[ExperimentRow],
    elapsed: Duration,
    path: &Path,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("experiment={}\n", cfg.kind.name()));
    out.push_str(&format!(
        "dims={}\n",
        cfg.dims
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    out.push_str(&format!("n={}\n", cfg.n));
    out.push_str(&format!("reps={}\n", cfg.reps));
    out.push_str(&format!("gamma={}\n", cfg.gamma));
    out.push_str(&format!("sigma={}\n", cfg.sigma));
    out.push_str(&format!("lambda={}\n", cfg.lambda));
    out.push_str(&format!(
        "states_per_component={}\n",
        cfg.states_per_component
    ));
    out.push_str(&format!("base_seed={}\n", cfg.base_seed));
    out.push_str("ci_method=mean +- 1.96*sd/sqrt(reps); ratios via delta method on the quotient of means assuming independent normal means\n");
    for row in rows {
        out.push_str(&format!("failures_d{}={}\n", row.d, row.failures));
    }
    let invalid: Vec<String> = rows
        .iter()
        .filter(|r| !r.is_valid())
        .map(|r| r.d.to_string())
        .collect();
    out.push_str(&format!("invalid_rows={}\n", invalid.join(",")));
    out.push_str(&format!("elapsed_seconds={:.3}\n", elapsed.as_secs_f64()));
    write_atomic(path, out.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(47.909_348_8, 6), "47.9093");
        assert_eq!(format_significant(1.0, 6), "1.00000");
        assert_eq!(format_significant(0.000_123_456_4, 6), "0.000123456");
        assert_eq!(format_significant(-2.5, 6), "-2.50000");
        assert_eq!(format_significant(0.0, 6), "0");
        assert_eq!(format_significant(1.234_567_89e-9, 6), "1.23457e-9");
    }

    #[test]
    fn header_only_for_empty_rows() {
        let dir = std::env::temp_dir().join("mrpeval-csv-test");
        let path = dir.join("empty.csv");
        write_csv(ExperimentKind::Fig3Ratio, &[], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "d,Ratio_empirical,CI_ratios_LB,CI_ratios_UB,Ratio_theoretical\n"
        );
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn round_trip_to_six_digits() {
        let dir = std::env::temp_dir().join("mrpeval-csv-roundtrip");
        let path = dir.join("rows.csv");
        let rows = vec![ExperimentRow {
            d: 5,
            mf: None,
            mb: None,
            ratio: Some(Ci {
                lb: 4.301_234_9,
                point: 4.709_319_2,
                ub: 5.117_403_5,
            }),
            ratio_theoretical: Some(5.472_906_5),
            reps: 10,
            failures: 0,
        }];
        write_csv(ExperimentKind::Fig3Ratio, &rows, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let line = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], "5");
        let parsed: f64 = fields[1].parse().unwrap();
        assert!((parsed - 4.709_319_2).abs() <= 1e-4);
        let theo: f64 = fields[4].parse().unwrap();
        assert!((theo - 5.472_906_5).abs() <= 1e-4);
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn ratio_rows_without_closed_form_leave_the_field_empty() {
        let dir = std::env::temp_dir().join("mrpeval-csv-empty-theo");
        let path = dir.join("rows.csv");
        let rows = vec![ExperimentRow {
            d: 10,
            mf: None,
            mb: None,
            ratio: Some(Ci {
                lb: 1.0,
                point: 2.0,
                ub: 3.0,
            }),
            ratio_theoretical: None,
            reps: 4,
            failures: 0,
        }];
        write_csv(ExperimentKind::Fig2Offline, &rows, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(','));
        fs::remove_dir_all(&dir).ok();
    }
}
