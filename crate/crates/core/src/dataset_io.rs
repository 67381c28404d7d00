//! Transition-dataset CSV format.
//!
//! Line 1 declares the state kind and dimension: `tabular-index,2` or
//! `real-vector,3`. Every following line is one transition with `2*dim + 1`
//! comma-separated fields: the state components, the reward, the next-state
//! components. Reals are written in shortest round-trip form.

use std::fs;
use std::path::Path;

use crate::dataset::{StateKind, TransitionDataset};
use crate::error::{Error, Result};

/// Writes a dataset to `path` in the transition-CSV format.
pub fn write_dataset_csv(data: &TransitionDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("{},{}\n", data.kind().label(), data.dim()));
    let dim = data.dim();
    for t in 0..data.len() {
        let mut fields: Vec<String> = Vec::with_capacity(2 * dim + 1);
        match data.kind() {
            StateKind::TabularIndex => {
                fields.extend(data.tabular_state(t).iter().map(|s| s.to_string()));
                fields.push(format!("{}", data.reward(t)));
                fields.extend(data.tabular_next(t).iter().map(|s| s.to_string()));
            }
            StateKind::RealVector => {
                fields.extend(data.real_state(t).iter().map(|x| format!("{x}")));
                fields.push(format!("{}", data.reward(t)));
                fields.extend(data.real_next(t).iter().map(|x| format!("{x}")));
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a dataset from the transition-CSV format, reporting malformed input
/// with 1-based line numbers.
pub fn read_dataset_csv(path: &Path) -> Result<TransitionDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let mut parts = header.split(',');
    let kind = match parts.next().map(str::trim) {
        Some("tabular-index") => StateKind::TabularIndex,
        Some("real-vector") => StateKind::RealVector,
        other => {
            return Err(parse_err(
                path,
                1,
                format!("unknown state kind {:?}, expected tabular-index or real-vector", other),
            ))
        }
    };
    let dim: usize = parts
        .next()
        .map(str::trim)
        .ok_or_else(|| parse_err(path, 1, "missing state dimension"))?
        .parse()
        .map_err(|e| parse_err(path, 1, format!("bad state dimension: {e}")))?;
    if dim == 0 {
        return Err(parse_err(path, 1, "state dimension must be >= 1"));
    }
    if parts.next().is_some() {
        return Err(parse_err(path, 1, "trailing fields in the header"));
    }

    let expected = 2 * dim + 1;
    let mut tab_states: Vec<u32> = Vec::new();
    let mut tab_next: Vec<u32> = Vec::new();
    let mut real_states: Vec<f64> = Vec::new();
    let mut real_next: Vec<f64> = Vec::new();
    let mut rewards: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != expected {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let reward: f64 = fields[dim]
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad reward: {e}")))?;
        rewards.push(reward);
        match kind {
            StateKind::TabularIndex => {
                for &f in &fields[..dim] {
                    tab_states.push(
                        f.parse()
                            .map_err(|e| parse_err(path, lineno, format!("bad state index: {e}")))?,
                    );
                }
                for &f in &fields[dim + 1..] {
                    tab_next.push(
                        f.parse()
                            .map_err(|e| parse_err(path, lineno, format!("bad state index: {e}")))?,
                    );
                }
            }
            StateKind::RealVector => {
                for &f in &fields[..dim] {
                    real_states.push(
                        f.parse()
                            .map_err(|e| parse_err(path, lineno, format!("bad state entry: {e}")))?,
                    );
                }
                for &f in &fields[dim + 1..] {
                    real_next.push(
                        f.parse()
                            .map_err(|e| parse_err(path, lineno, format!("bad state entry: {e}")))?,
                    );
                }
            }
        }
    }
    match kind {
        StateKind::TabularIndex => TransitionDataset::from_tabular(dim, tab_states, rewards, tab_next),
        StateKind::RealVector => TransitionDataset::from_real(dim, real_states, rewards, real_next),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{random_stable_matrix, simulate_linear, LinearSystem};
    use crate::seeding::RngSeed;
    use nalgebra::DVector;

    fn temp_path(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("mrpeval-io-{name}-{}", std::process::id()))
    }

    #[test]
    fn real_round_trip_is_bit_exact() {
        let a = random_stable_matrix(2, 0.7, RngSeed(1)).unwrap();
        let sys = LinearSystem::general(a, DVector::from_vec(vec![1.0, -1.0]), 1.0, 0.9).unwrap();
        let data = simulate_linear(&sys, 50, RngSeed(2)).unwrap();
        let path = temp_path("real.csv");
        write_dataset_csv(&data, &path).unwrap();
        let back = read_dataset_csv(&path).unwrap();
        assert_eq!(back.len(), data.len());
        for t in 0..data.len() {
            assert_eq!(back.real_state(t), data.real_state(t));
            assert_eq!(back.reward(t).to_bits(), data.reward(t).to_bits());
            assert_eq!(back.real_next(t), data.real_next(t));
        }
        fs::remove_file(&path).ok();
    }

    #[test]
    fn tabular_round_trip() {
        let data = TransitionDataset::from_tabular(
            2,
            vec![0, 1, 2, 3],
            vec![0.5, -0.25],
            vec![1, 0, 3, 2],
        )
        .unwrap();
        let path = temp_path("tab.csv");
        write_dataset_csv(&data, &path).unwrap();
        let back = read_dataset_csv(&path).unwrap();
        assert_eq!(back.tabular_state(1), data.tabular_state(1));
        assert_eq!(back.tabular_next(0), data.tabular_next(0));
        fs::remove_file(&path).ok();
    }

    #[test]
    fn malformed_line_is_cited() {
        let path = temp_path("bad.csv");
        fs::write(
            &path,
            "real-vector,1\n1.0,2.0,3.0\n1.0,2.0,3.0\nbogus,2.0,3.0\n",
        )
        .unwrap();
        match read_dataset_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::remove_file(&path).ok();
    }

    #[test]
    fn bad_header_is_rejected() {
        let path = temp_path("hdr.csv");
        fs::write(&path, "complex-vector,3\n").unwrap();
        match read_dataset_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::remove_file(&path).ok();
    }
}
