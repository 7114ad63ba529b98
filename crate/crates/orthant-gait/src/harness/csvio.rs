//! Experiment CSV artifacts: schemas, writers and parsers.
//!
//! All files use `.` decimals, `,` separators, a header row and LF line
//! endings; floats are written with Rust's shortest round-trip
//! formatting, so parse-then-serialize is the identity.

use std::io::BufRead;

pub const EVALS_HEADER: &str = "update,step,return,distance";
pub const CURVES_HEADER: &str = "setup,step,norm_return_mean";
pub const DISTANCES_HEADER: &str = "setup,seed,best_distance";
pub const STDDEV_HEADER: &str = "setup,best_reward_std,best_distance_std";

fn bad(msg: String) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, msg)
}

fn split_checked<'a>(line: &'a str, n: usize, what: &str) -> std::io::Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != n {
        return Err(bad(format!("{what}: expected {n} fields, got {}", fields.len())));
    }
    Ok(fields)
}

/// One deterministic evaluation run during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRow {
    pub update: u32,
    pub step: u64,
    pub ret: f64,
    pub distance: f64,
}

impl EvalRow {
    pub fn to_line(&self) -> String {
        format!("{},{},{},{}", self.update, self.step, self.ret, self.distance)
    }
}

pub fn write_evals_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(EVALS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

pub fn read_evals_csv<R: BufRead>(r: R) -> std::io::Result<Vec<EvalRow>> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != EVALS_HEADER {
                return Err(bad(format!("unexpected evals header: {line}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f = split_checked(&line, 4, "evals.csv")?;
        rows.push(EvalRow {
            update: f[0].parse().map_err(|e| bad(format!("update: {e}")))?,
            step: f[1].parse().map_err(|e| bad(format!("step: {e}")))?,
            ret: f[2].parse().map_err(|e| bad(format!("return: {e}")))?,
            distance: f[3].parse().map_err(|e| bad(format!("distance: {e}")))?,
        });
    }
    Ok(rows)
}

/// One point of a per-setup mean normalized learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub setup: String,
    pub step: u64,
    pub norm_return_mean: f64,
}

impl CurveRow {
    pub fn to_line(&self) -> String {
        format!("{},{},{}", self.setup, self.step, self.norm_return_mean)
    }
}

pub fn write_curves_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

pub fn read_curves_csv<R: BufRead>(r: R) -> std::io::Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != CURVES_HEADER {
                return Err(bad(format!("unexpected curves header: {line}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f = split_checked(&line, 3, "learning_curves.csv")?;
        rows.push(CurveRow {
            setup: f[0].to_string(),
            step: f[1].parse().map_err(|e| bad(format!("step: {e}")))?,
            norm_return_mean: f[2].parse().map_err(|e| bad(format!("value: {e}")))?,
        });
    }
    Ok(rows)
}

/// Best walking distance of one run; the baseline row has no seed.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub setup: String,
    pub seed: Option<u64>,
    pub best_distance: f64,
}

impl DistanceRow {
    pub fn to_line(&self) -> String {
        match self.seed {
            Some(seed) => format!("{},{},{}", self.setup, seed, self.best_distance),
            None => format!("{},,{}", self.setup, self.best_distance),
        }
    }
}

pub fn write_distances_csv(rows: &[DistanceRow]) -> String {
    let mut out = String::from(DISTANCES_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

pub fn read_distances_csv<R: BufRead>(r: R) -> std::io::Result<Vec<DistanceRow>> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != DISTANCES_HEADER {
                return Err(bad(format!("unexpected distances header: {line}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f = split_checked(&line, 3, "distances.csv")?;
        let seed = if f[1].is_empty() {
            None
        } else {
            Some(f[1].parse().map_err(|e| bad(format!("seed: {e}")))?)
        };
        rows.push(DistanceRow {
            setup: f[0].to_string(),
            seed,
            best_distance: f[2].parse().map_err(|e| bad(format!("distance: {e}")))?,
        });
    }
    Ok(rows)
}

/// Per-setup spread of the per-seed bests (sample standard deviation).
#[derive(Debug, Clone, PartialEq)]
pub struct StdRow {
    pub setup: String,
    pub best_reward_std: f64,
    pub best_distance_std: f64,
}

impl StdRow {
    pub fn to_line(&self) -> String {
        format!("{},{},{}", self.setup, self.best_reward_std, self.best_distance_std)
    }
}

pub fn write_stddev_csv(rows: &[StdRow]) -> String {
    let mut out = String::from(STDDEV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

pub fn read_stddev_csv<R: BufRead>(r: R) -> std::io::Result<Vec<StdRow>> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != STDDEV_HEADER {
                return Err(bad(format!("unexpected stddev header: {line}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f = split_checked(&line, 3, "stddev.csv")?;
        rows.push(StdRow {
            setup: f[0].to_string(),
            best_reward_std: f[1].parse().map_err(|e| bad(format!("reward std: {e}")))?,
            best_distance_std: f[2].parse().map_err(|e| bad(format!("distance std: {e}")))?,
        });
    }
    Ok(rows)
}

/// Sample (n-1) standard deviation; zero for fewer than two samples.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (ss / (n - 1) as f64).sqrt()
}
