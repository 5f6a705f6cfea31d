//! Metric persistence: per-seed CSV curves, a JSON metadata sidecar, and the
//! cross-seed aggregate with its confidence band. Floats are written in
//! shortest round-trip form, so reading a file back recovers the exact bits
//! and every writer is byte-deterministic.

use std::path::Path;

use serde::Serialize;

use recmarl_core::learners::IterationRecord;

use crate::error::CliError;

pub const CURVE_HEADER: &str = "iteration,avg_reward,disc_return,grad_norm";
pub const AGGREGATE_HEADER: &str =
    "iteration,avg_reward_mean,avg_reward_ci95,disc_return_mean,disc_return_ci95";

pub fn curve_csv(rows: &[IterationRecord]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CURVE_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.iteration.to_string());
        s.push(',');
        s.push_str(&r.avg_reward.to_string());
        s.push(',');
        s.push_str(&r.disc_return.to_string());
        s.push(',');
        if let Some(g) = r.grad_norm {
            s.push_str(&g.to_string());
        }
        s.push('\n');
    }
    s
}

pub fn parse_curve_csv(text: &str, origin: &Path) -> Result<Vec<IterationRecord>, CliError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != CURVE_HEADER {
        return Err(CliError::runtime(format!(
            "{}: expected header `{CURVE_HEADER}`, found `{header}`",
            origin.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(CliError::runtime(format!(
                "{} line {}: expected 4 fields, found {}",
                origin.display(),
                i + 2,
                fields.len()
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64, CliError> {
            s.parse().map_err(|_| {
                CliError::runtime(format!(
                    "{} line {}: bad {what} `{s}`",
                    origin.display(),
                    i + 2
                ))
            })
        };
        rows.push(IterationRecord {
            iteration: fields[0].parse().map_err(|_| {
                CliError::runtime(format!(
                    "{} line {}: bad iteration `{}`",
                    origin.display(),
                    i + 2,
                    fields[0]
                ))
            })?,
            avg_reward: num(fields[1], "avg_reward")?,
            disc_return: num(fields[2], "disc_return")?,
            grad_norm: if fields[3].is_empty() {
                None
            } else {
                Some(num(fields[3], "grad_norm")?)
            },
        });
    }
    Ok(rows)
}

/// Mean and half-width of the normal 95% band (1.96 sd / sqrt(n)) per row.
/// Every seed must report the same iteration column.
pub fn aggregate_csv(per_seed: &[Vec<IterationRecord>]) -> Result<String, CliError> {
    let first = per_seed
        .first()
        .ok_or_else(|| CliError::runtime("no per-seed curves to aggregate"))?;
    for (k, rows) in per_seed.iter().enumerate() {
        if rows.len() != first.len()
            || rows
                .iter()
                .zip(first)
                .any(|(a, b)| a.iteration != b.iteration)
        {
            return Err(CliError::runtime(format!(
                "seed #{k} produced a different evaluation grid; cannot aggregate"
            )));
        }
    }
    let n = per_seed.len() as f64;
    let mut s = String::new();
    s.push_str(AGGREGATE_HEADER);
    s.push('\n');
    for i in 0..first.len() {
        let stats = |pick: &dyn Fn(&IterationRecord) -> f64| -> (f64, f64) {
            let mean = per_seed.iter().map(|r| pick(&r[i])).sum::<f64>() / n;
            if per_seed.len() < 2 {
                return (mean, 0.0);
            }
            let var = per_seed
                .iter()
                .map(|r| {
                    let d = pick(&r[i]) - mean;
                    d * d
                })
                .sum::<f64>()
                / (n - 1.0);
            (mean, 1.96 * (var / n).sqrt())
        };
        let (am, ac) = stats(&|r| r.avg_reward);
        let (dm, dc) = stats(&|r| r.disc_return);
        s.push_str(&format!("{},{am},{ac},{dm},{dc}\n", first[i].iteration));
    }
    Ok(s)
}

/// Per-seed metadata written next to the curve file.
#[derive(Serialize)]
pub struct Sidecar<'a> {
    pub seed: u64,
    pub algorithm: &'a str,
    pub version: &'a str,
    pub wall_clock_s: f64,
    pub converged_avg_reward: Option<f64>,
    pub extras: &'a serde_json::Value,
    /// Full resolved config; running it reproduces the curve file exactly.
    pub config: &'a str,
}

pub fn sidecar_json(sidecar: &Sidecar<'_>) -> String {
    let mut s = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iteration: usize, avg: f64, disc: f64, grad: Option<f64>) -> IterationRecord {
        IterationRecord { iteration, avg_reward: avg, disc_return: disc, grad_norm: grad }
    }

    #[test]
    fn curve_round_trips_exactly() {
        let rows = vec![
            row(10, 0.1 + 0.2, 1.0 / 3.0, Some(2.0f64.sqrt())),
            row(20, -0.75, 1e-17, None),
        ];
        let text = curve_csv(&rows);
        let back = parse_curve_csv(&text, Path::new("x.csv")).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn grad_norm_column_is_empty_when_absent() {
        let text = curve_csv(&[row(5, 1.0, 2.0, None)]);
        assert!(text.ends_with("5,1,2,\n"), "{text}");
    }

    #[test]
    fn aggregate_matches_hand_stats() {
        let a = vec![row(10, 1.0, 4.0, None)];
        let b = vec![row(10, 3.0, 8.0, None)];
        let text = aggregate_csv(&[a, b]).unwrap();
        let line = text.lines().nth(1).unwrap();
        let f: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[0], 2.0);
        // sd = sqrt(2), half-width 1.96 * sqrt(2) / sqrt(2) = 1.96
        assert!((f[1] - 1.96).abs() < 1e-12);
        assert_eq!(f[2], 6.0);
        assert!((f[3] - 1.96 * 2.0f64.sqrt() * 2.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn aggregate_of_one_seed_has_zero_band() {
        let text = aggregate_csv(&[vec![row(10, 1.5, 2.5, Some(0.1))]]).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "10,1.5,0,2.5,0");
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = vec![row(10, 1.0, 1.0, None)];
        let b = vec![row(20, 1.0, 1.0, None)];
        assert!(aggregate_csv(&[a, b]).is_err());
    }
}
