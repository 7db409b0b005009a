//! Turning run histories into best-value-versus-cost curves, summary
//! statistics, and cost histograms.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::driver::RunHistory;
use crate::error::{Error, Result};

/// Mean and sample standard deviation of best-so-far curves on a shared cost
/// grid, over `count` runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub count: usize,
}

/// A uniform cost grid of `points` values covering `(0, tau]`, ending exactly
/// at `tau`.
pub fn default_grid(tau: f64, points: usize) -> Result<Vec<f64>> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "grid budget must be finite and positive, got {tau}"
        )));
    }
    if points == 0 {
        return Err(Error::InvalidConfig("grid needs at least one point".into()));
    }
    Ok((1..=points)
        .map(|i| tau * i as f64 / points as f64)
        .collect())
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("grid must be non-empty".into()));
    }
    for (i, g) in grid.iter().enumerate() {
        if !(g.is_finite() && *g > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grid point {i} must be finite and positive, got {g}"
            )));
        }
        if i > 0 && grid[i - 1] > *g {
            return Err(Error::InvalidConfig(format!(
                "grid must be non-decreasing, point {i} is {g} after {}",
                grid[i - 1]
            )));
        }
    }
    Ok(())
}

/// Best observed value as a function of spent cost, read off the history as
/// a right-continuous step function: the value at grid point `g` is the
/// best-so-far of the last record whose cumulative cost is at most `g`.
/// Grid points before the first completed evaluation take the first record's
/// value.
pub fn interpolate_history(history: &RunHistory, grid: &[f64]) -> Result<Vec<f64>> {
    validate_grid(grid)?;
    if history.records.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let records = &history.records;
    let mut out = Vec::with_capacity(grid.len());
    let mut idx = 0usize;
    for &g in grid {
        while idx + 1 < records.len() && records[idx + 1].cumulative_cost <= g {
            idx += 1;
        }
        // idx points at the last record with cumulative cost <= g, or the
        // first record when even that one is more expensive than g.
        if records[idx].cumulative_cost <= g {
            out.push(records[idx].best_so_far);
        } else {
            out.push(records[0].best_so_far);
        }
    }
    Ok(out)
}

/// Pointwise mean and sample standard deviation across curves that share a
/// grid. At least two curves are required for the deviation to exist.
pub fn aggregate_curves(grid: &[f64], curves: &[Vec<f64>]) -> Result<AggregateCurve> {
    validate_grid(grid)?;
    if curves.len() < 2 {
        return Err(Error::InvalidData(format!(
            "aggregation needs at least two curves, got {}",
            curves.len()
        )));
    }
    for (i, c) in curves.iter().enumerate() {
        if c.len() != grid.len() {
            return Err(Error::InvalidData(format!(
                "curve {i} has {} points, grid has {}",
                c.len(),
                grid.len()
            )));
        }
    }
    let n = curves.len() as f64;
    let mut mean = vec![0.0; grid.len()];
    let mut std = vec![0.0; grid.len()];
    for j in 0..grid.len() {
        let m = curves.iter().map(|c| c[j]).sum::<f64>() / n;
        let ss = curves.iter().map(|c| (c[j] - m) * (c[j] - m)).sum::<f64>();
        mean[j] = m;
        std[j] = (ss / (n - 1.0)).sqrt();
    }
    Ok(AggregateCurve {
        grid: grid.to_vec(),
        mean,
        std,
        count: curves.len(),
    })
}

/// `count` log-spaced bins covering `[lo, hi]`, returned as `count + 1`
/// ascending edges with the end points exact.
pub fn log_bins(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
        return Err(Error::InvalidConfig(format!(
            "log bins need 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    if count == 0 {
        return Err(Error::InvalidConfig("at least one bin is required".into()));
    }
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    let mut edges: Vec<f64> = (0..=count)
        .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / count as f64).exp())
        .collect();
    edges[0] = lo;
    edges[count] = hi;
    Ok(edges)
}

/// Histogram of per-evaluation costs for each policy present in the
/// histories. `edges` are ascending bin boundaries; costs outside the range
/// are clamped into the end bins, so every evaluation is counted exactly
/// once.
pub fn cost_histogram(
    histories: &[RunHistory],
    edges: &[f64],
) -> Result<Vec<(String, Vec<u64>)>> {
    if edges.len() < 2 {
        return Err(Error::InvalidConfig(
            "a histogram needs at least two bin edges".into(),
        ));
    }
    for (i, e) in edges.iter().enumerate() {
        if !(e.is_finite() && *e > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bin edge {i} must be finite and positive, got {e}"
            )));
        }
        if i > 0 && edges[i - 1] >= *e {
            return Err(Error::InvalidConfig(
                "bin edges must be strictly increasing".into(),
            ));
        }
    }
    let bins = edges.len() - 1;
    let mut by_policy: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for history in histories {
        let counts = by_policy
            .entry(history.meta.policy.clone())
            .or_insert_with(|| vec![0; bins]);
        for record in &history.records {
            let mut bin = match edges.binary_search_by(|e| e.partial_cmp(&record.cost).unwrap())
            {
                Ok(i) => i,
                Err(i) => i.saturating_sub(1),
            };
            bin = bin.min(bins - 1);
            counts[bin] += 1;
        }
    }
    Ok(by_policy.into_iter().collect())
}

/// Write an aggregate curve as CSV with full-precision floats, so reading it
/// back reproduces the numbers bit for bit.
pub fn write_curve_csv<W: Write>(writer: &mut W, curve: &AggregateCurve) -> Result<()> {
    writeln!(writer, "cost,mean,std,n")?;
    for j in 0..curve.grid.len() {
        writeln!(
            writer,
            "{:.16e},{:.16e},{:.16e},{}",
            curve.grid[j], curve.mean[j], curve.std[j], curve.count
        )?;
    }
    Ok(())
}

/// Read an aggregate curve written by [`write_curve_csv`].
pub fn read_curve_csv<R: BufRead>(reader: R) -> Result<AggregateCurve> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::InvalidData("empty curve file".into()))?;
    if header.trim() != "cost,mean,std,n" {
        return Err(Error::InvalidData(format!(
            "unexpected curve header '{header}'"
        )));
    }
    let mut curve = AggregateCurve {
        grid: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
        count: 0,
    };
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::InvalidData(format!(
                "curve row {i} has {} fields, expected 4",
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidData(format!("curve row {i}: {e}")))
        };
        curve.grid.push(parse(fields[0])?);
        curve.mean.push(parse(fields[1])?);
        curve.std.push(parse(fields[2])?);
        let count: usize = fields[3]
            .trim()
            .parse()
            .map_err(|e| Error::InvalidData(format!("curve row {i}: {e}")))?;
        if curve.count == 0 {
            curve.count = count;
        } else if curve.count != count {
            return Err(Error::InvalidData(format!(
                "curve row {i} changes the run count from {} to {count}",
                curve.count
            )));
        }
    }
    if curve.grid.is_empty() {
        return Err(Error::InvalidData("curve file has no rows".into()));
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostModelMode;
    use crate::driver::{RunMeta, RunRecord};

    fn history(policy: &str, tau: f64, entries: &[(f64, f64)]) -> RunHistory {
        // entries: (cost, value)
        let mut records = Vec::new();
        let mut cumulative = 0.0;
        let mut best = f64::INFINITY;
        for (i, (cost, value)) in entries.iter().enumerate() {
            cumulative += cost;
            best = best.min(*value);
            records.push(RunRecord {
                iteration: i,
                point: vec![0.0],
                value: *value,
                cost: *cost,
                cumulative_cost: cumulative,
                best_so_far: best,
                overran: cumulative > tau,
            });
        }
        let n = records.len();
        RunHistory {
            meta: RunMeta {
                problem: "test".into(),
                policy: policy.into(),
                tau,
                seed: 0,
                cost_mode: CostModelMode::Analytic,
                init_points: 0,
                warnings: vec![],
            },
            records,
            overhead_secs: vec![0.0; n],
        }
    }

    #[test]
    fn step_interpolation_is_right_continuous() {
        let h = history("ei", 10.0, &[(1.0, 5.0), (2.0, 2.0)]);
        // Cumulative costs: 1.0 and 3.0; best-so-far: 5.0 then 2.0.
        let grid = [0.5, 1.0, 2.9, 3.0, 10.0];
        let curve = interpolate_history(&h, &grid).unwrap();
        assert_eq!(curve, vec![5.0, 5.0, 5.0, 2.0, 2.0]);
    }

    #[test]
    fn interpolation_validates_inputs() {
        let h = history("ei", 10.0, &[(1.0, 5.0)]);
        assert!(interpolate_history(&h, &[]).is_err());
        assert!(interpolate_history(&h, &[-1.0]).is_err());
        assert!(interpolate_history(&h, &[2.0, 1.0]).is_err());
        let empty = history("ei", 10.0, &[]);
        assert!(matches!(
            interpolate_history(&empty, &[1.0]),
            Err(Error::EmptyHistory)
        ));
    }

    #[test]
    fn aggregate_uses_sample_deviation() {
        let grid = [1.0, 2.0];
        let curves = vec![vec![1.0, 1.0], vec![3.0, 3.0]];
        let agg = aggregate_curves(&grid, &curves).unwrap();
        assert_eq!(agg.mean, vec![2.0, 2.0]);
        let s2 = 2.0f64.sqrt();
        assert!((agg.std[0] - s2).abs() < 1e-15);
        assert!((agg.std[1] - s2).abs() < 1e-15);
        assert_eq!(agg.count, 2);
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let grid = [1.0, 2.0, 3.0];
        let a = vec![vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 0.0], vec![5.0, 5.0, 5.0]];
        let mut b = a.clone();
        b.rotate_left(1);
        let agg_a = aggregate_curves(&grid, &a).unwrap();
        let agg_b = aggregate_curves(&grid, &b).unwrap();
        assert_eq!(agg_a.mean, agg_b.mean);
        for (x, y) in agg_a.std.iter().zip(&agg_b.std) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_rejects_bad_shapes() {
        let grid = [1.0, 2.0];
        assert!(aggregate_curves(&grid, &[]).is_err());
        assert!(aggregate_curves(&grid, &[vec![1.0, 2.0]]).is_err());
        assert!(aggregate_curves(&grid, &[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn histogram_conserves_evaluations() {
        let runs = vec![
            history("ei", 100.0, &[(1.0, 0.0), (4.0, -1.0), (9.5, -2.0)]),
            history("ei", 100.0, &[(0.5, 0.0), (20.0, -1.0)]),
            history("eipu", 100.0, &[(2.0, 0.0), (2.5, -0.5)]),
        ];
        let edges = log_bins(1.0, 10.0, 4).unwrap();
        let hist = cost_histogram(&runs, &edges).unwrap();
        let total: u64 = hist.iter().map(|(_, c)| c.iter().sum::<u64>()).sum();
        assert_eq!(total, 7, "every evaluation lands in some bin");
        let ei = &hist.iter().find(|(p, _)| p == "ei").unwrap().1;
        // 0.5 clamps into the first bin, 20.0 into the last.
        assert_eq!(ei.iter().sum::<u64>(), 5);
    }

    #[test]
    fn log_bins_have_exact_endpoints() {
        let edges = log_bins(0.5, 32.0, 6).unwrap();
        assert_eq!(edges.len(), 7);
        assert_eq!(edges[0], 0.5);
        assert_eq!(edges[6], 32.0);
        for w in edges.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(log_bins(0.0, 1.0, 3).is_err());
        assert!(log_bins(2.0, 1.0, 3).is_err());
    }

    #[test]
    fn curve_csv_round_trips_bit_exactly() {
        let grid = [0.1, 1.0 / 3.0, 2.0];
        let curves = vec![vec![1.5, -0.25, 1e-17], vec![2.5, 0.75, -1e-17]];
        let curve = aggregate_curves(&grid, &curves).unwrap();
        let mut buffer = Vec::new();
        write_curve_csv(&mut buffer, &curve).unwrap();
        let parsed = read_curve_csv(buffer.as_slice()).unwrap();
        assert_eq!(parsed.count, curve.count);
        for (a, b) in parsed.grid.iter().zip(&curve.grid) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in parsed.mean.iter().zip(&curve.mean) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in parsed.std.iter().zip(&curve.std) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn curve_csv_rejects_malformed_input() {
        assert!(read_curve_csv("".as_bytes()).is_err());
        assert!(read_curve_csv("wrong,header\n".as_bytes()).is_err());
        assert!(read_curve_csv("cost,mean,std,n\n1.0,2.0\n".as_bytes()).is_err());
        assert!(
            read_curve_csv("cost,mean,std,n\n1.0,2.0,0.5,2\n2.0,2.0,0.5,3\n".as_bytes())
                .is_err()
        );
    }
}
