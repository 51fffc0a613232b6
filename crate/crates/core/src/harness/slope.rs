//! Log-log rate-slope regression over recorded gap curves.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::optimizers::RunRecord;

/// Gaps at or below this level count as numerical floor and are excluded.
pub const GAP_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapSeries {
    /// Last-iterate gap f(x_t) − f*.
    Last,
    /// Stated-average-iterate gap.
    Avg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub algorithm: String,
    pub series: GapSeries,
    pub window: (u64, u64),
    /// Window actually used after floor truncation.
    pub used_window: (u64, u64),
    pub truncated: bool,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of ln(gap) on ln(t) over the checkpoints inside `window`,
/// truncating at the first checkpoint whose gap hits the numerical floor.
/// Needs at least five usable checkpoints.
pub fn slope(record: &RunRecord, window: (u64, u64), series: GapSeries) -> Result<SlopeReport> {
    let mut pts = Vec::new();
    let mut truncated = false;
    for rec in &record.records {
        if rec.t < window.0 || rec.t > window.1 {
            continue;
        }
        let gap = match series {
            GapSeries::Last => rec.f_gap,
            GapSeries::Avg => rec.avg_gap,
        };
        if gap <= GAP_FLOOR {
            truncated = true;
            break;
        }
        pts.push((rec.t as f64, gap));
    }
    if pts.len() < 5 {
        return Err(CoreError::Degenerate(format!(
            "slope window [{}, {}] holds {} usable checkpoints (5 needed){}",
            window.0,
            window.1,
            pts.len(),
            if truncated { "; gaps hit the numerical floor" } else { "" }
        )));
    }
    let (slope, intercept, r_squared) = slope_of_points(&pts)?;
    Ok(SlopeReport {
        algorithm: record.config.algorithm.id().to_string(),
        series,
        window,
        used_window: (pts[0].0 as u64, pts[pts.len() - 1].0 as u64),
        truncated,
        slope,
        intercept,
        r_squared,
    })
}

/// OLS on (ln x, ln y); returns (slope, intercept, r²).
pub fn slope_of_points(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 2 {
        return Err(CoreError::Degenerate("slope needs at least two points".into()));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(CoreError::Degenerate("slope needs positive coordinates".into()));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let var_x = lx.iter().map(|v| (v - mx).powi(2)).sum::<f64>();
    if var_x == 0.0 {
        return Err(CoreError::Degenerate("slope needs distinct abscissae".into()));
    }
    let cov = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>();
    let slope = cov / var_x;
    let intercept = my - slope * mx;
    let var_y = ly.iter().map(|v| (v - my).powi(2)).sum::<f64>();
    let r_squared = if var_y == 0.0 { 1.0 } else { cov * cov / (var_x * var_y) };
    Ok((slope, intercept, r_squared))
}

/// Median of the average-iterate gap across runs sharing one checkpoint
/// grid, e.g. a seed sweep.
pub fn median_avg_gap_curve(records: &[RunRecord]) -> Result<Vec<(u64, f64)>> {
    if records.is_empty() {
        return Err(CoreError::Degenerate("no runs to aggregate".into()));
    }
    let grid: Vec<u64> = records[0].records.iter().map(|r| r.t).collect();
    for rec in records {
        let g: Vec<u64> = rec.records.iter().map(|r| r.t).collect();
        if g != grid {
            return Err(CoreError::Degenerate("runs have mismatched checkpoint grids".into()));
        }
    }
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut vals: Vec<f64> = records.iter().map(|r| r.records[i].avg_gap).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = vals.len();
            let median = if m % 2 == 1 {
                vals[m / 2]
            } else {
                0.5 * (vals[m / 2 - 1] + vals[m / 2])
            };
            (t, median)
        })
        .collect())
}
