use crate::data::{CcdfPoint, EmpiricalCcdf};
use crate::error::{Error, Result};
use crate::model::{least_squares_slope, log_grid};
use crate::params::Params;

use super::{interpolate_ln_p, positive_points};

pub const MIN_GUESS_POINTS: usize = 20;

const CURVE_PER_DECADE: f64 = 12.0;
const WINDOW: usize = 2;

/// Heuristic starting point read off the log-log CCDF.
///
/// `T` from an exponential fit `ln p = -m/T` to the lower half of the population, `m0` at
/// the most concave point of the smoothed curve, `alpha` from the slope between
/// `p = 0.1` and `p = 0.01`, `m1` at the strongest upward slope break in the tail (the
/// 90% point of the log grid if there is none), `alpha1` from the top decade, `T1 = m1`.
pub fn initial_guess(ccdf: &EmpiricalCcdf) -> Result<Params> {
    let pts = positive_points(ccdf);
    if pts.len() < MIN_GUESS_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} positive CCDF points, need {MIN_GUESS_POINTS}",
            pts.len()
        )));
    }
    let (lo, hi) = (pts[0].m, pts[pts.len() - 1].m);
    if hi / lo < 100.0 {
        return Err(Error::InsufficientData(format!(
            "data span [{lo}, {hi}] is under two decades"
        )));
    }

    let t = exponential_temperature(pts);

    let curve_points = ((hi / lo).log10() * CURVE_PER_DECADE).ceil() as usize + 1;
    let grid = log_grid(lo, hi, curve_points);
    let xs: Vec<f64> = grid.iter().map(|m| m.ln()).collect();
    let ys: Vec<f64> = grid.iter().map(|&m| interpolate_ln_p(pts, m)).collect();
    let slopes: Vec<f64> = (0..curve_points)
        .map(|k| {
            let a = k.saturating_sub(WINDOW);
            let b = (k + WINDOW + 1).min(curve_points);
            least_squares_slope(&xs[a..b], &ys[a..b])
        })
        .collect();
    // slope change across +-WINDOW, negative where the curve bends down
    let bend = |k: usize| (slopes[k + WINDOW] - slopes[k - WINDOW]) / (xs[k + WINDOW] - xs[k - WINDOW]);
    let inner = WINDOW..curve_points - WINDOW;

    // The concave stretch is broad and flat-topped, so take its concavity-weighted centre
    // over the points reaching at least half the peak concavity.
    let candidates: Vec<usize> = inner
        .clone()
        .filter(|&k| ys[k] <= 0.95f64.ln() && ys[k] >= 1e-3f64.ln())
        .collect();
    let peak = candidates.iter().map(|&k| bend(k)).fold(0.0, f64::min);
    let (mut wsum, mut xsum) = (0.0, 0.0);
    for &k in &candidates {
        let b = bend(k);
        if peak < 0.0 && b <= 0.5 * peak {
            wsum -= b;
            xsum -= b * xs[k];
        }
    }
    let m0 = if wsum > 0.0 {
        (xsum / wsum).exp()
    } else {
        grid[curve_points / 2]
    };

    let mid: Vec<&CcdfPoint> = pts.iter().filter(|q| q.p <= 0.1 && q.p >= 0.01).collect();
    let alpha = if mid.len() >= 3 {
        -slope_of(&mid)
    } else {
        2.0
    };

    let tail_break = inner
        .filter(|&k| ys[k] < 0.05f64.ln())
        .map(|k| (k, bend(k)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let m1 = match tail_break {
        Some((k, b)) if b > 0.5 => grid[k],
        _ => grid[(curve_points - 1) * 9 / 10],
    };

    let top: Vec<&CcdfPoint> = pts.iter().filter(|q| q.m >= hi / 10.0).collect();
    let top = if top.len() >= 5 {
        top
    } else {
        pts[pts.len() - 5..].iter().collect()
    };
    let alpha1 = -slope_of(&top);

    Ok(Params {
        t_low: t,
        t_high: m1,
        m0,
        m1,
        alpha: alpha.clamp(0.1, 10.0),
        alpha1: alpha1.clamp(0.1, 10.0),
    })
}

/// Least-squares `T` in `ln p = -m/T` over points with `p >= 0.5`.
fn exponential_temperature(pts: &[CcdfPoint]) -> f64 {
    let bulk = pts.partition_point(|q| q.p >= 0.5).max(3);
    let (mut smm, mut sml) = (0.0, 0.0);
    for q in &pts[..bulk] {
        smm += q.m * q.m;
        sml += q.m * q.p.ln();
    }
    -smm / sml
}

fn slope_of(pts: &[&CcdfPoint]) -> f64 {
    let xs: Vec<f64> = pts.iter().map(|q| q.m.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|q| q.p.ln()).collect();
    least_squares_slope(&xs, &ys)
}
