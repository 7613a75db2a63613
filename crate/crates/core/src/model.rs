//! The normalized two-branch equilibrium density.
//!
//! Below the threshold `m1` the density is `c' exp(-(m0/T) atan(m/m0)) / (1 + (m/m0)^2)^((alpha+1)/2)`,
//! above it the same form with `T1`, `alpha1` and constant `c''`. The ratio `c''/c'` is fixed by
//! continuity at `m1`, `c'` by unit total mass. All evaluation runs in log space so that the far
//! Pareto tail neither underflows nor loses relative precision.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::Params;
use crate::quadrature::{ln_kernel_mass, Branch, Kernel, LnMass};

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// `Params` together with the normalization constants, ready for evaluation.
///
/// Immutable once built; all methods take `&self` and are safe to share across threads.
#[derive(Debug, Clone)]
pub struct NormalizedModel {
    params: Params,
    quad_tol: f64,
    low: Kernel,
    high: Kernel,
    ln_c_low: f64,
    /// `ln pdf(m1)`; the high branch is evaluated relative to this anchor.
    ln_pdf_at_m1: f64,
    ln_high_kernel_at_m1: f64,
    /// P(m >= m1).
    upper_mass: f64,
    normalization_rel_error: f64,
}

/// Serializable snapshot of a model: the parameters plus both normalization constants.
#[derive(Debug, Clone, Serialize)]
pub struct ModelDiagnostics {
    #[serde(flatten)]
    pub params: Params,
    pub c_low: f64,
    pub c_high: f64,
    pub quad_tol: f64,
    /// Probability mass above `m1`.
    pub upper_mass: f64,
    /// Estimated relative error of the normalization integral.
    pub normalization_rel_error: f64,
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + (-(a - b).abs()).exp().ln_1p()
}

/// Builds the normalized density for `params`, integrating each branch to relative
/// tolerance `quad_tol` (`0 < quad_tol <= 1e-6`).
pub fn normalize(params: Params, quad_tol: f64) -> Result<NormalizedModel> {
    if !(params.alpha1 > 0.0) {
        return Err(Error::NonNormalizable(format!(
            "alpha1 = {} <= 0: the tail above m1 has infinite mass",
            params.alpha1
        )));
    }
    params.validate()?;
    if !(quad_tol > 0.0 && quad_tol <= 1e-6) {
        return Err(Error::Config(format!(
            "quad_tol must lie in (0, 1e-6], got {quad_tol}"
        )));
    }

    let low = Kernel::for_branch(&params, Branch::Low);
    let high = Kernel::for_branch(&params, Branch::High);
    let mass_low = ln_kernel_mass(&low, 0.0, params.m1, quad_tol)?;
    let mass_high = ln_kernel_mass(&high, params.m1, f64::INFINITY, quad_tol)?;

    let ln_low_at_m1 = low.ln_value(params.m1);
    let ln_high_at_m1 = high.ln_value(params.m1);
    // c''/c' from continuity at m1.
    let ln_ratio = ln_low_at_m1 - ln_high_at_m1;
    let ln_total = ln_add_exp(mass_low.ln_value, ln_ratio + mass_high.ln_value);
    let ln_c_low = -ln_total;

    let ln_pdf_at_m1 = ln_c_low + ln_low_at_m1;
    // same expression as `ln_ccdf(m1)`, so the CCDF is continuous to the last bit
    let upper_mass = ((ln_pdf_at_m1 - ln_high_at_m1) + mass_high.ln_value).exp();
    let lower_mass = (ln_c_low + mass_low.ln_value).exp();
    let normalization_rel_error =
        lower_mass * mass_low.rel_error + upper_mass * mass_high.rel_error;

    Ok(NormalizedModel {
        params,
        quad_tol,
        low,
        high,
        ln_c_low,
        ln_pdf_at_m1,
        ln_high_kernel_at_m1: ln_high_at_m1,
        upper_mass,
        normalization_rel_error,
    })
}

fn check_income(m: f64) -> Result<()> {
    if m >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("income must be >= 0, got {m}")))
    }
}

impl NormalizedModel {
    /// Normalizes with the default quadrature tolerance.
    pub fn new(params: Params) -> Result<Self> {
        normalize(params, DEFAULT_QUAD_TOL)
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    /// c'
    pub fn c_low(&self) -> f64 {
        self.ln_c_low.exp()
    }

    /// c''
    pub fn c_high(&self) -> f64 {
        self.ln_c_high().exp()
    }

    fn ln_c_high(&self) -> f64 {
        self.ln_pdf_at_m1 - self.ln_high_kernel_at_m1
    }

    /// Probability of an income at or above the threshold `m1`.
    pub fn upper_mass(&self) -> f64 {
        self.upper_mass
    }

    pub fn diagnostics(&self) -> ModelDiagnostics {
        ModelDiagnostics {
            params: self.params,
            c_low: self.c_low(),
            c_high: self.c_high(),
            quad_tol: self.quad_tol,
            upper_mass: self.upper_mass,
            normalization_rel_error: self.normalization_rel_error,
        }
    }

    /// Low-branch density formula evaluated at any `m`, ignoring the threshold.
    pub fn low_branch_density(&self, m: f64) -> f64 {
        (self.ln_c_low + self.low.ln_value(m)).exp()
    }

    /// High-branch density formula evaluated at any `m`, ignoring the threshold.
    pub fn high_branch_density(&self, m: f64) -> f64 {
        (self.ln_pdf_at_m1 + (self.high.ln_value(m) - self.ln_high_kernel_at_m1)).exp()
    }

    /// Relative mismatch of the two branch formulas at `m1`.
    pub fn continuity_defect(&self) -> f64 {
        let lo = self.low_branch_density(self.params.m1);
        let hi = self.high_branch_density(self.params.m1);
        (lo - hi).abs() / lo
    }

    fn ln_pdf_unchecked(&self, m: f64) -> f64 {
        if m < self.params.m1 {
            self.ln_c_low + self.low.ln_value(m)
        } else {
            self.ln_pdf_at_m1 + (self.high.ln_value(m) - self.ln_high_kernel_at_m1)
        }
    }

    pub fn ln_pdf(&self, m: f64) -> Result<f64> {
        check_income(m)?;
        Ok(self.ln_pdf_unchecked(m))
    }

    /// Equilibrium density at income `m` (1/EUR).
    pub fn pdf(&self, m: f64) -> Result<f64> {
        Ok(self.ln_pdf(m)?.exp())
    }

    fn mass(&self, branch: Branch, a: f64, b: f64) -> Result<LnMass> {
        let kernel = match branch {
            Branch::Low => &self.low,
            Branch::High => &self.high,
        };
        ln_kernel_mass(kernel, a, b, self.quad_tol)
    }

    /// Probability of `a <= m < b` for `0 <= a <= b`.
    pub fn probability_between(&self, a: f64, b: f64) -> Result<f64> {
        check_income(a)?;
        if !(b >= a) {
            return Err(Error::Domain(format!("need a <= b, got a={a}, b={b}")));
        }
        let m1 = self.params.m1;
        let mut total = 0.0;
        if a < m1 {
            let top = b.min(m1);
            total += (self.ln_c_low + self.mass(Branch::Low, a, top)?.ln_value).exp();
        }
        if b > m1 {
            let bottom = a.max(m1);
            total += (self.ln_c_high() + self.mass(Branch::High, bottom, b)?.ln_value).exp();
        }
        Ok(total)
    }

    /// `ln P(income > m)`.
    pub fn ln_ccdf(&self, m: f64) -> Result<f64> {
        check_income(m)?;
        if m.is_infinite() {
            return Ok(f64::NEG_INFINITY);
        }
        let m1 = self.params.m1;
        if m >= m1 {
            Ok(self.ln_c_high() + self.mass(Branch::High, m, f64::INFINITY)?.ln_value)
        } else {
            let inner = (self.ln_c_low + self.mass(Branch::Low, m, m1)?.ln_value).exp();
            Ok((inner + self.upper_mass).min(1.0).ln())
        }
    }

    /// Complementary CDF `P(income > m)`, by quadrature of the branch kernels.
    pub fn ccdf(&self, m: f64) -> Result<f64> {
        Ok(self.ln_ccdf(m)?.exp())
    }

    pub fn cdf(&self, m: f64) -> Result<f64> {
        check_income(m)?;
        if m < self.params.m1 {
            self.probability_between(0.0, m)
        } else {
            Ok(1.0 - self.ccdf(m)?)
        }
    }

    /// CCDF at every point of an ascending grid.
    ///
    /// Sums segment masses from the top down, which is much cheaper than independent
    /// evaluations and keeps the relative accuracy of the tail values.
    pub fn ccdf_grid(&self, ms: &[f64]) -> Result<Vec<f64>> {
        let Some(&last) = ms.last() else {
            return Ok(Vec::new());
        };
        check_income(ms[0])?;
        if ms.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::Domain("ccdf grid must be ascending".into()));
        }
        let mut out = vec![0.0; ms.len()];
        let n = ms.len();
        out[n - 1] = self.ccdf(last)?;
        for i in (0..n - 1).rev() {
            out[i] = (out[i + 1] + self.probability_between(ms[i], ms[i + 1])?).min(1.0);
        }
        Ok(out)
    }

    /// Income `m` with `ccdf(m) = p`, for `0 < p < 1`.
    ///
    /// Newton iteration on `ln ccdf` versus `ln m`, safeguarded by a shrinking bracket.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile needs 0 < p < 1, got {p}")));
        }
        let ln_p = p.ln();
        let Params { t_low, m0, m1, .. } = self.params;
        let mut lo = m0 * 1e-30;
        let mut hi = m0.max(m1).max(t_low);
        loop {
            if self.ln_ccdf(hi)? <= ln_p {
                break;
            }
            lo = hi;
            hi *= 8.0;
            if hi > 1e300 {
                return Err(Error::Domain(format!(
                    "quantile for p={p} lies beyond the representable income range"
                )));
            }
        }

        let mut m = hi;
        for _ in 0..300 {
            let ln_c = self.ln_ccdf(m)?;
            let f = ln_c - ln_p;
            if f.abs() <= 1e-12 {
                return Ok(m);
            }
            if f > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
            if hi / lo - 1.0 <= 4.0 * f64::EPSILON {
                return Ok(m);
            }
            // d ln ccdf / d ln m
            let slope = -(m.ln() + self.ln_pdf_unchecked(m) - ln_c).exp();
            let next = if slope < 0.0 && slope.is_finite() {
                (m.ln() - f / slope).exp()
            } else {
                f64::NAN
            };
            m = if next > lo && next < hi {
                next
            } else {
                (lo * hi).sqrt()
            };
        }
        Ok(m)
    }

    /// `n` independent incomes drawn by inverting the CCDF at seeded uniform variates.
    ///
    /// The same `(n, seed)` always produces the same vector.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::Domain("sample size must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let uniforms: Vec<f64> = (0..n).map(|_| open_unit(rng.next_u64())).collect();
        let table = InverseTable::build(self)?;
        uniforms.par_iter().map(|&p| table.invert(self, p)).collect()
    }

    /// Least-squares slope of `ln ccdf` against `ln m` on `k` log-spaced points in `[m_lo, m_hi]`.
    pub fn ccdf_slope(&self, m_lo: f64, m_hi: f64, k: usize) -> Result<f64> {
        if !(m_lo > 0.0 && m_hi > m_lo) || k < 2 {
            return Err(Error::Domain(format!(
                "slope needs 0 < m_lo < m_hi and k >= 2, got [{m_lo}, {m_hi}], k={k}"
            )));
        }
        let grid = log_grid(m_lo, m_hi, k);
        let xs: Vec<f64> = grid.iter().map(|m| m.ln()).collect();
        let ys = grid
            .iter()
            .map(|&m| self.ln_ccdf(m))
            .collect::<Result<Vec<_>>>()?;
        Ok(least_squares_slope(&xs, &ys))
    }

    /// [`ccdf_slope`](Self::ccdf_slope) restricted to the Pareto branch, `m1 <= m_lo`.
    /// Tends to `-alpha1` far above `m1`.
    pub fn tail_slope(&self, m_lo: f64, m_hi: f64, k: usize) -> Result<f64> {
        if m_lo < self.params.m1 {
            return Err(Error::Domain(format!(
                "tail slope interval starts at {m_lo}, below m1 = {}",
                self.params.m1
            )));
        }
        self.ccdf_slope(m_lo, m_hi, k)
    }
}

/// Maps 53 random bits to the open interval (0, 1).
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// `n` points from `lo` to `hi` (inclusive), equally spaced in `ln m`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let step = (b - a) / (n - 1) as f64;
            let mut g: Vec<f64> = (0..n).map(|i| (a + step * i as f64).exp()).collect();
            g[0] = lo;
            g[n - 1] = hi;
            g
        }
    }
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Tabulated CCDF used to locate each uniform variate before a local Newton solve.
struct InverseTable {
    knots: Vec<f64>,
    ccdf: Vec<f64>,
}

const TABLE_POINTS_PER_DECADE: f64 = 16.0;
const SMALLEST_UNIFORM: f64 = 1e-17;

impl InverseTable {
    fn build(model: &NormalizedModel) -> Result<Self> {
        let Params { t_low, m0, m1, .. } = model.params;
        let start = 1e-4 * t_low.min(m0).min(m1);
        let top = match model.quantile(SMALLEST_UNIFORM) {
            Ok(m) => m.max(m1 * 1.5),
            Err(Error::Domain(_)) => 1e300,
            Err(e) => return Err(e),
        };
        let decades = (top / start).log10().max(1.0);
        let n = (decades * TABLE_POINTS_PER_DECADE).ceil() as usize + 1;
        let mut knots = vec![0.0];
        knots.extend(log_grid(start, top, n));
        if let Err(pos) = knots.binary_search_by(|k| k.total_cmp(&m1)) {
            knots.insert(pos, m1);
        }
        let ccdf = model.ccdf_grid(&knots)?;
        Ok(Self { knots, ccdf })
    }

    fn invert(&self, model: &NormalizedModel, p: f64) -> Result<f64> {
        let last = *self.ccdf.last().unwrap();
        if p < last {
            return model.quantile(p);
        }
        // ccdf is descending: first index whose value drops below p.
        let k = self.ccdf.partition_point(|&c| c >= p).clamp(1, self.ccdf.len() - 1) - 1;
        let (lo, hi) = (self.knots[k], self.knots[k + 1]);
        let (c_lo, c_hi) = (self.ccdf[k], self.ccdf[k + 1]);
        let target = c_lo - p;

        let (mut a, mut b) = (lo, hi);
        let t = if c_lo > c_hi { (target / (c_lo - c_hi)).clamp(0.0, 1.0) } else { 0.5 };
        let mut m = lo + t * (hi - lo);
        if !(m > a && m < b) {
            m = 0.5 * (a + b);
        }
        for _ in 0..100 {
            let f = target - model.probability_between(lo, m)?;
            if f.abs() <= 1e-13 * p {
                return Ok(m);
            }
            if f > 0.0 {
                a = m;
            } else {
                b = m;
            }
            if b - a <= 4.0 * f64::EPSILON * b {
                return Ok(m);
            }
            let density = model.ln_pdf_unchecked(m).exp();
            let next = m + f / density;
            m = if next > a && next < b {
                next
            } else if a > 0.0 {
                (a * b).sqrt()
            } else {
                0.5 * (a + b)
            };
        }
        Ok(m)
    }
}
