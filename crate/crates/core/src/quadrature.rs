//! Adaptive Gauss-Kronrod integration and the branch-mass integrals of the
//! two-branch equilibrium density.
//!
//! Branch masses are computed after the substitution `u = atan(m / m0)`,
//! which maps `[0, inf)` onto `[0, pi/2)` and turns the kernel
//! `exp(-beta * atan(m/m0)) / (1 + (m/m0)^2)^((alpha+1)/2)` into
//! `m0 * exp(-beta * u) * cos(u)^(alpha - 1)`. Internally the complementary
//! angle `v = pi/2 - u = atan(m0 / m)` is used so that the Pareto end of the
//! range (`v -> 0`) keeps full floating point resolution.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::params::Params;

/// Result of a single adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
    /// Only set when `abs_error_estimate <= rel_tol * max(|value|, abs_floor)`.
    pub converged: bool,
}

/// Knobs for [`integrate_with`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    /// Absolute scale below which `rel_tol` is applied to the floor instead of `|value|`.
    pub abs_floor: f64,
    pub max_panels: usize,
}

pub const DEFAULT_MAX_PANELS: usize = 4096;

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_floor: f64::MIN_POSITIVE,
            max_panels: DEFAULT_MAX_PANELS,
        }
    }
}

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_008_765_345,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_g = 0.0;
    let mut res_k = WGK[10] * fc;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for (j, wg) in WG.iter().enumerate() {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_g += wg * (f1 + f2);
        res_k += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_k += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel { a, b, value, err }
}

fn splittable(p: &Panel) -> bool {
    let mid = 0.5 * (p.a + p.b);
    mid > p.a && mid < p.b && (p.b - p.a) > 8.0 * f64::EPSILON * p.a.abs().max(p.b.abs())
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]` with the default options.
///
/// `f` is never evaluated at the endpoints, so integrable endpoint singularities are
/// handled by repeated bisection of the offending panel.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> QuadResult {
    integrate_with(
        f,
        a,
        b,
        QuadOptions {
            rel_tol,
            ..QuadOptions::default()
        },
    )
}

pub fn integrate_with<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let first = gauss_kronrod_21(&f, a, b);
    let mut evaluations = 21;
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Panel> = Vec::new();
    let mut value = first.value;
    let mut err = first.err;
    heap.push(first);

    let tolerance_met =
        |value: f64, err: f64| err <= opts.rel_tol * value.abs().max(opts.abs_floor);

    while !tolerance_met(value, err) && value.is_finite() {
        if heap.len() + frozen.len() >= opts.max_panels {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        if !splittable(&worst) {
            frozen.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let left = gauss_kronrod_21(&f, worst.a, mid);
        let right = gauss_kronrod_21(&f, mid, worst.b);
        evaluations += 42;
        value += left.value + right.value - worst.value;
        err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum to shed the drift of the running totals.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.extend(frozen);
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value: f64 = panels.iter().map(|p| p.value).sum();
    let err: f64 = panels.iter().map(|p| p.err).sum();
    QuadResult {
        value,
        abs_error_estimate: err,
        evaluations,
        converged: value.is_finite() && err.is_finite() && tolerance_met(value, err),
    }
}

/// Which half of the two-branch density a kernel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Low,
    High,
}

/// Unnormalized single-branch kernel `exp(-beta atan(m/m0)) / (1 + (m/m0)^2)^((alpha+1)/2)`
/// with `beta = m0 / T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Kernel {
    pub m0: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl Kernel {
    pub fn for_branch(params: &Params, branch: Branch) -> Self {
        match branch {
            Branch::Low => Self {
                m0: params.m0,
                beta: params.m0 / params.t_low,
                alpha: params.alpha,
            },
            Branch::High => Self {
                m0: params.m0,
                beta: params.m0 / params.t_high,
                alpha: params.alpha1,
            },
        }
    }

    /// Natural log of the kernel at income `m >= 0`.
    pub fn ln_value(&self, m: f64) -> f64 {
        let x = m / self.m0;
        -self.beta * x.atan() - (self.alpha + 1.0) * x.hypot(1.0).ln()
    }
}

/// Logarithm of a branch mass with its estimated accuracy.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LnMass {
    pub ln_value: f64,
    /// Estimated relative error of `exp(ln_value)`.
    pub rel_error: f64,
}

impl LnMass {
    fn empty() -> Self {
        Self {
            ln_value: f64::NEG_INFINITY,
            rel_error: 0.0,
        }
    }
}

/// `ln` of the integral of `kernel` over `[a, b]`, `b` possibly infinite.
///
/// The integrand is scaled by its value at the left end (`v = v_a`), so results
/// far out in the exponential or Pareto regimes keep their relative accuracy.
pub(crate) fn ln_kernel_mass(kernel: &Kernel, a: f64, b: f64, rel_tol: f64) -> Result<LnMass> {
    if !(a >= 0.0) || !(b >= a) {
        return Err(Error::Domain(format!(
            "branch mass needs 0 <= a <= b, got a={a}, b={b}"
        )));
    }
    if b.is_infinite() && kernel.alpha <= 0.0 {
        return Err(Error::DivergentIntegral(format!(
            "kernel with exponent {} has infinite mass on [{a}, inf)",
            kernel.alpha
        )));
    }
    if a == b {
        return Ok(LnMass::empty());
    }

    let Kernel { m0, beta, alpha } = *kernel;
    let v_a = m0.atan2(a);
    let v_b = if b.is_infinite() { 0.0 } else { m0.atan2(b) };
    let ln_sin_va = m0.ln() - a.hypot(m0).ln();
    let u_a = a.atan2(m0);
    let ln_anchor = m0.ln() - beta * u_a + (alpha - 1.0) * ln_sin_va;

    let ratio = |v: f64| (-beta * (v_a - v) + (alpha - 1.0) * (v.sin().ln() - ln_sin_va)).exp();

    let (scaled, rel_error) = if b.is_finite() || alpha >= 1.0 {
        let r = integrate_adaptive(ratio, v_b, v_a, rel_tol);
        if !r.converged {
            return Err(Error::Quadrature {
                achieved: r.abs_error_estimate / r.value.abs(),
                requested: rel_tol,
            });
        }
        (r.value, r.abs_error_estimate / r.value.abs())
    } else {
        singular_tail(&ratio, v_a, beta, alpha, ln_sin_va, rel_tol)?
    };

    Ok(LnMass {
        ln_value: ln_anchor + scaled.ln(),
        rel_error,
    })
}

/// Integral of the scaled kernel over `(0, v_top]` when the integrand blows up like
/// `v^(alpha-1)` at `v = 0` (`0 < alpha < 1`).
///
/// Panels halve geometrically toward zero; the last sliver `(0, eps]` is replaced by
/// the midpoint of an analytic enclosure. With `s = sin(v_top)` and
/// `v^(alpha-1) (1 - eps^2/6)^(alpha-1) >= sin(v)^(alpha-1) >= v^(alpha-1)` on the sliver,
/// its integral lies in `[lower, lower * exp(beta eps) (1 - eps^2/6)^(alpha-1)]`
/// where `lower = exp(-beta v_top) s^(1-alpha) eps^alpha / alpha`.
fn singular_tail<F: Fn(f64) -> f64>(
    ratio: &F,
    v_top: f64,
    beta: f64,
    alpha: f64,
    ln_sin_top: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    let mut sum = 0.0;
    let mut abs_err = 0.0;
    let mut hi = v_top;
    for _ in 0..DEFAULT_MAX_PANELS {
        let lo = 0.5 * hi;
        let r = integrate_adaptive(ratio, lo, hi, rel_tol);
        if !r.converged {
            return Err(Error::Quadrature {
                achieved: r.abs_error_estimate / r.value.abs(),
                requested: rel_tol,
            });
        }
        sum += r.value;
        abs_err += r.abs_error_estimate;
        hi = lo;

        let eps = hi;
        if eps < 1.0 {
            let lower = (-beta * v_top + (1.0 - alpha) * ln_sin_top + alpha * eps.ln()
                - alpha.ln())
            .exp();
            let upper = lower * (beta * eps).exp() * (1.0 - eps * eps / 6.0).powf(alpha - 1.0);
            let sliver_err = 0.5 * (upper - lower);
            let total = sum + 0.5 * (upper + lower);
            if sliver_err <= 0.1 * rel_tol * total {
                let err = abs_err + sliver_err;
                return Ok((total, err / total));
            }
        }
    }
    Err(Error::Quadrature {
        achieved: f64::INFINITY,
        requested: rel_tol,
    })
}

/// Relative tolerance used by [`branch_mass`].
pub const BRANCH_MASS_TOL: f64 = 1e-13;

/// Integral of the unnormalized `branch` kernel of `params` over `[a, b]`
/// (`b = f64::INFINITY` allowed). Units are EUR since the kernel is dimensionless.
pub fn branch_mass(params: &Params, branch: Branch, a: f64, b: f64) -> Result<f64> {
    let kernel = Kernel::for_branch(params, branch);
    if !(kernel.m0 > 0.0) || !(kernel.beta > 0.0) || !kernel.beta.is_finite() {
        return Err(Error::InvalidParams(
            "branch kernel needs m0 > 0 and a positive temperature".into(),
        ));
    }
    let m = ln_kernel_mass(&kernel, a, b, BRANCH_MASS_TOL)?;
    Ok(m.ln_value.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn kronrod_weights_sum_to_interval_length() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_panel_is_exact_for_high_degree_polynomials() {
        // Kronrod-21 is exact through degree 31, Gauss-10 through 19.
        let p = gauss_kronrod_21(&|x: f64| x.powi(30), -1.0, 1.0);
        assert!((p.value - 2.0 / 31.0).abs() < 1e-15);
        let p = gauss_kronrod_21(&|x: f64| 3.0 * x.powi(18) + x.powi(7), 0.0, 1.0);
        assert!((p.value - (3.0 / 19.0 + 1.0 / 8.0)).abs() < 1e-15);
    }

    #[test]
    fn constant_integrates_exactly() {
        let r = integrate_adaptive(|_| 1.0, 0.0, 1.0, 1e-12);
        assert!(r.converged);
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn exponential_matches_closed_form() {
        let r = integrate_adaptive(|u: f64| (-u).exp(), 0.0, 20.0, 1e-10);
        let exact = 1.0 - (-20.0f64).exp();
        assert!(r.converged);
        assert!((r.value - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn empty_interval_is_zero() {
        let r = integrate_adaptive(|u: f64| u, 3.0, 3.0, 1e-10);
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn converged_flag_is_honest_when_panels_run_out() {
        let r = integrate_with(
            |x: f64| (1.0 / x).sin() / x,
            1e-6,
            1.0,
            QuadOptions {
                rel_tol: 1e-14,
                max_panels: 8,
                ..QuadOptions::default()
            },
        );
        assert!(!r.converged);
        assert!(r.abs_error_estimate > 1e-14 * r.value.abs());
    }

    fn p(t: f64, t1: f64, m0: f64, m1: f64, a: f64, a1: f64) -> Params {
        Params::new(t, t1, m0, m1, a, a1).unwrap()
    }

    #[test]
    fn low_branch_mass_matches_closed_form() {
        // alpha = 3, T = m0: m0 * int_0^{pi/2} e^{-u} cos^2 u du = m0 (3/5 - (2/5) e^{-pi/2}).
        let m0 = 2.5e4;
        let params = p(m0, m0, m0, 1e6, 3.0, 3.0);
        let exact = m0 * (0.6 - 0.4 * (-FRAC_PI_2).exp());
        let got = branch_mass(&params, Branch::Low, 0.0, f64::INFINITY).unwrap();
        assert!((got - exact).abs() <= 1e-13 * exact, "{got} vs {exact}");
    }

    #[test]
    fn mass_of_empty_interval_is_zero() {
        let params = p(3.8e4, 4.5e5, 1.35e5, 4.5e5, 3.153, 0.77);
        assert_eq!(branch_mass(&params, Branch::High, 7e5, 7e5).unwrap(), 0.0);
    }

    #[test]
    fn branch_mass_is_additive() {
        let params = p(3.8e4, 4.5e5, 1.35e5, 4.5e5, 3.153, 0.77);
        for branch in [Branch::Low, Branch::High] {
            let left = branch_mass(&params, branch, 0.0, params.m1).unwrap();
            let right = branch_mass(&params, branch, params.m1, f64::INFINITY).unwrap();
            let whole = branch_mass(&params, branch, 0.0, f64::INFINITY).unwrap();
            assert!(
                ((left + right) - whole).abs() <= 1e-12 * whole,
                "{branch:?}: {} vs {whole}",
                left + right
            );
        }
    }

    #[test]
    fn divergent_tail_is_rejected() {
        let kernel = Kernel {
            m0: 1.0,
            beta: 1.0,
            alpha: -0.5,
        };
        assert!(matches!(
            ln_kernel_mass(&kernel, 1.0, f64::INFINITY, 1e-10),
            Err(Error::DivergentIntegral(_))
        ));
        // finite upper limit is fine
        assert!(ln_kernel_mass(&kernel, 1.0, 10.0, 1e-10).is_ok());
    }

    #[test]
    fn negative_lower_limit_is_a_domain_error() {
        let params = p(1.0, 1.0, 1.0, 2.0, 2.0, 2.0);
        assert!(matches!(
            branch_mass(&params, Branch::Low, -1.0, 1.0),
            Err(Error::Domain(_))
        ));
    }
}
