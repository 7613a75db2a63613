//! Effective parameters of the two-branch distribution and the Fokker-Planck
//! coefficients that generate them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six effective parameters of the two-branch equilibrium density.
///
/// Monetary fields are in EUR. Serialized as a flat object with keys
/// `T`, `T1`, `m0`, `m1`, `alpha`, `alpha1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Income temperature of the low-income (Boltzmann-Gibbs) regime.
    #[serde(rename = "T")]
    pub t_low: f64,
    /// Income temperature of the high-income branch.
    #[serde(rename = "T1")]
    pub t_high: f64,
    /// Crossover between low and medium incomes; enters through `B(m) = b (m0^2 + m^2)`.
    pub m0: f64,
    /// Drift threshold, the crossover between medium and high incomes.
    pub m1: f64,
    /// Pareto-like exponent of the medium-income class.
    pub alpha: f64,
    /// Pareto exponent of the high-income class.
    pub alpha1: f64,
}

impl Params {
    pub fn new(t_low: f64, t_high: f64, m0: f64, m1: f64, alpha: f64, alpha1: f64) -> Result<Self> {
        let p = Self {
            t_low,
            t_high,
            m0,
            m1,
            alpha,
            alpha1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("T", self.t_low)?;
        positive("T1", self.t_high)?;
        positive("m0", self.m0)?;
        positive("m1", self.m1)?;
        positive("alpha", self.alpha)?;
        positive("alpha1", self.alpha1)
    }

    /// Same shape with every monetary parameter multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            t_low: self.t_low * factor,
            t_high: self.t_high * factor,
            m0: self.m0 * factor,
            m1: self.m1 * factor,
            ..*self
        }
    }

    pub(crate) fn to_array(self) -> [f64; 6] {
        [self.t_low, self.t_high, self.m0, self.m1, self.alpha, self.alpha1]
    }

    pub(crate) fn from_array(v: [f64; 6]) -> Self {
        Self {
            t_low: v[0],
            t_high: v[1],
            m0: v[2],
            m1: v[3],
            alpha: v[4],
            alpha1: v[5],
        }
    }
}

/// Parameter names in the order used by [`Params::to_array`].
pub const PARAM_NAMES: [&str; 6] = ["T", "T1", "m0", "m1", "alpha", "alpha1"];

/// Drift and diffusion coefficients of the Fokker-Planck equation:
/// `A(m) = A0 + a m` below `m1`, `A0' + a' m` above, and `B(m) = B0 + b m^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpCoefficients {
    /// A0, EUR per unit time.
    pub a0_low: f64,
    /// a, per unit time.
    pub a_low: f64,
    /// A0', EUR per unit time.
    pub a0_high: f64,
    /// a', per unit time.
    pub a_high: f64,
    /// B0, EUR^2 per unit time.
    pub b0: f64,
    /// b, per unit time.
    pub b: f64,
    /// Lowest household income. Absorbed into the normalization; kept for the record.
    #[serde(default)]
    pub m_init: f64,
}

impl FpCoefficients {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) || !(self.b0 > 0.0 && self.b0.is_finite()) {
            return Err(Error::InvalidCoefficients(format!(
                "diffusion needs b > 0 and B0 > 0, got b={}, B0={}",
                self.b, self.b0
            )));
        }
        if !(self.a0_low > 0.0) || !(self.a0_high > 0.0) {
            return Err(Error::InvalidCoefficients(format!(
                "additive drifts must be positive for positive temperatures, got A0={}, A0'={}",
                self.a0_low, self.a0_high
            )));
        }
        if !self.a_low.is_finite() || !self.a_high.is_finite() || !self.m_init.is_finite() {
            return Err(Error::InvalidCoefficients("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// `m0 = sqrt(B0 / b)`.
    pub fn m0(&self) -> f64 {
        (self.b0 / self.b).sqrt()
    }

    /// Drift coefficient `A(m)` with the threshold at `m1`.
    #[inline]
    pub fn drift(&self, m: f64, m1: f64) -> f64 {
        if m < m1 {
            self.a0_low + self.a_low * m
        } else {
            self.a0_high + self.a_high * m
        }
    }

    /// Diffusion coefficient `B(m)`.
    #[inline]
    pub fn diffusion(&self, m: f64) -> f64 {
        self.b0 + self.b * m * m
    }

    /// Coefficients with diffusion rate `b` that generate `params`.
    pub fn realizing(params: &Params, b: f64) -> Result<Self> {
        params.validate()?;
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidCoefficients(format!("b must be > 0, got {b}")));
        }
        let b0 = b * params.m0 * params.m0;
        Ok(Self {
            a0_low: b0 / params.t_low,
            a_low: b * (params.alpha - 1.0),
            a0_high: b0 / params.t_high,
            a_high: b * (params.alpha1 - 1.0),
            b0,
            b,
            m_init: 0.0,
        })
    }
}

/// Effective parameters generated by `coeffs` with drift threshold `m1`:
/// `alpha = 1 + a/b`, `alpha1 = 1 + a'/b`, `T = B0/A0`, `T1 = B0/A0'`, `m0 = sqrt(B0/b)`.
pub fn from_fp_coefficients(coeffs: &FpCoefficients, m1: f64) -> Result<Params> {
    coeffs.validate()?;
    if !(m1 > 0.0 && m1.is_finite()) {
        return Err(Error::InvalidCoefficients(format!("threshold m1 must be > 0, got {m1}")));
    }
    let params = Params {
        t_low: coeffs.b0 / coeffs.a0_low,
        t_high: coeffs.b0 / coeffs.a0_high,
        m0: coeffs.m0(),
        m1,
        alpha: 1.0 + coeffs.a_low / coeffs.b,
        alpha1: 1.0 + coeffs.a_high / coeffs.b,
    };
    params
        .validate()
        .map_err(|e| Error::InvalidCoefficients(format!("coefficients give invalid parameters: {e}")))?;
    Ok(params)
}
