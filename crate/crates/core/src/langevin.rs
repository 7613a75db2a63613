//! Ensemble simulation of the income Langevin equation whose Fokker-Planck
//! equilibrium is the two-branch density.
//!
//! Itô Euler-Maruyama for `dm = -A(m) dt + sqrt(2 B(m)) dW` with the threshold drift
//! switching at `m1`, reflected at zero (`m <- |m|`). Agents do not interact, so each
//! one owns a ChaCha stream selected by its index and results do not depend on how
//! the ensemble is split across threads.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NormalizedModel;
use crate::params::FpCoefficients;

/// Upper bound on `dt * max(|a|, |a'|, b)`.
pub const STABILITY_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub coeffs: FpCoefficients,
    pub m1: f64,
    pub n_agents: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub record_stride: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.coeffs.validate()?;
        if !(self.m1 > 0.0) {
            return Err(Error::Config(format!("m1 must be > 0, got {}", self.m1)));
        }
        if self.n_agents == 0 {
            return Err(Error::Config("need at least one agent".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        let c = &self.coeffs;
        let rate = c.a_low.abs().max(c.a_high.abs()).max(c.b);
        if self.dt * rate >= STABILITY_LIMIT {
            return Err(Error::Config(format!(
                "dt * max(|a|, |a'|, b) = {} violates the stability bound {STABILITY_LIMIT}",
                self.dt * rate
            )));
        }
        Ok(())
    }

    /// Starting income of every agent: the low-branch temperature `T = B0 / A0`.
    pub fn initial_income(&self) -> f64 {
        self.coeffs.b0 / self.coeffs.a0_low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSnapshot {
    pub time: f64,
    pub incomes: Vec<f64>,
}

/// Ensemble state that can be advanced in stages.
pub struct Ensemble {
    coeffs: FpCoefficients,
    m1: f64,
    dt: f64,
    steps_done: usize,
    agents: Vec<(f64, ChaCha8Rng)>,
}

impl Ensemble {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let start = config.initial_income();
        let agents = (0..config.n_agents)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(i as u64);
                (start, rng)
            })
            .collect();
        Ok(Self {
            coeffs: config.coeffs,
            m1: config.m1,
            dt: config.dt,
            steps_done: 0,
            agents,
        })
    }

    pub fn time(&self) -> f64 {
        self.steps_done as f64 * self.dt
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    pub fn snapshot(&self) -> EnsembleSnapshot {
        EnsembleSnapshot {
            time: self.time(),
            incomes: self.agents.iter().map(|(m, _)| *m).collect(),
        }
    }

    /// Advances every agent by `steps` Euler-Maruyama steps.
    pub fn advance(&mut self, steps: usize) -> Result<()> {
        let (coeffs, m1, dt) = (self.coeffs, self.m1, self.dt);
        let sqrt_dt = dt.sqrt();
        let first_step = self.steps_done;
        let blowup = self
            .agents
            .par_iter_mut()
            .filter_map(|(m, rng)| {
                let mut x = *m;
                for s in 0..steps {
                    let z: f64 = StandardNormal.sample(rng);
                    let noise = (2.0 * coeffs.diffusion(x)).sqrt() * sqrt_dt * z;
                    x = (x - coeffs.drift(x, m1) * dt + noise).abs();
                    if !x.is_finite() {
                        return Some(first_step + s + 1);
                    }
                }
                *m = x;
                None
            })
            .min();
        if let Some(step) = blowup {
            return Err(Error::NumericalBlowup { step });
        }
        self.steps_done += steps;
        Ok(())
    }
}

/// Runs `config.n_steps` steps, recording the ensemble at time zero, every
/// `record_stride` steps, and at the final step.
pub fn simulate_ensemble(config: &SimConfig) -> Result<Vec<EnsembleSnapshot>> {
    let mut ens = Ensemble::new(config)?;
    let mut out = vec![ens.snapshot()];
    while ens.steps_done() < config.n_steps {
        let chunk = config.record_stride.min(config.n_steps - ens.steps_done());
        ens.advance(chunk)?;
        out.push(ens.snapshot());
    }
    Ok(out)
}

/// Sup distance between the empirical CDF of `sample` and the model CDF.
pub fn ks_distance(sample: &[f64], model: &NormalizedModel) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Domain("KS distance needs a non-empty sample".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ccdf = model.ccdf_grid(&sorted)?;
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, c) in ccdf.iter().enumerate() {
        let cdf = 1.0 - c;
        d = d.max((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// When to declare the ensemble stationary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityRule {
    /// Time `t` of the first comparison between snapshots at `t` and `2t`.
    pub first_check: f64,
    /// Stationary once the two-sample KS distance between `t` and `2t` drops below this.
    pub ks_threshold: f64,
    pub max_time: f64,
}

impl Default for StationarityRule {
    fn default() -> Self {
        Self {
            first_check: 1.0,
            ks_threshold: 0.005,
            max_time: 1024.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StationaryEnsemble {
    pub snapshot: EnsembleSnapshot,
    pub reached: bool,
    /// `(t, KS(snapshot(2t), snapshot(t)))` for every comparison made.
    pub checks: Vec<(f64, f64)>,
}

/// Simulates until snapshots at `t` and `2t` are KS-indistinguishable. `config.n_steps`
/// is ignored.
pub fn run_to_stationarity(config: &SimConfig, rule: StationarityRule) -> Result<StationaryEnsemble> {
    if !(rule.first_check > 0.0 && rule.max_time >= 2.0 * rule.first_check) {
        return Err(Error::Config("need 0 < first_check <= max_time / 2".into()));
    }
    let mut ens = Ensemble::new(config)?;
    let steps_at = |t: f64| (t / config.dt).round() as usize;
    let mut t = rule.first_check;
    ens.advance(steps_at(t))?;
    let mut previous = ens.snapshot();
    let mut checks = Vec::new();
    loop {
        ens.advance(steps_at(2.0 * t) - ens.steps_done())?;
        let current = ens.snapshot();
        let ks = two_sample_ks(&previous.incomes, &current.incomes);
        checks.push((t, ks));
        if ks < rule.ks_threshold {
            return Ok(StationaryEnsemble {
                snapshot: current,
                reached: true,
                checks,
            });
        }
        if 4.0 * t > rule.max_time {
            return Ok(StationaryEnsemble {
                snapshot: current,
                reached: false,
                checks,
            });
        }
        previous = current;
        t *= 2.0;
    }
}

/// Writes snapshots as CSV with columns `time,income`, one row per agent per snapshot.
pub fn write_snapshots_csv<W: Write>(out: W, snapshots: &[EnsembleSnapshot]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "income"])?;
    for s in snapshots {
        let time = s.time.to_string();
        for m in &s.incomes {
            w.write_record([time.as_str(), m.to_string().as_str()])?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv output>".into(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;

    fn config(n_agents: usize, n_steps: usize) -> SimConfig {
        SimConfig {
            coeffs: FpCoefficients {
                a0_low: 2.0,
                a_low: 2.0,
                a0_high: 2.0,
                a_high: 2.0,
                b0: 1.0,
                b: 1.0,
                m_init: 0.0,
            },
            m1: 3.0,
            n_agents,
            dt: 1e-3,
            n_steps,
            seed: 5,
            record_stride: 10,
        }
    }

    #[test]
    fn zero_steps_returns_initial_condition() {
        let snaps = simulate_ensemble(&config(50, 0)).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].time, 0.0);
        assert!(snaps[0].incomes.iter().all(|&m| m == 0.5));
    }

    #[test]
    fn snapshots_keep_agents_and_stay_non_negative() {
        let snaps = simulate_ensemble(&config(200, 35)).unwrap();
        assert_eq!(snaps.len(), 5);
        assert!((snaps[4].time - 0.035).abs() < 1e-12);
        for s in &snaps {
            assert_eq!(s.incomes.len(), 200);
            assert!(s.incomes.iter().all(|&m| m >= 0.0));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = simulate_ensemble(&config(100, 20)).unwrap();
        let b = simulate_ensemble(&config(100, 20)).unwrap();
        assert_eq!(a, b);
        let mut other = config(100, 20);
        other.seed = 6;
        assert_ne!(simulate_ensemble(&other).unwrap(), a);
    }

    #[test]
    fn agent_streams_do_not_depend_on_ensemble_size() {
        let small = simulate_ensemble(&config(10, 20)).unwrap();
        let large = simulate_ensemble(&config(40, 20)).unwrap();
        assert_eq!(small[2].incomes[..], large[2].incomes[..10]);
    }

    #[test]
    fn staged_advance_matches_single_run() {
        let cfg = config(30, 0);
        let mut one = Ensemble::new(&cfg).unwrap();
        one.advance(40).unwrap();
        let mut two = Ensemble::new(&cfg).unwrap();
        two.advance(15).unwrap();
        two.advance(25).unwrap();
        assert_eq!(one.snapshot(), two.snapshot());
    }

    #[test]
    fn rejects_unstable_or_empty_configs() {
        let mut c = config(10, 10);
        c.dt = 0.06;
        assert!(matches!(simulate_ensemble(&c), Err(Error::Config(_))));
        let mut c = config(0, 10);
        c.n_agents = 0;
        assert!(matches!(simulate_ensemble(&c), Err(Error::Config(_))));
        let mut c = config(10, 10);
        c.dt = 0.0;
        assert!(matches!(simulate_ensemble(&c), Err(Error::Config(_))));
    }

    #[test]
    fn blowup_is_reported_with_step() {
        let mut c = config(4, 10_000);
        c.coeffs.b = 1e-12;
        c.coeffs.a_low = -0.09 / 1e-3;
        c.coeffs.a_high = -0.09 / 1e-3;
        c.m1 = 1e300;
        match simulate_ensemble(&c) {
            Err(Error::NumericalBlowup { step }) => assert!(step > 0),
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    #[test]
    fn ks_distance_edge_cases() {
        let p = Params::new(1.0, 1.0, 1.0, 10.0, 3.0, 3.0).unwrap();
        let model = NormalizedModel::new(p).unwrap();
        let median = model.quantile(0.5).unwrap();
        let d = ks_distance(&[median], &model).unwrap();
        assert!((d - 0.5).abs() < 1e-9);
        assert!(matches!(ks_distance(&[], &model), Err(Error::Domain(_))));
        let xs = [0.1, 2.0, 0.7, 1.3, 0.02];
        let mut ys = xs;
        ys.reverse();
        assert_eq!(ks_distance(&xs, &model).unwrap(), ks_distance(&ys, &model).unwrap());
    }

    #[test]
    fn two_sample_ks_basics() {
        assert_eq!(two_sample_ks(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(two_sample_ks(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((two_sample_ks(&[1.0, 2.0, 3.0, 4.0], &[2.5, 3.5]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_export_has_one_row_per_agent_per_snapshot() {
        let snaps = simulate_ensemble(&config(3, 20)).unwrap();
        let mut buf = Vec::new();
        write_snapshots_csv(&mut buf, &snaps).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time,income");
        assert_eq!(lines.len(), 1 + 3 * snaps.len());
        assert!(lines[1].starts_with("0,"));
    }
}
