//! Box-constrained Nelder-Mead simplex search with dimension-adaptive coefficients.

#[derive(Debug, Clone, Copy)]
pub(crate) struct Options {
    /// Stop once every vertex is within this max-norm distance of the best one.
    pub tol: f64,
    pub max_evaluations: usize,
    pub initial_step: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` over the box `[lower, upper]`. Trial points are clamped into the box and
/// non-finite values rank as worse than any finite one.
pub(crate) fn minimize<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: Options) -> Outcome
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let dim = n as f64;
    let (reflect, expand) = (1.0, 1.0 + 2.0 / dim);
    let contract = 0.75 - 0.5 / dim;
    let shrink = 1.0 - 1.0 / dim;

    let clamp = |x: &mut [f64]| {
        for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
            *v = v.clamp(*lo, *hi);
        }
    };
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    clamp(&mut start);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(&start, &mut evaluations);
    simplex.push((start.clone(), v0));
    for i in 0..n {
        let mut x = start.clone();
        let step = if x[i] + opts.initial_step <= upper[i] {
            opts.initial_step
        } else {
            -opts.initial_step
        };
        x[i] += step;
        clamp(&mut x);
        let v = eval(&x, &mut evaluations);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.tol {
            converged = true;
            break;
        }
        if evaluations >= opts.max_evaluations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / dim;
            }
        }
        let toward = |t: f64| -> Vec<f64> {
            let worst = &simplex[n].0;
            let mut x: Vec<f64> = centroid.iter().zip(worst).map(|(c, w)| c + t * (c - w)).collect();
            clamp(&mut x);
            x
        };

        let xr = toward(reflect);
        let fr = eval(&xr, &mut evaluations);
        if fr < simplex[0].1 {
            let xe = toward(reflect * expand);
            let fe = eval(&xe, &mut evaluations);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let x = toward(reflect * contract);
            let v = eval(&x, &mut evaluations);
            (x, v)
        } else {
            let x = toward(-contract);
            let v = eval(&x, &mut evaluations);
            (x, v)
        };
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let mut x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + shrink * (v - b)).collect();
            clamp(&mut x);
            let v = eval(&x, &mut evaluations);
            *vertex = (x, v);
        }
    }
    let (x, value) = simplex.swap_remove(0);
    Outcome {
        x,
        value,
        iterations,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> Options {
        Options {
            tol: 1e-9,
            max_evaluations: 20_000,
            initial_step: 0.5,
        }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = minimize(f, &[-1.2, 1.0], &[-5.0; 2], &[5.0; 2], opts());
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{out:?}");
    }

    #[test]
    fn six_dimensional_quadratic() {
        let target = [0.3, -1.0, 2.0, 0.0, 1.5, -0.7];
        let f = |x: &[f64]| {
            x.iter()
                .zip(&target)
                .enumerate()
                .map(|(i, (a, b))| (i + 1) as f64 * (a - b).powi(2))
                .sum::<f64>()
        };
        let out = minimize(f, &[0.0; 6], &[-10.0; 6], &[10.0; 6], opts());
        assert!(out.converged);
        for (a, b) in out.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn respects_box() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 3.0).powi(2);
        let out = minimize(f, &[0.0, 0.0], &[-1.0, -1.0], &[1.0, 1.0], opts());
        assert_eq!(out.x, vec![1.0, -1.0]);
    }

    #[test]
    fn budget_exhaustion_is_not_convergence() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = minimize(
            f,
            &[-1.2, 1.0],
            &[-5.0; 2],
            &[5.0; 2],
            Options {
                max_evaluations: 30,
                ..opts()
            },
        );
        assert!(!out.converged);
        assert!(out.evaluations <= 34);
    }

    #[test]
    fn nan_regions_are_avoided() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) };
        let out = minimize(f, &[2.0], &[-3.0], &[3.0], opts());
        assert!((out.x[0] - 0.5).abs() < 1e-8);
    }
}
