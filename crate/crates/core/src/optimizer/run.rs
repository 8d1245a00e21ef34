use rand::Rng;
use rand_distr::StandardNormal;

use super::Schedule;
use crate::erm::{coordinate_gradient, derivative_coefficients, margins, Problem};
use crate::error::{Error, Result};
use crate::linalg::{check_dim, DiagonalMatrix, Vector};
use crate::privacy::NoiseScales;
use crate::sampling::{RandomState, SamplingDistribution};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Keep `w^t` for every epoch in [`RunResult::iterates`].
    pub keep_iterates: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub w_priv: Vector,
    /// `f(w^t)` for `t = 0, …, T`.
    pub objective: Vec<f64>,
    pub iterates: Option<Vec<Vector>>,
    /// Gradient coordinates evaluated, `Σ |S|` over all steps.
    pub coord_evals: u64,
    /// Cumulative coordinate evaluations at the end of each epoch, `t = 0, …, T`.
    pub epoch_coord_evals: Vec<u64>,
    /// Filled in by callers that audit the noise they passed in.
    pub audited_epsilon: Option<f64>,
    pub seed: u64,
}

/// Run `T` epochs of `K` sketched noisy steps
/// `θ ← θ − Γ C(S)(∇f(θ) + η)`, `η ∼ N(0, σ_S² I)` on the coordinates of `S`,
/// each epoch returning the average of `θ¹, …, θ^K`.
///
/// Per step the random stream is consumed as: one subset draw, then one
/// standard normal per selected coordinate in increasing index order. Margins
/// `Xθ` are updated in place for partial subsets and recomputed when `S = [d]`.
#[allow(clippy::too_many_arguments)]
pub fn dp_skgd(
    problem: &Problem,
    dist: &SamplingDistribution,
    schedule: Schedule,
    noise: &NoiseScales,
    gamma: &DiagonalMatrix,
    w0: &Vector,
    rng: &mut RandomState,
    options: RunOptions,
) -> Result<RunResult> {
    let data = &problem.data;
    let d = data.d();
    check_dim(d, dist.dim())?;
    check_dim(d, gamma.dim())?;
    check_dim(d, w0.dim())?;
    noise.covers(dist)?;

    let inv_p: Vec<f64> = dist.inclusion_probabilities().as_slice().iter().map(|p| 1.0 / p).collect();
    let gamma = gamma.as_slice();
    let k_steps = schedule.k as usize;

    let mut w = w0.as_slice().to_vec();
    let mut objective = vec![problem.value(w0)?];
    let mut iterates = options.keep_iterates.then(|| vec![w0.clone()]);
    let mut coord_evals = 0u64;
    let mut epoch_coord_evals = vec![0];
    let mut grads = Vec::with_capacity(d);

    for epoch in 0..schedule.t as usize {
        let mut theta = w.clone();
        let mut m = margins(data, &theta);
        let mut acc = vec![0.0; d];
        for step in 0..k_steps {
            let draw = dist.sample(rng);
            let sd = noise.variance_for_draw(&draw)?.sqrt();
            let coefs = derivative_coefficients(problem.model, data, &m);
            let selected = draw.set.as_slice();

            grads.clear();
            grads.extend(selected.iter().map(|&j| coordinate_gradient(data, &coefs, j)));
            let full = selected.len() == d;
            for (&j, &g) in selected.iter().zip(&grads) {
                let eta = sd * rng.sample::<f64, _>(StandardNormal);
                let delta = -(gamma[j] * inv_p[j] * (g + eta));
                theta[j] += delta;
                if !theta[j].is_finite() {
                    return Err(Error::Diverged { epoch, step });
                }
                if !full {
                    for (mi, &x) in m.iter_mut().zip(data.column(j)) {
                        *mi += x * delta;
                    }
                }
            }
            if full {
                m = margins(data, &theta);
            }
            coord_evals += selected.len() as u64;
            for (a, t) in acc.iter_mut().zip(&theta) {
                *a += t;
            }
        }
        for (wj, a) in w.iter_mut().zip(&acc) {
            *wj = a / k_steps as f64;
        }
        let wv = Vector::new(w.clone()).map_err(|_| Error::Diverged { epoch, step: k_steps })?;
        let f = problem.value(&wv)?;
        if !f.is_finite() {
            return Err(Error::Diverged { epoch, step: k_steps });
        }
        objective.push(f);
        epoch_coord_evals.push(coord_evals);
        if let Some(its) = iterates.as_mut() {
            its.push(wv);
        }
    }

    Ok(RunResult {
        w_priv: Vector::new(w).expect("checked finite"),
        objective,
        iterates,
        coord_evals,
        epoch_coord_evals,
        audited_epsilon: None,
        seed: rng.seed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erm::{Dataset, LossModel};
    use crate::optimizer::default_step_sizes;
    use crate::sampling::SubsetKey;

    /// `f(w) = ½ Σ M_j (w_j − a_j)²` as a quadratic ERM with `n = d`.
    pub(crate) fn separable_quadratic(m: &[f64], a: &[f64]) -> Problem {
        let d = m.len();
        let n = d as f64;
        let rows: Vec<Vec<f64>> =
            (0..d).map(|i| (0..d).map(|j| if i == j { (n * m[j]).sqrt() } else { 0.0 }).collect()).collect();
        let y = (0..d).map(|i| rows[i][i] * a[i]).collect();
        Problem::new(LossModel::Quadratic, Dataset::from_rows(&rows, y).unwrap()).unwrap()
    }

    #[test]
    fn one_newton_like_step_on_separable_quadratic() {
        let m = [1.0, 4.0, 0.5];
        let a = [2.0, -1.0, 3.0];
        let p = separable_quadratic(&m, &a);
        let dist = SamplingDistribution::full(3).unwrap();
        let mm = crate::erm::component_smoothness(p.model, &p.data);
        let gamma = default_step_sizes(&dist.inclusion_probabilities(), &mm).unwrap();
        let res = dp_skgd(
            &p,
            &dist,
            Schedule::new(1, 1).unwrap(),
            &NoiseScales::noiseless(&dist),
            &gamma,
            &Vector::zeros(3),
            &mut RandomState::seed_from(0),
            RunOptions::default(),
        )
        .unwrap();
        for (w, a) in res.w_priv.as_slice().iter().zip(&a) {
            assert!((w - a).abs() <= 1e-12 * a.abs());
        }
        assert_eq!(res.objective.len(), 2);
        assert_eq!(res.coord_evals, 3);
    }

    #[test]
    fn one_dimensional_singleton_is_gradient_descent() {
        let p = separable_quadratic(&[2.0], &[1.0]);
        let dist = SamplingDistribution::singleton_uniform(1).unwrap();
        let gamma = DiagonalMatrix::positive(vec![0.3]).unwrap();
        let res = dp_skgd(
            &p,
            &dist,
            Schedule::new(4, 1).unwrap(),
            &NoiseScales::noiseless(&dist),
            &gamma,
            &Vector::new(vec![5.0]).unwrap(),
            &mut RandomState::seed_from(1),
            RunOptions { keep_iterates: true },
        )
        .unwrap();
        let mut w = 5.0f64;
        for (t, it) in res.iterates.unwrap().iter().enumerate().skip(1) {
            w -= 0.3 * p.gradient(&Vector::new(vec![w]).unwrap()).unwrap()[0];
            assert_eq!(it[0], w, "epoch {t}");
        }
    }

    #[test]
    fn trajectory_shape_and_determinism() {
        let p = crate::erm::tests::random_problem(LossModel::Logistic, 40, 5, 3);
        let dist = SamplingDistribution::nice(5, 2).unwrap();
        let noise = NoiseScales::from_entries((0..5).map(|j| (SubsetKey::Coordinate(j), 0.01)).collect()).unwrap();
        let gamma = DiagonalMatrix::positive(vec![0.1; 5]).unwrap();
        let run = |seed| {
            dp_skgd(&p, &dist, Schedule::new(3, 20).unwrap(), &noise, &gamma, &Vector::zeros(5),
                &mut RandomState::seed_from(seed), RunOptions::default()).unwrap()
        };
        let (a, b, c) = (run(9), run(9), run(10));
        assert_eq!(a, b);
        assert_ne!(a.w_priv, c.w_priv);
        assert_eq!(a.objective.len(), 4);
        assert_eq!(a.coord_evals, 3 * 20 * 2);
        assert_eq!(a.epoch_coord_evals, vec![0, 40, 80, 120]);
        assert_eq!(a.seed, 9);
    }

    #[test]
    fn missing_noise_key_is_rejected() {
        let p = separable_quadratic(&[1.0, 1.0], &[0.0, 0.0]);
        let dist = SamplingDistribution::singleton_uniform(2).unwrap();
        let noise = NoiseScales::from_entries([(SubsetKey::Coordinate(0), 1.0)].into()).unwrap();
        let err = dp_skgd(&p, &dist, Schedule::new(1, 1).unwrap(), &noise, &DiagonalMatrix::identity(2),
            &Vector::zeros(2), &mut RandomState::seed_from(0), RunOptions::default());
        assert!(matches!(err, Err(Error::MissingSubsetKey(_))));
    }

    #[test]
    fn divergence_is_reported_with_position() {
        let p = separable_quadratic(&[1.0], &[1.0]);
        let dist = SamplingDistribution::full(1).unwrap();
        let gamma = DiagonalMatrix::positive(vec![1e300]).unwrap();
        let err = dp_skgd(&p, &dist, Schedule::new(2, 5).unwrap(), &NoiseScales::noiseless(&dist), &gamma,
            &Vector::zeros(1), &mut RandomState::seed_from(0), RunOptions::default());
        assert!(matches!(err, Err(Error::Diverged { epoch: 0, .. })), "{err:?}");
    }
}
