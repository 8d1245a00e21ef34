//! Synthetic ERM problems with a prescribed coordinate-smoothness profile and
//! a known optimum.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::erm::{
    component_smoothness, loss_gradient, strong_convexity, Dataset, LossModel, Problem,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::{DiagonalMatrix, Vector};
use crate::sampling::RandomState;

/// Gradient-norm target for the logistic optimum.
pub const NEWTON_TOLERANCE: f64 = 1e-10;
const NEWTON_MAX_ITERS: usize = 200;

/// Target diagonal of `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    Uniform { m0: f64 },
    /// `M_j = M_min (M_max/M_min)^{j/(d−1)}`.
    Geometric { min: f64, max: f64 },
    /// `M_big` at `index`, `base` elsewhere.
    Spike { big: f64, index: usize, base: f64 },
}

impl Profile {
    pub fn diagonal(&self, d: usize) -> Result<Vec<f64>> {
        let check = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidDataset(format!("profile {name} must be positive, got {v}")))
            }
        };
        match *self {
            Profile::Uniform { m0 } => {
                check("m0", m0)?;
                Ok(vec![m0; d])
            }
            Profile::Geometric { min, max } => {
                check("min", min)?;
                check("max", max)?;
                if min > max {
                    return Err(Error::InvalidDataset(format!("profile min {min} exceeds max {max}")));
                }
                if d == 1 {
                    return Ok(vec![min]);
                }
                let ratio = max / min;
                Ok((0..d).map(|j| min * ratio.powf(j as f64 / (d - 1) as f64)).collect())
            }
            Profile::Spike { big, index, base } => {
                check("big", big)?;
                check("base", base)?;
                if index >= d {
                    return Err(Error::InvalidDataset(format!("spike index {index} outside 0..{d}")));
                }
                let mut m = vec![base; d];
                m[index] = big;
                Ok(m)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub model: LossModel,
    pub profile: Profile,
    /// Planted parameter; drawn uniformly from the unit ball when absent.
    pub planted: Option<Vec<f64>>,
    /// Label flip probability (logistic) or additive noise standard deviation (quadratic).
    pub label_noise: f64,
}

/// Minimizer of the empirical risk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimum {
    pub w: Vec<f64>,
    pub value: f64,
    /// False when `w` comes from an iterative solve stopped at [`NEWTON_TOLERANCE`].
    pub exact: bool,
}

impl Optimum {
    pub fn note(&self) -> String {
        if self.exact {
            "exact minimizer".into()
        } else {
            format!("approximate minimizer, gradient norm <= {NEWTON_TOLERANCE:e}")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub problem: Problem,
    pub planted: Vec<f64>,
    pub optimum: Optimum,
    pub smoothness: DiagonalMatrix,
    pub mu: Option<f64>,
}

/// Build `X = √n Q Diag(s)` with orthonormal `Q`, so that `XᵀX/n = Diag(s²)`,
/// with `s_j = √M_j` for the quadratic loss and `2√M_j` for the logistic one.
pub fn gen_synthetic(spec: &SyntheticSpec, rng: &mut RandomState) -> Result<Synthetic> {
    let (n, d) = (spec.n, spec.d);
    if d == 0 {
        return Err(Error::InvalidDataset("d must be positive".into()));
    }
    if n < d {
        return Err(Error::InvalidDataset(format!("profile needs n >= d, got n={n}, d={d}")));
    }
    let target = spec.profile.diagonal(d)?;
    let scale = match spec.model {
        LossModel::Quadratic => 1.0,
        LossModel::Logistic => 2.0,
    };
    if let Some(w) = &spec.planted {
        if w.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: w.len() });
        }
    }
    match spec.model {
        LossModel::Logistic if !(0.0..0.5).contains(&spec.label_noise) => {
            return Err(invalid("label_noise", "flip probability must lie in [0, 0.5)"));
        }
        _ if !(spec.label_noise >= 0.0 && spec.label_noise.is_finite()) => {
            return Err(invalid("label_noise", "must be nonnegative"));
        }
        _ => {}
    }

    let g = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let root_n = (n as f64).sqrt();
    let mut columns = Vec::with_capacity(n * d);
    for (j, t) in target.iter().enumerate() {
        let s = scale * t.sqrt() * root_n;
        columns.extend(q.column(j).iter().map(|v| v * s));
    }

    let planted = match &spec.planted {
        Some(w) => w.clone(),
        None => unit_ball(rng, d),
    };

    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let m: f64 = (0..d).map(|j| columns[j * n + i] * planted[j]).sum();
        let y = match spec.model {
            LossModel::Quadratic => m + spec.label_noise * rng.sample::<f64, _>(StandardNormal),
            LossModel::Logistic => {
                let positive = rng.random::<f64>() < 1.0 / (1.0 + (-m).exp());
                let flip = rng.random::<f64>() < spec.label_noise;
                if positive != flip {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        labels.push(y);
    }

    let data = Dataset::from_columns(n, d, columns, labels)?;
    let problem = Problem::new(spec.model, data)?;
    let optimum = solve_optimum(&problem, Some(&planted))?;
    Ok(Synthetic {
        smoothness: component_smoothness(problem.model, &problem.data),
        mu: strong_convexity(problem.model, &problem.data),
        problem,
        planted,
        optimum,
    })
}

fn unit_ball(rng: &mut RandomState, d: usize) -> Vec<f64> {
    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let radius = rng.random::<f64>().powf(1.0 / d as f64);
    z.into_iter().map(|v| v * radius / norm).collect()
}

fn design(data: &Dataset) -> DMatrix<f64> {
    DMatrix::from_fn(data.n(), data.d(), |i, j| data.get(i, j))
}

/// Normal equations for the quadratic loss, damped Newton for the logistic one.
pub fn solve_optimum(problem: &Problem, start: Option<&[f64]>) -> Result<Optimum> {
    let data = &problem.data;
    let (n, d) = (data.n(), data.d());
    let x = design(data);
    match problem.model {
        LossModel::Quadratic => {
            let y = DVector::from_column_slice(data.labels());
            let chol = (x.transpose() * &x)
                .cholesky()
                .ok_or_else(|| Error::NoConvergence("design has dependent columns".into()))?;
            let w: Vec<f64> = chol.solve(&(x.transpose() * y)).iter().copied().collect();
            let value = problem.value(&Vector::new(w.clone())?)?;
            Ok(Optimum { w, value, exact: true })
        }
        LossModel::Logistic => {
            let mut w = start.map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; d]);
            if w.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: w.len() });
            }
            let mut f = problem.value(&Vector::new(w.clone())?)?;
            for _ in 0..NEWTON_MAX_ITERS {
                let g = loss_gradient(problem.model, data, &Vector::new(w.clone())?)?;
                if g.norm_sq().sqrt() <= NEWTON_TOLERANCE {
                    return Ok(Optimum { w, value: f, exact: false });
                }
                let m = x.clone() * DVector::from_column_slice(&w);
                let weights: Vec<f64> = m
                    .iter()
                    .map(|&mi| {
                        let s = 1.0 / (1.0 + (-mi).exp());
                        s * (1.0 - s) / n as f64
                    })
                    .collect();
                let mut xw = x.clone();
                for (i, wi) in weights.iter().enumerate() {
                    xw.row_mut(i).scale_mut(*wi);
                }
                let h = x.transpose() * xw;
                let step = h
                    .cholesky()
                    .ok_or_else(|| Error::NoConvergence("singular logistic Hessian".into()))?
                    .solve(&DVector::from_column_slice(g.as_slice()));
                // Near the optimum f stops resolving progress, so a full step
                // is also accepted when it shrinks the gradient.
                let full: Vec<f64> = w.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
                let full_v = Vector::new(full.clone())?;
                let f_full = problem.value(&full_v)?;
                let g_full = loss_gradient(problem.model, data, &full_v)?;
                if f_full <= f || g_full.norm_sq() < g.norm_sq() {
                    w = full;
                    f = f_full;
                    continue;
                }
                let mut t = 0.5;
                loop {
                    let cand: Vec<f64> = w.iter().zip(step.iter()).map(|(a, b)| a - t * b).collect();
                    let fc = problem.value(&Vector::new(cand.clone())?)?;
                    if fc <= f || t < 1e-12 {
                        w = cand;
                        f = fc;
                        break;
                    }
                    t *= 0.5;
                }
            }
            Err(Error::NoConvergence(format!(
                "logistic optimum not reached in {NEWTON_MAX_ITERS} Newton steps; data may be separable"
            )))
        }
    }
}
