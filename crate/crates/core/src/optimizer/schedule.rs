use serde::Serialize;

use crate::erm::LipschitzMap;
use crate::error::{invalid, Error, Result};
use crate::linalg::{check_dim, DiagonalMatrix};
use crate::privacy::PrivacyBudget;
use crate::sampling::{IndexSet, RandomState, SamplingDistribution};

/// Subsets drawn when Σ_S² has no closed form (τ-nice sampling).
pub const NICE_SIGMA_SAMPLES: usize = 100_000;
const NICE_SIGMA_SEED: u64 = 0x5157_4d41;

/// Loop counts: `t` outer epochs of `k` inner steps each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub t: u64,
    pub k: u64,
}

impl Schedule {
    pub fn new(t: u64, k: u64) -> Result<Self> {
        if t == 0 || k == 0 {
            return Err(invalid("schedule", format!("T and K must be at least one, got T={t}, K={k}")));
        }
        Ok(Schedule { t, k })
    }
}

fn ceil_count(x: f64) -> u64 {
    if x.is_nan() || x <= 1.0 {
        1
    } else if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x.ceil() as u64
    }
}

/// `Γ = P M⁻¹`.
pub fn default_step_sizes(p: &DiagonalMatrix, m: &DiagonalMatrix) -> Result<DiagonalMatrix> {
    check_dim(p.dim(), m.dim())?;
    DiagonalMatrix::positive(p.as_slice().iter().zip(m.as_slice()).map(|(pj, mj)| pj / mj).collect())
}

/// `Σ_S² = E‖C L_S 𝟏‖²_{PM⁻¹} = E[L_S² Σ_{j∈S} 1/(p_j M_j)]`.
///
/// Exact for full, singleton and block sampling; τ-nice sampling is estimated
/// from [`NICE_SIGMA_SAMPLES`] draws of a fixed stream (see
/// [`sigma_s_sq_monte_carlo`] for the standard error).
pub fn sigma_s_sq(dist: &SamplingDistribution, lipschitz: &LipschitzMap, m: &DiagonalMatrix) -> Result<f64> {
    check_dim(dist.dim(), m.dim())?;
    if dist.is_composite() {
        let mut rng = RandomState::seed_from(NICE_SIGMA_SEED);
        return sigma_s_sq_monte_carlo(dist, lipschitz, m, NICE_SIGMA_SAMPLES, &mut rng).map(|(v, _)| v);
    }
    let p = dist.inclusion_probabilities();
    let mut total = 0.0;
    for key in dist.range_keys() {
        let l = lipschitz.get(key)?;
        let inner: f64 = dist.members(key)?.as_slice().iter().map(|&j| 1.0 / (p[j] * m[j])).sum();
        total += dist.key_probability(key) * l * l * inner;
    }
    Ok(total)
}

/// Monte Carlo mean and standard error of `‖C L_S 𝟏‖²_{PM⁻¹}`.
pub fn sigma_s_sq_monte_carlo(
    dist: &SamplingDistribution,
    lipschitz: &LipschitzMap,
    m: &DiagonalMatrix,
    samples: usize,
    rng: &mut RandomState,
) -> Result<(f64, f64)> {
    check_dim(dist.dim(), m.dim())?;
    if samples < 2 {
        return Err(invalid("samples", "need at least two"));
    }
    let p = dist.inclusion_probabilities();
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let draw = dist.sample(rng);
        let l = lipschitz.for_draw(&draw)?;
        let v: f64 = draw.set.as_slice().iter().map(|&j| l * l / (p[j] * m[j])).sum();
        s1 += v;
        s2 += v * v;
    }
    let n = samples as f64;
    let mean = s1 / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Block probabilities proportional to the largest smoothness constant in each block.
pub fn importance_probabilities(m: &DiagonalMatrix, blocks: &[IndexSet]) -> Result<Vec<f64>> {
    if blocks.is_empty() {
        return Err(Error::Empty("partition"));
    }
    let mut maxima = Vec::with_capacity(blocks.len());
    for b in blocks {
        if b.is_empty() {
            return Err(Error::Empty("block"));
        }
        let mut best = f64::NEG_INFINITY;
        for &j in b.as_slice() {
            if j >= m.dim() {
                return Err(Error::DimensionMismatch { expected: m.dim(), actual: j + 1 });
            }
            best = best.max(m[j]);
        }
        if !(best > 0.0) {
            return Err(Error::NonPositiveDiagonal { index: b.as_slice()[0], value: best });
        }
        maxima.push(best);
    }
    let total: f64 = maxima.iter().sum();
    Ok(maxima.into_iter().map(|x| x / total).collect())
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive, got {v}")))
    }
}

/// Convex regime: `T = 1`, `K = ⌈nεR_{MP⁻¹} / (Σ_S √log(1/δ))⌉`.
pub fn schedule_convex(n: usize, budget: PrivacyBudget, r_mp_inv: f64, sigma_s: f64) -> Result<Schedule> {
    if n == 0 {
        return Err(invalid("n", "must be at least one"));
    }
    positive("radius", r_mp_inv)?;
    positive("sigma_s", sigma_s)?;
    let k = n as f64 * budget.epsilon * r_mp_inv / (sigma_s * budget.log_inv_delta().sqrt());
    Schedule::new(1, ceil_count(k))
}

/// Strongly convex regime with `κ = 1 + max_i(M_i/p_i)/μ`: `K = ⌈2κ⌉` and
/// `T = ⌈log₂(gap · n²ε² / (κ Σ_S² log(1/δ)))⌉`, at least one.
pub fn schedule_strongly_convex(
    mu: f64,
    m: &DiagonalMatrix,
    p: &DiagonalMatrix,
    f0_gap: f64,
    n: usize,
    budget: PrivacyBudget,
    sigma_s_sq: f64,
) -> Result<Schedule> {
    positive("mu", mu)?;
    positive("f0_gap", f0_gap)?;
    positive("sigma_s_sq", sigma_s_sq)?;
    check_dim(m.dim(), p.dim())?;
    if n == 0 {
        return Err(invalid("n", "must be at least one"));
    }
    let worst = m.as_slice().iter().zip(p.as_slice()).map(|(mi, pi)| mi / pi).fold(0.0, f64::max);
    let kappa = 1.0 + worst / mu;
    let k = ceil_count(2.0 * kappa);
    let arg = f0_gap * (n as f64).powi(2) * budget.epsilon.powi(2)
        / (kappa * sigma_s_sq * budget.log_inv_delta());
    let t = if arg > 1.0 { ceil_count(arg.log2()) } else { 1 };
    Schedule::new(t, k)
}
