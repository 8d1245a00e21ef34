//! Gaussian-mechanism privacy accounting through Rényi DP.
//!
//! Noise scales are stored as variances `σ_U²`. All logarithms are natural.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Serialize;

use crate::erm::LipschitzMap;
use crate::error::{invalid, Error, Result};
use crate::optimizer::Schedule;
use crate::sampling::{Draw, SamplingDistribution, SubsetKey};

/// Target `(ε, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    /// Any `ε > 0`, `δ ∈ (0, 1)`; enough for accounting.
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::BudgetOutOfRange(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::BudgetOutOfRange(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(PrivacyBudget { epsilon, delta })
    }

    /// The range in which the calibration guarantee holds: `ε ≤ 1`, `δ < 1/3`.
    pub fn check_calibration_range(&self) -> Result<()> {
        if self.epsilon > 1.0 {
            return Err(Error::BudgetOutOfRange(format!(
                "calibration needs epsilon <= 1, got {}",
                self.epsilon
            )));
        }
        if self.delta >= 1.0 / 3.0 {
            return Err(Error::BudgetOutOfRange(format!(
                "calibration needs delta < 1/3, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn log_inv_delta(&self) -> f64 {
        (1.0 / self.delta).ln()
    }
}

/// One point `(α, ε(α))` of an RDP curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdpCurvePoint {
    pub alpha: f64,
    pub eps_rdp: f64,
}

/// `Δ_U`, the restricted ℓ2 sensitivity of a query.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SensitivityBound(pub f64);

/// Gaussian noise variances `σ_U²`, one per key of the sampling distribution.
///
/// τ-nice subsets use `σ_U² = Σ_{j∈U} σ_j²`, matching `L_U² = Σ_{j∈U} L_j²`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseScales {
    variances: BTreeMap<SubsetKey, f64>,
}

impl NoiseScales {
    pub fn from_entries(variances: BTreeMap<SubsetKey, f64>) -> Result<Self> {
        if let Some((k, v)) = variances.iter().find(|(_, &v)| !(v >= 0.0 && v.is_finite())) {
            return Err(invalid("noise", format!("variance for {k} is {v}")));
        }
        Ok(NoiseScales { variances })
    }

    /// Zero noise on every key: the non-private algorithm.
    pub fn noiseless(dist: &SamplingDistribution) -> Self {
        NoiseScales { variances: dist.range_keys().into_iter().map(|k| (k, 0.0)).collect() }
    }

    pub fn variance(&self, key: SubsetKey) -> Result<f64> {
        self.variances.get(&key).copied().ok_or_else(|| Error::MissingSubsetKey(key.to_string()))
    }

    pub fn variance_for_draw(&self, draw: &Draw) -> Result<f64> {
        match draw.key {
            Some(k) => self.variance(k),
            None => draw
                .set
                .as_slice()
                .iter()
                .try_fold(0.0, |acc, &j| Ok(acc + self.variance(SubsetKey::Coordinate(j))?)),
        }
    }

    pub fn entries(&self) -> &BTreeMap<SubsetKey, f64> {
        &self.variances
    }

    pub fn covers(&self, dist: &SamplingDistribution) -> Result<()> {
        for k in dist.range_keys() {
            self.variance(k)?;
        }
        Ok(())
    }

    /// Multiply every variance by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        NoiseScales { variances: self.variances.iter().map(|(&k, &v)| (k, v * factor)).collect() }
    }
}

/// `Δ_U(∇f) = Δ_U(∇ℓ)/n ≤ 2 L_U / n`.
pub fn sensitivity_of_mean_gradient(lipschitz: f64, n: usize) -> Result<SensitivityBound> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(invalid("lipschitz", format!("must be positive, got {lipschitz}")));
    }
    if n == 0 {
        return Err(invalid("n", "must be at least one"));
    }
    Ok(SensitivityBound(2.0 * lipschitz / n as f64))
}

/// `σ_U² = 12 L_U² K T log(1/δ) / (n² ε²)` for every key of `lipschitz`.
pub fn calibrate_noise(
    lipschitz: &LipschitzMap,
    schedule: Schedule,
    n: usize,
    budget: PrivacyBudget,
) -> Result<NoiseScales> {
    budget.check_calibration_range()?;
    calibrate_noise_unchecked(lipschitz, schedule, n, budget)
}

/// Same formula as [`calibrate_noise`] without the `ε ≤ 1, δ < 1/3` guard.
/// Outside that range the result carries no privacy guarantee.
pub fn calibrate_noise_unchecked(
    lipschitz: &LipschitzMap,
    schedule: Schedule,
    n: usize,
    budget: PrivacyBudget,
) -> Result<NoiseScales> {
    if n == 0 {
        return Err(invalid("n", "must be at least one"));
    }
    let factor = 12.0 * schedule.k as f64 * schedule.t as f64 * budget.log_inv_delta()
        / ((n as f64).powi(2) * budget.epsilon.powi(2));
    let variances = lipschitz.entries().iter().map(|(&k, &l)| (k, factor * l * l)).collect();
    NoiseScales::from_entries(variances)
}

/// RDP of the Gaussian mechanism on the coordinates `U`: `(α, αΔ_U²/(2σ²))`.
pub fn rdp_gaussian(alpha: f64, sigma_sq: f64, sensitivity: SensitivityBound) -> Result<RdpCurvePoint> {
    if !(alpha > 1.0) {
        return Err(invalid("alpha", format!("must exceed 1, got {alpha}")));
    }
    if !(sigma_sq > 0.0) {
        return Err(invalid("sigma_sq", format!("must be positive, got {sigma_sq}")));
    }
    Ok(RdpCurvePoint { alpha, eps_rdp: alpha * sensitivity.0 * sensitivity.0 / (2.0 * sigma_sq) })
}

/// Adaptive composition at a common order: the RDP values add.
pub fn rdp_compose(alpha: f64, points: &[RdpCurvePoint]) -> Result<RdpCurvePoint> {
    if !(alpha > 1.0) {
        return Err(invalid("alpha", format!("must exceed 1, got {alpha}")));
    }
    let mut eps_rdp = 0.0;
    for p in points {
        if p.alpha != alpha {
            return Err(Error::MixedOrders(alpha, p.alpha));
        }
        eps_rdp += p.eps_rdp;
    }
    Ok(RdpCurvePoint { alpha, eps_rdp })
}

/// `(α, ε)`-RDP implies `(ε + log(1/δ)/(α−1), δ)`-DP.
pub fn rdp_to_dp(point: RdpCurvePoint, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    if !(point.alpha > 1.0) {
        return Err(invalid("alpha", format!("must exceed 1, got {}", point.alpha)));
    }
    Ok(point.eps_rdp + (1.0 / delta).ln() / (point.alpha - 1.0))
}

/// Orders searched by [`audit_budget`]: `1.25, 1.5, 1.75, 2, 2.5, 3, 4, …, 512`
/// together with `α − 1 = 0.25·1.02^k` up to `10^10`, so the optimal order is
/// bracketed within a 2% ratio even for tiny `ε`.
pub fn alpha_grid() -> &'static [f64] {
    static GRID: OnceLock<Vec<f64>> = OnceLock::new();
    GRID.get_or_init(|| {
        let mut g = vec![1.25, 1.5, 1.75, 2.0, 2.5];
        g.extend((3..=512).map(f64::from));
        let mut a = 0.25;
        while a <= 1e10 {
            g.push(1.0 + a);
            a *= 1.02;
        }
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    })
}

/// Result of an audit: the best order and the `ε` it certifies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Audit {
    pub alpha: f64,
    pub epsilon: f64,
}

/// Compose `K·T` Gaussian mechanisms at the worst per-step RDP over all keys
/// of `noise` and convert to `(ε, δ)`, minimizing over [`alpha_grid`].
pub fn audit_budget_detailed(
    lipschitz: &LipschitzMap,
    schedule: Schedule,
    noise: &NoiseScales,
    n: usize,
    delta: f64,
) -> Result<Audit> {
    let mut worst: f64 = 0.0;
    for (&key, &var) in noise.entries() {
        let sens = sensitivity_of_mean_gradient(lipschitz.get(key)?, n)?;
        let ratio = if var > 0.0 { sens.0 * sens.0 / var } else { f64::INFINITY };
        worst = worst.max(ratio);
    }
    let steps = schedule.k as f64 * schedule.t as f64;
    let mut best = Audit { alpha: f64::NAN, epsilon: f64::INFINITY };
    for &alpha in alpha_grid() {
        let total = RdpCurvePoint { alpha, eps_rdp: steps * alpha * worst / 2.0 };
        let eps = rdp_to_dp(total, delta)?;
        if eps < best.epsilon {
            best = Audit { alpha, epsilon: eps };
        }
    }
    Ok(best)
}

pub fn audit_budget(
    lipschitz: &LipschitzMap,
    schedule: Schedule,
    noise: &NoiseScales,
    n: usize,
    delta: f64,
) -> Result<f64> {
    audit_budget_detailed(lipschitz, schedule, noise, n, delta).map(|a| a.epsilon)
}
