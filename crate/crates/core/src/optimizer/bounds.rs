//! Order-of-magnitude utility bounds for the sampling strategies and the
//! baselines they are compared against.
//!
//! Each row's rate is multiplied by the factor common to every row:
//! `√log(1/δ)/(nε)` for convex problems and `log(1/δ)/(n²ε²)` for strongly
//! convex ones. Absolute constants are taken as 1, so values are comparable
//! across rows but are not certified upper bounds.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::DiagonalMatrix;
use crate::privacy::PrivacyBudget;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Convex,
    StronglyConvex,
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convex" => Ok(Regime::Convex),
            "strongly-convex" => Ok(Regime::StronglyConvex),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundRow {
    /// Any proper distribution, from `Σ_S` directly: `Σ_S R_{MP⁻¹}`.
    Skgd,
    /// Block sampling, any block probabilities: `‖L_A‖_{M⁻¹} R_{MP⁻¹}`.
    SkgdBlock,
    /// Uniform block probabilities: `‖L_A‖_{M⁻¹} R_M √b`.
    SkgdBlockUniform,
    /// Importance block probabilities: `‖L_A‖_{M⁻¹} R_I √(Σ_i max_{j∈A_i} M_j)`.
    SkgdBlockImportance,
    /// Single-coordinate sampling (`b = d`).
    SkgdCoordinate,
    SkgdCoordinateUniform,
    SkgdCoordinateImportance,
    /// Full sampling (`b = 1`): `L √tr(M⁻¹) R_M`.
    SkgdFull,
    /// Private coordinate descent: `‖L‖_{M⁻¹} R_M √d`.
    DpCd,
    /// Private (full) gradient descent: `L √d R_I`.
    DpSgd,
}

impl BoundRow {
    pub const ALL: [BoundRow; 10] = [
        BoundRow::Skgd,
        BoundRow::SkgdBlock,
        BoundRow::SkgdBlockUniform,
        BoundRow::SkgdBlockImportance,
        BoundRow::SkgdCoordinate,
        BoundRow::SkgdCoordinateUniform,
        BoundRow::SkgdCoordinateImportance,
        BoundRow::SkgdFull,
        BoundRow::DpCd,
        BoundRow::DpSgd,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BoundRow::Skgd => "skgd",
            BoundRow::SkgdBlock => "skgd-block",
            BoundRow::SkgdBlockUniform => "skgd-block-uniform",
            BoundRow::SkgdBlockImportance => "skgd-block-importance",
            BoundRow::SkgdCoordinate => "skgd-coord",
            BoundRow::SkgdCoordinateUniform => "skgd-coord-uniform",
            BoundRow::SkgdCoordinateImportance => "skgd-coord-importance",
            BoundRow::SkgdFull => "skgd-full",
            BoundRow::DpCd => "dp-cd",
            BoundRow::DpSgd => "dp-sgd",
        }
    }

    /// Which norm the row's radius `R` is measured in.
    pub fn radius_norm(&self) -> &'static str {
        match self {
            BoundRow::Skgd | BoundRow::SkgdBlock | BoundRow::SkgdCoordinate => "MP^-1",
            BoundRow::SkgdBlockUniform
            | BoundRow::SkgdCoordinateUniform
            | BoundRow::SkgdFull
            | BoundRow::DpCd => "M",
            BoundRow::SkgdBlockImportance | BoundRow::SkgdCoordinateImportance | BoundRow::DpSgd => "I",
        }
    }
}

impl FromStr for BoundRow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundRow::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown bound row `{s}`")))
    }
}

/// Inputs to [`utility_bound`]; each row reads only what it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundQuery {
    pub row: BoundRow,
    pub regime: Regime,
    pub n: usize,
    pub budget: PrivacyBudget,
    /// Per-coordinate `L_{B(j)}` (block and coordinate rows).
    pub lipschitz: Option<Vec<f64>>,
    /// Scalar `L = L_{[d]}` (full-sampling and DP-SGD rows).
    pub lipschitz_full: Option<f64>,
    pub smoothness: Option<DiagonalMatrix>,
    pub probabilities: Option<DiagonalMatrix>,
    /// Partition `A_1, …, A_b` (block rows).
    pub blocks: Option<Vec<Vec<usize>>>,
    /// ℓ2 strong-convexity modulus.
    pub mu: Option<f64>,
    /// `R` in the row's norm, see [`BoundRow::radius_norm`].
    pub radius: Option<f64>,
    pub sigma_s_sq: Option<f64>,
    pub dim: Option<usize>,
}

impl BoundQuery {
    pub fn new(row: BoundRow, regime: Regime, n: usize, budget: PrivacyBudget) -> Self {
        BoundQuery {
            row,
            regime,
            n,
            budget,
            lipschitz: None,
            lipschitz_full: None,
            smoothness: None,
            probabilities: None,
            blocks: None,
            mu: None,
            radius: None,
            sigma_s_sq: None,
            dim: None,
        }
    }

    fn m(&self) -> Result<&DiagonalMatrix> {
        self.smoothness.as_ref().ok_or(Error::MissingConstant("smoothness"))
    }

    fn radius(&self) -> Result<f64> {
        self.radius.ok_or(Error::MissingConstant("radius"))
    }

    fn mu(&self) -> Result<f64> {
        match self.mu {
            Some(mu) if mu > 0.0 => Ok(mu),
            _ => Err(Error::MissingConstant("mu")),
        }
    }

    fn l_full(&self) -> Result<f64> {
        self.lipschitz_full.ok_or(Error::MissingConstant("lipschitz_full"))
    }

    fn dim(&self) -> Result<usize> {
        self.dim
            .or(self.smoothness.as_ref().map(|m| m.dim()))
            .or(self.lipschitz.as_ref().map(|l| l.len()))
            .ok_or(Error::MissingConstant("dim"))
    }

    /// `‖L‖²_{M⁻¹} = Σ_j L_j² / M_j`.
    fn l_norm_sq(&self) -> Result<f64> {
        let l = self.lipschitz.as_ref().ok_or(Error::MissingConstant("lipschitz"))?;
        let m = self.m()?;
        if l.len() != m.dim() {
            return Err(Error::DimensionMismatch { expected: m.dim(), actual: l.len() });
        }
        Ok(l.iter().zip(m.as_slice()).map(|(lj, mj)| lj * lj / mj).sum())
    }

    fn max_m_over_p(&self) -> Result<f64> {
        let m = self.m()?;
        let p = self.probabilities.as_ref().ok_or(Error::MissingConstant("probabilities"))?;
        if p.dim() != m.dim() {
            return Err(Error::DimensionMismatch { expected: m.dim(), actual: p.dim() });
        }
        Ok(m.as_slice().iter().zip(p.as_slice()).map(|(a, b)| a / b).fold(0.0, f64::max))
    }

    fn blocks(&self) -> Result<&Vec<Vec<usize>>> {
        self.blocks.as_ref().ok_or(Error::MissingConstant("blocks"))
    }

    fn sum_block_max_m(&self) -> Result<f64> {
        let m = self.m()?;
        let mut total = 0.0;
        for b in self.blocks()? {
            let mut best = f64::NEG_INFINITY;
            for &j in b {
                if j >= m.dim() {
                    return Err(Error::DimensionMismatch { expected: m.dim(), actual: j + 1 });
                }
                best = best.max(m[j]);
            }
            if b.is_empty() {
                return Err(Error::Empty("block"));
            }
            total += best;
        }
        Ok(total)
    }
}

/// Evaluate one row with the common privacy factor restored.
pub fn utility_bound(q: &BoundQuery) -> Result<f64> {
    if q.n == 0 {
        return Err(Error::MissingConstant("n"));
    }
    let n = q.n as f64;
    let log_term = q.budget.log_inv_delta();
    let eps = q.budget.epsilon;
    let rate = match q.regime {
        Regime::Convex => convex_rate(q)?,
        Regime::StronglyConvex => strongly_convex_rate(q)?,
    };
    let common = match q.regime {
        Regime::Convex => log_term.sqrt() / (n * eps),
        Regime::StronglyConvex => log_term / (n * n * eps * eps),
    };
    Ok(rate * common)
}

fn convex_rate(q: &BoundQuery) -> Result<f64> {
    use BoundRow::*;
    Ok(match q.row {
        Skgd => q.sigma_s_sq.ok_or(Error::MissingConstant("sigma_s_sq"))?.sqrt() * q.radius()?,
        SkgdBlock | SkgdCoordinate => q.l_norm_sq()?.sqrt() * q.radius()?,
        SkgdBlockUniform => q.l_norm_sq()?.sqrt() * q.radius()? * (q.blocks()?.len() as f64).sqrt(),
        SkgdBlockImportance => q.l_norm_sq()?.sqrt() * q.radius()? * q.sum_block_max_m()?.sqrt(),
        SkgdCoordinateUniform | DpCd => q.l_norm_sq()?.sqrt() * q.radius()? * (q.dim()? as f64).sqrt(),
        SkgdCoordinateImportance => q.l_norm_sq()?.sqrt() * q.radius()? * q.m()?.trace().sqrt(),
        SkgdFull => q.l_full()? * inverse_trace(q.m()?).sqrt() * q.radius()?,
        DpSgd => q.l_full()? * (q.dim()? as f64).sqrt() * q.radius()?,
    })
}

fn strongly_convex_rate(q: &BoundQuery) -> Result<f64> {
    use BoundRow::*;
    let mu = q.mu()?;
    Ok(match q.row {
        Skgd => q.sigma_s_sq.ok_or(Error::MissingConstant("sigma_s_sq"))? * q.max_m_over_p()? / mu,
        SkgdBlock | SkgdCoordinate => q.l_norm_sq()? * q.max_m_over_p()? / mu,
        SkgdBlockUniform => q.l_norm_sq()? * q.m()?.max() * q.blocks()?.len() as f64 / mu,
        SkgdBlockImportance => q.l_norm_sq()? * q.sum_block_max_m()? / mu,
        SkgdCoordinateUniform => q.l_norm_sq()? * q.m()?.max() * q.dim()? as f64 / mu,
        SkgdCoordinateImportance => q.l_norm_sq()? * q.m()?.trace() / mu,
        // Strong convexity w.r.t. ‖·‖_M with modulus μ / M_max.
        DpCd => q.l_norm_sq()? * q.dim()? as f64 * q.m()?.max() / mu,
        SkgdFull => q.l_full()?.powi(2) * inverse_trace(q.m()?) * q.m()?.max() / mu,
        DpSgd => q.l_full()?.powi(2) * q.dim()? as f64 / mu,
    })
}

fn inverse_trace(m: &DiagonalMatrix) -> f64 {
    m.as_slice().iter().map(|v| 1.0 / v).sum()
}
