//! Empirical risk minimization problems `f(w) = (1/n) Σ ℓ(w; ζ_i)` for
//! generalized linear losses, and the regularity constants that drive noise
//! calibration and step sizes.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, DiagonalMatrix, Vector};
use crate::sampling::{Draw, IndexSet, SamplingDistribution, SubsetKey};

/// Floor applied to smoothness and Lipschitz constants of coordinates that no
/// sample touches.
pub const CONSTANT_FLOOR: f64 = 1e-12;

/// Below this the smallest Hessian eigenvalue is reported as absent.
pub const STRONG_CONVEXITY_CUTOFF: f64 = 1e-10;

/// `n` samples of `d` features and one label each, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    columns: Vec<f64>,
    labels: Vec<f64>,
}

impl Dataset {
    /// Build from row-major samples.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidDataset("no samples".into()));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::InvalidDataset("no features".into()));
        }
        if labels.len() != n {
            return Err(Error::InvalidDataset(format!("{n} rows but {} labels", labels.len())));
        }
        let mut columns = vec![0.0; n * d];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} features, expected {d}",
                    row.len()
                )));
            }
            for (j, &x) in row.iter().enumerate() {
                columns[j * n + i] = x;
            }
        }
        Self::from_columns(n, d, columns, labels)
    }

    /// Build from a column-major `n×d` buffer.
    pub fn from_columns(n: usize, d: usize, columns: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidDataset("need n >= 1 and d >= 1".into()));
        }
        if columns.len() != n * d || labels.len() != n {
            return Err(Error::InvalidDataset("buffer sizes do not match n and d".into()));
        }
        if columns.iter().chain(&labels).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite entry".into()));
        }
        Ok(Dataset { n, d, columns, labels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.n..(j + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j * self.n + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.d).map(|j| self.get(i, j)).collect()
    }

    /// Divide every column by its largest absolute entry; all-zero columns stay.
    pub fn rescale_columns(&self) -> Dataset {
        let mut columns = self.columns.clone();
        for col in columns.chunks_mut(self.n) {
            let scale = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if scale > 0.0 {
                col.iter_mut().for_each(|x| *x /= scale);
            }
        }
        Dataset { columns, ..self.clone() }
    }

    /// CSV with a header; the column named `y` holds labels, the rest are
    /// features in file order.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse_csv(std::io::BufReader::new(file))
    }

    pub fn parse_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::InvalidDataset("empty csv".into()))??;
        let names: Vec<&str> = header.split(',').map(str::trim).collect();
        let y_col = names
            .iter()
            .position(|&c| c == "y")
            .ok_or_else(|| Error::InvalidDataset("no column named `y`".into()))?;
        if names.iter().filter(|&&c| c == "y").count() > 1 {
            return Err(Error::InvalidDataset("several columns named `y`".into()));
        }
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != names.len() {
                return Err(Error::InvalidDataset(format!(
                    "line {}: {} fields, header has {}",
                    lineno + 2,
                    fields.len(),
                    names.len()
                )));
            }
            let mut row = Vec::with_capacity(names.len() - 1);
            for (k, f) in fields.iter().enumerate() {
                let v: f64 = f.parse().map_err(|_| {
                    Error::InvalidDataset(format!("line {}: cannot parse `{f}`", lineno + 2))
                })?;
                if k == y_col {
                    labels.push(v);
                } else {
                    row.push(v);
                }
            }
            rows.push(row);
        }
        Self::from_rows(&rows, labels)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header: Vec<String> = (0..self.d).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.n {
            let mut fields: Vec<String> = (0..self.d).map(|j| format!("{}", self.get(i, j))).collect();
            fields.push(format!("{}", self.labels[i]));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Convex, differentiable per-sample loss `ℓ(w; (x, y)) = φ(⟨x, w⟩, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossModel {
    /// `log(1 + exp(−y⟨x, w⟩))`, labels in {−1, +1}.
    Logistic,
    /// `½(⟨x, w⟩ − y)²`.
    Quadratic,
}

impl LossModel {
    pub fn name(&self) -> &'static str {
        match self {
            LossModel::Logistic => "logistic",
            LossModel::Quadratic => "quadratic",
        }
    }

    /// `φ(m, y)` for margin `m = ⟨x, w⟩`.
    pub fn per_sample(&self, m: f64, y: f64) -> f64 {
        match self {
            LossModel::Logistic => softplus(-y * m),
            LossModel::Quadratic => 0.5 * (m - y) * (m - y),
        }
    }

    /// `∂φ/∂m`.
    pub fn derivative(&self, m: f64, y: f64) -> f64 {
        match self {
            LossModel::Logistic => -y * sigmoid(-y * m),
            LossModel::Quadratic => m - y,
        }
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if *self == LossModel::Logistic {
            if let Some(i) = data.labels.iter().position(|&y| y != 1.0 && y != -1.0) {
                return Err(Error::InvalidDataset(format!(
                    "logistic labels must be -1 or +1, sample {i} has {}",
                    data.labels[i]
                )));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for LossModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(LossModel::Logistic),
            "quadratic" => Ok(LossModel::Quadratic),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A loss model bound to a dataset it accepts.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub model: LossModel,
    pub data: Dataset,
}

impl Problem {
    pub fn new(model: LossModel, data: Dataset) -> Result<Self> {
        model.validate(&data)?;
        Ok(Problem { model, data })
    }

    pub fn value(&self, w: &Vector) -> Result<f64> {
        loss_value(self.model, &self.data, w)
    }

    pub fn gradient(&self, w: &Vector) -> Result<Vector> {
        loss_gradient(self.model, &self.data, w)
    }
}

/// Margins `m_i = ⟨x_i, w⟩`, accumulated over coordinates in index order.
pub fn margins(data: &Dataset, w: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; data.n];
    for (j, &wj) in w.iter().enumerate() {
        for (mi, &x) in m.iter_mut().zip(data.column(j)) {
            *mi += x * wj;
        }
    }
    m
}

/// `φ'(m_i, y_i)` for every sample.
pub fn derivative_coefficients(model: LossModel, data: &Dataset, margins: &[f64]) -> Vec<f64> {
    margins.iter().zip(&data.labels).map(|(&m, &y)| model.derivative(m, y)).collect()
}

/// `∂f/∂w_j = (1/n) Σ_i φ'(m_i, y_i) x_ij`.
pub fn coordinate_gradient(data: &Dataset, coefficients: &[f64], j: usize) -> f64 {
    let s: f64 = coefficients.iter().zip(data.column(j)).map(|(c, x)| c * x).sum();
    s / data.n as f64
}

pub fn loss_value(model: LossModel, data: &Dataset, w: &Vector) -> Result<f64> {
    check_dim(data.d, w.dim())?;
    let m = margins(data, w.as_slice());
    let total: f64 = m.iter().zip(&data.labels).map(|(&mi, &y)| model.per_sample(mi, y)).sum();
    Ok(total / data.n as f64)
}

pub fn loss_gradient(model: LossModel, data: &Dataset, w: &Vector) -> Result<Vector> {
    check_dim(data.d, w.dim())?;
    let m = margins(data, w.as_slice());
    let c = derivative_coefficients(model, data, &m);
    Vector::new((0..data.d).map(|j| coordinate_gradient(data, &c, j)).collect())
}

/// Per-sample gradient `∇ℓ(w; ζ_i)`.
pub fn sample_gradient(model: LossModel, data: &Dataset, i: usize, w: &[f64]) -> Vec<f64> {
    let x = data.row(i);
    let m: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
    let c = model.derivative(m, data.labels[i]);
    x.iter().map(|xj| c * xj).collect()
}

/// A valid `L_U`: an upper bound on `‖I_U ∇ℓ(w; ζ)‖` over all `w` and samples.
///
/// For logistic loss `|φ'| < 1`, so `L_U = max_i ‖I_U x_i‖`.
pub fn component_lipschitz(model: LossModel, data: &Dataset, u: &IndexSet) -> Result<f64> {
    if model == LossModel::Quadratic {
        return Err(Error::UnboundedLipschitz);
    }
    if let Some(&last) = u.as_slice().last() {
        if last >= data.d {
            return Err(Error::DimensionMismatch { expected: data.d, actual: last + 1 });
        }
    }
    let mut sq = vec![0.0; data.n];
    for &j in u.as_slice() {
        for (s, x) in sq.iter_mut().zip(data.column(j)) {
            *s += x * x;
        }
    }
    let max_sq = sq.into_iter().fold(0.0f64, f64::max);
    Ok(max_sq.sqrt().max(CONSTANT_FLOOR))
}

/// `XᵀX / n` as a dense matrix.
pub fn gram(data: &Dataset) -> DMatrix<f64> {
    let d = data.d;
    let mut g = DMatrix::zeros(d, d);
    for j in 0..d {
        for k in j..d {
            let s: f64 = data.column(j).iter().zip(data.column(k)).map(|(a, b)| a * b).sum();
            g[(j, k)] = s / data.n as f64;
            g[(k, j)] = g[(j, k)];
        }
    }
    g
}

/// Diagonal `M` with `∇²f ⪯ M` everywhere, via row sums of `|H|` for the
/// Hessian bound `H` (diagonal dominance makes `M − H` positive semidefinite).
pub fn component_smoothness(model: LossModel, data: &Dataset) -> DiagonalMatrix {
    let h = gram(data);
    let scale = match model {
        LossModel::Quadratic => 1.0,
        LossModel::Logistic => 0.25,
    };
    let diag = (0..data.d)
        .map(|j| {
            let row: f64 = (0..data.d).map(|k| h[(j, k)].abs()).sum();
            (scale * row).max(CONSTANT_FLOOR)
        })
        .collect();
    DiagonalMatrix::positive(diag).expect("floored entries are positive")
}

/// The ℓ2 strong-convexity modulus: `λ_min(XᵀX/n)` for quadratic loss, absent
/// for logistic loss and for (numerically) singular designs.
pub fn strong_convexity(model: LossModel, data: &Dataset) -> Option<f64> {
    match model {
        LossModel::Logistic => None,
        LossModel::Quadratic => {
            let lambda = smallest_eigenvalue(gram(data));
            (lambda > STRONG_CONVEXITY_CUTOFF).then_some(lambda)
        }
    }
}

pub(crate) fn smallest_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `L_U` for every key of a distribution, plus the full set and singletons.
///
/// τ-nice subsets are resolved on demand as `√(Σ_{j∈U} L_j²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzMap {
    entries: BTreeMap<SubsetKey, f64>,
}

impl LipschitzMap {
    pub fn from_entries(entries: BTreeMap<SubsetKey, f64>) -> Result<Self> {
        if let Some((k, v)) = entries.iter().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
            return Err(crate::error::invalid("lipschitz", format!("L for {k} is {v}")));
        }
        Ok(LipschitzMap { entries })
    }

    /// The same `L` for every key of `dist`.
    pub fn constant(dist: &SamplingDistribution, l: f64) -> Result<Self> {
        Self::from_entries(dist.range_keys().into_iter().map(|k| (k, l)).collect())
    }

    pub fn compute(model: LossModel, data: &Dataset, dist: &SamplingDistribution) -> Result<Self> {
        check_dim(data.d, dist.dim())?;
        let mut entries = BTreeMap::new();
        entries.insert(SubsetKey::Full, component_lipschitz(model, data, &IndexSet::full(data.d))?);
        for j in 0..data.d {
            entries.insert(
                SubsetKey::Coordinate(j),
                component_lipschitz(model, data, &IndexSet::singleton(j))?,
            );
        }
        for key in dist.range_keys() {
            if let SubsetKey::Block(_) = key {
                entries.insert(key, component_lipschitz(model, data, &dist.members(key)?)?);
            }
        }
        Ok(LipschitzMap { entries })
    }

    pub fn get(&self, key: SubsetKey) -> Result<f64> {
        self.entries.get(&key).copied().ok_or_else(|| Error::MissingSubsetKey(key.to_string()))
    }

    /// `L_U` for a τ-nice subset, from the coordinate entries.
    pub fn for_set(&self, set: &IndexSet) -> Result<f64> {
        let mut s = 0.0;
        for &j in set.as_slice() {
            let l = self.get(SubsetKey::Coordinate(j))?;
            s += l * l;
        }
        Ok(s.sqrt())
    }

    pub fn for_draw(&self, draw: &Draw) -> Result<f64> {
        match draw.key {
            Some(k) => self.get(k),
            None => self.for_set(&draw.set),
        }
    }

    pub fn entries(&self) -> &BTreeMap<SubsetKey, f64> {
        &self.entries
    }

    /// Only the keys of `dist`.
    pub fn restricted(&self, dist: &SamplingDistribution) -> Result<Self> {
        let entries = dist.range_keys().into_iter().map(|k| Ok((k, self.get(k)?))).collect::<Result<_>>()?;
        Ok(LipschitzMap { entries })
    }

    /// Check that every key of `dist` has an entry.
    pub fn covers(&self, dist: &SamplingDistribution) -> Result<()> {
        for k in dist.range_keys() {
            self.get(k)?;
        }
        Ok(())
    }

    /// `L_{B(j)}` for each coordinate under `dist`'s keys: the vector
    /// `L_{{A_1,…,A_b}}` of block sampling.
    pub fn per_coordinate(&self, dist: &SamplingDistribution) -> Result<Vec<f64>> {
        let mut out = vec![0.0; dist.dim()];
        for key in dist.range_keys() {
            let l = self.get(key)?;
            for &j in dist.members(key)?.as_slice() {
                out[j] = l;
            }
        }
        Ok(out)
    }
}

/// Smoothness, Lipschitz constants and strong convexity of one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityBundle {
    pub smoothness: DiagonalMatrix,
    pub lipschitz: LipschitzMap,
    pub mu: Option<f64>,
}

impl RegularityBundle {
    pub fn compute(problem: &Problem, dist: &SamplingDistribution) -> Result<Self> {
        Ok(RegularityBundle {
            smoothness: component_smoothness(problem.model, &problem.data),
            lipschitz: LipschitzMap::compute(problem.model, &problem.data, dist)?,
            mu: strong_convexity(problem.model, &problem.data),
        })
    }
}
