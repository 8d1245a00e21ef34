//! Subset distributions over `{0, …, d−1}` and the unbiased diagonal sketch
//! `C = I_S P⁻¹` they induce.
//!
//! Indices are 0-based. Sketches are kept sparse (selected indices plus the
//! reciprocal inclusion probabilities); the dense `d×d` diagonal is never built.
//!
//! # Random stream contract
//!
//! [`RandomState`] wraps ChaCha8 seeded from a `u64`. One subset draw consumes:
//!
//! * `Full`: nothing;
//! * `Singleton`/`Block` with equal probabilities: one `random_range(0..k)`;
//! * `Singleton`/`Block` otherwise: one `random::<f64>()`, resolved by inverse CDF;
//! * `Nice(τ)`: `τ` calls `random_range(i..d)`, a partial Fisher–Yates shuffle.
//!
//! Output is byte-reproducible for a fixed seed and crate versions.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, DiagonalMatrix, Vector};

const PROB_SUM_TOL: f64 = 1e-12;

/// Seedable random stream owned by exactly one run.
#[derive(Debug, Clone)]
pub struct RandomState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomState {
    pub fn seed_from(seed: u64) -> Self {
        RandomState { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for RandomState {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// A nonempty sorted set of distinct coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("index set"));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDistribution("index set has duplicates".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::InvalidDistribution(format!(
                    "index {last} out of range for dimension {dim}"
                )));
            }
        }
        Ok(IndexSet(indices))
    }

    pub fn full(dim: usize) -> Self {
        assert!(dim >= 1);
        IndexSet((0..dim).collect())
    }

    pub fn singleton(j: usize) -> Self {
        IndexSet(vec![j])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }
}

/// Identifier of an element of `range(𝒮)` that carries its own constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubsetKey {
    Full,
    Coordinate(usize),
    Block(usize),
}

impl fmt::Display for SubsetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubsetKey::Full => write!(f, "full"),
            SubsetKey::Coordinate(j) => write!(f, "coord:{j}"),
            SubsetKey::Block(i) => write!(f, "block:{i}"),
        }
    }
}

/// One sampled subset. `key` is `None` for τ-nice draws, whose constants are
/// assembled from the per-coordinate entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub key: Option<SubsetKey>,
    pub set: IndexSet,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Full,
    Singleton { probs: Vec<f64>, cdf: Vec<f64>, uniform: bool },
    Block { blocks: Vec<IndexSet>, probs: Vec<f64>, cdf: Vec<f64>, uniform: bool, block_of: Vec<usize> },
    Nice { tau: usize },
}

/// A proper, nonvacuous distribution over subsets of `{0, …, d−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    dim: usize,
    kind: Kind,
}

fn check_probability_vector(probs: &[f64], what: &str) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what}: no probabilities")));
    }
    if let Some((j, p)) = probs.iter().enumerate().find(|(_, &p)| !(p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidDistribution(format!(
            "{what}: probability {j} is {p}; every entry must be positive"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidDistribution(format!("{what}: probabilities sum to {total}")));
    }
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    *cdf.last_mut().unwrap() = 1.0;
    Ok(cdf)
}

fn all_equal(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

impl SamplingDistribution {
    /// `S = [d]` with probability one.
    pub fn full(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("dimension"));
        }
        Ok(SamplingDistribution { dim, kind: Kind::Full })
    }

    /// `S = {j}` with probability `probs[j]`.
    pub fn singleton(probs: Vec<f64>) -> Result<Self> {
        let cdf = check_probability_vector(&probs, "singleton")?;
        let uniform = all_equal(&probs);
        Ok(SamplingDistribution { dim: probs.len(), kind: Kind::Singleton { probs, cdf, uniform } })
    }

    pub fn singleton_uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("dimension"));
        }
        Self::singleton(vec![1.0 / dim as f64; dim])
    }

    /// `S = A_i` with probability `probs[i]`; the blocks must partition `[d]`.
    pub fn block(blocks: Vec<Vec<usize>>, probs: Vec<f64>, dim: usize) -> Result<Self> {
        if blocks.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} blocks but {} probabilities",
                blocks.len(),
                probs.len()
            )));
        }
        let cdf = check_probability_vector(&probs, "block")?;
        let blocks = validate_partition(blocks, dim)?;
        let mut block_of = vec![0; dim];
        for (i, b) in blocks.iter().enumerate() {
            for &j in b.as_slice() {
                block_of[j] = i;
            }
        }
        let uniform = all_equal(&probs);
        Ok(SamplingDistribution { dim, kind: Kind::Block { blocks, probs, cdf, uniform, block_of } })
    }

    /// Uniformly random subset of size `tau`.
    pub fn nice(dim: usize, tau: usize) -> Result<Self> {
        if tau == 0 || tau > dim {
            return Err(Error::InvalidDistribution(format!(
                "nice sampling needs 1 <= tau <= d, got tau={tau}, d={dim}"
            )));
        }
        Ok(SamplingDistribution { dim, kind: Kind::Nice { tau } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variant_name(&self) -> &'static str {
        match self.kind {
            Kind::Full => "full",
            Kind::Singleton { .. } => "singleton",
            Kind::Block { .. } => "block",
            Kind::Nice { .. } => "nice",
        }
    }

    /// Blocks of a `Block` distribution, singletons of a `Singleton` one.
    pub fn blocks(&self) -> Option<Vec<IndexSet>> {
        match &self.kind {
            Kind::Block { blocks, .. } => Some(blocks.clone()),
            Kind::Singleton { .. } => Some((0..self.dim).map(IndexSet::singleton).collect()),
            _ => None,
        }
    }

    /// Keys that carry per-subset constants (Lipschitz bounds, noise variances).
    ///
    /// For τ-nice sampling these are the coordinates; a τ-subset combines them.
    pub fn range_keys(&self) -> Vec<SubsetKey> {
        match &self.kind {
            Kind::Full => vec![SubsetKey::Full],
            Kind::Singleton { .. } | Kind::Nice { .. } => {
                (0..self.dim).map(SubsetKey::Coordinate).collect()
            }
            Kind::Block { blocks, .. } => (0..blocks.len()).map(SubsetKey::Block).collect(),
        }
    }

    pub fn is_composite(&self) -> bool {
        matches!(self.kind, Kind::Nice { .. })
    }

    /// Coordinates covered by a key.
    pub fn members(&self, key: SubsetKey) -> Result<IndexSet> {
        match (key, &self.kind) {
            (SubsetKey::Full, _) => Ok(IndexSet::full(self.dim)),
            (SubsetKey::Coordinate(j), _) if j < self.dim => Ok(IndexSet::singleton(j)),
            (SubsetKey::Block(i), Kind::Block { blocks, .. }) if i < blocks.len() => {
                Ok(blocks[i].clone())
            }
            _ => Err(Error::MissingSubsetKey(key.to_string())),
        }
    }

    /// Probability that the distribution draws exactly the subset behind `key`.
    pub fn key_probability(&self, key: SubsetKey) -> f64 {
        match (key, &self.kind) {
            (SubsetKey::Full, Kind::Full) => 1.0,
            (SubsetKey::Coordinate(j), Kind::Singleton { probs, .. }) => probs.get(j).copied().unwrap_or(0.0),
            (SubsetKey::Block(i), Kind::Block { probs, .. }) => probs.get(i).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// `P = Diag(p_1, …, p_d)` with `p_j = Prob(j ∈ S)`.
    pub fn inclusion_probabilities(&self) -> DiagonalMatrix {
        let p = match &self.kind {
            Kind::Full => vec![1.0; self.dim],
            Kind::Singleton { probs, .. } => probs.clone(),
            Kind::Block { probs, block_of, .. } => block_of.iter().map(|&i| probs[i]).collect(),
            Kind::Nice { tau } => vec![*tau as f64 / self.dim as f64; self.dim],
        };
        DiagonalMatrix::probabilities(p).expect("validated distribution has proper probabilities")
    }

    /// Draw `S ∼ 𝒮` together with its key.
    pub fn sample(&self, rng: &mut RandomState) -> Draw {
        match &self.kind {
            Kind::Full => Draw { key: Some(SubsetKey::Full), set: IndexSet::full(self.dim) },
            Kind::Singleton { cdf, uniform, .. } => {
                let j = draw_index(rng, cdf, *uniform);
                Draw { key: Some(SubsetKey::Coordinate(j)), set: IndexSet::singleton(j) }
            }
            Kind::Block { blocks, cdf, uniform, .. } => {
                let i = draw_index(rng, cdf, *uniform);
                Draw { key: Some(SubsetKey::Block(i)), set: blocks[i].clone() }
            }
            Kind::Nice { tau } => Draw { key: None, set: partial_shuffle(rng, self.dim, *tau) },
        }
    }

    /// Draw `S ∼ 𝒮`.
    pub fn sample_subset(&self, rng: &mut RandomState) -> IndexSet {
        self.sample(rng).set
    }
}

fn draw_index(rng: &mut RandomState, cdf: &[f64], uniform: bool) -> usize {
    if uniform {
        rng.random_range(0..cdf.len())
    } else {
        inverse_cdf(cdf, rng.random::<f64>())
    }
}

/// First `tau` positions of a Fisher–Yates shuffle of `0..dim`, with the
/// permutation kept sparse so the work is O(tau).
fn partial_shuffle(rng: &mut RandomState, dim: usize, tau: usize) -> IndexSet {
    let mut swapped: HashMap<usize, usize> = HashMap::with_capacity(2 * tau);
    let mut out = Vec::with_capacity(tau);
    for i in 0..tau {
        let j = rng.random_range(i..dim);
        let at_j = *swapped.get(&j).unwrap_or(&j);
        let at_i = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, at_i);
        out.push(at_j);
    }
    out.sort_unstable();
    IndexSet(out)
}

fn validate_partition(blocks: Vec<Vec<usize>>, dim: usize) -> Result<Vec<IndexSet>> {
    if dim == 0 {
        return Err(Error::Empty("dimension"));
    }
    let mut seen = vec![false; dim];
    let mut out = Vec::with_capacity(blocks.len());
    for (i, b) in blocks.into_iter().enumerate() {
        let set = IndexSet::new(b, dim)
            .map_err(|e| Error::InvalidDistribution(format!("block {i}: {e}")))?;
        for &j in set.as_slice() {
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidDistribution(format!("index {j} lies in two blocks")));
            }
        }
        out.push(set);
    }
    if let Some(j) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidDistribution(format!("index {j} is in no block")));
    }
    Ok(out)
}

/// Contiguous blocks of at most `size` coordinates.
pub fn contiguous_blocks(dim: usize, size: usize) -> Vec<Vec<usize>> {
    let size = size.max(1);
    (0..dim).step_by(size).map(|s| (s..(s + size).min(dim)).collect()).collect()
}

/// The sketch `C(S) = I_S P⁻¹`, stored as selected indices and `1/p_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    selected: IndexSet,
    inv_probs: Vec<f64>,
}

impl Sketch {
    pub fn new(selected: IndexSet, p: &DiagonalMatrix) -> Result<Self> {
        if let Some(&last) = selected.as_slice().last() {
            if last >= p.dim() {
                return Err(Error::DimensionMismatch { expected: p.dim(), actual: last + 1 });
            }
        }
        let inv_probs = selected.as_slice().iter().map(|&j| 1.0 / p[j]).collect();
        Ok(Sketch { selected, inv_probs })
    }

    pub fn selected(&self) -> &IndexSet {
        &self.selected
    }

    pub fn inv_probs(&self) -> &[f64] {
        &self.inv_probs
    }

    /// `(Cx)_j = x_j / p_j` for `j ∈ S`, zero elsewhere.
    pub fn apply(&self, x: &Vector) -> Vector {
        let mut out = vec![0.0; x.dim()];
        for (&j, &c) in self.selected.as_slice().iter().zip(&self.inv_probs) {
            out[j] = x[j] * c;
        }
        Vector::new(out).expect("finite input stays finite")
    }
}

/// Apply the sketch `I_S P⁻¹` to `x`.
pub fn sketch_apply(s: &IndexSet, p: &DiagonalMatrix, x: &Vector) -> Result<Vector> {
    check_dim(p.dim(), x.dim())?;
    Ok(Sketch::new(s.clone(), p)?.apply(x))
}
