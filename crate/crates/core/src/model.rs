//! Partition model, weights, weighting strategies and random trial instances.
//!
//! Blocks are contiguous index ranges in the order given: block `i` covers
//! `offset_i .. offset_i + |S_i|`. The support count of block `i` is
//! `α_i·|S_i|` and must be an integer; the model stores the counts and
//! derives `α_i` from them, so two models with the same fractions carry
//! bit-identical `α`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::weights_opt;

/// Relative tolerance for `α_i·|S_i|` to count as an integer in [`PartitionModel::new`].
const COUNT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct PartitionModel {
    d: usize,
    blocks: Vec<usize>,
    counts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    d: usize,
    blocks: Vec<usize>,
    counts: Vec<usize>,
}

impl TryFrom<RawModel> for PartitionModel {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        PartitionModel::from_counts(raw.d, raw.blocks, raw.counts)
    }
}

impl From<PartitionModel> for RawModel {
    fn from(m: PartitionModel) -> Self {
        RawModel {
            d: m.d,
            blocks: m.blocks,
            counts: m.counts,
        }
    }
}

impl PartitionModel {
    /// Validated model from block sizes and support fractions.
    pub fn new(d: usize, blocks: Vec<usize>, alpha: Vec<f64>) -> Result<Self> {
        Self::with_count_tolerance(d, blocks, alpha, |size| COUNT_TOL * (size as f64).max(1.0))
    }

    /// Like [`PartitionModel::new`] but snaps `α_i·|S_i|` to the nearest
    /// integer when it lies within `tol` (absolute, in index counts). Meant
    /// for rounded decimal input such as `0.0778` for `7/90`.
    pub fn snapped(d: usize, blocks: Vec<usize>, alpha: Vec<f64>, tol: f64) -> Result<Self> {
        Self::with_count_tolerance(d, blocks, alpha, |_| tol)
    }

    fn with_count_tolerance(
        d: usize,
        blocks: Vec<usize>,
        alpha: Vec<f64>,
        allowed: impl Fn(usize) -> f64,
    ) -> Result<Self> {
        if alpha.len() != blocks.len() {
            return Err(Error::InvalidModel(format!(
                "{} block sizes but {} support fractions",
                blocks.len(),
                alpha.len()
            )));
        }
        let mut counts = Vec::with_capacity(blocks.len());
        for (i, (&size, &a)) in blocks.iter().zip(&alpha).enumerate() {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidModel(format!(
                    "alpha_{} = {a} is outside (0, 1]",
                    i + 1
                )));
            }
            let exact = a * size as f64;
            let rounded = exact.round();
            if (exact - rounded).abs() > allowed(size) {
                return Err(Error::InvalidModel(format!(
                    "alpha_{} * |S_{}| = {exact} is not an integer support count",
                    i + 1,
                    i + 1
                )));
            }
            counts.push(rounded as usize);
        }
        Self::from_counts(d, blocks, counts)
    }

    /// Model from block sizes and exact per-block support counts `|T ∩ S_i|`.
    pub fn from_counts(d: usize, blocks: Vec<usize>, counts: Vec<usize>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidModel(
                "ambient dimension must be positive".into(),
            ));
        }
        if blocks.is_empty() {
            return Err(Error::InvalidModel("at least one block is required".into()));
        }
        if counts.len() != blocks.len() {
            return Err(Error::InvalidModel(format!(
                "{} block sizes but {} support counts",
                blocks.len(),
                counts.len()
            )));
        }
        if let Some(i) = blocks.iter().position(|&s| s == 0) {
            return Err(Error::InvalidModel(format!("block {} is empty", i + 1)));
        }
        let total: usize = blocks.iter().sum();
        if total != d {
            return Err(Error::InvalidModel(format!(
                "block sizes sum to {total}, not to d = {d}; blocks must partition the index set"
            )));
        }
        for (i, (&c, &size)) in counts.iter().zip(&blocks).enumerate() {
            if c == 0 {
                return Err(Error::InvalidModel(format!(
                    "block {} has no support indices (alpha must be positive)",
                    i + 1
                )));
            }
            if c > size {
                return Err(Error::InvalidModel(format!(
                    "block {} has {c} support indices but only {size} entries",
                    i + 1
                )));
            }
        }
        let s: usize = counts.iter().sum();
        if s >= d {
            return Err(Error::InvalidModel(format!(
                "sigma = {s}/{d} must be below 1 (the support cannot fill the index set)"
            )));
        }
        Ok(PartitionModel { d, blocks, counts })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// Support counts `|T ∩ S_i|`.
    pub fn support_counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total sparsity `s = |T|`.
    pub fn sparsity(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.blocks)
            .map(|(&c, &n)| c as f64 / n as f64)
            .collect()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|&n| n as f64 / self.d as f64)
            .collect()
    }

    /// σ = Σ α_i ρ_i = |T|/d.
    pub fn sigma(&self) -> f64 {
        self.sparsity() as f64 / self.d as f64
    }

    /// Smallest support fraction ᾱ.
    pub fn alpha_min(&self) -> f64 {
        self.alpha().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn block_range(&self, i: usize) -> Range<usize> {
        let start: usize = self.blocks[..i].iter().sum();
        start..start + self.blocks[i]
    }

    /// Block index of every coordinate.
    pub fn block_map(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| std::iter::repeat_n(i, n))
            .collect()
    }

    /// Collapse the blocks listed in `group` (0-based) into a single block
    /// placed at the position of the smallest listed index; the remaining
    /// blocks keep their order. Returns the merged model and the map from old
    /// to new block indices. Index ranges are not contiguous with the
    /// original layout, so the merged model is only used for per-block
    /// quantities.
    pub fn merge(&self, group: &[usize]) -> Result<(PartitionModel, Vec<usize>)> {
        if group.is_empty() {
            return Err(Error::Config("merge list is empty".into()));
        }
        let mut sorted = group.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != group.len() {
            return Err(Error::Config("merge list repeats a block".into()));
        }
        if let Some(&bad) = sorted.iter().find(|&&i| i >= self.k()) {
            return Err(Error::Config(format!(
                "merge list names block {} but the model has {} blocks",
                bad + 1,
                self.k()
            )));
        }
        let head = sorted[0];
        let mut map = vec![0; self.k()];
        let mut blocks = Vec::new();
        let mut counts = Vec::new();
        for i in 0..self.k() {
            if sorted.binary_search(&i).is_ok() {
                if i == head {
                    map[i] = blocks.len();
                    blocks.push(sorted.iter().map(|&j| self.blocks[j]).sum());
                    counts.push(sorted.iter().map(|&j| self.counts[j]).sum());
                } else {
                    map[i] = map[head];
                }
            } else {
                map[i] = blocks.len();
                blocks.push(self.blocks[i]);
                counts.push(self.counts[i]);
            }
        }
        Ok((PartitionModel::from_counts(self.d, blocks, counts)?, map))
    }
}

/// `make_model` entry point: validated model from sizes and fractions.
pub fn make_model(d: usize, block_sizes: &[usize], alpha: &[f64]) -> Result<PartitionModel> {
    PartitionModel::new(d, block_sizes.to_vec(), alpha.to_vec())
}

/// Per-block weights ω; the index-level weight vector is `w = Σ ω_i 1_{S_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weights {
    omega: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Weights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Weights::new(v)
    }
}

impl From<Weights> for Vec<f64> {
    fn from(w: Weights) -> Self {
        w.omega
    }
}

impl Weights {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::Domain("weights need at least one block".into()));
        }
        if let Some(bad) = omega.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Domain(format!(
                "weights must be finite and non-negative, got {bad}"
            )));
        }
        Ok(Weights { omega })
    }

    pub fn uniform(k: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; k])
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn k(&self) -> usize {
        self.omega.len()
    }

    pub fn max(&self) -> f64 {
        self.omega.iter().copied().fold(0.0, f64::max)
    }

    /// All weights zero: the weighted program has a constant objective.
    pub fn is_degenerate(&self) -> bool {
        self.max() == 0.0
    }

    pub fn scaled(&self, c: f64) -> Result<Weights> {
        Weights::new(self.omega.iter().map(|w| w * c).collect())
    }

    /// Rescale so that `max_i ω_i = 1`.
    pub fn normalized(&self) -> Result<Weights> {
        let m = self.max();
        if m == 0.0 {
            return Err(Error::Domain("cannot normalize all-zero weights".into()));
        }
        let mut omega: Vec<f64> = self.omega.iter().map(|w| w / m).collect();
        // exact 1 for the maximizing block(s)
        for (w, orig) in omega.iter_mut().zip(&self.omega) {
            if *orig == m {
                *w = 1.0;
            }
        }
        Ok(Weights { omega })
    }

    pub fn check_blocks(&self, model: &PartitionModel) -> Result<()> {
        if self.k() != model.k() {
            return Err(Error::Dimension(format!(
                "{} weights for a model with {} blocks",
                self.k(),
                model.k()
            )));
        }
        Ok(())
    }

    /// Index-level weights `w_j = ω_{block(j)}`.
    pub fn expand(&self, model: &PartitionModel) -> Result<Vec<f64>> {
        self.check_blocks(model)?;
        Ok(model
            .blocks()
            .iter()
            .zip(&self.omega)
            .flat_map(|(&n, &w)| std::iter::repeat_n(w, n))
            .collect())
    }
}

/// A concrete support set with signs and values for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportInstance {
    pub d: usize,
    /// Sorted support indices.
    pub support: Vec<usize>,
    /// ±1 per support index.
    pub signs: Vec<f64>,
    /// Nonzero values per support index.
    pub values: Vec<f64>,
    pub block_of: Vec<usize>,
}

impl SupportInstance {
    /// Dense signal `x₀`.
    pub fn signal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        for (&j, &v) in self.support.iter().zip(&self.values) {
            x[j] = v;
        }
        x
    }

    /// Dense sign vector `sgn x₀` (0 off the support).
    pub fn sign_vector(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.d];
        for (&j, &v) in self.support.iter().zip(&self.signs) {
            s[j] = v;
        }
        s
    }

    pub fn in_support(&self) -> Vec<bool> {
        let mut mask = vec![false; self.d];
        for &j in &self.support {
            mask[j] = true;
        }
        mask
    }
}

/// Draw exactly `α_i|S_i|` support indices uniformly without replacement in
/// every block, with standard-normal values.
pub fn generate_instance(model: &PartitionModel, value_seed: u64) -> SupportInstance {
    let mut rng = rng_from(&[value_seed]);
    let mut support = Vec::with_capacity(model.sparsity());
    for i in 0..model.k() {
        let range = model.block_range(i);
        let picks = index::sample(&mut rng, model.blocks()[i], model.support_counts()[i]);
        let mut picks: Vec<usize> = picks.into_iter().map(|p| range.start + p).collect();
        picks.sort_unstable();
        support.extend(picks);
    }
    let mut values = Vec::with_capacity(support.len());
    for _ in 0..support.len() {
        let mut v: f64 = StandardNormal.sample(&mut rng);
        while v == 0.0 {
            v = StandardNormal.sample(&mut rng);
        }
        values.push(v);
    }
    let signs = values.iter().map(|v: &f64| v.signum()).collect();
    SupportInstance {
        d: model.d(),
        support,
        signs,
        values,
        block_of: model.block_map(),
    }
}

/// Weighting strategy. Textual form (block numbers are 1-based):
/// `unit`, `zero-one`, `zero-one:1,2`, `one-minus-alpha`, `optimal`,
/// `merged:1,2,3:optimal`.
///
/// The last block plays the role of the complement of the support estimate:
/// `zero-one` without a block list zeroes every other block, and
/// `one-minus-alpha` keeps weight 1 on it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    Unit,
    /// Zero weight on the listed 0-based blocks (default: all but the last).
    ZeroOne(Option<Vec<usize>>),
    OneMinusAlpha,
    Optimal,
    /// Apply `inner` to the model with `group` (0-based) collapsed into one block.
    Merged {
        group: Vec<usize>,
        inner: Box<Strategy>,
    },
}

impl Strategy {
    /// The four strategies compared in the two-block experiments.
    pub fn standard_set() -> Vec<Strategy> {
        vec![
            Strategy::Unit,
            Strategy::ZeroOne(None),
            Strategy::OneMinusAlpha,
            Strategy::Optimal,
        ]
    }
}

fn fmt_blocks(blocks: &[usize]) -> String {
    blocks
        .iter()
        .map(|b| (b + 1).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_blocks(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            let n: usize = t
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad block number '{t}'")))?;
            if n == 0 {
                return Err(Error::Config("block numbers start at 1".into()));
            }
            Ok(n - 1)
        })
        .collect()
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Unit => write!(f, "unit"),
            Strategy::ZeroOne(None) => write!(f, "zero-one"),
            Strategy::ZeroOne(Some(b)) => write!(f, "zero-one:{}", fmt_blocks(b)),
            Strategy::OneMinusAlpha => write!(f, "one-minus-alpha"),
            Strategy::Optimal => write!(f, "optimal"),
            Strategy::Merged { group, inner } => write!(f, "merged:{}:{inner}", fmt_blocks(group)),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "unit" => return Ok(Strategy::Unit),
            "zero-one" => return Ok(Strategy::ZeroOne(None)),
            "one-minus-alpha" => return Ok(Strategy::OneMinusAlpha),
            "optimal" => return Ok(Strategy::Optimal),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("zero-one:") {
            return Ok(Strategy::ZeroOne(Some(parse_blocks(rest)?)));
        }
        if let Some(rest) = s.strip_prefix("merged:") {
            let (group, inner) = rest.split_once(':').ok_or_else(|| {
                Error::Config(format!("merged strategy needs an inner rule: '{s}'"))
            })?;
            if group.trim().is_empty() {
                return Err(Error::Config(
                    "merged strategy with an empty block list".into(),
                ));
            }
            return Ok(Strategy::Merged {
                group: parse_blocks(group)?,
                inner: Box::new(inner.parse()?),
            });
        }
        Err(Error::Config(format!("unknown strategy '{s}'")))
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> Self {
        s.to_string()
    }
}

/// Per-block weights for `strategy` on `model`. The merged variant is lifted
/// back onto the blocks of `model` (every merged block shares one weight);
/// use [`merged_weights`] for the collapsed form.
pub fn weights_for_strategy(model: &PartitionModel, strategy: &Strategy) -> Result<Weights> {
    let k = model.k();
    match strategy {
        Strategy::Unit => Weights::uniform(k, 1.0),
        Strategy::ZeroOne(blocks) => {
            let zeroed: Vec<usize> = match blocks {
                Some(b) => b.clone(),
                None => (0..k.saturating_sub(1)).collect(),
            };
            if let Some(&bad) = zeroed.iter().find(|&&i| i >= k) {
                return Err(Error::Config(format!(
                    "zero-one names block {} but the model has {k} blocks",
                    bad + 1
                )));
            }
            let omega = (0..k)
                .map(|i| if zeroed.contains(&i) { 0.0 } else { 1.0 })
                .collect();
            Weights::new(omega)
        }
        Strategy::OneMinusAlpha => {
            let alpha = model.alpha();
            let omega = (0..k)
                .map(|i| if i + 1 == k { 1.0 } else { 1.0 - alpha[i] })
                .collect();
            Weights::new(omega)
        }
        Strategy::Optimal => Ok(weights_opt::optimal_weights(model)?.normalized),
        Strategy::Merged { group, inner } => {
            let (_, collapsed, map) = merged_parts(model, group, inner)?;
            Weights::new(map.iter().map(|&j| collapsed.omega()[j]).collect())
        }
    }
}

fn merged_parts(
    model: &PartitionModel,
    group: &[usize],
    inner: &Strategy,
) -> Result<(PartitionModel, Weights, Vec<usize>)> {
    let (merged, map) = model.merge(group)?;
    let w = weights_for_strategy(&merged, inner)?;
    Ok((merged, w, map))
}

/// Collapse `group` and apply `inner` on the merged model; returns the merged
/// model together with its block weights.
pub fn merged_weights(
    model: &PartitionModel,
    group: &[usize],
    inner: &Strategy,
) -> Result<(PartitionModel, Weights)> {
    let (m, w, _) = merged_parts(model, group, inner)?;
    Ok((m, w))
}

/// A support fraction given either as a decimal or as a fraction string such
/// as `"7/90"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Number(f64),
    Text(String),
}

impl AlphaSpec {
    pub fn value(&self) -> Result<f64> {
        match self {
            AlphaSpec::Number(x) => Ok(*x),
            AlphaSpec::Text(s) => parse_fraction(s),
        }
    }
}

/// Parse `"0.3"` or `"7/90"`.
pub fn parse_fraction(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse '{s}' as a number or fraction"));
    match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            Ok(num / den)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

/// Largest distance of `α_i|S_i|` from an integer that model configs accept.
/// Covers decimals printed to four or more significant digits.
pub const SNAP_TOLERANCE: f64 = 0.01;

/// Model description shared by the JSON configs and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub blocks: Vec<usize>,
    pub alpha: Vec<AlphaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ModelConfig {
    pub fn model(&self) -> Result<PartitionModel> {
        let alpha = self
            .alpha
            .iter()
            .map(AlphaSpec::value)
            .collect::<Result<Vec<_>>>()?;
        PartitionModel::snapped(self.d, self.blocks.clone(), alpha, SNAP_TOLERANCE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_block() -> PartitionModel {
        PartitionModel::new(100, vec![10, 90], vec![0.3, 7.0 / 90.0]).unwrap()
    }

    fn four_block() -> PartitionModel {
        PartitionModel::new(
            100,
            vec![5, 10, 15, 70],
            vec![0.8, 0.3, 2.0 / 15.0, 1.0 / 70.0],
        )
        .unwrap()
    }

    #[test]
    fn sigma_of_the_experiment_models() {
        assert_abs_diff_eq!(two_block().sigma(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(four_block().sigma(), 0.1, epsilon = 1e-15);
        assert_eq!(two_block().support_counts(), &[3, 7]);
        assert_eq!(four_block().support_counts(), &[4, 3, 2, 1]);
    }

    #[test]
    fn full_support_rejected() {
        let err = PartitionModel::new(10, vec![10], vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn invalid_models() {
        assert!(PartitionModel::new(100, vec![10, 80], vec![0.3, 0.1]).is_err());
        assert!(PartitionModel::new(100, vec![10, 90], vec![0.0, 0.1]).is_err());
        assert!(PartitionModel::new(100, vec![10, 90], vec![1.5, 0.1]).is_err());
        assert!(PartitionModel::new(100, vec![10, 90], vec![0.35, 0.1]).is_err());
        assert!(PartitionModel::new(100, vec![10, 90], vec![0.3]).is_err());
        assert!(PartitionModel::new(0, vec![], vec![]).is_err());
    }

    #[test]
    fn snapping_accepts_rounded_decimals() {
        let m =
            PartitionModel::snapped(100, vec![10, 90], vec![0.3, 0.0778], SNAP_TOLERANCE).unwrap();
        assert_eq!(m, two_block());
        assert!(
            PartitionModel::snapped(100, vec![10, 90], vec![0.3, 0.08], SNAP_TOLERANCE).is_err()
        );
    }

    #[test]
    fn unit_and_one_minus_alpha() {
        let m = two_block();
        assert_eq!(
            weights_for_strategy(&m, &Strategy::Unit).unwrap().omega(),
            &[1.0, 1.0]
        );
        let w = weights_for_strategy(&m, &Strategy::OneMinusAlpha).unwrap();
        assert_abs_diff_eq!(w.omega()[0], 0.7, epsilon = 1e-15);
        assert_eq!(w.omega()[1], 1.0);
        assert_eq!(
            weights_for_strategy(&m, &Strategy::ZeroOne(None))
                .unwrap()
                .omega(),
            &[0.0, 1.0]
        );
    }

    #[test]
    fn merged_optimal_two_block_weights() {
        let m = four_block();
        let (merged, w) = merged_weights(&m, &[0, 1, 2], &Strategy::Optimal).unwrap();
        assert_eq!(merged.blocks(), &[30, 70]);
        assert_eq!(merged.support_counts(), &[9, 1]);
        assert!((w.omega()[0] - 0.3742).abs() < 5e-4);
        assert_eq!(w.omega()[1], 1.0);

        let lifted = weights_for_strategy(
            &m,
            &Strategy::Merged {
                group: vec![0, 1, 2],
                inner: Box::new(Strategy::Optimal),
            },
        )
        .unwrap();
        assert_eq!(lifted.omega()[0], w.omega()[0]);
        assert_eq!(lifted.omega()[2], w.omega()[0]);
        assert_eq!(lifted.omega()[3], 1.0);
    }

    #[test]
    fn merging_preserves_sigma() {
        let m = four_block();
        for group in [vec![0, 1], vec![1, 3], vec![0, 1, 2, 3], vec![2]] {
            let (merged, map) = m.merge(&group).unwrap();
            assert_abs_diff_eq!(merged.sigma(), m.sigma(), epsilon = 1e-15);
            assert_eq!(map.len(), 4);
        }
        assert!(m.merge(&[]).is_err());
        assert!(m.merge(&[1, 1]).is_err());
        assert!(m.merge(&[4]).is_err());
    }

    #[test]
    fn strategy_text_round_trip() {
        for s in [
            "unit",
            "zero-one",
            "zero-one:1,3",
            "one-minus-alpha",
            "optimal",
            "merged:1,2,3:optimal",
        ] {
            let parsed: Strategy = s.parse().unwrap();
            assert_eq!(parsed.to_string(), s);
        }
        assert!("merged::optimal".parse::<Strategy>().is_err());
        assert!("merged:1,2".parse::<Strategy>().is_err());
        assert!("zero-one:0".parse::<Strategy>().is_err());
        assert!("best".parse::<Strategy>().is_err());
    }

    #[test]
    fn instance_counts_and_determinism() {
        let m = two_block();
        let a = generate_instance(&m, 42);
        let b = generate_instance(&m, 42);
        assert_eq!(a, b);
        assert_eq!(a.support.len(), 10);
        assert_eq!(a.support.iter().filter(|&&j| j < 10).count(), 3);
        assert!(a.values.iter().all(|v| *v != 0.0));
        let x = a.signal();
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 10);
        assert_ne!(generate_instance(&m, 43), a);
    }

    #[test]
    fn single_block_instance() {
        let m = PartitionModel::from_counts(50, vec![50], vec![7]).unwrap();
        let inst = generate_instance(&m, 1);
        assert_eq!(inst.support.len(), 7);
        assert!(inst.block_of.iter().all(|&b| b == 0));
    }

    #[test]
    fn fractions() {
        assert_abs_diff_eq!(parse_fraction("7/90").unwrap(), 7.0 / 90.0);
        assert_eq!(parse_fraction(" 0.25 ").unwrap(), 0.25);
        assert!(parse_fraction("1/0").is_err());
        assert!(parse_fraction("x").is_err());
    }

    #[test]
    fn model_config_json() {
        let cfg: ModelConfig = serde_json::from_str(
            r#"{"d":100,"blocks":[10,90],"alpha":[0.3,"7/90"],"strategy":"optimal","seed":3}"#,
        )
        .unwrap();
        assert_eq!(cfg.model().unwrap(), two_block());
        assert_eq!(cfg.strategy, Some(Strategy::Optimal));
    }

    #[test]
    fn weights_validation() {
        assert!(Weights::new(vec![]).is_err());
        assert!(Weights::new(vec![-1.0]).is_err());
        assert!(Weights::new(vec![f64::NAN]).is_err());
        let w = Weights::new(vec![0.5, 2.0]).unwrap();
        assert_eq!(w.normalized().unwrap().omega(), &[0.25, 1.0]);
        assert!(Weights::new(vec![0.0, 0.0]).unwrap().normalized().is_err());
        let e = w.expand(&two_block()).unwrap();
        assert_eq!(e.len(), 100);
        assert_eq!(e[9], 0.5);
        assert_eq!(e[10], 2.0);
    }
}
