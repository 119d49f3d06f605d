//! Finite grids, distributions and channels, plus the classical and
//! semantic Bayes operations the rest of the crate builds on.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::stable_sum;

/// Tolerance accepted on `Σ p = 1` when a distribution is constructed.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Ordered instance universe `x_1 < x_2 < … < x_m`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid { index: 0 });
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidGrid { index: i + 1 });
            }
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidGrid { index: i });
        }
        Ok(Self { points })
    }

    /// Points `min, min + step, …` up to and including `max` (within half a step).
    pub fn range(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !min.is_finite() || !max.is_finite() || max < min {
            return Err(Error::BadParams("grid range needs min <= max and step > 0"));
        }
        let count = ((max - min) / step + 0.5) as usize + 1;
        Self::new((0..count).map(|k| min + k as f64 * step).collect())
    }

    /// Integer points `lo..=hi`.
    pub fn integers(lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::BadParams("integer grid needs lo <= hi"));
        }
        Self::new((lo..=hi).map(|v| v as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A normalized probability vector.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Distribution {
    p: Vec<f64>,
}

impl Distribution {
    /// Validates nonnegativity and `|Σp − 1| ≤ 1e-12`, then renormalizes exactly.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::AllZeroWeights);
        }
        if let Some(index) = p.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidProbability { index });
        }
        let sum = stable_sum(p.iter().copied());
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self::renormalized(p, sum))
    }

    fn renormalized(mut p: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            p.iter_mut().for_each(|v| *v /= sum);
        }
        Self { p }
    }

    /// Renormalizes a vector that is known to be a distribution up to
    /// floating-point drift (solver outputs).
    pub(crate) fn from_drifted(p: Vec<f64>) -> Self {
        let sum = stable_sum(p.iter().copied());
        Self::renormalized(p, sum)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over an empty set");
        Self {
            p: alloc::vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        assert!(at < n);
        let mut p = alloc::vec![0.0; n];
        p[at] = 1.0;
        Self { p }
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.p
    }

    /// L1 distance between two distributions of equal length.
    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        self.p.iter().zip(&other.p).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// `p_i = w_i / Σw`.
pub fn normalize(weights: &[f64]) -> Result<Distribution> {
    if let Some(index) = weights.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidProbability { index });
    }
    let sum = stable_sum(weights.iter().copied());
    if sum <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    Ok(Distribution {
        p: weights.iter().map(|w| w / sum).collect(),
    })
}

/// Ordered, unique label names `y_1 … y_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidLabels);
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::InvalidLabels);
            }
        }
        Ok(Self { names })
    }

    /// `y1, y2, …, yn`.
    pub fn numbered(n: usize) -> Self {
        assert!(n > 0);
        Self {
            names: (1..=n).map(|j| format!("y{j}")).collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Row-stochastic `m × n` matrix of `P(y_j | x_i)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Channel {
    inputs: usize,
    labels: usize,
    data: Vec<f64>,
}

impl Channel {
    pub fn new(inputs: usize, labels: usize, data: Vec<f64>) -> Result<Self> {
        if inputs == 0 || labels == 0 {
            return Err(Error::BadParams("channel needs at least one row and column"));
        }
        if data.len() != inputs * labels {
            return Err(Error::DimensionMismatch {
                context: "channel entries",
                expected: inputs * labels,
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidProbability { index });
        }
        let mut data = data;
        for row in data.chunks_mut(labels) {
            let sum = stable_sum(row.iter().copied());
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NotNormalized { sum });
            }
            if sum != 1.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(Self {
            inputs,
            labels,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let labels = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != labels) {
            return Err(Error::DimensionMismatch {
                context: "channel row length",
                expected: labels,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), labels, rows.concat())
    }

    /// Rows already known to be normalized up to rounding.
    pub(crate) fn from_drifted(inputs: usize, labels: usize, mut data: Vec<f64>) -> Self {
        for row in data.chunks_mut(labels) {
            let sum = stable_sum(row.iter().copied());
            if sum != 1.0 && sum > 0.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Self {
            inputs,
            labels,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = alloc::vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            inputs: n,
            labels: n,
            data,
        }
    }

    /// Every row equal to `row`.
    pub fn constant(inputs: usize, row: &Distribution) -> Self {
        let labels = row.len();
        let data = (0..inputs).flat_map(|_| row.probs().iter().copied()).collect();
        Self {
            inputs,
            labels,
            data,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.labels..(i + 1) * self.labels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.labels)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.labels + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Label marginal `P(y_j) = Σ_i P(x_i) P(y_j|x_i)`.
    pub fn output_marginal(&self, prior: &Distribution) -> Result<Distribution> {
        check_len("prior vs channel rows", self.inputs, prior.len())?;
        let mut out = alloc::vec![0.0; self.labels];
        for (px, row) in prior.probs().iter().zip(self.rows()) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += px * p;
            }
        }
        Ok(Distribution::from_drifted(out))
    }
}

/// `m × n` joint distribution `P(x_i, y_j)`, row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct JointDistribution {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl JointDistribution {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch {
                context: "joint entries",
                expected: rows * cols,
                found: data.len(),
            });
        }
        let dist = Distribution::new(data)?;
        Ok(Self {
            rows,
            cols,
            data: dist.into_vec(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                context: "joint row length",
                expected: cols,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// `P(x_i) P(y_j|x_i)`.
    pub fn from_prior_channel(prior: &Distribution, channel: &Channel) -> Result<Self> {
        check_len("prior vs channel rows", channel.inputs(), prior.len())?;
        let data = prior
            .probs()
            .iter()
            .zip(channel.rows())
            .flat_map(|(px, row)| row.iter().map(move |p| px * p))
            .collect();
        Ok(Self {
            rows: channel.inputs(),
            cols: channel.labels(),
            data,
        })
    }

    /// `P(y_j) P(x_i|y_j)` from a label marginal and one conditional per label.
    pub fn from_label_conditionals(
        label_marginal: &Distribution,
        conditionals: &[Distribution],
    ) -> Result<Self> {
        check_len("conditionals vs labels", label_marginal.len(), conditionals.len())?;
        let rows = conditionals.first().map_or(0, Distribution::len);
        let cols = label_marginal.len();
        let mut data = alloc::vec![0.0; rows * cols];
        for (j, (py, cond)) in label_marginal.probs().iter().zip(conditionals).enumerate() {
            check_len("conditional length", rows, cond.len())?;
            for (i, p) in cond.probs().iter().enumerate() {
                data[i * cols + j] = py * p;
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn x_marginal(&self) -> Distribution {
        Distribution::from_drifted(
            self.data
                .chunks(self.cols)
                .map(|r| stable_sum(r.iter().copied()))
                .collect(),
        )
    }

    pub fn y_marginal(&self) -> Distribution {
        Distribution::from_drifted(
            (0..self.cols)
                .map(|j| stable_sum((0..self.rows).map(|i| self.get(i, j))))
                .collect(),
        )
    }

    pub fn transpose(&self) -> Self {
        let mut data = alloc::vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

/// Output of [`bayes_update`].
#[derive(Debug, Clone, PartialEq)]
pub struct BayesUpdate {
    pub marginal: Distribution,
    /// `P(x | y_j)`; `None` marks a label with `P(y_j) = 0`, whose posterior
    /// is undefined.
    pub posteriors: Vec<Option<Distribution>>,
}

/// Classical Bayes: label marginal and the posterior `P(x|y_j)` of every label.
pub fn bayes_update(prior: &Distribution, channel: &Channel) -> Result<BayesUpdate> {
    let marginal = channel.output_marginal(prior)?;
    let posteriors = (0..channel.labels())
        .map(|j| {
            let column: Vec<f64> = prior
                .probs()
                .iter()
                .zip(channel.rows())
                .map(|(px, row)| px * row[j])
                .collect();
            normalize(&column).ok()
        })
        .collect();
    Ok(BayesUpdate {
        marginal,
        posteriors,
    })
}

/// Output of [`semantic_bayes`].
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticPosterior {
    /// `T(θ) = Σ_i P(x_i) T_i`.
    pub logical_probability: f64,
    /// `P(x|θ) = T_i P(x_i) / T(θ)`.
    pub posterior: Distribution,
}

pub(crate) fn check_truth_vector(truth: &[f64], label: usize) -> Result<()> {
    match truth.iter().position(|t| !(0.0..=1.0).contains(t)) {
        Some(row) => Err(Error::TruthOutOfRange { row, label }),
        None => Ok(()),
    }
}

/// Logical probability of a truth function under `prior`.
pub fn logical_probability(prior: &Distribution, truth: &[f64]) -> Result<f64> {
    check_len("truth vs prior", prior.len(), truth.len())?;
    check_truth_vector(truth, 0)?;
    Ok(stable_sum(prior.probs().iter().zip(truth).map(|(p, t)| p * t)))
}

/// Semantic Bayes' formula: `P(x|θ) = T(θ|x) P(x) / T(θ)`.
pub fn semantic_bayes(prior: &Distribution, truth: &[f64]) -> Result<SemanticPosterior> {
    let logical_probability = logical_probability(prior, truth)?;
    if logical_probability <= 0.0 {
        return Err(Error::ZeroLogicalProbability { label: 0 });
    }
    let posterior = prior
        .probs()
        .iter()
        .zip(truth)
        .map(|(p, t)| t * p / logical_probability)
        .collect();
    Ok(SemanticPosterior {
        logical_probability,
        posterior: Distribution::from_drifted(posterior),
    })
}

/// `max_i P(x_i|θ) / P(x_i)` for one likelihood.
pub fn max_likelihood_ratio(prior: &Distribution, likelihood: &Distribution) -> Result<f64> {
    check_len("likelihood vs prior", prior.len(), likelihood.len())?;
    let mut best = 0.0f64;
    for (i, (p, l)) in prior.probs().iter().zip(likelihood.probs()).enumerate() {
        if *l > 0.0 {
            if *p <= 0.0 {
                return Err(Error::ZeroPrior { index: i });
            }
            best = best.max(l / p);
        }
    }
    Ok(best)
}

/// Output of [`truth_from_likelihood`].
#[derive(Debug, Clone, PartialEq)]
pub struct TruthFromLikelihood {
    pub truth: Vec<f64>,
    pub logical_probability: f64,
}

/// Inverse of [`semantic_bayes`]: `T_i = T(θ) P(x_i|θ) / P(x_i)` with
/// `T(θ) = 1 / global_max_ratio`.
///
/// `global_max_ratio` is the maximum of `P(x|θ)/P(x)` over every label the
/// caller is normalizing together; pass [`max_likelihood_ratio`] of this
/// likelihood alone for the per-label convention.
pub fn truth_from_likelihood(
    prior: &Distribution,
    likelihood: &Distribution,
    global_max_ratio: f64,
) -> Result<TruthFromLikelihood> {
    let own_max = max_likelihood_ratio(prior, likelihood)?;
    if !(global_max_ratio.is_finite() && global_max_ratio > 0.0) {
        return Err(Error::BadParams("max ratio must be positive and finite"));
    }
    if own_max > global_max_ratio * (1.0 + 1e-12) {
        return Err(Error::BadParams("max ratio is below this likelihood's own maximum"));
    }
    let truth = prior
        .probs()
        .iter()
        .zip(likelihood.probs())
        .map(|(p, l)| {
            if *l > 0.0 {
                (l / p / global_max_ratio).min(1.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(TruthFromLikelihood {
        truth,
        logical_probability: 1.0 / global_max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[1.0, 1.0, 1.0, 1.0]).unwrap().probs(), &[0.25; 4]);
        assert_eq!(normalize(&[2.0, 0.0]).unwrap().probs(), &[1.0, 0.0]);
        assert_eq!(normalize(&[3.0, 1.0]).unwrap().probs(), &[0.75, 0.25]);
        assert_eq!(normalize(&[0.0, 0.0]), Err(Error::AllZeroWeights));
        assert!(matches!(
            normalize(&[1.0, -1.0]),
            Err(Error::InvalidProbability { index: 1 })
        ));
    }

    #[test]
    fn distribution_rejects_unnormalized() {
        assert!(matches!(
            Distribution::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        let d = Distribution::new(vec![0.5, 0.5 + 1e-13]).unwrap();
        assert_eq!(d.probs().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(Grid::new(vec![]).is_err());
        let g = Grid::range(0.0, 100.0, 1.0).unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g.points()[100], 100.0);
        assert_eq!(Grid::integers(0, 255).unwrap().len(), 256);
    }

    #[test]
    fn label_set_unique() {
        assert!(LabelSet::new(vec!["a".into(), "a".into()]).is_err());
        assert!(LabelSet::new(vec![]).is_err());
        assert_eq!(LabelSet::numbered(3).names()[2], "y3");
    }

    #[test]
    fn bayes_identity_channel() {
        let prior = Distribution::uniform(2);
        let out = bayes_update(&prior, &Channel::identity(2)).unwrap();
        assert_eq!(out.marginal.probs(), &[0.5, 0.5]);
        assert_eq!(out.posteriors[0].as_ref().unwrap().probs(), &[1.0, 0.0]);
        assert_eq!(out.posteriors[1].as_ref().unwrap().probs(), &[0.0, 1.0]);
    }

    #[test]
    fn bayes_independent_channel() {
        let prior = Distribution::uniform(2);
        let row = Distribution::new(vec![0.7, 0.3]).unwrap();
        let out = bayes_update(&prior, &Channel::constant(2, &row)).unwrap();
        assert!(close(out.marginal.probs(), &[0.7, 0.3], 1e-15));
        for post in &out.posteriors {
            assert!(close(post.as_ref().unwrap().probs(), prior.probs(), 1e-15));
        }
    }

    #[test]
    fn bayes_symmetric_channel() {
        let prior = Distribution::uniform(2);
        let ch = Channel::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let out = bayes_update(&prior, &ch).unwrap();
        assert!(close(out.marginal.probs(), &[0.5, 0.5], 1e-15));
        assert!(close(out.posteriors[0].as_ref().unwrap().probs(), &[0.9, 0.1], 1e-15));
    }

    #[test]
    fn bayes_flags_zero_probability_label() {
        let prior = Distribution::uniform(2);
        let ch = Channel::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let out = bayes_update(&prior, &ch).unwrap();
        assert!(out.posteriors[1].is_none());
        let bad = Distribution::uniform(3);
        assert!(matches!(
            bayes_update(&bad, &ch),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn semantic_bayes_examples() {
        let prior = Distribution::uniform(2);
        let s = semantic_bayes(&prior, &[1.0, 1.0]).unwrap();
        assert_eq!(s.logical_probability, 1.0);
        assert_eq!(s.posterior.probs(), prior.probs());

        let s = semantic_bayes(&prior, &[1.0, 0.5]).unwrap();
        assert!((s.logical_probability - 0.75).abs() < 1e-15);
        assert!(close(s.posterior.probs(), &[2.0 / 3.0, 1.0 / 3.0], 1e-15));

        let s = semantic_bayes(&prior, &[1.0, 0.0]).unwrap();
        assert_eq!(s.logical_probability, 0.5);
        assert_eq!(s.posterior.probs(), &[1.0, 0.0]);

        assert!(matches!(
            semantic_bayes(&prior, &[0.0, 0.0]),
            Err(Error::ZeroLogicalProbability { .. })
        ));
        assert!(matches!(
            semantic_bayes(&prior, &[1.2, 0.0]),
            Err(Error::TruthOutOfRange { .. })
        ));
    }

    #[test]
    fn truth_from_likelihood_examples() {
        let prior = Distribution::uniform(2);
        let t = truth_from_likelihood(&prior, &prior, 1.0).unwrap();
        assert_eq!(t.truth, vec![1.0, 1.0]);
        assert_eq!(t.logical_probability, 1.0);

        let lik = Distribution::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let t = truth_from_likelihood(&prior, &lik, 4.0 / 3.0).unwrap();
        assert!(close(&t.truth, &[1.0, 0.5], 1e-15));
        assert!((t.logical_probability - 0.75).abs() < 1e-15);

        let lik = Distribution::point_mass(2, 0);
        let t = truth_from_likelihood(&prior, &lik, 2.0).unwrap();
        assert_eq!(t.truth, vec![1.0, 0.0]);
        assert_eq!(t.logical_probability, 0.5);
    }

    #[test]
    fn truth_from_likelihood_zero_prior() {
        let prior = Distribution::new(vec![1.0, 0.0]).unwrap();
        let lik = Distribution::uniform(2);
        assert_eq!(
            truth_from_likelihood(&prior, &lik, 2.0),
            Err(Error::ZeroPrior { index: 1 })
        );
    }

    #[test]
    fn joint_marginals_and_transpose() {
        let j = JointDistribution::from_rows(&[vec![0.4, 0.1], vec![0.2, 0.3]]).unwrap();
        assert!(close(j.x_marginal().probs(), &[0.5, 0.5], 1e-15));
        assert!(close(j.y_marginal().probs(), &[0.6, 0.4], 1e-15));
        let t = j.transpose();
        assert_eq!(t.get(1, 0), 0.1);
        assert_eq!(t.get(0, 1), 0.2);
    }
}
