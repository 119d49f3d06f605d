//! Shannon and semantic information quantities.
//!
//! Everything is accumulated in nats and reported in [`Bits`]. Infinite
//! results (a KL divergence without absolute continuity, semantic
//! information of a label that is false where it was used) are returned as
//! `±inf` values, never NaN.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, ln, ln_or_neg_inf, nats_to_bits, neg_x_ln_x, stable_sum};
use crate::prob::{check_len, check_truth_vector, Channel, Distribution, JointDistribution};
use crate::truth::SemanticChannel;

/// An information quantity in bits. May be negative (semantic information
/// of a wrong hypothesis) or infinite where documented.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Bits(pub f64);

impl Bits {
    pub fn from_nats(nats: f64) -> Self {
        Bits(nats_to_bits(nats))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn nats(self) -> f64 {
        self.0 * math::LN_2
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_neg_infinite(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn is_pos_infinite(self) -> bool {
        self.0 == f64::INFINITY
    }
}

impl core::fmt::Display for Bits {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{} bits", self.0)
    }
}

/// Shannon entropy `H(p)`.
pub fn shannon_entropy(p: &Distribution) -> Bits {
    Bits::from_nats(stable_sum(p.probs().iter().map(|&v| neg_x_ln_x(v))))
}

/// `I(X;Y)` together with its `H(Y) − H(Y|X)` decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MutualInformation {
    pub mi: Bits,
    pub label_entropy: Bits,
    pub conditional_entropy: Bits,
}

fn clamp_nonnegative(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        x
    }
}

/// Shannon mutual information of `prior` through `channel`.
pub fn mutual_information(prior: &Distribution, channel: &Channel) -> Result<MutualInformation> {
    let marginal = channel.output_marginal(prior)?;
    let py = marginal.probs();
    let mut mi = Vec::with_capacity(channel.inputs() * channel.labels());
    let mut cond = Vec::with_capacity(channel.inputs());
    for (px, row) in prior.probs().iter().zip(channel.rows()) {
        if *px <= 0.0 {
            continue;
        }
        for (p, q) in row.iter().zip(py) {
            // q ≥ px·p, so skipping underflowed joint mass also keeps q > 0
            let w = px * p;
            if w > 0.0 {
                mi.push(w * (ln(*p) - ln(*q)));
            }
        }
        cond.push(px * stable_sum(row.iter().map(|&v| neg_x_ln_x(v))));
    }
    Ok(MutualInformation {
        mi: Bits::from_nats(clamp_nonnegative(stable_sum(mi))),
        label_entropy: shannon_entropy(&marginal),
        conditional_entropy: Bits::from_nats(stable_sum(cond)),
    })
}

/// `D(p ‖ q)`. Returns `+inf` when `q_i = 0 < p_i`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<Bits> {
    check_len("kl operands", p.len(), q.len())?;
    let mut terms = Vec::with_capacity(p.len());
    for (a, b) in p.probs().iter().zip(q.probs()) {
        if *a > 0.0 {
            if *b <= 0.0 {
                return Ok(Bits(f64::INFINITY));
            }
            terms.push(a * (ln(*a) - ln(*b)));
        }
    }
    Ok(Bits::from_nats(clamp_nonnegative(stable_sum(terms))))
}

/// Point semantic information `log2[T(θ|x) / T(θ)]`; `-inf` when `T(θ|x) = 0`.
pub fn semantic_info_point(truth_at_x: f64, logical_prob: f64) -> Result<Bits> {
    if !(0.0..=1.0).contains(&truth_at_x) {
        return Err(Error::TruthOutOfRange { row: 0, label: 0 });
    }
    if !(logical_prob > 0.0 && logical_prob <= 1.0) {
        return Err(Error::ZeroLogicalProbability { label: 0 });
    }
    Ok(Bits::from_nats(ln_or_neg_inf(truth_at_x) - ln(logical_prob)))
}

/// Generalized KL information `Σ_i P(x_i|y_j) log2[T(θ_j|x_i) / T(θ_j)]`.
///
/// `-inf` when sampling mass sits where the truth function is zero.
pub fn generalized_kl(sampling: &Distribution, truth: &[f64], prior: &Distribution) -> Result<Bits> {
    check_len("sampling vs prior", prior.len(), sampling.len())?;
    let tl = crate::prob::logical_probability(prior, truth)?;
    if tl <= 0.0 {
        return Err(Error::ZeroLogicalProbability { label: 0 });
    }
    let ln_tl = ln(tl);
    let mut terms = Vec::with_capacity(truth.len());
    for (p, t) in sampling.probs().iter().zip(truth) {
        if *p > 0.0 {
            if *t <= 0.0 {
                return Ok(Bits(f64::NEG_INFINITY));
            }
            terms.push(p * (ln(*t) - ln_tl));
        }
    }
    Ok(Bits::from_nats(stable_sum(terms)))
}

/// Semantic mutual information and its entropy decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SemanticMIReport {
    /// `I(X;Y_θ)`.
    pub smi: Bits,
    /// `H(Y_θ) = −Σ_j P(y_j) log T(θ_j)`.
    pub semantic_entropy: Bits,
    /// `H(Y_θ|X) = −Σ_ij P(x_i,y_j) log T(θ_j|x_i)`.
    pub fuzzy_entropy: Bits,
}

/// `I(X;Y_θ)` for the joint `P(x_i)P(y_j|x_i)`.
pub fn semantic_mutual_information(
    prior: &Distribution,
    channel: &Channel,
    semchan: &SemanticChannel,
) -> Result<SemanticMIReport> {
    let joint = JointDistribution::from_prior_channel(prior, channel)?;
    semantic_mutual_information_joint(&joint, prior, semchan)
}

/// `I(X;Y_θ)` over an explicit joint, with logical probabilities taken
/// under `truth_prior`.
///
/// The two usually coincide (the joint's x-marginal is the prior); they
/// differ for the local-equilibrium decomposition, where the logical
/// probabilities are the per-area partition functions over the state prior.
pub fn semantic_mutual_information_joint(
    joint: &JointDistribution,
    truth_prior: &Distribution,
    semchan: &SemanticChannel,
) -> Result<SemanticMIReport> {
    check_len("joint rows vs truth rows", semchan.inputs(), joint.rows())?;
    check_len("joint cols vs labels", semchan.label_count(), joint.cols())?;
    let logical = semchan.logical_probabilities(truth_prior)?;
    let label_marginal = joint.y_marginal();

    let mut sem_entropy = Vec::with_capacity(logical.len());
    for (j, (py, tl)) in label_marginal.probs().iter().zip(&logical).enumerate() {
        if *py > 0.0 {
            if *tl <= 0.0 {
                return Err(Error::ZeroLogicalProbability { label: j });
            }
            sem_entropy.push(-py * ln(*tl));
        }
    }
    let mut fuzzy = Vec::with_capacity(joint.as_slice().len());
    let mut infinite = false;
    for i in 0..joint.rows() {
        for j in 0..joint.cols() {
            let pxy = joint.get(i, j);
            if pxy > 0.0 {
                let t = semchan.truth(i, j);
                if t <= 0.0 {
                    infinite = true;
                } else {
                    fuzzy.push(-pxy * ln(t));
                }
            }
        }
    }
    let semantic_entropy = Bits::from_nats(stable_sum(sem_entropy));
    if infinite {
        return Ok(SemanticMIReport {
            smi: Bits(f64::NEG_INFINITY),
            semantic_entropy,
            fuzzy_entropy: Bits(f64::INFINITY),
        });
    }
    let fuzzy_entropy = Bits::from_nats(stable_sum(fuzzy));
    Ok(SemanticMIReport {
        smi: Bits(semantic_entropy.0 - fuzzy_entropy.0),
        semantic_entropy,
        fuzzy_entropy,
    })
}

/// Fuzzy intersection `T(θ_j ∩ θ_k | x)` used by the label-pair measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum IntersectionRule {
    #[default]
    Product,
    Minimum,
}

impl IntersectionRule {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            IntersectionRule::Product => a * b,
            IntersectionRule::Minimum => a.min(b),
        }
    }
}

/// Semantic information between two labels,
/// `Σ_i P(x_i|y_j,y_k) log2[T(θ_j∩θ_k|x_i) / (T(θ_j) T(θ_k))]`.
pub fn label_pair_semantic_info(
    cond: &Distribution,
    truth_j: &[f64],
    truth_k: &[f64],
    prior: &Distribution,
    rule: IntersectionRule,
) -> Result<Bits> {
    check_len("truth_k vs truth_j", truth_j.len(), truth_k.len())?;
    check_len("conditional vs truth", truth_j.len(), cond.len())?;
    let tj = crate::prob::logical_probability(prior, truth_j)?;
    let tk = crate::prob::logical_probability(prior, truth_k)?;
    if tj <= 0.0 {
        return Err(Error::ZeroLogicalProbability { label: 0 });
    }
    if tk <= 0.0 {
        return Err(Error::ZeroLogicalProbability { label: 1 });
    }
    let ln_norm = ln(tj) + ln(tk);
    let mut terms = Vec::with_capacity(cond.len());
    for ((p, a), b) in cond.probs().iter().zip(truth_j).zip(truth_k) {
        if *p > 0.0 {
            let t = rule.apply(*a, *b);
            if t <= 0.0 {
                return Ok(Bits(f64::NEG_INFINITY));
            }
            terms.push(p * (ln(t) - ln_norm));
        }
    }
    Ok(Bits::from_nats(stable_sum(terms)))
}

/// Distortion between two labels in nats, `Σ_i P(x_i|y_j,y_k) ln[1 / T(θ_j∩θ_k|x_i)]`.
pub fn label_pair_distortion(
    cond: &Distribution,
    truth_j: &[f64],
    truth_k: &[f64],
    rule: IntersectionRule,
) -> Result<f64> {
    check_len("truth_k vs truth_j", truth_j.len(), truth_k.len())?;
    check_len("conditional vs truth", truth_j.len(), cond.len())?;
    check_truth_vector(truth_j, 0)?;
    check_truth_vector(truth_k, 1)?;
    let mut terms = Vec::with_capacity(cond.len());
    for ((p, a), b) in cond.probs().iter().zip(truth_j).zip(truth_k) {
        if *p > 0.0 {
            let t = rule.apply(*a, *b);
            if t <= 0.0 {
                return Ok(f64::INFINITY);
            }
            terms.push(-p * ln(t));
        }
    }
    Ok(stable_sum(terms) + 0.0)
}

/// Three-way table `P(x_i, y_j, y_k)`, indexed `[i][j][k]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPairJoint {
    inputs: usize,
    labels: usize,
    data: Vec<f64>,
}

impl LabelPairJoint {
    pub fn new(inputs: usize, labels: usize, data: Vec<f64>) -> Result<Self> {
        check_len("label-pair joint entries", inputs * labels * labels, data.len())?;
        let dist = Distribution::new(data)?;
        Ok(Self {
            inputs,
            labels,
            data: dist.into_vec(),
        })
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.labels + j) * self.labels + k]
    }
}

/// Averaged label-pair semantic mutual information over a `P(x, y_j, y_k)` table.
pub fn label_pair_semantic_mutual_information(
    joint: &LabelPairJoint,
    semchan: &SemanticChannel,
    prior: &Distribution,
    rule: IntersectionRule,
) -> Result<Bits> {
    check_len("table inputs vs truth rows", semchan.inputs(), joint.inputs)?;
    check_len("table labels vs semantic labels", semchan.label_count(), joint.labels)?;
    let logical = semchan.logical_probabilities(prior)?;
    let mut terms = Vec::new();
    for i in 0..joint.inputs {
        for j in 0..joint.labels {
            for k in 0..joint.labels {
                let p = joint.get(i, j, k);
                if p <= 0.0 {
                    continue;
                }
                if logical[j] <= 0.0 {
                    return Err(Error::ZeroLogicalProbability { label: j });
                }
                if logical[k] <= 0.0 {
                    return Err(Error::ZeroLogicalProbability { label: k });
                }
                let t = rule.apply(semchan.truth(i, j), semchan.truth(i, k));
                if t <= 0.0 {
                    return Ok(Bits(f64::NEG_INFINITY));
                }
                terms.push(p * (ln(t) - ln(logical[j]) - ln(logical[k])));
            }
        }
    }
    Ok(Bits::from_nats(stable_sum(terms)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::LabelSet;
    use alloc::vec;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn mutual_information_survives_underflowed_joint_mass() {
        let prior = Distribution::new(vec![0.5, 0.5]).unwrap();
        let ch = Channel::from_rows(&[vec![1.0 - 1e-3, 1e-3, 1e-320], vec![1e-3, 1.0 - 1e-3, 0.0]]).unwrap();
        let mi = mutual_information(&prior, &ch).unwrap().mi.0;
        let clean = Channel::from_rows(&[vec![1.0 - 1e-3, 1e-3, 0.0], vec![1e-3, 1.0 - 1e-3, 0.0]]).unwrap();
        let want = mutual_information(&prior, &clean).unwrap().mi.0;
        assert!(mi > 0.9);
        assert!((mi - want).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&Distribution::uniform(4)).0, 2.0);
        assert_eq!(shannon_entropy(&Distribution::point_mass(3, 1)).0, 0.0);
        // -0.9 log2 0.9 - 0.1 log2 0.1
        assert!((shannon_entropy(&d(&[0.9, 0.1])).0 - 0.468_995_593_589_281).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_examples() {
        let u = Distribution::uniform(2);
        let mi = mutual_information(&u, &Channel::identity(2)).unwrap();
        assert!((mi.mi.0 - 1.0).abs() < 1e-15);

        let row = d(&[0.3, 0.7]);
        let mi = mutual_information(&u, &Channel::constant(2, &row)).unwrap();
        assert!(mi.mi.0.abs() < 1e-15);

        let bsc = Channel::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let mi = mutual_information(&u, &bsc).unwrap();
        // 1 - H_b(0.1)
        assert!((mi.mi.0 - 0.531_004_406_410_719).abs() < 1e-12);
        assert!((mi.mi.0 - (mi.label_entropy.0 - mi.conditional_entropy.0)).abs() < 1e-12);
    }

    #[test]
    fn kl_examples() {
        let p = d(&[0.2, 0.3, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap().0, 0.0);
        assert!((kl_divergence(&d(&[1.0, 0.0]), &Distribution::uniform(2)).unwrap().0 - 1.0).abs() < 1e-15);
        // 0.75 log2 1.5 + 0.25 log2 0.5
        let v = kl_divergence(&d(&[0.75, 0.25]), &Distribution::uniform(2)).unwrap().0;
        assert!((v - 0.188_721_875_540_867).abs() < 1e-12);
        assert!(kl_divergence(&Distribution::uniform(2), &d(&[1.0, 0.0])).unwrap().is_pos_infinite());
    }

    #[test]
    fn semantic_info_point_examples() {
        assert_eq!(semantic_info_point(1.0, 0.25).unwrap().0, 2.0);
        assert_eq!(semantic_info_point(0.4, 0.4).unwrap().0, 0.0);
        assert!((semantic_info_point(0.1, 0.4).unwrap().0 + 2.0).abs() < 1e-15);
        assert!(semantic_info_point(0.0, 0.4).unwrap().is_neg_infinite());
        assert!(matches!(
            semantic_info_point(0.5, 0.0),
            Err(Error::ZeroLogicalProbability { .. })
        ));
    }

    #[test]
    fn generalized_kl_examples() {
        let prior = Distribution::uniform(2);
        let v = generalized_kl(&d(&[1.0, 0.0]), &[1.0, 0.5], &prior).unwrap();
        assert!((v.0 - 0.415_037_499_278_844).abs() < 1e-12);
        assert_eq!(generalized_kl(&d(&[0.3, 0.7]), &[1.0, 1.0], &prior).unwrap().0, 0.0);
        assert!(generalized_kl(&d(&[0.0, 1.0]), &[1.0, 0.0], &prior)
            .unwrap()
            .is_neg_infinite());
    }

    #[test]
    fn generalized_kl_matches_kl_at_proportional_truth() {
        let prior = d(&[0.1, 0.2, 0.3, 0.4]);
        let post = d(&[0.4, 0.3, 0.2, 0.1]);
        let ratio: Vec<f64> = post.probs().iter().zip(prior.probs()).map(|(a, b)| a / b).collect();
        let max = ratio.iter().cloned().fold(0.0, f64::max);
        let truth: Vec<f64> = ratio.iter().map(|r| r / max).collect();
        let g = generalized_kl(&post, &truth, &prior).unwrap();
        let k = kl_divergence(&post, &prior).unwrap();
        assert!((g.0 - k.0).abs() < 1e-12);
    }

    #[test]
    fn smi_crisp_identity() {
        let prior = Distribution::uniform(2);
        let sc = SemanticChannel::from_columns(LabelSet::numbered(2), &[vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap();
        let r = semantic_mutual_information(&prior, &Channel::identity(2), &sc).unwrap();
        assert!((r.smi.0 - 1.0).abs() < 1e-15);
        assert_eq!(r.fuzzy_entropy.0, 0.0);
        assert!((r.semantic_entropy.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn smi_tautologies_carry_nothing() {
        let prior = d(&[0.2, 0.5, 0.3]);
        let sc = SemanticChannel::from_columns(LabelSet::numbered(2), &[vec![1.0; 3], vec![1.0; 3]]).unwrap();
        let ch = Channel::from_rows(&[vec![0.5, 0.5], vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let r = semantic_mutual_information(&prior, &ch, &sc).unwrap();
        assert_eq!(r.smi.0, 0.0);
    }

    #[test]
    fn smi_flags_false_usage() {
        let prior = Distribution::uniform(2);
        let sc = SemanticChannel::from_columns(LabelSet::numbered(2), &[vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap();
        let ch = Channel::from_rows(&[vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        let r = semantic_mutual_information(&prior, &ch, &sc).unwrap();
        assert!(r.smi.is_neg_infinite());
        assert!(r.fuzzy_entropy.is_pos_infinite());
    }

    #[test]
    fn label_pair_examples() {
        let prior = Distribution::uniform(4);
        let ones = [1.0; 4];
        let cond = d(&[0.1, 0.2, 0.3, 0.4]);
        let r = IntersectionRule::Product;
        assert_eq!(label_pair_semantic_info(&cond, &ones, &ones, &prior, r).unwrap().0, 0.0);
        assert_eq!(label_pair_distortion(&cond, &ones, &ones, r).unwrap(), 0.0);

        let set = [1.0, 1.0, 0.0, 0.0];
        let inside = d(&[0.5, 0.5, 0.0, 0.0]);
        assert!((label_pair_semantic_info(&inside, &set, &set, &prior, r).unwrap().0 - 2.0).abs() < 1e-15);
        // with min the intersection of a set with itself is the set
        let m = IntersectionRule::Minimum;
        assert!((label_pair_semantic_info(&inside, &set, &set, &prior, m).unwrap().0 - 2.0).abs() < 1e-15);

        let other = [0.0, 0.0, 1.0, 1.0];
        assert!(label_pair_semantic_info(&cond, &set, &other, &prior, r)
            .unwrap()
            .is_neg_infinite());
        assert_eq!(label_pair_distortion(&cond, &set, &other, r).unwrap(), f64::INFINITY);
    }

    #[test]
    fn label_pair_table_average() {
        // all mass on (x0, y1, y1): reduces to the single-pair value
        let prior = Distribution::uniform(2);
        let sc = SemanticChannel::from_columns(LabelSet::numbered(2), &[vec![1.0, 0.0], vec![1.0, 1.0]])
            .unwrap();
        let mut data = vec![0.0; 8];
        data[0] = 1.0;
        let joint = LabelPairJoint::new(2, 2, data).unwrap();
        let v = label_pair_semantic_mutual_information(&joint, &sc, &prior, IntersectionRule::Product).unwrap();
        assert!((v.0 - 2.0).abs() < 1e-15);
    }
}
