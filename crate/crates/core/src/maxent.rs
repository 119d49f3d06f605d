//! Maximum-entropy channels, the truth-constrained channel and the
//! Boltzmann / local-equilibrium decomposition.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, ln, ln_or_neg_inf, log_sum_exp, nats_to_bits, neg_x_ln_x, stable_sum};
use crate::measures::{semantic_mutual_information_joint, shannon_entropy, Bits};
use crate::prob::{check_len, semantic_bayes, Channel, Distribution, JointDistribution, LabelSet};
use crate::solver::{mmi_step, ConstraintKernel};
use crate::truth::SemanticChannel;

/// A feature `f_k(x_i, y_j)` with its bound `F_k` and multiplier `α_k`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureConstraint {
    inputs: usize,
    labels: usize,
    feature: Vec<f64>,
    bound: f64,
    multiplier: f64,
}

impl FeatureConstraint {
    /// `feature` is row-major `inputs × labels`. `-inf` entries are allowed
    /// (an exact zero in the Gibbs factor when `α > 0`).
    pub fn new(inputs: usize, labels: usize, feature: Vec<f64>, bound: f64, multiplier: f64) -> Result<Self> {
        check_len("feature entries", inputs * labels, feature.len())?;
        if inputs == 0 || labels == 0 {
            return Err(Error::InvalidArgument("feature matrix must be non-empty"));
        }
        if feature.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::InvalidArgument("feature entries must be finite or -inf"));
        }
        if !multiplier.is_finite() || bound.is_nan() {
            return Err(Error::InvalidArgument("multiplier must be finite"));
        }
        Ok(Self {
            inputs,
            labels,
            feature,
            bound,
            multiplier,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.feature[i * self.labels + j]
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    /// `Σ_ij P(x_i, y_j) f(x_i, y_j)`.
    pub fn expectation(&self, prior: &Distribution, channel: &Channel) -> Result<f64> {
        check_len("prior vs feature rows", self.inputs, prior.len())?;
        check_len("channel labels vs feature", self.labels, channel.labels())?;
        let mut terms = Vec::new();
        for (i, px) in prior.probs().iter().enumerate() {
            for j in 0..self.labels {
                let p = px * channel.get(i, j);
                if p > 0.0 {
                    terms.push(p * self.get(i, j));
                }
            }
        }
        Ok(stable_sum(terms))
    }

    /// Whether `channel` meets `E[f] ≥ F`.
    pub fn satisfied(&self, prior: &Distribution, channel: &Channel) -> Result<bool> {
        Ok(self.expectation(prior, channel)? >= self.bound)
    }
}

/// Exponent matrix `E_ij = Σ_k α_k f_k(x_i, y_j)` (row-major).
fn feature_exponents(features: &[FeatureConstraint], inputs: usize, labels: usize) -> Result<Vec<f64>> {
    let mut e = alloc::vec![0.0; inputs * labels];
    for f in features {
        check_len("feature rows", inputs, f.inputs)?;
        check_len("feature labels", labels, f.labels)?;
        if f.multiplier == 0.0 {
            continue;
        }
        for (dst, v) in e.iter_mut().zip(&f.feature) {
            *dst += f.multiplier * v;
        }
    }
    for v in &e {
        if v.is_nan() || *v == f64::INFINITY {
            return Err(Error::OverflowGuard);
        }
    }
    Ok(e)
}

/// Gibbs channel `P(y_j|x_i) = exp(E_ij) / Σ_k exp(E_ik)`.
pub fn maxent_channel(features: &[FeatureConstraint], inputs: usize, labels: usize) -> Result<Channel> {
    if inputs == 0 || labels == 0 {
        return Err(Error::InvalidArgument("channel must be non-empty"));
    }
    let e = feature_exponents(features, inputs, labels)?;
    let mut data = Vec::with_capacity(e.len());
    for (i, row) in e.chunks(labels).enumerate() {
        let lz = log_sum_exp(row);
        if lz == f64::NEG_INFINITY {
            return Err(Error::AllZeroRow { row: i });
        }
        data.extend(row.iter().map(|&v| exp(v - lz)));
    }
    Ok(Channel::from_drifted(inputs, labels, data))
}

/// `P(y_j|x_i) = T_j(x_i)^|s| / Σ_k T_k(x_i)^|s|`: the MMI channel update at
/// a uniform label marginal.
pub fn truth_constrained_maxent(semchan: &SemanticChannel, s_abs: f64) -> Result<Channel> {
    let kernel = ConstraintKernel::rate_truth(semchan, s_abs)?;
    let uniform = Distribution::uniform(semchan.label_count());
    Ok(mmi_step(&uniform, &kernel)?.channel)
}

/// The exponential factor behind a maximum-entropy channel.
#[derive(Debug, Clone, Copy)]
pub enum NefSource<'a> {
    /// `exp(E) = T^|s|`.
    Truth { semchan: &'a SemanticChannel, s_abs: f64 },
    /// `exp(E) = exp(Σ α_k f_k)`.
    Features(&'a [FeatureConstraint]),
}

impl NefSource<'_> {
    fn log_factor(&self, inputs: usize, labels: usize) -> Result<Vec<f64>> {
        match self {
            NefSource::Truth { semchan, s_abs } => {
                check_len("truth rows", inputs, semchan.inputs())?;
                check_len("truth labels", labels, semchan.label_count())?;
                let k = ConstraintKernel::rate_truth(semchan, *s_abs)?;
                let mut out = Vec::with_capacity(inputs * labels);
                for i in 0..inputs {
                    out.extend_from_slice(k.log_row(i));
                }
                Ok(out)
            }
            NefSource::Features(f) => feature_exponents(f, inputs, labels),
        }
    }
}

/// `H(X,Y) = H(X) + H(Y) − I(Y;X_θ)` for a maximum-entropy channel built at
/// the uniform label marginal, so `H(Y) = log n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EntropyDecomposition {
    pub joint_entropy: Bits,
    pub input_entropy: Bits,
    pub label_entropy: Bits,
    /// `Σ_ij P(x_i,y_j) log[exp(E_ij) / Z'_i]`, `Z'_i = Σ_j exp(E_ij) / n`.
    pub semantic_rate: Bits,
}

impl EntropyDecomposition {
    pub fn residual(&self) -> f64 {
        (self.joint_entropy.0 - (self.input_entropy.0 + self.label_entropy.0 - self.semantic_rate.0)).abs()
    }
}

/// Evaluates the four terms of the decomposition independently.
pub fn entropy_decomposition(
    prior: &Distribution,
    channel: &Channel,
    source: NefSource<'_>,
) -> Result<EntropyDecomposition> {
    check_len("prior vs channel rows", channel.inputs(), prior.len())?;
    let (m, n) = (channel.inputs(), channel.labels());
    let log_factor = source.log_factor(m, n)?;
    let ln_n = ln(n as f64);

    let joint = JointDistribution::from_prior_channel(prior, channel)?;
    let joint_entropy = Bits::from_nats(stable_sum(joint.as_slice().iter().map(|&p| neg_x_ln_x(p))));

    let mut terms = Vec::new();
    for (i, px) in prior.probs().iter().enumerate() {
        if *px <= 0.0 {
            continue;
        }
        let row = &log_factor[i * n..(i + 1) * n];
        let log_zp = log_sum_exp(row) - ln_n;
        for (j, lf) in row.iter().enumerate() {
            let p = px * channel.get(i, j);
            if p > 0.0 {
                terms.push(p * (lf - log_zp));
            }
        }
    }
    Ok(EntropyDecomposition {
        joint_entropy,
        input_entropy: shannon_entropy(prior),
        label_entropy: Bits::from_nats(ln_n),
        semantic_rate: Bits::from_nats(stable_sum(terms)),
    })
}

/// A system whose areas `y_j` sit at their own temperatures `T_j`.
///
/// Energies are dimensionless with `k = 1` by default; physical units are a
/// matter of scaling `k`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThermoSystem {
    /// Energy `e_i ≥ 0` of each level.
    pub energies: Vec<f64>,
    /// Number of states `G_i ≥ 1` at each level.
    pub degeneracies: Vec<f64>,
    /// Absolute temperature of each area.
    pub temperatures: Vec<f64>,
    /// `P(y_j)`, the share of particles in each area.
    pub area_weights: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub boltzmann_k: f64,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub particles: f64,
    /// Total state count `G_j` of each area; `G = Σ G_i` when absent.
    #[cfg_attr(feature = "serde", serde(default))]
    pub area_states: Option<Vec<f64>>,
}

#[cfg(feature = "serde")]
fn one() -> f64 {
    1.0
}

impl ThermoSystem {
    pub fn new(energies: Vec<f64>, degeneracies: Vec<f64>, temperatures: Vec<f64>, area_weights: Vec<f64>) -> Result<Self> {
        let s = Self {
            energies,
            degeneracies,
            temperatures,
            area_weights,
            boltzmann_k: 1.0,
            particles: 1.0,
            area_states: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.energies.is_empty() || self.temperatures.is_empty() {
            return Err(Error::InvalidArgument("system needs at least one level and one area"));
        }
        check_len("degeneracies vs energies", self.energies.len(), self.degeneracies.len())?;
        check_len("area weights vs temperatures", self.temperatures.len(), self.area_weights.len())?;
        if self.energies.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::BadParams("energies must be finite and nonnegative"));
        }
        if self.degeneracies.iter().any(|g| !(g.is_finite() && *g >= 1.0)) {
            return Err(Error::BadParams("degeneracies must be at least 1"));
        }
        if self.temperatures.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::BadParams("temperatures must be positive"));
        }
        if !(self.boltzmann_k.is_finite() && self.boltzmann_k > 0.0) {
            return Err(Error::BadParams("k must be positive"));
        }
        if !(self.particles.is_finite() && self.particles > 0.0) {
            return Err(Error::BadParams("particle count must be positive"));
        }
        if let Some(g) = &self.area_states {
            check_len("area states vs temperatures", self.temperatures.len(), g.len())?;
            if g.iter().any(|v| !(v.is_finite() && *v >= 1.0)) {
                return Err(Error::BadParams("area state counts must be at least 1"));
            }
        }
        Distribution::new(self.area_weights.clone())?;
        Ok(())
    }

    /// `G = Σ_i G_i`.
    pub fn total_states(&self) -> f64 {
        stable_sum(self.degeneracies.iter().copied())
    }

    /// `P(x_i) = G_i / G`.
    pub fn state_prior(&self) -> Result<Distribution> {
        crate::prob::normalize(&self.degeneracies)
    }

    pub fn area_state_count(&self, j: usize) -> f64 {
        match &self.area_states {
            Some(g) => g[j],
            None => self.total_states(),
        }
    }

    /// `exp(−e_i / (k T_j))` for area `j`.
    pub fn truth_column(&self, j: usize) -> Vec<f64> {
        let kt = self.boltzmann_k * self.temperatures[j];
        self.energies.iter().map(|e| exp(-e / kt)).collect()
    }
}

/// Eq.-44 form: `P(x_i|T) = exp(−e_i/kT) / Z`.
pub fn boltzmann(energies: &[f64], temperature: f64, k: f64) -> Result<Distribution> {
    if energies.is_empty() {
        return Err(Error::InvalidArgument("no energy levels"));
    }
    if !(temperature > 0.0 && k > 0.0) {
        return Err(Error::BadParams("temperature and k must be positive"));
    }
    let w: Vec<f64> = energies.iter().map(|e| -e / (k * temperature)).collect();
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::OverflowGuard);
    }
    let lz = log_sum_exp(&w);
    Ok(Distribution::from_drifted(w.iter().map(|v| exp(v - lz)).collect()))
}

/// Prior-weighted Boltzmann distribution with its log partition `ln Z'`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBoltzmann {
    pub distribution: Distribution,
    pub log_partition: f64,
}

/// `P(x_i|T) = P(x_i) exp(−e_i/kT) / Z'`, `Z' = Σ_i P(x_i) exp(−e_i/kT)`.
///
/// This is the semantic Bayes' formula with truth `exp(−e/kT)` and logical
/// probability `Z'`. Energies must be nonnegative so the factor is a truth
/// value; when every factor underflows the log-domain form is used instead.
pub fn boltzmann_with_prior(prior: &Distribution, energies: &[f64], temperature: f64, k: f64) -> Result<WeightedBoltzmann> {
    check_len("energies vs prior", prior.len(), energies.len())?;
    if !(temperature > 0.0 && k > 0.0) {
        return Err(Error::BadParams("temperature and k must be positive"));
    }
    if energies.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::BadParams("energies must be finite and nonnegative"));
    }
    let kt = k * temperature;
    let truth: Vec<f64> = energies.iter().map(|e| exp(-e / kt)).collect();
    match semantic_bayes(prior, &truth) {
        Ok(sp) => Ok(WeightedBoltzmann {
            distribution: sp.posterior,
            log_partition: ln(sp.logical_probability),
        }),
        Err(Error::ZeroLogicalProbability { .. }) => {
            let w: Vec<f64> = prior
                .probs()
                .iter()
                .zip(energies)
                .map(|(p, e)| ln_or_neg_inf(*p) - e / kt)
                .collect();
            let lz = log_sum_exp(&w);
            if !lz.is_finite() {
                return Err(Error::OverflowGuard);
            }
            Ok(WeightedBoltzmann {
                distribution: Distribution::from_drifted(w.iter().map(|v| exp(v - lz)).collect()),
                log_partition: lz,
            })
        }
        Err(e) => Err(e),
    }
}

/// Terms of `S/(kN) = Σ_j P(y_j) ln G_j − I(X;Y_θ)`, all in nats.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LocalEquilibriumReport {
    /// `S/(kN)` from the per-area entropy sums.
    pub entropy_per_particle: f64,
    /// `ln W = S/k`.
    pub log_microstates: f64,
    /// `Σ_j P(y_j) ln G_j`.
    pub extreme_entropy: f64,
    /// `I(X;Y_θ)` with truth `exp(−e_i/kT_j)` and logical probabilities `Z'_j`.
    pub semantic_mi: f64,
    /// `ln Z'_j` per area.
    pub log_partitions: Vec<f64>,
    pub residual: f64,
}

/// Evaluates both sides of the local-equilibrium decomposition.
///
/// The left side sums `−P(x_i|y_j) ln[P(x_i|y_j)/G_ij]` with
/// `G_ij = P(x_i) G_j`; the right side goes through the semantic mutual
/// information of the joint `P(y_j) P(x_i|y_j)`.
pub fn local_equilibrium_identity(system: &ThermoSystem) -> Result<LocalEquilibriumReport> {
    system.validate()?;
    let prior = system.state_prior()?;
    let m = system.energies.len();
    let n = system.temperatures.len();
    let k = system.boltzmann_k;

    let mut per_area = Vec::with_capacity(n);
    let mut log_partitions = Vec::with_capacity(n);
    for &t in &system.temperatures {
        let wb = boltzmann_with_prior(&prior, &system.energies, t, k)?;
        log_partitions.push(wb.log_partition);
        per_area.push(wb.distribution);
    }

    let mut lhs_terms = Vec::new();
    let mut ext_terms = Vec::with_capacity(n);
    for (j, (post, py)) in per_area.iter().zip(&system.area_weights).enumerate() {
        let gj = system.area_state_count(j);
        ext_terms.push(py * ln(gj));
        for (p, px) in post.probs().iter().zip(prior.probs()) {
            if *p > 0.0 {
                lhs_terms.push(-py * p * ln(p / (px * gj)));
            }
        }
    }
    let entropy_per_particle = stable_sum(lhs_terms);
    let extreme_entropy = stable_sum(ext_terms);

    let mut joint = alloc::vec![0.0; m * n];
    for (j, (post, py)) in per_area.iter().zip(&system.area_weights).enumerate() {
        for (i, p) in post.probs().iter().enumerate() {
            joint[i * n + j] = py * p;
        }
    }
    let joint = JointDistribution::new(m, n, joint)?;
    let columns: Vec<Vec<f64>> = (0..n).map(|j| system.truth_column(j)).collect();
    let semchan = SemanticChannel::from_columns(LabelSet::numbered(n), &columns)?;
    let smi = semantic_mutual_information_joint(&joint, &prior, &semchan)?.smi.nats();

    Ok(LocalEquilibriumReport {
        entropy_per_particle,
        log_microstates: system.particles * entropy_per_particle,
        extreme_entropy,
        semantic_mi: smi,
        log_partitions,
        residual: (entropy_per_particle - (extreme_entropy - smi)).abs(),
    })
}

/// `I(X;Y_θ)` of the local-equilibrium system, in bits.
pub fn local_equilibrium_semantic_mi_bits(system: &ThermoSystem) -> Result<Bits> {
    Ok(Bits(nats_to_bits(local_equilibrium_identity(system)?.semantic_mi)))
}
