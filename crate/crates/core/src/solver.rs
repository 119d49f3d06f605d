//! The minimum-mutual-information (MMI) iteration and the three rate
//! functions built on it.
//!
//! All three constraint regimes reduce to one nonnegative kernel `K` with
//! `ln K_ij = σ · q_ij`, where `q` is the constrained per-pair quantity and
//! `σ` its multiplier:
//!
//! | variant | `q_ij`                   | `σ`    | constraint reported            |
//! |---------|--------------------------|--------|--------------------------------|
//! | R(D)    | `d_ij`                   | `s ≤ 0`| mean distortion, nats          |
//! | R(Θ)    | `ln 1/T_j(x_i)`          | `−|s|` | fuzzy entropy `H(Y_Θ|X)`, nats |
//! | R(G)    | `ln T_j(x_i)/T(θ_j)`     | `s ≥ 0`| semantic MI `G`, bits          |
//!
//! The iteration alternates the channel update
//! `P(y_j|x_i) = P(y_j) K_ij / Z_i` with the marginal update
//! `P(y_j) = Σ_i P(x_i) P(y_j|x_i)`, starting from a uniform marginal, and
//! stops once the L1 change of the marginal drops below `tol`.
//!
//! Kernels are stored in the log domain and every partition value is a
//! max-shifted log-sum-exp, so large `|s|` does not underflow.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, ln, ln_or_neg_inf, log_sum_exp, nats_to_bits, stable_sum, LN_2};
use crate::measures::{mutual_information, shannon_entropy, Bits};
use crate::prob::{check_len, Channel, Distribution};
use crate::truth::{distortion_to_truth, truth_to_distortion, DistortionMatrix, SemanticChannel};

/// Default convergence threshold on the L1 change of the label marginal.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Which constraint the MMI channel is subject to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Variant {
    /// Mean distortion bound, R(D).
    #[cfg_attr(feature = "serde", serde(rename = "rd"))]
    RateDistortion,
    /// Fuzzy-entropy bound from truth functions, R(Θ).
    #[cfg_attr(feature = "serde", serde(rename = "rtheta"))]
    RateTruth,
    /// Semantic mutual information floor, R(G).
    #[cfg_attr(feature = "serde", serde(rename = "rg"))]
    RateVerisimilitude,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::RateDistortion => "rd",
            Variant::RateTruth => "rtheta",
            Variant::RateVerisimilitude => "rg",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "rd" => Some(Variant::RateDistortion),
            "rtheta" => Some(Variant::RateTruth),
            "rg" => Some(Variant::RateVerisimilitude),
            _ => None,
        }
    }

    /// Checks the sign convention of `s` for this variant.
    pub fn check_s(self, s: f64) -> Result<()> {
        let ok = s.is_finite()
            && match self {
                Variant::RateDistortion => s <= 0.0,
                Variant::RateTruth | Variant::RateVerisimilitude => s >= 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::SignMismatch {
                variant: self.name(),
                s,
            })
        }
    }
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the per-pair constraint quantity comes from.
#[derive(Debug, Clone, Copy)]
pub enum ConstraintSource<'a> {
    Distortion(&'a DistortionMatrix),
    Truth(&'a SemanticChannel),
}

/// Log-domain constraint kernel shared by all three variants.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintKernel {
    variant: Variant,
    s: f64,
    inputs: usize,
    labels: usize,
    /// `ln K_ij`; `-inf` encodes an exact zero.
    log_kernel: Vec<f64>,
    /// `q_ij`, the constrained quantity in nats.
    quantity: Vec<f64>,
    /// `T(θ_j)` for R(G).
    logical: Option<Vec<f64>>,
}

impl ConstraintKernel {
    /// Builds the kernel of `variant` at parameter `s` (`|s|` for R(Θ)).
    ///
    /// R(Θ) and R(G) read truth functions; a distortion source is converted
    /// with `T = exp(−d)`. R(D) reads distortions; a truth source is
    /// converted with `d = ln(1/T)`.
    pub fn build(variant: Variant, s: f64, source: ConstraintSource<'_>, prior: &Distribution) -> Result<Self> {
        variant.check_s(s)?;
        match (variant, source) {
            (Variant::RateDistortion, ConstraintSource::Distortion(d)) => Self::rate_distortion(d, s),
            (Variant::RateDistortion, ConstraintSource::Truth(t)) => {
                Self::rate_distortion(&truth_to_distortion(t), s)
            }
            (Variant::RateTruth, ConstraintSource::Truth(t)) => Self::rate_truth(t, s),
            (Variant::RateVerisimilitude, ConstraintSource::Truth(t)) => Self::rate_verisimilitude(t, prior, s),
            (v, ConstraintSource::Distortion(d)) => {
                let labels = crate::prob::LabelSet::numbered(d.labels());
                let t = distortion_to_truth(d, labels)?;
                Self::build(v, s, ConstraintSource::Truth(&t), prior)
            }
        }
    }

    /// `K_ij = exp(s d_ij)`, `s ≤ 0`; infinite distortion maps to an exact zero.
    pub fn rate_distortion(d: &DistortionMatrix, s: f64) -> Result<Self> {
        Variant::RateDistortion.check_s(s)?;
        let quantity = d.as_slice().to_vec();
        Self::assemble(Variant::RateDistortion, s, s, d.inputs(), d.labels(), quantity, None)
    }

    /// `K_ij = T_j(x_i)^|s|`.
    pub fn rate_truth(semchan: &SemanticChannel, s_abs: f64) -> Result<Self> {
        Variant::RateTruth.check_s(s_abs)?;
        let quantity = semchan
            .as_row_major()
            .iter()
            .map(|&t| -ln_or_neg_inf(t) + 0.0)
            .collect();
        Self::assemble(
            Variant::RateTruth,
            s_abs,
            -s_abs,
            semchan.inputs(),
            semchan.label_count(),
            quantity,
            None,
        )
    }

    /// `K_ij = [T_j(x_i) / T(θ_j)]^s`, with `T(θ_j)` computed once from `prior`.
    pub fn rate_verisimilitude(semchan: &SemanticChannel, prior: &Distribution, s: f64) -> Result<Self> {
        Variant::RateVerisimilitude.check_s(s)?;
        let logical = semchan.logical_probabilities(prior)?;
        if let Some(j) = logical.iter().position(|t| *t <= 0.0) {
            return Err(Error::ZeroLogicalProbability { label: j });
        }
        let n = semchan.label_count();
        let quantity = semchan
            .as_row_major()
            .iter()
            .enumerate()
            .map(|(idx, &t)| ln_or_neg_inf(t) - ln(logical[idx % n]))
            .collect();
        Self::assemble(
            Variant::RateVerisimilitude,
            s,
            s,
            semchan.inputs(),
            n,
            quantity,
            Some(logical),
        )
    }

    fn assemble(
        variant: Variant,
        s: f64,
        sigma: f64,
        inputs: usize,
        labels: usize,
        quantity: Vec<f64>,
        logical: Option<Vec<f64>>,
    ) -> Result<Self> {
        let log_kernel: Vec<f64> = quantity
            .iter()
            .map(|&q| {
                if sigma == 0.0 {
                    0.0
                } else {
                    let v = sigma * q;
                    if v.is_nan() {
                        f64::NEG_INFINITY
                    } else {
                        v
                    }
                }
            })
            .collect();
        for (i, row) in log_kernel.chunks(labels).enumerate() {
            if row.iter().all(|v| *v == f64::NEG_INFINITY) {
                return Err(Error::AllZeroRow { row: i });
            }
        }
        Ok(Self {
            variant,
            s,
            inputs,
            labels,
            log_kernel,
            quantity,
            logical,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// `s` as supplied: negative for R(D), `|s|` for R(Θ), positive for R(G).
    pub fn s(&self) -> f64 {
        self.s
    }

    /// The multiplier `σ` in `ln K = σ q`.
    pub fn sigma(&self) -> f64 {
        match self.variant {
            Variant::RateTruth => -self.s,
            _ => self.s,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn log_entry(&self, i: usize, j: usize) -> f64 {
        self.log_kernel[i * self.labels + j]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        exp(self.log_entry(i, j))
    }

    /// `K` in linear scale, row-major.
    pub fn entries(&self) -> Vec<f64> {
        self.log_kernel.iter().map(|&v| exp(v)).collect()
    }

    pub fn log_row(&self, i: usize) -> &[f64] {
        &self.log_kernel[i * self.labels..(i + 1) * self.labels]
    }

    pub fn quantity(&self, i: usize, j: usize) -> f64 {
        self.quantity[i * self.labels + j]
    }

    /// Logical probabilities used by an R(G) kernel.
    pub fn logical_probabilities(&self) -> Option<&[f64]> {
        self.logical.as_deref()
    }

    /// Prior-weighted mean of `q` under `channel`, in nats (`0 · ∞ = 0`).
    pub fn mean_quantity(&self, prior: &Distribution, channel: &Channel) -> Result<f64> {
        check_len("prior vs kernel rows", self.inputs, prior.len())?;
        check_len("channel vs kernel rows", self.inputs, channel.inputs())?;
        check_len("channel vs kernel labels", self.labels, channel.labels())?;
        let mut terms = Vec::with_capacity(self.quantity.len());
        for (i, (px, row)) in prior.probs().iter().zip(channel.rows()).enumerate() {
            if *px <= 0.0 {
                continue;
            }
            for (j, p) in row.iter().enumerate() {
                let w = px * p;
                if w > 0.0 {
                    terms.push(w * self.quantity(i, j));
                }
            }
        }
        Ok(stable_sum(terms))
    }

    /// The constraint in the unit documented for the variant.
    pub fn constraint_value(&self, prior: &Distribution, channel: &Channel) -> Result<f64> {
        let q = self.mean_quantity(prior, channel)?;
        Ok(match self.variant {
            Variant::RateVerisimilitude => nats_to_bits(q),
            _ => q,
        })
    }
}

/// Free-function form of [`ConstraintKernel::build`].
pub fn build_kernel(
    variant: Variant,
    s: f64,
    source: ConstraintSource<'_>,
    prior: &Distribution,
) -> Result<ConstraintKernel> {
    ConstraintKernel::build(variant, s, source, prior)
}

/// Output of one channel update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub channel: Channel,
    /// `ln Z_i` per row.
    pub log_partition: Vec<f64>,
}

impl StepOutput {
    /// `Z_i = Σ_k P(y_k) K_ik`.
    pub fn partition(&self) -> Vec<f64> {
        self.log_partition.iter().map(|&v| exp(v)).collect()
    }
}

/// Channel update `P(y_j|x_i) = P(y_j) K_ij / Z_i`.
pub fn mmi_step(label_marginal: &Distribution, kernel: &ConstraintKernel) -> Result<StepOutput> {
    check_len("marginal vs kernel labels", kernel.labels, label_marginal.len())?;
    let n = kernel.labels;
    let log_py: Vec<f64> = label_marginal.probs().iter().map(|&p| ln_or_neg_inf(p)).collect();
    let mut data = Vec::with_capacity(kernel.inputs * n);
    let mut log_partition = Vec::with_capacity(kernel.inputs);
    let mut scratch = alloc::vec![0.0; n];
    for i in 0..kernel.inputs {
        for ((dst, lp), lk) in scratch.iter_mut().zip(&log_py).zip(kernel.log_row(i)) {
            *dst = lp + lk;
        }
        let lz = log_sum_exp(&scratch);
        if lz == f64::NEG_INFINITY {
            return Err(Error::ZeroPartition { row: i });
        }
        if !lz.is_finite() {
            return Err(Error::OverflowGuard);
        }
        data.extend(scratch.iter().map(|&v| exp(v - lz)));
        log_partition.push(lz);
    }
    Ok(StepOutput {
        channel: Channel::from_drifted(kernel.inputs, n, data),
        log_partition,
    })
}

/// Iteration settings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting marginal; uniform `1/n` when `None`.
    pub initial_marginal: Option<Distribution>,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            initial_marginal: None,
            record_trace: true,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TraceEntry {
    /// `I(X;Y)` of this iteration's channel.
    pub rate_bits: f64,
    /// `H(Y)` of the induced label marginal.
    pub label_entropy_bits: f64,
    /// Constraint value, same unit as [`SolverResult::constraint_value`].
    pub constraint: f64,
    /// `I(X;Y) − σ·q̄` in bits: the Lagrangian the alternating updates
    /// decrease.
    pub objective_bits: f64,
    /// The label marginal induced by this iteration's channel.
    pub label_marginal: Vec<f64>,
}

/// A converged (or best-so-far) MMI solution.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SolverResult {
    pub variant: Variant,
    pub s: f64,
    pub channel: Channel,
    /// Label marginal induced by `channel`.
    pub label_marginal: Distribution,
    /// `I(X;Y)` of `channel`, computed directly.
    pub rate_bits: Bits,
    /// Mean distortion (R(D), nats), fuzzy entropy (R(Θ), nats) or semantic
    /// MI (R(G), bits).
    pub constraint_value: f64,
    /// `ln Z_i` from the last channel update.
    pub log_partition: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iter` was reached first; the fields then hold the
    /// last iterate.
    pub converged: bool,
    /// Final L1 change of the marginal.
    pub last_delta: f64,
    pub trace: Vec<TraceEntry>,
}

impl SolverResult {
    /// `Z_i` per row.
    pub fn partition_values(&self) -> Vec<f64> {
        self.log_partition.iter().map(|&v| exp(v)).collect()
    }

    /// Turns a non-converged result into [`Error::MaxIterExceeded`].
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::MaxIterExceeded {
                iterations: self.iterations,
            })
        }
    }
}

/// Runs the MMI iteration to convergence.
pub fn mmi_iterate(prior: &Distribution, kernel: &ConstraintKernel, opts: &SolverOptions) -> Result<SolverResult> {
    check_len("prior vs kernel rows", kernel.inputs, prior.len())?;
    if !(opts.tol > 0.0) {
        return Err(Error::BadParams("tol must be positive"));
    }
    if opts.max_iter == 0 {
        return Err(Error::BadParams("max_iter must be at least 1"));
    }
    let mut marginal = match &opts.initial_marginal {
        Some(m) => {
            check_len("initial marginal vs labels", kernel.labels, m.len())?;
            m.clone()
        }
        None => Distribution::uniform(kernel.labels),
    };
    let sigma = kernel.sigma();
    let mut trace = Vec::new();
    let mut last: Option<StepOutput> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut last_delta = f64::INFINITY;
    while iterations < opts.max_iter {
        let step = mmi_step(&marginal, kernel)?;
        let next = step.channel.output_marginal(prior)?;
        last_delta = next.l1_distance(&marginal);
        iterations += 1;
        if opts.record_trace {
            let mi = mutual_information(prior, &step.channel)?;
            let q = kernel.mean_quantity(prior, &step.channel)?;
            let constraint = match kernel.variant {
                Variant::RateVerisimilitude => nats_to_bits(q),
                _ => q,
            };
            let penalty = if sigma == 0.0 { 0.0 } else { sigma * q };
            trace.push(TraceEntry {
                rate_bits: mi.mi.0,
                label_entropy_bits: shannon_entropy(&next).0,
                constraint,
                objective_bits: mi.mi.0 - penalty / LN_2,
                label_marginal: next.probs().to_vec(),
            });
        }
        marginal = next;
        last = Some(step);
        if last_delta < opts.tol {
            converged = true;
            break;
        }
    }
    let step = last.expect("at least one iteration ran");
    let rate = mutual_information(prior, &step.channel)?.mi;
    let constraint_value = kernel.constraint_value(prior, &step.channel)?;
    Ok(SolverResult {
        variant: kernel.variant,
        s: kernel.s,
        channel: step.channel,
        label_marginal: marginal,
        rate_bits: rate,
        constraint_value,
        log_partition: step.log_partition,
        iterations,
        converged,
        last_delta,
        trace,
    })
}

/// Closed-form rate and constraint at a converged point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ParametricPoint {
    pub rate_bits: Bits,
    pub constraint_value: f64,
}

/// `R(s) = σ q̄(s) − Σ_i P(x_i) ln Z_i`, converted to bits.
///
/// For R(D) this is `s D(s) − Σ P ln Z`; for R(Θ) `−|s| H(Y_Θ|X) − Σ P ln Z`;
/// for R(G) `s G(s) − Σ P ln Z`. At a fixed point it equals the mutual
/// information of the converged channel.
pub fn rate_point_parametric(
    prior: &Distribution,
    kernel: &ConstraintKernel,
    converged: &SolverResult,
) -> Result<ParametricPoint> {
    check_len("partition vs prior", prior.len(), converged.log_partition.len())?;
    let q = kernel.mean_quantity(prior, &converged.channel)?;
    let sigma = kernel.sigma();
    let first = if sigma == 0.0 { 0.0 } else { sigma * q };
    let log_z = stable_sum(
        prior
            .probs()
            .iter()
            .zip(&converged.log_partition)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, lz)| p * lz),
    );
    let constraint_value = match kernel.variant {
        Variant::RateVerisimilitude => nats_to_bits(q),
        _ => q,
    };
    Ok(ParametricPoint {
        rate_bits: Bits::from_nats(first - log_z),
        constraint_value,
    })
}

/// `I(Y;X_θ) = Σ_ij P(x_i,y_j) log[K_ij / T(x_i)]` with
/// `T(x_i) = Σ_k P(y_k) K_ik` taken at the converged marginal.
///
/// For R(Θ) this is the semantic form `H(X_θ) − H(X_θ|Y)` of the rate.
pub fn semantic_rate(prior: &Distribution, kernel: &ConstraintKernel, result: &SolverResult) -> Result<Bits> {
    check_len("prior vs kernel rows", kernel.inputs, prior.len())?;
    let log_py: Vec<f64> = result
        .label_marginal
        .probs()
        .iter()
        .map(|&p| ln_or_neg_inf(p))
        .collect();
    let mut scratch = alloc::vec![0.0; kernel.labels];
    let mut terms = Vec::new();
    for (i, (px, row)) in prior.probs().iter().zip(result.channel.rows()).enumerate() {
        if *px <= 0.0 {
            continue;
        }
        for ((dst, lp), lk) in scratch.iter_mut().zip(&log_py).zip(kernel.log_row(i)) {
            *dst = lp + lk;
        }
        let log_tx = log_sum_exp(&scratch);
        for (j, p) in row.iter().enumerate() {
            let w = px * p;
            if w > 0.0 {
                terms.push(w * (kernel.log_entry(i, j) - log_tx));
            }
        }
    }
    Ok(Bits::from_nats(stable_sum(terms)))
}

/// Builds the kernel for `s` and solves.
pub fn solve(
    prior: &Distribution,
    variant: Variant,
    source: ConstraintSource<'_>,
    s: f64,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    let kernel = ConstraintKernel::build(variant, s, source, prior)?;
    mmi_iterate(prior, &kernel, opts)
}

/// How consecutive sweep points are started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// Each point starts from the previous converged marginal; sequential.
    #[default]
    WarmStart,
    /// Each point starts from the uniform marginal; points are independent.
    ColdStart,
}

/// One point of a rate curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub s: f64,
    pub outcome: Result<SolverResult>,
}

/// Weight of the uniform marginal mixed into a warm start. Labels that
/// (nearly) vanished at the previous `s` must start far enough from zero
/// that their regrowth is visible to the L1 stopping test; with a tiny mix
/// the first step can look converged at the unstable boundary point.
const WARM_START_MIX: f64 = 1e-3;

/// Solves at every `s` in order. Failures are recorded per point and the
/// sweep continues.
pub fn sweep_curve(
    prior: &Distribution,
    variant: Variant,
    source: ConstraintSource<'_>,
    s_values: &[f64],
    opts: &SolverOptions,
    mode: SweepMode,
) -> Vec<SweepPoint> {
    let mut warm: Option<Distribution> = None;
    let mut out = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let mut point_opts = opts.clone();
        if mode == SweepMode::WarmStart {
            if let Some(prev) = &warm {
                let n = prev.len() as f64;
                let mixed = prev
                    .probs()
                    .iter()
                    .map(|p| (1.0 - WARM_START_MIX) * p + WARM_START_MIX / n)
                    .collect();
                point_opts.initial_marginal = Some(Distribution::from_drifted(mixed));
            }
        }
        let outcome = solve(prior, variant, source, s, &point_opts);
        if let Ok(r) = &outcome {
            warm = Some(r.label_marginal.clone());
        }
        out.push(SweepPoint { s, outcome });
    }
    out
}

/// Result of [`solve_for_target`].
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSolution {
    pub s: f64,
    pub result: SolverResult,
}

/// Finds `s` in `bracket` whose solution meets `target` (D, fuzzy entropy
/// or G, in the variant's constraint unit) by bisection, to within
/// `1e-6 · max(1, |target|)`.
pub fn solve_for_target(
    prior: &Distribution,
    variant: Variant,
    source: ConstraintSource<'_>,
    target: f64,
    bracket: (f64, f64),
    opts: &SolverOptions,
) -> Result<TargetSolution> {
    const MAX_BISECTIONS: usize = 200;
    let tol = 1e-6 * target.abs().max(1.0);
    let eval = |s: f64| -> Result<SolverResult> { solve(prior, variant, source, s, opts) };
    let (mut a, mut b) = bracket;
    let ra = eval(a)?;
    if (ra.constraint_value - target).abs() <= tol {
        return Ok(TargetSolution { s: a, result: ra });
    }
    let rb = eval(b)?;
    if (rb.constraint_value - target).abs() <= tol {
        return Ok(TargetSolution { s: b, result: rb });
    }
    let (ca, cb) = (ra.constraint_value, rb.constraint_value);
    let (low, high) = if ca <= cb { (ca, cb) } else { (cb, ca) };
    if !(target >= low && target <= high) {
        return Err(Error::TargetOutOfRange { target, low, high });
    }
    // keep `a` on the side below the target
    if ca > cb {
        core::mem::swap(&mut a, &mut b);
    }
    let mut best = if (ca - target).abs() <= (cb - target).abs() {
        TargetSolution { s: bracket.0, result: ra }
    } else {
        TargetSolution { s: bracket.1, result: rb }
    };
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (a + b);
        let r = eval(mid)?;
        let c = r.constraint_value;
        let err = (c - target).abs();
        let better = err < (best.result.constraint_value - target).abs();
        if better {
            best = TargetSolution { s: mid, result: r };
        }
        if err <= tol {
            return Ok(best);
        }
        if c < target {
            a = mid;
        } else {
            b = mid;
        }
        let next = 0.5 * (a + b);
        if next == a || next == b {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::LabelSet;
    use alloc::vec;

    fn bsc_distortion() -> DistortionMatrix {
        DistortionMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn rd_kernel_at_zero_is_all_ones() {
        let k = ConstraintKernel::rate_distortion(&bsc_distortion(), 0.0).unwrap();
        assert!(k.entries().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rtheta_kernel_is_truth_table_at_unit_s() {
        let sc = SemanticChannel::from_columns(LabelSet::numbered(2), &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let k = ConstraintKernel::rate_truth(&sc, 1.0).unwrap();
        assert_eq!(k.entries(), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn rg_kernel_column() {
        let prior = Distribution::uniform(2);
        let sc = SemanticChannel::from_columns(LabelSet::numbered(1), &[vec![1.0, 0.5]]).unwrap();
        let k = ConstraintKernel::rate_verisimilitude(&sc, &prior, 1.0).unwrap();
        assert!((k.entry(0, 0) - 4.0 / 3.0).abs() < 1e-12);
        assert!((k.entry(1, 0) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_sign_and_row_checks() {
        assert!(matches!(
            ConstraintKernel::rate_distortion(&bsc_distortion(), 0.5),
            Err(Error::SignMismatch { .. })
        ));
        let sc = SemanticChannel::from_columns(LabelSet::numbered(2), &[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(ConstraintKernel::rate_truth(&sc, 1.0), Err(Error::AllZeroRow { row: 1 }));
        assert!(matches!(
            ConstraintKernel::rate_truth(&sc, -1.0),
            Err(Error::SignMismatch { .. })
        ));
    }

    #[test]
    fn infinite_distortion_is_exact_zero() {
        let d = DistortionMatrix::from_rows(&[vec![0.0, f64::INFINITY], vec![1.0, 0.0]]).unwrap();
        let k = ConstraintKernel::rate_distortion(&d, -2.0).unwrap();
        assert_eq!(k.entry(0, 1), 0.0);
        let step = mmi_step(&Distribution::uniform(2), &k).unwrap();
        assert_eq!(step.channel.get(0, 1), 0.0);
    }

    #[test]
    fn step_examples() {
        let d = bsc_distortion();
        let ones = ConstraintKernel::rate_distortion(&d, 0.0).unwrap();
        let m = Distribution::new(vec![0.3, 0.7]).unwrap();
        let step = mmi_step(&m, &ones).unwrap();
        for row in step.channel.rows() {
            for (a, b) in row.iter().zip(m.probs()) {
                assert!((a - b).abs() < 1e-15);
            }
        }

        let sc = SemanticChannel::from_columns(LabelSet::numbered(2), &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let crisp = ConstraintKernel::rate_truth(&sc, 1.0).unwrap();
        let step = mmi_step(&Distribution::uniform(2), &crisp).unwrap();
        assert_eq!(step.channel, Channel::identity(2));

        // K row (1, 1/9): exp(s) = 1/9
        let k = ConstraintKernel::rate_distortion(&d, -(9.0f64).ln()).unwrap();
        let step = mmi_step(&Distribution::uniform(2), &k).unwrap();
        assert!((step.channel.get(0, 0) - 0.9).abs() < 1e-15);
        assert!((step.channel.get(0, 1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn step_zero_partition() {
        let sc = SemanticChannel::from_columns(LabelSet::numbered(2), &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let k = ConstraintKernel::rate_truth(&sc, 1.0).unwrap();
        let m = Distribution::point_mass(2, 0);
        assert_eq!(mmi_step(&m, &k), Err(Error::ZeroPartition { row: 1 }));
    }

    #[test]
    fn unit_kernel_is_a_fixed_point() {
        let prior = Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let d = DistortionMatrix::from_rows(&[
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
            vec![3.0, 2.0, 1.0],
        ])
        .unwrap();
        let k = ConstraintKernel::rate_distortion(&d, 0.0).unwrap();
        let r = mmi_iterate(&prior, &k, &SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!(r.rate_bits.0.abs() < 1e-15);
        // uniform marginal: prior-weighted mean of the row means
        let expected: f64 = prior
            .probs()
            .iter()
            .enumerate()
            .map(|(i, p)| p * (0..3).map(|j| d.get(i, j)).sum::<f64>() / 3.0)
            .sum();
        assert!((r.constraint_value - expected).abs() < 1e-15);
    }

    #[test]
    fn binary_symmetric_fixed_point() {
        let prior = Distribution::uniform(2);
        let k = ConstraintKernel::rate_distortion(&bsc_distortion(), -(9.0f64).ln()).unwrap();
        let r = mmi_iterate(&prior, &k, &SolverOptions::default()).unwrap();
        assert!((r.constraint_value - 0.1).abs() < 1e-12);
        assert!((r.rate_bits.0 - 0.531_004_406_410_719).abs() < 1e-12);
        let p = rate_point_parametric(&prior, &k, &r).unwrap();
        assert!((p.rate_bits.0 - r.rate_bits.0).abs() < 1e-12);
        assert!((p.constraint_value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_rate_at_s_zero_parametric() {
        let prior = Distribution::uniform(2);
        let k = ConstraintKernel::rate_distortion(&bsc_distortion(), 0.0).unwrap();
        let r = mmi_iterate(&prior, &k, &SolverOptions::default()).unwrap();
        let p = rate_point_parametric(&prior, &k, &r).unwrap();
        assert!(p.rate_bits.0.abs() < 1e-15);
    }

    #[test]
    fn max_iter_flags_result() {
        let prior = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let d = DistortionMatrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let k = ConstraintKernel::rate_distortion(&d, -3.0).unwrap();
        let r = mmi_iterate(&prior, &k, &SolverOptions::default().with_max_iter(1).with_tol(1e-15)).unwrap();
        assert!(!r.converged);
        assert_eq!(r.clone().into_converged(), Err(Error::MaxIterExceeded { iterations: 1 }));
    }

    #[test]
    fn zero_marginal_is_absorbing() {
        let prior = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let d = DistortionMatrix::from_rows(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]]).unwrap();
        let k = ConstraintKernel::rate_distortion(&d, -1.0).unwrap();
        let start = Distribution::new(vec![0.5, 0.0, 0.5]).unwrap();
        let opts = SolverOptions {
            initial_marginal: Some(start),
            ..SolverOptions::default()
        };
        let r = mmi_iterate(&prior, &k, &opts).unwrap();
        for t in &r.trace {
            assert_eq!(t.label_marginal[1], 0.0);
        }
        assert_eq!(r.label_marginal.probs()[1], 0.0);
    }

    #[test]
    fn sweep_binary_points() {
        let prior = Distribution::uniform(2);
        let d = bsc_distortion();
        let s = [0.0, -(9.0f64).ln(), -(99.0f64).ln()];
        let pts = sweep_curve(
            &prior,
            Variant::RateDistortion,
            ConstraintSource::Distortion(&d),
            &s,
            &SolverOptions::default(),
            SweepMode::WarmStart,
        );
        let ds: Vec<f64> = pts.iter().map(|p| p.outcome.as_ref().unwrap().constraint_value).collect();
        for (got, want) in ds.iter().zip([0.5, 0.1, 0.01]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let rates: Vec<f64> = pts.iter().map(|p| p.outcome.as_ref().unwrap().rate_bits.0).collect();
        assert!(rates[0] < rates[1] && rates[1] < rates[2]);
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let prior = Distribution::uniform(2);
        let d = bsc_distortion();
        let pts = sweep_curve(
            &prior,
            Variant::RateDistortion,
            ConstraintSource::Distortion(&d),
            &[-1.0, 1.0, -2.0],
            &SolverOptions::default(),
            SweepMode::WarmStart,
        );
        assert!(pts[0].outcome.is_ok());
        assert!(matches!(pts[1].outcome, Err(Error::SignMismatch { .. })));
        assert!(pts[2].outcome.is_ok());
    }

    #[test]
    fn single_point_sweep_equals_direct_solve() {
        let prior = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let d = DistortionMatrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let opts = SolverOptions::default();
        let pts = sweep_curve(
            &prior,
            Variant::RateDistortion,
            ConstraintSource::Distortion(&d),
            &[-2.0],
            &opts,
            SweepMode::WarmStart,
        );
        let direct = solve(&prior, Variant::RateDistortion, ConstraintSource::Distortion(&d), -2.0, &opts).unwrap();
        assert_eq!(pts[0].outcome.as_ref().unwrap(), &direct);
    }

    #[test]
    fn target_binary_distortion() {
        let prior = Distribution::uniform(2);
        let d = bsc_distortion();
        let sol = solve_for_target(
            &prior,
            Variant::RateDistortion,
            ConstraintSource::Distortion(&d),
            0.1,
            (-20.0, 0.0),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((sol.s - (1.0f64 / 9.0).ln()).abs() < 1e-4, "{}", sol.s);
        assert!((sol.result.constraint_value - 0.1).abs() <= 1e-6);

        let zero = solve_for_target(
            &prior,
            Variant::RateDistortion,
            ConstraintSource::Distortion(&d),
            0.5,
            (-20.0, 0.0),
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(zero.s, 0.0);
        assert!(zero.result.rate_bits.0.abs() < 1e-15);

        assert!(matches!(
            solve_for_target(
                &prior,
                Variant::RateDistortion,
                ConstraintSource::Distortion(&d),
                0.7,
                (-20.0, 0.0),
                &SolverOptions::default(),
            ),
            Err(Error::TargetOutOfRange { .. })
        ));
    }
}
