//! Truth functions: parametric families, semantic channels, the
//! truth/distortion transform and learning truth functions from data.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, expm1, ln, log1p, stable_sum};
use crate::measures::{generalized_kl, Bits};
use crate::prob::{check_len, check_truth_vector, Distribution, Grid, JointDistribution, LabelSet};

/// A parametric (or tabulated) truth function over a one-dimensional grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum TruthSpec {
    /// `1 / (1 + exp(−k (x − c)))`.
    LogisticRise { center: f64, steepness: f64 },
    /// `1 / (1 + exp(k (x − c)))`, the complement of the rise.
    LogisticFall { center: f64, steepness: f64 },
    /// `1 − [1 − exp(−(x − μ)² / 2σ²)]^power`: a rounded trapezoid for
    /// `power > 1`, a Gaussian bump for `power = 1`.
    BumpComplementPow { mu: f64, sigma2: f64, power: u32 },
    /// Explicit truth values, one per grid point.
    Table { values: Vec<f64> },
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + exp(-z))
}

impl TruthSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            TruthSpec::LogisticRise { center, steepness }
            | TruthSpec::LogisticFall { center, steepness } => {
                if !center.is_finite() {
                    return Err(Error::BadParams("logistic center must be finite"));
                }
                if !(steepness.is_finite() && *steepness > 0.0) {
                    return Err(Error::BadParams("logistic steepness must be positive"));
                }
            }
            TruthSpec::BumpComplementPow { mu, sigma2, power } => {
                if !mu.is_finite() {
                    return Err(Error::BadParams("bump center must be finite"));
                }
                if !(sigma2.is_finite() && *sigma2 > 0.0) {
                    return Err(Error::BadParams("sigma2 must be positive"));
                }
                if *power < 1 {
                    return Err(Error::BadParams("power must be at least 1"));
                }
            }
            TruthSpec::Table { values } => check_truth_vector(values, 0)?,
        }
        Ok(())
    }

    /// Truth value at `x`. Tables have no functional form and return `None`.
    pub fn value_at(&self, x: f64) -> Option<f64> {
        match *self {
            TruthSpec::LogisticRise { center, steepness } => Some(logistic(steepness * (x - center))),
            TruthSpec::LogisticFall { center, steepness } => Some(logistic(-steepness * (x - center))),
            TruthSpec::BumpComplementPow { mu, sigma2, power } => {
                let bump = exp(-(x - mu) * (x - mu) / (2.0 * sigma2));
                // 1 − (1 − b)^p without cancellation in the tails
                Some((-expm1(f64::from(power) * log1p(-bump))).clamp(0.0, 1.0))
            }
            TruthSpec::Table { .. } => None,
        }
    }

    /// Evaluates the spec on every grid point.
    pub fn eval(&self, grid: &Grid) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            TruthSpec::Table { values } => {
                check_len("truth table vs grid", grid.len(), values.len())?;
                Ok(values.clone())
            }
            spec => Ok(grid
                .points()
                .iter()
                .map(|&x| spec.value_at(x).unwrap_or(0.0))
                .collect()),
        }
    }
}

/// Free-function form of [`TruthSpec::eval`].
pub fn eval_spec(spec: &TruthSpec, grid: &Grid) -> Result<Vec<f64>> {
    spec.eval(grid)
}

/// A group of truth functions `T(θ_j | x_i)`, stored row-major (`m × n`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SemanticChannel {
    labels: LabelSet,
    inputs: usize,
    truth: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    specs: Option<Vec<TruthSpec>>,
}

impl SemanticChannel {
    /// One truth vector per label.
    pub fn from_columns(labels: LabelSet, columns: &[Vec<f64>]) -> Result<Self> {
        check_len("truth columns vs labels", labels.len(), columns.len())?;
        let inputs = columns.first().map_or(0, Vec::len);
        if inputs == 0 {
            return Err(Error::BadParams("truth functions need at least one grid point"));
        }
        let n = labels.len();
        let mut truth = alloc::vec![0.0; inputs * n];
        for (j, col) in columns.iter().enumerate() {
            check_len("truth column length", inputs, col.len())?;
            for (i, t) in col.iter().enumerate() {
                truth[i * n + j] = *t;
            }
        }
        Self::from_row_major(labels, inputs, truth)
    }

    pub fn from_row_major(labels: LabelSet, inputs: usize, truth: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        check_len("truth entries", inputs * n, truth.len())?;
        for (idx, t) in truth.iter().enumerate() {
            if !(0.0..=1.0).contains(t) {
                return Err(Error::TruthOutOfRange {
                    row: idx / n,
                    label: idx % n,
                });
            }
        }
        for j in 0..n {
            if (0..inputs).all(|i| truth[i * n + j] == 0.0) {
                return Err(Error::ZeroTruthFunction { label: j });
            }
        }
        Ok(Self {
            labels,
            inputs,
            truth,
            specs: None,
        })
    }

    /// Evaluates one spec per label on `grid`.
    pub fn from_specs(labels: LabelSet, specs: Vec<TruthSpec>, grid: &Grid) -> Result<Self> {
        let columns = specs
            .iter()
            .map(|s| s.eval(grid))
            .collect::<Result<Vec<_>>>()?;
        let mut sc = Self::from_columns(labels, &columns)?;
        sc.specs = Some(specs);
        Ok(sc)
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn specs(&self) -> Option<&[TruthSpec]> {
        self.specs.as_deref()
    }

    pub fn truth(&self, i: usize, j: usize) -> f64 {
        self.truth[i * self.labels.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.labels.len();
        &self.truth[i * n..(i + 1) * n]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.inputs).map(|i| self.truth(i, j)).collect()
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.truth
    }

    /// `T(θ_j) = Σ_i P(x_i) T(θ_j|x_i)` for every label.
    pub fn logical_probabilities(&self, prior: &Distribution) -> Result<Vec<f64>> {
        check_len("prior vs truth rows", self.inputs, prior.len())?;
        Ok((0..self.label_count())
            .map(|j| stable_sum((0..self.inputs).map(|i| prior.probs()[i] * self.truth(i, j))))
            .collect())
    }
}

/// `m × n` distortion matrix in nats; `+inf` entries allowed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DistortionMatrix {
    inputs: usize,
    labels: usize,
    data: Vec<f64>,
}

impl DistortionMatrix {
    pub fn new(inputs: usize, labels: usize, data: Vec<f64>) -> Result<Self> {
        if inputs == 0 || labels == 0 {
            return Err(Error::BadParams("distortion matrix needs at least one row and column"));
        }
        check_len("distortion entries", inputs * labels, data.len())?;
        if data.iter().any(|d| d.is_nan() || *d < 0.0) {
            return Err(Error::BadParams("distortion entries must be nonnegative"));
        }
        Ok(Self { inputs, labels, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let labels = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != labels) {
            return Err(Error::DimensionMismatch {
                context: "distortion row length",
                expected: labels,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), labels, rows.concat())
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.labels + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `d = ln(1/T)`; `T = 0` maps to `+inf`.
pub fn truth_to_distortion(semchan: &SemanticChannel) -> DistortionMatrix {
    let data = semchan
        .as_row_major()
        .iter()
        .map(|&t| if t <= 0.0 { f64::INFINITY } else { -ln(t) + 0.0 })
        .collect();
    DistortionMatrix {
        inputs: semchan.inputs(),
        labels: semchan.label_count(),
        data,
    }
}

/// `T = exp(−d)`. Fails only if some label has infinite distortion everywhere.
pub fn distortion_to_truth(d: &DistortionMatrix, labels: LabelSet) -> Result<SemanticChannel> {
    check_len("labels vs distortion columns", d.labels, labels.len())?;
    let truth = d
        .data
        .iter()
        .map(|&v| if v == f64::INFINITY { 0.0 } else { exp(-v) })
        .collect();
    SemanticChannel::from_row_major(labels, d.inputs, truth)
}

/// Normalization of learned truth functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Normalization {
    /// Divide by the maximum ratio over every `(x, y)`; keeps `T(y|x) = T(x|y)`.
    #[default]
    Global,
    /// Divide each label by its own maximum ratio, so every function peaks at 1.
    PerLabel,
}

/// Optimized truth functions from a joint:
/// `T*(θ_j|x_i) ∝ P(x_i, y_j) / (P(x_i) P(y_j))`.
pub fn learn_truth_empirical(
    joint: &JointDistribution,
    labels: LabelSet,
    normalization: Normalization,
) -> Result<SemanticChannel> {
    check_len("labels vs joint columns", joint.cols(), labels.len())?;
    let px = joint.x_marginal();
    let py = joint.y_marginal();
    if let Some(i) = px.probs().iter().position(|p| *p <= 0.0) {
        return Err(Error::ZeroMarginal { axis: "x", index: i });
    }
    if let Some(j) = py.probs().iter().position(|p| *p <= 0.0) {
        return Err(Error::ZeroMarginal { axis: "y", index: j });
    }
    let (m, n) = (joint.rows(), joint.cols());
    let mut ratio = alloc::vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            ratio[i * n + j] = joint.get(i, j) / (px.probs()[i] * py.probs()[j]);
        }
    }
    match normalization {
        Normalization::Global => {
            let max = ratio.iter().cloned().fold(0.0, f64::max);
            ratio.iter_mut().for_each(|r| *r = (*r / max).min(1.0));
        }
        Normalization::PerLabel => {
            for j in 0..n {
                let max = (0..m).map(|i| ratio[i * n + j]).fold(0.0, f64::max);
                for i in 0..m {
                    ratio[i * n + j] = (ratio[i * n + j] / max).min(1.0);
                }
            }
        }
    }
    SemanticChannel::from_row_major(labels, m, ratio)
}

/// Two-parameter families the parametric learner can fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum TruthFamily {
    /// Parameters `(center, steepness)`.
    LogisticRise,
    /// Parameters `(center, steepness)`.
    LogisticFall,
    /// Parameters `(mu, sigma2)` at a fixed power.
    BumpComplementPow { power: u32 },
}

impl TruthFamily {
    pub fn spec(self, a: f64, b: f64) -> TruthSpec {
        match self {
            TruthFamily::LogisticRise => TruthSpec::LogisticRise {
                center: a,
                steepness: b,
            },
            TruthFamily::LogisticFall => TruthSpec::LogisticFall {
                center: a,
                steepness: b,
            },
            TruthFamily::BumpComplementPow { power } => TruthSpec::BumpComplementPow {
                mu: a,
                sigma2: b,
                power,
            },
        }
    }
}

/// Deterministic coarse-to-fine grid search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchConfig {
    /// Inclusive `(low, high)` bounds for the two parameters.
    pub bounds: [(f64, f64); 2],
    pub levels: usize,
    pub points_per_axis: usize,
}

impl SearchConfig {
    /// 3 levels of 32 points per axis; location spans the grid, scale spans
    /// `[0.01, 10]` (steepness) or `[step²/4, extent²]` (σ²).
    pub fn for_family(family: TruthFamily, grid: &Grid) -> Self {
        let pts = grid.points();
        let (lo, hi) = (pts[0], pts[pts.len() - 1]);
        let scale = match family {
            TruthFamily::LogisticRise | TruthFamily::LogisticFall => (0.01, 10.0),
            TruthFamily::BumpComplementPow { .. } => {
                let step = if pts.len() > 1 { pts[1] - pts[0] } else { 1.0 };
                let extent = (hi - lo).max(step);
                (step * step / 4.0, extent * extent)
            }
        };
        Self {
            bounds: [(lo, hi), scale],
            levels: 3,
            points_per_axis: 32,
        }
    }
}

/// Result of [`learn_truth_parametric`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ParametricFit {
    pub spec: TruthSpec,
    /// Generalized KL information of the fitted spec.
    pub objective: Bits,
    /// True when a fitted parameter sits on a search bound (for example a
    /// crisp sample pushing the steepness to its ceiling).
    pub at_bound: bool,
}

/// Fits a smooth truth function to one sampling distribution by maximizing
/// `Σ_i P(x_i|y_j) log[T(x_i) / T(θ_j)]` over a nested grid search.
///
/// Ties keep the earlier candidate, which is the smaller parameter pair in
/// lexicographic order.
pub fn learn_truth_parametric(
    sampling: &Distribution,
    prior: &Distribution,
    grid: &Grid,
    family: TruthFamily,
    cfg: &SearchConfig,
) -> Result<ParametricFit> {
    check_len("sampling vs grid", grid.len(), sampling.len())?;
    check_len("prior vs grid", grid.len(), prior.len())?;
    if cfg.levels == 0 || cfg.points_per_axis < 2 {
        return Err(Error::BadParams("search needs >= 1 level and >= 2 points per axis"));
    }
    for (lo, hi) in cfg.bounds {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::BadParams("search bounds must be finite and ordered"));
        }
    }
    let objective = |a: f64, b: f64| -> f64 {
        let spec = family.spec(a, b);
        let truth = match spec.eval(grid) {
            Ok(t) => t,
            Err(_) => return f64::NEG_INFINITY,
        };
        match generalized_kl(sampling, &truth, prior) {
            Ok(v) if !v.0.is_nan() => v.0,
            _ => f64::NEG_INFINITY,
        }
    };

    let mut bounds = cfg.bounds;
    let mut best: Option<(f64, f64, f64)> = None;
    let steps = (cfg.points_per_axis - 1) as f64;
    for _ in 0..cfg.levels {
        let da = (bounds[0].1 - bounds[0].0) / steps;
        let db = (bounds[1].1 - bounds[1].0) / steps;
        let mut level_best: Option<(f64, f64, f64)> = None;
        for ka in 0..cfg.points_per_axis {
            let a = if ka + 1 == cfg.points_per_axis { bounds[0].1 } else { bounds[0].0 + ka as f64 * da };
            for kb in 0..cfg.points_per_axis {
                let b = if kb + 1 == cfg.points_per_axis { bounds[1].1 } else { bounds[1].0 + kb as f64 * db };
                if !(b > 0.0) {
                    continue;
                }
                let v = objective(a, b);
                if v > level_best.map_or(f64::NEG_INFINITY, |t| t.2) {
                    level_best = Some((a, b, v));
                }
            }
        }
        let Some((a, b, v)) = level_best else {
            break;
        };
        if best.is_none_or(|t| v > t.2) {
            best = Some((a, b, v));
        }
        let (ba, bb, _) = best.unwrap_or((a, b, v));
        bounds = [
            ((ba - da).max(cfg.bounds[0].0), (ba + da).min(cfg.bounds[0].1)),
            ((bb - db).max(cfg.bounds[1].0), (bb + db).min(cfg.bounds[1].1)),
        ];
    }
    let (a, b, v) = best.ok_or(Error::DegenerateSample)?;
    let at_bound = a == cfg.bounds[0].0 || a == cfg.bounds[0].1 || b == cfg.bounds[1].0 || b == cfg.bounds[1].1;
    Ok(ParametricFit {
        spec: family.spec(a, b),
        objective: Bits(v),
        at_bound,
    })
}
