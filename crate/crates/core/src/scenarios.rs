//! The two worked examples and a runner that scores a solve against their
//! published figures and structural properties.
//!
//! Example 1: ages `0..=grid_max` with four labels (non-adult, youth,
//! adult, elder) and a half-Gaussian age prior. Example 2: 256 grey levels
//! quantized into 8 fuzzy classes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math::exp;
use crate::measures::semantic_mutual_information;
use crate::prob::{normalize, Distribution, Grid, LabelSet};
use crate::solver::{mmi_iterate, rate_point_parametric, semantic_rate, ConstraintKernel, SolverOptions, SolverResult, Variant};
use crate::truth::{SemanticChannel, TruthSpec};

/// Default upper end of the Example 1 age grid.
pub const EXAMPLE1_GRID_MAX: i64 = 100;
/// Standard deviation of the half-Gaussian prior shared by both examples.
pub const PRIOR_SIGMA: f64 = 37.0;
/// Iteration cap used by [`reproduce`]; the R(G) solve of Example 1 needs
/// roughly 14 000 iterations at `tol = 1e-8`.
pub const REPRODUCE_MAX_ITER: usize = 100_000;

/// How the eight Example 2 classes are laid out.
pub const EXAMPLE2_LABEL_INDEXING: &str =
    "8 classes: low logistic shoulder (center 2), six rounded trapezoids (mu, sigma2) = \
     (14,16) (30,24) (52,50) (80,80) (120,160) (170,240) with power 3, \
     high logistic shoulder (center 200, steepness 0.2)";

/// Published Example 1 rates and label marginals at `s = 1`.
pub const EXAMPLE1_RTHETA_RATE: f64 = 0.845;
pub const EXAMPLE1_RTHETA_MARGINAL: [f64; 4] = [0.3499, 0.0022, 0.6367, 0.0];
pub const EXAMPLE1_RG_RATE: f64 = 0.883;
pub const EXAMPLE1_RG_MARGINAL: [f64; 4] = [0.3619, 0.0200, 0.6120, 0.0057];
pub const RATE_TOLERANCE: f64 = 0.02;
pub const MARGINAL_TOLERANCE: f64 = 0.01;

/// Grid, prior and semantic channel of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: Grid,
    pub prior: Distribution,
    pub semchan: SemanticChannel,
}

/// `P(x) ∝ exp(−x² / 2σ²)` on `grid`.
pub fn truncated_gaussian_prior(grid: &Grid, sigma: f64) -> Result<Distribution> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::BadParams("sigma must be positive"));
    }
    let w: Vec<f64> = grid
        .points()
        .iter()
        .map(|x| exp(-x * x / (2.0 * sigma * sigma)))
        .collect();
    normalize(&w)
}

pub fn example1_specs() -> Vec<TruthSpec> {
    alloc::vec![
        TruthSpec::LogisticFall {
            center: 18.0,
            steepness: 1.5
        },
        TruthSpec::BumpComplementPow {
            mu: 22.0,
            sigma2: 25.0,
            power: 2
        },
        TruthSpec::LogisticRise {
            center: 18.0,
            steepness: 1.5
        },
        TruthSpec::LogisticRise {
            center: 60.0,
            steepness: 1.0
        },
    ]
}

/// Example 1 on the integer ages `0..=grid_max`.
pub fn build_example1(grid_max: i64) -> Result<Scenario> {
    if grid_max < 1 {
        return Err(Error::InvalidArgument("grid_max must be at least 1"));
    }
    let grid = Grid::integers(0, grid_max)?;
    let prior = truncated_gaussian_prior(&grid, PRIOR_SIGMA)?;
    let labels = LabelSet::new(
        ["non-adult", "youth", "adult", "elder"]
            .iter()
            .map(|s| String::from(*s))
            .collect(),
    )?;
    let semchan = SemanticChannel::from_specs(labels, example1_specs(), &grid)?;
    Ok(Scenario { grid, prior, semchan })
}

pub fn example2_specs() -> Vec<TruthSpec> {
    let mut specs = alloc::vec![TruthSpec::LogisticFall {
        center: 2.0,
        steepness: 1.0
    }];
    for (mu, sigma2) in [(14.0, 16.0), (30.0, 24.0), (52.0, 50.0), (80.0, 80.0), (120.0, 160.0), (170.0, 240.0)] {
        specs.push(TruthSpec::BumpComplementPow { mu, sigma2, power: 3 });
    }
    specs.push(TruthSpec::LogisticRise {
        center: 200.0,
        steepness: 0.2,
    });
    specs
}

/// Example 2 on grey levels `0..=255`.
pub fn build_example2() -> Result<Scenario> {
    let grid = Grid::integers(0, 255)?;
    let prior = truncated_gaussian_prior(&grid, PRIOR_SIGMA)?;
    let semchan = SemanticChannel::from_specs(LabelSet::numbered(8), example2_specs(), &grid)?;
    Ok(Scenario { grid, prior, semchan })
}

/// Which scenario to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioId {
    Example1 { grid_max: i64 },
    Example2,
}

impl ScenarioId {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Example1 { .. } => "example1",
            ScenarioId::Example2 => "example2",
        }
    }

    pub fn build(self) -> Result<Scenario> {
        match self {
            ScenarioId::Example1 { grid_max } => build_example1(grid_max),
            ScenarioId::Example2 => build_example2(),
        }
    }
}

/// How a row compares `computed` with `target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Relation {
    /// `|computed − target| ≤ tolerance`.
    Within,
    /// `computed < target`.
    Below,
    /// `computed > target`.
    Above,
    /// `computed ≥ target − tolerance`.
    AtLeast,
}

impl Relation {
    fn check(self, computed: f64, target: f64, tolerance: f64) -> bool {
        match self {
            Relation::Within => (computed - target).abs() <= tolerance,
            Relation::Below => computed < target,
            Relation::Above => computed > target,
            Relation::AtLeast => computed >= target - tolerance,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Within => "~",
            Relation::Below => "<",
            Relation::Above => ">",
            Relation::AtLeast => ">=",
        }
    }
}

/// One comparison in a [`ScenarioReport`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TargetRow {
    pub name: String,
    pub computed: f64,
    pub relation: Relation,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Hard rows decide the outcome; soft rows report published digits.
    pub hard: bool,
    /// `published` or `structural`, with detail.
    pub note: String,
}

impl TargetRow {
    fn new(name: &str, computed: f64, relation: Relation, target: f64, tolerance: f64, hard: bool, note: &str) -> Self {
        Self {
            name: String::from(name),
            computed,
            relation,
            target,
            tolerance,
            pass: relation.check(computed, target, tolerance),
            hard,
            note: String::from(note),
        }
    }
}

/// Settings a report was produced with.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ReportConfig {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub prior_sigma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub label_indexing: Option<String>,
}

/// Outcome of [`reproduce`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ScenarioReport {
    pub scenario: String,
    pub variant: Variant,
    pub s: f64,
    pub labels: Vec<String>,
    pub label_marginal: Vec<f64>,
    pub rate_bits: f64,
    pub constraint_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rows: Vec<TargetRow>,
    pub config: ReportConfig,
}

impl ScenarioReport {
    /// True when every hard row passes.
    pub fn passed(&self) -> bool {
        self.rows.iter().filter(|r| r.hard).all(|r| r.pass)
    }

    pub fn hard_failures(&self) -> impl Iterator<Item = &TargetRow> {
        self.rows.iter().filter(|r| r.hard && !r.pass)
    }

    pub fn row(&self, name: &str) -> Option<&TargetRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}  variant {}  s {}", self.scenario, self.variant, self.s)?;
        writeln!(
            f,
            "grid {}..{} ({} points)  tol {:e}  max_iter {}",
            self.config.grid_min, self.config.grid_max, self.config.grid_points, self.config.tol, self.config.max_iter
        )?;
        if let Some(ix) = &self.config.label_indexing {
            writeln!(f, "label indexing: {ix}")?;
        }
        writeln!(
            f,
            "rate {:.6} bits  constraint {:.6}  iterations {}  converged {}",
            self.rate_bits, self.constraint_value, self.iterations, self.converged
        )?;
        for (name, p) in self.labels.iter().zip(&self.label_marginal) {
            let mark = if *p < 1e-4 { "  (~0)" } else { "" };
            writeln!(f, "  P({name}) = {p:.6}{mark}")?;
        }
        writeln!(f, "{:<34} {:>14} {:>3} {:>10} {:>9}  {:<4} {:<4} note", "check", "computed", "", "target", "tol", "kind", "ok")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<34} {:>14.6e} {:>3} {:>10} {:>9.1e}  {:<4} {:<4} {}",
                r.name,
                r.computed,
                r.relation.symbol(),
                fmt_target(r.target),
                r.tolerance,
                if r.hard { "hard" } else { "soft" },
                if r.pass { "PASS" } else { "FAIL" },
                r.note
            )?;
        }
        write!(f, "overall: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

fn fmt_target(t: f64) -> String {
    if t == 0.0 || t.abs() >= 1e-3 {
        format!("{t:.4}")
    } else {
        format!("{t:.1e}")
    }
}

fn reproduce_options(tol: f64, max_iter: usize) -> SolverOptions {
    SolverOptions {
        tol,
        max_iter,
        initial_marginal: None,
        record_trace: true,
    }
}

/// Rows shared by every scenario: convergence, the parametric identity and
/// row normalization.
fn common_rows(
    rows: &mut Vec<TargetRow>,
    sc: &Scenario,
    kernel: &ConstraintKernel,
    result: &SolverResult,
) -> Result<()> {
    rows.push(TargetRow::new(
        "converged",
        result.converged as u8 as f64,
        Relation::Within,
        1.0,
        0.0,
        true,
        "structural",
    ));
    let param = rate_point_parametric(&sc.prior, kernel, result)?;
    rows.push(TargetRow::new(
        "|parametric R - I(X;Y)| bits",
        (param.rate_bits.0 - result.rate_bits.0).abs(),
        Relation::Below,
        1e-9,
        0.0,
        false,
        "identity: exact at the fixed point, off by KL(last step) for vanishing labels",
    ));
    let worst = result
        .channel
        .rows()
        .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    rows.push(TargetRow::new(
        "max |row sum - 1|",
        worst,
        Relation::Below,
        1e-12,
        0.0,
        true,
        "structural",
    ));
    Ok(())
}

/// Rows for the rate-truth chain at `|s| = 1` and support containment.
fn rtheta_rows(rows: &mut Vec<TargetRow>, sc: &Scenario, kernel: &ConstraintKernel, result: &SolverResult) -> Result<()> {
    if kernel.s() == 1.0 {
        let sem = semantic_rate(&sc.prior, kernel, result)?;
        rows.push(TargetRow::new(
            "|R - I(Y;X_theta)| bits",
            (result.rate_bits.0 - sem.0).abs(),
            Relation::Below,
            1e-9,
            0.0,
            true,
            "structural",
        ));
        let smi = semantic_mutual_information(&sc.prior, &result.channel, &sc.semchan)?;
        rows.push(TargetRow::new(
            "R - I(X;Y_theta) bits",
            result.rate_bits.0 - smi.smi.0,
            Relation::AtLeast,
            0.0,
            1e-12,
            true,
            "structural",
        ));
    }
    let mut violations = 0usize;
    for (i, row) in result.channel.rows().enumerate() {
        for (j, p) in row.iter().enumerate() {
            if *p > 0.0 && result.label_marginal.probs()[j] > 0.0 && sc.semchan.truth(i, j) <= 0.0 {
                violations += 1;
            }
        }
    }
    rows.push(TargetRow::new(
        "support containment violations",
        violations as f64,
        Relation::Within,
        0.0,
        0.0,
        true,
        "structural",
    ));
    Ok(())
}

fn published_rows(rows: &mut Vec<TargetRow>, names: &[String], result: &SolverResult, rate: f64, marginal: &[f64; 4]) {
    rows.push(TargetRow::new(
        "rate bits",
        result.rate_bits.0,
        Relation::Within,
        rate,
        RATE_TOLERANCE,
        false,
        "published",
    ));
    for ((name, p), t) in names.iter().zip(result.label_marginal.probs()).zip(marginal) {
        rows.push(TargetRow::new(
            &format!("P({name})"),
            *p,
            Relation::Within,
            *t,
            MARGINAL_TOLERANCE,
            false,
            "published",
        ));
    }
}

/// Count of iterations at which `P(y_j)` failed to strictly decrease.
pub fn non_decreasing_steps(result: &SolverResult, j: usize, start: &Distribution) -> usize {
    let mut prev = start.probs()[j];
    let mut bad = 0;
    for t in &result.trace {
        let p = t.label_marginal[j];
        if !(p < prev) {
            bad += 1;
        }
        prev = p;
    }
    bad
}

/// Runs one scenario and fills the comparison table.
///
/// Solves use a cold uniform start with `record_trace` on. For Example 1
/// under R(G), the R(Θ) solve at the same `s` is run as well, for the
/// cross-variant rows.
pub fn reproduce(id: ScenarioId, variant: Variant, s: f64, tol: f64, max_iter: usize) -> Result<ScenarioReport> {
    let sc = id.build()?;
    let opts = reproduce_options(tol, max_iter);
    let kernel = ConstraintKernel::build(variant, s, crate::solver::ConstraintSource::Truth(&sc.semchan), &sc.prior)?;
    let result = mmi_iterate(&sc.prior, &kernel, &opts)?;
    let names: Vec<String> = sc.semchan.labels().names().to_vec();

    let mut rows = Vec::new();
    common_rows(&mut rows, &sc, &kernel, &result)?;

    match (id, variant) {
        (ScenarioId::Example1 { .. }, Variant::RateTruth) => {
            rtheta_rows(&mut rows, &sc, &kernel, &result)?;
            if s == 1.0 {
                published_rows(&mut rows, &names, &result, EXAMPLE1_RTHETA_RATE, &EXAMPLE1_RTHETA_MARGINAL);
            }
            rows.push(TargetRow::new(
                "P(elder) absorbed",
                result.label_marginal.probs()[3],
                Relation::Below,
                1e-3,
                0.0,
                true,
                "structural: elder implies adult and is absorbed",
            ));
            rows.push(TargetRow::new(
                "P(elder) non-decreasing steps",
                non_decreasing_steps(&result, 3, &Distribution::uniform(4)) as f64,
                Relation::Within,
                0.0,
                0.0,
                true,
                "structural: strictly decreasing along the trace",
            ));
        }
        (ScenarioId::Example1 { .. }, Variant::RateVerisimilitude) => {
            if s == 1.0 {
                published_rows(&mut rows, &names, &result, EXAMPLE1_RG_RATE, &EXAMPLE1_RG_MARGINAL);
            }
            let theta_kernel = ConstraintKernel::rate_truth(&sc.semchan, s)?;
            let theta = mmi_iterate(&sc.prior, &theta_kernel, &opts)?;
            rows.push(TargetRow::new(
                "R(G) - R(Theta) bits",
                result.rate_bits.0 - theta.rate_bits.0,
                Relation::Above,
                0.0,
                0.0,
                true,
                "published ordering",
            ));
            for j in [1usize, 3] {
                rows.push(TargetRow::new(
                    &format!("P({}) under G - under Theta", names[j]),
                    result.label_marginal.probs()[j] - theta.label_marginal.probs()[j],
                    Relation::Above,
                    0.0,
                    0.0,
                    true,
                    "structural: low logical probability is selected more",
                ));
            }
        }
        (ScenarioId::Example2, Variant::RateTruth) => {
            rtheta_rows(&mut rows, &sc, &kernel, &result)?;
        }
        _ => {}
    }

    let points = sc.grid.points();
    Ok(ScenarioReport {
        scenario: String::from(id.name()),
        variant,
        s,
        labels: names,
        label_marginal: result.label_marginal.probs().to_vec(),
        rate_bits: result.rate_bits.0,
        constraint_value: result.constraint_value,
        iterations: result.iterations,
        converged: result.converged,
        rows,
        config: ReportConfig {
            grid_min: points[0],
            grid_max: points[points.len() - 1],
            grid_points: points.len(),
            prior_sigma: PRIOR_SIGMA,
            tol,
            max_iter,
            label_indexing: match id {
                ScenarioId::Example2 => Some(String::from(EXAMPLE2_LABEL_INDEXING)),
                _ => None,
            },
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_shape() {
        let sc = build_example1(EXAMPLE1_GRID_MAX).unwrap();
        assert_eq!(sc.grid.len(), 101);
        assert_eq!(sc.semchan.label_count(), 4);
        assert_eq!(sc.semchan.truth(18, 2), 0.5);
        assert_eq!(sc.semchan.truth(22, 1), 1.0);
        for i in 0..sc.grid.len() {
            assert!((sc.semchan.truth(i, 0) + sc.semchan.truth(i, 2) - 1.0).abs() < 1e-15);
        }
        let p = sc.prior.probs();
        assert!(p.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn example2_shape() {
        let sc = build_example2().unwrap();
        assert_eq!(sc.grid.len(), 256);
        assert_eq!(sc.semchan.label_count(), 8);
        assert_eq!(sc.semchan.truth(2, 0), 0.5);
        assert_eq!(sc.semchan.truth(52, 3), 1.0);
        assert_eq!(sc.semchan.truth(200, 7), 0.5);
    }

    #[test]
    fn prior_rejects_bad_sigma() {
        let g = Grid::integers(0, 3).unwrap();
        assert!(truncated_gaussian_prior(&g, 0.0).is_err());
    }

    #[test]
    fn relations() {
        assert!(Relation::Within.check(1.0, 1.01, 0.02));
        assert!(!Relation::Below.check(1.0, 1.0, 0.0));
        assert!(Relation::AtLeast.check(-1e-13, 0.0, 1e-12));
    }

    #[test]
    fn example2_rtheta_report_is_structurally_sound() {
        let r = reproduce(ScenarioId::Example2, Variant::RateTruth, 1.0, 1e-8, REPRODUCE_MAX_ITER).unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.config.label_indexing.is_some());
    }
}
