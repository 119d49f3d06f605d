//! Problem configuration: the JSON file, command-line overrides and
//! resolution into solver inputs.

use std::path::{Path, PathBuf};

use ratetruth_core::prob::normalize;
use ratetruth_core::scenarios::truncated_gaussian_prior;
use ratetruth_core::solver::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use ratetruth_core::truth::{learn_truth_empirical, Normalization};
use ratetruth_core::{
    ConstraintSource, Distribution, DistortionMatrix, Grid, JointDistribution, LabelSet, SemanticChannel, SolverOptions,
    TruthSpec, Variant,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, FieldContext, Result};
use crate::formats::{read_distribution, read_table, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Range { min: f64, max: f64, step: f64 },
    Points { points: Vec<f64> },
}

impl GridSpec {
    fn build(&self) -> Result<Grid> {
        match self {
            GridSpec::Range { min, max, step } => Grid::range(*min, *max, *step),
            GridSpec::Points { points } => Grid::new(points.clone()),
        }
        .field("grid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// Probabilities, one per grid point.
    Table { values: Vec<f64> },
    /// `P(x) ∝ exp(−x²/2σ²)` on the grid.
    TruncatedGaussian { sigma: f64 },
    Uniform,
    /// A distribution CSV (`x,p`).
    File { path: PathBuf },
    /// The `x` marginal of the `learn_from_joint` file.
    JointMarginal,
}

/// Exactly one field must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    /// Distortion matrix CSV; `inf` marks forbidden pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion_file: Option<PathBuf>,
    /// One parametric or tabulated truth function per label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<TruthSpec>>,
    /// Semantic-channel CSV of truth values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_channel_file: Option<PathBuf>,
    /// Joint CSV (probabilities or counts) from which truth functions are
    /// learned with global normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learn_from_joint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub constraint: ConstraintSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// `a:b:n` or `a:b:n:geometric`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub variant: Option<Variant>,
    pub s: Option<f64>,
    pub s_grid: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config("config", e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Applies overrides and fills in the default tolerance and iteration cap.
    pub fn apply(&mut self, ov: &Overrides) -> Result<()> {
        if self.s.is_some() && self.s_grid.is_some() && ov.s.is_none() && ov.s_grid.is_none() {
            return Err(CliError::config("s", "give either `s` or `s_grid`, not both"));
        }
        if ov.variant.is_some() {
            self.variant = ov.variant;
        }
        if ov.s.is_some() {
            self.s = ov.s;
            self.s_grid = None;
        }
        if ov.s_grid.is_some() {
            self.s_grid = ov.s_grid.clone();
            self.s = None;
        }
        if ov.tol.is_some() {
            self.tol = ov.tol;
        }
        if ov.max_iter.is_some() {
            self.max_iter = ov.max_iter;
        }
        self.tol.get_or_insert(DEFAULT_TOL);
        self.max_iter.get_or_insert(DEFAULT_MAX_ITER);
        Ok(())
    }
}

/// Parses `a:b:n` (evenly spaced, both ends included) or `a:b:n:geometric`.
pub fn parse_s_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| CliError::config("s_grid", format!("`{spec}`: {msg}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(bad("expected a:b:n or a:b:n:geometric"));
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad("start is not a number"))?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad("end is not a number"))?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad("count is not a positive integer"))?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(bad("ends must be finite"));
    }
    if n == 0 {
        return Err(bad("count must be at least 1"));
    }
    let geometric = match parts.get(3).map(|s| s.trim()) {
        None => false,
        Some("geometric") => true,
        Some(_) => return Err(bad("the fourth field may only be `geometric`")),
    };
    if n == 1 {
        return Ok(vec![a]);
    }
    let last = (n - 1) as f64;
    if geometric {
        if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
            return Err(bad("geometric spacing needs nonzero ends of the same sign"));
        }
        let ratio = b / a;
        Ok((0..n)
            .map(|k| if k + 1 == n { b } else { a * ratio.powf(k as f64 / last) })
            .collect())
    } else {
        Ok((0..n)
            .map(|k| if k + 1 == n { b } else { a + (b - a) * (k as f64 / last) })
            .collect())
    }
}

/// Constraint data after loading.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Distortion(DistortionMatrix),
    Truth(SemanticChannel),
}

/// A validated problem ready for the solver.
#[derive(Debug, Clone)]
pub struct Problem {
    /// The resolved configuration, embedded in every output file.
    pub echo: Value,
    pub grid: Grid,
    pub prior: Distribution,
    pub labels: LabelSet,
    pub source: Source,
    pub variant: Variant,
    pub s: Option<f64>,
    pub s_values: Option<Vec<f64>>,
    pub opts: SolverOptions,
}

impl Problem {
    pub fn constraint(&self) -> ConstraintSource<'_> {
        match &self.source {
            Source::Distortion(d) => ConstraintSource::Distortion(d),
            Source::Truth(t) => ConstraintSource::Truth(t),
        }
    }

    /// The truth-function view of the constraint (`T = exp(−d)` for a
    /// distortion source).
    pub fn semantic_channel(&self) -> Result<SemanticChannel> {
        match &self.source {
            Source::Truth(t) => Ok(t.clone()),
            Source::Distortion(d) => Ok(ratetruth_core::truth::distortion_to_truth(d, self.labels.clone())?),
        }
    }

    pub fn require_s(&self) -> Result<f64> {
        self.s.ok_or_else(|| CliError::config("s", "required (config `s` or `--s`)"))
    }
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn check_xs(field: &str, grid: &Grid, xs: &[f64], path: &Path) -> Result<()> {
    if grid.points() != xs {
        return Err(CliError::config(
            field,
            format!("grid does not match the x column of {}", path.display()),
        ));
    }
    Ok(())
}

/// Validates `cfg` (already carrying its overrides) and loads every file it
/// names. Relative paths are taken from `base`, normally the directory of
/// the config file.
pub fn resolve(cfg: &ProblemConfig, base: &Path) -> Result<Problem> {
    let c = &cfg.constraint;
    let given = [
        c.distortion_file.is_some(),
        c.truth.is_some(),
        c.semantic_channel_file.is_some(),
        c.learn_from_joint.is_some(),
    ]
    .iter()
    .filter(|b| **b)
    .count();
    if given != 1 {
        return Err(CliError::config(
            "constraint",
            format!(
                "exactly one of distortion_file, truth, semantic_channel_file, learn_from_joint is required; {given} given"
            ),
        ));
    }

    let grid_from_config = cfg.grid.as_ref().map(GridSpec::build).transpose()?;
    let mut table: Option<(Table, PathBuf, &str)> = None;
    for (field, path) in [
        ("constraint.distortion_file", &c.distortion_file),
        ("constraint.semantic_channel_file", &c.semantic_channel_file),
        ("constraint.learn_from_joint", &c.learn_from_joint),
    ] {
        if let Some(p) = path {
            let full = resolve_path(base, p);
            table = Some((read_table(&full)?, full, field));
        }
    }

    let grid = match (&grid_from_config, &table) {
        (Some(g), Some((t, path, field))) => {
            check_xs(field, g, &t.xs, path)?;
            g.clone()
        }
        (Some(g), None) => g.clone(),
        (None, Some((t, _, field))) => Grid::new(t.xs.clone()).field(field)?,
        (None, None) => return Err(CliError::config("grid", "required when truth functions are given as specs")),
    };
    let m = grid.len();

    let header_labels = table.as_ref().map(|(t, _, _)| t.labels.clone());
    let n = match (&c.truth, &header_labels) {
        (Some(specs), _) => specs.len(),
        (None, Some(h)) => h.len(),
        (None, None) => unreachable!("one constraint source is present"),
    };
    let labels = match &cfg.labels {
        Some(names) => {
            if names.len() != n {
                return Err(CliError::config("labels", format!("{} names for {n} labels", names.len())));
            }
            LabelSet::new(names.clone()).field("labels")?
        }
        None => match header_labels {
            Some(h) => LabelSet::new(h).field("labels")?,
            None => LabelSet::numbered(n),
        },
    };

    let mut joint_marginal = None;
    let source = if let Some(specs) = &c.truth {
        Source::Truth(SemanticChannel::from_specs(labels.clone(), specs.clone(), &grid).field("constraint.truth")?)
    } else {
        let (t, _, field) = table.as_ref().expect("file source");
        let data = t.row_major();
        if c.distortion_file.is_some() {
            Source::Distortion(DistortionMatrix::new(m, n, data).field(field)?)
        } else if c.semantic_channel_file.is_some() {
            Source::Truth(SemanticChannel::from_row_major(labels.clone(), m, data).field(field)?)
        } else {
            let weights = normalize(&data).field(field)?;
            let joint = JointDistribution::new(m, n, weights.into_vec()).field(field)?;
            joint_marginal = Some(joint.x_marginal());
            Source::Truth(learn_truth_empirical(&joint, labels.clone(), Normalization::Global).field(field)?)
        }
    };

    let prior = match &cfg.prior {
        Some(PriorSpec::Table { values }) => Distribution::new(values.clone()).field("prior.values")?,
        Some(PriorSpec::TruncatedGaussian { sigma }) => truncated_gaussian_prior(&grid, *sigma).field("prior.sigma")?,
        Some(PriorSpec::Uniform) => Distribution::uniform(m),
        Some(PriorSpec::File { path }) => {
            let full = resolve_path(base, path);
            let (xs, d) = read_distribution(&full)?;
            check_xs("prior.path", &grid, &xs, &full)?;
            d
        }
        Some(PriorSpec::JointMarginal) | None => match joint_marginal {
            Some(d) => d,
            None if cfg.prior.is_some() => {
                return Err(CliError::config("prior", "joint_marginal needs constraint.learn_from_joint"));
            }
            None => return Err(CliError::config("prior", "required")),
        },
    };
    if prior.len() != m {
        return Err(CliError::config("prior", format!("{} values for a grid of {m} points", prior.len())));
    }

    let variant = cfg
        .variant
        .ok_or_else(|| CliError::config("variant", "required (rd, rtheta or rg)"))?;
    if let Some(s) = cfg.s {
        variant.check_s(s).field("s")?;
    }
    let s_values = cfg.s_grid.as_deref().map(parse_s_grid).transpose()?;

    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::config("tol", "must be positive"));
    }
    let max_iter = cfg.max_iter.unwrap_or(DEFAULT_MAX_ITER);
    if max_iter == 0 {
        return Err(CliError::config("max_iter", "must be at least 1"));
    }

    Ok(Problem {
        echo: serde_json::to_value(cfg).expect("config serializes"),
        grid,
        prior,
        labels,
        source,
        variant,
        s: cfg.s,
        s_values,
        opts: SolverOptions::default().with_tol(tol).with_max_iter(max_iter),
    })
}

/// Loads, overrides and resolves a config file.
pub fn load_problem(path: &Path, ov: &Overrides) -> Result<Problem> {
    let mut cfg = ProblemConfig::load(path)?;
    cfg.apply(ov)?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(&cfg, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_grid_forms() {
        assert_eq!(parse_s_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_s_grid("-0.5:-4:1").unwrap(), vec![-0.5]);
        let g = parse_s_grid("0.1:10:3:geometric").unwrap();
        assert!((g[1] - 1.0).abs() < 1e-15);
        assert_eq!(g[2], 10.0);
        assert!(parse_s_grid("0:1:3:geometric").is_err());
        assert!(parse_s_grid("0:1").is_err());
        assert!(parse_s_grid("0:1:0").is_err());
        assert!(parse_s_grid("0:1:3:log").is_err());
    }

    fn base_config() -> ProblemConfig {
        ProblemConfig::from_json(
            r#"{
                "grid": {"min": 0, "max": 2, "step": 1},
                "prior": {"kind": "uniform"},
                "constraint": {"truth": [
                    {"kind": "table", "values": [1, 0.5, 0]},
                    {"kind": "table", "values": [0, 0.5, 1]}
                ]},
                "variant": "rtheta",
                "s": 1
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn resolves_and_echoes_defaults() {
        let mut cfg = base_config();
        cfg.apply(&Overrides::default()).unwrap();
        let p = resolve(&cfg, Path::new(".")).unwrap();
        assert_eq!(p.grid.len(), 3);
        assert_eq!(p.labels.names(), &["y1".to_string(), "y2".to_string()]);
        assert_eq!(p.echo["tol"], serde_json::json!(1e-8));
        assert_eq!(p.echo["max_iter"], serde_json::json!(10_000));
    }

    #[test]
    fn overrides_win() {
        let mut cfg = base_config();
        cfg.apply(&Overrides {
            variant: Some(Variant::RateDistortion),
            s: Some(-2.0),
            ..Overrides::default()
        })
        .unwrap();
        let p = resolve(&cfg, Path::new(".")).unwrap();
        assert_eq!(p.variant, Variant::RateDistortion);
        assert_eq!(p.s, Some(-2.0));
    }

    #[test]
    fn field_level_errors() {
        let field_of = |cfg: &ProblemConfig| match resolve(cfg, Path::new(".")) {
            Err(CliError::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        };
        let mut c = base_config();
        c.s = Some(-1.0);
        assert_eq!(field_of(&c), "s");

        let mut c = base_config();
        c.constraint.distortion_file = Some("d.csv".into());
        assert_eq!(field_of(&c), "constraint");

        let mut c = base_config();
        c.labels = Some(vec!["only".into()]);
        assert_eq!(field_of(&c), "labels");

        let mut c = base_config();
        c.prior = Some(PriorSpec::Table { values: vec![0.5, 0.5] });
        assert_eq!(field_of(&c), "prior");

        let mut c = base_config();
        c.variant = None;
        assert_eq!(field_of(&c), "variant");

        let mut c = base_config();
        c.grid = None;
        assert_eq!(field_of(&c), "grid");

        let mut c = base_config();
        c.tol = Some(0.0);
        assert_eq!(field_of(&c), "tol");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ProblemConfig::from_json(r#"{"constraint": {}, "sigma": 3}"#).unwrap_err();
        assert!(err.to_string().contains("sigma"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn both_s_and_grid_in_file() {
        let mut c = base_config();
        c.s_grid = Some("0:1:2".into());
        assert!(c.apply(&Overrides::default()).is_err());
        let mut c = base_config();
        c.s_grid = Some("0:1:2".into());
        c.apply(&Overrides {
            s: Some(2.0),
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!((c.s, c.s_grid), (Some(2.0), None));
    }
}
