//! The work behind each subcommand. Each returns the process exit code for
//! a run that completed (0, or 1 when a reported check failed) and an error
//! otherwise.

use std::io::Write;
use std::path::{Path, PathBuf};

use ratetruth_core::maxent::{
    entropy_decomposition, local_equilibrium_identity, maxent_channel, truth_constrained_maxent, EntropyDecomposition,
    FeatureConstraint, LocalEquilibriumReport, NefSource, ThermoSystem,
};
use ratetruth_core::prob::normalize;
use ratetruth_core::scenarios::{reproduce, ScenarioId, ScenarioReport};
use ratetruth_core::solver::{
    mmi_iterate, rate_point_parametric, sweep_curve, ConstraintKernel, SweepMode, SweepPoint, TraceEntry,
};
use ratetruth_core::truth::{learn_truth_empirical, learn_truth_parametric, Normalization, SearchConfig, TruthFamily};
use ratetruth_core::{Channel, Distribution, Grid, JointDistribution, LabelSet, SemanticChannel, TruthSpec, Variant};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Problem;
use crate::error::{CliError, FieldContext, Result};
use crate::formats::{self, Table};
use crate::pgm;

/// Residual above which an identity check counts as failed.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

fn out_err(e: std::io::Error) -> CliError {
    CliError::io("<stdout>", e)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn constraint_unit(v: Variant) -> &'static str {
    match v {
        Variant::RateDistortion => "distortion",
        Variant::RateTruth => "nats",
        Variant::RateVerisimilitude => "bits",
    }
}

fn channel_table(xs: &[f64], labels: &LabelSet, ch: &Channel) -> Table {
    Table {
        xs: xs.to_vec(),
        labels: labels.names().to_vec(),
        rows: ch.rows().map(<[f64]>::to_vec).collect(),
    }
}

fn semchan_table(xs: &[f64], sc: &SemanticChannel) -> Table {
    Table {
        xs: xs.to_vec(),
        labels: sc.labels().names().to_vec(),
        rows: (0..sc.inputs()).map(|i| sc.row(i).to_vec()).collect(),
    }
}

#[derive(Serialize)]
struct ChannelDoc<'a> {
    inputs: usize,
    labels: usize,
    /// Row-major `P(y_j|x_i)`.
    data: &'a [f64],
}

impl<'a> ChannelDoc<'a> {
    fn new(ch: &'a Channel) -> Self {
        Self {
            inputs: ch.inputs(),
            labels: ch.labels(),
            data: ch.as_slice(),
        }
    }
}

#[derive(Serialize)]
struct ResultDoc<'a> {
    config: &'a Value,
    variant: Variant,
    s: f64,
    rate_bits: f64,
    parametric_rate_bits: f64,
    constraint_value: f64,
    constraint_unit: &'static str,
    iterations: usize,
    converged: bool,
    last_delta: f64,
    labels: &'a [String],
    marginal: &'a [f64],
    channel: ChannelDoc<'a>,
    trace: &'a [TraceEntry],
}

/// Solves at the configured `s`; writes `result.json` and `channel.csv`
/// into `out`.
pub fn solve(p: &Problem, out: Option<&Path>, w: &mut dyn Write) -> Result<i32> {
    let s = p.require_s()?;
    let kernel = ConstraintKernel::build(p.variant, s, p.constraint(), &p.prior)?;
    let r = mmi_iterate(&p.prior, &kernel, &p.opts)?;
    let param = rate_point_parametric(&p.prior, &kernel, &r)?;

    if let Some(dir) = out {
        ensure_dir(dir)?;
        let doc = ResultDoc {
            config: &p.echo,
            variant: p.variant,
            s,
            rate_bits: r.rate_bits.0,
            parametric_rate_bits: param.rate_bits.0,
            constraint_value: r.constraint_value,
            constraint_unit: constraint_unit(p.variant),
            iterations: r.iterations,
            converged: r.converged,
            last_delta: r.last_delta,
            labels: p.labels.names(),
            marginal: r.label_marginal.probs(),
            channel: ChannelDoc::new(&r.channel),
            trace: &r.trace,
        };
        formats::write_json(&dir.join("result.json"), &doc)?;
        formats::write_table(
            &dir.join("channel.csv"),
            Some(&p.echo),
            &channel_table(p.grid.points(), &p.labels, &r.channel),
        )?;
    }

    (|| -> std::io::Result<()> {
        writeln!(w, "variant {}  s {}", p.variant, s)?;
        writeln!(w, "rate {:.9} bits  (parametric {:.9})", r.rate_bits.0, param.rate_bits.0)?;
        writeln!(w, "constraint {:.9} {}", r.constraint_value, constraint_unit(p.variant))?;
        writeln!(w, "iterations {}  converged {}", r.iterations, r.converged)?;
        for (name, q) in p.labels.names().iter().zip(r.label_marginal.probs()) {
            writeln!(w, "  P({name}) = {q:.9}")?;
        }
        Ok(())
    })()
    .map_err(out_err)?;
    if !r.converged {
        eprintln!("warning: max_iter {} reached before convergence", p.opts.max_iter);
        return Ok(1);
    }
    Ok(0)
}

/// The `s` values a sweep runs over: the configured grid, or the single `s`.
fn sweep_values(p: &Problem) -> Result<Vec<f64>> {
    match (&p.s_values, p.s) {
        (Some(v), _) => Ok(v.clone()),
        (None, Some(s)) => Ok(vec![s]),
        (None, None) => Err(CliError::config("s_grid", "required (config `s_grid`/`s` or `--s-grid`/`--s`)")),
    }
}

/// Cold-start points spread over `jobs` threads; the output order follows
/// `s_values` whatever the scheduling.
fn cold_sweep_parallel(p: &Problem, s_values: &[f64], jobs: usize) -> Vec<SweepPoint> {
    let src = p.constraint();
    let jobs = jobs.clamp(1, s_values.len().max(1));
    let mut slots: Vec<Option<SweepPoint>> = (0..s_values.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|t| {
                scope.spawn(move || {
                    (t..s_values.len())
                        .step_by(jobs)
                        .map(|i| {
                            let pt = sweep_curve(&p.prior, p.variant, src, &s_values[i..=i], &p.opts, SweepMode::ColdStart);
                            (i, pt.into_iter().next().expect("one point per s"))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, pt) in h.join().expect("sweep worker panicked") {
                slots[i] = Some(pt);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every point solved")).collect()
}

/// Runs a rate curve; writes `curve.csv` into `out`, or prints it.
pub fn sweep(p: &Problem, mode: SweepMode, jobs: usize, out: Option<&Path>, w: &mut dyn Write) -> Result<i32> {
    let s_values = sweep_values(p)?;
    let points = match mode {
        SweepMode::WarmStart => {
            if jobs > 1 {
                eprintln!("note: warm-start sweeps run sequentially; --jobs {jobs} ignored (use --cold to parallelize)");
            }
            sweep_curve(&p.prior, p.variant, p.constraint(), &s_values, &p.opts, mode)
        }
        SweepMode::ColdStart => cold_sweep_parallel(p, &s_values, jobs),
    };
    let mut echo = p.echo.clone();
    echo["sweep_mode"] = json!(match mode {
        SweepMode::WarmStart => "warm",
        SweepMode::ColdStart => "cold",
    });
    echo["s_values"] = json!(s_values);

    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            formats::write_curve(&dir.join("curve.csv"), Some(&echo), &points)?;
            for pt in &points {
                match &pt.outcome {
                    Ok(r) => writeln!(
                        w,
                        "s {:<12} rate {:.9} bits  constraint {:.9}  converged {}",
                        pt.s, r.rate_bits.0, r.constraint_value, r.converged
                    ),
                    Err(e) => writeln!(w, "s {:<12} failed: {e}", pt.s),
                }
                .map_err(out_err)?;
            }
        }
        None => w
            .write_all(formats::curve_csv(Some(&echo), &points).as_bytes())
            .map_err(out_err)?,
    }
    for pt in &points {
        if let Err(e) = &pt.outcome {
            eprintln!("warning: s = {}: {e}", pt.s);
        }
    }
    let all_ok = points.iter().all(|pt| pt.outcome.as_ref().is_ok_and(|r| r.converged));
    Ok(if all_ok { 0 } else { 1 })
}

/// Parses `rise`, `fall` or `bump:POWER`.
pub fn parse_family(s: &str) -> Result<TruthFamily> {
    match s.trim() {
        "rise" => Ok(TruthFamily::LogisticRise),
        "fall" => Ok(TruthFamily::LogisticFall),
        other => other
            .strip_prefix("bump:")
            .and_then(|p| p.parse::<u32>().ok())
            .filter(|p| *p >= 1)
            .map(|power| TruthFamily::BumpComplementPow { power })
            .ok_or_else(|| CliError::config("fit", format!("`{other}` is not rise, fall or bump:POWER"))),
    }
}

#[derive(Serialize)]
struct FitDoc {
    label: String,
    spec: TruthSpec,
    objective_bits: f64,
    at_bound: bool,
}

/// Options of `learn-truth`.
#[derive(Debug, Clone)]
pub struct LearnOptions {
    pub joint: PathBuf,
    pub normalization: Normalization,
    /// One family per label, or one for all labels.
    pub fit: Vec<TruthFamily>,
}

/// Learns truth functions from a joint CSV; writes `truth.csv` (and
/// `fit.json` when families are given) into `out`, or prints the table.
pub fn learn_truth(opts: &LearnOptions, out: Option<&Path>, w: &mut dyn Write) -> Result<i32> {
    let path = &opts.joint;
    let table = formats::read_table(path)?;
    let (m, n) = (table.xs.len(), table.labels.len());
    let weights = normalize(&table.row_major()).map_err(|e| CliError::format(path, e))?;
    let joint = JointDistribution::new(m, n, weights.into_vec()).map_err(|e| CliError::format(path, e))?;
    let labels = LabelSet::new(table.labels.clone()).map_err(|e| CliError::format(path, e))?;
    let grid = Grid::new(table.xs.clone()).map_err(|e| CliError::format(path, e))?;
    let sc = learn_truth_empirical(&joint, labels, opts.normalization)?;

    let families: Vec<TruthFamily> = match opts.fit.len() {
        0 => Vec::new(),
        1 => vec![opts.fit[0]; n],
        k if k == n => opts.fit.clone(),
        k => return Err(CliError::config("fit", format!("{k} families for {n} labels"))),
    };
    let prior = joint.x_marginal();
    let mut fits = Vec::new();
    for (j, family) in families.iter().enumerate() {
        let column: Vec<f64> = (0..m).map(|i| joint.get(i, j)).collect();
        let sampling = normalize(&column)?;
        let fit = learn_truth_parametric(&sampling, &prior, &grid, *family, &SearchConfig::for_family(*family, &grid))?;
        fits.push(FitDoc {
            label: table.labels[j].clone(),
            spec: fit.spec,
            objective_bits: fit.objective.0,
            at_bound: fit.at_bound,
        });
    }

    let echo = json!({
        "command": "learn-truth",
        "joint": path,
        "normalization": opts.normalization,
        "fit": opts.fit,
    });
    let truth = semchan_table(&table.xs, &sc);
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            formats::write_table(&dir.join("truth.csv"), Some(&echo), &truth)?;
            if !fits.is_empty() {
                formats::write_json(&dir.join("fit.json"), &json!({ "config": echo, "fits": fits }))?;
            }
            writeln!(w, "learned {n} truth functions on {m} points").map_err(out_err)?;
        }
        None => w
            .write_all(formats::table_csv(Some(&echo), &truth).as_bytes())
            .map_err(out_err)?,
    }
    for f in &fits {
        writeln!(
            w,
            "fit {}: {}  objective {:.9} bits{}",
            f.label,
            serde_json::to_string(&f.spec).expect("spec serializes"),
            f.objective_bits,
            if f.at_bound { "  (at a search bound)" } else { "" }
        )
        .map_err(out_err)?;
    }
    Ok(0)
}

/// One feature of a `maxent --features` file.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    /// `f(x_i, y_j)`, one row per grid point. `null` stands for `-inf`.
    pub feature: Vec<Vec<Option<f64>>>,
    pub bound: f64,
    pub multiplier: f64,
}

fn load_features(path: &Path, m: usize, n: usize) -> Result<Vec<FeatureConstraint>> {
    let specs: Vec<FeatureSpec> = formats::read_json(path)?;
    specs
        .iter()
        .enumerate()
        .map(|(k, f)| {
            if f.feature.len() != m || f.feature.iter().any(|r| r.len() != n) {
                return Err(CliError::format(path, format!("feature {k} must be {m} x {n}")));
            }
            let data = f.feature.iter().flatten().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect();
            FeatureConstraint::new(m, n, data, f.bound, f.multiplier).map_err(|e| CliError::format(path, format!("feature {k}: {e}")))
        })
        .collect()
}

#[derive(Serialize)]
struct MaxentDoc<'a> {
    config: &'a Value,
    decomposition: EntropyDecomposition,
    residual: f64,
    channel: ChannelDoc<'a>,
}

/// Maximum-entropy channel and the entropy decomposition. Without a
/// features file the channel is `T^|s|` row-normalized, from the configured
/// truth functions (or `exp(−d)`).
pub fn maxent(p: &Problem, features: Option<&Path>, out: Option<&Path>, w: &mut dyn Write) -> Result<i32> {
    let (m, n) = (p.grid.len(), p.labels.len());
    let mut echo = p.echo.clone();
    let (channel, decomposition) = match features {
        Some(path) => {
            let feats = load_features(path, m, n)?;
            let ch = maxent_channel(&feats, m, n)?;
            let d = entropy_decomposition(&p.prior, &ch, NefSource::Features(&feats))?;
            echo["features"] = json!(path);
            for (k, f) in feats.iter().enumerate() {
                let e = f.expectation(&p.prior, &ch)?;
                writeln!(w, "feature {k}: E[f] = {e:.9}  bound {}  met {}", f.bound(), e >= f.bound()).map_err(out_err)?;
            }
            (ch, d)
        }
        None => {
            let s_abs = p.require_s()?.abs();
            let sc = p.semantic_channel()?;
            let ch = truth_constrained_maxent(&sc, s_abs)?;
            let d = entropy_decomposition(&p.prior, &ch, NefSource::Truth { semchan: &sc, s_abs })?;
            (ch, d)
        }
    };
    let residual = decomposition.residual();
    if let Some(dir) = out {
        ensure_dir(dir)?;
        formats::write_json(
            &dir.join("maxent.json"),
            &MaxentDoc {
                config: &echo,
                decomposition,
                residual,
                channel: ChannelDoc::new(&channel),
            },
        )?;
        formats::write_table(&dir.join("channel.csv"), Some(&echo), &channel_table(p.grid.points(), &p.labels, &channel))?;
    }
    (|| -> std::io::Result<()> {
        writeln!(w, "H(X,Y) {:.9} bits", decomposition.joint_entropy.0)?;
        writeln!(w, "H(X)   {:.9} bits", decomposition.input_entropy.0)?;
        writeln!(w, "H(Y)   {:.9} bits", decomposition.label_entropy.0)?;
        writeln!(w, "I(Y;X_theta) {:.9} bits", decomposition.semantic_rate.0)?;
        writeln!(w, "residual {residual:.3e}")
    })()
    .map_err(out_err)?;
    Ok(if residual < IDENTITY_TOLERANCE { 0 } else { 1 })
}

#[derive(Serialize)]
struct BoltzmannDoc<'a> {
    system: &'a ThermoSystem,
    report: &'a LocalEquilibriumReport,
}

/// Checks the local-equilibrium entropy decomposition for a system file.
pub fn boltzmann_check(path: &Path, out: Option<&Path>, w: &mut dyn Write) -> Result<i32> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let system: ThermoSystem = serde_json::from_str(&text).map_err(|e| CliError::config("system", e))?;
    system.validate().field("system")?;
    let report = local_equilibrium_identity(&system)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        formats::write_json(
            &dir.join("boltzmann.json"),
            &BoltzmannDoc {
                system: &system,
                report: &report,
            },
        )?;
    }
    (|| -> std::io::Result<()> {
        writeln!(w, "S/(kN)            {:.12} nats", report.entropy_per_particle)?;
        writeln!(w, "ln W              {:.12}", report.log_microstates)?;
        writeln!(w, "sum P(y) ln G_j   {:.12} nats", report.extreme_entropy)?;
        writeln!(w, "I(X;Y_theta)      {:.12} nats", report.semantic_mi)?;
        writeln!(w, "residual          {:.3e}", report.residual)
    })()
    .map_err(out_err)?;
    Ok(if report.residual < IDENTITY_TOLERANCE { 0 } else { 1 })
}

/// Settings of `reproduce`.
#[derive(Debug, Clone, Copy)]
pub struct ReproduceOptions {
    pub scenario: ScenarioId,
    pub variant: Variant,
    pub s: f64,
    pub tol: f64,
    pub max_iter: usize,
}

/// Runs a worked example and prints its comparison table; exits 1 when a
/// hard row fails.
pub fn reproduce_scenario(o: &ReproduceOptions, out: Option<&Path>, w: &mut dyn Write) -> Result<i32> {
    o.variant.check_s(o.s).field("s")?;
    if let ScenarioId::Example1 { grid_max } = o.scenario {
        if grid_max < 1 {
            return Err(CliError::config("grid_max", "must be at least 1"));
        }
    }
    if !(o.tol > 0.0 && o.tol.is_finite()) {
        return Err(CliError::config("tol", "must be positive"));
    }
    if o.max_iter == 0 {
        return Err(CliError::config("max_iter", "must be at least 1"));
    }
    let report: ScenarioReport = reproduce(o.scenario, o.variant, o.s, o.tol, o.max_iter)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        formats::write_json(&dir.join("report.json"), &report)?;
    }
    writeln!(w, "{report}").map_err(out_err)?;
    Ok(if report.passed() { 0 } else { 1 })
}

/// Grey-level histogram of a PGM image; writes `histogram.csv` into `out`,
/// or prints it.
pub fn ingest(path: &Path, out: Option<&Path>, w: &mut dyn Write) -> Result<i32> {
    let (hist, pixels): (Distribution, usize) = pgm::ingest_pgm(path)?;
    let echo = json!({ "command": "ingest-pgm", "image": path, "pixels": pixels });
    let xs: Vec<f64> = (0..256).map(f64::from).collect();
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            formats::write_distribution(&dir.join("histogram.csv"), Some(&echo), &xs, &hist)?;
            let used = hist.probs().iter().filter(|p| **p > 0.0).count();
            writeln!(w, "{pixels} pixels, {used} grey levels in use").map_err(out_err)?;
        }
        None => w
            .write_all(formats::distribution_csv(Some(&echo), &xs, &hist).as_bytes())
            .map_err(out_err)?,
    }
    Ok(0)
}
