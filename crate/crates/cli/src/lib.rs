//! Experiment driver behind the `mhl` binary.
//!
//! A JSON config selects a Musielak–Orlicz function, a dyadic martingale
//! ensemble, and a list of experiments; running it produces `report.json`
//! and `trials.csv` in an output directory. Reports carry no timestamps and
//! all iteration orders are fixed, so a config run twice with the same seed
//! yields byte-identical outputs.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mhl_core::atomic::{decompose, validate_atom_at};
use mhl_core::filtration::{Filtration, Martingale};
use mhl_core::musielak::{weak_norm, MOFunction, MOFunctionSpec, TGrid};
use mhl_core::operators::{space_norm, SpaceKind};
use mhl_core::verify::{
    convergence_experiments, inequality_row_catalog, space_for_operator,
    verify_atomic_equivalence, verify_martingale_inequalities, verify_sublinear_boundedness,
    Ensemble,
};

pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Top-level run configuration (see `mhl schema` for a worked example).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Base seed; overridden by `MHL_SEED` and then by `--seed`.
    #[serde(default)]
    pub seed: u64,
    pub phi: MOFunctionSpec,
    pub ensemble: EnsembleSpec,
    /// Evaluation grid for the non-separable `t` suprema.
    #[serde(default)]
    pub t_grid: Option<GridSpec>,
    /// Filtrations above this regularity make the lookahead constructions
    /// and the predictable-vs-plain comparisons inapplicable.
    #[serde(default = "default_budget")]
    pub regularity_budget: f64,
    /// Exponents whose `A_q` constants are measured as inequality gates;
    /// every entry must satisfy `q ≥ 1`.
    #[serde(default = "default_aq_gates")]
    pub aq_gates: Vec<f64>,
    pub experiments: Vec<ExperimentSpec>,
}

fn default_budget() -> f64 {
    mhl_core::atomic::DEFAULT_REGULARITY_BOUND
}

fn default_aq_gates() -> Vec<f64> {
    vec![1.0, 2.0, 8.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub depths: Vec<usize>,
    pub trials_per_depth: usize,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// All five space norms plus the weak norm of the terminal value.
    Norms,
    /// Canonical decomposition and exact reconstruction for one kind.
    Decompose { kind: SpaceKind },
    /// Vanishing/size validation of every canonical atom at exponent `q`
    /// (`null` or absent means `∞`).
    Validate {
        kind: SpaceKind,
        #[serde(default)]
        q: Option<f64>,
    },
    /// Space norm vs. decomposition norm with the forward assertion.
    Equivalence { kind: SpaceKind },
    /// Sublinearity and atom-level boundedness of the three operators.
    Boundedness,
    /// The gated martingale-inequality web.
    Inequalities,
    /// Weak-space convergence phenomena on the inverse-power sample.
    Convergence {
        #[serde(default = "default_conv_depth")]
        depth: usize,
        #[serde(default = "default_conv_p")]
        p: f64,
        #[serde(default = "default_tails")]
        tail_thresholds: Vec<f64>,
        #[serde(default = "default_caps")]
        caps: Vec<f64>,
        #[serde(default = "default_clip_halvings")]
        clip_halvings: usize,
        #[serde(default = "default_norm_trials")]
        normalization_trials: usize,
    },
}

fn default_conv_depth() -> usize {
    12
}
fn default_conv_p() -> f64 {
    1.0
}
fn default_tails() -> Vec<f64> {
    vec![1.0, 10.0, 100.0]
}
fn default_caps() -> Vec<f64> {
    vec![0.5, 0.1, 0.01]
}
fn default_clip_halvings() -> usize {
    20
}
fn default_norm_trials() -> usize {
    100
}

impl ExperimentSpec {
    pub fn name(&self) -> String {
        match self {
            ExperimentSpec::Norms => "norms".into(),
            ExperimentSpec::Decompose { kind } => format!("decompose_{}", kind.label()),
            ExperimentSpec::Validate { kind, q } => match q {
                Some(q) => format!("validate_{}_q{q}", kind.label()),
                None => format!("validate_{}_qinf", kind.label()),
            },
            ExperimentSpec::Equivalence { kind } => format!("equivalence_{}", kind.label()),
            ExperimentSpec::Boundedness => "boundedness".into(),
            ExperimentSpec::Inequalities => "inequalities".into(),
            ExperimentSpec::Convergence { .. } => "convergence".into(),
        }
    }
}

// ---------------------------------------------------------------------------
// Seed resolution
// ---------------------------------------------------------------------------

/// Where the effective seed came from, in precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    Env,
    Config,
}

/// `--seed` beats `MHL_SEED` beats the config file.
pub fn resolve_seed(flag: Option<u64>, env: Option<u64>, config: u64) -> (u64, SeedSource) {
    if let Some(s) = flag {
        (s, SeedSource::Flag)
    } else if let Some(s) = env {
        (s, SeedSource::Env)
    } else {
        (config, SeedSource::Config)
    }
}

/// Reads and parses `MHL_SEED` (an error if set to a non-integer).
pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var("MHL_SEED") {
        Ok(v) => {
            let s = v
                .trim()
                .parse::<u64>()
                .with_context(|| format!("MHL_SEED must be an unsigned integer, got {v:?}"))?;
            Ok(Some(s))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context("MHL_SEED is not valid unicode"),
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub pass: bool,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub phi: String,
    pub ensemble: EnsembleSpec,
    pub regularity_budget: f64,
    pub experiments: Vec<ExperimentReport>,
    pub pass: bool,
}

/// One long-format row of `trials.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct CsvRow {
    pub experiment: String,
    pub kind: String,
    pub depth: Option<usize>,
    pub trial: Option<usize>,
    pub metric: String,
    pub value: f64,
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

fn grid_from(spec: &Option<GridSpec>) -> Result<TGrid> {
    match spec {
        None => Ok(TGrid::default()),
        Some(g) => TGrid::log_uniform(g.lo, g.hi, g.points).map_err(Into::into),
    }
}

fn validate_config(config: &Config) -> Result<()> {
    if config.experiments.is_empty() {
        bail!("config lists no experiments");
    }
    if config.ensemble.depths.is_empty() || config.ensemble.trials_per_depth == 0 {
        bail!("ensemble needs at least one depth and one trial per depth");
    }
    for &d in &config.ensemble.depths {
        if d == 0 || d > 16 {
            bail!("ensemble depths must lie in 1..=16, got {d}");
        }
    }
    if !(config.regularity_budget.is_finite() && config.regularity_budget >= 1.0) {
        bail!(
            "regularity budget must be finite and at least 1, got {}",
            config.regularity_budget
        );
    }
    for &q in &config.aq_gates {
        if !q.is_finite() || q < 1.0 {
            bail!("aq_gates entries must satisfy q ≥ 1, got {q}");
        }
    }
    Ok(())
}

struct ExperimentOutput {
    report: ExperimentReport,
    rows: Vec<CsvRow>,
}

/// The depth-1 sign martingale (f_1 = (1, −1)): every operator value is 1 at
/// every point, so for `φ(x, t) = t^p` all six norms equal 1 exactly. Skipped
/// when `φ` carries per-point data sized for other spaces.
fn reference_depth1(
    phi: &MOFunction,
    spec: &MOFunctionSpec,
) -> Result<Option<serde_json::Value>> {
    let filt = Filtration::dyadic(1)?;
    if phi.validate_on(filt.space()).is_err() {
        return Ok(None);
    }
    let f = Martingale::from_terminal(filt.clone(), &[1.0, -1.0])?;
    let mut norms = std::collections::BTreeMap::new();
    for kind in SpaceKind::ALL {
        norms.insert(kind.label().to_string(), space_norm(kind, phi, &f)?);
    }
    norms.insert(
        "terminal".into(),
        weak_norm(phi, filt.space(), &f.terminal_values())?,
    );
    // The all-ones identity is exact only when φ(·, 1) integrates to 1 over
    // a probability space, which the pure power kind guarantees.
    let asserted = matches!(spec, MOFunctionSpec::Power { .. });
    let pass = !asserted || norms.values().all(|v| (v - 1.0).abs() <= 1e-9);
    Ok(Some(serde_json::json!({
        "terminal_values": [1.0, -1.0],
        "norms": norms,
        "asserted": asserted,
        "pass": pass,
    })))
}

fn run_norms(
    phi: &MOFunction,
    phi_label: &str,
    phi_spec: &MOFunctionSpec,
    ensemble: &Ensemble,
) -> Result<ExperimentOutput> {
    #[derive(Serialize)]
    struct NormRow {
        depth: usize,
        trial: usize,
        norms: std::collections::BTreeMap<String, f64>,
    }
    let mut rows = Vec::new();
    let mut detail_rows = Vec::new();
    let mut all_finite = true;
    for (fi, filt) in ensemble.filtrations().iter().enumerate() {
        for trial in 0..ensemble.trials_per_filtration() {
            let f = ensemble.martingale(fi, trial);
            let mut norms = std::collections::BTreeMap::new();
            for kind in SpaceKind::ALL {
                let v = space_norm(kind, phi, &f)?;
                all_finite &= v.is_finite();
                norms.insert(kind.label().to_string(), v);
                rows.push(CsvRow {
                    experiment: "norms".into(),
                    kind: kind.label().into(),
                    depth: Some(filt.depth()),
                    trial: Some(trial),
                    metric: "space_norm".into(),
                    value: v,
                });
            }
            let term = weak_norm(phi, filt.space(), &f.terminal_values())?;
            all_finite &= term.is_finite();
            norms.insert("terminal".into(), term);
            rows.push(CsvRow {
                experiment: "norms".into(),
                kind: "terminal".into(),
                depth: Some(filt.depth()),
                trial: Some(trial),
                metric: "weak_norm".into(),
                value: term,
            });
            detail_rows.push(NormRow {
                depth: filt.depth(),
                trial,
                norms,
            });
        }
    }
    let reference = reference_depth1(phi, phi_spec)?;
    let reference_pass = reference
        .as_ref()
        .and_then(|r| r.get("pass"))
        .and_then(|v| v.as_bool())
        .unwrap_or(true);
    let pass = all_finite && reference_pass;
    let details = serde_json::json!({
        "phi": phi_label,
        "trials": detail_rows.len(),
        "rows": serde_json::to_value(&detail_rows)?,
        "all_finite": all_finite,
        "reference_depth1": reference,
    });
    Ok(ExperimentOutput {
        report: ExperimentReport {
            name: "norms".into(),
            pass,
            details,
        },
        rows,
    })
}

fn run_decompose(
    kind: SpaceKind,
    phi: &MOFunction,
    ensemble: &Ensemble,
) -> Result<ExperimentOutput> {
    let name = format!("decompose_{}", kind.label());
    let mut rows = Vec::new();
    let mut worst_rel = 0.0_f64;
    let mut trials = 0usize;
    for (fi, filt) in ensemble.filtrations().iter().enumerate() {
        for trial in 0..ensemble.trials_per_filtration() {
            let f = ensemble.martingale(fi, trial);
            let d = decompose(kind, &f, phi, f64::INFINITY)?;
            let rec = d.reconstruct(filt, None)?;
            let scale = f.max_abs().max(1e-300);
            let mut err = 0.0_f64;
            for n in 0..=filt.depth() {
                for i in 0..filt.num_points() {
                    err = err.max((rec.value(n, i) - f.value(n, i)).abs());
                }
            }
            let rel = err / scale;
            worst_rel = worst_rel.max(rel);
            trials += 1;
            rows.push(CsvRow {
                experiment: name.clone(),
                kind: kind.label().into(),
                depth: Some(filt.depth()),
                trial: Some(trial),
                metric: "reconstruction_relative_error".into(),
                value: rel,
            });
        }
    }
    let pass = worst_rel <= 1e-9;
    let details = serde_json::json!({
        "kind": kind.label(),
        "trials": trials,
        "worst_relative_error": worst_rel,
        "tolerance": 1e-9,
    });
    Ok(ExperimentOutput {
        report: ExperimentReport { name, pass, details },
        rows,
    })
}

fn run_validate(
    kind: SpaceKind,
    q: Option<f64>,
    phi: &MOFunction,
    ensemble: &Ensemble,
    grid: &TGrid,
) -> Result<ExperimentOutput> {
    let q_eff = q.unwrap_or(f64::INFINITY);
    let name = match q {
        Some(q) => format!("validate_{}_q{q}", kind.label()),
        None => format!("validate_{}_qinf", kind.label()),
    };
    let mut rows = Vec::new();
    let mut atoms = 0usize;
    let mut failures = 0usize;
    for (fi, filt) in ensemble.filtrations().iter().enumerate() {
        for trial in 0..ensemble.trials_per_filtration() {
            let f = ensemble.martingale(fi, trial);
            let d = decompose(kind, &f, phi, q_eff)?;
            let mut trial_failures = 0usize;
            for e in d.entries() {
                if e.mu == 0.0 {
                    continue;
                }
                atoms += 1;
                let rep = validate_atom_at(&e.atom, phi, q_eff, grid)?;
                if !rep.pass {
                    trial_failures += 1;
                }
            }
            failures += trial_failures;
            rows.push(CsvRow {
                experiment: name.clone(),
                kind: kind.label().into(),
                depth: Some(filt.depth()),
                trial: Some(trial),
                metric: "atom_failures".into(),
                value: trial_failures as f64,
            });
        }
    }
    let details = serde_json::json!({
        "kind": kind.label(),
        "q": q,
        "atoms": atoms,
        "failures": failures,
    });
    Ok(ExperimentOutput {
        report: ExperimentReport {
            name,
            pass: failures == 0,
            details,
        },
        rows,
    })
}

fn run_equivalence(
    kind: SpaceKind,
    phi: &MOFunction,
    phi_label: &str,
    ensemble: &Ensemble,
    grid: &TGrid,
) -> Result<ExperimentOutput> {
    let rep = verify_atomic_equivalence(kind, phi, phi_label, ensemble, grid)?;
    let name = format!("equivalence_{}", kind.label());
    let rows = rep
        .rows
        .iter()
        .flat_map(|r| {
            [
                CsvRow {
                    experiment: name.clone(),
                    kind: kind.label().into(),
                    depth: Some(r.depth),
                    trial: Some(r.trial),
                    metric: "space_norm".into(),
                    value: r.space_norm,
                },
                CsvRow {
                    experiment: name.clone(),
                    kind: kind.label().into(),
                    depth: Some(r.depth),
                    trial: Some(r.trial),
                    metric: "decomposition_norm".into(),
                    value: r.decomposition_norm,
                },
            ]
        })
        .collect();
    let pass = rep.pass;
    Ok(ExperimentOutput {
        report: ExperimentReport {
            name,
            pass,
            details: serde_json::to_value(&rep)?,
        },
        rows,
    })
}

fn run_boundedness(
    phi: &MOFunction,
    phi_label: &str,
    ensemble: &Ensemble,
    grid: &TGrid,
) -> Result<ExperimentOutput> {
    use mhl_core::operators::OperatorKind;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut pass = true;
    for op in [
        OperatorKind::Maximal,
        OperatorKind::Square,
        OperatorKind::ConditionalSquare,
    ] {
        let source = space_for_operator(op);
        let rep = verify_sublinear_boundedness(op, phi, phi_label, source, ensemble, grid)?;
        pass &= rep.pass;
        rows.push(CsvRow {
            experiment: "boundedness".into(),
            kind: op.label().into(),
            depth: None,
            trial: None,
            metric: "atom_norm_worst".into(),
            value: rep.atom_norm_worst,
        });
        rows.push(CsvRow {
            experiment: "boundedness".into(),
            kind: op.label().into(),
            depth: None,
            trial: None,
            metric: "operator_ratio_worst".into(),
            value: rep.operator_ratio_worst,
        });
        reports.push(rep);
    }
    Ok(ExperimentOutput {
        report: ExperimentReport {
            name: "boundedness".into(),
            pass,
            details: serde_json::to_value(&reports)?,
        },
        rows,
    })
}

fn run_inequalities(
    phi: &MOFunction,
    phi_label: &str,
    ensemble: &Ensemble,
    grid: &TGrid,
    budget: f64,
    aq_gates: &[f64],
) -> Result<ExperimentOutput> {
    let rep = verify_martingale_inequalities(phi, phi_label, ensemble, grid, budget, aq_gates)?;
    let mut rows = Vec::new();
    for r in &rep.rows {
        rows.push(CsvRow {
            experiment: "inequalities".into(),
            kind: format!("{}/{}", r.numerator, r.denominator),
            depth: None,
            trial: None,
            metric: r.name.clone(),
            value: r.max_ratio,
        });
    }
    for r in &rep.strong_rows {
        rows.push(CsvRow {
            experiment: "inequalities".into(),
            kind: "strong".into(),
            depth: None,
            trial: None,
            metric: r.name.clone(),
            value: r.max_ratio,
        });
    }
    rows.push(CsvRow {
        experiment: "inequalities".into(),
        kind: "energy".into(),
        depth: None,
        trial: None,
        metric: "orthogonality_worst".into(),
        value: rep.orthogonality_worst,
    });
    let pass = rep.pass;
    Ok(ExperimentOutput {
        report: ExperimentReport {
            name: "inequalities".into(),
            pass,
            details: serde_json::to_value(&rep)?,
        },
        rows,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_convergence(
    depth: usize,
    p: f64,
    tails: &[f64],
    caps: &[f64],
    clip_halvings: usize,
    normalization_trials: usize,
    seed: u64,
) -> Result<ExperimentOutput> {
    let rep =
        convergence_experiments(depth, p, tails, caps, clip_halvings, normalization_trials, seed)?;
    let mut rows = vec![CsvRow {
        experiment: "convergence".into(),
        kind: "base".into(),
        depth: Some(depth),
        trial: None,
        metric: "weak_norm".into(),
        value: rep.base_norm,
    }];
    for r in &rep.tail_rows {
        rows.push(CsvRow {
            experiment: "convergence".into(),
            kind: "tail".into(),
            depth: Some(depth),
            trial: None,
            metric: format!("tail_norm_above_{}", r.threshold),
            value: r.norm,
        });
    }
    for r in &rep.cap_rows {
        rows.push(CsvRow {
            experiment: "convergence".into(),
            kind: "cap".into(),
            depth: Some(depth),
            trial: None,
            metric: format!("cap_norm_below_{}", r.cap),
            value: r.norm,
        });
    }
    for (j, r) in rep.clip_rows.iter().enumerate() {
        rows.push(CsvRow {
            experiment: "convergence".into(),
            kind: "clip".into(),
            depth: Some(depth),
            trial: Some(j),
            metric: "clip_deficit_norm".into(),
            value: r.norm,
        });
    }
    for r in &rep.scalar_rows {
        rows.push(CsvRow {
            experiment: "convergence".into(),
            kind: "scalar".into(),
            depth: Some(depth),
            trial: None,
            metric: format!("scalar_norm_times_{}", r.c),
            value: r.norm,
        });
        rows.push(CsvRow {
            experiment: "convergence".into(),
            kind: "scalar".into(),
            depth: Some(depth),
            trial: None,
            metric: format!("scalar_modular_times_{}", r.c),
            value: r.rho,
        });
    }
    for r in &rep.normalization_rows {
        rows.push(CsvRow {
            experiment: "convergence".into(),
            kind: "normalization".into(),
            depth: None,
            trial: None,
            metric: format!("worst_deviation[{}]", r.phi),
            value: r.worst_deviation,
        });
    }
    let pass = rep.pass;
    Ok(ExperimentOutput {
        report: ExperimentReport {
            name: "convergence".into(),
            pass,
            details: serde_json::to_value(&rep)?,
        },
        rows,
    })
}

/// A finished run: the report plus the long-format trial rows.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub rows: Vec<CsvRow>,
}

/// Runs a parsed config with an already-resolved seed; pure apart from the
/// PRNG streams derived from the seed.
pub fn run_config(config: &Config, seed: u64, seed_source: SeedSource) -> Result<RunOutput> {
    validate_config(config)?;
    let phi = config.phi.build()?;
    let phi_label = config.phi.label();
    let grid = grid_from(&config.t_grid)?;
    let ensemble = Ensemble::dyadic(
        &config.ensemble.depths,
        config.ensemble.trials_per_depth,
        seed,
        config.ensemble.scale,
    )?;

    let mut experiments = Vec::new();
    let mut all_rows = Vec::new();
    for spec in &config.experiments {
        let out = match spec {
            ExperimentSpec::Norms => run_norms(&phi, &phi_label, &config.phi, &ensemble)?,
            ExperimentSpec::Decompose { kind } => run_decompose(*kind, &phi, &ensemble)?,
            ExperimentSpec::Validate { kind, q } => {
                run_validate(*kind, *q, &phi, &ensemble, &grid)?
            }
            ExperimentSpec::Equivalence { kind } => {
                run_equivalence(*kind, &phi, &phi_label, &ensemble, &grid)?
            }
            ExperimentSpec::Boundedness => run_boundedness(&phi, &phi_label, &ensemble, &grid)?,
            ExperimentSpec::Inequalities => run_inequalities(
                &phi,
                &phi_label,
                &ensemble,
                &grid,
                config.regularity_budget,
                &config.aq_gates,
            )?,
            ExperimentSpec::Convergence {
                depth,
                p,
                tail_thresholds,
                caps,
                clip_halvings,
                normalization_trials,
            } => run_convergence(
                *depth,
                *p,
                tail_thresholds,
                caps,
                *clip_halvings,
                *normalization_trials,
                seed,
            )?,
        };
        experiments.push(out.report);
        all_rows.extend(out.rows);
    }

    let pass = experiments.iter().all(|e| e.pass);
    let report = Report {
        schema_version: SCHEMA_VERSION,
        seed,
        seed_source,
        phi: phi_label,
        ensemble: config.ensemble.clone(),
        regularity_budget: config.regularity_budget,
        experiments,
        pass,
    };
    Ok(RunOutput {
        report,
        rows: all_rows,
    })
}

/// Serializes `report.json` and `trials.csv` into `out_dir`.
pub fn write_outputs(out: &RunOutput, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let json = serde_json::to_string_pretty(&out.report)?;
    fs::write(out_dir.join("report.json"), json + "\n")?;
    let mut w = csv::Writer::from_path(out_dir.join("trials.csv"))?;
    for row in &out.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a config file, resolving seed precedence, runs it, and writes the
/// outputs. Returns the report (its `pass` decides the exit code).
pub fn run_from_path(
    config_path: &Path,
    out_dir: &Path,
    flag_seed: Option<u64>,
) -> Result<Report> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let config: Config =
        serde_json::from_str(&text).context("config file does not match the expected schema")?;
    let env_seed = seed_from_env()?;
    let (seed, source) = resolve_seed(flag_seed, env_seed, config.seed);
    let out = run_config(&config, seed, source)?;
    write_outputs(&out, out_dir)?;
    Ok(out.report)
}

// ---------------------------------------------------------------------------
// Describe / schema
// ---------------------------------------------------------------------------

/// Human-readable summary of a config (what `mhl describe --config` prints).
pub fn describe_config(config: &Config) -> String {
    let mut s = String::new();
    s.push_str(&format!("phi: {}\n", config.phi.label()));
    s.push_str(&format!(
        "ensemble: depths {:?}, {} trials per depth, scale {}\n",
        config.ensemble.depths, config.ensemble.trials_per_depth, config.ensemble.scale
    ));
    s.push_str(&format!(
        "seed: {} (config; MHL_SEED and --seed take precedence)\n",
        config.seed
    ));
    s.push_str(&format!(
        "regularity budget: {}\n",
        config.regularity_budget
    ));
    s.push_str(&format!("A_q gates measured at q = {:?}\n", config.aq_gates));
    if config.experiments.is_empty() {
        s.push_str("experiments: none — nothing to run\n");
        return s;
    }
    s.push_str("experiments:\n");
    for e in &config.experiments {
        s.push_str(&format!("  - {}\n", e.name()));
        match e {
            ExperimentSpec::Decompose { kind } | ExperimentSpec::Equivalence { kind } => {
                s.push_str(&format!(
                    "      thresholds 2^k from one below the smallest nonzero level of the \
                     {} function up to its maximum; coefficients scale with the threshold\n",
                    kind.label()
                ));
            }
            ExperimentSpec::Inequalities => {
                for (name, num, den, hypothesis) in inequality_row_catalog() {
                    s.push_str(&format!(
                        "      {name} ({num} vs {den}; gate: {hypothesis})\n"
                    ));
                }
            }
            ExperimentSpec::Convergence {
                depth,
                p,
                tail_thresholds,
                caps,
                clip_halvings,
                ..
            } => {
                s.push_str(&format!(
                    "      inverse-power sample at depth {depth}, exponent {p}; tails above \
                     {tail_thresholds:?} keep norm 1, caps {caps:?} and {clip_halvings} \
                     clip halvings converge\n"
                ));
            }
            _ => {}
        }
    }
    s
}

/// List of available experiments (what `mhl describe` prints with no config).
pub fn describe_general() -> String {
    let mut s = String::new();
    s.push_str("experiments:\n");
    s.push_str("  norms         five space norms plus the terminal weak norm per trial\n");
    s.push_str("  decompose     canonical atomic decomposition with exact reconstruction\n");
    s.push_str("  validate      vanishing and size checks for every canonical atom\n");
    s.push_str("  equivalence   decomposition norm vs. space norm with forward assertion\n");
    s.push_str("  boundedness   sublinearity and atom-level operator bounds\n");
    s.push_str("  inequalities  the gated norm-comparison web with measured constants\n");
    s.push_str("  convergence   weak-space convergence phenomena on an inverse-power sample\n");
    s.push_str("\nspace kinds: conditional_square (s), square (S), maximal (M),\n");
    s.push_str("             predictable_maximal (P), predictable_square (Q)\n");
    s.push_str("\nphi kinds: power, orlicz, weighted, variable (see `mhl schema`)\n");
    s.push_str("seed precedence: --seed, then MHL_SEED, then the config file\n");
    s
}

/// A complete example config, printed by `mhl schema`; kept small enough to
/// run in seconds.
pub fn example_config() -> Config {
    Config {
        seed: 7,
        phi: MOFunctionSpec::Power { p: 0.8 },
        ensemble: EnsembleSpec {
            depths: vec![3, 4, 5],
            trials_per_depth: 5,
            scale: 1.0,
        },
        t_grid: Some(GridSpec {
            lo: 1e-4,
            hi: 1e4,
            points: 64,
        }),
        regularity_budget: default_budget(),
        aq_gates: default_aq_gates(),
        experiments: vec![
            ExperimentSpec::Norms,
            ExperimentSpec::Decompose {
                kind: SpaceKind::ConditionalSquare,
            },
            ExperimentSpec::Validate {
                kind: SpaceKind::Square,
                q: None,
            },
            ExperimentSpec::Equivalence {
                kind: SpaceKind::PredictableMaximal,
            },
            ExperimentSpec::Boundedness,
            ExperimentSpec::Inequalities,
            ExperimentSpec::Convergence {
                depth: 8,
                p: 1.0,
                tail_thresholds: vec![1.0, 4.0],
                caps: vec![0.5, 0.05],
                clip_halvings: 12,
                normalization_trials: 10,
            },
        ],
    }
}
