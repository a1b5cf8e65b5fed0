//! One experiment per CLI command. Each takes a model space and a typed
//! parameter block and returns checks plus artifacts; `run` turns that into
//! files on disk and a manifest.

use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{classify, ConfigEcho, WallClock};
use super::{critical_limit_sweep, suite, Artifact, Check, Command, FieldSpec, Outcome, Overrides, RunConfig, RunError, RunManifest};
use crate::corpus::{normalize_density, positive_corpus, test_field_corpus};
use crate::entropy_flows::{
    condition_margin, convexity_inequality_margin, convexity_relation_margin, entropy_inequality, fast_diffusion_flow,
    fd_flow, log_slope, renyi_hessian_quadform, Family, FastDiffusionOptions, FiniteDimProblem, FlowSummary, GChoice,
};
use crate::error::{Error, Result};
use crate::gamma_calculus::{bochner_residual, cd_margin};
use crate::io::{CsvTable, LinePlot};
use crate::model_space::{ModelSpace, SpaceKind};
use crate::sobolev::{critical_exponent, extremal_field, lq_norm, sobolev_deficit};
use crate::variational::{
    dual_dimension, minimize_subcritical, pressure_transform, pressure_pde_residual, rigidity_scan, rigidity_threshold,
    MinimizeOptions, Nonlinearity, ScanEntry,
};

/// Runs a configured command, writes its artifacts and finally
/// `manifest.json` into the output directory.
pub fn run(config: &RunConfig, overrides: &Overrides) -> std::result::Result<RunManifest, RunError> {
    let mut config = config.clone();
    config.apply(overrides).map_err(|e| RunError::Config(e.to_string()))?;
    let command = config.command.ok_or_else(|| RunError::Config("missing key `command`".into()))?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let outcome = match execute(command, &config) {
        Ok(o) => o,
        Err(e) => match classify(&e) {
            Some(err) => return Err(err),
            None => Outcome {
                checks: vec![Check {
                    name: command.as_str().into(),
                    passed: false,
                    measured: f64::NAN,
                    tolerance: f64::NAN,
                    detail: e.to_string(),
                }],
                ..Default::default()
            },
        },
    };
    let wall_clock = overrides.timestamp.then(|| WallClock {
        started_unix_s: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        elapsed_s: clock.elapsed().as_secs_f64(),
    });
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        config: ConfigEcho::from(&config),
        wall_clock,
        passed: outcome.passed(),
        artifacts: outcome.artifacts.iter().map(|a| a.path.clone()).collect(),
        checks: outcome.checks,
        warnings: outcome.warnings,
    };
    write_outputs(&config.output_dir, &outcome.artifacts, &manifest).map_err(|e| RunError::Io(e.to_string()))?;
    Ok(manifest)
}

fn write_outputs(dir: &Path, artifacts: &[Artifact], manifest: &RunManifest) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for a in artifacts {
        let path = dir.join(&a.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, &a.contents)?;
    }
    fs::write(dir.join("manifest.json"), manifest.to_json())
}

fn execute(command: Command, config: &RunConfig) -> Result<Outcome> {
    if command == Command::FullSuite {
        let _: NoParams = config.params()?;
        return suite::full_suite(config.seed);
    }
    if command == Command::FlowFd {
        return flow_fd(&config.params()?, config.seed);
    }
    let space = config.build_space()?;
    let seed = config.seed;
    match command {
        Command::VerifyCd => verify_cd(&space, &config.params()?, seed),
        Command::Bochner => bochner(&space, &config.params()?),
        Command::SobolevDeficit => deficit(&space, &config.params()?, seed),
        Command::ExtremalSweep => extremal_sweep(&space, &config.params()?),
        Command::Minimize => minimize(&space, &config.params()?),
        Command::RigidityScan => rigidity(&space, &config.params()?),
        Command::CriticalLimit => critical_limit(&space, &config.params()?),
        Command::FlowFastDiffusion => fast_diffusion(&space, &config.params()?),
        Command::EntropyInequality => entropy(&space, &config.params()?, seed),
        Command::FullSuite | Command::FlowFd => unreachable!(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn positive_param(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("at `params.{name}`: must be positive and finite, got {x}")))
    }
}

fn nonempty(name: &str, len: usize) -> Result<()> {
    if len == 0 {
        Err(Error::InvalidConfig(format!("at `params.{name}`: must not be empty")))
    } else {
        Ok(())
    }
}

fn refine(space: &ModelSpace) -> Result<ModelSpace> {
    ModelSpace::build(space.kind(), space.d(), space.n(), 2 * space.resolution())
}

fn coarsen(space: &ModelSpace) -> Result<ModelSpace> {
    ModelSpace::build(space.kind(), space.d(), space.n(), space.resolution() / 2)
}

// ---------------------------------------------------------------- verify-cd

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyCdParams {
    /// Number of seeded test fields (ignored when `field` is given).
    pub corpus_size: usize,
    /// Certified bound on the extrapolated margin.
    pub tol: f64,
    pub field: Option<FieldSpec>,
}

impl Default for VerifyCdParams {
    fn default() -> Self {
        VerifyCdParams { corpus_size: 50, tol: 5e-3, field: None }
    }
}

/// CD margins of every test field at `N` and `2N`, with the Richardson
/// combination `(4 m_{2N} − m_N)/3` removing the `O(h²)` part.
pub fn verify_cd(space: &ModelSpace, p: &VerifyCdParams, seed: u64) -> Result<Outcome> {
    positive_param("tol", p.tol)?;
    let fine = refine(space)?;
    let fields: Vec<_> = match &p.field {
        Some(f) => vec![(f.sample(space)?, f.sample(&fine)?)],
        None => {
            nonempty("corpus_size", p.corpus_size)?;
            test_field_corpus(seed, p.corpus_size).iter().map(|t| (t.sample(space), t.sample(&fine))).collect()
        }
    };
    let mut t = CsvTable::new(&["index", "margin_min_n", "margin_min_2n", "extrapolated", "theta_argmin"]);
    let mut worst = f64::INFINITY;
    let mut worst_raw = f64::INFINITY;
    let mut artifacts = Vec::new();
    for (i, (coarse_f, fine_f)) in fields.iter().enumerate() {
        let rc = cd_margin(space, coarse_f)?;
        let rf = cd_margin(&fine, fine_f)?;
        let ext = (4.0 * rf.cd_margin_min - rc.cd_margin_min) / 3.0;
        worst = worst.min(ext);
        worst_raw = worst_raw.min(rc.cd_margin_min);
        t.push(vec![
            i.into(),
            rc.cd_margin_min.into(),
            rf.cd_margin_min.into(),
            ext.into(),
            space.grid()[rc.argmin].into(),
        ]);
        if p.field.is_some() {
            artifacts.push(Artifact::new("margin_profile.csv", rc.to_csv(space)));
        }
    }
    artifacts.insert(0, Artifact::new("cd_margins.csv", t.render()));
    Ok(Outcome {
        checks: vec![Check::at_least(
            "min extrapolated CD margin",
            worst,
            -p.tol,
            format!("{} fields, raw min at N={} is {worst_raw:e}", fields.len(), space.resolution()),
        )],
        artifacts,
        warnings: vec![],
    })
}

// ------------------------------------------------------------------ bochner

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BochnerParams {
    pub fields: Vec<FieldSpec>,
    pub tol: f64,
    /// Minimum residual reduction from `N` to `2N`.
    pub min_ratio: f64,
}

impl Default for BochnerParams {
    fn default() -> Self {
        BochnerParams {
            fields: vec![FieldSpec::Trig { offset: 0.0, coeffs: vec![1.0] }],
            tol: 5e-3,
            min_ratio: 3.0,
        }
    }
}

/// Bochner residual at `N` and `2N` for each field.
pub fn bochner(space: &ModelSpace, p: &BochnerParams) -> Result<Outcome> {
    nonempty("fields", p.fields.len())?;
    positive_param("tol", p.tol)?;
    let fine = refine(space)?;
    let mut t = CsvTable::new(&["index", "residual_n", "residual_2n", "ratio"]);
    let mut worst: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    for (i, f) in p.fields.iter().enumerate() {
        let rc = bochner_residual(space, &f.sample(space)?)?;
        let rf = bochner_residual(&fine, &f.sample(&fine)?)?;
        // Residuals at roundoff level carry no convergence information.
        let ratio = if rc < 1e-10 { f64::INFINITY } else { rc / rf };
        worst = worst.max(rc);
        worst_ratio = worst_ratio.min(ratio);
        t.push(vec![i.into(), rc.into(), rf.into(), ratio.into()]);
    }
    Ok(Outcome {
        checks: vec![
            Check::at_most("max Bochner residual", worst, p.tol, format!("N = {}", space.resolution())),
            Check::at_least("min refinement ratio", worst_ratio, p.min_ratio, ""),
        ],
        artifacts: vec![Artifact::new("bochner.csv", t.render())],
        warnings: vec![],
    })
}

// ---------------------------------------------------------- sobolev-deficit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeficitParams {
    /// A single field; without it a seeded positive corpus is used.
    pub v: Option<FieldSpec>,
    /// Defaults to the critical exponent `2n/(n−2)`.
    pub q: Option<f64>,
    pub corpus_size: usize,
    /// Positivity tolerance, relative to `1 + rhs`.
    pub tol: f64,
    /// Bound on `|deficit_rel|` for fields expected to saturate the
    /// inequality (constants and the extremal family).
    pub equality_tol: f64,
}

impl Default for DeficitParams {
    fn default() -> Self {
        DeficitParams { v: None, q: None, corpus_size: 100, tol: 1e-6, equality_tol: 1e-3 }
    }
}

pub fn deficit(space: &ModelSpace, p: &DeficitParams, seed: u64) -> Result<Outcome> {
    let q = p.q.unwrap_or_else(|| critical_exponent(space.n()));
    let fields: Vec<_> = match &p.v {
        Some(f) => vec![f.sample(space)?],
        None => {
            nonempty("corpus_size", p.corpus_size)?;
            positive_corpus(seed, p.corpus_size).iter().map(|t| t.sample(space)).collect()
        }
    };
    let mut t = CsvTable::new(&["index", "lhs", "rhs", "deficit", "deficit_rel", "deficit_over_1_plus_rhs"]);
    let mut worst = f64::INFINITY;
    let mut worst_rel: f64 = 0.0;
    for (i, f) in fields.iter().enumerate() {
        let r = sobolev_deficit(space, f, q)?;
        let scaled = r.deficit / (1.0 + r.rhs);
        worst = worst.min(scaled);
        worst_rel = worst_rel.max(r.deficit_rel.abs());
        t.push(vec![i.into(), r.lhs.into(), r.rhs.into(), r.deficit.into(), r.deficit_rel.into(), scaled.into()]);
    }
    let mut checks = vec![Check::at_least("min deficit/(1+rhs)", worst, -p.tol, format!("{} fields, q = {q}", fields.len()))];
    if matches!(p.v, Some(FieldSpec::Extremal { .. }) | Some(FieldSpec::Constant { .. })) {
        checks.push(Check::at_most("|deficit_rel| of an equality case", worst_rel, p.equality_tol, ""));
    }
    Ok(Outcome { checks, artifacts: vec![Artifact::new("deficits.csv", t.render())], warnings: vec![] })
}

// ----------------------------------------------------------- extremal-sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtremalSweepParams {
    pub betas: Vec<f64>,
    pub tol: f64,
    /// Minimum reduction of `|deficit_rel|` from `N/2` to `N`.
    pub min_ratio: f64,
}

impl Default for ExtremalSweepParams {
    fn default() -> Self {
        ExtremalSweepParams { betas: vec![1.5, 2.0, 4.0], tol: 1e-3, min_ratio: 3.0 }
    }
}

/// `|deficit_rel|` of the extremal family at `N` and `N/2`.
pub fn extremal_sweep(space: &ModelSpace, p: &ExtremalSweepParams) -> Result<Outcome> {
    nonempty("betas", p.betas.len())?;
    let coarse = coarsen(space)?;
    let q = critical_exponent(space.n());
    let mut t = CsvTable::new(&["beta", "deficit_rel_half_n", "deficit_rel_n", "ratio"]);
    let mut worst: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    for &beta in &p.betas {
        let rc = sobolev_deficit(&coarse, &extremal_field(&coarse, beta)?, q)?.deficit_rel.abs();
        let rf = sobolev_deficit(space, &extremal_field(space, beta)?, q)?.deficit_rel.abs();
        worst = worst.max(rf);
        worst_ratio = worst_ratio.min(rc / rf);
        t.push(vec![beta.into(), rc.into(), rf.into(), (rc / rf).into()]);
    }
    let n = space.resolution();
    Ok(Outcome {
        checks: vec![
            Check::at_most("max |deficit_rel|", worst, p.tol, format!("N = {n}")),
            Check::at_least("min refinement ratio", worst_ratio, p.min_ratio, format!("N = {} -> {n}", n / 2)),
        ],
        artifacts: vec![Artifact::new("extremal.csv", t.render())],
        warnings: vec![],
    })
}

// ----------------------------------------------------------------- minimize

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeParams {
    pub a: f64,
    pub q: f64,
    #[serde(default = "default_init")]
    pub init: FieldSpec,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

fn default_init() -> FieldSpec {
    FieldSpec::CosineBump { amplitude: 0.4 }
}

fn minimize_options(tol: Option<f64>, max_iter: Option<usize>) -> MinimizeOptions {
    let d = MinimizeOptions::default();
    MinimizeOptions { tol: tol.unwrap_or(d.tol), max_iter: max_iter.unwrap_or(d.max_iter), ..d }
}

#[derive(Serialize)]
struct MinimizeSummary {
    a: f64,
    q: f64,
    d_prime: f64,
    a_star: f64,
    lambda: f64,
    c: f64,
    i_value: f64,
    el_residual_norm: f64,
    pressure_residual: f64,
    constancy: f64,
    iterations: usize,
    converged: bool,
    max_constraint_drift: f64,
}

pub fn minimize(space: &ModelSpace, p: &MinimizeParams) -> Result<Outcome> {
    let opts = minimize_options(p.tol, p.max_iter);
    let r = minimize_subcritical(space, p.a, p.q, &p.init.sample(space)?, &opts)?;
    let pressure = pressure_transform(&r.el_solution, p.q)?;
    let summary = MinimizeSummary {
        a: r.a,
        q: r.q,
        d_prime: r.d_prime,
        a_star: rigidity_threshold(r.d_prime, space.rho()),
        lambda: r.lambda,
        c: r.c,
        i_value: r.i_value,
        el_residual_norm: r.el_residual_norm,
        pressure_residual: pressure_pde_residual(space, &pressure, r.d_prime, r.lambda)?,
        constancy: r.constancy,
        iterations: r.iterations,
        converged: r.converged,
        max_constraint_drift: r.max_constraint_drift,
    };
    Ok(Outcome {
        checks: vec![
            Check::at_most(
                "Euler-Lagrange residual",
                r.el_residual_norm,
                opts.tol * (1.0 + r.i_value),
                format!("{} iterations", r.iterations),
            ),
            Check::at_most("constraint drift", r.max_constraint_drift, 1e-10, ""),
        ],
        artifacts: vec![
            Artifact::new("minimizer.csv", r.minimizer.to_csv(space)?),
            Artifact::new("summary.json", serde_json::to_string_pretty(&summary).unwrap_or_default() + "\n"),
        ],
        warnings: vec![],
    })
}

// ------------------------------------------------------------ rigidity-scan

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RigidityParams {
    pub q: f64,
    /// Scan points as multiples of `A*(d′)`, ascending.
    pub a_over_astar: Vec<f64>,
    pub init: FieldSpec,
    pub nonlinearity: Nonlinearity,
    pub constancy_tol: f64,
    pub i_value_tol: f64,
    pub identity_tol: f64,
    /// An `A` at which the minimizer must be visibly nonconstant.
    pub nonconstant_at: Option<f64>,
    pub min_tol: Option<f64>,
    pub max_iter: Option<usize>,
}

impl Default for RigidityParams {
    fn default() -> Self {
        RigidityParams {
            q: 5.0,
            a_over_astar: vec![0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0],
            init: default_init(),
            nonlinearity: Nonlinearity::Constant,
            constancy_tol: 1e-6,
            i_value_tol: 1e-8,
            identity_tol: 1e-3,
            nonconstant_at: None,
            min_tol: None,
            max_iter: None,
        }
    }
}

pub const CONSTANCY_CHECK: &str = "max constancy for A >= A*";
pub const I_VALUE_CHECK: &str = "max |I - 1| for A >= A*";
pub const NONCONSTANT_CHECK: &str = "constancy below the threshold";
pub const IDENTITY_CHECK: &str = "max scale-relative integral identity residual";

pub fn rigidity(space: &ModelSpace, p: &RigidityParams) -> Result<Outcome> {
    nonempty("a_over_astar", p.a_over_astar.len())?;
    let astar = rigidity_threshold(dual_dimension(p.q), space.rho());
    let mut multipliers = p.a_over_astar.clone();
    if let Some(a) = p.nonconstant_at {
        positive_param("nonconstant_at", a)?;
        if !multipliers.iter().any(|m| (m * astar - a).abs() <= 1e-12 * a) {
            multipliers.push(a / astar);
            multipliers.sort_by(f64::total_cmp);
        }
    }
    let a_values: Vec<f64> = multipliers.iter().map(|m| m * astar).collect();
    let scan = rigidity_scan(
        space,
        p.q,
        &a_values,
        &p.nonlinearity,
        &p.init.sample(space)?,
        &minimize_options(p.min_tol, p.max_iter),
    )?;
    let above: Vec<&ScanEntry> = scan.iter().filter(|e| e.a_over_astar >= 1.0 - 1e-12).collect();
    let worst_const = above.iter().map(|e| e.report.constancy).fold(0.0, f64::max);
    let worst_i = above.iter().map(|e| (e.report.i_value - 1.0).abs()).fold(0.0, f64::max);
    let worst_id = scan.iter().map(|e| e.identity.relative()).fold(0.0, f64::max);
    let mut checks = vec![
        Check::at_most(CONSTANCY_CHECK, worst_const, p.constancy_tol, format!("{} scan points above A*", above.len())),
        Check::at_most(I_VALUE_CHECK, worst_i, p.i_value_tol, ""),
    ];
    if let Some(a) = p.nonconstant_at {
        let e = scan.iter().min_by(|x, y| (x.report.a - a).abs().total_cmp(&(y.report.a - a).abs()));
        let c = e.map(|e| e.report.constancy).unwrap_or(0.0);
        checks.push(Check::at_least(NONCONSTANT_CHECK, c, 0.1, format!("A = {a}")));
    }
    checks.push(Check::at_most(IDENTITY_CHECK, worst_id, p.identity_tol, format!("{} EL solutions", scan.len())));
    let plot = LinePlot::new("Minimizer constancy across the scan", "A / A*(d')", "constancy")
        .log_y()
        .with_series("constancy", scan.iter().map(|e| (e.a_over_astar, e.report.constancy.max(1e-300))).collect());
    let mut artifacts = vec![Artifact::new("scan.csv", scan_table(&scan)), Artifact::new("constancy.svg", plot.render())];
    let below: Vec<&ScanEntry> = scan.iter().filter(|e| e.a_over_astar < 1.0).collect();
    if let Some(e) = below.first() {
        artifacts.push(Artifact::new("minimizer_lowest_a.csv", e.report.minimizer.to_csv(space)?));
    }
    Ok(Outcome { checks, artifacts, warnings: vec![] })
}

fn scan_table(scan: &[ScanEntry]) -> String {
    let mut t = CsvTable::new(&[
        "A",
        "A_over_Astar",
        "q",
        "d_prime",
        "i_value",
        "constancy",
        "el_residual",
        "identity_value",
        "identity_scale",
        "identity_relative",
        "curvature_term",
        "threshold_term",
        "nonlinearity_term",
        "iterations",
        "converged",
    ]);
    for e in scan {
        let r = &e.report;
        t.push(vec![
            r.a.into(),
            e.a_over_astar.into(),
            r.q.into(),
            r.d_prime.into(),
            r.i_value.into(),
            r.constancy.into(),
            r.el_residual_norm.into(),
            e.identity.value.into(),
            e.identity.scale.into(),
            e.identity.relative().into(),
            e.terms.curvature.into(),
            e.terms.threshold.into(),
            e.terms.nonlinearity.into(),
            r.iterations.into(),
            r.converged.into(),
        ]);
    }
    t.render()
}

// ----------------------------------------------------------- critical-limit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriticalLimitParams {
    pub q_list: Vec<f64>,
    pub init: FieldSpec,
    pub limit_tol: f64,
    pub i_value_tol: f64,
}

impl Default for CriticalLimitParams {
    fn default() -> Self {
        CriticalLimitParams {
            q_list: vec![5.0, 5.5, 5.8, 5.95],
            init: default_init(),
            limit_tol: 1e-3,
            i_value_tol: 1e-8,
        }
    }
}

pub fn critical_limit(space: &ModelSpace, p: &CriticalLimitParams) -> Result<Outcome> {
    let sweep = critical_limit_sweep(space, &p.q_list, &p.init.sample(space)?, &MinimizeOptions::default())?;
    // A*(d′) is a decreasing function of d′; since d′ falls as q rises, the
    // thresholds climb toward A*(n) along the sweep.
    let decreasing = sweep.rows.windows(2).all(|w| (w[1].a_star - w[0].a_star) / (w[1].d_prime - w[0].d_prime) < 0.0);
    let approaching = sweep
        .rows
        .windows(2)
        .all(|w| (w[1].a_star - sweep.limit).abs() < (w[0].a_star - sweep.limit).abs());
    let worst_i = sweep.rows.iter().map(|r| (r.i_value - 1.0).abs()).fold(0.0, f64::max);
    let mut checks = vec![
        Check::at_least("A*(d') strictly decreasing in d'", if decreasing { 1.0 } else { 0.0 }, 1.0, ""),
        Check::at_least("A*(d') approaches A*(n) monotonically", if approaching { 1.0 } else { 0.0 }, 1.0, ""),
        Check::at_most("max |I(A*(d')) - 1|", worst_i, p.i_value_tol, ""),
    ];
    if let Some(x) = sweep.extrapolated {
        checks.push(Check::at_most("|extrapolated - A*(n)|", (x - sweep.limit).abs(), p.limit_tol, format!("extrapolated {x}")));
    }
    let mut t = CsvTable::new(&["q", "d_prime", "a_star", "i_value", "constancy", "el_residual", "iterations"]);
    for r in &sweep.rows {
        t.push(vec![
            r.q.into(),
            r.d_prime.into(),
            r.a_star.into(),
            r.i_value.into(),
            r.constancy.into(),
            r.el_residual.into(),
            r.iterations.into(),
        ]);
    }
    let summary = serde_json::json!({ "extrapolated": sweep.extrapolated, "limit": sweep.limit });
    Ok(Outcome {
        checks,
        artifacts: vec![
            Artifact::new("critical_limit.csv", t.render()),
            Artifact::new("extrapolation.json", serde_json::to_string_pretty(&summary).unwrap_or_default() + "\n"),
        ],
        warnings: sweep.warnings,
    })
}

// ------------------------------------------------------------------ flow-fd

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowFdParams {
    pub dim: usize,
    pub rho: f64,
    /// Defaults to the isotropic quadratic `F = ρ|x|²/2`.
    pub family: Option<Family>,
    pub g: GChoice,
    /// Defaults to a seeded point in `[−2, 2]^m`.
    pub x0: Option<Vec<f64>>,
    pub t_end: f64,
    pub dt: f64,
    /// Random points at which the convexity inequality is sampled.
    pub samples: usize,
    pub slope_tol: f64,
}

impl Default for FlowFdParams {
    fn default() -> Self {
        FlowFdParams {
            dim: 2,
            rho: 2.0,
            family: None,
            g: GChoice::SameAsF,
            x0: None,
            t_end: 5.0,
            dt: 1e-2,
            samples: 10_000,
            slope_tol: 1e-6,
        }
    }
}

pub(crate) fn uniform_point(rng: &mut ChaCha8Rng, dim: usize, half_width: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-half_width..=half_width)).collect()
}

/// Minimum of the condition and convexity margins over `samples` points.
pub(crate) fn sampled_margins(problem: &FiniteDimProblem, rng: &mut ChaCha8Rng, samples: usize) -> Result<(f64, f64)> {
    let mut cond = f64::INFINITY;
    let mut conv = f64::INFINITY;
    for _ in 0..samples {
        let x = uniform_point(rng, problem.dim(), 2.0);
        cond = cond.min(condition_margin(problem, &x)?);
        conv = conv.min(convexity_inequality_margin(problem, &x)?);
    }
    Ok((cond, conv))
}

pub fn flow_fd(p: &FlowFdParams, seed: u64) -> Result<Outcome> {
    let problem = match &p.family {
        None => FiniteDimProblem::isotropic(p.dim, p.rho)?,
        Some(f) => FiniteDimProblem::new(p.dim, f.clone(), p.g.clone(), p.rho)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = match &p.x0 {
        Some(x) => x.clone(),
        None => uniform_point(&mut rng, p.dim, 2.0),
    };
    let trace = fd_flow(&problem, &x0, p.t_end, p.dt)?;
    let mut checks = Vec::new();
    if p.family.is_none() {
        let slope = log_slope(&trace.times, &trace.entropy_excess).unwrap_or(f64::NAN);
        let err = (slope + 2.0 * p.rho).abs();
        checks.push(Check::at_most("|fitted slope + 2 rho|", if err.is_nan() { f64::INFINITY } else { err }, p.slope_tol, format!("slope {slope}")));
    }
    let (cond, conv) = sampled_margins(&problem, &mut rng, p.samples)?;
    checks.push(Check::at_least("min sampled condition margin", cond, 0.0, format!("{} points", p.samples)));
    checks.push(Check::at_least("min sampled convexity margin", conv, 0.0, format!("{} points", p.samples)));
    Ok(Outcome { checks, artifacts: vec![Artifact::new("trace.csv", trace.to_csv())], warnings: vec![] })
}

// ------------------------------------------------------ flow-fast-diffusion

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FastDiffusionParams {
    /// Defaults to `1 − 1/n`.
    pub alpha: Option<f64>,
    pub t_end: f64,
    /// Normalized to unit mass before the run.
    pub mu0: FieldSpec,
    pub mass_tol: f64,
    pub diss_tol: f64,
    pub sup_tol: f64,
    pub entropy_tol: f64,
}

impl Default for FastDiffusionParams {
    fn default() -> Self {
        FastDiffusionParams {
            alpha: None,
            t_end: 5.0,
            mu0: FieldSpec::CosineBump { amplitude: 0.5 },
            mass_tol: 1e-8,
            diss_tol: 1e-3,
            sup_tol: 1e-4,
            entropy_tol: 1e-6,
        }
    }
}

pub fn fast_diffusion(space: &ModelSpace, p: &FastDiffusionParams) -> Result<Outcome> {
    let alpha = p.alpha.unwrap_or(1.0 - 1.0 / space.n());
    let raw = p.mu0.sample(space)?;
    raw.require_positive()?;
    let mu0 = normalize_density(space, &raw);
    let opts = FastDiffusionOptions { diss_tol: p.diss_tol, ..Default::default() };
    let trace = fast_diffusion_flow(space, &mu0, alpha, p.t_end, &opts)?;
    let m0 = trace.mass[0];
    let t_last = trace.times.last().copied().unwrap_or(0.0);
    let mass_drift = trace.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max) / t_last.max(1.0);
    let increase = trace.entropy_excess.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(0.0, f64::max);
    let diss = trace
        .dissipation_residual
        .iter()
        .zip(&trace.grad_norm_sq)
        .skip(1)
        .map(|(r, g)| if *g > 0.0 { r / g } else { 0.0 })
        .fold(0.0, f64::max);
    let sup = trace.sup_dist.last().copied().unwrap_or(f64::INFINITY);
    let excess = trace.entropy_excess.last().copied().unwrap_or(f64::INFINITY);
    let series = |ys: &[f64]| -> Vec<(f64, f64)> {
        trace.times.iter().copied().zip(ys.iter().copied()).filter(|(_, y)| *y > 0.0).collect()
    };
    let plot = LinePlot::new("Fast diffusion toward equilibrium", "t", "value")
        .log_y()
        .with_series("R_alpha - R_alpha(1)", series(&trace.entropy_excess))
        .with_series("|grad R_alpha|^2", series(&trace.grad_norm_sq))
        .with_series("sup |mu - 1|", series(&trace.sup_dist));
    let summary = FlowSummary::new(space, alpha, p.t_end, &trace);
    Ok(Outcome {
        checks: vec![
            Check::at_most("mass drift per unit time", mass_drift, p.mass_tol, ""),
            Check::at_most("largest entropy increase between records", increase, 0.0, ""),
            Check::at_most("max relative dissipation residual", diss, p.diss_tol, format!("{} records", trace.len())),
            Check::at_most("final sup |mu - 1|", sup, p.sup_tol, format!("t = {t_last}")),
            Check::at_most("final R_alpha - R_alpha(1)", excess.abs(), p.entropy_tol, ""),
        ],
        artifacts: vec![
            Artifact::new("trace.csv", trace.to_csv()),
            Artifact::new("summary.json", serde_json::to_string_pretty(&summary).unwrap_or_default() + "\n"),
            Artifact::new("trace.svg", plot.render()),
        ],
        warnings: vec![],
    })
}

// ------------------------------------------------------- entropy-inequality

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyParams {
    pub corpus_size: usize,
    /// Margin tolerance relative to the margin's scale.
    pub tol: f64,
    /// Relative agreement with the Sobolev-deficit re-expression.
    pub cross_check_tol: f64,
    /// Tolerance (relative to scale) for the convexity relation margin.
    pub relation_tol: f64,
}

impl Default for EntropyParams {
    fn default() -> Self {
        EntropyParams { corpus_size: 100, tol: 1e-6, cross_check_tol: 1e-8, relation_tol: 1e-4 }
    }
}

pub const CROSS_CHECK: &str = "max relative gap to the Sobolev deficit re-expression";
pub const MARGIN_CHECK: &str = "min entropy margin / scale";
pub const RELATION_CHECK: &str = "min convexity relation margin / scale";

/// Entropy inequality for the densities `μ = |f|^q/∫|f|^q` transported from
/// the positive corpus, cross-checked against the Sobolev deficit of `f`.
pub fn entropy(space: &ModelSpace, p: &EntropyParams, seed: u64) -> Result<Outcome> {
    nonempty("corpus_size", p.corpus_size)?;
    if space.kind() == SpaceKind::Circle {
        return Err(Error::UnsupportedKind { op: "entropy-inequality", kind: space.kind() });
    }
    let n = space.n();
    let q = critical_exponent(n);
    let alpha = 1.0 - 1.0 / n;
    let mut t = CsvTable::new(&["index", "margin", "scale", "deficit_reexpression", "relative_gap", "relation_margin"]);
    let mut worst = f64::INFINITY;
    let mut worst_gap: f64 = 0.0;
    let mut worst_relation = f64::INFINITY;
    for (i, poly) in positive_corpus(seed, p.corpus_size).iter().enumerate() {
        let f = poly.sample(space);
        let mu = normalize_density(space, &f.map(|x| x.abs().powf(q)));
        let e = entropy_inequality(space, &mu)?;
        let r = sobolev_deficit(space, &f, q)?;
        let norm = lq_norm(space, &f, q)?;
        let reexpr = 2.0 * n * n / ((n - 2.0) * (n - 2.0)) * r.deficit / (norm * norm);
        let gap = (reexpr - e.margin).abs() / e.margin.abs().max(f64::MIN_POSITIVE);
        let relation = convexity_relation_margin(space, &mu, n)?;
        let phi = mu.map(|x| x.powf(alpha - 1.0) / (alpha - 1.0));
        let relation_scale = renyi_hessian_quadform(space, &mu, alpha, &phi)?.abs().max(f64::MIN_POSITIVE);
        worst = worst.min(e.margin / e.scale);
        worst_gap = worst_gap.max(gap);
        worst_relation = worst_relation.min(relation / relation_scale);
        t.push(vec![i.into(), e.margin.into(), e.scale.into(), reexpr.into(), gap.into(), relation.into()]);
    }
    Ok(Outcome {
        checks: vec![
            Check::at_least(MARGIN_CHECK, worst, -p.tol, format!("{} densities", p.corpus_size)),
            Check::at_most(CROSS_CHECK, worst_gap, p.cross_check_tol, ""),
            Check::at_least(RELATION_CHECK, worst_relation, -p.relation_tol, ""),
        ],
        artifacts: vec![Artifact::new("entropy_margins.csv", t.render())],
        warnings: vec![],
    })
}
