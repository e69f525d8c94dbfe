use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ModelKind};
use super::estimate::{
    empirical_covariance, estimate_expectation_gap, modulus_tail, stream_seed, tail_is_monotone,
    write_tail_csv, PALM_STREAM, SIM_STREAM, STEIN_STREAM,
};
use super::model::{QueueModel, Scaled};
use super::rate::{fit_rate, RateVerdict};
use crate::bounds::{bound_report, gigi_rate_exponents, mgi_expectation_bound, psi_n, BoundParams};
use crate::exec::{replication_rng, Execution};
use crate::palm::{bundled_functionals, bundled_suite, palm_identity_test, write_reports};
use crate::stein::{derivative_bound_check, FiniteDimTestFunction, GaussianRule, SteinSolution};
use crate::{Error, Result};

/// Version of the CSV layouts listed in the manifest.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    PalmCheck,
    CovarianceCheck,
    SteinCheck,
    RateStudy,
    Bounds,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::PalmCheck => "palm-check",
            Command::CovarianceCheck => "covariance-check",
            Command::SteinCheck => "stein-check",
            Command::RateStudy => "rate-study",
            Command::Bounds => "bounds",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What a run produced.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    /// Named pass/fail decisions.
    pub checks: Vec<(String, bool)>,
    /// Human-readable report.
    pub text: String,
}

impl RunSummary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    columns: Vec<&'static str>,
}

#[derive(Serialize)]
struct LpHypothesis {
    n: u64,
    satisfied: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: String,
    seed: u64,
    execution: &'a str,
    threads: usize,
    wall_time_seconds: f64,
    csv_schema_version: u32,
    files: Vec<FileEntry>,
    /// Whether `T ≥ √n |x_n/n − x|` holds; recorded, not acted on.
    lp_hypothesis: Vec<LpHypothesis>,
    checks: Vec<(String, bool)>,
}

struct Writer<'a> {
    dir: &'a Path,
    entries: Vec<FileEntry>,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn csv(
        &mut self,
        name: String,
        columns: Vec<&'static str>,
        body: impl FnOnce(File) -> csv::Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(&name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        body(file).map_err(|e| Error::csv(&path, e))?;
        self.entries.push(FileEntry { name, columns });
        self.files.push(path);
        Ok(())
    }
}

fn threads(exec: Execution) -> usize {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return rayon::current_num_threads();
    }
    let _ = exec;
    1
}

/// Execute `command` and write its CSVs and `manifest.json` into `out`,
/// creating it if needed. CSV contents depend only on the config and seed.
pub fn run(
    config: &ExperimentConfig,
    command: Command,
    out: &Path,
    exec: Execution,
) -> Result<RunSummary> {
    let started = Instant::now();
    config.validate()?;
    let seed = config.seed()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let model = QueueModel::from_config(config)?;
    let mut w = Writer {
        dir: out,
        entries: Vec::new(),
        files: Vec::new(),
    };
    let mut summary = RunSummary::default();
    let gs = config
        .test_functions
        .iter()
        .map(|g| g.build())
        .collect::<Result<Vec<_>>>()?;

    match command {
        Command::Simulate => simulate(config, &model, seed, &mut w)?,
        Command::PalmCheck => palm_check(config, &model, seed, exec, &mut w, &mut summary)?,
        Command::CovarianceCheck => covariance_check(config, exec, &mut w, &mut summary)?,
        Command::SteinCheck => stein_check(config, &model, &gs, seed, &mut w, &mut summary)?,
        Command::RateStudy => rate_study(config, &model, &gs, seed, exec, &mut w, &mut summary)?,
        Command::Bounds => bounds(config, &model, &gs, &mut w, &mut summary)?,
    }

    let lp_hypothesis = config
        .n
        .iter()
        .map(|&n| {
            let x_n = model.x_n(n)?;
            let gap = (n as f64).sqrt() * (x_n as f64 / n as f64 - config.x).abs();
            Ok(LpHypothesis {
                n,
                satisfied: config.model == ModelKind::Gigi || config.horizon >= gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut canonical = config.clone();
    canonical.seed = Some(seed);
    let manifest = Manifest {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: hex::encode(Sha256::digest(canonical.to_toml().as_bytes())),
        seed,
        execution: if exec.is_parallel() {
            "parallel"
        } else {
            "sequential"
        },
        threads: threads(exec),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        csv_schema_version: CSV_SCHEMA_VERSION,
        files: w.entries,
        lp_hypothesis,
        checks: summary.checks.clone(),
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    summary.files = w.files;
    summary.files.push(path);
    for (name, pass) in &summary.checks {
        summary
            .text
            .push_str(&format!("{} {name}\n", if *pass { "PASS" } else { "FAIL" }));
    }
    Ok(summary)
}

fn simulate(
    config: &ExperimentConfig,
    model: &QueueModel,
    seed: u64,
    w: &mut Writer,
) -> Result<()> {
    let grid = config.grid.points()?;
    for (li, &n) in config.n.iter().enumerate() {
        let mut rng = replication_rng(stream_seed(seed, SIM_STREAM, li as u64), 0);
        let proc = model.sample(n, &mut rng)?;
        let scaled = Scaled::new(model, n, &grid)?;
        let path = crate::paths::QueuePath::evaluate_with_centers(
            &proc,
            &grid,
            &scaled.centers,
            &scaled.mean,
            scaled.sigma,
        )?;
        w.csv(format!("points_n{n}.csv"), vec!["t", "y", "tag"], |f| {
            proc.write_csv(f)
        })?;
        w.csv(format!("path_n{n}.csv"), vec!["s", "X", "Xtilde"], |f| {
            path.write_csv(f)
        })?;
    }
    Ok(())
}

fn palm_check(
    config: &ExperimentConfig,
    model: &QueueModel,
    seed: u64,
    exec: Execution,
    w: &mut Writer,
    summary: &mut RunSummary,
) -> Result<()> {
    let reps = config.replications;
    let mut reports = bundled_suite(reps, stream_seed(seed, PALM_STREAM, 0), exec)?;
    let n = config.n[0];
    let palm_model = model.palm_model(n)?;
    for (j, h) in bundled_functionals(&palm_model).iter().enumerate() {
        let r = palm_identity_test(
            &palm_model,
            h,
            reps,
            stream_seed(seed, PALM_STREAM, 1 + j as u64),
            exec,
        )?;
        reports.push((format!("config_n{n}/{}", r.name), r));
    }
    for (name, r) in &reports {
        summary.checks.push((format!("palm {name}"), r.pass));
    }
    w.csv(
        "palm.csv".into(),
        vec!["test", "lhs", "rhs", "se", "pass"],
        |f| write_reports(&reports, f),
    )
}

fn covariance_check(
    config: &ExperimentConfig,
    exec: Execution,
    w: &mut Writer,
    summary: &mut RunSummary,
) -> Result<()> {
    let mut rows = Vec::new();
    for &n in &config.n {
        let check = empirical_covariance(config, n, exec)?;
        w.csv(
            format!("covariance_n{n}.csv"),
            vec![
                "s1",
                "s2",
                "K_theory",
                "K_empirical_queue",
                "K_empirical_Z",
                "se",
            ],
            |f| check.write_csv(f),
        )?;
        summary
            .checks
            .push((format!("covariance n={n}"), check.pass));
        summary
            .checks
            .push((format!("gaussian covariance n={n}"), check.gaussian_pass));
        rows.push(check);
    }
    let columns = vec![
        "n",
        "max_abs_diff",
        "allowance",
        "bias_c",
        "c_min",
        "pass",
        "gaussian_pass",
    ];
    w.csv("covariance_summary.csv".into(), columns.clone(), |f| {
        let mut out = csv::Writer::from_writer(f);
        out.write_record(&columns)?;
        for c in &rows {
            out.write_record([
                c.n.to_string(),
                c.max_abs_diff.to_string(),
                c.allowance.to_string(),
                c.bias_c.to_string(),
                c.c_min.to_string(),
                c.pass.to_string(),
                c.gaussian_pass.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    })
}

/// Gauss–Hermite nodes per dimension for derivative probes, where a
/// deterministic rule keeps the probes noise-free.
fn probe_nodes(k: usize) -> Option<usize> {
    match k {
        1 => Some(40),
        2 => Some(20),
        3 => Some(10),
        _ => None,
    }
}

fn stein_check(
    config: &ExperimentConfig,
    model: &QueueModel,
    gs: &[FiniteDimTestFunction],
    seed: u64,
    w: &mut Writer,
    summary: &mut RunSummary,
) -> Result<()> {
    use rand_distr::{Distribution, Normal};
    let spec = &config.stein;
    let kernel = model.kernel()?;
    let normal = Normal::new(0.0, spec.w_scale).map_err(|e| Error::Config(e.to_string()))?;
    let mut residual_rows = Vec::new();
    let mut probe_rows = Vec::new();
    for (j, g) in gs.iter().enumerate() {
        let sigma = kernel.matrix(g.instants());
        let mut rng = replication_rng(stream_seed(seed, STEIN_STREAM, j as u64), 0);
        let sol = SteinSolution::monte_carlo(g, &sigma, spec.quad_nodes, spec.mc_draws, &mut rng)?;
        let mut all = true;
        for p in 0..spec.points {
            let pt: Vec<f64> = (0..g.dim()).map(|_| normal.sample(&mut rng)).collect();
            let r = sol.operator(&pt);
            all &= r.pass;
            residual_rows.push((g.name(), g.dim(), p, r));
        }
        summary
            .checks
            .push((format!("stein residual {}", g.name()), all));
        let probe = match probe_nodes(g.dim()) {
            Some(nodes) => SteinSolution::new(
                g,
                &sigma,
                GaussianRule::hermite(&sigma, nodes)?,
                spec.quad_nodes,
            )?,
            None => sol,
        };
        let report = derivative_bound_check(&probe, spec.probes, &mut rng);
        summary
            .checks
            .push((format!("stein derivatives {}", g.name()), report.pass));
        probe_rows.push((g.name(), g.dim(), report));
    }
    let columns = vec![
        "g_name", "k", "w_id", "lhs", "rhs", "residual", "budget", "pass",
    ];
    w.csv("stein.csv".into(), columns.clone(), |f| {
        let mut out = csv::Writer::from_writer(f);
        out.write_record(&columns)?;
        for (name, k, p, r) in &residual_rows {
            out.write_record([
                name.clone(),
                k.to_string(),
                p.to_string(),
                r.lhs.value.to_string(),
                r.rhs.value.to_string(),
                r.residual.value.to_string(),
                r.budget.to_string(),
                r.pass.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    })?;
    let columns = vec![
        "g_name",
        "k",
        "samples",
        "second_bound",
        "lipschitz_bound",
        "max_second_ratio",
        "max_lipschitz_ratio",
        "violations",
        "pass",
    ];
    w.csv("stein_derivatives.csv".into(), columns.clone(), |f| {
        let mut out = csv::Writer::from_writer(f);
        out.write_record(&columns)?;
        for (name, k, r) in &probe_rows {
            out.write_record([
                name.clone(),
                k.to_string(),
                r.samples.to_string(),
                r.second_bound.to_string(),
                r.lipschitz_bound.to_string(),
                r.max_second_ratio.to_string(),
                r.max_lipschitz_ratio.to_string(),
                r.violations.to_string(),
                r.pass.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    })
}

/// Theoretical decay rate of the expectation gap.
fn theory_rate(config: &ExperimentConfig) -> f64 {
    config.tolerance.theory_rate.unwrap_or(match config.model {
        ModelKind::Mgi => 0.5,
        ModelKind::Gigi => config.bounds.beta.min(0.5),
    })
}

/// The explicit expectation bound for `g` at `n`, when one applies.
fn expectation_bound(
    config: &ExperimentConfig,
    model: &QueueModel,
    g: &FiniteDimTestFunction,
    n: u64,
) -> Result<Option<(f64, f64)>> {
    match model {
        QueueModel::Mgi { arrival, x, .. } => {
            let psi = psi_n(*x, model.x_n(n)?, arrival.total_mass(), n);
            Ok(Some((psi, mgi_expectation_bound(g.norm_m_prime(), psi))))
        }
        QueueModel::Gigi { .. } => {
            let b = &config.bounds;
            Ok(match b.r {
                Some(r) => {
                    let e = gigi_rate_exponents(b.beta, r, b.eta)?;
                    let s = g.smoothness().unwrap_or(b.smoothness);
                    Some((
                        f64::NAN,
                        e.expectation_bound(config.horizon, n, s, g.norm_m_prime(), b.constant),
                    ))
                }
                None => None,
            })
        }
    }
}

fn rate_study(
    config: &ExperimentConfig,
    model: &QueueModel,
    gs: &[FiniteDimTestFunction],
    seed: u64,
    exec: Execution,
    w: &mut Writer,
    summary: &mut RunSummary,
) -> Result<()> {
    let gaps = estimate_expectation_gap(config, gs, exec)?;
    let tol = &config.tolerance;
    let mut bound_of = Vec::with_capacity(gaps.len());
    for (i, gap) in gaps.iter().enumerate() {
        bound_of.push(expectation_bound(config, model, &gs[i % gs.len()], gap.n)?);
    }
    let columns = vec![
        "n",
        "g_name",
        "k",
        "Eg_queue",
        "Eg_queue_se",
        "Eg_Z",
        "Eg_Z_mc",
        "Eg_Z_mc_se",
        "gap",
        "gap_se",
        "psi_n",
        "bound",
    ];
    w.csv("rate.csv".into(), columns.clone(), |f| {
        let mut out = csv::Writer::from_writer(f);
        out.write_record(&columns)?;
        for (g, b) in gaps.iter().zip(&bound_of) {
            let (psi, bound) = b.map_or(("n/a".into(), "n/a".into()), |(p, v)| {
                (
                    if p.is_nan() {
                        "n/a".into()
                    } else {
                        p.to_string()
                    },
                    v.to_string(),
                )
            });
            out.write_record([
                g.n.to_string(),
                g.g_name.clone(),
                g.k.to_string(),
                g.queue.value.to_string(),
                g.queue.se.to_string(),
                g.gaussian.value.to_string(),
                g.gaussian_mc.value.to_string(),
                g.gaussian_mc.se.to_string(),
                g.gap.value.to_string(),
                g.gap.se.to_string(),
                psi,
                bound,
            ])?;
        }
        out.flush()?;
        Ok(())
    })?;

    let rate = theory_rate(config);
    let mut fits = Vec::new();
    for (j, g) in gs.iter().enumerate() {
        let mine: Vec<_> = gaps.iter().skip(j).step_by(gs.len()).collect();
        let consistent = mine
            .iter()
            .all(|e| e.gaussian_consistent(tol.se_multiplier));
        summary.checks.push((
            format!("gaussian quadrature vs mc {}", g.name()),
            consistent,
        ));
        if mine.len() < 4 {
            summary
                .text
                .push_str(&format!("{}: ladder too short for a rate fit\n", g.name()));
            continue;
        }
        let ns: Vec<u64> = mine.iter().map(|e| e.n).collect();
        let est: Vec<_> = mine.iter().map(|e| e.gap).collect();
        let fit = fit_rate(
            &ns,
            &est,
            rate,
            tol.slope_slack,
            tol.se_multiplier,
            stream_seed(seed, 10, j as u64),
        )?;
        summary
            .checks
            .push((format!("rate {}", g.name()), fit.pass));
        fits.push((g.name(), fit));
    }
    let columns = vec![
        "g_name",
        "slope",
        "intercept",
        "ci_lo",
        "ci_hi",
        "theory_rate",
        "verdict",
        "pass",
    ];
    w.csv("rate_fit.csv".into(), columns.clone(), |f| {
        let mut out = csv::Writer::from_writer(f);
        out.write_record(&columns)?;
        for (name, fit) in &fits {
            out.write_record([
                name.clone(),
                fit.slope.to_string(),
                fit.intercept.to_string(),
                fit.ci.0.to_string(),
                fit.ci.1.to_string(),
                rate.to_string(),
                match fit.verdict {
                    RateVerdict::Fitted => "fitted".to_string(),
                    RateVerdict::NoiseDominated => "noise_dominated".to_string(),
                },
                fit.pass.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    })?;

    if !config.eps.is_empty() && !config.theta.is_empty() {
        let rows = modulus_tail(config, exec)?;
        summary
            .checks
            .push(("modulus tail monotone".into(), tail_is_monotone(&rows)));
        let columns = vec![
            "source", "n", "eps", "theta", "hits", "trials", "p", "ci_lo", "ci_hi",
        ];
        w.csv("modulus_tail.csv".into(), columns, |f| {
            write_tail_csv(&rows, f)
        })?;
    }
    summary.text.push_str(
        "Levy-Prokhorov distances are not estimated; rates are checked through \
         finite-dimensional expectation gaps and modulus tails.\n",
    );
    Ok(())
}

fn bounds(
    config: &ExperimentConfig,
    model: &QueueModel,
    gs: &[FiniteDimTestFunction],
    w: &mut Writer,
    summary: &mut RunSummary,
) -> Result<()> {
    let b = &config.bounds;
    let g = gs.first();
    let mut reports = Vec::new();
    for &n in &config.n {
        let (alpha_mass, renewal) = match model {
            QueueModel::Mgi { arrival, .. } => (arrival.total_mass(), None),
            QueueModel::Gigi { law, .. } => (0.0, Some((law.mean(), law.variance()))),
        };
        let params = BoundParams {
            n,
            horizon: config.horizon,
            x: config.x,
            x_n: model.x_n(n)?,
            alpha_mass,
            beta: b.beta,
            r: b.r,
            eta: b.eta,
            k: b.k.unwrap_or_else(|| g.map_or(1, |g| g.dim() as u32)),
            norm_m_prime: g.map_or(1.0, |g| g.norm_m_prime()),
            norm_m: g.map_or(1.0, |g| g.norm_m()),
            smoothness: g.and_then(|g| g.smoothness()).unwrap_or(b.smoothness),
            chi: b.chi,
            constant: b.constant,
            renewal,
        };
        let report = bound_report(&params)?;
        summary.text.push_str(&report.to_text());
        summary.text.push('\n');
        reports.push(report);
    }
    w.csv("bounds.csv".into(), vec!["n", "quantity", "value"], |f| {
        let mut out = csv::Writer::from_writer(f);
        out.write_record(["n", "quantity", "value"])?;
        for r in &reports {
            for (k, v) in r.rows() {
                out.write_record([r.params.n.to_string(), k, v])?;
            }
        }
        out.flush()?;
        Ok(())
    })
}
