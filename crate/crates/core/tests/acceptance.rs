//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use heavytraffic::bounds::{convex_set_bound, gigi_rate_exponents, mgi_expectation_bound, psi_n};
use heavytraffic::exec::replication_rng;
use heavytraffic::gausslim::{
    decompose_mgi, kernel_gigi, kernel_mgi, kl_decompose, CovarianceKernel,
};
use heavytraffic::harness::{
    empirical_covariance, estimate_expectation_gap, fit_rate, ExperimentConfig, RateVerdict,
};
use heavytraffic::laws::{ArrivalMeasure, RenewalLaw, ServiceDistribution};
use heavytraffic::palm::{bundled_suite, mean_shift};
use heavytraffic::stein::{
    derivative_bound_check, FiniteDimTestFunction, GaussianRule, SteinSolution,
};
use heavytraffic::Execution;
use nalgebra::DMatrix;

type Outcome = (bool, String);

const SEED: u64 = 20_240_601;

fn exp1() -> ServiceDistribution {
    ServiceDistribution::exponential(1.0).unwrap()
}

fn config(text: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml(text).expect("acceptance config parses");
    c.seed = Some(SEED);
    c
}

fn psi_arithmetic() -> Outcome {
    let cases = [
        (psi_n(0.0, 0, 1.0, 100), 1.0 / (2.0 * 10.0)),
        (
            psi_n(1.0, 100, 1.0, 100),
            3.0 * (50.0 * PI).sqrt() / 200.0 + 2.0 / 20.0,
        ),
        (
            psi_n(1.0, 110, 2.0, 100),
            3.0 * ((55.0 * PI).sqrt() + 10.0) / 200.0 + 3.1 / 20.0,
        ),
    ];
    let worst = cases.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let bound_exact = [(1.0, 0.05), (27.0, 0.05), (3.0, 0.0), (0.7, 0.2879)]
        .iter()
        .all(|&(g, p)| mgi_expectation_bound(g, p) == 2f64.powf(1.5) * g * p);
    (
        worst <= 1e-9 && bound_exact,
        format!("max |psi - hand value| = {worst:.2e}, bound formula exact: {bound_exact}"),
    )
}

fn covariance_mgi() -> Outcome {
    let c = config(
        r#"
model = "mgi"
T = 1.0
n = [200]
replications = 100000
grid = [0.25, 0.5, 0.75, 1.0]
arrival = {kind = "lebesgue"}
service = {kind = "exp", rate = 1.0}
"#,
    );
    let check = empirical_covariance(&c, 200, Execution::default()).unwrap();
    let k11 = check.theory[15];
    let closed = (1.0 - (-1f64).exp() - k11).abs() < 1e-12;
    (
        check.pass && closed,
        format!(
            "K(1,1) = {k11:.7}, empirical {:.5} ± {:.5}; max |diff| {:.5}, c_min {:.4} <= c {}",
            check.queue[15].value,
            check.queue[15].se,
            check.max_abs_diff,
            check.c_min,
            check.bias_c
        ),
    )
}

fn covariance_gigi() -> Outcome {
    let c = config(
        r#"
model = "gigi"
T = 1.0
n = [500]
replications = 100000
grid = [0.25, 0.5, 0.75, 1.0]
renewal = {kind = "uniform_int", lo = 1, hi = 2}
service = {kind = "exp", rate = 1.0}
"#,
    );
    let check = empirical_covariance(&c, 500, Execution::default()).unwrap();
    let k11 = check.theory[15];
    // m²/v² = 9 with ∫₀¹ e^{-u}(1 - e^{-u}) du and ∫₀¹ e^{-2u} du
    let oracle =
        9.0 * ((1.0 - (-1f64).exp()) - (1.0 - (-2f64).exp()) / 2.0) + (1.0 - (-2f64).exp()) / 2.0;
    (
        check.pass && (k11 - oracle).abs() < 1e-10,
        format!(
            "K(1,1) = {k11:.7}, empirical {:.5} ± {:.5}; max |diff| {:.5}, c_min {:.4} <= c {}",
            check.queue[15].value,
            check.queue[15].se,
            check.max_abs_diff,
            check.c_min,
            check.bias_c
        ),
    )
}

fn brownian_bridge() -> Outcome {
    let c = config(
        r#"
model = "mgi"
T = 1.0
n = [500]
replications = 100000
grid = [0.25, 0.5, 0.75]
arrival = {kind = "none"}
service = {kind = "exp", rate = 1.0}
initial_service = {kind = "uniform", lo = 0.0, hi = 1.0}
x = 1.0
"#,
    );
    let check = empirical_covariance(&c, 500, Execution::default()).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (i, t) in [0.25f64, 0.5, 0.75].iter().enumerate() {
        let est = check.queue[i * 3 + i];
        let want = t * (1.0 - t);
        ok &= est.within(want, 4.0, 0.0) && (check.theory[i * 3 + i] - want).abs() < 1e-12;
        detail.push(format!("t={t}: {:.5}±{:.5} vs {want}", est.value, est.se));
    }
    (ok, detail.join(", "))
}

fn rate_check() -> Outcome {
    let c = config(
        r#"
model = "mgi"
T = 1.0
n = [50, 100, 200, 400, 800, 1600]
replications = 40000
grid = [1.0]
arrival = {kind = "lebesgue"}
service = {kind = "exp", rate = 1.0}
x = 1.0
x_n = "floor"
"#,
    );
    let g = FiniteDimTestFunction::cos_sum(vec![1.0], vec![1.0]).unwrap();
    let gaps =
        estimate_expectation_gap(&c, std::slice::from_ref(&g), Execution::default()).unwrap();
    let ns: Vec<u64> = gaps.iter().map(|e| e.n).collect();
    let est: Vec<_> = gaps.iter().map(|e| e.gap).collect();
    let fit = fit_rate(&ns, &est, 0.5, 0.1, 4.0, SEED).unwrap();
    let consistent = gaps.iter().all(|e| e.gaussian_consistent(4.0));
    let cells: Vec<String> = gaps
        .iter()
        .map(|e| format!("{}:{:+.1e}±{:.1e}", e.n, e.gap.value, e.gap.se))
        .collect();
    let verdict = match fit.verdict {
        RateVerdict::Fitted => format!(
            "slope {:.3}, CI [{:.3}, {:.3}]",
            fit.slope, fit.ci.0, fit.ci.1
        ),
        RateVerdict::NoiseDominated => {
            format!("noise-dominated, all within 4 SE: {}", fit.all_within_noise)
        }
    };
    (
        fit.pass && consistent,
        format!("{verdict}; gaps {}", cells.join(" ")),
    )
}

fn palm_identity() -> Outcome {
    let reports = bundled_suite(100_000, SEED, Execution::default()).unwrap();
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.1.pass)
        .map(|r| r.0.as_str())
        .collect();
    let exact_ok = reports
        .iter()
        .all(|r| r.1.exact_consistent().unwrap_or(true));
    let gigi = reports
        .iter()
        .find(|r| r.0.starts_with("gigi") && r.0.contains("successor"))
        .map(|r| {
            format!(
                "{}: {:.5} vs {:.5} (oracle {:?})",
                r.0, r.1.lhs.value, r.1.rhs.value, r.1.exact
            )
        })
        .unwrap_or_default();
    (
        failed.is_empty() && exact_ok,
        format!(
            "{} cases, failed {:?}, oracle consistent {exact_ok}; {gigi}",
            reports.len(),
            failed
        ),
    )
}

fn mean_shift_limit() -> Outcome {
    let law = RenewalLaw::uniform_int(1, 2).unwrap();
    let n = 2000;
    let s = 1.0;
    let site = (n as f64 * s / 2.0).floor() as u64;
    let shift = mean_shift(&law, n, site, s, &ServiceDistribution::Never);
    let target = (law.variance() - law.mean().powi(2)) / law.mean().powi(2);
    (
        (shift - target).abs() <= 0.01 && (target + 8.0 / 9.0).abs() < 1e-12,
        format!("shift {shift:.6} vs {target:.6}"),
    )
}

fn stein_equation() -> Outcome {
    let mut rng = replication_rng(SEED, 1);
    let sq = FiniteDimTestFunction::square(vec![1.0], 0).unwrap();
    let one = DMatrix::from_element(1, 1, 1.0);
    let sol = SteinSolution::monte_carlo(&sq, &one, 64, 100_000, &mut rng).unwrap();
    let sq_r = sol.operator(&[2.0]);
    let closed = sq_r.lhs.within(3.0, 3.0, 1e-9) && sq_r.rhs.within(3.0, 3.0, 1e-9) && sq_r.pass;

    let kernel = kernel_mgi(
        &ArrivalMeasure::lebesgue(1.0).unwrap(),
        &exp1(),
        0.0,
        &exp1(),
    );
    let sigma = kernel.matrix(&[0.5, 1.0]);
    let g = cos_of_sum();
    let sol = SteinSolution::monte_carlo(&g, &sigma, 64, 100_000, &mut rng).unwrap();
    let mut passes = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        use rand::Rng;
        let w = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let r = sol.operator(&w);
        passes += usize::from(r.pass);
        worst = worst.max(r.residual.value.abs() / r.budget);
    }
    (
        closed && passes == 20,
        format!(
            "square: A f = {:.4}±{:.4} vs 3; cos(w1+w2): {passes}/20 within budget, worst residual/budget {worst:.3}",
            sq_r.lhs.value, sq_r.lhs.se
        ),
    )
}

fn cos_of_sum() -> FiniteDimTestFunction {
    FiniteDimTestFunction::cos_sum(vec![0.5, 1.0], vec![1.0, 1.0]).unwrap()
}

fn bundled_test_functions() -> Vec<FiniteDimTestFunction> {
    vec![
        FiniteDimTestFunction::linear(vec![0.5, 1.0], vec![1.0, -2.0]).unwrap(),
        FiniteDimTestFunction::square(vec![1.0], 0).unwrap(),
        FiniteDimTestFunction::cos_sum(vec![1.0], vec![1.0]).unwrap(),
        FiniteDimTestFunction::cos_sum(vec![0.5, 1.0], vec![1.0, 0.5]).unwrap(),
        cos_of_sum(),
        FiniteDimTestFunction::sigmoid_product(vec![0.25, 0.5, 1.0]).unwrap(),
    ]
}

fn derivative_bounds() -> Outcome {
    let kernel = kernel_mgi(
        &ArrivalMeasure::lebesgue(1.0).unwrap(),
        &exp1(),
        0.0,
        &exp1(),
    );
    let mut rng = replication_rng(SEED, 2);
    let mut ok = true;
    let mut detail = Vec::new();
    for g in bundled_test_functions() {
        let sigma = kernel.matrix(g.instants());
        let nodes = [0, 40, 20, 10][g.dim()];
        let sol = SteinSolution::new(
            &g,
            &sigma,
            GaussianRule::hermite(&sigma, nodes).unwrap(),
            64,
        )
        .unwrap();
        let report = derivative_bound_check(&sol, 100, &mut rng);
        ok &= report.pass;
        detail.push(format!(
            "{}: {} violations, ratios {:.2}/{:.2}",
            g.name(),
            report.violations,
            report.max_second_ratio,
            report.max_lipschitz_ratio
        ));
    }
    (ok, detail.join("; "))
}

fn kl_reconstruction() -> Outcome {
    let leb = ArrivalMeasure::lebesgue(1.0).unwrap();
    let unif = ServiceDistribution::uniform(0.0, 1.0).unwrap();
    let mut kernels: Vec<(String, CovarianceKernel)> = vec![
        ("mgi".into(), kernel_mgi(&leb, &exp1(), 1.0, &unif)),
        (
            "gigi".into(),
            kernel_gigi(&RenewalLaw::uniform_int(1, 2).unwrap(), &exp1()).unwrap(),
        ),
        (
            "bridge".into(),
            kernel_mgi(&ArrivalMeasure::zero(1.0).unwrap(), &exp1(), 1.0, &unif),
        ),
        ("brownian".into(), CovarianceKernel::brownian()),
    ];
    for (i, k) in decompose_mgi(&leb, &exp1(), 1.0, &unif)
        .into_iter()
        .enumerate()
    {
        kernels.push((format!("mgi_part{}", i + 1), k));
    }
    let grid: Vec<f64> = (1..=128).map(|i| i as f64 / 128.0).collect();
    let mut worst: f64 = 0.0;
    for (_, k) in &kernels {
        let kl = kl_decompose(k, &grid).unwrap();
        let diff = kl.reconstruct(grid.len()) - k.matrix(&grid);
        worst = worst.max(diff.amax());
    }
    let fine: Vec<f64> = (1..=512).map(|i| i as f64 / 512.0).collect();
    let top = kl_decompose(&CovarianceKernel::brownian(), &fine)
        .unwrap()
        .eigenvalues[0];
    let target = 4.0 / (PI * PI);
    (
        worst <= 1e-8 && (top - target).abs() <= 1e-3,
        format!(
            "{} kernels, max reconstruction residual {worst:.2e}; Brownian top eigenvalue {top:.7} vs {target:.7}",
            kernels.len()
        ),
    )
}

fn rate_exponents() -> Outcome {
    let e = gigi_rate_exponents(1.0, 9, 0.5).unwrap();
    let gigi_ok = e.beta_bar == 0.5
        && e.l_r == 2
        && e.beta_r == 7.0 / 8.0
        && e.denominator == 18.0
        && e.numerator == 0.75
        && e.numerator / e.denominator == 1.0 / 24.0
        && !e.vacuous;
    let v = gigi_rate_exponents(1.0, 5, 0.5).unwrap();
    let vac_ok = v.l_r == 1 && v.vacuous && v.numerator == -0.25;
    let (eps, bound) = convex_set_bound(1, 1, 1.0);
    let convex_ok = eps == 3f64.powf(0.25)
        && (bound - (3f64.powf(-0.75) + 3f64.powf(0.25))).abs() <= 4.0 * f64::EPSILON;
    (
        gigi_ok && vac_ok && convex_ok,
        format!(
            "l_r={} beta_r={} exponent={}/{}; r=5 vacuous {}; eps*={eps:.7} bound={bound:.7}",
            e.l_r, e.beta_r, e.numerator, e.denominator, v.vacuous
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("psi_n arithmetic", psi_arithmetic),
        ("covariance convergence M/M/inf", covariance_mgi),
        ("covariance convergence GI/GI", covariance_gigi),
        ("Brownian-bridge component", brownian_bridge),
        ("expectation-gap rate", rate_check),
        ("Palm identity", palm_identity),
        ("mean-shift limit", mean_shift_limit),
        ("Stein equation residuals", stein_equation),
        ("Stein derivative bounds", derivative_bounds),
        ("KL reconstruction", kl_reconstruction),
        ("rate-exponent evaluators", rate_exponents),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let (pass, detail) = check();
        failures += usize::from(!pass);
        println!(
            "{} {name} ({:.1}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
