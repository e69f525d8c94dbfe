use heavytraffic::exec::replication_rng;
use heavytraffic::gausslim::{
    decompose_mgi, kernel_gigi, kernel_mgi, kl_decompose, sample_paths, CovarianceKernel,
};
use heavytraffic::laws::{ArrivalMeasure, RenewalLaw, ServiceDistribution};
use heavytraffic::numerics::{integrate, integrate_with_breaks};
use nalgebra::SymmetricEigen;

/// `E_y f(y)` for a service law with density `pdf` on `[0, top]`.
fn over_marks(f: impl Fn(f64) -> f64, pdf: impl Fn(f64) -> f64, top: f64, breaks: &[f64]) -> f64 {
    integrate_with_breaks(|y| f(y) * pdf(y), 0.0, top, breaks, 1e-12).value
}

fn bundled() -> Vec<(&'static str, CovarianceKernel)> {
    let leb = ArrivalMeasure::lebesgue(1.0).unwrap();
    let exp1 = ServiceDistribution::exponential(1.0).unwrap();
    let unif = ServiceDistribution::uniform(0.0, 1.5).unwrap();
    let mut v = vec![
        ("mgi_exp", kernel_mgi(&leb, &exp1, 0.0, &exp1)),
        (
            "mgi_initial",
            kernel_mgi(
                &leb,
                &unif,
                1.0,
                &ServiceDistribution::uniform(0.0, 1.0).unwrap(),
            ),
        ),
        (
            "gigi_exp",
            kernel_gigi(&RenewalLaw::uniform_int(1, 2).unwrap(), &exp1).unwrap(),
        ),
        (
            "gigi_unif",
            kernel_gigi(&RenewalLaw::uniform_int(1, 3).unwrap(), &unif).unwrap(),
        ),
        ("brownian", CovarianceKernel::brownian()),
    ];
    let parts = decompose_mgi(&leb, &exp1, 1.0, &unif);
    v.extend(["departed", "staying", "initial"].into_iter().zip(parts));
    v
}

#[test]
fn gigi_kernel_matches_jhat_integral() {
    let law = RenewalLaw::uniform_int(1, 2).unwrap();
    let m = law.mean();
    let v = law.variance().sqrt();
    let cases: [(ServiceDistribution, Box<dyn Fn(f64) -> f64>, f64); 2] = [
        (
            ServiceDistribution::exponential(1.0).unwrap(),
            Box::new(|y: f64| (-y).exp()),
            40.0,
        ),
        (
            ServiceDistribution::uniform(0.0, 1.5).unwrap(),
            Box::new(|_| 1.0 / 1.5),
            1.5,
        ),
    ];
    for (g, pdf, top) in &cases {
        let k = kernel_gigi(&law, g).unwrap();
        for (s1, s2) in [(0.3, 0.7), (1.0, 1.0), (0.5, 1.2)] {
            let jhat = |t: f64, y: f64, s: f64| {
                let j = if t <= s && y > s - t { 1.0 } else { 0.0 };
                (m / v) * j - ((m + v) / v) * g.survival(s - t)
            };
            let inner = |t: f64| {
                over_marks(
                    |y| jhat(t, y, s1) * jhat(t, y, s2),
                    pdf,
                    *top,
                    &[s1 - t, s2 - t],
                )
            };
            let want = integrate(inner, 0.0, s1, 1e-10).value;
            assert!(
                (k.eval(s1, s2) - want).abs() < 1e-7,
                "{} ({s1},{s2}): {} vs {want}",
                g.name(),
                k.eval(s1, s2)
            );
        }
    }
}

#[test]
fn mgi_kernel_matches_jhat_integral() {
    let leb = ArrivalMeasure::lebesgue(1.0).unwrap();
    let g = ServiceDistribution::exponential(1.0).unwrap();
    let gt = ServiceDistribution::uniform(0.0, 1.0).unwrap();
    let x = 0.7;
    let k = kernel_mgi(&leb, &g, x, &gt);
    for (s1, s2) in [(0.2, 0.6), (0.8, 0.8), (0.4, 1.0)] {
        let j = |t: f64, y: f64, s: f64| if t <= s && y > s - t { 1.0 } else { 0.0 };
        let poisson = integrate(
            |t| {
                over_marks(
                    |y| j(t, y, s1) * j(t, y, s2),
                    |y| (-y).exp(),
                    40.0,
                    &[s1 - t, s2 - t],
                )
            },
            0.0,
            s1,
            1e-10,
        )
        .value;
        let jhat0 = |y: f64, s: f64| j(0.0, y, s) - gt.survival(s);
        let initial = over_marks(|y| jhat0(y, s1) * jhat0(y, s2), |_| 1.0, 1.0, &[s1, s2]);
        let want = poisson + x * initial;
        assert!(
            (k.eval(s1, s2) - want).abs() < 1e-8,
            "({s1},{s2}): {} vs {want}",
            k.eval(s1, s2)
        );
    }
}

#[test]
fn kernels_are_symmetric_psd_and_continuous() {
    let grid: Vec<f64> = (1..=40).map(|i| i as f64 / 40.0).collect();
    for (name, k) in bundled() {
        let m = k.matrix(&grid);
        assert!((&m - m.transpose()).amax() < 1e-14, "{name}");
        let eig = SymmetricEigen::new(m.clone());
        let trace = m.trace();
        assert!(
            eig.eigenvalues.min() >= -1e-10 * trace,
            "{name}: {}",
            eig.eigenvalues.min()
        );
        if let Some((c, beta)) = k.continuity_constants() {
            for &(s, t) in &[(0.1, 0.15), (0.3, 0.9), (0.5, 0.5001), (0.0, 1.0)] {
                let inc = k.increment_variance(s, t);
                assert!(
                    inc <= c * (t - s).abs().powf(beta) + 1e-12,
                    "{name} ({s},{t})"
                );
            }
        }
    }
}

#[test]
fn decomposition_sums_to_full_kernel() {
    let leb = ArrivalMeasure::lebesgue(1.0).unwrap();
    let g = ServiceDistribution::erlang(2, 3.0).unwrap();
    let gt = ServiceDistribution::pareto(2.5, 0.5).unwrap();
    let full = kernel_mgi(&leb, &g, 0.8, &gt);
    let parts = decompose_mgi(&leb, &g, 0.8, &gt);
    for (s, t) in [(0.2, 0.3), (0.5, 0.9), (1.0, 1.0), (0.0, 0.7)] {
        let sum: f64 = parts.iter().map(|p| p.eval(s, t)).sum();
        assert!((sum - full.eval(s, t)).abs() < 1e-10);
    }
}

#[test]
fn sampler_covariance_matches_kernel() {
    let grid: Vec<f64> = (1..=16).map(|i| i as f64 / 16.0).collect();
    let k = CovarianceKernel::brownian();
    let count = 100_000;
    let z = sample_paths(&k, &grid, count, &mut replication_rng(31, 0)).unwrap();
    let d = grid.len();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            let prods: Vec<f64> = (0..count).map(|r| z[(r, i)] * z[(r, j)]).collect();
            let mean = prods.iter().sum::<f64>() / count as f64;
            let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            let z_score = (mean - grid[i].min(grid[j])).abs() / (var / count as f64).sqrt();
            worst = worst.max(z_score);
        }
    }
    // 136 entries at a 4.5 SE threshold keeps the family-wise false alarm rare
    assert!(worst < 4.5, "{worst}");
}

#[test]
fn kl_properties_on_bundled_kernels() {
    let grid: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
    for (name, k) in bundled() {
        let kl = kl_decompose(&k, &grid).unwrap();
        let h = &kl.eigenfunctions;
        let gram = h.transpose() * h * kl.spacing;
        let top = kl.terms_for(0.999);
        assert!(top < grid.len(), "{name}");
        for a in 0..top.min(8) {
            for b in 0..top.min(8) {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((gram[(a, b)] - want).abs() < 1e-9, "{name}");
            }
        }
        let mut prev = f64::INFINITY;
        for terms in 0..=grid.len() {
            let r = kl.residual_norm(terms);
            assert!(r <= prev + 1e-14, "{name}");
            prev = r;
        }
        assert!(
            (kl.reconstruct(grid.len()) - k.matrix(&grid)).amax() < 1e-10,
            "{name}"
        );
    }
}

#[test]
fn kl_brownian_eigenvalues_approach_the_continuum() {
    let grid: Vec<f64> = (1..=512).map(|i| i as f64 / 512.0).collect();
    let kl = kl_decompose(&CovarianceKernel::brownian(), &grid).unwrap();
    for (k, l) in kl.eigenvalues.iter().take(4).enumerate() {
        let want = 1.0 / ((k as f64 + 0.5) * std::f64::consts::PI).powi(2);
        assert!((l - want).abs() < 1e-3, "{k}: {l} vs {want}");
    }
}
