use heavytraffic::exec::replication_rng;
use heavytraffic::laws::{RenewalLaw, ServiceDistribution};
use proptest::prelude::*;
use rand::Rng;

/// Zero-delayed renewal indicators at lags `1..=len`, sampled by hand from
/// the pmf.
fn zero_delayed(probs: &[f64], len: usize, rng: &mut impl Rng) -> Vec<bool> {
    let mut hits = vec![false; len];
    let mut pos = 0usize;
    loop {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = probs.len();
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                k = i + 1;
                break;
            }
        }
        pos += k;
        if pos > len {
            return hits;
        }
        hits[pos - 1] = true;
    }
}

#[test]
fn renewal_mass_matches_simulated_frequencies() {
    let law = RenewalLaw::uniform_int(1, 3).unwrap();
    let u = law.renewal_mass(10);
    let reps = 100_000;
    let mut counts = [0u64; 10];
    let mut rng = replication_rng(11, 0);
    for _ in 0..reps {
        for (c, hit) in counts
            .iter_mut()
            .zip(zero_delayed(law.pmf().probs(), 10, &mut rng))
        {
            *c += u64::from(hit);
        }
    }
    for (l, (&c, &ul)) in counts.iter().zip(&u).enumerate() {
        let p = c as f64 / reps as f64;
        let se = (ul * (1.0 - ul) / reps as f64).sqrt();
        assert!((p - ul).abs() <= 4.0 * se, "lag {}: {p} vs {ul}", l + 1);
    }
}

#[test]
fn renewal_mass_converges_geometrically() {
    // distance to 1/m decays at least geometrically for aperiodic bounded laws
    let law = RenewalLaw::uniform_int(1, 2).unwrap();
    let u = law.renewal_mass(40);
    let inv_m = 1.0 / law.mean();
    for l in 1..40 {
        let here = (u[l - 1] - inv_m).abs();
        assert!((u[l] - inv_m).abs() <= 0.5 * here + 1e-15, "lag {l}");
    }
    // u_l − 1/m = (1/3)(−1/2)^l for uniform{1,2}
    for (l, ul) in u.iter().enumerate() {
        let want = inv_m + (-0.5f64).powi(l as i32 + 1) / 3.0;
        assert!((ul - want).abs() < 1e-14);
    }
}

#[test]
fn zeta_tail_decay_exponent() {
    // P(R ≥ k) ~ k^{1−s}; fit the log-log slope of the tail
    let s = 4.5;
    let law = RenewalLaw::zeta(s).unwrap();
    let probs = law.pmf().probs();
    let tail = |k: usize| probs[k..].iter().sum::<f64>();
    let (a, b) = (50usize, 400usize);
    let slope = (tail(b).ln() - tail(a).ln()) / ((b as f64).ln() - (a as f64).ln());
    assert!((slope - (1.0 - s)).abs() < 0.05, "{slope}");
}

#[test]
fn sample_moments() {
    let law = RenewalLaw::geometric(0.3).unwrap();
    let mut rng = replication_rng(3, 0);
    let n = 200_000;
    let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng) as f64).collect();
    let m = xs.iter().sum::<f64>() / n as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((m - law.mean()).abs() < 4.0 * (law.variance() / n as f64).sqrt());
    assert!((v - law.variance()).abs() / law.variance() < 0.03);
}

#[test]
fn stationary_delay_law_is_shift_invariant() {
    // under the delay law, P(renewal at site j) = 1/m for every j
    let law = RenewalLaw::uniform_int(2, 5).unwrap();
    let delay = law.delay_law();
    let u = law.renewal_mass(12);
    for j in 1..=12usize {
        let mut p = delay.prob(j);
        for k in 1..j {
            p += delay.prob(k) * u[j - k - 1];
        }
        assert!((p - 1.0 / law.mean()).abs() < 1e-13, "site {j}: {p}");
    }
}

#[test]
fn service_samplers_match_means() {
    let laws = [
        ServiceDistribution::exponential(2.0).unwrap(),
        ServiceDistribution::uniform(0.5, 1.5).unwrap(),
        ServiceDistribution::pareto(3.5, 1.0).unwrap(),
        ServiceDistribution::erlang(3, 2.0).unwrap(),
    ];
    let mut rng = replication_rng(5, 0);
    for g in laws {
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!(
            (m - g.mean()).abs() <= 4.0 * sd / (n as f64).sqrt(),
            "{}",
            g.name()
        );
    }
}

proptest! {
    #[test]
    fn pmf_laws_are_normalized(weights in proptest::collection::vec(0.01f64..1.0, 2..8)) {
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let law = RenewalLaw::from_pmf(probs.clone(), None).unwrap();
        prop_assert!((law.pmf().total() - 1.0).abs() < 1e-12);
        prop_assert!((law.delay_law().total() - 1.0).abs() < 1e-12);
        let u = law.renewal_mass(60);
        prop_assert!(u.iter().all(|&x| (0.0..=1.0 + 1e-12).contains(&x)));
        // renewal equation u_l = Σ_k p_k u_{l−k} with u_0 = 1
        for l in 1..=60usize {
            let rhs: f64 = (1..=l.min(probs.len()))
                .map(|k| probs[k - 1] * if k == l { 1.0 } else { u[l - k - 1] })
                .sum();
            prop_assert!((u[l - 1] - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn survival_complements_cdf(rate in 0.1f64..5.0, t in 0.0f64..10.0, u in 0.0f64..0.999) {
        let g = ServiceDistribution::exponential(rate).unwrap();
        prop_assert!((g.cdf(t) + g.survival(t) - 1.0).abs() < 1e-14);
        let q = g.quantile(u);
        prop_assert!((g.cdf(q) - u).abs() < 1e-12);
    }
}
