mod common;

use common::enumerate_signed_ranks;
use glovekit::stats::{
    abs_midranks, binomial_one_sided, holm_correct, median_iqr, wilcoxon_signed_rank, PairedSample, Side,
    WilcoxonOptions,
};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn paired(d: &[f64]) -> PairedSample {
    PairedSample::new(d.to_vec(), vec![0.0; d.len()]).unwrap()
}

fn random_differences(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // Small integer magnitudes so ties and zeros are common.
    (0..n).map(|_| rng.random_range(-6i32..=9) as f64 * 0.5).collect()
}

#[test]
fn exact_p_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = 0;
    while cases < 100 {
        let n = rng.random_range(3..=15);
        let d = random_differences(&mut rng, n);
        if d.iter().all(|v| *v == 0.0) {
            continue;
        }
        let r = wilcoxon_signed_rank(&paired(&d), Side::Greater, &WilcoxonOptions::default()).unwrap();
        let (p, _, _) = enumerate_signed_ranks(&d);
        assert!((r.p_exact.unwrap() - p).abs() < 1e-6, "{d:?}: {} vs {p}", r.p_exact.unwrap());
        cases += 1;
    }
}

#[test]
fn eighteen_nonzero_matches_enumeration_moments() {
    let d = [
        3.0, 5.0, -1.0, 2.0, 2.0, 7.5, -2.0, 4.0, 6.0, 0.0, 1.0, 8.0, 3.0, -4.0, 9.0, 0.0, 5.0, 2.5, 6.0, 1.5,
    ];
    let r = wilcoxon_signed_rank(&paired(&d), Side::Greater, &WilcoxonOptions::default()).unwrap();
    assert_eq!(r.n_effective, 18);
    let (p, mean, var) = enumerate_signed_ranks(&d);
    let z = (r.statistic - mean - 0.5) / var.sqrt();
    assert!((r.z - z).abs() < 1e-6);
    assert!((r.effect - z / 18f64.sqrt()).abs() < 1e-6);
    assert!((r.p_exact.unwrap() - p).abs() < 1e-9);
}

#[test]
fn binomial_matches_exact_rational_sum() {
    let binom = |n: u64, k: u64| -> BigUint {
        (0..k).fold(BigUint::one(), |acc, i| acc * BigUint::from(n - i) / BigUint::from(i + 1))
    };
    let tail = |k: u64, n: u64, num: u64, den: u64| -> f64 {
        let p = BigRational::new(num.into(), den.into());
        let q = BigRational::one() - p.clone();
        let mut sum = BigRational::zero();
        for i in k..=n {
            let c = BigRational::from_integer(binom(n, i).into());
            sum += c * num_traits::pow(p.clone(), i as usize) * num_traits::pow(q.clone(), (n - i) as usize);
        }
        sum.to_f64().unwrap()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let n = rng.random_range(1..=200u64);
        let k = rng.random_range(0..=n);
        let (num, den) = [(1, 2), (1, 3), (2, 5), (3, 4)][rng.random_range(0..4)];
        let got = binomial_one_sided(k, n, num as f64 / den as f64).unwrap().p_raw;
        let want = tail(k, n, num, den);
        assert!((got - want).abs() <= 1e-10 + 1e-8 * want, "k {k} n {n} p0 {num}/{den}: {got} vs {want}");
    }
}

#[test]
fn quartiles_match_sorting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let mut s = v.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| {
            let pos = p * (n - 1) as f64;
            let j = pos as usize;
            if j + 1 >= n {
                s[n - 1]
            } else {
                s[j] * (1.0 - (pos - j as f64)) + s[j + 1] * (pos - j as f64)
            }
        };
        let got = median_iqr(&v).unwrap();
        for (a, b) in [(got.q1, q(0.25)), (got.median, q(0.5)), (got.q3, q(0.75))] {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(got.q1 <= got.median && got.median <= got.q3);
    }
}

proptest! {
    #[test]
    fn rank_sums_partition(d in prop::collection::vec(-20i32..20, 1..40)) {
        let d: Vec<f64> = d.into_iter().map(f64::from).collect();
        prop_assume!(d.iter().any(|v| *v != 0.0));
        let r = wilcoxon_signed_rank(&paired(&d), Side::Greater, &WilcoxonOptions::default()).unwrap();
        let flipped: Vec<f64> = d.iter().map(|v| -v).collect();
        let r2 = wilcoxon_signed_rank(&paired(&flipped), Side::Greater, &WilcoxonOptions::default()).unwrap();
        let n = r.n_effective as f64;
        prop_assert!((r.statistic + r2.statistic - n * (n + 1.0) / 2.0).abs() < 1e-9);
        prop_assert!((r.effect - r.z / n.sqrt()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.p_raw));
    }

    #[test]
    fn rank_level_monotone_transform_keeps_w(d in prop::collection::vec(-20i32..20, 1..30), a in 0.1f64..5.0, b in 0.5f64..3.0) {
        let d: Vec<f64> = d.into_iter().map(f64::from).collect();
        prop_assume!(d.iter().any(|v| *v != 0.0));
        let g: Vec<f64> = d.iter().map(|v| v.signum() * (a * v.abs().powf(b) + v.abs())).collect();
        let w = |x: &[f64]| wilcoxon_signed_rank(&paired(x), Side::Greater, &WilcoxonOptions::default()).unwrap().statistic;
        prop_assert_eq!(w(&d), w(&g));
        let (r1, _) = abs_midranks(&d);
        let (r2, _) = abs_midranks(&g);
        prop_assert_eq!(r1, r2);
    }

    #[test]
    fn holm_dominates_and_keeps_order(p in prop::collection::vec(0.0f64..=1.0, 1..20)) {
        let adj = holm_correct(&p).unwrap();
        for i in 0..p.len() {
            prop_assert!(adj[i] >= p[i] && adj[i] <= 1.0);
            for j in 0..p.len() {
                if p[i] <= p[j] {
                    prop_assert!(adj[i] <= adj[j]);
                }
            }
        }
    }

    #[test]
    fn binomial_tail_is_one_minus_cdf(n in 1u64..200, k_frac in 0.0f64..=1.0, p0 in 0.05f64..0.95) {
        use statrs::distribution::{Binomial, DiscreteCDF};
        let k = (k_frac * n as f64).round() as u64;
        let r = binomial_one_sided(k, n, p0).unwrap();
        let cdf = if k == 0 { 0.0 } else { Binomial::new(p0, n).unwrap().cdf(k - 1) };
        prop_assert!((r.p_raw - (1.0 - cdf)).abs() < 1e-9);
    }
}
