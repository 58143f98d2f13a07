use std::collections::BTreeMap;

use num_complex::Complex64;
use pdqp::algorithms::{self, marked_probability_curve, pdqp_success_probability};
use pdqp::analysis::{deferred_pair_distribution, FiniteDistribution};
use pdqp::circuit::{parse_circuit, serialize_circuit};
use pdqp::corpus;
use pdqp::exact_sim::exact_history_distribution;
use pdqp::qp_oracle::{history_distribution_exact, DEFAULT_BUDGET};
use pdqp::rng;
use pdqp::statevector::StateVector;
use proptest::prelude::*;

fn dist(weights: &[f64]) -> FiniteDistribution<usize> {
    FiniteDistribution::from_weights(weights.iter().copied().enumerate()).unwrap()
}

fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter("non-zero mass", |w| w.iter().sum::<f64>() > 1e-3)
}

/// Bloch vector of a one-qubit pure state.
fn bloch(s: &StateVector) -> [f64; 3] {
    let a = s.amplitudes();
    let c = a[0].conj() * a[1];
    [2.0 * c.re, 2.0 * c.im, a[0].norm_sqr() - a[1].norm_sqr()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_round_trip(seed in any::<u64>(), n in 1usize..6, steps in 1usize..6) {
        let c = corpus::random_write_once_circuit(&mut rng::seeded(seed), n, steps).unwrap();
        let text = serialize_circuit(&c);
        let back = parse_circuit(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(serialize_circuit(&back), text);
    }

    #[test]
    fn gates_preserve_inner_products(seed in any::<u64>(), n in 1usize..6, count in 0usize..20) {
        let mut g = rng::seeded(seed);
        let mut a = corpus::random_state(n, &mut g).unwrap();
        let mut b = corpus::random_state(n, &mut g).unwrap();
        let before = a.inner(&b).unwrap();
        let gates = corpus::random_gates(&mut g, n, count, &[]);
        a.apply_all(&gates).unwrap();
        b.apply_all(&gates).unwrap();
        prop_assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert!((a.inner(&b).unwrap() - before).norm() < 1e-12);
    }

    #[test]
    fn one_qubit_trace_distance_is_half_bloch_distance(seed in any::<u64>()) {
        let mut g = rng::seeded(seed);
        let a = corpus::random_state(1, &mut g).unwrap();
        let b = corpus::random_state(1, &mut g).unwrap();
        let (ra, rb) = (bloch(&a), bloch(&b));
        let want = 0.5 * ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!((a.trace_distance(&b).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn total_variation_is_a_metric(p in weights(6), q in weights(6), r in weights(6)) {
        let (p, q, r) = (dist(&p), dist(&q), dist(&r));
        let pq = p.total_variation(&q);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
        prop_assert!((pq - q.total_variation(&p)).abs() < 1e-15);
        prop_assert!(p.total_variation(&p) == 0.0);
        prop_assert!(pq <= p.total_variation(&r) + r.total_variation(&q) + 1e-12);
    }

    #[test]
    fn coarse_graining_never_increases_total_variation(p in weights(8), q in weights(8), k in 1usize..8) {
        let (p, q) = (dist(&p), dist(&q));
        let f = |x: &usize| x % k;
        prop_assert!(p.map(f).total_variation(&q.map(f)) <= p.total_variation(&q) + 1e-12);
    }

    #[test]
    fn repetition_success_is_monotone(p in 0.0f64..1.0, r in 1usize..200) {
        let now = pdqp_success_probability(p, r);
        prop_assert!(pdqp_success_probability(p, r + 1) >= now);
        prop_assert!((now - (1.0 - (1.0 - p).powi(r as i32))).abs() < 1e-12);
    }

    #[test]
    fn sampler_oracles_agree(seed in any::<u64>(), n in 1usize..4, steps in 1usize..4) {
        let c = corpus::random_write_once_circuit(&mut rng::seeded(seed), n, steps).unwrap();
        let a = history_distribution_exact(&c, DEFAULT_BUDGET).unwrap();
        let b = exact_history_distribution(&c, DEFAULT_BUDGET).unwrap();
        prop_assert!(a.max_abs_difference(&b) < 1e-10);
    }

    #[test]
    fn deferred_pairs_match_history_marginals(seed in any::<u64>(), n in 1usize..4, steps in 1usize..4) {
        let c = corpus::random_write_once_circuit(&mut rng::seeded(seed), n, steps).unwrap();
        let h = history_distribution_exact(&c, DEFAULT_BUDGET).unwrap();
        for i in 1..=c.len() {
            let deferred = deferred_pair_distribution(&c, i).unwrap();
            let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for (hist, p) in h.iter() {
                *pairs.entry((hist[i - 1], hist[i])).or_default() += p;
            }
            let dim = 1usize << n;
            for a in 0..dim {
                for b in 0..dim {
                    let want = pairs.get(&(a, b)).copied().unwrap_or(0.0);
                    prop_assert!((deferred.get(a, b) - want).abs() < 1e-10, "step {i} pair ({a}, {b})");
                }
            }
        }
    }
}

#[test]
fn marked_curve_matches_rotation_formula() {
    for n in 2..=9 {
        let theta = (1.0 / ((1usize << n) as f64).sqrt()).asin();
        let curve = marked_probability_curve(n, 3, 12).unwrap();
        for (k, p) in curve.iter().enumerate() {
            let want = ((2 * k + 1) as f64 * theta).sin().powi(2);
            assert!((p - want).abs() < 1e-10, "n={n} k={k}: {p} vs {want}");
        }
    }
}

#[test]
fn communication_error_matches_binomial_tail() {
    // Decoding is correct iff ones/R lands between the sin² images of the
    // neighbouring half-integer angles.
    let (n, r) = (3usize, 40usize);
    let angle = |t: f64| (t / 8.0 * std::f64::consts::FRAC_PI_2).sin().powi(2);
    let choose = |k: usize| (0..k).fold(1u128, |acc, i| acc * (r - i) as u128 / (i + 1) as u128);
    for x in 0..8usize {
        let p = angle(x as f64);
        let (lo, hi) = (angle(x as f64 - 0.5), if x == 7 { 2.0 } else { angle(x as f64 + 0.5) });
        let correct: f64 = (0..=r)
            .filter(|&k| {
                let f = k as f64 / r as f64;
                (x == 0 || f >= lo) && f < hi
            })
            .map(|k| choose(k) as f64 * p.powi(k as i32) * (1.0 - p).powi((r - k) as i32))
            .sum();
        let got = algorithms::one_qubit_comm_error_probability(x, n, r);
        assert!(
            (got - (1.0 - correct)).abs() < 1e-9,
            "x={x}: {got} vs {}",
            1.0 - correct
        );
    }
    assert!(algorithms::one_qubit_comm_error_probability(5, 3, 1 << 12) <= 0.05);
}

#[test]
fn amplitudes_are_normalized_after_rotation() {
    let s = StateVector::normalized(vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)]).unwrap();
    assert!((s.probabilities()[0] - 0.36).abs() < 1e-15);
}
