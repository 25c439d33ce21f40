use metahit::fit::loglog_fit;
use metahit::hitting::{
    green_function, hitting_probabilities, mean_hitting_time, mean_hitting_times, survival_curve, Stop,
};
use metahit::hypotheses::{pair_scales, renewal_identity};
use metahit::models::{random_chain, random_metastable_chain};
use metahit::montecarlo::sample_hitting_times;
use metahit::network::{edge_resistances, total_resistance_vs_green};
use metahit::recurrence::recurrence_error;
use metahit::{MarkovChain, ReferencePair};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn metastable(seed: u64, n: usize) -> (MarkovChain, ReferencePair) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_metastable_chain(&mut rng, n, 0.4, 2.0)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn renewal_identity_holds(seed in any::<u64>(), n in 3usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chain = random_chain(&mut rng, n, 0.3);
        let x = rng.random_range(0..n);
        let z = (x + 1 + rng.random_range(0..n - 1)) % n;
        let y = rng.random_range(0..n);
        let (lhs, rhs) = renewal_identity(&chain, x, y, z).unwrap();
        prop_assert!(rel(lhs, rhs) < 1e-9, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn green_rows_sum_to_means(seed in any::<u64>(), n in 2usize..14) {
        let (chain, pair) = metastable(seed, n);
        let means = mean_hitting_times(&chain, &pair.target).unwrap();
        let g = green_function(&chain, &pair.target).unwrap();
        for x in (0..n).filter(|x| !pair.target.contains(x)) {
            prop_assert!(rel(g.row_sum(x), means[x]) < 1e-8);
        }
    }

    #[test]
    fn local_time_scale_below_mean(seed in any::<u64>(), n in 2usize..14) {
        let (chain, pair) = metastable(seed, n);
        let sc = pair_scales(&chain, &pair).unwrap();
        prop_assert!(sc.t_lt <= sc.t_e * (1.0 + 1e-12));
        prop_assert!(sc.t_lt >= 1.0);
    }

    #[test]
    fn recurrence_error_is_submultiplicative(seed in any::<u64>(), n in 3usize..12, r1 in 1usize..20, r2 in 1usize..20) {
        let (chain, pair) = metastable(seed, n);
        let (e1, _) = recurrence_error(&chain, &pair, r1).unwrap();
        let (e2, _) = recurrence_error(&chain, &pair, r2).unwrap();
        let (e12, _) = recurrence_error(&chain, &pair, r1 + r2).unwrap();
        prop_assert!(e12 <= e1 * e2 * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn basin_probabilities_are_harmonic(seed in any::<u64>(), n in 3usize..12) {
        let (chain, pair) = metastable(seed, n);
        let h = hitting_probabilities(&chain, &[pair.x0], &pair.target).unwrap();
        let boundary = pair.with_x0();
        for x in (0..n).filter(|x| !boundary.contains(x)) {
            let mean: f64 = (0..n).map(|y| chain.prob(x, y) * h[y]).sum();
            prop_assert!((mean - h[x]).abs() < 1e-12);
        }
        prop_assert_eq!(h[pair.x0], 1.0);
        for &g in &pair.target {
            prop_assert_eq!(h[g], 0.0);
        }
    }

    #[test]
    fn survival_is_monotone(seed in any::<u64>(), n in 2usize..12) {
        let (chain, pair) = metastable(seed, n);
        let t = mean_hitting_time(&chain, pair.x0, &pair.target).unwrap();
        let curve = survival_curve(&chain, pair.x0, &pair.target, Stop::Horizon((3.0 * t) as usize + 1)).unwrap();
        for w in curve.values.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        for k in 0..=curve.horizon {
            prop_assert!((curve.survival(k) + curve.cdf_at(k) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resistance_matches_green_ratio(seed in any::<u64>(), n in 3usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // symmetric conductances give a chain reversible w.r.t. the row totals
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                if j == i + 1 || rng.random_bool(0.3) {
                    let v = rng.random_range(0.01..1.0);
                    c[i][j] = v;
                    c[j][i] = v;
                }
            }
        }
        let w: Vec<f64> = c.iter().map(|r| r.iter().sum::<f64>() * 2.0).collect();
        let rows = (0..n).map(|i| (0..n).filter(|&j| c[i][j] > 0.0).map(|j| (j, c[i][j] / w[i])).collect()).collect();
        let chain = MarkovChain::from_off_diagonal(rows).unwrap();
        let net = edge_resistances(&chain, &w).unwrap();
        for (x, y, r) in net.edges() {
            prop_assert!(rel(net.resistance(y, x).unwrap(), r) < 1e-10);
        }
        let b = rng.random_range(0..n);
        for x in (0..n).filter(|&x| x != b) {
            prop_assert!(total_resistance_vs_green(&chain, &w, x, &[b]).unwrap().rel_gap < 1e-8);
        }
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>()) {
        let (chain, pair) = metastable(seed % 1000, 6);
        let a = sample_hitting_times(&chain, pair.x0, &pair.target, 50, seed).unwrap();
        let b = sample_hitting_times(&chain, pair.x0, &pair.target, 50, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fit_recovers_power_laws(slope in -3.0f64..3.0, scale in 0.01f64..100.0) {
        let x: Vec<f64> = (0..6).map(|k| 2f64.powi(k)).collect();
        let y: Vec<f64> = x.iter().map(|v| scale * v.powf(slope)).collect();
        let fit = loglog_fit(&x, &y).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!(fit.max_rel_residual < 1e-10);
    }
}
