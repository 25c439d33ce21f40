//! Parametric chain families and random test chains.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{MarkovChain, ReferencePair};
use crate::error::{Error, Result};

/// Four-state landscape `0, 1, 2, G` with a shallow well at 0 and a deep one at `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HModelParams {
    pub p: f64,
    pub h: f64,
}

impl HModelParams {
    pub const TARGET: usize = 3;

    /// Reference pair `(1, {G})`.
    pub fn pair() -> ReferencePair {
        ReferencePair::new(1, [Self::TARGET]).expect("static pair")
    }

    pub fn energies(&self) -> [f64; 4] {
        [0.0, self.h, 1.0, -1.0]
    }
}

pub fn build_h_model(params: HModelParams) -> Result<MarkovChain> {
    let HModelParams { p, h } = params;
    if !(p > 0.0 && p < 1.0) || !(h > 0.0 && h < 1.0) {
        return Err(Error::ParamOutOfRange(format!("h-model needs p, h in (0,1), got p = {p}, h = {h}")));
    }
    let rows = vec![
        vec![(1, 0.5 * p.powf(h))],
        vec![(0, 0.5), (2, 0.5 * p.powf(1.0 - h))],
        vec![(1, 0.5), (3, 0.5)],
        vec![(2, 0.5 * p * p)],
    ];
    MarkovChain::from_off_diagonal(rows)
}

/// Unnormalized invariant weights `(1, p^h, p, 1/p)`.
pub fn h_model_weights(params: HModelParams) -> [f64; 4] {
    let HModelParams { p, h } = params;
    [1.0, p.powf(h), p, 1.0 / p]
}

/// Birth-death chain on `0..=L` with tunable barriers at both ends of a flat plateau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbcModelParams {
    #[serde(rename = "L")]
    pub l: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AbcModelParams {
    pub fn example_one(l: usize) -> Self {
        Self { l, a: 0.625, b: 0.25, c: 1.75 }
    }

    pub fn example_two(l: usize) -> Self {
        Self { l, a: 0.0, b: 0.0, c: 1.5 }
    }

    /// Reference pair `(0, {L})`.
    pub fn pair(&self) -> ReferencePair {
        ReferencePair::new(0, [self.l]).expect("L >= 6")
    }

    /// Log of the unnormalized invariant weights, base `L` exponents times `ln L`.
    pub fn log_weights(&self) -> Vec<f64> {
        let l = self.l;
        let ln_l = (l as f64).ln();
        let mut w = vec![0.0; l + 1];
        w[0] = self.a * ln_l;
        w[l - 2] = self.b * ln_l;
        w[l - 1] = (self.b - self.c) * ln_l;
        w[l] = (2.0 * self.a + 3.0 * self.b + self.c) * ln_l;
        w
    }
}

pub fn build_abc_model(params: AbcModelParams) -> Result<MarkovChain> {
    let (up, down) = abc_rates(params)?;
    MarkovChain::birth_death(&up, &down)
}

/// Up and down probabilities of the abc model, validated.
pub fn abc_rates(params: AbcModelParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let AbcModelParams { l, a, b, c } = params;
    if l < 6 {
        return Err(Error::ParamOutOfRange(format!("abc model needs L >= 6, got {l}")));
    }
    if !(b <= a && b <= c) {
        return Err(Error::ParamOutOfRange(format!("abc model needs b <= a and b <= c, got ({a}, {b}, {c})")));
    }
    let lf = l as f64;
    let probs = [
        ("L^-a/2", 0.5 * lf.powf(-a)),
        ("L^-b/2", 0.5 * lf.powf(-b)),
        ("L^-c/2", 0.5 * lf.powf(-c)),
        ("L^-2(a+b+c)/2", 0.5 * lf.powf(-2.0 * (a + b + c))),
    ];
    for (name, v) in probs {
        if !(v > 0.0 && v <= 0.5) {
            return Err(Error::ParamOutOfRange(format!("{name} = {v} is outside (0, 1/2]")));
        }
    }
    let mut up = vec![0.5; l + 1];
    let mut down = vec![0.5; l + 1];
    up[0] = probs[0].1;
    down[0] = 0.0;
    up[l - 2] = probs[2].1;
    down[l - 2] = probs[1].1;
    up[l] = 0.0;
    down[l] = probs[3].1;
    Ok((up, down))
}

/// Metropolis chain `P(x,y) = proposal(x,y) min(1, exp(-beta (H(y) - H(x))))`.
pub fn build_metropolis(energy: &[f64], beta: f64, proposal: &[Vec<(usize, f64)>]) -> Result<MarkovChain> {
    let n = energy.len();
    if proposal.len() != n {
        return Err(Error::InvalidInput("proposal needs one row per state".into()));
    }
    if !beta.is_finite() {
        return Err(Error::ParamOutOfRange(format!("beta = {beta}")));
    }
    let mut rows = Vec::with_capacity(n);
    for (x, prop) in proposal.iter().enumerate() {
        let total: f64 = prop.iter().filter(|e| e.0 != x).map(|e| e.1).sum();
        if prop.iter().any(|e| !(e.1 >= 0.0) || e.0 >= n) || total > 1.0 {
            return Err(Error::ParamOutOfRange(format!("proposal row {x} is not substochastic")));
        }
        let row = prop
            .iter()
            .filter(|e| e.0 != x)
            .map(|&(y, q)| {
                let de = energy[y] - energy[x];
                let acc = if de <= 0.0 { 1.0 } else { (-beta * de).exp() };
                (y, q * acc)
            })
            .collect();
        rows.push(row);
    }
    MarkovChain::from_off_diagonal(rows)
}

/// Nearest-neighbour proposal with probability `q` to each side on a path of `n` states.
pub fn path_proposal(n: usize, q: f64) -> Vec<Vec<(usize, f64)>> {
    (0..n)
        .map(|i| {
            let mut row = Vec::new();
            if i > 0 {
                row.push((i - 1, q));
            }
            if i + 1 < n {
                row.push((i + 1, q));
            }
            row
        })
        .collect()
}

/// Random irreducible chain: a random Hamiltonian cycle plus extra edges with
/// probability `density`, holding probability uniform in `[0, 1/2)`.
pub fn random_chain<R: Rng + ?Sized>(rng: &mut R, n: usize, density: f64) -> MarkovChain {
    random_weighted(rng, n, density, |_, _| 1.0)
}

/// Random irreducible chain with a random reference pair whose target is hard
/// to reach: every edge into `G` is damped by `10^{-U(0, max_decades)}`.
pub fn random_metastable_chain<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    density: f64,
    max_decades: f64,
) -> (MarkovChain, ReferencePair) {
    assert!(n >= 2);
    let mut states: Vec<usize> = (0..n).collect();
    states.shuffle(rng);
    let g_size = rng.random_range(1..=(n / 3).max(1));
    let target: Vec<usize> = states[..g_size].to_vec();
    let x0 = states[g_size];
    let in_target = crate::chain::mask(n, &target);
    let damp: Vec<f64> = (0..n * n).map(|_| 10f64.powf(-rng.random_range(0.0..max_decades))).collect();
    let chain = random_weighted(rng, n, density, |i, j| if in_target[j] && !in_target[i] { damp[i * n + j] } else { 1.0 });
    (chain, ReferencePair::new(x0, target).expect("x0 outside target"))
}

fn random_weighted<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    density: f64,
    scale: impl Fn(usize, usize) -> f64,
) -> MarkovChain {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut support = vec![false; n * n];
    for k in 0..n {
        let (i, j) = (order[k], order[(k + 1) % n]);
        if i != j {
            support[i * n + j] = true;
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < density {
                support[i * n + j] = true;
            }
        }
    }
    let rows = (0..n)
        .map(|i| {
            let raw: Vec<(usize, f64)> = (0..n)
                .filter(|&j| support[i * n + j])
                .map(|j| (j, rng.random_range(0.05..1.0)))
                .collect();
            let total: f64 = raw.iter().map(|e| e.1).sum();
            let hold = rng.random_range(0.0..0.5);
            raw.into_iter().map(|(j, w)| (j, (1.0 - hold) * w / total * scale(i, j))).collect()
        })
        .collect();
    MarkovChain::from_off_diagonal(rows).expect("indices in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn h_model_rates_and_limit() {
        let c = build_h_model(HModelParams { p: 0.01, h: 0.25 }).unwrap();
        assert!(c.validate().passed());
        assert_eq!(c.n(), 4);
        assert_relative_eq!(c.prob(2, 3), 0.5);
        assert_relative_eq!(c.prob(3, 2), 0.5e-4, max_relative = 1e-15);
        let near_zero = build_h_model(HModelParams { p: 0.01, h: 1e-9 }).unwrap();
        assert_relative_eq!(near_zero.prob(0, 1), 0.5, max_relative = 1e-8);
        assert!(build_h_model(HModelParams { p: 1.0, h: 0.5 }).is_err());
    }

    #[test]
    fn h_model_stationary_is_gibbs() {
        for &p in &[1e-2, 1e-3, 1e-4] {
            let params = HModelParams { p, h: 0.25 };
            let pi = build_h_model(params).unwrap().stationary_distribution().unwrap();
            let w = h_model_weights(params);
            let z: f64 = w.iter().sum();
            for i in 0..4 {
                assert_relative_eq!(pi.weights[i], w[i] / z, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn abc_rows_sum_to_one_by_direct_summation() {
        let c = build_abc_model(AbcModelParams::example_one(50)).unwrap();
        let dense = c.to_dense();
        for row in &dense {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
        assert!(c.validate().passed());
    }

    #[test]
    fn abc_stationary_matches_closed_form() {
        let params = AbcModelParams::example_one(64);
        let pi = build_abc_model(params).unwrap().stationary_distribution().unwrap();
        let expect = crate::chain::normalize_log(&params.log_weights());
        for i in 0..=64 {
            assert_relative_eq!(pi.weights[i], expect[i], max_relative = 1e-10);
        }
    }

    #[test]
    fn abc_flat_case_is_fair_walk() {
        let c = build_abc_model(AbcModelParams { l: 10, a: 0.0, b: 0.0, c: 0.0 }).unwrap();
        for i in 1..10 {
            assert_eq!(c.down(i), 0.5);
        }
        let pi = c.stationary_distribution().unwrap();
        for i in 1..9 {
            assert_relative_eq!(pi.weights[i], pi.weights[1], max_relative = 1e-14);
        }
    }

    #[test]
    fn abc_guards() {
        assert!(build_abc_model(AbcModelParams { l: 5, a: 0.0, b: 0.0, c: 0.0 }).is_err());
        assert!(build_abc_model(AbcModelParams { l: 20, a: 0.0, b: 0.5, c: 1.0 }).is_err());
        assert!(build_abc_model(AbcModelParams { l: 20, a: -1.0, b: -1.0, c: 0.0 }).is_err());
    }

    #[test]
    fn birth_death_reproduces_abc() {
        let params = AbcModelParams::example_two(40);
        let (up, down) = abc_rates(params).unwrap();
        assert_eq!(MarkovChain::birth_death(&up, &down).unwrap(), build_abc_model(params).unwrap());
    }

    #[test]
    fn metropolis_reproduces_h_model() {
        let params = HModelParams { p: 1e-3, h: 0.25 };
        let m = build_metropolis(&params.energies(), -params.p.ln(), &path_proposal(4, 0.5)).unwrap();
        let h = build_h_model(params).unwrap();
        let (a, b) = (m.to_dense(), h.to_dense());
        for i in 0..4 {
            for j in 0..4 {
                assert!((a[i][j] - b[i][j]).abs() <= 1e-15, "({i},{j}): {} vs {}", a[i][j], b[i][j]);
            }
        }
    }

    #[test]
    fn metropolis_zero_beta_is_proposal_and_uphill_decreases() {
        let prop = path_proposal(3, 0.5);
        let e = [0.0, 1.0, 0.5];
        let m0 = build_metropolis(&e, 0.0, &prop).unwrap();
        assert_eq!(m0.prob(0, 1), 0.5);
        let mut last = 1.0;
        for beta in [0.5, 1.0, 2.0, 4.0] {
            let p01 = build_metropolis(&e, beta, &prop).unwrap().prob(0, 1);
            assert!(p01 < last);
            last = p01;
        }
    }

    #[test]
    fn random_chains_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..15 {
            assert!(random_chain(&mut rng, n, 0.3).validate().passed());
            let (c, pair) = random_metastable_chain(&mut rng, n, 0.3, 3.0);
            assert!(c.validate().passed());
            assert!(!pair.target.contains(&pair.x0));
        }
    }
}
