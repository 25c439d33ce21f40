//! Electric networks of reversible chains.
//!
//! A chain reversible with respect to weights `w` becomes a network with
//! conductance `w(x)P(x,y)` on each support edge. With `Z = sum w` and
//! `mu = w / Z`, the physical resistance is `r_{x,y} = Z / (w(x)P(x,y))`.
//! Everything here is stored in units of `Z` and multiplied back on output, so
//! results are identical whatever scaling of `w` is passed in.

use serde::{Deserialize, Serialize};

use crate::chain::{mask, MarkovChain};
use crate::error::{Error, Result};
use crate::hitting::{check_set, green_diagonal};
use crate::linalg::{DenseMMatrix, TriMMatrix};

/// Relative detailed-balance tolerance accepted by [`edge_resistances`].
pub const REVERSIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistorNetwork {
    pub weights: Vec<f64>,
    /// `Z = sum_x w(x)`.
    pub z: f64,
    /// `adjacency[x]` lists `(y, w(x)P(x,y))` over support edges.
    adjacency: Vec<Vec<(usize, f64)>>,
    birth_death: bool,
}

impl ResistorNetwork {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn mu(&self, x: usize) -> f64 {
        self.weights[x] / self.z
    }

    pub fn neighbours(&self, x: usize) -> &[(usize, f64)] {
        &self.adjacency[x]
    }

    fn unit_conductance(&self, x: usize, y: usize) -> Option<f64> {
        self.adjacency[x].iter().find(|e| e.0 == y).map(|e| e.1)
    }

    /// `r_{x,y} = (mu(x)P(x,y))^{-1}`, read from the `x` side; `None` off the support.
    pub fn resistance(&self, x: usize, y: usize) -> Option<f64> {
        self.unit_conductance(x, y).map(|c| self.z / c)
    }

    /// All support edges `(x, y, r_{x,y})` with `x < y`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for x in 0..self.n() {
            for &(y, c) in &self.adjacency[x] {
                if x < y {
                    out.push((x, y, self.z / c));
                }
            }
        }
        out
    }

    pub fn is_birth_death(&self) -> bool {
        self.birth_death
    }
}

/// Builds the network of `chain` under the (unnormalized) weights `measure`.
///
/// Fails with [`Error::NotReversible`] when some edge violates detailed balance
/// by more than [`REVERSIBILITY_TOL`] relative, or is one-directional.
pub fn edge_resistances(chain: &MarkovChain, measure: &[f64]) -> Result<ResistorNetwork> {
    let n = chain.n();
    if measure.len() != n {
        return Err(Error::InvalidInput(format!("measure has {} entries, chain has {n} states", measure.len())));
    }
    if measure.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput("measure must be positive and finite".into()));
    }
    let z: f64 = measure.iter().sum();
    let mut worst: f64 = 0.0;
    let mut adjacency = Vec::with_capacity(n);
    for x in 0..n {
        let mut row = Vec::new();
        for &(y, p) in chain.off_diagonal(x) {
            if p == 0.0 {
                continue;
            }
            let fwd = measure[x] * p;
            let bwd = measure[y] * chain.prob(y, x);
            worst = worst.max((fwd - bwd).abs() / fwd.max(bwd));
            row.push((y, fwd));
        }
        adjacency.push(row);
    }
    if worst > REVERSIBILITY_TOL {
        return Err(Error::NotReversible(worst));
    }
    Ok(ResistorNetwork { weights: measure.to_vec(), z, adjacency, birth_death: chain.is_birth_death() })
}

/// Series resistances of a birth-death network on `0..=L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesResistances {
    /// `r_k` between `k` and `k + 1`, for `k = 0..L`.
    pub edges: Vec<f64>,
    /// `R_0^x = sum_{k < x} r_k`.
    pub to_left: Vec<f64>,
    /// `R_L^x = sum_{k >= x} r_k`.
    pub to_right: Vec<f64>,
}

impl SeriesResistances {
    pub fn total(&self) -> f64 {
        self.to_right[0]
    }

    /// `R_{0,L}^x`, the left and right branches in parallel.
    pub fn to_both_ends(&self, x: usize) -> f64 {
        let (a, b) = (self.to_left[x], self.to_right[x]);
        if a == 0.0 || b == 0.0 {
            0.0
        } else {
            a * (self.total() - a) / self.total()
        }
    }
}

pub fn series_resistances(net: &ResistorNetwork) -> Result<SeriesResistances> {
    if !net.birth_death {
        return Err(Error::NotBirthDeath);
    }
    let n = net.n();
    let edges: Vec<f64> = (0..n.saturating_sub(1))
        .map(|k| net.resistance(k, k + 1).ok_or(Error::NotBirthDeath))
        .collect::<Result<_>>()?;
    let mut to_left = vec![0.0; n];
    for x in 1..n {
        to_left[x] = to_left[x - 1] + edges[x - 1];
    }
    let mut to_right = vec![0.0; n];
    for x in (0..n.saturating_sub(1)).rev() {
        to_right[x] = to_right[x + 1] + edges[x];
    }
    Ok(SeriesResistances { edges, to_left, to_right })
}

/// Harmonic function equal to 1 on `high`, 0 on `low`, in the interior
/// `sum_y c(x,y)(u(y) - u(x)) = 0`.
fn harmonic(net: &ResistorNetwork, high: &[usize], low: &[usize]) -> Result<Vec<f64>> {
    let n = net.n();
    let is_high = mask(n, high);
    let is_low = mask(n, low);
    if high.iter().any(|&s| is_low[s]) {
        return Err(Error::InvalidInput("source and sink overlap".into()));
    }
    let interior: Vec<usize> = (0..n).filter(|&x| !is_high[x] && !is_low[x]).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &x) in interior.iter().enumerate() {
        pos[x] = k;
    }
    let m = interior.len();
    let mut rhs = vec![0.0; m];
    let tridiagonal = net.birth_death && interior.windows(2).all(|w| w[1] == w[0] + 1);
    let u_interior = if tridiagonal {
        let mut t = TriMMatrix { lo: vec![0.0; m], hi: vec![0.0; m], slack: vec![0.0; m] };
        for (k, &x) in interior.iter().enumerate() {
            for &(y, c) in &net.adjacency[x] {
                if pos[y] != usize::MAX {
                    if y < x {
                        t.lo[k] += c;
                    } else {
                        t.hi[k] += c;
                    }
                } else {
                    t.slack[k] += c;
                    if is_high[y] {
                        rhs[k] += c;
                    }
                }
            }
        }
        t.factor()?.solve(&rhs)
    } else {
        let mut a = DenseMMatrix::new(m);
        for (k, &x) in interior.iter().enumerate() {
            for &(y, c) in &net.adjacency[x] {
                if pos[y] != usize::MAX {
                    a.add_off(k, pos[y], c);
                } else {
                    a.add_slack(k, c);
                    if is_high[y] {
                        rhs[k] += c;
                    }
                }
            }
        }
        a.factor()?.solve(&rhs)
    };
    let mut u = vec![0.0; n];
    for &s in high {
        u[s] = 1.0;
    }
    for (k, &x) in interior.iter().enumerate() {
        u[x] = u_interior[k];
    }
    Ok(u)
}

/// Voltage at every node with `x` held at 1 and `B` grounded.
pub fn voltages(net: &ResistorNetwork, x: usize, b: &[usize]) -> Result<Vec<f64>> {
    check_nodes(net, x, b)?;
    harmonic(net, &[x], b)
}

/// `V_B^x(y)`, which equals the probability that the chain started at `y`
/// visits `x` before `B`.
pub fn voltage(net: &ResistorNetwork, x: usize, b: &[usize], y: usize) -> Result<f64> {
    if y >= net.n() {
        return Err(Error::InvalidInput(format!("query node {y} out of range")));
    }
    Ok(voltages(net, x, b)?[y])
}

/// `R_B^x` as a Dirichlet problem. The current out of `x` is computed with `B`
/// at potential 1 and `x` grounded, so no `1 - V` cancellation occurs.
pub fn effective_resistance(net: &ResistorNetwork, x: usize, b: &[usize]) -> Result<f64> {
    check_nodes(net, x, b)?;
    let w = harmonic(net, b, &[x])?;
    let current: f64 = net.adjacency[x].iter().map(|&(y, c)| c * w[y]).sum();
    if !(current > 0.0) {
        return Err(Error::SolverFailure(format!("no current flows from {x} into B")));
    }
    Ok(net.z / current)
}

fn check_nodes(net: &ResistorNetwork, x: usize, b: &[usize]) -> Result<()> {
    let n = net.n();
    if x >= n || b.iter().any(|&s| s >= n) {
        return Err(Error::InvalidInput(format!("node index out of range for n = {n}")));
    }
    if b.is_empty() {
        return Err(Error::InvalidInput("sink set is empty".into()));
    }
    if b.contains(&x) {
        return Err(Error::InvalidInput(format!("source {x} lies in the sink set")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResistanceMethod {
    SeriesParallel,
    Dirichlet,
}

/// Both sides of `R_B^x = E xi_B^x(x) / mu(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RltComparison {
    pub resistance: f64,
    pub green_ratio: f64,
    pub rel_gap: f64,
    pub method: ResistanceMethod,
}

/// Effective resistance next to the Green-function ratio computed by the hitting module.
///
/// Birth-death chains with `B` a subset of the endpoints use series and parallel
/// reduction; anything else falls back to the Dirichlet solve.
pub fn total_resistance_vs_green(chain: &MarkovChain, measure: &[f64], x: usize, b: &[usize]) -> Result<RltComparison> {
    check_set(chain, b, "set B")?;
    let net = edge_resistances(chain, measure)?;
    check_nodes(&net, x, b)?;
    let last = net.n() - 1;
    let endpoints = b.iter().all(|&s| s == 0 || s == last);
    let (resistance, method) = if net.birth_death && endpoints {
        let s = series_resistances(&net)?;
        let left = b.contains(&0) && x > 0;
        let right = b.contains(&last) && x < last;
        let r = match (left, right) {
            (true, true) => s.to_both_ends(x),
            (true, false) => s.to_left[x],
            (false, true) => s.to_right[x],
            (false, false) => unreachable!("x outside B and B nonempty"),
        };
        (r, ResistanceMethod::SeriesParallel)
    } else {
        (effective_resistance(&net, x, b)?, ResistanceMethod::Dirichlet)
    };
    let green_ratio = green_diagonal(chain, b)?[x] / net.mu(x);
    let rel_gap = (resistance - green_ratio).abs() / resistance.abs().max(green_ratio.abs());
    Ok(RltComparison { resistance, green_ratio, rel_gap, method })
}

/// Closed forms for the abc model on `0..=L`, with weights normalized so that `w(1) = 1`.
///
/// Resistances are returned in units of `Z`.
pub mod abc {
    use crate::models::AbcModelParams;

    fn pow(p: &AbcModelParams, e: f64) -> f64 {
        (p.l as f64).powf(e)
    }

    /// `r_k / Z`.
    pub fn edge(p: &AbcModelParams, k: usize) -> f64 {
        if k + 3 <= p.l {
            2.0
        } else {
            2.0 * pow(p, p.c - p.b)
        }
    }

    /// `R_0^x / Z`.
    pub fn to_zero(p: &AbcModelParams, x: usize) -> f64 {
        let l = p.l;
        if x <= l - 2 {
            2.0 * x as f64
        } else if x == l - 1 {
            2.0 * (l - 2) as f64 + 2.0 * pow(p, p.c - p.b)
        } else {
            2.0 * (l - 2) as f64 + 4.0 * pow(p, p.c - p.b)
        }
    }

    /// `R_L^x / Z`.
    pub fn to_top(p: &AbcModelParams, x: usize) -> f64 {
        let l = p.l;
        if x <= l - 2 {
            2.0 * (l - 2 - x) as f64 + 4.0 * pow(p, p.c - p.b)
        } else if x == l - 1 {
            2.0 * pow(p, p.c - p.b)
        } else {
            0.0
        }
    }

    /// `E xi_L^0(0) = mu(0) R_L^0 = 2 L^a ((L - 2) + 2 L^{c-b})`.
    pub fn mean_local_time_at_zero(p: &AbcModelParams) -> f64 {
        2.0 * pow(p, p.a) * ((p.l - 2) as f64 + 2.0 * pow(p, p.c - p.b))
    }

    /// Unnormalized weights `w(x)`, with `w(1) = 1`.
    pub fn weight(p: &AbcModelParams, x: usize) -> f64 {
        let l = p.l;
        match x {
            0 => pow(p, p.a),
            _ if x == l - 2 => pow(p, p.b),
            _ if x == l - 1 => pow(p, p.b - p.c),
            _ if x == l => pow(p, 2.0 * p.a + 3.0 * p.b + p.c),
            _ => 1.0,
        }
    }

    /// `E tau_{0,L}^x` by decomposing over the local times at each `k`.
    pub fn mean_hit_both_ends(p: &AbcModelParams, x: usize) -> f64 {
        let l = p.l;
        if x == 0 || x >= l {
            return 0.0;
        }
        let total = to_top(p, 0);
        let left: f64 = (1..x).map(|k| weight(p, k) * to_zero(p, k)).sum();
        let right: f64 = (x + 1..l).map(|k| weight(p, k) * to_top(p, k)).sum();
        (to_top(p, x) * left + weight(p, x) * to_zero(p, x) * to_top(p, x) + to_zero(p, x) * right) / total
    }

    /// Predicted growth exponent of `max_x E xi_{0,L}^x(x)`.
    pub fn local_time_exponent(p: &AbcModelParams) -> f64 {
        if p.c < 1.0 {
            1.0
        } else if p.c <= p.b + 1.0 {
            p.c
        } else {
            p.b + 1.0
        }
    }

    /// Predicted growth exponent of `max_x E tau_{0,L}^x`.
    pub fn hitting_time_exponent(p: &AbcModelParams) -> f64 {
        2f64.max(p.c.min(p.b + 1.0))
    }

    /// Predicted growth exponent of `E tau_L^0`, from `(L^a + L)(L^{c-b} + L)`.
    pub fn escape_time_exponent(p: &AbcModelParams) -> f64 {
        p.a.max(1.0) + (p.c - p.b).max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hitting::{mean_hitting_time, taboo_probability};
    use crate::models::{build_abc_model, build_h_model, h_model_weights, AbcModelParams, HModelParams};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fair_walk(l: usize) -> MarkovChain {
        let mut up = vec![0.5; l + 1];
        let mut down = vec![0.5; l + 1];
        up[l] = 0.0;
        down[0] = 0.0;
        MarkovChain::birth_death(&up, &down).unwrap()
    }

    /// Random reversible chain from symmetric conductances.
    fn random_reversible(rng: &mut ChaCha8Rng, n: usize) -> (MarkovChain, Vec<f64>) {
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                if j == i + 1 || rng.random_bool(0.4) {
                    let v = 10f64.powf(rng.random_range(-3.0..0.0));
                    c[i][j] = v;
                    c[j][i] = v;
                }
            }
        }
        let w: Vec<f64> = c.iter().map(|r| r.iter().sum::<f64>() * 1.5).collect();
        let rows = (0..n).map(|i| (0..n).filter(|&j| c[i][j] > 0.0).map(|j| (j, c[i][j] / w[i])).collect()).collect();
        (MarkovChain::from_off_diagonal(rows).unwrap(), w)
    }

    fn abc_weights(p: &AbcModelParams) -> Vec<f64> {
        (0..=p.l).map(|x| abc::weight(p, x)).collect()
    }

    #[test]
    fn random_networks_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(2..10);
            let (chain, w) = random_reversible(&mut rng, n);
            let net = edge_resistances(&chain, &w).unwrap();
            for (x, y, r) in net.edges() {
                assert!(r > 0.0 && r.is_finite());
                assert_relative_eq!(net.resistance(y, x).unwrap(), r, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn rotation_is_not_reversible() {
        let c = MarkovChain::from_off_diagonal(vec![vec![(1, 1.0)], vec![(2, 1.0)], vec![(0, 1.0)]]).unwrap();
        assert!(matches!(edge_resistances(&c, &[1.0; 3]), Err(Error::NotReversible(_))));
    }

    #[test]
    fn h_model_resistance_ratios() {
        let params = HModelParams { p: 1e-3, h: 0.25 };
        let c = build_h_model(params).unwrap();
        let net = edge_resistances(&c, &h_model_weights(params)).unwrap();
        let r0 = net.resistance(0, 1).unwrap();
        let r1 = net.resistance(1, 2).unwrap();
        let r2 = net.resistance(2, 3).unwrap();
        assert_relative_eq!(r1, r2, max_relative = 1e-12);
        assert_relative_eq!(r1 / r0, params.p.powf(params.h - 1.0), max_relative = 1e-12);
        assert_relative_eq!(r1, 2.0 * net.z / params.p, max_relative = 1e-12);
    }

    #[test]
    fn abc_series_matches_closed_forms() {
        let p = AbcModelParams::example_one(64);
        let c = build_abc_model(p).unwrap();
        let net = edge_resistances(&c, &abc_weights(&p)).unwrap();
        let s = series_resistances(&net).unwrap();
        for k in 0..p.l {
            assert_relative_eq!(s.edges[k] / net.z, abc::edge(&p, k), max_relative = 1e-12);
        }
        for x in 0..=p.l {
            assert_relative_eq!(s.to_left[x] / net.z, abc::to_zero(&p, x), max_relative = 1e-12, epsilon = 1e-300);
            assert_relative_eq!(s.to_right[x] / net.z, abc::to_top(&p, x), max_relative = 1e-12, epsilon = 1e-300);
        }
    }

    #[test]
    fn single_edge() {
        let c = MarkovChain::from_off_diagonal(vec![vec![(1, 0.3)], vec![(0, 0.6)]]).unwrap();
        let w = [2.0, 1.0];
        let net = edge_resistances(&c, &w).unwrap();
        let s = series_resistances(&net).unwrap();
        assert_relative_eq!(s.total(), 3.0 / 0.6, max_relative = 1e-14);
        let cmp = total_resistance_vs_green(&c, &w, 0, &[1]).unwrap();
        // escape from 0 is immediate on leaving, so g(0,0) = 1 / P(0,1)
        assert_relative_eq!(cmp.resistance, 1.0 / ((2.0 / 3.0) * 0.3), max_relative = 1e-14);
        assert!(cmp.rel_gap < 1e-12);
    }

    #[test]
    fn series_equals_dirichlet() {
        let p = AbcModelParams { l: 40, a: 1.0, b: 0.5, c: 1.25 };
        let c = build_abc_model(p).unwrap();
        let net = edge_resistances(&c, &abc_weights(&p)).unwrap();
        let s = series_resistances(&net).unwrap();
        for x in 1..p.l {
            assert_relative_eq!(effective_resistance(&net, x, &[0, p.l]).unwrap(), s.to_both_ends(x), max_relative = 1e-10);
            assert_relative_eq!(effective_resistance(&net, x, &[p.l]).unwrap(), s.to_right[x], max_relative = 1e-10);
        }
    }

    #[test]
    fn rlt_identity_on_random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let n = rng.random_range(3..10);
            let (chain, w) = random_reversible(&mut rng, n);
            let b = vec![rng.random_range(0..n)];
            let x = (b[0] + 1 + rng.random_range(0..n - 1)) % n;
            let cmp = total_resistance_vs_green(&chain, &w, x, &b).unwrap();
            assert!(cmp.rel_gap < 1e-8, "gap {}", cmp.rel_gap);
        }
    }

    #[test]
    fn mean_local_time_formula() {
        let p = AbcModelParams::example_one(128);
        let c = build_abc_model(p).unwrap();
        let g = green_diagonal(&c, &[p.l]).unwrap()[0];
        assert_relative_eq!(g, abc::mean_local_time_at_zero(&p), max_relative = 1e-9);
    }

    #[test]
    fn both_ends_hitting_formula() {
        let p = AbcModelParams::example_one(64);
        let c = build_abc_model(p).unwrap();
        for x in [1, 10, 31, 61, 62, 63] {
            let exact = mean_hitting_time(&c, x, &[0, p.l]).unwrap();
            assert_relative_eq!(abc::mean_hit_both_ends(&p, x), exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn fair_walk_voltage_is_linear() {
        let l = 20;
        let net = edge_resistances(&fair_walk(l), &vec![1.0; l + 1]).unwrap();
        let v = voltages(&net, l, &[0]).unwrap();
        for x in 0..=l {
            assert_relative_eq!(v[x], x as f64 / l as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn voltage_boundary_values() {
        let net = edge_resistances(&fair_walk(6), &[1.0; 7]).unwrap();
        assert_eq!(voltage(&net, 3, &[0, 6], 3).unwrap(), 1.0);
        assert_eq!(voltage(&net, 3, &[0, 6], 6).unwrap(), 0.0);
        assert!(voltage(&net, 3, &[3], 1).is_err());
    }

    #[test]
    fn abc_voltage_matches_taboo_probability() {
        let p = AbcModelParams { l: 100, a: 0.625, b: 0.25, c: 1.75 };
        let c = build_abc_model(p).unwrap();
        let net = edge_resistances(&c, &abc_weights(&p)).unwrap();
        let x = 50;
        let b = [0, p.l];
        let v = voltages(&net, x, &b).unwrap();
        for y in (1..p.l).filter(|&y| y != x) {
            let t = taboo_probability(&c, y, &[x], &b).unwrap();
            assert!((v[y] - t).abs() <= 1e-10, "y = {y}: {} vs {t}", v[y]);
        }
    }

    #[test]
    fn random_voltage_matches_taboo_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = rng.random_range(4..10);
            let (chain, w) = random_reversible(&mut rng, n);
            let net = edge_resistances(&chain, &w).unwrap();
            let v = voltages(&net, 0, &[n - 1]).unwrap();
            for y in 1..n - 1 {
                let t = taboo_probability(&chain, y, &[0], &[n - 1]).unwrap();
                assert!((v[y] - t).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn regime_predictions() {
        let ex1 = AbcModelParams::example_one(8);
        assert_eq!(abc::local_time_exponent(&ex1), 1.25);
        assert_eq!(abc::hitting_time_exponent(&ex1), 2.0);
        let ex2 = AbcModelParams::example_two(8);
        assert_eq!(abc::local_time_exponent(&ex2), 1.0);
        assert_eq!(abc::escape_time_exponent(&ex2), 2.5);
    }

    #[test]
    fn non_birth_death_series_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (chain, w) = random_reversible(&mut rng, 6);
        let net = edge_resistances(&chain, &w).unwrap();
        if !net.is_birth_death() {
            assert!(matches!(series_resistances(&net), Err(Error::NotBirthDeath)));
        }
    }
}
