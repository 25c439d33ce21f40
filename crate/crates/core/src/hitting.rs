//! Exact hitting-time quantities from solves on substochastic restrictions.

use serde::{Deserialize, Serialize};

use crate::chain::{mask, MarkovChain, ReferencePair};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{DenseFactor, DenseMMatrix, TriFactor, TriMMatrix};

enum Factor {
    Dense(DenseFactor),
    Tri(TriFactor),
}

/// `I - Q` for the restriction of a chain to the complement of a set, factored.
pub struct Restriction {
    members: Vec<usize>,
    position: Vec<Option<usize>>,
    factor: Factor,
}

impl Restriction {
    /// Restriction to the states where `absorbing` is false.
    pub fn new(chain: &MarkovChain, absorbing: &[bool]) -> Result<Self> {
        let n = chain.n();
        let members: Vec<usize> = (0..n).filter(|&i| !absorbing[i]).collect();
        let mut position = vec![None; n];
        for (k, &i) in members.iter().enumerate() {
            position[i] = Some(k);
        }
        let m = members.len();
        let factor = if chain.is_birth_death() {
            let mut lo = vec![0.0; m];
            let mut hi = vec![0.0; m];
            let mut slack = vec![0.0; m];
            for (k, &i) in members.iter().enumerate() {
                for &(j, p) in chain.off_diagonal(i) {
                    match position[j] {
                        Some(_) if j + 1 == i => lo[k] = p,
                        Some(_) => hi[k] = p,
                        None => slack[k] += p,
                    }
                }
            }
            Factor::Tri(TriMMatrix { lo, hi, slack }.factor()?)
        } else {
            let mut mm = DenseMMatrix::new(m);
            for (k, &i) in members.iter().enumerate() {
                for &(j, p) in chain.off_diagonal(i) {
                    match position[j] {
                        Some(l) => mm.add_off(k, l, p),
                        None => mm.add_slack(k, p),
                    }
                }
            }
            Factor::Dense(mm.factor()?)
        };
        Ok(Self { members, position, factor })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn position(&self, state: usize) -> Option<usize> {
        self.position[state]
    }

    /// Solves on the restricted states; `b` and the result are compact vectors.
    pub fn solve_compact(&self, b: &[f64]) -> Vec<f64> {
        match &self.factor {
            Factor::Dense(f) => f.solve(b),
            Factor::Tri(f) => f.solve(b),
        }
    }

    /// Solve with a right-hand side given per state; result is zero off the restriction.
    pub fn solve_full(&self, chain_n: usize, rhs: impl Fn(usize) -> f64) -> Vec<f64> {
        let b: Vec<f64> = self.members.iter().map(|&i| rhs(i)).collect();
        let x = self.solve_compact(&b);
        let mut out = vec![0.0; chain_n];
        for (k, &i) in self.members.iter().enumerate() {
            out[i] = x[k];
        }
        out
    }

    /// Diagonal of `(I - Q)^{-1}`, compact.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        match &self.factor {
            Factor::Dense(f) => {
                let inv = f.inverse();
                let m = f.len();
                (0..m).map(|i| inv[i * m + i]).collect()
            }
            Factor::Tri(f) => f.inverse_diagonal(),
        }
    }

    /// Full inverse, compact row-major.
    pub fn inverse(&self) -> Vec<f64> {
        match &self.factor {
            Factor::Dense(f) => f.inverse(),
            Factor::Tri(f) => {
                let m = f.len();
                let mut inv = vec![0.0; m * m];
                let mut col = vec![0.0; m];
                for j in 0..m {
                    col.iter_mut().for_each(|v| *v = 0.0);
                    col[j] = 1.0;
                    f.solve_in_place(&mut col);
                    for i in 0..m {
                        inv[i * m + j] = col[i];
                    }
                }
                inv
            }
        }
    }
}

pub(crate) fn check_set(chain: &MarkovChain, set: &[usize], what: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::InvalidInput(format!("{what} must be nonempty")));
    }
    if let Some(&s) = set.iter().find(|&&s| s >= chain.n()) {
        return Err(Error::InvalidInput(format!("{what} contains state {s} >= n = {}", chain.n())));
    }
    Ok(())
}

/// States from which `set` cannot be reached.
fn cannot_reach(chain: &MarkovChain, set: &[bool]) -> Vec<usize> {
    let n = chain.n();
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &(j, p) in chain.off_diagonal(i) {
            if p > 0.0 {
                reverse[j].push(i);
            }
        }
    }
    let mut seen = set.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&i| set[i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &reverse[j] {
            if !seen[i] {
                seen[i] = true;
                stack.push(i);
            }
        }
    }
    (0..n).filter(|&i| !seen[i]).collect()
}

fn restriction_for(chain: &MarkovChain, set: &[usize]) -> Result<Restriction> {
    check_set(chain, set, "target set")?;
    let absorbing = mask(chain.n(), set);
    if let Some(&start) = cannot_reach(chain, &absorbing).first() {
        return Err(Error::TargetUnreachable { start });
    }
    Restriction::new(chain, &absorbing)
}

/// `E tau_A^x` for every `x`, zero on `A`.
pub fn mean_hitting_times(chain: &MarkovChain, a: &[usize]) -> Result<Vec<f64>> {
    let r = restriction_for(chain, a)?;
    Ok(r.solve_full(chain.n(), |_| 1.0))
}

pub fn mean_hitting_time(chain: &MarkovChain, start: usize, a: &[usize]) -> Result<f64> {
    check_set(chain, a, "target set")?;
    if a.contains(&start) {
        return Ok(0.0);
    }
    Ok(mean_hitting_times(chain, a)?[start])
}

/// `P(tau_Y^x < tau_B^x)` for every `x`: one on `Y`, zero on `B`, harmonic elsewhere.
pub fn hitting_probabilities(chain: &MarkovChain, y: &[usize], b: &[usize]) -> Result<Vec<f64>> {
    check_set(chain, y, "set Y")?;
    check_set(chain, b, "set B")?;
    let n = chain.n();
    let in_y = mask(n, y);
    if b.iter().any(|&s| in_y[s]) {
        return Err(Error::InvalidInput("sets Y and B must be disjoint".into()));
    }
    let mut both = y.to_vec();
    both.extend_from_slice(b);
    let r = restriction_for(chain, &both)?;
    let mut u = r.solve_full(n, |i| chain.off_diagonal(i).iter().filter(|e| in_y[e.0]).map(|e| e.1).sum());
    for &s in y {
        u[s] = 1.0;
    }
    Ok(u)
}

/// `P(tilde tau_Y^start < tilde tau_B^start)`, first positive hitting times.
pub fn taboo_probability(chain: &MarkovChain, start: usize, y: &[usize], b: &[usize]) -> Result<f64> {
    let u = hitting_probabilities(chain, y, b)?;
    Ok(first_step(chain, start, &u))
}

fn first_step(chain: &MarkovChain, start: usize, u: &[f64]) -> f64 {
    let mut acc = chain.self_loop(start) * u[start];
    for &(j, p) in chain.off_diagonal(start) {
        acc += p * u[j];
    }
    acc
}

/// Probability of reaching `A` before returning to `x`, for every `x` outside `A`.
///
/// Equals `1 / g_A(x, x)`. Computed without forming the Green function.
pub fn escape_probabilities(chain: &MarkovChain, a: &[usize]) -> Result<Vec<f64>> {
    let r = restriction_for(chain, a)?;
    let diag = r.inverse_diagonal();
    let mut out = vec![0.0; chain.n()];
    for (k, &i) in r.members().iter().enumerate() {
        out[i] = 1.0 / diag[k];
    }
    Ok(out)
}

/// `E xi_A^x(x)`, expected visits to `x` before `A` starting from `x`; zero on `A`.
pub fn green_diagonal(chain: &MarkovChain, a: &[usize]) -> Result<Vec<f64>> {
    let r = restriction_for(chain, a)?;
    let diag = r.inverse_diagonal();
    let mut out = vec![0.0; chain.n()];
    for (k, &i) in r.members().iter().enumerate() {
        out[i] = diag[k];
    }
    Ok(out)
}

/// Expected local times `g[x][y] = E xi_A^x(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenTable {
    pub taboo: Vec<usize>,
    pub n: usize,
    pub g: Vec<f64>,
}

impl GreenTable {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.g[x * self.n + y]
    }

    pub fn row_sum(&self, x: usize) -> f64 {
        self.g[x * self.n..(x + 1) * self.n].iter().sum()
    }
}

pub fn green_function(chain: &MarkovChain, a: &[usize]) -> Result<GreenTable> {
    let r = restriction_for(chain, a)?;
    let inv = r.inverse();
    let n = chain.n();
    let m = r.members().len();
    let mut g = vec![0.0; n * n];
    for (k, &i) in r.members().iter().enumerate() {
        for (l, &j) in r.members().iter().enumerate() {
            g[i * n + j] = inv[k * m + l];
        }
    }
    let mut taboo = a.to_vec();
    taboo.sort_unstable();
    taboo.dedup();
    Ok(GreenTable { taboo, n, g })
}

/// Mean hitting time assembled from local times:
/// `sum_y E xi_A^y(y) P(tau_y^start < tau_A^start)`.
pub fn mean_hitting_time_via_local_times(chain: &MarkovChain, start: usize, a: &[usize]) -> Result<f64> {
    check_set(chain, a, "target set")?;
    if a.contains(&start) {
        return Ok(0.0);
    }
    let diag = green_diagonal(chain, a)?;
    let in_a = mask(chain.n(), a);
    let mut total = 0.0;
    for y in 0..chain.n() {
        if in_a[y] {
            continue;
        }
        let reach = if y == start {
            1.0
        } else {
            hitting_probabilities(chain, &[y], a)?[start]
        };
        total += diag[y] * reach;
    }
    Ok(total)
}

/// Sparse restriction of `P` to the complement of a set, for time stepping.
#[derive(Debug, Clone)]
pub struct SubOperator {
    members: Vec<usize>,
    position: Vec<Option<usize>>,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    probs: Vec<f64>,
    exit: Vec<f64>,
}

impl SubOperator {
    pub fn new(chain: &MarkovChain, absorbing: &[bool]) -> Self {
        let n = chain.n();
        let members: Vec<usize> = (0..n).filter(|&i| !absorbing[i]).collect();
        let mut position = vec![None; n];
        for (k, &i) in members.iter().enumerate() {
            position[i] = Some(k);
        }
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut probs = Vec::new();
        let mut exit = Vec::with_capacity(members.len());
        for &i in &members {
            let mut out = 0.0;
            let mut kept = 0.0;
            for &(j, p) in chain.off_diagonal(i) {
                match position[j] {
                    Some(l) => {
                        cols.push(l);
                        probs.push(p);
                        kept += p;
                    }
                    None => out += p,
                }
            }
            // the holding probability is rebuilt from the row so the operator is
            // exactly substochastic with deficit `out`
            let hold = 1.0 - (kept + out);
            if hold > 0.0 {
                cols.push(position[i].unwrap());
                probs.push(hold);
            }
            exit.push(out);
            row_start.push(cols.len());
        }
        Self { members, position, row_start, cols, probs, exit }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn position(&self, state: usize) -> Option<usize> {
        self.position[state]
    }

    /// Mass leaving the restriction in one step, per compact state.
    pub fn exit(&self) -> &[f64] {
        &self.exit
    }

    /// `out = v Q` (distribution step).
    pub fn forward(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (k, &vk) in v.iter().enumerate() {
            if vk == 0.0 {
                continue;
            }
            for e in self.row_start[k]..self.row_start[k + 1] {
                out[self.cols[e]] += vk * self.probs[e];
            }
        }
    }

    /// `out = Q v` (function step).
    pub fn backward(&self, v: &[f64], out: &mut [f64]) {
        for k in 0..self.len() {
            let mut acc = 0.0;
            for e in self.row_start[k]..self.row_start[k + 1] {
                acc += self.probs[e] * v[self.cols[e]];
            }
            out[k] = acc;
        }
    }
}

/// `P(tau_A^z > t)` and `P(tau_A^z <= t)` for every start `z` and `t = 0..=horizon`,
/// by the column iteration `v_{t+1} = Q v_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTable {
    horizon: usize,
    /// Row index of each recorded start.
    slot: Vec<Option<usize>>,
    width: usize,
    survival: Vec<f64>,
    cdf: Vec<f64>,
}

impl SurvivalTable {
    pub fn new(chain: &MarkovChain, a: &[usize], horizon: usize) -> Result<Self> {
        let all: Vec<usize> = (0..chain.n()).collect();
        Self::for_starts(chain, a, horizon, &all)
    }

    /// Records only `starts`; the iteration itself still covers every state.
    pub fn for_starts(chain: &MarkovChain, a: &[usize], horizon: usize, starts: &[usize]) -> Result<Self> {
        check_set(chain, a, "target set")?;
        let n = chain.n();
        if let Some(&z) = starts.iter().find(|&&z| z >= n) {
            return Err(Error::InvalidInput(format!("start {z} out of range")));
        }
        let op = SubOperator::new(chain, &mask(n, a));
        let m = op.len();
        let mut slot = vec![None; n];
        for (k, &z) in starts.iter().enumerate() {
            slot[z] = Some(k);
        }
        let width = starts.len();
        let mut survival = vec![0.0; width * (horizon + 1)];
        let mut cdf = vec![1.0; width * (horizon + 1)];
        let rows: Vec<(usize, Option<usize>)> = starts.iter().enumerate().map(|(k, &z)| (k, op.position(z))).collect();
        let mut v = vec![1.0; m];
        let mut f = vec![0.0; m];
        let mut v_next = vec![0.0; m];
        let mut f_next = vec![0.0; m];
        for t in 0..=horizon {
            for &(k, pos) in &rows {
                if let Some(p) = pos {
                    survival[t * width + k] = v[p];
                    cdf[t * width + k] = f[p];
                }
            }
            if t == horizon {
                break;
            }
            op.backward(&v, &mut v_next);
            op.backward(&f, &mut f_next);
            for (fk, e) in f_next.iter_mut().zip(op.exit()) {
                *fk += e;
            }
            std::mem::swap(&mut v, &mut v_next);
            std::mem::swap(&mut f, &mut f_next);
        }
        Ok(Self { horizon, slot, width, survival, cdf })
    }

    fn index(&self, z: usize, t: usize) -> usize {
        assert!(t <= self.horizon, "t = {t} beyond horizon {}", self.horizon);
        let k = self.slot[z].unwrap_or_else(|| panic!("state {z} not recorded"));
        t * self.width + k
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `P(tau^z > t)`.
    pub fn survival(&self, z: usize, t: usize) -> f64 {
        self.survival[self.index(z, t)]
    }

    /// `P(tau^z <= t)`, accumulated separately so small values keep their digits.
    pub fn cdf(&self, z: usize, t: usize) -> f64 {
        self.cdf[self.index(z, t)]
    }
}

/// Tail function `s_t = P(tau_A^start > t)` on `t = 0..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub start: usize,
    pub target: Vec<usize>,
    pub values: Vec<f64>,
    /// `P(tau <= t)`, accumulated from exit mass so small values keep full precision.
    pub cdf: Vec<f64>,
    pub horizon: usize,
    pub tail_mass_bound: f64,
    /// Set when the step cap was hit before the truncation threshold.
    pub horizon_exceeded: bool,
}

/// How far to iterate a survival curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    /// Until `s_t < theta`, or `cap` steps.
    Threshold { theta: f64, cap: usize },
    /// Exactly this many steps.
    Horizon(usize),
}

impl Default for Stop {
    fn default() -> Self {
        let t = Tolerances::default();
        Stop::Threshold { theta: t.truncation, cap: t.step_cap }
    }
}

const TAIL_WINDOW: usize = 64;

pub fn survival_curve(chain: &MarkovChain, start: usize, a: &[usize], stop: Stop) -> Result<SurvivalCurve> {
    check_set(chain, a, "target set")?;
    if start >= chain.n() {
        return Err(Error::InvalidInput(format!("start {start} out of range")));
    }
    if let Stop::Threshold { theta, .. } = stop {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidInput(format!("truncation threshold {theta} not in (0,1)")));
        }
    }
    let mut target = a.to_vec();
    target.sort_unstable();
    target.dedup();
    if target.binary_search(&start).is_ok() {
        return Ok(SurvivalCurve {
            start,
            target,
            values: vec![0.0],
            cdf: vec![1.0],
            horizon: 0,
            tail_mass_bound: 0.0,
            horizon_exceeded: false,
        });
    }
    let op = SubOperator::new(chain, &mask(chain.n(), &target));
    let mut v = vec![0.0; op.len()];
    v[op.position(start).unwrap()] = 1.0;
    let mut next = vec![0.0; op.len()];
    let mut values = vec![1.0];
    let mut cdf = vec![0.0];
    let (theta, cap) = match stop {
        Stop::Threshold { theta, cap } => (theta, cap),
        Stop::Horizon(h) => (0.0, h),
    };
    let mut t = 0;
    while t < cap && values[t] >= theta {
        let leaked: f64 = v.iter().zip(op.exit()).map(|(a, b)| a * b).sum();
        op.forward(&v, &mut next);
        std::mem::swap(&mut v, &mut next);
        values.push(v.iter().sum());
        cdf.push(cdf[t] + leaked);
        t += 1;
    }
    let horizon_exceeded = matches!(stop, Stop::Threshold { .. }) && values[t] >= theta;
    let tail_mass_bound = geometric_tail(&values);
    Ok(SurvivalCurve {
        start,
        target,
        values,
        cdf,
        horizon: t,
        tail_mass_bound,
        horizon_exceeded,
    })
}

/// `sum_{t > h} s_t` extrapolated with the largest one-step ratio over the last
/// window, widened by one percent and by a rounding allowance for the iterated
/// and summed values.
fn geometric_tail(values: &[f64]) -> f64 {
    let h = values.len() - 1;
    let last = values[h];
    if last == 0.0 {
        return 0.0;
    }
    if h == 0 {
        return f64::INFINITY;
    }
    let from = h.saturating_sub(TAIL_WINDOW);
    let mut rate: f64 = 0.0;
    for t in from..h {
        if values[t] > 0.0 {
            rate = rate.max(values[t + 1] / values[t]);
        }
    }
    if rate >= 1.0 {
        return f64::INFINITY;
    }
    let total: f64 = values.iter().sum();
    let rounding = 4.0 * f64::EPSILON * ((h + 1) as f64).sqrt() * total;
    1.01 * last * rate / (1.0 - rate) + rounding
}

impl SurvivalCurve {
    /// `P(tau > t)`; past the horizon returns the last value as an upper bound.
    pub fn survival(&self, t: usize) -> f64 {
        self.values[t.min(self.horizon)]
    }

    /// `P(tau <= t)`; requires `t <= horizon`.
    pub fn cdf_at(&self, t: usize) -> f64 {
        self.cdf[t.min(self.horizon)]
    }

    pub fn covers(&self, t: usize) -> bool {
        t <= self.horizon
    }

    /// Compensated sum of `s_0..s_horizon`.
    pub fn sum(&self) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for &v in &self.values {
            let y = v - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    /// `inf{k >= 1 : P(tau <= k) >= 1 - zeta}`.
    pub fn quantile(&self, zeta: f64) -> Result<usize> {
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(Error::InvalidInput(format!("zeta = {zeta} not in (0,1)")));
        }
        (1..=self.horizon)
            .find(|&k| self.values[k] <= zeta)
            .ok_or(Error::CurveTooShort { horizon: self.horizon, last: self.values[self.horizon] })
    }
}

/// Standalone form of [`SurvivalCurve::quantile`].
pub fn quantile(curve: &SurvivalCurve, zeta: f64) -> Result<usize> {
    curve.quantile(zeta)
}

/// Summary of `tau_G^{x0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingStats {
    /// `T^E`.
    pub mean: f64,
    /// `(zeta, T^{Q(zeta)})`, in the order requested.
    pub quantiles: Vec<(f64, usize)>,
    /// `T^LT = E xi_G^{x0}(x0)`.
    pub local_time_at_start: f64,
}

pub fn hitting_stats(chain: &MarkovChain, pair: &ReferencePair, zetas: &[f64]) -> Result<HittingStats> {
    pair.check_against(chain)?;
    let mean = mean_hitting_time(chain, pair.x0, &pair.target)?;
    let local = green_diagonal(chain, &pair.target)?[pair.x0];
    let quantiles = if zetas.is_empty() {
        Vec::new()
    } else {
        let lowest = zetas.iter().copied().fold(1.0, f64::min);
        let theta = 0.5 * lowest;
        let curve = survival_curve(
            chain,
            pair.x0,
            &pair.target,
            Stop::Threshold { theta, cap: Tolerances::default().step_cap },
        )?;
        zetas.iter().map(|&z| curve.quantile(z).map(|q| (z, q))).collect::<Result<_>>()?
    };
    Ok(HittingStats { mean, quantiles, local_time_at_start: local })
}
