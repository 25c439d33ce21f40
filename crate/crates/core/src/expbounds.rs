//! Explicit constants for the exponential law of `tau_G^{x0} / T`, the
//! deviation envelope assembled from them, the factorization inequality
//! suite, and early-exponential checks.

use serde::{Deserialize, Serialize};

use crate::chain::{MarkovChain, ReferencePair};
use crate::checks::{CheckOutcome, CheckReport};
use crate::error::{Error, Result};
use crate::hitting::{hitting_probabilities, mean_hitting_time, survival_curve, Stop, SurvivalTable};
use crate::recurrence::{RecurrenceCertificate, RecurrenceIter};

const C_GRID_POINTS: usize = 1000;
/// Absolute slack on probability inequalities.
pub const CHECK_TOL: f64 = 1e-10;

/// `cbar` from `c`: the smaller root of `x (1 - x) = c`, or 1 when `c > 1/4`.
pub fn cbar_of(c: f64) -> f64 {
    if c <= 0.25 {
        // c / (1/2 + sqrt(1/4 - c)) avoids cancellation for small c
        c / (0.5 + (0.25 - c).sqrt())
    } else {
        1.0
    }
}

/// `(c, cbar)` with `c = P(tau_G^{x0} <= 2R) + r`.
pub fn compute_c_cbar(chain: &MarkovChain, pair: &ReferencePair, big_r: usize, r: f64) -> Result<(f64, f64)> {
    pair.check_against(chain)?;
    let curve = survival_curve(chain, pair.x0, &pair.target, Stop::Horizon(2 * big_r))?;
    let c = curve.cdf_at(2 * big_r) + r;
    Ok((c, cbar_of(c)))
}

/// The recurrence time minimizing `max(R / T, sup_x P(tau^x_{x0 ∪ G} > R))`, with
/// `T = E tau_G^{x0}`. The certificate's `r` is the attained error.
pub fn auto_certificate(chain: &MarkovChain, pair: &ReferencePair) -> Result<RecurrenceCertificate> {
    pair.check_against(chain)?;
    let t = mean_hitting_time(chain, pair.x0, &pair.target)?;
    let mut it = RecurrenceIter::new(chain, pair);
    let mut best: Option<(f64, RecurrenceCertificate)> = None;
    loop {
        it.step();
        let big_r = it.time();
        let eps = big_r as f64 / t;
        if best.as_ref().is_some_and(|(obj, _)| eps >= *obj) {
            break;
        }
        let (r, at) = it.sup(pair.x0);
        let obj = eps.max(r);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, RecurrenceCertificate { big_r, r, achieved: r, argmax_state: at }));
        }
        if r == 0.0 {
            break;
        }
    }
    Ok(best.expect("at least one step is taken").1)
}

/// Inputs of the envelope assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeInputs {
    /// `R / T`.
    pub eps: f64,
    pub r: f64,
    /// Intermediate scale `S / T`; `None` means `sqrt(max(eps, r))`.
    pub eta: Option<f64>,
    pub c: f64,
    pub cbar: f64,
    /// Basin radius for the basin-start constants.
    pub r0: f64,
}

/// Envelope inputs from a certificate, replacing `(R, r)` by `(N R, r^N)`.
/// `r0` defaults to the resulting `r`.
pub fn inputs_from_certificate(
    chain: &MarkovChain,
    pair: &ReferencePair,
    cert: &RecurrenceCertificate,
    n_power: u32,
    r0: Option<f64>,
    eta: Option<f64>,
) -> Result<EnvelopeInputs> {
    if n_power == 0 {
        return Err(Error::InvalidInput("power N must be at least 1".into()));
    }
    let cert = cert.power(n_power);
    let t = mean_hitting_time(chain, pair.x0, &pair.target)?;
    let (c, cbar) = compute_c_cbar(chain, pair, cert.big_r, cert.achieved)?;
    Ok(EnvelopeInputs { eps: cert.big_r as f64 / t, r: cert.achieved, eta, c, cbar, r0: r0.unwrap_or(cert.achieved) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpBoundParams {
    pub eps: f64,
    pub r: f64,
    pub eta: f64,
    pub c: f64,
    pub cbar: f64,
    /// `c + cbar + r`.
    pub kappa: f64,
    pub delta0: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub c_plus_1: f64,
    pub c_minus_1: f64,
    pub c_plus_0: f64,
    pub c_minus_0: f64,
    pub cbar_plus: f64,
    pub cbar_minus: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub r0: f64,
    pub c_tilde_plus: f64,
    pub c_tilde_minus: f64,
}

pub fn assemble_envelope(inp: &EnvelopeInputs) -> Result<ExpBoundParams> {
    let EnvelopeInputs { eps, r, c, cbar, r0, .. } = *inp;
    let eta = inp.eta.unwrap_or_else(|| eps.max(r).sqrt());
    let kappa = c + cbar + r;
    let mut violated = Vec::new();
    if !(eps > 0.0) {
        violated.push(format!("eps > 0 (eps = {eps})"));
    }
    if !(0.0..1.0).contains(&r) {
        violated.push(format!("0 <= r < 1 (r = {r})"));
    }
    if !(eps < eta) {
        violated.push(format!("eps < eta ({eps} vs {eta})"));
    }
    if !(eta < 1.0) {
        violated.push(format!("eta < 1 (eta = {eta})"));
    }
    if !(kappa < 0.5) {
        violated.push(format!("c + cbar + r < 1/2 (= {kappa})"));
    }
    if !(eta + eps + r < 1.0) {
        violated.push(format!("eta + eps + r < 1 (= {})", eta + eps + r));
    }
    if !(r0 >= 0.0 && r + r0 < 1.0) {
        violated.push(format!("0 <= r0 and r + r0 < 1 (r0 = {r0})"));
    }
    if !violated.is_empty() {
        return Err(Error::SmallnessViolated(violated));
    }

    let alpha0 = 1.0 + (1.0 / (1.0 + eta - 2.0 * eps) + r).ln() / eta;
    let alpha1 = -1.0 - (1.0 - eta - eps - r).ln() / eta;
    let top = 1.0 / (1.0 + eta - 2.0 * eps) + r;
    let bottom = 1.0 - eta - eps - r;
    let ratio = eta / eps;
    let mut c_plus_1 = f64::NEG_INFINITY;
    let mut c_minus_1 = f64::INFINITY;
    for i in 0..C_GRID_POINTS {
        let t = if i == C_GRID_POINTS - 1 { eta } else { eps * ratio.powf(i as f64 / (C_GRID_POINTS - 1) as f64) };
        let w = t / eta;
        c_plus_1 = c_plus_1.max((1.0 / (1.0 + t - 2.0 * eps) + r) / top.powf(w));
        c_minus_1 = c_minus_1.min(bottom.powf(w) / (1.0 - t - eps - r));
    }
    let c_plus_0 = eps.exp();
    let c_minus_0 = 1.0 - (2.0 * eps + r);
    let cbar_plus = c_plus_0.max(c_plus_1);
    let cbar_minus = c_minus_0.min(c_minus_1);
    let mult = 1.0 + kappa / (1.0 - kappa);
    let delta0 = mult.ln();
    let c_plus = cbar_plus * mult;
    let c_minus = cbar_minus * (1.0 - kappa);
    Ok(ExpBoundParams {
        eps,
        r,
        eta,
        c,
        cbar,
        kappa,
        delta0,
        alpha0,
        alpha1,
        lambda0: alpha0 + delta0 / eta,
        lambda1: alpha1 + delta0 / eta,
        c_plus_1,
        c_minus_1,
        c_plus_0,
        c_minus_0,
        cbar_plus,
        cbar_minus,
        c_plus,
        c_minus,
        r0,
        c_tilde_plus: c_plus * mult,
        c_tilde_minus: c_minus * (1.0 - r - r0),
    })
}

impl ExpBoundParams {
    fn constants(&self, basin: bool) -> (f64, f64) {
        if basin {
            (self.c_tilde_plus, self.c_tilde_minus)
        } else {
            (self.c_plus, self.c_minus)
        }
    }

    /// `(lower, upper)` bounds on `P(tau > t T)`.
    pub fn sandwich(&self, t: f64, basin: bool) -> (f64, f64) {
        let (cp, cm) = self.constants(basin);
        (cm * (-(1.0 + self.lambda1) * t).exp(), cp * (-(1.0 - self.lambda0) * t).exp())
    }

    /// Pointwise bound on `|P(tau > t T) - e^{-t}|`.
    pub fn envelope(&self, t: f64, basin: bool) -> f64 {
        let (lo, hi) = self.sandwich(t, basin);
        let e = (-t).exp();
        (hi - e).max(e - lo)
    }

    /// `C(t) = max(C+ e^{t lambda0} - 1, |1 - C- e^{-t lambda1}|)`, so that the
    /// deviation is at most `C(t) e^{-t}`.
    pub fn collapsed_constant(&self, t: f64) -> f64 {
        (self.c_plus * (t * self.lambda0).exp() - 1.0).max((1.0 - self.c_minus * (-t * self.lambda1).exp()).abs())
    }
}

/// `t_i = 20 i / 200` for `i = 1..=200`.
pub fn default_t_grid() -> Vec<f64> {
    (1..=200).map(|i| 20.0 * i as f64 / 200.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub start: usize,
    pub basin_variant: bool,
    /// `T = E tau_G^{x0}`.
    pub time_scale: f64,
    pub t: Vec<f64>,
    pub measured: Vec<f64>,
    pub envelope: Vec<f64>,
    pub measured_sup: f64,
    pub max_ratio: f64,
    pub worst_t: f64,
    /// `(sup over the grid of C(t), lambda0)`.
    pub collapsed: (f64, f64),
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpLawReport {
    pub params: ExpBoundParams,
    pub x0: DeviationReport,
    pub basin: Vec<DeviationReport>,
}

impl ExpLawReport {
    pub fn passed(&self) -> bool {
        self.x0.passed && self.basin.iter().all(|d| d.passed)
    }
}

fn deviation(chain: &MarkovChain, pair: &ReferencePair, start: usize, t_scale: f64, params: &ExpBoundParams, grid: &[f64], basin: bool) -> Result<DeviationReport> {
    let t_max = grid.iter().cloned().fold(0.0, f64::max);
    let horizon = (t_max * t_scale).floor() as usize;
    let curve = survival_curve(chain, start, &pair.target, Stop::Horizon(horizon))?;
    let mut measured = Vec::with_capacity(grid.len());
    let mut envelope = Vec::with_capacity(grid.len());
    let mut passed = true;
    let (mut max_ratio, mut worst_t) = (0.0f64, grid.first().copied().unwrap_or(0.0));
    for &t in grid {
        let m = (curve.survival((t * t_scale).floor() as usize) - (-t).exp()).abs();
        let e = params.envelope(t, basin);
        // the inequality is exact; only rounding in the iterated curve is allowed for
        if m > e + 1e-12 {
            passed = false;
        }
        let ratio = if e > 0.0 { m / e } else { f64::INFINITY };
        if ratio > max_ratio {
            max_ratio = ratio;
            worst_t = t;
        }
        measured.push(m);
        envelope.push(e);
    }
    let collapsed = grid.iter().map(|&t| params.collapsed_constant(t)).fold(0.0, f64::max);
    Ok(DeviationReport {
        start,
        basin_variant: basin,
        time_scale: t_scale,
        t: grid.to_vec(),
        measured_sup: measured.iter().cloned().fold(0.0, f64::max),
        measured,
        envelope,
        max_ratio,
        worst_t,
        collapsed: (collapsed, params.lambda0),
        passed,
    })
}

/// States `z` with `P(tau^z_G < tau^z_{x0}) < radius`; `None` for a non-positive radius.
fn basin_members(miss: &[f64], radius: f64) -> Option<Vec<usize>> {
    (radius > 0.0).then(|| (0..miss.len()).filter(|&z| miss[z] < radius).collect())
}

fn miss_probabilities(chain: &MarkovChain, pair: &ReferencePair) -> Result<Vec<f64>> {
    hitting_probabilities(chain, &pair.target, &[pair.x0])
}

/// Compares `|P(tau > floor(t T)) - e^{-t}|` with the envelope on `grid`, from
/// `x0` and, when `from_basin` is set, from every other state of `B(x0, r0)`
/// with the basin constants.
pub fn verify_exponential_law(
    chain: &MarkovChain,
    pair: &ReferencePair,
    params: &ExpBoundParams,
    grid: &[f64],
    from_basin: bool,
) -> Result<ExpLawReport> {
    if grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidInput("t grid must be positive".into()));
    }
    let t_scale = mean_hitting_time(chain, pair.x0, &pair.target)?;
    let x0 = deviation(chain, pair, pair.x0, t_scale, params, grid, false)?;
    let mut basin = Vec::new();
    if from_basin {
        let miss = miss_probabilities(chain, pair)?;
        for z in basin_members(&miss, params.r0).unwrap_or_default() {
            if z != pair.x0 {
                basin.push(deviation(chain, pair, z, t_scale, params, grid, true)?);
            }
        }
    }
    Ok(ExpLawReport { params: *params, x0, basin })
}

/// Scale and grid for the inequality suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuiteConfig {
    /// Intermediate scale `S > R`.
    pub s: usize,
    pub ts: Vec<f64>,
    pub ss: Vec<f64>,
    /// Basin radius for the basin-start inequalities; `None` means `r`.
    pub r0: Option<f64>,
    /// Largest `k` in the iterated bounds.
    pub k_max: usize,
    /// Largest `N` in `sup_x P(tau^x > N R) <= r^N`.
    pub n_max: u32,
    /// Cap on stored survival values (states x times).
    pub table_budget: usize,
}

impl LemmaSuiteConfig {
    /// `S = 10 R` and a 20 x 20 grid reaching `(t + s) S = 4 max(T, S)`.
    pub fn standard(big_r: usize, t_scale: f64) -> Self {
        let s = 10 * big_r.max(1);
        let t_max = (2.0 * t_scale / s as f64).max(2.0);
        let grid: Vec<f64> = (1..=20).map(|i| t_max * i as f64 / 20.0).collect();
        Self { s, ts: grid.clone(), ss: grid, r0: None, k_max: 50, n_max: 5, table_budget: 20_000_000 }
    }
}

/// `(lower, upper)` for `P(tau^z > floor(tS) + floor(sS))` from the factorization
/// lemma, with the upper bound in the form its proof gives.
pub fn factorization_bounds(
    table: &SurvivalTable,
    x0: usize,
    z: usize,
    cert: &RecurrenceCertificate,
    s_scale: usize,
    t: f64,
    s: f64,
) -> Result<(f64, f64)> {
    let big_r = cert.big_r;
    if !(s_scale > big_r) {
        return Err(Error::InvalidInput(format!("S = {s_scale} must exceed R = {big_r}")));
    }
    if !(t > 0.0 && s * s_scale as f64 > big_r as f64) {
        return Err(Error::InvalidInput(format!("need t > 0 and s > R/S, got t = {t}, s = {s}")));
    }
    let a = (t * s_scale as f64).floor() as usize;
    let b = (s * s_scale as f64).floor() as usize;
    let r = cert.achieved;
    let lower = (table.survival(z, a + big_r) - r * table.survival(z, a)) * table.survival(x0, b);
    let upper = table.survival(z, a) * (table.survival(x0, b - big_r) + r);
    Ok((lower, upper))
}

/// Every factorization, short-time, tail and basin inequality on one chain.
pub fn lemma_suite(
    chain: &MarkovChain,
    pair: &ReferencePair,
    cert: &RecurrenceCertificate,
    cfg: &LemmaSuiteConfig,
) -> Result<CheckReport> {
    pair.check_against(chain)?;
    let n = chain.n();
    let x0 = pair.x0;
    let big_r = cert.big_r;
    let r = cert.achieved;
    let s_scale = cfg.s;
    if s_scale <= big_r {
        return Err(Error::InvalidInput(format!("S = {s_scale} must exceed R = {big_r}")));
    }
    let t_scale = mean_hitting_time(chain, x0, &pair.target)?;
    let (c, cbar) = compute_c_cbar(chain, pair, big_r, r)?;
    let kappa = c + cbar + r;
    let mult = 1.0 + kappa / (1.0 - kappa);
    let r0 = cfg.r0.unwrap_or(r);
    let miss = miss_probabilities(chain, pair)?;
    let in_target = crate::chain::mask(n, &pair.target);
    let starts: Vec<usize> = (0..n).filter(|&z| !in_target[z]).collect();

    let pairs: Vec<(f64, f64, usize, usize)> = cfg
        .ts
        .iter()
        .flat_map(|&t| cfg.ss.iter().map(move |&s| (t, s)))
        .map(|(t, s)| (t, s, (t * s_scale as f64).floor() as usize, (s * s_scale as f64).floor() as usize))
        .collect();
    let max_ab = pairs.iter().map(|p| p.2 + p.3).max().unwrap_or(0);
    let max_a = pairs.iter().map(|p| p.2).max().unwrap_or(0);
    let horizon = (max_ab.max(max_a + big_r) + big_r + 1).max(2 * s_scale + big_r);
    let table_starts: Vec<usize> = if starts.len() * (horizon + 1) <= cfg.table_budget {
        starts.clone()
    } else {
        let keep = (cfg.table_budget / (horizon + 1)).max(1);
        let mut picked: Vec<usize> = (0..keep).map(|i| starts[i * starts.len() / keep]).collect();
        picked.push(x0);
        picked.sort_unstable();
        picked.dedup();
        picked
    };
    let table = SurvivalTable::for_starts(chain, &pair.target, horizon, &table_starts)?;
    let sv = |z: usize, t: usize| table.survival(z, t);

    let mut report = CheckReport::default();

    // factorization lemma
    let mut kl2_lo = CheckOutcome::new("kl2_lower");
    let mut kl2_hi = CheckOutcome::new("kl2_upper");
    for &z in &table_starts {
        for &(t, s, a, b) in &pairs {
            if !(s * s_scale as f64 > big_r as f64) {
                kl2_lo.skip("s <= R/S");
                kl2_hi.skip("s <= R/S");
                continue;
            }
            let (lo, hi) = factorization_bounds(&table, x0, z, cert, s_scale, t, s)?;
            let v = sv(z, a + b);
            kl2_lo.ge(v, lo, CHECK_TOL, || format!("z={z} t={t:.3} s={s:.3}"));
            kl2_hi.le(v, hi, CHECK_TOL, || format!("z={z} t={t:.3} s={s:.3}"));
        }
    }
    report.push(kl2_lo);
    report.push(kl2_hi);

    // iterated bounds and short-time cdf bounds need R < S < T
    let x0_curve_horizon = (cfg.k_max * s_scale).max(horizon);
    let x0_curve = if x0_curve_horizon * n <= 4 * cfg.table_budget {
        survival_curve(chain, x0, &pair.target, Stop::Horizon(x0_curve_horizon))?
    } else {
        survival_curve(chain, x0, &pair.target, Stop::Horizon(horizon))?
    };
    let p0 = |t: usize| x0_curve.survival(t);
    let within = |t: usize| x0_curve.covers(t);
    let short_ok = (s_scale as f64) < t_scale;
    let mut iter_hi = CheckOutcome::new("iter_upper");
    let mut iter_lo = CheckOutcome::new("iter_lower");
    if short_ok {
        let base_hi = p0(s_scale - big_r) + r;
        let base_lo = p0(s_scale + big_r) - r;
        for k in 2..=cfg.k_max {
            if !within(k * s_scale) {
                iter_hi.skip("beyond survival horizon");
                iter_lo.skip("beyond survival horizon");
                continue;
            }
            let v = p0(k * s_scale);
            iter_hi.le(v, base_hi.powi(k as i32), CHECK_TOL, || format!("k={k}"));
            if base_lo >= 0.0 {
                iter_lo.ge(v, base_lo.powi(k as i32), CHECK_TOL, || format!("k={k}"));
            } else {
                iter_lo.skip("P(tau > S + R) < r");
            }
        }
    } else {
        iter_hi.skip("needs S < T");
        iter_lo.skip("needs S < T");
    }
    report.push(iter_hi);
    report.push(iter_lo);

    let mut kl3_hi = CheckOutcome::new("kl3_upper");
    let mut kl3_lo = CheckOutcome::new("kl3_lower");
    let mut kl3_abs = CheckOutcome::new("kl3_additive");
    let scales: Vec<usize> = {
        let mut v = vec![s_scale];
        if t_scale > (big_r + 1) as f64 {
            let lo = (big_r + 1) as f64;
            let hi = t_scale;
            for i in 0..12 {
                let x = (lo * (hi / lo).powf(i as f64 / 12.0)).floor() as usize;
                v.push(x);
            }
        }
        v.sort_unstable();
        v.dedup();
        v.retain(|&x| x > big_r && (x as f64) < t_scale);
        v
    };
    if scales.is_empty() {
        for c in [&mut kl3_hi, &mut kl3_lo, &mut kl3_abs] {
            c.skip("no scale with R < S < T");
        }
    }
    for &sp in &scales {
        if !within(sp) {
            continue;
        }
        let f = x0_curve.cdf_at(sp);
        let spf = sp as f64;
        let rt = big_r as f64 / t_scale;
        kl3_hi.le(f, (spf + big_r as f64) / t_scale + r, CHECK_TOL, || format!("S={sp}"));
        if sp > 2 * big_r {
            kl3_lo.ge(f, 1.0 / (1.0 + t_scale / (spf - 2.0 * big_r as f64)) - r, CHECK_TOL, || format!("S={sp}"));
        } else {
            kl3_lo.skip("S <= 2R");
        }
        kl3_abs.le((f - spf / t_scale).abs(), 2.0 * rt + (spf / t_scale).powi(2) + r, CHECK_TOL, || format!("S={sp}"));
    }
    report.push(kl3_hi);
    report.push(kl3_lo);
    report.push(kl3_abs);

    // power form of the recurrence certificate
    let mut power = CheckOutcome::new("recR_power");
    let mut it = RecurrenceIter::new(chain, pair);
    for k in 1..=cfg.n_max {
        let target = k as usize * big_r;
        if target as f64 * n as f64 > 4.0 * cfg.table_budget as f64 {
            power.skip("over budget");
            continue;
        }
        while it.time() < target {
            it.step();
        }
        let (v, at) = it.sup(x0);
        power.le(v, r.powi(k as i32), CHECK_TOL, || format!("N={k} argmax={at}"));
    }
    report.push(power);

    let mut rr7 = CheckOutcome::new("rr7_c_bound");
    if ((2 * big_r) as f64) < t_scale {
        rr7.le(c, 3.0 * big_r as f64 / t_scale + 2.0 * r, CHECK_TOL, || format!("c={c:.4e}"));
    } else {
        rr7.skip("needs 2R < T");
    }
    report.push(rr7);

    // tail-density lemma
    let tail_scales: Vec<usize> = {
        let mut v: Vec<usize> = pairs.iter().map(|p| p.2).chain([s_scale]).filter(|&a| a > big_r).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut stimaleq = CheckOutcome::new("kl4_upper");
    for &z in &table_starts {
        for &sp in &tail_scales {
            stimaleq.le(table.cdf(z, sp + big_r), table.cdf(z, sp) + c, CHECK_TOL, || format!("z={z} S={sp}"));
        }
    }
    report.push(stimaleq);
    for (name, radius) in [("kl4_lower[cbar-c]", cbar - c), ("kl4_lower[c-cbar]", c - cbar)] {
        let mut chk = CheckOutcome::new(name);
        match basin_members(&miss, radius) {
            None => chk.skip(format!("radius {radius:.3e} is not positive")),
            Some(members) => {
                for z in members.into_iter().filter(|z| table_starts.binary_search(z).is_ok()) {
                    for &sp in &tail_scales {
                        chk.ge(sv(z, sp + big_r), sv(z, sp) * (1.0 - c - cbar), CHECK_TOL, || format!("z={z} S={sp}"));
                    }
                }
            }
        }
        report.push(chk);
    }

    // multiplicative-error lemma
    let mut improved = CheckOutcome::new("improved_lower");
    let mut improved1 = CheckOutcome::new("improved_upper");
    if kappa < 1.0 {
        let near = basin_members(&miss, r).unwrap_or_default();
        for &z in &table_starts {
            let in_basin = near.binary_search(&z).is_ok();
            for &(t, s, a, b) in &pairs {
                let at = || format!("z={z} t={t:.3} s={s:.3}");
                let prod = sv(z, a) * sv(x0, b);
                let v = sv(z, a + b);
                if in_basin {
                    improved.ge(v, (1.0 - kappa) * prod, CHECK_TOL, at);
                }
                improved1.le(v, mult * prod, CHECK_TOL, at);
            }
        }
        if near.is_empty() {
            improved.skip("B(x0, r) is empty");
        }
    } else {
        improved.skip("needs r + c + cbar < 1");
        improved1.skip("needs r + c + cbar < 1");
    }
    report.push(improved);
    report.push(improved1);

    let mut klexp = CheckOutcome::new("klexp");
    if kappa < 0.5 {
        let delta0 = mult.ln();
        let ls = p0(s_scale).ln();
        for k in 1..=cfg.k_max {
            if !within(k * s_scale) {
                klexp.skip("beyond survival horizon");
                continue;
            }
            let v = p0(k * s_scale);
            if v == 0.0 {
                klexp.skip("survival underflow");
                continue;
            }
            let dev = (v.ln() - k as f64 * ls).abs();
            klexp.le(dev, delta0 * k as f64, CHECK_TOL, || format!("k={k}"));
        }
    } else {
        klexp.skip("needs r + c + cbar < 1/2");
    }
    report.push(klexp);

    // basin starts against x0
    let mut claim9 = CheckOutcome::new("claim9");
    let mut sandwich = CheckOutcome::new("ex_r1");
    let basin0 = basin_members(&miss, r0);
    if (big_r as f64) < t_scale && r + r0 < 1.0 {
        if let Some(members) = &basin0 {
            for &z in members.iter().filter(|z| table_starts.binary_search(z).is_ok()) {
                for a in tail_scales.iter().copied().chain(pairs.iter().map(|p| p.2)) {
                    claim9.ge(sv(z, a), sv(x0, a) * (1.0 - r - r0), CHECK_TOL, || format!("z={z} t={a}"));
                }
            }
        }
    } else {
        claim9.skip("needs R < T and r + r0 < 1");
    }
    if r0 <= r && r + r0 < 1.0 && kappa < 1.0 {
        if let Some(members) = &basin0 {
            let lo_f = (1.0 - kappa) / (1.0 + r);
            let hi_f = mult / (1.0 - r - r0);
            for &z in members.iter().filter(|z| table_starts.binary_search(z).is_ok()) {
                for &(t, s, a, b) in &pairs {
                    if b < big_r {
                        continue;
                    }
                    let prod = sv(z, a) * sv(z, b);
                    let v = sv(z, a + b);
                    let at = || format!("z={z} t={t:.3} s={s:.3}");
                    sandwich.ge(v, lo_f * prod, CHECK_TOL, at);
                    sandwich.le(v, hi_f * prod, CHECK_TOL, at);
                }
            }
        }
    } else {
        sandwich.skip("needs r0 <= r, r + r0 < 1 and c + cbar + r < 1");
    }
    if basin0.as_ref().is_none_or(|m| m.is_empty()) {
        claim9.skip("B(x0, r0) is empty");
        sandwich.skip("B(x0, r0) is empty");
    }
    report.push(claim9);
    report.push(sandwich);
    Ok(report)
}

/// Measured early-exponential error at scale `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EeReport {
    pub s: usize,
    pub k_max: usize,
    pub alpha: f64,
    pub worst_k: usize,
}

fn cell_mass(curve: &crate::hitting::SurvivalCurve, from: usize, to: usize) -> f64 {
    // differences of the smaller of the two complementary functions keep precision
    if curve.cdf_at(to) < 0.5 {
        curve.cdf_at(to) - curve.cdf_at(from)
    } else {
        curve.survival(from) - curve.survival(to)
    }
}

fn ee_curve(chain: &MarkovChain, pair: &ReferencePair, s: usize) -> Result<(f64, usize, crate::hitting::SurvivalCurve)> {
    pair.check_against(chain)?;
    let t = mean_hitting_time(chain, pair.x0, &pair.target)?;
    if s == 0 || s as f64 > t {
        return Err(Error::InvalidInput(format!("need 1 <= S <= T^E, got S = {s}, T^E = {t}")));
    }
    let k_max = (t / s as f64).floor() as usize;
    let curve = survival_curve(chain, pair.x0, &pair.target, Stop::Horizon((k_max + 1) * s))?;
    Ok((t, k_max, curve))
}

/// `max_{k S <= T^E} |P(tau in (kS, (k+1)S]) / (P(tau > S)^k P(tau <= S)) - 1|`.
pub fn ee_check(chain: &MarkovChain, pair: &ReferencePair, s: usize) -> Result<EeReport> {
    let (_, k_max, curve) = ee_curve(chain, pair, s)?;
    let ps = curve.survival(s);
    let fs = curve.cdf_at(s);
    let mut alpha = 0.0;
    let mut worst_k = 0;
    for k in 0..=k_max {
        let a = (cell_mass(&curve, k * s, (k + 1) * s) / (ps.powi(k as i32) * fs) - 1.0).abs();
        if a > alpha {
            alpha = a;
            worst_k = k;
        }
    }
    Ok(EeReport { s, k_max, alpha, worst_k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub k: usize,
    pub a_k: f64,
    pub density: f64,
    pub cell_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub s: usize,
    pub time_scale: f64,
    /// `-ln P(tau > S)`.
    pub lambda: f64,
    pub rows: Vec<DensityRow>,
    /// `P(tau > (k_max + 1) S)`, the mass not covered by the rows.
    pub tail: f64,
}

/// Per-cell relative error `a_k` and the density estimate on the `tau / T` axis.
pub fn density_profile(chain: &MarkovChain, pair: &ReferencePair, s: usize) -> Result<DensityProfile> {
    let (t, k_max, curve) = ee_curve(chain, pair, s)?;
    let lambda = -curve.survival(s).ln();
    let q = (-lambda).exp();
    let rows = (0..=k_max)
        .map(|k| {
            let mass = cell_mass(&curve, k * s, (k + 1) * s);
            let a_k = mass / (q.powi(k as i32) * curve.cdf_at(s)) - 1.0;
            let density = (-lambda * k as f64).exp() * (1.0 - q) * (1.0 + a_k) / (s as f64 / t);
            DensityRow { k, a_k, density, cell_mass: mass }
        })
        .collect();
    Ok(DensityProfile { s, time_scale: t, lambda, rows, tail: curve.survival((k_max + 1) * s) })
}

/// Early-exponential error at `S = max(1, floor(eta T))` with `eta = sqrt(max(eps, r))`
/// from the automatic certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EeScaleCheck {
    pub certificate: RecurrenceCertificate,
    pub eps: f64,
    pub r: f64,
    pub eta: f64,
    pub report: EeReport,
    /// `alpha / (eps / eta + r / eta)`.
    pub constant: f64,
}

pub fn ee_at_democratic_scale(chain: &MarkovChain, pair: &ReferencePair) -> Result<EeScaleCheck> {
    let cert = auto_certificate(chain, pair)?;
    let t = mean_hitting_time(chain, pair.x0, &pair.target)?;
    let eps = cert.big_r as f64 / t;
    let r = cert.achieved;
    let eta = eps.max(r).sqrt();
    let s = ((eta * t).floor() as usize).max(1);
    let report = ee_check(chain, pair, s)?;
    Ok(EeScaleCheck { certificate: cert, eps, r, eta, report, constant: report.alpha / ((eps + r) / eta) })
}
