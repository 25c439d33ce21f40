//! Metastability hypotheses: the ratios `rho_A`, `rho_B`, the three time
//! scales, the set `M_G^eps`, and parameter sweeps with trend verdicts.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{mask, MarkovChain, ReferencePair};
use crate::checks::{CheckOutcome, CheckReport};
use crate::config::DEFAULT_ZETA;
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, PowerFit};
use crate::hitting::{green_diagonal, hitting_probabilities, mean_hitting_times, survival_curve, Stop};
use crate::recurrence::{minimal_r_capped, recurrence_error, RecurrenceCertificate, RecurrenceIter};

/// Default cap on `steps x operator size` for time-stepping work at one grid point.
pub const DEFAULT_WORK_BUDGET: f64 = 2e8;

/// A supremum over interior states divided by a reference quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupRatio {
    pub value: f64,
    /// `None` when there is no state outside `{x0} ∪ G`; `value` is then 0.
    pub argmax: Option<usize>,
}

/// Reference time scales and interior suprema of one reference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScales {
    /// `E tau_G^{x0}`.
    pub t_e: f64,
    /// `E xi_G^{x0}(x0)`.
    pub t_lt: f64,
    /// `sup_z E xi^z_{x0 ∪ G}(z)` over `z` outside `{x0} ∪ G`.
    pub sup_local: f64,
    /// `sup_z E tau^z_{x0 ∪ G}`.
    pub sup_tau: f64,
    pub sup_local_at: Option<usize>,
    pub sup_tau_at: Option<usize>,
}

impl PairScales {
    pub fn rho_a(&self) -> SupRatio {
        SupRatio { value: self.sup_local / self.t_lt, argmax: self.sup_local_at }
    }

    pub fn rho_b(&self) -> SupRatio {
        SupRatio { value: self.sup_tau / self.t_e, argmax: self.sup_tau_at }
    }
}

fn argmax(values: &[f64], skip: &[bool]) -> (f64, Option<usize>) {
    let mut best = (0.0, None);
    for (i, &v) in values.iter().enumerate() {
        if !skip[i] && (best.1.is_none() || v > best.0) {
            best = (v, Some(i));
        }
    }
    best
}

pub fn pair_scales(chain: &MarkovChain, pair: &ReferencePair) -> Result<PairScales> {
    pair.check_against(chain)?;
    let inner = pair.with_x0();
    let to_g = mean_hitting_times(chain, &pair.target)?;
    let local_g = green_diagonal(chain, &pair.target)?;
    let local = green_diagonal(chain, &inner)?;
    let tau = mean_hitting_times(chain, &inner)?;
    let skip = mask(chain.n(), &inner);
    let (sup_local, sup_local_at) = argmax(&local, &skip);
    let (sup_tau, sup_tau_at) = argmax(&tau, &skip);
    Ok(PairScales { t_e: to_g[pair.x0], t_lt: local_g[pair.x0], sup_local, sup_tau, sup_local_at, sup_tau_at })
}

/// `sup_z E xi^z_{x0 ∪ G}(z) / E xi^{x0}_G(x0)`.
pub fn rho_a(chain: &MarkovChain, pair: &ReferencePair) -> Result<SupRatio> {
    Ok(pair_scales(chain, pair)?.rho_a())
}

/// `sup_z E tau^z_{x0 ∪ G} / E tau^{x0}_G`.
pub fn rho_b(chain: &MarkovChain, pair: &ReferencePair) -> Result<SupRatio> {
    Ok(pair_scales(chain, pair)?.rho_b())
}

/// `M_G^eps` with the defining ratio of every state (`None` on `G`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetastableSet {
    pub eps: f64,
    pub members: Vec<usize>,
    pub ratios: Vec<Option<f64>>,
}

/// States `x` outside `G` with `sup_z E tau^z_{x ∪ G} < eps E tau^x_G`.
/// An empty supremum counts as zero.
pub fn metastable_set(chain: &MarkovChain, target: &[usize], eps: f64) -> Result<MetastableSet> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    let to_g = mean_hitting_times(chain, target)?;
    let in_g = mask(chain.n(), target);
    let mut ratios = vec![None; chain.n()];
    let mut members = Vec::new();
    for x in 0..chain.n() {
        if in_g[x] {
            continue;
        }
        let mut set = target.to_vec();
        set.push(x);
        let sup = mean_hitting_times(chain, &set)?.into_iter().fold(0.0, f64::max);
        let ratio = sup / to_g[x];
        ratios[x] = Some(ratio);
        if ratio < eps {
            members.push(x);
        }
    }
    Ok(MetastableSet { eps, members, ratios })
}

/// For all ordered member pairs: `E tau_G^x / E tau_G^y` within `[1/(1+eps), 1+eps]`
/// and `P(tau_x^y < tau_G^y) >= 1 - 2 eps`.
pub fn check_metastable_pairs(chain: &MarkovChain, target: &[usize], set: &MetastableSet) -> Result<CheckReport> {
    let eps = set.eps;
    let to_g = mean_hitting_times(chain, target)?;
    let mut equiv = CheckOutcome::new("equivT");
    let mut visit = CheckOutcome::new("Pvisit");
    for &x in &set.members {
        let reach_x = hitting_probabilities(chain, &[x], target)?;
        for &y in &set.members {
            if x == y {
                continue;
            }
            let ratio = to_g[x] / to_g[y];
            let at = || format!("x={x} y={y}");
            equiv.le(ratio, 1.0 + eps, 1e-10, at);
            equiv.ge(ratio, 1.0 / (1.0 + eps), 1e-10, at);
            visit.ge(reach_x[y], 1.0 - 2.0 * eps, 1e-10, at);
        }
    }
    if set.members.len() < 2 {
        equiv.skip("fewer than two members");
        visit.skip("fewer than two members");
    }
    Ok(CheckReport { checks: vec![equiv, visit] })
}

/// Both sides of `E tau_z^y = E tau^y_{x,z} + E tau_z^x P(tau_x^y < tau_z^y)`.
pub fn renewal_identity(chain: &MarkovChain, x: usize, y: usize, z: usize) -> Result<(f64, f64)> {
    if x == z {
        return Err(Error::InvalidInput("renewal identity needs x != z".into()));
    }
    let lhs = mean_hitting_times(chain, &[z])?[y];
    let both = mean_hitting_times(chain, &[x, z])?[y];
    let from_x = mean_hitting_times(chain, &[z])?[x];
    let first = if y == x { 1.0 } else { hitting_probabilities(chain, &[x], &[z])?[y] };
    Ok((lhs, both + from_x * first))
}

fn rel_tol(v: f64) -> f64 {
    1e-10 * v.abs().max(1.0)
}

/// `T^{Q(zeta)}` for each `zeta`, or `None` when the survival curve would exceed `budget`.
pub fn quantile_times(chain: &MarkovChain, pair: &ReferencePair, t_e: f64, zetas: &[f64], budget: f64) -> Result<Vec<Option<usize>>> {
    let Some(&zmin) = zetas.iter().min_by(|a, b| a.total_cmp(b)) else {
        return Ok(Vec::new());
    };
    if zetas.iter().any(|&z| !(z > 0.0 && z < 1.0)) {
        return Err(Error::InvalidInput("every zeta must lie in (0,1)".into()));
    }
    // Q(zeta) <= T^E / zeta by the Markov inequality
    let horizon = (t_e / zmin).ceil() + 1.0;
    if horizon * chain.n() as f64 > budget {
        return Ok(vec![None; zetas.len()]);
    }
    let curve = survival_curve(chain, pair.x0, &pair.target, Stop::Horizon(horizon as usize))?;
    zetas.iter().map(|&z| curve.quantile(z).map(Some)).collect()
}

/// The finite inequalities behind the implications between hypotheses.
///
/// `radii` are the recurrence times tested in (a) and (d); when empty, powers
/// of two up to `min(T^E, budget / n)` are used.
pub fn theorem_t3_inequality_suite(
    chain: &MarkovChain,
    pair: &ReferencePair,
    zetas: &[f64],
    radii: &[usize],
    budget: f64,
) -> Result<CheckReport> {
    let sc = pair_scales(chain, pair)?;
    let n = chain.n() as f64;
    let mut report = CheckReport::default();

    let mut b = CheckOutcome::new("T_LT<=T_E");
    b.le(sc.t_lt, sc.t_e, rel_tol(sc.t_e), || format!("T_LT={} T_E={}", sc.t_lt, sc.t_e));

    let mut c = CheckOutcome::new("zeta*T_Q<=T_E");
    for (&z, q) in zetas.iter().zip(quantile_times(chain, pair, sc.t_e, zetas, budget)?) {
        match q {
            Some(q) => c.le(z * q as f64, sc.t_e, rel_tol(sc.t_e), || format!("zeta={z} T_Q={q}")),
            None => c.skip("survival curve over budget"),
        }
    }

    let radii: Vec<usize> = if radii.is_empty() {
        let limit = sc.t_e.min(budget / n).max(1.0);
        std::iter::successors(Some(1usize), |r| r.checked_mul(2)).take_while(|&r| r as f64 <= limit).collect()
    } else {
        let mut r = radii.to_vec();
        r.sort_unstable();
        r
    };
    let mut a = CheckOutcome::new("markov_from_rho_A");
    let mut d = CheckOutcome::new("sup_tau_from_Rec");
    let mut it = RecurrenceIter::new(chain, pair);
    let bound_a = n * sc.rho_a().value * sc.t_lt;
    for &big_r in &radii {
        while it.time() < big_r {
            it.step();
        }
        let (r, _) = it.sup(pair.x0);
        let rhs = bound_a / big_r as f64;
        a.le(r, rhs, rel_tol(rhs), || format!("R={big_r}"));
        if r < 1.0 {
            let rhs = big_r as f64 * (2.0 + r / (1.0 - r));
            d.le(sc.sup_tau, rhs, rel_tol(rhs), || format!("R={big_r} r={r:.3e}"));
        } else {
            d.skip("r = 1 at this R");
        }
    }
    report.push(a);
    report.push(b);
    report.push(c);
    report.push(d);
    Ok(report)
}

/// Whether the asymptotic parameter grows (`L -> inf`) or shrinks (`p -> 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        }
    }
}

/// How the recurrence time `R_n` is chosen at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RSelection {
    /// `R = ceil(sqrt(T sup_z E tau^z_{x0 ∪ G}))` for each time scale `T`.
    GeometricMean,
    /// Smallest `R` with exact recurrence error at most `r_target`.
    Minimal { r_target: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub parameter: String,
    pub direction: Direction,
    pub zeta: f64,
    pub threshold: f64,
    pub max_residual: f64,
    pub selection: RSelection,
    pub work_budget: f64,
}

impl SweepConfig {
    pub fn new(parameter: impl Into<String>, direction: Direction) -> Self {
        Self {
            parameter: parameter.into(),
            direction,
            zeta: DEFAULT_ZETA,
            threshold: 0.1,
            max_residual: 0.2,
            selection: RSelection::GeometricMean,
            work_budget: DEFAULT_WORK_BUDGET,
        }
    }
}

/// One family member handed to the sweep.
pub struct FamilyPoint {
    pub chain: MarkovChain,
    pub pair: ReferencePair,
    /// `|X^{(n)}|` as it enters `|X| rho_A`; usually the state count.
    pub size: f64,
}

/// Recurrence data for one time scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCheck {
    pub scale: String,
    /// `None` when the scale itself was over budget.
    pub t: Option<f64>,
    #[serde(rename = "R")]
    pub big_r: Option<usize>,
    pub ratio: Option<f64>,
    pub r_markov: Option<f64>,
    pub r_exact: Option<f64>,
    /// `P(tau_G^{x0} > T)`, for the pointwise exponential-law check.
    pub survival_at_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointVerdicts {
    pub a: bool,
    pub b: bool,
    pub g_e: bool,
    pub g_lt: bool,
    pub g_q: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub param: f64,
    pub n_states: usize,
    pub size: f64,
    pub rho_a: SupRatio,
    pub rho_b: SupRatio,
    pub size_rho_a: f64,
    pub scales: PairScales,
    pub zeta: f64,
    pub t_q: Option<usize>,
    /// Ordered `E`, `LT`, `Q`.
    pub checks: Vec<ScaleCheck>,
    /// Certificate on the `T^E` scale, when its error was computed exactly.
    pub certificate: Option<RecurrenceCertificate>,
    pub verdicts: PointVerdicts,
}

impl HypothesisReport {
    pub fn scale(&self, name: &str) -> Option<&ScaleCheck> {
        self.checks.iter().find(|c| c.scale == name)
    }
}

pub fn evaluate_point(point: &FamilyPoint, param: f64, cfg: &SweepConfig) -> Result<HypothesisReport> {
    let FamilyPoint { chain, pair, size } = point;
    let sc = pair_scales(chain, pair)?;
    let n = chain.n() as f64;
    let budget = cfg.work_budget;
    let curve_horizon = (sc.t_e / cfg.zeta).ceil() + 1.0;
    let curve = if curve_horizon * n <= budget {
        Some(survival_curve(chain, pair.x0, &pair.target, Stop::Horizon(curve_horizon as usize))?)
    } else {
        None
    };
    let t_q = match &curve {
        Some(c) => Some(c.quantile(cfg.zeta)?),
        None => None,
    };

    let minimal = match cfg.selection {
        RSelection::GeometricMean => None,
        RSelection::Minimal { r_target } => {
            let cap = (10.0 * sc.t_e).ceil().max(1.0);
            if cap * n > budget {
                None
            } else {
                minimal_r_capped(chain, pair, r_target, cap as usize)?
            }
        }
    };

    let scales = [("E", Some(sc.t_e)), ("LT", Some(sc.t_lt)), ("Q", t_q.map(|q| q as f64))];
    let mut checks = Vec::with_capacity(3);
    let mut certificate = None;
    for (name, t) in scales {
        let Some(t) = t else {
            checks.push(ScaleCheck { scale: name.into(), t: None, big_r: None, ratio: None, r_markov: None, r_exact: None, survival_at_t: None });
            continue;
        };
        let big_r = match (&cfg.selection, &minimal) {
            (RSelection::Minimal { .. }, Some(cert)) => cert.big_r,
            _ => ((t * sc.sup_tau).sqrt().ceil() as usize).max(1),
        };
        let r_markov = (sc.sup_tau / big_r as f64).min(1.0);
        let (r_exact, witness) = match &minimal {
            Some(cert) => (Some(cert.achieved), cert.argmax_state),
            None if big_r as f64 * n <= budget => {
                let (r, at) = recurrence_error(chain, pair, big_r)?;
                (Some(r), at)
            }
            None => (None, pair.x0),
        };
        if name == "E" {
            certificate = Some(RecurrenceCertificate {
                big_r,
                r: r_exact.unwrap_or(r_markov),
                achieved: r_exact.unwrap_or(r_markov),
                argmax_state: witness,
            });
        }
        let survival_at_t = curve.as_ref().and_then(|c| {
            let k = t.floor() as usize;
            c.covers(k).then(|| c.survival(k))
        });
        checks.push(ScaleCheck {
            scale: name.into(),
            t: Some(t),
            big_r: Some(big_r),
            ratio: Some(big_r as f64 / t),
            r_markov: Some(r_markov),
            r_exact,
            survival_at_t,
        });
    }

    let rho_a = sc.rho_a();
    let rho_b = sc.rho_b();
    let small = |v: Option<f64>| v.is_some_and(|v| v < cfg.threshold);
    let g = |c: &ScaleCheck| small(c.ratio) && small(c.r_exact.or(c.r_markov));
    let verdicts = PointVerdicts {
        a: size * rho_a.value < cfg.threshold,
        b: rho_b.value < cfg.threshold,
        g_e: g(&checks[0]),
        g_lt: g(&checks[1]),
        g_q: g(&checks[2]),
    };
    Ok(HypothesisReport {
        param,
        n_states: chain.n(),
        size: *size,
        rho_a,
        rho_b,
        size_rho_a: size * rho_a.value,
        scales: sc,
        zeta: cfg.zeta,
        t_q,
        checks,
        certificate: certificate.filter(|c| c.r < 1.0 || minimal.is_some()),
        verdicts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyVerdicts {
    pub hp_a: bool,
    pub hp_b: bool,
    pub hp_g_e: bool,
    pub hp_g_lt: bool,
    pub hp_g_q: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySweep {
    pub parameter: String,
    pub direction: Direction,
    pub grid: Vec<f64>,
    pub points: Vec<HypothesisReport>,
    /// Log-log fits against the parameter; quantities missing or zero anywhere are not fitted.
    pub fits: BTreeMap<String, PowerFit>,
    pub verdicts: FamilyVerdicts,
    /// Trend verdicts are pointwise along the grid and say nothing about uniformity in `t`.
    pub note: String,
}

impl FamilySweep {
    /// The most asymptotic grid point.
    pub fn final_point(&self) -> &HypothesisReport {
        let pick = |a: &&HypothesisReport, b: &&HypothesisReport| a.param.total_cmp(&b.param);
        match self.direction {
            Direction::Increasing => self.points.iter().max_by(pick),
            Direction::Decreasing => self.points.iter().min_by(pick),
        }
        .expect("sweeps have at least four points")
    }

    /// Slope with the sign flipped for decreasing parameters, so negative means vanishing.
    pub fn trend(&self, quantity: &str) -> Option<f64> {
        self.fits.get(quantity).map(|f| f.slope * self.direction.sign())
    }

    /// Whether every point of a tracked quantity is available.
    pub fn series(&self, quantity: &str) -> Option<Vec<f64>> {
        self.points.iter().map(|p| tracked(p).into_iter().find(|(k, _)| k == quantity).and_then(|(_, v)| v)).collect()
    }
}

/// Every quantity a sweep tracks, by name.
pub fn tracked(p: &HypothesisReport) -> Vec<(String, Option<f64>)> {
    let mut out = vec![
        ("rho_A".to_string(), Some(p.rho_a.value)),
        ("rho_B".to_string(), Some(p.rho_b.value)),
        ("size_rho_A".to_string(), Some(p.size_rho_a)),
        ("T_E".to_string(), Some(p.scales.t_e)),
        ("T_LT".to_string(), Some(p.scales.t_lt)),
        ("T_Q".to_string(), p.t_q.map(|q| q as f64)),
        ("sup_local".to_string(), Some(p.scales.sup_local)),
        ("sup_tau".to_string(), Some(p.scales.sup_tau)),
    ];
    for c in &p.checks {
        out.push((format!("R_over_T_{}", c.scale), c.ratio));
        out.push((format!("r_markov_{}", c.scale), c.r_markov));
        out.push((format!("r_exact_{}", c.scale), c.r_exact));
    }
    out
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(Error::InsufficientGrid(format!("{} points, need at least 4", grid.len())));
    }
    if grid.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::InsufficientGrid("grid values must be positive and finite".into()));
    }
    let up = grid.windows(2).all(|w| w[0] < w[1]);
    let down = grid.windows(2).all(|w| w[0] > w[1]);
    if !(up || down) {
        return Err(Error::InsufficientGrid("grid must be strictly monotone".into()));
    }
    let (lo, hi) = if up { (grid[0], grid[grid.len() - 1]) } else { (grid[grid.len() - 1], grid[0]) };
    if hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(Error::InsufficientGrid(format!("grid spans {:.3} decades, need one", (hi / lo).log10())));
    }
    Ok(())
}

/// Evaluates every grid point (in parallel), fits trends and assigns verdicts.
pub fn evaluate_hypotheses<F>(grid: &[f64], build: F, cfg: &SweepConfig) -> Result<FamilySweep>
where
    F: Fn(f64) -> Result<FamilyPoint> + Sync,
{
    validate_grid(grid)?;
    if !(cfg.zeta > 0.0 && cfg.zeta < 1.0) {
        return Err(Error::InvalidInput(format!("zeta = {} not in (0,1)", cfg.zeta)));
    }
    let points = grid
        .par_iter()
        .map(|&x| evaluate_point(&build(x)?, x, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut fits = BTreeMap::new();
    for (name, _) in tracked(&points[0]) {
        let ys: Option<Vec<f64>> = points
            .iter()
            .map(|p| tracked(p).into_iter().find(|(k, _)| *k == name).and_then(|(_, v)| v).filter(|v| *v > 0.0))
            .collect();
        if let Some(ys) = ys {
            fits.insert(name, loglog_fit(grid, &ys)?);
        }
    }

    let mut sweep = FamilySweep {
        parameter: cfg.parameter.clone(),
        direction: cfg.direction,
        grid: grid.to_vec(),
        points,
        fits,
        verdicts: FamilyVerdicts { hp_a: false, hp_b: false, hp_g_e: false, hp_g_lt: false, hp_g_q: false },
        note: "verdicts are trend fits over a finite grid; uniformity in t is not certified".into(),
    };
    let vanishing = |q: &str| {
        sweep.trend(q).is_some_and(|s| s < 0.0) && sweep.fits[q].max_rel_residual < cfg.max_residual
    };
    let g = |scale: &str| {
        let r = if sweep.fits.contains_key(&format!("r_exact_{scale}")) { "r_exact" } else { "r_markov" };
        vanishing(&format!("R_over_T_{scale}")) && vanishing(&format!("{r}_{scale}"))
    };
    let verdicts = FamilyVerdicts {
        hp_a: vanishing("size_rho_A") && sweep.final_point().size_rho_a < cfg.threshold,
        hp_b: vanishing("rho_B"),
        hp_g_e: g("E"),
        hp_g_lt: g("LT"),
        hp_g_q: g("Q"),
    };
    sweep.verdicts = verdicts;
    Ok(sweep)
}
