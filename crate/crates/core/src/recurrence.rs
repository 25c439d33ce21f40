//! Recurrence certificates `Rec(R, r)` and basins of attraction.

use serde::{Deserialize, Serialize};

use crate::chain::{mask, MarkovChain, ReferencePair};
use crate::error::{Error, Result};
use crate::hitting::{hitting_probabilities, mean_hitting_time, SubOperator};

/// `sup_x P(tau^x_{x0 ∪ G} > R) <= r`, with the attained value and its witness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceCertificate {
    #[serde(rename = "R")]
    pub big_r: usize,
    pub r: f64,
    pub achieved: f64,
    pub argmax_state: usize,
}

impl RecurrenceCertificate {
    /// `Rec(N R, r^N)`, valid by submultiplicativity of the recurrence error.
    pub fn power(&self, n: u32) -> Self {
        assert!(n >= 1);
        Self {
            big_r: self.big_r * n as usize,
            r: self.r.powi(n as i32),
            achieved: self.achieved.powi(n as i32),
            argmax_state: self.argmax_state,
        }
    }
}

/// Steps the column iteration `v_{t+1} = Q v_t` from `v_0 = 1` on the complement of `{x0} ∪ G`.
pub struct RecurrenceIter {
    op: SubOperator,
    v: Vec<f64>,
    scratch: Vec<f64>,
    t: usize,
}

impl RecurrenceIter {
    pub fn new(chain: &MarkovChain, pair: &ReferencePair) -> Self {
        let op = SubOperator::new(chain, &mask(chain.n(), &pair.with_x0()));
        let m = op.len();
        Self { op, v: vec![1.0; m], scratch: vec![0.0; m], t: 0 }
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn step(&mut self) {
        self.op.backward(&self.v, &mut self.scratch);
        std::mem::swap(&mut self.v, &mut self.scratch);
        self.t += 1;
    }

    /// `(sup_x P(tau^x > t), argmax)` at the current time; states in `{x0} ∪ G` give zero.
    pub fn sup(&self, fallback: usize) -> (f64, usize) {
        let mut best = (0.0, fallback);
        for (k, &v) in self.v.iter().enumerate() {
            if v > best.0 {
                best = (v, self.op.members()[k]);
            }
        }
        best
    }

    /// `P(tau^x_{x0 ∪ G} > t)` for every state.
    pub fn values(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (k, &i) in self.op.members().iter().enumerate() {
            out[i] = self.v[k];
        }
        out
    }

    /// Nonzero entries of the restricted operator, the cost of one step.
    pub fn cost_per_step(&self) -> usize {
        self.op.len().max(1) * 3
    }
}

/// `sup_x P(tau^x_{x0 ∪ G} > R)` and the state attaining it.
pub fn recurrence_error(chain: &MarkovChain, pair: &ReferencePair, big_r: usize) -> Result<(f64, usize)> {
    pair.check_against(chain)?;
    let mut it = RecurrenceIter::new(chain, pair);
    for _ in 0..big_r {
        it.step();
    }
    Ok(it.sup(pair.x0))
}

/// Recurrence error for every `t = 0..=t_max`.
pub fn recurrence_profile(chain: &MarkovChain, pair: &ReferencePair, t_max: usize) -> Result<Vec<(f64, usize)>> {
    pair.check_against(chain)?;
    let mut it = RecurrenceIter::new(chain, pair);
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(it.sup(pair.x0));
    for _ in 0..t_max {
        it.step();
        out.push(it.sup(pair.x0));
    }
    Ok(out)
}

/// Smallest `R >= 1` with recurrence error at most `r_target`.
///
/// The error is non-increasing in `R`, so a single forward scan finds it.
/// Returns `None` when no `R <= 10 T^E` works; such a certificate would be
/// useless because recurrence must be faster than escape.
pub fn minimal_r(chain: &MarkovChain, pair: &ReferencePair, r_target: f64) -> Result<Option<RecurrenceCertificate>> {
    if !(r_target > 0.0 && r_target < 1.0) {
        return Err(Error::InvalidInput(format!("r_target = {r_target} not in (0,1)")));
    }
    pair.check_against(chain)?;
    let t_e = mean_hitting_time(chain, pair.x0, &pair.target)?;
    let cap = ((10.0 * t_e).ceil() as usize).max(1);
    minimal_r_capped(chain, pair, r_target, cap)
}

pub fn minimal_r_capped(
    chain: &MarkovChain,
    pair: &ReferencePair,
    r_target: f64,
    cap: usize,
) -> Result<Option<RecurrenceCertificate>> {
    let mut it = RecurrenceIter::new(chain, pair);
    while it.time() < cap {
        it.step();
        let (achieved, argmax_state) = it.sup(pair.x0);
        if achieved <= r_target {
            return Ok(Some(RecurrenceCertificate { big_r: it.time(), r: r_target, achieved, argmax_state }));
        }
    }
    Ok(None)
}

/// `B(x0, r0)`: states reaching `x0` before `G` with probability above `1 - r0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basin {
    pub r0: f64,
    pub members: Vec<usize>,
    /// `P(tau^x_{x0 ∪ G} = tau^x_{x0})` per state.
    pub values: Vec<f64>,
    /// `P(tau^x_G < tau^x_{x0})` per state, the complement of `values` computed directly.
    pub miss: Vec<f64>,
}

impl Basin {
    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }
}

pub fn basin(chain: &MarkovChain, pair: &ReferencePair, r0: f64) -> Result<Basin> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::InvalidInput(format!("r0 = {r0} not in (0,1)")));
    }
    pair.check_against(chain)?;
    let values = hitting_probabilities(chain, &[pair.x0], &pair.target)?;
    let miss = hitting_probabilities(chain, &pair.target, &[pair.x0])?;
    // membership is decided on the complement, which keeps precision near 1
    let members = (0..chain.n()).filter(|&x| miss[x] < r0).collect();
    Ok(Basin { r0, members, values, miss })
}
