use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};

/// Storage hint; decides which solver family the hitting routines use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Dense,
    Tridiagonal,
}

/// Finite discrete-time Markov chain.
///
/// Off-diagonal transitions are kept as sorted sparse rows. The self-loop
/// probability is stored separately; solvers never read it and treat the
/// holding probability as `1 - sum(off-diagonal)`, which is exact for every
/// chain that passes [`MarkovChain::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
    layout: Layout,
}

/// Per-invariant outcome of [`MarkovChain::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub row_sums_ok: bool,
    pub bad_row_sums: Vec<(usize, f64)>,
    pub entries_ok: bool,
    pub bad_entries: Vec<(usize, usize, f64)>,
    pub irreducible: bool,
    /// States not reachable from state 0, or unable to reach it.
    pub disconnected: Vec<usize>,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.row_sums_ok && self.entries_ok && self.irreducible
    }

    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        if !self.row_sums_ok {
            parts.push(format!("row sums off at rows {:?}", self.bad_row_sums.iter().map(|r| r.0).collect::<Vec<_>>()));
        }
        if !self.entries_ok {
            parts.push(format!("{} entries outside [0,1]", self.bad_entries.len()));
        }
        if !self.irreducible {
            parts.push(format!("not strongly connected ({} states cut off)", self.disconnected.len()));
        }
        if parts.is_empty() {
            "ok".into()
        } else {
            parts.join(", ")
        }
    }
}

impl MarkovChain {
    /// Builds a chain from full rows of `(column, probability)` entries.
    ///
    /// Entries on the diagonal become the self-loop; repeated columns are
    /// summed. No stochasticity checks are made here, see [`validate`](Self::validate).
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("chain needs at least one state".into()));
        }
        let mut off = Vec::with_capacity(n);
        let mut diag = vec![0.0; n];
        for (i, row) in rows.into_iter().enumerate() {
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (j, p) in row {
                if j >= n {
                    return Err(Error::InvalidInput(format!("row {i} references state {j} >= n = {n}")));
                }
                if j == i {
                    diag[i] += p;
                } else {
                    entries.push((j, p));
                }
            }
            entries.sort_by_key(|e| e.0);
            entries.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            entries.retain(|e| e.1 != 0.0);
            off.push(entries);
        }
        let tridiagonal = off
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().all(|&(j, _)| j + 1 == i || i + 1 == j));
        Ok(Self {
            rows: off,
            diag,
            layout: if tridiagonal { Layout::Tridiagonal } else { Layout::Dense },
        })
    }

    /// Builds a chain from off-diagonal rows, completing each row with a self-loop.
    pub fn from_off_diagonal(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut chain = Self::from_rows(rows)?;
        for i in 0..chain.n() {
            chain.diag[i] = 1.0 - chain.off_sum(i);
        }
        Ok(chain)
    }

    /// Birth-death chain on `0..up.len()`; `up[n-1]` and `down[0]` must be zero.
    pub fn birth_death(up: &[f64], down: &[f64]) -> Result<Self> {
        let n = up.len();
        if n == 0 || down.len() != n {
            return Err(Error::InvalidInput("up and down must be nonempty and of equal length".into()));
        }
        if up[n - 1] != 0.0 || down[0] != 0.0 {
            return Err(Error::ParamOutOfRange("up[n-1] and down[0] must be zero".into()));
        }
        for i in 0..n {
            let (u, d) = (up[i], down[i]);
            if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&d) || u + d > 1.0 {
                return Err(Error::ParamOutOfRange(format!("state {i}: up {u}, down {d}")));
            }
        }
        let rows = (0..n)
            .map(|i| {
                let mut row = Vec::with_capacity(2);
                if i > 0 && down[i] > 0.0 {
                    row.push((i - 1, down[i]));
                }
                if i + 1 < n && up[i] > 0.0 {
                    row.push((i + 1, up[i]));
                }
                row
            })
            .collect();
        let mut chain = Self::from_off_diagonal(rows)?;
        chain.layout = Layout::Tridiagonal;
        Ok(chain)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Off-diagonal entries of row `i`, sorted by column.
    pub fn off_diagonal(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn self_loop(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn off_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|e| e.1).sum()
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        match self.rows[i].binary_search_by_key(&j, |e| e.0) {
            Ok(k) => self.rows[i][k].1,
            Err(_) => 0.0,
        }
    }

    /// `P(i, i+1)`, zero past the end.
    pub fn up(&self, i: usize) -> f64 {
        if i + 1 < self.n() {
            self.prob(i, i + 1)
        } else {
            0.0
        }
    }

    /// `P(i, i-1)`, zero at state 0.
    pub fn down(&self, i: usize) -> f64 {
        if i > 0 {
            self.prob(i, i - 1)
        } else {
            0.0
        }
    }

    pub fn is_birth_death(&self) -> bool {
        self.layout == Layout::Tridiagonal
    }

    /// Dense row-major copy of the transition matrix.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
            for &(j, p) in &self.rows[i] {
                m[i][j] = p;
            }
        }
        m
    }

    pub fn validate(&self) -> Diagnostics {
        self.validate_with(&Tolerances::default())
    }

    pub fn validate_with(&self, tol: &Tolerances) -> Diagnostics {
        let n = self.n();
        let mut bad_row_sums = Vec::new();
        let mut bad_entries = Vec::new();
        for i in 0..n {
            let s = self.diag[i] + self.off_sum(i);
            if !((s - 1.0).abs() <= tol.structural) {
                bad_row_sums.push((i, s));
            }
            let entries = std::iter::once((i, self.diag[i])).chain(self.rows[i].iter().copied());
            for (j, p) in entries {
                if !(0.0..=1.0).contains(&p) {
                    bad_entries.push((i, j, p));
                }
            }
        }
        let disconnected = self.disconnected_states();
        Diagnostics {
            row_sums_ok: bad_row_sums.is_empty(),
            bad_row_sums,
            entries_ok: bad_entries.is_empty(),
            bad_entries,
            irreducible: disconnected.is_empty(),
            disconnected,
        }
    }

    /// Returns `Ok(())` or the first failed invariant as an error.
    pub fn ensure_valid(&self) -> Result<()> {
        let d = self.validate();
        if !d.row_sums_ok || !d.entries_ok {
            return Err(Error::InvalidInput(d.summary()));
        }
        if !d.irreducible {
            return Err(Error::NotIrreducible(d.summary()));
        }
        Ok(())
    }

    fn disconnected_states(&self) -> Vec<usize> {
        let n = self.n();
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for &(j, p) in &self.rows[i] {
                if p > 0.0 {
                    reverse[j].push(i);
                }
            }
        }
        let forward = reach(n, |i| self.rows[i].iter().filter(|e| e.1 > 0.0).map(|e| e.0).collect());
        let backward = reach(n, |i| reverse[i].clone());
        (0..n).filter(|&i| !forward[i] || !backward[i]).collect()
    }

    /// Unique invariant distribution.
    ///
    /// Birth-death chains use the detailed-balance product in log space;
    /// everything else goes through Grassmann-Taksar-Heyman elimination.
    pub fn stationary_distribution(&self) -> Result<StateDistribution> {
        let d = self.validate();
        if !d.irreducible {
            return Err(Error::NotIrreducible(d.summary()));
        }
        let weights = if self.is_birth_death() {
            self.stationary_birth_death()
        } else {
            self.stationary_gth()?
        };
        Ok(StateDistribution { weights })
    }

    fn stationary_birth_death(&self) -> Vec<f64> {
        let n = self.n();
        let mut log_w = vec![0.0; n];
        for i in 1..n {
            log_w[i] = log_w[i - 1] + self.up(i - 1).ln() - self.down(i).ln();
        }
        normalize_log(&log_w)
    }

    fn stationary_gth(&self) -> Result<Vec<f64>> {
        let n = self.n();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for &(j, p) in &self.rows[i] {
                a[i * n + j] = p;
            }
        }
        for k in (1..n).rev() {
            let s: f64 = a[k * n..k * n + k].iter().sum();
            if !(s > 0.0) {
                return Err(Error::SolverFailure(format!("zero pivot at state {k}")));
            }
            for i in 0..k {
                a[i * n + k] /= s;
            }
            for i in 0..k {
                let aik = a[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..k {
                    if j != i {
                        a[i * n + j] += aik * a[k * n + j];
                    }
                }
            }
        }
        let mut pi = vec![0.0; n];
        pi[0] = 1.0;
        for j in 1..n {
            pi[j] = (0..j).map(|i| pi[i] * a[i * n + j]).sum();
        }
        let total: f64 = pi.iter().sum();
        Ok(pi.into_iter().map(|v| v / total).collect())
    }

    /// `max |pi(x)P(x,y) - pi(y)P(y,x)|` over edges, and whether it is within tolerance.
    pub fn check_reversibility(&self, pi: &StateDistribution) -> (bool, f64) {
        let mut worst: f64 = 0.0;
        for i in 0..self.n() {
            for &(j, p) in &self.rows[i] {
                let v = (pi.weights[i] * p - pi.weights[j] * self.prob(j, i)).abs();
                worst = worst.max(v);
            }
        }
        (worst <= Tolerances::default().structural, worst)
    }

    /// `sup_x |(pi P)(x) - pi(x)|`.
    pub fn stationary_residual(&self, pi: &StateDistribution) -> f64 {
        let n = self.n();
        let mut out: Vec<f64> = (0..n).map(|i| pi.weights[i] * self.diag[i]).collect();
        for i in 0..n {
            for &(j, p) in &self.rows[i] {
                out[j] += pi.weights[i] * p;
            }
        }
        out.iter().zip(&pi.weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> ChainFile {
        let rows = (0..self.n())
            .map(|i| {
                let mut row: Vec<(usize, f64)> = self.rows[i].clone();
                if self.diag[i] != 0.0 {
                    row.push((i, self.diag[i]));
                    row.sort_by_key(|e| e.0);
                }
                row
            })
            .collect();
        ChainFile::Rows {
            n: self.n(),
            format: Some(self.layout),
            rows,
        }
    }

    pub fn from_file(file: ChainFile) -> Result<Self> {
        match file {
            ChainFile::Rows { n, format, rows } => {
                if rows.len() != n {
                    return Err(Error::InvalidInput(format!("n = {n} but {} rows given", rows.len())));
                }
                let mut chain = Self::from_rows(rows)?;
                if format == Some(Layout::Tridiagonal) && chain.layout != Layout::Tridiagonal {
                    return Err(Error::NotBirthDeath);
                }
                if format == Some(Layout::Dense) {
                    chain.layout = Layout::Dense;
                }
                Ok(chain)
            }
            ChainFile::BirthDeath { n, up, down } => {
                if let Some(n) = n {
                    if n != up.len() {
                        return Err(Error::InvalidInput(format!("n = {n} but {} up entries", up.len())));
                    }
                }
                Self::birth_death(&up, &down)
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ChainFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }
}

fn reach(n: usize, next: impl Fn(usize) -> Vec<usize>) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in next(i) {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

pub(crate) fn normalize_log(log_w: &[f64]) -> Vec<f64> {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// On-disk chain formats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChainFile {
    Rows {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        format: Option<Layout>,
        rows: Vec<Vec<(usize, f64)>>,
    },
    /// Birth-death chain; holding probabilities are implied.
    BirthDeath {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        up: Vec<f64>,
        down: Vec<f64>,
    },
}

/// Probability vector over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    pub weights: Vec<f64>,
}

impl StateDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("negative or NaN weight".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > Tolerances::default().structural {
            return Err(Error::InvalidInput(format!("weights sum to {s}")));
        }
        Ok(Self { weights })
    }
}

/// Distinguished start `x0` and target set `G`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferencePair {
    pub x0: usize,
    pub target: Vec<usize>,
}

impl ReferencePair {
    pub fn new(x0: usize, target: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut target: Vec<usize> = target.into_iter().collect();
        target.sort_unstable();
        target.dedup();
        if target.is_empty() {
            return Err(Error::InvalidPair("target set is empty".into()));
        }
        if target.contains(&x0) {
            return Err(Error::InvalidPair(format!("x0 = {x0} lies in the target set")));
        }
        Ok(Self { x0, target })
    }

    pub fn check_against(&self, chain: &MarkovChain) -> Result<()> {
        let n = chain.n();
        if self.x0 >= n || self.target.iter().any(|&g| g >= n) {
            return Err(Error::InvalidPair(format!("state index out of range for n = {n}")));
        }
        Ok(())
    }

    /// `{x0} ∪ G`, sorted.
    pub fn with_x0(&self) -> Vec<usize> {
        let mut v = self.target.clone();
        v.push(self.x0);
        v.sort_unstable();
        v
    }
}

/// Membership mask for a state set.
pub(crate) fn mask(n: usize, set: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &s in set {
        m[s] = true;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_state(q: f64, r: f64) -> MarkovChain {
        MarkovChain::from_off_diagonal(vec![vec![(1, q)], vec![(0, r)]]).unwrap()
    }

    #[test]
    fn symmetric_two_state_passes_and_is_uniform() {
        let c = MarkovChain::from_rows(vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 0.5), (1, 0.5)]]).unwrap();
        assert!(c.validate().passed());
        let pi = c.stationary_distribution().unwrap();
        assert_relative_eq!(pi.weights[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(pi.weights[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn short_row_fails_row_sum() {
        let c = MarkovChain::from_rows(vec![vec![(0, 0.4), (1, 0.5)], vec![(0, 0.5), (1, 0.5)]]).unwrap();
        let d = c.validate();
        assert!(!d.row_sums_ok);
        assert_eq!(d.bad_row_sums[0].0, 0);
        assert!(!d.passed());
    }

    #[test]
    fn reducible_chain_is_flagged() {
        let c = MarkovChain::from_off_diagonal(vec![vec![(1, 0.5)], vec![]]).unwrap();
        let d = c.validate();
        assert!(!d.irreducible);
        assert_eq!(d.disconnected, vec![1]);
        assert!(matches!(c.stationary_distribution(), Err(Error::NotIrreducible(_))));
    }

    #[test]
    fn rotation_is_not_reversible() {
        let c = MarkovChain::from_off_diagonal(vec![vec![(1, 1.0)], vec![(2, 1.0)], vec![(0, 1.0)]]).unwrap();
        let pi = c.stationary_distribution().unwrap();
        for w in &pi.weights {
            assert_relative_eq!(*w, 1.0 / 3.0, epsilon = 1e-15);
        }
        let (ok, worst) = c.check_reversibility(&pi);
        assert!(!ok);
        assert_relative_eq!(worst, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn two_state_stationary_closed_form() {
        let c = two_state(0.2, 0.05);
        let pi = c.stationary_distribution().unwrap();
        assert_relative_eq!(pi.weights[0], 0.05 / 0.25, max_relative = 1e-14);
        assert!(c.stationary_residual(&pi) < 1e-15);
    }

    #[test]
    fn gth_agrees_with_birth_death_product() {
        let up = [0.3, 0.2, 0.4, 0.1, 0.0];
        let down = [0.0, 0.5, 0.1, 0.3, 0.6];
        let bd = MarkovChain::birth_death(&up, &down).unwrap();
        let mut dense = bd.clone();
        dense.layout = Layout::Dense;
        let a = bd.stationary_distribution().unwrap();
        let b = dense.stationary_distribution().unwrap();
        for i in 0..5 {
            assert_relative_eq!(a.weights[i], b.weights[i], max_relative = 1e-13);
        }
        assert!(bd.check_reversibility(&a).0);
    }

    #[test]
    fn json_round_trip_both_formats() {
        let c = MarkovChain::birth_death(&[0.5, 0.25, 0.0], &[0.0, 0.5, 0.125]).unwrap();
        let back = MarkovChain::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(c, back);
        let bd = MarkovChain::from_json(r#"{"up":[0.5,0.25,0.0],"down":[0.0,0.5,0.125]}"#).unwrap();
        assert_eq!(c, bd);
        let rows = MarkovChain::from_json(r#"{"n":2,"format":"dense","rows":[[[0,0.5],[1,0.5]],[[0,1.0]]]}"#).unwrap();
        assert_eq!(rows.layout(), Layout::Dense);
        assert_eq!(rows.prob(1, 0), 1.0);
    }

    #[test]
    fn pair_rejects_x0_in_target() {
        assert!(ReferencePair::new(1, [1, 2]).is_err());
        assert!(ReferencePair::new(1, Vec::new()).is_err());
        let p = ReferencePair::new(1, [3, 2, 3]).unwrap();
        assert_eq!(p.target, vec![2, 3]);
        assert_eq!(p.with_x0(), vec![1, 2, 3]);
    }
}
