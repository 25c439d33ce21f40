//! Trajectory sampling of hitting times, used only to cross-check the exact solvers.
//!
//! Generator: ChaCha8 seeded from the user seed, trajectory `i` on stream `i`.
//! Output depends only on `(chain, start, target, count, seed)` and not on the
//! number of worker threads.

use std::io::{self, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{mask, MarkovChain};
use crate::error::{Error, Result};
use crate::hitting::{check_set, mean_hitting_time, SurvivalCurve};

/// Bumped whenever the mapping from seed to samples changes.
pub const GENERATOR_VERSION: &str = "chacha8-stream-v1";

/// Step cap as a multiple of the exact mean hitting time.
pub const CAP_FACTOR: f64 = 1e4;

const BINARY_MAGIC: &[u8; 8] = b"MHSAMP01";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    pub generator: String,
    pub seed: u64,
    pub start: usize,
    pub target: Vec<usize>,
    /// Hitting times; capped trajectories hold the cap value.
    pub samples: Vec<u64>,
    pub cap: u64,
    /// Indices of trajectories stopped at the cap, ascending.
    pub capped: Vec<usize>,
}

impl SampleSet {
    pub fn count(&self) -> usize {
        self.samples.len()
    }

    /// Fails with [`Error::TrajectoryCap`] if any trajectory was cut short.
    pub fn require_complete(&self) -> Result<()> {
        if self.capped.is_empty() {
            Ok(())
        } else {
            Err(Error::TrajectoryCap { capped: self.capped.len(), count: self.count(), cap: self.cap })
        }
    }

    /// Samples of trajectories that reached the target.
    pub fn completed(&self) -> impl Iterator<Item = u64> + '_ {
        let mut skip = self.capped.iter().peekable();
        self.samples.iter().enumerate().filter_map(move |(i, &t)| {
            if skip.peek() == Some(&&i) {
                skip.next();
                None
            } else {
                Some(t)
            }
        })
    }

    /// Mean and standard deviation over completed trajectories.
    pub fn mean_sd(&self) -> (f64, f64) {
        let n = (self.count() - self.capped.len()) as f64;
        let mean = self.completed().map(|t| t as f64).sum::<f64>() / n;
        let var = self.completed().map(|t| (t as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, var.sqrt())
    }

    /// One row per trajectory: `index,time,capped`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,time,capped")?;
        let mut capped = self.capped.iter().peekable();
        for (i, t) in self.samples.iter().enumerate() {
            let flag = if capped.peek() == Some(&&i) {
                capped.next();
                1
            } else {
                0
            };
            writeln!(w, "{i},{t},{flag}")?;
        }
        Ok(())
    }

    /// Little-endian layout: magic, count, samples, capped count, capped indices.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.count() as u64).to_le_bytes())?;
        for t in &self.samples {
            w.write_all(&t.to_le_bytes())?;
        }
        w.write_all(&(self.capped.len() as u64).to_le_bytes())?;
        for &i in &self.capped {
            w.write_all(&(i as u64).to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads back the samples and capped indices written by [`write_binary`](Self::write_binary).
    pub fn read_binary<R: Read>(mut r: R) -> io::Result<(Vec<u64>, Vec<usize>)> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a sample file"));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> io::Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let n = next(&mut r)?;
        let samples = (0..n).map(|_| next(&mut r)).collect::<io::Result<Vec<_>>>()?;
        let m = next(&mut r)?;
        let capped = (0..m).map(|_| next(&mut r).map(|v| v as usize)).collect::<io::Result<Vec<_>>>()?;
        Ok((samples, capped))
    }
}

/// Samples `count` independent copies of `tau_A^start`, capped at `1e4 T^E` steps.
pub fn sample_hitting_times(chain: &MarkovChain, start: usize, a: &[usize], count: usize, seed: u64) -> Result<SampleSet> {
    check_set(chain, a, "target set")?;
    if start >= chain.n() {
        return Err(Error::InvalidInput(format!("start {start} out of range")));
    }
    let cap = if a.contains(&start) {
        0
    } else {
        let t_e = mean_hitting_time(chain, start, a)?;
        (CAP_FACTOR * t_e).ceil().min(u64::MAX as f64 / 2.0) as u64
    };
    sample_hitting_times_capped(chain, start, a, count, seed, cap)
}

pub fn sample_hitting_times_capped(
    chain: &MarkovChain,
    start: usize,
    a: &[usize],
    count: usize,
    seed: u64,
    cap: u64,
) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    check_set(chain, a, "target set")?;
    let in_target = mask(chain.n(), a);
    let runs: Vec<(u64, bool)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            trajectory(chain, &in_target, start, cap, &mut rng)
        })
        .collect();
    let capped = runs.iter().enumerate().filter(|r| r.1 .1).map(|r| r.0).collect();
    let mut target = a.to_vec();
    target.sort_unstable();
    target.dedup();
    Ok(SampleSet {
        generator: GENERATOR_VERSION.into(),
        seed,
        start,
        target,
        samples: runs.into_iter().map(|r| r.0).collect(),
        cap,
        capped,
    })
}

/// One trajectory; self-loops are skipped in a single geometric draw.
fn trajectory(chain: &MarkovChain, in_target: &[bool], start: usize, cap: u64, rng: &mut ChaCha8Rng) -> (u64, bool) {
    let mut x = start;
    let mut t: u64 = 0;
    while !in_target[x] {
        let out = chain.off_sum(x);
        if !(out > 0.0) {
            return (cap, true);
        }
        if out < 1.0 {
            let u = 1.0 - rng.random::<f64>();
            let hold = (u.ln() / (-out).ln_1p()).floor();
            if hold >= (cap - t) as f64 {
                return (cap, true);
            }
            t += hold as u64;
        }
        if t >= cap {
            return (cap, true);
        }
        t += 1;
        let row = chain.off_diagonal(x);
        let mut v = rng.random::<f64>() * out;
        x = row[row.len() - 1].0;
        for &(y, p) in row {
            if v < p {
                x = y;
                break;
            }
            v -= p;
        }
    }
    (t, false)
}

/// Draws from an exact curve by inverse transform; mass beyond the horizon maps to `horizon + 1`.
pub fn inverse_transform_samples(curve: &SurvivalCurve, count: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            curve.cdf.partition_point(|&f| f < u) as u64
        })
        .collect()
}

/// `sup_t |F_n(t) - F(t)|` between the empirical and exact distribution functions.
///
/// Capped samples count as lying beyond every `t`. Past the curve horizon the
/// exact value is only known to lie in `[F(horizon), 1]`, and the worse end is used.
pub fn ks_distance(samples: &[u64], curve: &SurvivalCurve) -> f64 {
    let n = samples.len();
    if n == 0 {
        return 0.0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let h = curve.horizon as u64;
    let gap = |t: u64, emp: f64| -> f64 {
        if t <= h {
            (emp - curve.cdf_at(t as usize)).abs()
        } else {
            (emp - curve.cdf_at(curve.horizon)).abs().max((1.0 - emp).abs())
        }
    };
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < n {
        let t = sorted[i];
        let below = i as f64 / n as f64;
        if t > 0 {
            worst = worst.max(gap(t - 1, below));
        }
        while i < n && sorted[i] == t {
            i += 1;
        }
        worst = worst.max(gap(t, i as f64 / n as f64));
    }
    worst
}

/// Dvoretzky-Kiefer-Wolfowitz half-width `sqrt(ln(2/alpha) / 2n)` at confidence `1 - alpha`.
pub fn dkw_band(count: usize, confidence: f64) -> f64 {
    let alpha = 1.0 - confidence;
    ((2.0 / alpha).ln() / (2.0 * count as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub count: usize,
    pub capped: usize,
    pub distance: f64,
    pub confidence: f64,
    pub band: f64,
    pub within: bool,
}

pub fn ks_report(set: &SampleSet, curve: &SurvivalCurve, confidence: f64) -> KsReport {
    let distance = ks_distance(&set.samples_for_ks(), curve);
    let band = dkw_band(set.count(), confidence);
    KsReport { count: set.count(), capped: set.capped.len(), distance, confidence, band, within: distance <= band }
}

impl SampleSet {
    /// Samples with capped entries pushed past every finite time.
    fn samples_for_ks(&self) -> Vec<u64> {
        let mut s = self.samples.clone();
        for &i in &self.capped {
            s[i] = u64::MAX;
        }
        s
    }
}
