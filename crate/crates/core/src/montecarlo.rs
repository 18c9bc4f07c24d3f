//! Simulation of the random covering process.
//!
//! Arc I_n = [ω_n - ℓ_n/2, ω_n + ℓ_n/2) for n0 ≤ n ≤ N. The center ω_n is the
//! inverse CDF of the n-th 64-bit word of a ChaCha8 stream seeded by the
//! trial seed, so it does not depend on N or on the length sequence.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::arcset::ArcSet;
use crate::cantor::{CantorError, CantorMeasure, CantorSpec};
use crate::circle::split_arc;
use crate::density::StepDensity;
use crate::seq::{LengthSequence, SeqError};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sequence(#[from] SeqError),
    #[error(transparent)]
    Cantor(#[from] CantorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    /// Points i/resolution.
    Grid { resolution: usize },
    /// Endpoints of the level-k intervals.
    CantorLevel { spec: CantorSpec, k: u32 },
    Points(Vec<f64>),
}

impl Target {
    /// Sorted distinct points in [0, 1).
    pub fn points(&self) -> Result<Vec<f64>, MonteCarloError> {
        let mut pts = match self {
            Target::Grid { resolution } => {
                if *resolution < 2 {
                    return Err(MonteCarloError::InvalidConfig(format!("resolution {resolution}")));
                }
                (0..*resolution).map(|i| i as f64 / *resolution as f64).collect()
            }
            Target::CantorLevel { spec, k } => {
                let m = CantorMeasure::new(spec.clone())?;
                let lv = m.level(*k)?;
                if lv.len() > 1 << 24 {
                    return Err(MonteCarloError::InvalidConfig(format!("level {k} is too large")));
                }
                lv.intervals().flat_map(|(_, l, r)| [l, crate::circle::wrap(r)]).collect()
            }
            Target::Points(p) => {
                if p.is_empty() || p.iter().any(|x| !(0.0..1.0).contains(x)) {
                    return Err(MonteCarloError::InvalidConfig("points must be nonempty and lie in [0, 1)".into()));
                }
                p.clone()
            }
        };
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Ok(pts)
    }
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub density: StepDensity,
    pub seq: LengthSequence,
    /// Index horizon N.
    pub n: u64,
    pub seed: u64,
    pub target: Target,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), MonteCarloError> {
        if self.n < 1 || self.n < self.seq.first() {
            return Err(MonteCarloError::InvalidConfig(format!("N = {} precedes n0 = {}", self.n, self.seq.first())));
        }
        self.target.points().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub seed: u64,
    pub n: u64,
    pub covered: bool,
    pub first_cover_time: Option<u64>,
    pub uncovered_length: f64,
    pub uncovered_count: usize,
}

/// Uniform in [0, 1) from the top 53 bits.
#[inline]
fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// ω_n for a trial seed, by random access into the stream.
pub fn center(density: &StepDensity, seed: u64, n: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(2 * (n as u128 - 1));
    density.sample_center(unit(rng.next_u64()))
}

/// Stream of centers ω_n, ω_{n+1}, ...
struct Centers<'a> {
    density: &'a StepDensity,
    rng: ChaCha8Rng,
}

impl<'a> Centers<'a> {
    fn new(density: &'a StepDensity, seed: u64, from: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(2 * (from as u128 - 1));
        Self { density, rng }
    }

    #[inline]
    fn next(&mut self) -> f64 {
        self.density.sample_center(unit(self.rng.next_u64()))
    }
}

/// Uncovered target points with path-compressed skip pointers.
struct TargetTracker {
    points: Vec<f64>,
    next: Vec<u32>,
    remaining: usize,
}

impl TargetTracker {
    fn new(points: Vec<f64>) -> Self {
        let n = points.len();
        Self { points, next: (0..=n as u32).collect(), remaining: n }
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.next[root] as usize != root {
            root = self.next[root] as usize;
        }
        let mut j = i;
        while self.next[j] as usize != root {
            let up = self.next[j] as usize;
            self.next[j] = root as u32;
            j = up;
        }
        root
    }

    /// Mark the points of the lifted arc [a, b).
    fn cover(&mut self, a: f64, b: f64) {
        let (parts, k) = split_arc(a, b);
        for &(pa, pb) in &parts[..k] {
            let mut j = self.find(self.points.partition_point(|&x| x < pa));
            while j < self.points.len() && self.points[j] < pb {
                self.next[j] = j as u32 + 1;
                self.remaining -= 1;
                j = self.find(j + 1);
            }
        }
    }
}

/// Simulate one trial and report coverage at N.
pub fn run_trial(cfg: &TrialConfig) -> Result<CoverageStats, MonteCarloError> {
    cfg.validate()?;
    let mut target = TargetTracker::new(cfg.target.points()?);
    let mut uncovered = ArcSet::full();
    let n0 = cfg.seq.first();
    let mut centers = Centers::new(&cfg.density, cfg.seed, n0);
    let mut first = None;
    for (n, l) in cfg.seq.terms(n0, cfg.n) {
        let w = centers.next();
        let (a, b) = (w - l / 2.0, w + l / 2.0);
        uncovered.subtract(a, b);
        if first.is_none() {
            target.cover(a, b);
            if target.remaining == 0 {
                first = Some(n);
            }
        }
    }
    Ok(CoverageStats {
        seed: cfg.seed,
        n: cfg.n,
        covered: first.is_some(),
        first_cover_time: first,
        uncovered_length: uncovered.length(),
        uncovered_count: uncovered.arc_count(),
    })
}

/// First N' ≤ N with the target inside U_N', without tracking the uncovered set.
fn first_cover_time(cfg: &TrialConfig, points: &[f64]) -> Option<u64> {
    let mut target = TargetTracker::new(points.to_vec());
    let n0 = cfg.seq.first();
    let mut centers = Centers::new(&cfg.density, cfg.seed, n0);
    for (n, l) in cfg.seq.terms(n0, cfg.n) {
        let w = centers.next();
        target.cover(w - l / 2.0, w + l / 2.0);
        if target.remaining == 0 {
            return Some(n);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binomial {
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    /// Wilson half-width divided by z.
    pub stderr: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl Binomial {
    pub fn new(hits: u64, trials: u64) -> Self {
        assert!(trials > 0 && hits <= trials);
        let n = trials as f64;
        let p = hits as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let mid = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Self {
            trials,
            hits,
            p_hat: p,
            stderr: half / Z95,
            wilson_low: (mid - half).max(0.0),
            wilson_high: (mid + half).min(1.0),
        }
    }
}

/// Pr(target ⊄ U_N) over trials with seeds seed, seed + 1, ...
pub fn estimate_noncover(template: &TrialConfig, trials: u64) -> Result<Binomial, MonteCarloError> {
    if trials == 0 {
        return Err(MonteCarloError::InvalidConfig("trials must be ≥ 1".into()));
    }
    template.validate()?;
    let points = template.target.points()?;
    let misses: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let cfg = TrialConfig { seed: template.seed.wrapping_add(i), ..template.clone() };
            u64::from(first_cover_time(&cfg, &points).is_none())
        })
        .sum();
    Ok(Binomial::new(misses, trials))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub c: f64,
    pub covered: u64,
    pub trials: u64,
    pub fraction: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScan {
    pub rows: Vec<PhaseRow>,
    /// First c where the covered fraction reaches 1/2, interpolated linearly.
    pub crossing: Option<f64>,
}

/// Covered fraction at N for each c. Every c reuses the same trial seeds.
pub fn phase_scan(
    density: &StepDensity,
    family: impl Fn(f64) -> Result<LengthSequence, SeqError>,
    cs: &[f64],
    n: u64,
    trials: u64,
    target: &Target,
    seed: u64,
) -> Result<PhaseScan, MonteCarloError> {
    if trials == 0 || cs.is_empty() || cs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MonteCarloError::InvalidConfig("need trials ≥ 1 and increasing c values".into()));
    }
    let points = target.points()?;
    let mut rows = Vec::with_capacity(cs.len());
    for &c in cs {
        let seq = family(c)?;
        let template = TrialConfig { density: density.clone(), seq, n, seed, target: target.clone() };
        template.validate()?;
        let covered: u64 = (0..trials)
            .into_par_iter()
            .map(|i| {
                let cfg = TrialConfig { seed: seed.wrapping_add(i), ..template.clone() };
                u64::from(first_cover_time(&cfg, &points).is_some())
            })
            .sum();
        let b = Binomial::new(covered, trials);
        rows.push(PhaseRow { c, covered, trials, fraction: b.p_hat, stderr: b.stderr });
    }
    Ok(PhaseScan { crossing: crossing(&rows), rows })
}

fn crossing(rows: &[PhaseRow]) -> Option<f64> {
    if rows.first()?.fraction >= 0.5 {
        return Some(rows[0].c);
    }
    rows.windows(2).find(|w| w[1].fraction >= 0.5).map(|w| {
        let (a, b) = (w[0], w[1]);
        a.c + (0.5 - a.fraction) / (b.fraction - a.fraction) * (b.c - a.c)
    })
}
