//! Double-integral energies of discretized measures against Φ^(a) and the
//! Riesz kernel.
//!
//! Φ^(a)(d) = exp{a Σ_n (ℓ_n - d)_+}; Riesz_s(d) = d^{-s}. Distances are circle
//! distances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cantor::{CantorError, CantorMeasure};
use crate::circle::dist;
use crate::classify::{ls_slope, Classification, KahanSum};
use crate::seq::{LengthSequence, PrefixTable, SeqError};

/// Largest atom count accepted by the pairwise sum.
pub const ATOM_BUDGET: usize = 10_000;
/// Slope of ln I_k against k above which a trajectory diverges.
pub const DIVERGE_SLOPE: f64 = 0.05;
/// Slope below which it converges.
pub const CONVERGE_SLOPE: f64 = 0.005;
const ROW_BLOCK: usize = 64;
/// Levels fixed before the pattern walk is split into tasks.
const SPLIT_LEVELS: u32 = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("{0} atoms exceed the pairwise budget")]
    AtomBudget(usize),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Sequence(#[from] SeqError),
    #[error(transparent)]
    Cantor(#[from] CantorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    CantorDepth(u32),
    Uniform(usize),
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomMeasure {
    atoms: Vec<(f64, f64)>,
    provenance: Provenance,
}

impl AtomMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, EnergyError> {
        if atoms.is_empty() {
            return Err(EnergyError::InvalidMeasure("no atoms".into()));
        }
        if let Some(&(x, m)) = atoms.iter().find(|&&(x, m)| !(m > 0.0) || !(0.0..1.0).contains(&x)) {
            return Err(EnergyError::InvalidMeasure(format!("atom ({x}, {m})")));
        }
        let mut xs: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        xs.sort_by(f64::total_cmp);
        if let Some(w) = xs.windows(2).find(|w| w[0] == w[1]) {
            return Err(EnergyError::InvalidMeasure(format!("coincident atoms at {}", w[0])));
        }
        let mut total = KahanSum::new();
        atoms.iter().for_each(|a| total.add(a.1));
        if (total.value() - 1.0).abs() > 1e-12 {
            return Err(EnergyError::InvalidMeasure(format!("total mass {}", total.value())));
        }
        Ok(Self { atoms, provenance: Provenance::Explicit })
    }

    /// One atom of mass 2^{-k} at the midpoint of each level-k interval.
    pub fn from_cantor(m: &CantorMeasure, k: u32) -> Result<Self, EnergyError> {
        let lv = m.level(k)?;
        if lv.len() > ATOM_BUDGET as u64 {
            return Err(EnergyError::AtomBudget(lv.len() as usize));
        }
        let w = 0.5f64.powi(k as i32);
        let atoms = lv.intervals().map(|(_, l, r)| ((l + r) / 2.0, w)).collect();
        Ok(Self { atoms, provenance: Provenance::CantorDepth(k) })
    }

    /// n equal atoms at the cell midpoints (i + 1/2)/n.
    pub fn uniform(n: usize) -> Result<Self, EnergyError> {
        if n == 0 {
            return Err(EnergyError::InvalidMeasure("no atoms".into()));
        }
        let atoms = (0..n).map(|i| ((i as f64 + 0.5) / n as f64, 1.0 / n as f64)).collect();
        Ok(Self { atoms, provenance: Provenance::Uniform(n) })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Smallest circle distance between distinct atoms.
    pub fn min_distance(&self) -> f64 {
        let mut xs: Vec<f64> = self.atoms.iter().map(|a| a.0).collect();
        xs.sort_by(f64::total_cmp);
        if xs.len() < 2 {
            return 0.5;
        }
        // Same formula as the pair loop, so no pair falls below the result.
        xs.windows(2).map(|w| dist(w[0], w[1])).fold(dist(xs[xs.len() - 1], xs[0]), f64::min)
    }
}

/// Φ^(a)(d) = exp{a Σ (ℓ_n - d)_+}.
pub fn phi_a(seq: &LengthSequence, a: f64, d: f64) -> Result<f64, EnergyError> {
    if !(a >= 0.0) {
        return Err(EnergyError::InvalidParameter(format!("a = {a}")));
    }
    if !(0.0..=0.5).contains(&d) {
        return Err(EnergyError::InvalidParameter(format!("d = {d}")));
    }
    if a == 0.0 {
        return Ok(1.0);
    }
    Ok((a * seq.positive_part_sum(d)?).exp())
}

#[derive(Debug, Clone)]
pub enum Kernel {
    PhiA { seq: LengthSequence, a: f64 },
    Riesz { s: f64 },
}

impl Kernel {
    /// Evaluator valid for distances ≥ `r_min`.
    pub fn evaluator(&self, r_min: f64) -> Result<Evaluator, EnergyError> {
        if !(r_min > 0.0) {
            return Err(EnergyError::InvalidParameter(format!("r_min = {r_min}")));
        }
        Ok(match self {
            Kernel::PhiA { seq, a } => {
                if !(*a >= 0.0) {
                    return Err(EnergyError::InvalidParameter(format!("a = {a}")));
                }
                Evaluator::PhiA { table: seq.table(r_min)?, a: *a }
            }
            Kernel::Riesz { s } => {
                if !(*s > 0.0) {
                    return Err(EnergyError::InvalidParameter(format!("s = {s}")));
                }
                Evaluator::Riesz { s: *s }
            }
        })
    }
}

pub enum Evaluator {
    PhiA { table: PrefixTable, a: f64 },
    Riesz { s: f64 },
}

impl Evaluator {
    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        match self {
            Evaluator::PhiA { table, a } => (a * table.positive_part_sum(d)).exp(),
            Evaluator::Riesz { s } => d.powf(-s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagPolicy {
    Exclude,
    /// Same-atom pairs count κ(δ) Σ m_i².
    Lump(f64),
}

/// Σ_{i≠j} m_i m_j κ(|x_i - x_j|) plus the diagonal term of `policy`.
pub fn energy(mu: &AtomMeasure, kernel: &Kernel, policy: DiagPolicy) -> Result<f64, EnergyError> {
    let n = mu.len();
    if n > ATOM_BUDGET {
        return Err(EnergyError::AtomBudget(n));
    }
    let mut r_min = if n > 1 { mu.min_distance() } else { 0.5 };
    if let DiagPolicy::Lump(d) = policy {
        r_min = r_min.min(d);
    }
    let ev = kernel.evaluator(r_min * (1.0 - 1e-12))?;
    let atoms = mu.atoms();
    let blocks: Vec<f64> = (0..n.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = KahanSum::new();
            for i in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n) {
                let (xi, mi) = atoms[i];
                for &(xj, mj) in &atoms[i + 1..] {
                    acc.add(mi * mj * ev.eval(dist(xi, xj)));
                }
            }
            acc.value()
        })
        .collect();
    let mut total = KahanSum::new();
    blocks.iter().for_each(|&b| total.add(2.0 * b));
    if let DiagPolicy::Lump(d) = policy {
        let sq: f64 = atoms.iter().map(|a| a.1 * a.1).sum();
        total.add(ev.eval(d) * sq);
    }
    Ok(total.value())
}

/// Supports with a depth-indexed discretization.
#[derive(Debug, Clone, Copy)]
pub enum Support<'a> {
    /// σ0 with one atom per level-k interval.
    Cantor(&'a CantorMeasure),
    /// Lebesgue measure with 2^k equal atoms.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub depth: u32,
    pub atoms: u64,
    pub exclude: f64,
    pub lump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrajectory {
    pub rows: Vec<EnergyRow>,
    /// LS slope of ln I_k against k over the last three depths.
    pub slope_exclude: f64,
    pub slope_lump: f64,
    pub exclude: Classification,
    pub lump: Classification,
}

impl EnergyTrajectory {
    /// The shared label when both policies agree, otherwise inconclusive.
    pub fn classification(&self) -> Classification {
        if self.exclude == self.lump {
            self.exclude
        } else {
            Classification::Inconclusive
        }
    }
}

/// Discretized energies at each depth, exclusive and lumped.
///
/// Cantor depths are summed exactly over difference patterns: two level-k
/// atoms differ by Σ_l p_l (δ_{l-1} - δ_l) with p ∈ {-1, 0, 1}^k, and each
/// pattern occurs 2^{#zeros} times. The cost is O(3^k) instead of O(4^k).
pub fn energy_trajectory(support: Support<'_>, kernel: &Kernel, depths: &[u32]) -> Result<EnergyTrajectory, EnergyError> {
    if depths.len() < 3 || depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EnergyError::InvalidParameter("need at least three increasing depths".into()));
    }
    let mut rows = Vec::with_capacity(depths.len());
    for &k in depths {
        let (atoms, exclude, cell, ev) = match support {
            Support::Cantor(m) => {
                if k > m.depth() || k == 0 {
                    return Err(CantorError::DepthExceeded(k).into());
                }
                let dk = m.delta(k)?;
                let shift = m.delta(k - 1)? - dk;
                let ev = kernel.evaluator(dk.min(shift) * (1.0 - 1e-9))?;
                (1u64 << k, cantor_pair_sum(m, k, &ev), dk, ev)
            }
            Support::Uniform => {
                if k > 26 {
                    return Err(EnergyError::AtomBudget(1 << k));
                }
                let n = 1u64 << k;
                let h = 1.0 / n as f64;
                let ev = kernel.evaluator(h * (1.0 - 1e-9))?;
                let mut acc = KahanSum::new();
                for d in 1..n {
                    acc.add(ev.eval(dist(0.0, d as f64 * h)));
                }
                (n, acc.value() * h, h, ev)
            }
        };
        let lump = exclude + ev.eval(cell) / atoms as f64;
        rows.push(EnergyRow { depth: k, atoms, exclude, lump });
    }
    let tail = &rows[rows.len() - 3..];
    let ks: Vec<f64> = tail.iter().map(|r| r.depth as f64).collect();
    let slope = |f: fn(&EnergyRow) -> f64| ls_slope(&ks, &tail.iter().map(|r| f(r).ln()).collect::<Vec<_>>());
    let slope_exclude = slope(|r| r.exclude);
    let slope_lump = slope(|r| r.lump);
    Ok(EnergyTrajectory {
        rows,
        slope_exclude,
        slope_lump,
        exclude: Classification::from_slope(slope_exclude, DIVERGE_SLOPE, CONVERGE_SLOPE),
        lump: Classification::from_slope(slope_lump, DIVERGE_SLOPE, CONVERGE_SLOPE),
    })
}

/// 4^{-k} Σ_{i≠j} κ(|x_i - x_j|) over the level-k atoms of `m`.
fn cantor_pair_sum(m: &CantorMeasure, k: u32, ev: &Evaluator) -> f64 {
    let shifts: Vec<f64> = (1..=k as usize).map(|l| m.deltas()[l - 1] - m.deltas()[l]).collect();
    let split = k.min(SPLIT_LEVELS) as usize;
    // Prefixes over the first `split` levels; the first nonzero entry is +1
    // and the mirrored pattern is counted by the factor 2.
    let mut prefixes: Vec<(f64, u32, bool)> = vec![(0.0, 0, false)];
    for &s in &shifts[..split] {
        let mut next = Vec::with_capacity(prefixes.len() * 3);
        for &(d, z, nz) in &prefixes {
            next.push((d, z + 1, nz));
            next.push((d + s, z, true));
            if nz {
                next.push((d - s, z, true));
            }
        }
        prefixes = next;
    }
    let rest = &shifts[split..];
    let parts: Vec<f64> = prefixes
        .par_iter()
        .map(|&(d, z, nz)| {
            let mut acc = KahanSum::new();
            walk(rest, d, z, nz, ev, &mut acc);
            acc.value()
        })
        .collect();
    let mut total = KahanSum::new();
    parts.iter().for_each(|&p| total.add(p));
    2.0 * total.value() * 0.25f64.powi(k as i32)
}

fn walk(rest: &[f64], d: f64, zeros: u32, nonzero: bool, ev: &Evaluator, acc: &mut KahanSum) {
    match rest.split_first() {
        None => {
            if nonzero {
                let x = d.abs();
                acc.add((zeros as f64).exp2() * ev.eval(x.min(1.0 - x)));
            }
        }
        Some((&s, tail)) => {
            walk(tail, d, zeros + 1, nonzero, ev, acc);
            walk(tail, d + s, zeros, true, ev, acc);
            if nonzero {
                walk(tail, d - s, zeros, true, ev, acc);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusTerm {
    pub n: u64,
    /// σ of A_t(n) = {s : ℓ_{n+1} < |t - s| ≤ ℓ_n}.
    pub mass: f64,
    /// Φ^(a) at the inner radius ℓ_{n+1}, the largest value on the annulus.
    pub kernel: f64,
    pub term: f64,
}

/// Annulus decomposition of ∫ Φ^(a)(|t - s|) dσ0(s) for n0 ≤ n ≤ nMax.
pub fn annuli_partial_sums(
    m: &CantorMeasure,
    seq: &LengthSequence,
    a: f64,
    t: f64,
    n_max: u64,
) -> Result<Vec<AnnulusTerm>, EnergyError> {
    let n0 = seq.first();
    if n_max < n0 {
        return Err(EnergyError::InvalidParameter(format!("nMax = {n_max}")));
    }
    let inner = seq.term(n_max + 1).ok_or_else(|| EnergyError::InvalidParameter(format!("nMax = {n_max}")))?;
    let ev = Kernel::PhiA { seq: seq.clone(), a }.evaluator(inner)?;
    let mut out = Vec::with_capacity((n_max - n0 + 1) as usize);
    let mut outer_ball = m.natural_measure(t, seq.term(n0).unwrap().min(0.5));
    for (n, _) in seq.terms(n0, n_max) {
        let lo = seq.term(n + 1).unwrap();
        let inner_ball = m.natural_measure(t, lo.min(0.5));
        let mass = (outer_ball - inner_ball).max(0.0);
        let kernel = ev.eval(lo.min(0.5));
        out.push(AnnulusTerm { n, mass, kernel, term: mass * kernel });
        outer_ball = inner_ball;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomAnnuli {
    /// Exact Σ m_s Φ(|t - s|) over atoms with ℓ_{n+1} < |t - s| ≤ ℓ_n.
    pub terms: Vec<(u64, f64)>,
    /// Atoms farther than ℓ_{n0}, where Φ = 1.
    pub outer: f64,
    /// Atoms with 0 < |t - s| ≤ ℓ_{nMax+1}.
    pub inner: f64,
}

impl AtomAnnuli {
    pub fn total(&self) -> f64 {
        self.outer + self.inner + self.terms.iter().map(|t| t.1).sum::<f64>()
    }
}

/// Exact annulus split of Σ_{s ≠ t} m_s Φ^(a)(|t - s|) for an atom measure.
pub fn atom_annuli(mu: &AtomMeasure, seq: &LengthSequence, a: f64, t: f64, n_max: u64) -> Result<AtomAnnuli, EnergyError> {
    let n0 = seq.first();
    let inner_r = seq.term(n_max + 1).ok_or_else(|| EnergyError::InvalidParameter(format!("nMax = {n_max}")))?;
    let r_min = mu.atoms().iter().map(|&(x, _)| dist(x, t)).filter(|&d| d > 0.0).fold(inner_r, f64::min);
    let ev = Kernel::PhiA { seq: seq.clone(), a }.evaluator(r_min * (1.0 - 1e-12))?;
    let top = seq.term(n0).unwrap();
    let mut terms: Vec<(u64, f64)> = (n0..=n_max).map(|n| (n, 0.0)).collect();
    let (mut outer, mut inner) = (0.0, 0.0);
    for &(x, w) in mu.atoms() {
        let d = dist(x, t);
        if d == 0.0 {
            continue;
        }
        let v = w * ev.eval(d);
        if d > top {
            outer += v;
        } else if d <= inner_r {
            inner += v;
        } else {
            // Largest n with ℓ_n ≥ d.
            let n = match seq.last_above(d) {
                Some(n) if seq.term(n + 1).is_some_and(|l| l >= d) => n + 1,
                Some(n) => n,
                None => n0,
            };
            terms[(n - n0) as usize].1 += v;
        }
    }
    Ok(AtomAnnuli { terms, outer, inner })
}
