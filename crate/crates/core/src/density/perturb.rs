//! Small-measure perturbation of a density whose infimum set is a finite set of marked points.
//!
//! On a union U of small arcs around the marks the density is replaced by a
//! function g that equals γ except on small exclusion balls, and the mass
//! this adds is removed from a donor arc B where f is large.

use serde::{Deserialize, Serialize};

use super::{DensityError, Layer, LayerOp, StepDensity, StepFunction, NORMALIZATION_TOL};
use crate::arcset::ArcSet;
use crate::circle::dist;
use crate::seq::{BlockSchedule, LengthSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub eps_budget: f64,
    pub k_max: u32,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    /// Largest index scanned when searching for blocks.
    #[serde(default = "default_index_budget")]
    pub index_budget: u64,
    /// Horizon of the Hawkes check.
    #[serde(default = "default_hawkes_horizon")]
    pub hawkes_horizon: u64,
}

fn default_zeta() -> f64 {
    0.5
}

fn default_index_budget() -> u64 {
    200_000_000
}

fn default_hawkes_horizon() -> u64 {
    10_000_000
}

impl PerturbConfig {
    pub fn new(eps_budget: f64, k_max: u32) -> Self {
        Self {
            eps_budget,
            k_max,
            zeta: default_zeta(),
            index_budget: default_index_budget(),
            hawkes_horizon: default_hawkes_horizon(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCertificate {
    pub k: u32,
    /// Distance from the exclusion points to the marks, halved as needed.
    pub delta: f64,
    pub eta: f64,
    /// Cover radius, a power of two in [ℓ_{n2}/4, ℓ_{n2}/2).
    pub eps: f64,
    pub n1: u64,
    pub n2: u64,
    pub ratio: f64,
    pub cover: Vec<Ball>,
    pub exclusion: Vec<Ball>,
    pub exclusion_value: f64,
    /// min over the block and the cover of ∫_I f0 / |I|.
    pub item3_min_ratio: f64,
    /// Exponent of the block bound with ε = 1/(2 n2) and the actual ball count.
    pub a2_exponent: f64,
    /// Same exponent with ln M replaced by ln(2 n2).
    pub a2_exponent_dim_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCertificate {
    pub f0: StepDensity,
    pub m_f: f64,
    pub marks: Vec<f64>,
    pub eps_budget: f64,
    pub k_max: u32,
    pub zeta: f64,
    pub gamma: f64,
    /// Mass added on U and removed from B.
    pub c: f64,
    /// Donor arc as (start, length).
    pub donor: (f64, f64),
    pub donor_value: f64,
    pub u_radius: f64,
    pub u_measure: f64,
    pub changed_mass: f64,
    pub blocks: BlockSchedule,
    pub levels: Vec<LevelCertificate>,
    pub hawkes_lower: f64,
    pub hawkes_horizon: u64,
    /// Set when the Hawkes estimate falls below 1/m_f at the horizon.
    pub md_warning: bool,
}

impl PerturbationCertificate {
    /// Cover balls of level k as (center, ε_k).
    pub fn cover(&self, k: u32) -> Vec<(f64, f64)> {
        self.levels
            .iter()
            .find(|l| l.k == k)
            .map(|l| l.cover.iter().map(|b| (b.center, b.radius)).collect())
            .unwrap_or_default()
    }

    /// Check every invariant against the source density. Returns the failed checks.
    pub fn validate(&self, f: &StepDensity, seq: &LengthSequence) -> Vec<String> {
        let mut bad = Vec::new();
        let m0 = self.f0.function().values().iter().copied().fold(f64::INFINITY, f64::min);
        if m0 != self.m_f || f.essinf_report().m_f != self.m_f {
            bad.push(format!("m_f0 = {m0}, m_f = {}", self.m_f));
        }
        if self.f0.marks() != f.marks() {
            bad.push("marked points differ".into());
        }
        let total = self.f0.function().total();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            bad.push(format!("∫f0 = {total}"));
        }
        let changed = changed_measure(f.function(), self.f0.function());
        if (changed - self.changed_mass).abs() > 1e-12 || changed > self.eps_budget {
            bad.push(format!("changed mass {changed} vs budget {}", self.eps_budget));
        }
        for (i, b) in self.blocks.blocks.iter().enumerate() {
            if !(b.ratio < 0.5f64.powi(b.k as i32)) {
                bad.push(format!("block {} ratio {}", b.k, b.ratio));
            }
            if !(seq.term(b.n2).unwrap_or(0.0) > 0.5 / b.n2 as f64) {
                bad.push(format!("block {} end not in Lambda", b.k));
            }
            if i > 0 && self.blocks.blocks[i - 1].n2 >= b.n1 {
                bad.push(format!("block {} overlaps", b.k));
            }
        }
        for (i, lv) in self.levels.iter().enumerate() {
            let l2 = seq.term(lv.n2).unwrap_or(0.0);
            if !(lv.eps >= l2 / 4.0 && lv.eps < l2 / 2.0 && (-lv.eps.log2()).fract() == 0.0) {
                bad.push(format!("level {} eps {}", lv.k, lv.eps));
            }
            if !(lv.eta > 0.0 && lv.eta <= lv.delta / 4.0) {
                bad.push(format!("level {} eta {}", lv.k, lv.eta));
            }
            let w = l2 - 2.0 * lv.eps;
            let later: f64 =
                self.levels[i + 1..].iter().map(|m| 2.0 * m.eta * m.exclusion.len() as f64).sum();
            if !(later < self.zeta * w) {
                bad.push(format!("level {} exclusion mass {later} vs {}", lv.k, self.zeta * w));
            }
            if lv.item3_min_ratio < 1.0 - 1e-12 || lv.item3_min_ratio < (1.0 - self.zeta) * self.gamma - 1e-12 {
                bad.push(format!("level {} item 3 ratio {}", lv.k, lv.item3_min_ratio));
            }
            for &a in &self.marks {
                if !lv.cover.iter().any(|b| dist(a, b.center) <= b.radius / 2.0) {
                    bad.push(format!("level {} does not cover {a}", lv.k));
                }
            }
        }
        bad
    }
}

/// |{x : f(x) ≠ g(x)}|.
pub(crate) fn changed_measure(f: &StepFunction, g: &StepFunction) -> f64 {
    let mut cuts: Vec<f64> = f.starts().iter().chain(g.starts()).copied().collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut total = 0.0;
    for (i, &s) in cuts.iter().enumerate() {
        let e = if i + 1 < cuts.len() { cuts[i + 1] } else { 1.0 };
        let mid = 0.5 * (s + e);
        if f.value_at(mid) != g.value_at(mid) {
            total += e - s;
        }
    }
    total
}

/// Exclusion point of a dyadic cell: the midpoint unless it is a mark, else the
/// candidate farthest from the marks.
fn exclusion_point(lo: f64, hi: f64, marks: &[f64]) -> f64 {
    let mid = 0.5 * (lo + hi);
    let d = |x: f64| marks.iter().map(|&a| dist(x, a)).fold(f64::INFINITY, f64::min);
    if d(mid) > 0.0 {
        return mid;
    }
    let mut inside: Vec<f64> = marks.iter().copied().filter(|&a| lo <= a && a < hi).collect();
    inside.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut candidates = vec![lo, 0.5 * (lo + inside[0]), 0.5 * (inside[inside.len() - 1] + hi)];
    for w in inside.windows(2) {
        candidates.push(0.5 * (w[0] + w[1]));
    }
    candidates.into_iter().filter(|&x| x < hi).max_by(|x, y| d(*x).partial_cmp(&d(*y)).unwrap()).unwrap()
}

fn dyadic_cells(marks: &[f64], level: u32) -> Vec<u64> {
    let scale = (level as f64).exp2();
    let mut cells: Vec<u64> = marks.iter().map(|&a| (a * scale).floor() as u64).collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

fn arcs_of(set: &ArcSet) -> Vec<(f64, f64)> {
    set.pieces().collect()
}

pub fn perturb(
    f: &StepDensity,
    seq: &LengthSequence,
    cfg: &PerturbConfig,
) -> Result<PerturbationCertificate, DensityError> {
    let eps = cfg.eps_budget;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(DensityError::BudgetExceeded(format!("eps_budget = {eps}")));
    }
    if !(cfg.zeta > 0.0 && cfg.zeta < 1.0) || cfg.k_max == 0 {
        return Err(DensityError::BudgetExceeded("zeta must lie in (0, 1) and k_max ≥ 1".into()));
    }
    let report = f.essinf_report();
    let marks = f.marks().to_vec();
    if marks.is_empty() {
        return Err(DensityError::PositiveMeasureK);
    }
    let m_f = report.m_f;

    let hawkes_horizon = cfg.hawkes_horizon.min(cfg.index_budget).max(3);
    let hawkes_lower = seq.hawkes_d(hawkes_horizon)?.running_max;
    let md_warning = hawkes_lower < 1.0 / m_f;
    if md_warning {
        log::warn!("Hawkes estimate {hawkes_lower:.4} at N = {hawkes_horizon} is below 1/m_f = {:.4}", 1.0 / m_f);
    }

    // Donor piece and the resulting limit on |U|.
    let (ds, de, vb) = f
        .function()
        .pieces()
        .max_by(|x, y| x.2.partial_cmp(&y.2).unwrap().then((x.1 - x.0).partial_cmp(&(y.1 - y.0)).unwrap()))
        .unwrap();
    if vb < 1.0 || vb <= m_f {
        return Err(DensityError::NoDonor);
    }
    let b_len = 0.45 * eps;
    let gamma_up = 1.0 / (1.0 - cfg.zeta / 2.0);
    let u_max = (0.5 * eps).min(0.9 * b_len * (vb - m_f) / (gamma_up - m_f));

    // Exclusion points and δ_k.
    let k_max = cfg.k_max;
    let mut ys: Vec<Vec<f64>> = Vec::new();
    let mut deltas: Vec<f64> = Vec::new();
    for k in 1..=k_max {
        let size = (-(k as f64)).exp2();
        let y: Vec<f64> = dyadic_cells(&marks, k)
            .into_iter()
            .map(|c| exclusion_point(c as f64 * size, (c + 1) as f64 * size, &marks))
            .collect();
        let raw = y
            .iter()
            .flat_map(|&p| marks.iter().map(move |&a| dist(p, a)))
            .fold(f64::INFINITY, f64::min);
        let delta = match deltas.last() {
            Some(&prev) => raw.min(prev / 2.0),
            None => raw,
        };
        ys.push(y);
        deltas.push(delta);
    }

    // Start gaps: ℓ_{n1_k} ≤ δ_k/4, and ℓ_{n1_1} small enough for the U budget.
    let gaps: Vec<u64> = (0..k_max as usize)
        .map(|i| {
            let mut t = deltas[i] / 4.0;
            if i == 0 {
                t = t.min(u_max / marks.len() as f64);
            }
            seq.last_above(t).map_or(seq.first(), |n| n + 1)
        })
        .collect();
    let blocks = seq.find_blocks(k_max, &gaps, cfg.index_budget)?;

    let l_n1 = seq.term(blocks.blocks[0].n1).expect("block start is a term");
    let u_radius = l_n1 / 2.0;
    let u_set = ArcSet::from_arcs(&marks.iter().map(|&a| (a - u_radius, a + u_radius)).collect::<Vec<_>>());
    let u_measure = u_set.length();
    let u_arcs = arcs_of(&u_set);
    let outside_u = arcs_of(&u_set.complement());

    // Per-level covers, η_k and exclusion balls.
    let mut eps_k = Vec::new();
    let mut widths = Vec::new();
    let mut etas: Vec<f64> = Vec::new();
    let mut covers: Vec<Vec<Ball>> = Vec::new();
    for (i, b) in blocks.blocks.iter().enumerate() {
        let l2 = seq.term(b.n2).expect("block end is a term");
        let m = (-(l2 / 2.0).log2()).floor() as i32 + 1;
        let e = (-(m as f64)).exp2();
        let cover: Vec<Ball> = dyadic_cells(&marks, m as u32)
            .into_iter()
            .map(|c| Ball { center: (c as f64 + 0.5) * e, radius: e })
            .collect();
        let count = ys[i].len() as f64;
        let mut eta = deltas[i] / 4.0;
        for (j, &w) in widths.iter().enumerate() {
            let shift = (i - j) as i32;
            eta = eta.min(cfg.zeta * w * 0.5f64.powi(shift) / (4.0 * count));
        }
        eps_k.push(e);
        widths.push(l2 - 2.0 * e);
        etas.push(eta);
        covers.push(cover);
    }

    // Exclusion balls restricted to U, with level k overriding lower levels.
    let dip_layers: Vec<(Vec<(f64, f64)>, f64)> = (0..k_max as usize)
        .map(|i| {
            let balls: Vec<(f64, f64)> = ys[i].iter().map(|&y| (y - etas[i], y + etas[i])).collect();
            let inside = ArcSet::from_arcs(&balls).intersection(&u_set);
            (arcs_of(&inside), m_f + 1.0 / (i + 1) as f64)
        })
        .collect();

    // γ: smallest value with ∫_I g ≥ |I| on every block interval.
    let zero = StepFunction::constant(0.0);
    let mut p_layers = vec![Layer { arcs: u_arcs.clone(), op: LayerOp::Set(1.0) }];
    let mut q_layers = Vec::new();
    for (arcs, rho) in &dip_layers {
        p_layers.push(Layer { arcs: arcs.clone(), op: LayerOp::Set(0.0) });
        q_layers.push(Layer { arcs: arcs.clone(), op: LayerOp::Set(*rho) });
    }
    let p = zero.overlay(&p_layers);
    let q = zero.overlay(&q_layers);
    let mut gamma: f64 = 1.0;
    for (i, b) in blocks.blocks.iter().enumerate() {
        for ball in &covers[i] {
            for (_, l) in seq.terms(b.n1, b.n2) {
                let r = l / 2.0 - eps_k[i];
                let (lo, hi) = (ball.center - r, ball.center + r);
                let pi = p.integral(lo, hi);
                let need = (2.0 * r - q.integral(lo, hi)) / pi;
                gamma = gamma.max(need);
            }
        }
    }
    gamma *= 1.0 + 4.0 * f64::EPSILON;

    let mut layers = vec![Layer { arcs: u_arcs.clone(), op: LayerOp::Set(gamma) }];
    for (arcs, rho) in &dip_layers {
        layers.push(Layer { arcs: arcs.clone(), op: LayerOp::Set(*rho) });
    }
    let g = f.function().overlay(&layers);
    let c = g.total() - f.function().total();

    // Donor arc: the longest part of the donor piece outside U.
    let piece = ArcSet::from_arcs(&[(ds, de)]);
    let free = piece.intersection(&ArcSet::from_arcs(&outside_u));
    let (fs, fe) = free
        .pieces()
        .max_by(|x, y| (x.1 - x.0).partial_cmp(&(y.1 - y.0)).unwrap())
        .ok_or(DensityError::NoDonor)?;
    if fe - fs < b_len {
        return Err(DensityError::NoDonor);
    }
    let b_start = 0.5 * (fs + fe) - 0.5 * b_len;
    let donor_value = vb - c / b_len;
    if !(donor_value > m_f) {
        return Err(DensityError::BudgetExceeded(format!("donor value {donor_value} is not above m_f")));
    }
    let f0_fn = g.overlay(&[Layer::from_lifted(&[(b_start, b_start + b_len)], LayerOp::Add(-c / b_len))]);
    let f0 = StepDensity::from_function(f0_fn, marks.clone())?;
    let changed_mass = changed_measure(f.function(), f0.function());
    if changed_mass > eps {
        return Err(DensityError::BudgetExceeded(format!("changed mass {changed_mass} exceeds {eps}")));
    }

    let mut levels = Vec::with_capacity(k_max as usize);
    for (i, b) in blocks.blocks.iter().enumerate() {
        let mut min_ratio = f64::INFINITY;
        for ball in &covers[i] {
            for (_, l) in seq.terms(b.n1, b.n2) {
                let r = l / 2.0 - eps_k[i];
                let v = f0.interval_measure(ball.center - r, ball.center + r) / (2.0 * r);
                min_ratio = min_ratio.min(v);
            }
        }
        let big_l = seq.partial_sum(b.n2);
        let head = -big_l / (1.0 + 0.5f64.powi(b.k as i32)) + 1.0;
        levels.push(LevelCertificate {
            k: b.k,
            delta: deltas[i],
            eta: etas[i],
            eps: eps_k[i],
            n1: b.n1,
            n2: b.n2,
            ratio: b.ratio,
            cover: covers[i].clone(),
            exclusion: ys[i].iter().map(|&y| Ball { center: y, radius: etas[i] }).collect(),
            exclusion_value: m_f + 1.0 / b.k as f64,
            item3_min_ratio: min_ratio,
            a2_exponent: head + (covers[i].len() as f64).ln(),
            a2_exponent_dim_bound: head + (2.0 * b.n2 as f64).ln(),
        });
    }

    Ok(PerturbationCertificate {
        f0,
        m_f,
        marks,
        eps_budget: eps,
        k_max,
        zeta: cfg.zeta,
        gamma,
        c,
        donor: (crate::circle::wrap(b_start), b_len),
        donor_value,
        u_radius,
        u_measure,
        changed_mass,
        blocks,
        levels,
        hawkes_lower,
        hawkes_horizon,
        md_warning,
    })
}
