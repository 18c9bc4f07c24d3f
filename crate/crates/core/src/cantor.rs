//! Symmetric Cantor sets built by removing a middle gap at every level, and
//! their natural measure σ0.
//!
//! Level 0 is [0, 1]. Level k has 2^k closed intervals of common length δ_k,
//! addressed by words in {0, 2}^k stored as the low k bits of a `u64` (first
//! letter in the highest bit, bit set for letter 2). Intervals are never
//! stored; they are rebuilt from the word on demand.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle::split_arc;

/// Deepest level reachable with implicit addressing.
pub const MAX_DEPTH: u32 = 60;
/// Leaf intervals shorter than this are treated as uniform.
const MIN_DELTA: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CantorError {
    #[error("depth {0} exceeds the construction depth")]
    DepthExceeded(u32),
    #[error("invalid Cantor spec: {0}")]
    InvalidSpec(String),
    #[error("radius {0} is below the construction resolution")]
    ResolutionExceeded(f64),
}

/// Gap rule for the step that produces level k from level k - 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapRule {
    /// Gap fraction 1/3.
    MiddleThird,
    /// Gap fraction 3^{-k}, so the child ratio is (1 - 3^{-k})/2.
    LambdaPhase,
    /// Gap fraction 1/(k + 2), so δ_k = (1/2)(1 - 1/(k+2)) δ_{k-1}.
    Harmonic,
}

impl GapRule {
    pub fn gap(self, k: u32) -> f64 {
        match self {
            GapRule::MiddleThird => 1.0 / 3.0,
            GapRule::LambdaPhase => 3f64.powi(-(k as i32)),
            GapRule::Harmonic => 1.0 / (k as f64 + 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub rule: GapRule,
    pub levels: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantorSpec {
    pub phases: Vec<Phase>,
}

impl CantorSpec {
    pub fn middle_third(depth: u32) -> Self {
        Self { phases: vec![Phase { rule: GapRule::MiddleThird, levels: depth }] }
    }

    /// Gap 1/(k+2) at every level: Lebesgue-null with full dimension.
    pub fn sing_frostman(depth: u32) -> Self {
        Self { phases: vec![Phase { rule: GapRule::Harmonic, levels: depth }] }
    }

    /// Alternating middle-third and lambda phases with #T_q = q and #H_q = q²,
    /// truncated at `depth`.
    pub fn inhomogeneous(depth: u32) -> Self {
        let mut phases = Vec::new();
        let mut used = 0;
        let mut q = 1;
        while used < depth {
            for (rule, len) in [(GapRule::MiddleThird, q), (GapRule::LambdaPhase, q * q)] {
                let len = len.min(depth - used);
                if len > 0 {
                    phases.push(Phase { rule, levels: len });
                    used += len;
                }
            }
            q += 1;
        }
        Self { phases }
    }

    pub fn depth(&self) -> u32 {
        self.phases.iter().map(|p| p.levels).sum()
    }

    /// Rule used at each level 1..=depth.
    pub fn rules(&self) -> Vec<GapRule> {
        self.phases.iter().flat_map(|p| std::iter::repeat_n(p.rule, p.levels as usize)).collect()
    }
}

/// One level of the construction with implicit interval addressing.
#[derive(Debug, Clone, Copy)]
pub struct CantorLevel<'a> {
    measure: &'a CantorMeasure,
    depth: u32,
}

impl CantorLevel<'_> {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn delta(&self) -> f64 {
        self.measure.deltas[self.depth as usize]
    }

    pub fn len(&self) -> u64 {
        1u64 << self.depth
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn interval(&self, word: u64) -> (f64, f64) {
        self.measure.interval(word, self.depth)
    }

    pub fn intervals(&self) -> impl Iterator<Item = (u64, f64, f64)> + '_ {
        (0..self.len()).map(move |w| {
            let (l, r) = self.interval(w);
            (w, l, r)
        })
    }
}

/// Word as a string over {0, 2}.
pub fn word_string(word: u64, k: u32) -> String {
    (0..k).map(|i| if word >> (k - 1 - i) & 1 == 1 { '2' } else { '0' }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDimension {
    pub lower: f64,
    pub upper: f64,
    /// (k, k ln 2 / -ln δ_k).
    pub trajectory: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrostmanRow {
    pub radius: f64,
    pub mass: f64,
    pub bound: f64,
    pub ratio: f64,
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    /// Last level of the preceding middle-third phase.
    pub k_start: u32,
    /// Last level of the lambda phase.
    pub k_end: u32,
    pub u: f64,
    pub v: f64,
    /// min over the window levels of k ln 2 / -ln δ_k.
    pub theta: f64,
}

impl Window {
    /// ε with 1 - ε/4 = θ.
    pub fn eps(&self) -> f64 {
        4.0 * (1.0 - self.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleWindows {
    pub windows: Vec<Window>,
    /// max u/v.
    pub c0: f64,
}

/// Compiled construction carrying the natural measure σ0.
#[derive(Debug, Clone)]
pub struct CantorMeasure {
    spec: CantorSpec,
    rules: Vec<GapRule>,
    deltas: Vec<f64>,
    /// δ_{k-1} - δ_k: offset of the right child.
    shifts: Vec<f64>,
    /// Absolute gap length at each level.
    gaps: Vec<f64>,
    leaf: u32,
}

impl CantorMeasure {
    pub fn new(spec: CantorSpec) -> Result<Self, CantorError> {
        let depth = spec.depth();
        if depth > MAX_DEPTH {
            return Err(CantorError::DepthExceeded(depth));
        }
        if spec.phases.iter().any(|p| p.levels == 0) {
            return Err(CantorError::InvalidSpec("phase with zero levels".into()));
        }
        let rules = spec.rules();
        let mut deltas = vec![1.0];
        let mut shifts = vec![0.0];
        let mut gaps = vec![0.0];
        for (i, rule) in rules.iter().enumerate() {
            let k = i as u32 + 1;
            let g = rule.gap(k);
            if !(g > 0.0 && g < 1.0) {
                return Err(CantorError::InvalidSpec(format!("gap fraction {g} at level {k}")));
            }
            let prev = deltas[i];
            let d = prev * (1.0 - g) / 2.0;
            deltas.push(d);
            shifts.push(prev - d);
            gaps.push(prev - 2.0 * d);
        }
        let leaf = (0..=depth).rev().find(|&k| deltas[k as usize] >= MIN_DELTA).unwrap_or(0);
        Ok(Self { spec, rules, deltas, shifts, gaps, leaf })
    }

    pub fn spec(&self) -> &CantorSpec {
        &self.spec
    }

    pub fn depth(&self) -> u32 {
        self.rules.len() as u32
    }

    pub fn rules(&self) -> &[GapRule] {
        &self.rules
    }

    pub fn delta(&self, k: u32) -> Result<f64, CantorError> {
        self.deltas.get(k as usize).copied().ok_or(CantorError::DepthExceeded(k))
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// Absolute length of the gaps opened at level k.
    pub fn gap(&self, k: u32) -> Result<f64, CantorError> {
        if k == 0 {
            return Err(CantorError::DepthExceeded(0));
        }
        self.gaps.get(k as usize).copied().ok_or(CantorError::DepthExceeded(k))
    }

    /// Smallest radius the measure resolves.
    pub fn resolution(&self) -> f64 {
        self.deltas[self.depth() as usize]
    }

    pub fn level(&self, k: u32) -> Result<CantorLevel<'_>, CantorError> {
        if k > self.depth() {
            return Err(CantorError::DepthExceeded(k));
        }
        Ok(CantorLevel { measure: self, depth: k })
    }

    /// E^{(k)}_w as [left, right].
    pub fn interval(&self, word: u64, k: u32) -> (f64, f64) {
        let mut l = 0.0;
        for i in 1..=k {
            if word >> (k - i) & 1 == 1 {
                l += self.shifts[i as usize];
            }
        }
        (l, l + self.deltas[k as usize])
    }

    /// Distribution function F(x) = σ0([0, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let mut l = 0.0;
        let mut base = 0.0;
        let mut mass = 1.0;
        for i in 1..=self.leaf as usize {
            let r = l + self.deltas[i - 1];
            if x <= l {
                return base;
            }
            if x >= r {
                return base + mass;
            }
            mass *= 0.5;
            if x <= l + self.deltas[i] {
                continue;
            }
            let right = l + self.shifts[i];
            if x < right {
                return base + mass;
            }
            base += mass;
            l = right;
        }
        let d = self.deltas[self.leaf as usize];
        if x >= l + d {
            return base + mass;
        }
        base + mass * ((x - l) / d).clamp(0.0, 1.0)
    }

    /// σ0([a, b]) for 0 ≤ a ≤ b ≤ 1.
    pub fn measure_interval(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.cdf(b) - self.cdf(a)
    }

    /// σ0 of the circle arc (center - radius, center + radius).
    pub fn natural_measure(&self, center: f64, radius: f64) -> f64 {
        let radius = radius.max(0.0);
        if 2.0 * radius >= 1.0 {
            return 1.0;
        }
        let (parts, n) = split_arc(center - radius, center + radius);
        parts[..n].iter().map(|&(a, b)| self.measure_interval(a, b)).sum()
    }

    /// Box-counting trajectory with M(A, δ_k) = 2^k over `ks`.
    pub fn box_dimension(&self, ks: std::ops::RangeInclusive<u32>) -> Result<BoxDimension, CantorError> {
        let (lo, hi) = (*ks.start(), *ks.end());
        if lo == 0 || hi > self.depth() || lo > hi {
            return Err(CantorError::DepthExceeded(hi));
        }
        let trajectory: Vec<(u32, f64)> = ks
            .map(|k| (k, k as f64 * std::f64::consts::LN_2 / -self.deltas[k as usize].ln()))
            .collect();
        let lower = trajectory.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        let upper = trajectory.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        Ok(BoxDimension { lower, upper, trajectory })
    }

    /// Worst ratio σ0(B(t, r))/bound(r) over sampled centers t, per radius.
    ///
    /// Balls that cannot reach past the gaps of levels ≤ j only see one
    /// level-j interval, and all level-j intervals carry the same structure.
    /// Centers are therefore sampled inside one interior level-j interval and
    /// inside E_{0…0}, whose ball also sees E_{2…2} across 0.
    pub fn frostman_profile(
        &self,
        radii: &[f64],
        samples: usize,
        bound: impl Fn(f64) -> f64 + Sync,
    ) -> Result<Vec<FrostmanRow>, CantorError> {
        if let Some(&r) = radii.iter().find(|&&r| r < self.resolution()) {
            return Err(CantorError::ResolutionExceeded(r));
        }
        let sub = (samples.max(2) / 2).ilog2();
        Ok(radii
            .par_iter()
            .map(|&r| {
                let mut j = 0;
                let mut min_gap = f64::INFINITY;
                while j < self.depth() {
                    min_gap = min_gap.min(self.gaps[j as usize + 1]);
                    if min_gap < r {
                        break;
                    }
                    j += 1;
                }
                let m = sub.min(self.depth() - j);
                let mut reps = vec![self.interval(0, j)];
                if j >= 2 {
                    reps.push(self.interval((1u64 << (j - 1)) - 1, j));
                }
                let b = bound(r);
                let mut best = FrostmanRow { radius: r, mass: 0.0, bound: b, ratio: 0.0, center: 0.0 };
                for &(l0, _) in &reps {
                    let dm = self.deltas[(j + m) as usize];
                    for w in 0..1u64 << m {
                        let mut l = l0;
                        for i in 1..=m {
                            if w >> (m - i) & 1 == 1 {
                                l += self.shifts[(j + i) as usize];
                            }
                        }
                        for t in [l, l + dm / 2.0, l + dm] {
                            let mass = self.natural_measure(t, r);
                            if mass > best.mass {
                                best.mass = mass;
                                best.center = t;
                            }
                        }
                    }
                }
                best.ratio = best.mass / b;
                best
            })
            .collect())
    }

    /// Scale windows of the lambda phases: u = δ at the phase end, v = δ at
    /// the end of the preceding phase.
    pub fn scale_windows(&self) -> Result<ScaleWindows, CantorError> {
        let mut windows = Vec::new();
        let mut k = 0u32;
        for p in &self.spec.phases {
            let start = k;
            k += p.levels;
            if p.rule != GapRule::LambdaPhase || start == 0 {
                continue;
            }
            let theta = (start..=k)
                .map(|i| i as f64 * std::f64::consts::LN_2 / -self.deltas[i as usize].ln())
                .fold(f64::INFINITY, f64::min);
            windows.push(Window {
                k_start: start,
                k_end: k,
                u: self.deltas[k as usize],
                v: self.deltas[start as usize],
                theta,
            });
        }
        if windows.is_empty() {
            return Err(CantorError::InvalidSpec("no lambda phase after level 0".into()));
        }
        let c0 = windows.iter().map(|w| w.u / w.v).fold(0.0, f64::max);
        Ok(ScaleWindows { windows, c0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn middle_third_level_two() {
        let m = CantorMeasure::new(CantorSpec::middle_third(5)).unwrap();
        let lv = m.level(2).unwrap();
        let want = [(0.0, 1.0 / 9.0), (2.0 / 9.0, 1.0 / 3.0), (2.0 / 3.0, 7.0 / 9.0), (8.0 / 9.0, 1.0)];
        for ((w, l, r), (a, b)) in lv.intervals().zip(want) {
            assert!(close(l, a, 1e-15) && close(r, b, 1e-15), "{w}: {l} {r}");
        }
        assert!(close(lv.delta(), 1.0 / 9.0, 1e-16));
        assert_eq!(word_string(2, 2), "20");
    }

    #[test]
    fn harmonic_deltas() {
        let m = CantorMeasure::new(CantorSpec::sing_frostman(40)).unwrap();
        assert!(close(m.delta(1).unwrap(), 1.0 / 3.0, 1e-16));
        assert!(close(m.delta(2).unwrap(), 1.0 / 8.0, 1e-16));
        // Closed form: δ_k = 2^{-k} · 2/(k+2).
        for k in 1..=40 {
            let exact = 0.5f64.powi(k as i32) * 2.0 / (k as f64 + 2.0);
            assert!(close(m.delta(k).unwrap() / exact, 1.0, 1e-12));
            let asym = 0.5f64.powi(k as i32) / (k as f64 + 2.0);
            let ratio = m.delta(k).unwrap() / asym;
            assert!((0.25..=4.0).contains(&ratio));
        }
    }

    #[test]
    fn depth_limits() {
        assert_eq!(CantorMeasure::new(CantorSpec::middle_third(61)).unwrap_err(), CantorError::DepthExceeded(61));
        let m = CantorMeasure::new(CantorSpec::middle_third(10)).unwrap();
        assert!(m.level(11).is_err());
        let spec: CantorSpec =
            serde_json::from_str(r#"{"phases": [{"rule": "middle_third", "levels": 5}, {"rule": "harmonic", "levels": 25}]}"#)
                .unwrap();
        assert_eq!(spec.depth(), 30);
        assert!(serde_json::from_str::<CantorSpec>(r#"{"phases": [], "x": 1}"#).is_err());
    }

    #[test]
    fn measure_examples() {
        let m = CantorMeasure::new(CantorSpec::sing_frostman(40)).unwrap();
        assert_eq!(m.natural_measure(0.5, 0.5), 1.0);
        let (l, r) = m.interval(0, 1);
        assert_eq!(m.measure_interval(l, r), 0.5);
        assert_eq!(m.natural_measure(0.5, 0.5 * m.gap(1).unwrap()), 0.0);
    }

    #[test]
    fn cylinder_masses_are_dyadic() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for spec in [CantorSpec::sing_frostman(45), CantorSpec::middle_third(30), CantorSpec::inhomogeneous(40)] {
            let m = CantorMeasure::new(spec).unwrap();
            for k in 1..=20u32 {
                for _ in 0..20 {
                    let w = rng.next_u64() & ((1u64 << k) - 1);
                    let (l, r) = m.interval(w, k);
                    assert_eq!(m.measure_interval(l, r), 0.5f64.powi(k as i32), "k = {k}, w = {w}");
                }
            }
        }
    }

    #[test]
    fn box_dimension_examples() {
        let m = CantorMeasure::new(CantorSpec::middle_third(30)).unwrap();
        let b = m.box_dimension(1..=30).unwrap();
        let d = LN_2 / 3f64.ln();
        assert!(close(b.lower, d, 1e-12) && close(b.upper, d, 1e-12));

        // Harmonic: k ln 2 / (k ln 2 + ln((k+2)/2)), slowly increasing to 1.
        let m = CantorMeasure::new(CantorSpec::sing_frostman(30)).unwrap();
        let b = m.box_dimension(1..=30).unwrap();
        for &(k, v) in &b.trajectory {
            let want = k as f64 * LN_2 / (k as f64 * LN_2 + ((k as f64 + 2.0) / 2.0).ln());
            assert!(close(v, want, 1e-12));
        }
        assert!(b.trajectory.windows(2).all(|w| w[1].1 > w[0].1));

        let m = CantorMeasure::new(CantorSpec {
            phases: vec![
                Phase { rule: GapRule::MiddleThird, levels: 10 },
                Phase { rule: GapRule::LambdaPhase, levels: 26 },
            ],
        })
        .unwrap();
        let b = m.box_dimension(5..=36).unwrap();
        assert!(close(b.lower, d, 1e-12));
        assert!(b.upper - b.lower >= 0.2, "{} {}", b.lower, b.upper);
    }

    #[test]
    fn inhomogeneous_schedule() {
        let s = CantorSpec::inhomogeneous(40);
        let lens: Vec<u32> = s.phases.iter().map(|p| p.levels).collect();
        assert_eq!(lens, vec![1, 1, 2, 4, 3, 9, 4, 16]);
        assert_eq!(CantorSpec::inhomogeneous(7).depth(), 7);
    }

    /// Max of σ0(B(t, r)) over endpoints and midpoints of every level-k interval.
    fn brute_force_max(m: &CantorMeasure, r: f64) -> f64 {
        let lv = m.level(m.depth()).unwrap();
        lv.intervals()
            .flat_map(|(_, l, r)| [l, (l + r) / 2.0, r])
            .map(|t| m.natural_measure(t, r))
            .fold(0.0, f64::max)
    }

    #[test]
    fn frostman_matches_exhaustive_search() {
        for spec in [CantorSpec::sing_frostman(16), CantorSpec::middle_third(16), CantorSpec::inhomogeneous(16)] {
            let m = CantorMeasure::new(spec).unwrap();
            let radii: Vec<f64> = (2..=10).map(|k| m.delta(k).unwrap()).chain([0.3, 0.01, 0.0123]).collect();
            let prof = m.frostman_profile(&radii, 1 << 17, |_| 1.0).unwrap();
            for row in &prof {
                let want = brute_force_max(&m, row.radius);
                assert!(close(row.mass, want, 1e-12), "r = {}: {} vs {}", row.radius, row.mass, want);
            }
        }
    }

    #[test]
    fn frostman_examples() {
        let m = CantorMeasure::new(CantorSpec::sing_frostman(40)).unwrap();
        let radii: Vec<f64> = (5..=30).map(|k| m.delta(k).unwrap()).collect();
        let prof = m.frostman_profile(&radii, 256, |r| 2.0 * r * (2.0 * r).ln().abs()).unwrap();
        let hi = prof.iter().map(|p| p.ratio).fold(0.0, f64::max);
        let lo = prof.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
        assert!(hi <= 8.0 && hi / lo <= 2.0, "{lo} {hi}");

        let m = CantorMeasure::new(CantorSpec::middle_third(30)).unwrap();
        let d = LN_2 / 3f64.ln();
        let radii: Vec<f64> = (1..=25).map(|k| m.delta(k).unwrap()).collect();
        let prof = m.frostman_profile(&radii, 256, |r| r.powf(d)).unwrap();
        assert!(prof.iter().all(|p| p.ratio <= 4.0));

        let prof = m.frostman_profile(&[0.5], 16, |r| r.powf(d)).unwrap();
        assert!(close(prof[0].ratio, 1.0 / 0.5f64.powf(d), 1e-12));
        assert_eq!(
            m.frostman_profile(&[1e-20], 16, |r| r).unwrap_err(),
            CantorError::ResolutionExceeded(1e-20)
        );
    }

    #[test]
    fn scale_windows_examples() {
        let m = CantorMeasure::new(CantorSpec::inhomogeneous(40)).unwrap();
        let sw = m.scale_windows().unwrap();
        assert_eq!(sw.windows.len(), 4);
        for w in sw.windows.windows(2) {
            assert!(w[1].v < w[0].u);
            assert!(w[1].eps() < w[0].eps());
        }
        assert!(sw.windows.iter().all(|w| w.u < w.v));
        assert!(sw.c0 < 1.0);

        for w in &sw.windows {
            let radii: Vec<f64> = (w.k_start..=w.k_end).map(|k| m.delta(k).unwrap()).collect();
            let prof = m.frostman_profile(&radii, 64, |r| r.powf(1.0 - w.eps() / 4.0)).unwrap();
            assert!(prof.iter().all(|p| p.ratio <= 4.0), "{w:?}");
        }
        assert!(CantorMeasure::new(CantorSpec::middle_third(5)).unwrap().scale_windows().is_err());
    }

    fn arb_spec() -> impl Strategy<Value = CantorSpec> {
        let rule = prop_oneof![Just(GapRule::MiddleThird), Just(GapRule::LambdaPhase), Just(GapRule::Harmonic)];
        prop::collection::vec((rule, 1u32..6), 1..6).prop_map(|v| CantorSpec {
            phases: v.into_iter().map(|(rule, levels)| Phase { rule, levels }).collect(),
        })
    }

    proptest! {
        #[test]
        fn ratios_and_nesting(spec in arb_spec()) {
            let m = CantorMeasure::new(spec).unwrap();
            for k in 1..=m.depth() {
                let q = m.delta(k).unwrap() / m.delta(k - 1).unwrap();
                prop_assert!((1.0 / 3.0 - 1e-15..0.5).contains(&q));
            }
            let k = m.depth().min(12);
            let mut total = 0.0;
            for (w, l, r) in m.level(k).unwrap().intervals() {
                total += m.measure_interval(l, r);
                if k > 0 {
                    let (pl, pr) = m.interval(w >> 1, k - 1);
                    prop_assert!(pl <= l && r <= pr + 1e-14);
                    let g = m.gap(k).unwrap();
                    let want = if w & 1 == 1 { pl + m.delta(k - 1).unwrap() - m.delta(k).unwrap() } else { pl };
                    prop_assert!((l - want).abs() <= 1e-14);
                    prop_assert!(g > 0.0);
                }
            }
            prop_assert_eq!(total, 1.0);
        }

        #[test]
        fn measure_is_monotone(c in 0.0f64..1.0, r1 in 0.0f64..0.5, r2 in 0.0f64..0.5) {
            let m = CantorMeasure::new(CantorSpec::inhomogeneous(30)).unwrap();
            let (a, b) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(m.natural_measure(c, a) <= m.natural_measure(c, b) + 1e-15);
            let x = m.natural_measure(c, a);
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }
}
