//! Piecewise-constant probability densities on the circle.

mod perturb;

pub use perturb::{perturb, Ball, LevelCertificate, PerturbConfig, PerturbationCertificate};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle::{split_arc, wrap};
use crate::seq::{LengthSequence, SeqError};

/// Tolerance on ∫f = 1.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("invalid pieces: {0}")]
    InvalidPieces(String),
    #[error("density integrates to {0}, not 1")]
    NotNormalized(f64),
    #[error("invalid marked points: {0}")]
    InvalidMarks(String),
    #[error("the infimum set has positive measure; mark its points with kf_points")]
    PositiveMeasureK,
    #[error("no donor region with f ≥ 1 fits outside the covers")]
    NoDonor,
    #[error("construction does not fit in the budget: {0}")]
    BudgetExceeded(String),
    #[error(transparent)]
    Sequence(#[from] SeqError),
}

/// Piecewise-constant function on [0, 1) with pieces `[starts[i], starts[i+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    starts: Vec<f64>,
    values: Vec<f64>,
    /// cum[i] = ∫_0^{starts[i]}; cum[n] is the total.
    cum: Vec<f64>,
}

impl StepFunction {
    /// `starts` must begin at 0 and increase strictly below 1.
    pub fn new(starts: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(starts.len(), values.len());
        assert!(!starts.is_empty() && starts[0] == 0.0);
        let mut cum = Vec::with_capacity(starts.len() + 1);
        cum.push(0.0);
        for i in 0..starts.len() {
            let end = if i + 1 < starts.len() { starts[i + 1] } else { 1.0 };
            cum.push(cum[i] + values[i] * (end - starts[i]));
        }
        Self { starts, values, cum }
    }

    pub fn constant(v: f64) -> Self {
        Self::new(vec![0.0], vec![v])
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn piece_count(&self) -> usize {
        self.starts.len()
    }

    /// (start, end, value) for each piece.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.starts.len()).map(move |i| (self.starts[i], self.piece_end(i), self.values[i]))
    }

    fn piece_end(&self, i: usize) -> f64 {
        if i + 1 < self.starts.len() {
            self.starts[i + 1]
        } else {
            1.0
        }
    }

    #[inline]
    fn piece_of(&self, x: f64) -> usize {
        self.starts.partition_point(|&s| s <= x) - 1
    }

    pub fn value_at(&self, x: f64) -> f64 {
        self.values[self.piece_of(wrap(x))]
    }

    pub fn total(&self) -> f64 {
        self.cum[self.starts.len()]
    }

    /// ∫_0^x for x in [0, 1].
    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return self.total();
        }
        let i = self.piece_of(x);
        self.cum[i] + self.values[i] * (x - self.starts[i])
    }

    /// Lifted primitive F̃(x) = floor(x)·total + F(frac x), defined on the whole line.
    #[inline]
    pub fn lifted(&self, x: f64) -> f64 {
        let k = x.floor();
        k * self.total() + self.cdf(x - k)
    }

    /// ∫ over the lifted interval [a, b).
    #[inline]
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            0.0
        } else {
            self.lifted(b) - self.lifted(a)
        }
    }

    /// Apply layers in order: each maps the current value on its arcs.
    pub fn overlay(&self, layers: &[Layer]) -> StepFunction {
        let mut cuts: Vec<f64> = self.starts.clone();
        for layer in layers {
            for &(a, b) in &layer.arcs {
                cuts.push(a);
                cuts.push(b);
            }
        }
        cuts.retain(|&x| (0.0..1.0).contains(&x));
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut starts = Vec::with_capacity(cuts.len());
        let mut values: Vec<f64> = Vec::with_capacity(cuts.len());
        for (i, &s) in cuts.iter().enumerate() {
            let e = if i + 1 < cuts.len() { cuts[i + 1] } else { 1.0 };
            let mid = 0.5 * (s + e);
            let mut v = self.values[self.piece_of(mid)];
            for layer in layers {
                if layer.arcs.iter().any(|&(a, b)| a <= mid && mid < b) {
                    v = match layer.op {
                        LayerOp::Set(x) => x,
                        LayerOp::Add(x) => v + x,
                    };
                }
            }
            if values.last() != Some(&v) {
                starts.push(s);
                values.push(v);
            }
        }
        StepFunction::new(starts, values)
    }
}

/// Arcs inside [0, 1] and the value change applied there.
#[derive(Debug, Clone)]
pub struct Layer {
    pub arcs: Vec<(f64, f64)>,
    pub op: LayerOp,
}

impl Layer {
    /// Build from lifted arcs, splitting at 0.
    pub fn from_lifted(arcs: &[(f64, f64)], op: LayerOp) -> Self {
        let mut out = Vec::new();
        for &(a, b) in arcs {
            let (p, n) = split_arc(a, b);
            out.extend_from_slice(&p[..n]);
        }
        Self { arcs: out, op }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum LayerOp {
    Set(f64),
    Add(f64),
}

/// JSON form of a density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kf_points: Vec<f64>,
}

/// Validated step density. Piece i covers [breakpoints[i], breakpoints[i+1]) and
/// the last piece wraps to breakpoints[0].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensitySpec", into = "DensitySpec")]
pub struct StepDensity {
    spec: DensitySpec,
    f: StepFunction,
}

impl TryFrom<DensitySpec> for StepDensity {
    type Error = DensityError;

    fn try_from(spec: DensitySpec) -> Result<Self, DensityError> {
        StepDensity::new(spec)
    }
}

impl From<StepDensity> for DensitySpec {
    fn from(d: StepDensity) -> Self {
        d.spec
    }
}

/// Essential infimum and infimum set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub m_f: f64,
    /// Closed arcs as (start, length); a marked point has length 0.
    pub k_f: Vec<(f64, f64)>,
    pub lebesgue_k: f64,
}

impl StepDensity {
    pub fn new(spec: DensitySpec) -> Result<Self, DensityError> {
        let n = spec.breakpoints.len();
        if n == 0 || n != spec.values.len() {
            return Err(DensityError::InvalidPieces("need one value per breakpoint".into()));
        }
        for (i, &b) in spec.breakpoints.iter().enumerate() {
            if !(0.0..1.0).contains(&b) {
                return Err(DensityError::InvalidPieces(format!("breakpoint {b} outside [0, 1)")));
            }
            if i > 0 && b <= spec.breakpoints[i - 1] {
                return Err(DensityError::InvalidPieces("breakpoints must increase strictly".into()));
            }
        }
        for &v in &spec.values {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DensityError::InvalidPieces(format!("value {v}")));
            }
        }
        for (i, &p) in spec.kf_points.iter().enumerate() {
            if !(0.0..1.0).contains(&p) || (i > 0 && p <= spec.kf_points[i - 1]) {
                return Err(DensityError::InvalidMarks("points must increase strictly inside [0, 1)".into()));
            }
        }
        let mut starts = Vec::with_capacity(n + 1);
        let mut values = Vec::with_capacity(n + 1);
        if spec.breakpoints[0] > 0.0 {
            starts.push(0.0);
            values.push(spec.values[n - 1]);
        }
        starts.extend_from_slice(&spec.breakpoints);
        values.extend_from_slice(&spec.values);
        let f = StepFunction::new(starts, values);
        let total = f.total();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(DensityError::NotNormalized(total));
        }
        Ok(Self { spec, f })
    }

    pub fn uniform() -> Self {
        Self::new(DensitySpec { breakpoints: vec![0.0], values: vec![1.0], kf_points: vec![] }).unwrap()
    }

    /// 0.5 on [0, 0.5) and 1.5 on [0.5, 1).
    pub fn two_piece() -> Self {
        Self::new(DensitySpec { breakpoints: vec![0.0, 0.5], values: vec![0.5, 1.5], kf_points: vec![] }).unwrap()
    }

    pub fn with_marks(&self, marks: Vec<f64>) -> Result<Self, DensityError> {
        let mut spec = self.spec.clone();
        spec.kf_points = marks;
        Self::new(spec)
    }

    pub(crate) fn from_function(f: StepFunction, marks: Vec<f64>) -> Result<Self, DensityError> {
        let spec = DensitySpec { breakpoints: f.starts().to_vec(), values: f.values().to_vec(), kf_points: marks };
        Self::new(spec)
    }

    pub fn spec(&self) -> &DensitySpec {
        &self.spec
    }

    pub fn function(&self) -> &StepFunction {
        &self.f
    }

    pub fn marks(&self) -> &[f64] {
        &self.spec.kf_points
    }

    pub fn value_at(&self, x: f64) -> f64 {
        self.f.value_at(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.f.cdf(x)
    }

    /// Inverse CDF of u in [0, 1).
    pub fn sample_center(&self, u: f64) -> f64 {
        let f = &self.f;
        let target = u * f.total();
        let n = f.starts.len();
        let i = f.cum[..n].partition_point(|&c| c <= target).max(1) - 1;
        let v = f.values[i];
        let x = if v > 0.0 { f.starts[i] + (target - f.cum[i]) / v } else { f.starts[i] };
        let end = f.piece_end(i);
        let x = x.min(end.next_down()).max(f.starts[i]);
        if x >= 1.0 {
            0.0
        } else {
            x
        }
    }

    /// μ_f of the arc [center - radius, center + radius).
    pub fn arc_measure(&self, center: f64, radius: f64) -> f64 {
        let r = radius.clamp(0.0, 0.5);
        self.f.integral(center - r, center + r)
    }

    /// μ_f of the lifted interval [a, b).
    pub fn interval_measure(&self, a: f64, b: f64) -> f64 {
        self.f.integral(a, b)
    }

    pub fn essinf_report(&self) -> DensityReport {
        let m_f = self.f.values.iter().copied().fold(f64::INFINITY, f64::min);
        if !self.spec.kf_points.is_empty() {
            return DensityReport { m_f, k_f: self.spec.kf_points.iter().map(|&p| (p, 0.0)).collect(), lebesgue_k: 0.0 };
        }
        let mut arcs: Vec<(f64, f64)> = Vec::new();
        for (s, e, v) in self.f.pieces() {
            if v == m_f {
                match arcs.last_mut() {
                    Some(last) if last.0 + last.1 == s => last.1 = e - last.0,
                    _ => arcs.push((s, e - s)),
                }
            }
        }
        if arcs.len() >= 2 {
            let last = *arcs.last().unwrap();
            if arcs[0].0 == 0.0 && last.0 + last.1 == 1.0 {
                arcs.pop();
                arcs[0] = (last.0, last.1 + arcs[0].1);
            }
        }
        let lebesgue_k = arcs.iter().map(|a| a.1).sum();
        DensityReport { m_f, k_f: arcs, lebesgue_k }
    }
}

/// Σ_q exp(-Σ_{j ≤ N} μ_g(B(x_q, ℓ_j/2 - ε))) over cover balls (x_q, ε).
pub fn noncover_bound(g: &StepDensity, seq: &LengthSequence, cover: &[(f64, f64)], horizon: u64) -> f64 {
    cover
        .iter()
        .map(|&(x, eps)| {
            let mut s = 0.0;
            for (_, l) in seq.terms(seq.first(), horizon) {
                let r = l / 2.0 - eps;
                if r <= 0.0 {
                    break;
                }
                s += g.arc_measure(x, r);
            }
            (-s).exp()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_piece() -> StepDensity {
        // Minimum 0.5 on [0.1, 0.3) and [0.6, 0.7).
        StepDensity::new(DensitySpec {
            breakpoints: vec![0.1, 0.3, 0.6, 0.7],
            values: vec![0.5, 1.5, 0.5, 1.0],
            kf_points: vec![],
        })
        .unwrap()
    }

    fn test_densities() -> Vec<StepDensity> {
        vec![StepDensity::uniform(), StepDensity::two_piece(), three_piece()]
    }

    #[test]
    fn essinf_examples() {
        let r = StepDensity::two_piece().essinf_report();
        assert_eq!(r.m_f, 0.5);
        assert_eq!(r.k_f, vec![(0.0, 0.5)]);
        assert_eq!(r.lebesgue_k, 0.5);
        let r = StepDensity::uniform().essinf_report();
        assert_eq!(r.m_f, 1.0);
        assert_eq!(r.k_f, vec![(0.0, 1.0)]);
    }

    #[test]
    fn essinf_three_pieces_against_local_grid() {
        // Oracle: x is in K_f when the min of f over (x - h, x + h) equals m_f for a small h.
        let f = three_piece();
        let r = f.essinf_report();
        assert_eq!(r.m_f, 0.5);
        assert!((r.lebesgue_k - 0.3).abs() < 1e-15);
        let h = 1e-4;
        for i in 0..10_000 {
            let x = i as f64 / 10_000.0 + 0.5e-4;
            let local = (0..=20).map(|j| f.value_at(x - h + j as f64 * h / 10.0)).fold(f64::INFINITY, f64::min);
            let in_k = r.k_f.iter().any(|&(s, l)| {
                let d = wrap(x - s);
                d <= l || wrap(s - x) < h || wrap(x - (s + l)) < h
            });
            assert_eq!(local == r.m_f, in_k, "x = {x}");
        }
    }

    #[test]
    fn wrapped_infimum_pieces_merge() {
        let f = StepDensity::new(DensitySpec {
            breakpoints: vec![0.2, 0.7],
            values: vec![2.0, 0.0],
            kf_points: vec![],
        })
        .unwrap();
        let r = f.essinf_report();
        assert_eq!(r.m_f, 0.0);
        assert_eq!(r.k_f.len(), 1);
        assert!((r.k_f[0].0 - 0.7).abs() < 1e-15 && (r.k_f[0].1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn marked_points_replace_the_infimum_set() {
        let f = StepDensity::two_piece().with_marks(vec![0.1, 0.25, 0.4]).unwrap();
        let r = f.essinf_report();
        assert_eq!(r.m_f, 0.5);
        assert_eq!(r.k_f.len(), 3);
        assert_eq!(r.lebesgue_k, 0.0);
        assert!(StepDensity::two_piece().with_marks(vec![0.4, 0.1]).is_err());
    }

    #[test]
    fn validation() {
        let bad = DensitySpec { breakpoints: vec![0.0, 0.5], values: vec![1.0, 1.5], kf_points: vec![] };
        assert!(matches!(StepDensity::new(bad), Err(DensityError::NotNormalized(_))));
        let bad = DensitySpec { breakpoints: vec![0.5, 0.2], values: vec![1.0, 1.0], kf_points: vec![] };
        assert!(StepDensity::new(bad).is_err());
        let bad = DensitySpec { breakpoints: vec![0.0], values: vec![-1.0], kf_points: vec![] };
        assert!(StepDensity::new(bad).is_err());
        let json = r#"{"breakpoints":[0.0,0.5],"values":[0.5,1.5],"kf_points":[0.25]}"#;
        let spec: DensitySpec = serde_json::from_str(json).unwrap();
        assert!(StepDensity::new(spec).is_ok());
        assert!(serde_json::from_str::<DensitySpec>(r#"{"breakpoints":[0.0],"values":[1.0],"x":1}"#).is_err());
    }

    #[test]
    fn sampling_examples() {
        assert_eq!(StepDensity::uniform().sample_center(0.37), 0.37);
        assert!((StepDensity::two_piece().sample_center(0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sampling_histogram_within_three_sigma() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let f = three_piece();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let pieces: Vec<(f64, f64, f64)> = f.function().pieces().collect();
        let mut counts = vec![0u64; pieces.len()];
        for _ in 0..n {
            let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let x = f.sample_center(u);
            let i = pieces.iter().position(|&(s, e, _)| s <= x && x < e).unwrap();
            counts[i] += 1;
        }
        for (i, &(s, e, v)) in pieces.iter().enumerate() {
            let p = v * (e - s);
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((counts[i] as f64 - n as f64 * p).abs() <= 3.0 * sd, "piece {i}");
        }
    }

    #[test]
    fn arc_measure_examples() {
        let u = StepDensity::uniform();
        assert!((u.arc_measure(0.9, 0.15) - 0.3).abs() < 1e-15);
        let f = StepDensity::two_piece();
        // 0.5·0.25 + 1.5·0.25 by hand.
        assert!((f.arc_measure(0.5, 0.25) - 0.5).abs() < 1e-15);
        assert!((f.arc_measure(0.123, 0.5) - 1.0).abs() < 1e-15);
        // Wrap through 0: 1.5·0.1 + 0.5·0.1.
        assert!((f.arc_measure(0.0, 0.1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn noncover_bound_examples() {
        let g = StepDensity::uniform();
        let s = LengthSequence::explicit(vec![0.5, 0.3]).unwrap();
        let b = noncover_bound(&g, &s, &[(0.3, 0.1)], 2);
        assert!((b - (-0.4f64).exp()).abs() < 1e-15);
        let s = LengthSequence::harmonic(1.5).unwrap();
        let eps = 0.001;
        let b = noncover_bound(&g, &s, &[(0.7, eps)], 1000);
        let pps: f64 = (2..=1000).map(|n| (1.5 / n as f64 - 2.0 * eps).max(0.0)).sum();
        assert!((b - (-pps).exp()).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for n in [10, 100, 1000, 5000] {
            let v = noncover_bound(&StepDensity::two_piece(), &s, &[(0.2, 1e-4), (0.6, 1e-4)], n);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn overlay_sets_and_adds() {
        let f = StepFunction::constant(1.0);
        let g = f.overlay(&[
            Layer::from_lifted(&[(0.9, 1.1)], LayerOp::Set(2.0)),
            Layer::from_lifted(&[(0.05, 0.2)], LayerOp::Add(-0.5)),
        ]);
        assert_eq!(g.value_at(0.95), 2.0);
        assert_eq!(g.value_at(0.07), 1.5);
        assert_eq!(g.value_at(0.15), 0.5);
        assert_eq!(g.value_at(0.5), 1.0);
        let want = 1.0 + 0.2 - 0.5 * 0.15;
        assert!((g.total() - want).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn cdf_round_trip(u in 0.0f64..1.0, which in 0usize..3) {
            let f = &test_densities()[which];
            let x = f.sample_center(u);
            prop_assert!((0.0..1.0).contains(&x));
            prop_assert!((f.cdf(x) - u).abs() < 1e-12);
        }

        #[test]
        fn arc_measure_is_additive(c in 0.0f64..1.0, r1 in 0.0f64..0.25, r2 in 0.0f64..0.25, which in 0usize..3) {
            let f = &test_densities()[which];
            let whole = f.interval_measure(c, c + r1 + r2);
            let parts = f.interval_measure(c, c + r1) + f.interval_measure(c + r1, c + r1 + r2);
            prop_assert!((whole - parts).abs() < 1e-14);
            prop_assert!((f.arc_measure(c, 0.5) - 1.0).abs() < 1e-14);
        }
    }
}
