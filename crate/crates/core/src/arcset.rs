//! Finite unions of half-open arcs on the circle.
//!
//! Arcs are stored as disjoint, non-adjacent pieces `[l, r)` with
//! `0 ≤ l < r ≤ 1`, keyed by `l`. An arc through 0 is kept as the two pieces
//! `[l, 1)` and `[0, r)`, which makes the representation unique.

use std::collections::BTreeMap;

use crate::circle::split_arc;

#[inline]
fn key(x: f64) -> u64 {
    (x + 0.0).to_bits()
}

#[inline]
fn unkey(k: u64) -> f64 {
    f64::from_bits(k)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArcSet {
    arcs: BTreeMap<u64, u64>,
}

impl ArcSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full() -> Self {
        let mut s = Self::default();
        s.arcs.insert(key(0.0), key(1.0));
        s
    }

    /// Union of lifted arcs `[a, b)`.
    pub fn from_arcs(arcs: &[(f64, f64)]) -> Self {
        let mut s = Self::empty();
        for &(a, b) in arcs {
            s.insert(a, b);
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// Stored pieces, wrap-split at 0.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.arcs.iter().map(|(&l, &r)| (unkey(l), unkey(r)))
    }

    /// Number of stored pieces.
    pub fn piece_count(&self) -> usize {
        self.arcs.len()
    }

    /// Number of arcs on the circle: pieces touching 0 and 1 count once.
    pub fn arc_count(&self) -> usize {
        let n = self.arcs.len();
        let first = self.arcs.iter().next().map(|(&l, _)| unkey(l));
        let last = self.arcs.iter().next_back().map(|(_, &r)| unkey(r));
        if n >= 2 && first == Some(0.0) && last == Some(1.0) {
            n - 1
        } else {
            n
        }
    }

    pub fn length(&self) -> f64 {
        self.pieces().map(|(l, r)| r - l).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        let x = crate::circle::wrap(x);
        match self.arcs.range(..=key(x)).next_back() {
            Some((_, &r)) => x < unkey(r),
            None => false,
        }
    }

    /// Remove the lifted arc `[a, b)`; `on_removed` sees each removed piece.
    pub fn subtract_with(&mut self, a: f64, b: f64, mut on_removed: impl FnMut(f64, f64)) {
        if b <= a {
            return;
        }
        let (parts, n) = split_arc(a, b);
        for &(pa, pb) in &parts[..n] {
            self.subtract_piece(pa, pb, &mut on_removed);
        }
    }

    pub fn subtract(&mut self, a: f64, b: f64) {
        self.subtract_with(a, b, |_, _| {});
    }

    /// Remove the arc centered at `center` with half-length `radius`.
    pub fn subtract_arc(&mut self, center: f64, radius: f64) {
        self.subtract(center - radius, center + radius);
    }

    fn subtract_piece(&mut self, a: f64, b: f64, on_removed: &mut impl FnMut(f64, f64)) {
        let mut hit: Vec<(u64, u64)> = Vec::new();
        for (&l, &r) in self.arcs.range(..key(b)).rev() {
            if unkey(r) <= a {
                break;
            }
            hit.push((l, r));
        }
        for (lk, rk) in hit {
            let (l, r) = (unkey(lk), unkey(rk));
            self.arcs.remove(&lk);
            let lo = l.max(a);
            let hi = r.min(b);
            on_removed(lo, hi);
            if l < a {
                self.arcs.insert(lk, key(a));
            }
            if b < r {
                self.arcs.insert(key(b), rk);
            }
        }
    }

    /// Add the lifted arc `[a, b)`.
    pub fn insert(&mut self, a: f64, b: f64) {
        if b <= a {
            return;
        }
        let (parts, n) = split_arc(a, b);
        for &(pa, pb) in &parts[..n] {
            self.insert_piece(pa, pb);
        }
    }

    fn insert_piece(&mut self, a: f64, b: f64) {
        let mut lo = a;
        let mut hi = b;
        let mut hit: Vec<u64> = Vec::new();
        for (&l, &r) in self.arcs.range(..=key(b)).rev() {
            if unkey(r) < a {
                break;
            }
            lo = lo.min(unkey(l));
            hi = hi.max(unkey(r));
            hit.push(l);
        }
        for l in hit {
            self.arcs.remove(&l);
        }
        self.arcs.insert(key(lo), key(hi));
    }

    pub fn union(&self, other: &ArcSet) -> ArcSet {
        let mut out = self.clone();
        for (l, r) in other.pieces() {
            out.insert_piece(l, r);
        }
        out
    }

    pub fn intersection(&self, other: &ArcSet) -> ArcSet {
        let mut out = ArcSet::empty();
        let a: Vec<(f64, f64)> = self.pieces().collect();
        let b: Vec<(f64, f64)> = other.pieces().collect();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if lo < hi {
                out.arcs.insert(key(lo), key(hi));
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        out
    }

    pub fn complement(&self) -> ArcSet {
        let mut out = ArcSet::full();
        for (l, r) in self.pieces() {
            out.subtract_piece(l, r, &mut |_, _| {});
        }
        out
    }
}
