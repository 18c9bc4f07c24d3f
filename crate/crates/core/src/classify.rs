//! Slope fits and the three-way divergence label shared by series and energies.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Diverges,
    Converges,
    Inconclusive,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Diverges => "diverges",
            Classification::Converges => "converges",
            Classification::Inconclusive => "inconclusive",
        }
    }

    /// Label a fitted slope: above `diverge_above` diverges, below `converge_below` converges.
    pub fn from_slope(slope: f64, diverge_above: f64, converge_below: f64) -> Self {
        if !slope.is_finite() {
            Classification::Inconclusive
        } else if slope > diverge_above {
            Classification::Diverges
        } else if slope < converge_below {
            Classification::Converges
        } else {
            Classification::Inconclusive
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordinary least-squares slope of `ys` against `xs`. NaN with fewer than two points.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

/// Distinct integers in `[lo, hi]` spaced geometrically, `per_decade` per factor of ten.
/// Always contains `lo` and `hi`.
pub fn geometric_indices(lo: u64, hi: u64, per_decade: u32) -> Vec<u64> {
    assert!(lo >= 1 && lo <= hi);
    let ratio = 10f64.powf(1.0 / per_decade.max(1) as f64);
    let mut out = vec![lo];
    let mut x = lo as f64;
    loop {
        x *= ratio;
        let n = x.round() as u64;
        if n >= hi {
            break;
        }
        if n > *out.last().unwrap() {
            out.push(n);
        }
    }
    if *out.last().unwrap() != hi {
        out.push(hi);
    }
    out
}

/// Neumaier compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// ln(e^a + e^b) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((ls_slope(&xs, &ys) - 3.0).abs() < 1e-12);
        assert!(ls_slope(&[1.0], &[2.0]).is_nan());
    }

    #[test]
    fn labels() {
        assert_eq!(Classification::from_slope(-0.8, -0.95, -1.05), Classification::Diverges);
        assert_eq!(Classification::from_slope(-1.2, -0.95, -1.05), Classification::Converges);
        assert_eq!(Classification::from_slope(-1.0, -0.95, -1.05), Classification::Inconclusive);
        assert_eq!(Classification::from_slope(f64::NAN, -0.95, -1.05), Classification::Inconclusive);
    }

    #[test]
    fn geometric_indices_are_increasing_and_bracketed() {
        let v = geometric_indices(3, 1_000_000, 10);
        assert_eq!(v[0], 3);
        assert_eq!(*v.last().unwrap(), 1_000_000);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(geometric_indices(5, 5, 10), vec![5]);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..1000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-13)).abs() < 1e-18);
    }

    #[test]
    fn log_add_exp_matches_direct() {
        let v = log_add_exp(1.0, 2.0);
        assert!((v - (1f64.exp() + 2f64.exp()).ln()).abs() < 1e-14);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        assert!(log_add_exp(800.0, 800.0).is_finite());
    }
}
