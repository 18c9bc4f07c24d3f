//! The approximate identities ψ_r (raw lengths) and φ_r (quantized lengths).
//!
//! ψ_r(u) = Σ_k 1_{I_{k,r}}(u + r/2) / Σ_k (ℓ_k - r)_+ with
//! I_{k,r} = [-(ℓ_k - r)/2, (ℓ_k - r)/2). The kernel is symmetric about
//! u = -r/2, which is also taken as the tip for [`KernelSpec::tangential_mass`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{geometric_indices, KahanSum};
use crate::density::StepDensity;
use crate::seq::{LengthSequence, QuantizedSequence, SeqError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("no term exceeds r = {0}; the kernel is undefined")]
    ZeroNormalizer(f64),
    #[error("r = {0} is outside the quantized scale range")]
    ScaleOutOfRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Sequence(#[from] SeqError),
}

/// Kernel for one r: the distinct lengths above r with multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    r: f64,
    /// Distinct lengths above r, decreasing.
    lengths: Vec<f64>,
    /// cum[i] = multiplicity of lengths[..=i].
    cum: Vec<u64>,
    norm: f64,
}

impl KernelSpec {
    fn from_groups(r: f64, groups: impl IntoIterator<Item = (f64, u64)>) -> Result<Self, KernelError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(KernelError::InvalidParameter(format!("r = {r}")));
        }
        let mut lengths = Vec::new();
        let mut cum = Vec::new();
        let mut norm = KahanSum::new();
        let mut total = 0u64;
        for (l, m) in groups {
            if l <= r || m == 0 {
                continue;
            }
            if lengths.last() == Some(&l) {
                *cum.last_mut().unwrap() += m;
            } else {
                lengths.push(l);
                cum.push(total + m);
            }
            total += m;
            norm.add(m as f64 * (l - r));
        }
        let norm = norm.value();
        if !(norm > 0.0) {
            return Err(KernelError::ZeroNormalizer(r));
        }
        Ok(Self { r, lengths, cum, norm })
    }

    /// ψ_r for the raw sequence.
    pub fn psi(seq: &LengthSequence, r: f64) -> Result<Self, KernelError> {
        let table = seq.table(r)?;
        Self::from_groups(r, table.terms().iter().map(|&t| (t, 1)))
    }

    /// φ_r for the quantized sequence ℓ'.
    pub fn phi(q: &QuantizedSequence, r: f64) -> Result<Self, KernelError> {
        Self::from_groups(r, q.powers.iter().zip(&q.nu).map(|(&p, &n)| (p, n)))
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Σ_k (ℓ_k - r)_+.
    pub fn normalizer(&self) -> f64 {
        self.norm
    }

    /// Relevant lengths with their multiplicities.
    pub fn groups(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.lengths.iter().enumerate().map(|(i, &l)| (l, self.cum[i] - if i == 0 { 0 } else { self.cum[i - 1] }))
    }

    fn count(&self, pred: impl Fn(f64) -> bool) -> u64 {
        let i = self.lengths.partition_point(|&l| pred(l));
        if i == 0 {
            0
        } else {
            self.cum[i - 1]
        }
    }

    /// ψ_r(u) for a circle coordinate u.
    pub fn value(&self, u: f64) -> f64 {
        let r = self.r;
        // x = u + r/2 reduced to [-1/2, 1/2).
        let x = u + r / 2.0 + 0.5;
        let x = x - x.floor() - 0.5;
        let n = if x >= 0.0 { self.count(|l| l - r > 2.0 * x) } else { self.count(|l| l - r >= -2.0 * x) };
        n as f64 / self.norm
    }

    /// Kernel mass on the window of length δr centered at the tip u = -r/2.
    pub fn tangential_mass(&self, delta_frac: f64) -> Result<f64, KernelError> {
        if !(delta_frac > 0.0 && delta_frac < 1.0) {
            return Err(KernelError::InvalidParameter(format!("deltaFrac = {delta_frac}")));
        }
        let w = delta_frac * self.r;
        let mut acc = KahanSum::new();
        for (l, m) in self.groups() {
            acc.add(m as f64 * w.min(l - self.r));
        }
        Ok(acc.value() / self.norm)
    }

    /// f ∗ ψ_r(s) = ∫ f(t) ψ_r(s - t) dt, as a sum of primitive differences.
    pub fn convolve(&self, f: &StepDensity, s: f64) -> f64 {
        let g = f.function();
        let mut acc = KahanSum::new();
        for (l, m) in self.groups() {
            let piece = g.lifted(s + l / 2.0) - g.lifted(s + self.r - l / 2.0);
            acc.add(m as f64 * piece);
        }
        acc.value() / self.norm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    Case1,
    Case2,
    Case3,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::Case1 => "case1",
            CaseLabel::Case2 => "case2",
            CaseLabel::Case3 => "case3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub k: usize,
    pub label: CaseLabel,
    pub kernel_ratio: f64,
    /// ν_K / (ν_0 + … + ν_{K-1}); `None` when the denominator vanishes.
    pub lambda: Option<f64>,
    /// Case 3 bound (K/2) ln(1/b) / Σ_k ν_k (b^k - r)_+. Cases 1 and 2
    /// leave the bound m_f + ε_0 to the caller.
    pub bound: Option<f64>,
}

/// Scale index K with b^{K+1} < r ≤ b^K.
pub fn scale_index(q: &QuantizedSequence, r: f64) -> Result<usize, KernelError> {
    if !(r > 0.0 && r <= q.powers[0]) {
        return Err(KernelError::ScaleOutOfRange(r));
    }
    let k = q.powers.partition_point(|&p| p >= r) - 1;
    if k > q.max_scale() || r <= q.powers[k] * q.b {
        return Err(KernelError::ScaleOutOfRange(r));
    }
    Ok(k)
}

pub fn classify_case(q: &QuantizedSequence, r: f64, c: f64, delta: f64) -> Result<CaseReport, KernelError> {
    if !(c > q.b && c < 1.0) {
        return Err(KernelError::InvalidParameter(format!("c = {c}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(KernelError::InvalidParameter(format!("delta = {delta}")));
    }
    let k = scale_index(q, r)?;
    let bk = q.powers[k];
    let kernel_ratio = q.kernel_ratio(k)?;
    let lambda = q.lambda(k).ok();
    let (label, bound) = if r <= c * bk {
        (CaseLabel::Case1, None)
    } else if kernel_ratio <= delta {
        (CaseLabel::Case2, None)
    } else {
        let mut denom = KahanSum::new();
        for (&p, &n) in q.powers.iter().zip(&q.nu) {
            denom.add(n as f64 * (p - r).max(0.0));
        }
        let num = k as f64 / 2.0 * (1.0 / q.b).ln();
        (CaseLabel::Case3, Some(num / denom.value()))
    };
    Ok(CaseReport { k, label, kernel_ratio, lambda, bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L11Report {
    /// (n, m ℓ_n / L_n) with m = n - n0 + 1 terms summed.
    pub trajectory: Vec<(u64, f64)>,
    /// Max over the second half of the samples.
    pub tail_max: f64,
}

/// Trajectory of m ℓ_n / L_n, where m counts the terms in L_n.
pub fn l11_statistic(seq: &LengthSequence, horizon: u64) -> Result<L11Report, KernelError> {
    let n0 = seq.first();
    let last = seq.last().map_or(horizon, |l| l.min(horizon));
    if last < n0 + 1 {
        return Err(SeqError::InvalidHorizon(horizon).into());
    }
    let trajectory: Vec<(u64, f64)> = geometric_indices(n0, last, 20)
        .into_iter()
        .map(|n| {
            let t = seq.term(n).unwrap_or(0.0);
            (n, (n - n0 + 1) as f64 * t / seq.partial_sum(n))
        })
        .collect();
    let half = trajectory.len() / 2;
    let tail_max = trajectory[half..].iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(L11Report { trajectory, tail_max })
}
