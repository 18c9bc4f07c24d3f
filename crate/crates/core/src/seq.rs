//! Length sequences ℓ_n and the scalar criteria computed from them.
//!
//! Every sequence has a first index `n0`: the smallest index from which the
//! terms lie in (0, 1) and are non-increasing. Prefix sums start there, so
//! `L_n = ℓ_{n0} + … + ℓ_n`.

use std::fmt;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{geometric_indices, log_add_exp, ls_slope, Classification, KahanSum};

/// Prefix sums beyond this many terms use an Euler-Maclaurin tail.
const CACHE_LIMIT: u64 = 1 << 22;
/// Largest table handed out by [`LengthSequence::table`].
const TABLE_LIMIT: u64 = 50_000_000;
/// Margin around -1 for the Shepp series slope test.
pub const SERIES_MARGIN: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeqError {
    #[error("sequence increases between n = {0} and n = {0}+1")]
    NonMonotone(u64),
    #[error("term ℓ_{n} = {value} is outside (0, 1)")]
    OutOfRange { n: u64, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("positive-part sum at r = {0} diverges")]
    Unbounded(f64),
    #[error("horizon {0} is too small")]
    InvalidHorizon(u64),
    #[error("table would hold more than {0} terms")]
    TableLimit(u64),
    #[error("scale {0} is undefined for this quantization")]
    UndefinedScale(usize),
    #[error("no index in the Lambda set up to the horizon")]
    EmptyLambda,
    #[error("no block found for k = {0} within the index budget")]
    HorizonExceeded(u32),
    #[error("window {0} cannot be hit by the block scale")]
    ScaleMissed(usize),
}

/// Serializable rule descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rule {
    /// ℓ_n = c/n.
    Harmonic {
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<u64>,
    },
    /// ℓ_n = (1/m)(1/n - β/(n ln n)).
    SheppCritical { m: f64, beta: f64 },
    /// Block k repeats value b_k for n_k indices. Starts at n = 1.
    BlockConstant { blocks: Vec<(u64, f64)> },
    /// Finite list starting at n = 1.
    Explicit { values: Vec<f64> },
}

#[derive(Clone)]
enum Form {
    Harmonic { c: f64 },
    Shepp { m: f64, beta: f64 },
    Blocks { ends: Vec<u64>, values: Vec<f64>, sums: Vec<f64> },
    Explicit { values: Vec<f64>, sums: Vec<f64> },
}

#[derive(Default)]
struct Prefix {
    sums: Vec<f64>,
    acc: KahanSum,
}

pub struct LengthSequence {
    rule: Rule,
    first: u64,
    form: Form,
    cache: RwLock<Prefix>,
}

impl Clone for LengthSequence {
    fn clone(&self) -> Self {
        Self { rule: self.rule.clone(), first: self.first, form: self.form.clone(), cache: RwLock::default() }
    }
}

impl fmt::Debug for LengthSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LengthSequence").field("rule", &self.rule).field("first", &self.first).finish()
    }
}

fn shepp_at(m: f64, beta: f64, x: f64) -> f64 {
    (1.0 / x - beta / (x * x.ln())) / m
}

fn check_term(n: u64, value: f64) -> Result<(), SeqError> {
    if value.is_finite() && value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(SeqError::OutOfRange { n, value })
    }
}

impl LengthSequence {
    pub fn new(rule: Rule) -> Result<Self, SeqError> {
        let (first, form) = match &rule {
            Rule::Harmonic { c, start } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(SeqError::InvalidParameter(format!("harmonic c = {c}")));
                }
                let min_start = c.floor() as u64 + 1;
                let first = match start {
                    Some(s) => {
                        check_term(*s, c / *s as f64)?;
                        (*s).max(1)
                    }
                    None => min_start,
                };
                (first, Form::Harmonic { c: *c })
            }
            Rule::SheppCritical { m, beta } => {
                if !(m.is_finite() && *m > 0.0 && *m <= 1.0) {
                    return Err(SeqError::InvalidParameter(format!("shepp_critical m = {m}")));
                }
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err(SeqError::InvalidParameter(format!("shepp_critical beta = {beta}")));
                }
                (shepp_first(*m, *beta), Form::Shepp { m: *m, beta: *beta })
            }
            Rule::BlockConstant { blocks } => {
                if blocks.is_empty() {
                    return Err(SeqError::InvalidParameter("block_constant needs a block".into()));
                }
                let mut ends = Vec::with_capacity(blocks.len());
                let mut values = Vec::with_capacity(blocks.len());
                let mut sums = Vec::with_capacity(blocks.len());
                let mut end = 0u64;
                let mut acc = KahanSum::new();
                for (i, &(count, b)) in blocks.iter().enumerate() {
                    if count == 0 {
                        return Err(SeqError::InvalidParameter(format!("block {i} is empty")));
                    }
                    check_term(end + 1, b)?;
                    if let Some(&prev) = values.last() {
                        if b > prev {
                            return Err(SeqError::NonMonotone(end));
                        }
                    }
                    end = end
                        .checked_add(count)
                        .ok_or_else(|| SeqError::InvalidParameter("block counts overflow".into()))?;
                    acc.add(count as f64 * b);
                    ends.push(end);
                    values.push(b);
                    sums.push(acc.value());
                }
                (1, Form::Blocks { ends, values, sums })
            }
            Rule::Explicit { values } => {
                if values.is_empty() {
                    return Err(SeqError::InvalidParameter("explicit sequence is empty".into()));
                }
                let mut acc = KahanSum::new();
                let mut sums = Vec::with_capacity(values.len());
                for (i, &v) in values.iter().enumerate() {
                    check_term(i as u64 + 1, v)?;
                    if i > 0 && v > values[i - 1] {
                        return Err(SeqError::NonMonotone(i as u64));
                    }
                    acc.add(v);
                    sums.push(acc.value());
                }
                (1, Form::Explicit { values: values.clone(), sums })
            }
        };
        Ok(Self { rule, first, form, cache: RwLock::default() })
    }

    pub fn harmonic(c: f64) -> Result<Self, SeqError> {
        Self::new(Rule::Harmonic { c, start: None })
    }

    pub fn harmonic_from(c: f64, start: u64) -> Result<Self, SeqError> {
        Self::new(Rule::Harmonic { c, start: Some(start) })
    }

    pub fn shepp_critical(m: f64, beta: f64) -> Result<Self, SeqError> {
        Self::new(Rule::SheppCritical { m, beta })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self, SeqError> {
        Self::new(Rule::Explicit { values })
    }

    pub fn block_constant(blocks: Vec<(u64, f64)>) -> Result<Self, SeqError> {
        Self::new(Rule::BlockConstant { blocks })
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    /// First index n0.
    pub fn first(&self) -> u64 {
        self.first
    }

    /// Last index of a finite sequence.
    pub fn last(&self) -> Option<u64> {
        match &self.form {
            Form::Harmonic { .. } | Form::Shepp { .. } => None,
            Form::Blocks { ends, .. } => ends.last().copied(),
            Form::Explicit { values, .. } => Some(values.len() as u64),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.last().is_some()
    }

    /// The rule's closed form at any real n ≥ 1, ignoring the first index.
    pub fn closed_form(&self, n: f64) -> Option<f64> {
        match self.form {
            Form::Harmonic { c } => Some(c / n),
            Form::Shepp { m, beta } => Some(shepp_at(m, beta, n)),
            _ => None,
        }
    }

    /// ℓ_n, or `None` outside `[first, last]`.
    pub fn term(&self, n: u64) -> Option<f64> {
        if n < self.first {
            return None;
        }
        match &self.form {
            Form::Harmonic { c } => Some(c / n as f64),
            Form::Shepp { m, beta } => Some(shepp_at(*m, *beta, n as f64)),
            Form::Blocks { ends, values, .. } => {
                let i = ends.partition_point(|&e| e < n);
                values.get(i).copied()
            }
            Form::Explicit { values, .. } => values.get(n as usize - 1).copied(),
        }
    }

    /// Iterator over (n, ℓ_n) for n in `[from, to]` clipped to the sequence.
    pub fn terms(&self, from: u64, to: u64) -> Terms<'_> {
        let from = from.max(self.first);
        let to = match self.last() {
            Some(l) => to.min(l),
            None => to,
        };
        Terms { seq: self, n: from, end: to, block: 0 }
    }

    /// L_n = ℓ_{n0} + … + ℓ_n. Zero below n0, the total beyond the end of a finite sequence.
    pub fn partial_sum(&self, n: u64) -> f64 {
        if n < self.first {
            return 0.0;
        }
        match &self.form {
            Form::Harmonic { .. } | Form::Shepp { .. } => {
                let offset = n - self.first;
                if offset < CACHE_LIMIT {
                    self.cached(offset)
                } else {
                    let anchor = self.first + CACHE_LIMIT - 1;
                    self.cached(CACHE_LIMIT - 1) + self.em_tail(anchor as f64, n as f64)
                }
            }
            Form::Blocks { ends, values, sums } => {
                let i = ends.partition_point(|&e| e < n);
                if i >= ends.len() {
                    return *sums.last().unwrap();
                }
                let start = if i == 0 { 1 } else { ends[i - 1] + 1 };
                let before = if i == 0 { 0.0 } else { sums[i - 1] };
                before + (n - start + 1) as f64 * values[i]
            }
            Form::Explicit { sums, .. } => sums[(n as usize).min(sums.len()) - 1],
        }
    }

    fn cached(&self, offset: u64) -> f64 {
        {
            let guard = self.cache.read().unwrap();
            if let Some(&v) = guard.sums.get(offset as usize) {
                return v;
            }
        }
        let mut guard = self.cache.write().unwrap();
        let have = guard.sums.len() as u64;
        if offset >= have {
            let target = (offset + 1).max(2 * have).min(CACHE_LIMIT);
            guard.sums.reserve((target - have) as usize);
            for i in have..target {
                let n = self.first + i;
                let t = self.term(n).expect("closed-form term");
                guard.acc.add(t);
                let v = guard.acc.value();
                guard.sums.push(v);
            }
        }
        guard.sums[offset as usize]
    }

    /// Σ_{k=a+1}^{b} ℓ_k by Euler-Maclaurin with two correction terms.
    fn em_tail(&self, a: f64, b: f64) -> f64 {
        match self.form {
            Form::Harmonic { c } => {
                let f = |x: f64| c / x;
                let df = |x: f64| -c / (x * x);
                c * (b / a).ln() + (f(b) - f(a)) / 2.0 + (df(b) - df(a)) / 12.0
            }
            Form::Shepp { m, beta } => {
                let anti = |x: f64| (x.ln() - beta * x.ln().ln()) / m;
                let f = |x: f64| shepp_at(m, beta, x);
                let df = |x: f64| {
                    let l = x.ln();
                    (-1.0 / (x * x) + beta * (l + 1.0) / (x * l).powi(2)) / m
                };
                anti(b) - anti(a) + (f(b) - f(a)) / 2.0 + (df(b) - df(a)) / 12.0
            }
            _ => unreachable!("tail only used for closed forms"),
        }
    }

    /// Number of indices with ℓ_n > r. `None` when infinite.
    pub fn count_above(&self, r: f64) -> Option<u64> {
        self.last_above(r).map(|n| n + 1 - self.first).or_else(|| {
            if r <= 0.0 && !self.is_finite() {
                None
            } else {
                Some(0)
            }
        })
    }

    /// n*(r) = max{n : ℓ_n > r}. `None` if no term exceeds r or if infinitely many do.
    pub fn last_above(&self, r: f64) -> Option<u64> {
        let first = self.first;
        let above = |n: u64| self.term(n).is_some_and(|t| t > r);
        if !above(first) {
            return None;
        }
        match &self.form {
            Form::Harmonic { c } => {
                if r <= 0.0 {
                    return None;
                }
                let mut n = ((c / r).ceil() as u64).saturating_sub(1).max(first);
                while above(n + 1) {
                    n += 1;
                }
                while n > first && !above(n) {
                    n -= 1;
                }
                Some(n)
            }
            Form::Shepp { .. } => {
                if r <= 0.0 {
                    return None;
                }
                let mut lo = first;
                let mut hi = first.max(2) * 2;
                while above(hi) {
                    lo = hi;
                    hi = hi.checked_mul(2)?;
                }
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if above(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(lo)
            }
            Form::Blocks { ends, values, .. } => {
                let i = values.partition_point(|&v| v > r);
                Some(ends[i - 1])
            }
            Form::Explicit { values, .. } => Some(values.partition_point(|&v| v > r) as u64),
        }
    }

    /// Σ_n (ℓ_n - r)_+ via n*(r) and the prefix sums.
    pub fn positive_part_sum(&self, r: f64) -> Result<f64, SeqError> {
        if !(r >= 0.0) {
            return Err(SeqError::InvalidParameter(format!("r = {r}")));
        }
        if r == 0.0 {
            return match self.last() {
                Some(l) => Ok(self.partial_sum(l)),
                None => Err(SeqError::Unbounded(r)),
            };
        }
        match self.last_above(r) {
            None => Ok(0.0),
            Some(n) => Ok((self.partial_sum(n) - (n + 1 - self.first) as f64 * r).max(0.0)),
        }
    }

    /// Snapshot of all terms above `r_min` with their prefix sums.
    pub fn table(&self, r_min: f64) -> Result<PrefixTable, SeqError> {
        let count = match self.count_above(r_min) {
            Some(c) => c,
            None => return Err(SeqError::Unbounded(r_min)),
        };
        if count > TABLE_LIMIT {
            return Err(SeqError::TableLimit(TABLE_LIMIT));
        }
        let mut terms = Vec::with_capacity(count as usize);
        let mut prefix = Vec::with_capacity(count as usize);
        let mut acc = KahanSum::new();
        for (_, t) in self.terms(self.first, self.first + count.max(1) - 1).take(count as usize) {
            acc.add(t);
            terms.push(t);
            prefix.push(acc.value());
        }
        Ok(PrefixTable { terms, prefix, r_min })
    }

    /// Estimate of D = limsup L_n / ln n at the horizon.
    pub fn hawkes_d(&self, horizon: u64) -> Result<HawkesReport, SeqError> {
        if horizon < 3 {
            return Err(SeqError::InvalidHorizon(horizon));
        }
        let lo = self.first.max(2);
        if lo > horizon {
            return Err(SeqError::InvalidHorizon(horizon));
        }
        let samples = geometric_indices(lo, horizon, 20);
        let mut trajectory = Vec::with_capacity(samples.len());
        let mut stream = self.stream();
        for &n in &samples {
            let l = stream.advance_to(n);
            trajectory.push((n, l / (n as f64).ln()));
        }
        let running_max = trajectory.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        Ok(HawkesReport { horizon, running_max, trajectory })
    }

    /// Partial sums of Σ n^{-2} exp(a L_n) and a slope-based divergence label.
    pub fn shepp_series(&self, a: f64, horizon: u64) -> Result<SeriesReport, SeqError> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(SeqError::InvalidParameter(format!("a = {a}")));
        }
        let lo = self.first.max(2);
        let fit_lo = horizon / 100;
        if fit_lo < lo {
            return Err(SeqError::InvalidHorizon(horizon));
        }
        let fit: Vec<u64> = geometric_indices(fit_lo, horizon, 20);
        let marks: Vec<u64> = geometric_indices(lo, horizon, 10);
        let mut log_sum = f64::NEG_INFINITY;
        let mut partials = Vec::with_capacity(marks.len());
        let mut xs = Vec::with_capacity(fit.len());
        let mut ys = Vec::with_capacity(fit.len());
        let (mut mi, mut fi) = (0, 0);
        let mut stream = self.stream();
        for n in lo..=horizon {
            let l = stream.advance_to(n);
            let log_term = a * l - 2.0 * (n as f64).ln();
            log_sum = log_add_exp(log_sum, log_term);
            if mi < marks.len() && marks[mi] == n {
                partials.push((n, log_sum));
                mi += 1;
            }
            if fi < fit.len() && fit[fi] == n {
                xs.push((n as f64).ln());
                ys.push(log_term);
                fi += 1;
            }
        }
        let slope = ls_slope(&xs, &ys);
        let classification = Classification::from_slope(slope, -1.0 + SERIES_MARGIN, -1.0 - SERIES_MARGIN);
        Ok(SeriesReport { a, horizon, log_partial_sum: log_sum, log_partials: partials, slope, classification })
    }

    /// Base-b quantization of the terms up to `horizon`.
    pub fn quantize(&self, b: f64, horizon: u64) -> Result<QuantizedSequence, SeqError> {
        if !(b > 0.0 && b < 1.0) {
            return Err(SeqError::InvalidParameter(format!("b = {b}")));
        }
        let horizon = match self.last() {
            Some(l) => horizon.min(l),
            None => horizon,
        };
        if horizon < self.first {
            return Err(SeqError::InvalidHorizon(horizon));
        }
        let mut powers = vec![1.0, b];
        let mut nu: Vec<u64> = vec![0];
        let mut q = 0usize;
        for (_, t) in self.terms(self.first, horizon) {
            while t <= powers[q + 1] {
                q += 1;
                if powers.len() < q + 2 {
                    let next = powers[q] * b;
                    powers.push(next);
                }
                nu.push(0);
            }
            nu[q] += 1;
        }
        let mut block_ends = Vec::with_capacity(nu.len());
        let mut end = self.first - 1;
        for &v in &nu {
            end += v;
            block_ends.push(end);
        }
        Ok(QuantizedSequence { b, first: self.first, horizon, nu, powers, block_ends })
    }

    /// Indices where u_n = exp(L_n)/n reaches a new running maximum and ℓ_n > 1/(2n).
    pub fn lambda_set(&self, horizon: u64) -> Result<Vec<u64>, SeqError> {
        let mut out = Vec::new();
        let mut best = f64::NEG_INFINITY;
        let mut acc = KahanSum::new();
        for (n, t) in self.terms(self.first, horizon) {
            acc.add(t);
            let log_u = acc.value() - (n as f64).ln();
            if log_u >= best {
                best = log_u;
                if t > 0.5 / n as f64 {
                    out.push(n);
                }
            }
        }
        if out.is_empty() {
            Err(SeqError::EmptyLambda)
        } else {
            Ok(out)
        }
    }

    /// One block per k in `1..=k_max`, each starting at or after `start_gaps[k-1]`.
    pub fn find_blocks(&self, k_max: u32, start_gaps: &[u64], budget: u64) -> Result<BlockSchedule, SeqError> {
        let ks: Vec<u32> = (1..=k_max).collect();
        self.scan_blocks(&ks, start_gaps, budget)
    }

    /// A single block at level k with n1 ≥ `n1_min`.
    pub fn find_block(&self, k: u32, n1_min: u64, budget: u64) -> Result<Block, SeqError> {
        Ok(self.scan_blocks(&[k], &[n1_min], budget)?.blocks[0])
    }

    fn scan_blocks(&self, ks: &[u32], start_gaps: &[u64], budget: u64) -> Result<BlockSchedule, SeqError> {
        if start_gaps.len() < ks.len() {
            return Err(SeqError::InvalidParameter("one start gap per level is required".into()));
        }
        let mut blocks = Vec::with_capacity(ks.len());
        if ks.is_empty() {
            return Ok(BlockSchedule { blocks });
        }
        let end = match self.last() {
            Some(l) => budget.min(l),
            None => budget,
        };
        let mut best = f64::NEG_INFINITY;
        let mut acc = KahanSum::new();
        let mut prev_l = 0.0;
        let mut i = 0usize;
        let mut n1 = start_gaps[0].max(self.first);
        let mut head: Option<(f64, f64)> = None;
        for (n, t) in self.terms(self.first, end) {
            acc.add(t);
            let l = acc.value();
            let log_u = l - (n as f64).ln();
            let in_lambda = log_u >= best;
            if in_lambda {
                best = log_u;
            }
            match head {
                None => {
                    if n == n1 {
                        head = Some((l, prev_l));
                    }
                }
                Some((h, base)) => {
                    let ratio = h / (l - base);
                    let bound = 0.5f64.powi(ks[i] as i32);
                    if in_lambda && t > 0.5 / n as f64 && ratio < bound {
                        blocks.push(Block { k: ks[i], n1, n2: n, ratio });
                        i += 1;
                        if i == ks.len() {
                            return Ok(BlockSchedule { blocks });
                        }
                        n1 = start_gaps[i].max(n + 1);
                        head = None;
                    }
                }
            }
            prev_l = l;
        }
        Err(SeqError::HorizonExceeded(ks[i]))
    }

    fn stream(&self) -> Stream<'_> {
        Stream { seq: self, n: self.first - 1, acc: KahanSum::new() }
    }
}

fn shepp_first(m: f64, beta: f64) -> u64 {
    // x ↦ (1 - β/ln x)/x decreases once ln x ≥ (β + √(β² + 4β))/2.
    let lstar = (beta + (beta * beta + 4.0 * beta).sqrt()) / 2.0;
    let mut n = (lstar.exp().floor() as u64).max(2);
    let at = |n: u64| shepp_at(m, beta, n as f64);
    while !(at(n) >= at(n + 1) && at(n) > 0.0 && at(n) < 1.0) {
        n += 1;
    }
    n
}

/// Iterator returned by [`LengthSequence::terms`].
pub struct Terms<'a> {
    seq: &'a LengthSequence,
    n: u64,
    end: u64,
    block: usize,
}

impl Iterator for Terms<'_> {
    type Item = (u64, f64);

    #[inline]
    fn next(&mut self) -> Option<(u64, f64)> {
        if self.n > self.end {
            return None;
        }
        let n = self.n;
        self.n += 1;
        let t = match &self.seq.form {
            Form::Harmonic { c } => c / n as f64,
            Form::Shepp { m, beta } => shepp_at(*m, *beta, n as f64),
            Form::Blocks { ends, values, .. } => {
                while ends[self.block] < n {
                    self.block += 1;
                }
                values[self.block]
            }
            Form::Explicit { values, .. } => values[n as usize - 1],
        };
        Some((n, t))
    }
}

/// Running prefix sum that only moves forward.
struct Stream<'a> {
    seq: &'a LengthSequence,
    n: u64,
    acc: KahanSum,
}

impl Stream<'_> {
    fn advance_to(&mut self, n: u64) -> f64 {
        if n > self.n {
            for (_, t) in self.seq.terms(self.n + 1, n) {
                self.acc.add(t);
            }
            self.n = n;
        }
        self.acc.value()
    }
}

/// Lock-free snapshot of the terms above a threshold.
#[derive(Debug, Clone)]
pub struct PrefixTable {
    terms: Vec<f64>,
    prefix: Vec<f64>,
    r_min: f64,
}

impl PrefixTable {
    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[f64] {
        &self.terms
    }

    /// Σ (ℓ_n - d)_+ for d ≥ r_min.
    #[inline]
    pub fn positive_part_sum(&self, d: f64) -> f64 {
        debug_assert!(d >= self.r_min || self.terms.is_empty());
        let k = self.terms.partition_point(|&t| t > d);
        if k == 0 {
            0.0
        } else {
            (self.prefix[k - 1] - k as f64 * d).max(0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesReport {
    pub horizon: u64,
    /// Lower estimate of D at the horizon.
    pub running_max: f64,
    pub trajectory: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub a: f64,
    pub horizon: u64,
    /// ln S_N.
    pub log_partial_sum: f64,
    /// (n, ln S_n) at geometric marks.
    pub log_partials: Vec<(u64, f64)>,
    /// Slope of ln term_n against ln n over [N/100, N].
    pub slope: f64,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedSequence {
    pub b: f64,
    pub first: u64,
    pub horizon: u64,
    pub nu: Vec<u64>,
    /// powers[q] = b^q by repeated multiplication.
    pub powers: Vec<f64>,
    /// Last index of bucket q.
    pub block_ends: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationStats {
    pub lambda: f64,
    pub kernel_ratio: f64,
    pub nu_weight: f64,
}

impl QuantizedSequence {
    /// Largest populated scale index.
    pub fn max_scale(&self) -> usize {
        self.nu.len() - 1
    }

    pub fn power(&self, q: usize) -> f64 {
        self.powers[q]
    }

    /// ℓ'_n = b^q for ℓ_n in (b^{q+1}, b^q].
    pub fn l_prime(&self, n: u64) -> Option<f64> {
        if n < self.first || n > self.horizon {
            return None;
        }
        let q = self.block_ends.partition_point(|&e| e < n);
        Some(self.powers[q])
    }

    /// (ν_0 + … + ν_K) b^K / Σ_{k ≤ K} ν_k b^k.
    pub fn kernel_ratio(&self, k: usize) -> Result<f64, SeqError> {
        if k >= self.nu.len() {
            return Err(SeqError::UndefinedScale(k));
        }
        let head: u64 = self.nu[..=k].iter().sum();
        let total: f64 = self.nu[..=k].iter().zip(&self.powers).map(|(&v, &p)| v as f64 * p).sum();
        Ok(head as f64 * self.powers[k] / total)
    }

    /// ν_K / (ν_0 + … + ν_{K-1}).
    pub fn lambda(&self, k: usize) -> Result<f64, SeqError> {
        if k >= self.nu.len() {
            return Err(SeqError::UndefinedScale(k));
        }
        let below: u64 = self.nu[..k].iter().sum();
        if below == 0 {
            return Err(SeqError::UndefinedScale(k));
        }
        Ok(self.nu[k] as f64 / below as f64)
    }

    pub fn concentration_stats(&self, k: usize) -> Result<ConcentrationStats, SeqError> {
        Ok(ConcentrationStats {
            lambda: self.lambda(k)?,
            kernel_ratio: self.kernel_ratio(k)?,
            nu_weight: self.nu[k] as f64 * self.powers[k],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub k: u32,
    pub n1: u64,
    pub n2: u64,
    /// L_{n1} / (L_{n2} - L_{n1-1}).
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub blocks: Vec<Block>,
}

/// Block-constant sequence together with the indices it was built from.
#[derive(Debug, Clone)]
pub struct Theorem2Sequence {
    pub sequence: LengthSequence,
    /// Block lengths n_k.
    pub counts: Vec<u64>,
    /// Block values b_k.
    pub values: Vec<f64>,
}

/// Block sequence with b_k = ((1-ε_k)/m_f) ln n_k / n_k landing in each window.
pub fn theorem2_sequence(
    m_f: f64,
    epsilons: &[f64],
    windows: &[(f64, f64)],
    growth: f64,
) -> Result<Theorem2Sequence, SeqError> {
    if !(m_f > 0.0) {
        return Err(SeqError::InvalidParameter(format!("m_f = {m_f}")));
    }
    if epsilons.len() != windows.len() || windows.is_empty() {
        return Err(SeqError::InvalidParameter("one epsilon per window is required".into()));
    }
    if !(growth > 1.0) {
        return Err(SeqError::InvalidParameter(format!("growth factor = {growth}")));
    }
    let h = |x: f64| x.ln() / (m_f * x);
    let mut counts = Vec::with_capacity(windows.len());
    let mut values = Vec::with_capacity(windows.len());
    let mut log_product = 0.0;
    for (j, (&(u, v), &eps)) in windows.iter().zip(epsilons).enumerate() {
        if !(0.0 < u && u <= v && eps > 0.0 && eps < 1.0) {
            return Err(SeqError::InvalidParameter(format!("window {j}")));
        }
        let upper = u / (1.0 - eps);
        let lower = v / (1.0 - eps);
        // h decreases on [3, ∞): n_lo is the first n with h(n) ≤ lower, n_hi the last with h(n) ≥ upper.
        let n_lo = first_at_most(&h, lower);
        let n_hi = first_at_most(&h, upper.next_down()).saturating_sub(1);
        let mut n = n_lo;
        if let Some(&prev) = counts.last() {
            n = n.max((prev as f64 * growth).ceil() as u64);
        }
        while log_product > (1.0 - eps / 2.0) * (n as f64).ln() {
            n = (n as f64 * growth).ceil() as u64;
            if n > n_hi {
                break;
            }
        }
        if n > n_hi || n < 3 {
            return Err(SeqError::ScaleMissed(j));
        }
        let b = (1.0 - eps) * h(n as f64);
        if b >= 1.0 {
            return Err(SeqError::ScaleMissed(j));
        }
        log_product += (1.0 - eps) * (n as f64).ln();
        counts.push(n);
        values.push(b);
    }
    let sequence = LengthSequence::block_constant(counts.iter().copied().zip(values.iter().copied()).collect())?;
    Ok(Theorem2Sequence { sequence, counts, values })
}

/// Smallest integer n ≥ 3 with h(n) ≤ y, for h decreasing on [3, ∞).
fn first_at_most(h: &impl Fn(f64) -> f64, y: f64) -> u64 {
    let mut lo = 3u64;
    if h(lo as f64) <= y {
        return lo;
    }
    let mut hi = 6u64;
    while h(hi as f64) > y {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi == u64::MAX {
            return hi;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if h(mid as f64) <= y {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_pps(values: &[f64], r: f64) -> f64 {
        values.iter().map(|&l| (l - r).max(0.0)).sum()
    }

    #[test]
    fn harmonic_term_is_closed_form() {
        let s = LengthSequence::harmonic(0.5).unwrap();
        assert_eq!(s.first(), 1);
        assert_eq!(s.term(4), Some(0.125));
        let s = LengthSequence::harmonic(1.2).unwrap();
        assert_eq!(s.first(), 2);
        assert_eq!(s.term(1), None);
    }

    #[test]
    fn shepp_closed_form_at_eight() {
        // 1/8 - 2/(8 ln 8) at 30 digits.
        #[allow(clippy::excessive_precision)]
        let oracle = 0.004_775_413_259_253_049_386_672_943;
        let s = LengthSequence::shepp_critical(1.0, 2.0).unwrap();
        let v = s.closed_form(8.0).unwrap();
        assert!((v - oracle).abs() < 1e-17);
        // n = 8 lies before the monotone range, so it is not a term of the sequence.
        assert!(s.first() > 8 && s.term(8).is_none());
    }

    #[test]
    fn shepp_first_indices() {
        let firsts: Vec<u64> =
            [0.5, 1.0, 2.0, 3.0].iter().map(|&b| LengthSequence::shepp_critical(1.0, b).unwrap().first()).collect();
        assert_eq!(firsts, vec![3, 5, 15, 44]);
        for beta in [0.5, 1.0, 2.0, 3.0] {
            let s = LengthSequence::shepp_critical(0.5, beta).unwrap();
            for n in s.first()..s.first() + 2000 {
                let (a, b) = (s.term(n).unwrap(), s.term(n + 1).unwrap());
                assert!(a > 0.0 && a < 1.0 && b <= a);
            }
        }
    }

    #[test]
    fn explicit_validation() {
        assert!(LengthSequence::explicit(vec![0.5, 0.3, 0.3, 0.1]).is_ok());
        assert_eq!(LengthSequence::explicit(vec![0.3, 0.5]).unwrap_err(), SeqError::NonMonotone(1));
        assert!(matches!(LengthSequence::explicit(vec![1.0]), Err(SeqError::OutOfRange { .. })));
        assert!(matches!(LengthSequence::explicit(vec![0.5, 0.0]), Err(SeqError::OutOfRange { .. })));
        assert!(matches!(LengthSequence::harmonic_from(2.0, 2), Err(SeqError::OutOfRange { .. })));
        assert!(LengthSequence::shepp_critical(1.5, 1.0).is_err());
        assert!(LengthSequence::shepp_critical(1.0, 0.0).is_err());
    }

    #[test]
    fn rule_json_round_trip() {
        let text = r#"{"rule":"shepp_critical","m":1.0,"beta":2.0}"#;
        let rule: Rule = serde_json::from_str(text).unwrap();
        assert_eq!(rule, Rule::SheppCritical { m: 1.0, beta: 2.0 });
        let rule: Rule = serde_json::from_str(r#"{"rule":"block_constant","blocks":[[3,0.5],[2,0.25]]}"#).unwrap();
        assert_eq!(rule, Rule::BlockConstant { blocks: vec![(3, 0.5), (2, 0.25)] });
        assert!(serde_json::from_str::<Rule>(r#"{"rule":"harmonic","c":1.2,"zzz":1}"#).is_err());
        let back: Rule = serde_json::from_str(&serde_json::to_string(&rule).unwrap()).unwrap();
        assert_eq!(back, rule);
    }

    #[test]
    fn positive_part_examples() {
        let s = LengthSequence::explicit(vec![0.5, 0.3, 0.2]).unwrap();
        assert!((s.positive_part_sum(0.25).unwrap() - 0.30).abs() < 1e-15);
        assert_eq!(s.positive_part_sum(0.6).unwrap(), 0.0);
        assert!((s.positive_part_sum(0.0).unwrap() - 1.0).abs() < 1e-15);
        let h = LengthSequence::harmonic(1.2).unwrap();
        assert_eq!(h.positive_part_sum(0.0), Err(SeqError::Unbounded(0.0)));
    }

    #[test]
    fn harmonic_positive_part_matches_brute_force() {
        let s = LengthSequence::harmonic(1.3).unwrap();
        let r = 1.3 / 12_345.5;
        let brute: f64 = (2..=12_345u64).map(|n| 1.3 / n as f64 - r).sum();
        assert_eq!(s.last_above(r), Some(12_345));
        assert!((s.positive_part_sum(r).unwrap() - brute).abs() < 1e-11);
    }

    #[test]
    fn euler_maclaurin_tail_matches_direct_sum() {
        for s in [LengthSequence::harmonic(1.1).unwrap(), LengthSequence::shepp_critical(1.0, 2.0).unwrap()] {
            let n = s.first() + CACHE_LIMIT + 1_000_000;
            let mut acc = KahanSum::new();
            for (_, t) in s.terms(s.first(), n) {
                acc.add(t);
            }
            let rel = (s.partial_sum(n) - acc.value()).abs() / acc.value();
            assert!(rel < 1e-12, "rel {rel}");
        }
    }

    #[test]
    fn block_constant_partial_sums() {
        let s = LengthSequence::block_constant(vec![(3, 0.5), (2, 0.25)]).unwrap();
        let direct = [0.5, 1.0, 1.5, 1.75, 2.0];
        for (i, &d) in direct.iter().enumerate() {
            assert!((s.partial_sum(i as u64 + 1) - d).abs() < 1e-15);
        }
        assert_eq!(s.partial_sum(100), 2.0);
        assert_eq!(s.term(4), Some(0.25));
        assert_eq!(s.term(6), None);
        assert_eq!(s.last_above(0.3), Some(3));
        let collected: Vec<f64> = s.terms(1, 10).map(|p| p.1).collect();
        assert_eq!(collected, vec![0.5, 0.5, 0.5, 0.25, 0.25]);
    }

    #[test]
    fn hawkes_harmonic_oracle() {
        // Oracle: c (H_N - 1) / ln N with H_N summed directly; the first term is not part of L_n.
        let c = 1.2;
        let n_max = 10_000_000u64;
        let s = LengthSequence::harmonic(c).unwrap();
        let rep = s.hawkes_d(n_max).unwrap();
        let mut h = 0.0;
        for n in (2..=n_max).rev() {
            h += 1.0 / n as f64;
        }
        let last = rep.trajectory.last().unwrap();
        assert_eq!(last.0, n_max);
        assert!((last.1 - c * h / (n_max as f64).ln()).abs() < 1e-10);
        // L_n / ln n increases to c from below, so the running max is the last sample.
        assert!(rep.running_max <= c && rep.running_max > c - 2.0 / (n_max as f64).ln());
    }

    #[test]
    fn hawkes_finite_sequence_decays() {
        let s = LengthSequence::explicit(vec![0.5]).unwrap();
        let rep = s.hawkes_d(1_000_000).unwrap();
        let last = rep.trajectory.last().unwrap().1;
        assert!((last - 0.5 / (1e6f64).ln()).abs() < 1e-12);
        assert!(s.hawkes_d(2).is_err());
    }

    #[test]
    fn hawkes_shepp_oracle() {
        let s = LengthSequence::shepp_critical(1.0, 2.0).unwrap();
        let n_max = 1_000_000u64;
        let rep = s.hawkes_d(n_max).unwrap();
        let mut l = 0.0;
        for n in s.first()..=n_max {
            let x = n as f64;
            l += 1.0 / x - 2.0 / (x * x.ln());
        }
        let last = rep.trajectory.last().unwrap().1;
        assert!((last - l / (n_max as f64).ln()).abs() < 1e-10);
        assert!(rep.running_max < 1.0);
    }

    #[test]
    fn shepp_series_labels() {
        let n = 1_000_000;
        let d = LengthSequence::harmonic(1.2).unwrap().shepp_series(1.0, n).unwrap();
        assert_eq!(d.classification, Classification::Diverges);
        assert!((d.slope - (1.2 - 2.0)).abs() < 0.01);
        let c = LengthSequence::harmonic(0.8).unwrap().shepp_series(1.0, n).unwrap();
        assert_eq!(c.classification, Classification::Converges);
        assert!((c.slope - (0.8 - 2.0)).abs() < 0.01);
        let s = LengthSequence::shepp_critical(1.0, 2.0).unwrap().shepp_series(1.0, n).unwrap();
        assert_eq!(s.classification, Classification::Converges);
    }

    #[test]
    fn shepp_series_partial_sum_oracle() {
        // Direct evaluation of Σ n^{-2} exp(c(H_n - 1)) for c = 0.8, n from 1.
        let s = LengthSequence::harmonic(0.8).unwrap();
        let rep = s.shepp_series(1.0, 10_000).unwrap();
        let mut h = 0.0;
        let mut total = 0.0;
        for n in 1..=10_000u64 {
            h += 0.8 / n as f64;
            if n >= 2 {
                total += (h).exp() / (n as f64 * n as f64);
            }
        }
        assert!((rep.log_partial_sum - total.ln()).abs() < 1e-10);
        assert!(s.shepp_series(1.0, 50).is_err());
    }

    #[test]
    fn quantize_example() {
        let s = LengthSequence::explicit(vec![0.9, 0.6, 0.3, 0.2]).unwrap();
        let q = s.quantize(0.5, 4).unwrap();
        assert_eq!(q.nu, vec![2, 1, 1]);
        let lp: Vec<f64> = (1..=4).map(|n| q.l_prime(n).unwrap()).collect();
        assert_eq!(lp, vec![1.0, 1.0, 0.5, 0.25]);
        let q = LengthSequence::explicit(vec![0.5]).unwrap().quantize(0.5, 1).unwrap();
        assert_eq!(q.nu, vec![0, 1]);
        assert_eq!(q.l_prime(1), Some(0.5));
    }

    #[test]
    fn concentration_example() {
        let s = LengthSequence::explicit(vec![0.9, 0.6, 0.3, 0.2]).unwrap();
        let q = s.quantize(0.5, 4).unwrap();
        let st = q.concentration_stats(2).unwrap();
        assert!((st.lambda - 1.0 / 3.0).abs() < 1e-15);
        assert!((st.kernel_ratio - 1.0 / 2.75).abs() < 1e-15);
        assert_eq!(st.nu_weight, 0.25);
        // Scales above K do not enter: (2 + 1)·0.5 / (2 + 0.5).
        assert!((q.kernel_ratio(1).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(q.lambda(0), Err(SeqError::UndefinedScale(0)));
        assert!(q.kernel_ratio(9).is_err());
    }

    #[test]
    fn concentration_spike_closed_form() {
        // ν = (1, 0, …, 0, M) at K = 6.
        let b: f64 = 0.5;
        let m = 1000u64;
        let mut v = vec![0.9];
        v.extend(std::iter::repeat_n(0.01, m as usize));
        let q = LengthSequence::explicit(v).unwrap().quantize(b, 2000).unwrap();
        let k = q.max_scale();
        assert_eq!(k, 6);
        assert_eq!(q.nu[k], m);
        let bk = b.powi(k as i32);
        assert!((q.lambda(k).unwrap() - m as f64).abs() < 1e-12);
        let oracle = (1.0 + m as f64) * bk / (1.0 + m as f64 * bk);
        assert!((q.kernel_ratio(k).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn kernel_ratio_decays_for_constant_nu() {
        // Three terms per scale, b = 1/2.
        let mut v = Vec::new();
        for q in 0..30 {
            for _ in 0..3 {
                v.push(0.75 * 0.5f64.powi(q));
            }
        }
        let q = LengthSequence::explicit(v).unwrap().quantize(0.5, 1000).unwrap();
        assert!(q.nu[..30].iter().all(|&x| x == 3));
        let r10 = q.kernel_ratio(10).unwrap();
        let r25 = q.kernel_ratio(25).unwrap();
        assert!(r25 < r10 && r25 < 1e-5);
    }

    #[test]
    fn lambda_examples() {
        let s = LengthSequence::harmonic(1.2).unwrap();
        let l = s.lambda_set(100).unwrap();
        // u_2 > u_3, after which u_n increases.
        assert_eq!(l, [2].into_iter().chain(4..=100).collect::<Vec<_>>());
        let s = LengthSequence::explicit(vec![0.5; 10]).unwrap();
        let l = s.lambda_set(10).unwrap();
        assert!(l.iter().all(|&n| n >= 2 && 0.5 > 0.5 / n as f64));
        assert_eq!(l, (4..=10).collect::<Vec<_>>());
        let s = LengthSequence::harmonic(0.8).unwrap();
        let l = s.lambda_set(10_000).unwrap();
        assert_eq!(l, vec![1]);
        let s = LengthSequence::harmonic_from(0.3, 2).unwrap();
        assert_eq!(s.lambda_set(100), Err(SeqError::EmptyLambda));
    }

    #[test]
    fn lambda_running_max_brute_force() {
        let s = LengthSequence::shepp_critical(0.7, 1.0).unwrap();
        let n_max = 10_000u64;
        let got = s.lambda_set(n_max).unwrap();
        let mut l = 0.0;
        let mut us = Vec::new();
        for n in s.first()..=n_max {
            l += s.term(n).unwrap();
            us.push((n, (l - (n as f64).ln())));
        }
        for &n in &got {
            let i = (n - s.first()) as usize;
            assert!(us[..i].iter().all(|&(_, u)| us[i].1 >= u));
            assert!(s.term(n).unwrap() > 0.5 / n as f64);
        }
    }

    fn scan_oracle(s: &LengthSequence, k: u32, n1: u64) -> u64 {
        let big_l = |n: u64| -> f64 { (s.first()..=n).map(|i| s.term(i).unwrap()).sum() };
        let head = big_l(n1);
        let base = big_l(n1 - 1);
        let mut best = f64::NEG_INFINITY;
        let mut l = 0.0;
        for n in s.first().. {
            l += s.term(n).unwrap();
            let u = l - (n as f64).ln();
            let in_lambda = u >= best;
            if in_lambda {
                best = u;
            }
            if n > n1 && in_lambda && head / (l - base) < 0.5f64.powi(k as i32) {
                return n;
            }
        }
        unreachable!()
    }

    #[test]
    fn find_block_matches_scan() {
        let s = LengthSequence::harmonic(1.5).unwrap();
        let b = s.find_block(1, 10, 1_000_000).unwrap();
        assert_eq!(b.n2, scan_oracle(&s, 1, 10));
        assert!(b.ratio < 0.5);
        let b0 = s.find_block(0, 10, 1_000_000).unwrap();
        assert_eq!(b0.n2, scan_oracle(&s, 0, 10));
        assert!(b0.ratio < 1.0);
        // For c = 1, u_n = exp(H_n - 1)/n decreases, so Lambda is just {n0}.
        let one = LengthSequence::harmonic(1.0).unwrap();
        assert_eq!(one.lambda_set(100_000).unwrap(), vec![2]);
        assert_eq!(one.find_block(1, 10, 1_000_000), Err(SeqError::HorizonExceeded(1)));
        let c = LengthSequence::explicit(vec![0.5, 0.25, 0.125, 0.0625]).unwrap();
        assert_eq!(c.find_block(1, 2, 1_000_000), Err(SeqError::HorizonExceeded(1)));
    }

    #[test]
    fn find_blocks_are_disjoint() {
        let s = LengthSequence::explicit(vec![0.5; 5000]).unwrap();
        let sch = s.find_blocks(3, &[20, 30, 40], 100_000).unwrap();
        assert_eq!(sch.blocks.len(), 3);
        for w in sch.blocks.windows(2) {
            assert!(w[0].n2 < w[1].n1);
        }
        for b in &sch.blocks {
            assert!(b.ratio < 0.5f64.powi(b.k as i32));
            assert!(s.term(b.n2).unwrap() > 0.5 / b.n2 as f64);
            assert_eq!(b.n2, scan_oracle(&s, b.k, b.n1));
        }
        // For c/n the second block needs n2 of order n1^5.
        let h = LengthSequence::harmonic(2.5).unwrap();
        assert_eq!(h.find_blocks(2, &[20, 30], 10_000_000), Err(SeqError::HorizonExceeded(2)));
    }

    #[test]
    fn theorem2_blocks() {
        let m_f = 0.5;
        let windows = vec![(1e-3, 1e-2), (1e-7, 1e-5), (1e-13, 1e-10)];
        let eps = vec![0.2, 0.1, 0.05];
        let t = theorem2_sequence(m_f, &eps, &windows, 10.0).unwrap();
        let mut prev = f64::INFINITY;
        let mut total_n = 0u64;
        for (i, (&n, &b)) in t.counts.iter().zip(&t.values).enumerate() {
            assert!(b <= prev);
            prev = b;
            assert!((b - (1.0 - eps[i]) / m_f * (n as f64).ln() / n as f64).abs() < 1e-15);
            assert!(b >= windows[i].0 && b <= windows[i].1);
            total_n += n;
            let ratio = t.sequence.partial_sum(total_n) / (total_n as f64).ln();
            assert!(ratio >= (1.0 - 2.0 * eps[i]) / m_f, "block {i}: {ratio}");
        }
        let one = theorem2_sequence(m_f, &[0.1], &[(1e-3, 1e-2)], 10.0).unwrap();
        assert_eq!(one.counts.len(), 1);
        assert_eq!(one.sequence.term(one.counts[0] + 1), None);
        let narrow = theorem2_sequence(m_f, &[0.1], &[(0.3, 0.3000001)], 10.0);
        assert_eq!(narrow.unwrap_err(), SeqError::ScaleMissed(0));
    }

    fn arb_values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-6f64..0.999, 1..2000).prop_map(|mut v| {
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            v
        })
    }

    fn arb_rule() -> impl Strategy<Value = Rule> {
        prop_oneof![
            (0.05f64..5.0).prop_map(|c| Rule::Harmonic { c, start: None }),
            (0.05f64..=1.0, 0.05f64..4.0).prop_map(|(m, beta)| Rule::SheppCritical { m, beta }),
            prop::collection::vec((1u64..50, 0.001f64..0.999), 1..10).prop_map(|mut b| {
                b.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap());
                Rule::BlockConstant { blocks: b }
            }),
            arb_values().prop_map(|values| Rule::Explicit { values }),
        ]
    }

    proptest! {
        #[test]
        fn monotone_for_every_rule(rule in arb_rule()) {
            let s = LengthSequence::new(rule).unwrap();
            let end = s.last().unwrap_or(s.first() + 5000);
            let mut prev = f64::INFINITY;
            for (_, t) in s.terms(s.first(), end) {
                prop_assert!(t > 0.0 && t < 1.0 && t <= prev);
                prev = t;
            }
        }

        #[test]
        fn prefix_differences_are_terms(rule in arb_rule()) {
            let s = LengthSequence::new(rule).unwrap();
            let end = s.last().unwrap_or(s.first() + 3000);
            for n in s.first()..=end {
                let d = s.partial_sum(n) - s.partial_sum(n - 1);
                let t = s.term(n).unwrap();
                prop_assert!((d - t).abs() <= 4.0 * f64::EPSILON * s.partial_sum(n).max(1.0));
            }
        }

        #[test]
        fn positive_part_agrees_with_brute_force(values in arb_values(), r in 0.0f64..1.0) {
            let s = LengthSequence::explicit(values.clone()).unwrap();
            let got = s.positive_part_sum(r).unwrap();
            let want = brute_pps(&values, r);
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1e-300) || (got - want).abs() < 1e-13);
            let table = s.table(0.0).unwrap();
            let tv = table.positive_part_sum(r);
            prop_assert!((tv - want).abs() <= 1e-12 * want.max(1e-300) || (tv - want).abs() < 1e-13);
        }

        #[test]
        fn quantization_sandwich(values in arb_values(), b in 0.05f64..0.99) {
            let s = LengthSequence::explicit(values.clone()).unwrap();
            let q = s.quantize(b, values.len() as u64).unwrap();
            prop_assert_eq!(q.nu.iter().sum::<u64>(), values.len() as u64);
            for (i, &l) in values.iter().enumerate() {
                let lp = q.l_prime(i as u64 + 1).unwrap();
                prop_assert!(b * lp <= l && l <= lp);
            }
        }
    }
}
