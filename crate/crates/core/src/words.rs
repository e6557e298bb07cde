//! Reduced words over the truncated alphabet, their image circles, the
//! contraction constants `μ` and covering sums `Σ r_w^α`.

use std::io::Write;

use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::hyperbolic::{BoundaryPoint, HalfCircle, MoebiusMap};
use crate::num::{log2_f64, BigNum, BigReal, Precision};
use crate::schottky::GeneratorFamily;

/// Default cap on the number of words one covering sum may visit.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Nonempty index sequence with `|j_m| ≥ k` and no adjacent `(j, -j)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReducedWord(Vec<i32>);

impl ReducedWord {
    pub fn new(indices: Vec<i32>, k: i32) -> Result<Self> {
        if indices.is_empty() {
            return Err(precondition("reduced words have length >= 1"));
        }
        if let Some(&j) = indices.iter().find(|&&j| j.abs() < k) {
            return Err(precondition(format!(
                "letter {j} below the alphabet bound {k}"
            )));
        }
        if indices.windows(2).any(|w| w[0] == -w[1]) {
            return Err(precondition(format!("{indices:?} is not reduced")));
        }
        Ok(ReducedWord(indices))
    }

    pub fn letters(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(j_2, …, j_n)`; `None` for a single letter.
    pub fn suffix(&self) -> Option<ReducedWord> {
        (self.0.len() > 1).then(|| ReducedWord(self.0[1..].to_vec()))
    }

    /// `(j_1, …, j_{n-1})`; `None` for a single letter.
    pub fn prefix(&self) -> Option<ReducedWord> {
        (self.0.len() > 1).then(|| ReducedWord(self.0[..self.0.len() - 1].to_vec()))
    }
}

impl std::fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(i32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// `m (m-1)^(n-1)` with `m = 2 (J_max - k + 1)`; saturates at `u128::MAX`.
pub fn word_count(k: i32, n: usize, j_max: i32) -> u128 {
    if n == 0 || j_max < k {
        return 0;
    }
    let m = 2 * u128::from((j_max - k + 1) as u32);
    let mut c = m;
    for _ in 1..n {
        c = c.saturating_mul(m - 1);
    }
    c
}

/// Lexicographic stream of the reduced words of length `n` over
/// `{j : k ≤ |j| ≤ J_max}` (letters ordered as integers).
pub struct ReducedWords {
    alphabet: Vec<i32>,
    idx: Vec<usize>,
    done: bool,
}

pub fn enumerate_reduced(k: i32, n: usize, j_max: i32) -> Result<ReducedWords> {
    if n == 0 {
        return Err(precondition("word length must be >= 1"));
    }
    if k < 1 || j_max < k {
        return Err(precondition("need 1 <= k <= J_max"));
    }
    let mut alphabet: Vec<i32> = (k..=j_max).rev().map(|j| -j).collect();
    alphabet.extend(k..=j_max);
    let mut it = ReducedWords {
        alphabet,
        idx: vec![0; n],
        done: false,
    };
    it.fill_from(0);
    Ok(it)
}

impl ReducedWords {
    fn allowed(&self, m: usize, p: usize) -> bool {
        m == 0 || self.alphabet[p] != -self.alphabet[self.idx[m - 1]]
    }

    // Smallest admissible letters at positions m.. (always exists: m >= 2).
    fn fill_from(&mut self, m: usize) {
        for pos in m..self.idx.len() {
            let p = (0..self.alphabet.len())
                .find(|&p| self.allowed(pos, p))
                .expect("alphabet has at least two letters");
            self.idx[pos] = p;
        }
    }

    fn advance(&mut self) {
        for m in (0..self.idx.len()).rev() {
            let next = (self.idx[m] + 1..self.alphabet.len()).find(|&p| self.allowed(m, p));
            if let Some(p) = next {
                self.idx[m] = p;
                self.fill_from(m + 1);
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for ReducedWords {
    type Item = ReducedWord;

    fn next(&mut self) -> Option<ReducedWord> {
        if self.done {
            return None;
        }
        let w = ReducedWord(self.idx.iter().map(|&p| self.alphabet[p]).collect());
        self.advance();
        Some(w)
    }
}

/// Interval `[lo, lo + width]` of a word circle, with the width carried
/// separately so that it keeps full relative accuracy when it is far below
/// the resolution of `lo`.
#[derive(Clone, Debug)]
pub struct CircleTrack {
    pub lo: BigReal,
    pub width: BigReal,
}

impl CircleTrack {
    pub fn of_circle(c: &HalfCircle) -> Self {
        let (p, q) = c.bounds().expect("bounded circle");
        CircleTrack {
            lo: p.clone(),
            width: Float::with_val(p.prec(), q - p),
        }
    }

    /// Image under `g`, assuming the pole of `g` lies outside the interval.
    pub fn push_through(&self, g: &MoebiusMap) -> Result<CircleTrack> {
        let prec = self.lo.prec();
        let den_lo = Float::with_val(prec, g.c() * &self.lo) + g.d();
        let den_hi = Float::with_val(prec, g.c() * &self.width) + &den_lo;
        if den_lo.is_zero()
            || den_hi.is_zero()
            || den_lo.is_sign_negative() != den_hi.is_sign_negative()
        {
            return Err(precondition("interval contains the pole of the map"));
        }
        let width = Float::with_val(prec, &self.width / &den_lo) / den_hi;
        let lo = match g.apply_boundary(&BoundaryPoint::Finite(self.lo.clone())) {
            BoundaryPoint::Finite(v) => v,
            BoundaryPoint::Infinity => unreachable!("nonzero denominator"),
        };
        Ok(CircleTrack {
            lo,
            width: width.abs(),
        })
    }

    pub fn center(&self) -> BigReal {
        Float::with_val(self.lo.prec(), &self.width / 2u32) + &self.lo
    }

    pub fn log_radius(&self) -> BigReal {
        (Float::with_val(self.width.prec(), &self.width / 2u32)).ln()
    }
}

/// `C_w = h_{j_1} ∘ ⋯ ∘ h_{j_{n-1}}(C_{j_n})` together with `ln r_w`.
#[derive(Clone, Debug)]
pub struct WordCircle {
    pub word: ReducedWord,
    pub circle: HalfCircle,
    pub log_radius: BigReal,
}

impl WordCircle {
    pub fn center(&self) -> BigReal {
        self.circle.center().expect("bounded circle")
    }
}

fn check_alphabet(w: &ReducedWord, family: &GeneratorFamily) -> Result<()> {
    if let Some(&j) = w.letters().iter().find(|&&j| !family.contains(j)) {
        return Err(precondition(format!(
            "letter {j} outside the family alphabet {}..={}",
            family.k(),
            family.j_max()
        )));
    }
    Ok(())
}

/// Interval track of `C_w`, built right to left.
pub fn word_track(w: &ReducedWord, family: &GeneratorFamily) -> Result<CircleTrack> {
    check_alphabet(w, family)?;
    let letters = w.letters();
    let mut t = CircleTrack::of_circle(family.circle(letters[letters.len() - 1]));
    for &j in letters[..letters.len() - 1].iter().rev() {
        t = t.push_through(family.generator(j))?;
    }
    Ok(t)
}

pub fn word_circle(w: &ReducedWord, family: &GeneratorFamily) -> Result<WordCircle> {
    let t = word_track(w, family)?;
    let prec = family.precision();
    let bits = prec.bits();
    let resolvable = Float::with_val(bits, t.lo.abs_ref()) * prec.exhaustion_floor();
    if t.width <= resolvable {
        return Err(Error::PrecisionExhausted {
            context: format!("endpoints of C_{w} coincide at {prec}; increase precision"),
        });
    }
    let hi = Float::with_val(bits, &t.lo + &t.width);
    let circle = HalfCircle::from_endpoints(
        BoundaryPoint::Finite(t.lo.clone()),
        BoundaryPoint::Finite(hi),
    )?;
    Ok(WordCircle {
        word: w.clone(),
        circle,
        log_radius: t.log_radius(),
    })
}

/// `h_w = h_{j_1} ∘ ⋯ ∘ h_{j_n}`.
pub fn word_map(w: &ReducedWord, family: &GeneratorFamily) -> Result<MoebiusMap> {
    check_alphabet(w, family)?;
    let mut g = MoebiusMap::identity(family.precision());
    for &j in w.letters() {
        g = g.compose(family.generator(j))?;
    }
    Ok(g)
}

/// `μ_{i,j} = 8 / (sqrt(λ_j) |x_i/x_j + 1|)`.
pub fn mu(i: i32, j: i32, family: &GeneratorFamily) -> Result<BigReal> {
    if i == -j {
        return Err(precondition(format!(
            "μ is undefined for the cancelling pair ({i}, {j})"
        )));
    }
    if !family.contains(i) || !family.contains(j) {
        return Err(precondition(format!(
            "({i}, {j}) outside the family alphabet"
        )));
    }
    let bits = family.precision().bits();
    let pi = family.params(i);
    let pj = family.params(j);
    let ratio = Float::with_val(bits, &pi.x / &pj.x) + 1u32;
    let den = Float::with_val(bits, pj.lambda.sqrt_ref()) * ratio.abs();
    Ok(Float::with_val(bits, 8u32) / den)
}

/// One word's contraction comparison `r_{j_1⋯j_n} ≤ μ² r_{j_2⋯j_n}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionCheck {
    pub word: ReducedWord,
    /// `log2(r_w / (μ_{j_2,j_1}^2 r_{suffix}))`, the ordering the proof bounds.
    pub log2_ratio: f64,
    /// Same ratio with the printed ordering `μ_{j_1,j_2}`.
    pub log2_ratio_printed: f64,
    pub holds: bool,
    pub holds_printed: bool,
}

pub fn check_radius_contraction(
    w: &ReducedWord,
    family: &GeneratorFamily,
) -> Result<ContractionCheck> {
    let suffix = w
        .suffix()
        .ok_or_else(|| precondition("contraction check needs length >= 2"))?;
    let (j1, j2) = (w.letters()[0], w.letters()[1]);
    let bits = family.precision().bits();
    let lr = word_track(w, family)?.log_radius();
    let ls = word_track(&suffix, family)?.log_radius();
    let diff = Float::with_val(bits, &lr - &ls);
    let ratio = |m: BigReal| Float::with_val(bits, &diff - m.ln() * 2u32);
    let swapped = ratio(mu(j2, j1, family)?);
    let printed = ratio(mu(j1, j2, family)?);
    let to_log2 = |x: &BigReal| {
        (Float::with_val(bits, x / Float::with_val(bits, rug::float::Constant::Log2))).to_f64()
    };
    Ok(ContractionCheck {
        word: w.clone(),
        log2_ratio: to_log2(&swapped),
        log2_ratio_printed: to_log2(&printed),
        holds: swapped <= 0,
        holds_printed: printed <= 0,
    })
}

/// Exhaustive contraction sweep over all words of length `2..=n_max`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionSweep {
    pub k: i32,
    pub j_max: i32,
    pub n_max: usize,
    pub words: u64,
    pub violations: u64,
    pub violations_printed: u64,
    /// Largest `log2` ratio seen (negative means every word has slack).
    pub worst_log2_ratio: f64,
    pub worst_word: Option<ReducedWord>,
    pub first_printed_violation: Option<ReducedWord>,
}

impl ContractionSweep {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

pub fn contraction_sweep(family: &GeneratorFamily, n_max: usize) -> Result<ContractionSweep> {
    let mut rep = ContractionSweep {
        k: family.k(),
        j_max: family.j_max(),
        n_max,
        words: 0,
        violations: 0,
        violations_printed: 0,
        worst_log2_ratio: f64::NEG_INFINITY,
        worst_word: None,
        first_printed_violation: None,
    };
    for n in 2..=n_max {
        for w in enumerate_reduced(family.k(), n, family.j_max())? {
            let c = check_radius_contraction(&w, family)?;
            rep.words += 1;
            if !c.holds {
                rep.violations += 1;
            }
            if !c.holds_printed {
                rep.violations_printed += 1;
                if rep.first_printed_violation.is_none() {
                    rep.first_printed_violation = Some(w.clone());
                }
            }
            if c.log2_ratio > rep.worst_log2_ratio {
                rep.worst_log2_ratio = c.log2_ratio;
                rep.worst_word = Some(w);
            }
        }
    }
    Ok(rep)
}

/// Result of `Σ μ_{i,j}^{2α}` over `min ≤ |i|,|j|`, `i ≠ -j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuSumReport {
    pub k: i32,
    /// Smallest `|i|` in the summation range.
    pub min_index: i32,
    pub j_max: i32,
    pub alpha: BigNum,
    pub truncated_sum: BigNum,
    pub tail_bound: BigNum,
    pub total: BigNum,
    /// `(4/3) 2^(-k)`.
    pub reference_bound: BigNum,
    pub pairs: u64,
    pub precision: u32,
    pub pass: bool,
    pub within_reference: bool,
}

/// Bound on `Σ μ^{2α}` over pairs whose larger index exceeds `j_max`.
/// Each such term is at most `2^(2α(1 - M^2 - min))` with `M` the larger
/// index, and at most `8M` pairs share a given `M`; the series is closed
/// geometrically. `None` when the series does not provably converge.
pub fn mu_tail_bound(min_index: i32, j_max: i32, alpha: &BigReal) -> Option<BigReal> {
    let bits = alpha.prec();
    let m0 = i64::from(j_max) + 1;
    let term = |m: i64| -> BigReal {
        let e = Float::with_val(bits, 1 - m * m - i64::from(min_index)) * alpha * 2u32;
        let p2 = Float::with_val(bits, e * Float::with_val(bits, rug::float::Constant::Log2)).exp();
        p2 * (8 * m)
    };
    let first = term(m0);
    // Term ratios decrease in M, so the first one bounds them all.
    let ratio = Float::with_val(bits, &term(m0 + 1) / &first);
    if ratio >= 1 {
        return None;
    }
    Some(first / (1u32 - ratio))
}

/// Exact `Σ μ_{i,j}^{2α}` over `min ≤ |i|,|j| ≤ J_max`, `i ≠ -j`, plus tail.
pub fn mu_sum(
    min_index: i32,
    alpha: &BigReal,
    family: &GeneratorFamily,
) -> Result<(BigReal, BigReal, u64)> {
    if min_index < family.k() {
        return Err(precondition("μ-sum range starts below the family alphabet"));
    }
    let bits = family.precision().bits();
    let idx: Vec<i32> = family
        .alphabet()
        .into_iter()
        .filter(|j| j.abs() >= min_index)
        .collect();
    let mut sum = Float::new(bits);
    let mut pairs = 0u64;
    for &i in &idx {
        for &j in &idx {
            if i == -j {
                continue;
            }
            let m = mu(i, j, family)?;
            let e = Float::with_val(bits, alpha * 2u32);
            sum += crate::num::powf(&m, &e);
            pairs += 1;
        }
    }
    let tail = mu_tail_bound(min_index, family.j_max(), &Float::with_val(bits, alpha))
        .ok_or_else(|| precondition("μ-sum tail does not converge for this α"))?;
    Ok((sum, tail, pairs))
}

/// `Σ_{i≠-j, k<|i|,|j|≤J_max} μ_{i,j}^{1/k}` plus tail, against 1 and
/// `(4/3) 2^(-k)`.
pub fn check_mu_sum(family: &GeneratorFamily) -> Result<MuSumReport> {
    let k = family.k();
    if k < 2 {
        return Err(precondition("the μ-sum certificate needs k >= 2"));
    }
    let prec = family.precision();
    let alpha = Float::with_val(prec.bits(), 1u32) / (2 * k as u32);
    let (sum, tail, pairs) = mu_sum(k + 1, &alpha, family)?;
    let total = Float::with_val(prec.bits(), &sum + &tail);
    let reference = Float::with_val(prec.bits(), 4u32) / 3u32 * prec.pow2(-i64::from(k));
    Ok(MuSumReport {
        k,
        min_index: k + 1,
        j_max: family.j_max(),
        alpha: BigNum::new(&alpha),
        truncated_sum: BigNum::new(&sum),
        tail_bound: BigNum::new(&tail),
        pass: total <= 1,
        within_reference: total <= Float::with_val(prec.bits(), &reference + &tail),
        total: BigNum::new(&total),
        reference_bound: BigNum::new(&reference),
        pairs,
        precision: prec.bits(),
    })
}

/// Covering sum `Σ_{w ∈ J_{k,n}} r_w^α` over the truncated alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverReport {
    pub k: i32,
    pub n: usize,
    pub alpha: BigNum,
    pub j_max: i32,
    pub truncated_sum: BigNum,
    pub tail_bound: BigNum,
    pub word_count: u64,
    pub max_radius: BigNum,
    pub precision: u32,
}

/// `2 Σ_{j ≥ from} 2^(-(j+2)α)`, the length-one sum over `|j| ≥ from`.
fn radius_series(from: i32, alpha: &BigReal) -> BigReal {
    let bits = alpha.prec();
    let ln2 = Float::with_val(bits, rug::float::Constant::Log2);
    let q = (Float::with_val(bits, alpha * &ln2) * -1i32).exp();
    let first = (Float::with_val(bits, alpha * &ln2) * -(from + 2)).exp();
    first * 2u32 / (1u32 - q)
}

/// Bound on the part of the infinite-alphabet covering sum that the
/// truncation misses. A word with some letter beyond `J_max` either ends in
/// it (at most `M^(n-1) t_1`) or has it in one of the `n - 1` adjacent pairs
/// (at most `τ M^(n-2) S_1` each), using `r_w ≤ μ^2 r_{suffix}` per letter;
/// `M` is the full μ-sum over `|j| ≥ k`, `τ` its tail, `S_1` and `t_1` the
/// full and tail length-one sums.
pub fn cover_tail_bound(
    k: i32,
    n: usize,
    alpha: &BigReal,
    family: &GeneratorFamily,
) -> Result<BigReal> {
    let bits = family.precision().bits();
    let (sum, tau, _) = mu_sum(k, alpha, family)?;
    let m = Float::with_val(bits, &sum + &tau);
    let s1 = radius_series(k, alpha);
    let t1 = radius_series(family.j_max() + 1, alpha);
    if n == 1 {
        return Ok(t1);
    }
    let n1 = (n - 1) as i32;
    let pairs = crate::num::powi(&m, n1 - 1) * &tau * &s1 * n1;
    let last = crate::num::powi(&m, n1) * &t1;
    Ok(pairs + last)
}

#[derive(Clone, Debug)]
struct LevelAcc {
    sum: BigReal,
    count: u64,
    max_log_radius: Option<BigReal>,
}

/// Covering sums for every length `1..=n_max` in one pass.
///
/// Words are grown right to left (prepending letters), so the tree is
/// partitioned by last letter; each partition is summed depth-first in a
/// fixed order and the partitions are combined in alphabet order, which
/// makes the result independent of `jobs`.
pub fn covering_sums_upto(
    n_max: usize,
    alpha: &BigReal,
    family: &GeneratorFamily,
    budget: u64,
    jobs: usize,
) -> Result<Vec<CoverReport>> {
    if n_max == 0 {
        return Err(precondition("word length must be >= 1"));
    }
    if !(*alpha > 0) {
        return Err(precondition("α must be positive"));
    }
    let k = family.k();
    let j_max = family.j_max();
    let total: u128 = (1..=n_max)
        .map(|n| word_count(k, n, j_max))
        .fold(0u128, u128::saturating_add);
    if total > u128::from(budget) {
        return Err(Error::BudgetExceeded {
            requested: total,
            budget,
        });
    }
    let bits = family.precision().bits();
    let alpha = Float::with_val(bits, alpha);
    let alphabet = family.alphabet();

    let run = |root: i32| -> Result<Vec<LevelAcc>> {
        let mut acc: Vec<LevelAcc> = (0..n_max)
            .map(|_| LevelAcc {
                sum: Float::new(bits),
                count: 0,
                max_log_radius: None,
            })
            .collect();
        let start = CircleTrack::of_circle(family.circle(root));
        let mut stack: Vec<(i32, usize, CircleTrack)> = vec![(root, 1, start)];
        while let Some((first, depth, track)) = stack.pop() {
            let lr = track.log_radius();
            let level = &mut acc[depth - 1];
            level.sum += (Float::with_val(bits, &lr * &alpha)).exp();
            level.count += 1;
            if level.max_log_radius.as_ref().is_none_or(|m| lr > *m) {
                level.max_log_radius = Some(lr);
            }
            if depth < n_max {
                // pushed in reverse so that smaller letters are visited first
                for &j in alphabet.iter().rev() {
                    if j == -first {
                        continue;
                    }
                    let t = track.push_through(family.generator(j))?;
                    stack.push((j, depth + 1, t));
                }
            }
        }
        Ok(acc)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| precondition(format!("cannot start worker pool: {e}")))?;
    let parts: Vec<Result<Vec<LevelAcc>>> =
        pool.install(|| alphabet.par_iter().map(|&r| run(r)).collect());

    let mut merged: Vec<LevelAcc> = (0..n_max)
        .map(|_| LevelAcc {
            sum: Float::new(bits),
            count: 0,
            max_log_radius: None,
        })
        .collect();
    for part in parts {
        for (m, p) in merged.iter_mut().zip(part?) {
            m.sum += &p.sum;
            m.count += p.count;
            if let Some(l) = p.max_log_radius {
                if m.max_log_radius.as_ref().is_none_or(|x| l > *x) {
                    m.max_log_radius = Some(l);
                }
            }
        }
    }
    merged
        .into_iter()
        .enumerate()
        .map(|(i, acc)| {
            let n = i + 1;
            let tail = cover_tail_bound(k, n, &alpha, family)?;
            let max_r = acc
                .max_log_radius
                .map(|l| l.exp())
                .unwrap_or_else(|| Float::new(bits));
            Ok(CoverReport {
                k,
                n,
                alpha: BigNum::new(&alpha),
                j_max,
                truncated_sum: BigNum::new(&acc.sum),
                tail_bound: BigNum::new(&tail),
                word_count: acc.count,
                max_radius: BigNum::new(&max_r),
                precision: bits,
            })
        })
        .collect()
}

pub fn covering_sum(
    n: usize,
    alpha: &BigReal,
    family: &GeneratorFamily,
    budget: u64,
    jobs: usize,
) -> Result<CoverReport> {
    if word_count(family.k(), n, family.j_max()) > u128::from(budget) {
        return Err(Error::BudgetExceeded {
            requested: word_count(family.k(), n, family.j_max()),
            budget,
        });
    }
    // Shorter lengths come for free with the tree walk; only their word
    // counts add to the work.
    let budget = budget.saturating_mul(2);
    Ok(covering_sums_upto(n, alpha, family, budget, jobs)?
        .pop()
        .expect("n >= 1"))
}

/// `word,center,radius_log2` rows for every reduced word of length `n`.
pub fn export_words_csv<W: Write>(
    n: usize,
    family: &GeneratorFamily,
    budget: u64,
    out: &mut W,
) -> Result<u64> {
    let count = word_count(family.k(), n, family.j_max());
    if count > u128::from(budget) {
        return Err(Error::BudgetExceeded {
            requested: count,
            budget,
        });
    }
    let io = |e: std::io::Error| precondition(format!("write failed: {e}"));
    writeln!(out, "word,center,radius_log2").map_err(io)?;
    let mut rows = 0;
    for w in enumerate_reduced(family.k(), n, family.j_max())? {
        let t = word_track(&w, family)?;
        let letters: Vec<String> = w.letters().iter().map(i32::to_string).collect();
        let r = Float::with_val(t.width.prec(), &t.width / 2u32);
        writeln!(
            out,
            "{},{},{}",
            letters.join(" "),
            crate::num::decimal_string(&t.center(), 30),
            log2_f64(&r)
        )
        .map_err(io)?;
        rows += 1;
    }
    Ok(rows)
}

/// The four-thirds reference constant for callers comparing reports.
pub fn reference_mu_bound(k: i32, prec: Precision) -> BigReal {
    Float::with_val(prec.bits(), 4u32) / 3u32 * prec.pow2(-i64::from(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::approx_eq_scaled;

    #[test]
    fn word_counts() {
        assert_eq!(enumerate_reduced(2, 1, 2).unwrap().count(), 2);
        assert_eq!(enumerate_reduced(2, 2, 3).unwrap().count(), 12);
        assert_eq!(word_count(2, 3, 3), 36);
        assert_eq!(word_count(2, 4, 6), 7290);
    }

    #[test]
    fn enumeration_is_lexicographic_and_reduced() {
        let words: Vec<ReducedWord> = enumerate_reduced(2, 3, 3).unwrap().collect();
        assert_eq!(words.len(), 36);
        assert!(words.windows(2).all(|w| w[0] < w[1]));
        assert!(words
            .iter()
            .all(|w| w.letters().windows(2).all(|p| p[0] != -p[1])));
        assert_eq!(words[0].letters(), &[-3, -3, -3]);
    }

    #[test]
    fn reduced_word_validation() {
        assert!(ReducedWord::new(vec![], 1).is_err());
        assert!(ReducedWord::new(vec![2, -2], 1).is_err());
        assert!(ReducedWord::new(vec![1, 2], 2).is_err());
        assert!(ReducedWord::new(vec![2, 2, -3], 2).is_ok());
    }

    #[test]
    fn single_letter_circle_is_base() {
        let f = GeneratorFamily::new(1, 4).unwrap();
        let w = ReducedWord::new(vec![3], 1).unwrap();
        let c = word_circle(&w, &f).unwrap();
        assert!(c.circle.approx_eq(f.circle(3), &f.precision().tolerance()));
    }

    #[test]
    fn nested_circle_and_mu() {
        let f = GeneratorFamily::new(1, 4).unwrap();
        let w = ReducedWord::new(vec![1, 2], 1).unwrap();
        let c = word_circle(&w, &f).unwrap();
        assert!(f.circle(1).encloses(&c.circle));
        let m = mu(2, 3, &f).unwrap();
        let lam3 = f.params(3).lambda.clone();
        let want = Float::with_val(512, 8u32)
            / (lam3.sqrt() * (Float::with_val(512, 16u32) / 512u32 + 1u32));
        assert!(approx_eq_scaled(&m, &want, &f.precision().tolerance()));
        assert!(mu(2, -2, &f).is_err());
        assert_eq!(mu(-2, -3, &f).unwrap(), m);
    }

    #[test]
    fn tracked_width_matches_endpoint_mapping() {
        let f = GeneratorFamily::new(2, 4).unwrap();
        let w = ReducedWord::new(vec![2, 3], 2).unwrap();
        let c = word_circle(&w, &f).unwrap();
        let img = crate::hyperbolic::image_halfcircle(f.generator(2), f.circle(3)).unwrap();
        assert!(c.circle.approx_eq(&img, &f.precision().tolerance()));
    }

    #[test]
    fn covering_sum_length_one_closed_form() {
        let f = GeneratorFamily::new(2, 6).unwrap();
        let a = Float::with_val(512, 0.25);
        let rep = covering_sum(1, &a, &f, DEFAULT_BUDGET, 1).unwrap();
        assert_eq!(rep.word_count, 10);
        let s = rep.truncated_sum.to_big(f.precision()).unwrap()
            + rep.tail_bound.to_big(f.precision()).unwrap();
        // the tail at n = 1 is the exact remainder of the geometric series
        let full = radius_series(2, &a);
        assert!(approx_eq_scaled(&s, &full, &f.precision().tolerance()));
    }

    #[test]
    fn budget_guard() {
        let f = GeneratorFamily::new(2, 6).unwrap();
        let a = Float::with_val(512, 0.25);
        assert!(matches!(
            covering_sum(4, &a, &f, 1000, 1),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn mu_sum_k2() {
        let f = GeneratorFamily::new(2, 22).unwrap();
        let rep = check_mu_sum(&f).unwrap();
        assert!(rep.pass && rep.within_reference);
    }
}
