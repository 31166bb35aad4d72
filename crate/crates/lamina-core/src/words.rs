//! Exact combinatorics of deviating binary words, their cylinder covers, and
//! high-precision doubling orbits.
//!
//! A length-`N` binary word is *deviating* for a pattern `w` when its
//! occurrence frequency `c / N` leaves the fair-coin window
//! `[2^-|w| - kappa, 2^-|w| + kappa]`. The number of such words is computed
//! exactly: a pattern automaton with overlap counting drives a big-integer
//! dynamic program over (state, occurrence count), so the counts are free of
//! rounding all the way to the supported table length. Counts convert to
//! base-2 exponents, cylinder-cover volumes, and uniform samples from the
//! deviating set. A separate fixed-point engine iterates angle doubling with
//! guard bits beyond the orbit length, so Birkhoff averages of `cos(2 pi y)`
//! are evaluated on exact orbits rather than on floating-point ones that
//! collapse to the fixed point after 53 steps.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
// Inherent f64 methods shadow these under std; the import is for no_std.
#[allow(unused_imports)]
use num_traits::Float;

/// Longest supported deviation-table word length.
pub const MAX_TABLE_LENGTH: usize = 4096;

/// Longest word length whose cylinder endpoints are exact in an `f64`.
pub const MAX_SAMPLE_LENGTH: usize = 52;

/// Slack applied to the frequency window so boundary classes are not decided
/// by the rounding of `c / N`.
const FREQUENCY_TOLERANCE: f64 = 1e-12;

/// Pattern-matching automaton over binary words, counting occurrences with
/// overlap: state `s` is the length of the longest pattern prefix matching
/// the current suffix, and reaching the full length emits a match while the
/// border continuation keeps running.
#[derive(Debug, Clone)]
pub struct PatternAutomaton {
    pattern: Vec<u8>,
    next: Vec<[usize; 2]>,
}

impl PatternAutomaton {
    pub fn new(pattern: &[u8]) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::InvalidArgument("empty pattern".into()));
        }
        if pattern.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("pattern symbols must be bits".into()));
        }
        let n = pattern.len();
        // Longest proper border of each prefix.
        let mut border = vec![0usize; n + 1];
        let mut k = 0usize;
        for s in 2..=n {
            while k > 0 && pattern[s - 1] != pattern[k] {
                k = border[k];
            }
            if pattern[s - 1] == pattern[k] {
                k += 1;
            }
            border[s] = k;
        }
        let mut next = vec![[0usize; 2]; n + 1];
        for b in 0..2usize {
            next[0][b] = usize::from(pattern[0] == b as u8);
        }
        for s in 1..=n {
            for b in 0..2usize {
                next[s][b] = if s < n && pattern[s] == b as u8 {
                    s + 1
                } else {
                    next[border[s]][b]
                };
            }
        }
        Ok(Self { pattern: pattern.to_vec(), next })
    }

    pub fn pattern(&self) -> &[u8] {
        &self.pattern
    }

    /// Number of automaton states, one per matched prefix length.
    pub fn states(&self) -> usize {
        self.pattern.len() + 1
    }

    /// Feed one bit: the successor state and whether a match completed.
    pub fn step(&self, state: usize, bit: u8) -> (usize, bool) {
        let s = self.next[state][usize::from(bit)];
        (s, s == self.pattern.len())
    }

    /// Occurrences of the pattern in a word, overlaps included.
    pub fn count_in(&self, word: &[u8]) -> usize {
        let mut state = 0;
        let mut count = 0;
        for &bit in word {
            let (s, matched) = self.step(state, bit);
            state = s;
            count += usize::from(matched);
        }
        count
    }

    /// Observed occurrence frequency `c / N` of the pattern in a word.
    pub fn frequency_in(&self, word: &[u8]) -> f64 {
        self.count_in(word) as f64 / word.len() as f64
    }
}

/// Exact occurrence statistics of all binary words of one length.
#[derive(Debug, Clone)]
pub struct DeviationTable {
    automaton: PatternAutomaton,
    length: usize,
    counts: Vec<BigUint>,
}

/// Count all length-`length` binary words by their number of pattern
/// occurrences, exactly.
pub fn deviation_table(pattern: &[u8], length: usize) -> Result<DeviationTable> {
    let automaton = PatternAutomaton::new(pattern)?;
    if length == 0 || length > MAX_TABLE_LENGTH {
        return Err(Error::InvalidArgument(format!(
            "word length {length} outside 1..={MAX_TABLE_LENGTH}"
        )));
    }
    let states = automaton.states();
    // dp[s][c]: words read so far that left the automaton in state s with c
    // occurrences emitted.
    let mut dp = vec![vec![BigUint::zero(); length + 1]; states];
    dp[0][0] = BigUint::from(1u32);
    for consumed in 0..length {
        let mut fresh = vec![vec![BigUint::zero(); length + 1]; states];
        for s in 0..states {
            for c in 0..=consumed {
                if dp[s][c].is_zero() {
                    continue;
                }
                for bit in 0..2u8 {
                    let (t, matched) = automaton.step(s, bit);
                    fresh[t][c + usize::from(matched)] += &dp[s][c];
                }
            }
        }
        dp = fresh;
    }
    let mut counts = vec![BigUint::zero(); length + 1];
    for s in 0..states {
        for c in 0..=length {
            counts[c] += &dp[s][c];
        }
    }
    Ok(DeviationTable { automaton, length, counts })
}

impl DeviationTable {
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn automaton(&self) -> &PatternAutomaton {
        &self.automaton
    }

    /// `counts()[c]` is the exact number of words with `c` occurrences.
    pub fn counts(&self) -> &[BigUint] {
        &self.counts
    }

    /// Total over all occurrence classes; always `2^length`.
    pub fn total(&self) -> BigUint {
        self.counts.iter().sum()
    }

    /// The fair-coin frequency window `2^-|w| +- kappa`.
    pub fn typical_window(&self, kappa: f64) -> (f64, f64) {
        let target = 0.5f64.powi(self.automaton.pattern.len() as i32);
        (target - kappa, target + kappa)
    }

    /// Whether occurrence class `c` deviates from the frequency window.
    pub fn is_deviating(&self, c: usize, kappa: f64) -> bool {
        class_deviates(self.automaton.pattern.len(), self.length, c, kappa)
    }

    /// Exact number of words whose frequency leaves the window.
    pub fn deviating_count(&self, kappa: f64) -> Result<BigUint> {
        if !(kappa >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative window width {kappa}")));
        }
        let mut sum = BigUint::zero();
        for (c, count) in self.counts.iter().enumerate() {
            if self.is_deviating(c, kappa) {
                sum += count;
            }
        }
        Ok(sum)
    }
}

/// Whether frequency `c / length` leaves the window `2^-n +- kappa`.
fn class_deviates(pattern_len: usize, length: usize, c: usize, kappa: f64) -> bool {
    let target = 0.5f64.powi(pattern_len as i32);
    let freq = c as f64 / length as f64;
    (freq - target).abs() > kappa + FREQUENCY_TOLERANCE
}

/// Exact number of length-`length` words whose occurrence frequency of
/// `pattern` leaves the fair-coin window of width `kappa`.
pub fn atypical_word_count(pattern: &[u8], length: usize, kappa: f64) -> Result<BigUint> {
    deviation_table(pattern, length)?.deviating_count(kappa)
}

/// Exact box counts of the atypical cover: how many dyadic arcs of depth
/// `depth` meet the union of the deviating cylinders of length `length`.
///
/// For `depth <= length` an arc is a binary prefix, and it meets the cover
/// exactly when some completion of the prefix deviates. Completions can
/// always add zero occurrences (repeat the letter that differs from the last
/// pattern letter), the maximal addable count is a small automaton program,
/// and the typical window is an interval — so a prefix extends to a deviating
/// word if and only if its own count or its count plus that maximum deviates.
/// For `depth > length` every deviating cylinder splits into
/// `2^(depth - length)` arcs.
pub fn deviating_prefix_count(
    pattern: &[u8],
    length: usize,
    kappa: f64,
    depth: usize,
) -> Result<BigUint> {
    let automaton = PatternAutomaton::new(pattern)?;
    if length == 0 || length > MAX_TABLE_LENGTH {
        return Err(Error::InvalidArgument(format!(
            "word length {length} outside 1..={MAX_TABLE_LENGTH}"
        )));
    }
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative window width {kappa}")));
    }
    if depth > length {
        return Ok(atypical_word_count(pattern, length, kappa)? << (depth - length));
    }
    let states = automaton.states();
    let n = automaton.pattern.len();
    let remaining = length - depth;

    // max_add[r][s]: most occurrences addable by r further letters from state s.
    let mut max_add = vec![vec![0usize; states]; remaining + 1];
    for r in 1..=remaining {
        for s in 0..states {
            let mut best = 0usize;
            for bit in 0..2u8 {
                let (t, matched) = automaton.step(s, bit);
                best = best.max(max_add[r - 1][t] + usize::from(matched));
            }
            max_add[r][s] = best;
        }
    }

    // dp[s][c]: number of depth-`depth` prefixes in state s with c occurrences.
    let mut dp = vec![vec![BigUint::zero(); depth + 1]; states];
    dp[0][0] = BigUint::from(1u32);
    for consumed in 0..depth {
        let mut fresh = vec![vec![BigUint::zero(); depth + 1]; states];
        for s in 0..states {
            for c in 0..=consumed {
                if dp[s][c].is_zero() {
                    continue;
                }
                for bit in 0..2u8 {
                    let (t, matched) = automaton.step(s, bit);
                    fresh[t][c + usize::from(matched)] += &dp[s][c];
                }
            }
        }
        dp = fresh;
    }

    let mut sum = BigUint::zero();
    for s in 0..states {
        for c in 0..=depth {
            if dp[s][c].is_zero() {
                continue;
            }
            if class_deviates(n, length, c, kappa)
                || class_deviates(n, length, c + max_add[remaining][s], kappa)
            {
                sum += &dp[s][c];
            }
        }
    }
    Ok(sum)
}

/// Base-2 logarithm of a big integer, exact to f64 precision; zero gives
/// negative infinity.
pub fn log2_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 53 {
        return (x.to_u64().expect("fits by bit count") as f64).log2();
    }
    let shift = bits - 53;
    let top = (x >> shift).to_u64().expect("53 bits fit");
    shift as f64 + (top as f64).log2()
}

/// Exponent deficit `nu = 1 - log2(count) / length`: the deviating set covers
/// about `2^(-nu * length)` of the circle. An empty set gives `+inf`.
pub fn nu_estimate(count: &BigUint, length: usize) -> f64 {
    if count.is_zero() {
        return f64::INFINITY;
    }
    1.0 - log2_biguint(count) / length as f64
}

/// Base-2 log of the Lebesgue volume of the union of the `count` dyadic
/// cylinders of depth `depth`.
pub fn cover_volume_log2(count: &BigUint, depth: usize) -> f64 {
    log2_biguint(count) - depth as f64
}

/// Uniform samples from the deviating set: left endpoints of the dyadic
/// cylinders of deviating words, drawn by walking the counting program
/// backward. Lengths are capped so the endpoints are exact `f64` values.
pub fn sample_deviating_arcs<R: Rng + ?Sized>(
    rng: &mut R,
    pattern: &[u8],
    length: usize,
    kappa: f64,
    how_many: usize,
) -> Result<Vec<f64>> {
    let automaton = PatternAutomaton::new(pattern)?;
    if length == 0 || length > MAX_SAMPLE_LENGTH {
        return Err(Error::InvalidArgument(format!(
            "sample length {length} outside 1..={MAX_SAMPLE_LENGTH}"
        )));
    }
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative window width {kappa}")));
    }
    let states = automaton.states();
    // Forward tables for every prefix length; needed to weight the backward walk.
    let mut tables = Vec::with_capacity(length + 1);
    let mut dp = vec![vec![BigUint::zero(); length + 1]; states];
    dp[0][0] = BigUint::from(1u32);
    tables.push(dp.clone());
    for consumed in 0..length {
        let mut fresh = vec![vec![BigUint::zero(); length + 1]; states];
        for s in 0..states {
            for c in 0..=consumed {
                if dp[s][c].is_zero() {
                    continue;
                }
                for bit in 0..2u8 {
                    let (t, matched) = automaton.step(s, bit);
                    fresh[t][c + usize::from(matched)] += &dp[s][c];
                }
            }
        }
        dp = fresh;
        tables.push(dp.clone());
    }

    let final_weights: Vec<(usize, usize)> = (0..states)
        .flat_map(|s| (0..=length).map(move |c| (s, c)))
        .filter(|&(s, c)| {
            class_deviates(pattern.len(), length, c, kappa) && !tables[length][s][c].is_zero()
        })
        .collect();
    let total: BigUint = final_weights.iter().map(|&(s, c)| &tables[length][s][c]).sum();
    if total.is_zero() {
        return Err(Error::InsufficientSamples("the deviating set is empty".into()));
    }

    let mut arcs = Vec::with_capacity(how_many);
    for _ in 0..how_many {
        // Land in an occupancy class proportionally to its exact count.
        let mut r = rng.gen_biguint_below(&total);
        let (mut state, mut count) = final_weights[0];
        for &(s, c) in &final_weights {
            let w = &tables[length][s][c];
            if &r < w {
                state = s;
                count = c;
                break;
            }
            r -= w;
        }
        // Walk back through the table, drawing each bit by its exact weight.
        let mut bits = vec![0u8; length];
        for position in (0..length).rev() {
            let mut choices: Vec<(usize, usize, u8)> = Vec::with_capacity(2 * states);
            let mut subtotal = BigUint::zero();
            for s in 0..states {
                for bit in 0..2u8 {
                    let (t, matched) = automaton.step(s, bit);
                    if t != state {
                        continue;
                    }
                    let needed = usize::from(matched);
                    if count < needed {
                        continue;
                    }
                    let w = &tables[position][s][count - needed];
                    if w.is_zero() {
                        continue;
                    }
                    subtotal += w;
                    choices.push((s, count - needed, bit));
                }
            }
            let mut r = rng.gen_biguint_below(&subtotal);
            let mut taken = None;
            for &(s, c, bit) in &choices {
                let (t, matched) = automaton.step(s, bit);
                debug_assert!(t == state && c + usize::from(matched) == count);
                let w = &tables[position][s][c];
                if &r < w {
                    taken = Some((s, c, bit));
                    break;
                }
                r -= w;
            }
            let (s, c, bit) = taken.expect("weights sum to the drawn range");
            bits[position] = bit;
            state = s;
            count = c;
        }
        debug_assert_eq!((state, count), (0, 0));
        let x = bits
            .iter()
            .enumerate()
            .map(|(i, &b)| b as f64 * 0.5f64.powi(i as i32 + 1))
            .sum();
        arcs.push(x);
    }
    Ok(arcs)
}

/// Uniform `bits`-bit fixed-point angle in `[0, 1)`.
pub fn random_fixed_angle<R: Rng + ?Sized>(rng: &mut R, bits: u64) -> BigUint {
    rng.gen_biguint(bits)
}

/// Truncate an `f64` angle in `[0, 1)` to `bits`-bit fixed point.
pub fn fixed_angle_from_f64(y: f64, bits: u64) -> Result<BigUint> {
    if !(0.0..1.0).contains(&y) {
        return Err(Error::InvalidArgument(format!("angle {y} outside [0, 1)")));
    }
    if bits < 53 {
        return Err(Error::InvalidArgument("need at least 53 fixed-point bits".into()));
    }
    let mantissa = (y * 9007199254740992.0) as u64; // floor(y * 2^53)
    Ok(BigUint::from(mantissa) << (bits - 53) as usize)
}

/// The exact `bits`-bit fixed-point angle `floor(2^bits * num / den)`.
pub fn fixed_angle_from_ratio(num: u64, den: u64, bits: u64) -> Result<BigUint> {
    if den == 0 || num >= den {
        return Err(Error::InvalidArgument(format!("ratio {num}/{den} is not in [0, 1)")));
    }
    Ok((BigUint::from(num) << bits as usize) / den)
}

/// Birkhoff average of `cos(2 pi y)` along the first `n` doubling iterates of
/// a fixed-point angle. Doubling a `bits`-bit angle just drops the top bit,
/// so the orbit is exact; `bits` must exceed `n + 64` so the surviving bits
/// still determine every evaluated angle to full `f64` precision.
pub fn birkhoff_cosine_average(y: &BigUint, bits: u64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty orbit".into()));
    }
    if bits < n as u64 + 64 {
        return Err(Error::InvalidArgument(format!(
            "{bits} fixed-point bits cannot carry a length-{n} doubling orbit; need {}",
            n as u64 + 64
        )));
    }
    if y.bits() > bits {
        return Err(Error::InvalidArgument("angle exceeds the fixed-point modulus".into()));
    }
    let modulus_mask = (BigUint::from(1u32) << bits as usize) - 1u32;
    let mut current = y.clone();
    let mut sum = 0.0f64;
    for _ in 0..n {
        let top = (&current >> (bits - 53) as usize).to_u64().expect("53 bits fit") as f64;
        let angle = top / 9007199254740992.0; // / 2^53
        sum += (core::f64::consts::TAU * angle).cos();
        current = (current << 1usize) & &modulus_mask;
    }
    Ok(sum / n as f64)
}
