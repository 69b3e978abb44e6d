//! The constructive chain from compound-channel codes to deterministic
//! AV codes: random conferencing codebooks, permutation robustification,
//! reduction of the shared randomness to `n^2` components, a
//! positive-rate prefix code on the product alphabet, and the
//! concatenation that eliminates the common randomness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelSpec;
use crate::infotheory::InputPolicy;
use crate::region::{full_cooperation_input, robust_bounds, QOptions};
use crate::symmetrizability::{check_symmetrizable, SymmetrizerKind, DEFAULT_TOLERANCE};

use super::evaluate::{
    worst_case_error, worst_randomized_error, WorstCaseMode, OUTPUT_ENUM_CAP, STATE_ENUM_CAP,
};
use super::{
    checked_pow, CodeMeta, CodingError, ConferencingCode, ConferencingProtocol, Decoder,
    RandomConferencingCode,
};

fn seed_for(root: u64, index: u64) -> u64 {
    root ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x51AC)
}

// ---------------------------------------------------------------------------
// Compound codebooks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CompoundCodeOptions {
    /// Required margin between the target rates and the robust pentagon.
    pub gap: f64,
    pub q: QOptions,
}

impl Default for CompoundCodeOptions {
    fn default() -> Self {
        Self {
            gap: 0.02,
            q: QOptions::default(),
        }
    }
}

/// Draws a random conferencing codebook for the compound channel at the
/// given rates: conferencing messages are balanced bins of the message
/// sets, the auxiliary word is drawn per bin pair from `p0`, and the
/// codewords conditionally on it from `p1` and `p2`. Decoding is maximum
/// likelihood under the uniform state mixture (tabulated when feasible).
#[allow(clippy::too_many_arguments)]
pub fn build_compound_code(
    ch: &ChannelSpec,
    policy: &InputPolicy,
    n: usize,
    rates: (f64, f64),
    c1: f64,
    c2: f64,
    seed: u64,
    opts: &CompoundCodeOptions,
) -> Result<ConferencingCode, CodingError> {
    let (r1, r2) = rates;
    let bad = |v: f64| !v.is_finite() || v < 0.0;
    if n == 0 || bad(r1) || bad(r2) || bad(c1) || bad(c2) {
        return Err(CodingError::InvalidCode(
            "blocklength positive; rates and capacities finite and nonnegative".into(),
        ));
    }
    let rb = robust_bounds(policy, ch, c1, c2, &opts.q)?;
    let sum_bound = rb.b3a.min(rb.b3b);
    if (r1 > 0.0 && r1 > rb.b1 - opts.gap)
        || (r2 > 0.0 && r2 > rb.b2 - opts.gap)
        || (r1 + r2 > 0.0 && r1 + r2 > sum_bound - opts.gap)
    {
        return Err(CodingError::RateInfeasible(format!(
            "target ({r1:.4}, {r2:.4}) vs robust bounds ({:.4}, {:.4}, {:.4}) minus gap {}",
            rb.b1, rb.b2, sum_bound, opts.gap
        )));
    }

    let m1 = ((2f64).powf(n as f64 * r1).round() as usize).max(1);
    let m2 = ((2f64).powf(n as f64 * r2).round() as usize).max(1);
    let v_for = |m: usize, c: f64| -> usize {
        let cap = (2f64).powf(n as f64 * c);
        let v = if cap.is_finite() { cap.floor() as usize } else { m };
        v.clamp(1, m)
    };
    let v1 = v_for(m1, c1);
    let v2 = v_for(m2, c2);
    let bin1: Vec<usize> = (0..m1).map(|j| j * v1 / m1).collect();
    let bin2: Vec<usize> = (0..m2).map(|k| k * v2 / m2).collect();
    let protocol = ConferencingProtocol::new(bin1.clone(), v1, bin2.clone(), v2)?;
    debug_assert!(protocol.within_budget(n, c1, c2));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Auxiliary words, one per announced bin pair.
    let mut uwords = vec![vec![0usize; n]; v1 * v2];
    for uw in uwords.iter_mut() {
        for t in uw.iter_mut() {
            *t = sample_index(&mut rng, |u| policy.p0(u), policy.nu());
        }
    }
    // Sender 1 words depend on (own message, announced bin of sender 2).
    let mut xw = vec![vec![0usize; n]; m1 * v2];
    for j in 0..m1 {
        for b2 in 0..v2 {
            let u_word = &uwords[bin1[j] * v2 + b2];
            let word = &mut xw[j * v2 + b2];
            for t in 0..n {
                word[t] = sample_index(&mut rng, |x| policy.p1(u_word[t], x), policy.nx());
            }
        }
    }
    let mut yw = vec![vec![0usize; n]; v1 * m2];
    for b1 in 0..v1 {
        for k in 0..m2 {
            let u_word = &uwords[b1 * v2 + bin2[k]];
            let word = &mut yw[b1 * m2 + k];
            for t in 0..n {
                word[t] = sample_index(&mut rng, |y| policy.p2(u_word[t], y), policy.ny());
            }
        }
    }
    let mut xwords = Vec::with_capacity(m1 * m2);
    let mut ywords = Vec::with_capacity(m1 * m2);
    for j in 0..m1 {
        for k in 0..m2 {
            xwords.push(xw[j * v2 + bin2[k]].clone());
            ywords.push(yw[bin1[j] * m2 + k].clone());
        }
    }
    let meta = CodeMeta {
        decoder_rule: "ml under uniform state mixture".into(),
        seed,
        zeta: None,
    };
    let code = ConferencingCode::new(
        n,
        m1,
        m2,
        protocol,
        xwords,
        ywords,
        Decoder::MaxLikelihood {
            q: vec![1.0 / ch.ns() as f64; ch.ns()],
        },
        meta,
    )?;
    if checked_pow(ch.nz(), n).is_some_and(|t| t <= OUTPUT_ENUM_CAP) {
        code.with_table_decoder(ch)
    } else {
        Ok(code)
    }
}

fn sample_index<R: Rng>(rng: &mut R, mass: impl Fn(usize) -> f64, len: usize) -> usize {
    let u: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for i in 0..len {
        acc += mass(i);
        if u < acc {
            return i;
        }
    }
    len - 1
}

// ---------------------------------------------------------------------------
// Robustification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct RobustifyOptions {
    /// Use the full symmetric group up to this blocklength.
    pub full_group_max_n: usize,
    /// Number of sampled permutations beyond it.
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for RobustifyOptions {
    fn default() -> Self {
        Self {
            full_group_max_n: 6,
            sample_count: 4096,
            seed: 0,
        }
    }
}

/// Converts a compound-good code into a random code by permuting
/// coordinates: component `pi` applies the inverse permutation to
/// codewords and decoding sets, so its error at `s` equals the base
/// code's error at `pi(s)`. The conferencing protocol is unchanged
/// because the conference concerns messages, not codewords.
pub fn robustify(
    code: &ConferencingCode,
    opts: &RobustifyOptions,
) -> Result<RandomConferencingCode, CodingError> {
    match code.decoder() {
        Decoder::Table { .. } | Decoder::MaxLikelihood { .. } => {}
        _ => {
            return Err(CodingError::InvalidCode(
                "robustification expects a single-stage decoder".into(),
            ))
        }
    }
    let n = code.n();
    let perms: Vec<Vec<usize>> = if n <= opts.full_group_max_n {
        all_permutations(n)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        (0..opts.sample_count.max(1))
            .map(|_| {
                let mut p: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    let j = rng.gen_range(0..=i);
                    p.swap(i, j);
                }
                p
            })
            .collect()
    };
    let components: Vec<ConferencingCode> = perms
        .iter()
        .map(|perm| permuted_component(code, perm))
        .collect::<Result<_, _>>()?;
    RandomConferencingCode::uniform(components)
}

fn permuted_component(
    code: &ConferencingCode,
    perm: &[usize],
) -> Result<ConferencingCode, CodingError> {
    let n = code.n();
    let apply_inverse = |w: &[usize]| -> Vec<usize> {
        // (inv(pi) w)[pi(t)] = w[t]
        let mut out = vec![0usize; n];
        for t in 0..n {
            out[perm[t]] = w[t];
        }
        out
    };
    let mut xwords = Vec::with_capacity(code.message_pairs());
    let mut ywords = Vec::with_capacity(code.message_pairs());
    for j in 0..code.m1() {
        for k in 0..code.m2() {
            xwords.push(apply_inverse(code.xword(j, k)));
            ywords.push(apply_inverse(code.yword(j, k)));
        }
    }
    let identity = perm.iter().enumerate().all(|(i, &p)| i == p);
    let decoder = match code.decoder() {
        Decoder::Table { .. } if identity => code.decoder().clone(),
        Decoder::Table { .. } => Decoder::Permuted {
            perm: perm.to_vec(),
            inner: Box::new(code.decoder().clone()),
        },
        // The ML rule under an i.i.d. mixture is permutation covariant:
        // decoding the permuted word against the original codewords is
        // the same as decoding the word against the permuted codewords.
        Decoder::MaxLikelihood { q } => Decoder::MaxLikelihood { q: q.clone() },
        _ => unreachable!("checked by robustify"),
    };
    ConferencingCode::new(
        n,
        code.m1(),
        code.m2(),
        code.protocol().clone(),
        xwords,
        ywords,
        decoder,
        code.meta().clone(),
    )
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    // Lexicographic order for reproducibility.
    let mut perms = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    loop {
        perms.push(current.clone());
        // next_permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    perms
}

// ---------------------------------------------------------------------------
// Randomness reduction
// ---------------------------------------------------------------------------

const REDUCE_MAX_RETRIES: usize = 64;

/// Resamples `n^2` component codes i.i.d. from the random code's
/// distribution and keeps the uniform mixture over the draw as soon as
/// its exact worst-case error is at most `3 * lambda`; retries with fresh
/// draws otherwise.
pub fn reduce_randomness(
    rc: &RandomConferencingCode,
    ch: &ChannelSpec,
    n: usize,
    lambda: f64,
    seed: u64,
) -> Result<RandomConferencingCode, CodingError> {
    if n == 0 {
        return Err(CodingError::InvalidCode("n must be positive".into()));
    }
    let count = n * n;
    let mut best = f64::INFINITY;
    for retry in 0..REDUCE_MAX_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(seed, retry as u64));
        let components: Vec<ConferencingCode> = (0..count)
            .map(|_| {
                let idx = sample_index(&mut rng, |i| rc.weights()[i], rc.components().len());
                rc.components()[idx].clone()
            })
            .collect();
        let reduced = RandomConferencingCode::uniform(components)?;
        let (worst, _) = worst_randomized_error(&reduced, ch)?;
        if worst <= 3.0 * lambda + 1e-12 {
            return Ok(reduced);
        }
        best = best.min(worst);
    }
    Err(CodingError::RetriesExhausted { best })
}

// ---------------------------------------------------------------------------
// Positive-rate prefix code
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PrefixOptions {
    /// Accept the first blocklength/seed whose exact worst-case error is
    /// at most this.
    pub target_error: f64,
    /// Hard upper bound on the prefix blocklength; `None` derives one
    /// from the enumeration caps.
    pub max_blocklength: Option<usize>,
    /// Codebook draws attempted per blocklength.
    pub seeds_per_length: usize,
    pub q: QOptions,
}

impl Default for PrefixOptions {
    fn default() -> Self {
        Self {
            target_error: 0.2,
            max_blocklength: None,
            seeds_per_length: 16,
            q: QOptions::default(),
        }
    }
}

/// Builds a code in which sender 1 carries `count` messages at a positive
/// rate and announces its message verbatim (`c1` is the identity), sender
/// 2 sends a constant. Codeword letters are drawn jointly over `X x Y`
/// from the max-min input of the product-alphabet single-user view; the
/// blocklength is the smallest one meeting the error target within the
/// conferencing budget.
pub fn positive_rate_prefix(
    ch: &ChannelSpec,
    count: usize,
    c1: f64,
    seed: u64,
    opts: &PrefixOptions,
) -> Result<ConferencingCode, CodingError> {
    if count == 0 {
        return Err(CodingError::InvalidCode("count must be positive".into()));
    }
    if !c1.is_finite() || c1 <= 0.0 {
        return Err(CodingError::ConferencingRequired);
    }
    let cert = check_symmetrizable(ch, SymmetrizerKind::XY, DEFAULT_TOLERANCE)?;
    if cert.feasible {
        return Err(CodingError::SymmetrizableChannel);
    }

    let (joint_input, _value) = full_cooperation_input(ch, &opts.q);
    let m_min = if count == 1 {
        1
    } else {
        ((count as f64).log2() / c1 - 1e-9).ceil().max(1.0) as usize
    };
    let m_cap = opts.max_blocklength.unwrap_or_else(|| {
        // Keep the exhaustive worst-case evaluation tractable.
        let mut m = m_min;
        while m < 16 {
            let next = m + 1;
            let states = checked_pow(ch.ns(), next);
            let outputs = checked_pow(ch.nz(), next);
            match (states, outputs) {
                (Some(s), Some(o))
                    if s <= STATE_ENUM_CAP
                        && o <= OUTPUT_ENUM_CAP
                        && s.saturating_mul(o).saturating_mul(next) <= (1 << 28) =>
                {
                    m = next
                }
                _ => break,
            }
        }
        m
    });
    if m_cap < m_min {
        return Err(CodingError::BudgetExceeded(format!(
            "conferencing budget needs blocklength >= {m_min}, cap is {m_cap}"
        )));
    }

    let mut best: Option<(f64, ConferencingCode)> = None;
    for m in m_min..=m_cap {
        for seed_idx in 0..opts.seeds_per_length.max(1) {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed_for(seed, (m * 1009 + seed_idx) as u64));
            let mut xwords = Vec::with_capacity(count);
            let mut ywords = Vec::with_capacity(count);
            for _ in 0..count {
                let mut xw = vec![0usize; m];
                let mut yw = vec![0usize; m];
                for t in 0..m {
                    let pair = sample_index(&mut rng, |i| joint_input[i], joint_input.len());
                    xw[t] = pair / ch.ny();
                    yw[t] = pair % ch.ny();
                }
                xwords.push(xw);
                ywords.push(yw);
            }
            let protocol = ConferencingProtocol::identity_sender1(count, 1);
            if !protocol.within_budget(m, c1, 0.0) {
                continue;
            }
            let meta = CodeMeta {
                decoder_rule: "ml under uniform state mixture".into(),
                seed,
                zeta: None,
            };
            let code = ConferencingCode::new(
                m,
                count,
                1,
                protocol,
                xwords,
                ywords,
                Decoder::MaxLikelihood {
                    q: vec![1.0 / ch.ns() as f64; ch.ns()],
                },
                meta,
            )?
            .with_table_decoder(ch)?;
            let (worst, _) = worst_case_error(&code, ch, WorstCaseMode::Exhaustive)?;
            if worst <= opts.target_error {
                return Ok(code);
            }
            if best.as_ref().is_none_or(|(b, _)| worst < *b) {
                best = Some((worst, code));
            }
        }
    }
    Err(CodingError::BudgetExceeded(format!(
        "no prefix of length <= {m_cap} met error target {}; best achieved {}",
        opts.target_error,
        best.map(|(b, _)| b).unwrap_or(f64::NAN)
    )))
}

// ---------------------------------------------------------------------------
// Elimination of correlation
// ---------------------------------------------------------------------------

/// Blocklength plan for the elimination step: a prefix of length `m`
/// carrying `inner_len^2` messages at rate close to `rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EliminationPlan {
    pub prefix_len: usize,
    pub inner_len: usize,
    pub rate: f64,
    pub epsilon: f64,
}

impl EliminationPlan {
    /// Validates the blocklength window
    /// `(2/rate) log2 n <= m <= (2/(rate-epsilon)) log2 n`.
    pub fn new(
        prefix_len: usize,
        inner_len: usize,
        rate: f64,
        epsilon: f64,
    ) -> Result<Self, CodingError> {
        if prefix_len == 0 || inner_len < 2 {
            return Err(CodingError::InvalidCode(
                "prefix length positive, inner length at least 2".into(),
            ));
        }
        if rate <= 0.0 || rate.is_nan() || epsilon < 0.0 || epsilon.is_nan() || epsilon >= rate {
            return Err(CodingError::InvalidCode(
                "need 0 <= epsilon < rate".into(),
            ));
        }
        let log_n = (inner_len as f64).log2();
        let lower = 2.0 / rate * log_n;
        let upper = 2.0 / (rate - epsilon) * log_n;
        let m = prefix_len as f64;
        if m < lower - 1e-9 || m > upper + 1e-9 {
            return Err(CodingError::BudgetViolation(format!(
                "prefix length {m} outside [{lower:.3}, {upper:.3}]"
            )));
        }
        Ok(Self {
            prefix_len,
            inner_len,
            rate,
            epsilon,
        })
    }

    /// The minimal-blocklength plan for a target prefix rate.
    pub fn for_rate(inner_len: usize, rate: f64, epsilon: f64) -> Result<Self, CodingError> {
        if rate <= 0.0 || rate.is_nan() || inner_len < 2 {
            return Err(CodingError::InvalidCode("invalid plan parameters".into()));
        }
        let m = (2.0 / rate * (inner_len as f64).log2()).ceil().max(1.0) as usize;
        // The realized rate is at most the target, so the window holds.
        let realized = 2.0 * (inner_len as f64).log2() / m as f64;
        Self::new(m, inner_len, realized, epsilon.min(realized / 2.0))
    }

    /// The conferencing rate spent on announcing the component index:
    /// `log2(n^2) / (m + n)`. Tends to zero in the inner blocklength.
    pub fn effective_prefix_rate(&self) -> f64 {
        2.0 * (self.inner_len as f64).log2() / (self.prefix_len + self.inner_len) as f64
    }
}

/// Concatenates a prefix code announcing the component index with the
/// components of a random code: message `(gamma, j)` sends the prefix
/// word for `gamma` followed by component `gamma`'s word for `(j, k)`,
/// and the receiver decodes the prefix first. The worst-case error is at
/// most the sum of the prefix's and the random code's worst-case errors.
pub fn eliminate_correlation(
    prefix: &ConferencingCode,
    rc: &RandomConferencingCode,
    c1: f64,
    c2: f64,
) -> Result<ConferencingCode, CodingError> {
    let groups = rc.components().len();
    if prefix.m2() != 1 {
        return Err(CodingError::ComponentMismatch(
            "prefix must carry sender-1 messages only".into(),
        ));
    }
    if prefix.m1() != groups {
        return Err(CodingError::ComponentMismatch(format!(
            "prefix distinguishes {} messages but the random code has {} components",
            prefix.m1(),
            groups
        )));
    }
    match prefix.decoder() {
        Decoder::Table { .. } | Decoder::MaxLikelihood { .. } => {}
        _ => {
            return Err(CodingError::InvalidCode(
                "prefix decoder must be single-stage".into(),
            ))
        }
    }
    let m = prefix.n();
    let n = rc.n();
    let inner = rc.components();
    let inner_m1 = rc.m1();
    let inner_m2 = rc.m2();
    let inner_protocol = rc.protocol();

    // Conferencing budget of the combined code.
    let v1_combined = groups * inner_protocol.v1();
    let v2_combined = inner_protocol.v2();
    let total_len = (m + n) as f64;
    if (v1_combined as f64).log2() > total_len * c1 + 1e-9 {
        return Err(CodingError::BudgetViolation(format!(
            "log2({v1_combined}) / {} exceeds C1 = {c1}",
            m + n
        )));
    }
    if (v2_combined as f64).log2() > total_len * c2 + 1e-9 {
        return Err(CodingError::BudgetViolation(format!(
            "log2({v2_combined}) / {} exceeds C2 = {c2}",
            m + n
        )));
    }
    // The standard instantiation announces n^2 components; validate its
    // blocklength window when that is the case.
    if groups == n * n && groups >= 2 {
        let realized_rate = (groups as f64).log2() / m as f64;
        EliminationPlan::new(m, n, realized_rate, 0.0)?;
    }

    let m1_combined = groups * inner_m1;
    let mut c1_combined = Vec::with_capacity(m1_combined);
    for gamma in 0..groups {
        for j in 0..inner_m1 {
            c1_combined.push(gamma * inner_protocol.v1() + inner_protocol.c1(j));
        }
    }
    let c2_combined: Vec<usize> = (0..inner_m2).map(|k| inner_protocol.c2(k)).collect();
    let protocol = ConferencingProtocol::new(c1_combined, v1_combined, c2_combined, v2_combined)?;

    let mut xwords = Vec::with_capacity(m1_combined * inner_m2);
    let mut ywords = Vec::with_capacity(m1_combined * inner_m2);
    for gamma in 0..groups {
        let comp = &inner[gamma];
        for j in 0..inner_m1 {
            for k in 0..inner_m2 {
                let mut xw = Vec::with_capacity(m + n);
                xw.extend_from_slice(prefix.xword(gamma, 0));
                xw.extend_from_slice(comp.xword(j, k));
                xwords.push(xw);
                let mut yw = Vec::with_capacity(m + n);
                yw.extend_from_slice(prefix.yword(gamma, 0));
                yw.extend_from_slice(comp.yword(j, k));
                ywords.push(yw);
            }
        }
    }
    let decoder = Decoder::Product {
        prefix_len: m,
        inner_m1,
        prefix: Box::new(prefix.decoder().clone()),
        inner: inner.iter().map(|c| c.decoder().clone()).collect(),
    };
    let meta = CodeMeta {
        decoder_rule: format!(
            "prefix({}) then {}",
            prefix.meta().decoder_rule,
            inner[0].meta().decoder_rule
        ),
        seed: prefix.meta().seed,
        zeta: None,
    };
    ConferencingCode::new(
        m + n,
        m1_combined,
        inner_m2,
        protocol,
        xwords,
        ywords,
        decoder,
        meta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{builtin_channel, StateSequence};
    use crate::coding::evaluate::exact_average_error;

    #[test]
    fn trivial_single_message_compound_code() {
        let ch = builtin_channel("gubner").unwrap();
        let policy = InputPolicy::uniform_independent(2, 2);
        let code = build_compound_code(
            &ch,
            &policy,
            4,
            (0.0, 0.0),
            0.0,
            0.0,
            1,
            &CompoundCodeOptions::default(),
        )
        .unwrap();
        assert_eq!((code.m1(), code.m2()), (1, 1));
        let (worst, _) = worst_case_error(&code, &ch, WorstCaseMode::Exhaustive).unwrap();
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn compound_code_on_the_adder_reaches_low_error() {
        // Statistical acceptance: some seed among 16 gets below 0.2.
        let ch = builtin_channel("adder-noiseless").unwrap();
        let policy = InputPolicy::uniform_independent(2, 2);
        let mut best = f64::INFINITY;
        for seed in 0..16 {
            let code = build_compound_code(
                &ch,
                &policy,
                6,
                (0.5, 0.5),
                0.0,
                0.0,
                seed,
                &CompoundCodeOptions::default(),
            )
            .unwrap();
            let (worst, _) = worst_case_error(&code, &ch, WorstCaseMode::Exhaustive).unwrap();
            best = best.min(worst);
            if best < 0.2 {
                break;
            }
        }
        assert!(best < 0.2, "best worst-case error {best}");
    }

    #[test]
    fn infeasible_rates_are_rejected() {
        let ch = builtin_channel("gubner").unwrap();
        let policy = InputPolicy::uniform_independent(2, 2);
        let err = build_compound_code(
            &ch,
            &policy,
            4,
            (2.5, 0.0),
            0.0,
            0.0,
            1,
            &CompoundCodeOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CodingError::RateInfeasible(_)));
    }

    #[test]
    fn conferencing_binning_respects_consistency() {
        let ch = builtin_channel("gubner").unwrap();
        let policy = InputPolicy::from_joint(&[0.25; 4], 2, 2).unwrap();
        // c1 = 0.25 at n = 4 allows V1 = 2 bins over M1 = 4 messages.
        let code = build_compound_code(
            &ch,
            &policy,
            4,
            (0.4, 0.0),
            1.0,
            0.0,
            3,
            &CompoundCodeOptions { gap: 0.02, q: QOptions::default() },
        )
        .unwrap();
        assert!(code.protocol().within_budget(4, 1.0, 0.0));
    }

    #[test]
    fn robustify_single_letter_is_identity() {
        let ch = builtin_channel("gubner").unwrap();
        let mut rng = {
            use rand::SeedableRng;
            ChaCha8Rng::seed_from_u64(4)
        };
        let code = crate::coding::random_code(&mut rng, &ch, 1, 2, 1).unwrap();
        let rc = robustify(&code, &RobustifyOptions::default()).unwrap();
        assert_eq!(rc.components().len(), 1);
        assert_eq!(rc.components()[0], code);
    }

    #[test]
    fn robustified_components_relabel_the_state_sequence() {
        // Exact identity: component pi's error at s equals the base
        // code's error at pi(s), for all six permutations at n = 3.
        let ch = builtin_channel("gubner").unwrap();
        let mut rng = {
            use rand::SeedableRng;
            ChaCha8Rng::seed_from_u64(5)
        };
        let code = crate::coding::random_code(&mut rng, &ch, 3, 2, 2).unwrap();
        let rc = robustify(&code, &RobustifyOptions::default()).unwrap();
        let perms = all_permutations(3);
        assert_eq!(rc.components().len(), 6);
        for s_rank in 0..8usize {
            let s = vec![s_rank & 1, (s_rank >> 1) & 1, (s_rank >> 2) & 1];
            for (perm, comp) in perms.iter().zip(rc.components()) {
                let permuted: Vec<usize> = (0..3).map(|t| s[perm[t]]).collect();
                let lhs = exact_average_error(
                    comp,
                    &ch,
                    &StateSequence::new(s.clone(), 2).unwrap(),
                )
                .unwrap();
                let rhs = exact_average_error(
                    &code,
                    &ch,
                    &StateSequence::new(permuted, 2).unwrap(),
                )
                .unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "perm {perm:?}");
            }
        }
    }

    #[test]
    fn robustify_samples_permutations_beyond_the_full_group_cap() {
        // n = 7 exceeds the full-group cap, so components come from a
        // seeded sample; the relabeling identity must still hold for
        // every sampled permutation.
        let ch = builtin_channel("gubner").unwrap();
        let mut rng = {
            use rand::SeedableRng;
            ChaCha8Rng::seed_from_u64(30)
        };
        let code = crate::coding::random_code(&mut rng, &ch, 7, 2, 1).unwrap();
        let opts = RobustifyOptions {
            sample_count: 8,
            seed: 31,
            ..RobustifyOptions::default()
        };
        let rc = robustify(&code, &opts).unwrap();
        assert_eq!(rc.components().len(), 8);
        // Recover each component's permutation from its first codeword.
        for comp in rc.components() {
            let Decoder::Permuted { perm, .. } = comp.decoder() else {
                panic!("sampled components wrap the table decoder");
            };
            for s_rank in [0usize, 5, 100] {
                let s: Vec<usize> = (0..7).map(|t| (s_rank >> t) & 1).collect();
                let permuted: Vec<usize> = (0..7).map(|t| s[perm[t]]).collect();
                let lhs = exact_average_error(
                    comp,
                    &ch,
                    &StateSequence::new(s, 2).unwrap(),
                )
                .unwrap();
                let rhs = exact_average_error(
                    &code,
                    &ch,
                    &StateSequence::new(permuted, 2).unwrap(),
                )
                .unwrap();
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reduction_of_a_deterministic_code_copies_it() {
        let ch = builtin_channel("gubner").unwrap();
        let mut rng = {
            use rand::SeedableRng;
            ChaCha8Rng::seed_from_u64(6)
        };
        let code = crate::coding::random_code(&mut rng, &ch, 3, 2, 1).unwrap();
        let rc = RandomConferencingCode::uniform(vec![code.clone()]).unwrap();
        let (lambda, _) = worst_randomized_error(&rc, &ch).unwrap();
        let reduced = reduce_randomness(&rc, &ch, 3, lambda.max(0.01), 7).unwrap();
        assert_eq!(reduced.components().len(), 9);
        for comp in reduced.components() {
            assert_eq!(comp, &code);
        }
    }

    #[test]
    fn reduction_meets_the_three_lambda_bound_at_n5() {
        // Robustified code at n = 5: the reduced uniform mixture over
        // n^2 = 25 drawn components stays within 3x the measured
        // randomized worst-case error on all 32 state sequences.
        let ch = builtin_channel("gubner").unwrap();
        let policy = InputPolicy::uniform_independent(2, 2);
        let inner = build_compound_code(
            &ch,
            &policy,
            5,
            (0.2, 0.0),
            0.0,
            0.0,
            20,
            &CompoundCodeOptions::default(),
        )
        .unwrap();
        let rc = robustify(&inner, &RobustifyOptions::default()).unwrap();
        assert_eq!(rc.components().len(), 120);
        let (lambda, _) = worst_randomized_error(&rc, &ch).unwrap();
        let reduced = reduce_randomness(&rc, &ch, 5, lambda, 21).unwrap();
        assert_eq!(reduced.components().len(), 25);
        for rank in 0..32usize {
            let s = StateSequence::new(
                (0..5).map(|t| (rank >> t) & 1).collect(),
                2,
            )
            .unwrap();
            let err = crate::coding::evaluate::randomized_error(&reduced, &ch, &s).unwrap();
            assert!(err <= 3.0 * lambda + 1e-12, "s rank {rank}: {err} > 3*{lambda}");
        }
    }

    #[test]
    fn prefix_refuses_symmetrizable_channels() {
        let ch = builtin_channel("xor").unwrap();
        let err = positive_rate_prefix(&ch, 4, 1.0, 1, &PrefixOptions::default()).unwrap_err();
        assert!(matches!(err, CodingError::SymmetrizableChannel));
    }

    #[test]
    fn prefix_on_gubner_meets_the_error_target() {
        let ch = builtin_channel("gubner").unwrap();
        let code = positive_rate_prefix(&ch, 4, 1.0, 2, &PrefixOptions::default()).unwrap();
        assert!(code.n() <= 12);
        assert_eq!(code.m2(), 1);
        assert_eq!(code.m1(), 4);
        // c1 is the identity on the message set.
        assert_eq!(code.protocol().v1(), 4);
        for j in 0..4 {
            assert_eq!(code.protocol().c1(j), j);
        }
        let (worst, _) = worst_case_error(&code, &ch, WorstCaseMode::Exhaustive).unwrap();
        assert!(worst < 0.25, "worst {worst}");
    }

    #[test]
    fn trivial_prefix_count_one() {
        let ch = builtin_channel("gubner").unwrap();
        let code = positive_rate_prefix(&ch, 1, 0.5, 3, &PrefixOptions::default()).unwrap();
        let (worst, _) = worst_case_error(&code, &ch, WorstCaseMode::Exhaustive).unwrap();
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn elimination_with_one_component_degenerates_to_it() {
        let ch = builtin_channel("gubner").unwrap();
        let mut rng = {
            use rand::SeedableRng;
            ChaCha8Rng::seed_from_u64(8)
        };
        let component = crate::coding::random_code(&mut rng, &ch, 3, 2, 2).unwrap();
        let rc = RandomConferencingCode::uniform(vec![component.clone()]).unwrap();
        let prefix = positive_rate_prefix(&ch, 1, 1.0, 9, &PrefixOptions::default()).unwrap();
        let combined = eliminate_correlation(&prefix, &rc, 1.0, 0.0).unwrap();
        assert_eq!(combined.n(), prefix.n() + 3);
        for s_suffix in 0..8usize {
            let suffix = vec![s_suffix & 1, (s_suffix >> 1) & 1, (s_suffix >> 2) & 1];
            for s_pre in 0..2usize {
                let mut s = vec![s_pre];
                s.extend_from_slice(&suffix);
                let combined_err = exact_average_error(
                    &combined,
                    &ch,
                    &StateSequence::new(s, 2).unwrap(),
                )
                .unwrap();
                let comp_err = exact_average_error(
                    &component,
                    &ch,
                    &StateSequence::new(suffix.clone(), 2).unwrap(),
                )
                .unwrap();
                assert!((combined_err - comp_err).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn elimination_budget_is_enforced() {
        let ch = builtin_channel("gubner").unwrap();
        let policy = InputPolicy::uniform_independent(2, 2);
        let inner = build_compound_code(
            &ch,
            &policy,
            3,
            (1.0 / 3.0, 0.0),
            0.0,
            0.0,
            10,
            &CompoundCodeOptions::default(),
        )
        .unwrap();
        let rc = robustify(&inner, &RobustifyOptions::default()).unwrap();
        let reduced = reduce_randomness(&rc, &ch, 3, 1.0, 11).unwrap();
        let prefix = positive_rate_prefix(&ch, 9, 1.0, 12, &PrefixOptions::default()).unwrap();
        // A tiny C1 cannot pay for announcing 9 components.
        let err = eliminate_correlation(&prefix, &reduced, 0.01, 0.0).unwrap_err();
        assert!(matches!(err, CodingError::BudgetViolation(_)));
    }

    #[test]
    fn elimination_plan_windows() {
        let plan = EliminationPlan::for_rate(8, 0.5, 0.05).unwrap();
        assert_eq!(plan.prefix_len, 12);
        assert!(EliminationPlan::new(5, 8, 0.5, 0.05).is_err()); // too short
        // Effective prefix conferencing rate decreases in the inner
        // blocklength at fixed rate.
        let rates: Vec<f64> = [8usize, 16, 32]
            .iter()
            .map(|&n| {
                EliminationPlan::for_rate(n, 0.5, 0.05)
                    .unwrap()
                    .effective_prefix_rate()
            })
            .collect();
        assert!(rates[0] > rates[1] && rates[1] > rates[2], "{rates:?}");
    }

    #[test]
    fn full_pipeline_error_bound_holds() {
        // Small end-to-end chain on the Gubner channel.
        let ch = builtin_channel("gubner").unwrap();
        let policy = InputPolicy::uniform_independent(2, 2);
        let n = 3;
        let inner = build_compound_code(
            &ch,
            &policy,
            n,
            (1.0 / 3.0, 0.0),
            0.0,
            0.0,
            13,
            &CompoundCodeOptions::default(),
        )
        .unwrap();
        let rc = robustify(&inner, &RobustifyOptions::default()).unwrap();
        let (lambda, _) = worst_randomized_error(&rc, &ch).unwrap();
        let reduced = reduce_randomness(&rc, &ch, n, lambda.max(1e-6), 14).unwrap();
        let (reduced_err, _) = worst_randomized_error(&reduced, &ch).unwrap();
        let prefix =
            positive_rate_prefix(&ch, n * n, 1.0, 15, &PrefixOptions::default()).unwrap();
        let (prefix_err, _) = worst_case_error(&prefix, &ch, WorstCaseMode::Exhaustive).unwrap();
        let combined = eliminate_correlation(&prefix, &reduced, 1.0, 0.0).unwrap();
        let (combined_err, _) =
            worst_case_error(&combined, &ch, WorstCaseMode::Exhaustive).unwrap();
        assert!(
            combined_err <= prefix_err + reduced_err + 1e-9,
            "combined {combined_err} vs prefix {prefix_err} + random {reduced_err}"
        );
        // Sender 1 carries log2(9 * M1) bits over m + n letters.
        let (r1, _) = combined.rates();
        assert!(r1 > 0.0);
    }
}
