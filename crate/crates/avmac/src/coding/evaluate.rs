//! Error evaluation for conferencing codes: exact enumeration below the
//! caps, Monte Carlo above them, and worst-case search over state
//! sequences (exhaustive, greedy, or sampled over product attack
//! distributions).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{for_each_word, ChannelSpec, StateSequence};

use super::{checked_pow, CodingError, ConferencingCode, Decoder, RandomConferencingCode};

/// Largest number of state sequences enumerated exhaustively.
pub const STATE_ENUM_CAP: usize = 1 << 16;
/// Largest number of output words enumerated exhaustively.
pub const OUTPUT_ENUM_CAP: usize = 1 << 20;
/// Suggested sample count when falling back to Monte Carlo beyond the
/// enumeration caps.
pub const MC_DEFAULT_SAMPLES: usize = 100_000;

/// Per-letter channel matrices induced by a state sequence or by a
/// sequence of per-letter priors; `eff[t]` is an `nx*ny*nz` table.
struct EffectiveChannel {
    nx: usize,
    ny: usize,
    nz: usize,
    eff: Vec<f64>,
}

impl EffectiveChannel {
    fn from_states(ch: &ChannelSpec, s: &[usize]) -> Self {
        let (nx, ny, nz) = (ch.nx(), ch.ny(), ch.nz());
        let mut eff = vec![0.0; s.len() * nx * ny * nz];
        for (t, &st) in s.iter().enumerate() {
            for x in 0..nx {
                for y in 0..ny {
                    for z in 0..nz {
                        eff[((t * nx + x) * ny + y) * nz + z] = ch.w(st, x, y, z);
                    }
                }
            }
        }
        Self { nx, ny, nz, eff }
    }

    fn from_priors(ch: &ChannelSpec, qs: &[Vec<f64>]) -> Self {
        let (nx, ny, nz) = (ch.nx(), ch.ny(), ch.nz());
        let mut eff = vec![0.0; qs.len() * nx * ny * nz];
        for (t, q) in qs.iter().enumerate() {
            for x in 0..nx {
                for y in 0..ny {
                    for z in 0..nz {
                        eff[((t * nx + x) * ny + y) * nz + z] = ch.mixture_prob(q, x, y, z);
                    }
                }
            }
        }
        Self { nx, ny, nz, eff }
    }

    #[inline]
    fn p(&self, t: usize, x: usize, y: usize, z: usize) -> f64 {
        self.eff[((t * self.nx + x) * self.ny + y) * self.nz + z]
    }

    fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let per = self.nx * self.ny * self.nz;
        Self {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            eff: self.eff[range.start * per..range.end * per].to_vec(),
        }
    }
}

#[inline]
fn word_probability(eff: &EffectiveChannel, xw: &[usize], yw: &[usize], zw: &[usize]) -> f64 {
    let mut p = 1.0;
    for (t, &z) in zw.iter().enumerate() {
        p *= eff.p(t, xw[t], yw[t], z);
        if p == 0.0 {
            return 0.0;
        }
    }
    p
}

/// Average success probability over all message pairs under the decoder,
/// for a flat (non-product) code view.
fn flat_average_success(
    ch: &ChannelSpec,
    code: &ConferencingCode,
    eff: &EffectiveChannel,
) -> Result<f64, CodingError> {
    checked_pow(ch.nz(), code.n())
        .filter(|&t| t <= OUTPUT_ENUM_CAP)
        .ok_or_else(|| {
            CodingError::CapExceeded(format!(
                "{}^{} output words exceed the enumeration cap",
                ch.nz(),
                code.n()
            ))
        })?;
    let mut success = 0.0;
    for_each_word(ch.nz(), code.n(), |zw| {
        let (j, k) = code.decode(ch, zw);
        success += word_probability(eff, code.xword(j, k), code.yword(j, k), zw);
    });
    Ok(success / code.message_pairs() as f64)
}

/// Average success for a product-decoder code: the prefix and the
/// selected component act on disjoint coordinate blocks, so the success
/// factorizes per prefix message.
fn product_average_success(
    ch: &ChannelSpec,
    code: &ConferencingCode,
    eff: &EffectiveChannel,
) -> Result<f64, CodingError> {
    let Decoder::Product {
        prefix_len,
        inner_m1,
        ..
    } = code.decoder()
    else {
        unreachable!("caller dispatches on the decoder");
    };
    let (m, inner_m1) = (*prefix_len, *inner_m1);
    let groups = code.m1() / inner_m1;
    let eff_pre = eff.slice(0..m);
    let eff_suf = eff.slice(m..code.n());
    let alpha = prefix_success_vector(ch, code, &eff_pre)?;
    let mut total = 0.0;
    for gamma in 0..groups {
        let beta = component_average_success(ch, code, gamma, &eff_suf)?;
        total += alpha[gamma] * beta;
    }
    Ok(total / groups as f64)
}

/// `alpha[gamma] = W^m(F*_gamma | x*_gamma, y*_gamma)` for every prefix
/// message, in one pass over the prefix output space.
fn prefix_success_vector(
    ch: &ChannelSpec,
    code: &ConferencingCode,
    eff_pre: &EffectiveChannel,
) -> Result<Vec<f64>, CodingError> {
    let Decoder::Product {
        prefix_len,
        inner_m1,
        prefix,
        ..
    } = code.decoder()
    else {
        unreachable!();
    };
    let (m, inner_m1) = (*prefix_len, *inner_m1);
    let groups = code.m1() / inner_m1;
    checked_pow(ch.nz(), m)
        .filter(|&t| t <= OUTPUT_ENUM_CAP)
        .ok_or_else(|| CodingError::CapExceeded("prefix output space too large".into()))?;
    let mut alpha = vec![0.0; groups];
    for_each_word(ch.nz(), m, |zw| {
        let (gamma, _) = super::decode_flat(ch, prefix, zw, groups, 1, &|g, _| {
            (
                &code.xword(g * inner_m1, 0)[..m],
                &code.yword(g * inner_m1, 0)[..m],
            )
        });
        alpha[gamma] += word_probability(
            eff_pre,
            &code.xword(gamma * inner_m1, 0)[..m],
            &code.yword(gamma * inner_m1, 0)[..m],
            zw,
        );
    });
    Ok(alpha)
}

/// Average success of component `gamma` of a product code on the suffix
/// block.
fn component_average_success(
    ch: &ChannelSpec,
    code: &ConferencingCode,
    gamma: usize,
    eff_suf: &EffectiveChannel,
) -> Result<f64, CodingError> {
    let Decoder::Product {
        prefix_len,
        inner_m1,
        inner,
        ..
    } = code.decoder()
    else {
        unreachable!();
    };
    let (m, inner_m1) = (*prefix_len, *inner_m1);
    let n_suf = code.n() - m;
    checked_pow(ch.nz(), n_suf)
        .filter(|&t| t <= OUTPUT_ENUM_CAP)
        .ok_or_else(|| CodingError::CapExceeded("component output space too large".into()))?;
    let mut success = 0.0;
    for_each_word(ch.nz(), n_suf, |zw| {
        let (j, k) = super::decode_flat(ch, &inner[gamma], zw, inner_m1, code.m2(), &|j, k| {
            (
                &code.xword(gamma * inner_m1 + j, k)[m..],
                &code.yword(gamma * inner_m1 + j, k)[m..],
            )
        });
        success += word_probability(
            eff_suf,
            &code.xword(gamma * inner_m1 + j, k)[m..],
            &code.yword(gamma * inner_m1 + j, k)[m..],
            zw,
        );
    });
    Ok(success / (inner_m1 * code.m2()) as f64)
}

fn average_error_with(
    code: &ConferencingCode,
    ch: &ChannelSpec,
    eff: &EffectiveChannel,
) -> Result<f64, CodingError> {
    let success = match code.decoder() {
        Decoder::Product { .. } => product_average_success(ch, code, eff)?,
        _ => flat_average_success(ch, code, eff)?,
    };
    Ok((1.0 - success).max(0.0))
}

/// Exact average error of the code at a fixed state sequence, by full
/// enumeration of the output space (factorized for eliminated codes).
pub fn exact_average_error(
    code: &ConferencingCode,
    ch: &ChannelSpec,
    s: &StateSequence,
) -> Result<f64, CodingError> {
    if s.len() != code.n() {
        return Err(CodingError::LengthMismatch(format!(
            "state sequence has length {}, code blocklength is {}",
            s.len(),
            code.n()
        )));
    }
    let eff = EffectiveChannel::from_states(ch, s.as_slice());
    average_error_with(code, ch, &eff)
}

/// Exact average error against a product attack distribution: letter `t`
/// of the state sequence is drawn independently with prior `qs[t]`.
pub fn exact_average_error_qseq(
    code: &ConferencingCode,
    ch: &ChannelSpec,
    qs: &[Vec<f64>],
) -> Result<f64, CodingError> {
    if qs.len() != code.n() {
        return Err(CodingError::LengthMismatch(format!(
            "{} per-letter priors for blocklength {}",
            qs.len(),
            code.n()
        )));
    }
    for q in qs {
        if q.len() != ch.ns() {
            return Err(CodingError::LengthMismatch(
                "prior dimension does not match the state set".into(),
            ));
        }
    }
    let eff = EffectiveChannel::from_priors(ch, qs);
    average_error_with(code, ch, &eff)
}

/// Monte Carlo estimate of the average error at a fixed state sequence.
/// Returns the estimate and its 99% normal-approximation half-width.
pub fn monte_carlo_average_error(
    code: &ConferencingCode,
    ch: &ChannelSpec,
    s: &StateSequence,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), CodingError> {
    if s.len() != code.n() {
        return Err(CodingError::LengthMismatch(
            "state sequence length".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = 0usize;
    let mut zw = vec![0usize; code.n()];
    for _ in 0..samples {
        let j = rng.gen_range(0..code.m1());
        let k = rng.gen_range(0..code.m2());
        let xw = code.xword(j, k);
        let yw = code.yword(j, k);
        for (t, z) in zw.iter_mut().enumerate() {
            *z = sample_output(&mut rng, ch.row(s.as_slice()[t], xw[t], yw[t]));
        }
        if code.decode(ch, &zw) != (j, k) {
            errors += 1;
        }
    }
    let p = errors as f64 / samples as f64;
    let half_width = 2.576 * (p * (1.0 - p) / samples as f64).sqrt();
    Ok((p, half_width))
}

pub(crate) fn sample_output<R: Rng>(rng: &mut R, row: &[f64]) -> usize {
    let u: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (z, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return z;
        }
    }
    row.len() - 1
}

/// Strategy for the worst-case error search.
#[derive(Debug, Clone, Copy)]
pub enum WorstCaseMode {
    /// Exact maximum over all state sequences (within the cap).
    Exhaustive,
    /// Letter-by-letter construction; each position picks the state that
    /// maximizes the exact error of the partially fixed attack with the
    /// remaining letters averaged under the uniform prior.
    Greedy,
    /// Maximum over sampled product attack distributions, each pushed to
    /// a vertex by per-letter maximization.
    Sampled { draws: usize, seed: u64 },
}

/// Worst-case average error over state sequences and a witness sequence.
pub fn worst_case_error(
    code: &ConferencingCode,
    ch: &ChannelSpec,
    mode: WorstCaseMode,
) -> Result<(f64, StateSequence), CodingError> {
    match mode {
        WorstCaseMode::Exhaustive => worst_case_exhaustive(code, ch),
        WorstCaseMode::Greedy => {
            let s = greedy_state_sequence(code, ch)?;
            let err = exact_average_error(code, ch, &s)?;
            Ok((err, s))
        }
        WorstCaseMode::Sampled { draws, seed } => worst_case_sampled(code, ch, draws, seed),
    }
}

fn worst_case_exhaustive(
    code: &ConferencingCode,
    ch: &ChannelSpec,
) -> Result<(f64, StateSequence), CodingError> {
    let n = code.n();
    let total = checked_pow(ch.ns(), n)
        .filter(|&t| t <= STATE_ENUM_CAP)
        .ok_or_else(|| {
            CodingError::CapExceeded(format!(
                "{}^{} state sequences exceed the enumeration cap",
                ch.ns(),
                n
            ))
        })?;
    let errors: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|rank| {
            let seq = StateSequence::new(unrank(rank, ch.ns(), n), ch.ns()).expect("in range");
            exact_average_error(code, ch, &seq)
        })
        .collect::<Result<_, _>>()?;
    // Deterministic winner: the largest error at the smallest rank.
    let mut best = (0usize, -1.0);
    for (rank, &err) in errors.iter().enumerate() {
        if err > best.1 {
            best = (rank, err);
        }
    }
    let s = StateSequence::new(unrank(best.0, ch.ns(), n), ch.ns()).expect("in range");
    Ok((best.1, s))
}

fn unrank(mut rank: usize, base: usize, len: usize) -> Vec<usize> {
    let mut word = vec![0usize; len];
    for slot in word.iter_mut().rev() {
        *slot = rank % base;
        rank /= base;
    }
    word
}

/// The greedy attack sequence: position by position, pick the state
/// maximizing the exact error of the prefix-fixed attack with uniform
/// padding. Deterministic; ties break toward the smaller state.
pub fn greedy_state_sequence(
    code: &ConferencingCode,
    ch: &ChannelSpec,
) -> Result<StateSequence, CodingError> {
    let n = code.n();
    let ns = ch.ns();
    let uniform = vec![1.0 / ns as f64; ns];
    let mut qs: Vec<Vec<f64>> = vec![uniform; n];
    let mut chosen = vec![0usize; n];
    for t in 0..n {
        let mut best_state = 0usize;
        let mut best_err = -1.0;
        for state in 0..ns {
            let mut dirac = vec![0.0; ns];
            dirac[state] = 1.0;
            qs[t] = dirac;
            let err = exact_average_error_qseq(code, ch, &qs)?;
            if err > best_err + 1e-15 {
                best_err = err;
                best_state = state;
            }
        }
        let mut dirac = vec![0.0; ns];
        dirac[best_state] = 1.0;
        qs[t] = dirac;
        chosen[t] = best_state;
    }
    Ok(StateSequence::new(chosen, ns).expect("in range"))
}

fn worst_case_sampled(
    code: &ConferencingCode,
    ch: &ChannelSpec,
    draws: usize,
    seed: u64,
) -> Result<(f64, StateSequence), CodingError> {
    let n = code.n();
    let ns = ch.ns();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_err = -1.0;
    let mut best_s = vec![0usize; n];
    for _ in 0..draws.max(1) {
        // A random product attack distribution...
        let mut qs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut v: Vec<f64> = (0..ns)
                    .map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln())
                    .collect();
                let sum: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= sum);
                v
            })
            .collect();
        // ...pushed to a vertex: the error is multilinear in the
        // per-letter priors, so coordinate-wise maximization only
        // improves it.
        let mut s = vec![0usize; n];
        for t in 0..n {
            let mut best_state = 0usize;
            let mut best_here = -1.0;
            for state in 0..ns {
                let mut dirac = vec![0.0; ns];
                dirac[state] = 1.0;
                qs[t] = dirac;
                let err = exact_average_error_qseq(code, ch, &qs)?;
                if err > best_here + 1e-15 {
                    best_here = err;
                    best_state = state;
                }
            }
            let mut dirac = vec![0.0; ns];
            dirac[best_state] = 1.0;
            qs[t] = dirac;
            s[t] = best_state;
        }
        let err = exact_average_error_qseq(code, ch, &qs)?;
        if err > best_err {
            best_err = err;
            best_s = s;
        }
    }
    Ok((
        best_err,
        StateSequence::new(best_s, ns).expect("in range"),
    ))
}

/// Average error of a random code at a state sequence: the weighted
/// average of its components' errors.
pub fn randomized_error(
    rc: &RandomConferencingCode,
    ch: &ChannelSpec,
    s: &StateSequence,
) -> Result<f64, CodingError> {
    let mut total = 0.0;
    for (code, &w) in rc.components().iter().zip(rc.weights()) {
        if w > 0.0 {
            total += w * exact_average_error(code, ch, s)?;
        }
    }
    Ok(total)
}

/// Exact worst-case randomized error over all state sequences.
pub fn worst_randomized_error(
    rc: &RandomConferencingCode,
    ch: &ChannelSpec,
) -> Result<(f64, StateSequence), CodingError> {
    let n = rc.n();
    let total = checked_pow(ch.ns(), n)
        .filter(|&t| t <= STATE_ENUM_CAP)
        .ok_or_else(|| CodingError::CapExceeded("state space too large".into()))?;
    let results: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|rank| {
            let seq = StateSequence::new(unrank(rank, ch.ns(), n), ch.ns()).expect("in range");
            randomized_error(rc, ch, &seq)
        })
        .collect::<Result<_, _>>()?;
    let mut best = (0usize, -1.0);
    for (rank, &err) in results.iter().enumerate() {
        if err > best.1 {
            best = (rank, err);
        }
    }
    let s = StateSequence::new(unrank(best.0, ch.ns(), n), ch.ns()).expect("in range");
    Ok((best.1, s))
}
