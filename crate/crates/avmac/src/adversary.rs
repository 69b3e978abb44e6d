//! State-sequence attacks against concrete codes: the exact exhaustive
//! maximum, a greedy letterwise heuristic, and the symmetrizer attack
//! that draws states from a symmetrizing kernel applied to a spoofed
//! codeword. On a symmetrizable channel the receiver cannot tell the
//! spoofed pair from the transmitted one, which forces an average error
//! of at least 1/4 as soon as there are two message pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{ChannelSpec, StateSequence};
use crate::coding::{
    exact_average_error, greedy_state_sequence, worst_case_error, CodingError, ConferencingCode,
    WorstCaseMode,
};
use crate::symmetrizability::{SymmetrizerCertificate, SymmetrizerKind};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("certificate is not feasible; the symmetrizer attack needs a symmetrizable channel")]
    InfeasibleCertificate,
    #[error("certificate shape does not match the channel: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Coding(#[from] CodingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackStrategy {
    Exhaustive,
    Greedy,
    Symmetrizer(SymmetrizerKind),
}

impl AttackStrategy {
    pub fn label(&self) -> String {
        match self {
            AttackStrategy::Exhaustive => "exhaustive".into(),
            AttackStrategy::Greedy => "greedy".into(),
            AttackStrategy::Symmetrizer(kind) => {
                format!("symmetrizer-{}", kind.label().to_lowercase())
            }
        }
    }
}

/// What the adversary used: a concrete worst sequence, or the kernel that
/// induced a distribution over sequences.
#[derive(Debug, Clone)]
pub enum AttackWitness {
    Sequence(StateSequence),
    Kernel {
        kind: SymmetrizerKind,
        sigma: Vec<f64>,
        rows: usize,
    },
}

#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub strategy: AttackStrategy,
    /// Average error achieved (exact for exhaustive/greedy, Monte Carlo
    /// for the symmetrizer attack).
    pub achieved: f64,
    pub witness: AttackWitness,
    /// Error evaluations or simulation draws spent.
    pub evaluations: usize,
    /// 99% half-width of the estimate when it is Monte Carlo.
    pub half_width: Option<f64>,
}

/// Exact maximum of the average error over all state sequences.
pub fn exhaustive_attack(
    code: &ConferencingCode,
    ch: &ChannelSpec,
) -> Result<AttackOutcome, AttackError> {
    let (achieved, witness) = worst_case_error(code, ch, WorstCaseMode::Exhaustive)?;
    let evaluations = ch.ns().pow(code.n() as u32);
    Ok(AttackOutcome {
        strategy: AttackStrategy::Exhaustive,
        achieved,
        witness: AttackWitness::Sequence(witness),
        evaluations,
        half_width: None,
    })
}

/// Letter-by-letter heuristic: each position takes the state maximizing
/// the exact error of the prefix-fixed attack with the remaining letters
/// averaged under the uniform prior.
pub fn greedy_attack(
    code: &ConferencingCode,
    ch: &ChannelSpec,
) -> Result<AttackOutcome, AttackError> {
    let s = greedy_state_sequence(code, ch)?;
    let achieved = exact_average_error(code, ch, &s)?;
    Ok(AttackOutcome {
        strategy: AttackStrategy::Greedy,
        achieved,
        witness: AttackWitness::Sequence(s),
        evaluations: code.n() * ch.ns(),
        half_width: None,
    })
}

/// The symmetrizer attack: per draw, pick a spoof message pair uniformly,
/// draw each state letter from the kernel applied to the spoofed
/// codeword's letters, transmit a uniform true pair, and count decoding
/// errors. Reported error is the Monte Carlo average over draws; the
/// witness is the kernel itself.
pub fn symmetrizer_attack(
    code: &ConferencingCode,
    ch: &ChannelSpec,
    cert: &SymmetrizerCertificate,
    seed: u64,
    draws: usize,
) -> Result<AttackOutcome, AttackError> {
    if !cert.feasible {
        return Err(AttackError::InfeasibleCertificate);
    }
    if cert.ns != ch.ns() || cert.rows != cert.kind.rows(ch) {
        return Err(AttackError::DimensionMismatch(format!(
            "kernel is {}x{}, channel needs {}x{}",
            cert.rows,
            cert.ns,
            cert.kind.rows(ch),
            ch.ns()
        )));
    }
    let draws = draws.max(1);
    // Deterministic parallel simulation: fixed chunks with per-chunk
    // seeds, summed in chunk order.
    let chunk = 1024usize;
    let chunks: Vec<(u64, usize)> = (0..draws.div_ceil(chunk))
        .map(|i| (i as u64, chunk.min(draws - i * chunk)))
        .collect();
    let errors: usize = chunks
        .par_iter()
        .map(|&(chunk_idx, count)| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ chunk_idx.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut local_errors = 0usize;
            let mut s = vec![0usize; code.n()];
            let mut zw = vec![0usize; code.n()];
            for _ in 0..count {
                // Spoofed pair and the states it induces.
                let js = rng.gen_range(0..code.m1());
                let ks = rng.gen_range(0..code.m2());
                let spoof_x = code.xword(js, ks);
                let spoof_y = code.yword(js, ks);
                for t in 0..code.n() {
                    let row = match cert.kind {
                        SymmetrizerKind::XY | SymmetrizerKind::Single => {
                            spoof_x[t] * ch.ny() + spoof_y[t]
                        }
                        SymmetrizerKind::X => spoof_x[t],
                        SymmetrizerKind::Y => spoof_y[t],
                    };
                    s[t] =
                        sample_from(&mut rng, &cert.sigma[row * cert.ns..(row + 1) * cert.ns]);
                }
                // True transmission through the attacked channel.
                let j = rng.gen_range(0..code.m1());
                let k = rng.gen_range(0..code.m2());
                let xw = code.xword(j, k);
                let yw = code.yword(j, k);
                for t in 0..code.n() {
                    zw[t] = sample_from(&mut rng, ch.row(s[t], xw[t], yw[t]));
                }
                if code.decode(ch, &zw) != (j, k) {
                    local_errors += 1;
                }
            }
            local_errors
        })
        .sum();
    let achieved = errors as f64 / draws as f64;
    let half_width = 2.576 * (achieved * (1.0 - achieved) / draws as f64).sqrt();
    Ok(AttackOutcome {
        strategy: AttackStrategy::Symmetrizer(cert.kind),
        achieved,
        witness: AttackWitness::Kernel {
            kind: cert.kind,
            sigma: cert.sigma.clone(),
            rows: cert.rows,
        },
        evaluations: draws,
        half_width: Some(half_width),
    })
}

fn sample_from<R: Rng>(rng: &mut R, row: &[f64]) -> usize {
    let u: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.len() - 1
}
