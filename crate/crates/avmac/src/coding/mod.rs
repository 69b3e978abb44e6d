//! Concrete conferencing codes and the constructions that turn a good
//! compound-channel code into a deterministic code for the arbitrarily
//! varying channel: permutation robustification, reduction of the shared
//! randomness to quadratically many component codes, a positive-rate
//! prefix code, and the elimination of correlation.
//!
//! Everything here is desk-scale and exact where the alphabet sizes
//! permit: error probabilities are computed by full enumeration below the
//! configured caps and by seeded Monte Carlo above them.

mod evaluate;
mod pipeline;

pub use evaluate::{
    exact_average_error, exact_average_error_qseq, greedy_state_sequence,
    monte_carlo_average_error, randomized_error, worst_case_error, worst_randomized_error,
    WorstCaseMode, MC_DEFAULT_SAMPLES, OUTPUT_ENUM_CAP, STATE_ENUM_CAP,
};
pub use pipeline::{
    build_compound_code, eliminate_correlation, positive_rate_prefix, reduce_randomness,
    robustify, CompoundCodeOptions, EliminationPlan, PrefixOptions, RobustifyOptions,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelError, ChannelSpec};
use crate::region::RegionError;
use crate::symmetrizability::SymmetrizabilityError;

#[derive(Debug, Error)]
pub enum CodingError {
    #[error("exact enumeration cap exceeded: {0}")]
    CapExceeded(String),
    #[error("target rates are not inside the robust pentagon: {0}")]
    RateInfeasible(String),
    #[error("resampling retries exhausted; best achieved error {best}")]
    RetriesExhausted { best: f64 },
    #[error("channel is (X,Y)-symmetrizable; no positive deterministic rate exists")]
    SymmetrizableChannel,
    #[error("a positive conferencing capacity is required")]
    ConferencingRequired,
    #[error("search budget exhausted: {0}")]
    BudgetExceeded(String),
    #[error("conferencing budget violated: {0}")]
    BudgetViolation(String),
    #[error("component codes do not match: {0}")]
    ComponentMismatch(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid code: {0}")]
    InvalidCode(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Symmetrizability(#[from] SymmetrizabilityError),
    #[error("parsing code file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Non-iterative Willems conferencing protocol: each encoder announces a
/// function of its own message before transmission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConferencingProtocol {
    v1: usize,
    v2: usize,
    c1: Vec<usize>,
    c2: Vec<usize>,
}

impl ConferencingProtocol {
    pub fn new(
        c1: Vec<usize>,
        v1: usize,
        c2: Vec<usize>,
        v2: usize,
    ) -> Result<Self, CodingError> {
        if v1 == 0 || v2 == 0 {
            return Err(CodingError::InvalidCode(
                "conferencing alphabets must be nonempty".into(),
            ));
        }
        if c1.iter().any(|&v| v >= v1) || c2.iter().any(|&v| v >= v2) {
            return Err(CodingError::InvalidCode(
                "conferencing value out of range".into(),
            ));
        }
        Ok(Self { v1, v2, c1, c2 })
    }

    /// No information exchanged.
    pub fn trivial(m1: usize, m2: usize) -> Self {
        Self {
            v1: 1,
            v2: 1,
            c1: vec![0; m1],
            c2: vec![0; m2],
        }
    }

    /// Sender 1 announces its full message; sender 2 stays silent.
    pub fn identity_sender1(m1: usize, m2: usize) -> Self {
        Self {
            v1: m1,
            v2: 1,
            c1: (0..m1).collect(),
            c2: vec![0; m2],
        }
    }

    #[inline]
    pub fn v1(&self) -> usize {
        self.v1
    }

    #[inline]
    pub fn v2(&self) -> usize {
        self.v2
    }

    #[inline]
    pub fn c1(&self, j: usize) -> usize {
        self.c1[j]
    }

    #[inline]
    pub fn c2(&self, k: usize) -> usize {
        self.c2[k]
    }

    /// Checks the rate constraint `(1/n) log2 V_nu <= C_nu` for both
    /// directions.
    pub fn within_budget(&self, n: usize, c1_bits: f64, c2_bits: f64) -> bool {
        let n = n as f64;
        (self.v1 as f64).log2() <= n * c1_bits + 1e-9
            && (self.v2 as f64).log2() <= n * c2_bits + 1e-9
    }
}

/// How a code maps received words back to message pairs.
///
/// `Table` stores the decision for every output word (feasible below the
/// enumeration cap); `MaxLikelihood` decodes against the mixture channel
/// of the recorded prior; `Permuted` relabels coordinates before
/// delegating to a table (used by robustified components); `Product`
/// splits the word into a prefix that selects a component and a suffix
/// decoded by that component (used by eliminated codes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decoder {
    Table {
        nz: usize,
        map: Vec<u32>,
    },
    MaxLikelihood {
        q: Vec<f64>,
    },
    Permuted {
        perm: Vec<usize>,
        inner: Box<Decoder>,
    },
    Product {
        prefix_len: usize,
        inner_m1: usize,
        prefix: Box<Decoder>,
        inner: Vec<Decoder>,
    },
}

impl Decoder {
    fn validate(&self, n: usize, m1: usize, m2: usize) -> Result<(), CodingError> {
        match self {
            Decoder::Table { nz, map } => {
                let expected = checked_pow(*nz, n).ok_or_else(|| {
                    CodingError::InvalidCode("decoder table size overflows".into())
                })?;
                if map.len() != expected {
                    return Err(CodingError::InvalidCode(format!(
                        "decoder table has {} entries, expected {}",
                        map.len(),
                        expected
                    )));
                }
                if map.iter().any(|&v| v as usize >= m1 * m2) {
                    return Err(CodingError::InvalidCode(
                        "decoder table points outside the message set".into(),
                    ));
                }
            }
            Decoder::MaxLikelihood { q } => {
                if q.is_empty() {
                    return Err(CodingError::InvalidCode("empty decoder prior".into()));
                }
            }
            Decoder::Permuted { perm, inner } => {
                let mut seen = vec![false; n];
                if perm.len() != n {
                    return Err(CodingError::InvalidCode("permutation length".into()));
                }
                for &p in perm {
                    if p >= n || seen[p] {
                        return Err(CodingError::InvalidCode(
                            "decoder permutation is not a bijection".into(),
                        ));
                    }
                    seen[p] = true;
                }
                match **inner {
                    Decoder::Table { .. } => inner.validate(n, m1, m2)?,
                    _ => {
                        return Err(CodingError::InvalidCode(
                            "permuted decoder must wrap a table".into(),
                        ))
                    }
                }
            }
            Decoder::Product {
                prefix_len,
                inner_m1,
                prefix,
                inner,
            } => {
                if *prefix_len == 0 || *prefix_len >= n {
                    return Err(CodingError::InvalidCode("prefix length".into()));
                }
                if *inner_m1 == 0 || !m1.is_multiple_of(*inner_m1) {
                    return Err(CodingError::InvalidCode(
                        "inner message count does not divide the message set".into(),
                    ));
                }
                let groups = m1 / *inner_m1;
                if inner.len() != groups {
                    return Err(CodingError::InvalidCode(format!(
                        "{} inner decoders for {} prefix messages",
                        inner.len(),
                        groups
                    )));
                }
                match **prefix {
                    Decoder::Table { .. } | Decoder::MaxLikelihood { .. } => {
                        prefix.validate(*prefix_len, groups, 1)?
                    }
                    _ => {
                        return Err(CodingError::InvalidCode(
                            "product prefix must be a table or ML decoder".into(),
                        ))
                    }
                }
                for d in inner {
                    match d {
                        Decoder::Table { .. }
                        | Decoder::MaxLikelihood { .. }
                        | Decoder::Permuted { .. } => {
                            d.validate(n - prefix_len, *inner_m1, m2)?
                        }
                        Decoder::Product { .. } => {
                            return Err(CodingError::InvalidCode(
                                "nested product decoders are not supported".into(),
                            ))
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self {
            Decoder::Table { .. } => "table".into(),
            Decoder::MaxLikelihood { .. } => "ml-mixture".into(),
            Decoder::Permuted { inner, .. } => format!("permuted({})", inner.describe()),
            Decoder::Product { inner, .. } => format!("prefix-product[{}]", inner.len()),
        }
    }
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Provenance recorded on every constructed code.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CodeMeta {
    /// Decoding rule in words, e.g. "ml under uniform state mixture".
    pub decoder_rule: String,
    pub seed: u64,
    /// Error exponent claimed by the construction, if any; never verified
    /// at desk scale.
    pub zeta: Option<f64>,
}

/// A deterministic conferencing code: codeword tables indexed by the
/// message pair and a total decoder.
///
/// The conferencing consistency conditions hold by validated
/// construction: `x_{jk} = x_{jk'}` whenever `c2(k) = c2(k')`, and
/// `y_{jk} = y_{j'k}` whenever `c1(j) = c1(j')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConferencingCode {
    n: usize,
    m1: usize,
    m2: usize,
    protocol: ConferencingProtocol,
    xwords: Vec<Vec<usize>>,
    ywords: Vec<Vec<usize>>,
    decoder: Decoder,
    meta: CodeMeta,
}

impl ConferencingCode {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        m1: usize,
        m2: usize,
        protocol: ConferencingProtocol,
        xwords: Vec<Vec<usize>>,
        ywords: Vec<Vec<usize>>,
        decoder: Decoder,
        meta: CodeMeta,
    ) -> Result<Self, CodingError> {
        if n == 0 || m1 == 0 || m2 == 0 {
            return Err(CodingError::InvalidCode(
                "blocklength and message counts must be positive".into(),
            ));
        }
        if protocol.c1.len() != m1 || protocol.c2.len() != m2 {
            return Err(CodingError::InvalidCode(
                "protocol tables do not cover the message sets".into(),
            ));
        }
        if xwords.len() != m1 * m2 || ywords.len() != m1 * m2 {
            return Err(CodingError::InvalidCode(format!(
                "expected {} codewords per sender",
                m1 * m2
            )));
        }
        if xwords.iter().chain(ywords.iter()).any(|w| w.len() != n) {
            return Err(CodingError::LengthMismatch(format!(
                "all codewords must have length {n}"
            )));
        }
        decoder.validate(n, m1, m2)?;
        let code = Self {
            n,
            m1,
            m2,
            protocol,
            xwords,
            ywords,
            decoder,
            meta,
        };
        code.check_conferencing_consistency()?;
        Ok(code)
    }

    fn check_conferencing_consistency(&self) -> Result<(), CodingError> {
        for j in 0..self.m1 {
            for k in 0..self.m2 {
                for k2 in (k + 1)..self.m2 {
                    if self.protocol.c2(k) == self.protocol.c2(k2)
                        && self.xword(j, k) != self.xword(j, k2)
                    {
                        return Err(CodingError::InvalidCode(format!(
                            "x-word differs across messages {k} and {k2} with equal conference"
                        )));
                    }
                }
            }
        }
        for k in 0..self.m2 {
            for j in 0..self.m1 {
                for j2 in (j + 1)..self.m1 {
                    if self.protocol.c1(j) == self.protocol.c1(j2)
                        && self.yword(j, k) != self.yword(j2, k)
                    {
                        return Err(CodingError::InvalidCode(format!(
                            "y-word differs across messages {j} and {j2} with equal conference"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m1(&self) -> usize {
        self.m1
    }

    #[inline]
    pub fn m2(&self) -> usize {
        self.m2
    }

    #[inline]
    pub fn message_pairs(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn protocol(&self) -> &ConferencingProtocol {
        &self.protocol
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    pub fn meta(&self) -> &CodeMeta {
        &self.meta
    }

    #[inline]
    pub fn xword(&self, j: usize, k: usize) -> &[usize] {
        &self.xwords[j * self.m2 + k]
    }

    #[inline]
    pub fn yword(&self, j: usize, k: usize) -> &[usize] {
        &self.ywords[j * self.m2 + k]
    }

    /// Rates in bits per channel use.
    pub fn rates(&self) -> (f64, f64) {
        (
            (self.m1 as f64).log2() / self.n as f64,
            (self.m2 as f64).log2() / self.n as f64,
        )
    }

    /// Decodes one received word to a message pair. Ties in likelihood
    /// break toward the smaller pair, so decoding is deterministic.
    pub fn decode(&self, ch: &ChannelSpec, zw: &[usize]) -> (usize, usize) {
        debug_assert_eq!(zw.len(), self.n);
        match &self.decoder {
            Decoder::Product {
                prefix_len,
                inner_m1,
                prefix,
                inner,
            } => {
                let m = *prefix_len;
                let groups = self.m1 / inner_m1;
                let (gamma, _) = decode_flat(
                    ch,
                    prefix,
                    &zw[..m],
                    groups,
                    1,
                    &|g, _| (&self.xword(g * inner_m1, 0)[..m], &self.yword(g * inner_m1, 0)[..m]),
                );
                let (j, k) = decode_flat(
                    ch,
                    &inner[gamma],
                    &zw[m..],
                    *inner_m1,
                    self.m2,
                    &|j, k| {
                        (
                            &self.xword(gamma * inner_m1 + j, k)[m..],
                            &self.yword(gamma * inner_m1 + j, k)[m..],
                        )
                    },
                );
                (gamma * inner_m1 + j, k)
            }
            flat => decode_flat(ch, flat, zw, self.m1, self.m2, &|j, k| {
                (self.xword(j, k), self.yword(j, k))
            }),
        }
    }

    /// Rewrites the decoder as an explicit table by decoding every output
    /// word. Requires `nz^n` below the enumeration cap.
    pub fn with_table_decoder(&self, ch: &ChannelSpec) -> Result<ConferencingCode, CodingError> {
        let total = checked_pow(ch.nz(), self.n)
            .filter(|&t| t <= OUTPUT_ENUM_CAP)
            .ok_or_else(|| {
                CodingError::CapExceeded(format!(
                    "cannot tabulate {}^{} output words",
                    ch.nz(),
                    self.n
                ))
            })?;
        let mut map = vec![0u32; total];
        let mut rank = 0usize;
        crate::channel::for_each_word(ch.nz(), self.n, |zw| {
            let (j, k) = self.decode(ch, zw);
            map[rank] = (j * self.m2 + k) as u32;
            rank += 1;
        });
        let mut out = self.clone();
        out.decoder = Decoder::Table { nz: ch.nz(), map };
        Ok(out)
    }

    /// Serializes to JSON (protocol tables, codeword arrays, and the
    /// decoder, as a table where one was materialized).
    pub fn to_json_string(&self) -> String {
        let file = CodeFile {
            n: self.n,
            m1: self.m1,
            m2: self.m2,
            v1: self.protocol.v1,
            v2: self.protocol.v2,
            c1: self.protocol.c1.clone(),
            c2: self.protocol.c2.clone(),
            xwords: self.xwords.clone(),
            ywords: self.ywords.clone(),
            decoder: self.decoder.clone(),
            meta: self.meta.clone(),
        };
        serde_json::to_string(&file).expect("code serialization cannot fail")
    }

    pub fn from_json_str(text: &str) -> Result<ConferencingCode, CodingError> {
        let file: CodeFile = serde_json::from_str(text)?;
        let protocol = ConferencingProtocol::new(file.c1, file.v1, file.c2, file.v2)?;
        ConferencingCode::new(
            file.n,
            file.m1,
            file.m2,
            protocol,
            file.xwords,
            file.ywords,
            file.decoder,
            file.meta,
        )
    }
}

/// Decoding for the single-stage decoder variants.
pub(crate) fn decode_flat<'a>(
    ch: &ChannelSpec,
    decoder: &Decoder,
    zw: &[usize],
    m1: usize,
    m2: usize,
    words: &dyn Fn(usize, usize) -> (&'a [usize], &'a [usize]),
) -> (usize, usize) {
    match decoder {
        Decoder::Table { nz, map } => {
            let mut rank = 0usize;
            for &z in zw {
                rank = rank * nz + z;
            }
            let v = map[rank] as usize;
            (v / m2, v % m2)
        }
        Decoder::MaxLikelihood { q } => {
            let mut best = (0usize, 0usize);
            let mut best_p = -1.0;
            for j in 0..m1 {
                for k in 0..m2 {
                    let (xw, yw) = words(j, k);
                    let mut p = 1.0;
                    for (t, &z) in zw.iter().enumerate() {
                        p *= ch.mixture_prob(q, xw[t], yw[t], z);
                        if p == 0.0 {
                            break;
                        }
                    }
                    if p > best_p {
                        best_p = p;
                        best = (j, k);
                    }
                }
            }
            best
        }
        Decoder::Permuted { perm, inner } => {
            let permuted: Vec<usize> = perm.iter().map(|&t| zw[t]).collect();
            decode_flat(ch, inner, &permuted, m1, m2, words)
        }
        Decoder::Product { .. } => unreachable!("product decoders are handled by the code"),
    }
}

#[derive(Serialize, Deserialize)]
struct CodeFile {
    n: usize,
    m1: usize,
    m2: usize,
    v1: usize,
    v2: usize,
    c1: Vec<usize>,
    c2: Vec<usize>,
    xwords: Vec<Vec<usize>>,
    ywords: Vec<Vec<usize>>,
    decoder: Decoder,
    meta: CodeMeta,
}

/// A random code: a finite family of deterministic codes sharing one
/// conferencing protocol, selected by common randomness with the given
/// weights.
#[derive(Debug, Clone)]
pub struct RandomConferencingCode {
    components: Vec<ConferencingCode>,
    weights: Vec<f64>,
}

impl RandomConferencingCode {
    pub fn new(
        components: Vec<ConferencingCode>,
        weights: Vec<f64>,
    ) -> Result<Self, CodingError> {
        if components.is_empty() {
            return Err(CodingError::InvalidCode("no component codes".into()));
        }
        if weights.len() != components.len() {
            return Err(CodingError::ComponentMismatch(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(CodingError::InvalidCode(
                "weights must be a probability vector".into(),
            ));
        }
        let head = &components[0];
        for c in &components[1..] {
            if c.n != head.n
                || c.m1 != head.m1
                || c.m2 != head.m2
                || c.protocol != head.protocol
            {
                return Err(CodingError::ComponentMismatch(
                    "components must share blocklength, message sets, and protocol".into(),
                ));
            }
        }
        Ok(Self {
            components,
            weights,
        })
    }

    pub fn uniform(components: Vec<ConferencingCode>) -> Result<Self, CodingError> {
        let w = 1.0 / components.len().max(1) as f64;
        let weights = vec![w; components.len()];
        Self::new(components, weights)
    }

    pub fn components(&self) -> &[ConferencingCode] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.components[0].n
    }

    pub fn m1(&self) -> usize {
        self.components[0].m1
    }

    pub fn m2(&self) -> usize {
        self.components[0].m2
    }

    pub fn protocol(&self) -> &ConferencingProtocol {
        &self.components[0].protocol
    }
}

/// Samples a non-conferencing code with i.i.d. uniform codeword letters
/// and ML decoding under the uniform state mixture (tabulated when the
/// output space is small enough). The workhorse for attack experiments.
pub fn random_code<R: Rng>(
    rng: &mut R,
    ch: &ChannelSpec,
    n: usize,
    m1: usize,
    m2: usize,
) -> Result<ConferencingCode, CodingError> {
    let xw: Vec<Vec<usize>> = (0..m1)
        .map(|_| (0..n).map(|_| rng.gen_range(0..ch.nx())).collect())
        .collect();
    let yw: Vec<Vec<usize>> = (0..m2)
        .map(|_| (0..n).map(|_| rng.gen_range(0..ch.ny())).collect())
        .collect();
    let mut xwords = Vec::with_capacity(m1 * m2);
    let mut ywords = Vec::with_capacity(m1 * m2);
    for j in 0..m1 {
        for k in 0..m2 {
            xwords.push(xw[j].clone());
            ywords.push(yw[k].clone());
        }
    }
    let meta = CodeMeta {
        decoder_rule: "ml under uniform state mixture".into(),
        seed: 0,
        zeta: None,
    };
    let code = ConferencingCode::new(
        n,
        m1,
        m2,
        ConferencingProtocol::trivial(m1, m2),
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
