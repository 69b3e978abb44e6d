//! Finite AV-MAC model: a state-indexed family of stochastic matrices on a
//! common input pair alphabet.
//!
//! All alphabets are index sets `[0, n)`; the transition tensor is stored
//! dense in row-major order with the state outermost and the output
//! innermost. Rows are validated on construction and renormalized, so
//! downstream entropy and linear-programming code can rely on row sums of
//! 1 up to [`NORMALIZED_TOLERANCE`].

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stochasticity tolerance accepted on raw input rows.
pub const INPUT_TOLERANCE: f64 = 1e-9;
/// Row-sum tolerance guaranteed after internal renormalization.
pub const NORMALIZED_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("row (s={s}, x={x}, y={y}) sums to {sum:.12}, expected 1")]
    NonStochasticRow { s: usize, x: usize, y: usize, sum: f64 },
    #[error("negative entry {value} at (s={s}, x={x}, y={y}, z={z})")]
    NegativeEntry {
        s: usize,
        x: usize,
        y: usize,
        z: usize,
        value: f64,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("alphabet sizes must be positive")]
    EmptyAlphabet,
    #[error("unknown builtin channel `{0}` (expected gubner, xor, or adder-noiseless)")]
    UnknownName(String),
    #[error("word length mismatch: {0}")]
    LengthMismatch(String),
    #[error("symbol {symbol} out of range for alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("state sequence must be nonempty")]
    EmptySequence,
    #[error("reading channel file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing channel file: {0}")]
    Json(#[from] serde_json::Error),
}

/// The AV-MAC `W`: for every state `s` a stochastic matrix
/// `W(z | x, y | s)` with inputs from `X x Y` and outputs from `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    nx: usize,
    ny: usize,
    nz: usize,
    ns: usize,
    w: Vec<f64>,
}

impl ChannelSpec {
    /// Validates and normalizes a raw transition tensor indexed
    /// `[s][x][y][z]` (flattened, z innermost).
    ///
    /// Entries must be nonnegative and every row must sum to 1 within
    /// [`INPUT_TOLERANCE`]; rows are then renormalized exactly.
    pub fn new(
        nx: usize,
        ny: usize,
        nz: usize,
        ns: usize,
        mut w: Vec<f64>,
    ) -> Result<Self, ChannelError> {
        if nx == 0 || ny == 0 || nz == 0 || ns == 0 {
            return Err(ChannelError::EmptyAlphabet);
        }
        let expected = nx * ny * nz * ns;
        if w.len() != expected {
            return Err(ChannelError::DimensionMismatch(format!(
                "tensor has {} entries, expected {}",
                w.len(),
                expected
            )));
        }
        for s in 0..ns {
            for x in 0..nx {
                for y in 0..ny {
                    let base = ((s * nx + x) * ny + y) * nz;
                    let row = &mut w[base..base + nz];
                    let mut sum = 0.0;
                    for (z, v) in row.iter_mut().enumerate() {
                        if *v < 0.0 {
                            if *v < -NORMALIZED_TOLERANCE {
                                return Err(ChannelError::NegativeEntry {
                                    s,
                                    x,
                                    y,
                                    z,
                                    value: *v,
                                });
                            }
                            *v = 0.0;
                        }
                        sum += *v;
                    }
                    if (sum - 1.0).abs() > INPUT_TOLERANCE {
                        return Err(ChannelError::NonStochasticRow { s, x, y, sum });
                    }
                    for v in row.iter_mut() {
                        *v /= sum;
                    }
                }
            }
        }
        Ok(Self { nx, ny, nz, ns, w })
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn nz(&self) -> usize {
        self.nz
    }

    #[inline]
    pub fn ns(&self) -> usize {
        self.ns
    }

    /// Transition probability `W(z | x, y | s)`.
    #[inline]
    pub fn w(&self, s: usize, x: usize, y: usize, z: usize) -> f64 {
        self.w[((s * self.nx + x) * self.ny + y) * self.nz + z]
    }

    /// The output distribution row for `(s, x, y)`.
    #[inline]
    pub fn row(&self, s: usize, x: usize, y: usize) -> &[f64] {
        let base = ((s * self.nx + x) * self.ny + y) * self.nz;
        &self.w[base..base + self.nz]
    }

    /// Mixture transition probability `W(z | x, y | q) = sum_s W(z|x,y|s) q(s)`.
    #[inline]
    pub fn mixture_prob(&self, q: &[f64], x: usize, y: usize, z: usize) -> f64 {
        let mut p = 0.0;
        for (s, &qs) in q.iter().enumerate() {
            p += qs * self.w(s, x, y, z);
        }
        p
    }

    /// Collapses the state set under a prior `q`, returning the single-state
    /// channel `W(. | ., . | q)` from the convex hull of the family.
    pub fn mixture_channel(&self, q: &StatePrior) -> Result<ChannelSpec, ChannelError> {
        if q.len() != self.ns {
            return Err(ChannelError::DimensionMismatch(format!(
                "prior over {} states, channel has {}",
                q.len(),
                self.ns
            )));
        }
        let mut w = vec![0.0; self.nx * self.ny * self.nz];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    w[(x * self.ny + y) * self.nz + z] = self.mixture_prob(q.as_slice(), x, y, z);
                }
            }
        }
        ChannelSpec::new(self.nx, self.ny, self.nz, 1, w)
    }

    /// The n-letter product probability
    /// `W^n(zw | xw, yw | s) = prod_m W(zw_m | xw_m, yw_m | s_m)`.
    pub fn product_probability(
        &self,
        s: &StateSequence,
        xw: &[usize],
        yw: &[usize],
        zw: &[usize],
    ) -> Result<f64, ChannelError> {
        let n = s.len();
        if xw.len() != n || yw.len() != n || zw.len() != n {
            return Err(ChannelError::LengthMismatch(format!(
                "state sequence has length {}, words have lengths {}, {}, {}",
                n,
                xw.len(),
                yw.len(),
                zw.len()
            )));
        }
        let mut p = 1.0;
        for m in 0..n {
            check_symbol(xw[m], self.nx)?;
            check_symbol(yw[m], self.ny)?;
            check_symbol(zw[m], self.nz)?;
            p *= self.w(s.as_slice()[m], xw[m], yw[m], zw[m]);
            if p == 0.0 {
                return Ok(0.0);
            }
        }
        Ok(p)
    }

    /// Samples a channel with independent Dirichlet(1) rows. Useful for
    /// randomized property checks and experiments.
    pub fn random<R: Rng>(rng: &mut R, nx: usize, ny: usize, nz: usize, ns: usize) -> ChannelSpec {
        let mut w = vec![0.0; nx * ny * nz * ns];
        for row in w.chunks_mut(nz) {
            let mut sum = 0.0;
            for v in row.iter_mut() {
                // -ln(U) gives Exp(1); normalizing yields a uniform point
                // on the simplex.
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                *v = -u.ln();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        ChannelSpec::new(nx, ny, nz, ns, w).expect("sampled rows are stochastic")
    }

    /// Parses the JSON channel file format:
    /// `{"nx":2,"ny":2,"nz":4,"ns":2,"w":[[[[...]]]]}` with `w` indexed
    /// `[s][x][y][z]`. An optional `"labels"` object is accepted and
    /// ignored by all computation.
    pub fn from_json_str(text: &str) -> Result<ChannelSpec, ChannelError> {
        let file: ChannelFile = serde_json::from_str(text)?;
        file.into_spec()
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<ChannelSpec, ChannelError> {
        let text = std::fs::read_to_string(path)?;
        ChannelSpec::from_json_str(&text)
    }

    /// Serializes to the JSON channel file format.
    pub fn to_json_string(&self) -> String {
        let mut w = Vec::with_capacity(self.ns);
        for s in 0..self.ns {
            let mut ws = Vec::with_capacity(self.nx);
            for x in 0..self.nx {
                let mut wx = Vec::with_capacity(self.ny);
                for y in 0..self.ny {
                    wx.push(self.row(s, x, y).to_vec());
                }
                ws.push(wx);
            }
            w.push(ws);
        }
        let file = ChannelFile {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            ns: self.ns,
            w,
            labels: None,
        };
        serde_json::to_string_pretty(&file).expect("channel serialization cannot fail")
    }
}

#[inline]
fn check_symbol(symbol: usize, size: usize) -> Result<(), ChannelError> {
    if symbol >= size {
        return Err(ChannelError::SymbolOutOfRange { symbol, size });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ChannelFile {
    nx: usize,
    ny: usize,
    nz: usize,
    ns: usize,
    w: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<serde_json::Value>,
}

impl ChannelFile {
    fn into_spec(self) -> Result<ChannelSpec, ChannelError> {
        let mut flat = Vec::with_capacity(self.nx * self.ny * self.nz * self.ns);
        if self.w.len() != self.ns {
            return Err(ChannelError::DimensionMismatch(format!(
                "w has {} state slices, ns={}",
                self.w.len(),
                self.ns
            )));
        }
        for ws in &self.w {
            if ws.len() != self.nx {
                return Err(ChannelError::DimensionMismatch(format!(
                    "state slice has {} x-rows, nx={}",
                    ws.len(),
                    self.nx
                )));
            }
            for wx in ws {
                if wx.len() != self.ny {
                    return Err(ChannelError::DimensionMismatch(format!(
                        "x slice has {} y-rows, ny={}",
                        wx.len(),
                        self.ny
                    )));
                }
                for row in wx {
                    if row.len() != self.nz {
                        return Err(ChannelError::DimensionMismatch(format!(
                            "row has {} entries, nz={}",
                            row.len(),
                            self.nz
                        )));
                    }
                    flat.extend_from_slice(row);
                }
            }
        }
        ChannelSpec::new(self.nx, self.ny, self.nz, self.ns, flat)
    }
}

/// Probability distribution on the state set, the "state" of the convex
/// hull of the channel family.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePrior {
    q: Vec<f64>,
}

impl StatePrior {
    pub fn new(q: Vec<f64>) -> Result<Self, ChannelError> {
        if q.is_empty() {
            return Err(ChannelError::EmptyAlphabet);
        }
        let mut q = q;
        let mut sum = 0.0;
        for v in &q {
            if *v < -NORMALIZED_TOLERANCE {
                return Err(ChannelError::InvalidDistribution(format!(
                    "negative mass {v}"
                )));
            }
            sum += v.max(0.0);
        }
        if (sum - 1.0).abs() > INPUT_TOLERANCE {
            return Err(ChannelError::InvalidDistribution(format!(
                "mass sums to {sum}"
            )));
        }
        for v in &mut q {
            *v = v.max(0.0) / sum;
        }
        Ok(Self { q })
    }

    pub fn uniform(ns: usize) -> Self {
        Self {
            q: vec![1.0 / ns as f64; ns],
        }
    }

    pub fn dirac(ns: usize, s: usize) -> Self {
        let mut q = vec![0.0; ns];
        q[s] = 1.0;
        Self { q }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.q.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }
}

/// A concrete sequence of channel states attained during one transmission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSequence {
    s: Vec<usize>,
}

impl StateSequence {
    pub fn new(s: Vec<usize>, ns: usize) -> Result<Self, ChannelError> {
        if s.is_empty() {
            return Err(ChannelError::EmptySequence);
        }
        for &v in &s {
            check_symbol(v, ns)?;
        }
        Ok(Self { s })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.s.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[usize] {
        &self.s
    }
}

/// Returns one of the bundled fixture channels.
///
/// * `gubner` - the adder with additive interference, `z = x + y + s` on
///   alphabets `|X|=|Y|=|S|=2`, `|Z|=4`;
/// * `xor` - `z = x XOR y XOR s`, all alphabets binary;
/// * `adder-noiseless` - the Gubner channel restricted to the single state
///   `s = 0`, i.e. the noiseless binary adder MAC.
pub fn builtin_channel(name: &str) -> Result<ChannelSpec, ChannelError> {
    match name {
        "gubner" => {
            let (nx, ny, nz, ns) = (2, 2, 4, 2);
            let mut w = vec![0.0; nx * ny * nz * ns];
            for s in 0..ns {
                for x in 0..nx {
                    for y in 0..ny {
                        w[((s * nx + x) * ny + y) * nz + (x + y + s)] = 1.0;
                    }
                }
            }
            ChannelSpec::new(nx, ny, nz, ns, w)
        }
        "xor" => {
            let (nx, ny, nz, ns) = (2, 2, 2, 2);
            let mut w = vec![0.0; nx * ny * nz * ns];
            for s in 0..ns {
                for x in 0..nx {
                    for y in 0..ny {
                        w[((s * nx + x) * ny + y) * nz + (x ^ y ^ s)] = 1.0;
                    }
                }
            }
            ChannelSpec::new(nx, ny, nz, ns, w)
        }
        "adder-noiseless" => {
            let (nx, ny, nz, ns) = (2, 2, 4, 1);
            let mut w = vec![0.0; nx * ny * nz * ns];
            for x in 0..nx {
                for y in 0..ny {
                    w[(x * ny + y) * nz + (x + y)] = 1.0;
                }
            }
            ChannelSpec::new(nx, ny, nz, ns, w)
        }
        other => Err(ChannelError::UnknownName(other.to_string())),
    }
}

/// Iterates over all words of the given length over `[0, base)` in
/// lexicographic order, reusing one buffer.
pub(crate) fn for_each_word(base: usize, len: usize, mut f: impl FnMut(&[usize])) {
    let mut word = vec![0usize; len];
    loop {
        f(&word);
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            word[pos] += 1;
            if word[pos] < base {
                break;
            }
            word[pos] = 0;
        }
    }
}
