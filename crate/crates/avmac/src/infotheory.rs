//! Entropies and the conditional mutual informations that bound the rate
//! region: `I(Z;X|Y,U)`, `I(Z;Y|X,U)`, `I(Z;X,Y|U)`, and `I(Z;X,Y)`,
//! computed from the generic joint distribution
//! `p(u,x,y,z) = p0(u) p1(x|u) p2(y|u) W(z|x,y|q)`.
//!
//! Logarithms are base 2 throughout; rates and conferencing capacities are
//! in bits per channel use. Terms `p log p` with `p < 1e-15` contribute
//! exactly 0, which removes the `-inf` hazard at simplex boundaries
//! reached by the optimizers.

use rand::Rng;
use thiserror::Error;

use crate::channel::{ChannelSpec, StatePrior};

/// Mass below which a probability is treated as exactly zero in `p log p`.
pub const P_FLOOR: f64 = 1e-15;
/// Most negative mutual-information round-off that is still attributed to
/// floating point rather than a bug.
pub const MI_ROUNDOFF_FLOOR: f64 = -1e-8;

#[derive(Debug, Error)]
pub enum InfotheoryError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input policy: {0}")]
    InvalidPolicy(String),
}

/// Input policy `(p0, p1, p2)`: a distribution on the auxiliary alphabet
/// `U` and stochastic maps `U -> X`, `U -> Y`. Conditioned on `U`, the two
/// senders' inputs are independent.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPolicy {
    nu: usize,
    nx: usize,
    ny: usize,
    p0: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
}

impl InputPolicy {
    pub fn new(
        p0: Vec<f64>,
        p1: Vec<Vec<f64>>,
        p2: Vec<Vec<f64>>,
    ) -> Result<Self, InfotheoryError> {
        let nu = p0.len();
        if nu == 0 {
            return Err(InfotheoryError::InvalidPolicy("empty U alphabet".into()));
        }
        if p1.len() != nu || p2.len() != nu {
            return Err(InfotheoryError::DimensionMismatch(format!(
                "p0 has {} entries, p1 has {} rows, p2 has {} rows",
                nu,
                p1.len(),
                p2.len()
            )));
        }
        let nx = p1[0].len();
        let ny = p2[0].len();
        if nx == 0 || ny == 0 {
            return Err(InfotheoryError::InvalidPolicy("empty input alphabet".into()));
        }
        let p0 = normalize(p0, "p0")?;
        let mut flat1 = Vec::with_capacity(nu * nx);
        for row in p1 {
            if row.len() != nx {
                return Err(InfotheoryError::DimensionMismatch(
                    "ragged p1 matrix".into(),
                ));
            }
            flat1.extend(normalize(row, "p1 row")?);
        }
        let mut flat2 = Vec::with_capacity(nu * ny);
        for row in p2 {
            if row.len() != ny {
                return Err(InfotheoryError::DimensionMismatch(
                    "ragged p2 matrix".into(),
                ));
            }
            flat2.extend(normalize(row, "p2 row")?);
        }
        Ok(Self {
            nu,
            nx,
            ny,
            p0,
            p1: flat1,
            p2: flat2,
        })
    }

    /// `U` trivial, both senders uniform and independent.
    pub fn uniform_independent(nx: usize, ny: usize) -> Self {
        Self {
            nu: 1,
            nx,
            ny,
            p0: vec![1.0],
            p1: vec![1.0 / nx as f64; nx],
            p2: vec![1.0 / ny as f64; ny],
        }
    }

    /// Realizes an arbitrary joint input distribution `t(x, y)` inside the
    /// conditional-independence family by taking `U = X x Y` with
    /// deterministic coordinate maps. This is the full-cooperation shape.
    pub fn from_joint(t: &[f64], nx: usize, ny: usize) -> Result<Self, InfotheoryError> {
        if t.len() != nx * ny {
            return Err(InfotheoryError::DimensionMismatch(format!(
                "joint has {} entries, expected {}",
                t.len(),
                nx * ny
            )));
        }
        let p0 = normalize(t.to_vec(), "joint input")?;
        let nu = nx * ny;
        let mut p1 = vec![0.0; nu * nx];
        let mut p2 = vec![0.0; nu * ny];
        for u in 0..nu {
            p1[u * nx + u / ny] = 1.0;
            p2[u * ny + u % ny] = 1.0;
        }
        Ok(Self {
            nu,
            nx,
            ny,
            p0,
            p1,
            p2,
        })
    }

    /// Samples a policy with Dirichlet(1) blocks.
    pub fn random<R: Rng>(rng: &mut R, nu: usize, nx: usize, ny: usize) -> Self {
        let sample = |rng: &mut R, dim: usize| -> Vec<f64> {
            let mut v: Vec<f64> = (0..dim)
                .map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln())
                .collect();
            let sum: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= sum);
            v
        };
        let p0 = sample(rng, nu);
        let mut p1 = Vec::with_capacity(nu * nx);
        let mut p2 = Vec::with_capacity(nu * ny);
        for _ in 0..nu {
            p1.extend(sample(rng, nx));
            p2.extend(sample(rng, ny));
        }
        Self {
            nu,
            nx,
            ny,
            p0,
            p1,
            p2,
        }
    }

    #[inline]
    pub fn nu(&self) -> usize {
        self.nu
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
    pub fn p0(&self, u: usize) -> f64 {
        self.p0[u]
    }

    #[inline]
    pub fn p1(&self, u: usize, x: usize) -> f64 {
        self.p1[u * self.nx + x]
    }

    #[inline]
    pub fn p2(&self, u: usize, y: usize) -> f64 {
        self.p2[u * self.ny + y]
    }

    /// Joint input mass `p(u, x, y)`.
    #[inline]
    pub fn input_mass(&self, u: usize, x: usize, y: usize) -> f64 {
        self.p0(u) * self.p1(u, x) * self.p2(u, y)
    }

    pub(crate) fn p0_mut(&mut self) -> &mut [f64] {
        &mut self.p0
    }

    pub(crate) fn p1_row_mut(&mut self, u: usize) -> &mut [f64] {
        &mut self.p1[u * self.nx..(u + 1) * self.nx]
    }

    pub(crate) fn p2_row_mut(&mut self, u: usize) -> &mut [f64] {
        &mut self.p2[u * self.ny..(u + 1) * self.ny]
    }
}

fn normalize(mut v: Vec<f64>, what: &str) -> Result<Vec<f64>, InfotheoryError> {
    let mut sum = 0.0;
    for x in &v {
        if *x < -1e-12 {
            return Err(InfotheoryError::InvalidDistribution(format!(
                "{what} has negative mass {x}"
            )));
        }
        sum += x.max(0.0);
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(InfotheoryError::InvalidDistribution(format!(
            "{what} sums to {sum}"
        )));
    }
    for x in &mut v {
        *x = x.max(0.0) / sum;
    }
    Ok(v)
}

/// Dense joint distribution of the generic vector `(U, X, Y, Z_q)`.
#[derive(Debug, Clone)]
pub struct JointUxyz {
    nu: usize,
    nx: usize,
    ny: usize,
    nz: usize,
    p: Vec<f64>,
}

impl JointUxyz {
    /// Validates an explicit joint tensor indexed `[u][x][y][z]`: it must
    /// be nonnegative, have total mass 1 within 1e-10, and satisfy the
    /// conditional independence of `X` and `Y` given each `u` of positive
    /// mass within 1e-9.
    pub fn new(
        nu: usize,
        nx: usize,
        ny: usize,
        nz: usize,
        p: Vec<f64>,
    ) -> Result<Self, InfotheoryError> {
        if p.len() != nu * nx * ny * nz {
            return Err(InfotheoryError::DimensionMismatch(format!(
                "tensor has {} entries, expected {}",
                p.len(),
                nu * nx * ny * nz
            )));
        }
        let mut mass = 0.0;
        for &v in &p {
            if v < -1e-12 {
                return Err(InfotheoryError::InvalidDistribution(format!(
                    "negative mass {v}"
                )));
            }
            mass += v;
        }
        if (mass - 1.0).abs() > 1e-10 {
            return Err(InfotheoryError::InvalidDistribution(format!(
                "total mass {mass}"
            )));
        }
        let joint = Self { nu, nx, ny, nz, p };
        joint.check_factorization()?;
        Ok(joint)
    }

    fn check_factorization(&self) -> Result<(), InfotheoryError> {
        for u in 0..self.nu {
            let mut pu = 0.0;
            let mut px = vec![0.0; self.nx];
            let mut py = vec![0.0; self.ny];
            for x in 0..self.nx {
                for y in 0..self.ny {
                    let m: f64 = (0..self.nz).map(|z| self.mass(u, x, y, z)).sum();
                    pu += m;
                    px[x] += m;
                    py[y] += m;
                }
            }
            if pu <= P_FLOOR {
                continue;
            }
            for x in 0..self.nx {
                for y in 0..self.ny {
                    let m: f64 = (0..self.nz).map(|z| self.mass(u, x, y, z)).sum();
                    if (m * pu - px[x] * py[y]).abs() > 1e-9 {
                        return Err(InfotheoryError::InvalidDistribution(format!(
                            "X and Y are not independent given u={u}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn from_parts_unchecked(
        nu: usize,
        nx: usize,
        ny: usize,
        nz: usize,
        p: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(p.len(), nu * nx * ny * nz);
        Self { nu, nx, ny, nz, p }
    }

    #[inline]
    pub fn nu(&self) -> usize {
        self.nu
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
    pub fn mass(&self, u: usize, x: usize, y: usize, z: usize) -> f64 {
        self.p[((u * self.nx + x) * self.ny + y) * self.nz + z]
    }

    /// Marginal over `(x, y, z)`, i.e. the joint with `U` summed out.
    pub fn marginal_xyz(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nx * self.ny * self.nz];
        for u in 0..self.nu {
            for x in 0..self.nx {
                for y in 0..self.ny {
                    for z in 0..self.nz {
                        m[(x * self.ny + y) * self.nz + z] += self.mass(u, x, y, z);
                    }
                }
            }
        }
        m
    }
}

/// Builds the joint distribution `p0(u) p1(x|u) p2(y|u) W(z|x,y|q)`.
pub fn joint_distribution(
    policy: &InputPolicy,
    ch: &ChannelSpec,
    q: &StatePrior,
) -> Result<JointUxyz, InfotheoryError> {
    if policy.nx() != ch.nx() || policy.ny() != ch.ny() {
        return Err(InfotheoryError::DimensionMismatch(format!(
            "policy is on {}x{}, channel on {}x{}",
            policy.nx(),
            policy.ny(),
            ch.nx(),
            ch.ny()
        )));
    }
    if q.len() != ch.ns() {
        return Err(InfotheoryError::DimensionMismatch(format!(
            "prior over {} states, channel has {}",
            q.len(),
            ch.ns()
        )));
    }
    let (nu, nx, ny, nz) = (policy.nu(), ch.nx(), ch.ny(), ch.nz());
    let mut p = vec![0.0; nu * nx * ny * nz];
    for u in 0..nu {
        for x in 0..nx {
            for y in 0..ny {
                let mass = policy.input_mass(u, x, y);
                if mass == 0.0 {
                    continue;
                }
                let base = ((u * nx + x) * ny + y) * nz;
                for z in 0..nz {
                    p[base + z] = mass * ch.mixture_prob(q.as_slice(), x, y, z);
                }
            }
        }
    }
    Ok(JointUxyz::from_parts_unchecked(nu, nx, ny, nz, p))
}

/// Shannon entropy in bits of a probability vector.
pub fn entropy(dist: &[f64]) -> Result<f64, InfotheoryError> {
    let mut sum = 0.0;
    for &v in dist {
        if v < -1e-12 {
            return Err(InfotheoryError::InvalidDistribution(format!(
                "negative mass {v}"
            )));
        }
        sum += v.max(0.0);
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(InfotheoryError::InvalidDistribution(format!(
            "mass sums to {sum}"
        )));
    }
    Ok(entropy_raw(dist.iter().copied()))
}

/// Entropy of an unnormalized nonnegative vector, with the `p log p` floor.
pub(crate) fn entropy_raw(masses: impl Iterator<Item = f64>) -> f64 {
    let mut h = 0.0;
    for p in masses {
        if p > P_FLOOR {
            h -= p * p.log2();
        }
    }
    h
}

/// The four mutual informations entering the rate region, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiTerms {
    /// `I(Z; X | Y, U)`
    pub i_x_given_yu: f64,
    /// `I(Z; Y | X, U)`
    pub i_y_given_xu: f64,
    /// `I(Z; X, Y | U)`
    pub i_xy_given_u: f64,
    /// `I(Z; X, Y)`
    pub i_xy: f64,
}

/// Computes the four region terms from a joint distribution, via joint
/// entropies of the marginalizations. Tiny negative round-off is clamped
/// to zero; anything below [`MI_ROUNDOFF_FLOOR`] trips a debug assertion.
pub fn mi_terms(joint: &JointUxyz) -> MiTerms {
    let (nu, nx, ny, nz) = (joint.nu(), joint.nx(), joint.ny(), joint.nz());

    let mut m_uxy = vec![0.0; nu * nx * ny];
    let mut m_uyz = vec![0.0; nu * ny * nz];
    let mut m_uxz = vec![0.0; nu * nx * nz];
    let mut m_uy = vec![0.0; nu * ny];
    let mut m_ux = vec![0.0; nu * nx];
    let mut m_uz = vec![0.0; nu * nz];
    let mut m_u = vec![0.0; nu];
    let mut m_xy = vec![0.0; nx * ny];
    let mut m_xyz = vec![0.0; nx * ny * nz];
    let mut m_z = vec![0.0; nz];

    for u in 0..nu {
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    let p = joint.mass(u, x, y, z);
                    if p == 0.0 {
                        continue;
                    }
                    m_uxy[(u * nx + x) * ny + y] += p;
                    m_uyz[(u * ny + y) * nz + z] += p;
                    m_uxz[(u * nx + x) * nz + z] += p;
                    m_uy[u * ny + y] += p;
                    m_ux[u * nx + x] += p;
                    m_uz[u * nz + z] += p;
                    m_u[u] += p;
                    m_xy[x * ny + y] += p;
                    m_xyz[(x * ny + y) * nz + z] += p;
                    m_z[z] += p;
                }
            }
        }
    }

    let h = |v: &[f64]| entropy_raw(v.iter().copied());
    let h_uxyz = entropy_raw(
        (0..nu)
            .flat_map(|u| (0..nx).map(move |x| (u, x)))
            .flat_map(|(u, x)| (0..ny).map(move |y| (u, x, y)))
            .flat_map(|(u, x, y)| (0..nz).map(move |z| joint.mass(u, x, y, z))),
    );
    let h_uxy = h(&m_uxy);
    let h_uyz = h(&m_uyz);
    let h_uxz = h(&m_uxz);
    let h_uy = h(&m_uy);
    let h_ux = h(&m_ux);
    let h_uz = h(&m_uz);
    let h_u = h(&m_u);
    let h_xy = h(&m_xy);
    let h_xyz = h(&m_xyz);
    let h_z = h(&m_z);

    let terms = MiTerms {
        i_x_given_yu: clamp_mi(h_uxy + h_uyz - h_uxyz - h_uy),
        i_y_given_xu: clamp_mi(h_uxy + h_uxz - h_uxyz - h_ux),
        i_xy_given_u: clamp_mi(h_uxy + h_uz - h_uxyz - h_u),
        i_xy: clamp_mi(h_xy + h_z - h_xyz),
    };
    debug_assert!(terms.i_xy <= (nz as f64).log2() + 1e-9);
    terms
}

#[inline]
fn clamp_mi(v: f64) -> f64 {
    debug_assert!(
        v >= MI_ROUNDOFF_FLOOR,
        "mutual information {v} below round-off floor"
    );
    v.max(0.0)
}
