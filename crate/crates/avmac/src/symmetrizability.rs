//! Symmetrizability decisions by linear feasibility.
//!
//! A channel family is symmetrizable when a stochastic map from inputs to
//! states makes swapped input pairs statistically indistinguishable at the
//! receiver. Each of the four variants ((X,Y)-, X-, Y-, and the
//! single-user notion on the product alphabet) is a system of linear
//! equalities in the entries of the symmetrizing kernel. We cast the
//! decision as "minimize the maximum equality violation over stochastic
//! kernels" and solve the resulting linear program exactly; the optimum is
//! an explicit certificate either way.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelSpec;
use crate::lp::{self, Cmp, Constraint, LinearProgram, LpError};

/// Default residual below which a kernel counts as an exact symmetrizer.
pub const DEFAULT_TOLERANCE: f64 = 1e-7;
/// Residuals in this band are decided infeasible but flagged as marginal.
pub const MARGINAL_BAND: (f64, f64) = (1e-7, 1e-4);

#[derive(Debug, Error)]
pub enum SymmetrizabilityError {
    #[error("decision tolerance must lie in (0, 1e-3], got {0}")]
    InvalidTolerance(f64),
    #[error("certificate dimensions do not match the channel: {0}")]
    DimensionMismatch(String),
    #[error("LP solver failed: {0}")]
    SolverFailure(#[from] LpError),
}

/// Which symmetrizability condition is being decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetrizerKind {
    /// Kernel conditioned on the full input pair `(x, y)`.
    XY,
    /// Kernel conditioned on sender 1's letter only.
    X,
    /// Kernel conditioned on sender 2's letter only.
    Y,
    /// The single-user condition on the product alphabet `X x Y`; decides
    /// the same property as [`SymmetrizerKind::XY`] by a separate route.
    Single,
}

impl SymmetrizerKind {
    pub const ALL: [SymmetrizerKind; 4] = [
        SymmetrizerKind::XY,
        SymmetrizerKind::X,
        SymmetrizerKind::Y,
        SymmetrizerKind::Single,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SymmetrizerKind::XY => "XY",
            SymmetrizerKind::X => "X",
            SymmetrizerKind::Y => "Y",
            SymmetrizerKind::Single => "SINGLE",
        }
    }

    /// Number of rows of the kernel for this kind on the given channel.
    pub fn rows(self, ch: &ChannelSpec) -> usize {
        match self {
            SymmetrizerKind::XY | SymmetrizerKind::Single => ch.nx() * ch.ny(),
            SymmetrizerKind::X => ch.nx(),
            SymmetrizerKind::Y => ch.ny(),
        }
    }
}

/// A stochastic kernel `sigma(s | row)` together with the verdict it
/// witnesses: `feasible` iff the recomputed residual is at most `tol`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetrizerCertificate {
    pub kind: SymmetrizerKind,
    /// Row-major kernel, `rows x ns`.
    pub sigma: Vec<f64>,
    pub rows: usize,
    pub ns: usize,
    /// Maximum absolute violation of the defining equalities, recomputed
    /// by direct enumeration after solving.
    pub residual: f64,
    pub feasible: bool,
    pub tol: f64,
}

impl SymmetrizerCertificate {
    #[inline]
    pub fn sigma_at(&self, row: usize, s: usize) -> f64 {
        self.sigma[row * self.ns + s]
    }

    /// True when infeasible but with a residual inside the marginal band.
    pub fn is_marginal(&self) -> bool {
        !self.feasible && self.residual > MARGINAL_BAND.0 && self.residual < MARGINAL_BAND.1
    }
}

/// Decides symmetrizability of the given kind.
///
/// Solves `min t` over stochastic kernels subject to every defining
/// equality lying in `[-t, t]`, then recomputes the achieved violation by
/// direct enumeration and compares it against `tol`.
pub fn check_symmetrizable(
    ch: &ChannelSpec,
    kind: SymmetrizerKind,
    tol: f64,
) -> Result<SymmetrizerCertificate, SymmetrizabilityError> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(SymmetrizabilityError::InvalidTolerance(tol));
    }
    let rows = kind.rows(ch);
    let ns = ch.ns();
    let num_sigma = rows * ns;
    let t_var = num_sigma;

    let mut constraints = Vec::new();
    for eq in equation_coefficients(ch, kind) {
        let mut upper = Vec::with_capacity(num_sigma + 1);
        upper.extend_from_slice(&eq);
        upper.push(-1.0);
        let mut lower: Vec<f64> = eq.iter().map(|v| -v).collect();
        lower.push(-1.0);
        constraints.push(Constraint {
            coeffs: upper,
            cmp: Cmp::Le,
            rhs: 0.0,
        });
        constraints.push(Constraint {
            coeffs: lower,
            cmp: Cmp::Le,
            rhs: 0.0,
        });
    }
    for r in 0..rows {
        let mut coeffs = vec![0.0; num_sigma + 1];
        for s in 0..ns {
            coeffs[r * ns + s] = 1.0;
        }
        constraints.push(Constraint {
            coeffs,
            cmp: Cmp::Eq,
            rhs: 1.0,
        });
    }
    let mut objective = vec![0.0; num_sigma + 1];
    objective[t_var] = 1.0;
    let lp = LinearProgram {
        num_vars: num_sigma + 1,
        objective,
        constraints,
    };
    let solution = lp::solve(&lp)?;

    let mut sigma = solution.x[..num_sigma].to_vec();
    for v in &mut sigma {
        *v = v.max(0.0);
    }
    let mut cert = SymmetrizerCertificate {
        kind,
        sigma,
        rows,
        ns,
        residual: 0.0,
        feasible: false,
        tol,
    };
    cert.residual = verify_certificate(ch, &cert)?;
    cert.feasible = cert.residual <= tol;
    Ok(cert)
}

/// Recomputes the maximum equality violation of a certificate by direct
/// enumeration of the defining sums; independent of the LP route.
pub fn verify_certificate(
    ch: &ChannelSpec,
    cert: &SymmetrizerCertificate,
) -> Result<f64, SymmetrizabilityError> {
    let rows = cert.kind.rows(ch);
    if cert.rows != rows || cert.ns != ch.ns() || cert.sigma.len() != rows * ch.ns() {
        return Err(SymmetrizabilityError::DimensionMismatch(format!(
            "kernel is {}x{}, expected {}x{}",
            cert.rows,
            cert.ns,
            rows,
            ch.ns()
        )));
    }
    let ns = ch.ns();
    let sig = |row: usize, s: usize| cert.sigma[row * ns + s];
    let mut worst: f64 = 0.0;
    match cert.kind {
        SymmetrizerKind::XY => {
            for z in 0..ch.nz() {
                for x in 0..ch.nx() {
                    for y in 0..ch.ny() {
                        for xp in 0..ch.nx() {
                            for yp in 0..ch.ny() {
                                let mut lhs = 0.0;
                                let mut rhs = 0.0;
                                for s in 0..ns {
                                    lhs += ch.w(s, x, y, z) * sig(xp * ch.ny() + yp, s);
                                    rhs += ch.w(s, xp, yp, z) * sig(x * ch.ny() + y, s);
                                }
                                worst = worst.max((lhs - rhs).abs());
                            }
                        }
                    }
                }
            }
        }
        SymmetrizerKind::X => {
            for z in 0..ch.nz() {
                for x in 0..ch.nx() {
                    for xp in 0..ch.nx() {
                        for y in 0..ch.ny() {
                            let mut lhs = 0.0;
                            let mut rhs = 0.0;
                            for s in 0..ns {
                                lhs += ch.w(s, x, y, z) * sig(xp, s);
                                rhs += ch.w(s, xp, y, z) * sig(x, s);
                            }
                            worst = worst.max((lhs - rhs).abs());
                        }
                    }
                }
            }
        }
        SymmetrizerKind::Y => {
            for z in 0..ch.nz() {
                for y in 0..ch.ny() {
                    for yp in 0..ch.ny() {
                        for x in 0..ch.nx() {
                            let mut lhs = 0.0;
                            let mut rhs = 0.0;
                            for s in 0..ns {
                                lhs += ch.w(s, x, y, z) * sig(yp, s);
                                rhs += ch.w(s, x, yp, z) * sig(y, s);
                            }
                            worst = worst.max((lhs - rhs).abs());
                        }
                    }
                }
            }
        }
        SymmetrizerKind::Single => {
            // The product-alphabet single-user view: inputs a = (x, y).
            let na = ch.nx() * ch.ny();
            let h = |s: usize, a: usize, b: usize| ch.w(s, a / ch.ny(), a % ch.ny(), b);
            for b in 0..ch.nz() {
                for a in 0..na {
                    for ap in 0..na {
                        let mut lhs = 0.0;
                        let mut rhs = 0.0;
                        for s in 0..ns {
                            lhs += h(s, a, b) * sig(ap, s);
                            rhs += h(s, ap, b) * sig(a, s);
                        }
                        worst = worst.max((lhs - rhs).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Coefficient vectors (over the flattened kernel variables) of the
/// defining equalities, one per unordered pair of distinct conditioning
/// rows and output letter.
fn equation_coefficients(ch: &ChannelSpec, kind: SymmetrizerKind) -> Vec<Vec<f64>> {
    let rows = kind.rows(ch);
    let ns = ch.ns();
    let mut eqs = Vec::new();
    match kind {
        SymmetrizerKind::XY | SymmetrizerKind::Single => {
            let ny = ch.ny();
            let na = rows;
            for a in 0..na {
                for ap in (a + 1)..na {
                    for z in 0..ch.nz() {
                        let mut coeffs = vec![0.0; rows * ns];
                        for s in 0..ns {
                            coeffs[ap * ns + s] += ch.w(s, a / ny, a % ny, z);
                            coeffs[a * ns + s] -= ch.w(s, ap / ny, ap % ny, z);
                        }
                        eqs.push(coeffs);
                    }
                }
            }
        }
        SymmetrizerKind::X => {
            for x in 0..ch.nx() {
                for xp in (x + 1)..ch.nx() {
                    for y in 0..ch.ny() {
                        for z in 0..ch.nz() {
                            let mut coeffs = vec![0.0; rows * ns];
                            for s in 0..ns {
                                coeffs[xp * ns + s] += ch.w(s, x, y, z);
                                coeffs[x * ns + s] -= ch.w(s, xp, y, z);
                            }
                            eqs.push(coeffs);
                        }
                    }
                }
            }
        }
        SymmetrizerKind::Y => {
            for y in 0..ch.ny() {
                for yp in (y + 1)..ch.ny() {
                    for x in 0..ch.nx() {
                        for z in 0..ch.nz() {
                            let mut coeffs = vec![0.0; rows * ns];
                            for s in 0..ns {
                                coeffs[yp * ns + s] += ch.w(s, x, y, z);
                                coeffs[y * ns + s] -= ch.w(s, x, yp, z);
                            }
                            eqs.push(coeffs);
                        }
                    }
                }
            }
        }
    }
    eqs
}
