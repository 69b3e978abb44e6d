//! Rate regions: the three-constraint pentagon for a fixed input policy
//! and state prior, its robust version minimized over all priors, the
//! capacity region as a union of robust pentagons over input policies,
//! the deterministic-coding dichotomy, the non-conferencing verdict, and
//! cooperation thresholds.
//!
//! The union over input policies has no known exact algorithm, so the
//! region is reported as an inner approximation: randomized restarts plus
//! coordinate ascent trace the boundary, and every reported pentagon is
//! backed by a per-policy minimization over the state simplex that
//! cross-checks projected gradient descent against an exhaustive grid.
//! The policy search never looks at the conferencing capacities, so runs
//! with the same seed explore identical policies for any `(C1, C2)`; the
//! monotonicity of the reported region in the conferencing capacities is
//! then exact rather than statistical.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{ChannelError, ChannelSpec, StatePrior};
use crate::infotheory::{
    entropy_raw, joint_distribution, mi_terms, InfotheoryError, InputPolicy, P_FLOOR,
};
use crate::optim::{self, for_each_grid_point, grid_point_count, PgdOptions};
use crate::symmetrizability::{
    check_symmetrizable, SymmetrizabilityError, SymmetrizerCertificate, SymmetrizerKind,
    DEFAULT_TOLERANCE,
};

/// Bits by which a log-ratio is clamped when a zero-mass cell is hit
/// during gradient evaluation at the simplex boundary.
const LOG_RATIO_CLAMP: f64 = 60.0;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("conferencing capacities must be finite and nonnegative")]
    NegativeConferencing,
    #[error("dichotomy requires C1 or C2 positive; use the non-conferencing verdict instead")]
    HypothesisViolation,
    #[error("search budget invalid or exhausted: {0}")]
    BudgetExceeded(String),
    #[error(transparent)]
    Symmetrizability(#[from] SymmetrizabilityError),
    #[error(transparent)]
    Infotheory(#[from] InfotheoryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// The four mutual informations that can be minimized over the prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiTermKind {
    /// `I(Z; X | Y, U)`
    XGivenYU,
    /// `I(Z; Y | X, U)`
    YGivenXU,
    /// `I(Z; X, Y | U)`
    XYGivenU,
    /// `I(Z; X, Y)`
    XY,
}

// ---------------------------------------------------------------------------
// Per-(p, q) evaluation and minimization over the state simplex
// ---------------------------------------------------------------------------

/// Value of one region term at the prior `q` (a raw slice summing to 1).
pub fn mi_term_value(
    policy: &InputPolicy,
    ch: &ChannelSpec,
    q: &[f64],
    kind: MiTermKind,
) -> f64 {
    let (value, _) = term_value_maybe_grad(policy, ch, q, kind, false);
    value
}

/// Computes `I(Z; A | B)` for the grouping selected by `kind`, optionally
/// with its gradient in `q`. The gradient of each term is
/// `d/dq_s = sum_cells p(u,x,y) w(s,x,y,z) log2( P(z|a,b) / P(z|b) )`,
/// the per-state directional derivative of the channel mixture.
fn term_value_maybe_grad(
    policy: &InputPolicy,
    ch: &ChannelSpec,
    q: &[f64],
    kind: MiTermKind,
    want_grad: bool,
) -> (f64, Vec<f64>) {
    let (nu, nx, ny, nz, ns) = (policy.nu(), ch.nx(), ch.ny(), ch.nz(), ch.ns());
    let (na, nb) = match kind {
        MiTermKind::XGivenYU => (nx, ny * nu),
        MiTermKind::YGivenXU => (ny, nx * nu),
        MiTermKind::XYGivenU => (nx * ny, nu),
        MiTermKind::XY => (nx * ny, 1),
    };
    let cell_ab = |u: usize, x: usize, y: usize| -> (usize, usize) {
        match kind {
            MiTermKind::XGivenYU => (x, y * nu + u),
            MiTermKind::YGivenXU => (y, x * nu + u),
            MiTermKind::XYGivenU => (x * ny + y, u),
            MiTermKind::XY => (x * ny + y, 0),
        }
    };

    let mut m_abz = vec![0.0; na * nb * nz];
    for u in 0..nu {
        for x in 0..nx {
            for y in 0..ny {
                let mass = policy.input_mass(u, x, y);
                if mass == 0.0 {
                    continue;
                }
                let (a, b) = cell_ab(u, x, y);
                for z in 0..nz {
                    m_abz[(a * nb + b) * nz + z] += mass * ch.mixture_prob(q, x, y, z);
                }
            }
        }
    }
    let mut m_ab = vec![0.0; na * nb];
    let mut m_bz = vec![0.0; nb * nz];
    let mut m_b = vec![0.0; nb];
    for a in 0..na {
        for b in 0..nb {
            for z in 0..nz {
                let p = m_abz[(a * nb + b) * nz + z];
                m_ab[a * nb + b] += p;
                m_bz[b * nz + z] += p;
                m_b[b] += p;
            }
        }
    }

    // I(Z;A|B) = H(A,B) + H(B,Z) - H(A,B,Z) - H(B).
    let value = entropy_raw(m_ab.iter().copied()) + entropy_raw(m_bz.iter().copied())
        - entropy_raw(m_abz.iter().copied())
        - entropy_raw(m_b.iter().copied());
    let value = value.max(0.0);

    if !want_grad {
        return (value, Vec::new());
    }
    let mut grad = vec![0.0; ns];
    for u in 0..nu {
        for x in 0..nx {
            for y in 0..ny {
                let mass = policy.input_mass(u, x, y);
                if mass == 0.0 {
                    continue;
                }
                let (a, b) = cell_ab(u, x, y);
                for z in 0..nz {
                    let num = m_abz[(a * nb + b) * nz + z] / m_ab[a * nb + b].max(P_FLOOR);
                    let den = m_bz[b * nz + z] / m_b[b].max(P_FLOOR);
                    let log_ratio = if num <= P_FLOOR && den <= P_FLOOR {
                        0.0
                    } else {
                        (num.max(1e-300) / den.max(1e-300))
                            .log2()
                            .clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP)
                    };
                    if log_ratio == 0.0 {
                        continue;
                    }
                    for s in 0..ns {
                        let w = ch.w(s, x, y, z);
                        if w > 0.0 {
                            grad[s] += mass * w * log_ratio;
                        }
                    }
                }
            }
        }
    }
    (value, grad)
}

/// Controls for the minimization over the state simplex.
#[derive(Debug, Clone, Copy, Default)]
pub struct QOptions {
    /// Grid resolution (multiples of `1/grid`); 0 selects a default that
    /// keeps the enumeration desk-sized (128 for up to three states).
    pub grid: usize,
    pub pgd: PgdOptions,
}

impl QOptions {
    /// Cheap settings for inner search loops.
    pub fn cheap() -> Self {
        Self {
            grid: 8,
            pgd: PgdOptions {
                restarts: 1,
                iters: 12,
                seed: 0,
            },
        }
    }

    pub fn grid_steps(&self, ns: usize) -> usize {
        if self.grid > 0 {
            return self.grid;
        }
        if ns <= 3 {
            128
        } else {
            for steps in [32, 16, 8, 4] {
                if grid_point_count(ns, steps) <= 4000 {
                    return steps;
                }
            }
            2
        }
    }
}

/// Minimizes one region term over the state simplex: projected gradient
/// descent from several starts, cross-checked by exhaustive grid search;
/// the reported value is the smaller of the two routes.
pub fn min_term_over_q(
    policy: &InputPolicy,
    ch: &ChannelSpec,
    kind: MiTermKind,
    qopts: &QOptions,
) -> (f64, Vec<f64>) {
    let ns = ch.ns();
    if ns == 1 {
        let q = vec![1.0];
        let value = mi_term_value(policy, ch, &q, kind);
        return (value, q);
    }
    let f = |q: &[f64]| mi_term_value(policy, ch, q, kind);
    let g = |q: &[f64]| term_value_maybe_grad(policy, ch, q, kind, true).1;
    let (mut best_q, mut best) = if qopts.pgd.restarts > 0 {
        optim::minimize_on_simplex(ns, f, g, &qopts.pgd)
    } else {
        let uniform = vec![1.0 / ns as f64; ns];
        let value = f(&uniform);
        (uniform, value)
    };
    let steps = qopts.grid_steps(ns);
    if steps >= 1 {
        for_each_grid_point(ns, steps, |q| {
            let value = f(q);
            if value < best {
                best = value;
                best_q = q.to_vec();
            }
        });
    }
    (best, best_q)
}

// ---------------------------------------------------------------------------
// Pentagons
// ---------------------------------------------------------------------------

/// One half-plane `a1*R1 + a2*R2 <= b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfPlane {
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
}

/// The rate pentagon `{R1 <= b1, R2 <= b2, R1 + R2 <= b12, R >= 0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePolytope {
    pub constraints: Vec<HalfPlane>,
}

impl RatePolytope {
    pub fn from_bounds(b1: f64, b2: f64, b12: f64) -> Self {
        let clamp = |v: f64| v.max(0.0);
        Self {
            constraints: vec![
                HalfPlane {
                    a1: 1.0,
                    a2: 0.0,
                    b: clamp(b1),
                },
                HalfPlane {
                    a1: 0.0,
                    a2: 1.0,
                    b: clamp(b2),
                },
                HalfPlane {
                    a1: 1.0,
                    a2: 1.0,
                    b: clamp(b12),
                },
            ],
        }
    }

    pub fn r1_bound(&self) -> f64 {
        self.constraints[0].b
    }

    pub fn r2_bound(&self) -> f64 {
        self.constraints[1].b
    }

    pub fn sum_bound(&self) -> f64 {
        self.constraints[2].b
    }

    pub fn contains(&self, r1: f64, r2: f64, tol: f64) -> bool {
        r1 >= -tol
            && r2 >= -tol
            && self
                .constraints
                .iter()
                .all(|h| h.a1 * r1 + h.a2 * r2 <= h.b + tol)
    }

    /// Vertices of the pentagon (deduplicated, unordered).
    pub fn vertices(&self) -> Vec<(f64, f64)> {
        let (b1, b2, b12) = (self.r1_bound(), self.r2_bound(), self.sum_bound());
        let mut pts = vec![
            (0.0, 0.0),
            (b1.min(b12), 0.0),
            (0.0, b2.min(b12)),
        ];
        if b12 >= b1 + b2 {
            pts.push((b1, b2));
        } else {
            if b12 >= b1 {
                pts.push((b1, b12 - b1));
            }
            if b12 >= b2 {
                pts.push((b12 - b2, b2));
            }
        }
        dedupe_points(&mut pts);
        pts
    }

    /// Support function: the maximum of `w1*R1 + w2*R2` over the pentagon.
    pub fn support(&self, w1: f64, w2: f64) -> f64 {
        self.vertices()
            .into_iter()
            .map(|(r1, r2)| w1 * r1 + w2 * r2)
            .fold(0.0, f64::max)
    }
}

fn dedupe_points(pts: &mut Vec<(f64, f64)>) {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &(x, y) in pts.iter() {
        if !out
            .iter()
            .any(|&(a, b)| (a - x).abs() < 1e-12 && (b - y).abs() < 1e-12)
        {
            out.push((x, y));
        }
    }
    *pts = out;
}

fn check_conferencing(c1: f64, c2: f64) -> Result<(), RegionError> {
    if !c1.is_finite() || !c2.is_finite() || c1 < 0.0 || c2 < 0.0 {
        return Err(RegionError::NegativeConferencing);
    }
    Ok(())
}

/// The pentagon for a fixed `(p, q)` and conferencing capacities.
pub fn rate_region(
    policy: &InputPolicy,
    ch: &ChannelSpec,
    q: &StatePrior,
    c1: f64,
    c2: f64,
) -> Result<RatePolytope, RegionError> {
    check_conferencing(c1, c2)?;
    let joint = joint_distribution(policy, ch, q)?;
    let t = mi_terms(&joint);
    Ok(RatePolytope::from_bounds(
        t.i_x_given_yu + c1,
        t.i_y_given_xu + c2,
        (t.i_xy_given_u + c1 + c2).min(t.i_xy),
    ))
}

/// The four robust bounds of the intersection over all priors:
/// per-constraint minimization decomposes because the minimum of a
/// pointwise `min` of two functions is the `min` of their minima.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RobustBounds {
    /// `min_q I(Z;X|Y,U) + C1`
    pub b1: f64,
    /// `min_q I(Z;Y|X,U) + C2`
    pub b2: f64,
    /// `min_q I(Z;X,Y|U) + C1 + C2`
    pub b3a: f64,
    /// `min_q I(Z;X,Y)`
    pub b3b: f64,
}

impl RobustBounds {
    pub fn pentagon(&self) -> RatePolytope {
        RatePolytope::from_bounds(self.b1, self.b2, self.b3a.min(self.b3b))
    }
}

/// Minimizes all four region terms over the state simplex.
pub fn robust_bounds(
    policy: &InputPolicy,
    ch: &ChannelSpec,
    c1: f64,
    c2: f64,
    qopts: &QOptions,
) -> Result<RobustBounds, RegionError> {
    check_conferencing(c1, c2)?;
    if policy.nx() != ch.nx() || policy.ny() != ch.ny() {
        return Err(RegionError::DimensionMismatch(format!(
            "policy on {}x{}, channel on {}x{}",
            policy.nx(),
            policy.ny(),
            ch.nx(),
            ch.ny()
        )));
    }
    let raw = raw_minima(policy, ch, qopts);
    Ok(RobustBounds {
        b1: raw[0] + c1,
        b2: raw[1] + c2,
        b3a: raw[2] + c1 + c2,
        b3b: raw[3],
    })
}

fn raw_minima(policy: &InputPolicy, ch: &ChannelSpec, qopts: &QOptions) -> [f64; 4] {
    [
        min_term_over_q(policy, ch, MiTermKind::XGivenYU, qopts).0,
        min_term_over_q(policy, ch, MiTermKind::YGivenXU, qopts).0,
        min_term_over_q(policy, ch, MiTermKind::XYGivenU, qopts).0,
        min_term_over_q(policy, ch, MiTermKind::XY, qopts).0,
    ]
}

// ---------------------------------------------------------------------------
// Capacity region approximation
// ---------------------------------------------------------------------------

/// Robust per-policy minima, free of conferencing constants, as recorded
/// for one sampled policy.
#[derive(Debug, Clone)]
pub struct BoundRecord {
    pub policy: InputPolicy,
    /// `min_q I(Z;X|Y,U)`
    pub b1: f64,
    /// `min_q I(Z;Y|X,U)`
    pub b2: f64,
    /// `min_q I(Z;X,Y|U)`
    pub b3a: f64,
    /// `min_q I(Z;X,Y)`
    pub b3b: f64,
}

impl BoundRecord {
    pub fn bounds_with(&self, c1: f64, c2: f64) -> RobustBounds {
        RobustBounds {
            b1: self.b1 + c1,
            b2: self.b2 + c2,
            b3a: self.b3a + c1 + c2,
            b3b: self.b3b,
        }
    }

    pub fn pentagon(&self, c1: f64, c2: f64) -> RatePolytope {
        self.bounds_with(c1, c2).pentagon()
    }
}

/// Search budgets recorded alongside a region approximation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SearchResolution {
    pub p_restarts: usize,
    pub directions: usize,
    pub ascent_sweeps: usize,
    pub q_grid: usize,
    pub pgd_restarts: usize,
    pub pgd_iters: usize,
    pub nu: usize,
    pub seed: u64,
    /// Set when the search stopped early; the result is still a valid
    /// inner bound.
    pub truncated: bool,
}

/// Inner approximation of the capacity region: the convex hull of the
/// robust pentagons of the sampled policies.
#[derive(Debug, Clone)]
pub struct RegionApproximation {
    /// Hull vertices, counter-clockwise starting from `(0, 0)`.
    pub inner_vertices: Vec<(f64, f64)>,
    pub bound_records: Vec<BoundRecord>,
    pub resolution: SearchResolution,
    pub conferencing: (f64, f64),
}

impl RegionApproximation {
    fn from_records(
        records: Vec<BoundRecord>,
        resolution: SearchResolution,
        c1: f64,
        c2: f64,
    ) -> Self {
        let mut points = vec![(0.0, 0.0)];
        for record in &records {
            points.extend(record.pentagon(c1, c2).vertices());
        }
        let inner_vertices = convex_hull(points);
        Self {
            inner_vertices,
            bound_records: records,
            resolution,
            conferencing: (c1, c2),
        }
    }

    /// Re-derives the hull for different conferencing capacities from the
    /// stored per-policy bounds, without re-running any search. Because
    /// the records are conferencing-free, regions derived this way from
    /// one search are exactly monotone in `(C1, C2)`.
    pub fn with_conferencing(&self, c1: f64, c2: f64) -> Self {
        Self::from_records(self.bound_records.clone(), self.resolution, c1, c2)
    }

    pub fn max_sum_rate(&self) -> f64 {
        self.inner_vertices
            .iter()
            .map(|&(a, b)| a + b)
            .fold(0.0, f64::max)
    }

    pub fn max_r1(&self) -> f64 {
        self.inner_vertices.iter().map(|&(a, _)| a).fold(0.0, f64::max)
    }

    pub fn max_r2(&self) -> f64 {
        self.inner_vertices.iter().map(|&(_, b)| b).fold(0.0, f64::max)
    }

    /// Membership in the reported region, with tolerance: inside the
    /// hull, or failing that (degenerate hulls can drop slivers thinner
    /// than the tolerance) inside some recorded pentagon.
    pub fn contains(&self, r1: f64, r2: f64, tol: f64) -> bool {
        if self.hull_contains(r1, r2, tol) {
            return true;
        }
        let (c1, c2) = self.conferencing;
        self.bound_records
            .iter()
            .any(|rec| rec.pentagon(c1, c2).contains(r1, r2, tol))
    }

    fn hull_contains(&self, r1: f64, r2: f64, tol: f64) -> bool {
        let v = &self.inner_vertices;
        match v.len() {
            0 => false,
            1 => (r1 - v[0].0).abs() <= tol && (r2 - v[0].1).abs() <= tol,
            2 => point_segment_distance((r1, r2), v[0], v[1]) <= tol,
            _ => {
                for i in 0..v.len() {
                    let a = v[i];
                    let b = v[(i + 1) % v.len()];
                    let cross = (b.0 - a.0) * (r2 - a.1) - (b.1 - a.1) * (r1 - a.0);
                    if cross < -tol {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// True when consecutive hull edges always turn left (convex, CCW).
    pub fn is_convex_polygon(&self) -> bool {
        let v = &self.inner_vertices;
        if v.len() < 3 {
            return true;
        }
        for i in 0..v.len() {
            let a = v[i];
            let b = v[(i + 1) % v.len()];
            let c = v[(i + 2) % v.len()];
            let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
            if cross < -1e-9 {
                return false;
            }
        }
        true
    }
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 <= 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Monotone-chain convex hull; returns vertices counter-clockwise
/// starting from the lexicographically smallest point, which for rate
/// regions is the origin.
fn convex_hull(mut points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    if points.len() <= 2 {
        return points;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &points {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in points.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Budgets for the policy search.
#[derive(Debug, Clone)]
pub struct RegionOptions {
    /// Auxiliary alphabet size; defaults to the cardinality bound
    /// `min(|X||Y| + 2, |Z| + 3)`.
    pub nu: Option<usize>,
    pub p_restarts: usize,
    /// Number of boundary directions in the first quadrant.
    pub directions: usize,
    pub ascent_sweeps: usize,
    pub seed: u64,
    pub q: QOptions,
}

impl Default for RegionOptions {
    fn default() -> Self {
        Self {
            nu: None,
            p_restarts: 256,
            directions: 33,
            ascent_sweeps: 1,
            seed: 0,
            q: QOptions::default(),
        }
    }
}

impl RegionOptions {
    pub fn nu_for(&self, ch: &ChannelSpec) -> usize {
        self.nu
            .unwrap_or_else(|| (ch.nx() * ch.ny() + 2).min(ch.nz() + 3))
            .max(1)
    }
}

fn seed_for(root: u64, index: u64) -> u64 {
    root ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x1234_5678)
}

/// Greedy coordinate ascent over the simplex blocks of a policy: tries
/// mixing each block toward each vertex at a few step sizes, keeping
/// strict improvements of `eval`.
fn ascend_policy(
    policy: &InputPolicy,
    eval: &dyn Fn(&InputPolicy) -> f64,
    sweeps: usize,
) -> (InputPolicy, f64) {
    let mut best = policy.clone();
    let mut best_val = eval(&best);
    let steps = [1.0, 0.5, 0.25];
    for _ in 0..sweeps {
        let mut improved = false;
        // Block 0 is p0; blocks 1..=nu are p1 rows; the rest are p2 rows.
        for block in 0..(1 + 2 * best.nu()) {
            let dim = if block == 0 {
                best.nu()
            } else if block <= best.nu() {
                best.nx()
            } else {
                best.ny()
            };
            for vertex in 0..dim {
                for &gamma in &steps {
                    let mut cand = best.clone();
                    {
                        let row = if block == 0 {
                            cand.p0_mut()
                        } else if block <= best.nu() {
                            cand.p1_row_mut(block - 1)
                        } else {
                            cand.p2_row_mut(block - 1 - best.nu())
                        };
                        for (i, v) in row.iter_mut().enumerate() {
                            *v *= 1.0 - gamma;
                            if i == vertex {
                                *v += gamma;
                            }
                        }
                    }
                    let val = eval(&cand);
                    if val > best_val + 1e-12 {
                        best = cand;
                        best_val = val;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    (best, best_val)
}

/// Explores input policies for the given channel. The search maximizes a
/// fan of conferencing-free objectives (support of the zero-conferencing
/// pentagon in 33 directions, and the full-cooperation bound
/// `min_q I(Z;X,Y)`), so its output depends only on the channel, the
/// budgets, and the seed.
pub fn search_policies(
    ch: &ChannelSpec,
    opts: &RegionOptions,
) -> Result<Vec<InputPolicy>, RegionError> {
    if opts.p_restarts == 0 || opts.directions == 0 {
        return Err(RegionError::BudgetExceeded(
            "p_restarts and directions must be positive".into(),
        ));
    }
    let nu_max = opts.nu_for(ch);
    let (nx, ny) = (ch.nx(), ch.ny());
    let cheap = QOptions::cheap();

    let mut policies: Vec<InputPolicy> = vec![
        InputPolicy::uniform_independent(nx, ny),
        InputPolicy::from_joint(&vec![1.0 / (nx * ny) as f64; nx * ny], nx, ny)?,
    ];

    let fan: Vec<(f64, f64)> = (0..opts.directions)
        .map(|d| {
            let theta = if opts.directions == 1 {
                std::f64::consts::FRAC_PI_4
            } else {
                d as f64 * std::f64::consts::FRAC_PI_2 / (opts.directions - 1) as f64
            };
            (theta.cos(), theta.sin())
        })
        .collect();

    let searched: Vec<InputPolicy> = (0..opts.p_restarts)
        .into_par_iter()
        .map(|i| {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed_for(opts.seed, i as u64));
            let start = match i % 4 {
                0 => InputPolicy::random(&mut rng, 1, nx, ny),
                1 => {
                    let t = {
                        use rand::Rng;
                        let mut t: Vec<f64> = (0..nx * ny)
                            .map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln())
                            .collect();
                        let s: f64 = t.iter().sum();
                        t.iter_mut().for_each(|v| *v /= s);
                        t
                    };
                    InputPolicy::from_joint(&t, nx, ny).expect("valid joint")
                }
                _ => {
                    use rand::Rng;
                    let nu = rng.gen_range(1..=nu_max);
                    InputPolicy::random(&mut rng, nu, nx, ny)
                }
            };
            let full_coop = i % 3 == 2;
            let dir = fan[i % fan.len()];
            let eval = |p: &InputPolicy| -> f64 {
                let raw = raw_minima(p, ch, &cheap);
                if full_coop {
                    raw[3]
                } else {
                    RatePolytope::from_bounds(raw[0], raw[1], raw[2].min(raw[3]))
                        .support(dir.0, dir.1)
                }
            };
            let (ascended, _) = ascend_policy(&start, &eval, opts.ascent_sweeps);
            ascended
        })
        .collect();
    policies.extend(searched);
    Ok(policies)
}

/// Evaluates the robust bounds of the given policies at full resolution
/// and forms the hull of their pentagons. Exposed separately from
/// [`capacity_region`] so property checks can hold the policy sample
/// fixed while varying the channel or the conferencing capacities.
pub fn region_from_policies(
    ch: &ChannelSpec,
    policies: &[InputPolicy],
    c1: f64,
    c2: f64,
    opts: &RegionOptions,
) -> Result<RegionApproximation, RegionError> {
    check_conferencing(c1, c2)?;
    let records: Vec<BoundRecord> = policies
        .par_iter()
        .map(|p| {
            let raw = raw_minima(p, ch, &opts.q);
            BoundRecord {
                policy: p.clone(),
                b1: raw[0],
                b2: raw[1],
                b3a: raw[2],
                b3b: raw[3],
            }
        })
        .collect();
    let resolution = SearchResolution {
        p_restarts: opts.p_restarts,
        directions: opts.directions,
        ascent_sweeps: opts.ascent_sweeps,
        q_grid: opts.q.grid_steps(ch.ns()),
        pgd_restarts: opts.q.pgd.restarts,
        pgd_iters: opts.q.pgd.iters,
        nu: opts.nu_for(ch),
        seed: opts.seed,
        truncated: false,
    };
    Ok(RegionApproximation::from_records(records, resolution, c1, c2))
}

/// Inner approximation of the capacity region `C*(S, C1, C2)`.
pub fn capacity_region(
    ch: &ChannelSpec,
    c1: f64,
    c2: f64,
    opts: &RegionOptions,
) -> Result<RegionApproximation, RegionError> {
    let policies = search_policies(ch, opts)?;
    region_from_policies(ch, &policies, c1, c2, opts)
}

// ---------------------------------------------------------------------------
// Dichotomy and non-conferencing verdicts
// ---------------------------------------------------------------------------

/// Outcome of the deterministic-coding dichotomy with positive
/// conferencing: either the zero region with a symmetrizer witness, or
/// the full random-coding region.
#[derive(Debug, Clone)]
pub enum DichotomyOutcome {
    Zero {
        certificate: SymmetrizerCertificate,
    },
    Region {
        certificate: SymmetrizerCertificate,
        region: RegionApproximation,
    },
}

/// Deterministic capacity region for `C1 + C2 > 0`: the zero region when
/// the channel is (X,Y)-symmetrizable, otherwise the full region.
pub fn deterministic_capacity(
    ch: &ChannelSpec,
    c1: f64,
    c2: f64,
    opts: &RegionOptions,
) -> Result<DichotomyOutcome, RegionError> {
    check_conferencing(c1, c2)?;
    if c1 <= 0.0 && c2 <= 0.0 {
        return Err(RegionError::HypothesisViolation);
    }
    let certificate = check_symmetrizable(ch, SymmetrizerKind::XY, DEFAULT_TOLERANCE)?;
    if certificate.feasible {
        Ok(DichotomyOutcome::Zero { certificate })
    } else {
        let region = capacity_region(ch, c1, c2, opts)?;
        Ok(DichotomyOutcome::Region {
            certificate,
            region,
        })
    }
}

/// What is known about `C_d(S, 0, 0)` from the three symmetrizability
/// verdicts.
#[derive(Debug, Clone)]
pub enum NonconferencingCase {
    /// No symmetrizability: the deterministic region equals the full
    /// region and has nonempty interior.
    FullRegion { region: RegionApproximation },
    /// Only sender 1 can possibly transmit; the bound on `R1` is only an
    /// upper bound (containment), not an achievability statement.
    Sender1AxisOnly { r1_bound: f64 },
    /// Only sender 2 can possibly transmit; upper bound only.
    Sender2AxisOnly { r2_bound: f64 },
    /// The deterministic region is `{(0,0)}`.
    Zero {
        /// True when the verdict follows from X- and Y-symmetrizability
        /// together rather than from (X,Y)-symmetrizability.
        both_single_sided: bool,
    },
}

#[derive(Debug, Clone)]
pub struct NonconferencingVerdict {
    pub xy: SymmetrizerCertificate,
    pub x: SymmetrizerCertificate,
    pub y: SymmetrizerCertificate,
    pub case: NonconferencingCase,
}

/// Classifies the non-conferencing deterministic region by the three
/// symmetrizability verdicts.
pub fn nonconferencing_verdict(
    ch: &ChannelSpec,
    opts: &RegionOptions,
) -> Result<NonconferencingVerdict, RegionError> {
    let xy = check_symmetrizable(ch, SymmetrizerKind::XY, DEFAULT_TOLERANCE)?;
    let x = check_symmetrizable(ch, SymmetrizerKind::X, DEFAULT_TOLERANCE)?;
    let y = check_symmetrizable(ch, SymmetrizerKind::Y, DEFAULT_TOLERANCE)?;
    let case = match (xy.feasible, x.feasible, y.feasible) {
        (true, _, _) => NonconferencingCase::Zero {
            both_single_sided: false,
        },
        (false, true, true) => NonconferencingCase::Zero {
            both_single_sided: true,
        },
        (false, false, false) => NonconferencingCase::FullRegion {
            region: capacity_region(ch, 0.0, 0.0, opts)?,
        },
        (false, false, true) => NonconferencingCase::Sender1AxisOnly {
            r1_bound: axis_bound(ch, true, &opts.q),
        },
        (false, true, false) => NonconferencingCase::Sender2AxisOnly {
            r2_bound: axis_bound(ch, false, &opts.q),
        },
    };
    Ok(NonconferencingVerdict { xy, x, y, case })
}

/// `max_y max_r min_q I(Z_q; X | Y = y)` (or the symmetric expression
/// with the roles of the senders swapped), by grid search over the input
/// distribution with vertex-move polishing.
fn axis_bound(ch: &ChannelSpec, sender1: bool, qopts: &QOptions) -> f64 {
    let (n_own, n_fixed) = if sender1 {
        (ch.nx(), ch.ny())
    } else {
        (ch.ny(), ch.nx())
    };
    let mut best: f64 = 0.0;
    for fixed in 0..n_fixed {
        // Channel restricted to the fixed letter of the other sender.
        let mut w = vec![0.0; n_own * ch.nz() * ch.ns()];
        for s in 0..ch.ns() {
            for own in 0..n_own {
                for z in 0..ch.nz() {
                    let value = if sender1 {
                        ch.w(s, own, fixed, z)
                    } else {
                        ch.w(s, fixed, own, z)
                    };
                    w[(s * n_own + own) * ch.nz() + z] = value;
                }
            }
        }
        let restricted =
            ChannelSpec::new(n_own, 1, ch.nz(), ch.ns(), w).expect("restricted rows stochastic");
        let eval = |r: &[f64]| -> f64 {
            let policy = InputPolicy::new(vec![1.0], vec![r.to_vec()], vec![vec![1.0]])
                .expect("valid restricted policy");
            min_term_over_q(&policy, &restricted, MiTermKind::XGivenYU, qopts).0
        };
        let steps = if n_own <= 2 {
            64
        } else if n_own == 3 {
            32
        } else {
            16
        };
        let mut best_r = vec![1.0 / n_own as f64; n_own];
        let mut best_here = eval(&best_r);
        for_each_grid_point(n_own, steps, |r| {
            let v = eval(r);
            if v > best_here {
                best_here = v;
                best_r = r.to_vec();
            }
        });
        best = best.max(best_here);
    }
    best
}

// ---------------------------------------------------------------------------
// Cooperation thresholds
// ---------------------------------------------------------------------------

/// Conferencing budgets sufficient for full-cooperation performance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CooperationThresholds {
    /// `C_inf = max_p min_q I(Z_q; X, Y)`: the full-cooperation sum rate.
    pub c_infinity: f64,
    /// `C1 + C2` at least this makes the sum constraint inactive.
    pub sum_threshold: f64,
    /// `C1` at least this for the sender-1 constraint.
    pub c1_threshold: f64,
    /// `C2` at least this for the sender-2 constraint.
    pub c2_threshold: f64,
}

/// Activation slack for the near-minimizer set over the prior.
pub const EPS_ACTIVE: f64 = 1e-4;
/// A policy counts as achieving the full-cooperation sum rate when its
/// robust sum bound is within this of the best found.
const EPS_ACHIEVER: f64 = 1e-3;

/// Searches the joint input simplex for the distribution maximizing
/// `min_q I(Z_q; X, Y)` - the max-min input of the channel seen as a
/// single-user arbitrarily varying channel on the product alphabet.
/// Returns the input distribution and the achieved value. Grid search
/// with vertex-move polishing; the objective is concave in the input, so
/// this is reliable at desk scale.
pub fn full_cooperation_input(ch: &ChannelSpec, qopts: &QOptions) -> (Vec<f64>, f64) {
    let (nx, ny) = (ch.nx(), ch.ny());
    let dim = nx * ny;
    let eval_t = |t: &[f64]| -> f64 {
        let policy = InputPolicy::from_joint(t, nx, ny).expect("valid joint");
        min_term_over_q(&policy, ch, MiTermKind::XY, qopts).0
    };
    let steps = if dim <= 2 {
        128
    } else if dim <= 3 {
        32
    } else if dim <= 4 {
        16
    } else {
        8
    };
    let mut best_t = vec![1.0 / dim as f64; dim];
    let mut best = eval_t(&best_t);
    for_each_grid_point(dim, steps, |t| {
        let v = eval_t(t);
        if v > best {
            best = v;
            best_t = t.to_vec();
        }
    });
    // Vertex-move polish directly on the input simplex.
    let gammas = [0.5, 0.25, 0.125, 0.0625];
    for _ in 0..64 {
        let mut improved = false;
        for vertex in 0..dim {
            for &gamma in &gammas {
                let mut cand = best_t.clone();
                for (i, v) in cand.iter_mut().enumerate() {
                    *v *= 1.0 - gamma;
                    if i == vertex {
                        *v += gamma;
                    }
                }
                let v = eval_t(&cand);
                if v > best + 1e-10 {
                    best = v;
                    best_t = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (best_t, best)
}

/// Computes the full-cooperation sum rate and the three conferencing
/// thresholds by nested search: a grid with vertex-move ascent over the
/// joint input distribution for `C_inf`, then evaluation of the
/// near-minimizer prior set for every near-achieving policy.
pub fn cooperation_thresholds(
    ch: &ChannelSpec,
    opts: &RegionOptions,
) -> Result<CooperationThresholds, RegionError> {
    if opts.p_restarts == 0 {
        return Err(RegionError::BudgetExceeded("p_restarts must be positive".into()));
    }
    let (nx, ny) = (ch.nx(), ch.ny());
    let (best_t, c_inf) = full_cooperation_input(ch, &opts.q);
    let best_policy = InputPolicy::from_joint(&best_t, nx, ny)?;

    // Candidate policies: the achiever above plus a regular search.
    let mut candidates = vec![best_policy];
    candidates.extend(search_policies(ch, opts)?);

    let mut sum_term: Option<f64> = None; // min over achievers of max_{q in Q_p} I(Z;X,Y|U)
    let mut c1_term: Option<f64> = None; // max over achievers of min_{q in Q_p} I(Z;X|Y,U)
    let mut c2_term: Option<f64> = None;
    for policy in &candidates {
        let (min_xy, argmin_q) = min_term_over_q(policy, ch, MiTermKind::XY, &opts.q);
        if min_xy < c_inf - EPS_ACHIEVER {
            continue;
        }
        // Near-minimizer set of the prior for this policy.
        let mut active: Vec<Vec<f64>> = vec![argmin_q];
        let steps = opts.q.grid_steps(ch.ns());
        for_each_grid_point(ch.ns(), steps, |q| {
            if mi_term_value(policy, ch, q, MiTermKind::XY) <= min_xy + EPS_ACTIVE {
                active.push(q.to_vec());
            }
        });
        let mut max_xy_u = f64::NEG_INFINITY;
        let mut min_x = f64::INFINITY;
        let mut min_y = f64::INFINITY;
        for q in &active {
            max_xy_u = max_xy_u.max(mi_term_value(policy, ch, q, MiTermKind::XYGivenU));
            min_x = min_x.min(mi_term_value(policy, ch, q, MiTermKind::XGivenYU));
            min_y = min_y.min(mi_term_value(policy, ch, q, MiTermKind::YGivenXU));
        }
        sum_term = Some(sum_term.map_or(max_xy_u, |v: f64| v.min(max_xy_u)));
        c1_term = Some(c1_term.map_or(min_x, |v: f64| v.max(min_x)));
        c2_term = Some(c2_term.map_or(min_y, |v: f64| v.max(min_y)));
    }
    // The polished achiever always qualifies, so the options are set.
    let sum_term = sum_term.unwrap_or(0.0);
    let c1_term = c1_term.unwrap_or(0.0);
    let c2_term = c2_term.unwrap_or(0.0);
    Ok(CooperationThresholds {
        c_infinity: c_inf,
        sum_threshold: (c_inf - sum_term).max(0.0),
        c1_threshold: (c_inf - c1_term).max(0.0),
        c2_threshold: (c_inf - c2_term).max(0.0),
    })
}
