//! Small optimization toolkit over probability simplices: Euclidean
//! projection, exhaustive grid enumeration, and projected gradient descent
//! for convex objectives.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut rho = 0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            rho = i + 1;
            theta = candidate;
        }
    }
    debug_assert!(rho > 0);
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Visits every distribution on the `dim`-simplex whose coordinates are
/// multiples of `1/steps`, in a fixed order.
pub fn for_each_grid_point(dim: usize, steps: usize, mut f: impl FnMut(&[f64])) {
    let mut counts = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    fn recurse(
        counts: &mut [usize],
        point: &mut [f64],
        index: usize,
        remaining: usize,
        steps: usize,
        f: &mut impl FnMut(&[f64]),
    ) {
        if index + 1 == counts.len() {
            counts[index] = remaining;
            for (p, &c) in point.iter_mut().zip(counts.iter()) {
                *p = c as f64 / steps as f64;
            }
            f(point);
            return;
        }
        for k in 0..=remaining {
            counts[index] = k;
            recurse(counts, point, index + 1, remaining - k, steps, f);
        }
    }
    recurse(&mut counts, &mut point, 0, steps, steps, &mut f);
}

/// Number of grid points `for_each_grid_point` visits: C(steps+dim-1, dim-1).
pub fn grid_point_count(dim: usize, steps: usize) -> usize {
    let mut count = 1usize;
    for i in 0..(dim - 1) {
        count = count.saturating_mul(steps + i + 1) / (i + 1);
    }
    count
}

/// Options for [`minimize_on_simplex`].
#[derive(Debug, Clone, Copy)]
pub struct PgdOptions {
    pub restarts: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for PgdOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            iters: 64,
            seed: 0,
        }
    }
}

/// Projected gradient descent with backtracking from multiple starts
/// (uniform, the vertices, then random points). Returns the best point
/// and value seen. Intended for convex objectives, where the landscape
/// has a single basin; the caller should still cross-check against a
/// grid when exactness matters.
pub fn minimize_on_simplex(
    dim: usize,
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    opts: &PgdOptions,
) -> (Vec<f64>, f64) {
    let uniform = vec![1.0 / dim as f64; dim];
    if dim == 1 {
        let value = f(&uniform);
        return (uniform, value);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best_x = uniform.clone();
    let mut best_f = f(&uniform);
    for restart in 0..opts.restarts {
        let mut x = if restart == 0 {
            uniform.clone()
        } else if restart <= dim {
            let mut v = vec![0.0; dim];
            v[restart - 1] = 1.0;
            v
        } else {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|t| *t /= s.max(1e-12));
            v
        };
        let mut fx = f(&x);
        if fx < best_f {
            best_f = fx;
            best_x = x.clone();
        }
        for _ in 0..opts.iters {
            let g = grad(&x);
            let mut step = 0.5;
            let mut improved = false;
            while step > 1e-7 {
                let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
                let projected = project_to_simplex(&trial);
                let ft = f(&projected);
                if ft < fx - 1e-13 {
                    x = projected;
                    fx = ft;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if fx < best_f {
            best_f = fx;
            best_x = x;
        }
    }
    (best_x, best_f)
}
