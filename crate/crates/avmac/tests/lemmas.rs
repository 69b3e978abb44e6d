//! Numeric instantiations of the auxiliary bounds behind the coding
//! pipeline: the permutation robustification bound, the Chernoff-style
//! resampling bound, the inner-product bound for concatenated codes, and
//! vertex attainment for product-form attack distributions.

use avmac::{
    build_compound_code, builtin_channel, exact_average_error, exact_average_error_qseq,
    random_code, worst_case_error, CompoundCodeOptions, InputPolicy, StateSequence,
    WorstCaseMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn recurse(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v);
            recurse(prefix, rest, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    recurse(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}

fn unrank(mut rank: usize, base: usize, len: usize) -> Vec<usize> {
    let mut word = vec![0usize; len];
    for slot in word.iter_mut().rev() {
        *slot = rank % base;
        rank /= base;
    }
    word
}

/// Robustification: if the success probability h satisfies
/// `sum_s h(s) q^n(s) >= 1 - lambda` for every product prior (checked on
/// a 1/64 grid), then the permutation average satisfies
/// `(1/n!) sum_pi h(pi(s)) >= 1 - (n+1)^{|S|} lambda` for every s.
/// Exhaustive at n <= 5 on the Gubner channel.
#[test]
fn robustification_bound_holds_exhaustively() {
    let ch = builtin_channel("gubner").unwrap();
    let policy = InputPolicy::uniform_independent(2, 2);
    for n in [4usize, 5] {
        let code = build_compound_code(
            &ch,
            &policy,
            n,
            (0.25, 0.0),
            0.0,
            0.0,
            42,
            &CompoundCodeOptions::default(),
        )
        .unwrap();
        let total = 1usize << n; // ns = 2
        let h: Vec<f64> = (0..total)
            .map(|rank| {
                let s = StateSequence::new(unrank(rank, 2, n), 2).unwrap();
                1.0 - exact_average_error(&code, &ch, &s).unwrap()
            })
            .collect();
        // lambda from the product-prior grid check.
        let mut lambda: f64 = 0.0;
        for i in 0..=64usize {
            let q1 = i as f64 / 64.0;
            let mut success = 0.0;
            for (rank, &hs) in h.iter().enumerate() {
                let ones = unrank(rank, 2, n).iter().sum::<usize>() as f64;
                let weight = q1.powf(ones) * (1.0 - q1).powf(n as f64 - ones);
                success += hs * weight;
            }
            lambda = lambda.max(1.0 - success);
        }
        let floor = 1.0 - ((n + 1) as f64).powi(2) * lambda;
        let perms = all_permutations(n);
        for rank in 0..total {
            let s = unrank(rank, 2, n);
            let avg: f64 = perms
                .iter()
                .map(|p| {
                    let permuted: Vec<usize> = (0..n).map(|t| s[p[t]]).collect();
                    let mut r = 0usize;
                    for &v in &permuted {
                        r = 2 * r + v;
                    }
                    h[r]
                })
                .sum::<f64>()
                / perms.len() as f64;
            assert!(
                avg >= floor - 1e-12,
                "n={n}, s={s:?}: permutation average {avg} below {floor}"
            );
        }
    }
}

/// Resampling bound: for N i.i.d. variables in [0,1],
/// `P[mean > lambda_bar] <= exp(-(lambda_bar - e E[T]) N)`, checked by
/// Monte Carlo within three standard errors for N in {16, 64}.
#[test]
fn resampling_tail_bound_holds() {
    let p_hit = 0.02; // T ~ Bernoulli(0.02), so E[T] = 0.02
    let lambda_bar = 0.2;
    let exponent_margin = lambda_bar - std::f64::consts::E * p_hit;
    assert!(exponent_margin > 0.0);
    let trials = 200_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    for n in [16usize, 64] {
        let bound = (-(exponent_margin) * n as f64).exp();
        let mut exceed = 0usize;
        for _ in 0..trials {
            let mut hits = 0usize;
            for _ in 0..n {
                if rng.gen_range(0.0..1.0) < p_hit {
                    hits += 1;
                }
            }
            if hits as f64 / n as f64 > lambda_bar {
                exceed += 1;
            }
        }
        let p_hat = exceed as f64 / trials as f64;
        let stderr = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
        assert!(
            p_hat <= bound + 3.0 * stderr,
            "N={n}: empirical {p_hat} vs bound {bound}"
        );
    }
}

/// Inner-product bound: vectors in [0,1]^N with means at least 1 - a and
/// 1 - b have mean elementwise product at least 1 - (a + b).
#[test]
fn inner_product_bound_holds_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(321);
    for _ in 0..1000 {
        let n = rng.gen_range(2..40usize);
        let lambda: f64 = rng.gen_range(0.01..0.5);
        let low = (1.0 - 2.0 * lambda).max(0.0);
        let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(low..=1.0)).collect();
        let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(low..=1.0)).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let a = 1.0 - mean(&alpha);
        let b = 1.0 - mean(&beta);
        let prod = alpha
            .iter()
            .zip(&beta)
            .map(|(x, y)| x * y)
            .sum::<f64>()
            / n as f64;
        assert!(
            prod >= 1.0 - (a + b) - 1e-12,
            "prod {prod} below 1 - {a} - {b}"
        );
    }
}

/// Vertex attainment: the error under any product-form attack
/// distribution never exceeds the exhaustive vertex maximum, and the
/// maximum is attained by a vertex. Codes at n <= 3.
#[test]
fn product_attacks_attain_their_maximum_at_vertices() {
    let ch = builtin_channel("gubner").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(654);
    for n in 1..=3usize {
        let code = random_code(&mut rng, &ch, n, 2, 2).unwrap();
        let (vertex_max, witness) =
            worst_case_error(&code, &ch, WorstCaseMode::Exhaustive).unwrap();
        for _ in 0..1000 {
            let qs: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let a = rng.gen_range(0.0..1.0);
                    vec![a, 1.0 - a]
                })
                .collect();
            let err = exact_average_error_qseq(&code, &ch, &qs).unwrap();
            assert!(err <= vertex_max + 1e-9);
        }
        let dirac: Vec<Vec<f64>> = witness
            .as_slice()
            .iter()
            .map(|&s| {
                let mut v = vec![0.0; 2];
                v[s] = 1.0;
                v
            })
            .collect();
        let err = exact_average_error_qseq(&code, &ch, &dirac).unwrap();
        assert!((err - vertex_max).abs() < 1e-12);
    }
}
