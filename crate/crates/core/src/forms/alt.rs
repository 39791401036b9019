//! Evaluation of `d^c u ∧ A₁ ∧ … ∧ A_q` on real tangent vectors.
//!
//! Used for boundary integrals over spheres, where the integrand is a
//! `(2k−1)`-form evaluated on the partials of a parametrization.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use super::HermitianForm;

/// `d^c u(X) = (1/π) Im(cᴴ X)` for a real function `u` with `c = ∂u/∂z̄`.
pub fn dc_one_form(c: &[C64], x: &[C64]) -> f64 {
    let s: C64 = c.iter().zip(x).map(|(a, b)| a.conj() * b).sum();
    s.im / PI
}

/// All permutations of `0..n` with their signs, in lexicographic order.
pub fn signed_permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, n, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut perms = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], n, &mut perms);
    perms
        .into_iter()
        .map(|p| {
            let mut inversions = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if p[i] > p[j] {
                        inversions += 1;
                    }
                }
            }
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            (p, sign)
        })
        .collect()
}

/// Precomputed evaluator for `α ∧ β₁ ∧ … ∧ β_q` with one 1-form and `q`
/// 2-forms, acting on `2q + 1` vectors.
pub struct WedgeEvaluator {
    q: usize,
    perms: Vec<(Vec<usize>, f64)>,
}

impl WedgeEvaluator {
    pub fn new(q: usize) -> Self {
        let n = 2 * q + 1;
        let mut perms = signed_permutations(n);
        // β(v_a, v_b) is alternating, so keep one ordering per pair and
        // double: halves the work per factor.
        perms.retain(|(p, _)| (0..q).all(|i| p[1 + 2 * i] < p[2 + 2 * i]));
        Self { q, perms }
    }

    pub fn arity(&self) -> usize {
        2 * self.q + 1
    }

    /// Evaluates on vectors given in complex coordinates.
    pub fn eval(&self, one_form: &[C64], twos: &[&HermitianForm], vectors: &[Vec<C64>]) -> f64 {
        debug_assert_eq!(twos.len(), self.q);
        debug_assert_eq!(vectors.len(), self.arity());
        let n = vectors.len();
        let alpha: Vec<f64> = vectors.iter().map(|v| dc_one_form(one_form, v)).collect();
        // pairwise 2-form values per factor
        let pair: Vec<Vec<f64>> = twos
            .iter()
            .map(|b| {
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v = b.eval_two_form(&vectors[i], &vectors[j]);
                        m[i * n + j] = v;
                        m[j * n + i] = -v;
                    }
                }
                m
            })
            .collect();
        let mut acc = 0.0;
        for (p, sign) in &self.perms {
            let mut term = sign * alpha[p[0]];
            for (i, m) in pair.iter().enumerate() {
                term *= m[p[1 + 2 * i] * n + p[2 + 2 * i]];
            }
            acc += term;
        }
        // The full sum carries 1/(1!·2!^q); keeping one ordering per pair
        // already divides by 2^q.
        acc
    }
}
