//! Frozen observable set of test forms `ψ = f · ω^j` on `ℙᵐ`.
//!
//! Version `v1`. For each degree `d ∈ {0, 1, 2}` the monomials `Z^α` with
//! `|α| = d` are listed in lexicographic order of exponent vectors
//! (descending, so `Z₀^d` first). For every pair `α ≤ β` in that order:
//!
//! - `α = β` contributes `|Z^α|² / ‖Z‖^{2d}`;
//! - `α < β` contributes `Re` then `Im` of `Z^α conj(Z^β) / ‖Z‖^{2d}`.
//!
//! Entry 0 is the constant 1. Every entry is bounded by 1 in absolute value;
//! the cached sup-norm is an independent sampling estimate with 5% inflation.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DICTIONARY_VERSION: &str = "v1";

const SUP_SAMPLES: usize = 10_000;
const SUP_INFLATION: f64 = 1.05;
const SUP_SEED: u64 = 0x5eed_d1c7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    Modulus,
    Re,
    Im,
}

/// Scalar function on `ℙᵐ` from the dictionary, homogeneous of degree 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub id: usize,
    pub m: usize,
    pub degree: u32,
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub part: Part,
}

fn monomials(m: usize, d: u32) -> Vec<Vec<u32>> {
    fn rec(slots: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(slots - 1, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(m + 1, d, &mut Vec::new(), &mut out);
    out
}

fn monomial(z: &[C64], exps: &[u32]) -> C64 {
    z.iter()
        .zip(exps)
        .fold(C64::new(1.0, 0.0), |acc, (c, &e)| acc * c.powu(e))
}

/// Dictionary entries for `ℙᵐ`, in id order.
pub fn dictionary(m: usize) -> Vec<TestFunction> {
    let mut out = Vec::new();
    for d in 0..=2u32 {
        let mons = monomials(m, d);
        for (i, a) in mons.iter().enumerate() {
            for b in &mons[i..] {
                let parts: &[Part] = if a == b {
                    &[Part::Modulus]
                } else {
                    &[Part::Re, Part::Im]
                };
                for &part in parts {
                    out.push(TestFunction {
                        id: out.len(),
                        m,
                        degree: d,
                        alpha: a.clone(),
                        beta: b.clone(),
                        part,
                    });
                }
            }
        }
    }
    out
}

impl TestFunction {
    pub fn by_id(m: usize, id: usize) -> Result<Self> {
        dictionary(m).into_iter().nth(id).ok_or_else(|| Error::UnknownId {
            kind: "test form",
            id: id.to_string(),
        })
    }

    /// Value at a nonzero homogeneous representative.
    pub fn eval(&self, z: &[C64]) -> f64 {
        if self.degree == 0 {
            return 1.0;
        }
        let n2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
        let v = monomial(z, &self.alpha) * monomial(z, &self.beta).conj() / n2.powi(self.degree as i32);
        match self.part {
            Part::Modulus | Part::Re => v.re,
            Part::Im => v.im,
        }
    }

    pub fn label(&self) -> String {
        let mono = |e: &[u32]| {
            let s: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0)
                .map(|(i, &p)| if p == 1 { format!("Z{i}") } else { format!("Z{i}^{p}") })
                .collect();
            if s.is_empty() {
                "1".to_string()
            } else {
                s.join("*")
            }
        };
        match self.part {
            Part::Modulus => format!("|{}|^2", mono(&self.alpha)),
            Part::Re => format!("Re({}*conj({}))", mono(&self.alpha), mono(&self.beta)),
            Part::Im => format!("Im({}*conj({}))", mono(&self.alpha), mono(&self.beta)),
        }
    }
}

/// Uniform sample of the Fubini–Study probability measure on `ℙᵐ`, as unit
/// vectors in `ℂ^{m+1}`.
pub fn fs_uniform_points(m: usize, n: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut z: Vec<C64> = (0..=m)
                .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            let norm = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            z.iter_mut().for_each(|c| *c /= norm);
            z
        })
        .collect()
}

/// `ψ = f · ω^j` with `f` from the dictionary and a cached sup bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestForm {
    pub j: usize,
    pub f: TestFunction,
    pub sup_norm: f64,
}

impl TestForm {
    pub fn new(m: usize, j: usize, id: usize) -> Result<Self> {
        if j > m {
            return Err(Error::InvalidParam(format!("form degree {j} exceeds m = {m}")));
        }
        let f = TestFunction::by_id(m, id)?;
        let sup = fs_uniform_points(m, SUP_SAMPLES, SUP_SEED)
            .iter()
            .map(|z| f.eval(z).abs())
            .fold(0.0, f64::max);
        Ok(Self {
            j,
            f,
            sup_norm: sup * SUP_INFLATION,
        })
    }

    /// The first `count` dictionary forms of degree `j`.
    pub fn family(m: usize, j: usize, count: usize) -> Result<Vec<Self>> {
        let n = dictionary(m).len();
        if count > n {
            return Err(Error::InvalidParam(format!(
                "dictionary for m = {m} has only {n} entries"
            )));
        }
        (0..count).map(|id| Self::new(m, j, id)).collect()
    }

    pub fn eval(&self, z: &[C64]) -> f64 {
        self.f.eval(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact FS average of `|Z^α|² / ‖Z‖^{2d}`: `α! m! / (m + d)!`.
    fn exact_modulus_moment(m: usize, alpha: &[u32]) -> f64 {
        let d: u32 = alpha.iter().sum();
        let num: f64 = alpha.iter().map(|&a| factorial(a)).product::<f64>() * factorial(m as u32);
        num / factorial(m as u32 + d)
    }

    #[test]
    fn sizes_are_frozen() {
        assert_eq!(dictionary(1).len(), 14);
        assert_eq!(dictionary(2).len(), 46);
        assert_eq!(dictionary(1)[0].degree, 0);
        for (i, f) in dictionary(2).iter().enumerate() {
            assert_eq!(f.id, i);
        }
    }

    #[test]
    fn first_entries_are_documented_order() {
        let d = dictionary(1);
        assert_eq!(d[1].label(), "|Z0|^2");
        assert_eq!(d[2].label(), "Re(Z0*conj(Z1))");
        assert_eq!(d[3].label(), "Im(Z0*conj(Z1))");
        assert_eq!(d[4].label(), "|Z1|^2");
        assert_eq!(d[5].label(), "|Z0^2|^2");
    }

    #[test]
    fn entries_are_scale_invariant() {
        let z = [C64::new(0.3, 1.1), C64::new(-0.8, 0.4), C64::new(0.2, -0.5)];
        let s = C64::new(-2.0, 3.5);
        let zs: Vec<C64> = z.iter().map(|c| c * s).collect();
        for f in dictionary(2) {
            assert!((f.eval(&z) - f.eval(&zs)).abs() < 1e-12, "{}", f.label());
        }
    }

    #[test]
    fn sup_norm_bounds_samples_and_is_tight() {
        for id in [0, 1, 2, 5, 7] {
            let t = TestForm::new(1, 1, id).unwrap();
            assert!(t.sup_norm <= SUP_INFLATION + 1e-12);
            let fresh = fs_uniform_points(1, 2000, 99);
            for z in &fresh {
                assert!(t.eval(z).abs() <= t.sup_norm);
            }
        }
    }

    #[test]
    fn sampled_moments_match_closed_form() {
        let pts = fs_uniform_points(2, 200_000, 7);
        for f in dictionary(2) {
            let mean = pts.iter().map(|z| f.eval(z)).sum::<f64>() / pts.len() as f64;
            let expected = match f.part {
                Part::Modulus => exact_modulus_moment(2, &f.alpha),
                _ => 0.0,
            };
            assert!((mean - expected).abs() < 0.01, "{}: {mean} vs {expected}", f.label());
        }
    }

    #[test]
    fn rejects_bad_ids_and_degrees() {
        assert!(TestForm::new(1, 2, 0).is_err());
        assert!(matches!(TestForm::new(1, 1, 14), Err(Error::UnknownId { .. })));
        assert!(TestForm::family(1, 1, 15).is_err());
    }
}
