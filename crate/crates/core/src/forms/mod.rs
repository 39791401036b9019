//! Pointwise algebra of (1,1)-forms.
//!
//! A [`HermitianForm`] is the coefficient matrix of `(i/π) Σ A dz ∧ dz̄` at one
//! point. Top-degree wedge products of such forms are returned as scalar
//! densities against Euclidean Lebesgue measure on `ℂᵏ`.

pub mod alt;
pub mod dictionary;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub use dictionary::{dictionary, fs_uniform_points, Part, TestForm, TestFunction, DICTIONARY_VERSION};

const HERMITIAN_TOL: f64 = 1e-12;
const POSITIVE_TOL: f64 = 1e-10;
const FLUSH_NORM: f64 = 1e-13;

/// Coefficient matrix of a real (1,1)-form at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianForm {
    coeff: DMatrix<C64>,
    positive: bool,
}

impl HermitianForm {
    /// Validates Hermiticity to `1e-12` relative and stores the exact
    /// Hermitian part.
    pub fn new(coeff: DMatrix<C64>) -> Result<Self> {
        if coeff.nrows() != coeff.ncols() {
            return Err(Error::DimensionMismatch {
                expected: coeff.nrows(),
                got: coeff.ncols(),
            });
        }
        let norm = coeff.norm();
        let defect = (&coeff - coeff.adjoint()).norm();
        if defect > HERMITIAN_TOL * norm.max(f64::MIN_POSITIVE) && defect > 0.0 {
            return Err(Error::NotHermitian(defect / norm));
        }
        Ok(Self::hermitian_part(coeff))
    }

    /// Like [`HermitianForm::new`] but also asserts positive semidefiniteness.
    pub fn new_positive(coeff: DMatrix<C64>) -> Result<Self> {
        let mut form = Self::new(coeff)?;
        let norm = form.coeff.norm();
        let min_eig = form.min_eigenvalue();
        if min_eig < -POSITIVE_TOL * norm {
            return Err(Error::InvalidParam(format!(
                "form is not positive: smallest eigenvalue {min_eig:.3e}"
            )));
        }
        form.positive = true;
        Ok(form)
    }

    fn hermitian_part(coeff: DMatrix<C64>) -> Self {
        let sym = (&coeff + coeff.adjoint()).scale(0.5);
        Self {
            coeff: sym,
            positive: false,
        }
    }

    pub fn zero(k: usize) -> Self {
        Self {
            coeff: DMatrix::zeros(k, k),
            positive: true,
        }
    }

    pub fn identity(k: usize) -> Self {
        Self {
            coeff: DMatrix::identity(k, k),
            positive: true,
        }
    }

    /// Rank-one positive form `c cᴴ`. With `c = ∂τ/∂z̄` this is `dτ ∧ d^cτ`.
    pub fn outer(c: &[C64]) -> Self {
        let v = DVector::from_column_slice(c);
        Self {
            coeff: &v * v.adjoint(),
            positive: true,
        }
    }

    /// Symmetrized outer product `½(a bᴴ + b aᴴ)`; with gradients in `z̄` this
    /// is the (1,1)-part of `dg ∧ d^c h` symmetrized in `g, h`.
    pub fn sym_outer(a: &[C64], b: &[C64]) -> Self {
        let va = DVector::from_column_slice(a);
        let vb = DVector::from_column_slice(b);
        let m = (&va * vb.adjoint() + &vb * va.adjoint()).scale(0.5);
        Self {
            coeff: m,
            positive: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.coeff.nrows()
    }

    pub fn coeff(&self) -> &DMatrix<C64> {
        &self.coeff
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            coeff: self.coeff.scale(c),
            positive: self.positive && c >= 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.coeff.norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 1 {
            return self.coeff[(0, 0)].re;
        }
        self.coeff
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Value of the form as a real 2-form on real tangent vectors, each given
    /// by its complex coordinates: `(2/π) Im(Xᴴ A Y)`.
    pub fn eval_two_form(&self, x: &[C64], y: &[C64]) -> f64 {
        let k = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for (p, xp) in x.iter().enumerate().take(k) {
            let row: C64 = y
                .iter()
                .enumerate()
                .take(k)
                .map(|(q, yq)| self.coeff[(p, q)] * yq)
                .sum();
            acc += xp.conj() * row;
        }
        2.0 / PI * acc.im
    }

    fn flushed(mut self) -> Self {
        if self.coeff.norm() < FLUSH_NORM {
            self.coeff.fill(C64::new(0.0, 0.0));
        }
        self
    }
}

/// Point of `ℙᵐ` in the affine chart `Z_chart ≠ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: usize,
    pub w: Vec<C64>,
}

impl ChartPoint {
    pub fn new(chart: usize, w: Vec<C64>) -> Result<Self> {
        if chart > w.len() {
            return Err(Error::InvalidParam(format!(
                "chart {chart} out of range for ℙ^{}",
                w.len()
            )));
        }
        if w.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("chart coordinates".into()));
        }
        Ok(Self { chart, w })
    }

    /// Chart of the largest homogeneous coordinate, so every `|w_i| ≤ 1`.
    pub fn from_homogeneous(z: &[C64]) -> Self {
        let chart = z
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, bn), (i, c)| {
                let n = c.norm_sqr();
                if n > bn {
                    (i, n)
                } else {
                    (bi, bn)
                }
            })
            .0;
        let pivot = z[chart];
        let w = z
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != chart)
            .map(|(_, c)| c / pivot)
            .collect();
        Self { chart, w }
    }

    pub fn m(&self) -> usize {
        self.w.len()
    }

    /// Homogeneous representative with `Z_chart = 1`.
    pub fn to_homogeneous(&self) -> Vec<C64> {
        let mut z = Vec::with_capacity(self.w.len() + 1);
        let mut it = self.w.iter();
        for i in 0..=self.w.len() {
            if i == self.chart {
                z.push(C64::new(1.0, 0.0));
            } else {
                z.push(*it.next().unwrap());
            }
        }
        z
    }

    /// Unit-norm homogeneous representative.
    pub fn unit_homogeneous(&self) -> Vec<C64> {
        let mut z = self.to_homogeneous();
        let n = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        z.iter_mut().for_each(|c| *c /= n);
        z
    }

    /// Fubini–Study distance `arccos |⟨Ẑ, Ŵ⟩|`, in `[0, π/2]`.
    pub fn fs_distance(&self, other: &ChartPoint) -> f64 {
        let a = self.unit_homogeneous();
        let b = other.unit_homogeneous();
        let ip: C64 = a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum();
        ip.norm().min(1.0).acos()
    }
}

/// Fubini–Study form `ω = dd^c log‖Z‖` in the chart of `p`.
pub fn fs_form_at(p: &ChartPoint) -> HermitianForm {
    let m = p.m();
    let s: f64 = p.w.iter().map(|c| c.norm_sqr()).sum();
    let mut a = DMatrix::<C64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let delta = if i == j { 1.0 + s } else { 0.0 };
            a[(i, j)] = (C64::new(delta, 0.0) - p.w[i] * p.w[j].conj()) * (0.5 / ((1.0 + s) * (1.0 + s)));
        }
    }
    HermitianForm {
        coeff: a,
        positive: true,
    }
}

/// Pullback `Jᴴ H J` of a form on the target through an `m × k` Jacobian.
pub fn pullback_form(jac: &DMatrix<C64>, h: &HermitianForm) -> Result<HermitianForm> {
    if jac.nrows() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: jac.nrows(),
        });
    }
    let m = jac.adjoint() * h.coeff() * jac;
    let positive = h.positive;
    let mut out = HermitianForm::hermitian_part(m);
    out.positive = positive;
    Ok(out)
}

/// Pullback of `ω` through a homogeneous representative `F` with Jacobian
/// `J = dF/dz` (`(m+1) × k`). This is `½ Ĵᴴ (I − F̂F̂ᴴ) Ĵ` for the normalized
/// representative, evaluated through the Lagrange identity as a sum over
/// `2 × 2` minors `F_i J_l − F_l J_i`, which keeps full relative accuracy when
/// the form is tiny. Any nonzero common rescaling of `(F, J)` gives the same
/// form.
pub fn fs_pullback(coords: &[C64], jac: &DMatrix<C64>) -> HermitianForm {
    let n2 = coords.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let k = jac.ncols();
    let rows = jac.nrows();
    let scale = 0.5 / (n2 * n2);
    let mut a = DMatrix::<C64>::zeros(k, k);
    let mut minor = vec![C64::new(0.0, 0.0); k];
    for i in 0..rows {
        for l in (i + 1)..rows {
            for (q, mq) in minor.iter_mut().enumerate() {
                *mq = coords[i] * jac[(l, q)] - coords[l] * jac[(i, q)];
            }
            for p in 0..k {
                for q in p..k {
                    a[(p, q)] += minor[p].conj() * minor[q];
                }
            }
        }
    }
    for p in 0..k {
        a[(p, p)] = C64::new(a[(p, p)].re * scale, 0.0);
        for q in (p + 1)..k {
            a[(p, q)] *= scale;
            a[(q, p)] = a[(p, q)].conj();
        }
    }
    HermitianForm {
        coeff: a,
        positive: true,
    }
}

/// Gradient `∂ log‖F‖ / ∂z̄` of the Fubini–Study potential along `F`, i.e.
/// `½ Jᴴ F / ‖F‖²`. Pairs with [`fs_pullback`] for `d^c` terms.
pub fn fs_potential_gradient(coords: &[C64], jac: &DMatrix<C64>) -> Vec<C64> {
    let n2 = coords.iter().map(|c| c.norm_sqr()).sum::<f64>();
    (0..jac.ncols())
        .map(|q| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..jac.nrows() {
                acc += jac[(i, q)].conj() * coords[i];
            }
            acc * (0.5 / n2)
        })
        .collect()
}

fn det(m: &DMatrix<C64>) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)].re,
        2 => (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re,
        _ => m.clone().determinant().re,
    }
}

/// Scalar density of `∧ᵢ (dd^c-form Aᵢ)^{mᵢ}` (top degree, `Σ mᵢ = k`)
/// against Lebesgue measure on `ℂᵏ`: `k! · D(A₁,…,A_k) · (2/π)ᵏ`, with the
/// mixed discriminant `D` computed by polarization of `det(Σ tᵢAᵢ)`.
pub fn mixed_wedge_density(forms: &[(&HermitianForm, usize)], k: usize) -> Result<f64> {
    let total: usize = forms.iter().map(|(_, m)| *m).sum();
    if total != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: total,
        });
    }
    for (f, _) in forms {
        if f.dim() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: f.dim(),
            });
        }
    }
    let scale = (2.0 / PI).powi(k as i32);
    let active: Vec<(&HermitianForm, usize)> = forms.iter().filter(|(_, m)| *m > 0).cloned().collect();
    if active.is_empty() {
        return Ok(scale);
    }
    if k == 1 {
        return Ok(scale * active[0].0.coeff[(0, 0)].re);
    }
    if active.len() == 1 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        return Ok(scale * fact * det(&active[0].0.coeff));
    }
    // k! D(A_1..A_k) = Σ_{S ⊆ [k]} (−1)^{k−|S|} det(Σ_{i∈S} A_i), over the
    // expanded list; subsets with repeated forms collapse to multisets.
    let list: Vec<&DMatrix<C64>> = active
        .iter()
        .flat_map(|(f, m)| std::iter::repeat_n(&f.coeff, *m))
        .collect();
    let mut acc = 0.0;
    for mask in 1u32..(1u32 << k) {
        let mut sum = DMatrix::<C64>::zeros(k, k);
        for (i, a) in list.iter().enumerate() {
            if mask & (1 << i) != 0 {
                sum += *a;
            }
        }
        let sign = if (k as u32 - mask.count_ones()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        acc += sign * det(&sum);
    }
    Ok(scale * acc)
}

/// Central-difference step used by [`numeric_ddc`] when none is given.
pub fn default_ddc_step(z: &[C64]) -> f64 {
    let n = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    1e-4 * (1.0 + n)
}

fn perturbed(z: &[C64], moves: &[(usize, f64)]) -> Vec<C64> {
    let mut out = z.to_vec();
    for &(axis, h) in moves {
        let p = axis / 2;
        if axis % 2 == 0 {
            out[p].re += h;
        } else {
            out[p].im += h;
        }
    }
    out
}

fn sample<F: Fn(&[C64]) -> f64>(u: &F, z: &[C64]) -> Result<f64> {
    let v = u(z);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("u at {z:?}")))
    }
}

/// Complex Hessian `∂²u/∂z̄_p∂z_q` by central differences (error `O(h²)`).
pub fn numeric_ddc<F: Fn(&[C64]) -> f64>(u: F, z: &[C64], h: Option<f64>) -> Result<HermitianForm> {
    let h = h.unwrap_or_else(|| default_ddc_step(z));
    if h <= 0.0 {
        return Err(Error::InvalidParam("ddc step must be positive".into()));
    }
    let k = z.len();
    let n = 2 * k;
    let u0 = sample(&u, z)?;
    let mut d = vec![0.0; n * n];
    for a in 0..n {
        let up = sample(&u, &perturbed(z, &[(a, h)]))?;
        let um = sample(&u, &perturbed(z, &[(a, -h)]))?;
        d[a * n + a] = (up - 2.0 * u0 + um) / (h * h);
        for b in (a + 1)..n {
            let pp = sample(&u, &perturbed(z, &[(a, h), (b, h)]))?;
            let pm = sample(&u, &perturbed(z, &[(a, h), (b, -h)]))?;
            let mp = sample(&u, &perturbed(z, &[(a, -h), (b, h)]))?;
            let mm = sample(&u, &perturbed(z, &[(a, -h), (b, -h)]))?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            d[a * n + b] = v;
            d[b * n + a] = v;
        }
    }
    let dd = |a: usize, b: usize| d[a * n + b];
    let mut m = DMatrix::<C64>::zeros(k, k);
    for p in 0..k {
        for q in p..k {
            let (xp, yp, xq, yq) = (2 * p, 2 * p + 1, 2 * q, 2 * q + 1);
            let re = 0.25 * (dd(xp, xq) + dd(yp, yq));
            let im = 0.25 * (dd(yp, xq) - dd(xp, yq));
            m[(p, q)] = C64::new(re, if p == q { 0.0 } else { im });
            m[(q, p)] = m[(p, q)].conj();
        }
    }
    Ok(HermitianForm {
        coeff: m,
        positive: false,
    }
    .flushed())
}

/// Wirtinger gradient `∂u/∂z̄_p = ½(∂u/∂x_p + i ∂u/∂y_p)` by central differences.
pub fn numeric_gradient_zbar<F: Fn(&[C64]) -> f64>(u: F, z: &[C64], h: Option<f64>) -> Result<Vec<C64>> {
    let h = h.unwrap_or_else(|| default_ddc_step(z));
    let k = z.len();
    let mut g = Vec::with_capacity(k);
    for p in 0..k {
        let dx = (sample(&u, &perturbed(z, &[(2 * p, h)]))? - sample(&u, &perturbed(z, &[(2 * p, -h)]))?) / (2.0 * h);
        let dy = (sample(&u, &perturbed(z, &[(2 * p + 1, h)]))? - sample(&u, &perturbed(z, &[(2 * p + 1, -h)]))?)
            / (2.0 * h);
        g.push(C64::new(0.5 * dx, 0.5 * dy));
    }
    Ok(g)
}
