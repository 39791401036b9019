//! Tensor grids on the unit sphere `S^{2k−1} ⊂ ℂᵏ`, `k ≤ 3`.
//!
//! A point is `ξ_j = x_j(η) e^{iθ_j}` with `x(η)` on the positive orthant of
//! `S^{k−1}` in hyperspherical angles and uniform angles `θ ∈ T^k`. Volume
//! measure is `∏ x_j · dσ_{S^{k−1}}(η) · dθ`. Orthant nodes are Gauss points
//! in `sin²η`, which makes them exact for polynomials in `|ξ_j|²`.

use gauss_quad::GaussLegendre;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

pub const MAX_K: usize = 3;

#[derive(Clone, Debug)]
pub struct SphereNode {
    pub dir: Vec<C64>,
    pub eta: [f64; 2],
    pub theta: [f64; 3],
    /// Euclidean surface weight; sums to `|S^{2k−1}|`.
    pub weight: f64,
    /// Weight of the sub-grid with even angular indices, zero off it.
    pub coarse_weight: f64,
    /// Parameter-space weight `dη dθ`, for integrating forms on the frame.
    pub param_weight: f64,
}

#[derive(Clone, Debug)]
pub struct SphereGrid {
    pub k: usize,
    pub n_theta: usize,
    pub n_eta: usize,
    pub nodes: Vec<SphereNode>,
}

/// `|S^{2k−1}| = 2πᵏ/(k−1)!`.
pub fn sphere_area(k: usize) -> f64 {
    let fact: f64 = (1..k).map(|i| i as f64).product();
    2.0 * PI.powi(k as i32) / fact
}

fn orthant(k: usize, eta: &[f64; 2]) -> (Vec<f64>, f64) {
    match k {
        1 => (vec![1.0], 1.0),
        2 => {
            let (s, c) = eta[0].sin_cos();
            (vec![c, s], 1.0)
        }
        _ => {
            let (s1, c1) = eta[0].sin_cos();
            let (s2, c2) = eta[1].sin_cos();
            // dσ_{S²} = sin η₁ dη₁ dη₂
            (vec![c1, s1 * c2, s1 * s2], s1)
        }
    }
}

/// Partial derivatives `∂x/∂η_i` of the orthant embedding.
pub fn orthant_partials(k: usize, eta: &[f64; 2]) -> Vec<Vec<f64>> {
    match k {
        1 => vec![],
        2 => {
            let (s, c) = eta[0].sin_cos();
            vec![vec![-s, c]]
        }
        _ => {
            let (s1, c1) = eta[0].sin_cos();
            let (s2, c2) = eta[1].sin_cos();
            vec![vec![-s1, c1 * c2, c1 * s2], vec![0.0, -s1 * s2, s1 * c2]]
        }
    }
}

impl SphereGrid {
    /// Grid with `n_theta` angles per circle factor and `n_eta` Gauss nodes
    /// per orthant angle.
    pub fn new(k: usize, n_theta: usize, n_eta: usize) -> Self {
        assert!((1..=MAX_K).contains(&k), "sphere grids support k ≤ {MAX_K}");
        let n_eta = if k == 1 { 1 } else { n_eta.max(1) };
        // Gauss nodes in s = sin²η, where the orthant measure is polynomial:
        // x₁x₂ dη = ½ ds for k = 2 and x₁x₂x₃ sin η₁ dη₁dη₂ = ¼ s₁ ds₁ ds₂ for k = 3.
        let gl = GaussLegendre::new(n_eta.try_into().expect("n_eta ≥ 1"));
        let s_nodes: Vec<(f64, f64)> = gl.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
        let angle = |s: f64| s.sqrt().asin();
        // (η, volume weight of the η-cell)
        let eta_grid: Vec<([f64; 2], f64)> = match k {
            1 => vec![([0.0; 2], 1.0)],
            2 => s_nodes.iter().map(|&(s, w)| ([angle(s), 0.0], 0.5 * w)).collect(),
            _ => s_nodes
                .iter()
                .flat_map(|&(s1, w1)| {
                    s_nodes
                        .iter()
                        .map(move |&(s2, w2)| ([angle(s1), angle(s2)], 0.25 * s1 * w1 * w2))
                })
                .collect(),
        };
        let dtheta = 2.0 * PI / n_theta as f64;
        let total_theta = n_theta.pow(k as u32);
        let coarse_factor = 2f64.powi(k as i32);
        let mut nodes = Vec::with_capacity(eta_grid.len() * total_theta);
        for (eta, w_vol) in &eta_grid {
            let (x, dsigma) = orthant(k, eta);
            let density: f64 = x.iter().product::<f64>() * dsigma;
            // the same cell in plain dη coordinates
            let w_eta = w_vol / density;
            for flat in 0..total_theta {
                let mut theta = [0.0; 3];
                let mut rest = flat;
                let mut even = true;
                for t in theta.iter_mut().take(k) {
                    let i = rest % n_theta;
                    rest /= n_theta;
                    even &= i.is_multiple_of(2);
                    *t = dtheta * (i as f64 + 0.5);
                }
                let param_weight = w_eta * dtheta.powi(k as i32);
                let weight = w_vol * dtheta.powi(k as i32);
                let dir = (0..k).map(|j| C64::from_polar(x[j], theta[j])).collect();
                nodes.push(SphereNode {
                    dir,
                    eta: *eta,
                    theta,
                    weight,
                    coarse_weight: if even && n_theta >= 2 {
                        weight * coarse_factor
                    } else {
                        0.0
                    },
                    param_weight,
                });
            }
        }
        Self {
            k,
            n_theta,
            n_eta,
            nodes,
        }
    }

    /// Largest grid (powers of two, `n_eta = n_theta/2`) within `budget` nodes,
    /// never coarser than 4 angles per circle.
    pub fn for_budget(k: usize, budget: usize) -> Self {
        let size = |a: usize| a.pow(k as u32) * (a / 2).max(1).pow(k as u32 - 1);
        let mut a = 4;
        while size(2 * a) <= budget {
            a *= 2;
        }
        Self::new(k, a, (a / 2).max(2))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Tangent vectors `∂ξ/∂η_i` then `∂ξ/∂θ_j` at a node, scaled by `rho`.
    pub fn frame(&self, node: &SphereNode, rho: f64) -> Vec<Vec<C64>> {
        let k = self.k;
        let mut frame = Vec::with_capacity(2 * k - 1);
        for dx in orthant_partials(k, &node.eta) {
            frame.push((0..k).map(|j| C64::from_polar(rho * dx[j], node.theta[j])).collect());
        }
        for j in 0..k {
            let mut v = vec![C64::new(0.0, 0.0); k];
            v[j] = C64::new(0.0, rho) * node.dir[j];
            frame.push(v);
        }
        frame
    }
}
