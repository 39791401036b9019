//! Integration over sublevel sets `B_r = {τ < r}` and their boundaries.
//!
//! Sublevel sets are cut into shells of constant width in `u = τ`. On each
//! shell the radial grid uses 4-point Gauss–Legendre in `u` times a tensor
//! sphere grid; Monte Carlo draws points uniformly in Euclidean volume. Work
//! is split into fixed blocks whose partial sums are combined in index order,
//! so results do not depend on the number of threads.

pub mod sphere;

use gauss_quad::GaussLegendre;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::ExhaustionSpec;
pub use sphere::{sphere_area, SphereGrid};

const GL_ORDER: usize = 4;
const MC_BLOCK: usize = 4096;
const MIN_PER_SHELL: usize = 64;
/// Width of the shells used below `r₀ − 2`, where integrands are small.
const COARSE_WIDTH: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Strategy {
    RadialGrid,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadPlan {
    pub strategy: Strategy,
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    /// Shells per unit of `τ` near and above `r₀`.
    pub shells: usize,
}

impl QuadPlan {
    pub fn new(strategy: Strategy, budget: usize, seed: u64, shells: usize) -> Result<Self> {
        let plan = Self {
            strategy,
            budget,
            seed,
            shells,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn grid(budget: usize) -> Self {
        Self {
            strategy: Strategy::RadialGrid,
            budget,
            seed: 0,
            shells: 16,
        }
    }

    pub fn monte_carlo(budget: usize, seed: u64) -> Self {
        Self {
            strategy: Strategy::MonteCarlo,
            budget,
            seed,
            shells: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget < 1000 {
            return Err(Error::InvalidParam(format!("budget {} < 1000", self.budget)));
        }
        if self.shells < 4 {
            return Err(Error::InvalidParam(format!("shells {} < 4", self.shells)));
        }
        Ok(())
    }

    /// Same plan with the budget multiplied by `factor`.
    pub fn scaled(&self, factor: usize) -> Self {
        Self {
            budget: self.budget * factor,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub stderr: f64,
    pub samples_used: usize,
}

impl QuadResult {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            stderr: 0.0,
            samples_used: 0,
        }
    }
}

/// A weighted node in the domain.
#[derive(Clone, Debug)]
pub struct Node {
    pub z: Vec<C64>,
    pub u: f64,
    pub weight: f64,
    /// Weight in the coarse sub-rule (grid) or equal to `weight` (Monte Carlo).
    pub coarse_weight: f64,
    pub shell: usize,
}

/// Per-shell, per-component sums.
#[derive(Clone, Debug)]
pub struct ShellSums {
    pub lo: f64,
    pub hi: f64,
    pub value: Vec<f64>,
    /// Grid: signed `full − coarse`. Zero for Monte Carlo.
    pub coarse_diff: Vec<f64>,
    /// Monte Carlo: variance of the shell estimate. Zero for the grid.
    pub variance: Vec<f64>,
    pub samples: usize,
}

impl ShellSums {
    /// Error contributions of the linear combination `Σ cᵢ · componentᵢ`:
    /// `(|grid difference|, Monte Carlo variance)`. The variance bound assumes
    /// worst-case correlation between components.
    pub fn combination_error(&self, coeffs: &[f64]) -> (f64, f64) {
        let diff: f64 = coeffs.iter().zip(&self.coarse_diff).map(|(c, d)| c * d).sum();
        let sd: f64 = coeffs.iter().zip(&self.variance).map(|(c, v)| c.abs() * v.sqrt()).sum();
        (diff.abs(), sd * sd)
    }
}

/// Accumulates shell errors into one standard error: grid differences add,
/// Monte Carlo variances add in quadrature.
#[derive(Clone, Copy, Debug, Default)]
pub struct ErrorAccumulator {
    grid: f64,
    variance: f64,
}

impl ErrorAccumulator {
    pub fn add(&mut self, (grid, variance): (f64, f64)) {
        self.grid += grid;
        self.variance += variance;
    }

    pub fn stderr(&self) -> f64 {
        self.grid + self.variance.sqrt()
    }
}

/// Shell edges covering `[lo, hi]`: width `1/shells` from `r₀ − 2` on,
/// width 1/2 below, each family anchored at `r₀ − 2` so different calls share
/// edges. `breaks` are inserted as extra edges.
pub fn shell_edges(exh: &ExhaustionSpec, lo: f64, hi: f64, plan: &QuadPlan, breaks: &[f64]) -> Vec<f64> {
    if hi <= lo {
        return vec![];
    }
    let anchor = exh.r0() - 2.0;
    let fine = 1.0 / plan.shells as f64;
    let mut edges = vec![lo, hi];
    if lo < anchor {
        let n = ((anchor - lo) / COARSE_WIDTH).ceil() as i64;
        edges.extend((0..=n).map(|i| anchor - COARSE_WIDTH * i as f64));
    }
    let start = ((lo.max(anchor) - anchor) / fine).floor() as i64;
    let stop = ((hi - anchor) / fine).ceil() as i64;
    edges.extend((start..=stop).map(|i| anchor + fine * i as f64));
    edges.extend_from_slice(breaks);
    edges.retain(|&e| e >= lo && e <= hi);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    edges
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of Monte Carlo block `block` in shell `shell`.
pub fn block_seed(seed: u64, shell: usize, block: usize) -> u64 {
    splitmix(splitmix(seed ^ splitmix(shell as u64)) ^ block as u64)
}

enum Block {
    Ring {
        shell: usize,
        u: f64,
        w: f64,
    },
    Mc {
        shell: usize,
        block: usize,
        n: usize,
        per_shell: usize,
    },
}

struct Layout<'a> {
    exh: &'a ExhaustionSpec,
    edges: &'a [f64],
    plan: &'a QuadPlan,
    sphere: Option<SphereGrid>,
    blocks: Vec<Block>,
}

impl<'a> Layout<'a> {
    fn new(exh: &'a ExhaustionSpec, edges: &'a [f64], plan: &'a QuadPlan) -> Result<Self> {
        plan.validate()?;
        let n_shells = edges.len().saturating_sub(1);
        let per_shell = plan.budget.checked_div(n_shells).map_or(0, |b| b.max(MIN_PER_SHELL));
        let mut blocks = Vec::new();
        let sphere = match plan.strategy {
            Strategy::RadialGrid => {
                let grid = SphereGrid::for_budget(exh.k(), per_shell / GL_ORDER);
                let gl = GaussLegendre::new(GL_ORDER.try_into().expect("nonzero order"));
                for s in 0..n_shells {
                    let (a, b) = (edges[s], edges[s + 1]);
                    for (x, w) in gl.iter() {
                        blocks.push(Block::Ring {
                            shell: s,
                            u: a + 0.5 * (b - a) * (x + 1.0),
                            w: 0.5 * (b - a) * w,
                        });
                    }
                }
                Some(grid)
            }
            Strategy::MonteCarlo => {
                for s in 0..n_shells {
                    let nb = per_shell.div_ceil(MC_BLOCK);
                    for b in 0..nb {
                        let n = MC_BLOCK.min(per_shell - b * MC_BLOCK);
                        blocks.push(Block::Mc {
                            shell: s,
                            block: b,
                            n,
                            per_shell,
                        });
                    }
                }
                None
            }
        };
        Ok(Self {
            exh,
            edges,
            plan,
            sphere,
            blocks,
        })
    }

    fn nodes(&self, block: &Block) -> Vec<Node> {
        let k = self.exh.k();
        match *block {
            Block::Ring { shell, u, w } => {
                let sphere = self.sphere.as_ref().expect("grid layout");
                let rho = self.exh.radius_at(u);
                let radial = w * self.exh.radial_jacobian(u);
                sphere
                    .nodes
                    .iter()
                    .map(|n| Node {
                        z: n.dir.iter().map(|c| c * rho).collect(),
                        u,
                        weight: radial * n.weight,
                        coarse_weight: radial * n.coarse_weight,
                        shell,
                    })
                    .collect()
            }
            Block::Mc {
                shell,
                block,
                n,
                per_shell,
            } => {
                let (a, b) = (self.edges[shell], self.edges[shell + 1]);
                let p = 2 * k as i32;
                let (ra, rb) = (self.exh.radius_at(a).powi(p), self.exh.radius_at(b).powi(p));
                let volume = sphere_area(k) / p as f64 * (rb - ra).abs();
                let w = volume / per_shell as f64;
                let mut rng = ChaCha8Rng::seed_from_u64(block_seed(self.plan.seed, shell, block));
                (0..n)
                    .map(|_| {
                        let mut dir: Vec<C64> = (0..k)
                            .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                            .collect();
                        let norm = dir.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                        let t: f64 = rng.random();
                        let rho = (ra + t * (rb - ra)).powf(1.0 / p as f64);
                        dir.iter_mut().for_each(|c| *c *= rho / norm);
                        let u = self.exh.tau(&dir);
                        Node {
                            z: dir,
                            u,
                            weight: w,
                            coarse_weight: w,
                            shell,
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Applies `f` to every node, in parallel over blocks, returning per-block
/// results in block order.
fn run_blocks<R, F>(layout: &Layout, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(Vec<Node>) -> Result<R> + Sync,
{
    layout
        .blocks
        .par_iter()
        .map(|b| f(layout.nodes(b)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Integrates an `ncomp`-vector of densities over each shell between
/// consecutive `edges`. `f(z, u, out)` writes the densities at `z`.
pub fn integrate_shells<F>(
    exh: &ExhaustionSpec,
    edges: &[f64],
    plan: &QuadPlan,
    ncomp: usize,
    f: F,
) -> Result<Vec<ShellSums>>
where
    F: Fn(&[C64], f64, &mut [f64]) -> Result<()> + Sync,
{
    let layout = Layout::new(exh, edges, plan)?;
    let partials = run_blocks(&layout, |nodes| {
        let shell = nodes.first().map(|n| n.shell).unwrap_or(0);
        let mut sum = vec![0.0; ncomp];
        let mut second = vec![0.0; ncomp];
        let mut out = vec![0.0; ncomp];
        for n in &nodes {
            out.iter_mut().for_each(|o| *o = 0.0);
            f(&n.z, n.u, &mut out)?;
            for c in 0..ncomp {
                if !out[c].is_finite() {
                    return Err(Error::NonFinite(format!("density component {c} at z = {:?}", n.z)));
                }
                sum[c] += n.weight * out[c];
                second[c] += match plan.strategy {
                    Strategy::RadialGrid => n.coarse_weight * out[c],
                    Strategy::MonteCarlo => (n.weight * out[c]).powi(2),
                };
            }
        }
        Ok((shell, sum, second, nodes.len()))
    })?;
    let n_shells = edges.len().saturating_sub(1);
    let mut shells: Vec<ShellSums> = (0..n_shells)
        .map(|s| ShellSums {
            lo: edges[s],
            hi: edges[s + 1],
            value: vec![0.0; ncomp],
            coarse_diff: vec![0.0; ncomp],
            variance: vec![0.0; ncomp],
            samples: 0,
        })
        .collect();
    let mut second: Vec<Vec<f64>> = vec![vec![0.0; ncomp]; n_shells];
    for (s, sum, sec, n) in partials {
        for c in 0..ncomp {
            shells[s].value[c] += sum[c];
            second[s][c] += sec[c];
        }
        shells[s].samples += n;
    }
    for (sh, sec) in shells.iter_mut().zip(&second) {
        for (c, &sec_c) in sec.iter().enumerate().take(ncomp) {
            match plan.strategy {
                Strategy::RadialGrid => sh.coarse_diff[c] = sh.value[c] - sec_c,
                Strategy::MonteCarlo => {
                    let n = sh.samples as f64;
                    if n >= 2.0 {
                        sh.variance[c] = ((sec_c - sh.value[c] * sh.value[c] / n) * n / (n - 1.0)).max(0.0);
                    }
                }
            }
        }
    }
    Ok(shells)
}

/// Maps every node to an optional value, keeping node order.
pub fn map_nodes<T, F>(exh: &ExhaustionSpec, edges: &[f64], plan: &QuadPlan, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Node) -> Result<Option<T>> + Sync,
{
    let layout = Layout::new(exh, edges, plan)?;
    let blocks = run_blocks(&layout, |nodes| {
        let mut out = Vec::new();
        for n in &nodes {
            if let Some(v) = f(n)? {
                out.push(v);
            }
        }
        Ok(out)
    })?;
    Ok(blocks.into_iter().flatten().collect())
}

fn check_radius(exh: &ExhaustionSpec, r: f64) -> Result<()> {
    if !(r < exh.r_max()) || !r.is_finite() {
        return Err(Error::RadiusOutOfRange {
            r,
            lo: exh.u_floor(),
            hi: exh.r_max(),
        });
    }
    Ok(())
}

/// `∫_{lo < τ < hi} density dλ`.
pub fn integrate_band<F>(density: F, exh: &ExhaustionSpec, lo: f64, hi: f64, plan: &QuadPlan) -> Result<QuadResult>
where
    F: Fn(&[C64]) -> f64 + Sync,
{
    check_radius(exh, hi)?;
    let lo = lo.max(exh.u_floor());
    let edges = shell_edges(exh, lo, hi, plan, &[]);
    if edges.len() < 2 {
        return Ok(QuadResult::zero());
    }
    let shells = integrate_shells(exh, &edges, plan, 1, |z, _, out| {
        out[0] = density(z);
        Ok(())
    })?;
    let mut err = ErrorAccumulator::default();
    shells.iter().for_each(|s| err.add(s.combination_error(&[1.0])));
    Ok(QuadResult {
        value: shells.iter().map(|s| s.value[0]).sum(),
        stderr: err.stderr(),
        samples_used: shells.iter().map(|s| s.samples).sum(),
    })
}

/// `∫_{B_r} density dλ`, with `B_r` truncated at [`ExhaustionSpec::u_floor`].
pub fn integrate_sublevel<F>(density: F, exh: &ExhaustionSpec, r: f64, plan: &QuadPlan) -> Result<QuadResult>
where
    F: Fn(&[C64]) -> f64 + Sync,
{
    integrate_band(density, exh, exh.u_floor(), r, plan)
}

fn check_boundary_supported(exh: &ExhaustionSpec) -> Result<()> {
    use crate::maps::ExhaustionKind;
    if exh.k() >= 2 && exh.kind() == ExhaustionKind::PuncturedDisk {
        return Err(Error::Unsupported(format!(
            "boundary integrals for {} with k = {}",
            exh.id(),
            exh.k()
        )));
    }
    Ok(())
}

/// `∫_{∂B_r} g d^cτ ∧ (dd^cτ)^{k−1}`. For the radial exhaustions this is the
/// average of `g` over the sphere `τ = r`.
pub fn integrate_boundary<F>(g: F, exh: &ExhaustionSpec, r: f64, plan: &QuadPlan) -> Result<QuadResult>
where
    F: Fn(&[C64]) -> f64 + Sync,
{
    check_boundary_supported(exh)?;
    check_radius(exh, r)?;
    plan.validate()?;
    let k = exh.k();
    let rho = exh.radius_at(r);
    match plan.strategy {
        Strategy::RadialGrid => {
            let grid = SphereGrid::for_budget(k, plan.budget);
            let area = sphere_area(k);
            let vals: Vec<(f64, f64)> = grid
                .nodes
                .par_iter()
                .map(|n| {
                    let z: Vec<C64> = n.dir.iter().map(|c| c * rho).collect();
                    let v = g(&z);
                    (n.weight * v, n.coarse_weight * v)
                })
                .collect();
            let (full, coarse) = vals.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
            if !full.is_finite() {
                return Err(Error::NonFinite(format!("boundary integrand on τ = {r}")));
            }
            Ok(QuadResult {
                value: full / area,
                stderr: (full - coarse).abs() / area,
                samples_used: grid.len(),
            })
        }
        Strategy::MonteCarlo => {
            let blocks = plan.budget.div_ceil(MC_BLOCK);
            let sums: Vec<(f64, f64, usize)> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut rng = ChaCha8Rng::seed_from_u64(block_seed(plan.seed, usize::MAX, b));
                    let n = MC_BLOCK.min(plan.budget - b * MC_BLOCK);
                    let (mut s, mut s2) = (0.0, 0.0);
                    for _ in 0..n {
                        let mut z: Vec<C64> = (0..k)
                            .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                            .collect();
                        let norm = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                        z.iter_mut().for_each(|c| *c *= rho / norm);
                        let v = g(&z);
                        s += v;
                        s2 += v * v;
                    }
                    (s, s2, n)
                })
                .collect();
            let (s, s2, n) = sums
                .iter()
                .fold((0.0, 0.0, 0), |(a, b, c), (x, y, m)| (a + x, b + y, c + m));
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("boundary integrand on τ = {r}")));
            }
            let nf = n as f64;
            let mean = s / nf;
            let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
            Ok(QuadResult {
                value: mean,
                stderr: (var / nf).sqrt(),
                samples_used: n,
            })
        }
    }
}

/// A node on the sphere `τ = r` with an oriented tangent frame, for
/// integrating `(2k−1)`-forms: `∫ η = Σ param_weight · η(frame)`.
#[derive(Clone, Debug)]
pub struct BoundaryNode {
    pub z: Vec<C64>,
    pub frame: Vec<Vec<C64>>,
    pub param_weight: f64,
    pub coarse_param_weight: f64,
    /// Normalized surface measure (sums to 1).
    pub measure: f64,
}

fn real_det(cols: &[&[C64]]) -> f64 {
    let n = 2 * cols[0].len();
    let m = nalgebra::DMatrix::from_fn(n, n, |row, col| {
        let c = cols[col][row / 2];
        if row % 2 == 0 {
            c.re
        } else {
            c.im
        }
    });
    m.determinant()
}

/// Boundary nodes of `B_r` with frames oriented as the boundary of `B_r`
/// (outward normal first).
pub fn boundary_nodes(exh: &ExhaustionSpec, r: f64, budget: usize) -> Result<Vec<BoundaryNode>> {
    check_boundary_supported(exh)?;
    check_radius(exh, r)?;
    let k = exh.k();
    let grid = SphereGrid::for_budget(k, budget);
    let rho = exh.radius_at(r);
    let area = sphere_area(k);
    let coarse_scale = |n: &sphere::SphereNode| {
        if n.weight > 0.0 {
            n.coarse_weight / n.weight
        } else {
            0.0
        }
    };
    Ok(grid
        .nodes
        .iter()
        .map(|n| {
            let z: Vec<C64> = n.dir.iter().map(|c| c * rho).collect();
            let frame = grid.frame(n, rho);
            let normal = exh.grad_zbar(&z);
            let mut cols: Vec<&[C64]> = vec![&normal];
            cols.extend(frame.iter().map(|v| v.as_slice()));
            let sign = real_det(&cols).signum();
            BoundaryNode {
                z,
                frame,
                param_weight: sign * n.param_weight,
                coarse_param_weight: sign * n.param_weight * coarse_scale(n),
                measure: n.weight / area,
            }
        })
        .collect())
}
