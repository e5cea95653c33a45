//! Domains, interior points and boundary quadrature.
//!
//! Every boundary measure is the normalized rotation-invariant probability
//! measure: arc length on the circle, the product measure on the torus and
//! surface measure on the unit sphere of `ℂⁿ`.

use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::sum;

/// The three concrete domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// The unit disc of `ℂ`.
    UnitDisc,
    /// The unit ball of `ℂ²`.
    UnitBall2,
    /// The bidisc `𝔻²`, with the distinguished boundary `𝕋²`.
    Bidisc,
}

impl Domain {
    /// Complex dimension.
    pub fn dim(self) -> usize {
        match self {
            Domain::UnitDisc => 1,
            Domain::UnitBall2 | Domain::Bidisc => 2,
        }
    }

    pub fn support(self) -> Support {
        match self {
            Domain::UnitDisc => Support::Circle,
            Domain::UnitBall2 => Support::Sphere { dim: 2 },
            Domain::Bidisc => Support::Torus,
        }
    }

    /// Strict interior membership.
    pub fn contains(self, z: &[Complex64]) -> bool {
        if z.len() != self.dim() || z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return false;
        }
        match self {
            Domain::UnitDisc | Domain::UnitBall2 => z.iter().map(|c| c.norm_sqr()).sum::<f64>() < 1.0,
            Domain::Bidisc => z.iter().all(|c| c.norm() < 1.0),
        }
    }

    /// Default adaptive-refinement schedule for this domain.
    pub fn refine_options(self) -> RefineOptions {
        match self {
            Domain::UnitDisc => RefineOptions { start: 64, max: 8192, rel_tol: 1e-10 },
            Domain::Bidisc => RefineOptions { start: 32, max: 512, rel_tol: 1e-10 },
            Domain::UnitBall2 => RefineOptions { start: 32, max: 256, rel_tol: 1e-10 },
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::UnitDisc => "unit_disc",
            Domain::UnitBall2 => "unit_ball2",
            Domain::Bidisc => "bidisc",
        })
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit_disc" | "disc" => Ok(Domain::UnitDisc),
            "unit_ball2" | "ball" | "ball2" => Ok(Domain::UnitBall2),
            "bidisc" => Ok(Domain::Bidisc),
            other => Err(Error::param(format!("unknown domain {other:?}"))),
        }
    }
}

/// A point strictly inside a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InteriorPoint(Vec<Complex64>);

impl InteriorPoint {
    pub fn new(domain: Domain, coords: Vec<Complex64>) -> Result<Self> {
        if coords.len() != domain.dim() {
            return Err(Error::Shape(format!(
                "{domain} points have {} coordinates, got {}",
                domain.dim(),
                coords.len()
            )));
        }
        if !domain.contains(&coords) {
            return Err(Error::Domain(format!("{coords:?} is not interior to {domain}")));
        }
        Ok(InteriorPoint(coords))
    }

    pub fn disc(z: Complex64) -> Result<Self> {
        Self::new(Domain::UnitDisc, vec![z])
    }

    /// Disc point from a real coordinate.
    pub fn real(x: f64) -> Result<Self> {
        Self::disc(Complex64::new(x, 0.0))
    }

    /// The origin of `domain`.
    pub fn origin(domain: Domain) -> Self {
        InteriorPoint(vec![Complex64::new(0.0, 0.0); domain.dim()])
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.0
    }

    /// Euclidean norm of the coordinate vector.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest coordinate modulus.
    pub fn max_modulus(&self) -> f64 {
        self.0.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// The set carrying a quadrature rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Support {
    Circle,
    Torus,
    /// Unit sphere of `ℂ^dim`.
    Sphere {
        dim: usize,
    },
    /// Unit ball of `ℂ^dim` with the normalized measure `∝ (1-|z|²)^weight dV`.
    Ball {
        dim: usize,
        weight: u32,
    },
}

impl Support {
    pub fn dim(self) -> usize {
        match self {
            Support::Circle => 1,
            Support::Torus => 2,
            Support::Sphere { dim } | Support::Ball { dim, .. } => dim,
        }
    }
}

/// Positive weights summing to one on a finite node set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "RuleSnapshot", try_from = "RuleSnapshot")]
pub struct QuadratureRule {
    support: Support,
    resolution: usize,
    dim: usize,
    /// Row-major, `len() * dim` entries.
    nodes: Vec<Complex64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn support(&self) -> Support {
        self.support
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, j: usize) -> &[Complex64] {
        &self.nodes[j * self.dim..(j + 1) * self.dim]
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[Complex64]> {
        self.nodes.chunks_exact(self.dim)
    }

    /// Sample `f` at every node.
    pub fn sample<F>(&self, f: F) -> BoundarySamples<'_>
    where
        F: Fn(&[Complex64]) -> Complex64 + Sync,
    {
        use rayon::prelude::*;
        let values = self.nodes.par_chunks_exact(self.dim).map(&f).collect();
        BoundarySamples { rule: self, values }
    }

    /// `∫ f dσ` for a real integrand evaluated node by node.
    pub fn integrate_real<F>(&self, f: F) -> f64
    where
        F: Fn(&[Complex64]) -> f64 + Sync,
    {
        sum::par_sum(self.len(), |j| self.weights[j] * f(self.node(j)))
    }

    fn assemble(support: Support, resolution: usize, dim: usize, nodes: Vec<Complex64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(nodes.len(), weights.len() * dim);
        QuadratureRule { support, resolution, dim, nodes, weights }
    }
}

#[derive(Serialize, Deserialize)]
struct RuleSnapshot {
    support: Support,
    resolution: usize,
    /// One array per coordinate.
    nodes_re: Vec<Vec<f64>>,
    nodes_im: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl From<QuadratureRule> for RuleSnapshot {
    fn from(rule: QuadratureRule) -> Self {
        let mut nodes_re = vec![Vec::with_capacity(rule.len()); rule.dim];
        let mut nodes_im = vec![Vec::with_capacity(rule.len()); rule.dim];
        for z in rule.nodes() {
            for (k, c) in z.iter().enumerate() {
                nodes_re[k].push(c.re);
                nodes_im[k].push(c.im);
            }
        }
        RuleSnapshot { support: rule.support, resolution: rule.resolution, nodes_re, nodes_im, weights: rule.weights }
    }
}

impl TryFrom<RuleSnapshot> for QuadratureRule {
    type Error = Error;

    fn try_from(snap: RuleSnapshot) -> Result<Self> {
        let dim = snap.support.dim();
        let n = snap.weights.len();
        if snap.nodes_re.len() != dim
            || snap.nodes_im.len() != dim
            || snap.nodes_re.iter().chain(&snap.nodes_im).any(|c| c.len() != n)
        {
            return Err(Error::Shape("rule snapshot coordinate arrays do not match weights".into()));
        }
        let mut nodes = Vec::with_capacity(n * dim);
        for j in 0..n {
            for k in 0..dim {
                nodes.push(Complex64::new(snap.nodes_re[k][j], snap.nodes_im[k][j]));
            }
        }
        Ok(QuadratureRule::assemble(snap.support, snap.resolution, dim, nodes, snap.weights))
    }
}

/// Values of a function at the nodes of a rule.
#[derive(Clone, Debug)]
pub struct BoundarySamples<'r> {
    rule: &'r QuadratureRule,
    values: Vec<Complex64>,
}

impl<'r> BoundarySamples<'r> {
    pub fn new(rule: &'r QuadratureRule, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != rule.len() {
            return Err(Error::Shape(format!("{} samples for a rule with {} nodes", values.len(), rule.len())));
        }
        Ok(BoundarySamples { rule, values })
    }

    pub fn rule(&self) -> &'r QuadratureRule {
        self.rule
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Pointwise map, keeping the rule.
    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Self {
        BoundarySamples { rule: self.rule, values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

fn gauss_unit(points: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(points).expect("gauss rule needs at least one node");
    GaussLegendre::new(n).as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

/// Gauss–Legendre nodes on `[0, 1]` for the probability density
/// `∝ t^a (1-t)^b`.
fn gauss_beta(points: usize, a: u32, b: u32) -> Vec<(f64, f64)> {
    let raw: Vec<(f64, f64)> =
        gauss_unit(points).into_iter().map(|(t, w)| (t, w * t.powi(a as i32) * (1.0 - t).powi(b as i32))).collect();
    // normalize by the rule's own mass so every product rule sums to one
    let mass = sum::pairwise(&raw.iter().map(|r| r.1).collect::<Vec<_>>());
    raw.into_iter().map(|(t, w)| (t, w / mass)).collect()
}

fn roots_of_unity(m: usize) -> Vec<Complex64> {
    (0..m).map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64)).collect()
}

/// Equispaced trapezoid rule on the unit circle with `m` nodes.
pub fn circle_rule(m: usize) -> Result<QuadratureRule> {
    check_resolution(m)?;
    check_size(Some(m))?;
    let nodes = roots_of_unity(m);
    let weights = vec![1.0 / m as f64; m];
    Ok(QuadratureRule::assemble(Support::Circle, m, 1, nodes, weights))
}

/// Tensor product of two circle rules on `𝕋²`.
pub fn torus_rule(m: usize) -> Result<QuadratureRule> {
    check_resolution(m)?;
    check_size(m.checked_mul(m))?;
    let roots = roots_of_unity(m);
    let mut nodes = Vec::with_capacity(2 * m * m);
    for &z1 in &roots {
        for &z2 in &roots {
            nodes.push(z1);
            nodes.push(z2);
        }
    }
    let weights = vec![1.0 / (m * m) as f64; m * m];
    Ok(QuadratureRule::assemble(Support::Torus, m, 2, nodes, weights))
}

/// Product rule on the unit sphere of `ℂ^dim`.
///
/// Writes `z_j = √t_j e^{iθ_j}`; the vector `(t_1, …, t_dim)` is uniform on the
/// simplex and independent of the angles. The simplex is parametrized by
/// `t_1 = u_1, t_2 = (1-u_1) u_2, …`, each `u_i` integrated by Gauss–Legendre
/// against its beta marginal, and each angle by the trapezoid rule.
///
/// Exact for `z^α z̄^β` whenever `|α|, |β| ≤ gauss` and every
/// `|α_j - β_j| < angular`.
pub fn sphere_rule(dim: usize, gauss: usize, angular: usize) -> Result<QuadratureRule> {
    if dim == 0 {
        return Err(Error::param("sphere dimension must be positive"));
    }
    check_resolution(angular)?;
    if dim == 1 {
        return circle_rule(angular);
    }
    if gauss == 0 {
        return Err(Error::param("gauss order must be positive"));
    }
    check_size(sphere_rule_size(dim, gauss, angular))?;
    let simplex = simplex_rule(dim, gauss);
    let roots = roots_of_unity(angular);
    let n_angles = angular.pow(dim as u32);
    let angle_weight = 1.0 / n_angles as f64;

    let total = simplex.len() * n_angles;
    let mut nodes = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for (t, wt) in &simplex {
        let radii: Vec<f64> = t.iter().map(|x| x.max(0.0).sqrt()).collect();
        idx.iter_mut().for_each(|i| *i = 0);
        for _ in 0..n_angles {
            for k in 0..dim {
                nodes.push(roots[idx[k]] * radii[k]);
            }
            weights.push(wt * angle_weight);
            // odometer over the angle indices
            for i in idx.iter_mut().rev() {
                *i += 1;
                if *i < angular {
                    break;
                }
                *i = 0;
            }
        }
    }
    Ok(QuadratureRule::assemble(Support::Sphere { dim }, angular, dim, nodes, weights))
}

/// `(t, weight)` pairs for the uniform probability measure on the simplex
/// `{t ∈ [0,1]^dim : Σ t = 1}`.
fn simplex_rule(dim: usize, gauss: usize) -> Vec<(Vec<f64>, f64)> {
    // u_i has marginal density (dim - i)(1 - u)^(dim - 1 - i), i = 1..dim-1
    let factors: Vec<Vec<(f64, f64)>> = (1..dim).map(|i| gauss_beta(gauss, 0, (dim - 1 - i) as u32)).collect();
    let mut out = vec![(Vec::new(), 1.0)];
    for rule in &factors {
        let mut next = Vec::with_capacity(out.len() * rule.len());
        for (us, w) in &out {
            for &(u, wu) in rule {
                let mut us2: Vec<f64> = us.clone();
                us2.push(u);
                next.push((us2, w * wu));
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|(us, w)| {
            let mut t = Vec::with_capacity(dim);
            let mut rest = 1.0;
            for u in us {
                t.push(rest * u);
                rest *= 1.0 - u;
            }
            t.push(rest);
            (t, w)
        })
        .collect()
}

/// Rule for the normalized weighted volume measure
/// `∝ (1-|z|²)^weight dV(z)` on the unit ball of `ℂ^dim`.
///
/// Polar decomposition `z = √t ζ`: Gauss–Legendre in `t = |z|²` against the
/// radial density `∝ t^(dim-1) (1-t)^weight`, tensored with the sphere rule.
pub fn ball_volume_rule(dim: usize, weight: u32, gauss: usize, angular: usize) -> Result<QuadratureRule> {
    if gauss == 0 {
        return Err(Error::param("gauss order must be positive"));
    }
    check_size(sphere_rule_size(dim, gauss, angular).and_then(|n| n.checked_mul(gauss)))?;
    let sphere = sphere_rule(dim, gauss, angular)?;
    let radial = gauss_beta(gauss, (dim - 1) as u32, weight);
    let mut nodes = Vec::with_capacity(radial.len() * sphere.nodes.len());
    let mut weights = Vec::with_capacity(radial.len() * sphere.len());
    for &(t, wt) in &radial {
        let r = t.sqrt();
        for (j, zeta) in sphere.nodes().enumerate() {
            nodes.extend(zeta.iter().map(|c| c * r));
            weights.push(wt * sphere.weight(j));
        }
    }
    Ok(QuadratureRule::assemble(Support::Ball { dim, weight }, angular, dim, nodes, weights))
}

/// Largest number of nodes a single rule may have.
pub const MAX_NODES: usize = 1 << 24;

/// Node count of [`sphere_rule`], `None` on overflow.
pub fn sphere_rule_size(dim: usize, gauss: usize, angular: usize) -> Option<usize> {
    if dim <= 1 {
        return Some(angular);
    }
    gauss.checked_pow(dim as u32 - 1)?.checked_mul(angular.checked_pow(dim as u32)?)
}

fn check_size(nodes: Option<usize>) -> Result<()> {
    match nodes {
        Some(n) if n <= MAX_NODES => Ok(()),
        Some(n) => Err(Error::Capacity(format!("quadrature rule with {n} nodes exceeds the cap of {MAX_NODES}"))),
        None => Err(Error::Capacity("quadrature rule size overflows".into())),
    }
}

fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < 4 {
        return Err(Error::param(format!("quadrature resolution must be at least 4, got {resolution}")));
    }
    Ok(())
}

/// Gauss order used by the `ℂ²` sphere rule at a given angular resolution.
pub fn ball_gauss_order(resolution: usize) -> usize {
    (resolution / 8).max(4)
}

/// Boundary rule for `domain` at `resolution`.
///
/// Disc: `resolution` equispaced nodes. Bidisc: `resolution²` nodes.
/// Ball: `resolution` trapezoid nodes per angle and
/// [`ball_gauss_order`]`(resolution)` Gauss nodes in `t = |z₁|²`.
pub fn build_quadrature(domain: Domain, resolution: usize) -> Result<QuadratureRule> {
    check_resolution(resolution)?;
    match domain {
        Domain::UnitDisc => circle_rule(resolution),
        Domain::Bidisc => torus_rule(resolution),
        Domain::UnitBall2 => sphere_rule(2, ball_gauss_order(resolution), resolution),
    }
}

/// `Σ w_j f_j`.
pub fn integrate(f: &BoundarySamples<'_>) -> Complex64 {
    let w = f.rule.weights();
    sum::par_sum_c(w.len(), |j| f.values[j] * w[j])
}

/// `(∫ |f|^p dσ)^{1/p}`; for `p = ∞` the largest sampled modulus, which is a
/// lower bound for the essential supremum.
pub fn lp_norm(f: &BoundarySamples<'_>, p: Exponent) -> f64 {
    lp_norm_values(f.rule, &f.values, p)
}

pub(crate) fn lp_norm_values(rule: &QuadratureRule, values: &[Complex64], p: Exponent) -> f64 {
    if p.is_infinite() {
        return sum::par_max(values.len(), |j| values[j].norm());
    }
    let p = p.value();
    let w = rule.weights();
    let s = if p == 2.0 {
        sum::par_sum(w.len(), |j| w[j] * values[j].norm_sqr())
    } else {
        sum::par_sum(w.len(), |j| w[j] * values[j].norm_sqr().powf(0.5 * p))
    };
    s.powf(1.0 / p)
}

/// `⟨f, g⟩ = ∫ f ḡ dσ`.
pub fn inner_product(f: &BoundarySamples<'_>, g: &BoundarySamples<'_>) -> Result<Complex64> {
    if !same_rule(f.rule, g.rule) {
        return Err(Error::Shape("inner product of samples on different rules".into()));
    }
    let w = f.rule.weights();
    Ok(sum::par_sum_c(w.len(), |j| f.values[j] * g.values[j].conj() * w[j]))
}

fn same_rule(a: &QuadratureRule, b: &QuadratureRule) -> bool {
    std::ptr::eq(a, b) || (a.support == b.support && a.resolution == b.resolution && a.weights.len() == b.weights.len())
}

/// Doubling schedule for adaptive quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub start: usize,
    pub max: usize,
    pub rel_tol: f64,
}

/// Outcome of an adaptive refinement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// Resolution of the rule that produced the reported values.
    pub resolution: usize,
    /// Largest relative change between the last two resolutions.
    pub residual: f64,
    pub converged: bool,
    pub max_resolution: usize,
    pub rel_tol: f64,
}

/// Double the resolution until every component of `f` changes by less than
/// `rel_tol` (relative), or the cap is reached.
pub fn refine<T, F>(domain: Domain, opts: RefineOptions, mut f: F) -> Result<(T, Convergence)>
where
    F: FnMut(&QuadratureRule) -> Result<(T, Vec<f64>)>,
{
    if opts.start > opts.max {
        return Err(Error::param("refinement start exceeds cap"));
    }
    let mut res = opts.start;
    let rule = build_quadrature(domain, res)?;
    let (mut value, mut probe) = f(&rule)?;
    drop(rule);
    let mut residual = f64::INFINITY;
    while res * 2 <= opts.max {
        res *= 2;
        let rule = build_quadrature(domain, res)?;
        let (v, p) = f(&rule)?;
        residual = relative_change(&probe, &p);
        value = v;
        probe = p;
        if residual < opts.rel_tol {
            break;
        }
    }
    let conv = Convergence {
        resolution: res,
        residual,
        converged: residual < opts.rel_tol,
        max_resolution: opts.max,
        rel_tol: opts.rel_tol,
    };
    Ok((value, conv))
}

fn relative_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter().zip(new).map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
}
