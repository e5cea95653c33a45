//! Finite point sequences: Gleason distances, Carleson constants and dual
//! systems.

use std::f64::consts::PI;
use std::io::Read;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::geometry::{lp_norm_values, Domain, InteriorPoint, QuadratureRule};
use crate::holo::{blaschke_factor, Factor, HoloExpr, Term};
use crate::kernels::{kernel_at_self, kernel_norm_sharp, kernel_samples, kernel_with_conj};
use crate::sum;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `N ≥ 1` distinct interior points of one domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence")]
pub struct PointSequence {
    domain: Domain,
    points: Vec<InteriorPoint>,
}

#[derive(Deserialize)]
struct RawSequence {
    domain: Domain,
    points: Vec<Vec<Complex64>>,
}

impl TryFrom<RawSequence> for PointSequence {
    type Error = Error;

    fn try_from(raw: RawSequence) -> Result<Self> {
        PointSequence::from_coords(raw.domain, raw.points)
    }
}

impl PointSequence {
    pub fn new(domain: Domain, points: Vec<InteriorPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("a point sequence needs at least one point"));
        }
        for p in &points {
            if p.coords().len() != domain.dim() || !domain.contains(p.coords()) {
                return Err(Error::Domain(format!("{:?} is not an interior point of {domain}", p.coords())));
            }
        }
        for i in 0..points.len() {
            for j in 0..i {
                if points[i] == points[j] {
                    return Err(Error::Contract(format!("points {j} and {i} coincide")));
                }
            }
        }
        Ok(PointSequence { domain, points })
    }

    pub fn from_coords(domain: Domain, coords: Vec<Vec<Complex64>>) -> Result<Self> {
        let points = coords.into_iter().map(|c| InteriorPoint::new(domain, c)).collect::<Result<_>>()?;
        Self::new(domain, points)
    }

    pub fn from_disc(points: &[Complex64]) -> Result<Self> {
        Self::from_coords(Domain::UnitDisc, points.iter().map(|&z| vec![z]).collect())
    }

    /// CSV rows `re1,im1[,re2,im2]`; a non-numeric first row is a header.
    pub fn from_csv<R: Read>(domain: Domain, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let width = 2 * domain.dim();
        let mut coords = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::param(format!("CSV row {row}: {e}")))?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let vals = match parsed {
                Ok(v) => v,
                Err(_) if row == 0 => continue,
                Err(e) => return Err(Error::param(format!("CSV row {row}: {e}"))),
            };
            if vals.len() != width {
                return Err(Error::Shape(format!("CSV row {row} has {} columns, {domain} needs {width}", vals.len())));
            }
            coords.push(vals.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect());
        }
        Self::from_coords(domain, coords)
    }

    /// JSON object `{"domain": ..., "points": [[[re, im], ...], ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::param(format!("point sequence JSON: {e}")))
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn points(&self) -> &[InteriorPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn disc_distance(a: Complex64, b: Complex64) -> f64 {
    ((a - b) / (1.0 - a.conj() * b)).norm()
}

/// Pseudo-hyperbolic distance between interior points.
pub fn gleason_distance(domain: Domain, a: &InteriorPoint, b: &InteriorPoint) -> f64 {
    let (a, b) = (a.coords(), b.coords());
    match domain {
        Domain::UnitDisc => disc_distance(a[0], b[0]),
        Domain::Bidisc => disc_distance(a[0], b[0]).max(disc_distance(a[1], b[1])),
        Domain::UnitBall2 => {
            let na = 1.0 - a[0].norm_sqr() - a[1].norm_sqr();
            let nb = 1.0 - b[0].norm_sqr() - b[1].norm_sqr();
            let ip = b[0] * a[0].conj() + b[1] * a[1].conj();
            let one_minus = na * nb / (1.0 - ip).norm_sqr();
            (1.0 - one_minus).max(0.0).sqrt()
        }
    }
}

/// `min_a Π_{b≠a} d(a, b)`.
pub fn gleason_product_delta(seq: &PointSequence) -> f64 {
    let pts = seq.points();
    (0..pts.len())
        .map(|i| (0..pts.len()).filter(|&j| j != i).map(|j| gleason_distance(seq.domain(), &pts[i], &pts[j])).product())
        .fold(1.0, f64::min)
}

/// The window attaining the largest Carleson-box ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonWindow {
    pub constant: f64,
    pub center: f64,
    pub ell: f64,
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// `sup (Σ_{a∈Q} (1-|a|²)) / ℓ` over windows centred at the arguments of
/// the points with dyadic side `ℓ = 2^{-j}`.
pub fn carleson_window_constant(seq: &PointSequence) -> Result<CarlesonWindow> {
    if seq.domain() != Domain::UnitDisc {
        return Err(Error::Unsupported("Carleson windows are defined on the disc".into()));
    }
    let pts: Vec<Complex64> = seq.points().iter().map(|p| p.coords()[0]).collect();
    let closest = pts.iter().map(|z| 1.0 - z.norm()).fold(1.0, f64::min);
    let depth = (1.0 / closest).log2().ceil() as i32 + 1;
    let mut best = CarlesonWindow { constant: 0.0, center: 0.0, ell: 1.0 };
    for c in &pts {
        let center = c.arg();
        for j in 0..=depth {
            let ell = 0.5f64.powi(j);
            let mass: f64 = pts
                .iter()
                .filter(|z| z.norm() >= 1.0 - ell && angle_gap(z.arg(), center) <= ell)
                .map(|z| 1.0 - z.norm_sqr())
                .sum();
            if mass / ell > best.constant {
                best = CarlesonWindow { constant: mass / ell, center, ell };
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonOptions {
    /// Random starts on top of the unit vectors and the all-ones vector.
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop a start once the ratio improves by less than `tol` relatively.
    pub tol: f64,
}

impl Default for CarlesonOptions {
    fn default() -> Self {
        CarlesonOptions { restarts: 32, seed: 0, max_iter: 2000, tol: 1e-15 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CarlesonMethod {
    GramSpectral,
    PowerIteration {
        restarts: usize,
        seed: u64,
    },
    /// Closed form for `q = 1`, attained at a unit vector.
    Vertex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonEstimate {
    pub q: Exponent,
    pub constant: f64,
    pub method: CarlesonMethod,
    /// Maximizing coefficient vector, `‖μ*‖_q = 1`.
    pub certificate: Vec<Complex64>,
    /// Ratio attained by the certificate (a certified lower bound).
    pub lower_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakCarlesonEstimate {
    pub q: Exponent,
    pub constant: f64,
    pub method: CarlesonMethod,
    /// Nonnegative weights `ν = |μ|²`, `‖ν‖_{q/2} = 1`.
    pub certificate: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub q: Exponent,
    pub strong: CarlesonEstimate,
    pub weak: Option<WeakCarlesonEstimate>,
}

/// Weighted columns `w_j^{1/q} k_{q,a}(ζ_j)`, so that `ℓ^q` norms of
/// `Σ μ_a col_a` are `L^q` norms of `Σ μ_a k_{q,a}`.
struct Columns {
    cols: Vec<Vec<Complex64>>,
    nodes: usize,
}

impl Columns {
    fn new(seq: &PointSequence, q: Exponent, rule: &QuadratureRule) -> Self {
        let cols = seq
            .points()
            .par_iter()
            .map(|a| {
                let s = kernel_samples(seq.domain(), a, rule);
                let n = lp_norm_values(rule, s.values(), q);
                s.values().iter().enumerate().map(|(j, v)| v / n * rule.weight(j).powf(q.recip())).collect()
            })
            .collect();
        Columns { cols, nodes: rule.len() }
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.nodes).into_par_iter().map(|j| self.cols.iter().zip(x).map(|(c, x)| c[j] * x).sum()).collect()
    }

    fn adjoint(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.cols.iter().map(|c| sum::par_sum_c(self.nodes, |j| c[j].conj() * u[j])).collect()
    }
}

fn lq(x: &[Complex64], q: f64) -> f64 {
    x.iter().map(|v| v.norm().powf(q)).sum::<f64>().powf(1.0 / q)
}

fn duality_map(x: &[Complex64], r: f64) -> Vec<Complex64> {
    x.iter().map(|&v| if v == ZERO { ZERO } else { v * v.norm().powf(r - 2.0) }).collect()
}

fn normalized(x: Vec<Complex64>, q: f64) -> Vec<Complex64> {
    let n = lq(&x, q);
    x.into_iter().map(|v| v / n).collect()
}

/// Seeded starting vectors: unit vectors, all ones, then random restarts.
fn starts(n: usize, opts: &CarlesonOptions) -> Vec<Vec<Complex64>> {
    let mut out: Vec<Vec<Complex64>> =
        (0..n).map(|a| (0..n).map(|b| if a == b { Complex64::new(1.0, 0.0) } else { ZERO }).collect()).collect();
    out.push(vec![Complex64::new(1.0, 0.0); n]);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        out.push((0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
    }
    out
}

/// `‖Σ μ_a k_{q,a}‖_q / ‖μ‖_q` by quadrature.
pub fn carleson_ratio(seq: &PointSequence, q: Exponent, mu: &[Complex64], rule: &QuadratureRule) -> Result<f64> {
    if mu.len() != seq.len() {
        return Err(Error::Shape("coefficient vector length differs from the sequence".into()));
    }
    if q.is_infinite() {
        return Err(Error::param("Carleson ratios need finite q"));
    }
    let cols = Columns::new(seq, q, rule);
    Ok(lq(&cols.apply(mu), q.value()) / lq(mu, q.value()))
}

/// Closed-form normalized Gram matrix `⟨k_{2,b}, k_{2,a}⟩`.
pub fn gram_matrix(seq: &PointSequence) -> DMatrix<Complex64> {
    let d = seq.domain();
    let pts = seq.points();
    let norms: Vec<f64> = pts.iter().map(|a| kernel_at_self(d, a).sqrt()).collect();
    DMatrix::from_fn(pts.len(), pts.len(), |a, b| {
        let conj_b: Vec<Complex64> = pts[b].coords().iter().map(|c| c.conj()).collect();
        kernel_with_conj(d, &conj_b, pts[a].coords()) / (norms[a] * norms[b])
    })
}

fn hermitian_eigenvalues(m: DMatrix<Complex64>) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m, 1e-15, 10_000)
        .ok_or_else(|| Error::Numeric("eigensolver did not converge".into()))?;
    Ok(eig.eigenvalues.iter().copied().collect())
}

/// Best lower bound for the `ℓ^q → L^q` norm of `μ ↦ Σ μ_a k_{q,a}`; exact
/// (Gram spectrum) for `q = 2`.
pub fn carleson_constant(
    seq: &PointSequence,
    q: Exponent,
    rule: &QuadratureRule,
    opts: &CarlesonOptions,
) -> Result<CarlesonEstimate> {
    if q.is_infinite() {
        return Err(Error::param("Carleson constants need finite q"));
    }
    if rule.support() != seq.domain().support() {
        return Err(Error::Shape("quadrature rule does not match the sequence domain".into()));
    }
    let n = seq.len();
    let cols = Columns::new(seq, q, rule);
    let qv = q.value();
    if qv == 1.0 {
        let (best, ratio) = (0..n)
            .map(|a| (a, cols.cols[a].iter().map(|v| v.norm()).sum::<f64>()))
            .fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        let mut cert = vec![ZERO; n];
        cert[best] = Complex64::new(1.0, 0.0);
        return Ok(CarlesonEstimate {
            q,
            constant: ratio,
            method: CarlesonMethod::Vertex,
            certificate: cert,
            lower_bound: ratio,
        });
    }
    let qc = q.conj().value();
    let runs: Vec<(f64, Vec<Complex64>)> = starts(n, opts)
        .into_par_iter()
        .map(|x0| {
            let mut x = normalized(x0, qv);
            let mut ratio = lq(&cols.apply(&x), qv);
            for _ in 0..opts.max_iter {
                let v = cols.adjoint(&duality_map(&cols.apply(&x), qv));
                if lq(&v, qc) == 0.0 {
                    break;
                }
                let next = normalized(duality_map(&v, qc), qv);
                let r = lq(&cols.apply(&next), qv);
                if r <= ratio * (1.0 + opts.tol) {
                    if r > ratio {
                        x = next;
                        ratio = r;
                    }
                    break;
                }
                x = next;
                ratio = r;
            }
            (ratio, x)
        })
        .collect();
    let (lower_bound, certificate) =
        runs.into_iter().fold((f64::MIN, Vec::new()), |acc, r| if r.0 > acc.0 { r } else { acc });
    if qv == 2.0 {
        let lmax = hermitian_eigenvalues(gram_matrix(seq))?.into_iter().fold(f64::MIN, f64::max);
        return Ok(CarlesonEstimate {
            q,
            constant: lmax.max(0.0).sqrt(),
            method: CarlesonMethod::GramSpectral,
            certificate,
            lower_bound,
        });
    }
    Ok(CarlesonEstimate {
        q,
        constant: lower_bound,
        method: CarlesonMethod::PowerIteration { restarts: opts.restarts, seed: opts.seed },
        certificate,
        lower_bound,
    })
}

/// Least `D` found with `‖Σ ν_a |k_{q,a}|²‖_{q/2} ≤ D ‖ν‖_{q/2}` over
/// `ν ≥ 0`.
pub fn weak_carleson_constant(
    seq: &PointSequence,
    q: Exponent,
    rule: &QuadratureRule,
    opts: &CarlesonOptions,
) -> Result<WeakCarlesonEstimate> {
    if q.value() < 2.0 || q.is_infinite() {
        return Err(Error::param(format!("weak Carleson constants need 2 <= q < inf, got {q}")));
    }
    let n = seq.len();
    let r = 0.5 * q.value();
    let cols: Vec<Vec<f64>> = Columns::new(seq, q, rule)
        .cols
        .into_iter()
        .map(|c| {
            c.iter().enumerate().map(|(j, v)| v.norm_sqr() * rule.weight(j).powf(1.0 / r - 2.0 / q.value())).collect()
        })
        .collect();
    let nodes = rule.len();
    let apply = |x: &[f64]| -> Vec<f64> {
        (0..nodes).into_par_iter().map(|j| cols.iter().zip(x).map(|(c, x)| c[j] * x).sum()).collect()
    };
    let lr = |x: &[f64], r: f64| x.iter().map(|v| v.powf(r)).sum::<f64>().powf(1.0 / r);
    if r == 1.0 {
        let (best, value) =
            (0..n)
                .map(|a| (a, sum::pairwise(&cols[a])))
                .fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        let mut cert = vec![0.0; n];
        cert[best] = 1.0;
        return Ok(WeakCarlesonEstimate { q, constant: value, method: CarlesonMethod::Vertex, certificate: cert });
    }
    let rc = r / (r - 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut inits: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| f64::from(u8::from(a == b))).collect()).collect();
    inits.push(vec![1.0; n]);
    for _ in 0..opts.restarts {
        inits.push((0..n).map(|_| rng.gen_range(0.0..1.0)).collect());
    }
    let runs: Vec<(f64, Vec<f64>)> = inits
        .into_par_iter()
        .map(|x0| {
            let norm = lr(&x0, r);
            let mut x: Vec<f64> = x0.iter().map(|v| v / norm).collect();
            let mut ratio = lr(&apply(&x), r);
            for _ in 0..opts.max_iter {
                let y: Vec<f64> = apply(&x).into_iter().map(|v| v.powf(r - 1.0)).collect();
                let v: Vec<f64> = cols.iter().map(|c| sum::par_sum(nodes, |j| c[j] * y[j])).collect();
                let mut next: Vec<f64> = v.iter().map(|v| v.powf(rc - 1.0)).collect();
                let nn = lr(&next, r);
                next.iter_mut().for_each(|v| *v /= nn);
                let nr = lr(&apply(&next), r);
                let done = nr <= ratio * (1.0 + opts.tol);
                if nr > ratio {
                    x = next;
                    ratio = nr;
                }
                if done {
                    break;
                }
            }
            (ratio, x)
        })
        .collect();
    let (constant, certificate) =
        runs.into_iter().fold((f64::MIN, Vec::new()), |acc, r| if r.0 > acc.0 { r } else { acc });
    Ok(WeakCarlesonEstimate {
        q,
        constant,
        method: CarlesonMethod::PowerIteration { restarts: opts.restarts, seed: opts.seed },
        certificate,
    })
}

/// Strong and (for `q ≥ 2`) weak Carleson estimates.
pub fn carleson_report(
    seq: &PointSequence,
    q: Exponent,
    rule: &QuadratureRule,
    opts: &CarlesonOptions,
) -> Result<CarlesonReport> {
    let strong = carleson_constant(seq, q, rule, opts)?;
    let weak = if q.value() >= 2.0 { Some(weak_carleson_constant(seq, q, rule, opts)?) } else { None };
    Ok(CarlesonReport { q, strong, weak })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMethod {
    Gram2,
    Collocation,
    Blaschke,
    /// `ρ_a k_a`, lifted from an `H^∞` dual system.
    Lifted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualOptions {
    pub tikhonov: bool,
    pub max_condition: f64,
}

impl Default for DualOptions {
    fn default() -> Self {
        DualOptions { tikhonov: false, max_condition: 1e12 }
    }
}

/// Functions `ρ_a` with `ρ_a(b) = δ_ab n_b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSystem {
    pub method: DualMethod,
    pub exponent: Exponent,
    pub domain: Domain,
    pub points: Vec<InteriorPoint>,
    /// `n_b`: `‖k_b‖_{p'}` for finite `p`, `1` for `H^∞` systems.
    pub normalization: Vec<f64>,
    /// Rows of `X` with `ρ_a = Σ_c X[a,c] k_c`, for collocation systems.
    pub coefficients: Option<Vec<Vec<Complex64>>>,
    pub duals: Vec<HoloExpr>,
    pub condition: Option<f64>,
    pub regularization: Option<f64>,
    /// `max_{a,b} |ρ_a(b) − δ_ab n_b| / n_b`, measured after construction.
    pub delta_residual: f64,
}

impl DualSystem {
    pub fn len(&self) -> usize {
        self.duals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.duals.is_empty()
    }

    pub fn dual(&self, a: usize) -> &HoloExpr {
        &self.duals[a]
    }

    fn measure_delta(&mut self) {
        let mut worst: f64 = 0.0;
        for (a, rho) in self.duals.iter().enumerate() {
            for (b, pt) in self.points.iter().enumerate() {
                let target = if a == b { self.normalization[b] } else { 0.0 };
                worst = worst.max((rho.eval(pt.coords()) - target).norm() / self.normalization[b]);
            }
        }
        self.delta_residual = worst;
    }

    /// `ρ_{p,a} = ρ_a k_a · ‖k_a‖_{p'} / (n_a k_a(a))`, exact duals for a
    /// finite `p` built from any system.
    pub fn lift(&self, p: Exponent, rule: &QuadratureRule) -> Result<DualSystem> {
        if p.is_infinite() {
            return Err(Error::param("lifting targets a finite exponent"));
        }
        let normalization = dual_normalization(self.domain, &self.points, p, rule);
        let duals = self
            .duals
            .iter()
            .zip(&self.points)
            .enumerate()
            .map(|(a, (rho, pt))| {
                let scale = normalization[a] / (self.normalization[a] * kernel_at_self(self.domain, pt));
                rho.mul(&HoloExpr::kernel(self.domain, pt.coords(), Complex64::new(scale, 0.0)))
            })
            .collect();
        let mut out = DualSystem {
            method: DualMethod::Lifted,
            exponent: p,
            domain: self.domain,
            points: self.points.clone(),
            normalization,
            coefficients: None,
            duals,
            condition: None,
            regularization: None,
            delta_residual: 0.0,
        };
        out.measure_delta();
        Ok(out)
    }
}

/// `‖k_a‖_{p'}` for finite `p` (closed-form sup for `p = 1`), `1` for `p = ∞`.
pub fn dual_normalization(domain: Domain, points: &[InteriorPoint], p: Exponent, rule: &QuadratureRule) -> Vec<f64> {
    points.iter().map(|a| if p.is_infinite() { 1.0 } else { kernel_norm_sharp(domain, a, p.conj(), rule) }).collect()
}

/// Collocation dual system in `span{k_c}` with right-hand side `n_a e_a`.
pub fn dual_system_collocation(
    seq: &PointSequence,
    p: Exponent,
    rule: &QuadratureRule,
    opts: &DualOptions,
) -> Result<DualSystem> {
    let method = if p.value() == 2.0 { DualMethod::Gram2 } else { DualMethod::Collocation };
    let normalization = dual_normalization(seq.domain(), seq.points(), p, rule);
    collocate(seq, p, method, normalization, opts)
}

/// `p = 2` collocation dual system.
pub fn dual_system_gram(seq: &PointSequence, rule: &QuadratureRule, opts: &DualOptions) -> Result<DualSystem> {
    dual_system_collocation(seq, Exponent::TWO, rule, opts)
}

fn collocate(
    seq: &PointSequence,
    p: Exponent,
    method: DualMethod,
    normalization: Vec<f64>,
    opts: &DualOptions,
) -> Result<DualSystem> {
    let d = seq.domain();
    let pts = seq.points();
    let n = pts.len();
    let conj: Vec<Vec<Complex64>> = pts.iter().map(|p| p.coords().iter().map(|c| c.conj()).collect()).collect();
    let k = DMatrix::from_fn(n, n, |b, c| kernel_with_conj(d, &conj[c], pts[b].coords()));
    let eig = hermitian_eigenvalues(k.clone())?;
    let lmax = eig.iter().copied().fold(f64::MIN, f64::max);
    let lmin = eig.iter().copied().fold(f64::MAX, f64::min);
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    let mut regularization = None;
    let mut system = k;
    if condition > opts.max_condition {
        if !opts.tikhonov {
            return Err(Error::IllConditioned { condition });
        }
        let eps = 1e-12 * system.trace().re;
        for i in 0..n {
            system[(i, i)] += eps;
        }
        regularization = Some(eps);
    }
    let rhs = DMatrix::from_fn(n, n, |c, a| if c == a { Complex64::new(normalization[a], 0.0) } else { ZERO });
    let sol = match system.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => system.lu().solve(&rhs).ok_or_else(|| Error::Numeric("collocation matrix is singular".into()))?,
    };
    let coefficients: Vec<Vec<Complex64>> = (0..n).map(|a| (0..n).map(|c| sol[(c, a)]).collect()).collect();
    let duals = coefficients
        .iter()
        .map(|row| {
            let terms = row
                .iter()
                .zip(pts)
                .map(|(&coeff, pt)| Term { coeff, factors: vec![Factor::kernel(pt.coords())] })
                .collect();
            HoloExpr::from_terms(d, terms)
        })
        .collect::<Result<_>>()?;
    let mut out = DualSystem {
        method,
        exponent: p,
        domain: d,
        points: pts.to_vec(),
        normalization,
        coefficients: Some(coefficients),
        duals,
        condition: Some(condition),
        regularization,
        delta_residual: 0.0,
    };
    out.measure_delta();
    Ok(out)
}

/// `ρ_a = n_a Π_{b≠a} φ_b(z)/φ_b(a)` on the disc.
pub fn dual_system_blaschke(seq: &PointSequence, p: Exponent, rule: &QuadratureRule) -> Result<DualSystem> {
    if seq.domain() != Domain::UnitDisc {
        return Err(Error::Unsupported("Blaschke dual systems exist on the disc only".into()));
    }
    let zs: Vec<Complex64> = seq.points().iter().map(|p| p.coords()[0]).collect();
    let normalization = dual_normalization(Domain::UnitDisc, seq.points(), p, rule);
    let duals = zs
        .iter()
        .enumerate()
        .map(|(a, &za)| {
            let zeros: Vec<Complex64> = zs.iter().enumerate().filter(|&(b, _)| b != a).map(|(_, &z)| z).collect();
            let factor = Factor::blaschke_quotient(zeros, za)?;
            HoloExpr::from_terms(
                Domain::UnitDisc,
                vec![Term { coeff: Complex64::new(normalization[a], 0.0), factors: vec![factor] }],
            )
        })
        .collect::<Result<_>>()?;
    let mut out = DualSystem {
        method: DualMethod::Blaschke,
        exponent: p,
        domain: Domain::UnitDisc,
        points: seq.points().to_vec(),
        normalization,
        coefficients: None,
        duals,
        condition: None,
        regularization: None,
        delta_residual: 0.0,
    };
    out.measure_delta();
    Ok(out)
}

/// `max_a n_a / |B_a(a)|`: the exact sup of the Blaschke duals.
pub fn blaschke_dual_sup(system: &DualSystem) -> Result<f64> {
    if system.method != DualMethod::Blaschke {
        return Err(Error::param("closed-form sup applies to Blaschke systems"));
    }
    let zs: Vec<Complex64> = system.points.iter().map(|p| p.coords()[0]).collect();
    Ok((0..zs.len())
        .map(|a| {
            let b: f64 = (0..zs.len()).filter(|&b| b != a).map(|b| blaschke_factor(zs[b], zs[a]).norm()).product();
            system.normalization[a] / b
        })
        .fold(0.0, f64::max))
}

/// `max_a ‖ρ_a‖_p` by quadrature (sampled max for `p = ∞`).
pub fn dual_bound(system: &DualSystem, p: Exponent, rule: &QuadratureRule) -> Result<f64> {
    if rule.support() != system.domain.support() {
        return Err(Error::Shape("quadrature rule does not match the dual system domain".into()));
    }
    Ok(system
        .duals
        .par_iter()
        .map(|rho| lp_norm_values(rule, rho.samples(rule).values(), p))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_quadrature;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn disc(pts: &[f64]) -> PointSequence {
        PointSequence::from_disc(&pts.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn sequence_validation() {
        assert!(PointSequence::from_disc(&[]).is_err());
        assert!(PointSequence::from_disc(&[c(0.1, 0.0), c(0.1, 0.0)]).is_err());
        assert!(PointSequence::from_disc(&[c(1.0, 0.0)]).is_err());
        assert!(PointSequence::from_coords(Domain::UnitBall2, vec![vec![c(0.8, 0.0), c(0.7, 0.0)]]).is_err());
    }

    #[test]
    fn csv_and_json_ingestion() {
        let s = PointSequence::from_csv(Domain::Bidisc, "re1,im1,re2,im2\n0.1,0.2,0.3,0\n-0.5, 0, 0, 0.5\n".as_bytes())
            .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.points()[1].coords()[1], c(0.0, 0.5));
        assert!(PointSequence::from_csv(Domain::UnitDisc, "0.1,0.2,0.3\n".as_bytes()).is_err());
        let j = PointSequence::from_json(r#"{"domain":"unit_disc","points":[[[0.5,0.0]],[[0.0,-0.25]]]}"#).unwrap();
        assert_eq!(j.points()[1].coords()[0], c(0.0, -0.25));
        assert!(PointSequence::from_json(r#"{"domain":"unit_disc","points":[[[1.5,0.0]]]}"#).is_err());
        let round: PointSequence = serde_json::from_str(&serde_json::to_string(&j).unwrap()).unwrap();
        assert_eq!(round, j);
    }

    #[test]
    fn gleason_examples() {
        let a = InteriorPoint::real(0.0).unwrap();
        let b = InteriorPoint::real(0.5).unwrap();
        assert_eq!(gleason_distance(Domain::UnitDisc, &b, &b), 0.0);
        assert!((gleason_distance(Domain::UnitDisc, &a, &b) - 0.5).abs() < 1e-15);
        let a = InteriorPoint::new(Domain::UnitBall2, vec![c(0.5, 0.0), c(0.0, 0.0)]).unwrap();
        let b = InteriorPoint::new(Domain::UnitBall2, vec![c(0.0, 0.0), c(0.5, 0.0)]).unwrap();
        assert!((gleason_distance(Domain::UnitBall2, &a, &b) - (1.0f64 - 0.5625).sqrt()).abs() < 1e-15);
        let a = InteriorPoint::new(Domain::Bidisc, vec![c(0.5, 0.0), c(0.0, 0.0)]).unwrap();
        let b = InteriorPoint::new(Domain::Bidisc, vec![c(0.0, 0.0), c(0.2, 0.0)]).unwrap();
        assert!((gleason_distance(Domain::Bidisc, &a, &b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_delta_examples() {
        assert_eq!(gleason_product_delta(&disc(&[0.3])), 1.0);
        assert!((gleason_product_delta(&disc(&[0.0, 0.5])) - 0.5).abs() < 1e-15);
        // products: 0 -> 0.25, 0.5 -> 0.5·0.8, -0.5 -> 0.5·0.8
        assert!((gleason_product_delta(&disc(&[0.0, 0.5, -0.5])) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn window_examples() {
        let w = carleson_window_constant(&disc(&[0.5])).unwrap();
        assert!((w.constant - 1.5).abs() < 1e-15);
        assert_eq!(w.ell, 0.5);
        let radial: Vec<f64> = (1..=6).map(|k| 1.0 - 0.5f64.powi(k)).collect();
        let w = carleson_window_constant(&disc(&radial)).unwrap();
        // window ℓ = 2^{-j} holds points k ≥ j, mass Σ_{k≥j} 2^{-k}(2 - 2^{-k})
        let oracle = (0..=7)
            .map(|j| {
                let ell = 0.5f64.powi(j);
                (1..=6).filter(|&k| k >= j).map(|k| 0.5f64.powi(k) * (2.0 - 0.5f64.powi(k))).sum::<f64>() / ell
            })
            .fold(0.0, f64::max);
        assert!((w.constant - oracle).abs() < 1e-13);
        let ball = PointSequence::new(Domain::UnitBall2, vec![InteriorPoint::origin(Domain::UnitBall2)]).unwrap();
        assert!(matches!(carleson_window_constant(&ball), Err(Error::Unsupported(_))));
    }

    #[test]
    fn carleson_single_point() {
        let rule = build_quadrature(Domain::UnitDisc, 256).unwrap();
        let s = disc(&[0.6]);
        for q in [1.0, 2.0, 4.0] {
            let e = carleson_constant(&s, Exponent::new(q).unwrap(), &rule, &CarlesonOptions::default()).unwrap();
            assert!((e.constant - 1.0).abs() < 1e-12, "q={q}: {}", e.constant);
        }
        let w = weak_carleson_constant(&s, Exponent::new(4.0).unwrap(), &rule, &CarlesonOptions::default()).unwrap();
        assert!((w.constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn carleson_gram_two_points() {
        let rule = build_quadrature(Domain::UnitDisc, 1024).unwrap();
        let e = carleson_constant(&disc(&[0.9, -0.9]), Exponent::TWO, &rule, &CarlesonOptions::default()).unwrap();
        let oracle = (1.0 + 0.19 / 1.81f64).sqrt();
        assert!((e.constant - oracle).abs() < 1e-13);
        assert!(e.lower_bound <= e.constant + 1e-8 && e.lower_bound >= e.constant - 1e-8);
        assert_eq!(e.method, CarlesonMethod::GramSpectral);
    }

    #[test]
    fn carleson_q1_bounded_by_one() {
        let rule = build_quadrature(Domain::UnitDisc, 512).unwrap();
        let e = carleson_constant(&disc(&[0.2, 0.5, -0.7]), Exponent::ONE, &rule, &CarlesonOptions::default()).unwrap();
        assert!(e.constant <= 1.0 + 1e-10);
    }

    #[test]
    fn certificate_reproduces_estimate() {
        let rule = build_quadrature(Domain::UnitDisc, 512).unwrap();
        let s = disc(&[0.8, -0.8]);
        let q = Exponent::new(4.0).unwrap();
        let e = carleson_constant(&s, q, &rule, &CarlesonOptions::default()).unwrap();
        let r = carleson_ratio(&s, q, &e.certificate, &rule).unwrap();
        assert!((r - e.constant).abs() < 1e-12);
    }

    #[test]
    fn weak_q4_against_grid() {
        let rule = build_quadrature(Domain::UnitDisc, 512).unwrap();
        let s = disc(&[0.9, -0.9]);
        let q = Exponent::new(4.0).unwrap();
        let w = weak_carleson_constant(&s, q, &rule, &CarlesonOptions::default()).unwrap();
        // ν on the ℓ² quarter circle
        let k: Vec<Vec<f64>> = s
            .points()
            .iter()
            .map(|a| {
                let v = kernel_samples(Domain::UnitDisc, a, &rule);
                let n = lp_norm_values(&rule, v.values(), q);
                v.values().iter().map(|x| (x / n).norm_sqr()).collect()
            })
            .collect();
        let grid = (0..=2000)
            .map(|i| {
                let t = 0.5 * PI * i as f64 / 2000.0;
                let (a, b) = (t.cos(), t.sin());
                let s: f64 = (0..rule.len()).map(|j| rule.weight(j) * (a * k[0][j] + b * k[1][j]).powi(2)).sum();
                s.sqrt()
            })
            .fold(0.0, f64::max);
        assert!(w.constant >= grid - 1e-9);
        assert!(w.constant <= grid * (1.0 + 1e-6));
    }

    #[test]
    fn weak_q2_at_most_one() {
        let rule = build_quadrature(Domain::UnitDisc, 512).unwrap();
        let w = weak_carleson_constant(&disc(&[0.1, 0.5, 0.55]), Exponent::TWO, &rule, &CarlesonOptions::default())
            .unwrap();
        assert!(w.constant <= 1.0 + 1e-10);
        assert!(weak_carleson_constant(&disc(&[0.1]), Exponent::new(1.5).unwrap(), &rule, &CarlesonOptions::default())
            .is_err());
    }

    #[test]
    fn gram_dual_two_points() {
        let rule = build_quadrature(Domain::UnitDisc, 256).unwrap();
        let d = dual_system_gram(&disc(&[0.0, 0.5]), &rule, &DualOptions::default()).unwrap();
        assert!(d.dual(0).eval(&[c(0.5, 0.0)]).norm() < 1e-14);
        assert!((d.dual(0).eval(&[c(0.0, 0.0)]) - 1.0).norm() < 1e-14);
        // K = [[1, 1], [1, 4/3]], K x = e_0 → x = (4, -3)
        let x = &d.coefficients.as_ref().unwrap()[0];
        assert!((x[0] - 4.0).norm() < 1e-12 && (x[1] + 3.0).norm() < 1e-12);
        assert!(d.delta_residual < 1e-12);
    }

    #[test]
    fn collocation_single_point() {
        let rule = build_quadrature(Domain::UnitDisc, 512).unwrap();
        let s = disc(&[0.4]);
        let p = Exponent::new(3.0).unwrap();
        let d = dual_system_collocation(&s, p, &rule, &DualOptions::default()).unwrap();
        let n = kernel_samples(Domain::UnitDisc, &s.points()[0], &rule);
        let expect = lp_norm_values(&rule, n.values(), p.conj());
        assert!((d.dual(0).eval(&[c(0.4, 0.0)]).re - expect).abs() < 1e-13);
        let g = dual_system_gram(&s, &rule, &DualOptions::default()).unwrap();
        let b = dual_bound(&g, Exponent::TWO, &rule).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collocation_p4_delta() {
        let rule = build_quadrature(Domain::UnitDisc, 512).unwrap();
        let d =
            dual_system_collocation(&disc(&[0.3, 0.6]), Exponent::new(4.0).unwrap(), &rule, &DualOptions::default())
                .unwrap();
        assert!(d.delta_residual < 1e-9);
        assert_eq!(d.method, DualMethod::Collocation);
    }

    #[test]
    fn ill_conditioned_needs_regularization() {
        let rule = build_quadrature(Domain::UnitDisc, 64).unwrap();
        let s = disc(&[0.5, 0.5 + 1e-9]);
        assert!(matches!(dual_system_gram(&s, &rule, &DualOptions::default()), Err(Error::IllConditioned { .. })));
        let d = dual_system_gram(&s, &rule, &DualOptions { tikhonov: true, ..Default::default() }).unwrap();
        assert!(d.regularization.is_some());
        assert!(d.delta_residual.is_finite());
    }

    #[test]
    fn blaschke_examples() {
        let rule = build_quadrature(Domain::UnitDisc, 4096).unwrap();
        let s = disc(&[0.0, 0.5]);
        let d = dual_system_blaschke(&s, Exponent::INFINITY, &rule).unwrap();
        assert!(d.delta_residual < 1e-14);
        assert!((blaschke_dual_sup(&d).unwrap() - 2.0).abs() < 1e-14);
        let b = dual_bound(&d, Exponent::INFINITY, &rule).unwrap();
        assert!(b <= 2.0 + 1e-12 && b > 2.0 - 1e-5);
        let one = dual_system_blaschke(&disc(&[0.3]), Exponent::TWO, &rule).unwrap();
        let n = 1.0 / (1.0f64 - 0.09).sqrt();
        assert!((one.dual(0).eval(&[c(-0.7, 0.2)]).re - n).abs() < 1e-12);
        let d2 = dual_system_blaschke(&disc(&[0.2, -0.6, 0.7]), Exponent::new(3.0).unwrap(), &rule).unwrap();
        let bound = dual_bound(&d2, Exponent::INFINITY, &rule).unwrap();
        assert!((bound - blaschke_dual_sup(&d2).unwrap()).abs() < 1e-6 * bound);
    }

    #[test]
    fn lifted_duals_interpolate() {
        let rule = build_quadrature(Domain::UnitDisc, 1024).unwrap();
        let s = disc(&[0.0, 0.5, -0.4]);
        let inf = dual_system_blaschke(&s, Exponent::INFINITY, &rule).unwrap();
        let lifted = inf.lift(Exponent::new(4.0).unwrap(), &rule).unwrap();
        assert!(lifted.delta_residual < 1e-13);
        assert_eq!(lifted.method, DualMethod::Lifted);
    }

    #[test]
    fn ball_and_bidisc_duals() {
        for (domain, res) in [(Domain::UnitBall2, 32), (Domain::Bidisc, 32)] {
            let rule = build_quadrature(domain, res).unwrap();
            let s = PointSequence::from_coords(
                domain,
                vec![vec![c(0.3, 0.0), c(0.0, 0.2)], vec![c(-0.2, 0.1), c(0.4, 0.0)], vec![c(0.0, 0.0), c(0.0, -0.5)]],
            )
            .unwrap();
            let d = dual_system_collocation(&s, Exponent::new(1.5).unwrap(), &rule, &DualOptions::default()).unwrap();
            assert!(d.delta_residual < 1e-10, "{domain}: {}", d.delta_residual);
        }
    }
}
