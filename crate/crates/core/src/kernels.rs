//! Szegő kernels of the three domains, their `L^p` norms, the Poisson
//! kernel, and scans of the reverse-Hölder kernel-norm constants.
//!
//! * disc: `k_a(z) = (1 - āz)^{-1}`
//! * ball of `ℂ²`: `k_a(z) = (1 - ⟨z, a⟩)^{-2}`
//! * bidisc: `k_a(z) = Π_j (1 - ā_j z_j)^{-1}`
//!
//! The interpolation targets attached to a point `a` are `λ_a ‖k_a‖_{p'}`.
//! The alternative normalization `λ_a (1 - |a|²)^{n/p}` seen in some
//! statements of the problem is not used anywhere in this crate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::geometry::{
    self, inner_product, lp_norm_values, BoundarySamples, Convergence, Domain, InteriorPoint, QuadratureRule,
    RefineOptions,
};
use crate::sum;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Kernel with `conj_a = ā` precomputed. `z` may be interior or on the
/// boundary.
#[inline]
pub(crate) fn kernel_with_conj(domain: Domain, conj_a: &[Complex64], z: &[Complex64]) -> Complex64 {
    match domain {
        Domain::UnitDisc => {
            let d = ONE - conj_a[0] * z[0];
            debug_assert!(d.re > 0.0, "kernel branch crossing");
            d.inv()
        }
        Domain::UnitBall2 => {
            let d = ONE - conj_a[0] * z[0] - conj_a[1] * z[1];
            debug_assert!(d.re > 0.0, "kernel branch crossing");
            let w = d.inv();
            w * w
        }
        Domain::Bidisc => {
            let d = (ONE - conj_a[0] * z[0]) * (ONE - conj_a[1] * z[1]);
            d.inv()
        }
    }
}

fn conj_coords(a: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|c| c.conj()).collect()
}

/// `k_a(z)`, validating that `a` is interior.
pub fn kernel_eval(domain: Domain, a: &[Complex64], z: &[Complex64]) -> Result<Complex64> {
    if !domain.contains(a) {
        return Err(Error::Domain(format!("kernel base {a:?} is not interior to {domain}")));
    }
    if z.len() != domain.dim() {
        return Err(Error::Shape(format!("evaluation point has {} coordinates", z.len())));
    }
    let d_re = match domain {
        Domain::UnitDisc | Domain::UnitBall2 => 1.0 - a.iter().zip(z).map(|(a, z)| (a.conj() * z).re).sum::<f64>(),
        Domain::Bidisc => a.iter().zip(z).map(|(a, z)| 1.0 - (a.conj() * z).re).fold(f64::INFINITY, f64::min),
    };
    if d_re <= 0.0 {
        return Err(Error::Domain(format!("evaluation point {z:?} outside the closed domain")));
    }
    Ok(kernel_with_conj(domain, &conj_coords(a), z))
}

/// `k_a(a) = ‖k_a‖₂²`, closed form.
pub fn kernel_at_self(domain: Domain, a: &InteriorPoint) -> f64 {
    let z = a.coords();
    match domain {
        Domain::UnitDisc => 1.0 / (1.0 - z[0].norm_sqr()),
        Domain::UnitBall2 => (1.0 - a.norm().powi(2)).powi(-2),
        Domain::Bidisc => z.iter().map(|c| 1.0 / (1.0 - c.norm_sqr())).product(),
    }
}

/// `sup_{∂} |k_a|`, closed form (attained at `a/|a|`).
pub fn kernel_sup(domain: Domain, a: &InteriorPoint) -> f64 {
    let z = a.coords();
    match domain {
        Domain::UnitDisc => 1.0 / (1.0 - z[0].norm()),
        Domain::UnitBall2 => (1.0 - a.norm()).powi(-2),
        Domain::Bidisc => z.iter().map(|c| 1.0 / (1.0 - c.norm())).product(),
    }
}

pub fn kernel_samples<'r>(domain: Domain, a: &InteriorPoint, rule: &'r QuadratureRule) -> BoundarySamples<'r> {
    let conj = conj_coords(a.coords());
    rule.sample(|z| kernel_with_conj(domain, &conj, z))
}

/// `‖k_a‖_p` by quadrature (`p = ∞`: largest sampled modulus).
pub fn kernel_norm(domain: Domain, a: &InteriorPoint, p: Exponent, rule: &QuadratureRule) -> f64 {
    let s = kernel_samples(domain, a, rule);
    geometry::lp_norm(&s, p)
}

/// As [`kernel_norm`], but the sup norm comes from the closed form.
pub fn kernel_norm_sharp(domain: Domain, a: &InteriorPoint, p: Exponent, rule: &QuadratureRule) -> f64 {
    if p.is_infinite() {
        kernel_sup(domain, a)
    } else {
        kernel_norm(domain, a, p, rule)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub p: Exponent,
    pub norm: f64,
}

/// Cached kernel norms at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    pub domain: Domain,
    pub point: InteriorPoint,
    /// `k_a(a)`, closed form.
    pub kernel_at_self: f64,
    pub entries: Vec<NormEntry>,
    pub resolution: usize,
    /// Present when built adaptively.
    pub convergence: Option<Convergence>,
}

fn same_exponent(a: Exponent, b: Exponent) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a.is_infinite() && b.is_infinite();
    }
    (a.value() - b.value()).abs() <= 1e-12 * a.value()
}

fn dedup_exponents(exps: &[Exponent]) -> Vec<Exponent> {
    let mut out: Vec<Exponent> = Vec::new();
    for &p in exps {
        if !out.iter().any(|&q| same_exponent(p, q)) {
            out.push(p);
        }
    }
    out.sort_by(|a, b| a.value().total_cmp(&b.value()));
    out
}

impl NormTable {
    /// Norms for every exponent in `exps` from one set of kernel samples.
    pub fn build(domain: Domain, a: &InteriorPoint, exps: &[Exponent], rule: &QuadratureRule) -> Self {
        let samples = kernel_samples(domain, a, rule);
        let entries = dedup_exponents(exps)
            .into_iter()
            .map(|p| NormEntry { p, norm: lp_norm_values(rule, samples.values(), p) })
            .collect();
        NormTable {
            domain,
            point: a.clone(),
            kernel_at_self: kernel_at_self(domain, a),
            entries,
            resolution: rule.resolution(),
            convergence: None,
        }
    }

    /// As [`NormTable::build`], doubling the resolution until every finite
    /// norm is stable. Sup norms are excluded from the stopping test: the
    /// sampled maximum is a lower bound that converges only algebraically.
    pub fn build_adaptive(domain: Domain, a: &InteriorPoint, exps: &[Exponent], opts: RefineOptions) -> Result<Self> {
        let (mut table, conv) = geometry::refine(domain, opts, |rule| {
            let t = NormTable::build(domain, a, exps, rule);
            let probe = t.entries.iter().filter(|e| !e.p.is_infinite()).map(|e| e.norm).collect();
            Ok((t, probe))
        })?;
        table.convergence = Some(conv);
        Ok(table)
    }

    pub fn get(&self, p: Exponent) -> Result<f64> {
        self.entries
            .iter()
            .find(|e| same_exponent(e.p, p))
            .map(|e| e.norm)
            .ok_or_else(|| Error::Dependency(format!("‖k_a‖_{p} not in the norm table")))
    }

    /// `ω_q(a) = ‖k_a‖_{2q}^{-2q}`.
    pub fn omega(&self, q: Exponent) -> Result<f64> {
        let two_q = q.scale(2.0)?;
        Ok(self.get(two_q)?.powf(-two_q.value()))
    }

    /// `k_{q,a}(a) = k_a(a) / ‖k_a‖_q`.
    pub fn normalized_at_self(&self, q: Exponent) -> Result<f64> {
        Ok(self.kernel_at_self / self.get(q)?)
    }
}

/// `|⟨f, k_a⟩ − f(a)|` for a holomorphic polynomial `f`.
pub fn reproducing_check<F>(domain: Domain, f: F, a: &InteriorPoint, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    let fs = rule.sample(&f);
    let k = kernel_samples(domain, a, rule);
    Ok((inner_product(&fs, &k)? - f(a.coords())).norm())
}

/// `P_a = |k_a|² / k_a(a)` sampled on the rule.
pub fn poisson_kernel<'r>(domain: Domain, a: &InteriorPoint, rule: &'r QuadratureRule) -> BoundarySamples<'r> {
    let norm2 = kernel_at_self(domain, a);
    kernel_samples(domain, a, rule).map(|k| Complex64::new(k.norm_sqr() / norm2, 0.0))
}

/// `f*(a) = ⟨f, k_a⟩`, the analytic projection of boundary data evaluated at `a`.
pub fn analytic_projection_eval(domain: Domain, f: &BoundarySamples<'_>, a: &InteriorPoint) -> Result<Complex64> {
    let k = kernel_samples(domain, a, f.rule());
    inner_product(f, &k)
}

/// Which structural inequality a scan measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hypothesis {
    /// `‖k_a‖₂² ≥ α ‖k_a‖_q ‖k_a‖_{q'}`; ratio `‖k_a‖₂² / (‖k_a‖_q ‖k_a‖_{q'})`.
    Sh { q: Exponent },
    /// `‖k_a‖_{s'} ≤ β ‖k_a‖_{p'} ‖k_a‖_{q'}`; ratio `‖k_a‖_{s'} / (‖k_a‖_{p'} ‖k_a‖_{q'})`.
    ShPs { p: Exponent, s: Exponent, q: Exponent },
}

impl Hypothesis {
    pub fn label(&self) -> String {
        match self {
            Hypothesis::Sh { q } => format!("SH(q={q})"),
            Hypothesis::ShPs { p, s, .. } => format!("SH(p={p},s={s})"),
        }
    }

    fn exponents(&self) -> Vec<Exponent> {
        match *self {
            Hypothesis::Sh { q } => vec![Exponent::TWO, q, q.conj()],
            Hypothesis::ShPs { p, s, q } => vec![s.conj(), p.conj(), q.conj()],
        }
    }

    fn ratio(&self, t: &NormTable) -> Result<f64> {
        match *self {
            Hypothesis::Sh { q } => Ok(t.get(Exponent::TWO)?.powi(2) / (t.get(q)? * t.get(q.conj())?)),
            Hypothesis::ShPs { p, s, q } => Ok(t.get(s.conj())? / (t.get(p.conj())? * t.get(q.conj())?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShPoint {
    pub point: InteriorPoint,
    pub ratio: f64,
    pub convergence: Convergence,
}

/// Per-point ratios of one structural inequality over a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShScan {
    pub domain: Domain,
    pub hypothesis: Hypothesis,
    pub points: Vec<ShPoint>,
    /// Points whose quadrature did not converge; excluded from `extreme`.
    pub flagged: Vec<ShPoint>,
    /// `min` of the ratios for `Sh`, `max` for `ShPs`.
    pub extreme: f64,
    /// Largest convergence residual among the accepted points.
    pub max_residual: f64,
}

fn scan(domain: Domain, hypothesis: Hypothesis, grid: &[InteriorPoint], opts: RefineOptions) -> Result<ShScan> {
    if grid.is_empty() {
        return Err(Error::param("empty scan grid"));
    }
    let exps = hypothesis.exponents();
    let mut points = Vec::new();
    let mut flagged = Vec::new();
    for a in grid {
        if a.coords().len() != domain.dim() {
            return Err(Error::Shape("grid point dimension mismatch".into()));
        }
        let (ratio, convergence) = geometry::refine(domain, opts, |rule| {
            let t = NormTable::build(domain, a, &exps, rule);
            let r = hypothesis.ratio(&t)?;
            let probe = t.entries.iter().filter(|e| !e.p.is_infinite()).map(|e| e.norm).collect();
            Ok((r, probe))
        })?;
        let sp = ShPoint { point: a.clone(), ratio, convergence };
        if convergence.converged {
            points.push(sp);
        } else {
            flagged.push(sp);
        }
    }
    let ratios = points.iter().map(|p| p.ratio);
    let extreme = match hypothesis {
        Hypothesis::Sh { .. } => ratios.fold(f64::INFINITY, f64::min),
        Hypothesis::ShPs { .. } => ratios.fold(f64::NEG_INFINITY, f64::max),
    };
    let max_residual = points.iter().map(|p| p.convergence.residual).fold(0.0, f64::max);
    Ok(ShScan { domain, hypothesis, points, flagged, extreme, max_residual })
}

/// Estimate `α_q` as the smallest ratio `‖k_a‖₂² / (‖k_a‖_q ‖k_a‖_{q'})` on the grid.
pub fn sh_q_scan(domain: Domain, q: Exponent, grid: &[InteriorPoint], opts: RefineOptions) -> Result<ShScan> {
    if q.value() <= 1.0 || q.is_infinite() {
        return Err(Error::param(format!("SH(q) needs 1 < q < inf, got {q}")));
    }
    scan(domain, Hypothesis::Sh { q }, grid, opts)
}

/// Estimate `β_{p,s}` as the largest ratio `‖k_a‖_{s'} / (‖k_a‖_{p'} ‖k_a‖_{q'})`.
pub fn sh_ps_scan(
    domain: Domain,
    p: Exponent,
    s: Exponent,
    grid: &[InteriorPoint],
    opts: RefineOptions,
) -> Result<ShScan> {
    let q = crate::exponent::complementary(s, p)?;
    scan(domain, Hypothesis::ShPs { p, s, q }, grid, opts)
}

/// Empirical structural constants. Grid extrema, not true bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShConstants {
    pub q: Exponent,
    pub alpha: f64,
    pub p: Exponent,
    pub s: Exponent,
    pub beta: f64,
    pub alpha_scan: ShScan,
    pub beta_scan: ShScan,
}

impl ShConstants {
    pub fn from_scans(alpha_scan: ShScan, beta_scan: ShScan) -> Result<Self> {
        let (Hypothesis::Sh { q }, Hypothesis::ShPs { p, s, q: q2 }) = (alpha_scan.hypothesis, beta_scan.hypothesis)
        else {
            return Err(Error::Contract("expected an SH(q) scan and an SH(p,s) scan".into()));
        };
        if !same_exponent(q, q2) {
            return Err(Error::Contract(format!("SH(q) uses q = {q} but SH(p,s) implies q = {q2}")));
        }
        Ok(ShConstants { q, alpha: alpha_scan.extreme, p, s, beta: beta_scan.extreme, alpha_scan, beta_scan })
    }

    /// `α⁻¹β`, the bound on the extension coefficients.
    pub fn budget(&self) -> f64 {
        self.beta / self.alpha
    }
}

/// Points `r · u` for `r` equispaced in `[0, max_radius]`, along a fixed
/// generic unit direction `u` of the domain.
pub fn radial_grid(domain: Domain, max_radius: f64, count: usize) -> Result<Vec<InteriorPoint>> {
    let dir: Vec<Complex64> = match domain {
        Domain::UnitDisc => vec![ONE],
        Domain::UnitBall2 => vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)],
        Domain::Bidisc => vec![ONE, Complex64::new(0.0, 1.0)],
    };
    (0..count)
        .map(|i| {
            let r = if count == 1 { max_radius } else { max_radius * i as f64 / (count - 1) as f64 };
            InteriorPoint::new(domain, dir.iter().map(|d| d * r).collect())
        })
        .collect()
}

/// Two sides of an inequality `lhs ≤ rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Interpolation parameter of the exponents.
    pub theta: f64,
}

impl InequalityCheck {
    pub fn holds(&self, rel_slack: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + rel_slack)
    }
}

/// `θ` solving `1/p = (1-θ) + θ/q`.
fn interpolation_theta(p: Exponent, q: Exponent) -> Result<f64> {
    if p.value() > q.value() {
        return Err(Error::param(format!("need p <= q, got p = {p}, q = {q}")));
    }
    if same_exponent(p, q) {
        return Ok(1.0);
    }
    let theta = (1.0 - p.recip()) / (1.0 - q.recip());
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::param(format!("interpolation parameter {theta} outside [0, 1]")));
    }
    Ok(theta)
}

const INEQ_SLACK: f64 = 1e-10;

/// `‖k_a‖_{2p} ≤ ‖k_a‖₂^{1-θ} ‖k_a‖_{2q}^θ` with `1/p = (1-θ) + θ/q`.
pub fn holder_interp_check(
    domain: Domain,
    a: &InteriorPoint,
    p: Exponent,
    q: Exponent,
    rule: &QuadratureRule,
) -> Result<InequalityCheck> {
    let theta = interpolation_theta(p, q)?;
    let (two_p, two_q) = (p.scale(2.0)?, q.scale(2.0)?);
    let t = NormTable::build(domain, a, &[Exponent::TWO, two_p, two_q], rule);
    let lhs = t.get(two_p)?;
    let rhs = t.get(Exponent::TWO)?.powf(1.0 - theta) * t.get(two_q)?.powf(theta);
    let check = InequalityCheck { lhs, rhs, theta };
    if !check.holds(INEQ_SLACK) {
        return Err(Error::Invariant(format!("Hölder interpolation fails at {:?}: {lhs} > {rhs}", a.coords())));
    }
    Ok(check)
}

/// Weights for the interpolated operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightCheck {
    /// `ω'_p(a) = ‖k_a‖₂^{-2p(1-θ)} ‖k_a‖_{2q}^{-2pθ}`.
    pub omega_interpolated: f64,
    /// `ω_p(a) = ‖k_a‖_{2p}^{-2p}`.
    pub omega: f64,
    pub theta: f64,
}

/// Compare `ω'_p(a) ≤ ω_p(a)`, the kernel-norm Hölder inequality raised to
/// the power `-2p`.
pub fn stein_weiss_weight_check(
    domain: Domain,
    a: &InteriorPoint,
    p: Exponent,
    q: Exponent,
    rule: &QuadratureRule,
) -> Result<WeightCheck> {
    if p.value() <= 1.0 || p.value() >= q.value() {
        return Err(Error::param(format!("need 1 < p < q, got p = {p}, q = {q}")));
    }
    let theta = interpolation_theta(p, q)?;
    let (two_p, two_q) = (p.scale(2.0)?, q.scale(2.0)?);
    let t = NormTable::build(domain, a, &[Exponent::TWO, two_p, two_q], rule);
    let pv = p.value();
    let omega_interpolated =
        t.get(Exponent::TWO)?.powf(-2.0 * pv * (1.0 - theta)) * t.get(two_q)?.powf(-2.0 * pv * theta);
    let omega = t.get(two_p)?.powf(-2.0 * pv);
    if omega_interpolated > omega * (1.0 + INEQ_SLACK) {
        return Err(Error::Invariant(format!(
            "weight comparison fails at {:?}: {omega_interpolated} > {omega}",
            a.coords()
        )));
    }
    Ok(WeightCheck { omega_interpolated, omega, theta })
}

/// `∫ |k_a|^p dσ` with the `p`-th root left off, used for convergence probes.
pub fn kernel_power_integral(domain: Domain, a: &InteriorPoint, p: f64, rule: &QuadratureRule) -> f64 {
    let conj = conj_coords(a.coords());
    sum::par_sum(rule.len(), |j| {
        rule.weight(j) * kernel_with_conj(domain, &conj, rule.node(j)).norm_sqr().powf(0.5 * p)
    })
}
