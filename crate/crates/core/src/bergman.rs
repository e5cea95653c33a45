//! Bergman spaces of the ball through subordination: `f ∈ A^p_k(B_n)`
//! lifts to `f̃(z, w) = f(z)` in `H^p(B_{n+k+1})` with the same norm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::extension::{seq_norm, ExtensionOperator, ExtensionReport};
use crate::geometry::{
    ball_volume_rule, build_quadrature, lp_norm_values, sphere_rule, Convergence, Domain, QuadratureRule,
};
use crate::sequences::{dual_system_collocation, DualOptions, PointSequence};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Weighted Bergman space `A^p_k(B_n)` with its volume quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BergmanSpec {
    pub n: usize,
    pub weight: u32,
    pub gauss: usize,
    pub angular: usize,
}

impl BergmanSpec {
    pub fn new(n: usize, weight: u32, gauss: usize, angular: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("Bergman base dimension must be positive"));
        }
        if gauss == 0 || angular < 4 {
            return Err(Error::param("Bergman quadrature needs gauss >= 1 and angular >= 4"));
        }
        Ok(BergmanSpec { n, weight, gauss, angular })
    }

    /// Disc spec with `gauss = max(4, angular / 8)`.
    pub fn disc(weight: u32, angular: usize) -> Result<Self> {
        Self::new(1, weight, (angular / 8).max(4), angular)
    }

    /// Dimension of the ball carrying the lifted Hardy space.
    pub fn hardy_dim(&self) -> usize {
        self.n + self.weight as usize + 1
    }

    /// Normalized `(1-|z|²)^k dV` rule on `B_n`.
    pub fn volume_rule(&self) -> Result<QuadratureRule> {
        ball_volume_rule(self.n, self.weight, self.gauss, self.angular)
    }

    /// Sphere rule on `∂B_{n+k+1}` with the same Gauss order.
    pub fn hardy_rule(&self) -> Result<QuadratureRule> {
        sphere_rule(self.hardy_dim(), self.gauss, self.angular)
    }

    fn doubled(&self) -> Self {
        BergmanSpec { gauss: 2 * self.gauss, angular: 2 * self.angular, ..*self }
    }
}

/// `f̃(z, w) = f(z)` for `z ∈ ℂ^n`.
pub fn lift<F>(f: F, n: usize) -> impl Fn(&[Complex64]) -> Complex64
where
    F: Fn(&[Complex64]) -> Complex64,
{
    move |zw: &[Complex64]| f(&zw[..n])
}

/// `F(z, 0)` for `F` on `ℂ^{n+m}`.
pub fn restrict<F>(f: F, m: usize) -> impl Fn(&[Complex64]) -> Complex64
where
    F: Fn(&[Complex64]) -> Complex64,
{
    move |z: &[Complex64]| {
        let mut zw = z.to_vec();
        zw.extend(std::iter::repeat_n(ZERO, m));
        f(&zw)
    }
}

/// `‖f‖_{A^p_k(B_n)}` on the volume rule of `spec`.
pub fn bergman_norm<F>(f: F, p: Exponent, spec: &BergmanSpec) -> Result<f64>
where
    F: Fn(&[Complex64]) -> Complex64,
{
    let rule = spec.volume_rule()?;
    let values: Vec<Complex64> = rule.nodes().map(&f).collect();
    Ok(lp_norm_values(&rule, &values, p))
}

/// [`bergman_norm`] with Gauss order and angular resolution doubled until
/// the relative change drops below `rel_tol` or `angular` exceeds
/// `max_angular`; non-convergence is flagged, not an error.
pub fn bergman_norm_adaptive<F>(
    f: F,
    p: Exponent,
    spec: &BergmanSpec,
    max_angular: usize,
    rel_tol: f64,
) -> Result<(f64, Convergence)>
where
    F: Fn(&[Complex64]) -> Complex64,
{
    let mut cur = *spec;
    let mut value = bergman_norm(&f, p, &cur)?;
    let mut residual = f64::INFINITY;
    while cur.angular * 2 <= max_angular {
        let next = cur.doubled();
        let v = bergman_norm(&f, p, &next)?;
        residual = (v - value).abs() / v.abs().max(f64::MIN_POSITIVE);
        cur = next;
        value = v;
        if residual < rel_tol {
            break;
        }
    }
    Ok((
        value,
        Convergence {
            resolution: cur.angular,
            residual,
            converged: residual < rel_tol,
            max_resolution: max_angular,
            rel_tol,
        },
    ))
}

/// `‖f̃‖_{H^p(B_{n+k+1})}`.
pub fn lifted_hardy_norm<F>(f: F, p: Exponent, spec: &BergmanSpec) -> Result<f64>
where
    F: Fn(&[Complex64]) -> Complex64,
{
    let rule = spec.hardy_rule()?;
    let g = lift(f, spec.n);
    let values: Vec<Complex64> = rule.nodes().map(&g).collect();
    Ok(lp_norm_values(&rule, &values, p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubordinationCheck {
    pub bergman: f64,
    pub hardy: f64,
    pub residual: f64,
}

/// Relative gap between `‖f‖_{A^p_k}` and `‖f̃‖_{H^p(B_{n+k+1})}`.
pub fn subordination_check<F>(f: F, p: Exponent, spec: &BergmanSpec) -> Result<SubordinationCheck>
where
    F: Fn(&[Complex64]) -> Complex64,
{
    let bergman = bergman_norm(&f, p, spec)?;
    let hardy = lifted_hardy_norm(&f, p, spec)?;
    let residual = if bergman == 0.0 && hardy == 0.0 { 0.0 } else { (bergman - hardy).abs() / bergman.max(hardy) };
    Ok(SubordinationCheck { bergman, hardy, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictionCheck {
    /// `‖F(·, 0)‖_{A^p_k(B_n)}`.
    pub restricted: f64,
    /// `‖F‖_{H^p(B_{n+k+1})}`.
    pub full: f64,
    pub contracts: bool,
}

/// `‖F(·, 0)‖_{A^p_k} ≤ ‖F‖_{H^p(B_{n+k+1})}` for `F` on `ℂ^{n+k+1}`.
pub fn restriction_check<F>(f: F, p: Exponent, spec: &BergmanSpec) -> Result<RestrictionCheck>
where
    F: Fn(&[Complex64]) -> Complex64,
{
    let rule = spec.hardy_rule()?;
    let values: Vec<Complex64> = rule.nodes().map(&f).collect();
    let full = lp_norm_values(&rule, &values, p);
    let restricted = bergman_norm(restrict(&f, spec.hardy_dim() - spec.n), p, spec)?;
    Ok(RestrictionCheck { restricted, full, contracts: restricted <= full * (1.0 + 1e-8) })
}

/// `b_a(z) = (1-|a|²)^{(n+1)/p'} / (1 - ⟨z, a⟩)^{n+1}`.
pub fn bergman_kernel_eval(a: &[Complex64], z: &[Complex64], p: Exponent) -> Result<Complex64> {
    if a.len() != z.len() {
        return Err(Error::Shape("kernel base and point have different dimensions".into()));
    }
    let a2: f64 = a.iter().map(|c| c.norm_sqr()).sum();
    if a2 >= 1.0 {
        return Err(Error::Domain("Bergman kernel base must be interior".into()));
    }
    let n1 = (a.len() + 1) as i32;
    let ip: Complex64 = z.iter().zip(a).map(|(z, a)| z * a.conj()).sum();
    Ok(Complex64::new((1.0 - a2).powf(f64::from(n1) * p.conj().recip()), 0.0) / (1.0 - ip).powi(n1))
}

/// `‖(1 - ⟨·, a⟩)^{-(n+1)}‖_{A^r}` (sup in closed form).
fn unnormalized_kernel_norm(a: &[Complex64], r: Exponent, spec: &BergmanSpec) -> Result<f64> {
    let n1 = (a.len() + 1) as i32;
    if r.is_infinite() {
        let m = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        return Ok((1.0 - m).powi(-n1));
    }
    bergman_norm(|z| bergman_kernel_eval(a, z, Exponent::ONE).expect("interior base"), r, spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormLink {
    /// `‖k_{(a,0)}‖_{H^r(B_{n+1})}`.
    pub hardy: f64,
    /// `‖(1 - ⟨·, a⟩)^{-(n+1)}‖_{A^r(B_n)}`.
    pub bergman: f64,
    /// `‖b_a‖_{A^r}` with the `p`-normalization.
    pub normalized: f64,
    pub residual: f64,
}

/// Compare the Hardy norm of the embedded kernel with the Bergman norm of
/// the unnormalized Bergman kernel (unweighted `n = 1` only).
pub fn norm_link(
    a: Complex64,
    r: Exponent,
    p: Exponent,
    spec: &BergmanSpec,
    hardy_rule: &QuadratureRule,
) -> Result<NormLink> {
    if spec.n != 1 || spec.weight != 0 {
        return Err(Error::Unsupported("norm link is implemented for the unweighted disc".into()));
    }
    let emb = PointSequence::from_coords(Domain::UnitBall2, vec![vec![a, ZERO]])?;
    let hardy = crate::kernels::kernel_norm_sharp(Domain::UnitBall2, &emb.points()[0], r, hardy_rule);
    let bergman = unnormalized_kernel_norm(&[a], r, spec)?;
    let normalized = bergman * (1.0 - a.norm_sqr()).powf(2.0 * p.conj().recip());
    Ok(NormLink { hardy, bergman, normalized, residual: (hardy - bergman).abs() / hardy })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BergmanReport {
    pub hardy: ExtensionReport,
    /// `‖(1-āz)^{-2}‖_{A^{s'}}` per point.
    pub targets: Vec<f64>,
    /// `|Uν(a) − ν_a ‖(1-āz)^{-2}‖_{A^{s'}}|`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub residual_scale: f64,
    pub interpolates: bool,
    /// `‖Uν‖_{A^s}`.
    pub bergman_norm: f64,
    /// `‖Tν‖_{H^s(B₂)}`.
    pub hardy_norm: f64,
    pub restriction_contracts: bool,
    /// `‖Uν‖_{A^s} / ‖ν‖_s`.
    pub norm_ratio: f64,
}

/// Extension operator for disc Bergman targets, realized on the embedded
/// sequence `{(a, 0)}` in `H^s(B₂)`.
#[derive(Clone, Debug)]
pub struct BergmanExtension {
    operator: ExtensionOperator,
    spec: BergmanSpec,
    points: Vec<Complex64>,
}

impl BergmanExtension {
    pub fn new(
        points: &[Complex64],
        s: Exponent,
        p: Exponent,
        spec: &BergmanSpec,
        hardy_resolution: usize,
        opts: &DualOptions,
    ) -> Result<Self> {
        if spec.n != 1 || spec.weight != 0 {
            return Err(Error::Unsupported("Bergman extension is implemented for the unweighted disc".into()));
        }
        let emb = PointSequence::from_coords(Domain::UnitBall2, points.iter().map(|&a| vec![a, ZERO]).collect())?;
        let rule = build_quadrature(Domain::UnitBall2, hardy_resolution)?;
        let dual = dual_system_collocation(&emb, p, &rule, opts)?;
        let operator = ExtensionOperator::new(&emb, &dual, s, &rule)?;
        Ok(BergmanExtension { operator, spec: *spec, points: points.to_vec() })
    }

    pub fn operator(&self) -> &ExtensionOperator {
        &self.operator
    }

    /// `(Uν)(z) = (Tν)(z, 0)`.
    pub fn eval(&self, nu: &[Complex64], z: Complex64) -> Result<Complex64> {
        self.operator.eval(nu, &[z, ZERO])
    }

    pub fn report(&self, nu: &[Complex64]) -> Result<BergmanReport> {
        let hardy = self.operator.report(nu)?;
        let s = self.operator.s();
        let targets: Vec<f64> =
            self.points.iter().map(|&a| unnormalized_kernel_norm(&[a], s.conj(), &self.spec)).collect::<Result<_>>()?;
        let residuals: Vec<f64> = self
            .points
            .iter()
            .zip(nu)
            .zip(&targets)
            .map(|((&a, v), t)| Ok((self.eval(nu, a)? - v * t).norm()))
            .collect::<Result<_>>()?;
        let max_residual = residuals.iter().copied().fold(0.0, f64::max);
        let residual_scale = nu.iter().zip(&targets).map(|(v, t)| v.norm() * t).fold(0.0, f64::max);
        let bergman_norm = bergman_norm(|z| self.eval(nu, z[0]).expect("length checked"), s, &self.spec)?;
        let hardy_norm = self.operator.norm(nu)?;
        let nu_norm = seq_norm(nu, s);
        Ok(BergmanReport {
            hardy,
            targets,
            residuals,
            max_residual,
            residual_scale,
            interpolates: max_residual <= 1e-8 * residual_scale,
            bergman_norm,
            hardy_norm,
            restriction_contracts: bergman_norm <= hardy_norm * (1.0 + 1e-8),
            norm_ratio: if nu_norm > 0.0 { bergman_norm / nu_norm } else { 0.0 },
        })
    }
}

/// One-shot [`BergmanExtension`] with its report.
pub fn bergman_extension(
    points: &[Complex64],
    nu: &[Complex64],
    s: Exponent,
    p: Exponent,
    spec: &BergmanSpec,
    hardy_resolution: usize,
) -> Result<(BergmanExtension, BergmanReport)> {
    let ext = BergmanExtension::new(points, s, p, spec, hardy_resolution, &DualOptions::default())?;
    let report = ext.report(nu)?;
    Ok((ext, report))
}
