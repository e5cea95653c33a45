//! The linear extension operator `ν ↦ h = Σ ν_a c_a ρ_a k_{q,a}` and its
//! randomized factorization `h = 𝔼[f·g]`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{complementary, Exponent};
use crate::geometry::{lp_norm_values, Domain, InteriorPoint, QuadratureRule};
use crate::holo::HoloExpr;
use crate::kernels::{kernel_at_self, kernel_norm_sharp, kernel_samples, ShConstants};
use crate::random_signs::{expect_many, ExpectationEstimate, ExpectationMethod};
use crate::sequences::{
    blaschke_dual_sup, carleson_constant, dual_bound, weak_carleson_constant, CarlesonMethod, CarlesonOptions,
    DualMethod, DualSystem, PointSequence,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `ν = λ μ` with `‖ν‖_s = ‖λ‖_p ‖μ‖_q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitData {
    pub nu: Vec<Complex64>,
    pub lambda: Vec<Complex64>,
    pub mu: Vec<f64>,
    pub s: Exponent,
    pub p: Exponent,
    pub q: Exponent,
}

pub fn split_target(nu: &[Complex64], s: Exponent, p: Exponent) -> Result<SplitData> {
    let q = complementary(s, p)?;
    let (ep, eq) = if p.is_infinite() { (0.0, 1.0) } else { (s.value() / p.value(), s.value() / q.value()) };
    let mut lambda = Vec::with_capacity(nu.len());
    let mut mu = Vec::with_capacity(nu.len());
    for &v in nu {
        let r = v.norm();
        if r == 0.0 {
            lambda.push(ZERO);
            mu.push(0.0);
        } else {
            lambda.push(v / r * r.powf(ep));
            mu.push(r.powf(eq));
        }
    }
    Ok(SplitData { nu: nu.to_vec(), lambda, mu, s, p, q })
}

impl SplitData {
    /// `|‖ν‖_s − ‖λ‖_p ‖μ‖_q|` relative to `‖ν‖_s`.
    pub fn norm_identity_residual(&self) -> f64 {
        let nu = seq_norm(&self.nu, self.s);
        let lam = seq_norm(&self.lambda, self.p);
        let mu = real_seq_norm(&self.mu, self.q);
        if nu == 0.0 {
            return lam * mu;
        }
        (nu - lam * mu).abs() / nu
    }
}

/// `ℓ^p` norm of a coefficient vector.
pub fn seq_norm(x: &[Complex64], p: Exponent) -> f64 {
    if p.is_infinite() {
        return x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    x.iter().map(|v| v.norm().powf(p.value())).sum::<f64>().powf(p.recip())
}

fn real_seq_norm(x: &[f64], p: Exponent) -> f64 {
    if p.is_infinite() {
        return x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    }
    x.iter().map(|v| v.abs().powf(p.value())).sum::<f64>().powf(p.recip())
}

/// `Σ w_j |v_j|^p`, or the largest modulus for `p = ∞`.
fn power_integral(rule: &QuadratureRule, v: &[Complex64], p: Exponent) -> f64 {
    if p.is_infinite() {
        return v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    let pv = p.value();
    v.iter().zip(rule.weights()).map(|(z, w)| w * z.norm().powf(pv)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionCoeffs {
    /// `c_a = ‖k_a‖_{s'} ‖k_a‖_q / (n_a k_a(a))`.
    pub c: Vec<f64>,
    pub max: f64,
    /// `α̂⁻¹β̂` when SH constants are supplied.
    pub budget: Option<f64>,
    pub within_budget: Option<bool>,
}

/// Extension coefficients; `normalization` holds the dual normalization
/// `n_a` (`‖k_a‖_{p'}` for finite `p`).
pub fn coeff_c(
    domain: Domain,
    points: &[InteriorPoint],
    s: Exponent,
    q: Exponent,
    normalization: &[f64],
    rule: &QuadratureRule,
) -> Result<ExtensionCoeffs> {
    if normalization.len() != points.len() {
        return Err(Error::Dependency("dual normalization missing for some points".into()));
    }
    let c: Vec<f64> = points
        .iter()
        .zip(normalization)
        .map(|(a, n)| {
            kernel_norm_sharp(domain, a, s.conj(), rule) * kernel_norm_sharp(domain, a, q, rule)
                / (n * kernel_at_self(domain, a))
        })
        .collect();
    let max = c.iter().copied().fold(0.0, f64::max);
    Ok(ExtensionCoeffs { c, max, budget: None, within_budget: None })
}

impl ExtensionCoeffs {
    pub fn with_budget(mut self, sh: &ShConstants) -> Self {
        let b = sh.budget();
        self.budget = Some(b);
        self.within_budget = Some(self.max <= b * (1.0 + 1e-8));
        self
    }
}

/// Residual panel for pointwise identities: 20 interior and 20 boundary
/// points spread by the golden angle.
pub fn test_panel(domain: Domain) -> Vec<Vec<Complex64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut out = Vec::with_capacity(40);
    for boundary in [false, true] {
        for i in 0..20 {
            let r = if boundary { 1.0 } else { 0.05 + 0.9 * i as f64 / 19.0 };
            let t = golden * i as f64;
            let pt = match domain {
                Domain::UnitDisc => vec![Complex64::from_polar(r, t)],
                Domain::UnitBall2 => {
                    let phi = 0.7 * i as f64 + 0.3;
                    vec![
                        Complex64::from_polar(r * phi.cos().abs(), t),
                        Complex64::from_polar(r * phi.sin().abs(), 1.7 * t),
                    ]
                }
                Domain::Bidisc => vec![Complex64::from_polar(r, t), Complex64::from_polar(r.powf(0.5), 1.3 * t + 0.4)],
            };
            out.push(pt);
        }
    }
    out
}

/// The operator `ν ↦ h` for a fixed sequence, dual system and exponent `s`.
#[derive(Clone, Debug)]
pub struct ExtensionOperator {
    domain: Domain,
    points: Vec<InteriorPoint>,
    s: Exponent,
    p: Exponent,
    q: Exponent,
    dual: DualSystem,
    coeffs: ExtensionCoeffs,
    /// `‖k_a‖_{s'}`, the interpolation targets per unit coefficient.
    target_norms: Vec<f64>,
    /// `c_a ρ_a k_{q,a}`.
    basis: Vec<HoloExpr>,
    rule: QuadratureRule,
    /// `c_a ρ_a(ζ_j)`.
    rho: Vec<Vec<Complex64>>,
    /// `k_{q,a}(ζ_j)`.
    kq: Vec<Vec<Complex64>>,
}

impl ExtensionOperator {
    pub fn new(seq: &PointSequence, dual: &DualSystem, s: Exponent, rule: &QuadratureRule) -> Result<Self> {
        if dual.points != seq.points() || dual.domain != seq.domain() {
            return Err(Error::Contract("dual system was built for a different sequence".into()));
        }
        if rule.support() != seq.domain().support() {
            return Err(Error::Shape("quadrature rule does not match the sequence domain".into()));
        }
        let p = dual.exponent;
        let q =
            complementary(s, p).map_err(|_| Error::Contract(format!("dual exponent p = {p} must exceed s = {s}")))?;
        let domain = seq.domain();
        let coeffs = coeff_c(domain, seq.points(), s, q, &dual.normalization, rule)?;
        let target_norms = seq.points().iter().map(|a| kernel_norm_sharp(domain, a, s.conj(), rule)).collect();
        let per_point: Vec<(HoloExpr, Vec<Complex64>, Vec<Complex64>)> = seq
            .points()
            .par_iter()
            .enumerate()
            .map(|(a, pt)| {
                let ks = kernel_samples(domain, pt, rule);
                let kn = lp_norm_values(rule, ks.values(), q);
                let c = coeffs.c[a];
                let basis = dual.duals[a].mul(&HoloExpr::kernel(domain, pt.coords(), Complex64::new(c / kn, 0.0)));
                let rho = dual.duals[a].samples(rule).values().iter().map(|v| v * c).collect();
                let kq = ks.values().iter().map(|v| v / kn).collect();
                (basis, rho, kq)
            })
            .collect();
        let mut basis = Vec::new();
        let mut rho = Vec::new();
        let mut kq = Vec::new();
        for (b, r, k) in per_point {
            basis.push(b);
            rho.push(r);
            kq.push(k);
        }
        Ok(ExtensionOperator {
            domain,
            points: seq.points().to_vec(),
            s,
            p,
            q,
            dual: dual.clone(),
            coeffs,
            target_norms,
            basis,
            rule: rule.clone(),
            rho,
            kq,
        })
    }

    pub fn s(&self) -> Exponent {
        self.s
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn coeffs(&self) -> &ExtensionCoeffs {
        &self.coeffs
    }

    pub fn dual(&self) -> &DualSystem {
        &self.dual
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn target_norms(&self) -> &[f64] {
        &self.target_norms
    }

    pub fn with_sh_budget(mut self, sh: &ShConstants) -> Self {
        self.coeffs = self.coeffs.with_budget(sh);
        self
    }

    fn check_len(&self, nu: &[Complex64]) -> Result<()> {
        if nu.len() != self.len() {
            return Err(Error::Shape(format!("target has {} entries, sequence has {}", nu.len(), self.len())));
        }
        Ok(())
    }

    pub fn split(&self, nu: &[Complex64]) -> Result<SplitData> {
        self.check_len(nu)?;
        split_target(nu, self.s, self.p)
    }

    /// `h` as a symbolic expression.
    pub fn extend(&self, nu: &[Complex64]) -> Result<HoloExpr> {
        self.check_len(nu)?;
        let mut h = HoloExpr::zero(self.domain);
        for (b, &v) in self.basis.iter().zip(nu) {
            if v != ZERO {
                h.add_scaled(b, v);
            }
        }
        Ok(h)
    }

    pub fn eval(&self, nu: &[Complex64], z: &[Complex64]) -> Result<Complex64> {
        self.check_len(nu)?;
        Ok(self.basis.iter().zip(nu).map(|(b, v)| v * b.eval(z)).sum())
    }

    /// `h` at the quadrature nodes.
    pub fn samples(&self, nu: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(nu)?;
        Ok((0..self.rule.len())
            .into_par_iter()
            .map(|j| (0..self.len()).map(|a| nu[a] * self.rho[a][j] * self.kq[a][j]).sum())
            .collect())
    }

    /// `‖h‖_s`.
    pub fn norm(&self, nu: &[Complex64]) -> Result<f64> {
        Ok(lp_norm_values(&self.rule, &self.samples(nu)?, self.s))
    }

    /// `|h(a) − ν_a ‖k_a‖_{s'}|` per point.
    pub fn residuals(&self, nu: &[Complex64]) -> Result<Vec<f64>> {
        self.check_len(nu)?;
        Ok(self
            .points
            .iter()
            .enumerate()
            .map(|(a, pt)| {
                let h: Complex64 = self.basis.iter().zip(nu).map(|(b, v)| v * b.eval(pt.coords())).sum();
                (h - nu[a] * self.target_norms[a]).norm()
            })
            .collect())
    }

    pub fn report(&self, nu: &[Complex64]) -> Result<ExtensionReport> {
        let residuals = self.residuals(nu)?;
        let residual_scale = nu.iter().zip(&self.target_norms).map(|(v, n)| v.norm() * n).fold(0.0, f64::max);
        let max_residual = residuals.iter().copied().fold(0.0, f64::max);
        let nu_norm = seq_norm(nu, self.s);
        let norm_ratio = if nu_norm > 0.0 { self.norm(nu)? / nu_norm } else { 0.0 };
        Ok(ExtensionReport {
            s: self.s,
            p: self.p,
            q: self.q,
            dual_method: self.dual.method,
            dual_delta_residual: self.dual.delta_residual,
            coefficients: self.coeffs.clone(),
            residuals,
            max_residual,
            residual_scale,
            interpolates: max_residual <= 1e-8 * residual_scale,
            norm_ratio,
            resolution: self.rule.resolution(),
            norm_bound: None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub s: Exponent,
    pub p: Exponent,
    pub q: Exponent,
    pub dual_method: DualMethod,
    pub dual_delta_residual: f64,
    pub coefficients: ExtensionCoeffs,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// `max_a |ν_a| ‖k_a‖_{s'}`.
    pub residual_scale: f64,
    pub interpolates: bool,
    /// `‖h‖_s / ‖ν‖_s`.
    pub norm_ratio: f64,
    pub resolution: usize,
    pub norm_bound: Option<NormBoundReport>,
}

/// `h` and its report for one target.
pub fn build_extension(
    seq: &PointSequence,
    dual: &DualSystem,
    nu: &[Complex64],
    s: Exponent,
    rule: &QuadratureRule,
) -> Result<(HoloExpr, ExtensionReport)> {
    let op = ExtensionOperator::new(seq, dual, s, rule)?;
    Ok((op.extend(nu)?, op.report(nu)?))
}

/// `‖h‖_s^s ≤ 𝔼∫|fg|^s ≤ (𝔼‖f‖_p^p)^{s/p} (𝔼‖g‖_q^q)^{s/q}` for one target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderChain {
    pub h_power: f64,
    pub mean_fg: ExpectationEstimate,
    /// Product of moments, or `𝔼[‖f‖_∞^s ‖g‖_s^s]` for `p = ∞`.
    pub holder_bound: f64,
    pub f_moment: ExpectationEstimate,
    pub g_moment: ExpectationEstimate,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantBudget {
    /// `D_q` (exact for `q = 2`, a lower bound otherwise).
    pub carleson: f64,
    pub carleson_method: CarlesonMethod,
    /// `sup_a ‖ρ_a‖_p`.
    pub dual_sup: f64,
    pub coeff_max: f64,
    pub sh_budget: Option<f64>,
    /// Largest measured `(𝔼‖f‖_p^p)^{1/p} / (max c · sup‖ρ‖_p · ‖λ‖_p)`.
    pub f_factor: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBoundReport {
    /// Largest `‖h‖_s/‖ν‖_s` over the batch: a lower bound for `C_I`.
    pub c_i: f64,
    pub worst_target: Vec<Complex64>,
    pub ratios: Vec<f64>,
    pub chains: Vec<HolderChain>,
    pub chains_hold: bool,
    pub budget: ConstantBudget,
    /// `c_i ≤ budget.total`.
    pub sandwich_holds: bool,
    pub batch: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBoundOptions {
    pub batch: usize,
    pub seed: u64,
    /// Exact expectations up to this many points, Monte Carlo above.
    pub exact_limit: usize,
    pub mc_samples: usize,
}

impl Default for NormBoundOptions {
    fn default() -> Self {
        NormBoundOptions { batch: 64, seed: 0, exact_limit: 12, mc_samples: 4096 }
    }
}

/// Random targets on the `ℓ^s` unit sphere followed by every unit vector.
pub fn sphere_targets(n: usize, s: Exponent, batch: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<Complex64>> = (0..batch)
        .map(|_| {
            let v: Vec<Complex64> =
                (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let norm = seq_norm(&v, s);
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    for a in 0..n {
        let mut e = vec![ZERO; n];
        e[a] = Complex64::new(1.0, 0.0);
        out.push(e);
    }
    out
}

impl ExtensionOperator {
    /// Hölder chain for one target with the given expectation method.
    pub fn holder_chain(&self, nu: &[Complex64], method: ExpectationMethod) -> Result<HolderChain> {
        let split = self.split(nu)?;
        let (s, p, q) = (self.s, self.p, self.q);
        let sv = s.value();
        let nodes = self.rule.len();
        let n = self.len();
        let h = self.samples(nu)?;
        let h_power = power_integral(&self.rule, &h, s);
        let est = expect_many(
            |e, out| {
                let mut fg = 0.0;
                let mut fp = 0.0;
                let mut gq = 0.0;
                let mut fsup: f64 = 0.0;
                for j in 0..nodes {
                    let mut f = ZERO;
                    let mut g = ZERO;
                    for a in 0..n {
                        let sg = e.get(a);
                        f += split.lambda[a] * self.rho[a][j] * sg;
                        g += self.kq[a][j] * (split.mu[a] * sg);
                    }
                    let w = self.rule.weight(j);
                    fg += w * (f * g).norm().powf(sv);
                    if p.is_infinite() {
                        fsup = fsup.max(f.norm());
                    } else {
                        fp += w * f.norm().powf(p.value());
                    }
                    gq += w * g.norm().powf(q.value());
                }
                out[0] = fg;
                out[1] = if p.is_infinite() { fsup.powf(sv) } else { fp };
                out[2] = gq;
                out[3] = fsup.powf(sv) * gq;
            },
            4,
            n,
            method,
        )?;
        let holder_bound = if p.is_infinite() {
            est[3].value
        } else {
            est[1].value.powf(sv / p.value()) * est[2].value.powf(sv / q.value())
        };
        let slack = 1e-8 * holder_bound + 4.0 * (est[0].stderr + est[1].stderr + est[2].stderr + est[3].stderr);
        let holds =
            h_power <= est[0].value * (1.0 + 1e-8) + 4.0 * est[0].stderr && est[0].value <= holder_bound + slack;
        Ok(HolderChain { h_power, mean_fg: est[0], holder_bound, f_moment: est[1], g_moment: est[2], holds })
    }

    /// Batch estimate of `C_I` with the Hölder chain and the constant budget
    /// for every target.
    pub fn verify_norm_bound(&self, opts: &NormBoundOptions, sh: Option<&ShConstants>) -> Result<NormBoundReport> {
        if opts.batch == 0 {
            return Err(Error::param("norm-bound batch must be at least 1"));
        }
        let n = self.len();
        let method = ExpectationMethod::auto(n, opts.exact_limit, opts.mc_samples, opts.seed);
        let targets = sphere_targets(n, self.s, opts.batch, opts.seed);
        let results: Vec<(f64, HolderChain)> = targets
            .par_iter()
            .map(|nu| Ok((self.norm(nu)? / seq_norm(nu, self.s), self.holder_chain(nu, method)?)))
            .collect::<Result<_>>()?;
        let seq = PointSequence::new(self.domain, self.points.clone())?;
        let carleson =
            carleson_constant(&seq, self.q, &self.rule, &CarlesonOptions { seed: opts.seed, ..Default::default() })?;
        let dual_sup = if self.dual.method == DualMethod::Blaschke && self.p.is_infinite() {
            blaschke_dual_sup(&self.dual)?
        } else {
            dual_bound(&self.dual, self.p, &self.rule)?
        };
        let coeff_max = self.coeffs.max;
        let sv = self.s.value();
        let mut f_factor: f64 = 0.0;
        for (nu, (_, chain)) in targets.iter().zip(&results) {
            let split = split_target(nu, self.s, self.p)?;
            let g_root = chain.g_moment.value.powf(1.0 / self.q.value());
            let denom = g_root * coeff_max * dual_sup * seq_norm(&split.lambda, self.p);
            if denom > 0.0 {
                f_factor = f_factor.max(chain.holder_bound.powf(1.0 / sv) / denom);
            }
        }
        let total = carleson.constant * coeff_max * dual_sup * f_factor;
        let (worst, c_i) =
            results
                .iter()
                .enumerate()
                .map(|(i, r)| (i, r.0))
                .fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        let ratios: Vec<f64> = results.iter().map(|r| r.0).collect();
        let chains: Vec<HolderChain> = results.into_iter().map(|r| r.1).collect();
        Ok(NormBoundReport {
            c_i,
            worst_target: targets[worst].clone(),
            ratios,
            chains_hold: chains.iter().all(|c| c.holds),
            chains,
            budget: ConstantBudget {
                carleson: carleson.constant,
                carleson_method: carleson.method,
                dual_sup,
                coeff_max,
                sh_budget: sh.map(|s| s.budget()),
                f_factor,
                total,
            },
            sandwich_holds: c_i <= total * (1.0 + 1e-8),
            batch: opts.batch,
            seed: opts.seed,
        })
    }

    /// `max |h(z) − 𝔼[f(ε,z) g(ε,z)]| / (1 + |h(z)|)` over [`test_panel`].
    pub fn randomized_factorization(&self, nu: &[Complex64]) -> Result<FactorizationReport> {
        let split = self.split(nu)?;
        let panel = test_panel(self.domain);
        let n = self.len();
        let rho_at: Vec<Vec<Complex64>> =
            panel.iter().map(|z| (0..n).map(|a| self.coeffs.c[a] * self.dual.duals[a].eval(z)).collect()).collect();
        let kq_norms: Vec<f64> = self
            .points
            .iter()
            .map(|a| lp_norm_values(&self.rule, kernel_samples(self.domain, a, &self.rule).values(), self.q))
            .collect();
        let kq_at: Vec<Vec<Complex64>> = panel
            .iter()
            .map(|z| {
                self.points
                    .iter()
                    .zip(&kq_norms)
                    .map(|(a, kn)| HoloExpr::kernel(self.domain, a.coords(), Complex64::new(1.0 / kn, 0.0)).eval(z))
                    .collect()
            })
            .collect();
        let est = expect_many(
            |e, out| {
                for (i, (r, k)) in rho_at.iter().zip(&kq_at).enumerate() {
                    let mut f = ZERO;
                    let mut g = ZERO;
                    for a in 0..n {
                        f += split.lambda[a] * r[a] * e.get(a);
                        g += split.mu[a] * k[a] * e.get(a);
                    }
                    let fg = f * g;
                    out[2 * i] = fg.re;
                    out[2 * i + 1] = fg.im;
                }
            },
            2 * panel.len(),
            n,
            ExpectationMethod::Exact,
        )?;
        let max_residual = panel
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let h = self.eval(nu, z).expect("length checked");
                (h - Complex64::new(est[2 * i].value, est[2 * i + 1].value)).norm() / (1.0 + h.norm())
            })
            .fold(0.0, f64::max);
        Ok(FactorizationReport { panel_size: panel.len(), max_residual, holds: max_residual < 1e-10 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub panel_size: usize,
    pub max_residual: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualExpectationReport {
    pub p: Exponent,
    /// `𝔼‖Σ λ_a ε_a ρ_a‖_p^p / ‖λ‖_p^p`.
    pub ratio: f64,
    pub expectation: ExpectationEstimate,
    /// `sup_a ‖ρ_a‖_p^p`.
    pub sup_dual_power: f64,
    /// Measured `𝔼‖Σ λ ε ρ‖_p^p / ∫(Σ|λ_a ρ_a|²)^{p/2}`.
    pub khintchine_factor: f64,
    pub bound: f64,
    pub bound_holds: bool,
    pub pointwise_holds: bool,
}

fn sample_duals(duals: &[HoloExpr], rule: &QuadratureRule) -> Vec<Vec<Complex64>> {
    duals.par_iter().map(|d| d.samples(rule).into_values()).collect()
}

fn sign_moment(
    cols: &[Vec<Complex64>],
    lambda: &[Complex64],
    rule: &QuadratureRule,
    p: f64,
    method: ExpectationMethod,
) -> Result<ExpectationEstimate> {
    let nodes = rule.len();
    let mut est = expect_many(
        |e, out| {
            let mut acc = 0.0;
            for j in 0..nodes {
                let v: Complex64 = cols.iter().zip(lambda).enumerate().map(|(a, (c, l))| c[j] * l * e.get(a)).sum();
                acc += rule.weight(j) * v.norm().powf(p);
            }
            out[0] = acc;
        },
        1,
        cols.len(),
        method,
    )?;
    Ok(est.remove(0))
}

fn square_function_power(cols: &[Vec<Complex64>], lambda: &[Complex64], rule: &QuadratureRule, p: f64) -> f64 {
    (0..rule.len())
        .map(|j| {
            let s: f64 = cols.iter().zip(lambda).map(|(c, l)| (c[j] * l).norm_sqr()).sum();
            rule.weight(j) * s.powf(0.5 * p)
        })
        .sum()
}

fn check_small_p(dual: &DualSystem, lambda: &[Complex64]) -> Result<f64> {
    let p = dual.exponent;
    if p.value() > 2.0 {
        return Err(Error::param(format!("this route needs p <= 2, got {p}")));
    }
    if lambda.len() != dual.len() {
        return Err(Error::Shape("coefficient vector length differs from the dual system".into()));
    }
    Ok(p.value())
}

/// The `p ≤ 2` route: `𝔼‖Σ λ_a ε_a ρ_a‖_p^p ≤ K̂ sup_a ‖ρ_a‖_p^p ‖λ‖_p^p`.
pub fn dual_expectation_bound_p_le_2(
    dual: &DualSystem,
    lambda: &[Complex64],
    rule: &QuadratureRule,
    method: ExpectationMethod,
) -> Result<DualExpectationReport> {
    let p = check_small_p(dual, lambda)?;
    let cols = sample_duals(&dual.duals, rule);
    let expectation = sign_moment(&cols, lambda, rule, p, method)?;
    let lam_p: f64 = lambda.iter().map(|l| l.norm().powf(p)).sum();
    let sup_dual_power = cols.iter().map(|c| lp_norm_values(rule, c, dual.exponent).powf(p)).fold(0.0, f64::max);
    let square = square_function_power(&cols, lambda, rule, p);
    let khintchine_factor = expectation.value / square;
    let pointwise_holds = (0..rule.len()).all(|j| {
        let l2: f64 = cols.iter().zip(lambda).map(|(c, l)| (c[j] * l).norm_sqr()).sum::<f64>().sqrt();
        let lp: f64 = cols.iter().zip(lambda).map(|(c, l)| (c[j] * l).norm().powf(p)).sum::<f64>().powf(1.0 / p);
        l2 <= lp * (1.0 + 1e-12)
    });
    let ratio = expectation.value / lam_p;
    let bound = khintchine_factor * sup_dual_power;
    Ok(DualExpectationReport {
        p: dual.exponent,
        ratio,
        expectation,
        sup_dual_power,
        khintchine_factor,
        bound,
        bound_holds: ratio <= bound * (1.0 + 1e-10),
        pointwise_holds,
    })
}

/// Type-`p` ratio `𝔼‖Σ λ_a ε_a ρ_a‖_p^p / Σ |λ_a|^p ‖ρ_a‖_p^p`.
pub fn type_p_bound_check(
    dual: &DualSystem,
    lambda: &[Complex64],
    rule: &QuadratureRule,
    method: ExpectationMethod,
) -> Result<f64> {
    let p = check_small_p(dual, lambda)?;
    let cols = sample_duals(&dual.duals, rule);
    let expectation = sign_moment(&cols, lambda, rule, p, method)?;
    let denom: f64 =
        cols.iter().zip(lambda).map(|(c, l)| l.norm().powf(p) * lp_norm_values(rule, c, dual.exponent).powf(p)).sum();
    Ok(expectation.value / denom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfinityRouteReport {
    pub p: Exponent,
    /// `𝔼‖Σ λ_a ε_a ρ_{p,a}‖_p^p / ‖λ‖_p^p` with `ρ_{p,a} = ρ_a k_{p,a}`.
    pub ratio: f64,
    pub expectation: ExpectationEstimate,
    /// `C = sup_a ‖ρ_a‖_∞`.
    pub dual_sup: f64,
    /// `‖ρ_{p,a}‖_p` per point.
    pub lifted_norms: Vec<f64>,
    pub norms_dominated: bool,
    pub pointwise_dominated: bool,
    pub weak_carleson: f64,
    pub khintchine_factor: f64,
    /// `K̂ C^p D_w^{p/2}`.
    pub budget: f64,
    pub bound_holds: bool,
}

/// The `H^∞` route: lift an `H^∞` dual system by `k_{p,a}` and bound the sign
/// expectation by the weak `p`-Carleson constant.
pub fn dual_expectation_bound_infty(
    seq: &PointSequence,
    dual: &DualSystem,
    p: Exponent,
    lambda: &[Complex64],
    rule: &QuadratureRule,
    method: ExpectationMethod,
    opts: &CarlesonOptions,
) -> Result<InfinityRouteReport> {
    if seq.domain() != Domain::UnitDisc || dual.domain != Domain::UnitDisc {
        return Err(Error::Unsupported("bounded dual systems in H^inf are available on the disc".into()));
    }
    if !dual.exponent.is_infinite() {
        return Err(Error::Contract("the infinity route needs an H^inf dual system".into()));
    }
    if dual.points != seq.points() {
        return Err(Error::Contract("dual system was built for a different sequence".into()));
    }
    if p.value() < 2.0 || p.is_infinite() {
        return Err(Error::param(format!("the weak Carleson step needs 2 <= p < inf, got {p}")));
    }
    if lambda.len() != seq.len() {
        return Err(Error::Shape("coefficient vector length differs from the sequence".into()));
    }
    let pv = p.value();
    let dual_sup = if dual.method == DualMethod::Blaschke {
        blaschke_dual_sup(dual)?
    } else {
        dual_bound(dual, Exponent::INFINITY, rule)?
    };
    let rho = sample_duals(&dual.duals, rule);
    let kp: Vec<Vec<Complex64>> = seq
        .points()
        .iter()
        .map(|a| {
            let s = kernel_samples(Domain::UnitDisc, a, rule);
            let n = lp_norm_values(rule, s.values(), p);
            s.values().iter().map(|v| v / n).collect()
        })
        .collect();
    let lifted: Vec<Vec<Complex64>> =
        rho.iter().zip(&kp).map(|(r, k)| r.iter().zip(k).map(|(r, k)| r * k).collect()).collect();
    let pointwise_dominated = rho
        .iter()
        .zip(&kp)
        .all(|(r, k)| r.iter().zip(k).all(|(r, k)| (r * k).norm() <= dual_sup * k.norm() * (1.0 + 1e-12)));
    let lifted_norms: Vec<f64> = lifted.iter().map(|c| lp_norm_values(rule, c, p)).collect();
    let norms_dominated = lifted_norms.iter().all(|&n| n <= dual_sup * (1.0 + 1e-8));
    let expectation = sign_moment(&lifted, lambda, rule, pv, method)?;
    let lam_p: f64 = lambda.iter().map(|l| l.norm().powf(pv)).sum();
    let square = square_function_power(&lifted, lambda, rule, pv);
    let khintchine_factor = expectation.value / square;
    let weak_carleson = weak_carleson_constant(seq, p, rule, opts)?.constant;
    let budget = khintchine_factor * dual_sup.powf(pv) * weak_carleson.powf(0.5 * pv);
    let ratio = expectation.value / lam_p;
    Ok(InfinityRouteReport {
        p,
        ratio,
        expectation,
        dual_sup,
        lifted_norms,
        norms_dominated,
        pointwise_dominated,
        weak_carleson,
        khintchine_factor,
        budget,
        bound_holds: ratio <= budget * (1.0 + 1e-8),
    })
}
