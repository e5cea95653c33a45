use hardy_core::bergman::{subordination_check, BergmanExtension, BergmanReport, BergmanSpec};
use hardy_core::extension::{sphere_targets, FactorizationReport, NormBoundOptions};
use hardy_core::geometry::{build_quadrature, sphere_rule_size, RefineOptions};
use hardy_core::kernels::{kernel_norm, radial_grid, sh_ps_scan, sh_q_scan, NormTable};
use hardy_core::random_signs::khintchine_ratio;
use hardy_core::sequences::{
    blaschke_dual_sup, carleson_report, carleson_window_constant, dual_bound, dual_system_blaschke,
    dual_system_collocation, dual_system_gram, gleason_distance, gleason_product_delta, CarlesonOptions,
    CarlesonWindow, DualMethod, DualOptions,
};
use hardy_core::{
    CarlesonReport, Complex64, Domain, DualSystem, ExpectationMethod, Exponent, ExtensionOperator, ExtensionReport,
    PointSequence, QuadratureRule, ShScan,
};
use serde::Serialize;

use crate::config::Settings;
use crate::CliError;

/// Largest tolerated dual delta residual before a run is flagged.
const DELTA_TOLERANCE: f64 = 1e-8;

/// Resolution of a fixed-rule computation and the relative change of the
/// relevant kernel norms against the rule of half the resolution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureInfo {
    pub resolution: usize,
    pub nodes: usize,
    pub residual: f64,
}

impl QuadratureInfo {
    fn measure(seq: &PointSequence, exps: &[Exponent], rule: &QuadratureRule) -> Result<Self, CliError> {
        let coarse = build_quadrature(seq.domain(), (rule.resolution() / 2).max(4))?;
        let mut residual: f64 = 0.0;
        for a in seq.points() {
            for &p in exps.iter().filter(|p| !p.is_infinite()) {
                let fine = kernel_norm(seq.domain(), a, p, rule);
                residual = residual.max((fine - kernel_norm(seq.domain(), a, p, &coarse)).abs() / fine);
            }
        }
        Ok(QuadratureInfo { resolution: rule.resolution(), nodes: rule.len(), residual })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    pub holds: bool,
}

impl InvariantCheck {
    fn new(name: impl Into<String>, holds: bool) -> Self {
        InvariantCheck { name: name.into(), holds }
    }
}

fn refine_capped(domain: Domain, cap: usize) -> RefineOptions {
    let base = domain.refine_options();
    RefineOptions { start: base.start.min(cap), max: cap, rel_tol: base.rel_tol }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormsResult {
    pub tables: Vec<NormTable>,
}

pub fn norms(cfg: &Settings) -> Result<NormsResult, CliError> {
    let seq = cfg.points()?;
    let opts = refine_capped(seq.domain(), cfg.resolution);
    let tables = seq
        .points()
        .iter()
        .map(|a| NormTable::build_adaptive(seq.domain(), a, &cfg.exponents, opts))
        .collect::<Result<_, _>>()?;
    Ok(NormsResult { tables })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShResult {
    pub scans: Vec<ShScan>,
    pub alpha: f64,
    pub beta: Option<f64>,
    /// `β / α`, when both scans ran.
    pub budget: Option<f64>,
}

pub fn sh(cfg: &Settings) -> Result<ShResult, CliError> {
    let q = cfg.require("q (directly or through s and p)", cfg.q)?;
    let grid = match &cfg.points {
        Some(seq) => seq.points().to_vec(),
        None => radial_grid(cfg.domain, cfg.grid.max_radius, cfg.grid.count)?,
    };
    let opts = refine_capped(cfg.domain, cfg.resolution);
    let alpha_scan = sh_q_scan(cfg.domain, q, &grid, opts)?;
    let alpha = alpha_scan.extreme;
    let mut scans = vec![alpha_scan];
    let mut beta = None;
    if let (Some(s), Some(p)) = (cfg.s, cfg.p) {
        let scan = sh_ps_scan(cfg.domain, p, s, &grid, opts)?;
        beta = Some(scan.extreme);
        scans.push(scan);
    }
    Ok(ShResult { scans, alpha, beta, budget: beta.map(|b| b / alpha) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CarlesonResult {
    pub report: CarlesonReport,
    pub window: Option<CarlesonWindow>,
    pub quadrature: QuadratureInfo,
}

fn carleson_options(cfg: &Settings) -> Result<CarlesonOptions, CliError> {
    let seed = if cfg.restarts > 0 { cfg.seed("Carleson power iteration with random restarts")? } else { 0 };
    Ok(CarlesonOptions { restarts: cfg.restarts, seed, ..CarlesonOptions::default() })
}

pub fn carleson(cfg: &Settings) -> Result<CarlesonResult, CliError> {
    let seq = cfg.points()?;
    let q = cfg.q.unwrap_or(Exponent::TWO);
    let rule = build_quadrature(seq.domain(), cfg.resolution)?;
    let report = carleson_report(seq, q, &rule, &carleson_options(cfg)?)?;
    let window = if seq.domain() == Domain::UnitDisc { Some(carleson_window_constant(seq)?) } else { None };
    Ok(CarlesonResult { report, window, quadrature: QuadratureInfo::measure(seq, &[q], &rule)? })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GleasonResult {
    pub distances: Vec<Vec<f64>>,
    pub min_separation: f64,
    /// `min_a Π_{b≠a} δ(a, b)`.
    pub product_delta: f64,
}

pub fn gleason(cfg: &Settings) -> Result<GleasonResult, CliError> {
    let seq = cfg.points()?;
    let pts = seq.points();
    let distances: Vec<Vec<f64>> =
        pts.iter().map(|a| pts.iter().map(|b| gleason_distance(seq.domain(), a, b)).collect()).collect();
    let min_separation = distances
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, d)| *d))
        .fold(1.0, f64::min);
    Ok(GleasonResult { distances, min_separation, product_delta: gleason_product_delta(seq) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualResult {
    pub system: DualSystem,
    /// `max_a ‖ρ_a‖_p` by quadrature.
    pub dual_bound: f64,
    /// Closed-form sup for Blaschke systems.
    pub blaschke_sup: Option<f64>,
    pub quadrature: QuadratureInfo,
}

fn default_dual_method(p: Exponent) -> DualMethod {
    if p == Exponent::TWO {
        DualMethod::Gram2
    } else {
        DualMethod::Collocation
    }
}

fn build_dual(cfg: &Settings, seq: &PointSequence, p: Exponent, rule: &QuadratureRule) -> Result<DualSystem, CliError> {
    let opts = DualOptions { tikhonov: cfg.tikhonov, ..DualOptions::default() };
    Ok(match cfg.dual_method.unwrap_or_else(|| default_dual_method(p)) {
        DualMethod::Gram2 if p != Exponent::TWO => {
            return Err(CliError::Config(format!("the gram2 dual system needs p = 2, got {p}")))
        }
        DualMethod::Gram2 => dual_system_gram(seq, rule, &opts)?,
        DualMethod::Collocation => dual_system_collocation(seq, p, rule, &opts)?,
        DualMethod::Blaschke if p.is_infinite() => dual_system_blaschke(seq, p, rule)?,
        DualMethod::Blaschke => {
            return Err(CliError::Config(
                "Blaschke duals are H^inf systems; use p = inf or dual_method = lifted".into(),
            ))
        }
        DualMethod::Lifted => dual_system_blaschke(seq, Exponent::INFINITY, rule)?.lift(p, rule)?,
    })
}

pub fn dual(cfg: &Settings) -> Result<DualResult, CliError> {
    let seq = cfg.points()?;
    let p = cfg.require("p", cfg.p)?;
    let rule = build_quadrature(seq.domain(), cfg.resolution)?;
    let system = build_dual(cfg, seq, p, &rule)?;
    let blaschke_sup = if system.method == DualMethod::Blaschke { Some(blaschke_dual_sup(&system)?) } else { None };
    Ok(DualResult {
        dual_bound: dual_bound(&system, p, &rule)?,
        blaschke_sup,
        quadrature: QuadratureInfo::measure(seq, &[p.conj()], &rule)?,
        system,
    })
}

impl DualResult {
    pub fn invariants(&self) -> Vec<InvariantCheck> {
        vec![InvariantCheck::new("dual delta property", self.system.delta_residual < DELTA_TOLERANCE)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtendResult {
    pub points: PointSequence,
    pub nu: Vec<Complex64>,
    /// `‖k_a‖_{s'}`: the extension satisfies `h(a) = ν_a ‖k_a‖_{s'}`.
    pub target_norms: Vec<f64>,
    pub report: ExtensionReport,
    pub factorization: Option<FactorizationReport>,
    pub quadrature: QuadratureInfo,
}

fn operator(cfg: &Settings, seq: &PointSequence, rule: &QuadratureRule) -> Result<ExtensionOperator, CliError> {
    let s = cfg.require("s", cfg.s)?;
    let p = cfg.require("p", cfg.p)?;
    let dual = build_dual(cfg, seq, p, rule)?;
    Ok(ExtensionOperator::new(seq, &dual, s, rule)?)
}

fn norm_bound_options(cfg: &Settings) -> Result<NormBoundOptions, CliError> {
    let seed = if cfg.batch > 0 { cfg.seed("the random target batch")? } else { cfg.seed.unwrap_or(0) };
    Ok(NormBoundOptions { batch: cfg.batch, seed, exact_limit: cfg.exact_limit, mc_samples: cfg.mc_samples })
}

pub fn extend(cfg: &Settings) -> Result<ExtendResult, CliError> {
    let seq = cfg.points()?;
    let rule = build_quadrature(seq.domain(), cfg.resolution)?;
    let op = operator(cfg, seq, &rule)?;
    let nu = cfg.target(seq.len());
    let mut report = op.report(&nu)?;
    report.norm_bound = Some(op.verify_norm_bound(&norm_bound_options(cfg)?, None)?);
    let factorization =
        if seq.len() <= cfg.exact_limit.min(20) { Some(op.randomized_factorization(&nu)?) } else { None };
    let exps = [op.s().conj(), op.q()];
    Ok(ExtendResult {
        points: seq.clone(),
        nu,
        target_norms: op.target_norms().to_vec(),
        report,
        factorization,
        quadrature: QuadratureInfo::measure(seq, &exps, &rule)?,
    })
}

impl ExtendResult {
    pub fn invariants(&self) -> Vec<InvariantCheck> {
        let mut out = vec![
            InvariantCheck::new("dual delta property", self.report.dual_delta_residual < DELTA_TOLERANCE),
            InvariantCheck::new("interpolation", self.report.interpolates),
        ];
        if let Some(nb) = &self.report.norm_bound {
            out.push(InvariantCheck::new("Hölder chain", nb.chains_hold));
        }
        if let Some(f) = &self.factorization {
            out.push(InvariantCheck::new("factorization identity", f.holds));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KhintchineRow {
    pub q: Exponent,
    pub n: usize,
    pub ratio: f64,
    pub method: ExpectationMethod,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KhintchineResult {
    pub rows: Vec<KhintchineRow>,
}

/// Ratios `(𝔼|Σ ε_a x_a|^q)^{1/q} / ‖x‖₂` for seeded random vectors `x`.
pub fn khintchine(cfg: &Settings) -> Result<KhintchineResult, CliError> {
    let seed = cfg.seed("khintchine (random test vectors)")?;
    let mut rows = Vec::new();
    for &n in &cfg.khintchine.sizes {
        let x = sphere_targets(n, Exponent::TWO, 1, seed.wrapping_add(n as u64)).swap_remove(0);
        for &q in &cfg.khintchine.qs {
            // Taken literally, so an exact_limit beyond the enumeration cap surfaces as a capacity error.
            let method = if n <= cfg.exact_limit {
                ExpectationMethod::Exact
            } else {
                ExpectationMethod::MonteCarlo { samples: cfg.mc_samples, seed }
            };
            let est = khintchine_ratio(&x, q, method)?;
            rows.push(KhintchineRow { q, n, ratio: est.value, method: est.method, stderr: est.stderr });
        }
    }
    Ok(KhintchineResult { rows })
}

impl KhintchineResult {
    pub fn invariants(&self) -> Vec<InvariantCheck> {
        let exact_two = self.rows.iter().filter(|r| r.q == Exponent::TWO && r.method.is_exact());
        vec![InvariantCheck::new(
            "orthogonality at q = 2",
            exact_two.into_iter().all(|r| (r.ratio - 1.0).abs() <= 1e-12),
        )]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubordinationRow {
    pub m: u32,
    pub bergman: f64,
    pub hardy: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BergmanResult {
    pub spec: BergmanSpec,
    /// Present for the unweighted space, the only one with an extension operator.
    pub extension: Option<BergmanReport>,
    pub subordination: Vec<SubordinationRow>,
}

/// Node budget for the lifted sphere rule of a Bergman run.
const BERGMAN_NODES: usize = 1 << 22;

/// The configured resolution, halved until the rule on the lifted sphere
/// `∂B_{k+2}` fits the node budget.
fn bergman_angular(cfg: &Settings) -> usize {
    let dim = cfg.weight as usize + 2;
    let mut angular = cfg.resolution.min(256);
    while angular > 8 && sphere_rule_size(dim, (angular / 8).max(4), angular).is_none_or(|n| n > BERGMAN_NODES) {
        angular /= 2;
    }
    angular
}

pub fn bergman(cfg: &Settings) -> Result<BergmanResult, CliError> {
    let spec = BergmanSpec::disc(cfg.weight, bergman_angular(cfg))?;
    let p_sub = cfg.s.unwrap_or(Exponent::TWO);
    let subordination = (0..=cfg.max_degree)
        .map(|m| {
            let c = subordination_check(|z| z[0].powu(m), p_sub, &spec)?;
            Ok(SubordinationRow { m, bergman: c.bergman, hardy: c.hardy, residual: c.residual })
        })
        .collect::<Result<_, CliError>>()?;
    let extension = if cfg.weight == 0 {
        let seq = cfg.points()?;
        if seq.domain() != Domain::UnitDisc {
            return Err(CliError::Config("bergman extension takes disc points".into()));
        }
        let points: Vec<Complex64> = seq.points().iter().map(|a| a.coords()[0]).collect();
        let (s, p) = (cfg.require("s", cfg.s)?, cfg.require("p", cfg.p)?);
        let opts = DualOptions { tikhonov: cfg.tikhonov, ..DualOptions::default() };
        let ext = BergmanExtension::new(&points, s, p, &spec, cfg.hardy_resolution, &opts)?;
        Some(ext.report(&cfg.target(points.len()))?)
    } else {
        None
    };
    Ok(BergmanResult { spec, extension, subordination })
}

impl BergmanResult {
    pub fn invariants(&self) -> Vec<InvariantCheck> {
        let mut out = vec![InvariantCheck::new("subordination", self.subordination.iter().all(|r| r.residual < 1e-8))];
        if let Some(e) = &self.extension {
            out.push(InvariantCheck::new("interpolation", e.interpolates));
            out.push(InvariantCheck::new("restriction contraction", e.restriction_contracts));
        }
        out
    }
}
