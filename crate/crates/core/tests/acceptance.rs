//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;
use std::time::Instant;

use hardy_core::bergman::{restriction_check, subordination_check, BergmanSpec};
use hardy_core::extension::{
    dual_expectation_bound_infty, dual_expectation_bound_p_le_2, test_panel, ExtensionOperator, NormBoundOptions,
};
use hardy_core::geometry::{build_quadrature, circle_rule, inner_product, sphere_rule, torus_rule, QuadratureRule};
use hardy_core::kernels::{kernel_at_self, kernel_samples, radial_grid, sh_q_scan, NormTable};
use hardy_core::random_signs::khintchine_ratio;
use hardy_core::sequences::{
    blaschke_dual_sup, carleson_constant, dual_bound, dual_system_blaschke, dual_system_collocation, dual_system_gram,
    gleason_distance, weak_carleson_constant, CarlesonOptions, DualOptions,
};
use hardy_core::{Complex64, Domain, ExpectationMethod, Exponent, InteriorPoint, PointSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Poly = Box<dyn Fn(&[Complex64]) -> Complex64>;
type Criterion = (&'static str, fn() -> Outcome);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn e(x: f64) -> Exponent {
    Exponent::new(x).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Uniformly spread interior points with the domain's size measure ≤ `max`.
fn random_points(domain: Domain, count: usize, max: f64, rng: &mut ChaCha8Rng) -> Vec<InteriorPoint> {
    (0..count)
        .map(|_| {
            let coords = match domain {
                Domain::UnitDisc => vec![Complex64::from_polar(rng.gen_range(0.0..max), rng.gen_range(0.0..6.3))],
                Domain::Bidisc => {
                    (0..2).map(|_| Complex64::from_polar(rng.gen_range(0.0..max), rng.gen_range(0.0..6.3))).collect()
                }
                Domain::UnitBall2 => {
                    let r = rng.gen_range(0.0..max);
                    let phi: f64 = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
                    vec![
                        Complex64::from_polar(r * phi.cos(), rng.gen_range(0.0..6.3)),
                        Complex64::from_polar(r * phi.sin(), rng.gen_range(0.0..6.3)),
                    ]
                }
            };
            InteriorPoint::new(domain, coords).unwrap()
        })
        .collect()
}

fn monomials(domain: Domain, degree: u32) -> Vec<Vec<u32>> {
    match domain {
        Domain::UnitDisc => (0..=degree).map(|d| vec![d]).collect(),
        _ => (0..=degree).flat_map(|i| (0..=degree - i).map(move |j| vec![i, j])).collect(),
    }
}

fn monomial(z: &[Complex64], alpha: &[u32]) -> Complex64 {
    z.iter().zip(alpha).map(|(z, &k)| z.powu(k)).product()
}

fn reproducing_rule(domain: Domain) -> QuadratureRule {
    match domain {
        Domain::UnitDisc => circle_rule(512).unwrap(),
        Domain::Bidisc => torus_rule(320).unwrap(),
        // degree ≤ 8 needs Gauss order 5 in |z₁|²; the angular count fights aliasing at |a| = 0.9
        Domain::UnitBall2 => sphere_rule(2, 5, 320).unwrap(),
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for domain in [Domain::UnitDisc, Domain::UnitBall2, Domain::Bidisc] {
        let rule = reproducing_rule(domain);
        let monos: Vec<_> = monomials(domain, 8).into_iter().map(|m| (rule.sample(|z| monomial(z, &m)), m)).collect();
        for a in random_points(domain, 25, 0.9, &mut rng) {
            let k = kernel_samples(domain, &a, &rule);
            for (fs, m) in &monos {
                let r = (inner_product(fs, &k).unwrap() - monomial(a.coords(), m)).norm();
                worst = worst.max(r);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-8 && secs < 30.0, format!("max residual {worst:.2e}, {secs:.1} s (limits 1e-8, 30 s)"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for domain in [Domain::UnitDisc, Domain::UnitBall2, Domain::Bidisc] {
        for a in random_points(domain, 10, 0.9, &mut rng) {
            let t = NormTable::build_adaptive(domain, &a, &[Exponent::TWO], domain.refine_options()).unwrap();
            let n = t.get(Exponent::TWO).unwrap();
            worst = worst.max((n * n - kernel_at_self(domain, &a)).abs() / kernel_at_self(domain, &a));
        }
    }
    let rule = sphere_rule(2, 4, 16).unwrap();
    let moment = rule.integrate_real(|z| z[0].norm_sqr().powi(2));
    let merr = (moment - 1.0 / 3.0).abs();
    check(worst < 1e-10 && merr < 1e-12, format!("max ‖k‖²/k(a) error {worst:.2e}, ∫|z₁|⁴ error {merr:.2e}"))
}

fn criterion_3() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for domain in [Domain::UnitDisc, Domain::UnitBall2, Domain::Bidisc] {
        let grid = radial_grid(domain, 0.8, 5).unwrap();
        let scan = sh_q_scan(domain, Exponent::TWO, &grid, domain.refine_options()).unwrap();
        let dev = scan.points.iter().chain(&scan.flagged).map(|p| (p.ratio - 1.0).abs()).fold(0.0, f64::max);
        ok &= dev < 1e-10;
        detail.push(format!("{domain} q=2 dev {dev:.1e}"));
    }
    let grid = radial_grid(Domain::UnitDisc, 0.95, 20).unwrap();
    for q in [e(4.0 / 3.0), e(4.0)] {
        let scan = sh_q_scan(Domain::UnitDisc, q, &grid, Domain::UnitDisc.refine_options()).unwrap();
        let max = scan.points.iter().map(|p| p.ratio).fold(0.0, f64::max);
        ok &= max <= 1.0 + 1e-10 && scan.extreme > 0.0 && scan.max_residual < 1e-8 && scan.flagged.is_empty();
        detail.push(format!(
            "q={q} α̂={:.6} max {max:.6} residual {:.1e} flagged {}",
            scan.extreme,
            scan.max_residual,
            scan.flagged.len()
        ));
    }
    check(ok, detail.join("; "))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=12);
        let x: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let r = khintchine_ratio(&x, Exponent::TWO, ExpectationMethod::Exact).unwrap();
        worst = worst.max((r.value - 1.0).abs());
    }
    let r = khintchine_ratio(&[c(1.0, 0.0), c(1.0, 0.0)], e(4.0), ExpectationMethod::Exact).unwrap();
    let err = (r.value - 2.0).abs();
    check(worst < 1e-12 && err < 1e-12, format!("q=2 max deviation {worst:.1e}; (1,1) q=4 ratio {:.15}", r.value))
}

fn six_points() -> PointSequence {
    let pts: Vec<Complex64> = (0..6)
        .map(|k| Complex64::from_polar(if k % 2 == 0 { 0.5 } else { 0.75 }, std::f64::consts::PI * k as f64 / 3.0))
        .collect();
    PointSequence::from_disc(&pts).unwrap()
}

fn min_separation(s: &PointSequence) -> f64 {
    let p = s.points();
    let mut m: f64 = 1.0;
    for i in 0..p.len() {
        for j in 0..i {
            m = m.min(gleason_distance(s.domain(), &p[i], &p[j]));
        }
    }
    m
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let s = six_points();
    let sep = min_separation(&s);
    let rule = build_quadrature(Domain::UnitDisc, 1024).unwrap();
    let dual = dual_system_gram(&s, &rule, &DualOptions::default()).unwrap();
    let op = ExtensionOperator::new(&s, &dual, Exponent::ONE, &rule).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rel_res: f64 = 0.0;
    let mut lin: f64 = 0.0;
    for _ in 0..10 {
        let a: Vec<Complex64> = (0..6).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let b: Vec<Complex64> = (0..6).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let k = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let rep = op.report(&a).unwrap();
        rel_res = rel_res.max(rep.max_residual / rep.residual_scale);
        let sum: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let scaled: Vec<Complex64> = a.iter().map(|x| x * k).collect();
        for z in test_panel(Domain::UnitDisc) {
            let (ha, hb) = (op.eval(&a, &z).unwrap(), op.eval(&b, &z).unwrap());
            let hs = op.eval(&sum, &z).unwrap();
            let hk = op.eval(&scaled, &z).unwrap();
            lin = lin.max((hs - ha - hb).norm() / (1.0 + hs.norm())).max((hk - k * ha).norm() / (1.0 + hk.norm()));
        }
    }
    let nb = op.verify_norm_bound(&NormBoundOptions { batch: 64, seed: 5, ..Default::default() }, None).unwrap();
    let exact = nb.chains.iter().all(|ch| ch.mean_fg.method == ExpectationMethod::Exact);
    let secs = start.elapsed().as_secs_f64();
    check(
        sep >= 0.5 && rel_res < 1e-8 && lin < 1e-10 && nb.chains_hold && exact && secs < 60.0,
        format!(
            "separation {sep:.3}, residual {rel_res:.1e}, linearity {lin:.1e}, Hölder chain {} over {} targets, C_I ≥ {:.4}, {secs:.1} s",
            if nb.chains_hold { "holds" } else { "fails" },
            nb.chains.len(),
            nb.c_i
        ),
    )
}

fn criterion_6() -> Outcome {
    let rule = build_quadrature(Domain::UnitDisc, 512).unwrap();
    let pts: Vec<Complex64> = (0..10)
        .map(|k| Complex64::from_polar(0.3 + 0.06 * k as f64, 2.0 * std::f64::consts::PI * k as f64 / 10.0))
        .collect();
    let s = PointSequence::from_disc(&pts).unwrap();
    let dual = dual_system_collocation(&s, e(3.0), &rule, &DualOptions::default()).unwrap();
    let op = ExtensionOperator::new(&s, &dual, e(1.5), &rule).unwrap();
    let nu: Vec<Complex64> = (0..10).map(|k| c((k as f64).cos(), 0.3 * k as f64 - 1.0)).collect();
    let r = op.randomized_factorization(&nu).unwrap();
    check(
        r.holds && r.panel_size == 40,
        format!("N=10, {} test points, max relative error {:.1e}", r.panel_size, r.max_residual),
    )
}

fn criterion_7() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    let disc_pts: Vec<Complex64> = std::iter::once(c(0.0, 0.0))
        .chain((0..6).map(|k| Complex64::from_polar(0.6, std::f64::consts::PI * k as f64 / 3.0)))
        .chain((0..13).map(|k| Complex64::from_polar(0.9, 0.25 + 2.0 * std::f64::consts::PI * k as f64 / 13.0)))
        .collect();
    let disc = PointSequence::from_disc(&disc_pts).unwrap();
    let rule = build_quadrature(Domain::UnitDisc, 1024).unwrap();
    let g = dual_system_gram(&disc, &rule, &DualOptions::default()).unwrap();
    let sep = min_separation(&disc);
    ok &= g.delta_residual < 1e-9 && sep >= 0.5;
    detail.push(format!("disc N=20 separation {sep:.3} residual {:.1e}", g.delta_residual));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ball_pts: Vec<InteriorPoint> = Vec::new();
    while ball_pts.len() < 20 {
        let cand = random_points(Domain::UnitBall2, 1, 0.9, &mut rng).remove(0);
        if ball_pts.iter().all(|p| gleason_distance(Domain::UnitBall2, p, &cand) >= 0.6) {
            ball_pts.push(cand);
        }
    }
    let ball = PointSequence::new(Domain::UnitBall2, ball_pts).unwrap();
    let brule = build_quadrature(Domain::UnitBall2, 32).unwrap();
    let g = dual_system_gram(&ball, &brule, &DualOptions::default()).unwrap();
    let sep = min_separation(&ball);
    ok &= g.delta_residual < 1e-9 && sep >= 0.5;
    detail.push(format!("ball N=20 separation {sep:.3} residual {:.1e}", g.delta_residual));
    let bl = dual_system_blaschke(&disc, Exponent::INFINITY, &rule).unwrap();
    let fine = build_quadrature(Domain::UnitDisc, 8192).unwrap();
    let exact = blaschke_dual_sup(&bl).unwrap();
    let sampled = dual_bound(&bl, Exponent::INFINITY, &fine).unwrap();
    let gap = (exact - sampled) / exact;
    ok &= bl.delta_residual < 1e-12 && (0.0..1e-3).contains(&gap.max(0.0)) && sampled <= exact * (1.0 + 1e-12);
    detail.push(format!("Blaschke residual {:.1e}, sup {exact:.4} vs node max {sampled:.4}", bl.delta_residual));
    check(ok, detail.join("; "))
}

fn criterion_8() -> Outcome {
    let opts = CarlesonOptions::default();
    let mut single: f64 = 0.0;
    for (domain, res) in [(Domain::UnitDisc, 512), (Domain::UnitBall2, 32), (Domain::Bidisc, 64)] {
        let rule = build_quadrature(domain, res).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = PointSequence::new(domain, random_points(domain, 1, 0.7, &mut rng)).unwrap();
        for q in [1.0, 2.0, 4.0] {
            let est = carleson_constant(&s, e(q), &rule, &opts).unwrap();
            single = single.max((est.constant - 1.0).abs());
        }
    }
    let rule = build_quadrature(Domain::UnitDisc, 1024).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut gap: f64 = 0.0;
    let mut weak: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.gen_range(2..=6);
        let s = PointSequence::new(Domain::UnitDisc, random_points(Domain::UnitDisc, n, 0.8, &mut rng)).unwrap();
        let est = carleson_constant(&s, Exponent::TWO, &rule, &opts).unwrap();
        gap = gap.max((est.constant - est.lower_bound).abs());
        weak = weak.max(weak_carleson_constant(&s, Exponent::TWO, &rule, &opts).unwrap().constant);
    }
    check(
        single < 1e-12 && gap < 1e-8 && weak <= 1.0 + 1e-10,
        format!("single-point deviation {single:.1e}, power vs Gram gap {gap:.1e}, max weak D₂ {weak:.12}"),
    )
}

fn criterion_9() -> Outcome {
    let rule = build_quadrature(Domain::UnitDisc, 1024).unwrap();
    let s = PointSequence::from_disc(&[c(0.6, 0.0), c(-0.6, 0.0), c(0.0, 0.5)]).unwrap();
    let lam = [c(1.0, 0.0), c(0.5, 0.5), c(-0.3, 0.8)];
    let g = dual_system_gram(&s, &rule, &DualOptions::default()).unwrap();
    let r2 = dual_expectation_bound_p_le_2(&g, &lam, &rule, ExpectationMethod::Exact).unwrap();
    let oracle: f64 = (0..3)
        .map(|a| lam[a].norm_sqr() * hardy_core::geometry::lp_norm(&g.dual(a).samples(&rule), Exponent::TWO).powi(2))
        .sum();
    let orth = (r2.expectation.value - oracle).abs() / oracle;
    let d = dual_system_collocation(&s, e(1.5), &rule, &DualOptions::default()).unwrap();
    let r = dual_expectation_bound_p_le_2(&d, &lam, &rule, ExpectationMethod::Exact).unwrap();
    check(
        orth < 1e-10 && r.pointwise_holds && r.bound_holds,
        format!(
            "p=2 orthogonality error {orth:.1e}; p=1.5 pointwise ℓ²≤ℓ^p at all {} nodes: {}, ratio {:.4} ≤ bound {:.4}",
            rule.len(),
            r.pointwise_holds,
            r.ratio,
            r.bound
        ),
    )
}

fn criterion_10() -> Outcome {
    let rule = build_quadrature(Domain::UnitDisc, 2048).unwrap();
    let s = PointSequence::from_disc(&[c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.8)]).unwrap();
    let d = dual_system_blaschke(&s, Exponent::INFINITY, &rule).unwrap();
    let lam = [c(1.0, 0.0), c(-0.5, 0.5), c(0.2, -1.0)];
    let r = dual_expectation_bound_infty(
        &s,
        &d,
        e(4.0),
        &lam,
        &rule,
        ExpectationMethod::Exact,
        &CarlesonOptions::default(),
    )
    .unwrap();
    let max_norm = r.lifted_norms.iter().copied().fold(0.0, f64::max);
    check(
        r.norms_dominated && r.pointwise_dominated && r.bound_holds,
        format!(
            "C = {:.4}, max ‖ρ_a k_(p,a)‖_4 = {max_norm:.4}, ratio {:.4} ≤ budget {:.4} (K̂ {:.3}, weak D₄ {:.4})",
            r.dual_sup, r.ratio, r.budget, r.khintchine_factor, r.weak_carleson
        ),
    )
}

fn criterion_11() -> Outcome {
    let spec = BergmanSpec::disc(0, 32).unwrap();
    let mut worst: f64 = 0.0;
    let mut moment: f64 = 0.0;
    for m in 0..=6u32 {
        let r = subordination_check(|z| z[0].powu(m), Exponent::TWO, &spec).unwrap();
        let oracle = 1.0 / (f64::from(m) + 1.0);
        worst = worst.max((r.bergman.powi(2) - oracle).abs()).max((r.hardy.powi(2) - oracle).abs());
        if m == 2 {
            moment = r.hardy.powi(2);
        }
    }
    let panel: Vec<Poly> = vec![
        Box::new(|z| z[0] + z[1]),
        Box::new(|z| z[0] * z[1]),
        Box::new(|z| 1.0 + z[1] * z[1]),
        Box::new(|z| z[0].powu(3) - 2.0 * z[1]),
        Box::new(|z| z[0] * z[0] + z[0] * z[1] + z[1] * z[1]),
        Box::new(|z| 0.5 + z[0] - z[1].powu(4)),
        Box::new(|z| z[0].powu(2) * z[1].powu(2)),
        Box::new(|z| c(0.0, 1.0) * z[0] + c(2.0, -1.0) * z[1].powu(3)),
        Box::new(|z| (1.0 - 0.5 * z[0] - 0.3 * z[1]).inv()),
        Box::new(|z| (z[0] - z[1]).powu(5)),
    ];
    let spec_fine = BergmanSpec::disc(0, 64).unwrap();
    let contracts = panel
        .iter()
        .all(|f| [1.0, 2.0, 4.0].iter().all(|&p| restriction_check(|z| f(z), e(p), &spec_fine).unwrap().contracts));
    check(
        worst < 1e-10 && contracts,
        format!("max monomial moment error {worst:.1e} (m=2: {moment:.15}), restriction contraction on 10 polynomials × 3 exponents: {contracts}"),
    )
}

fn criterion_12() -> Outcome {
    let run = || {
        let rule = build_quadrature(Domain::UnitDisc, 256).unwrap();
        let s = PointSequence::from_disc(&[c(0.3, 0.1), c(-0.5, 0.2), c(0.1, -0.7)]).unwrap();
        let opts = CarlesonOptions { restarts: 8, seed: 12, ..Default::default() };
        let carleson = carleson_constant(&s, e(3.0), &rule, &opts).unwrap();
        let dual = dual_system_collocation(&s, e(4.0), &rule, &DualOptions::default()).unwrap();
        let op = ExtensionOperator::new(&s, &dual, e(1.5), &rule).unwrap();
        let nb = op
            .verify_norm_bound(&NormBoundOptions { batch: 16, seed: 12, exact_limit: 0, mc_samples: 2000 }, None)
            .unwrap();
        serde_json::to_string(&(carleson, op.report(&[c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.5)]).unwrap(), nb)).unwrap()
    };
    let (a, b) = (run(), run());
    check(a == b, format!("two seeded runs, {} bytes each, identical: {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("reproducing property", criterion_1),
        ("closed-form identities", criterion_2),
        ("structural-hypothesis scans", criterion_3),
        ("Khintchine ratios", criterion_4),
        ("extension correctness", criterion_5),
        ("factorization identity", criterion_6),
        ("dual systems", criterion_7),
        ("Carleson consistency", criterion_8),
        ("p <= 2 expectation bound", criterion_9),
        ("p = inf route", criterion_10),
        ("subordination", criterion_11),
        ("determinism", criterion_12),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {:>2} {name}: {d} [{secs:.1} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {d} [{secs:.1} s]", i + 1)
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
