//! Benchmark fixtures shared by the criterion targets.

use hardy_core::{Complex64, Domain, InteriorPoint, PointSequence};

/// `n` disc points on two rings, separated enough for well-conditioned
/// dual systems.
pub fn disc_rings(n: usize) -> PointSequence {
    let pts: Vec<Complex64> = (0..n)
        .map(|k| {
            let r = if k % 2 == 0 { 0.4 } else { 0.8 };
            Complex64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / n as f64)
        })
        .collect();
    PointSequence::from_disc(&pts).expect("distinct interior points")
}

/// A fixed interior point of each domain with modulus about 0.7.
pub fn probe(domain: Domain) -> InteriorPoint {
    let coords = match domain {
        Domain::UnitDisc => vec![Complex64::new(0.5, 0.49)],
        Domain::UnitBall2 => vec![Complex64::new(0.4, 0.2), Complex64::new(-0.3, 0.4)],
        Domain::Bidisc => vec![Complex64::new(0.5, 0.49), Complex64::new(0.0, -0.7)],
    };
    InteriorPoint::new(domain, coords).expect("interior probe")
}
