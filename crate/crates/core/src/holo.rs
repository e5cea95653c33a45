//! Finite symbolic combinations of kernel factors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundarySamples, Domain, QuadratureRule};
use crate::kernels::kernel_with_conj;

/// Disc Blaschke factor `(|b|/b)(b - z)/(1 - b̄ z)`, or `-z` at `b = 0`.
pub fn blaschke_factor(b: Complex64, z: Complex64) -> Complex64 {
    if b == Complex64::new(0.0, 0.0) {
        return -z;
    }
    (b.norm() / b) * (b - z) / (1.0 - b.conj() * z)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    /// `k_base(z)^power`.
    Kernel { base: Vec<Complex64>, power: u32 },
    /// `Π_b φ_b(z) / φ_b(anchor)` over `zeros`, disc only.
    BlaschkeQuotient {
        zeros: Vec<Complex64>,
        anchor: Complex64,
        /// `1 / Π_b φ_b(anchor)`.
        scale: Complex64,
    },
}

impl Factor {
    pub fn kernel(base: &[Complex64]) -> Self {
        Factor::Kernel { base: base.to_vec(), power: 1 }
    }

    pub fn blaschke_quotient(zeros: Vec<Complex64>, anchor: Complex64) -> Result<Self> {
        let denom: Complex64 = zeros.iter().map(|&b| blaschke_factor(b, anchor)).product();
        if denom.norm() == 0.0 {
            return Err(Error::Contract("Blaschke anchor coincides with a zero".into()));
        }
        Ok(Factor::BlaschkeQuotient { zeros, anchor, scale: denom.inv() })
    }

    fn eval(&self, domain: Domain, z: &[Complex64]) -> Complex64 {
        match self {
            Factor::Kernel { base, power } => {
                let conj: Vec<Complex64> = base.iter().map(|c| c.conj()).collect();
                kernel_with_conj(domain, &conj, z).powu(*power)
            }
            Factor::BlaschkeQuotient { zeros, scale, .. } => {
                zeros.iter().map(|&b| blaschke_factor(b, z[0])).product::<Complex64>() * scale
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: Complex64,
    pub factors: Vec<Factor>,
}

/// `Σ_t coeff_t · Π factors_t`, a holomorphic function on `domain`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoloExpr {
    domain: Domain,
    terms: Vec<Term>,
}

impl HoloExpr {
    pub fn zero(domain: Domain) -> Self {
        HoloExpr { domain, terms: Vec::new() }
    }

    pub fn constant(domain: Domain, c: Complex64) -> Self {
        HoloExpr { domain, terms: vec![Term { coeff: c, factors: Vec::new() }] }
    }

    /// `coeff · k_a`.
    pub fn kernel(domain: Domain, a: &[Complex64], coeff: Complex64) -> Self {
        HoloExpr { domain, terms: vec![Term { coeff, factors: vec![Factor::kernel(a)] }] }
    }

    pub fn from_terms(domain: Domain, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            for f in &t.factors {
                match f {
                    Factor::Kernel { base, .. } if base.len() != domain.dim() => {
                        return Err(Error::Shape("kernel base dimension mismatch".into()))
                    }
                    Factor::BlaschkeQuotient { .. } if domain != Domain::UnitDisc => {
                        return Err(Error::Unsupported("Blaschke factors exist on the disc only".into()))
                    }
                    _ => {}
                }
            }
        }
        Ok(HoloExpr { domain, terms })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.terms.iter().map(|t| t.factors.iter().fold(t.coeff, |acc, f| acc * f.eval(self.domain, z))).sum()
    }

    pub fn samples<'r>(&self, rule: &'r QuadratureRule) -> BoundarySamples<'r> {
        rule.sample(|z| self.eval(z))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let terms = self.terms.iter().map(|t| Term { coeff: t.coeff * c, factors: t.factors.clone() }).collect();
        HoloExpr { domain: self.domain, terms }
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, other: &HoloExpr, c: Complex64) {
        debug_assert_eq!(self.domain, other.domain);
        self.terms.extend(other.terms.iter().map(|t| Term { coeff: t.coeff * c, factors: t.factors.clone() }));
    }

    /// Pointwise product, distributed over the terms.
    pub fn mul(&self, other: &HoloExpr) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                terms.push(Term { coeff: a.coeff * b.coeff, factors });
            }
        }
        HoloExpr { domain: self.domain, terms }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kernel_term_evaluates() {
        let e = HoloExpr::kernel(Domain::UnitDisc, &[c(0.5, 0.0)], c(2.0, 0.0));
        assert!((e.eval(&[c(0.5, 0.0)]) - 2.0 * 4.0 / 3.0).norm() < 1e-15);
    }

    #[test]
    fn linear_in_coefficients() {
        let a = HoloExpr::kernel(Domain::Bidisc, &[c(0.3, 0.1), c(-0.2, 0.4)], c(1.0, 2.0));
        let b = HoloExpr::kernel(Domain::Bidisc, &[c(0.0, 0.5), c(0.6, 0.0)], c(-0.5, 0.0));
        let mut sum = a.clone();
        sum.add_scaled(&b, c(3.0, 0.0));
        let z = [c(0.2, 0.3), c(-0.7, 0.1)];
        assert!((sum.eval(&z) - (a.eval(&z) + 3.0 * b.eval(&z))).norm() < 1e-14);
        assert!((a.scaled(c(0.0, 1.0)).eval(&z) - c(0.0, 1.0) * a.eval(&z)).norm() < 1e-15);
    }

    #[test]
    fn product_distributes() {
        let a = HoloExpr::kernel(Domain::UnitDisc, &[c(0.3, 0.0)], c(1.0, 0.0));
        let mut b = HoloExpr::constant(Domain::UnitDisc, c(2.0, 0.0));
        b.add_scaled(&HoloExpr::kernel(Domain::UnitDisc, &[c(-0.4, 0.2)], c(1.0, 0.0)), c(1.0, 0.0));
        let z = [c(0.1, -0.6)];
        assert!((a.mul(&b).eval(&z) - a.eval(&z) * b.eval(&z)).norm() < 1e-14);
    }

    #[test]
    fn blaschke_quotient_interpolates() {
        let f = Factor::blaschke_quotient(vec![c(0.5, 0.0), c(0.0, 0.3)], c(-0.2, 0.1)).unwrap();
        let e = HoloExpr::from_terms(Domain::UnitDisc, vec![Term { coeff: c(1.0, 0.0), factors: vec![f] }]).unwrap();
        assert!((e.eval(&[c(-0.2, 0.1)]) - 1.0).norm() < 1e-14);
        assert!(e.eval(&[c(0.5, 0.0)]).norm() < 1e-15);
        assert!(e.eval(&[c(0.0, 0.3)]).norm() < 1e-15);
        assert!(Factor::blaschke_quotient(vec![c(0.5, 0.0)], c(0.5, 0.0)).is_err());
    }

    #[test]
    fn blaschke_unimodular_on_circle() {
        for b in [c(0.0, 0.0), c(0.5, 0.0), c(-0.3, 0.8)] {
            for k in 0..16 {
                let z = Complex64::from_polar(1.0, k as f64 * 0.4);
                assert!((blaschke_factor(b, z).norm() - 1.0).abs() < 1e-14);
            }
        }
    }
}
