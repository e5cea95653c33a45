//! Expectations over independent Bernoulli signs `ε ∈ {±1}^N`.
//!
//! Exact expectations enumerate all `2^N` patterns (N ≤ [`EXACT_CAP`]).
//! Monte Carlo estimates require an explicit seed; sample chunks draw from
//! independent ChaCha streams so results are reproducible bit for bit.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::geometry::{Domain, QuadratureRule};
use crate::kernels::{kernel_samples, NormTable};
use crate::sequences::PointSequence;
use crate::sum;

/// Largest `N` enumerated exactly.
pub const EXACT_CAP: usize = 20;

const MC_CHUNK: usize = 1024;

/// A vector of signs, every entry exactly `±1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignPattern(Vec<f64>);

impl SignPattern {
    pub fn new(signs: Vec<f64>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::param("sign patterns contain only +1 and -1"));
        }
        Ok(SignPattern(signs))
    }

    /// Pattern whose `i`-th sign is `-1` iff bit `i` of `bits` is set.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        let mut p = SignPattern(vec![1.0; n]);
        p.set_bits(bits);
        p
    }

    fn set_bits(&mut self, bits: u64) {
        for (i, s) in self.0.iter_mut().enumerate() {
            *s = if bits >> i & 1 == 1 { -1.0 } else { 1.0 };
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signs(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpectationMethod {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

impl ExpectationMethod {
    /// Exact up to `exact_limit` signs, seeded Monte Carlo above.
    pub fn auto(n: usize, exact_limit: usize, samples: usize, seed: u64) -> Self {
        if n <= exact_limit.min(EXACT_CAP) {
            ExpectationMethod::Exact
        } else {
            ExpectationMethod::MonteCarlo { samples, seed }
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, ExpectationMethod::Exact)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationEstimate {
    pub value: f64,
    pub method: ExpectationMethod,
    /// Zero for exact enumeration.
    pub stderr: f64,
}

/// `𝔼 F(ε)`.
pub fn expect<F>(f: F, n: usize, method: ExpectationMethod) -> Result<ExpectationEstimate>
where
    F: Fn(&SignPattern) -> f64 + Sync,
{
    let mut out = expect_many(|e, acc| acc[0] = f(e), 1, n, method)?;
    Ok(out.remove(0))
}

/// Several expectations from one pass over the patterns. `f` writes
/// `outputs` values per pattern.
pub fn expect_many<F>(f: F, outputs: usize, n: usize, method: ExpectationMethod) -> Result<Vec<ExpectationEstimate>>
where
    F: Fn(&SignPattern, &mut [f64]) + Sync,
{
    match method {
        ExpectationMethod::Exact => {
            if n > EXACT_CAP {
                return Err(Error::Capacity(format!("exact enumeration needs N <= {EXACT_CAP}, got {n}")));
            }
            let total: u64 = 1 << n;
            let chunk: u64 = 1 << n.min(10);
            let chunks = total / chunk;
            let partial: Vec<Vec<f64>> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut acc = vec![0.0; outputs];
                    let mut buf = vec![0.0; outputs];
                    let mut pat = SignPattern(vec![1.0; n]);
                    for bits in c * chunk..(c + 1) * chunk {
                        pat.set_bits(bits);
                        f(&pat, &mut buf);
                        acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
                    }
                    acc
                })
                .collect();
            Ok((0..outputs)
                .map(|k| {
                    let col: Vec<f64> = partial.iter().map(|p| p[k]).collect();
                    ExpectationEstimate { value: sum::pairwise(&col) / total as f64, method, stderr: 0.0 }
                })
                .collect())
        }
        ExpectationMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::param("Monte Carlo needs at least one sample"));
            }
            let chunks = samples.div_ceil(MC_CHUNK);
            let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(c as u64);
                    let count = MC_CHUNK.min(samples - c * MC_CHUNK);
                    let mut s1 = vec![0.0; outputs];
                    let mut s2 = vec![0.0; outputs];
                    let mut buf = vec![0.0; outputs];
                    let mut pat = SignPattern(vec![1.0; n]);
                    for _ in 0..count {
                        for s in pat.0.iter_mut() {
                            *s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                        }
                        f(&pat, &mut buf);
                        for k in 0..outputs {
                            s1[k] += buf[k];
                            s2[k] += buf[k] * buf[k];
                        }
                    }
                    (s1, s2)
                })
                .collect();
            let m = samples as f64;
            Ok((0..outputs)
                .map(|k| {
                    let a: Vec<f64> = partial.iter().map(|p| p.0[k]).collect();
                    let b: Vec<f64> = partial.iter().map(|p| p.1[k]).collect();
                    let mean = sum::pairwise(&a) / m;
                    let var =
                        if samples > 1 { ((sum::pairwise(&b) - m * mean * mean) / (m - 1.0)).max(0.0) } else { 0.0 };
                    ExpectationEstimate { value: mean, method, stderr: (var / m).sqrt() }
                })
                .collect())
        }
    }
}

/// `𝔼|Σ ε_a x_a|^q / (Σ |x_a|²)^{q/2}`.
pub fn khintchine_ratio(x: &[Complex64], q: Exponent, method: ExpectationMethod) -> Result<ExpectationEstimate> {
    if q.is_infinite() {
        return Err(Error::param("Khintchine ratio needs finite q"));
    }
    let l2: f64 = x.iter().map(|c| c.norm_sqr()).sum();
    if l2 == 0.0 {
        return Err(Error::param("Khintchine ratio of the zero vector"));
    }
    let qv = q.value();
    let est = expect(
        |e| {
            let s: Complex64 = x.iter().zip(e.signs()).map(|(x, s)| x * s).sum();
            s.norm_sqr().powf(0.5 * qv)
        },
        x.len(),
        method,
    )?;
    let denom = l2.powf(0.5 * qv);
    Ok(ExpectationEstimate { value: est.value / denom, method, stderr: est.stderr / denom })
}

/// The three quantities in "q-Carleson implies weakly q-Carleson".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakChainReport {
    pub q: Exponent,
    /// `‖Σ |μ_a|² |k_{q,a}|²‖_{q/2}^{q/2}`.
    pub square_function: f64,
    /// `𝔼 ‖Σ μ_a ε_a k_{q,a}‖_q^q`.
    pub expectation: ExpectationEstimate,
    /// `D_q^q ‖μ‖_q^q`.
    pub carleson_bound: f64,
    /// `expectation / square_function`: the measured Khintchine factor.
    pub khintchine_factor: f64,
    /// `expectation / carleson_bound`.
    pub carleson_factor: f64,
    pub right_holds: bool,
}

/// Measure the chain `‖Σ|μ_a|²|k_{q,a}|²‖_{q/2}^{q/2} ≲ 𝔼‖Σ μ_a ε_a k_{q,a}‖_q^q ≤ D_q^q ‖μ‖_q^q`.
pub fn weak_from_carleson_check(
    seq: &PointSequence,
    q: Exponent,
    mu: &[Complex64],
    rule: &QuadratureRule,
    d_q: f64,
    method: ExpectationMethod,
) -> Result<WeakChainReport> {
    if q.value() < 2.0 || q.is_infinite() {
        return Err(Error::param(format!("weak Carleson chain needs 2 <= q < inf, got {q}")));
    }
    if mu.len() != seq.len() {
        return Err(Error::Shape("coefficient vector length differs from the sequence".into()));
    }
    let cols = normalized_kernel_columns(seq, q, rule);
    let qv = q.value();
    let nodes = rule.len();
    let square_function = sum::par_sum(nodes, |j| {
        let s: f64 = cols.iter().zip(mu).map(|(c, m)| m.norm_sqr() * c[j].norm_sqr()).sum();
        rule.weight(j) * s.powf(0.5 * qv)
    });
    let expectation = expect(
        |e| {
            let mut acc = 0.0;
            for j in 0..nodes {
                let v: Complex64 = cols.iter().zip(mu).zip(e.signs()).map(|((c, m), s)| c[j] * m * s).sum();
                acc += rule.weight(j) * v.norm_sqr().powf(0.5 * qv);
            }
            acc
        },
        seq.len(),
        method,
    )?;
    let mu_q: f64 = mu.iter().map(|m| m.norm().powf(qv)).sum();
    let carleson_bound = d_q.powf(qv) * mu_q;
    let slack = 1e-8 * carleson_bound + 4.0 * expectation.stderr;
    Ok(WeakChainReport {
        q,
        square_function,
        expectation,
        carleson_bound,
        khintchine_factor: expectation.value / square_function,
        carleson_factor: expectation.value / carleson_bound,
        right_holds: expectation.value <= carleson_bound + slack,
    })
}

/// Samples of `k_{q,a} = k_a / ‖k_a‖_q`, one column per point.
pub(crate) fn normalized_kernel_columns(
    seq: &PointSequence,
    q: Exponent,
    rule: &QuadratureRule,
) -> Vec<Vec<Complex64>> {
    let domain: Domain = seq.domain();
    seq.points()
        .iter()
        .map(|a| {
            let s = kernel_samples(domain, a, rule);
            let n = NormTable::build(domain, a, &[q], rule).get(q).expect("norm just computed");
            s.values().iter().map(|v| v / n).collect()
        })
        .collect()
}
