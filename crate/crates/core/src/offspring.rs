//! Offspring laws and exact Galton-Watson generation-size moments.
//!
//! Laws have finite support. All moments of `Z_n` are obtained from the
//! derivative recursions of the iterated generating function `f_n`, never
//! from closed forms with unnamed constants.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum p_k = 1` accepted from callers and parsers.
pub const PARSE_MASS_TOLERANCE: f64 = 1e-9;
/// Mass left out when truncating an infinite-support law.
pub const TRUNCATION_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawRepr", into = "LawRepr")]
pub struct OffspringLaw {
    pmf: Vec<f64>,
    mean_mu: f64,
    var_sigma2: f64,
    fact2: f64,
    fact3: f64,
    m2: f64,
    m3: f64,
    /// For truncations of heavy-tailed laws: moments of order `>= tail_index`
    /// of the untruncated law are infinite.
    tail_index: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LawRepr {
    pmf: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail_index: Option<f64>,
}

impl TryFrom<LawRepr> for OffspringLaw {
    type Error = Error;

    fn try_from(repr: LawRepr) -> Result<Self> {
        let mut pairs = Vec::with_capacity(repr.pmf.len());
        for (k, p) in repr.pmf {
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| Error::InvalidLaw(format!("offspring count {k:?} is not a nonnegative integer")))?;
            pairs.push((k, p));
        }
        let law = OffspringLaw::from_pairs(&pairs)?;
        match repr.tail_index {
            Some(alpha) => law.with_tail_index(alpha),
            None => Ok(law),
        }
    }
}

impl From<OffspringLaw> for LawRepr {
    fn from(law: OffspringLaw) -> Self {
        let pmf = law
            .pmf
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| (k.to_string(), p))
            .collect();
        LawRepr { pmf, tail_index: law.tail_index }
    }
}

impl OffspringLaw {
    /// Builds a law from `p_k` indexed by `k`.
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::InvalidLaw("empty pmf".into()));
        }
        for (k, &p) in pmf.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidLaw(format!("p_{k} = {p} is not a probability")));
            }
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > PARSE_MASS_TOLERANCE {
            return Err(Error::InvalidLaw(format!(
                "probabilities sum to {total}, expected 1 within {PARSE_MASS_TOLERANCE:e}"
            )));
        }
        let mut pmf: Vec<f64> = pmf.into_iter().map(|p| p / total).collect();
        while pmf.len() > 1 && pmf[pmf.len() - 1] == 0.0 {
            pmf.pop();
        }

        let moment = |g: &dyn Fn(f64) -> f64| -> f64 {
            pmf.iter().enumerate().map(|(k, &p)| p * g(k as f64)).sum()
        };
        let mean_mu = moment(&|k| k);
        let m2 = moment(&|k| k * k);
        let m3 = moment(&|k| k * k * k);
        let fact2 = moment(&|k| k * (k - 1.0));
        let fact3 = moment(&|k| k * (k - 1.0) * (k - 2.0));
        Ok(OffspringLaw {
            pmf,
            mean_mu,
            var_sigma2: m2 - mean_mu * mean_mu,
            fact2,
            fact3,
            m2,
            m3,
            tail_index: None,
        })
    }

    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let max_k = pairs
            .iter()
            .map(|&(k, _)| k)
            .max()
            .ok_or_else(|| Error::InvalidLaw("empty pmf".into()))?;
        let mut pmf = vec![0.0; max_k + 1];
        for &(k, p) in pairs {
            if p < 0.0 {
                return Err(Error::InvalidLaw(format!("p_{k} = {p} is negative")));
            }
            pmf[k] += p;
        }
        Self::new(pmf)
    }

    /// Geometric law `p_k = (1 - q) q^k`, truncated once the remaining tail
    /// mass drops below [`TRUNCATION_MASS`] and renormalised.
    pub fn geometric_truncated(q: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidLaw(format!("geometric ratio {q} outside [0, 1)")));
        }
        let mut pmf = Vec::new();
        let mut p = 1.0 - q;
        let mut tail = 1.0;
        while tail >= TRUNCATION_MASS {
            pmf.push(p);
            tail -= p;
            p *= q;
            if pmf.len() > 100_000 {
                return Err(Error::InvalidLaw("geometric truncation does not terminate".into()));
            }
        }
        let total: f64 = pmf.iter().sum();
        Self::new(pmf.into_iter().map(|p| p / total).collect())
    }

    /// Marks this finite law as the truncation of a heavy-tailed law whose
    /// moments of order `>= alpha` diverge.
    pub fn with_tail_index(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidLaw(format!("tail index {alpha} must be positive")));
        }
        self.tail_index = Some(alpha);
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidLaw(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("law serialises")
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn p(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    pub fn max_offspring(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.mean_mu
    }

    pub fn variance(&self) -> f64 {
        self.var_sigma2
    }

    /// `f''(1) = E[xi (xi - 1)]`
    pub fn fact2(&self) -> f64 {
        self.fact2
    }

    /// `f'''(1) = E[xi (xi - 1) (xi - 2)]`
    pub fn fact3(&self) -> f64 {
        self.fact3
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn m3(&self) -> f64 {
        self.m3
    }

    pub fn tail_index(&self) -> Option<f64> {
        self.tail_index
    }

    /// Whether `E[xi^order]` is finite. Always true for a plain finite law.
    pub fn moment_finite(&self, order: f64) -> bool {
        self.tail_index.is_none_or(|alpha| order < alpha)
    }

    pub fn is_subcritical(&self) -> bool {
        self.mean_mu < 1.0
    }

    /// Some `k >= 2` has positive probability, so traps actually form.
    pub fn is_nontrivial(&self) -> bool {
        self.pmf.iter().skip(2).any(|&p| p > 0.0)
    }

    pub fn require_subcritical(&self) -> Result<()> {
        if self.is_subcritical() {
            Ok(())
        } else {
            Err(Error::NotSubcritical { mean: self.mean_mu })
        }
    }

    /// Generating function `f(s) = sum p_k s^k`.
    pub fn pgf(&self, s: f64) -> f64 {
        self.pmf.iter().rev().fold(0.0, |acc, &p| acc * s + p)
    }

    pub fn sampler(&self) -> OffspringSampler {
        OffspringSampler::new(&self.pmf)
    }

    pub fn size_biased(&self) -> Result<SizeBiasedLaw> {
        size_biased(self)
    }
}

/// Law of `xi*`, `P(xi* = k) = k p_k / mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeBiasedLaw {
    pmf: Vec<f64>,
}

impl SizeBiasedLaw {
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn p(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, &p)| k as f64 * p).sum()
    }

    pub fn sampler(&self) -> OffspringSampler {
        OffspringSampler::new(&self.pmf)
    }
}

pub fn size_biased(law: &OffspringLaw) -> Result<SizeBiasedLaw> {
    let mu = law.mean();
    if mu <= 0.0 {
        return Err(Error::InvalidLaw("size-biasing needs a positive mean".into()));
    }
    let pmf = law
        .pmf()
        .iter()
        .enumerate()
        .map(|(k, &p)| k as f64 * p / mu)
        .collect();
    Ok(SizeBiasedLaw { pmf })
}

/// Draws offspring counts from a finite pmf.
#[derive(Debug, Clone)]
pub struct OffspringSampler {
    index: Option<WeightedIndex<f64>>,
    constant: usize,
}

impl OffspringSampler {
    fn new(pmf: &[f64]) -> Self {
        let support: Vec<usize> = (0..pmf.len()).filter(|&k| pmf[k] > 0.0).collect();
        if support.len() == 1 {
            return OffspringSampler { index: None, constant: support[0] };
        }
        let index = WeightedIndex::new(pmf.iter().copied()).expect("pmf has positive mass");
        OffspringSampler { index: Some(index), constant: 0 }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.index {
            Some(index) => index.sample(rng),
            None => self.constant,
        }
    }
}

/// `E[Z_n] = mu^n`.
pub fn mean_zn(law: &OffspringLaw, n: u32) -> f64 {
    law.mean().powi(n as i32)
}

/// `f_n''(1)` for `n >= 1` via `f''_{n+1}(1) = f''(1) mu^{2n} + mu f''_n(1)`.
fn fact2_zn(law: &OffspringLaw, n: u32) -> f64 {
    let mu = law.mean();
    let mut f2 = law.fact2();
    for k in 1..n {
        f2 = law.fact2() * mu.powi(2 * k as i32) + mu * f2;
    }
    f2
}

/// `E[Z_n^2] = f_n''(1) + mu^n`, for `n >= 1`; `n = 0` gives 1.
pub fn second_moment_zn(law: &OffspringLaw, n: u32) -> f64 {
    if n == 0 {
        return 1.0;
    }
    fact2_zn(law, n) + mean_zn(law, n)
}

/// `E[Z_n^3] = f_n'''(1) + 3 f_n''(1) + mu^n`, with
/// `f'''_{n+1}(1) = 3 f''(1) f_n'(1) f_n''(1) + f_n'(1)^3 f'''(1) + f'(1) f_n'''(1)`.
pub fn third_moment_zn(law: &OffspringLaw, n: u32) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mu = law.mean();
    let mut f2 = law.fact2();
    let mut f3 = law.fact3();
    for k in 1..n {
        let d1 = mu.powi(k as i32);
        let next_f3 = 3.0 * law.fact2() * d1 * f2 + d1.powi(3) * law.fact3() + mu * f3;
        let next_f2 = law.fact2() * d1 * d1 + mu * f2;
        f3 = next_f3;
        f2 = next_f2;
    }
    f3 + 3.0 * f2 + mean_zn(law, n)
}

/// `E[Z_n Z_m] = mu^{m-n} E[Z_n^2]` for `n <= m`.
pub fn cross_moment_zn_zm(law: &OffspringLaw, n: u32, m: u32) -> Result<f64> {
    if n > m {
        return Err(Error::Domain(format!("cross moment needs n <= m, got n={n}, m={m}")));
    }
    Ok(law.mean().powi((m - n) as i32) * second_moment_zn(law, n))
}

/// `1 - f(1 - q)`, summed termwise so small `q` keeps full precision.
fn survival_step(law: &OffspringLaw, q: f64) -> f64 {
    let l = (-q).ln_1p();
    law.pmf().iter().enumerate().skip(1).map(|(k, &p)| -p * (k as f64 * l).exp_m1()).sum()
}

/// `P(Z_n > 0) = 1 - f_n(0)`.
pub fn survival_probability(law: &OffspringLaw, n: u32) -> f64 {
    let mut q = 1.0;
    for _ in 0..n {
        q = survival_step(law, q);
    }
    q
}

/// `P(Z_n > 0) / mu^n`; non-increasing in `n`.
pub fn survival_ratio(law: &OffspringLaw, n: u32) -> f64 {
    survival_probability(law, n) / mean_zn(law, n)
}

/// Plateau estimate of `c_mu = lim P(Z_n > 0) / mu^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauEstimate {
    pub value: f64,
    pub generations: u32,
    pub last_change: f64,
}

/// Iterates the survival ratio until successive values differ by less than
/// `tolerance`, or `max_generations` is reached.
pub fn survival_constant(law: &OffspringLaw, tolerance: f64, max_generations: u32) -> Result<PlateauEstimate> {
    law.require_subcritical()?;
    let mu = law.mean();
    let mut q = 1.0;
    let mut mu_n = 1.0;
    let mut prev = 1.0;
    for n in 1..=max_generations {
        q = survival_step(law, q);
        mu_n *= mu;
        let ratio = q / mu_n;
        let change = (prev - ratio).abs();
        if change < tolerance {
            return Ok(PlateauEstimate { value: ratio, generations: n, last_change: change });
        }
        prev = ratio;
    }
    Err(Error::Domain(format!(
        "survival ratio did not plateau within {max_generations} generations"
    )))
}
