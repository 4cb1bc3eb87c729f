//! Discrete demand distributions on the non-negative integers.
//!
//! Every pmf is a dense vector indexed from 0. Truncation folds the upper
//! tail into the last kept point, so the total mass stays exactly one.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DemandFamily {
    Poisson { lambda: f64 },
    Triangular { center: usize, halfwidth: usize },
    Discrete,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemandDistribution {
    pmf: Vec<f64>,
    mean: f64,
    family: DemandFamily,
}

/// Smallest index `s` with `P[X > s] < eps`, with the tail folded into `s`.
fn fold_tail(mut pmf: Vec<f64>, eps: f64) -> Vec<f64> {
    if eps <= 0.0 || pmf.len() <= 1 {
        return pmf;
    }
    let mut tail = 0.0;
    let mut cut = pmf.len() - 1;
    // walk down while dropping the point would keep the dropped mass below eps
    while cut > 0 && tail + pmf[cut] < eps {
        tail += pmf[cut];
        cut -= 1;
    }
    if cut + 1 < pmf.len() {
        pmf.truncate(cut + 1);
        pmf[cut] += tail;
    }
    pmf
}

fn trim_trailing_zeros(pmf: &mut Vec<f64>) {
    while pmf.len() > 1 && *pmf.last().unwrap() == 0.0 {
        pmf.pop();
    }
}

impl DemandDistribution {
    /// Poisson(λ) truncated at the smallest `s*` whose upper tail is below `tail_eps`.
    pub fn poisson(lambda: f64, tail_eps: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Distribution(format!("poisson rate must be positive, got {lambda}")));
        }
        if !(tail_eps > 0.0 && tail_eps < 1.0) {
            return Err(Error::Distribution(format!("tail_eps must lie in (0,1), got {tail_eps}")));
        }
        // log-space recursion avoids underflow of e^{-λ} for large rates
        let ln_l = lambda.ln();
        let horizon = (lambda + 40.0 * lambda.sqrt() + 60.0).ceil() as usize;
        let mut raw = Vec::with_capacity(horizon + 1);
        let mut lp = -lambda;
        for s in 0..=horizon {
            if s > 0 {
                lp += ln_l - (s as f64).ln();
            }
            raw.push(lp.exp());
        }
        // suffix sums: tail[s] = P[X > s] from the explicit terms (the mass
        // beyond the horizon is far below double precision)
        let mut cut = horizon;
        let mut tail = 0.0;
        while cut > 0 && tail + raw[cut] < tail_eps {
            tail += raw[cut];
            cut -= 1;
        }
        raw.truncate(cut + 1);
        let kept: f64 = raw.iter().sum();
        raw[cut] += 1.0 - kept;
        if raw[cut] < 0.0 {
            raw[cut] = 0.0;
        }
        Ok(DemandDistribution {
            pmf: raw,
            mean: lambda,
            family: DemandFamily::Poisson { lambda },
        })
    }

    /// Symmetric triangular pmf with weights `1, 2, …, h+1, …, 2, 1`.
    pub fn triangular(center: usize, halfwidth: usize) -> Result<Self> {
        if halfwidth > center {
            return Err(Error::Distribution(format!(
                "triangular({center}, {halfwidth}) would have negative support"
            )));
        }
        let h = halfwidth as f64;
        let total = (h + 1.0) * (h + 1.0);
        let mut pmf = vec![0.0; center + halfwidth + 1];
        for k in 0..=2 * halfwidth {
            let w = (halfwidth + 1) as f64 - (k as f64 - h).abs();
            pmf[center - halfwidth + k] = w / total;
        }
        Ok(DemandDistribution {
            pmf,
            mean: center as f64,
            family: DemandFamily::Triangular { center, halfwidth },
        })
    }

    /// Explicit pmf. Masses must be non-negative and sum to one within 1e-9;
    /// they are renormalized to remove rounding noise.
    pub fn discrete(support: &[usize], mass: &[f64]) -> Result<Self> {
        if support.len() != mass.len() || support.is_empty() {
            return Err(Error::Distribution(
                "support and mass must be non-empty and of equal length".into(),
            ));
        }
        if mass.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::Distribution("masses must be finite and non-negative".into()));
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(Error::Distribution("distribution has zero total mass".into()));
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Distribution(format!("masses sum to {total}, not 1")));
        }
        let max = *support.iter().max().unwrap();
        let mut pmf = vec![0.0; max + 1];
        for (&s, &m) in support.iter().zip(mass) {
            pmf[s] += m / total;
        }
        trim_trailing_zeros(&mut pmf);
        Ok(Self::from_pmf(pmf))
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Distribution(format!("bernoulli parameter {p} outside [0,1]")));
        }
        Self::discrete(&[0, 1], &[1.0 - p, p])
    }

    pub fn point(value: usize) -> Self {
        let mut pmf = vec![0.0; value + 1];
        pmf[value] = 1.0;
        Self::from_pmf(pmf)
    }

    /// Wraps a dense pmf that already sums to one.
    pub(crate) fn from_pmf(pmf: Vec<f64>) -> Self {
        let mean = pmf.iter().enumerate().map(|(s, p)| s as f64 * p).sum();
        DemandDistribution {
            pmf,
            mean,
            family: DemandFamily::Discrete,
        }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    #[inline]
    pub fn prob(&self, s: usize) -> f64 {
        self.pmf.get(s).copied().unwrap_or(0.0)
    }

    /// Nominal mean μ (λ for Poisson, the center for triangular).
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Σ s·ρ^s of the stored (possibly truncated) pmf.
    pub fn pmf_mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(s, p)| s as f64 * p).sum()
    }

    pub fn family(&self) -> &DemandFamily {
        &self.family
    }

    pub fn is_poisson(&self) -> bool {
        matches!(self.family, DemandFamily::Poisson { .. })
    }

    pub fn max_support(&self) -> usize {
        self.pmf.len() - 1
    }

    /// Support points carrying positive mass, ascending.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.pmf.iter().copied().enumerate().filter(|(_, p)| *p > 0.0)
    }

    /// pmf of the independent sum, tail folded at `tail_eps` (0 disables).
    pub fn convolve(&self, other: &Self, tail_eps: f64) -> Self {
        Self::from_pmf(fold_tail(convolve_pmf(&self.pmf, &other.pmf), tail_eps)).with_mean(self.mean + other.mean)
    }

    fn with_mean(mut self, mean: f64) -> Self {
        self.mean = mean;
        self
    }

    /// `P[X > threshold]`.
    pub fn exceed_probability(&self, threshold: usize) -> f64 {
        if threshold + 1 >= self.pmf.len() {
            return 0.0;
        }
        self.pmf[threshold + 1..].iter().sum::<f64>().clamp(0.0, 1.0)
    }

    /// Conditions on `X ≤ cap` by renormalizing the kept mass.
    pub fn truncate_at(&self, cap: usize) -> Result<Self> {
        if cap + 1 >= self.pmf.len() {
            return Ok(self.clone());
        }
        let kept: f64 = self.pmf[..=cap].iter().sum();
        if kept <= 0.0 {
            return Err(Error::Distribution(format!("no mass at or below {cap}")));
        }
        let mut pmf: Vec<f64> = self.pmf[..=cap].iter().map(|p| p / kept).collect();
        trim_trailing_zeros(&mut pmf);
        Ok(Self::from_pmf(pmf))
    }

    /// Same pmf within 1e-12 per point (used for i.i.d. detection).
    pub fn same_distribution(&self, other: &Self) -> bool {
        let len = self.pmf.len().max(other.pmf.len());
        (0..len).all(|s| (self.prob(s) - other.prob(s)).abs() <= 1e-12)
    }

    /// Inverse-CDF draw from a uniform `u ∈ [0,1)`.
    pub fn quantile(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (s, p) in self.pmf.iter().enumerate() {
            acc += p;
            if u < acc {
                return s;
            }
        }
        self.max_support()
    }
}

pub(crate) fn convolve_pmf(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &pa) in a.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for (j, &pb) in b.iter().enumerate() {
            out[i + j] += pa * pb;
        }
    }
    out
}

/// pmfs of the partial sums `Σ_{k≤j} ξ_k` for `j = 0..=t` (row 0 is the empty sum).
#[derive(Clone, Debug)]
pub struct PartialSumTable {
    rows: Vec<DemandDistribution>,
}

impl PartialSumTable {
    pub fn new<'a>(demands: impl IntoIterator<Item = &'a DemandDistribution>, tail_eps: f64) -> Self {
        let mut rows = vec![DemandDistribution::point(0)];
        for d in demands {
            let next = rows.last().unwrap().convolve(d, tail_eps);
            rows.push(next);
        }
        PartialSumTable { rows }
    }

    /// Distribution of the sum of the first `j` demands.
    pub fn row(&self, j: usize) -> &DemandDistribution {
        &self.rows[j]
    }

    pub fn len(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.rows.len() == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_pmf(l: f64, s: usize) -> f64 {
        let mut p = (-l).exp();
        for k in 1..=s {
            p *= l / k as f64;
        }
        p
    }

    #[test]
    fn poisson_matches_closed_form_and_sums_to_one() {
        let d = DemandDistribution::poisson(1.0, 1e-12).unwrap();
        assert!((12..=16).contains(&d.max_support()), "s* = {}", d.max_support());
        for s in 0..d.max_support() {
            assert!((d.prob(s) - poisson_pmf(1.0, s)).abs() < 1e-15);
        }
        assert!((d.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let d9 = DemandDistribution::poisson(9.0, 1e-12).unwrap();
        assert!((d9.pmf_mean() - 9.0).abs() < 1e-9);
    }

    #[test]
    fn poisson_degenerate_tail_keeps_one_point() {
        let d = DemandDistribution::poisson(0.001, 0.999).unwrap();
        assert_eq!(d.max_support(), 0);
        assert_eq!(d.prob(0), 1.0);
    }

    #[test]
    fn triangular_masses() {
        let d = DemandDistribution::triangular(2, 1).unwrap();
        assert_eq!(d.pmf(), &[0.0, 0.25, 0.5, 0.25]);
        let d = DemandDistribution::triangular(10, 2).unwrap();
        let w = [1.0, 2.0, 3.0, 2.0, 1.0];
        for (k, wk) in w.iter().enumerate() {
            assert!((d.prob(8 + k) - wk / 9.0).abs() < 1e-15);
        }
        assert!((d.pmf_mean() - 10.0).abs() < 1e-12);
        assert_eq!(DemandDistribution::triangular(5, 0).unwrap().pmf()[5], 1.0);
        assert!(DemandDistribution::triangular(1, 2).is_err());
    }

    #[test]
    fn convolution_examples() {
        let b = DemandDistribution::bernoulli(0.5).unwrap();
        assert_eq!(b.convolve(&b, 0.0).pmf(), &[0.25, 0.5, 0.25]);
        let p = DemandDistribution::point(3).convolve(&DemandDistribution::point(4), 0.0);
        assert_eq!(p.prob(7), 1.0);
        let a = DemandDistribution::poisson(9.0, 1e-12).unwrap();
        let c = DemandDistribution::poisson(1.0, 1e-12).unwrap();
        let sum = a.convolve(&c, 1e-12);
        for s in 0..30 {
            assert!((sum.prob(s) - poisson_pmf(10.0, s)).abs() < 1e-9);
        }
        assert!((sum.mean() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn exceed_probability_examples() {
        let b = DemandDistribution::bernoulli(0.5).unwrap();
        let four = PartialSumTable::new([&b, &b, &b, &b], 0.0);
        assert_eq!(four.row(4).exceed_probability(3), 1.0 / 16.0);
        assert_eq!(four.row(4).exceed_probability(4), 0.0);
        let p = DemandDistribution::poisson(9.0, 1e-12).unwrap();
        let cdf: f64 = (0..=20).map(|s| poisson_pmf(9.0, s)).sum();
        assert!((p.exceed_probability(20) - (1.0 - cdf)).abs() < 1e-12);
    }

    #[test]
    fn discrete_rejects_bad_mass() {
        assert!(DemandDistribution::discrete(&[0, 1], &[0.0, 0.0]).is_err());
        assert!(DemandDistribution::discrete(&[0, 1], &[0.5, 0.6]).is_err());
        assert!(DemandDistribution::discrete(&[0], &[-1.0]).is_err());
    }

    #[test]
    fn truncation_renormalizes() {
        let p = DemandDistribution::poisson(9.0, 1e-12).unwrap();
        let t = p.truncate_at(20).unwrap();
        assert_eq!(t.max_support(), 20);
        assert!((t.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(t.pmf_mean() < 9.0);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = DemandDistribution::discrete(&[1, 3], &[0.25, 0.75]).unwrap();
        assert_eq!(d.quantile(0.0), 1);
        assert_eq!(d.quantile(0.2499), 1);
        assert_eq!(d.quantile(0.25), 3);
        assert_eq!(d.quantile(0.999), 3);
    }
}
