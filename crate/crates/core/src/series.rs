//! The branch expansion.
//!
//! On branch `j`, with `L = ln_j(gamma2)` and the branch inputs `sigma`, `c`,
//! `mu` from [`model::branch_quantities`], the unknown `v` solves
//!
//! ```text
//! f(v) = e^{-v} + c e^{-v/tau} - sigma v - 1 - c - mu = 0
//! ```
//!
//! and is expanded as
//!
//! ```text
//! v = sum_{k>=0} sum_{m>=1} m^{(k)} h_{m,k} mu^m / m! sigma^k / k!
//! ```
//!
//! (Lagrange inversion in `mu` after expanding in `sigma`). The root is then
//! `s' = (L + ln(1/L) + ln tau + v) / tau + alpha1` in rescaled time.
//!
//! `h_{m,k}` is a sum over `(l, p, q)` of Bell-polynomial products whose only
//! `k` dependence is the scalar factor `(k + m) Gamma(k+m+p) / Gamma(k+l+2)`
//! and the power of `f2'(0)` in the denominator. [`HOrder`] therefore folds the
//! `q` sum into one weight per `(l, p)` once, and [`v_series`] walks `k` with
//! ratio recurrences, forming each term in log-magnitude/phase space so the
//! large factorial ratios at `k ~ 10^3` never overflow.

use crate::combinatorics::{ln_rising_over_factorial, BellDerivs, BellTable, DerivSeq};
use crate::exec::{map_indexed, Exec};
use crate::model::{self, BranchQuantities, Diagnostics, ModelParams, Truncation};
use crate::sum::CompensatedSum;
use crate::{Error, Result, C64};

/// One branch root together with the series value that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub branch: i64,
    /// Root of the rescaled equation `s' = alpha1 + beta1 e^{-s'} + gamma1 e^{-s' tau}`.
    pub s_rescaled: C64,
    /// `s_rescaled / tau1`, in units of 1/time.
    pub s_original: C64,
    pub v: C64,
    /// `|s' - alpha1 - beta1 e^{-s'} - gamma1 e^{-s' tau}|`
    pub residual: f64,
    pub diagnostics: Diagnostics,
}

/// `f2^{(i)}(0) = (-1)^i (1 + c tau^{-i})`, the `i`-th derivative of
/// `e^{-w} + c e^{-w/tau} - 1 - c` at zero.
pub fn f2_deriv(i: usize, c: C64, tau: f64) -> C64 {
    let sign = if i.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * (1.0 + c * tau.powi(-(i as i32)))
}

/// Derivative sequence `f2'(0), f2''(0), ...` for fixed `(c, tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F2Derivs {
    pub c: C64,
    pub tau: f64,
}

impl DerivSeq for F2Derivs {
    fn term(&self, n: usize) -> C64 {
        f2_deriv(n, self.c, self.tau)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// `Gamma(k + m + p) / Gamma(k + l + 2)` for `m + p >= l + 1`.
fn gamma_ratio(k: usize, m: usize, l: usize, p: usize) -> f64 {
    let (hi, lo) = (k + m + p, k + l + 2);
    if hi >= lo {
        (lo..hi).fold(1.0, |acc, i| acc * i as f64)
    } else {
        1.0 / (hi as f64)
    }
}

#[derive(Debug, Clone, Copy)]
struct HTerm {
    l: usize,
    p: usize,
    weight: C64,
}

/// The `k`-independent part of `h_{m,k}` for one order `m`.
#[derive(Debug, Clone)]
pub struct HOrder {
    m: usize,
    f1: C64,
    terms: Vec<HTerm>,
}

impl HOrder {
    fn build(m: usize, seq: &F2Derivs, table: &BellTable<C64>, derivs: &mut BellDerivs<'_, F2Derivs>) -> Self {
        assert!(m >= 1);
        let mut terms = Vec::with_capacity(m * (m + 1) / 2);
        for l in 0..m {
            for p in 0..=l {
                let mut weight = C64::new(0.0, 0.0);
                for q in 0..=(2 * m - 2 - l) {
                    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                    let coef = sign * factorial(m - 1) * factorial(m - p - 1)
                        / (factorial(q) * factorial(l) * factorial(m - l - 1) * factorial(2 * m - 2 - l - q));
                    let row = (2 * m - 2 - l - q) as i64;
                    let col = (m - 1 - p) as i64;
                    let outer = table.get(row, col).expect("table covers every index used");
                    if outer == C64::new(0.0, 0.0) {
                        continue;
                    }
                    weight += coef * outer * derivs.get(l as i64, p as i64, q as u32);
                }
                terms.push(HTerm { l, p, weight });
            }
        }
        HOrder { m, f1: seq.term(1), terms }
    }

    /// Standalone construction (fresh Bell caches).
    pub fn new(m: usize, c: C64, tau: f64) -> Self {
        let seq = F2Derivs { c, tau };
        let f = seq.prefix(2 * m);
        let table = BellTable::new(&f, 2 * m);
        let mut derivs = BellDerivs::new(&seq);
        Self::build(m, &seq, &table, &mut derivs)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Numerator of `h_{m,k}`: the triple sum before division by
    /// `f2'(0)^{2m+k-1}`.
    pub fn numerator(&self, k: usize) -> C64 {
        let m = self.m;
        self.terms.iter().fold(C64::new(0.0, 0.0), |acc, t| {
            acc + t.weight * ((k + m) as f64 * gamma_ratio(k, m, t.l, t.p))
        })
    }

    pub fn h(&self, k: usize) -> C64 {
        self.numerator(k) / self.f1.powi((2 * self.m + k - 1) as i32)
    }
}

/// Every `HOrder` up to `m_max` for one `(c, tau)`, sharing Bell caches.
#[derive(Debug, Clone)]
pub struct SeriesCoefficients {
    pub c: C64,
    pub tau: f64,
    orders: Vec<HOrder>,
}

impl SeriesCoefficients {
    pub fn new(c: C64, tau: f64, m_max: usize) -> Self {
        let seq = F2Derivs { c, tau };
        let f = seq.prefix(2 * m_max);
        let table = BellTable::new(&f, 2 * m_max);
        let mut derivs = BellDerivs::new(&seq);
        let orders = (1..=m_max).map(|m| HOrder::build(m, &seq, &table, &mut derivs)).collect();
        SeriesCoefficients { c, tau, orders }
    }

    pub fn order(&self, m: usize) -> &HOrder {
        &self.orders[m - 1]
    }

    pub fn m_max(&self) -> usize {
        self.orders.len()
    }
}

/// `h_{m,k}(c, tau)`.
pub fn h_mk(m: usize, k: usize, c: C64, tau: f64) -> C64 {
    HOrder::new(m, c, tau).h(k)
}

/// `ln(m^{(k)} sigma^k / k!)`, the scaled weight multiplying `h_{m,k}`.
pub fn log_rising_weight(m: usize, k: usize, sigma: C64) -> C64 {
    ln_rising_over_factorial(m as u64, k as u64) + k as f64 * sigma.ln()
}

/// Truncated double series for `v`.
pub fn v_series(b: &BranchQuantities, tau: f64, t: Truncation) -> Result<C64> {
    let coeffs = SeriesCoefficients::new(b.c, tau, t.m_max);
    v_series_with(&coeffs, b.sigma, b.mu, t.k_max)
}

/// [`v_series`] with precomputed coefficients.
pub fn v_series_with(coeffs: &SeriesCoefficients, sigma: C64, mu: C64, k_max: usize) -> Result<C64> {
    let zero = C64::new(0.0, 0.0);
    if mu == zero {
        return Ok(zero);
    }
    let k_top = if sigma == zero { 0 } else { k_max };
    let ln_sigma = if sigma == zero { zero } else { sigma.ln() };
    let ln_mu = mu.ln();
    let mut total = CompensatedSum::default();
    for order in &coeffs.orders {
        let m = order.m;
        let ln_f1 = order.f1.ln();
        let ln_fixed = m as f64 * ln_mu - factorial(m).ln();
        let mut ratios: Vec<f64> = order.terms.iter().map(|t| gamma_ratio(0, m, t.l, t.p)).collect();
        let mut ln_binom = 0.0;
        let mut per_m = CompensatedSum::default();
        for k in 0..=k_top {
            if k > 0 {
                ln_binom += ((m as f64 - 1.0) / k as f64).ln_1p();
                for (r, t) in ratios.iter_mut().zip(&order.terms) {
                    *r *= (k - 1 + m + t.p) as f64 / (k - 1 + t.l + 2) as f64;
                }
            }
            let poly = order
                .terms
                .iter()
                .zip(&ratios)
                .fold(zero, |acc, (t, r)| acc + t.weight * ((k + m) as f64 * r));
            if poly == zero {
                continue;
            }
            let ln_sigma_k = if k == 0 { zero } else { k as f64 * ln_sigma };
            let ln_term = poly.ln() + ln_binom + ln_sigma_k - (2 * m + k - 1) as f64 * ln_f1 + ln_fixed;
            let term = ln_term.exp();
            if !(term.re.is_finite() && term.im.is_finite()) {
                return Err(Error::NonFiniteTerm { m, k });
            }
            per_m.add(term);
        }
        total.add(per_m.value());
    }
    Ok(total.value())
}

/// Series root on branch `j`. No refinement; the residual is reported.
pub fn root_series(p: &ModelParams, j: i64, t: Truncation) -> Result<Root> {
    let r = model::reduce(p)?;
    let b = model::branch_quantities(&r, j)?;
    let v = v_series(&b, r.tau, t)?;
    let l = b.log_gamma2;
    let s_scaled = (l + l.inv().ln() + r.tau.ln() + v) / r.tau + r.alpha1;
    let s_original = s_scaled / p.tau1;
    let s_rescaled = s_original * p.tau1;
    Ok(Root {
        branch: j,
        s_rescaled,
        s_original,
        v,
        residual: r.char_fn(s_rescaled).norm(),
        diagnostics: model::assumption_diagnostics(&r, j)?,
    })
}

/// Series roots for every branch in `branches`, in order.
pub fn root_series_branches(
    p: &ModelParams,
    branches: std::ops::RangeInclusive<i64>,
    t: Truncation,
    exec: Exec,
) -> Vec<Result<Root>> {
    let js: Vec<i64> = branches.collect();
    map_indexed(exec, js.len(), |i| root_series(p, js[i], t))
}
