//! Lambert W on every branch, and the single-lag eigenvalue map
//! `s = W_j(beta tau e^{-alpha tau}) / tau + alpha` for `s = alpha + beta e^{-s tau}`.
//!
//! Series give the starting point only: the principal Taylor series for small
//! arguments, the branch-point expansion near `-1/e`, and otherwise the
//! asymptotic expansion
//!
//! ```text
//! W_j(x) = L1 - L2 + sum_{l>=0} sum_{m>=1} C_lm L2^m / L1^{l+m},
//! L1 = ln x + 2 pi i j,  L2 = ln L1,  C_lm = (-1)^l [l+m, l+1] / m!
//! ```
//!
//! with the outer logarithm principal. Halley's iteration finishes the job.

use std::f64::consts::{E, PI};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::combinatorics::stirling1_table;
use crate::{Error, Result, C64};

const MAX_HALLEY: usize = 100;

/// Exact coefficients `C_lm` of the asymptotic branch expansion.
#[derive(Debug, Clone)]
pub struct WBranchSeriesTerms {
    pub l_max: usize,
    pub m_max: usize,
    exact: Vec<Vec<BigRational>>,
    float: Vec<Vec<f64>>,
}

impl WBranchSeriesTerms {
    pub fn new(l_max: usize, m_max: usize) -> Self {
        let stirling = stirling1_table(l_max + m_max);
        let mut exact = Vec::with_capacity(l_max + 1);
        for l in 0..=l_max {
            let mut row = Vec::with_capacity(m_max);
            for m in 1..=m_max {
                let fact: BigUint = (1..=m as u64).fold(BigUint::one(), |a, i| a * i);
                let s = BigInt::from(stirling[l + m][l + 1].clone());
                let signed = if l % 2 == 0 { s } else { -s };
                row.push(BigRational::new(signed, BigInt::from(fact)));
            }
            exact.push(row);
        }
        let float = exact
            .iter()
            .map(|row| row.iter().map(|c| c.to_f64().unwrap_or(0.0)).collect())
            .collect();
        WBranchSeriesTerms { l_max, m_max, exact, float }
    }

    /// `C_lm` for `m >= 1`.
    pub fn coefficient(&self, l: usize, m: usize) -> &BigRational {
        &self.exact[l][m - 1]
    }

    /// Truncated expansion of `W_j(x)`.
    pub fn evaluate(&self, j: i64, x: C64) -> C64 {
        let l1 = x.ln() + C64::new(0.0, 2.0 * PI * j as f64);
        let l2 = l1.ln();
        let mut w = l1 - l2;
        for (l, row) in self.float.iter().enumerate() {
            for (mi, c) in row.iter().enumerate() {
                let m = mi + 1;
                if *c != 0.0 {
                    w += *c * l2.powi(m as i32) / l1.powi((l + m) as i32);
                }
            }
        }
        w
    }
}

impl Default for WBranchSeriesTerms {
    fn default() -> Self {
        Self::new(4, 4)
    }
}

/// Principal-branch Taylor series `sum_{n>=1} (-n)^{n-1} x^n / n!`, `|x| < 1/e`.
pub fn principal_series(x: C64, terms: usize) -> C64 {
    let mut sum = C64::zero();
    let mut xn = C64::one();
    let mut fact = 1.0;
    for n in 1..=terms {
        xn *= x;
        fact *= n as f64;
        let coef = (-(n as f64)).powi(n as i32 - 1) / fact;
        sum += coef * xn;
    }
    sum
}

/// Expansion about the branch point `x = -1/e` in `p = sqrt(2 (e x + 1))`;
/// `sign = +1` gives the principal branch, `-1` the lower real branch.
fn branch_point_series(x: C64, sign: f64) -> C64 {
    let p = sign * (2.0 * (E * x + 1.0)).sqrt();
    -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p - 43.0 / 540.0 * p.powi(4)
}

/// Whether `x` is close enough to `-1/e` that accuracy may suffer on the
/// branches meeting there.
pub fn near_branch_point(x: C64) -> bool {
    (x + 1.0 / E).norm() < 1e-8
}

fn initial_guess(j: i64, x: C64, asymptotic: &WBranchSeriesTerms) -> C64 {
    let near_bp = (x + 1.0 / E).norm() < 0.3;
    match j {
        0 if x.norm() < 0.3 => principal_series(x, 40),
        0 if near_bp => branch_point_series(x, 1.0),
        0 if x.re > -1.0 && x.re < 1.5 && x.im.abs() < 1.0 => (1.0 + x).ln(),
        -1 if near_bp && x.im >= 0.0 => branch_point_series(x, -1.0),
        1 if near_bp && x.im < 0.0 => branch_point_series(x, -1.0),
        -1 if x.norm() < 0.3 && x.im == 0.0 && x.re < 0.0 => {
            // real lower branch on (-1/e, 0)
            let l1 = C64::new((-x.re).ln(), 0.0);
            l1 - C64::new((-l1.re).ln(), 0.0)
        }
        _ => {
            let guess = asymptotic.evaluate(j, x);
            if guess.re.is_finite() && guess.im.is_finite() {
                guess
            } else {
                let l1 = x.ln() + C64::new(0.0, 2.0 * PI * j as f64);
                l1 - l1.ln()
            }
        }
    }
}

/// Halley iteration on `w e^w - x`.
fn halley(mut w: C64, x: C64) -> C64 {
    for _ in 0..MAX_HALLEY {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom.norm() == 0.0 || !denom.re.is_finite() {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.norm() <= 1e-15 * (1.0 + w.norm()) {
            break;
        }
    }
    w
}

/// `W_j(x)`, the branch-`j` solution of `w e^w = x`.
pub fn lambert_w(j: i64, x: C64) -> Result<C64> {
    if !(x.re.is_finite() && x.im.is_finite()) {
        return Err(Error::InvalidArgument("lambert_w argument must be finite".into()));
    }
    if x == C64::zero() {
        return if j == 0 {
            Ok(C64::zero())
        } else {
            Err(Error::InvalidArgument(format!("W_{j}(0) is unbounded")))
        };
    }
    let asymptotic = WBranchSeriesTerms::default();
    let w = halley(initial_guess(j, x, &asymptotic), x);
    if accepted(w, j, x) {
        return Ok(w);
    }
    let l1 = x.ln() + C64::new(0.0, 2.0 * PI * j as f64);
    let w = halley(log_form_newton(l1 - l1.ln(), l1), x);
    if accepted(w, j, x) {
        Ok(w)
    } else {
        Err(Error::InvalidArgument(format!("lambert_w did not converge on branch {j} at {x}")))
    }
}

fn accepted(w: C64, j: i64, x: C64) -> bool {
    let residual_ok = (w * w.exp() - x).norm() <= 1e-12 * x.norm();
    let on_cut = x.im == 0.0 && x.re < 0.0;
    residual_ok && (on_cut || (x + 1.0 / E).norm() < 1e-3 || implied_branch(w, x) == j)
}

/// Newton on `w + ln w = target`, which pins the branch.
fn log_form_newton(mut w: C64, target: C64) -> C64 {
    for _ in 0..MAX_HALLEY {
        let step = (w + w.ln() - target) / (1.0 + 1.0 / w);
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        w -= step;
        if step.norm() <= 1e-14 * (1.0 + w.norm()) {
            break;
        }
    }
    w
}

/// Root `s = W_j(beta tau e^{-alpha tau}) / tau + alpha` of `s = alpha + beta e^{-s tau}`.
pub fn single_lag_root(alpha: f64, beta: f64, tau: f64, j: i64) -> Result<C64> {
    if beta == 0.0 {
        return Err(Error::ZeroBeta);
    }
    if !(tau > 0.0) {
        return Err(Error::NonPositiveLag { tau1: tau, tau2: tau });
    }
    let arg = C64::new(beta * tau * (-alpha * tau).exp(), 0.0);
    Ok(lambert_w(j, arg)? / tau + alpha)
}

/// Branch index implied by `w + ln w = ln x + 2 pi i k`.
pub fn implied_branch(w: C64, x: C64) -> i64 {
    ((w + w.ln() - x.ln()).im / (2.0 * PI)).round() as i64
}
