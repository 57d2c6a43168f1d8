//! Model parameters, time rescaling and the per-branch series inputs.
//!
//! Time is rescaled by the first lag (`t' = t / tau1`), which turns
//! `s = alpha + beta e^{-s tau1} + gamma e^{-s tau2}` into
//! `s' = alpha1 + beta1 e^{-s'} + gamma1 e^{-s' tau}` with `tau = tau2 / tau1`
//! and `s = s' / tau1`. Writing `lambda = s' - alpha1` gives
//! `lambda e^{lambda tau} = beta2 e^{(tau - 1) lambda} + gamma2`, and the branch
//! expansion is taken around `ln_j(gamma2)`.

use std::f64::consts::PI;

use crate::{Error, Result, C64};

/// Original-time coefficients and lags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, tau1: f64, tau2: f64) -> Result<Self> {
        let p = ModelParams { alpha, beta, gamma, tau1, tau2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.gamma, self.tau1, self.tau2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        if !(self.tau1 > 0.0 && self.tau2 > 0.0) {
            return Err(Error::NonPositiveLag { tau1: self.tau1, tau2: self.tau2 });
        }
        if self.tau1 == self.tau2 {
            return Err(Error::CoincidentLags(self.tau1));
        }
        Ok(())
    }

    pub fn max_lag(&self) -> f64 {
        self.tau1.max(self.tau2)
    }

    pub fn min_lag(&self) -> f64 {
        self.tau1.min(self.tau2)
    }

    pub fn reduce(&self) -> Result<ReducedParams> {
        reduce(self)
    }
}

/// Rescaled quantities; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedParams {
    pub alpha1: f64,
    pub beta1: f64,
    pub gamma1: f64,
    pub tau: f64,
    pub beta2: f64,
    pub gamma2: f64,
}

impl ReducedParams {
    /// Build directly from `(alpha1, beta2, gamma2, tau)`, i.e. a problem
    /// already expressed in units of the first lag.
    pub fn from_reduced(alpha1: f64, beta2: f64, gamma2: f64, tau: f64) -> Result<Self> {
        let m = ModelParams::new(
            alpha1,
            beta2 * alpha1.exp(),
            gamma2 * (alpha1 * tau).exp(),
            1.0,
            tau,
        )?;
        reduce(&m)
    }

    /// Original-time model with `tau1 = 1` that reduces to these values.
    pub fn to_model(&self) -> ModelParams {
        ModelParams {
            alpha: self.alpha1,
            beta: self.beta1,
            gamma: self.gamma1,
            tau1: 1.0,
            tau2: self.tau,
        }
    }

    /// Rescaled characteristic function `s - alpha1 - beta1 e^{-s} - gamma1 e^{-s tau}`.
    pub fn char_fn(&self, s: C64) -> C64 {
        s - self.alpha1 - self.beta1 * (-s).exp() - self.gamma1 * (-s * self.tau).exp()
    }
}

/// Series truncation orders. `m_max` is the order in `mu`, `k_max` in `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub m_max: usize,
    pub k_max: usize,
}

impl Truncation {
    pub fn new(m_max: usize, k_max: usize) -> Result<Self> {
        if m_max == 0 {
            return Err(Error::InvalidArgument("m_max must be at least 1".into()));
        }
        Ok(Truncation { m_max, k_max })
    }
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { m_max: 8, k_max: 1000 }
    }
}

/// Per-branch inputs to the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchQuantities {
    pub j: i64,
    /// `ln_j(gamma2)`
    pub log_gamma2: C64,
    pub sigma: C64,
    pub c: C64,
    pub mu: C64,
}

/// Smallness indicators for the expansion. Advisory only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// `|beta2 / (gamma2^{1/tau} ln_j gamma2)|`
    pub ratio: f64,
    pub mu_abs: f64,
    pub sigma_abs: f64,
    pub advisory_ok: bool,
}

pub const RATIO_ADVISORY: f64 = 0.1;
pub const MU_ADVISORY: f64 = 0.5;
pub const SIGMA_ADVISORY: f64 = 1.0;

pub fn reduce(p: &ModelParams) -> Result<ReducedParams> {
    p.validate()?;
    if p.gamma == 0.0 {
        return Err(Error::ZeroGamma);
    }
    let alpha1 = p.alpha * p.tau1;
    let beta1 = p.beta * p.tau1;
    let gamma1 = p.gamma * p.tau1;
    let tau = p.tau2 / p.tau1;
    let beta2 = beta1 * (-alpha1).exp();
    let gamma2 = gamma1 * (-alpha1 * tau).exp();
    if gamma2 == 0.0 || !gamma2.is_finite() || !beta2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "reduced coefficients out of range (beta2 = {beta2}, gamma2 = {gamma2})"
        )));
    }
    Ok(ReducedParams { alpha1, beta1, gamma1, tau, beta2, gamma2 })
}

/// `ln|z| + i (Arg z + 2 pi j)`, `Arg` in `(-pi, pi]`.
pub fn branch_log(z: C64, j: i64) -> Result<C64> {
    if z == C64::new(0.0, 0.0) {
        return Err(Error::LogOfZero);
    }
    let principal = z.ln();
    Ok(C64::new(principal.re, principal.im + 2.0 * PI * j as f64))
}

pub fn branch_quantities(r: &ReducedParams, j: i64) -> Result<BranchQuantities> {
    let g2 = C64::new(r.gamma2, 0.0);
    let l = branch_log(g2, j)?;
    if l.norm() == 0.0 {
        return Err(Error::SingularBranch(j));
    }
    let sigma = l.inv();
    let tau = r.tau;
    let c = if r.beta2 == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        // principal power (gamma2 tau / L)^{(tau - 1) / tau}
        let exponent = (tau - 1.0) / tau;
        (r.beta2 / r.gamma2) * ((g2 * tau / l).ln() * exponent).exp()
    };
    let mu = (tau.ln() + l.inv().ln()) / l - c;
    Ok(BranchQuantities { j, log_gamma2: l, sigma, c, mu })
}

pub fn assumption_diagnostics(r: &ReducedParams, j: i64) -> Result<Diagnostics> {
    let b = branch_quantities(r, j)?;
    let ratio = if r.beta2 == 0.0 {
        0.0
    } else {
        // |gamma2^{1/tau}| = exp(Re(Ln gamma2) / tau); stay in log space.
        let ln_ratio = r.beta2.abs().ln() - r.gamma2.abs().ln() / r.tau - b.log_gamma2.norm().ln();
        ln_ratio.exp()
    };
    let mu_abs = b.mu.norm();
    let sigma_abs = b.sigma.norm();
    let advisory_ok = ratio < RATIO_ADVISORY && mu_abs < MU_ADVISORY && sigma_abs < SIGMA_ADVISORY;
    Ok(Diagnostics { ratio, mu_abs, sigma_abs, advisory_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn reduce_shifted_problem() {
        let p = ModelParams::new(-1.0, 0.001 * (-1.0f64).exp(), 6.0 * (-5.0f64).exp(), 1.0, 5.0).unwrap();
        let r = reduce(&p).unwrap();
        assert_eq!(r.alpha1, -1.0);
        assert_eq!(r.tau, 5.0);
        assert!(close(r.beta2, 0.001, 1e-14));
        assert!(close(r.gamma2, 6.0, 1e-14));
    }

    #[test]
    fn reduce_trivial_alpha_zero() {
        let r = reduce(&ModelParams::new(0.0, 1.0, 1.0, 1.0, 2.0).unwrap()).unwrap();
        assert_eq!((r.alpha1, r.beta2, r.gamma2, r.tau), (0.0, 1.0, 1.0, 2.0));
    }

    #[test]
    fn reduce_blowfly_linearization() {
        let r = reduce(&ModelParams::new(0.0, -0.5, -0.5, 10.0, 0.379414).unwrap()).unwrap();
        assert_eq!(r.alpha1, 0.0);
        assert_eq!(r.beta2, -5.0);
        assert_eq!(r.gamma2, -5.0);
        assert!(close(r.tau, 0.0379414, 1e-14));
    }

    #[test]
    fn reduce_rejects_degenerate_inputs() {
        let p = ModelParams { alpha: 0.0, beta: 1.0, gamma: 0.0, tau1: 1.0, tau2: 2.0 };
        assert_eq!(reduce(&p), Err(Error::ZeroGamma));
        assert_eq!(ModelParams::new(0.0, 1.0, 1.0, 2.0, 2.0), Err(Error::CoincidentLags(2.0)));
        assert!(matches!(ModelParams::new(0.0, 1.0, 1.0, 0.0, 2.0), Err(Error::NonPositiveLag { .. })));
        assert!(ModelParams::new(f64::NAN, 1.0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn branch_log_examples() {
        assert_eq!(branch_log(C64::new(1.0, 0.0), 0).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(branch_log(C64::new(1.0, 0.0), 1).unwrap(), C64::new(0.0, 2.0 * PI));
        let l = branch_log(C64::new(-E, 0.0), 0).unwrap();
        assert!((l - C64::new(1.0, PI)).norm() < 1e-15);
        assert_eq!(branch_log(C64::new(0.0, 0.0), 3), Err(Error::LogOfZero));
    }

    #[test]
    fn branch_quantities_reference_problem() {
        let r = ReducedParams::from_reduced(-1.0, 0.001, 6.0, 4.0).unwrap();
        let b = branch_quantities(&r, 0).unwrap();
        assert!((b.log_gamma2.re - 6f64.ln()).abs() < 1e-12);
        assert!((b.sigma.re - 0.55811).abs() < 1e-5 && b.sigma.im.abs() < 1e-15);
        assert!((b.c.re - 1.167e-3).abs() < 1e-6 && b.c.im.abs() < 1e-15);
        assert!((b.mu.re - 0.44705).abs() < 1e-5 && b.mu.im.abs() < 1e-15);
    }

    #[test]
    fn branch_quantities_trivial() {
        let r = ReducedParams::from_reduced(0.0, 0.0, E, 2.0).unwrap();
        let b = branch_quantities(&r, 0).unwrap();
        assert!((b.sigma - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(b.c, C64::new(0.0, 0.0));
        assert!((b.mu - C64::new(2f64.ln(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn branch_quantities_singular_branch() {
        let r = ReducedParams::from_reduced(0.0, 0.5, 1.0, 2.0).unwrap();
        assert_eq!(branch_quantities(&r, 0), Err(Error::SingularBranch(0)));
        assert!(branch_quantities(&r, 1).is_ok());
    }

    #[test]
    fn blowfly_branch_quantities_are_finite_and_ratio_tiny() {
        let r = reduce(&ModelParams::new(0.0, -0.5, -0.5, 10.0, 0.379414).unwrap()).unwrap();
        let b = branch_quantities(&r, 0).unwrap();
        assert!(b.c.re.is_finite() && b.c.im.is_finite());
        assert!(b.mu.re.is_finite() && b.mu.im.is_finite());
        let d = assumption_diagnostics(&r, 0).unwrap();
        assert!(d.ratio > 1e-20 && d.ratio < 1e-17, "ratio = {}", d.ratio);
    }

    #[test]
    fn assumption_ratio_reference_problem() {
        let r = ReducedParams::from_reduced(-1.0, 0.001, 6.0, 4.0).unwrap();
        let d = assumption_diagnostics(&r, 0).unwrap();
        assert!((d.ratio - 3.6e-4).abs() / 3.6e-4 < 0.05, "ratio = {}", d.ratio);
        assert!(d.advisory_ok);
        let r0 = ReducedParams::from_reduced(-1.0, 0.0, 6.0, 4.0).unwrap();
        assert_eq!(assumption_diagnostics(&r0, 0).unwrap().ratio, 0.0);
    }

    #[test]
    fn rescaled_residual_round_trip() {
        let p = ModelParams::new(-0.3, 0.7, 1.9, 2.5, 0.8).unwrap();
        let r = reduce(&p).unwrap();
        for s in [C64::new(0.3, 1.1), C64::new(-2.0, 7.5), C64::new(1.0, -3.0)] {
            let orig = s / p.tau1 - p.alpha
                - p.beta * (-s / p.tau1 * p.tau1).exp()
                - p.gamma * (-s / p.tau1 * p.tau2).exp();
            let scaled = r.char_fn(s) / p.tau1;
            assert!((orig - scaled).norm() <= 1e-12 * scaled.norm().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn exp_of_branch_log_is_identity(re in -50.0..50.0f64, im in -50.0..50.0f64, j in -50i64..=50) {
            prop_assume!(re != 0.0 || im != 0.0);
            let z = C64::new(re, im);
            let w = branch_log(z, j).unwrap();
            prop_assert!((w.exp() - z).norm() <= 1e-12 * z.norm());
            let w0 = branch_log(z, 0).unwrap();
            prop_assert_eq!(w.re, w0.re);
            prop_assert!((w.im - w0.im - 2.0 * PI * j as f64).abs() <= 1e-12 * (1.0 + w.im.abs()));
        }

        #[test]
        fn reduce_is_scale_consistent(
            alpha in -2.0..2.0f64, beta in -3.0..3.0f64, gamma in 0.1..3.0f64,
            tau1 in 0.1..5.0f64, tau2 in 0.1..5.0f64,
        ) {
            prop_assume!(tau1 != tau2);
            let r = reduce(&ModelParams::new(alpha, beta, gamma, tau1, tau2).unwrap()).unwrap();
            let again = reduce(&ModelParams::new(r.alpha1, r.beta1, r.gamma1, 1.0, r.tau).unwrap()).unwrap();
            prop_assert_eq!(r.beta2, again.beta2);
            prop_assert_eq!(r.gamma2, again.gamma2);
            prop_assert_eq!(r.tau, again.tau);
        }
    }
}
