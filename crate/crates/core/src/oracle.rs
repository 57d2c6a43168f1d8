//! Independent checks on the series: the characteristic residual, damped
//! Newton refinement, a trapezoid-rule contour integral for `v`, and
//! `log10 |transfer function|` grids.

use std::f64::consts::PI;

use crate::exec::{map_indexed, Exec};
use crate::lambert::single_lag_root;
use crate::model::{self, BranchQuantities, ModelParams};
use crate::series::Root;
use crate::sum::CompensatedSum;
use crate::{Error, Result, C64};

/// `s - alpha - beta e^{-s tau1} - gamma e^{-s tau2}` in original time.
pub fn char_residual(p: &ModelParams, s: C64) -> C64 {
    s - p.alpha - p.beta * (-s * p.tau1).exp() - p.gamma * (-s * p.tau2).exp()
}

/// Derivative of [`char_residual`] in `s`.
pub fn char_derivative(p: &ModelParams, s: C64) -> C64 {
    1.0 + p.beta * p.tau1 * (-s * p.tau1).exp() + p.gamma * p.tau2 * (-s * p.tau2).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iter: 50, tol: 1e-12, max_halvings: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonStatus {
    Converged,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOutcome {
    pub s: C64,
    /// `|char_residual(s)|` at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub status: NewtonStatus,
}

impl NewtonOutcome {
    pub fn converged(&self) -> bool {
        self.status == NewtonStatus::Converged
    }
}

/// Damped Newton on [`char_residual`] starting from `s0`.
///
/// Each step is halved until `|g|` decreases; if no halving helps, or
/// `max_iter` steps pass without `|g| <= tol`, the outcome is `Diverged`.
pub fn newton_refine(p: &ModelParams, s0: C64, opts: NewtonOptions) -> Result<NewtonOutcome> {
    if !(s0.re.is_finite() && s0.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("newton seed {s0} is not finite")));
    }
    let mut s = s0;
    let mut g = char_residual(p, s);
    for it in 0..opts.max_iter {
        if g.norm() <= opts.tol {
            return Ok(NewtonOutcome { s, residual: g.norm(), iterations: it, status: NewtonStatus::Converged });
        }
        let d = char_derivative(p, s);
        if d.norm() < 1e-30 {
            return Err(Error::SingularDerivative { re: s.re, im: s.im });
        }
        let step = g / d;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = s - lambda * step;
            let gt = char_residual(p, trial);
            if gt.norm() < g.norm() {
                accepted = Some((trial, gt));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, gt)) => {
                s = trial;
                g = gt;
            }
            None => {
                return Ok(NewtonOutcome { s, residual: g.norm(), iterations: it + 1, status: NewtonStatus::Diverged })
            }
        }
    }
    let status = if g.norm() <= opts.tol { NewtonStatus::Converged } else { NewtonStatus::Diverged };
    Ok(NewtonOutcome { s, residual: g.norm(), iterations: opts.max_iter, status })
}

/// A [`Root`] at original-time point `s` on branch `j`, with `v` recovered
/// from the branch formula so that the record stays self-consistent.
pub fn root_at(p: &ModelParams, j: i64, s: C64) -> Result<Root> {
    let r = model::reduce(p)?;
    let b = model::branch_quantities(&r, j)?;
    let s_rescaled = s * p.tau1;
    let l = b.log_gamma2;
    let v = r.tau * (s_rescaled - r.alpha1) - l - l.inv().ln() - r.tau.ln();
    Ok(Root {
        branch: j,
        s_rescaled,
        s_original: s,
        v,
        residual: r.char_fn(s_rescaled).norm(),
        diagnostics: model::assumption_diagnostics(&r, j)?,
    })
}

/// Refines a series root; the returned record is rebuilt at the Newton point.
pub fn refine_root(p: &ModelParams, root: &Root, opts: NewtonOptions) -> Result<(Root, NewtonOutcome)> {
    let out = newton_refine(p, root.s_original, opts)?;
    Ok((root_at(p, root.branch, out.s)?, out))
}

/// Starting points from each single-lag reduction: the other delayed term is
/// frozen at lag zero, so `s = alpha' + b e^{-s tau}` with `alpha' = alpha + other`.
pub fn lambert_seeds(p: &ModelParams, j_max: i64) -> Vec<C64> {
    let mut seeds = Vec::new();
    for (coef, lag, other) in [(p.beta, p.tau1, p.gamma), (p.gamma, p.tau2, p.beta)] {
        if coef == 0.0 {
            continue;
        }
        for j in -j_max..=j_max {
            if let Ok(s) = single_lag_root(p.alpha + other, coef, lag, j) {
                seeds.push(s);
            }
        }
    }
    seeds
}

/// Converged Newton outcome with the largest real part among `seeds`.
pub fn rightmost_root(p: &ModelParams, seeds: &[C64], opts: NewtonOptions) -> Option<NewtonOutcome> {
    seeds
        .iter()
        .filter_map(|&s0| newton_refine(p, s0, opts).ok())
        .filter(NewtonOutcome::converged)
        .max_by(|a, b| a.s.re.total_cmp(&b.s.re))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContourWarning {
    /// The enclosed-root count is not one.
    RootCount(f64),
    /// `|v|` exceeds the radius, so the computed value cannot be the enclosed root.
    OutsideRadius { v_abs: f64, radius: f64 },
    /// Node doubling did not settle below the target.
    NotConverged(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourResult {
    pub v: C64,
    pub radius: f64,
    pub nodes: usize,
    /// Zeroth moment `(1/2 pi i) \oint f'/f`; near 1 when the lemma applies.
    pub root_count: f64,
    /// `|v_N - v_{N/2}|` at the returned node count.
    pub doubling_delta: f64,
    pub warnings: Vec<ContourWarning>,
}

struct Moments {
    v: C64,
    count: C64,
    min_distance: f64,
}

fn f_and_deriv(b: &BranchQuantities, tau: f64, z: C64) -> (C64, C64) {
    let e1 = (-z).exp();
    let e2 = (-z / tau).exp();
    let f = e1 + b.c * e2 - b.sigma * z - 1.0 - b.c - b.mu;
    let fp = -e1 - b.c / tau * e2 - b.sigma;
    (f, fp)
}

fn moments(b: &BranchQuantities, tau: f64, radius: f64, n: usize) -> Moments {
    let mut v = CompensatedSum::default();
    let mut count = CompensatedSum::default();
    let mut min_distance = f64::INFINITY;
    for i in 0..n {
        let z = C64::from_polar(radius, 2.0 * PI * i as f64 / n as f64);
        let (f, fp) = f_and_deriv(b, tau, z);
        let q = fp / f;
        v.add(z * z * q);
        count.add(z * q);
        min_distance = min_distance.min(f.norm() / fp.norm().max(f64::MIN_POSITIVE));
    }
    Moments { v: v.value() / n as f64, count: count.value() / n as f64, min_distance }
}

const CONTOUR_TARGET: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 5;

/// `v` as `(1/2 pi i) \oint zeta f'(zeta)/f(zeta) d zeta` over `|zeta| = pi min(1, tau)`.
pub fn v_contour(b: &BranchQuantities, tau: f64, n_nodes: usize) -> Result<ContourResult> {
    if n_nodes < 8 {
        return Err(Error::InvalidArgument(format!("n_nodes must be at least 8, got {n_nodes}")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let mut radius = PI * tau.min(1.0);
    if b.mu == C64::new(0.0, 0.0) {
        return Ok(ContourResult {
            v: C64::new(0.0, 0.0),
            radius,
            nodes: n_nodes,
            root_count: 1.0,
            doubling_delta: 0.0,
            warnings: Vec::new(),
        });
    }
    let mut attempt = 0;
    let mut coarse = loop {
        let m = moments(b, tau, radius, n_nodes);
        // a root within a few node spacings of the circle spoils the quadrature
        if m.min_distance > 4.0 * 2.0 * PI * radius / n_nodes as f64 && m.v.re.is_finite() && m.v.im.is_finite() {
            break m;
        }
        attempt += 1;
        if attempt > 3 {
            return Err(Error::RootOnContour { radius });
        }
        radius *= 0.9;
    };
    let mut nodes = n_nodes;
    let mut delta = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        let fine = moments(b, tau, radius, 2 * nodes);
        delta = (fine.v - coarse.v).norm();
        nodes *= 2;
        coarse = fine;
        if delta <= CONTOUR_TARGET {
            break;
        }
    }
    let mut warnings = Vec::new();
    if (coarse.count.re - 1.0).abs() > 1e-6 || coarse.count.im.abs() > 1e-6 {
        warnings.push(ContourWarning::RootCount(coarse.count.re));
    }
    if coarse.v.norm() > radius {
        warnings.push(ContourWarning::OutsideRadius { v_abs: coarse.v.norm(), radius });
    }
    if delta > CONTOUR_TARGET {
        warnings.push(ContourWarning::NotConverged(delta));
    }
    Ok(ContourResult {
        v: coarse.v,
        radius,
        nodes,
        root_count: coarse.count.re,
        doubling_delta: delta,
        warnings,
    })
}

/// Rectangular sampling window in the complex plane; both edges inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl GridSpec {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64, n_re: usize, n_im: usize) -> Result<Self> {
        let g = GridSpec { re_min, re_max, im_min, im_max, n_re, n_im };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|x| x.is_finite());
        if !finite || !(self.re_min < self.re_max) || !(self.im_min < self.im_max) {
            return Err(Error::InvalidArgument("grid bounds must be finite with min < max".into()));
        }
        if self.n_re < 2 || self.n_im < 2 {
            return Err(Error::InvalidArgument("grid needs at least 2 nodes per axis".into()));
        }
        Ok(())
    }

    pub fn re(&self, col: usize) -> f64 {
        self.re_min + (self.re_max - self.re_min) * col as f64 / (self.n_re - 1) as f64
    }

    pub fn im(&self, row: usize) -> f64 {
        self.im_min + (self.im_max - self.im_min) * row as f64 / (self.n_im - 1) as f64
    }

    pub fn d_re(&self) -> f64 {
        (self.re_max - self.re_min) / (self.n_re - 1) as f64
    }

    pub fn d_im(&self) -> f64 {
        (self.im_max - self.im_min) / (self.n_im - 1) as f64
    }

    pub fn contains(&self, s: C64) -> bool {
        s.re >= self.re_min && s.re <= self.re_max && s.im >= self.im_min && s.im <= self.im_max
    }
}

pub const GRID_CLAMP: f64 = 16.0;

/// `log10(1/|char_residual|)` on a [`GridSpec`]; row `i` is `Im s = spec.im(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferGrid {
    pub spec: GridSpec,
    values: Vec<f64>,
}

impl TransferGrid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.spec.n_re + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.spec.n_re..(row + 1) * self.spec.n_re]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nodes no smaller than any of their (up to 8) neighbours and strictly
    /// larger than at least one, as `(row, col)`.
    pub fn local_maxima(&self) -> Vec<(usize, usize)> {
        let (nr, nc) = (self.spec.n_im, self.spec.n_re);
        let mut out = Vec::new();
        for i in 0..nr {
            for j in 0..nc {
                let x = self.get(i, j);
                let mut is_max = true;
                let mut strict = false;
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        if ii < 0 || jj < 0 || ii >= nr as i64 || jj >= nc as i64 {
                            continue;
                        }
                        let y = self.get(ii as usize, jj as usize);
                        if y > x {
                            is_max = false;
                        } else if y < x {
                            strict = true;
                        }
                    }
                }
                if is_max && strict {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Whether some local maximum lies within one cell of `s` on both axes.
    pub fn has_peak_near(&self, s: C64) -> bool {
        let (dr, di) = (self.spec.d_re(), self.spec.d_im());
        self.local_maxima().iter().any(|&(i, j)| {
            (self.spec.re(j) - s.re).abs() <= dr * (1.0 + 1e-9) && (self.spec.im(i) - s.im).abs() <= di * (1.0 + 1e-9)
        })
    }
}

/// Evaluates the transfer grid row by row.
pub fn transfer_grid(p: &ModelParams, g: GridSpec, exec: Exec) -> Result<TransferGrid> {
    g.validate()?;
    let rows = map_indexed(exec, g.n_im, |i| {
        let im = g.im(i);
        (0..g.n_re)
            .map(|j| {
                let r = char_residual(p, C64::new(g.re(j), im)).norm();
                let v = if r == 0.0 { GRID_CLAMP } else { -r.log10() };
                v.clamp(-GRID_CLAMP, GRID_CLAMP)
            })
            .collect::<Vec<f64>>()
    });
    Ok(TransferGrid { spec: g, values: rows.concat() })
}
