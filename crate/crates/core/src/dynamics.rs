//! Time-domain side: method-of-steps integration, modal reconstruction
//! `x(t) = sum_j C_j e^{s_j t}` from a history, and the blowfly Hopf scan.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::exec::{map_indexed, Exec};
use crate::model::{self, ModelParams, Truncation};
use crate::oracle::{self, char_derivative, NewtonOptions};
use crate::series::{root_series, Root};
use crate::{Error, Result, C64};

/// History `phi(t)` for `t <= 0`.
#[derive(Clone)]
pub struct HistoryFn {
    pub tag: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl HistoryFn {
    pub fn new(tag: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        HistoryFn { tag: tag.into(), f: Arc::new(f) }
    }

    pub fn constant(v: f64) -> Self {
        Self::new(format!("const:{v}"), move |_| v)
    }

    /// `e^{s t}` for real `s`.
    pub fn exponential(s: f64) -> Self {
        Self::new(format!("exp:{s}"), move |t| (s * t).exp())
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }
}

impl fmt::Debug for HistoryFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HistoryFn").field("tag", &self.tag).finish()
    }
}

/// Samples `x(k dt)`, `k = 0..values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    /// Sample nearest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = ((t / self.dt).round() as usize).min(self.values.len() - 1);
        self.values[k]
    }
}

struct Past<'a> {
    dt: f64,
    x: &'a [f64],
    f: &'a [f64],
    phi: &'a HistoryFn,
}

impl Past<'_> {
    /// History for `t <= 0`, cubic Hermite through stored `(x, x')` otherwise.
    fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.phi.eval(t);
        }
        let n = self.x.len();
        let k = ((t / self.dt).floor() as usize).min(n - 2);
        let th = t / self.dt - k as f64;
        let (th2, th3) = (th * th, th * th * th);
        let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
        let h10 = th3 - 2.0 * th2 + th;
        let h01 = -2.0 * th3 + 3.0 * th2;
        let h11 = th3 - th2;
        h00 * self.x[k] + h10 * self.dt * self.f[k] + h01 * self.x[k + 1] + h11 * self.dt * self.f[k + 1]
    }
}

/// RK4 method of steps for `x' = rhs(t, x(t), [x(t - lag_i)])`.
pub fn integrate_dde<F>(rhs: F, lags: &[f64], phi: &HistoryFn, t_end: f64, dt: f64) -> Result<Trajectory>
where
    F: Fn(f64, f64, &[f64]) -> f64,
{
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("T must be positive, got {t_end}")));
    }
    let min_lag = lags.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_lag > 0.0) {
        return Err(Error::InvalidArgument("lags must be positive".into()));
    }
    let limit = min_lag / 4.0;
    if !(dt > 0.0) || dt > limit {
        return Err(Error::StepTooLarge { dt, limit });
    }
    let steps = (t_end / dt - 1e-9).ceil() as usize;
    let mut x = Vec::with_capacity(steps + 1);
    let mut f = Vec::with_capacity(steps + 1);
    let mut delayed = vec![0.0; lags.len()];

    let x0 = phi.eval(0.0);
    for (d, lag) in delayed.iter_mut().zip(lags) {
        *d = phi.eval(-lag);
    }
    x.push(x0);
    f.push(rhs(0.0, x0, &delayed));

    for n in 0..steps {
        let t = n as f64 * dt;
        let xn = x[n];
        let mut stage = |tt: f64, xx: f64, x: &[f64], f: &[f64]| {
            // every delayed argument lies at or before t_n because dt <= lag / 4
            let past = Past { dt, x, f, phi };
            for (d, lag) in delayed.iter_mut().zip(lags) {
                *d = past.eval(tt - lag);
            }
            rhs(tt, xx, &delayed)
        };
        let k1 = f[n];
        let k2 = stage(t + dt / 2.0, xn + dt / 2.0 * k1, &x, &f);
        let k3 = stage(t + dt / 2.0, xn + dt / 2.0 * k2, &x, &f);
        let k4 = stage(t + dt, xn + dt * k3, &x, &f);
        let next = xn + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::NonFiniteState { t: t + dt });
        }
        x.push(next);
        let fnext = stage(t + dt, next, &x, &f);
        f.push(fnext);
    }
    Ok(Trajectory { dt, values: x })
}

/// Linear two-lag problem `x' = alpha x + beta x(t - tau1) + gamma x(t - tau2)`.
pub fn integrate_mos(p: &ModelParams, phi: &HistoryFn, t_end: f64, dt: f64) -> Result<Trajectory> {
    p.validate()?;
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    integrate_dde(move |_, x, d| a * x + b * d[0] + g * d[1], &[p.tau1, p.tau2], phi, t_end, dt)
}

/// Right-hand side of `x' = r x (1 - a1 x(t - tau1) - a2 x(t - tau2))` for [`integrate_dde`].
pub fn blowfly_rhs(r: f64, a1: f64, a2: f64) -> impl Fn(f64, f64, &[f64]) -> f64 {
    move |_, x, d| r * x * (1.0 - a1 * d[0] - a2 * d[1])
}

/// Slope of `ln |x|` at the peaks of `|x|` inside `[t_from, t_to]`, by least squares.
/// Peak positions and heights are refined by a parabola through three samples.
pub fn envelope_growth_rate(traj: &Trajectory, t_from: f64, t_to: f64) -> Option<f64> {
    let v = &traj.values;
    let mut pts = Vec::new();
    for k in 1..v.len().saturating_sub(1) {
        let t = traj.time(k);
        if t < t_from || t > t_to {
            continue;
        }
        let (a, b, c) = (v[k - 1].abs(), v[k].abs(), v[k + 1].abs());
        if b > a && b >= c && b > 0.0 {
            let denom = a - 2.0 * b + c;
            let (dt, peak) = if denom < 0.0 {
                let d = 0.5 * (a - c) / denom;
                (d, b - 0.25 * (a - c) * d)
            } else {
                (0.0, b)
            };
            pts.push((t + dt * traj.dt, peak.ln()));
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    /// Oversampled least squares on equispaced history samples.
    LeastSquares,
    /// Square system, one sample per root.
    Collocation,
    /// `C_j = (phi(0) + sum_i b_i int_{-tau_i}^0 e^{-s_j (theta + tau_i)} phi(theta) d theta) / Delta'(s_j)`.
    Residue,
}

/// Coefficients of `x(t) = sum_j C_j e^{s_j t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFit {
    pub branches: Vec<i64>,
    pub roots: Vec<C64>,
    pub coefficients: Vec<C64>,
    /// `max |x_fit - phi|` on a dense grid over `[-max lag, 0]`.
    pub window_residual: f64,
}

impl SpectralFit {
    pub fn eval(&self, t: f64) -> C64 {
        self.roots.iter().zip(&self.coefficients).map(|(s, c)| c * (s * t).exp()).sum()
    }
}

pub fn default_samples(n_roots: usize) -> usize {
    4 * n_roots + 1
}

fn simpson<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, n: usize) -> C64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

fn check_distinct(roots: &[C64]) -> Result<()> {
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            if (roots[i] - roots[j]).norm() <= 1e-10 * (1.0 + roots[i].norm()) {
                return Err(Error::RankDeficient { i, j });
            }
        }
    }
    Ok(())
}

fn closest_pair(roots: &[C64]) -> (usize, usize) {
    let mut best = (0, 1, f64::INFINITY);
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            let d = (roots[i] - roots[j]).norm();
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.0, best.1)
}

/// Fits modal coefficients to the history over `[-max(tau1, tau2), 0]`.
/// `n_samples` is ignored by [`FitMethod::Collocation`] and [`FitMethod::Residue`].
pub fn spectral_fit(
    p: &ModelParams,
    phi: &HistoryFn,
    roots: &[Root],
    n_samples: usize,
    method: FitMethod,
) -> Result<SpectralFit> {
    p.validate()?;
    if roots.is_empty() {
        return Err(Error::InvalidArgument("spectral_fit needs at least one root".into()));
    }
    let s: Vec<C64> = roots.iter().map(|r| r.s_original).collect();
    check_distinct(&s)?;
    let n = s.len();
    let width = p.max_lag();
    let coefficients = match method {
        FitMethod::LeastSquares | FitMethod::Collocation => {
            let rows = if method == FitMethod::Collocation { n } else { n_samples };
            if rows < n {
                return Err(Error::InvalidArgument(format!("n_samples = {rows} is below the root count {n}")));
            }
            let t: Vec<f64> = if rows == 1 {
                vec![0.0]
            } else {
                (0..rows).map(|i| -width + width * i as f64 / (rows - 1) as f64).collect()
            };
            let a = DMatrix::from_fn(rows, n, |i, j| (s[j] * t[i]).exp());
            let b = DMatrix::from_fn(rows, 1, |i, _| C64::new(phi.eval(t[i]), 0.0));
            let svd = a.svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if !(smin > smax * 1e-15) {
                let (i, j) = closest_pair(&s);
                return Err(Error::RankDeficient { i, j });
            }
            let x = svd.solve(&b, smax * 1e-15).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            x.column(0).iter().cloned().collect()
        }
        FitMethod::Residue => {
            let phi0 = phi.eval(0.0);
            s.iter()
                .map(|&sj| {
                    let mut num = C64::new(phi0, 0.0);
                    for (coef, lag) in [(p.beta, p.tau1), (p.gamma, p.tau2)] {
                        if coef != 0.0 {
                            let intervals = ((lag * 512.0).ceil() as usize).max(512);
                            let integral =
                                simpson(|th| (-sj * (th + lag)).exp() * phi.eval(th), -lag, 0.0, intervals);
                            num += coef * integral;
                        }
                    }
                    num / char_derivative(p, sj)
                })
                .collect()
        }
    };
    let mut fit = SpectralFit {
        branches: roots.iter().map(|r| r.branch).collect(),
        roots: s,
        coefficients,
        window_residual: 0.0,
    };
    let dense = 400;
    fit.window_residual = (0..=dense)
        .map(|i| {
            let t = -width + width * i as f64 / dense as f64;
            (fit.eval(t) - phi.eval(t)).norm()
        })
        .fold(0.0, f64::max);
    Ok(fit)
}

/// Linearization about `x* = 1/(a1 + a2)`: `(0, -r x* a1, -r x* a2, tau1, tau2)`.
pub fn blowfly_linearize(r: f64, a1: f64, a2: f64, tau1: f64, tau2: f64) -> Result<ModelParams> {
    if !(r > 0.0 && a1 > 0.0 && a2 > 0.0) {
        return Err(Error::InvalidArgument("r, a1 and a2 must be positive".into()));
    }
    let x = 1.0 / (a1 + a2);
    ModelParams::new(0.0, -r * x * a1, -r * x * a2, tau1, tau2)
}

/// Hypotheses of the Hopf theorem for the blowfly: `a1 = a2` and `tau1 > 1/(2 x* r a1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremCheck {
    pub equal_rates: bool,
    pub tau1_bound: f64,
    pub tau1_ok: bool,
}

impl TheoremCheck {
    pub fn holds(&self) -> bool {
        self.equal_rates && self.tau1_ok
    }
}

pub fn theorem_condition(r: f64, a1: f64, a2: f64, tau1: f64) -> TheoremCheck {
    let x = 1.0 / (a1 + a2);
    let bound = 1.0 / (2.0 * x * r * a1);
    TheoremCheck { equal_rates: a1 == a2, tau1_bound: bound, tau1_ok: tau1 > bound }
}

/// Branches whose series value seeds the principal-root search.
pub const SERIES_SEED_BRANCHES: [i64; 3] = [-1, 0, 1];
/// Single-lag Lambert seeds `|j| <= LAMBERT_SEED_BRANCHES` for each lag.
pub const LAMBERT_SEED_BRANCHES: i64 = 10;

/// Rightmost root found from series seeds and single-lag seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalRoot {
    pub s: Option<C64>,
    /// Branch-0 series value, when it could be formed.
    pub series_seed: Option<C64>,
    /// Whether Newton from the branch-0 series value converged.
    pub series_seed_ok: bool,
    /// Whether the rightmost root came from a series seed.
    pub from_series: bool,
}

pub fn principal_root(p: &ModelParams, t: Truncation, opts: NewtonOptions) -> PrincipalRoot {
    let mut series_seed = None;
    let mut series_seed_ok = false;
    let mut series_best: Option<C64> = None;
    for j in SERIES_SEED_BRANCHES {
        let Ok(root) = root_series(p, j, t) else { continue };
        if j == 0 {
            series_seed = Some(root.s_original);
        }
        if let Ok(out) = oracle::newton_refine(p, root.s_original, opts) {
            if out.converged() {
                series_seed_ok |= j == 0;
                if series_best.is_none_or(|b| out.s.re > b.re) {
                    series_best = Some(out.s);
                }
            }
        }
    }
    let lambert = oracle::rightmost_root(p, &oracle::lambert_seeds(p, LAMBERT_SEED_BRANCHES), opts).map(|o| o.s);
    let (s, from_series) = match (series_best, lambert) {
        (Some(a), Some(b)) if a.re >= b.re - 1e-12 => (Some(a), true),
        (Some(_), Some(b)) => (Some(b), false),
        (Some(a), None) => (Some(a), true),
        (None, b) => (b, false),
    };
    PrincipalRoot { s, series_seed, series_seed_ok, from_series }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub tau2: f64,
    pub principal: PrincipalRoot,
    /// Assumption ratio on branch 0, when defined.
    pub ratio: Option<f64>,
    pub advisory_ok: Option<bool>,
}

impl ScanPoint {
    pub fn re_s0(&self) -> Option<f64> {
        self.principal.s.map(|s| s.re)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub tau2: f64,
    pub s0: C64,
    pub bracket: (f64, f64),
    pub ratio: Option<f64>,
    /// Sign of `Re s0` to the right of the crossing: +1 destabilizing, -1 stabilizing.
    pub direction: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfReport {
    pub theorem: TheoremCheck,
    pub points: Vec<ScanPoint>,
    pub crossings: Vec<Crossing>,
    /// Grid points where no root converged.
    pub failed: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowflyScan {
    pub r: f64,
    pub a1: f64,
    pub a2: f64,
    pub tau1: f64,
    pub tau2_min: f64,
    pub tau2_max: f64,
    pub n_grid: usize,
}

fn scan_point(c: &BlowflyScan, tau2: f64, t: Truncation, opts: NewtonOptions) -> ScanPoint {
    let Ok(p) = blowfly_linearize(c.r, c.a1, c.a2, c.tau1, tau2) else {
        return ScanPoint {
            tau2,
            principal: PrincipalRoot { s: None, series_seed: None, series_seed_ok: false, from_series: false },
            ratio: None,
            advisory_ok: None,
        };
    };
    let diag = model::reduce(&p).and_then(|r| model::assumption_diagnostics(&r, 0)).ok();
    ScanPoint {
        tau2,
        principal: principal_root(&p, t, opts),
        ratio: diag.map(|d| d.ratio),
        advisory_ok: diag.map(|d| d.advisory_ok),
    }
}

const BISECT_RE_TOL: f64 = 1e-8;
const BISECT_WIDTH_TOL: f64 = 1e-11;

fn bisect(c: &BlowflyScan, mut lo: ScanPoint, mut hi: ScanPoint, t: Truncation, opts: NewtonOptions) -> Option<Crossing> {
    let bracket = (lo.tau2, hi.tau2);
    let right_sign = hi.re_s0()?.signum();
    let sign_lo = lo.re_s0()?.signum();
    let mut best = if lo.re_s0()?.abs() < hi.re_s0()?.abs() { lo.clone() } else { hi.clone() };
    for _ in 0..200 {
        if best.re_s0()?.abs() <= BISECT_RE_TOL && hi.tau2 - lo.tau2 <= BISECT_WIDTH_TOL {
            break;
        }
        if hi.tau2 - lo.tau2 <= BISECT_WIDTH_TOL {
            break;
        }
        let mid = scan_point(c, 0.5 * (lo.tau2 + hi.tau2), t, opts);
        let re = mid.re_s0()?;
        if re.abs() < best.re_s0()?.abs() {
            best = mid.clone();
        }
        if re.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.re_s0()?.abs() > BISECT_RE_TOL {
        return None;
    }
    Some(Crossing {
        tau2: best.tau2,
        s0: best.principal.s?,
        bracket,
        ratio: best.ratio,
        direction: right_sign as i8,
    })
}

/// `Re s0` of the linearized blowfly over a `tau2` grid, with every sign change bisected.
pub fn hopf_scan(c: &BlowflyScan, t: Truncation, opts: NewtonOptions, exec: Exec) -> Result<HopfReport> {
    if c.n_grid < 2 || !(c.tau2_min > 0.0) || !(c.tau2_min < c.tau2_max) {
        return Err(Error::InvalidArgument("tau2 range must be positive and increasing, grid >= 2".into()));
    }
    blowfly_linearize(c.r, c.a1, c.a2, c.tau1, c.tau2_max)?;
    let n = c.n_grid;
    let points = map_indexed(exec, n, |i| {
        let tau2 = c.tau2_min + (c.tau2_max - c.tau2_min) * i as f64 / (n - 1) as f64;
        scan_point(c, tau2, t, opts)
    });
    let failed = points.iter().filter(|p| p.principal.s.is_none()).map(|p| p.tau2).collect();
    let brackets: Vec<(usize, usize)> = {
        let valid: Vec<usize> = (0..n).filter(|&i| points[i].principal.s.is_some()).collect();
        valid
            .windows(2)
            .filter(|w| {
                let (a, b) = (points[w[0]].re_s0().unwrap(), points[w[1]].re_s0().unwrap());
                a == 0.0 || a.signum() != b.signum()
            })
            .map(|w| (w[0], w[1]))
            .collect()
    };
    let crossings = map_indexed(exec, brackets.len(), |k| {
        let (i, j) = brackets[k];
        bisect(c, points[i].clone(), points[j].clone(), t, opts)
    })
    .into_iter()
    .flatten()
    .collect();
    Ok(HopfReport { theorem: theorem_condition(c.r, c.a1, c.a2, c.tau1), points, crossings, failed })
}
