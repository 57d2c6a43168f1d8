mod config;
mod report;

use std::fs::File;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use dde_spectra::dynamics::{
    default_samples, hopf_scan, integrate_mos, spectral_fit, BlowflyScan, FitMethod, HistoryFn,
};
use dde_spectra::exec::{configure_threads, Exec};
use dde_spectra::lambert::single_lag_root;
use dde_spectra::model::{self, ModelParams};
use dde_spectra::oracle::{refine_root, transfer_grid, GridSpec, NewtonOptions, GRID_CLAMP};
use dde_spectra::series::root_series_branches;
use dde_spectra::Error;
use serde::Serialize;

use config::{Cli, Command, FileConfig, Format, Method};
use report::*;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_PARTIAL: u8 = 2;

#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
    hint: Option<String>,
    code: u8,
}

impl CliError {
    pub fn input(kind: &'static str, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into(), hint: None, code: EXIT_INPUT }
    }

    fn numeric(message: impl Into<String>) -> Self {
        CliError { kind: "numerical", message: message.into(), hint: None, code: EXIT_PARTIAL }
    }

    fn with_hint(mut self, hint: &str) -> Self {
        self.hint = Some(hint.into());
        self
    }

    fn emit(&self) {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            hint: Option<&'a str>,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        let body = Wrapper { error: Body { kind: self.kind, message: &self.message, hint: self.hint.as_deref() } };
        let line = serde_json::to_string(&body).unwrap_or_else(|_| format!("{{\"error\":{{\"kind\":\"{}\"}}}}", self.kind));
        let _ = writeln!(io::stderr(), "{line}");
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::ZeroGamma => CliError::input("zero_gamma", message)
                .with_hint("gamma = 0 is a single-lag problem: use `dde-spectra single-lag --alpha A --beta B --tau T`"),
            Error::CoincidentLags(_) => CliError::input("coincident_lags", message)
                .with_hint("merge the two delayed terms and use `dde-spectra single-lag`"),
            Error::InvalidArgument(_)
            | Error::NonPositiveLag { .. }
            | Error::ZeroBeta
            | Error::StepTooLarge { .. }
            | Error::LogOfZero
            | Error::SequenceTooShort { .. } => CliError::input("invalid_input", message),
            _ => CliError::numeric(message),
        }
    }
}

fn write_report<R: Report>(r: &R, format: Format, out: Option<&std::path::Path>) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(
            File::create(path).map_err(|e| CliError::input("output", format!("cannot create {}: {e}", path.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let io_err = |e: String| CliError { kind: "output", message: e, hint: None, code: EXIT_INPUT };
    match format {
        Format::Json => {
            let mut sink = sink;
            let text = to_json(r).map_err(|e| io_err(e.to_string()))?;
            writeln!(sink, "{text}").map_err(|e| io_err(e.to_string()))?;
            sink.flush().map_err(|e| io_err(e.to_string()))
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink);
            r.write_csv(&mut w).map_err(|e| io_err(e.to_string()))?;
            w.flush().map_err(|e| io_err(e.to_string()))
        }
    }
}

fn threads_from_env() -> Result<(), CliError> {
    match std::env::var("DDE_SPECTRA_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| CliError::input("environment", format!("DDE_SPECTRA_THREADS must be a positive integer, got {v:?}")))?;
            configure_threads(n);
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

/// Newton tolerance such that the rescaled residual `tau1 |g|` stays below 1e-12.
fn refine_options(p: &ModelParams) -> NewtonOptions {
    NewtonOptions { tol: 1e-12 / p.tau1.max(1.0), ..NewtonOptions::default() }
}

fn parse_history(spec: &str) -> Result<HistoryFn, CliError> {
    let bad = || CliError::input("history", format!("unsupported history {spec:?}; expected const:<v>"));
    let (kind, value) = spec.split_once(':').ok_or_else(bad)?;
    let v: f64 = value.trim().parse().map_err(|_| bad())?;
    match kind {
        "const" if v.is_finite() => Ok(HistoryFn::constant(v)),
        _ => Err(bad()),
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let format = cli.format.or(file.format).unwrap_or(Format::Json);
    let out = cli.out.clone().or(file.out.clone());
    let out = out.as_deref();
    let exec = Exec::default();

    match &cli.command {
        Command::Roots { model: m, branches, series, refine } => {
            let p = config::model(m, &file)?;
            let r = model::reduce(&p)?;
            let (lo, hi) = config::branch_range(branches, &file)?;
            let t = config::truncation(series, &file)?;
            let refine = *refine || file.refine.unwrap_or(false);
            let opts = refine_options(&p);
            let results = root_series_branches(&p, lo..=hi, t, exec);
            let mut report = RootsReport {
                command: "roots".into(),
                params: (&p).into(),
                reduced: (&r).into(),
                m_max: t.m_max,
                k_max: t.k_max,
                refine,
                roots: Vec::new(),
                failures: Vec::new(),
            };
            for (j, res) in (lo..=hi).zip(results) {
                let seed = match res {
                    Ok(s) => s,
                    Err(e) => {
                        report.failures.push(BranchFailure { j, error: e.to_string() });
                        continue;
                    }
                };
                let mut rec = RootRecord {
                    j,
                    s: seed.s_original.into(),
                    s_rescaled: seed.s_rescaled.into(),
                    v: seed.v.into(),
                    residual_series: seed.residual,
                    residual: seed.residual,
                    refine: None,
                    diagnostics: (&seed.diagnostics).into(),
                };
                if refine {
                    match refine_root(&p, &seed, opts) {
                        Ok((root, outcome)) => {
                            rec.refine = Some(RefineOut { iterations: outcome.iterations, converged: outcome.converged() });
                            if outcome.converged() {
                                rec.s = root.s_original.into();
                                rec.s_rescaled = root.s_rescaled.into();
                                rec.v = root.v.into();
                                rec.residual = root.residual;
                            } else {
                                report.failures.push(BranchFailure { j, error: "newton did not converge".into() });
                            }
                        }
                        Err(e) => report.failures.push(BranchFailure { j, error: e.to_string() }),
                    }
                }
                report.roots.push(rec);
            }
            write_report(&report, format, out)?;
            Ok(if report.failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
        }
        Command::Scan(a) => {
            let t = config::truncation(&a.series, &file)?;
            let scan = BlowflyScan {
                r: a.r.or(file.r).unwrap_or(1.0),
                a1: a.a1.or(file.a1).unwrap_or(1.0),
                a2: a.a2.or(file.a2).unwrap_or(1.0),
                tau1: a.tau1.or(file.tau1).unwrap_or(10.0),
                tau2_min: a.tau2_min.or(file.tau2_min).unwrap_or(0.05),
                tau2_max: a.tau2_max.or(file.tau2_max).unwrap_or(2.0),
                n_grid: a.grid_n.or(file.grid_n).unwrap_or(100),
            };
            let h = hopf_scan(&scan, t, NewtonOptions::default(), exec)?;
            let mut report = ScanReport {
                command: "scan".into(),
                r: scan.r,
                a1: scan.a1,
                a2: scan.a2,
                tau1: scan.tau1,
                tau2_min: scan.tau2_min,
                tau2_max: scan.tau2_max,
                grid_n: scan.n_grid,
                m_max: t.m_max,
                k_max: t.k_max,
                theorem: (&h.theorem).into(),
                points: Vec::new(),
                crossings: Vec::new(),
                failed: Vec::new(),
            };
            report.fill(&h);
            write_report(&report, format, out)?;
            Ok(if h.failed.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
        }
        Command::Grid { model: m, grid } => {
            let p = config::model(m, &file)?;
            let n = grid.resolution.or(file.resolution).unwrap_or(400);
            let g = GridSpec::new(
                grid.re_min.or(file.re_min).unwrap_or(-3.0),
                grid.re_max.or(file.re_max).unwrap_or(1.0),
                grid.im_min.or(file.im_min).unwrap_or(-17.0),
                grid.im_max.or(file.im_max).unwrap_or(17.0),
                n,
                n,
            )?;
            let tg = transfer_grid(&p, g, exec)?;
            let report = GridReport {
                command: "grid".into(),
                params: (&p).into(),
                grid: GridOut { re_min: g.re_min, re_max: g.re_max, im_min: g.im_min, im_max: g.im_max, n_re: g.n_re, n_im: g.n_im },
                clamp: GRID_CLAMP,
                values: (0..g.n_im).map(|i| tg.row(i).to_vec()).collect(),
            };
            write_report(&report, format, out)?;
            Ok(EXIT_OK)
        }
        Command::Check { model: m, branches } => {
            let p = config::model(m, &file)?;
            let r = model::reduce(&p)?;
            let (lo, hi) = config::branch_range(branches, &file)?;
            let mut report = CheckReport {
                command: "check".into(),
                params: (&p).into(),
                reduced: (&r).into(),
                branches: Vec::new(),
                failures: Vec::new(),
            };
            for j in lo..=hi {
                match model::branch_quantities(&r, j).and_then(|b| Ok((b, model::assumption_diagnostics(&r, j)?))) {
                    Ok((b, d)) => report.branches.push(CheckBranch {
                        j,
                        log_gamma2: b.log_gamma2.into(),
                        sigma: b.sigma.into(),
                        c: b.c.into(),
                        mu: b.mu.into(),
                        diagnostics: (&d).into(),
                    }),
                    Err(e) => report.failures.push(BranchFailure { j, error: e.to_string() }),
                }
            }
            write_report(&report, format, out)?;
            Ok(if report.failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
        }
        Command::Simulate { model: m, sim, branches, series } => {
            let p = config::model(m, &file)?;
            let history_spec = sim.history.clone().or(file.history.clone()).unwrap_or_else(|| "const:1".into());
            let phi = parse_history(&history_spec)?;
            let dt = sim.dt.or(file.dt).unwrap_or_else(|| (p.min_lag() / 4.0).min(0.01));
            let t_end = sim.t_end.or(file.t_end).unwrap_or(10.0);
            let stride = sim.stride.or(file.stride).unwrap_or(1).max(1);
            let traj = integrate_mos(&p, &phi, t_end, dt)?;
            let mut report = SimulateReport {
                command: "simulate".into(),
                params: (&p).into(),
                history: phi.tag.clone(),
                dt,
                t_end,
                fit: None,
                failures: Vec::new(),
                samples: Vec::new(),
            };
            let mut fit = None;
            if sim.fit || file.fit.unwrap_or(false) {
                model::reduce(&p)?;
                let (lo, hi) = config::branch_range(branches, &file)?;
                let t = config::truncation(series, &file)?;
                let opts = refine_options(&p);
                let mut roots = Vec::new();
                for (j, res) in (lo..=hi).zip(root_series_branches(&p, lo..=hi, t, exec)) {
                    match res.and_then(|s| refine_root(&p, &s, opts)) {
                        Ok((root, o)) if o.converged() => roots.push(root),
                        Ok(_) => report.failures.push(BranchFailure { j, error: "newton did not converge".into() }),
                        Err(e) => report.failures.push(BranchFailure { j, error: e.to_string() }),
                    }
                }
                let method = sim.method.or(file.method).unwrap_or(Method::Lsq);
                let (fm, name) = match method {
                    Method::Lsq => (FitMethod::LeastSquares, "lsq"),
                    Method::Collocation => (FitMethod::Collocation, "collocation"),
                    Method::Residue => (FitMethod::Residue, "residue"),
                };
                let samples = sim.samples.or(file.samples).unwrap_or_else(|| default_samples(roots.len()));
                let f = spectral_fit(&p, &phi, &roots, samples, fm)?;
                report.fit = Some(FitOut {
                    method: name.into(),
                    branches: f.branches.clone(),
                    roots: f.roots.iter().map(|&s| s.into()).collect(),
                    coefficients: f.coefficients.iter().map(|&c| c.into()).collect(),
                    window_residual: f.window_residual,
                });
                fit = Some(f);
            }
            report.samples = (0..traj.len())
                .step_by(stride)
                .map(|k| {
                    let t = traj.time(k);
                    Sample { t, x: traj.values[k], x_spectral: fit.as_ref().map(|f| f.eval(t).re) }
                })
                .collect();
            write_report(&report, format, out)?;
            Ok(if report.failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
        }
        Command::SingleLag { alpha, beta, tau, branches } => {
            let alpha = alpha.or(file.alpha).unwrap_or(0.0);
            let beta = beta
                .or(file.beta)
                .ok_or_else(|| CliError::input("missing", "--beta is required (flag or config key)"))?;
            let tau = tau.or(file.tau).ok_or_else(|| CliError::input("missing", "--tau is required (flag or config key)"))?;
            if !(alpha.is_finite() && beta.is_finite() && tau.is_finite()) {
                return Err(CliError::input("invalid_input", "parameters must be finite"));
            }
            let (lo, hi) = config::branch_range(branches, &file)?;
            let mut report =
                SingleLagReport { command: "single-lag".into(), alpha, beta, tau, roots: Vec::new(), failures: Vec::new() };
            for j in lo..=hi {
                match single_lag_root(alpha, beta, tau, j) {
                    Ok(s) => {
                        let residual = (s - alpha - beta * (-s * tau).exp()).norm();
                        report.roots.push(SingleLagRoot { j, s: s.into(), residual });
                    }
                    Err(e @ (Error::ZeroBeta | Error::NonPositiveLag { .. })) => return Err(e.into()),
                    Err(e) => report.failures.push(BranchFailure { j, error: e.to_string() }),
                }
            }
            write_report(&report, format, out)?;
            Ok(if report.failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::from(EXIT_OK);
            }
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            CliError::input("usage", first).emit();
            return ExitCode::from(EXIT_INPUT);
        }
    };
    if let Err(e) = threads_from_env() {
        e.emit();
        return ExitCode::from(e.code);
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            e.emit();
            ExitCode::from(e.code)
        }
    }
}
