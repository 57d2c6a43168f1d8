//! Serializable reports. Complex numbers are `{"re", "im"}` objects and every
//! float is written with 17 significant digits.

use std::io::{self, Write};

use dde_spectra::dynamics::{HopfReport, TheoremCheck};
use dde_spectra::model::{Diagnostics, ReducedParams};
use dde_spectra::{ModelParams, C64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Cx {
    fn from(z: C64) -> Self {
        Cx { re: z.re, im: z.im }
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub trait Report: Serialize {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsOut {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl From<&ModelParams> for ParamsOut {
    fn from(p: &ModelParams) -> Self {
        ParamsOut { alpha: p.alpha, beta: p.beta, gamma: p.gamma, tau1: p.tau1, tau2: p.tau2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedOut {
    pub alpha1: f64,
    pub beta1: f64,
    pub gamma1: f64,
    pub tau: f64,
    pub beta2: f64,
    pub gamma2: f64,
}

impl From<&ReducedParams> for ReducedOut {
    fn from(r: &ReducedParams) -> Self {
        ReducedOut { alpha1: r.alpha1, beta1: r.beta1, gamma1: r.gamma1, tau: r.tau, beta2: r.beta2, gamma2: r.gamma2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagOut {
    pub ratio: f64,
    pub mu_abs: f64,
    pub sigma_abs: f64,
    pub advisory_ok: bool,
}

impl From<&Diagnostics> for DiagOut {
    fn from(d: &Diagnostics) -> Self {
        DiagOut { ratio: d.ratio, mu_abs: d.mu_abs, sigma_abs: d.sigma_abs, advisory_ok: d.advisory_ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFailure {
    pub j: i64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineOut {
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootRecord {
    pub j: i64,
    pub s: Cx,
    pub s_rescaled: Cx,
    pub v: Cx,
    /// Rescaled residual of the raw series value.
    pub residual_series: f64,
    /// Rescaled residual of the emitted root.
    pub residual: f64,
    pub refine: Option<RefineOut>,
    pub diagnostics: DiagOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootsReport {
    pub command: String,
    pub params: ParamsOut,
    pub reduced: ReducedOut,
    pub m_max: usize,
    pub k_max: usize,
    pub refine: bool,
    pub roots: Vec<RootRecord>,
    pub failures: Vec<BranchFailure>,
}

impl Report for RootsReport {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        w.write_record([
            "j",
            "s_re",
            "s_im",
            "s_rescaled_re",
            "s_rescaled_im",
            "v_re",
            "v_im",
            "residual_series",
            "residual",
            "newton_iterations",
            "newton_converged",
            "ratio",
            "mu_abs",
            "sigma_abs",
            "advisory_ok",
            "error",
        ])?;
        let mut rows: Vec<(i64, Vec<String>)> = self
            .roots
            .iter()
            .map(|r| {
                let row = vec![
                    r.j.to_string(),
                    fmt_f64(r.s.re),
                    fmt_f64(r.s.im),
                    fmt_f64(r.s_rescaled.re),
                    fmt_f64(r.s_rescaled.im),
                    fmt_f64(r.v.re),
                    fmt_f64(r.v.im),
                    fmt_f64(r.residual_series),
                    fmt_f64(r.residual),
                    r.refine.map(|x| x.iterations.to_string()).unwrap_or_default(),
                    r.refine.map(|x| x.converged.to_string()).unwrap_or_default(),
                    fmt_f64(r.diagnostics.ratio),
                    fmt_f64(r.diagnostics.mu_abs),
                    fmt_f64(r.diagnostics.sigma_abs),
                    r.diagnostics.advisory_ok.to_string(),
                    String::new(),
                ];
                (r.j, row)
            })
            .collect();
        for f in &self.failures {
            if let Some((_, row)) = rows.iter_mut().find(|(j, _)| *j == f.j) {
                row[15] = f.error.clone();
            } else {
                let mut row = vec![String::new(); 16];
                row[0] = f.j.to_string();
                row[15] = f.error.clone();
                rows.push((f.j, row));
            }
        }
        rows.sort_by_key(|(j, _)| *j);
        for (_, row) in rows {
            w.write_record(row)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremOut {
    pub equal_rates: bool,
    pub tau1_bound: f64,
    pub tau1_ok: bool,
    pub holds: bool,
}

impl From<&TheoremCheck> for TheoremOut {
    fn from(t: &TheoremCheck) -> Self {
        TheoremOut { equal_rates: t.equal_rates, tau1_bound: t.tau1_bound, tau1_ok: t.tau1_ok, holds: t.holds() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPointOut {
    pub tau2: f64,
    pub s0: Option<Cx>,
    pub series_seed_ok: bool,
    pub from_series: bool,
    pub ratio: Option<f64>,
    pub advisory_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingOut {
    pub tau2: f64,
    pub s0: Cx,
    pub bracket: [f64; 2],
    pub ratio: Option<f64>,
    pub direction: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub command: String,
    pub r: f64,
    pub a1: f64,
    pub a2: f64,
    pub tau1: f64,
    pub tau2_min: f64,
    pub tau2_max: f64,
    pub grid_n: usize,
    pub m_max: usize,
    pub k_max: usize,
    pub theorem: TheoremOut,
    pub points: Vec<ScanPointOut>,
    pub crossings: Vec<CrossingOut>,
    pub failed: Vec<f64>,
}

impl ScanReport {
    pub fn fill(&mut self, h: &HopfReport) {
        self.theorem = (&h.theorem).into();
        self.points = h
            .points
            .iter()
            .map(|p| ScanPointOut {
                tau2: p.tau2,
                s0: p.principal.s.map(Cx::from),
                series_seed_ok: p.principal.series_seed_ok,
                from_series: p.principal.from_series,
                ratio: p.ratio,
                advisory_ok: p.advisory_ok,
            })
            .collect();
        self.crossings = h
            .crossings
            .iter()
            .map(|c| CrossingOut {
                tau2: c.tau2,
                s0: c.s0.into(),
                bracket: [c.bracket.0, c.bracket.1],
                ratio: c.ratio,
                direction: c.direction,
            })
            .collect();
        self.failed = h.failed.clone();
    }
}

impl Report for ScanReport {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        w.write_record(["kind", "tau2", "s0_re", "s0_im", "series_seed_ok", "from_series", "ratio", "advisory_ok"])?;
        for p in &self.points {
            w.write_record([
                "point".to_string(),
                fmt_f64(p.tau2),
                fmt_opt(p.s0.map(|s| s.re)),
                fmt_opt(p.s0.map(|s| s.im)),
                p.series_seed_ok.to_string(),
                p.from_series.to_string(),
                fmt_opt(p.ratio),
                p.advisory_ok.map(|b| b.to_string()).unwrap_or_default(),
            ])?;
        }
        for c in &self.crossings {
            w.write_record([
                "crossing".to_string(),
                fmt_f64(c.tau2),
                fmt_f64(c.s0.re),
                fmt_f64(c.s0.im),
                String::new(),
                String::new(),
                fmt_opt(c.ratio),
                String::new(),
            ])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOut {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub command: String,
    pub params: ParamsOut,
    pub grid: GridOut,
    pub clamp: f64,
    /// `values[i][k]` at `Im s = im(i)` (ascending), `Re s = re(k)`.
    pub values: Vec<Vec<f64>>,
}

impl Report for GridReport {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        let g = &self.grid;
        let step = |lo: f64, hi: f64, n: usize, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let mut header = vec!["im\\re".to_string()];
        header.extend((0..g.n_re).map(|k| fmt_f64(step(g.re_min, g.re_max, g.n_re, k))));
        w.write_record(&header)?;
        for (i, row) in self.values.iter().enumerate() {
            let mut rec = vec![fmt_f64(step(g.im_min, g.im_max, g.n_im, i))];
            rec.extend(row.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckBranch {
    pub j: i64,
    pub log_gamma2: Cx,
    pub sigma: Cx,
    pub c: Cx,
    pub mu: Cx,
    pub diagnostics: DiagOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub command: String,
    pub params: ParamsOut,
    pub reduced: ReducedOut,
    pub branches: Vec<CheckBranch>,
    pub failures: Vec<BranchFailure>,
}

impl Report for CheckReport {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        w.write_record([
            "j", "L_re", "L_im", "sigma_re", "sigma_im", "c_re", "c_im", "mu_re", "mu_im", "ratio", "mu_abs", "sigma_abs",
            "advisory_ok",
        ])?;
        for b in &self.branches {
            w.write_record([
                b.j.to_string(),
                fmt_f64(b.log_gamma2.re),
                fmt_f64(b.log_gamma2.im),
                fmt_f64(b.sigma.re),
                fmt_f64(b.sigma.im),
                fmt_f64(b.c.re),
                fmt_f64(b.c.im),
                fmt_f64(b.mu.re),
                fmt_f64(b.mu.im),
                fmt_f64(b.diagnostics.ratio),
                fmt_f64(b.diagnostics.mu_abs),
                fmt_f64(b.diagnostics.sigma_abs),
                b.diagnostics.advisory_ok.to_string(),
            ])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOut {
    pub method: String,
    pub branches: Vec<i64>,
    pub roots: Vec<Cx>,
    pub coefficients: Vec<Cx>,
    pub window_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub x_spectral: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub command: String,
    pub params: ParamsOut,
    pub history: String,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub fit: Option<FitOut>,
    pub failures: Vec<BranchFailure>,
    pub samples: Vec<Sample>,
}

impl Report for SimulateReport {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        w.write_record(["t", "x", "x_spectral"])?;
        for s in &self.samples {
            w.write_record([fmt_f64(s.t), fmt_f64(s.x), fmt_opt(s.x_spectral)])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleLagRoot {
    pub j: i64,
    pub s: Cx,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleLagReport {
    pub command: String,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub roots: Vec<SingleLagRoot>,
    pub failures: Vec<BranchFailure>,
}

impl Report for SingleLagReport {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        w.write_record(["j", "s_re", "s_im", "residual"])?;
        for r in &self.roots {
            w.write_record([r.j.to_string(), fmt_f64(r.s.re), fmt_f64(r.s.im), fmt_f64(r.residual)])?;
        }
        Ok(())
    }
}
