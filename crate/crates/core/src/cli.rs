//! Command-line front end: one job per invocation, results written as CSV and
//! JSON under the output directory together with a run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cauchy::{free_convolve, stieltjes_invert, CauchySampler, InversionDomain};
use crate::conformal::{boundary_trace, flowlines, slit_image, ConformalPair, PsiForm};
use crate::error::{Error, Result};
use crate::io::{density_rows, fmt_f64, write_csv, FnSpec};
use crate::levyflow::{
    asymptotic_ratio, build_fal2, fal2_check, increment_transform, marginal_law, transition_kernel, Fal2Options,
    FlowField, KernelSlice, Route,
};
use crate::nevanlinna::{is_nevanlinna_numeric, recover_parameters, RecoveryConfig, SamplingPlan};
use crate::ode::OdeConfig;
use crate::quadrature::QuadConfig;

/// Points per work unit; each unit runs on a fresh inversion cache so that
/// output does not depend on the thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    NevEval,
    NevRecover,
    Conv,
    Semigroup,
    ConformalImage,
    Flowlines,
    Fal2Build,
    Fal2Check,
    Flow,
    Kernel,
    Marginal,
    Increment,
}

/// Uniform grid `lo:hi:n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:n, got {s:?}"));
        }
        let num = |p: &str| crate::io::parse_number(p).map_err(|e| e.to_string());
        let lo = num(parts[0])?;
        let hi = num(parts[1])?;
        let n = parts[2].trim().parse().map_err(|_| format!("bad count {:?}", parts[2]))?;
        Ok(Grid { lo, hi, n })
    }
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn points(&self) -> Vec<f64> {
        let d = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.lo + d * i as f64).collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.n < 2 || !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::Invalid(format!("--{name} needs finite lo < hi and n >= 2, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "freeflow", version, about = "Free convolution semigroups, Nevanlinna functions and free Levy flows")]
pub struct JobConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// Generator spec; repeat for `conv`.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Vec<String>,
    /// Nevanlinna function behind a conformal primitive.
    #[arg(long, allow_hyphen_values = true)]
    pub psi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub tol_abs: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tol_rel: Option<f64>,
    /// Stieltjes inversion height.
    #[arg(long, default_value_t = 1e-3, allow_hyphen_values = true)]
    pub eps: f64,
    /// Times, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub t: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub s: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x: f64,
    /// Real grid `lo:hi:n`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Imaginary grid `lo:hi:n` for commands sampling the upper half-plane.
    #[arg(long)]
    pub im_grid: Option<Grid>,
    #[arg(long, default_value = "freeflow-out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub im_lines: usize,
    #[arg(long, default_value_t = 8)]
    pub re_lines: usize,
    #[arg(long, default_value_t = 4.0)]
    pub re_max: f64,
    #[arg(long, default_value_t = 4.0)]
    pub im_max: f64,
    /// Samples per polyline.
    #[arg(long, default_value_t = 201)]
    pub samples: usize,
    /// Random point pairs for the univalence check of `fal2-build`.
    #[arg(long, default_value_t = 500)]
    pub pairs: usize,
}

impl JobConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("tol-abs", self.tol_abs), ("tol-rel", self.tol_rel)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::Invalid(format!("--{name} must be > 0, got {v}")));
                }
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::Invalid(format!("--eps must be > 0, got {}", self.eps)));
        }
        if self.t.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Invalid(format!("--t must be finite and >= 0, got {:?}", self.t)));
        }
        if let Some(g) = &self.grid {
            g.validate("grid")?;
        }
        if let Some(g) = &self.im_grid {
            g.validate("im-grid")?;
            if g.lo <= 0.0 {
                return Err(Error::Invalid("--im-grid must lie in (0, inf)".into()));
            }
        }
        if self.samples < 2 || !(self.re_max > 0.0) || !(self.im_max > 0.0) {
            return Err(Error::Invalid("--samples >= 2, --re-max > 0 and --im-max > 0 required".into()));
        }
        Ok(())
    }

    fn ode(&self) -> OdeConfig {
        let d = OdeConfig::default();
        OdeConfig {
            abs_tol: self.tol_abs.unwrap_or(d.abs_tol),
            rel_tol: self.tol_rel.unwrap_or(d.rel_tol),
            ..d
        }
    }

    fn quad(&self) -> QuadConfig {
        let d = QuadConfig::default();
        QuadConfig {
            abs_tol: self.tol_abs.unwrap_or(d.abs_tol),
            rel_tol: self.tol_rel.unwrap_or(d.rel_tol),
            ..d
        }
    }

    fn spec(&self, s: &str) -> Result<FnSpec> {
        let mut spec = FnSpec::parse(s)?;
        if let FnSpec::Nevanlinna(n) = &mut spec {
            n.nu = n.nu.clone().with_quadrature(self.quad());
        }
        Ok(spec)
    }

    fn one_phi(&self) -> Result<FnSpec> {
        match self.phi.as_slice() {
            [p] => self.spec(p),
            _ => Err(Error::Invalid(format!("{:?} needs exactly one --phi", self.command))),
        }
    }

    fn psi(&self) -> Result<PsiForm> {
        let s = self.psi.as_deref().ok_or_else(|| Error::Invalid(format!("{:?} needs --psi", self.command)))?;
        self.spec(s)?.psi_form()
    }

    fn field(&self) -> Result<FlowField> {
        Ok(self.one_phi()?.flow_field()?.with_ode(self.ode()))
    }

    fn grid_or(&self, d: Grid) -> Vec<f64> {
        self.grid.unwrap_or(d).points()
    }

    /// `x + iy` over `--grid × --im-grid`, rows of constant `y`.
    fn plane_points(&self, dx: Grid, dy: Grid) -> Vec<Complex64> {
        let xs = self.grid_or(dx);
        let ys = self.im_grid.unwrap_or(dy).points();
        ys.iter().flat_map(|&y| xs.iter().map(move |&x| Complex64::new(x, y))).collect()
    }
}

/// Result of one job.
#[derive(Debug, Clone)]
pub struct Report {
    /// A check command produced the verdict "fail".
    pub verdict_failed: bool,
    pub outputs: Vec<PathBuf>,
    pub manifest: Value,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.verdict_failed {
            2
        } else {
            0
        }
    }
}

/// Worker count from `FREEFLOW_THREADS`, else the available parallelism.
pub fn threads() -> usize {
    std::env::var("FREEFLOW_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Maps `f` over fixed chunks of `items` on up to `threads()` workers;
/// output order follows `items`.
fn par_chunks<T: Sync, R: Send>(items: &[T], f: impl Fn(&[T]) -> Vec<R> + Sync + Send) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads())
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.par_chunks(CHUNK).flat_map_iter(&f).collect()))
}

fn pair_json(z: Complex64) -> Value {
    if z.re.is_finite() && z.im.is_finite() {
        json!([z.re, z.im])
    } else {
        Value::Null
    }
}

fn route_json(ff: &FlowField) -> Value {
    match ff.route() {
        Route::Conformal { pair, kappa, certificate } => json!({
            "route": "conformal",
            "psi": pair.form().label(),
            "shift": pair_json(pair.shift()),
            "kappa": kappa,
            "containment": certificate,
        }),
        Route::Constant(c) => json!({ "route": "constant", "c": pair_json(*c) }),
        Route::Ode => json!({ "route": "ode" }),
    }
}

fn slits_json(form: &PsiForm) -> Option<Value> {
    match form {
        PsiForm::Rational(r) if r.a < 0.0 => slit_image(r).ok().map(|s| json!(s.slits)),
        _ => None,
    }
}

/// Pictures do not need the normalization, which only exists when the image
/// contains a translate of `C+`.
fn normalized_or_raw(form: &PsiForm) -> Result<ConformalPair> {
    let pair = ConformalPair::new(form.clone())?;
    match pair.normalize() {
        Err(Error::NotContaining) => Ok(pair),
        other => other,
    }
}

fn t_tag(t: f64) -> String {
    format!("t{t}")
}

struct Job<'a> {
    cfg: &'a JobConfig,
    outputs: Vec<PathBuf>,
    domain: Value,
    verdict: Option<Value>,
    verdict_failed: bool,
}

impl Job<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.cfg.out.join(name);
        self.outputs.push(p.clone());
        p
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let p = self.path(name);
        write_csv(&p, header, rows)
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let p = self.path(name);
        fs::write(p, serde_json::to_string_pretty(v)? + "\n")?;
        Ok(())
    }

    fn density(&mut self, name: &str, head: &str, k: &KernelSlice) -> Result<()> {
        self.csv(name, &[head, "density", "failed"], &density_rows(&k.grid, &k.density, &k.failed))
    }

    fn nev_eval(&mut self) -> Result<()> {
        let f = self.cfg.one_phi()?.analytic();
        let pts = self.cfg.plane_points(Grid::new(-4.0, 4.0, 9), Grid::new(0.5, 2.0, 4));
        let values = par_chunks(&pts, |c| c.iter().map(|&z| f.eval(z)).collect())?;
        let verdict = serde_json::to_value(is_nevanlinna_numeric(&f, &SamplingPlan::default())?)?;
        self.verdict_failed = verdict.get("Fail").is_some();
        self.verdict = Some(verdict.clone());
        let out = json!({
            "grid": pts.iter().map(|&z| pair_json(z)).collect::<Vec<_>>(),
            "values": values.iter().map(|&v| pair_json(v)).collect::<Vec<_>>(),
            "nevanlinna": verdict,
        });
        self.json("values.json", &out)
    }

    fn nev_recover(&mut self) -> Result<()> {
        let f = self.cfg.one_phi()?.analytic();
        let mut rc = RecoveryConfig {
            eps: self.cfg.eps,
            ..RecoveryConfig::default()
        };
        if let Some(g) = self.cfg.grid {
            rc.u_grid = g.points();
        }
        let r = recover_parameters(&f, &rc)?;
        let us = &rc.u_grid;
        let dens: Vec<f64> = us
            .iter()
            .map(|&u| {
                r.nu.pieces()
                    .iter()
                    .filter(|p| p.lo <= u && u <= p.hi)
                    .map(|p| p.weight * p.density.eval(u))
                    .sum()
            })
            .collect();
        let failed = vec![false; us.len()];
        self.csv("nu.csv", &["u", "density", "failed"], &density_rows(us, &dens, &failed))?;
        let out = json!({
            "alpha": r.alpha,
            "beta": r.beta,
            "recoveredMass": r.recovered_mass,
            "impliedMass": r.implied_mass,
            "massDeficit": r.mass_deficit,
            "realConstant": r.real_constant,
            "atomsSuspected": r.atoms_suspected,
            "clampedPoints": r.clamped_points,
            "atoms": r.nu.atoms().iter().map(|a| json!({"u": a.position, "mass": a.mass})).collect::<Vec<_>>(),
        });
        self.json("recovery.json", &out)
    }

    fn law(&mut self, g: &CauchySampler, tag: &str) -> Result<Value> {
        let xs = self.cfg.grid_or(Grid::new(-6.0, 6.0, 241));
        let eps = self.cfg.eps;
        let table = stieltjes_invert(g, &xs, eps)?;
        let values: Vec<Value> = xs
            .iter()
            .map(|&x| g.eval(Complex64::new(x, eps)).map_or(Value::Null, pair_json))
            .collect();
        self.csv(
            &format!("density{tag}.csv"),
            &["x", "density", "failed"],
            &density_rows(&table.x, &table.density, &table.failed),
        )?;
        self.json(
            &format!("cauchy{tag}.json"),
            &json!({"grid": xs, "values": values, "massDeficit": table.mass_deficit}),
        )?;
        let domain = InversionDomain::estimate(g, 1.0).map_or_else(|e| json!(e.to_string()), |d| json!(d));
        Ok(json!({"massDeficit": table.mass_deficit, "clamped": table.clamped, "inversionDomain": domain}))
    }

    fn conv(&mut self) -> Result<()> {
        if self.cfg.phi.len() < 2 {
            return Err(Error::Invalid("conv needs at least two --phi".into()));
        }
        let mut phi = self.cfg.spec(&self.cfg.phi[0])?.analytic();
        for p in &self.cfg.phi[1..] {
            phi = free_convolve(&phi, &self.cfg.spec(p)?.analytic());
        }
        let g = CauchySampler::semigroup(&phi, 1.0)?;
        self.domain = self.law(&g, "")?;
        Ok(())
    }

    fn semigroup(&mut self) -> Result<()> {
        let phi = self.cfg.one_phi()?.analytic();
        let mut dom = serde_json::Map::new();
        for &t in &self.cfg.t.clone() {
            let g = CauchySampler::semigroup(&phi, t)?;
            dom.insert(t_tag(t), self.law(&g, &format!("_{}", t_tag(t)))?);
        }
        self.domain = Value::Object(dom);
        Ok(())
    }

    fn conformal_image(&mut self) -> Result<()> {
        let form = self.cfg.psi()?;
        let pair = normalized_or_raw(&form)?;
        let g = self.cfg.grid.unwrap_or(Grid::new(-4.0, 4.0, 401));
        let trace = boundary_trace(&pair, g.lo, g.hi, g.n, 1e-9)?;
        let rows: Vec<Vec<String>> = trace.iter().map(|r| r.iter().map(|&v| fmt_f64(v)).collect()).collect();
        self.csv("trace.csv", &["x", "re", "im"], &rows)?;
        self.write_slits(&form)?;
        self.domain = json!({"psi": form.label(), "shift": pair_json(pair.shift()), "containment": pair.containment().ok()});
        Ok(())
    }

    fn write_slits(&mut self, form: &PsiForm) -> Result<()> {
        if let PsiForm::Rational(r) = form {
            if r.a < 0.0 {
                let img = slit_image(r)?;
                let rows: Vec<Vec<String>> = img
                    .slits
                    .iter()
                    .map(|s| vec![fmt_f64(s.height), fmt_f64(s.tip), fmt_f64(s.root)])
                    .collect();
                self.csv("slits.csv", &["height", "tip", "root"], &rows)?;
            }
        }
        Ok(())
    }

    fn flowlines(&mut self) -> Result<()> {
        let form = self.cfg.psi()?;
        let pair = normalized_or_raw(&form)?;
        let c = self.cfg;
        let lines = flowlines(&pair, c.im_lines, c.re_lines, c.re_max, c.im_max, c.samples)?;
        let mut rows = Vec::new();
        for l in &lines {
            for (j, p) in l.points.iter().enumerate() {
                let mut row = vec![l.family.to_string(), fmt_f64(l.value), j.to_string()];
                row.extend(p.iter().map(|&v| fmt_f64(v)));
                rows.push(row);
            }
        }
        self.csv(
            "polylines.csv",
            &["family", "value", "index", "re_in", "im_in", "re_out", "im_out"],
            &rows,
        )?;
        self.write_slits(&form)?;
        self.domain = json!({"psi": form.label(), "shift": pair_json(pair.shift()), "slits": slits_json(&form)});
        Ok(())
    }

    fn fal2_build(&mut self) -> Result<()> {
        let form = self.cfg.psi()?;
        let certificate = ConformalPair::new(form.clone())?.containment()?;
        if !certificate.contains {
            let v = json!({"verdict": "notContaining", "psi": form.label(), "containment": certificate});
            self.verdict = Some(v.clone());
            self.verdict_failed = true;
            return self.json("fal2.json", &v);
        }
        let ff = build_fal2(form.clone())?.with_ode(self.cfg.ode());
        let pair = ff.pair().ok_or(Error::NoConformalPair)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let (rm, im) = (self.cfg.re_max, self.cfg.im_max);
        let mut point = || Complex64::new(rng.gen_range(-rm..rm), im * 10f64.powf(-3.0 * rng.gen::<f64>()));
        let pairs: Vec<(Complex64, Complex64)> = (0..self.cfg.pairs).map(|_| (point(), point())).collect();
        let defect = pair.univalence_defect(&pairs)?;
        let xs = self.cfg.grid_or(Grid::new(-4.0, 4.0, 9));
        let samples: Vec<Value> = xs
            .iter()
            .map(|&x| ff.phi().try_eval(Complex64::new(x, 1.0)).map_or(Value::Null, pair_json))
            .collect();
        let v = json!({
            "verdict": "built",
            "psi": form.label(),
            "phi": ff.phi().label(),
            "shift": pair_json(pair.shift()),
            "containment": certificate,
            "univalence": {"pairs": pairs.len(), "worstDefect": defect},
            "asymptotics": asymptotic_ratio(ff.phi())?,
            "phiAtHeightOne": {"grid": xs, "values": samples},
        });
        self.verdict = Some(json!("built"));
        self.domain = route_json(&ff);
        self.json("fal2.json", &v)
    }

    fn fal2_check(&mut self) -> Result<()> {
        let spec = self.cfg.one_phi()?;
        let ff = self.cfg.field()?;
        let opts = Fal2Options::default();
        let verdict = fal2_check(&ff, &opts)?;
        self.verdict_failed = verdict.is_fail();
        let v = serde_json::to_value(&verdict)?;
        self.verdict = Some(v.clone());
        self.domain = route_json(&ff);
        self.json("verdict.json", &json!({"phi": spec.label(), "options": opts, "result": v}))
    }

    fn flow(&mut self) -> Result<()> {
        let ff = self.cfg.field()?;
        let pts = self.cfg.plane_points(Grid::new(-2.0, 2.0, 9), Grid::new(0.25, 2.0, 8));
        let mut rows = Vec::new();
        for &t in &self.cfg.t {
            let out = par_chunks(&pts, |c| {
                let f = ff.detached();
                c.iter().map(|&z| f.flow(z, t)).collect()
            })?;
            for (z, w) in pts.iter().zip(out) {
                let (w, failed) = match w {
                    Ok(w) => (w, false),
                    Err(_) => (Complex64::new(f64::NAN, f64::NAN), true),
                };
                rows.push(vec![
                    fmt_f64(z.re),
                    fmt_f64(z.im),
                    fmt_f64(w.re),
                    fmt_f64(w.im),
                    fmt_f64(t),
                    failed.to_string(),
                ]);
            }
        }
        self.csv("flow.csv", &["re_in", "im_in", "re_out", "im_out", "t", "failed"], &rows)?;
        self.domain = route_json(&ff);
        Ok(())
    }

    fn kernel(&mut self, marginal: bool) -> Result<()> {
        let ff = self.cfg.field()?;
        let us = self.cfg.grid_or(Grid::new(-10.0, 10.0, 401));
        let mut summary = Vec::new();
        for &t in &self.cfg.t {
            let k = if marginal {
                marginal_law(&ff, t, &us, self.cfg.eps)?
            } else {
                transition_kernel(&ff, t, self.cfg.x, &us, self.cfg.eps)?
            };
            let stem = if marginal { "marginal" } else { "kernel" };
            self.density(&format!("{stem}_{}.csv", t_tag(t)), "u", &k)?;
            summary.push(json!({
                "t": t,
                "x": k.x,
                "massDeficit": k.mass_deficit,
                "clamped": k.clamped,
                "failedPoints": k.failed.iter().filter(|&&f| f).count(),
            }));
        }
        let name = if marginal { "marginal.json" } else { "kernel.json" };
        self.json(name, &json!(summary))?;
        self.domain = route_json(&ff);
        Ok(())
    }

    fn increment(&mut self) -> Result<()> {
        let ff = self.cfg.field()?;
        let (s, t) = (self.cfg.s, self.cfg.t[0]);
        let pts = self.cfg.plane_points(Grid::new(-2.0, 2.0, 9), Grid::new(0.5, 4.0, 8));
        let vals = par_chunks(&pts, |c| {
            let f = ff.detached();
            c.iter().map(|&z| increment_transform(&f, s, t, z).ok()).collect()
        })?;
        let out = json!({
            "s": s,
            "t": t,
            "grid": pts.iter().map(|&z| pair_json(z)).collect::<Vec<_>>(),
            "values": vals.iter().map(|v| v.map_or(Value::Null, pair_json)).collect::<Vec<_>>(),
            "failed": vals.iter().map(|v| v.is_none()).collect::<Vec<_>>(),
        });
        self.json("increment.json", &out)?;
        self.domain = route_json(&ff);
        Ok(())
    }
}

/// Runs one job, writing its outputs and `manifest.json` under `cfg.out`.
pub fn run(cfg: &JobConfig) -> Result<Report> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let mut job = Job {
        cfg,
        outputs: Vec::new(),
        domain: Value::Null,
        verdict: None,
        verdict_failed: false,
    };
    match cfg.command {
        Command::NevEval => job.nev_eval(),
        Command::NevRecover => job.nev_recover(),
        Command::Conv => job.conv(),
        Command::Semigroup => job.semigroup(),
        Command::ConformalImage => job.conformal_image(),
        Command::Flowlines => job.flowlines(),
        Command::Fal2Build => job.fal2_build(),
        Command::Fal2Check => job.fal2_check(),
        Command::Flow => job.flow(),
        Command::Kernel => job.kernel(false),
        Command::Marginal => job.kernel(true),
        Command::Increment => job.increment(),
    }?;
    let file_names: Vec<String> = job
        .outputs
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let manifest = json!({
        "command": cfg.command,
        "version": env!("CARGO_PKG_VERSION"),
        "inputs": {"phi": cfg.phi, "psi": cfg.psi},
        "tolerances": {"ode": cfg.ode(), "quadrature": cfg.quad(), "eps": cfg.eps},
        "parameters": {
            "t": cfg.t, "s": cfg.s, "x": cfg.x, "grid": cfg.grid, "imGrid": cfg.im_grid,
            "seed": cfg.seed, "imLines": cfg.im_lines, "reLines": cfg.re_lines,
            "reMax": cfg.re_max, "imMax": cfg.im_max, "samples": cfg.samples, "pairs": cfg.pairs,
        },
        "domain": job.domain,
        "verdict": job.verdict,
        "outputs": file_names,
    });
    let path = cfg.out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    let mut outputs = job.outputs;
    outputs.push(path);
    Ok(Report {
        verdict_failed: job.verdict_failed,
        outputs,
        manifest,
    })
}

/// Parses arguments, runs the job and maps the outcome to an exit code:
/// 0 success, 2 a check returned "fail", 1 any error.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cfg = match JobConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cfg) {
        Ok(report) => {
            let v = report.manifest.get("verdict").filter(|v| !v.is_null());
            match v {
                Some(v) => println!("{}: {}", out_name(&cfg.out), v),
                None => println!("{}: ok", out_name(&cfg.out)),
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn out_name(p: &Path) -> String {
    p.display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g: Grid = "-4:4:9".parse().unwrap();
        assert_eq!(g, Grid::new(-4.0, 4.0, 9));
        assert_eq!(g.points()[4], 0.0);
        assert!("1:2".parse::<Grid>().is_err());
        assert!(Grid::new(0.0, 1.0, 1).validate("grid").is_err());
    }

    #[test]
    fn chunked_map_keeps_order() {
        let v: Vec<usize> = (0..1000).collect();
        let out = par_chunks(&v, |c| c.iter().map(|x| x * 2).collect()).unwrap();
        assert_eq!(out, v.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_tolerances() {
        let cfg = JobConfig::try_parse_from(["freeflow", "flow", "--phi", "const(0,-1)", "--tol-abs", "-1"]).unwrap();
        assert!(cfg.validate().is_err());
        let cfg = JobConfig::try_parse_from(["freeflow", "flow", "--phi", "const(0,-1)", "--grid", "0:1:1"]).unwrap();
        assert!(cfg.validate().is_err());
    }
}
