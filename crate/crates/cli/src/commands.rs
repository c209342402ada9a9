//! Execution of single commands with artifact dumps.

use crate::acceptance::{acceptance_suite, SuiteOptions};
use crate::config::{Command, ConfigError, OmegaSpec, RunConfig, SymbolName};
use nalgebra::DMatrix;
use phasespace::grid::format::{read_array, read_matrix_csv, write_array, Array, FormatError};
use phasespace::grid::{fourier, sympl_fourier_omega, sympl_fourier_sigma, Direction, GridSpec, SampledField};
use phasespace::modspace::{concentration_certificate, mod_norm, sjostrand_norm, ModNormParams};
use phasespace::spectral::{eigensolve, spectrum_transfer_check};
use phasespace::symplectic::{SymplecticForm, WignerEllipsoid};
use phasespace::wavepacket::{cross_wigner, hermite_field, wavepacket_f, Window};
use phasespace::weyl::{phase_weyl_apply_quadrature, phase_weyl_matrix, weyl_kernel, SymbolSpec};
use phasespace::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical error: {0}")]
    Numerical(#[from] phasespace::Error),
    #[error("artifact i/o: {0}")]
    Format(#[from] FormatError),
    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// 2 for invalid configuration, 3 for numerical or output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// Summary rows, human-readable report and overall verdict of a run.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub summary: Vec<(String, String)>,
    pub report: String,
    pub passed: bool,
}

impl Outcome {
    fn row(&mut self, key: impl Into<String>, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            3
        }
    }
}

struct Run<'a> {
    cfg: &'a RunConfig,
    out: Outcome,
    rng: ChaCha8Rng,
}

impl Run<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn dump(&mut self, name: &str, a: &Array) -> Result<(), RunError> {
        let path = self.path(name);
        let file = fs::File::create(&path).map_err(|source| RunError::Io { path: path.clone(), source })?;
        write_array(std::io::BufWriter::new(file), a)?;
        self.out.row(format!("artifact.{name}"), path.display());
        Ok(())
    }

    fn text(&self, name: &str, body: &str) -> Result<(), RunError> {
        let path = self.path(name);
        fs::write(&path, body).map_err(|source| RunError::Io { path, source })
    }

    fn note(&mut self, line: impl AsRef<str>) {
        self.out.report.push_str(line.as_ref());
        self.out.report.push('\n');
    }

    /// Records `measured <= tol.<key>` and folds it into the verdict.
    fn gate(&mut self, key: &str, measured: f64, default: f64) {
        let tol = self.cfg.tolerance(key, default);
        let ok = measured <= tol;
        self.out.passed &= ok;
        self.out.row(key, format!("{measured:.3e}"));
        self.out.row(format!("tol.{key}"), format!("{tol:.1e}"));
        self.note(format!("{key}: {measured:.3e} (tolerance {tol:.1e}) {}", if ok { "ok" } else { "EXCEEDED" }));
    }

    fn points(&self, default: usize) -> usize {
        self.cfg.points.unwrap_or(default)
    }

    fn form(&self) -> Result<SymplecticForm, RunError> {
        Ok(match &self.cfg.omega {
            OmegaSpec::Scaled(c) => SymplecticForm::scaled_standard(1, *c)?,
            OmegaSpec::Blocks { theta, eta } => {
                let t = DMatrix::from_row_slice(2, 2, &[0.0, *theta, -*theta, 0.0]);
                let e = DMatrix::from_row_slice(2, 2, &[0.0, *eta, -*eta, 0.0]);
                SymplecticForm::from_blocks(&t, &e)?
            }
            OmegaSpec::File(p) => {
                let file = fs::File::open(p).map_err(|_| ConfigError::MissingFile(p.clone()))?;
                let m = read_matrix_csv(BufReader::new(file))?;
                SymplecticForm::new(m)?
            }
        })
    }

    /// Grid on `R^dim`; an explicit half-width wins, otherwise self-dual.
    fn grid(&self, dim: usize, default_points: usize) -> Result<GridSpec, RunError> {
        let n = self.points(default_points);
        Ok(match self.cfg.halfwidth {
            Some(l) => GridSpec::new(dim, n, l)?,
            None => GridSpec::self_dual(dim, n)?,
        })
    }

    /// Phase-space grid on which `F_omega` of a scaled form is a lattice map.
    fn transform_grid(&self, form: &SymplecticForm, default_points: usize) -> Result<GridSpec, RunError> {
        match (self.cfg.halfwidth, form.standard_multiple()) {
            (None, Some(c)) => Ok(GridSpec::adapted(form.dim(), self.points(default_points), c)?),
            _ => self.grid(form.dim(), default_points),
        }
    }

    /// The configured symbol on `R^{2n}`; files hold samples on `phase_grid`.
    fn symbol(&self, n: usize, phase_grid: Option<GridSpec>) -> Result<SymbolSpec, RunError> {
        let d = 2 * n;
        Ok(match &self.cfg.symbol {
            SymbolName::Harmonic => SymbolSpec::closed_real(d, |z| 0.5 * z.iter().map(|v| v * v).sum::<f64>()),
            SymbolName::Gaussian => SymbolSpec::closed_real(d, |z| (-0.5 * z.iter().map(|v| v * v).sum::<f64>()).exp()),
            SymbolName::Constant => SymbolSpec::constant(d, Complex64::new(1.0, 0.0)),
            SymbolName::LinearX => SymbolSpec::closed_real(d, |z| z[0]),
            SymbolName::LinearXi => SymbolSpec::closed_real(d, move |z| z[n]),
            SymbolName::File(p) => {
                let g = phase_grid.ok_or_else(|| ConfigError::InvalidValue {
                    key: "symbol".into(),
                    value: p.display().to_string(),
                    reason: "this command needs a closed-form symbol".into(),
                })?;
                let file = fs::File::open(p).map_err(|_| ConfigError::MissingFile(p.clone()))?;
                let arr = read_array(BufReader::new(file))?;
                if arr.shape != g.shape() {
                    return Err(ConfigError::InvalidValue {
                        key: "symbol".into(),
                        value: p.display().to_string(),
                        reason: format!("shape {:?} does not match the grid {:?}", arr.shape, g.shape()),
                    }
                    .into());
                }
                SymbolSpec::from_coarse(&SampledField::new(g, arr.values)?)?
            }
        })
    }

    fn window(&self, g: GridSpec) -> Result<Window, RunError> {
        Ok(Window::hermite_width(g, self.cfg.window_index, self.cfg.window_width)?)
    }

    /// Seeded combination of Hermite tensors of degree at most 2 per axis.
    fn random_field(&mut self, g: GridSpec) -> Result<SampledField, RunError> {
        let d = g.dim();
        let mut out = SampledField::zeros(g);
        for flat in 0..3usize.pow(d as u32) {
            let ks: Vec<usize> = (0..d).map(|a| flat / 3usize.pow(a as u32) % 3).collect();
            let c = Complex64::new(self.rng.random_range(-1.0..1.0), self.rng.random_range(-1.0..1.0));
            out = out.add(&hermite_field(g, &ks, 1.0)?.scale(c))?;
        }
        Ok(out)
    }
}

/// Executes `cfg`, writing `summary.csv`, `report.txt` and per-command artifacts
/// into the output directory.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir).map_err(|source| RunError::Io { path: cfg.output_dir.clone(), source })?;
    let mut r = Run { cfg, out: Outcome { passed: true, ..Outcome::default() }, rng: ChaCha8Rng::seed_from_u64(cfg.seed) };
    r.out.row("command", cfg.command);
    r.out.row("seed", cfg.seed);
    r.note(format!("command {} (seed {})", cfg.command, cfg.seed));
    match cfg.command {
        Command::Transform => transform(&mut r)?,
        Command::Wigner => wigner(&mut r)?,
        Command::WeylMatrix => weyl_matrix(&mut r)?,
        Command::PhaseMatrix => phase_matrix(&mut r)?,
        Command::Spectrum => spectrum(&mut r)?,
        Command::TransferCheck => transfer_check(&mut r)?,
        Command::IntertwineCheck => intertwine_check(&mut r)?,
        Command::Modnorm => modnorm(&mut r)?,
        Command::SjostrandNorm => sjostrand(&mut r)?,
        Command::Capacity => capacity(&mut r)?,
        Command::CertifyConcentration => certify(&mut r)?,
        Command::Acceptance => acceptance(&mut r)?,
    }
    r.out.row("status", if r.out.passed { "pass" } else { "fail" });
    let mut csv = String::from("key,value\n");
    for (k, v) in &r.out.summary {
        let _ = writeln!(csv, "{k},{}", v.replace(',', ";"));
    }
    r.text("summary.csv", &csv)?;
    r.text("report.txt", &r.out.report)?;
    Ok(r.out)
}

fn transform(r: &mut Run) -> Result<(), RunError> {
    let form = r.form()?;
    let g = r.transform_grid(&form, if form.n() == 1 { 64 } else { 16 })?;
    let a = r.random_field(g)?;
    let fa = fourier(&a, Direction::Forward);
    let fs = sympl_fourier_sigma(&a)?;
    let fo = sympl_fourier_omega(&a, &form)?;
    let back = sympl_fourier_omega(&fo, &form)?;
    r.dump("input.pswc", &Array::from_field(&a))?;
    r.dump("fourier.pswc", &Array::from_field(&fa))?;
    r.dump("f_sigma.pswc", &Array::from_field(&fs))?;
    r.dump("f_omega.pswc", &Array::from_field(&fo))?;
    r.out.row("points", g.points());
    r.out.row("halfwidth", g.halfwidth());
    r.gate("involution", back.rel_distance(&a)?, 1e-8);
    r.gate("unitarity", (fo.norm() - a.norm()).abs() / a.norm(), 1e-10);
    Ok(())
}

fn wigner(r: &mut Run) -> Result<(), RunError> {
    let g = r.grid(1, 64)?;
    let u = hermite_field(g, &[r.cfg.index], 1.0)?;
    let phi = r.window(g)?;
    let w = cross_wigner(&u, phi.field())?;
    r.dump("wigner.pswc", &Array::from_field(&w))?;
    // Moyal: |W(u, phi)|^2 = |u|^2 |phi|^2 / (2 pi)
    let want = u.norm() * phi.field().norm() / (2.0 * std::f64::consts::PI).sqrt();
    r.out.row("wigner_norm", format!("{:.12}", w.norm()));
    r.gate("moyal", (w.norm() - want).abs() / want, 1e-6);
    Ok(())
}

fn weyl_matrix(r: &mut Run) -> Result<(), RunError> {
    let g = r.grid(1, 64)?;
    let a = r.symbol(1, Some(g.with_dim(2)?))?;
    let m = weyl_kernel(&a, &g)?;
    r.dump("weyl_matrix.pswc", &Array::from_matrix(m.entries()))?;
    r.out.row("size", g.len());
    r.out.row("hermitian", m.is_hermitian());
    r.out.row("hermitian_defect", format!("{:.3e}", m.hermitian_defect()));
    r.out.row("spectral_norm", format!("{:.12}", m.spectral_norm()));
    r.note(format!("{0}x{0} kernel, hermitian defect {1:.3e}", g.len(), m.hermitian_defect()));
    Ok(())
}

fn phase_matrix(r: &mut Run) -> Result<(), RunError> {
    let form = r.form()?;
    let g = r.grid(form.dim(), 32)?;
    let a = r.symbol(form.n(), None)?;
    let m = phase_weyl_matrix(&a, &form, &g)?;
    r.dump("phase_matrix.pswc", &Array::from_matrix(m.entries()))?;
    r.out.row("size", g.len());
    r.out.row("hermitian_defect", format!("{:.3e}", m.hermitian_defect()));
    r.note(format!("{0}x{0} matrix, hermitian defect {1:.3e}", g.len(), m.hermitian_defect()));
    Ok(())
}

fn spectrum(r: &mut Run) -> Result<(), RunError> {
    let g = r.grid(1, 64)?;
    let a = r.symbol(1, Some(g.with_dim(2)?))?;
    let res = eigensolve(&weyl_kernel(&a, &g)?)?;
    let count = r.cfg.count.min(res.eigenvalues.len());
    let mut csv = String::from("index,eigenvalue,residual\n");
    for k in 0..res.eigenvalues.len() {
        let _ = writeln!(csv, "{k},{:.15e},{:.3e}", res.eigenvalues[k], res.residuals[k]);
    }
    r.text("eigen.csv", &csv)?;
    for k in 0..count {
        r.out.row(format!("eigenvalue.{k}"), format!("{:.12}", res.eigenvalues[k]));
        r.dump(&format!("eigenfield_{k}.pswc"), &Array::from_field(&res.eigenfields[k]))?;
    }
    let worst = res.residuals.iter().cloned().fold(0.0, f64::max);
    r.gate("eigen_residual", worst, 1e-8);
    Ok(())
}

fn transfer_check(r: &mut Run) -> Result<(), RunError> {
    let form = r.form()?;
    let g = r.grid(form.n(), 64)?;
    let a = r.symbol(form.n(), None)?;
    let rep = spectrum_transfer_check(&a, &form, &g, r.cfg.count)?;
    let mut csv = String::from("eigenvalue,residual,j,k\n");
    for e in &rep.entries {
        let _ = writeln!(csv, "{:.15e},{:.3e},{},{}", e.eigenvalue, e.residual, e.window_index, e.eigen_index);
    }
    r.text("transfer.csv", &csv)?;
    for (k, l) in rep.eigenvalues.iter().enumerate() {
        r.out.row(format!("eigenvalue.{k}"), format!("{l:.12}"));
    }
    let list: Vec<String> = rep.eigenvalues.iter().map(|l| format!("{l:.6}")).collect();
    r.note(format!("eigenvalues: {}", list.join(", ")));
    r.gate("transfer", rep.max_residual(), 1e-4);
    Ok(())
}

fn intertwine_check(r: &mut Run) -> Result<(), RunError> {
    let form = r.form()?;
    let n = form.n();
    let g = r.grid(n, 64)?;
    let base = r.symbol(n, None)?;
    let taper = r.cfg.taper;
    let a = if taper > 0.0 {
        let b = base.clone();
        SymbolSpec::closed(2 * n, move |z| b.eval(z).unwrap_or_default() * (-z.iter().map(|v| v * v).sum::<f64>() / taper).exp())
    } else {
        base
    };
    let f = form.darboux()?;
    let phi = r.window(g)?;
    let op = weyl_kernel(&a.compose_linear(f.matrix())?, &g)?;
    let mut worst = 0.0f64;
    for k in 0..3 {
        let u = hermite_field(g, &vec![k; n], 1.0)?;
        let lhs = phase_weyl_apply_quadrature(&a, &form, &wavepacket_f(&f, &phi, &u)?)?;
        let rhs = wavepacket_f(&f, &phi, &op.apply(&u)?)?;
        let e = lhs.sub(&rhs)?.norm() / u.norm();
        r.out.row(format!("residual.{k}"), format!("{e:.3e}"));
        worst = worst.max(e);
    }
    r.gate("intertwine", worst, 1e-5);
    Ok(())
}

fn modnorm(r: &mut Run) -> Result<(), RunError> {
    let g = r.grid(1, 64)?;
    let u = hermite_field(g, &[r.cfg.index], 1.0)?;
    let p = ModNormParams::new(r.cfg.s, r.cfg.q, r.window(g)?)?;
    let v = mod_norm(&u, &p)?;
    r.out.row("mod_norm", format!("{v:.12}"));
    r.out.row("l2_norm", format!("{:.12}", u.norm()));
    r.note(format!("mod_norm = {v:.12}"));
    Ok(())
}

fn sjostrand(r: &mut Run) -> Result<(), RunError> {
    let g = r.grid(2, 24)?;
    let a = r.symbol(1, None)?;
    let v = sjostrand_norm(&a, &Window::gaussian(g)?, r.cfg.s)?;
    r.out.row("sjostrand_norm", format!("{v:.12}"));
    r.note(format!("sjostrand_norm = {v:.12}"));
    Ok(())
}

fn ellipsoid(r: &Run) -> Result<WignerEllipsoid, RunError> {
    let e = &r.cfg.ellipsoid;
    let n = (e.len() as f64).sqrt() as usize;
    Ok(WignerEllipsoid::new(DMatrix::from_row_slice(n, n, e))?)
}

fn capacity(r: &mut Run) -> Result<(), RunError> {
    let c = ellipsoid(r)?.capacity();
    r.out.row("capacity", format!("{c:.15}"));
    r.note(format!("capacity = {c:.15}"));
    Ok(())
}

fn certify(r: &mut Run) -> Result<(), RunError> {
    let m = ellipsoid(r)?;
    let n = m.matrix().nrows() / 2;
    let g = r.grid(2 * n, if n == 1 { 64 } else { 16 })?;
    let c = r.cfg.concentration;
    let u = SampledField::from_fn(g, move |z| Complex64::new((-c * z.iter().map(|v| v * v).sum::<f64>()).exp() / std::f64::consts::PI, 0.0));
    let rep = concentration_certificate(&u, &m)?;
    r.out.row("capacity", format!("{:.15}", rep.capacity));
    r.out.row("envelope", format!("{:.6e}", rep.envelope));
    r.out.row("verdict", rep.verdict);
    r.note(format!("verdict {} (capacity {:.6})", rep.verdict, rep.capacity));
    Ok(())
}

fn acceptance(r: &mut Run) -> Result<(), RunError> {
    let opts = SuiteOptions { seed: r.cfg.seed, tolerances: r.cfg.tolerances.clone() };
    let results = acceptance_suite(r.cfg.only.as_deref(), &opts)
        .map_err(|reason| ConfigError::InvalidValue { key: "only".into(), value: r.cfg.only.clone().unwrap_or_default(), reason })?;
    let mut csv = String::from("id,criterion,check,measured,tolerance,passed\n");
    for res in &results {
        r.note(res.to_string());
        r.out.passed &= res.passed();
        r.out.row(format!("criterion.{}", res.name), if res.passed() { "pass" } else { "fail" });
        if let Some(e) = &res.error {
            let _ = writeln!(csv, "{},{},error,,,false", res.id, res.name);
            r.out.row(format!("error.{}", res.name), e);
        }
        for c in &res.checks {
            let _ = writeln!(csv, "{},{},{},{:.6e},{:.1e},{}", res.id, res.name, c.label, c.measured, c.tolerance, c.passed());
        }
    }
    r.text("acceptance.csv", &csv)?;
    Ok(())
}

/// Output directory of a finished run, for callers that only hold the config.
pub fn output_dir(cfg: &RunConfig) -> &Path {
    &cfg.output_dir
}
