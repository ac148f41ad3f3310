//! End-to-end benchmark rows: primal solve, adjoint solve, estimate, CSV.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::config::{Linearization, Problem, ReferenceSource, RunConfig};
use crate::error::Error;
use crate::estimator::{effectivity, estimate, true_error, ErrorBreakdown};
use crate::fem::{Component, Degrees, FeFunction, ProductSpace};
use crate::forms::{LinearizationState, MhdConfig, QoiSpec, StateRef};
use crate::mesh::{Mesh, MeshPattern};
use crate::solvers::{adjoint_solve, homotopy_from, NewtonOptions, NewtonReport};

/// Column names of the result CSV, in order.
pub const CSV_HEADER: [&str; 16] = [
    "case",
    "n",
    "n_elements",
    "space",
    "qoi_h",
    "qoi_ref",
    "true_error",
    "eta",
    "eff",
    "E_mom",
    "E_con",
    "E_M",
    "newton_iters",
    "t_primal_s",
    "t_adjoint_s",
    "status",
];

/// One mesh of a benchmark table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub case: String,
    pub n: usize,
    /// Grid squares, `n^2`.
    pub n_elements: usize,
    pub space: String,
    pub qoi_h: f64,
    pub qoi_ref: f64,
    pub true_error: f64,
    pub breakdown: ErrorBreakdown,
    pub eff: f64,
    pub newton_iters: usize,
    pub t_primal_s: f64,
    pub t_adjoint_s: f64,
    pub primal_dofs: usize,
    pub adjoint_dofs: usize,
    /// Newton residual norms of the last continuation stage.
    pub residual_norms: Vec<f64>,
    /// Why the row failed, if it did.
    pub failure: Option<String>,
}

impl ResultRow {
    fn failed(case: &str, n: usize, space: String, qoi_ref: f64, reason: String) -> Self {
        Self {
            case: case.to_owned(),
            n,
            n_elements: n * n,
            space,
            qoi_h: f64::NAN,
            qoi_ref,
            true_error: f64::NAN,
            breakdown: ErrorBreakdown { e_mom: f64::NAN, e_con: f64::NAN, e_m: f64::NAN },
            eff: f64::NAN,
            newton_iters: 0,
            t_primal_s: f64::NAN,
            t_adjoint_s: f64::NAN,
            primal_dofs: 0,
            adjoint_dofs: 0,
            residual_norms: Vec::new(),
            failure: Some(reason),
        }
    }

    pub fn eta(&self) -> f64 {
        self.breakdown.eta()
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![self.case.clone(), self.n.to_string(), self.n_elements.to_string(), self.space.clone()];
        let b = &self.breakdown;
        for v in [self.qoi_h, self.qoi_ref, self.true_error, b.eta(), self.eff, b.e_mom, b.e_con, b.e_m] {
            r.push(sci(v));
        }
        r.push(if self.is_ok() { self.newton_iters.to_string() } else { String::new() });
        r.push(sci(self.t_primal_s));
        r.push(sci(self.t_adjoint_s));
        r.push(self.failure.as_ref().map_or_else(|| "ok".to_owned(), |f| format!("failed: {f}")));
        r
    }
}

/// Formats like C's `%.6e` (two-digit exponent); non-finite values are blank.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    let s = format!("{x:.6e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

pub fn write_csv<W: Write>(w: W, rows: &[ResultRow]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for row in rows {
        out.write_record(row.record())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, rows: &[ResultRow]) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_owned(), source })?;
    }
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    write_csv(BufWriter::new(file), rows)?;
    Ok(())
}

/// Discrete primal solution on an `n x n` grid.
pub struct PrimalSolution {
    pub state: FeFunction,
    pub reports: Vec<NewtonReport>,
    pub seconds: f64,
}

/// Solves the primal problem with Reynolds continuation. With
/// `lift_degree > 0` the velocity boundary data is carried by a lift of
/// that degree and the discrete velocity vanishes on the boundary.
pub fn solve_primal(
    config: &MhdConfig,
    mesh: Arc<Mesh>,
    degrees: Degrees,
    lift_degree: usize,
    schedule: &[f64],
    options: &NewtonOptions,
) -> Result<PrimalSolution, Error> {
    let start = Instant::now();
    let space = Arc::new(ProductSpace::new(mesh.clone(), degrees)?);
    let mut initial = FeFunction::zeros(space);
    if lift_degree > 0 {
        let lift = config.boundary_lift(mesh, lift_degree, &[Component::Ux, Component::Uy])?;
        initial = initial.with_lift(Arc::new(lift))?;
    }
    let (state, reports) = homotopy_from(initial, config, schedule, options)?;
    Ok(PrimalSolution { state, reports, seconds: start.elapsed().as_secs_f64() })
}

/// Runs every mesh of a case, `jobs` rows at a time. Rows that fail are
/// kept with their reason; errors in setting up the reference abort.
pub fn run_case(cfg: &RunConfig, jobs: usize) -> Result<Vec<ResultRow>, Error> {
    let qoi_ref = reference_qoi(cfg)?;
    let jobs = jobs.clamp(1, cfg.mesh.n.len());
    let next = AtomicUsize::new(0);
    let rows = Mutex::new(vec![None; cfg.mesh.n.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&n) = cfg.mesh.n.get(i) else { break };
                let row = run_row(cfg, n, qoi_ref, jobs);
                rows.lock().expect("row store poisoned")[i] = Some(row);
            });
        }
    });
    Ok(rows.into_inner().expect("row store poisoned").into_iter().map(|r| r.expect("every row ran")).collect())
}

/// One table row; failures are recorded in the row.
pub fn run_row(cfg: &RunConfig, n: usize, qoi_ref: f64, jobs: usize) -> ResultRow {
    let space = cfg.primal_degrees().to_string();
    log::info!("{} n={n}: start", cfg.case.name);
    match try_row(cfg, n, qoi_ref, jobs) {
        Ok(row) => {
            log::info!(
                "{} n={n}: error {:.3e} eta {:.3e} eff {:.4} ({:.1}s + {:.1}s)",
                cfg.case.name,
                row.true_error,
                row.eta(),
                row.eff,
                row.t_primal_s,
                row.t_adjoint_s
            );
            if row.t_adjoint_s >= row.t_primal_s {
                log::warn!("{} n={n}: adjoint solve slower than primal solve", cfg.case.name);
            }
            row
        }
        Err(e) => {
            log::error!("{} n={n}: {e}", cfg.case.name);
            ResultRow::failed(&cfg.case.name, n, space, qoi_ref, e.to_string())
        }
    }
}

fn try_row(cfg: &RunConfig, n: usize, qoi_ref: f64, jobs: usize) -> Result<ResultRow, Error> {
    let config = cfg.mhd_config();
    let mesh = Arc::new(Mesh::unit_square(n, cfg.mesh.pattern)?);
    let options = cfg.newton_options(jobs);
    let primal = solve_primal(&config, mesh.clone(), cfg.primal_degrees(), cfg.lift_degree(), &cfg.schedule(), &options)?;
    let u_h = &primal.state;
    let qoi = cfg.qoi();
    let qoi_h = qoi.evaluate(u_h)?;

    let start = Instant::now();
    let enriched = Arc::new(ProductSpace::new(mesh, cfg.adjoint_degrees())?);
    let exact = cfg.hartmann().exact_state();
    let lin = match cfg.adjoint.linearization {
        Linearization::Numerical => LinearizationState::numerical(u_h),
        Linearization::Exact => LinearizationState { first: u_h, second: Some(StateRef::Analytic(&exact)) },
    };
    let (phi, _) = adjoint_solve(&enriched, &lin, &config, &qoi, cfg.memory_budget(jobs))?;
    let breakdown = estimate(u_h, &phi, &config);
    let t_adjoint_s = start.elapsed().as_secs_f64();

    let err = true_error(qoi_ref, qoi_h);
    let last = primal.reports.last().expect("at least one Newton stage");
    Ok(ResultRow {
        case: cfg.case.name.clone(),
        n,
        n_elements: n * n,
        space: cfg.primal_degrees().to_string(),
        qoi_h,
        qoi_ref,
        true_error: err,
        breakdown,
        eff: effectivity(breakdown.eta(), err),
        newton_iters: primal.reports.iter().map(|r| r.iterations).sum(),
        t_primal_s: primal.seconds,
        t_adjoint_s,
        primal_dofs: u_h.space().num_dofs(),
        adjoint_dofs: enriched.num_dofs(),
        residual_norms: last.residual_norms.clone(),
        failure: None,
    })
}

/// `J(U)` for the case: closed form for the channel, stored (and generated
/// on request) for the cavity.
pub fn reference_qoi(cfg: &RunConfig) -> Result<f64, Error> {
    match cfg.reference.source {
        ReferenceSource::Analytic => match cfg.case.problem {
            Problem::Hartmann => Ok(cfg.hartmann().exact_qoi(&cfg.qoi())),
            Problem::Lid => Err(reference_error(cfg, "the cavity has no analytic solution")),
        },
        ReferenceSource::Stored => {
            let path = reference_path(cfg)?;
            if path.exists() {
                Ok(StoredReference::load(path, cfg)?.qoi_ref)
            } else if cfg.reference.generate {
                Ok(generate_reference(cfg)?.qoi_ref)
            } else {
                Err(reference_error(cfg, "file missing; build it with the `reference` command"))
            }
        }
    }
}

fn reference_path(cfg: &RunConfig) -> Result<&Path, Error> {
    cfg.reference.path.as_deref().ok_or_else(|| reference_error(cfg, "no reference.path configured"))
}

fn reference_error(cfg: &RunConfig, message: &str) -> Error {
    Error::Reference { path: cfg.reference.path.clone().unwrap_or_default(), message: message.to_owned() }
}

/// Header of a stored reference solution.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredReference {
    pub problem: Problem,
    pub re: f64,
    pub re_m: f64,
    pub kappa: f64,
    pub n: usize,
    pub pattern: MeshPattern,
    pub degrees: Degrees,
    pub lift_degree: usize,
    pub qoi: QoiSpec,
    pub qoi_ref: f64,
    /// Reference value on the coarser guard grid, if computed.
    pub guard: Option<(usize, f64)>,
    pub dofs: usize,
}

impl StoredReference {
    fn expected(cfg: &RunConfig) -> Result<Self, Error> {
        let n = cfg.reference.n.ok_or_else(|| reference_error(cfg, "no reference.n configured"))?;
        let [u, b, p] = cfg.reference.degrees;
        Ok(Self {
            problem: cfg.case.problem,
            re: cfg.re(),
            re_m: cfg.re_m(),
            kappa: cfg.kappa(),
            n,
            pattern: cfg.mesh.pattern,
            degrees: Degrees::new(u, b, p),
            lift_degree: cfg.lift_degree(),
            qoi: cfg.qoi(),
            qoi_ref: f64::NAN,
            guard: None,
            dofs: 0,
        })
    }

    /// Whether `self` was computed for the same problem as `other`.
    fn matches(&self, other: &StoredReference) -> bool {
        self.problem == other.problem
            && self.re == other.re
            && self.re_m == other.re_m
            && self.kappa == other.kappa
            && self.n == other.n
            && self.pattern == other.pattern
            && self.degrees == other.degrees
            && self.lift_degree == other.lift_degree
            && self.qoi == other.qoi
    }

    /// Reads the header of a reference file and checks it against `cfg`.
    pub fn load(path: &Path, cfg: &RunConfig) -> Result<Self, Error> {
        let stored = Self::read_header(path)?;
        let expected = Self::expected(cfg)?;
        if !stored.matches(&expected) {
            return Err(Error::Reference {
                path: path.to_owned(),
                message: format!("computed for a different problem: {stored:?}"),
            });
        }
        Ok(stored)
    }

    pub fn read_header(path: &Path) -> Result<Self, Error> {
        let bad = |message: String| Error::Reference { path: path.to_owned(), message };
        let file = File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        let mut fields = std::collections::HashMap::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|source| Error::Io { path: path.to_owned(), source })?;
            if line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(bad(format!("malformed header line {line:?}")));
            };
            let (k, v) = (k.trim().to_owned(), v.trim().to_owned());
            let done = k == "dofs";
            fields.insert(k, v);
            if done {
                break;
            }
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| bad(format!("missing header field {k}")));
        let num = |k: &str| get(k)?.parse::<f64>().map_err(|e| bad(format!("{k}: {e}")));
        let int = |k: &str| get(k)?.parse::<usize>().map_err(|e| bad(format!("{k}: {e}")));
        let value = |k: &str| toml::Value::String(fields.get(k).cloned().unwrap_or_default());
        let problem: Problem = value("problem").try_into().map_err(|e| bad(format!("problem: {e}")))?;
        let pattern: MeshPattern = value("pattern").try_into().map_err(|e| bad(format!("pattern: {e}")))?;
        let component: Component = value("qoi_component").try_into().map_err(|e| bad(format!("qoi_component: {e}")))?;
        let list = |k: &str| -> Result<Vec<f64>, Error> {
            get(k)?.split_whitespace().map(|t| t.parse::<f64>().map_err(|e| bad(format!("{k}: {e}")))).collect()
        };
        let d = list("degrees")?;
        let r = list("qoi_region")?;
        if d.len() != 3 || r.len() != 4 {
            return Err(bad("degrees needs 3 entries and qoi_region 4".into()));
        }
        let guard = match (fields.get("guard_n"), fields.get("guard_qoi")) {
            (Some(_), Some(_)) => Some((int("guard_n")?, num("guard_qoi")?)),
            _ => None,
        };
        Ok(Self {
            problem,
            re: num("re")?,
            re_m: num("re_m")?,
            kappa: num("kappa")?,
            n: int("n")?,
            pattern,
            degrees: Degrees::new(d[0] as usize, d[1] as usize, d[2] as usize),
            lift_degree: int("lift")?,
            qoi: QoiSpec {
                component,
                region: crate::forms::Region::new(r[0], r[1], r[2], r[3]),
                normalize: get("qoi_normalize")? == "true",
            },
            qoi_ref: num("qoi_ref")?,
            guard,
            dofs: int("dofs")?,
        })
    }

    fn write(&self, path: &Path, coeffs: &[f64]) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let snake = |v: toml::Value| v.as_str().unwrap_or_default().to_owned();
        let problem = snake(toml::Value::try_from(self.problem).expect("unit variant"));
        let pattern = snake(toml::Value::try_from(self.pattern).expect("unit variant"));
        let component = snake(toml::Value::try_from(self.qoi.component).expect("unit variant"));
        let r = self.qoi.region;
        writeln!(w, "# stationary MHD reference solution; coefficients follow the header")?;
        writeln!(w, "problem = {problem}")?;
        writeln!(w, "re = {:e}", self.re)?;
        writeln!(w, "re_m = {:e}", self.re_m)?;
        writeln!(w, "kappa = {:e}", self.kappa)?;
        writeln!(w, "n = {}", self.n)?;
        writeln!(w, "pattern = {pattern}")?;
        writeln!(w, "degrees = {} {} {}", self.degrees.u, self.degrees.b, self.degrees.p)?;
        writeln!(w, "lift = {}", self.lift_degree)?;
        writeln!(w, "qoi_component = {component}")?;
        writeln!(w, "qoi_region = {:e} {:e} {:e} {:e}", r.x0, r.x1, r.y0, r.y1)?;
        writeln!(w, "qoi_normalize = {}", self.qoi.normalize)?;
        writeln!(w, "qoi_ref = {:e}", self.qoi_ref)?;
        if let Some((n, q)) = self.guard {
            writeln!(w, "guard_n = {n}")?;
            writeln!(w, "guard_qoi = {q:e}")?;
        }
        writeln!(w, "dofs = {}", coeffs.len())?;
        for c in coeffs {
            writeln!(w, "{c:e}")?;
        }
        w.flush()
    }
}

/// Computes and stores the reference solution of a cavity case. An existing
/// file for the same problem is reused unchanged.
pub fn generate_reference(cfg: &RunConfig) -> Result<StoredReference, Error> {
    if cfg.case.problem == Problem::Hartmann || cfg.reference.source != ReferenceSource::Stored {
        return Err(reference_error(cfg, "this case uses its analytic solution as reference"));
    }
    let path = reference_path(cfg)?.to_owned();
    if path.exists() {
        return StoredReference::load(&path, cfg);
    }
    let mut reference = StoredReference::expected(cfg)?;
    let config = cfg.mhd_config();
    let qoi = cfg.qoi();
    let options = cfg.newton_options(1);
    let solve = |n: usize| -> Result<FeFunction, Error> {
        log::info!("{}: reference solve n={n} {}", cfg.case.name, reference.degrees);
        let mesh = Arc::new(Mesh::unit_square(n, cfg.mesh.pattern)?);
        Ok(solve_primal(&config, mesh, reference.degrees, cfg.lift_degree(), &cfg.schedule(), &options)?.state)
    };
    let fine = solve(reference.n)?;
    reference.qoi_ref = qoi.evaluate(&fine)?;
    reference.dofs = fine.coeffs().len();
    if let Some(gn) = cfg.reference.guard_n {
        let coarse = solve(gn)?;
        let q = qoi.evaluate(&coarse)?;
        let delta = (reference.qoi_ref - q).abs();
        if delta > cfg.reference.guard_tol {
            log::warn!(
                "{}: reference not self-converged: |J(n={}) - J(n={gn})| = {delta:.3e} > {:.1e}",
                cfg.case.name,
                reference.n,
                cfg.reference.guard_tol
            );
        }
        reference.guard = Some((gn, q));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_owned(), source })?;
    }
    reference.write(&path, fine.coeffs()).map_err(|source| Error::Io { path: path.clone(), source })?;
    Ok(reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_scientific_format() {
        assert_eq!(sci(2.764e-4), "2.764000e-04");
        assert_eq!(sci(-1.0), "-1.000000e+00");
        assert_eq!(sci(12345.678), "1.234568e+04");
        assert_eq!(sci(0.0), "0.000000e+00");
        assert_eq!(sci(1e-100), "1.000000e-100");
        assert_eq!(sci(f64::NAN), "");
    }

    fn hartmann_cfg(n: &[usize]) -> RunConfig {
        let text = format!(
            "[case]\nname = \"t\"\nproblem = \"hartmann\"\n[mesh]\nn = {n:?}\n[spaces]\nprimal = [2, 1, 1]\n"
        );
        RunConfig::parse(&text).unwrap()
    }

    #[test]
    fn rows_keep_configured_order_under_parallel_jobs() {
        let cfg = hartmann_cfg(&[8, 4]);
        let rows = run_case(&cfg, 2).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![8, 4]);
        assert!(rows.iter().all(ResultRow::is_ok));
        assert_eq!(rows[0].n_elements, 64);
        assert_eq!(rows[0].space, "P2P1P1");
        let mut csv = Vec::new();
        write_csv(&mut csv, &rows).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("case,n,n_elements,space,qoi_h,"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn failures_are_recorded_in_the_row() {
        // The quantity of interest region does not follow a 5x5 grid.
        let cfg = hartmann_cfg(&[5]);
        let rows = run_case(&cfg, 1).unwrap();
        assert!(rows[0].failure.as_ref().unwrap().contains("aligned"));
        let mut csv = Vec::new();
        write_csv(&mut csv, &rows).unwrap();
        assert!(String::from_utf8(csv).unwrap().contains("failed: "));
    }

    #[test]
    fn reference_round_trip_and_cache() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lid.ref");
        let text = format!(
            "[case]\nname = \"lid\"\nproblem = \"lid\"\n[physics]\nre = 100.0\n[mesh]\nn = [4]\n[spaces]\nprimal = [2, 1, 1]\n\
             [reference]\nsource = \"stored\"\npath = {:?}\nn = 8\nguard_n = 4\n",
            path.display().to_string()
        );
        let cfg = RunConfig::parse(&text).unwrap();
        let first = generate_reference(&cfg).unwrap();
        assert!(first.qoi_ref.is_finite());
        assert_eq!(first.guard.unwrap().0, 4);
        let again = generate_reference(&cfg).unwrap();
        assert_eq!(first.qoi_ref.to_bits(), again.qoi_ref.to_bits());
        assert_eq!(reference_qoi(&cfg).unwrap().to_bits(), first.qoi_ref.to_bits());

        let other = RunConfig::parse(&text.replace("re = 100.0", "re = 200.0")).unwrap();
        assert!(matches!(reference_qoi(&other), Err(Error::Reference { .. })));
    }

    #[test]
    fn hartmann_refuses_stored_reference_generation() {
        assert!(generate_reference(&hartmann_cfg(&[4])).is_err());
    }
}
