//! Refinement-study driver behind the `wgeig` binary.

pub mod config;

use std::ffi::OsString;
use std::fmt::{self, Write as _};

use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{CliArgs, ConfigError, ExperimentConfig, Format, Mode};

use crate::analysis::{
    commutativity_defect, expansion_residual, l2_error, lower_bound_check, mass_rank,
    orthonormality_defect, sci, structural_check, triple_norm_error, ConvergenceTable,
    DiscretePair, ExactPair, ExactSolution, ManufacturedPoisson, Polynomial,
};
use crate::assembly::GlobalSystem;
use crate::error::WgError;
use crate::mesh::{Domain, Mesh};
use crate::solvers::dense::{dense_pencil_eigenvalues, DENSE_LIMIT};
use crate::solvers::{solve_eigen_system, solve_poisson_system, EigenOptions, EigenPairSet};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(WgError),
    Verification(usize),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Solver(e) => write!(f, "solver failure: {e}"),
            CliError::Verification(n) => {
                write!(f, "verification failed: {n} check(s) did not pass")
            }
            CliError::Io(e) => write!(f, "output error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<WgError> for CliError {
    fn from(e: WgError) -> Self {
        match e {
            WgError::InvalidParameter { .. } => CliError::Config(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

/// Rendered output plus the number of failed checks (verify mode only).
pub struct Outcome {
    pub text: String,
    pub failures: usize,
}

fn h_str(n: usize) -> String {
    format!("{}", 1.0 / n as f64)
}

fn fmt_order(o: Option<f64>) -> String {
    o.map(|o| format!("{o:.4}")).unwrap_or_default()
}

/// Orders between consecutive levels where both errors are positive.
fn pairwise_orders(errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; errors.len()];
    for i in 1..errors.len() {
        if errors[i - 1] > 0.0 && errors[i] > 0.0 {
            out[i] = Some((errors[i - 1] / errors[i]).log2());
        }
    }
    out
}

fn eigen_options(cfg: &ExperimentConfig) -> EigenOptions {
    EigenOptions {
        residual_tol: cfg.tol,
        ..EigenOptions::default()
    }
}

struct EigLevel {
    n: usize,
    values: Vec<f64>,
}

fn run_eig(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut levels = Vec::with_capacity(cfg.levels.len());
    for &n in &cfg.levels {
        let mesh = Mesh::uniform(cfg.domain, n)?;
        let system = GlobalSystem::assemble(&mesh, cfg.k, cfg.eps)?;
        let pairs = solve_eigen_system(&mesh, &system, cfg.nev, &eigen_options(cfg))?;
        levels.push(EigLevel {
            n,
            values: pairs.values,
        });
    }
    let exact = ExactSolution::for_domain(cfg.domain, cfg.nev);
    let reference = exact.has_reference().then(|| exact.eigenvalues());
    let errors: Vec<Vec<f64>> = match &reference {
        Some(r) => (0..cfg.nev)
            .map(|j| levels.iter().map(|l| r[j] - l.values[j]).collect())
            .collect(),
        None => Vec::new(),
    };
    let orders: Vec<Vec<Option<f64>>> = errors.iter().map(|e| pairwise_orders(e)).collect();

    let text = match cfg.format {
        Format::Csv => {
            let mut s = String::from("h,j,lambda_h,lambda_exact,error,order\n");
            for (i, l) in levels.iter().enumerate() {
                for j in 0..cfg.nev {
                    let _ = write!(s, "{},{},{:.12e},", h_str(l.n), j + 1, l.values[j]);
                    match &reference {
                        Some(r) => {
                            let _ = writeln!(
                                s,
                                "{:.12e},{:.6e},{}",
                                r[j],
                                errors[j][i],
                                fmt_order(orders[j][i])
                            );
                        }
                        None => s.push_str(",,\n"),
                    }
                }
            }
            s
        }
        Format::Md => {
            if reference.is_some() {
                let mut t = ConvergenceTable::new(
                    cfg.domain,
                    cfg.k,
                    cfg.eps,
                    "Eigenvalue errors",
                    cfg.levels.clone(),
                );
                for (j, e) in errors.iter().enumerate() {
                    t.push(format!("lambda_{0} - lambda_{0},h", j + 1), e.clone())?;
                }
                markdown_with_orders(&t, &orders)
            } else {
                let mut s = format!(
                    "Discrete eigenvalues (domain {}, k={}, eps={})\n\n| h |",
                    cfg.domain, cfg.k, cfg.eps
                );
                for l in &levels {
                    let _ = write!(s, " 1/{} |", l.n);
                }
                s.push_str("\n|---|");
                for _ in &levels {
                    s.push_str("---|");
                }
                s.push('\n');
                for j in 0..cfg.nev {
                    let _ = write!(s, "| lambda_{},h |", j + 1);
                    for l in &levels {
                        let _ = write!(s, " {:.4} |", l.values[j]);
                    }
                    s.push('\n');
                }
                s
            }
        }
    };
    Ok(Outcome { text, failures: 0 })
}

/// Table markdown, with orders blank wherever an error is not positive.
fn markdown_with_orders(t: &ConvergenceTable, orders: &[Vec<Option<f64>>]) -> String {
    let mut s = format!(
        "{} (domain {}, k={}, eps={})\n\n| h |",
        t.norm, t.domain, t.k, t.eps
    );
    for n in &t.levels {
        let _ = write!(s, " 1/{n} |");
    }
    s.push_str("\n|---|");
    for _ in &t.levels {
        s.push_str("---|");
    }
    s.push('\n');
    for ((label, values), ords) in t.columns.iter().zip(orders) {
        let _ = write!(s, "| {label} |");
        for v in values {
            let _ = write!(s, " {} |", sci(*v));
        }
        s.push_str("\n| order |");
        for o in ords {
            let _ = write!(s, " {} |", fmt_order(*o));
        }
        s.push('\n');
    }
    s
}

fn run_poisson(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut triple = Vec::new();
    let mut l2 = Vec::new();
    for &n in &cfg.levels {
        let mesh = Mesh::uniform(cfg.domain, n)?;
        let system = GlobalSystem::assemble(&mesh, cfg.k, cfg.eps)?;
        let u_h =
            solve_poisson_system(&mesh, &system, ManufacturedPoisson::source, cfg.quad_degree)?;
        triple.push(triple_norm_error(
            ManufacturedPoisson::u,
            &mesh,
            &system,
            &u_h,
            cfg.quad_degree,
        )?);
        l2.push(l2_error(
            ManufacturedPoisson::u,
            &mesh,
            &system,
            &u_h,
            cfg.quad_degree,
        )?);
    }
    let series = [("triple", &triple), ("l2", &l2)];
    let orders: Vec<Vec<Option<f64>>> = series.iter().map(|(_, e)| pairwise_orders(e)).collect();
    let text = match cfg.format {
        Format::Csv => {
            let mut s = String::from("h,norm,value,order\n");
            for (i, &n) in cfg.levels.iter().enumerate() {
                for ((name, e), o) in series.iter().zip(&orders) {
                    let _ = writeln!(s, "{},{name},{:.6e},{}", h_str(n), e[i], fmt_order(o[i]));
                }
            }
            s
        }
        Format::Md => {
            let mut t = ConvergenceTable::new(
                cfg.domain,
                cfg.k,
                cfg.eps,
                "Poisson errors",
                cfg.levels.clone(),
            );
            t.push("|||Q_h u - u_h|||", triple.clone())?;
            t.push("||Q_0 u - u_0||", l2.clone())?;
            markdown_with_orders(&t, &orders)
        }
    };
    Ok(Outcome { text, failures: 0 })
}

struct Check {
    name: &'static str,
    n: usize,
    value: f64,
    threshold: f64,
    pass: bool,
}

impl Check {
    fn at_most(name: &'static str, n: usize, value: f64, threshold: f64) -> Self {
        Self {
            name,
            n,
            value,
            threshold,
            pass: value <= threshold,
        }
    }
}

fn verify_level(
    cfg: &ExperimentConfig,
    n: usize,
    checks: &mut Vec<Check>,
) -> Result<EigenPairSet, CliError> {
    let mesh = Mesh::uniform(cfg.domain, n)?;
    let system = GlobalSystem::assemble(&mesh, cfg.k, cfg.eps)?;
    let total = system.dofmap.total();

    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let mut worst = 0.0f64;
    for i in 0..10 {
        let degree = if i == 0 { cfg.k + 1 } else { cfg.k };
        worst = worst.max(commutativity_defect(
            &mesh,
            cfg.k,
            &Polynomial::random(degree, &mut rng),
        )?);
    }
    checks.push(Check::at_most("commutativity", n, worst, 1e-10));

    let s = structural_check(&system);
    checks.push(Check::at_most("symmetry", n, s.asymmetry, 1e-13));
    checks.push(Check {
        name: "spd",
        n,
        value: s.min_eigenvalue.unwrap_or(f64::NAN),
        threshold: 0.0,
        pass: s.spd(),
    });
    if total <= DENSE_LIMIT {
        let rank = mass_rank(&system);
        checks.push(Check {
            name: "mass_rank",
            n,
            value: rank as f64,
            threshold: system.n0() as f64,
            pass: rank == system.n0(),
        });
    }

    let nev = cfg.nev.min(system.n0());
    let pairs = solve_eigen_system(&mesh, &system, nev, &eigen_options(cfg))?;
    let max_res = pairs.residuals.iter().copied().fold(0.0, f64::max);
    checks.push(Check::at_most("residual", n, max_res, cfg.tol));
    let (diag, off) = orthonormality_defect(&system, &pairs);
    checks.push(Check::at_most("normalization", n, diag, 1e-10));
    checks.push(Check::at_most("m_orthogonality", n, off, 1e-8));

    if total <= DENSE_LIMIT {
        let dense = dense_pencil_eigenvalues(&system)?;
        let dev = pairs
            .values
            .iter()
            .zip(&dense)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        checks.push(Check::at_most("dense_oracle", n, dev, 1e-8));
    }

    if cfg.domain == Domain::UnitSquare {
        let exact = ExactSolution::unit_square(1);
        let md = *exact.mode(0);
        let grad = move |p: crate::mesh::Point| md.grad(p);
        let t = expansion_residual(
            &mesh,
            cfg.eps,
            &ExactPair {
                lambda: md.lambda,
                grad: &grad,
            },
            &DiscretePair {
                lambda: pairs.values[0],
                u: &pairs.vectors[0],
            },
            &pairs.vectors[0],
            // the identity is exact; only quadrature of the sine terms limits it on coarse cells
            cfg.quad_degree.max(24),
        )?;
        checks.push(Check::at_most(
            "expansion",
            n,
            t.residual,
            1e-6 * t.lhs.abs() + 1e-10,
        ));
        checks.push(Check::at_most(
            "orthogonality",
            n,
            t.orthogonality.abs(),
            1e-10,
        ));
    }
    Ok(pairs)
}

fn run_verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut checks = Vec::new();
    let mut spectra = Vec::new();
    for &n in &cfg.levels {
        let pairs = verify_level(cfg, n, &mut checks)?;
        spectra.push((n, pairs.values));
    }
    let exact = ExactSolution::for_domain(cfg.domain, cfg.nev);
    let common = spectra.iter().map(|(_, v)| v.len()).min().unwrap_or(0);
    let trimmed: Vec<(usize, Vec<f64>)> = spectra
        .iter()
        .map(|(n, v)| (*n, v[..common].to_vec()))
        .collect();
    let report = lower_bound_check(&exact, &trimmed);
    checks.push(Check {
        name: "lower_bound",
        n: *cfg.levels.last().unwrap_or(&0),
        value: report.violations.len() as f64,
        threshold: 0.0,
        pass: report.passed(),
    });

    let failures = checks.iter().filter(|c| !c.pass).count();
    let status = |c: &Check| if c.pass { "pass" } else { "fail" };
    let text = match cfg.format {
        Format::Csv => {
            let mut s = String::from("check,n,value,threshold,status\n");
            for c in &checks {
                let _ = writeln!(
                    s,
                    "{},{},{:.3e},{:.3e},{}",
                    c.name,
                    c.n,
                    c.value,
                    c.threshold,
                    status(c)
                );
            }
            s
        }
        Format::Md => {
            let mut s = format!(
                "Verification (domain {}, k={}, eps={})\n\n| check | n | value | threshold | status |\n|---|---|---|---|---|\n",
                cfg.domain, cfg.k, cfg.eps
            );
            for c in &checks {
                let _ = writeln!(
                    s,
                    "| {} | {} | {:.3e} | {:.3e} | {} |",
                    c.name,
                    c.n,
                    c.value,
                    c.threshold,
                    status(c)
                );
            }
            s
        }
    };
    Ok(Outcome { text, failures })
}

/// Runs one study and renders its output without writing it anywhere.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match cfg.mode {
        Mode::Eig => run_eig(cfg),
        Mode::Poisson => run_poisson(cfg),
        Mode::Verify => run_verify(cfg),
    }
}

/// Runs, writes the output, and maps verification failures to an error.
pub fn execute(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let outcome = run(cfg)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, &outcome.text).map_err(CliError::Io)?,
        None => print!("{}", outcome.text),
    }
    if outcome.failures > 0 {
        return Err(CliError::Verification(outcome.failures));
    }
    Ok(())
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match CliArgs::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    faer::set_global_parallelism(faer::Par::Seq);
    let result = ExperimentConfig::from_args(&args)
        .map_err(CliError::from)
        .and_then(|cfg| execute(&cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("wgeig: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mode: Mode, domain: Domain, levels: Vec<usize>) -> ExperimentConfig {
        ExperimentConfig {
            mode,
            domain,
            levels,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn eig_csv_schema_and_orders() {
        let out = run(&cfg(Mode::Eig, Domain::UnitSquare, vec![4, 8])).unwrap();
        let lines: Vec<&str> = out.text.lines().collect();
        assert_eq!(lines[0], "h,j,lambda_h,lambda_exact,error,order");
        assert_eq!(lines.len(), 1 + 2 * 6);
        assert!(lines[1].starts_with("0.25,1,"));
        assert!(lines[1].ends_with(','));
        let first_fine: Vec<&str> = lines[7].split(',').collect();
        assert_eq!(first_fine[0], "0.125");
        assert!((first_fine[4].parse::<f64>().unwrap() - 1.2926).abs() < 1e-4);
        assert!((first_fine[5].parse::<f64>().unwrap() - 1.7503).abs() < 1e-3);
    }

    #[test]
    fn lshape_rows_have_no_reference() {
        let mut c = cfg(Mode::Eig, Domain::LShape, vec![2]);
        c.nev = 2;
        let out = run(&c).unwrap();
        assert!(out.text.lines().skip(1).all(|l| l.ends_with(",,,")));
        c.format = Format::Md;
        assert!(run(&c).unwrap().text.contains("Discrete eigenvalues"));
    }

    #[test]
    fn poisson_csv_schema() {
        let out = run(&cfg(Mode::Poisson, Domain::UnitSquare, vec![4, 8])).unwrap();
        let lines: Vec<&str> = out.text.lines().collect();
        assert_eq!(lines[0], "h,norm,value,order");
        assert_eq!(lines.len(), 5);
        assert!(lines[3].starts_with("0.125,triple,"));
    }

    #[test]
    fn verify_small_levels_passes() {
        let out = run(&cfg(Mode::Verify, Domain::UnitSquare, vec![1, 2, 4])).unwrap();
        assert_eq!(out.failures, 0, "{}", out.text);
        let mut c = cfg(Mode::Verify, Domain::LShape, vec![1, 2]);
        c.k = 2;
        c.format = Format::Md;
        let out = run(&c).unwrap();
        assert_eq!(out.failures, 0, "{}", out.text);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["wgeig", "--k", "7"]), 1);
        assert_eq!(main_with_args(["wgeig", "--bogus"]), 1);
        assert_eq!(
            CliError::Solver(WgError::Degenerate(String::new())).exit_code(),
            2
        );
        assert_eq!(CliError::Verification(1).exit_code(), 3);
        assert_eq!(
            CliError::from(WgError::InvalidParameter {
                name: "nev",
                reason: String::new()
            })
            .exit_code(),
            1
        );
    }
}
