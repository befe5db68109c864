//! Command line driver for the stokeslab solvers.
//!
//! Six subcommands cover the library surface: single solves with VTK/JSON
//! output, convergence studies, the two estimate verification harnesses,
//! discrete stability constants, and mesh generation. Flags can be seeded
//! from an optional `key=value` config file; explicit flags win. Exit codes:
//! 0 on success, 1 on validation errors (bad flags, bad config, unsupported
//! geometry, I/O), 2 on numerical failures (singular or unstable systems).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use stokeslab::norms::{error_h1_scalar, error_h1_vector, error_l2_scalar};
use stokeslab::solvers::{solve_pp, solve_s1, solve_s2, FieldSolution, Problem};
use stokeslab::verify::{
    discrete_constants, manufactured, render_convergence_csv, render_estimate_csv, run_convergence,
    summarize_estimate, verify_estimate_s1, verify_estimate_s2, verify_estimate_s2_traction_only,
    CaseName, ManufacturedCase,
};
use stokeslab::vtk::{render_mesh_vtk, render_vtk};
use stokeslab::{atomic_write, BcLayout, Error, Marker, Mesh, Result};

#[derive(Parser)]
#[command(
    name = "stokeslab",
    version,
    about = "Stokes and pressure-Poisson solvers on the unit square",
    after_help = "Environment:\n  STOKESLAB_THREADS  caps the worker count of internal parameter sweeps"
)]
struct Cli {
    /// Optional config file with one key=value pair per line ('#' starts a
    /// comment); explicit flags override config values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem on one mesh and write JSON diagnostics.
    Solve {
        /// Problem to solve: s1, s2 or pp.
        #[arg(long)]
        problem: Option<String>,
        /// Manufactured case supplying the data: ms1 or ms2.
        #[arg(long)]
        case: Option<String>,
        /// Mesh subdivision count per side.
        #[arg(long)]
        n: Option<usize>,
        /// Boundary layout: channel, all-gamma1, all-gamma2, or four
        /// comma-separated g1/g2 markers for bottom,right,top,left.
        #[arg(long)]
        layout: Option<String>,
        /// Output directory for the diagnostics file.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Also write the solution as legacy VTK into this directory.
        #[arg(long, value_name = "DIR")]
        vtk: Option<PathBuf>,
    },
    /// Run a mesh refinement study and write errors and observed rates.
    Convergence {
        /// Problem to study: s1, s2 or pp.
        #[arg(long)]
        problem: Option<String>,
        /// Manufactured case supplying the data: ms1 or ms2.
        #[arg(long)]
        case: Option<String>,
        /// Number of refinement levels n = 4, 8, 16, ...
        #[arg(long)]
        levels: Option<usize>,
        /// Output directory for the CSV table and JSON report.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Check the s1 estimate: perturb flux and boundary-pressure data and
    /// compare solution gaps against the boundary mismatch norms.
    VerifyS1 {
        /// Manufactured case: ms1 or ms2.
        #[arg(long)]
        case: Option<String>,
        /// Mesh subdivision count per side.
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated perturbation sizes, e.g. 0,1e-3,1e-2.
        #[arg(long)]
        eps: Option<String>,
        /// Output directory for the CSV rows and JSON summary.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Check the s2 pressure estimate: perturb flux and traction data and
    /// compare the pressure gap against the flux mismatch norm.
    VerifyS2 {
        /// Manufactured case: ms1 or ms2.
        #[arg(long)]
        case: Option<String>,
        /// Mesh subdivision count per side.
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated perturbation sizes, e.g. 0,1e-3,1e-2.
        #[arg(long)]
        eps: Option<String>,
        /// Perturb only the traction data, leaving the pressure stage fixed.
        #[arg(long)]
        traction_only: bool,
        /// Output directory for the CSV rows and JSON summary.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Estimate discrete stability constants (inf-sup, Korn, Poincare,
    /// curl equivalence) on one mesh by dense eigenvalue solves.
    Constants {
        /// Mesh subdivision count per side.
        #[arg(long)]
        n: Option<usize>,
        /// Boundary layout; see `solve --help`.
        #[arg(long)]
        layout: Option<String>,
        /// Output directory for the JSON report.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Generate a mesh and write it as a legacy VTK file.
    Mesh {
        /// Mesh subdivision count per side.
        #[arg(long)]
        n: Option<usize>,
        /// Boundary layout; see `solve --help`.
        #[arg(long)]
        layout: Option<String>,
        /// Output directory for the VTK file.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are "errors" to clap but success to
            // the caller; real usage errors are validation failures.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        let code = match err {
            Error::Singular { .. } | Error::Numerical(_) => 2,
            _ => 1,
        };
        std::process::exit(code);
    }
}

// ---------------------------------------------------------------------------
// Config file and flag resolution
// ---------------------------------------------------------------------------

const KNOWN_KEYS: [&str; 9] = [
    "case",
    "problem",
    "n",
    "levels",
    "eps",
    "layout",
    "out",
    "vtk",
    "traction-only",
];

/// Values loaded from the optional key=value config file.
struct Config(BTreeMap<String, String>);

impl Config {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = BTreeMap::new();
        let Some(path) = path else {
            return Ok(Config(map));
        };
        let text = std::fs::read_to_string(path)?;
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse(format!(
                    "config line {}: expected key=value, got {line:?}",
                    idx + 1
                )));
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!(
                    "unknown config key {key:?}; known keys: {}",
                    KNOWN_KEYS.join(", ")
                )));
            }
            map.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Config(map))
    }

    /// Flag value if given, else the config value, else the default.
    fn string(&self, flag: Option<String>, key: &str, default: &str) -> String {
        flag.or_else(|| self.0.get(key).cloned())
            .unwrap_or_else(|| default.to_string())
    }

    fn parsed<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match (flag, self.0.get(key)) {
            (Some(v), _) => Ok(v),
            (None, Some(raw)) => raw
                .parse()
                .map_err(|_| Error::Parse(format!("config key {key}: bad value {raw:?}"))),
            (None, None) => Ok(default),
        }
    }

    fn path(&self, flag: Option<PathBuf>, key: &str, default: &str) -> PathBuf {
        flag.or_else(|| self.0.get(key).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(default))
    }

    /// Like [`Config::path`] but without a default: `None` means "not requested".
    fn opt_path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.0.get(key).map(PathBuf::from))
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        match self.0.get(key).map(String::as_str) {
            None => Ok(false),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(raw) => Err(Error::Parse(format!(
                "config key {key}: expected true or false, got {raw:?}"
            ))),
        }
    }
}

fn parse_layout(s: &str) -> Result<BcLayout> {
    let marker = |tok: &str| match tok {
        "g1" | "gamma1" => Ok(Marker::Gamma1),
        "g2" | "gamma2" => Ok(Marker::Gamma2),
        other => Err(Error::Parse(format!(
            "bad boundary marker {other:?}; expected g1 or g2"
        ))),
    };
    match s {
        "channel" => Ok(BcLayout::channel()),
        "all-gamma1" => Ok(BcLayout::new(
            Marker::Gamma1,
            Marker::Gamma1,
            Marker::Gamma1,
            Marker::Gamma1,
        )),
        "all-gamma2" => Ok(BcLayout::new(
            Marker::Gamma2,
            Marker::Gamma2,
            Marker::Gamma2,
            Marker::Gamma2,
        )),
        other => {
            let toks: Vec<&str> = other.split(',').map(str::trim).collect();
            if toks.len() != 4 {
                return Err(Error::Parse(format!(
                    "bad layout {other:?}; expected channel, all-gamma1, all-gamma2, \
                     or four comma-separated g1/g2 markers"
                )));
            }
            Ok(BcLayout::new(
                marker(toks[0])?,
                marker(toks[1])?,
                marker(toks[2])?,
                marker(toks[3])?,
            ))
        }
    }
}

fn parse_eps(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for tok in s.split(',') {
        let tok = tok.trim();
        let eps: f64 = tok
            .parse()
            .map_err(|_| Error::Parse(format!("bad eps value {tok:?}")))?;
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::Config(format!(
                "eps values must be finite and nonnegative, got {tok}"
            )));
        }
        out.push(eps);
    }
    if out.is_empty() {
        return Err(Error::Config("eps list is empty".into()));
    }
    Ok(out)
}

fn parse_case(s: &str) -> Result<ManufacturedCase> {
    Ok(manufactured(s.parse::<CaseName>()?))
}

// ---------------------------------------------------------------------------
// Subcommand drivers
// ---------------------------------------------------------------------------

fn run(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Solve {
            problem,
            case,
            n,
            layout,
            out,
            vtk,
        } => {
            let problem: Problem = cfg.string(problem, "problem", "s1").parse()?;
            let case = parse_case(&cfg.string(case, "case", "ms1"))?;
            let n = cfg.parsed(n, "n", 4)?;
            let layout_str = cfg.string(layout, "layout", "channel");
            let layout = parse_layout(&layout_str)?;
            let out = cfg.path(out, "out", ".");
            let vtk = cfg.opt_path(vtk, "vtk");
            cmd_solve(problem, &case, n, layout, &layout_str, &out, vtk.as_deref())
        }
        Command::Convergence {
            problem,
            case,
            levels,
            out,
        } => {
            let problem: Problem = cfg.string(problem, "problem", "s1").parse()?;
            let case = parse_case(&cfg.string(case, "case", "ms1"))?;
            let levels = cfg.parsed(levels, "levels", 4)?;
            let out = cfg.path(out, "out", ".");
            cmd_convergence(problem, &case, levels, &out)
        }
        Command::VerifyS1 { case, n, eps, out } => {
            let case = parse_case(&cfg.string(case, "case", "ms1"))?;
            let n = cfg.parsed(n, "n", 8)?;
            let eps = parse_eps(&cfg.string(eps, "eps", "0,1e-3,1e-2,1e-1"))?;
            let out = cfg.path(out, "out", ".");
            cmd_verify(Problem::S1, &case, n, &eps, false, &out)
        }
        Command::VerifyS2 {
            case,
            n,
            eps,
            traction_only,
            out,
        } => {
            let case = parse_case(&cfg.string(case, "case", "ms1"))?;
            let n = cfg.parsed(n, "n", 4)?;
            let eps = parse_eps(&cfg.string(eps, "eps", "0,1e-3,1e-2,1e-1"))?;
            let traction_only = cfg.flag(traction_only, "traction-only")?;
            let out = cfg.path(out, "out", ".");
            cmd_verify(Problem::S2, &case, n, &eps, traction_only, &out)
        }
        Command::Constants { n, layout, out } => {
            let n = cfg.parsed(n, "n", 4)?;
            let layout = parse_layout(&cfg.string(layout, "layout", "channel"))?;
            let out = cfg.path(out, "out", ".");
            cmd_constants(n, layout, &out)
        }
        Command::Mesh { n, layout, out } => {
            let n = cfg.parsed(n, "n", 4)?;
            let layout = parse_layout(&cfg.string(layout, "layout", "channel"))?;
            let out = cfg.path(out, "out", ".");
            cmd_mesh(n, layout, &out)
        }
    }
}

/// Write `contents` under `dir`, creating the directory first.
fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    atomic_write(&path, contents)?;
    Ok(path)
}

fn to_pretty_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serialization");
    text.push('\n');
    text
}

fn cmd_solve(
    problem: Problem,
    case: &ManufacturedCase,
    n: usize,
    layout: BcLayout,
    layout_str: &str,
    out: &Path,
    vtk: Option<&Path>,
) -> Result<()> {
    let mesh = Arc::new(Mesh::unit_square(n, layout)?);
    let data = case.problem_data(problem);
    let sol: FieldSolution = match problem {
        Problem::S1 => solve_s1(&mesh, &data)?,
        Problem::S2 => solve_s2(&mesh, &data)?,
        Problem::Pp => solve_pp(&mesh, &data)?,
    };
    // The closed-form reference solves the boundary value problem only on
    // the case's native layout; report errors only there.
    let errors = (layout == case.layout).then(|| {
        let fam = case.family(problem);
        serde_json::json!({
            "err_u_h1": error_h1_vector(&sol.velocity_space, &sol.velocity, &case.u, &case.grad_u),
            "err_p_l2": error_l2_scalar(&sol.pressure_space, &sol.pressure, &fam.p),
            "err_p_h1": error_h1_scalar(&sol.pressure_space, &sol.pressure, &fam.p, &fam.grad_p),
        })
    });
    let stem = format!("solve-{problem}-{}-n{n}", case.name);
    let vtk_path = match vtk {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{stem}.vtk"));
            atomic_write(&path, &render_vtk(&sol, &stem))?;
            Some(path)
        }
        None => None,
    };
    let report = serde_json::json!({
        "problem": problem.to_string(),
        "case": case.name,
        "n": n,
        "h": mesh.h_max(),
        "layout": layout_str,
        "dofs": {
            "velocity": sol.velocity_space.n_dofs(),
            "pressure": sol.pressure_space.n_dofs(),
        },
        "diagnostics": {
            "residual": sol.diagnostics.residual,
            "positive_pivots": sol.diagnostics.positive_pivots,
            "negative_pivots": sol.diagnostics.negative_pivots,
        },
        "errors": errors,
        "vtk": vtk_path.as_ref().map(|p| p.display().to_string()),
    });
    let json_path = write_output(out, &format!("{stem}.json"), &to_pretty_json(&report))?;
    print!(
        "solved {problem} on {} at n={n}: residual {:.3e}; wrote {}",
        case.name,
        sol.diagnostics.residual,
        json_path.display()
    );
    match vtk_path {
        Some(p) => println!(" and {}", p.display()),
        None => println!(),
    }
    Ok(())
}

fn cmd_convergence(
    problem: Problem,
    case: &ManufacturedCase,
    levels: usize,
    out: &Path,
) -> Result<()> {
    let table = run_convergence(case, problem, levels)?;
    let stem = format!("convergence-{}-{problem}", case.name);
    let csv = write_output(out, &format!("{stem}.csv"), &render_convergence_csv(&table))?;
    write_output(out, &format!("{stem}.json"), &to_pretty_json(&table))?;
    let fmt = |rates: &[f64]| {
        rates
            .iter()
            .map(|r| format!("{r:.2}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!(
        "convergence of {problem} on {} over {levels} levels: u rates [{}], p rates [{}]; wrote {}",
        case.name,
        fmt(&table.rates_u_h1),
        fmt(&table.rates_p_l2),
        csv.display()
    );
    Ok(())
}

fn cmd_verify(
    problem: Problem,
    case: &ManufacturedCase,
    n: usize,
    eps: &[f64],
    traction_only: bool,
    out: &Path,
) -> Result<()> {
    let report = match (problem, traction_only) {
        (Problem::S1, _) => verify_estimate_s1(case, eps, n)?,
        (Problem::S2, false) => verify_estimate_s2(case, eps, n)?,
        (Problem::S2, true) => verify_estimate_s2_traction_only(case, eps, n)?,
        (Problem::Pp, _) => unreachable!("verify drives s1 or s2"),
    };
    let summary = summarize_estimate(&report);
    let stem = format!("verify-{problem}-{}-n{n}", case.name);
    let csv = write_output(out, &format!("{stem}.csv"), &render_estimate_csv(&report))?;
    write_output(
        out,
        &format!("{stem}-summary.json"),
        &to_pretty_json(&summary),
    )?;
    let flag = |pass: Option<bool>| match pass {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "not run",
    };
    println!(
        "verify {problem} on {} at n={n}: zero-mismatch {}, linearity {}, ratio band {}; wrote {}",
        case.name,
        flag(summary.pass_zero_mismatch),
        flag(summary.pass_linearity),
        flag(summary.pass_ratio_band),
        csv.display()
    );
    Ok(())
}

fn cmd_constants(n: usize, layout: BcLayout, out: &Path) -> Result<()> {
    let mesh = Arc::new(Mesh::unit_square(n, layout)?);
    let constants = discrete_constants(&mesh)?;
    let path = write_output(
        out,
        &format!("constants-n{n}.json"),
        &to_pretty_json(&constants),
    )?;
    println!(
        "constants at n={n}: beta={:.4}, korn={:.4}, poincare1={:.4}, poincare2={:.4}, \
         curl={:.4}; wrote {}",
        constants.beta_infsup,
        constants.c_korn,
        constants.c_poincare_gamma1,
        constants.c_poincare_gamma2,
        constants.c_curl,
        path.display()
    );
    Ok(())
}

fn cmd_mesh(n: usize, layout: BcLayout, out: &Path) -> Result<()> {
    let mesh = Mesh::unit_square(n, layout)?;
    let name = format!("mesh-n{n}.vtk");
    let path = write_output(out, &name, &render_mesh_vtk(&mesh, &format!("mesh-n{n}")))?;
    println!(
        "mesh at n={n}: {} vertices, {} cells; wrote {}",
        mesh.n_vertices(),
        mesh.n_cells(),
        path.display()
    );
    Ok(())
}
