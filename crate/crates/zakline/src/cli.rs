//! Command-line front end: `zakline single | sweep | check`.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 numerical failure,
//! 4 sweep finished with failed rows.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::berry::{
    self, DiffScheme, Method, MethodSelection, QuantizationVerdict, SweepOptions, SweepRow,
};
use crate::gauge::{self, LoopGrid};
use crate::models::{self, BlochModel, PtStatus, SshParams};
use crate::{analytic, Tolerances};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

/// Fixed CSV column order; analytic cells are empty in PT-broken rows and
/// `nan` marks failed computations.
pub const CSV_HEADER: &str = "theta,re_g1,im_g1,re_g2,im_g2,\
re_g1_analytic,im_g1_analytic,re_g2_analytic,im_g2_analytic,\
pt_broken,quant_res_1,quant_res_2,oracle_gap_1,oracle_gap_2";

#[derive(Debug, Parser)]
#[command(
    name = "zakline",
    about = "Complex Zak phases of PT-symmetric Bloch Hamiltonians",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate both bands at a single theta and print a report.
    Single(SingleArgs),
    /// Sweep theta and emit one CSV row per point.
    Sweep(SweepArgs),
    /// Diagnostics: PT phase, chiral-symmetry residual, grid convergence.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Mean tunnelling amplitude t.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Dimerization strength Delta in [0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Gain/loss strength Gamma.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    /// Control parameter theta; accepts a `pi` suffix, e.g. `0.3pi`.
    #[arg(long, value_parser = parse_angle_arg, default_value = "0")]
    pub theta: f64,
    /// Model config file (`key=value` lines); overrides the inline flags.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TolArgs {
    /// Eigenpair residual tolerance.
    #[arg(long)]
    pub tol_resid: Option<f64>,
    /// Cross-band biorthogonality tolerance.
    #[arg(long)]
    pub tol_ortho: Option<f64>,
    /// Left/right eigenvalue pairing tolerance.
    #[arg(long)]
    pub tol_pair: Option<f64>,
    /// Self-orthogonality (exceptional point) threshold.
    #[arg(long)]
    pub tol_selforth: Option<f64>,
    /// Eigenvalue degeneracy threshold.
    #[arg(long)]
    pub tol_degeneracy: Option<f64>,
    /// PT classification threshold on |Im E|.
    #[arg(long)]
    pub tol_pt: Option<f64>,
    /// Minimum usable consecutive overlap.
    #[arg(long)]
    pub tol_overlap: Option<f64>,
    /// Relative modulus floor for the winding component.
    #[arg(long)]
    pub tol_component: Option<f64>,
    /// Endpoint closure tolerance after smoothing.
    #[arg(long)]
    pub tol_closure: Option<f64>,
    /// Quantization verdict tolerance.
    #[arg(long)]
    pub tol_quant: Option<f64>,
}

impl TolArgs {
    pub fn resolve(&self) -> Result<Tolerances, String> {
        let mut tol = Tolerances::default();
        let apply = |slot: &mut f64, v: Option<f64>, name: &str| -> Result<(), String> {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(format!("{name} must be > 0, got {v}"));
                }
                *slot = v;
            }
            Ok(())
        };
        apply(&mut tol.resid, self.tol_resid, "--tol-resid")?;
        apply(&mut tol.ortho, self.tol_ortho, "--tol-ortho")?;
        apply(&mut tol.pair, self.tol_pair, "--tol-pair")?;
        apply(&mut tol.selforth, self.tol_selforth, "--tol-selforth")?;
        apply(&mut tol.degeneracy, self.tol_degeneracy, "--tol-degeneracy")?;
        apply(&mut tol.pt, self.tol_pt, "--tol-pt")?;
        apply(&mut tol.overlap, self.tol_overlap, "--tol-overlap")?;
        apply(&mut tol.component, self.tol_component, "--tol-component")?;
        apply(&mut tol.closure, self.tol_closure, "--tol-closure")?;
        apply(&mut tol.quant, self.tol_quant, "--tol-quant")?;
        Ok(tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Derivative,
    Wilson,
    Both,
}

impl From<MethodArg> for MethodSelection {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Derivative => MethodSelection::Derivative,
            MethodArg::Wilson => MethodSelection::Wilson,
            MethodArg::Both => MethodSelection::Both,
        }
    }
}

#[derive(Debug, Args)]
pub struct SingleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Loop grid size (odd; even values are bumped with a warning).
    #[arg(long = "M", default_value_t = 1001)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    pub method: MethodArg,
    /// Append the result as one CSV row to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Compare against the closed-form result when available.
    #[arg(long, default_value_t = true)]
    pub emit_analytic: bool,
    #[command(flatten)]
    pub tol: TolArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "M", default_value_t = 1001)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    pub method: MethodArg,
    /// Sweep start (inclusive); accepts a `pi` suffix.
    #[arg(long, value_parser = parse_angle_arg, default_value = "0")]
    pub theta_min: f64,
    /// Sweep end (exclusive); accepts a `pi` suffix.
    #[arg(long, value_parser = parse_angle_arg, default_value = "2pi")]
    pub theta_max: f64,
    /// Number of theta points.
    #[arg(long, default_value_t = 64)]
    pub theta_steps: usize,
    /// CSV destination; `-` or omitted writes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Include the closed-form columns for unbroken rows.
    #[arg(long, default_value_t = true)]
    pub emit_analytic: bool,
    /// Worker threads (default: ZAKLINE_WORKERS or available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub tol: TolArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "M", default_value_t = 1001)]
    pub m: usize,
    /// Grid sizes for the convergence table, comma separated.
    #[arg(long = "M-list", value_delimiter = ',', default_values_t = vec![251, 501, 1001])]
    pub m_list: Vec<usize>,
    #[command(flatten)]
    pub tol: TolArgs,
}

fn parse_angle_arg(s: &str) -> Result<f64, String> {
    models::parse_angle(s)
}

/// Entry point used by the binary; returns a process exit code.
pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Single(args) => cmd_single(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Check(args) => cmd_check(args),
    }
}

fn load_model_args(args: &ModelArgs) -> Result<(BlochModel, Option<SshParams>), String> {
    if let Some(path) = &args.model {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read model file {}: {e}", path.display()))?;
        let model = models::load_model(&text).map_err(|e| e.to_string())?;
        let ssh = match &model {
            BlochModel::Ssh(p) => Some(*p),
            BlochModel::Fourier(_) => None,
        };
        Ok((model, ssh))
    } else {
        let p = SshParams::new(args.t, args.delta, args.theta, args.gamma)
            .map_err(|e| e.to_string())?;
        Ok((BlochModel::Ssh(p), Some(p)))
    }
}

/// Validate and normalize the grid size: at least 3, bumped to odd.
fn resolve_grid_size(m: usize) -> Result<usize, String> {
    if m < 3 {
        return Err(format!("grid too coarse: M = {m}, need at least 3 points"));
    }
    if m.is_multiple_of(2) {
        eprintln!("warning: M = {m} is even; using M = {} so the loop midpoint is a grid point", m + 1);
        Ok(m + 1)
    } else {
        Ok(m)
    }
}

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{:.16e}", x)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    fmt_float(x.unwrap_or(f64::NAN))
}

fn fmt_analytic(x: Option<Complex64>, part: fn(&Complex64) -> f64) -> String {
    match x {
        Some(z) => fmt_float(part(&z)),
        None => String::new(),
    }
}

/// One CSV line per [`CsvRow`]; see [`CSV_HEADER`] for the column order.
pub fn csv_row(row: &SweepRow) -> String {
    let g = |b: usize, part: fn(&Complex64) -> f64| -> String {
        fmt_float(row.gamma[b].map(|z| part(&z)).unwrap_or(f64::NAN))
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        fmt_float(row.theta),
        g(0, |z| z.re),
        g(0, |z| z.im),
        g(1, |z| z.re),
        g(1, |z| z.im),
        fmt_analytic(row.gamma_analytic[0], |z| z.re),
        fmt_analytic(row.gamma_analytic[0], |z| z.im),
        fmt_analytic(row.gamma_analytic[1], |z| z.re),
        fmt_analytic(row.gamma_analytic[1], |z| z.im),
        if row.pt_broken { 1 } else { 0 },
        fmt_opt(row.quant_residual[0]),
        fmt_opt(row.quant_residual[1]),
        fmt_opt(row.oracle_gap[0]),
        fmt_opt(row.oracle_gap[1]),
    )
}

fn write_csv(path: Option<&PathBuf>, rows: &[SweepRow]) -> Result<(), String> {
    let mut body = String::with_capacity(rows.len() * 256);
    body.push_str(CSV_HEADER);
    body.push('\n');
    for row in rows {
        body.push_str(&csv_row(row));
        body.push('\n');
    }
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::write(p, body)
            .map_err(|e| format!("cannot write {}: {e}", p.display())),
        _ => {
            std::io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| format!("cannot write to stdout: {e}"))
        }
    }
}

fn effective_workers(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("ZAKLINE_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn fmt_verdict(v: &QuantizationVerdict) -> String {
    let value = if v.value == 0.0 { "0" } else { "pi" };
    if v.is_quantized {
        format!("quantized at {value} (residual {:.3e})", v.residual)
    } else {
        format!("not quantized (residual {:.3e} from {value})", v.residual)
    }
}

fn cmd_single(args: SingleArgs) -> i32 {
    let tol = match args.tol.resolve() {
        Ok(t) => t,
        Err(e) => return config_error(&e),
    };
    let m = match resolve_grid_size(args.m) {
        Ok(m) => m,
        Err(e) => return config_error(&e),
    };
    let (model, ssh) = match load_model_args(&args.model) {
        Ok(v) => v,
        Err(e) => return config_error(&e),
    };

    let grid = match LoopGrid::brillouin_zone(m) {
        Ok(g) => g,
        Err(e) => return config_error(&e.to_string()),
    };

    let method_name = match args.method {
        MethodArg::Derivative => "derivative",
        MethodArg::Wilson => "wilson",
        MethodArg::Both => "both",
    };
    let mut report = String::new();
    let _ = writeln!(report, "zakline single: M = {m}, method = {method_name}");
    if let Some(p) = &ssh {
        let (tp, tm) = p.hopping_amplitudes();
        let _ = writeln!(
            report,
            "model: ssh t={} delta={} gamma={} theta={}  (t+ = {tp:.6}, t- = {tm:.6})",
            p.t, p.delta, p.gamma, p.theta
        );
        if p.gamma == 0.0 {
            let _ = writeln!(report, "note: gamma = 0 is the Hermitian limit; the Zak phase is real");
        }
    }

    let cls = match models::pt_classify(&model, &grid, tol.pt) {
        Ok(c) => c,
        Err(e) => return numerical_error(&e.to_string()),
    };
    let _ = writeln!(
        report,
        "PT status: {} (max |Im E| = {:.3e})",
        match cls.status {
            PtStatus::Unbroken => "unbroken",
            PtStatus::Broken => "broken",
        },
        cls.max_imag_gap
    );

    let method: MethodSelection = args.method.into();
    let raw = match gauge::solve_along_loop(&model, &grid, &tol) {
        Ok(b) => b,
        Err(e) => return numerical_error(&e.to_string()),
    };

    let dim = model.dim();
    let mut wilson = Vec::new();
    if method.wants_wilson() {
        for band in 1..=dim {
            match berry::zak_wilson(&raw, band, &tol) {
                Ok(r) => wilson.push(Some(r.with_pt_status(cls.clone()))),
                Err(e) => return numerical_error(&e.to_string()),
            }
        }
    }
    let mut derivative = Vec::new();
    if method.wants_derivative() {
        let tracks: Result<Vec<_>, _> = raw
            .tracks
            .iter()
            .cloned()
            .map(|t| gauge::trace_phases(t, &tol).and_then(|t| gauge::apply_smoothing(t, &tol)))
            .collect();
        let bundle = match tracks {
            Ok(tracks) => gauge::SmoothedBundle { grid: raw.grid.clone(), tracks },
            Err(e) => return numerical_error(&e.to_string()),
        };
        for band in 1..=dim {
            match berry::zak_derivative(&bundle, band, DiffScheme::Central, &tol) {
                Ok(r) => derivative.push(Some(r.with_pt_status(cls.clone()))),
                Err(e) => return numerical_error(&e.to_string()),
            }
        }
    }
    for band in 0..dim {
        let gap = match (
            derivative.get(band).and_then(|r: &Option<berry::ZakResult>| r.as_ref()),
            wilson.get(band).and_then(|r: &Option<berry::ZakResult>| r.as_ref()),
        ) {
            (Some(d), Some(w)) => Some(berry::gamma_distance(d.gamma, w.gamma)),
            _ => None,
        };
        if let Some(gap) = gap {
            if let Some(Some(r)) = derivative.get_mut(band) {
                r.oracle_gap = Some(gap);
            }
            if let Some(Some(r)) = wilson.get_mut(band) {
                r.oracle_gap = Some(gap);
            }
        }
    }

    let analytic_ref = ssh
        .filter(|_| args.emit_analytic && cls.status == PtStatus::Unbroken)
        .and_then(|p| analytic::analytic_from_ssh(&p).ok());

    for band in 1..=dim {
        let _ = writeln!(report, "band {band}:");
        let d = derivative.get(band - 1).and_then(|r| r.as_ref());
        let w = wilson.get(band - 1).and_then(|r| r.as_ref());
        for r in [d, w].into_iter().flatten() {
            let name = match r.method {
                Method::Derivative => "derivative",
                Method::Wilson => "wilson    ",
            };
            let _ = writeln!(
                report,
                "  {name}  gamma = {:+.12} {:+.12}i",
                r.gamma_principal.re, r.gamma_principal.im,
            );
        }
        // The Wilson real part carries no discretization bias, so it decides
        // the quantization verdict when both methods ran.
        if let Some(r) = w.or(d) {
            let _ = writeln!(
                report,
                "  {}",
                fmt_verdict(&berry::quantization_check(r.gamma, tol.quant))
            );
        }
        if let (Some(d), Some(w)) = (d, w) {
            let _ = writeln!(
                report,
                "  oracle gap |derivative - wilson| = {:.3e}",
                berry::gamma_distance(d.gamma, w.gamma)
            );
        }
        if let Some((g1, g2)) = analytic_ref {
            let reference = if band == 1 { g1 } else { g2 };
            let _ = writeln!(
                report,
                "  analytic    gamma = {:+.12} {:+.12}i",
                reference.re, reference.im
            );
        }
    }
    print!("{report}");

    if let Some(path) = &args.output {
        if let Some(p) = &ssh {
            let opt = SweepOptions {
                method,
                scheme: DiffScheme::Central,
                emit_analytic: args.emit_analytic,
                tol,
                workers: None,
            };
            let row = berry::sweep_row(p, p.theta, m, &opt);
            if let Err(e) = write_csv(Some(path), std::slice::from_ref(&row)) {
                return config_error(&e);
            }
        } else {
            eprintln!("note: CSV output is only defined for the ssh model; skipping");
        }
    }
    EXIT_OK
}

fn cmd_sweep(args: SweepArgs) -> i32 {
    let tol = match args.tol.resolve() {
        Ok(t) => t,
        Err(e) => return config_error(&e),
    };
    let m = match resolve_grid_size(args.m) {
        Ok(m) => m,
        Err(e) => return config_error(&e),
    };
    if args.theta_steps < 1 {
        return config_error("--theta-steps must be at least 1");
    }
    if !(args.theta_max > args.theta_min) {
        return config_error("--theta-max must be greater than --theta-min");
    }
    let (model, ssh) = match load_model_args(&args.model) {
        Ok(v) => v,
        Err(e) => return config_error(&e),
    };
    let template = match ssh {
        Some(p) => p,
        None => {
            drop(model);
            return config_error("sweep requires an ssh model (theta is the sweep coordinate)");
        }
    };

    let thetas = berry::theta_linspace(args.theta_min, args.theta_max, args.theta_steps);
    let opt = SweepOptions {
        method: args.method.into(),
        scheme: DiffScheme::Central,
        emit_analytic: args.emit_analytic,
        tol,
        workers: effective_workers(args.workers),
    };
    let rows = berry::sweep(&template, &thetas, m, &opt);

    if let Err(e) = write_csv(args.output.as_ref(), &rows) {
        return config_error(&e);
    }

    let failed: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_some()).collect();
    if !failed.is_empty() {
        for row in &failed {
            eprintln!(
                "row theta = {:.6}: {}",
                row.theta,
                row.error.as_deref().unwrap_or("unknown failure")
            );
        }
        eprintln!("{} of {} rows failed", failed.len(), rows.len());
        return EXIT_PARTIAL;
    }
    EXIT_OK
}

fn cmd_check(args: CheckArgs) -> i32 {
    let tol = match args.tol.resolve() {
        Ok(t) => t,
        Err(e) => return config_error(&e),
    };
    let m = match resolve_grid_size(args.m) {
        Ok(m) => m,
        Err(e) => return config_error(&e),
    };
    if args.m_list.is_empty() || args.m_list.windows(2).any(|w| w[1] <= w[0]) {
        return config_error("--M-list must be a strictly increasing list of grid sizes");
    }
    let (model, _) = match load_model_args(&args.model) {
        Ok(v) => v,
        Err(e) => return config_error(&e),
    };
    let grid = match LoopGrid::brillouin_zone(m) {
        Ok(g) => g,
        Err(e) => return config_error(&e.to_string()),
    };

    let cls = match models::pt_classify(&model, &grid, tol.pt) {
        Ok(c) => c,
        Err(e) => return numerical_error(&e.to_string()),
    };
    match cls.status {
        PtStatus::Unbroken => println!("PT-unbroken (max |Im E| = {:.3e})", cls.max_imag_gap),
        PtStatus::Broken => {
            let pts: Vec<String> = cls.critical_points.iter().map(|a| format!("{a:.4}")).collect();
            println!(
                "PT-broken (max |Im E| = {:.3e}; first exceeded near alpha = {})",
                cls.max_imag_gap,
                pts.join(", ")
            );
        }
    }

    if model.dim() == 2 {
        match models::chiral_residual(&model, &grid) {
            Ok((Some(a), resid)) if resid <= 1e-12 => {
                let axis = if a[2].abs() > 1.0 - 1e-9 {
                    " (sigma3)".to_string()
                } else {
                    format!(" (direction [{:.4}, {:.4}, {:.4}])", a[0], a[1], a[2])
                };
                println!("chiral symmetry present{axis}, residual {resid:.3e}");
            }
            Ok((a, resid)) => {
                let dir = a
                    .map(|a| format!(" (best direction [{:.4}, {:.4}, {:.4}])", a[0], a[1], a[2]))
                    .unwrap_or_default();
                println!("no chiral symmetry: residual {resid:.3e}{dir}");
            }
            Err(e) => return numerical_error(&e.to_string()),
        }
    }

    println!("convergence (band 1, derivative/central):");
    match berry::convergence_study(
        &model,
        1,
        &args.m_list,
        Method::Derivative,
        DiffScheme::Central,
        &tol,
    ) {
        Ok(rows) => {
            for r in rows {
                match r.delta_prev {
                    Some(d) => println!(
                        "  M = {:>6}: gamma = {:+.12} {:+.12}i   |delta| = {d:.3e}",
                        r.m, r.gamma.re, r.gamma.im
                    ),
                    None => println!(
                        "  M = {:>6}: gamma = {:+.12} {:+.12}i",
                        r.m, r.gamma.re, r.gamma.im
                    ),
                }
            }
        }
        Err(e) => return numerical_error(&e.to_string()),
    }
    EXIT_OK
}

fn config_error(message: &str) -> i32 {
    eprintln!("error: {message}");
    EXIT_CONFIG
}

fn numerical_error(message: &str) -> i32 {
    eprintln!("numerical failure: {message}");
    EXIT_NUMERICAL
}
