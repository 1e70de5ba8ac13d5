use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use lumpvem::harness::{emit_outputs, run_convergence, solve_manufactured, DtPolicy};
use lumpvem::mesh::io::{read_mesh, write_mesh};
use lumpvem::spectral::{bound_table, dt_from_lambda, lambda_max_loosening, BoundRow, FALLBACK_TOL};
use lumpvem::timeint::{energy_trace_csv, make_tableau, IntegrateOptions};
use lumpvem::{
    assemble_system, generate_mesh, ConvergenceConfig, EocTable, Error,
    IntegratorKind, Mesh, MeshFamily, MeshParams, PowerOptions, DEFAULT_DELTA,
};

/// Energy-growth factor over the Grönwall bound at which `solve` declares the
/// run unstable.
const GROWTH_GUARD: f64 = 4.0;

#[derive(Parser, Debug)]
#[command(name = "lumpvem", version, about = "Mass-lumped VEM heat solver with SSP Runge-Kutta time stepping")]
struct Cli {
    /// Worker threads for element-parallel sections.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Increase log output (repeatable).
    #[arg(long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a mesh of the unit square and write it to a file.
    Mesh(MeshArgs),
    /// Solve the manufactured heat problem on one mesh.
    Solve(SolveArgs),
    /// Run a convergence study over several refinement levels.
    Convergence(ConvergenceArgs),
    /// Tabulate λ_max·h_min² over refinement levels.
    Spectral(SpectralArgs),
}

#[derive(Args, Debug, Clone)]
struct MeshOpts {
    #[arg(long, default_value = "distorted-quad")]
    family: MeshFamily,
    /// Relative vertex perturbation for the quad families.
    #[arg(long, default_value_t = 0.3)]
    distortion: f64,
    #[arg(long, default_value_t = 5)]
    lloyd_iters: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl MeshOpts {
    fn params(&self, n: usize) -> MeshParams {
        MeshParams::new(self.family, n)
            .distortion(self.distortion)
            .lloyd_iters(self.lloyd_iters)
            .seed(self.seed)
    }
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[command(flatten)]
    mesh: MeshOpts,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Mesh file; when absent the mesh is generated from --family/--n.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[command(flatten)]
    gen: MeshOpts,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "ssprk3")]
    integrator: IntegratorKind,
    /// spectral:<safety>, theta:<θ> or theta:auto[:<safety>].
    #[arg(long, default_value = "spectral:0.9")]
    dt_policy: DtPolicy,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol_eig: f64,
    /// Energy trace CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    /// Comma-separated families; each yields one table.
    #[arg(long, value_delimiter = ',', default_value = "distorted-quad")]
    family: Vec<MeshFamily>,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    levels: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Comma-separated integrators; each yields one table.
    #[arg(long, value_delimiter = ',', default_value = "ssprk3")]
    integrator: Vec<IntegratorKind>,
    /// spectral:<safety>, theta:<θ> or theta:auto[:<safety>].
    #[arg(long, default_value = "theta:auto")]
    dt_policy: DtPolicy,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = 0.3)]
    distortion: f64,
    #[arg(long, default_value_t = 5)]
    lloyd_iters: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol_eig: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectralArgs {
    #[command(flatten)]
    mesh: MeshOpts,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    levels: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol_eig: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn check_k(k: usize) -> lumpvem::error::Result<()> {
    if (1..=2).contains(&k) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("--k must be 1 or 2, got {k}")))
    }
}

fn check_delta(delta: f64) -> lumpvem::error::Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("--delta must lie in (0, 1), got {delta}")))
    }
}

fn run_mesh(a: &MeshArgs) -> lumpvem::error::Result<()> {
    let p = a.mesh.params(a.n);
    info!("config: mesh family={} n={} distortion={} lloyd-iters={} seed={}", p.family, p.n, p.distortion, p.lloyd_iters, p.seed);
    let m = generate_mesh(&p)?;
    write_mesh(&m, &a.out)?;
    let s = m.stats();
    println!(
        "wrote {} ({} vertices, {} cells, h_max {:.6e}, h_min {:.6e})",
        a.out.display(),
        m.n_vertices(),
        s.n_cells,
        s.h_max,
        s.h_min
    );
    Ok(())
}

fn run_solve(a: &SolveArgs) -> lumpvem::error::Result<()> {
    check_k(a.k)?;
    check_delta(a.delta)?;
    let mesh: Mesh = match &a.mesh {
        Some(path) => read_mesh(path)?,
        None => generate_mesh(&a.gen.params(a.n))?,
    };
    let source = match &a.mesh {
        Some(p) => format!("mesh={}", p.display()),
        None => format!(
            "family={} n={} distortion={} lloyd-iters={} seed={}",
            a.gen.family, a.n, a.gen.distortion, a.gen.lloyd_iters, a.gen.seed
        ),
    };
    let config = format!(
        "solve {source} k={} integrator={} dt-policy={} delta={} t-end={} tol-eig={:e}",
        a.k, a.integrator, a.dt_policy, a.delta, a.t_end, a.tol_eig
    );
    info!("config: {config}");

    let stats = mesh.stats();
    let sys = assemble_system(&mesh, a.k, a.delta)?;
    let opts = PowerOptions {
        tol: a.tol_eig,
        max_iters: None,
        seed: a.gen.seed,
    };
    let rep = lambda_max_loosening(&sys.k_h, &sys.m_lumped, &opts, FALLBACK_TOL)?;
    let c_ssp = make_tableau(a.integrator).c_ssp;
    let limit = c_ssp * 2.0 / rep.lambda_max;
    let dt = match a.dt_policy {
        DtPolicy::Spectral(s) => dt_from_lambda(rep.lambda_max, a.integrator, s)?,
        DtPolicy::Theta(t) => t * stats.h_min * stats.h_min,
        DtPolicy::ThetaCalibrated(s) => dt_from_lambda(rep.lambda_max, a.integrator, s)?,
    };
    info!(
        "n_free {}, λ_max {:.6e}, dt {:.6e}, SSP limit {:.6e}",
        sys.n_free, rep.lambda_max, dt, limit
    );
    if dt > limit {
        warn!("dt {dt:.6e} exceeds the SSP limit {limit:.6e} = C_SSP·2/λ_max; instability is expected");
    }
    let iopts = IntegrateOptions {
        record_energy: a.out.is_some(),
        growth_guard: Some(GROWTH_GUARD),
    };
    let (l2, h1, run) = solve_manufactured(&mesh, &sys, a.integrator, dt, a.t_end, &iopts).inspect_err(|e| {
        if let Error::Unstable { .. } = e {
            error!("dt = {dt:.6e}, 2/λ_max = {:.6e}, ratio dt·λ_max/(2·C_SSP) = {:.4}", rep.dt_fe, dt / limit);
        }
    })?;
    if let Some(out) = &a.out {
        let mut csv = format!("# {config}\n");
        csv.push_str(&energy_trace_csv(&run.trace));
        fs::write(out, csv)?;
    }
    println!(
        "steps {} dt {:.6e} lambda_max {:.6e} err_l2 {:.6e} err_h1 {:.6e}",
        run.steps, dt, rep.lambda_max, l2, h1
    );
    Ok(())
}

fn run_convergence_cmd(a: &ConvergenceArgs) -> lumpvem::error::Result<()> {
    check_k(a.k)?;
    check_delta(a.delta)?;
    let levels: Vec<String> = a.levels.iter().map(|n| n.to_string()).collect();
    let families: Vec<&str> = a.family.iter().map(|f| f.name()).collect();
    let integrators: Vec<&str> = a.integrator.iter().map(|i| i.name()).collect();
    let header = format!(
        "convergence family={} levels={} k={} integrator={} dt-policy={} delta={} distortion={} lloyd-iters={} seed={} t-end={} tol-eig={:e}",
        families.join(","),
        levels.join(","),
        a.k,
        integrators.join(","),
        a.dt_policy,
        a.delta,
        a.distortion,
        a.lloyd_iters,
        a.seed,
        a.t_end,
        a.tol_eig
    );
    info!("config: {header}");
    let mut tables: Vec<EocTable> = Vec::new();
    for &family in &a.family {
        for &integrator in &a.integrator {
            let mut cfg = ConvergenceConfig::new(family, a.levels.clone());
            cfg.k = a.k;
            cfg.integrator = integrator;
            cfg.dt_policy = a.dt_policy;
            cfg.delta = a.delta;
            cfg.distortion = a.distortion;
            cfg.lloyd_iters = a.lloyd_iters;
            cfg.seed = a.seed;
            cfg.t_end = a.t_end;
            cfg.tol_eig = a.tol_eig;
            let t = run_convergence(&cfg)?;
            print_table(&t);
            tables.push(t);
        }
    }
    emit_outputs(&tables, Some(&header), &a.out, a.svg.as_deref())?;
    Ok(())
}

fn print_table(t: &EocTable) {
    println!("{} k={} {}", t.family, t.k, t.integrator);
    println!("{:>5} {:>11} {:>8} {:>11} {:>11} {:>11} {:>7} {:>7}", "n", "h_max", "n_free", "dt", "err_l2", "err_h1", "eoc_l2", "eoc_h1");
    for (i, r) in t.rows.iter().enumerate() {
        let (e2, e1) = if i == 0 {
            (String::new(), String::new())
        } else {
            (format!("{:.3}", t.eoc_l2[i - 1]), format!("{:.3}", t.eoc_h1[i - 1]))
        };
        println!(
            "{:>5} {:>11.4e} {:>8} {:>11.4e} {:>11.4e} {:>11.4e} {:>7} {:>7}",
            r.n, r.h_max, r.n_free, r.dt, r.err_l2, r.err_h1, e2, e1
        );
    }
}

fn run_spectral(a: &SpectralArgs) -> lumpvem::error::Result<()> {
    check_k(a.k)?;
    check_delta(a.delta)?;
    let levels: Vec<String> = a.levels.iter().map(|n| n.to_string()).collect();
    let header = format!(
        "spectral family={} levels={} k={} delta={} distortion={} lloyd-iters={} seed={} tol-eig={:e}",
        a.mesh.family,
        levels.join(","),
        a.k,
        a.delta,
        a.mesh.distortion,
        a.mesh.lloyd_iters,
        a.mesh.seed,
        a.tol_eig
    );
    info!("config: {header}");
    let opts = PowerOptions {
        tol: a.tol_eig,
        max_iters: None,
        seed: a.mesh.seed,
    };
    let mut rows = Vec::new();
    for (level, &n) in a.levels.iter().enumerate() {
        let mesh = generate_mesh(&a.mesh.params(n))?;
        let sys = assemble_system(&mesh, a.k, a.delta)?;
        let h_min = mesh.stats().h_min;
        let rep = lambda_max_loosening(&sys.k_h, &sys.m_lumped, &opts, FALLBACK_TOL)?.with_h_min(h_min);
        rows.push(BoundRow {
            level,
            h_min,
            n_free: sys.n_free,
            lambda_max: rep.lambda_max,
            dt_fe: rep.dt_fe,
            bound_product: rep.bound_product,
        });
    }
    let table = bound_table(rows);
    let mut csv = format!("# {header}\nlevel,h_min,n_free,lambda_max,dt_fe,bound_product\n");
    for r in &table.rows {
        csv.push_str(&format!(
            "{},{:.10e},{},{:.10e},{:.10e},{:.10e}\n",
            r.level, r.h_min, r.n_free, r.lambda_max, r.dt_fe, r.bound_product
        ));
    }
    print!("{}", &csv[csv.find('\n').unwrap() + 1..]);
    println!("spread {:.4}{}", table.spread, if table.flagged { " (flagged)" } else { "" });
    if table.flagged {
        warn!("λ_max·h_min² changes by more than a factor 2 between consecutive levels");
    }
    if let Some(out) = &a.out {
        fs::write(out, csv)?;
    }
    Ok(())
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    if cli.threads == 0 {
        error!("--threads must be at least 1");
        return ExitCode::from(1);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        error!("could not configure the thread pool: {e}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::Mesh(a) => run_mesh(a),
        Command::Solve(a) => run_solve(a),
        Command::Convergence(a) => run_convergence_cmd(a),
        Command::Spectral(a) => run_spectral(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
