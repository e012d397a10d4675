use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use oscwall::cell::{cell_constants, CellConstants, CellResolution};
use oscwall::composite::{composite_residual, ResidualMode, ResidualOptions};
use oscwall::corrector::{correct, FemBackend, LayerConstants, OuterBackend, GAP_TOL};
use oscwall::fem::{apply_dirichlet, assemble, eigs_smallest_near, EigOptions};
use oscwall::limit::{analytic_cluster, fem_cluster, lambda0_exact, EigenCluster};
use oscwall::mesh::{mesh_limit_domain, mesh_perturbed, BoundaryTag, EpsilonParam, LayerMeshSpec, StripSpec};
use oscwall::model::Model;
use oscwall::profile::Profile;
use oscwall::study::{run_study, ConvergenceReport, StudyConfig};
use oscwall::{Error, Result};

#[derive(Parser)]
#[command(name = "oscwall", version, about = "Eigenvalue asymptotics near an oscillating Dirichlet wall")]
struct Cli {
    /// Study configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the eigensolver start block.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone)]
struct CellArgs {
    /// Profile descriptor, e.g. `cosine:d=1,a=0.4`.
    #[arg(long, default_value = "cosine:d=1,a=0.4")]
    profile: Profile,
    /// Strip height.
    #[arg(long = "T", default_value_t = 8.0)]
    t: f64,
    #[arg(long, default_value_t = 64)]
    cphp: usize,
    #[arg(long)]
    no_richardson: bool,
    /// Reuse constants written by `oscwall cell`.
    #[arg(long)]
    constants: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Analytic,
    Fem,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cell constants C, C_I, C_II.
    Cell(CellArgs),
    /// Limit cluster and its boundary form.
    Limit {
        #[arg(long, value_enum, default_value = "analytic")]
        backend: Backend,
        #[arg(long, default_value_t = 1.0 / 32.0)]
        h: f64,
    },
    /// Corrector coefficients for both branches.
    Correct {
        #[command(flatten)]
        cell: CellArgs,
        /// Also run the P1 outer backend on the limit mesh of size `h`.
        #[arg(long)]
        fem_h: Option<f64>,
    },
    /// Predicted eigenvalue of one branch.
    Predict {
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        branch: usize,
        /// `ε = 1/(2N+1)`; alternative to `--eps`.
        #[arg(long, conflicts_with = "eps")]
        n: Option<u32>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 3)]
        order: usize,
    },
    /// FEM eigenvalues of the perturbed domain.
    Eig {
        #[arg(long, default_value = "cosine:d=1,a=0.4")]
        profile: Profile,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 6)]
        count: usize,
        #[arg(long)]
        target: Option<f64>,
        #[arg(long, default_value_t = 8)]
        cphp: usize,
        #[arg(long, default_value_t = 0.025)]
        h_bulk: f64,
    },
    /// Residual of the composite approximation.
    Residual {
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        branch: usize,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, value_enum, default_value = "weak")]
        mode: Mode,
    },
    /// Convergence study (uses `--config` if given).
    Study,
    /// Summarize a `study.json`.
    Report {
        /// Defaults to `<out>/study.json`.
        input: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Weak,
    Interpolant,
}

fn print(v: &serde_json::Value) {
    emit(&serde_json::to_string_pretty(v).expect("json value"));
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(s: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", s.trim_end());
}

fn constants(a: &CellArgs) -> Result<CellConstants> {
    match &a.constants {
        Some(p) => Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        None => {
            let res = CellResolution {
                strip: StripSpec { cells_per_half_period: a.cphp, ..Default::default() },
                richardson: !a.no_richardson,
            };
            cell_constants(&a.profile, a.t, &res)
        }
    }
}

fn model(a: &CellArgs) -> Result<Model> {
    Model::from_constants(a.profile.clone(), constants(a)?)
}

fn branch_index(b: usize) -> Result<usize> {
    match b {
        1 | 2 => Ok(b - 1),
        _ => Err(Error::InvalidArgument(format!("branch {b} (expected 1 or 2)"))),
    }
}

fn cluster_json(c: &EigenCluster) -> Result<serde_json::Value> {
    let tr = c.traces()?;
    Ok(json!({
        "lambda0": c.lambda0,
        "values": c.values,
        "gram": c.gram,
        "nerav_gap": c.nerav_gap(),
        "rotation": c.rotation,
        "trace_coefficients": [&tr[0], &tr[1]],
    }))
}

fn load_config(cli: &Cli) -> Result<StudyConfig> {
    let mut cfg = match &cli.config {
        Some(p) => StudyConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => StudyConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.tolerances.eig.seed = s;
    }
    Ok(cfg)
}

fn report_text(r: &ConvergenceReport) -> String {
    let mut s = format!("profile {}  config {}\n", r.metadata.profile, &r.metadata.config_hash[..12]);
    let k = &r.metadata.constants;
    s += &format!("C = {:.8}  C_I = {:.8}  C_II = {:.8}\n", k.c, k.c_i, k.c_ii);
    for (b, l) in r.metadata.coefficients.iter().enumerate() {
        s += &format!("branch {}: λ = {:.6} {:+.6}ε {:+.6}ε² {:+.6}ε³\n", b + 1, l[0], l[1], l[2], l[3]);
    }
    s += "\n  N  branch   lambda_eps      rem0       rem1       rem2       rem3     h1_err\n";
    for row in &r.rows {
        s += &format!(
            "{:>3}  {:>6}  {:>11.6}  {:.3e}  {:.3e}  {:.3e}  {:.3e}  {:.3e}\n",
            row.n, row.branch, row.lambda_eps, row.rem[0], row.rem[1], row.rem[2], row.rem[3], row.h1_err
        );
    }
    s += "\nslopes\n";
    for sl in &r.slopes {
        match sl.fit {
            Some(f) => {
                s += &format!(
                    "  branch {} {:<7} {:>7.4}  r² {:.4}{}\n",
                    sl.branch,
                    sl.quantity,
                    f.slope,
                    f.r2,
                    if sl.flagged { "  (flagged)" } else { "" }
                )
            }
            None => s += &format!("  branch {} {:<7} none: {}\n", sl.branch, sl.quantity, sl.note),
        }
    }
    for f in &r.flagged {
        s += &format!("N = {} flagged: {}\n", f.n, f.error);
    }
    s
}

fn run(cli: &Cli) -> Result<()> {
    let eig_opts = EigOptions { seed: cli.seed.unwrap_or(EigOptions::default().seed), ..Default::default() };
    match &cli.cmd {
        Cmd::Cell(a) => {
            let c = constants(a)?;
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("cell.json"), serde_json::to_string_pretty(&c)?)?;
            }
            print(&serde_json::to_value(c)?);
        }
        Cmd::Limit { backend, h } => {
            let mesh = Arc::new(mesh_limit_domain(*h)?);
            let c = match backend {
                Backend::Analytic => analytic_cluster(mesh, GAP_TOL)?.0,
                Backend::Fem => fem_cluster(mesh, *h, GAP_TOL, &eig_opts)?.0,
            };
            print(&cluster_json(&c)?);
        }
        Cmd::Correct { cell, fem_h } => {
            let m = model(cell)?;
            let branches = |c: &oscwall::corrector::Corrections<_>| -> Vec<serde_json::Value> {
                c.branches
                    .iter()
                    .map(|b: &oscwall::corrector::BranchCorrection<_>| {
                        json!({"branch": b.branch, "lambda": b.lambda, "kappa1": b.kappa1, "kappa2": b.kappa2, "max_residue": b.max_residue})
                    })
                    .collect()
            };
            let mut out = json!({
                "constants": LayerConstants::from(&m.constants),
                "lambda0": m.corrections.lambda0,
                "branches": branches(&m.corrections),
            });
            if let Some(h) = fem_h {
                let mesh = Arc::new(mesh_limit_domain(*h)?);
                let (cl, asm) = analytic_cluster(mesh, GAP_TOL)?;
                let fb = FemBackend::new(&cl, &asm)?;
                let fc = correct(&fb, LayerConstants::from(&m.constants))?;
                let fem: Vec<serde_json::Value> = fc
                    .branches
                    .iter()
                    .map(|b| json!({"branch": b.branch, "lambda": b.lambda, "kappa1": b.kappa1, "kappa2": b.kappa2, "max_residue": b.max_residue}))
                    .collect();
                out["fem"] = json!({"h": h, "lambda0": fb.lambda0(), "branches": fem});
            }
            print(&out);
        }
        Cmd::Predict { cell, branch, n, eps, order } => {
            let l = branch_index(*branch)?;
            let e = match (n, eps) {
                (Some(n), _) => EpsilonParam::new(*n)?.eps,
                (None, Some(e)) if *e >= 0.0 => *e,
                _ => return Err(Error::InvalidArgument("give --n or a nonnegative --eps".into())),
            };
            let m = model(cell)?;
            let v = m.predict(l, e, *order)?;
            print(&json!({"branch": branch, "eps": e, "order": order, "lambda_pred": v}));
        }
        Cmd::Eig { profile, n, count, target, cphp, h_bulk } => {
            let eps = EpsilonParam::new(*n)?;
            let spec = LayerMeshSpec { cells_per_half_period: *cphp, h_bulk: *h_bulk, ..Default::default() };
            let mesh = mesh_perturbed(profile, eps, &spec)?;
            let red = apply_dirichlet(&assemble(&mesh), &mesh, &[BoundaryTag::GammaEps])?;
            let pairs = eigs_smallest_near(&red.k, &red.m, target.unwrap_or_else(lambda0_exact), *count, &eig_opts)?;
            let values: Vec<f64> = pairs.iter().map(|p| p.value).collect();
            print(&json!({"N": n, "eps": eps.eps, "vertices": mesh.n_vertices(), "values": values}));
        }
        Cmd::Residual { cell, n, branch, beta, mode } => {
            let l = branch_index(*branch)?;
            let m = model(cell)?;
            let opts = ResidualOptions {
                mode: match mode {
                    Mode::Weak => ResidualMode::Weak,
                    Mode::Interpolant => ResidualMode::Interpolant,
                },
                ..Default::default()
            };
            let r = composite_residual(&m, EpsilonParam::new(*n)?, l, *beta, &opts)?;
            print(&json!({"eps": r.eps, "beta": r.beta, "norm": r.norm}));
        }
        Cmd::Study => {
            let cfg = load_config(cli)?;
            let report = run_study(&cfg)?;
            report.write(&cfg.output.dir, &cfg.output)?;
            eprint!("{}", report_text(&report));
            print(&json!({
                "config_hash": report.metadata.config_hash,
                "csv": cfg.output.dir.join(&cfg.output.csv),
                "json": cfg.output.dir.join(&cfg.output.json),
                "slopes": cfg.output.dir.join(&cfg.output.slopes),
                "flagged": report.flagged.len(),
            }));
        }
        Cmd::Report { input } => {
            let path = match input {
                Some(p) => p.clone(),
                None => cli.out.as_deref().unwrap_or(Path::new("out")).join("study.json"),
            };
            let r: ConvergenceReport = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            emit(&report_text(&r));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
