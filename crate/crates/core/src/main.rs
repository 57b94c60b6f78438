use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ibflow::case::{exchange_check, load_case, run_case, Case, Overrides};
use ibflow::mesh::io::{write_mesh, write_vtk, CellData};
use ibflow::solver::IbState;
use ibflow::stencil::stencil_audit;
use ibflow::Error;

#[derive(Parser)]
#[command(name = "ibflow", version, about = "Immersed boundary finite-volume solver for generalized-Newtonian flow")]
struct Cli {
    /// Polynomial degree of the IB approximator.
    #[arg(long = "p", global = true, value_name = "DEGREE")]
    degree: Option<usize>,
    /// Diffuse-interface limit (forces degree 0).
    #[arg(long, global = true)]
    dim: bool,
    /// Plan and replay the stencil exchange over this many simulated partitions.
    #[arg(long, global = true, value_name = "N")]
    partitions: Option<usize>,
    /// Output directory, overriding the case file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a case to its end time.
    Run { case: PathBuf },
    /// Check a case file and its mesh references.
    Validate { case: PathBuf },
    /// Write the case mesh as an ibflow-mesh file and a VTK file with cell labels.
    MeshExport { case: PathBuf },
    /// Write the IB stencils and operator rows of the initial configuration.
    StencilAudit { case: PathBuf },
}

fn load(path: &Path, cli: &Cli) -> ibflow::Result<Case> {
    let mut case = load_case(path)?;
    case.apply(&Overrides { degree: cli.degree, dim: cli.dim, out: cli.out.clone() });
    Ok(case)
}

fn initial_ib(case: &Case, mesh: &ibflow::mesh::Mesh) -> ibflow::Result<Option<IbState>> {
    let setups = case.body_setups()?;
    if setups.is_empty() {
        return Ok(None);
    }
    let bcs = case.boundary_conditions(mesh)?;
    let bodies = setups.into_iter().map(|s| s.body).collect();
    IbState::build(mesh, bodies, case.solver.degree, &case.criteria, &bcs).map(Some)
}

fn execute(cli: &Cli) -> ibflow::Result<()> {
    match &cli.command {
        Command::Run { case } => {
            let c = load(case, cli)?;
            let s = run_case(&c, cli.partitions)?;
            println!("completed {} steps, t = {:e} s", s.steps, s.time);
            if let Some(b) = &s.benchmark {
                println!("{}: L2 relative error {:e}, max error {:e} over {} cells", b.kind, b.l2_relative, b.max_abs, b.cells);
            }
            if let Some(r) = s.reports.last() {
                println!("max cell imbalance {:e}, IB replay error {:e}", r.max_imbalance, s.ib_replay_error);
            }
            if let Some(x) = &s.exchange {
                println!(
                    "exchange: {} cells received (brute force {}), gathers {}",
                    x.map.total_received(),
                    x.brute_force_count,
                    if x.gathers_match { "match" } else { "DIFFER" }
                );
            }
            println!("outputs in {}", c.output.directory.display());
        }
        Command::Validate { case } => {
            let c = load(case, cli)?;
            let mesh = c.build_mesh()?;
            c.body_setups()?;
            println!("{}: valid ({} cells, {} patches, {} surfaces)", case.display(), mesh.n_cells(), mesh.patches().len(), c.surfaces.len());
        }
        Command::MeshExport { case } => {
            let c = load(case, cli)?;
            let mesh = c.build_mesh()?;
            let ib = initial_ib(&c, &mesh)?;
            let dir = &c.output.directory;
            fs::create_dir_all(dir)?;
            write_mesh(&mesh, &dir.join("mesh.ibflow"))?;
            let labels: Vec<i32> = match &ib {
                Some(ib) => ib.labels().iter().map(|l| l.code()).collect(),
                None => vec![0; mesh.n_cells()],
            };
            let mut w = std::io::BufWriter::new(fs::File::create(dir.join("mesh.vtk"))?);
            write_vtk(&mesh, &[CellData::Integer("label", &labels)], &mut w)?;
            println!("wrote {} and {}", dir.join("mesh.ibflow").display(), dir.join("mesh.vtk").display());
        }
        Command::StencilAudit { case } => {
            let c = load(case, cli)?;
            let mesh = c.build_mesh()?;
            let Some(ib) = initial_ib(&c, &mesh)? else {
                println!("case has no immersed surfaces; nothing to audit");
                return Ok(());
            };
            let dir = &c.output.directory;
            fs::create_dir_all(dir)?;
            let mut text = stencil_audit(&ib.stencils);
            text.push_str(&ib.operator.audit());
            if let Some(n) = cli.partitions {
                let field: Vec<f64> = mesh.centres().iter().map(|x| x.x + 2.0 * x.y + 3.0 * x.z).collect();
                let x = exchange_check(&mesh, &ib.stencils, n.max(1), &field);
                text.push_str(&format!(
                    "# exchange over {n} partitions: {} received, {} sent, brute force {}, gathers match {}\n",
                    x.map.total_received(),
                    x.map.total_sent(),
                    x.brute_force_count,
                    x.gathers_match
                ));
            }
            fs::write(dir.join("stencil_audit.txt"), text)?;
            println!("{} IB cells audited into {}", ib.stencils.len(), dir.join("stencil_audit.txt").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var("IBFLOW_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: could not size the worker pool: {e}");
                }
            }
            _ => eprintln!("warning: ignoring IBFLOW_THREADS={v}; expected a positive integer"),
        }
    }
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
