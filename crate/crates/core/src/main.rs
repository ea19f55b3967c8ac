use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use greens_coulomb::interactions::InteractionResult;
use greens_coulomb::scene::{run_sweep, write_sweep_csv, Scene, SceneError, SweepAxis, Units};
use greens_coulomb::validation::{figure_sweeps, run_suite, Suite};

/// Coulomb energies and forces of point charges in dielectric and
/// conducting environments.
#[derive(Parser, Debug)]
#[command(name = "greens-coulomb", version)]
struct Cli {
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "GREENS_COULOMB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scene description (JSON).
    #[arg(long)]
    scene: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report joules or the ratio to the bulk Coulomb value.
    #[arg(long, value_enum)]
    units: Option<Units>,
    /// Multiply forces by the real-cavity factor 3ε/(2ε+1).
    #[arg(long)]
    local_field: bool,
    /// Relative tolerance of the quadratures.
    #[arg(long)]
    rel_tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Interaction energy of the two charges in the scene.
    PairEnergy(Common),
    /// Energy of the single charge in the scene with its environment.
    SelfEnergy(Common),
    /// Force on the first charge.
    Force(Common),
    /// Energy over a range of one or two scene parameters, as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted path of the swept field, e.g. charges.1.position.z.
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Optional second swept field (inner loop).
        #[arg(long, requires_all = ["from2", "to2"])]
        param2: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        from2: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        to2: Option<f64>,
        #[arg(long, default_value_t = 50)]
        points2: usize,
    },
    /// Run acceptance checks; exits 1 if any fails.
    Validate {
        #[arg(value_enum, default_value = "all")]
        suite: Suite,
        /// Directory for the figure sweep CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<Scene, SceneError> {
    let mut scene = Scene::from_path(&common.scene)?;
    if let Some(tol) = common.rel_tol {
        scene.options.quadrature.rel_tol = tol;
    }
    if let Some(units) = common.units {
        scene.options.units = units;
    }
    scene.options.local_field |= common.local_field;
    scene.validate()?;
    Ok(scene)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, SceneError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| SceneError::Io(format!("cannot write {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn energy_record(r: &InteractionResult, units: Units) -> serde_json::Value {
    match (units, r.ratio_to_free) {
        (Units::Ratio, Some(ratio)) if r.energy != 0.0 => json!({
            "ratio_to_free": ratio,
            "abs_err": r.abs_err * (ratio / r.energy).abs(),
        }),
        _ => json!({
            "U_joules": r.energy,
            "ratio_to_free": r.ratio_to_free,
            "abs_err": r.abs_err,
        }),
    }
}

fn write_line(out: &mut dyn Write, value: &serde_json::Value) -> Result<(), SceneError> {
    writeln!(out, "{value}").map_err(|e| SceneError::Io(e.to_string()))
}

fn run(cli: Cli) -> Result<ExitCode, SceneError> {
    match cli.command {
        Command::PairEnergy(c) => {
            let scene = load(&c)?;
            let r = scene.pair_energy()?;
            write_line(&mut *output(c.out.as_deref())?, &energy_record(&r, scene.options.units))?;
        }
        Command::SelfEnergy(c) => {
            let scene = load(&c)?;
            let r = scene.self_energy()?;
            write_line(&mut *output(c.out.as_deref())?, &energy_record(&r, scene.options.units))?;
        }
        Command::Force(c) => {
            let scene = load(&c)?;
            let f = scene.force()?;
            let record = json!({
                "force_newtons": f.force,
                "local_field_factor": f.local_field_factor_applied,
                "abs_err": f.abs_err,
            });
            write_line(&mut *output(c.out.as_deref())?, &record)?;
        }
        Command::Sweep { common, param, from, to, points, param2, from2, to2, points2 } => {
            let scene = load(&common)?;
            let axis = SweepAxis::new(param, from, to, points);
            let axis2 = match (param2, from2, to2) {
                (Some(p), Some(a), Some(b)) => Some(SweepAxis::new(p, a, b, points2)),
                _ => None,
            };
            let rows = run_sweep(&scene, &axis, axis2.as_ref())?;
            let mut out = output(common.out.as_deref())?;
            write_sweep_csv(&rows, axis2.is_some(), &mut out)?;
        }
        Command::Validate { suite, out } => {
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir).map_err(|e| SceneError::Io(format!("cannot create {}: {e}", dir.display())))?;
                for fig in figure_sweeps() {
                    let rows = fig.run()?;
                    let path = dir.join(format!("{}.csv", fig.name));
                    std::fs::write(&path, fig.csv(&rows)?)
                        .map_err(|e| SceneError::Io(format!("cannot write {}: {e}", path.display())))?;
                }
            }
            let mut all_passed = true;
            for report in run_suite(suite) {
                print!("{report}");
                all_passed &= report.passed();
            }
            println!("{}", if all_passed { "all criteria passed" } else { "some criteria FAILED" });
            return Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("[cli] cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
