use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pamctl::harness::{
    analyze_recording, compare_controllers, comparison_metrics_txt, emit_analysis, emit_comparison,
    emit_hysteresis, emit_plot_data, emit_sweep, ensure_dir, load_config, loop_svg,
    plant_describe_csv, read_columns, read_recording, read_run_csv, run_hysteresis, run_svg,
    run_sweep, sweep_metrics_txt, write_file, DeadzoneSettings, ExperimentPlan, PlanKind, Settings,
    SweepMode,
};
use pamctl::hysteresis::Protocol;
use pamctl::{ControllerKind, Error, Execution, Result};

#[derive(Parser, Debug)]
#[command(
    name = "pamctl",
    version,
    about = "Simulate and compare controllers for a dual-muscle bending actuator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key = value config file; see config/defaults.conf
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: out; `plant describe` prints to stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Base seed; repeat r uses seed + r
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    repeats: Option<u32>,

    /// Restricts compare and sweep to one controller; picks the controller for simulate
    #[arg(long, global = true, value_parser = parse_controller)]
    controller: Option<ControllerKind>,

    /// Disable sensor noise
    #[arg(long, global = true)]
    no_noise: bool,

    /// Timestamp jitter as a fraction of dt, in [0, 0.5)
    #[arg(long, global = true)]
    jitter: Option<f64>,

    /// Run repeats and sweep cells on one thread
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one controller and write its log, metrics and plots
    Simulate,
    /// Run PID, PID+FF and PID+AF on the same reference and seeds
    Compare,
    /// Amplitude or period sweep of seven-period sinusoids
    Sweep {
        #[arg(long, value_parser = parse_mode)]
        mode: SweepMode,
    },
    /// Triangular pressure protocol and dead-zone screening
    Hysteresis {
        #[arg(long, value_parser = parse_protocol, default_value = "a")]
        protocol: Protocol,
    },
    /// Dead-zone screening of any CSV with t, pressure and angle columns
    Analyze {
        #[arg(long)]
        input: PathBuf,
    },
    /// Plant utilities
    Plant {
        #[command(subcommand)]
        action: PlantAction,
    },
    /// Render an SVG from a run log or a (t, pressure, angle) recording
    Plot {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum PlantAction {
    /// Static ascending curve, angle against differential pressure
    Describe,
}

fn parse_controller(s: &str) -> std::result::Result<ControllerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<SweepMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_protocol(s: &str) -> std::result::Result<Protocol, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn settings(cli: &Cli) -> Result<Settings> {
    let mut st = match &cli.config {
        Some(path) => load_config(path)?,
        None => Settings::default(),
    };
    let run = &mut st.run;
    if let Some(seed) = cli.seed {
        run.noise_seed = seed;
    }
    if let Some(r) = cli.repeats {
        run.repeats = r;
    }
    if let Some(k) = cli.controller {
        run.controller_kind = k;
        st.controllers = vec![k];
    }
    if cli.no_noise {
        run.plant = run.plant.clone().without_noise();
    }
    if let Some(j) = cli.jitter {
        run.jitter_fraction = j;
    }
    Ok(st)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

// a closed pipe (`| head`) is not an error worth a panic
fn say(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        say(&format!("wrote {}\n", p.display()));
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "plot".into())
}

fn run(cli: &Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match &cli.command {
        Command::Simulate => {
            let plan = ExperimentPlan::from_settings(PlanKind::Single, &settings(cli)?)?;
            let results = compare_controllers(&plan.base, &plan.controllers, exec)?;
            let out = out_dir(cli);
            let mut written = emit_comparison(&out, &results)?;
            written.extend(emit_plot_data(&out, &results)?);
            say(&comparison_metrics_txt(&results));
            report(&written);
        }
        Command::Compare => {
            let plan = ExperimentPlan::from_settings(PlanKind::Compare, &settings(cli)?)?;
            let results = compare_controllers(&plan.base, &plan.controllers, exec)?;
            let written = emit_comparison(&out_dir(cli), &results)?;
            say(&comparison_metrics_txt(&results));
            report(&written);
        }
        Command::Sweep { mode } => {
            let plan = ExperimentPlan::from_settings(PlanKind::Sweep(*mode), &settings(cli)?)?;
            let rows = run_sweep(
                &plan.base,
                *mode,
                &plan.sweep_values,
                &plan.controllers,
                exec,
            )?;
            let written = emit_sweep(&out_dir(cli), *mode, &rows)?;
            say(&sweep_metrics_txt(*mode, &rows));
            report(&written);
        }
        Command::Hysteresis { protocol } => {
            let plan =
                ExperimentPlan::from_settings(PlanKind::Hysteresis(*protocol), &settings(cli)?)?;
            let dz = DeadzoneSettings::default();
            let (rec, analysis) = run_hysteresis(
                &plan.base.plant,
                &plan.base.cascade,
                *protocol,
                plan.base.dt_nominal,
                dz,
            )?;
            for (lp, r) in analysis.loops.iter().zip(&analysis.reports) {
                say(&format!(
                    "loop {}: amplitude {:.1} kPa, red {:.1} kPa, blue {:.1} kPa, {} flagged\n",
                    lp.cycle_index,
                    lp.amplitude(),
                    r.red_width(),
                    r.blue_width(),
                    r.flagged_count()
                ));
            }
            report(&emit_hysteresis(
                &out_dir(cli),
                *protocol,
                &rec,
                &analysis,
                dz,
            )?);
        }
        Command::Analyze { input } => {
            let dz = DeadzoneSettings::default();
            let analysis = analyze_recording(&read_recording(input)?, dz)?;
            say(&format!("{} loops\n", analysis.loops.len()));
            report(&emit_analysis(
                &out_dir(cli),
                &format!("{}_analysis", stem_of(input)),
                &analysis,
                dz,
            )?);
        }
        Command::Plant {
            action: PlantAction::Describe,
        } => {
            let csv = plant_describe_csv(&settings(cli)?.run.plant)?;
            match &cli.out {
                Some(dir) => {
                    ensure_dir(dir)?;
                    let path = dir.join("plant_static.csv");
                    write_file(&path, &csv)?;
                    report(&[path]);
                }
                None => say(&csv),
            }
        }
        Command::Plot { input } => {
            let out = out_dir(cli);
            ensure_dir(&out)?;
            let title = stem_of(input);
            let path = out.join(format!("{title}.svg"));
            // run logs carry gain ratios, so kp0 = 1 reads them back as ratios
            let svg = match read_run_csv(input, 1.0) {
                Ok(series) => run_svg(&series, 1.0, &title),
                Err(Error::InvalidInput(_)) => {
                    let rec = read_recording(input)?;
                    let flags = read_columns(input, &[&["flag"]])
                        .map(|mut c| c.remove(0).iter().map(|f| *f != 0.0).collect())
                        .unwrap_or_else(|_| vec![false; rec.t.len()]);
                    loop_svg(&rec.pressure, &rec.angle, &flags, &title)
                }
                Err(e) => return Err(e),
            };
            write_file(&path, &svg)?;
            report(&[path]);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
