use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vertfe::commands::{self, thread_count};
use vertfe::error::{CliError, EXIT_OK};
use vertfe_core::fem::{LinearSolver, StrainMeasure, Tangent};
use vertfe_core::material::ModelVariant;
use vertfe_core::mesh::{Axis, SignedAxis};
use vertfe_core::pipeline::{Calibration, LoadPoint, PipelineConfig};
use vertfe_core::segment::Connectivity;

/// Finite-element failure-load estimation for vertebral bodies.
#[derive(Parser)]
#[command(name = "vertfe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom volume from a JSON spec.
    Phantom {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the ground-truth record (inserts, densities) here.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Fit grey→density from calibration inserts and write a density grid.
    Calibrate {
        input: PathBuf,
        /// Inserts as a JSON list of samples or a phantom truth record.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        calibration_out: Option<PathBuf>,
    },
    /// Threshold, keep the largest component and close a density grid.
    Segment {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = vertfe_core::pipeline::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_parser = parse_connectivity, default_value = "face6")]
        connectivity: Connectivity,
        #[arg(long, default_value_t = 1)]
        close_radius: usize,
    },
    /// Build the finite-element mesh and material map.
    Mesh {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        materials_out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the full chain on one or more specimens.
    Pipeline {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Result file for a single input; standard output when omitted.
        #[arg(long, conflicts_with = "out_dir")]
        out: Option<PathBuf>,
        /// Write `<specimen>.json` per input into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also write mesh, materials, solution and displacements.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Agreement statistics for a study table.
    Stats {
        /// Study table CSV; the embedded table when omitted.
        table: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Configuration file plus per-field overrides.
#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration; defaults follow `--model`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration to standard error.
    #[arg(long)]
    print_config: bool,
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelVariant>,
    #[arg(long, value_parser = parse_axis)]
    axial: Option<Axis>,
    /// Anterior direction, e.g. `+y` or `-x`.
    #[arg(long, value_parser = parse_signed_axis, allow_hyphen_values = true)]
    anterior: Option<SignedAxis>,
    /// Calibrate from inserts (JSON list or phantom truth record).
    #[arg(long)]
    calibration_from: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_parser = parse_connectivity)]
    connectivity: Option<Connectivity>,
    #[arg(long)]
    close_radius: Option<usize>,
    #[arg(long)]
    band_fraction: Option<f64>,
    #[arg(long)]
    pmma_thickness: Option<f64>,
    #[arg(long)]
    target_spacing: Option<f64>,
    #[arg(long)]
    no_floor_ensam: bool,
    #[arg(long)]
    bin_step: Option<f64>,
    #[arg(long, value_parser = parse_solver)]
    solver: Option<LinearSolver>,
    #[arg(long)]
    cg_rel_tol: Option<f64>,
    #[arg(long)]
    cg_iter_factor: Option<usize>,
    #[arg(long, value_parser = parse_measure)]
    measure: Option<StrainMeasure>,
    #[arg(long, value_parser = parse_load_point)]
    load_point: Option<LoadPoint>,
    #[arg(long)]
    reference_load: Option<f64>,
    #[arg(long)]
    eps_crit: Option<f64>,
    #[arg(long)]
    v_crit: Option<f64>,
    #[arg(long)]
    increments: Option<usize>,
    #[arg(long)]
    target_strain: Option<f64>,
    #[arg(long)]
    newton_tol: Option<f64>,
    #[arg(long)]
    max_newton: Option<usize>,
    #[arg(long, value_parser = parse_tangent)]
    tangent: Option<Tangent>,
}

fn pick<T>(options: &[(&str, T)], what: &str) -> impl Fn(&str) -> Result<T, String> + Clone + Send + Sync + 'static
where
    T: Clone + Send + Sync + 'static,
{
    let options: Vec<(String, T)> = options.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    let what = what.to_string();
    move |s: &str| {
        let key = s.to_ascii_lowercase();
        options.iter().find(|(k, _)| *k == key).map(|(_, v)| v.clone()).ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(k, _)| k.as_str()).collect();
            format!("unknown {what} `{s}`; expected one of {}", names.join(", "))
        })
    }
}

fn parse_model(s: &str) -> Result<ModelVariant, String> {
    pick(&[("ensam", ModelVariant::Ensam), ("lyon", ModelVariant::Lyon)], "model")(s)
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    pick(&[("x", Axis::X), ("y", Axis::Y), ("z", Axis::Z)], "axis")(s)
}

fn parse_signed_axis(s: &str) -> Result<SignedAxis, String> {
    let (positive, rest) = match s.as_bytes().first() {
        Some(b'-') => (false, &s[1..]),
        Some(b'+') => (true, &s[1..]),
        _ => (true, s),
    };
    Ok(SignedAxis { axis: parse_axis(rest)?, positive })
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    pick(
        &[
            ("face6", Connectivity::Face6),
            ("6", Connectivity::Face6),
            ("vertex26", Connectivity::Vertex26),
            ("26", Connectivity::Vertex26),
        ],
        "connectivity",
    )(s)
}

fn parse_solver(s: &str) -> Result<LinearSolver, String> {
    pick(&[("pcg", LinearSolver::Pcg), ("direct", LinearSolver::Direct)], "solver")(s)
}

fn parse_measure(s: &str) -> Result<StrainMeasure, String> {
    pick(&[("von-mises", StrainMeasure::VonMises), ("min-principal", StrainMeasure::MinPrincipal)], "strain measure")(s)
}

fn parse_load_point(s: &str) -> Result<LoadPoint, String> {
    pick(&[("anterior-third", LoadPoint::AnteriorThird), ("centroid", LoadPoint::Centroid)], "load point")(s)
}

fn parse_tangent(s: &str) -> Result<Tangent, String> {
    pick(&[("consistent", Tangent::Consistent), ("elastic", Tangent::Elastic)], "tangent")(s)
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => commands::load_config(p)?,
            None => PipelineConfig::for_model(self.model.unwrap_or(ModelVariant::Ensam)),
        };
        if let Some(m) = self.model {
            c.model = m;
        }
        if let Some(a) = self.axial {
            c.orientation.axial = a;
        }
        if let Some(a) = self.anterior {
            c.orientation.anterior = a;
        }
        if let Some(p) = &self.calibration_from {
            c.calibration = Calibration::Inserts(commands::load_samples(p)?);
        }
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { c.$f = v; } )*};
        }
        set!(
            threshold,
            connectivity,
            close_radius,
            band_fraction,
            pmma_thickness,
            target_spacing,
            bin_step,
            solver,
            cg_rel_tol,
            cg_iter_factor,
            measure,
            load_point,
            reference_load,
            eps_crit,
            v_crit,
            increments,
            target_strain,
            newton_tol,
            max_newton,
            tangent
        );
        if self.no_floor_ensam {
            c.no_floor_ensam = true;
        }
        c.validate()?;
        if self.print_config {
            eprintln!("{}", serde_json::to_string_pretty(&c).expect("serialisable config"));
        }
        Ok(c)
    }
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serialisable value"));
}

fn run_pipeline(
    inputs: &[PathBuf],
    out: Option<&Path>,
    out_dir: Option<&Path>,
    dump_dir: Option<&Path>,
    cfg: &PipelineConfig,
) -> Result<(), CliError> {
    if let Some(dir) = out_dir {
        let results = commands::batch(inputs, cfg, dir, dump_dir.is_some(), thread_count())?;
        let mut first = None;
        for (input, r) in results {
            match r {
                Ok(path) => println!("{}", path.display()),
                Err(e) => {
                    eprintln!("{}: {}", input.display(), e.to_json());
                    first.get_or_insert(e);
                }
            }
        }
        return first.map_or(Ok(()), Err);
    }
    if inputs.len() != 1 {
        return Err(CliError::usage("several inputs need --out-dir"));
    }
    let rec = commands::pipeline(&inputs[0], cfg, dump_dir)?;
    match out {
        Some(p) => commands::write_text(p, &rec.to_json())?,
        None => print!("{}", rec.to_json()),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Phantom { spec, out, truth } => {
            commands::phantom(&spec, &out, truth.as_deref())?;
        }
        Command::Calibrate { input, samples, out, calibration_out } => {
            print_json(&commands::calibrate(&input, &samples, &out, calibration_out.as_deref())?);
        }
        Command::Segment { input, out, threshold, connectivity, close_radius } => {
            let mask = commands::segment(&input, &out, threshold, connectivity, close_radius)?;
            println!("{}", mask.count());
        }
        Command::Mesh { input, out, materials_out, config } => {
            let cfg = config.resolve()?;
            print_json(&commands::mesh(&input, &cfg, &out, materials_out.as_deref())?);
        }
        Command::Pipeline { inputs, out, out_dir, dump_dir, config } => {
            let cfg = config.resolve()?;
            run_pipeline(&inputs, out.as_deref(), out_dir.as_deref(), dump_dir.as_deref(), &cfg)?;
        }
        Command::Stats { table, out_dir } => {
            commands::stats(table.as_deref(), &out_dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_OK);
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::usage(first).to_json());
            eprintln!("{msg}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn overrides_apply_on_top_of_model_defaults() {
        let cli = Cli::try_parse_from([
            "vertfe",
            "pipeline",
            "x.vgrid",
            "--model",
            "lyon",
            "--anterior",
            "-x",
            "--bin-step",
            "0",
        ])
        .unwrap();
        let Command::Pipeline { config, .. } = cli.command else { panic!("pipeline expected") };
        let c = config.resolve().unwrap();
        assert_eq!(c.model, ModelVariant::Lyon);
        assert_eq!(c.bin_step, 0.0);
        assert_eq!(c.orientation.anterior, SignedAxis { axis: Axis::X, positive: false });
        assert_eq!(c.increments, PipelineConfig::lyon().increments);
    }
}
