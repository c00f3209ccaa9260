mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use args::*;
use commands::Failure;

/// Smooth set experiments: generate grids, measure them, build scaffolds and
/// run the invariance checks.
#[derive(Parser, Debug)]
#[command(name = "smoothset", version)]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "SMOOTHSET_WORKERS")]
    workers: Option<usize>,
    /// JSON object whose keys override the flags of the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a martingale set or a fixture as MGR1.
    Gen(GenArgs),
    /// Estimate the consecutive-cube modulus at each scale.
    Modulus(ModulusArgs),
    /// Build nested generations around a target density.
    Scaffold(ScaffoldArgs),
    /// Cells whose dyadic densities settle near a target.
    Eset(EsetArgs),
    /// Check the dilation, overlap, rotation or image bounds.
    Transform(TransformArgs),
    /// Box-counting slope of a density band or a scaffold.
    Boxdim(BoxdimArgs),
    /// Run the pipeline into a directory with a hashed manifest.
    Report(ReportArgs),
}

/// Overlays the keys of `config` on the flag values of `args`.
fn apply_config<T: Serialize + DeserializeOwned>(args: &T, config: &Option<PathBuf>) -> Result<T, Failure> {
    let Some(path) = config else {
        return serde_json::from_value(serde_json::to_value(args)?).map_err(Into::into);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let overrides: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let serde_json::Value::Object(overrides) = overrides else {
        return Err(Failure::Invalid(format!("{}: expected a JSON object", path.display())));
    };
    let mut merged = serde_json::to_value(args)?;
    let fields = merged.as_object_mut().expect("flag records are objects");
    for (k, v) in overrides {
        fields.insert(k, v);
    }
    serde_json::from_value(merged).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> commands::Outcome {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Failure::Invalid("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::Invalid(e.to_string()))?;
    }
    let c = &cli.config;
    match &cli.command {
        Command::Gen(a) => commands::gen(&apply_config(a, c)?),
        Command::Modulus(a) => commands::modulus(&apply_config(a, c)?),
        Command::Scaffold(a) => commands::scaffold(&apply_config(a, c)?),
        Command::Eset(a) => commands::eset(&apply_config(a, c)?),
        Command::Transform(a) => commands::transform(&apply_config(a, c)?),
        Command::Boxdim(a) => commands::boxdim(&apply_config(a, c)?),
        Command::Report(a) => commands::report(&apply_config(a, c)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::InvalidSubcommand
                | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 64,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code() as u8)
        }
    }
}
