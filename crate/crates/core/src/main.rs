use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hadamard_core::config::{list_catalog, parse};
use hadamard_core::pipeline::{exit_code, run_config, run_dift, ErrorObject, Mode, RunOptions, Status};
use hadamard_core::Error;

#[derive(Parser)]
#[command(name = "hadamard", version, about = "Slopes of multiple Dirichlet eigenvalues under domain perturbations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for reports and branch tables.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Scenarios run concurrently up to this many threads.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Halve every resolution (smoke tests).
    #[arg(long, global = true)]
    quick: bool,
    /// Seed for the eigensolver start vectors; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the pencil and predict slopes.
    Predict { config: PathBuf },
    /// Predict, then measure slopes with finite elements and compare.
    Validate { config: PathBuf },
    /// Check and continue a named continuation example.
    Dift { example: String },
    /// List built-in domains, families, eigenspaces and examples.
    Catalog,
}

fn report_error(e: &Error) -> ExitCode {
    let obj = ErrorObject::from(e);
    eprintln!("{}", serde_json::json!({ "error": obj }));
    ExitCode::from(exit_code(e) as u8)
}

fn run_scenarios(cli: &Cli, config: &PathBuf, mode: Mode) -> Result<i32, Error> {
    let text = std::fs::read_to_string(config).map_err(|e| Error::Io(format!("{}: {e}", config.display())))?;
    let config = parse(&text)?;
    let outcome = run_config(
        &config,
        &RunOptions {
            mode,
            out_dir: cli.out_dir.clone(),
            workers: cli.workers,
            quick: cli.quick,
            seed: cli.seed,
        },
    )?;
    for r in &outcome.reports {
        let slopes = r
            .prediction
            .as_ref()
            .map(|p| format!("{:?}", p.simple_slopes))
            .unwrap_or_else(|| "-".into());
        let measured = r
            .validation
            .as_ref()
            .map(|v| {
                let m: Vec<String> = v.measured.iter().map(|s| format!("{:.6}±{:.1e}", s.slope, s.uncertainty)).collect();
                format!(" measured [{}]", m.join(", "))
            })
            .unwrap_or_default();
        println!("{:<24} {:?} predicted {slopes}{measured}", r.scenario.id, r.status);
        if let Some(e) = &r.error {
            eprintln!("{}", serde_json::json!({ "scenario": r.scenario.id, "error": e }));
        }
    }
    Ok(outcome.exit_code)
}

fn run_example(cli: &Cli, name: &str) -> Result<i32, Error> {
    let report = run_dift(name)?;
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| Error::Io(e.to_string()))?;
    let path = cli.out_dir.join(format!("{name}.dift.json"));
    let mut json = serde_json::to_vec_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    json.push(b'\n');
    std::fs::write(&path, json).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    match (&report.branch, &report.error) {
        (Some(b), _) => println!(
            "{name}: conditions hold; {} samples, max residual {:.2e}, tangency {:.2e}",
            b.t.len(),
            report.max_residual.unwrap_or(0.0),
            b.tangency
        ),
        (None, Some(e)) => {
            println!("{name}: {}", e.message);
            eprintln!("{}", serde_json::json!({ "example": name, "error": e }));
        }
        (None, None) => {}
    }
    Ok(if report.status == Status::Pass { 0 } else { report.status.exit_code() })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Predict { config } => run_scenarios(&cli, config, Mode::Predict),
        Command::Validate { config } => run_scenarios(&cli, config, Mode::Validate),
        Command::Dift { example } => run_example(&cli, example),
        Command::Catalog => {
            for name in list_catalog() {
                println!("{name}");
            }
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => report_error(&e),
    }
}
