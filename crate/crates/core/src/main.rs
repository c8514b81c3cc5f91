use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use multistratum::dataset::{ChipDataset, ROWS_PER_COLUMN};
use multistratum::mixed::{
    fitted_means_and_lsd, reml_fit, simulate_response, MeansTerm, MixedModelSpec, RemlOptions, SimulationParams,
};
use multistratum::scenario::{Scenario, ScenarioConfig, PRESETS};
use multistratum::screening::{row_average, screen, screening_csv, screening_text, ScreeningConfig};
use multistratum::{Error, Exec, Result};

#[derive(Parser)]
#[command(
    name = "multistratum",
    version,
    about = "Multi-stratum two-level designs for microplate experiments"
)]
struct Cli {
    /// Run searches and Monte Carlo on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Built-in scenario.
    #[arg(long, default_value = "paper", conflicts_with = "config")]
    preset: String,
    /// TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "MULTISTRATUM_OUT", default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build the run table and write it with the alias and stratum reports.
    Construct {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        out: OutDir,
    },
    /// Print the alias report.
    Alias {
        #[command(flatten)]
        source: Source,
    },
    /// Print the stratum allocation.
    Strata {
        #[command(flatten)]
        source: Source,
        /// CSV instead of aligned text.
        #[arg(long)]
        csv: bool,
    },
    /// Screen row-averaged responses per stratum.
    Screen {
        #[command(flatten)]
        source: Source,
        /// Chip data CSV.
        #[arg(long)]
        data: PathBuf,
        /// Rows to average, e.g. 4,5; defaults to every complete row.
        #[arg(long, value_delimiter = ',')]
        rows: Vec<usize>,
        #[arg(long, default_value_t = 0.10)]
        alpha: f64,
        #[arg(long, default_value_t = ScreeningConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = ScreeningConfig::default().replicates)]
        replicates: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Fit the chip-level mixed model by REML.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.10)]
        alpha: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Fitted means and LSD for one term, e.g. gh, row or column.
    Means {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        term: String,
        #[arg(long, default_value_t = 0.10)]
        alpha: f64,
    },
    /// Simulate chip responses on a scenario's run table.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of chips to mark as missing.
        #[arg(long, default_value_t = 0)]
        missing: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Built-in scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// List the built-in scenarios.
    List,
    /// Print a built-in scenario as TOML, as a starting point for a config.
    Show { name: String },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}

fn load(source: &Source) -> Result<Scenario> {
    match &source.config {
        Some(p) => Scenario::build(ScenarioConfig::from_toml(&read(p)?)?),
        None => Scenario::preset(&source.preset),
    }
}

fn complete_rows(data: &ChipDataset) -> Vec<usize> {
    (1..=ROWS_PER_COLUMN)
        .filter(|&r| {
            let chips: Vec<_> = data.chips.iter().filter(|c| c.row == r).collect();
            !chips.is_empty() && chips.iter().all(|c| c.response.is_some())
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    match cli.command {
        Command::Construct { source, out } => {
            let s = load(&source)?;
            let report = s.stratum_report();
            for (name, text) in [
                ("run_table.csv", s.table.to_csv()),
                ("aliases.txt", s.alias_report(exec)),
                ("strata.csv", report.to_csv()),
            ] {
                let p = write(&out.out, name, &text)?;
                eprintln!("wrote {}", p.display());
            }
            print!("{}", report.to_text());
        }
        Command::Alias { source } => print!("{}", load(&source)?.alias_report(exec)),
        Command::Strata { source, csv } => {
            let r = load(&source)?.stratum_report();
            print!("{}", if csv { r.to_csv() } else { r.to_text() });
        }
        Command::Screen {
            source,
            data,
            rows,
            alpha,
            seed,
            replicates,
            out,
        } => {
            let s = load(&source)?;
            let chips = ChipDataset::from_csv(&read(&data)?)?;
            let rows = if rows.is_empty() { complete_rows(&chips) } else { rows };
            let values = row_average(&chips, &s.table, &rows)?;
            let cfg = ScreeningConfig {
                alpha,
                seed,
                replicates,
                ..ScreeningConfig::default()
            };
            let sets = screen(&values, &s.table, &s.stratum_report(), &cfg, exec)?;
            let p = write(&out.out, "screening.csv", &screening_csv(&sets))?;
            eprintln!("averaged rows {rows:?}; wrote {}", p.display());
            print!("{}", screening_text(&sets));
        }
        Command::Fit { data, alpha, out } => {
            let chips = ChipDataset::from_csv(&read(&data)?)?;
            let fit = reml_fit(&MixedModelSpec::microplate(), &chips, &RemlOptions::default())?;
            let mut files = vec![
                ("variance_components.csv".to_string(), fit.variance_csv()),
                ("fixed_effects.csv".to_string(), fit.fixed_csv()),
                ("f_tests.csv".to_string(), fit.ftest_csv()),
            ];
            for term in ["row", "column", "ah", "cd", "gh"] {
                let m = fitted_means_and_lsd(&fit, &MeansTerm::parse(term)?, alpha)?;
                files.push((format!("means_{term}.csv"), m.to_csv()));
            }
            for (name, text) in &files {
                let p = write(&out.out, name, text)?;
                eprintln!("wrote {}", p.display());
            }
            eprintln!(
                "{} observations, {} missing, {} REML iterations",
                fit.n_obs, fit.n_missing, fit.reml.iterations
            );
            print!("{}{}", fit.variance_csv(), fit.ftest_csv());
        }
        Command::Means { data, term, alpha } => {
            let chips = ChipDataset::from_csv(&read(&data)?)?;
            let fit = reml_fit(&MixedModelSpec::microplate(), &chips, &RemlOptions::default())?;
            print!(
                "{}",
                fitted_means_and_lsd(&fit, &MeansTerm::parse(&term)?, alpha)?.to_csv()
            );
        }
        Command::Simulate {
            source,
            seed,
            missing,
            out,
        } => {
            let s = load(&source)?;
            let params = SimulationParams {
                seed,
                missing,
                ..SimulationParams::microplate()
            };
            let d = simulate_response(&s.table, &params)?;
            let p = write(&out.out, "chip_data.csv", &d.to_csv())?;
            eprintln!(
                "wrote {} ({} chips, {} missing)",
                p.display(),
                d.len(),
                d.missing_count()
            );
        }
        Command::Scenario { action } => match action {
            ScenarioAction::List => {
                for name in PRESETS {
                    let c = ScenarioConfig::preset(name)?;
                    println!("{name:<6} {}", c.description);
                }
            }
            ScenarioAction::Show { name } => print!("{}", ScenarioConfig::preset(&name)?.to_toml()),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
