use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use qmeter_core::comparison::Scenario;
use qmeter_core::protocol::{
    run_campaign, run_sweep, CampaignConfig, CampaignResult, GroundTruth, StateChoice, SweepRow,
};
use qmeter_core::verify;

const VERSION: &str = env!("QMETER_VERSION");

#[derive(Parser)]
#[command(name = "qmeter", version = VERSION, about = "Unambiguous comparison of quantum measurement devices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the closed-form identities; exits 1 if any fails.
    Verify {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo campaign and write its JSON result.
    Simulate {
        #[arg(long, env = "QMETER_SEED")]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, value_enum, default_value_t = ScenarioArg::UnlabeledQubit)]
        scenario: ScenarioArg,
        /// Local dimension; labeled scenario only.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, value_enum, default_value_t = TestStateArg::Optimal)]
        test_state: TestStateArg,
        #[arg(long, default_value_t = 1)]
        kappa_index: usize,
        /// JSON density matrix, see docs/test_state.schema.json.
        #[arg(long)]
        state_file: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TruthArg::Both)]
        ground_truth: TruthArg,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses all available cores.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Fixed-pair angle sweep with the optimal qubit state, written as CSV.
    Sweep {
        #[arg(long, env = "QMETER_SEED")]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Comma-separated angles in radians; defaults to 33 points on [0, pi/2].
        #[arg(long, value_delimiter = ',')]
        theta_grid: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Render a campaign JSON or sweep CSV as text.
    Report { input: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Labeled,
    UnlabeledQubit,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestStateArg {
    Optimal,
    Kappa,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum TruthArg {
    Equal,
    Different,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => io::stdout()
            .write_all(text.as_bytes())
            .context("cannot write to stdout"),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Verify { format, out } => {
            let report = verify::run()?;
            let text = match format {
                Format::Text => report.render_text(),
                Format::Json => serde_json::to_string_pretty(&report)? + "\n",
            };
            emit(out.as_deref(), &text)?;
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Simulate {
            seed,
            trials,
            scenario,
            dim,
            test_state,
            kappa_index,
            state_file,
            ground_truth,
            out,
            workers,
        } => {
            let scenario = match (scenario, dim) {
                (ScenarioArg::Labeled, d) => Scenario::Labeled {
                    dim: d.unwrap_or(2),
                },
                (ScenarioArg::UnlabeledQubit, None | Some(2)) => Scenario::UnlabeledQubit,
                (ScenarioArg::UnlabeledQubit, Some(d)) => {
                    bail!("the unlabeled scenario is defined for qubits only (got --dim {d})")
                }
            };
            let test_state = match (test_state, state_file) {
                (TestStateArg::Optimal, None) => StateChoice::Optimal,
                (TestStateArg::Kappa, None) => StateChoice::Kappa { index: kappa_index },
                (TestStateArg::Custom, Some(path)) => StateChoice::Custom { path },
                (TestStateArg::Custom, None) => bail!("--test-state custom needs --state-file"),
                (_, Some(_)) => bail!("--state-file is only used with --test-state custom"),
            };
            let ground_truth = match ground_truth {
                TruthArg::Equal => GroundTruth::Equal,
                TruthArg::Different => GroundTruth::Different,
                TruthArg::Both => GroundTruth::Both,
            };
            let config = CampaignConfig {
                scenario,
                trials,
                seed,
                ground_truth,
                test_state,
            };
            let mut result = run_campaign(&config, workers)?;
            result.version = VERSION.to_string();
            emit(
                out.as_deref(),
                &(serde_json::to_string_pretty(&result)? + "\n"),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            seed,
            trials,
            theta_grid,
            out,
            workers,
        } => {
            let thetas = theta_grid.unwrap_or_else(|| {
                (0..=32)
                    .map(|i| i as f64 * std::f64::consts::FRAC_PI_2 / 32.0)
                    .collect()
            });
            let rows = run_sweep(&thetas, trials, seed, workers)?;
            let mut writer = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            for row in &rows {
                writer.serialize(row)?;
            }
            let bytes = writer.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
            emit(out.as_deref(), std::str::from_utf8(&bytes)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { input } => {
            let text = fs::read_to_string(&input)
                .with_context(|| format!("cannot read {}", input.display()))?;
            let rendered = if text.trim_start().starts_with('{') {
                let result: CampaignResult = serde_json::from_str(&text)
                    .with_context(|| format!("{} is not a campaign result", input.display()))?;
                render_campaign(&result)
            } else {
                let mut reader = csv::Reader::from_reader(text.as_bytes());
                let rows = reader
                    .deserialize()
                    .collect::<Result<Vec<SweepRow>, _>>()
                    .with_context(|| format!("{} is not a sweep table", input.display()))?;
                render_sweep(&rows)
            };
            emit(None, &rendered)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn render_campaign(r: &CampaignResult) -> String {
    let mut out = String::new();
    out += &format!("qmeter {} campaign\n", r.version);
    out += &format!(
        "scenario: {}  test state: {}  seed: {}  trials: {}\n",
        r.config.scenario, r.config.test_state, r.seed, r.num_trials
    );
    out += &format!("conclusive classes: {}\n", r.conclusive_classes.join(" | "));
    out += &format!("analytic success: {:.6}\n", r.analytic_success);
    for (name, tally) in [
        ("devices differ", &r.different),
        ("devices equal", &r.equal),
    ] {
        let Some(t) = tally else { continue };
        out += &format!("{name}:\n");
        for (class, n) in &t.class_counts {
            out += &format!("  {class:<10} {n:>12}\n");
        }
        out += &format!(
            "  different verdicts: {} ({:.6} ± {:.6})\n",
            t.different_verdicts, t.rate, t.standard_error
        );
    }
    if let (Some(p), Some(se)) = (r.success_estimate, r.standard_error) {
        let z = if se > 0.0 {
            (p - r.analytic_success) / se
        } else {
            0.0
        };
        out += &format!("success estimate: {p:.6} ± {se:.6} (z = {z:+.2})\n");
    }
    if let Some(fp) = r.false_positives {
        out += &format!("false positives: {fp}\n");
    }
    out
}

fn render_sweep(rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{:>10} {:>10} {:>10} {:>10} {:>8}\n",
        "theta", "empirical", "analytic", "stderr", "z"
    );
    for r in rows {
        let z = if r.standard_error > 0.0 {
            (r.empirical - r.analytic) / r.standard_error
        } else {
            0.0
        };
        out += &format!(
            "{:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>+8.2}\n",
            r.theta, r.empirical, r.analytic, r.standard_error, z
        );
    }
    out
}
