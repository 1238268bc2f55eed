use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sqe_core::scenarios::{
    cluster_state, run_cluster_table, run_ghz_curve, run_loss_grid, run_white_noise, GhzConfig, LossConfig,
    NoiseConfig, ScenarioConfig, TableConfig,
};
use sqe_core::sqe::upper_bound;
use sqe_core::tensor::{read_json, TensorFile};
use sqe_core::witness::{sqe_report, GRTable, DEFAULT_MARGIN};
use sqe_core::{g_r_max, Partition, Result, SolverOptions, SqeError};

#[derive(Parser)]
#[command(name = "sqe", version, about = "Multipartite Schmidt-number witnesses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario config JSON; must name the same scenario as the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// g_r of the 4-qubit cluster state for every partition.
    Table {
        #[arg(long)]
        restarts: Option<usize>,
        /// Skip the alternating-solver cross-check.
        #[arg(long)]
        no_cross_check: bool,
    },
    /// White-noise thresholds for the cluster state.
    Noise {
        #[arg(long)]
        mu_step: Option<f64>,
    },
    /// Loss grid on two qubits of the cluster state.
    Loss {
        /// 1-based sites, e.g. `2,4`.
        #[arg(long, value_delimiter = ',')]
        pair: Option<Vec<usize>>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Dephased GHZ curve.
    Ghz {
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        truncation: Option<usize>,
        #[arg(long)]
        sites: Option<usize>,
    },
    /// g_r for an operator file and partition.
    Solve {
        #[arg(long)]
        operator: PathBuf,
        #[arg(long)]
        partition: String,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        /// Sweeps per alternating run.
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
    },
    /// Certification report for a state against a GR table.
    Certify {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        grtable: PathBuf,
        /// Test operator the table was built for; the cluster projector when absent.
        #[arg(long)]
        operator: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| SqeError::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn load_config(common: &Common, name: &str) -> Result<Option<ScenarioConfig>> {
    let Some(path) = &common.config else { return Ok(None) };
    let cfg = ScenarioConfig::from_json(&read(path)?)?;
    if cfg.name() != name {
        return Err(SqeError::InvalidArgument(format!("config is for scenario {:?}, not {name:?}", cfg.name())));
    }
    Ok(Some(cfg))
}

fn format_for(common: &Common, default: Format) -> Format {
    if let Some(f) = common.format {
        return f;
    }
    match common.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        Some("csv") => Format::Csv,
        Some("txt") => Format::Text,
        _ => default,
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn table_csv(t: &GRTable) -> String {
    let mut out = String::from("partition,r,g,method,exact\n");
    for e in &t.entries {
        out.push_str(&format!("{},{},{},{},{}\n", e.partition, e.r, e.g, e.method.as_str(), e.exact));
    }
    out
}

fn run(cli: &Cli) -> Result<String> {
    let common = &cli.common;
    match &cli.command {
        Command::Table { restarts, no_cross_check } => {
            let mut cfg = match load_config(common, "table")? {
                Some(ScenarioConfig::Table(c)) => c,
                _ => TableConfig::default(),
            };
            if let Some(r) = restarts {
                cfg.restarts = *r;
            }
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if *no_cross_check {
                cfg.cross_check = false;
            }
            let t = run_cluster_table(&cfg)?;
            Ok(match format_for(common, Format::Json) {
                Format::Json => t.table.to_json()? + "\n",
                Format::Csv => table_csv(&t.table),
                Format::Text => t.to_text(),
            })
        }
        Command::Noise { mu_step } => {
            let mut cfg = match load_config(common, "noise")? {
                Some(ScenarioConfig::Noise(c)) => c,
                _ => NoiseConfig::default(),
            };
            if let Some(s) = mu_step {
                cfg.mu_step = *s;
            }
            let res = run_white_noise(&cfg)?;
            Ok(match format_for(common, Format::Csv) {
                Format::Json => to_json(&res)?,
                Format::Csv => res.to_csv(),
                Format::Text => res.to_text(),
            })
        }
        Command::Loss { pair, resolution } => {
            let mut cfg = match load_config(common, "loss")? {
                Some(ScenarioConfig::Loss(c)) => c,
                _ => LossConfig::default(),
            };
            if let Some(p) = pair {
                let [a, b] = p[..] else {
                    return Err(SqeError::InvalidArgument(format!("--pair needs two sites, got {p:?}")));
                };
                cfg.pair = [a, b];
            }
            if let Some(r) = resolution {
                cfg.resolution = *r;
            }
            let res = run_loss_grid(&cfg)?;
            Ok(match format_for(common, Format::Csv) {
                Format::Json => to_json(&res)?,
                Format::Csv => res.to_csv(),
                Format::Text => res.to_text(),
            })
        }
        Command::Ghz { points, truncation, sites } => {
            let mut cfg = match load_config(common, "ghz")? {
                Some(ScenarioConfig::Ghz(c)) => c,
                _ => GhzConfig::default(),
            };
            if let Some(p) = points {
                cfg.points = *p;
            }
            if let Some(t) = truncation {
                cfg.truncation = *t;
            }
            if let Some(s) = sites {
                cfg.sites = *s;
            }
            let res = run_ghz_curve(&cfg)?;
            Ok(match format_for(common, Format::Csv) {
                Format::Json => to_json(&res)?,
                Format::Csv => res.to_csv(),
                Format::Text => res.to_text(),
            })
        }
        Command::Solve { operator, partition, r, restarts, max_iter } => {
            let l = read_json(&read(operator)?)?.into_operator();
            let p = Partition::parse(partition)?;
            let opts = SolverOptions {
                restarts: *restarts,
                max_iter: *max_iter,
                seed: common.seed.unwrap_or(SolverOptions::default().seed),
                ..Default::default()
            };
            let est = g_r_max(&l, &p, *r, &opts)?;
            let ub = upper_bound(&l, &p, *r)?;
            let report = est.solution.report();
            Ok(match format_for(common, Format::Json) {
                Format::Json => to_json(&json!({
                    "partition": report.partition,
                    "r": report.r,
                    "g": est.g,
                    "method": est.method,
                    "exact": est.exact,
                    "upper_bound": ub,
                    "converged": report.converged,
                    "restarts_used": report.restarts_used,
                    "residual_norm": report.residual_norm,
                    "orthogonality_violation": report.orthogonality_violation,
                }))?,
                Format::Csv => format!(
                    "partition,r,g,method,exact\n{},{},{},{},{}\n",
                    report.partition,
                    report.r,
                    est.g,
                    est.method.as_str(),
                    est.exact
                ),
                Format::Text => format!(
                    "{} r={} g={:.12} method={} exact={}\n",
                    report.partition,
                    report.r,
                    est.g,
                    est.method.as_str(),
                    est.exact
                ),
            })
        }
        Command::Certify { state, grtable, operator, margin } => {
            let rho = match read_json(&read(state)?)? {
                TensorFile::Pure(p) => p.to_density()?,
                TensorFile::Density(d) => d,
                TensorFile::Hermitian(h) => h.to_density()?,
            };
            let table = GRTable::from_json(&read(grtable)?)?;
            let l = match operator {
                Some(p) => read_json(&read(p)?)?.into_operator(),
                None => cluster_state().projector(),
            };
            let report = sqe_report(&rho, &l, &table, *margin)?;
            Ok(match format_for(common, Format::Json) {
                Format::Json => report.to_json()? + "\n",
                Format::Text => report.to_text(),
                Format::Csv => {
                    let mut out = String::from("partition,r,tr_rho_l,g_r,certified\n");
                    for e in &report.entries {
                        out.push_str(&format!("{},{},{},{},{}\n", e.partition, e.r, e.tr_rho_l, e.g_r, e.certified));
                    }
                    out
                }
            })
        }
    }
}

fn exit_code(e: &SqeError) -> u8 {
    match e {
        SqeError::SolverFailure { .. } | SqeError::NumericalInconsistency(_) | SqeError::Mismatch(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({"kind": "usage", "message": e.to_string()}));
            return ExitCode::from(1);
        }
    };
    let result = run(&cli).and_then(|text| match &cli.common.out {
        Some(path) => std::fs::write(path, text).map_err(SqeError::from),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"kind": e.kind(), "message": e.to_string()}));
            ExitCode::from(exit_code(&e))
        }
    }
}
