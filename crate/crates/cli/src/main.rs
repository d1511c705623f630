mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dss_sync::analysis::{
    self, eta_limit, expected_cost_pv, expected_cost_reduced_range, expected_cost_t, expected_imin,
    expected_span, EtaLimit,
};
use dss_sync::schemes::{
    dedup_round, find_pattern, initial_config, pair_bits, tradeoff_point, Endpoint, SchemeKind,
    SyncState,
};
use dss_sync::simnet::{build_system, ledger_prediction, monte_carlo, MonteCarloOptions};
use dss_sync::{demo, CodeSpec, Error, FieldSpec, LinearDssCode};

use config::{load_file, ExperimentArgs, ExperimentConfig, Format};

#[derive(Parser)]
#[command(
    name = "dss-sync",
    version,
    about = "Edit synchronization for erasure-coded storage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a reference example and check it against the stored tables.
    Demo {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(demo::DEMOS))]
        name: String,
    },
    /// Monte Carlo estimate of the user-to-node cost of one scheme.
    Simulate(Common),
    /// Closed-form expectations over a grid of block lengths.
    Analyze(Common),
    /// Hybrid scheme cost against storage budget.
    Tradeoff {
        #[command(flatten)]
        common: Common,
        /// Number of evenly spaced budgets up to log2(ell) when --budget is absent.
        #[arg(long, default_value_t = 16)]
        steps: usize,
    },
    /// Remove the leftmost occurrence of a pattern from every block.
    Dedup {
        #[command(flatten)]
        common: Common,
        /// Blocks as comma-separated symbols, users separated by ';'.
        #[arg(long)]
        blocks: String,
        #[arg(long, value_delimiter = ',', required = true)]
        pattern: Vec<u64>,
    },
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    args: ExperimentArgs,
    /// JSON file with any of the flag settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Skip the consistency checks in simulate.
    #[arg(long)]
    no_verify: bool,
}

impl Common {
    fn resolve(self) -> Result<(ExperimentConfig, bool), Failure> {
        let base = match &self.config {
            Some(path) => load_file(path).map_err(Failure::Invalid)?,
            None => ExperimentArgs::default(),
        };
        let cfg = ExperimentConfig::resolve(self.args.over(base)).map_err(Failure::Invalid)?;
        Ok((cfg, !self.no_verify))
    }
}

enum Failure {
    Invalid(String),
    Mismatch(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::DemoMismatch(_) => Failure::Mismatch(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Invalid(s)
    }
}

fn emit<R: Serialize>(rows: &[R], format: Format, out: Option<&Path>) -> Result<(), Failure> {
    let bytes = match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)
                    .map_err(|e| Failure::Invalid(e.to_string()))?;
            }
            w.into_inner()
                .map_err(|e| Failure::Invalid(e.to_string()))?
        }
        Format::Json => {
            let mut s =
                serde_json::to_string_pretty(rows).map_err(|e| Failure::Invalid(e.to_string()))?;
            s.push('\n');
            s.into_bytes()
        }
    };
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| Failure::Invalid(e.to_string())),
    }
}

#[derive(Serialize)]
struct SimulateRow {
    scheme: &'static str,
    model: &'static str,
    ell: usize,
    #[serde(rename = "B")]
    users: usize,
    q: u64,
    trials: usize,
    mean_bits_user_node: f64,
    stderr: f64,
    analytic_prediction: Option<f64>,
    ratio: Option<f64>,
}

fn simulate(cfg: &ExperimentConfig, verify: bool) -> Result<Vec<SimulateRow>, Failure> {
    let ell = cfg.single_ell()?;
    let model = cfg.edit_model(ell)?;
    let params = cfg.system_params(ell)?;
    // surfaces parameter errors before any trial runs
    build_system(params, cfg.seed, 0)?;
    let options = MonteCarloOptions {
        verify_every: usize::from(verify),
    };
    let s = monte_carlo(params, &model, cfg.trials, cfg.seed, options)?;
    if let Some(e) = s.first_error {
        return Err(Failure::Invalid(format!(
            "{} of {} trials failed: {e}",
            s.failed, s.trials
        )));
    }
    if s.verify_failures > 0 {
        return Err(Failure::Mismatch(format!(
            "{} of {} checked trials left the nodes inconsistent",
            s.verify_failures, s.verified
        )));
    }
    let prediction = ledger_prediction(&params, &model)?;
    Ok(vec![SimulateRow {
        scheme: cfg.scheme.name(),
        model: cfg.model.name(),
        ell,
        users: cfg.users,
        q: cfg.q,
        trials: cfg.trials,
        mean_bits_user_node: s.pair_bits.mean,
        stderr: s.pair_bits.stderr,
        analytic_prediction: prediction,
        ratio: prediction.map(|p| s.pair_bits.mean / p),
    }])
}

#[derive(Serialize)]
struct AnalyzeRow {
    model: &'static str,
    ell: usize,
    #[serde(rename = "B")]
    users: usize,
    q: u64,
    expected_edits_per_user: f64,
    expected_imin: f64,
    expected_span: f64,
    span_fraction: f64,
    eta_limit: f64,
    eta_limit_kind: &'static str,
    t_bits: f64,
    pv_bits: f64,
    pv_over_t: f64,
    reduced_range_position_bits: f64,
    t_worst_case_bits: f64,
    p_bits: f64,
    p_storage_bits: f64,
    v_bits: f64,
    v_storage_bits: f64,
}

fn analyze(cfg: &ExperimentConfig) -> Result<Vec<AnalyzeRow>, Failure> {
    cfg.ells
        .iter()
        .map(|&ell| {
            let m = cfg.edit_model(ell)?;
            let span = expected_span(&m)?;
            let (t, pv) = (
                expected_cost_t(&m, cfg.q)?.bits,
                expected_cost_pv(&m, cfg.q)?.bits,
            );
            let (eta, kind) = match eta_limit(&m)? {
                EtaLimit::Exact(v) => (v, "exact"),
                EtaLimit::LowerBound(v) => (v, "lower_bound"),
            };
            let [ft, fp, fv] = analysis::scheme_features::<f64>(ell, cfg.q);
            Ok(AnalyzeRow {
                model: cfg.model.name(),
                ell,
                users: cfg.users,
                q: cfg.q,
                expected_edits_per_user: m.expected_edits_per_user(),
                expected_imin: expected_imin(&m)?,
                expected_span: span,
                span_fraction: span / ell as f64,
                eta_limit: eta,
                eta_limit_kind: kind,
                t_bits: t,
                pv_bits: pv,
                pv_over_t: pv / t,
                reduced_range_position_bits: expected_cost_reduced_range(&m)?,
                t_worst_case_bits: ft.comm_bits,
                p_bits: fp.comm_bits,
                p_storage_bits: fp.storage_bits,
                v_bits: fv.comm_bits,
                v_storage_bits: fv.storage_bits,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct TradeoffRow {
    budget: f64,
    gamma: f64,
    hybrid_bits: f64,
    hybrid_storage_bits: f64,
    scheme_p_bits: f64,
    scheme_v_bits: f64,
    scheme_v_storage_bits: f64,
    scheme_t_bits: f64,
    lower_bound_bits: f64,
}

fn tradeoff(cfg: &ExperimentConfig, steps: usize) -> Result<Vec<TradeoffRow>, Failure> {
    let ell = cfg.single_ell()?;
    FieldSpec::new(cfg.q)?;
    let budgets: Vec<f64> = match cfg.budget {
        Some(b) => vec![b],
        None => {
            if steps == 0 {
                return Err(Failure::Invalid("--steps must be positive".into()));
            }
            let top = (ell as f64).log2();
            (1..=steps).map(|i| top * i as f64 / steps as f64).collect()
        }
    };
    budgets
        .into_iter()
        .map(|b| {
            let t = tradeoff_point(ell, cfg.q, b)?;
            Ok(TradeoffRow {
                budget: t.budget,
                gamma: t.gamma,
                hybrid_bits: t.hybrid_bits,
                hybrid_storage_bits: t.hybrid_storage_bits,
                scheme_p_bits: t.scheme_p_bits,
                scheme_v_bits: t.scheme_v_bits,
                scheme_v_storage_bits: t.scheme_v_storage_bits,
                scheme_t_bits: t.scheme_t_bits,
                lower_bound_bits: t.lower_bound_bits,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct DedupRow {
    user: usize,
    /// 1-based start of the removed occurrence.
    found_at: Option<usize>,
    block: String,
    bits_to_nodes: u64,
}

fn parse_blocks(text: &str) -> Result<Vec<Vec<u64>>, Failure> {
    text.split(';')
        .map(|b| {
            b.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<u64>()
                        .map_err(|e| Failure::Invalid(format!("block symbol {v:?}: {e}")))
                })
                .collect()
        })
        .collect()
}

fn dedup(cfg: &ExperimentConfig, blocks: &str, pattern: &[u64]) -> Result<Vec<DedupRow>, Failure> {
    let blocks = parse_blocks(blocks)?;
    let k = blocks.len();
    let ell = blocks.iter().map(Vec::len).max().unwrap_or(0);
    if blocks.iter().any(|b| b.len() != ell) || ell == 0 {
        return Err(Failure::Invalid(
            "blocks must be nonempty and of equal length".into(),
        ));
    }
    // keep the configured redundancy n - k
    let n = k + cfg.n.saturating_sub(cfg.k).max(1);
    let code = if n == k + 1 {
        CodeSpec::single_parity(k, cfg.q)?
    } else {
        CodeSpec::rs_systematic(n, k, cfg.q)?
    };
    let field = code.field();
    let found: Vec<Option<usize>> = blocks
        .iter()
        .map(|b| find_pattern(&field.elems(b), &field.elems(pattern)))
        .collect();
    let config = initial_config(SchemeKind::V, field, k, ell, 0)?;
    let mut st = SyncState::new(code.clone(), config, blocks)?;
    let report = dedup_round(&mut st, pattern)?;
    if !st.verify(64)?.ok() {
        return Err(Failure::Mismatch(
            "nodes inconsistent after deduplication".into(),
        ));
    }
    Ok((0..k)
        .map(|s| DedupRow {
            user: s + 1,
            found_at: found[s].map(|p| p + 1),
            block: st
                .block(s)
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(" "),
            bits_to_nodes: code
                .connected_nodes(s)
                .into_iter()
                .map(|t| pair_bits(&report.messages, Endpoint::User(s), Endpoint::Node(t)))
                .sum(),
        })
        .collect())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Demo { name } => {
            let transcript = demo::run_demo(&name)?;
            print!("{transcript}");
            Ok(())
        }
        Command::Simulate(common) => {
            let (cfg, verify) = common.resolve()?;
            emit(&simulate(&cfg, verify)?, cfg.format, cfg.out.as_deref())
        }
        Command::Analyze(common) => {
            let (cfg, _) = common.resolve()?;
            emit(&analyze(&cfg)?, cfg.format, cfg.out.as_deref())
        }
        Command::Tradeoff { common, steps } => {
            let (cfg, _) = common.resolve()?;
            emit(&tradeoff(&cfg, steps)?, cfg.format, cfg.out.as_deref())
        }
        Command::Dedup {
            common,
            blocks,
            pattern,
        } => {
            let (cfg, _) = common.resolve()?;
            emit(
                &dedup(&cfg, &blocks, &pattern)?,
                cfg.format,
                cfg.out.as_deref(),
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Mismatch(msg)) => {
            eprintln!("mismatch: {msg}");
            ExitCode::from(2)
        }
    }
}
