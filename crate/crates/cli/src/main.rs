use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use dais::blr::exact_log_ml;
use dais::harness::{
    fit_loglog_slope, gen_blr_data, run_oracles, run_sweep, write_csv, ExperimentConfig,
    OracleOptions,
};
use dais::reversible::{
    initial_state, memory_report, reversible_backward, reversible_forward, FixedFormat,
    InfoBuffer, ReversibleMode, SeedState,
};
use dais::rng::SplitStream;
use dais::{
    dais_bound_mc, dais_chain, AnnealingSchedule, DaisError, StepSizeScheme, TransitionConfig,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_ORACLE: u8 = 4;

#[derive(Parser)]
#[command(name = "dais", version, about = "Differentiable annealed importance sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep (K, c) cells on synthetic regression data and write a CSV table.
    Sweep {
        /// TOML config; every key is optional.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run DAIS chains on synthetic regression data and print the bound.
    Chain {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        d: usize,
        #[arg(long = "K", short = 'k', default_value_t = 64)]
        k: usize,
        #[arg(long, default_value_t = 0.2)]
        eta: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of independent chains; more than one also reports a standard error.
        #[arg(long, default_value_t = 1)]
        chains: usize,
    },
    /// Run a reversible chain forward and back and compare with its start.
    CheckReversible {
        #[arg(long, default_value_t = 10)]
        d: usize,
        #[arg(long = "K", short = 'k', default_value_t = 1000)]
        k: usize,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fractional bits of the fixed-point state.
        #[arg(long, default_value_t = 48)]
        frac_bits: u32,
        /// Round-trip the information buffer through this file between passes.
        #[arg(long)]
        buffer_file: Option<PathBuf>,
    },
    /// Run the quadrature, unbiasedness, exact-vs-MC and lower-bound checks.
    Oracles {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Chains for the unbiasedness check.
        #[arg(long, default_value_t = 200_000)]
        unbiased_chains: usize,
        /// Chains for the exact-versus-Monte-Carlo check.
        #[arg(long, default_value_t = 1000)]
        mc_chains: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep { config, out } => sweep(config, out),
        Command::Chain { n, d, k, eta, gamma, seed, chains } => chain(n, d, k, eta, gamma, seed, chains),
        Command::CheckReversible { d, k, gamma, n, eta, seed, frac_bits, buffer_file } => {
            check_reversible(d, k, gamma, n, eta, seed, frac_bits, buffer_file)
        }
        Command::Oracles { seed, unbiased_chains, mc_chains } => oracles(seed, unbiased_chains, mc_chains),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

type CliResult = Result<(), (u8, String)>;

fn numerical(e: DaisError) -> (u8, String) {
    (EXIT_NUMERICAL, e.to_string())
}

fn failure(e: impl ToString) -> (u8, String) {
    (EXIT_FAILURE, e.to_string())
}

fn sweep(config: Option<PathBuf>, out: Option<PathBuf>) -> CliResult {
    let config = match &config {
        Some(path) => ExperimentConfig::from_file(path),
        None => Ok(ExperimentConfig::default()),
    }
    .and_then(|c| c.validate().map(|()| c))
    .map_err(|e| (EXIT_CONFIG, e.to_string()))?;

    let output = run_sweep(&config).map_err(numerical)?;
    match &out {
        Some(path) => {
            let file = File::create(path).map_err(failure)?;
            let mut w = BufWriter::new(file);
            write_csv(&output.rows, &mut w).and_then(|()| w.flush()).map_err(failure)?;
        }
        None => write_csv(&output.rows, io::stdout().lock()).map_err(failure)?,
    }

    let failed = output.rows.iter().filter(|r| r.error.is_some()).count();
    if out.is_some() {
        if let Some(eta) = output.tuned_eta {
            eprintln!("tuned step size {eta} at K = {}", config.k_grid[0]);
        }
        for &(c, a) in &output.bases {
            let rows: Vec<_> = output.rows.iter().filter(|r| r.c == c).cloned().collect();
            match fit_loglog_slope(&rows, config.k_grid[0]) {
                Ok(fit) => eprintln!(
                    "c = {c}: a = {a:.6}, slope {:.4} (theory {:.4}), r2 {:.4}",
                    fit.slope,
                    2.0 * c - 1.0,
                    fit.r2
                ),
                Err(e) => eprintln!("c = {c}: a = {a:.6}, no slope ({e})"),
            }
        }
    }
    for row in output.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("cell K = {}, c = {}: {}", row.k, row.c, row.error.as_deref().unwrap_or_default());
    }
    if !output.rows.is_empty() && failed == output.rows.len() {
        return Err((EXIT_NUMERICAL, "every sweep cell failed".into()));
    }
    Ok(())
}

fn chain(n: usize, d: usize, k: usize, eta: f64, gamma: f64, seed: u64, chains: usize) -> CliResult {
    let start = Instant::now();
    let model = gen_blr_data(n, d, seed).map_err(numerical)?;
    let target = model.target();
    let schedule = AnnealingSchedule::linear(k).map_err(numerical)?;
    let steps = StepSizeScheme::constant(eta, 0.0, k).map_err(numerical)?;
    let config = TransitionConfig::identity(gamma, d).map_err(numerical)?;
    let log_z = exact_log_ml(&model);
    let stream = SplitStream::new(seed).substream(1);

    if chains <= 1 {
        let (state, bound) = dais_chain(&target, &schedule, &steps, &config, stream).map_err(numerical)?;
        println!("L: {bound:.12}");
        println!("log Z: {log_z:.12}");
        println!("gap: {:.12}", log_z - bound);
        println!("final |theta|: {:.6}", state.theta.norm());
        println!("final |v|: {:.6}", state.v.norm());
    } else {
        let est = dais_bound_mc(&target, &schedule, &steps, &config, chains, stream).map_err(numerical)?;
        println!("mean L: {:.12}", est.mean);
        println!("stderr: {:.12}", est.stderr);
        println!("log Z: {log_z:.12}");
        println!("gap: {:.12}", log_z - est.mean);
    }
    println!("elapsed: {:.1} ms", start.elapsed().as_secs_f64() * 1e3);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn check_reversible(
    d: usize,
    k: usize,
    gamma: f64,
    n: usize,
    eta: f64,
    seed: u64,
    frac_bits: u32,
    buffer_file: Option<PathBuf>,
) -> CliResult {
    let model = gen_blr_data(n, d, seed).map_err(numerical)?;
    let target = model.target();
    let schedule = AnnealingSchedule::linear(k).map_err(numerical)?;
    let steps = StepSizeScheme::constant(eta, 0.0, k).map_err(numerical)?;
    let config = TransitionConfig::identity(gamma, d).map_err(numerical)?;
    let format = FixedFormat::new(frac_bits).map_err(numerical)?;
    let mode = ReversibleMode::FixedPoint(format);
    let s0 = SeedState(seed);

    let start = initial_state(&target, &config, s0, mode).map_err(numerical)?;
    let mut run = reversible_forward(&target, &schedule, &steps, &config, s0, mode, None).map_err(numerical)?;
    let size = run.buffer.size_bytes();
    let bits = run.buffer.payload_bits();
    let mut buffer = match &buffer_file {
        Some(path) => {
            run.buffer.save(path).map_err(failure)?;
            InfoBuffer::load(path).map_err(failure)?
        }
        None => std::mem::replace(&mut run.buffer, InfoBuffer::new(0)),
    };
    let (back, seed_back) = reversible_backward(&target, &schedule, &steps, &config, run.state, run.seed, &mut buffer)
        .map_err(numerical)?;
    let exact = back == start && seed_back == s0 && buffer.is_empty();
    let report = memory_report(d, k, gamma, 64, mode).map_err(numerical)?;

    println!("bit-exact: {exact}");
    println!("L: {:.12}", run.bound);
    println!("effective gamma: {}", run.effective_gamma);
    println!("buffer bytes: {size}");
    println!(
        "buffer bits per parameter per step: {:.6} (log2(1/gamma) = {:.6})",
        bits / (d * k) as f64,
        (1.0 / run.effective_gamma).log2()
    );
    println!(
        "memory vs storing every 64-bit state: {:.0} bits vs {:.0} bits (ratio {:.4})",
        report.reversible_bits, report.naive_bits, report.ratio
    );
    if let Some(path) = &buffer_file {
        println!("buffer file: {}", path.display());
    }
    if exact {
        Ok(())
    } else {
        Err((EXIT_FAILURE, "backward pass did not recover the initial state".into()))
    }
}

fn oracles(seed: u64, unbiased_chains: usize, mc_chains: usize) -> CliResult {
    let opts = OracleOptions { seed, unbiased_chains, mc_chains, ..OracleOptions::default() };
    let outcomes = run_oracles(&opts).map_err(numerical)?;
    let mut failed = 0;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        return Err((EXIT_ORACLE, format!("{failed} oracle check(s) failed")));
    }
    Ok(())
}
