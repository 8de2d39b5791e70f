//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 internal fault.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::{Command, Distribution, ExperimentConfig, GateSetSpec, Mu};
use super::{execute, resolve_out_dir};
use crate::analysis::INPUT_STREAM;
use crate::circuit::{random_circuit, top_row_value, Circuit};
use crate::error::Error;
use crate::seeding::{derive_seed, rng_from_seed, substream};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAULT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "lscc", version, about = "Linear-scalar consistency checking protocol lab")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Honest prover batch
    Honest(ExpArgs),
    /// Cheating prover batch with error ledgers
    Cheat(ExpArgs),
    /// Expected-next-value estimate over generated inputs
    Env(ExpArgs),
    /// Generic cheat decay series and fits
    Decay(ExpArgs),
    /// Stability identity check for a synthetic distribution
    Claim1(ExpArgs),
    /// T-round vs two-round protocol on matched seeds
    Collapse(ExpArgs),
    /// Stability probability against alpha
    Probe(ExpArgs),
    /// Constant-factor band example
    Band(ExpArgs),
    /// Circuit files
    #[command(subcommand)]
    Circuit(CircuitCmd),
}

#[derive(Args, Debug)]
struct ExpArgs {
    /// JSON config; flags given on the command line override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Number of rounds
    #[arg(long = "T")]
    t: Option<usize>,
    /// Absolute precision, or `poly:d` for 1/n^d
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<Mu>,
    /// haar3, clifford_t, or named:g1,g2,...
    #[arg(long)]
    gate_set: Option<GateSetSpec>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Claim offset added to C(x)
    #[arg(long, allow_hyphen_values = true)]
    offset: Option<f64>,
    /// ag, identity, phase, block[:c], scale:c
    #[arg(long)]
    distribution: Option<Distribution>,
    /// Quantize prover messages to this many fractional bits
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Repeatable
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory (overrides LSCC_OUT_DIR and the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the canonical config here
    #[arg(long)]
    save_config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum CircuitCmd {
    /// Generate the input circuit of one run
    Gen {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long = "T", default_value_t = 20)]
        t: usize,
        #[arg(long, default_value = "haar3")]
        gate_set: GateSetSpec,
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
        /// Run index within the batch
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Write here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a circuit file
    Show { path: PathBuf },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Parameter(_) | Error::Parse { .. } | Error::InvalidSupport(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_FAULT,
    }
}

fn build_config(command: Command, a: ExpArgs) -> Result<(ExperimentConfig, Option<PathBuf>, Option<PathBuf>), Error> {
    let mut cfg = match &a.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.command != command {
                return Err(Error::Config {
                    path: "command".into(),
                    msg: format!(
                        "config is for `{}` but `{}` was invoked",
                        cfg.command.name(),
                        command.name()
                    ),
                });
            }
            cfg
        }
        None => ExperimentConfig::new(command),
    };
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.t {
        cfg.t = v;
    }
    if let Some(v) = a.mu {
        cfg.mu = v;
    }
    if let Some(v) = a.gate_set {
        cfg.gate_set = v;
    }
    if let Some(v) = a.seeds {
        cfg.seeds = v;
    }
    if let Some(v) = a.master_seed {
        cfg.master_seed = v;
    }
    if a.offset.is_some() {
        cfg.offset = a.offset;
    }
    if a.distribution.is_some() {
        cfg.distribution = a.distribution;
    }
    if a.bits.is_some() {
        cfg.bit_quantization = a.bits;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    if !a.alphas.is_empty() {
        cfg.alphas = a.alphas;
    }
    if let Some(v) = a.samples {
        cfg.samples = v;
    }
    if let Some(out) = &a.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok((cfg, a.out, a.save_config))
}

fn circuit(cmd: CircuitCmd, stdout: &mut dyn Write) -> Result<(), Error> {
    match cmd {
        CircuitCmd::Gen {
            n,
            t,
            gate_set,
            master_seed,
            index,
            out,
        } => {
            let seed = derive_seed(master_seed, index);
            let c = random_circuit(n, t, &gate_set.0, &mut rng_from_seed(substream(seed, INPUT_STREAM)))?;
            match out {
                Some(path) => {
                    std::fs::write(&path, c.to_text())?;
                    writeln!(stdout, "wrote {} (n={n} T={t} seed={seed})", path.display())?;
                }
                None => write!(stdout, "{}", c.to_text())?,
            }
        }
        CircuitCmd::Show { path } => {
            let text = std::fs::read_to_string(&path)?;
            let c = Circuit::from_text(&text)?;
            writeln!(stdout, "n={} T={}", c.num_qubits(), c.num_gates())?;
            for (i, g) in c.gates().iter().enumerate() {
                writeln!(stdout, "  g{} on {:?}", i + 1, g.support().indices())?;
            }
            let v = top_row_value(&c);
            writeln!(stdout, "top_row_value={:.12}{:+.12}i", v.re, v.im)?;
        }
    }
    Ok(())
}

/// Parse `argv` (program name first) and run it.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.exit_code() == 0 {
                let _ = write!(stdout, "{}", e.render());
                return EXIT_OK;
            }
            let _ = write!(stderr, "{}", e.render());
            return EXIT_CONFIG;
        }
    };
    let (command, args) = match cli.command {
        Sub::Honest(a) => (Command::Honest, a),
        Sub::Cheat(a) => (Command::Cheat, a),
        Sub::Env(a) => (Command::Env, a),
        Sub::Decay(a) => (Command::Decay, a),
        Sub::Claim1(a) => (Command::Claim1, a),
        Sub::Collapse(a) => (Command::Collapse, a),
        Sub::Probe(a) => (Command::Probe, a),
        Sub::Band(a) => (Command::Band, a),
        Sub::Circuit(cmd) => {
            return match circuit(cmd, stdout) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    exit_code(&e)
                }
            }
        }
    };
    let result = build_config(command, args).and_then(|(cfg, explicit_out, save)| {
        if let Some(path) = save {
            cfg.save(&path)?;
        }
        let out = explicit_out.unwrap_or_else(|| resolve_out_dir(&cfg));
        execute(&cfg, &out)
    });
    match result {
        Ok(o) => {
            let _ = writeln!(stdout, "{}", o.summary);
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
