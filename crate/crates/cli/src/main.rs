//! `ctc-boxlab`: build boxes, test them, run CTC circuits and singlet Monte Carlo.
//!
//! Exit codes: 0 the checked property holds, 1 it fails, 2 bad input or
//! parameters, 3 a fixed-point solve did not converge.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use ctc_boxlab::boxworld::{
    chsh_success, deterministic_box, is_bell_local, is_no_signaling, isotropic_chsh_box, pr_box,
    Behavior,
};
use ctc_boxlab::ctc_circuits::{pr_ctc_circuit, run_circuit, run_inputs, CtcCircuit, PartyOp};
use ctc_boxlab::ctc_engine::{evolve, CtcInstance};
use ctc_boxlab::sampling;
use ctc_boxlab::zigzag::{
    for_each_draw, singlet_summary, zigzag_decomposition, AngleGrid, Protocol, SampleRow,
};
use ctc_boxlab::Error as CoreError;

const THREADS_ENV: &str = "CTC_BOXLAB_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "ctc-boxlab",
    version,
    about = "Nonlocal boxes, Deutsch CTCs and singlet simulations"
)]
struct Cli {
    /// Seed for every random choice (deviations, Monte Carlo).
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Monte Carlo samples per direction.
    #[arg(long, global = true, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    /// Numerical tolerance.
    #[arg(long, global = true, default_value_t = 1e-9, value_parser = positive_f64)]
    tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the output here instead of stdout. For `box` this receives
    /// the behavior file and the report still goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Construct a behavior.
    Box {
        #[command(subcommand)]
        kind: BoxKind,
    },
    /// Check a property of a behavior file (JSON or CSV).
    Test {
        file: PathBuf,
        #[arg(value_enum)]
        which: Property,
    },
    /// Evolve a circuit (or a raw CTC instance) through its CTC.
    Ctc(CtcArgs),
    /// Singlet correlations by Monte Carlo.
    Zigzag(ZigzagArgs),
}

#[derive(Subcommand, Debug)]
enum BoxKind {
    /// The PR box.
    Pr,
    /// `a = f(x)`, `b = g(y)`.
    Deterministic {
        /// Comma-separated outputs, one per input of Alice.
        #[arg(long, value_delimiter = ',', required = true)]
        f: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        g: Vec<usize>,
        /// Output alphabet sizes; default one past the largest output.
        #[arg(long)]
        a_size: Option<usize>,
        #[arg(long)]
        b_size: Option<usize>,
    },
    /// PR box mixed with white noise; `p` is the CHSH success probability.
    Isotropic {
        #[arg(long)]
        p: f64,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Property {
    /// No-signaling.
    Ns,
    /// Bell-local (LP over deterministic strategies).
    Local,
    /// CHSH success within the classical bound 3/4.
    Chsh,
}

#[derive(Args, Debug)]
struct CtcArgs {
    /// Circuit or instance JSON.
    #[arg(conflicts_with = "pr", required_unless_present = "pr")]
    file: Option<PathBuf>,
    /// Use the built-in PR-box circuit.
    #[arg(long)]
    pr: bool,
    /// A single input pair `x,y`.
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 1,
        conflicts_with = "all_inputs"
    )]
    inputs: Option<Vec<usize>>,
    /// Every input pair (the default).
    #[arg(long)]
    all_inputs: bool,
    /// Also replace the party operations by this many random ones (first
    /// half deterministic, rest stochastic) and check no-signaling.
    #[arg(long, default_value_t = 0)]
    deviations: usize,
}

#[derive(Args, Debug)]
struct ZigzagArgs {
    #[arg(value_parser = parse_protocol)]
    protocol: Protocol,
    /// Bob's setting at `2πk/n`, `k < n`; Alice's along x.
    #[arg(long, conflicts_with = "angle")]
    angle_grid: Option<usize>,
    /// A single angle in degrees between the settings.
    #[arg(long, allow_negative_numbers = true)]
    angle: Option<f64>,
    /// Dump every run as a JSONL row.
    #[arg(long)]
    jsonl: Option<PathBuf>,
    /// Add the payload report and the hidden-variable mutual-information
    /// estimate over this many Alice settings.
    #[arg(long)]
    decompose: Option<usize>,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err("must be positive and finite".into())
    }
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    s.parse()
}

/// Error carrying the exit code it should produce.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let convergence = error.chain().any(|e| {
            matches!(
                e.downcast_ref::<CoreError>(),
                Some(
                    CoreError::ConvergenceFailure { .. }
                        | CoreError::NoFixedPoint { .. }
                        | CoreError::NumericalRankAmbiguity { .. }
                )
            )
        });
        Failure {
            code: if convergence { 3 } else { 2 },
            error,
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        anyhow::Error::new(e).into()
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Box { kind } => cmd_box(cli, kind),
        Command::Test { file, which } => cmd_test(cli, file, *which),
        Command::Ctc(args) => cmd_ctc(cli, args),
        Command::Zigzag(args) => cmd_zigzag(cli, args),
    }
}

fn config(cli: &Cli, command: &str) -> Value {
    json!({
        "command": command,
        "seed": cli.seed,
        "samples": cli.samples,
        "tol": cli.tol,
        "format": cli.format,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn emit_json(path: Option<&Path>, value: &Value) -> anyhow::Result<()> {
    emit(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn build_box(kind: &BoxKind) -> anyhow::Result<Behavior> {
    Ok(match kind {
        BoxKind::Pr => pr_box(),
        BoxKind::Deterministic {
            f,
            g,
            a_size,
            b_size,
        } => {
            let a = a_size.unwrap_or_else(|| f.iter().max().map_or(1, |m| m + 1));
            let b = b_size.unwrap_or_else(|| g.iter().max().map_or(1, |m| m + 1));
            deterministic_box(f, g, a, b)?
        }
        BoxKind::Isotropic { p } => isotropic_chsh_box(*p)?,
    })
}

fn cmd_box(cli: &Cli, kind: &BoxKind) -> Outcome {
    let beh = build_box(kind)?;
    let chsh = chsh_success(&beh).ok();
    let ns = is_no_signaling(&beh, cli.tol);
    let local = is_bell_local(&beh, cli.tol).ok();
    if let Some(path) = &cli.out {
        let text = match cli.format {
            Format::Json => beh.to_json() + "\n",
            Format::Csv => beh.to_csv(),
        };
        emit(Some(path), &text)?;
    }
    match cli.format {
        Format::Json => emit_json(
            None,
            &json!({
                "config": config(cli, "box"),
                "behavior": beh,
                "chsh_success": chsh,
                "no_signaling": ns,
                "locality": local,
            }),
        )?,
        Format::Csv if cli.out.is_none() => emit(None, &beh.to_csv())?,
        Format::Csv => {}
    }
    Ok(true)
}

/// Reads a behavior from JSON (bare, or any object with a `behavior` field)
/// or from the `x,y,a,b,p` CSV table.
fn read_behavior(path: &Path) -> anyhow::Result<Behavior> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if !text.trim_start().starts_with('{') {
        return Behavior::from_csv(&text)
            .with_context(|| format!("parsing {} as CSV", path.display()));
    }
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let inner = match value.get("behavior") {
        Some(b) => b.clone(),
        None => value,
    };
    serde_json::from_value(inner).with_context(|| format!("{} is not a behavior", path.display()))
}

fn cmd_test(cli: &Cli, file: &Path, which: Property) -> Outcome {
    let beh = read_behavior(file)?;
    let out = cli.out.as_deref();
    let head =
        |holds: bool| json!({"config": config(cli, "test"), "property": which, "holds": holds});
    let holds = match which {
        Property::Ns => {
            let report = is_no_signaling(&beh, cli.tol);
            match cli.format {
                Format::Json => {
                    let mut v = head(report.holds);
                    v["report"] = serde_json::to_value(&report).map_err(anyhow::Error::from)?;
                    emit_json(out, &v)?
                }
                Format::Csv => emit(out, &report.to_csv())?,
            }
            report.holds
        }
        Property::Local => {
            let cert = is_bell_local(&beh, cli.tol)?;
            match cli.format {
                Format::Json => {
                    let mut v = head(cert.is_local);
                    v["certificate"] = serde_json::to_value(&cert).map_err(anyhow::Error::from)?;
                    emit_json(out, &v)?
                }
                Format::Csv => {
                    let mut text = String::from("strategy,weight\n");
                    for (i, w) in cert
                        .weights
                        .iter()
                        .flatten()
                        .enumerate()
                        .filter(|(_, &w)| w > 0.0)
                    {
                        text += &format!("{i},{w}\n");
                    }
                    emit(out, &text)?
                }
            }
            cert.is_local
        }
        Property::Chsh => {
            let score = chsh_success(&beh)?;
            let holds = score <= 0.75 + cli.tol;
            match cli.format {
                Format::Json => {
                    let mut v = head(holds);
                    v["chsh_success"] = json!(score);
                    v["classical_bound"] = json!(0.75);
                    emit_json(out, &v)?
                }
                Format::Csv => emit(
                    out,
                    &format!("chsh_success,classical_bound,holds\n{score},0.75,{holds}\n"),
                )?,
            }
            holds
        }
    };
    Ok(holds)
}

enum CtcSource {
    Circuit(CtcCircuit),
    Instance(CtcInstance),
}

fn read_ctc_source(path: &Path) -> anyhow::Result<CtcSource> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("epsilon").is_some() {
        let inst = serde_json::from_value(value)
            .with_context(|| format!("{} is not a CTC instance", path.display()))?;
        Ok(CtcSource::Instance(inst))
    } else {
        let circuit = serde_json::from_value(value)
            .with_context(|| format!("{} is not a CTC circuit", path.display()))?;
        Ok(CtcSource::Circuit(circuit))
    }
}

fn cmd_ctc(cli: &Cli, args: &CtcArgs) -> Outcome {
    let source = match &args.file {
        Some(path) => read_ctc_source(path)?,
        None => CtcSource::Circuit(pr_ctc_circuit()),
    };
    let circuit = match source {
        CtcSource::Instance(inst) => {
            if args.inputs.is_some() || args.deviations > 0 {
                return Err(anyhow!(
                    "--inputs and --deviations need a circuit, not a bare instance"
                )
                .into());
            }
            let report = evolve(&inst, cli.tol)?;
            match cli.format {
                Format::Json => emit_json(
                    cli.out.as_deref(),
                    &json!({"config": config(cli, "ctc"), "report": report}),
                )?,
                Format::Csv => {
                    let mut text = String::from("r,p\n");
                    for (r, p) in report.final_r.weights().iter().enumerate() {
                        text += &format!("{r},{p}\n");
                    }
                    emit(cli.out.as_deref(), &text)?
                }
            }
            return Ok(true);
        }
        CtcSource::Circuit(c) => c,
    };

    let mut report = json!({"config": config(cli, "ctc")});
    let mut holds = true;
    let behavior = if let Some(inputs) = &args.inputs {
        let [x, y] = inputs[..] else {
            return Err(anyhow!("--inputs takes exactly two values x,y").into());
        };
        let run = run_inputs(&circuit, x, y, cli.tol)?;
        report["runs"] = json!([run]);
        None
    } else {
        let run = run_circuit(&circuit, cli.tol)?;
        report["runs"] = json!(run.runs);
        report["behavior"] = json!(run.behavior);
        report["chsh_success"] = json!(chsh_success(&run.behavior).ok());
        report["no_signaling"] = json!(is_no_signaling(&run.behavior, cli.tol));
        Some(run.behavior)
    };

    if args.deviations > 0 {
        let sweep = deviation_sweep(cli, &circuit, args.deviations)?;
        holds = sweep.all_no_signaling;
        report["deviations"] = json!(sweep);
    }

    match cli.format {
        Format::Json => emit_json(cli.out.as_deref(), &report)?,
        Format::Csv => match behavior {
            Some(b) => emit(cli.out.as_deref(), &b.to_csv())?,
            None => {
                let run = &report["runs"][0];
                let mut text = String::from("x,y,r,p\n");
                for (r, p) in run["report"]["final_r"]["weights"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .enumerate()
                {
                    text += &format!("{},{},{r},{p}\n", run["x"], run["y"]);
                }
                emit(cli.out.as_deref(), &text)?
            }
        },
    }
    Ok(holds)
}

#[derive(Serialize)]
struct DeviationSweep {
    count: usize,
    deterministic: usize,
    stochastic: usize,
    all_no_signaling: bool,
    max_signaling: f64,
    signaling_cases: Vec<usize>,
}

fn deviation_sweep(
    cli: &Cli,
    circuit: &CtcCircuit,
    count: usize,
) -> Result<DeviationSweep, Failure> {
    let mut rng = sampling::stream(cli.seed, 0);
    let deterministic = count.div_ceil(2);
    let mut max_signaling: f64 = 0.0;
    let mut signaling_cases = Vec::new();
    for i in 0..count {
        let (aw, bw) = (circuit.alice().wires(), circuit.bob().wires());
        let (a, b) = if i < deterministic {
            (
                PartyOp::random_deterministic(aw, &mut rng)?,
                PartyOp::random_deterministic(bw, &mut rng)?,
            )
        } else {
            (
                PartyOp::random_stochastic(aw, &mut rng)?,
                PartyOp::random_stochastic(bw, &mut rng)?,
            )
        };
        let beh = run_circuit(&circuit.with_ops(a, b)?, cli.tol)?.behavior;
        let ns = is_no_signaling(&beh, cli.tol);
        max_signaling = max_signaling.max(ns.max_deviation());
        if !ns.holds {
            signaling_cases.push(i);
        }
    }
    Ok(DeviationSweep {
        count,
        deterministic,
        stochastic: count - deterministic,
        all_no_signaling: signaling_cases.is_empty(),
        max_signaling,
        signaling_cases,
    })
}

fn cmd_zigzag(cli: &Cli, args: &ZigzagArgs) -> Outcome {
    let grid = match (args.angle_grid, args.angle) {
        (_, Some(deg)) => AngleGrid::single(deg.to_radians()),
        (Some(n), None) => AngleGrid::uniform(n),
        (None, None) => AngleGrid::uniform(12),
    }
    .context("invalid angle grid")?;
    let summary = singlet_summary(args.protocol, &grid, cli.samples, cli.seed);

    if let Some(path) = &args.jsonl {
        write_jsonl(path, args.protocol, &grid, cli.samples, cli.seed)?;
    }

    let decomposition = match args.decompose {
        Some(n) => Some(zigzag_decomposition(
            args.protocol,
            n,
            cli.samples,
            cli.seed,
        )?),
        None => None,
    };

    match cli.format {
        Format::Json => {
            let mut report = json!({"config": config(cli, "zigzag"), "summary": summary});
            if let Some(d) = decomposition {
                report["decomposition"] = json!(d);
            }
            emit_json(cli.out.as_deref(), &report)?
        }
        Format::Csv => {
            let mut text =
                String::from("index,angle,estimate,std_error,expected,deviation,samples\n");
            for d in &summary.directions {
                text += &format!(
                    "{},{},{},{},{},{},{}\n",
                    d.index,
                    d.angle,
                    d.estimate,
                    d.std_error,
                    d.expected,
                    d.deviation,
                    summary.samples
                );
            }
            emit(cli.out.as_deref(), &text)?
        }
    }
    Ok(summary.all_within)
}

fn write_jsonl(
    path: &Path,
    protocol: Protocol,
    grid: &AngleGrid,
    samples: u64,
    seed: u64,
) -> anyhow::Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let mut result = Ok(());
    for (k, (x_hat, y_hat)) in grid.settings().enumerate() {
        for_each_draw(protocol, &x_hat, &y_hat, seed, k as u32, samples, |_, d| {
            if result.is_err() {
                return;
            }
            let row = SampleRow {
                x_hat,
                y_hat,
                seed,
                a: d.a,
                b: d.b,
                payload: d.payload_bits(protocol),
            };
            result = serde_json::to_writer(&mut w, &row)
                .map_err(anyhow::Error::from)
                .and_then(|()| w.write_all(b"\n").map_err(Into::into));
        });
        result.as_ref().map_err(|e| anyhow!("{e:#}"))?;
    }
    w.flush()?;
    Ok(())
}
