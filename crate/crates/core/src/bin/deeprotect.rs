#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use deeprotect::autoencoder::{train_dataset, HyperParams};
use deeprotect::dataset::{load_csv, save_csv, synthesize, window, SensorStream, SynthSpec};
use deeprotect::evaluation::{evaluate, tradeoff_sweep, ClassifierSet, EvalReport};
use deeprotect::privacy::{protect, BudgetLedger, Mode, PrivacySpec, ReleaseSidecar};
use deeprotect::registry;
use deeprotect::{Autoencoder, Classifiers, Error, Result};

#[derive(Parser)]
#[command(name = "deeprotect", version, about = "Inference-aware perturbation of windowed sensor streams")]
struct Cli {
    /// JSON file with one object per command name; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic sensor CSV.
    Gen(GenArgs),
    /// Train the autoencoder stack and the evaluation classifiers.
    Train(TrainArgs),
    /// Release a perturbed copy of a sensor CSV.
    Perturb(PerturbArgs),
    /// Score a perturbed CSV against the original.
    Eval(EvalArgs),
    /// Sweep privacy budgets and modes.
    Bench(BenchArgs),
    /// Total budget of a ledger file.
    Budget(BudgetArgs),
    /// List catalogued sensor inferences.
    Registry(RegistryArgs),
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct GenArgs {
    /// RNG seed [default: 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Number of sensor columns [default: 3].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sensors: Option<usize>,
    /// Number of timestamps [default: 10000].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    /// Window length the labels are drawn for [default: 10].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<usize>,
    /// Output CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct TrainArgs {
    /// Input CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    /// Samples per window [default: 10].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<usize>,
    /// Hidden layer sizes, comma separated [default: 15,7].
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden: Option<Vec<usize>>,
    /// Learning rate [default: 0.1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    /// Weight of the utility terms [default: 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    /// Ridge regularizer of the embedded classifier [default: 0.1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    /// Coefficient of the squared weight norm [default: 0.0001].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    weight_decay: Option<f64>,
    /// KL sparsity weight; 0 disables it [default: 0].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sparsity_weight: Option<f64>,
    /// Target mean activation [default: 0.05].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sparsity_target: Option<f64>,
    /// Iterations per layer [default: 500].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    iters: Option<usize>,
    /// Minibatch size [default: full batch up to 1000 windows, else 32].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    /// RNG seed [default: 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Ridge regularizer of the evaluation classifiers [default: 0.000001].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    clf_beta: Option<f64>,
    /// Where to write the stack JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stack_out: Option<PathBuf>,
    /// Where to write the classifiers JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    classifiers_out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct PerturbArgs {
    /// Input CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    /// Trained stack JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stack: Option<PathBuf>,
    /// Required for mode2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    classifiers: Option<PathBuf>,
    /// Privacy budget, finite and > 0.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    /// baseline, mode1 or mode2 [default: mode2].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    /// RNG seed [default: 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Output CSV; the sidecar goes to `<out>.json`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct EvalArgs {
    /// Original CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    original: Option<PathBuf>,
    /// Released CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    perturbed: Option<PathBuf>,
    /// Defaults to `<perturbed>.json`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sidecar: Option<PathBuf>,
    /// Trained stack JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stack: Option<PathBuf>,
    /// Classifiers JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    classifiers: Option<PathBuf>,
    /// JSON-lines report file; stdout when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct BenchArgs {
    /// Input CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    /// Trained stack JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stack: Option<PathBuf>,
    /// Classifiers JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    classifiers: Option<PathBuf>,
    /// Budgets, comma separated [default: 0.5,1,2,5,10].
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilons: Option<Vec<f64>>,
    /// Modes, comma separated [default: baseline,mode1,mode2].
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    modes: Option<Vec<String>>,
    /// Base RNG seed [default: 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Optional CSV table of the sweep.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    csv: Option<PathBuf>,
    /// JSON-lines report file; stdout when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct BudgetArgs {
    /// Ledger JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ledger: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RegistryArgs {
    /// Show only this inference; unknown names print nothing.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    /// Show only inferences using this sensor.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sensor: Option<String>,
}

const DEFAULT_SEED: u64 = 1;
const DEFAULT_CLF_BETA: f64 = 1e-6;
const DEFAULT_EPSILONS: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let detail = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("ERROR usage: {detail}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code(), single_line(&e.to_string()));
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => Some(read_json::<Value>(path)?),
        None => None,
    };
    let section = |name: &str| config.as_ref().and_then(|c| c.get(name)).cloned();
    match cli.command {
        Command::Gen(a) => cmd_gen(merge(a, section("gen"))?),
        Command::Train(a) => cmd_train(merge(a, section("train"))?),
        Command::Perturb(a) => cmd_perturb(merge(a, section("perturb"))?),
        Command::Eval(a) => cmd_eval(merge(a, section("eval"))?),
        Command::Bench(a) => cmd_bench(merge(a, section("bench"))?),
        Command::Budget(a) => cmd_budget(merge(a, section("budget"))?),
        Command::Registry(a) => cmd_registry(merge(a, section("registry"))?),
    }
}

/// Overlays the flags given on the command line onto the config section.
fn merge<A: Serialize + DeserializeOwned>(flags: A, file: Option<Value>) -> Result<A> {
    let mut merged = match file {
        None => Map::new(),
        Some(Value::Object(m)) => m.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect(),
        Some(_) => return Err(Error::Schema("config sections must be JSON objects".into())),
    };
    if let Value::Object(given) = serde_json::to_value(flags)? {
        merged.extend(given);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Schema(format!("config: {e}")))
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Schema(format!("missing required option --{flag}")))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| with_path(e, path))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn read_stream(path: &Path) -> Result<SensorStream<f64>> {
    load_csv(path).map_err(|e| match e {
        Error::Io(io) => with_path(io, path),
        other => other,
    })
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| with_path(e, path))
}

fn read_stack(path: &Path) -> Result<Autoencoder> {
    let text = fs::read_to_string(path).map_err(|e| with_path(e, path))?;
    Autoencoder::from_json(&text)
}

fn read_classifiers(path: &Path, dim: usize) -> Result<Classifiers> {
    let cls: Classifiers = read_json(path)?;
    cls.validate(dim)?;
    Ok(cls)
}

fn parse_epsilon(eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter { name: "epsilon", reason: format!("must be finite and > 0, got {eps}") });
    }
    Ok(eps)
}

fn stack_shape(stack: &Autoencoder, stream: &SensorStream<f64>) -> Result<usize> {
    let shape = stack.window.ok_or_else(|| Error::Schema("stack has no window geometry".into()))?;
    if shape.n_sensors != stream.n_sensors() {
        return Err(Error::DimensionMismatch { expected: shape.n_sensors, found: stream.n_sensors() });
    }
    Ok(shape.window_size)
}

fn emit_lines(out: Option<&Path>, lines: &[String]) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    match out {
        Some(path) => write_text(path, &text),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let out = required(a.out, "out")?;
    let sensors = a.sensors.unwrap_or(3);
    let window_size = a.window.unwrap_or(10);
    let spec = SynthSpec::standard(sensors, window_size)?;
    let stream = synthesize::<f64>(a.seed.unwrap_or(DEFAULT_SEED), sensors, a.samples.unwrap_or(10_000), &spec)?;
    save_csv(&stream, &out).map_err(|e| match e {
        Error::Io(io) => with_path(io, &out),
        other => other,
    })
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let input = required(a.input, "input")?;
    let stack_out = required(a.stack_out, "stack-out")?;
    let classifiers_out = required(a.classifiers_out, "classifiers-out")?;
    let defaults = HyperParams::default();
    let hyper = HyperParams {
        mu: a.mu.unwrap_or(defaults.mu),
        beta: a.beta.unwrap_or(defaults.beta),
        alpha: a.alpha.unwrap_or(defaults.alpha),
        weight_decay: a.weight_decay.unwrap_or(defaults.weight_decay),
        sparsity_weight: a.sparsity_weight.unwrap_or(defaults.sparsity_weight),
        sparsity_target: a.sparsity_target.unwrap_or(defaults.sparsity_target),
        iters: a.iters.unwrap_or(defaults.iters),
        batch_size: a.batch_size.or(defaults.batch_size),
        seed: a.seed.unwrap_or(DEFAULT_SEED),
        ..defaults
    };
    hyper.validate()?;
    let hidden = a.hidden.unwrap_or_else(|| vec![15, 7]);
    let clf_beta = a.clf_beta.unwrap_or(DEFAULT_CLF_BETA);
    if !(clf_beta >= 0.0) {
        return Err(Error::InvalidParameter { name: "clf_beta", reason: format!("must be >= 0, got {clf_beta}") });
    }

    let stream = read_stream(&input)?;
    let data = window(&stream, a.window.unwrap_or(10))?;
    let stack = train_dataset(&data, &hidden, &hyper)?;
    let scaled = stack.scaler()?.scale_dataset(&data)?;
    let classifiers = ClassifierSet::fit(&scaled, &stack, clf_beta, clf_beta)?;

    write_text(&stack_out, &stack.to_json()?)?;
    write_text(&classifiers_out, &classifiers.to_json()?)?;
    let summary = json!({
        "windows": data.len(),
        "input_dim": stack.input_dim,
        "hidden": stack.hidden_dims,
        "objective": stack.objective(&scaled)?,
        "reconstruction_l1": stack.reconstruction_l1(scaled.windows())?,
        "orthogonality_error": stack.max_orthogonality_error(),
    });
    emit_lines(None, &[summary.to_string()])
}

fn cmd_perturb(a: PerturbArgs) -> Result<()> {
    let input = required(a.input, "input")?;
    let stack_path = required(a.stack, "stack")?;
    let out = required(a.out, "out")?;
    let epsilon = parse_epsilon(required(a.epsilon, "epsilon")?)?;
    let mode: Mode = a.mode.as_deref().unwrap_or("mode2").parse()?;
    let seed = a.seed.unwrap_or(DEFAULT_SEED);

    let stream = read_stream(&input)?;
    let stack = read_stack(&stack_path)?;
    let window_size = stack_shape(&stack, &stream)?;
    let data = window(&stream, window_size)?;
    let classifiers = match (&a.classifiers, mode) {
        (Some(path), _) => Some(read_classifiers(path, stack.input_dim)?),
        (None, Mode::Mode2) => return Err(Error::Schema("mode2 needs --classifiers".into())),
        (None, _) => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let released = protect(&data, &stack, mode, epsilon, classifiers.as_ref().map(|c| &c.sensitive), &mut rng)?;

    let kept = data.len() * window_size;
    let unstacked = released.data.to_stream(stream.rate_hz())?;
    let mut output = SensorStream::with_timestamps(
        unstacked.samples().clone(),
        stream.timestamps()[..kept].to_vec(),
        stream.rate_hz(),
    )?;
    if let Some(l) = stream.labels_useful() {
        output = output.with_useful_labels(l[..kept].to_vec())?;
    }
    if let Some(l) = stream.labels_sensitive() {
        output = output.with_sensitive_labels(l[..kept].to_vec())?;
    }
    save_csv(&output, &out)?;
    let sidecar = ReleaseSidecar::new(&released.spec, released.relaxed.as_ref(), seed, data.len(), stream.len() - kept);
    write_text(&sidecar_path(&out), &serde_json::to_string_pretty(&sidecar)?)
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn spec_from_sidecar(s: &ReleaseSidecar) -> Result<PrivacySpec> {
    let spec = PrivacySpec {
        epsilon: s.epsilon,
        mode: s.mode,
        delta_q: s.delta_q,
        delta_q_relax: s.delta_q_relax,
        dim_x: s.dim_x,
        dim_f: s.dim_f,
        lambda: s.lambda,
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let original_path = required(a.original, "original")?;
    let perturbed_path = required(a.perturbed, "perturbed")?;
    let stack = read_stack(&required(a.stack, "stack")?)?;
    let classifiers = read_classifiers(&required(a.classifiers, "classifiers")?, stack.input_dim)?;
    let sidecar: ReleaseSidecar = read_json(&a.sidecar.unwrap_or_else(|| sidecar_path(&perturbed_path)))?;
    let spec = spec_from_sidecar(&sidecar)?;

    let original = read_stream(&original_path)?;
    let perturbed = read_stream(&perturbed_path)?;
    let window_size = stack_shape(&stack, &original)?;
    stack_shape(&stack, &perturbed)?;
    let scaler = stack.scaler()?;
    let original = scaler.scale_dataset(&window(&original, window_size)?)?;
    let perturbed = scaler.scale_dataset(&window(&perturbed, window_size)?)?;
    let mut report = evaluate(&original, &perturbed, &stack, &classifiers, &spec)?;
    report.seed = Some(sidecar.seed);
    emit_lines(a.out.as_deref(), &[serde_json::to_string(&report)?])
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let input = required(a.input, "input")?;
    let stack = read_stack(&required(a.stack, "stack")?)?;
    let classifiers = read_classifiers(&required(a.classifiers, "classifiers")?, stack.input_dim)?;
    let epsilons = a.epsilons.unwrap_or_else(|| DEFAULT_EPSILONS.to_vec());
    for &e in &epsilons {
        parse_epsilon(e)?;
    }
    let modes = match a.modes {
        Some(m) => m.iter().map(|s| s.parse()).collect::<Result<Vec<Mode>>>()?,
        None => Mode::ALL.to_vec(),
    };
    let stream = read_stream(&input)?;
    let window_size = stack_shape(&stack, &stream)?;
    let scaled = stack.scaler()?.scale_dataset(&window(&stream, window_size)?)?;
    let reports = tradeoff_sweep(&scaled, &stack, &classifiers, &epsilons, &modes, a.seed.unwrap_or(DEFAULT_SEED))?;
    if let Some(path) = &a.csv {
        write_table(path, &reports)?;
    }
    let lines = reports.iter().map(serde_json::to_string).collect::<std::result::Result<Vec<_>, _>>()?;
    emit_lines(a.out.as_deref(), &lines)
}

fn write_table(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| with_path(e, path))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record([
        "epsilon",
        "mode",
        "useful_accuracy",
        "sensitive_accuracy",
        "mean_l1_error",
        "advantage_factor_predicted",
        "advantage_factor_measured",
        "lambda",
    ])
    .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports {
        w.write_record([
            r.epsilon.to_string(),
            r.mode.to_string(),
            r.useful_accuracy.to_string(),
            r.sensitive_accuracy.to_string(),
            r.mean_l1_error.to_string(),
            opt(r.advantage_factor_predicted),
            opt(r.advantage_factor_measured),
            r.lambda.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_budget(a: BudgetArgs) -> Result<()> {
    let path = required(a.ledger, "ledger")?;
    let text = fs::read_to_string(&path).map_err(|e| with_path(e, &path))?;
    let ledger = BudgetLedger::from_json(&text)?;
    let total = ledger.total()?;
    let line = json!({ "total_epsilon": total, "partitions": ledger.partition_totals() });
    emit_lines(None, &[line.to_string()])
}

fn cmd_registry(a: RegistryArgs) -> Result<()> {
    let entries = match (&a.name, &a.sensor) {
        (Some(n), _) => registry::lookup(n),
        (None, Some(s)) => registry::inferences_using(s),
        (None, None) => registry::inference_registry().iter().collect(),
    };
    let lines = entries.iter().map(serde_json::to_string).collect::<std::result::Result<Vec<_>, _>>()?;
    emit_lines(None, &lines)
}
