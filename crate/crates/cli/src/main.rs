//! `lalec` command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure (`validate`), 2 compile or
//! usage error, 3 parse error, 4 no valid trial (`search`).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lalec::dot::to_dot;
use lalec::dsl::{parse_expr, parse_grammar, pretty_print};
use lalec::grammar::{sample, unfold};
use lalec::ops::{Operator, Registry};
use lalec::optimizer::{make_cv_objective, run_search, OptimizerSpec, Strategy, TrialStatus};
use lalec::schema::{config_from_json, validate, ConfigValue};
use lalec::space::pcs::emit_pcs;
use lalec::space::{
    combine, emit_flat, emit_grid, emit_hierarchical, flat_to_json, CombineOptions,
};
use lalec::toyml::{load_csv, synth_dataset, Dataset, SynthKind};

const SCHEMA_PATH_VAR: &str = "LALEC_SCHEMA_PATH";

#[derive(Parser)]
#[command(
    name = "lalec",
    version,
    about = "Search-space compiler for pipeline combinators and grammars"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a pipeline into a search space.
    Compile(CompileArgs),
    /// Check a hyperparameter configuration against an operator schema.
    Validate(ValidateArgs),
    /// Turn a grammar into a planned pipeline.
    #[command(subcommand)]
    Grammar(GrammarCommand),
    /// Search a compiled pipeline with cross-validation.
    Search(SearchArgs),
    /// Draw a pipeline as a graph.
    Render(RenderArgs),
}

#[derive(Args)]
struct Source {
    /// File holding one pipeline expression.
    #[arg(long, conflicts_with = "expr")]
    pipeline: Option<PathBuf>,
    /// Pipeline expression given inline.
    #[arg(long)]
    expr: Option<String>,
}

#[derive(Args)]
struct SchemaDir {
    /// Directory of `<Operator>.schema.json` files; defaults to
    /// $LALEC_SCHEMA_PATH, then to the bundled schemas.
    #[arg(long)]
    schemas: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Hier,
    Flat,
    Pcs,
    Grid,
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    schemas: SchemaDir,
    #[arg(long, value_enum, default_value = "hier")]
    backend: Backend,
    /// Drop side constraints and keep only per-hyperparameter domains.
    #[arg(long)]
    no_constraints: bool,
    /// Draws per continuous domain for the grid backend.
    #[arg(long, default_value_t = 1)]
    cont_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    op: String,
    /// JSON file with the configuration, or an inline JSON object.
    #[arg(long)]
    config: String,
    #[command(flatten)]
    schemas: SchemaDir,
}

#[derive(Subcommand)]
enum GrammarCommand {
    /// Expand the grammar to a bounded depth.
    Unfold {
        #[arg(long)]
        grammar: PathBuf,
        #[command(flatten)]
        schemas: SchemaDir,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw one derivation.
    Sample {
        #[arg(long)]
        grammar: PathBuf,
        #[command(flatten)]
        schemas: SchemaDir,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        max_depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerName {
    Random,
    Grid,
    Bandit,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    schemas: SchemaDir,
    /// CSV file with a header row.
    #[arg(long, conflicts_with = "synth")]
    data: Option<PathBuf>,
    /// Synthetic data as `kind,n,seed` with kind blobs, xor or moons.
    #[arg(long)]
    synth: Option<String>,
    /// Label column of the CSV file.
    #[arg(long, default_value = "label")]
    label: String,
    #[arg(long, value_enum, default_value = "random")]
    optimizer: OptimizerName,
    #[arg(long, default_value_t = 50)]
    max_trials: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_constraints: bool,
    #[arg(long, default_value_t = 1)]
    cont_samples: usize,
    #[arg(long, default_value_t = 0.2)]
    bandit_epsilon: f64,
    /// Concurrent objective evaluations (not allowed with bandit).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// History JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Best decoded pipeline as JSON.
    #[arg(long)]
    best_out: Option<PathBuf>,
    /// CSV of the best loss after each trial.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Write every elapsed time as 0 so reruns produce identical files.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    schemas: SchemaDir,
    #[arg(long, value_enum, default_value = "dot")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait WithCode<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

fn registry(dir: &SchemaDir) -> Result<Registry> {
    let dir = dir
        .schemas
        .clone()
        .or_else(|| std::env::var_os(SCHEMA_PATH_VAR).map(PathBuf::from));
    match dir {
        Some(d) => {
            Registry::from_dir(&d).with_context(|| format!("loading schemas from {}", d.display()))
        }
        None => Ok(Registry::bundled()),
    }
}

fn source_text(source: &Source) -> Result<String> {
    match (&source.pipeline, &source.expr) {
        (Some(path), _) => {
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
        }
        (None, Some(expr)) => Ok(expr.clone()),
        (None, None) => bail!("give --pipeline FILE or --expr TEXT"),
    }
}

fn load_operator(source: &Source, schemas: &SchemaDir) -> Result<Operator, Failure> {
    let text = source_text(source).code(2)?;
    let registry = registry(schemas).code(2)?;
    parse_expr(&text, &registry).code(3)
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_atomic(path, contents).code(2),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn pretty_json(v: &Value) -> String {
    let mut text = serde_json::to_string_pretty(v).expect("JSON values serialize");
    text.push('\n');
    text
}

fn compile(args: CompileArgs) -> Result<(), Failure> {
    let op = load_operator(&args.source, &args.schemas)?;
    let options = CombineOptions {
        keep_constraints: !args.no_constraints,
        ..CombineOptions::default()
    };
    let ir = combine(&op, &options).code(2)?;
    let text = match args.backend {
        Backend::Hier => pretty_json(&emit_hierarchical(&ir)),
        Backend::Flat => pretty_json(&flat_to_json(&emit_flat(&ir, options.limit).code(2)?)),
        Backend::Pcs => emit_pcs(&ir, options.limit).code(2)?,
        Backend::Grid => {
            if args.cont_samples == 0 {
                return Err(anyhow!("--cont-samples must be positive")).code(2);
            }
            pretty_json(
                &emit_grid(&ir, args.cont_samples, args.seed, options.limit)
                    .code(2)?
                    .to_json(),
            )
        }
    };
    emit(args.out.as_deref(), &text)
}

fn validate_cmd(args: ValidateArgs) -> Result<(), Failure> {
    let registry = registry(&args.schemas).code(2)?;
    let op = registry
        .get(&args.op)
        .ok_or_else(|| anyhow!("unknown operator `{}`", args.op))
        .code(2)?;
    let text = if args.config.trim_start().starts_with('{') {
        args.config.clone()
    } else {
        fs::read_to_string(&args.config)
            .with_context(|| format!("reading {}", args.config))
            .code(2)?
    };
    let value: Value = serde_json::from_str(&text)
        .context("configuration is not JSON")
        .code(2)?;
    let config = config_from_json(&value).map_err(|e| anyhow!(e)).code(2)?;
    let schema = op
        .as_individual()
        .expect("registry holds individual operators")
        .schema();
    let report = validate(&config, schema);
    print!(
        "{}",
        pretty_json(&serde_json::to_value(&report).expect("reports serialize"))
    );
    if report.ok {
        return Ok(());
    }
    Err(Failure {
        code: 1,
        error: anyhow!("{report}"),
    })
}

fn planned_text(op: &Operator) -> String {
    match pretty_print(op) {
        Ok(text) => format!("{text}\n"),
        Err(_) => pretty_json(&op.to_json()),
    }
}

fn grammar_cmd(cmd: GrammarCommand) -> Result<(), Failure> {
    let (path, schemas, out) = match &cmd {
        GrammarCommand::Unfold {
            grammar,
            schemas,
            out,
            ..
        }
        | GrammarCommand::Sample {
            grammar,
            schemas,
            out,
            ..
        } => (grammar, schemas, out),
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .code(2)?;
    let registry = registry(schemas).code(2)?;
    let g = parse_grammar(&text, &registry).code(3)?;
    let op = match &cmd {
        GrammarCommand::Unfold { depth, .. } => unfold(&g, *depth).code(2)?,
        GrammarCommand::Sample {
            seed, max_depth, ..
        } => sample(&g, *seed, *max_depth).code(2)?,
    };
    emit(out.as_deref(), &planned_text(&op))
}

fn dataset(args: &SearchArgs) -> Result<Dataset> {
    if let Some(path) = &args.data {
        return Ok(load_csv(path, &args.label)?);
    }
    let spec = args.synth.as_deref().unwrap_or("blobs,200,0");
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let [kind, n, seed] = parts.as_slice() else {
        bail!("--synth expects kind,n,seed");
    };
    let kind: SynthKind = kind.parse().map_err(|e| anyhow!("{e}"))?;
    let n: usize = n.parse().context("--synth row count")?;
    let seed: u64 = seed.parse().context("--synth seed")?;
    Ok(synth_dataset(kind, n, seed)?)
}

fn search_cmd(args: SearchArgs) -> Result<(), Failure> {
    let op = load_operator(&args.source, &args.schemas)?;
    let data = dataset(&args).code(2)?;
    let options = CombineOptions {
        keep_constraints: !args.no_constraints,
        ..CombineOptions::default()
    };
    let ir = combine(&op, &options).code(2)?;
    let spec = OptimizerSpec {
        strategy: match args.optimizer {
            OptimizerName::Random => Strategy::Random,
            OptimizerName::Grid => Strategy::Grid,
            OptimizerName::Bandit => Strategy::Bandit,
        },
        max_trials: args.max_trials,
        seed: args.seed,
        bandit_epsilon: args.bandit_epsilon,
        cont_samples: args.cont_samples,
        jobs: args.jobs,
        ..OptimizerSpec::default()
    };
    let objective = make_cv_objective(ir.clone(), data, args.folds, args.seed);
    let history = run_search(&ir, &objective, &spec).code(2)?;

    if let Some(path) = &args.out {
        write_atomic(path, &pretty_json(&history.to_json(!args.no_timing))).code(2)?;
    }
    if let Some(path) = &args.curve {
        write_atomic(path, &history.curve_csv()).code(2)?;
    }
    println!("trials: {}", history.trials.len());
    println!("invalid trials: {}", history.invalid_count());
    println!(
        "  invalidConfig: {}",
        history.count_status(TrialStatus::InvalidConfig)
    );
    println!(
        "  runtimeError: {}",
        history.count_status(TrialStatus::RuntimeError)
    );
    let Some(best) = history.best_trial() else {
        return Err(Failure {
            code: 4,
            error: anyhow!("no valid trial in {} attempts", history.trials.len()),
        });
    };
    println!("best loss: {}", best.loss);
    let decoded = ir.decode(&best.point).code(2)?;
    let expression = pretty_print(&decoded).ok();
    if let Some(text) = &expression {
        println!("best pipeline: {text}");
    }
    if let Some(path) = &args.best_out {
        let doc = json!({
            "trial": best.index,
            "loss": best.loss,
            "expression": expression,
            "pipeline": full_config_json(&decoded),
        });
        write_atomic(path, &pretty_json(&doc)).code(2)?;
    }
    Ok(())
}

/// Like `Operator::to_json` with latent hyperparameters filled by defaults.
fn full_config_json(op: &Operator) -> Value {
    match op {
        Operator::Individual(ind) => {
            let config: serde_json::Map<String, Value> = ind
                .full_config()
                .iter()
                .map(|(k, v)| {
                    let value = match v {
                        ConfigValue::Operator(inner) => full_config_json(inner),
                        ConfigValue::Scalar(s) => s.to_json(),
                    };
                    (k.clone(), value)
                })
                .collect();
            json!({"operator": ind.name(), "config": config})
        }
        Operator::Pipeline(p) => json!({
            "steps": p.steps().iter().map(full_config_json).collect::<Vec<_>>(),
            "edges": p.edges().iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>(),
        }),
        Operator::Choice(c) => json!({
            "choice": c.alternatives().iter().map(full_config_json).collect::<Vec<_>>(),
        }),
    }
}

fn render(args: RenderArgs) -> Result<(), Failure> {
    let op = load_operator(&args.source, &args.schemas)?;
    let text = match args.format {
        Format::Dot => to_dot(&op),
    };
    emit(args.out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile(a) => compile(a),
        Command::Validate(a) => validate_cmd(a),
        Command::Grammar(g) => grammar_cmd(g),
        Command::Search(a) => search_cmd(a),
        Command::Render(a) => render(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
