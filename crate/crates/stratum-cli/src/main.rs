//! `stratum` — lifecycle manager for ML analytics pipelines: validate a
//! pipeline spec, plan its placement onto a cloud-fog-edge topology, generate
//! deployment manifests, simulate the deployment under an elasticity
//! controller, and manage the model registry.
//!
//! Exit codes: 0 success, 1 validation or parse error, 2 infeasible,
//! 3 I/O or format error. Machine-readable output (JSON/CSV) goes to stdout,
//! diagnostics to stderr.

use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use stratum_core::codegen::{generate, write_manifests, CodegenError};
use stratum_core::controller::ThresholdPolicy;
use stratum_core::lang::{parse, PipelineSpec};
use stratum_core::placement::{plan_exact, plan_heuristic, PlacementError, PlacementPlan};
use stratum_core::registry::{EvalStrategy, RegistryError, RegistryStore};
use stratum_core::sim::{run, RateOverride, SimConfig, SimError};
use stratum_core::topology::{load_topology, ResourceTopology};
use stratum_core::validate::validate;

/// The CLI refuses exact planning beyond this many candidate assignments.
const EXACT_ENUMERATION_LIMIT: f64 = 1e6;

#[derive(Parser)]
#[command(name = "stratum", version, about = "Lifecycle manager for ML analytics pipelines across cloud-fog-edge topologies", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a pipeline spec and check its application-level constraints.
    Validate {
        /// Path to the .stratum pipeline spec.
        spec: PathBuf,
    },
    /// Compute a cost-minimal placement of the pipeline onto a topology.
    Plan {
        spec: PathBuf,
        /// Topology JSON file.
        #[arg(long)]
        topology: PathBuf,
        #[command(flatten)]
        solver: SolverChoice,
    },
    /// Generate per-node deployment manifests from a spec and plan.
    Generate {
        spec: PathBuf,
        #[arg(long)]
        topology: PathBuf,
        /// Placement plan JSON (as produced by `stratum plan`).
        #[arg(long)]
        plan: PathBuf,
        /// Registry JSON file.
        #[arg(long, env = "STRATUM_REGISTRY")]
        registry: PathBuf,
        /// Model selection strategy, e.g. maximize:accuracy.
        #[arg(long)]
        strategy: String,
        /// Output directory for index.yaml and <node>.deploy.yaml files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the deployed pipeline tick by tick.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        /// Number of one-second ticks to simulate.
        #[arg(long)]
        ticks: u32,
        /// Run the default elasticity controller in the loop.
        #[arg(long)]
        controller: bool,
        /// Ingestion rate override, component:tick:rate (repeatable).
        #[arg(long = "override", value_name = "COMP:TICK:RATE")]
        overrides: Vec<String>,
        /// Directory for metrics.csv, flows.csv, and actions.log.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect and update the model registry.
    Registry {
        #[command(subcommand)]
        command: RegistryCommand,
    },
}

#[derive(Args)]
#[group(multiple = false)]
struct SolverChoice {
    /// Force exhaustive search (refused above 10^6 candidate assignments).
    #[arg(long)]
    exact: bool,
    /// Force the greedy heuristic.
    #[arg(long)]
    heuristic: bool,
}

#[derive(Subcommand)]
enum RegistryCommand {
    /// Register a model version.
    Add {
        #[arg(long, env = "STRATUM_REGISTRY")]
        registry: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long)]
        version: String,
        /// Evaluation metric, name=value (repeatable).
        #[arg(long = "metric", value_name = "NAME=VALUE")]
        metrics: Vec<String>,
        #[arg(long = "size-mb")]
        size_mb: f64,
        /// Mark the model as requiring a GPU at inference time.
        #[arg(long)]
        gpu: bool,
    },
    /// List registered models.
    List {
        #[arg(long, env = "STRATUM_REGISTRY")]
        registry: PathBuf,
        /// Only list versions of this model.
        #[arg(long)]
        name: Option<String>,
    },
    /// Select the best version of a model under a strategy.
    Select {
        #[arg(long, env = "STRATUM_REGISTRY")]
        registry: PathBuf,
        #[arg(long)]
        name: String,
        /// e.g. maximize:accuracy or minimize:latency_ms.
        #[arg(long)]
        strategy: String,
    },
}

/// Failures mapped onto the exit-code contract.
enum CliError {
    /// Exit 1: spec parse errors, validation failures, registry semantics.
    Input(String),
    /// Exit 2: proven or heuristic infeasibility, unresolvable models.
    Infeasible(String),
    /// Exit 3: missing/unreadable/unwritable files, malformed JSON, limits.
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Infeasible(m) | CliError::Io(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { spec } => cmd_validate(&spec),
        Command::Plan { spec, topology, solver } => cmd_plan(&spec, &topology, &solver),
        Command::Generate { spec, topology, plan, registry, strategy, out } => {
            cmd_generate(&spec, &topology, &plan, &registry, &strategy, &out)
        }
        Command::Simulate { spec, topology, plan, ticks, controller, overrides, out } => {
            cmd_simulate(&spec, &topology, &plan, ticks, controller, &overrides, out.as_deref())
        }
        Command::Registry { command } => cmd_registry(command),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<PipelineSpec, CliError> {
    let source = read_file(path)?;
    parse(&source).map_err(|e| CliError::Input(format!("{}:{e}", path.display())))
}

fn load_validated_spec(path: &Path) -> Result<PipelineSpec, CliError> {
    let spec = load_spec(path)?;
    let report = validate(&spec);
    if report.ok() {
        Ok(spec)
    } else {
        Err(CliError::Input(report.render().trim_end().to_string()))
    }
}

fn load_topology_file(path: &Path) -> Result<ResourceTopology, CliError> {
    let source = read_file(path)?;
    load_topology(&source).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_plan_file(path: &Path) -> Result<PlacementPlan, CliError> {
    let source = read_file(path)?;
    PlacementPlan::from_json(&source).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_registry_file(path: &Path) -> Result<RegistryStore, CliError> {
    let source = read_file(path)?;
    RegistryStore::from_json(&source).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn parse_strategy(text: &str) -> Result<EvalStrategy, CliError> {
    text.parse().map_err(|e: RegistryError| CliError::Input(e.to_string()))
}

fn cmd_validate(spec_path: &Path) -> Result<(), CliError> {
    let spec = load_spec(spec_path)?;
    let report = validate(&spec);
    if report.ok() {
        Ok(())
    } else {
        eprint!("{}", report.render());
        Err(CliError::Input(format!(
            "{}: {} validation error(s)",
            spec_path.display(),
            report.errors.len()
        )))
    }
}

fn cmd_plan(spec_path: &Path, topology_path: &Path, solver: &SolverChoice) -> Result<(), CliError> {
    let spec = load_validated_spec(spec_path)?;
    let topology = load_topology_file(topology_path)?;

    let candidates = (topology.nodes.len() as f64).powi(spec.components.len() as i32);
    let use_exact = if solver.exact {
        if candidates > EXACT_ENUMERATION_LIMIT {
            return Err(CliError::Io(format!(
                "instance too large for exact planning: {} nodes ^ {} components exceeds {EXACT_ENUMERATION_LIMIT} assignments; use --heuristic",
                topology.nodes.len(),
                spec.components.len()
            )));
        }
        true
    } else if solver.heuristic {
        false
    } else {
        candidates <= EXACT_ENUMERATION_LIMIT
    };

    let plan = if use_exact {
        plan_exact(&spec, &topology).map_err(|e| match e {
            PlacementError::Infeasible => CliError::Infeasible(
                "infeasible: exhaustive search proved no assignment satisfies the constraints".into(),
            ),
            other => CliError::Input(other.to_string()),
        })?
    } else {
        plan_heuristic(&spec, &topology).map_err(|e| match e {
            PlacementError::HeuristicInfeasible(component) => CliError::Infeasible(format!(
                "heuristic-infeasible: greedy search found no node for component '{component}' (not a proof; --exact may still succeed)"
            )),
            other => CliError::Input(other.to_string()),
        })?
    };
    print!("{}", plan.to_json());
    Ok(())
}

fn cmd_generate(
    spec_path: &Path,
    topology_path: &Path,
    plan_path: &Path,
    registry_path: &Path,
    strategy: &str,
    out: &Path,
) -> Result<(), CliError> {
    let spec = load_validated_spec(spec_path)?;
    let topology = load_topology_file(topology_path)?;
    let plan = load_plan_file(plan_path)?;
    let registry = load_registry_file(registry_path)?;
    let strategy = parse_strategy(strategy)?;

    let manifests = generate(&spec, &topology, &plan, &registry, &strategy).map_err(|e| match e {
        CodegenError::InvalidSpec(report) => CliError::Input(report.render().trim_end().to_string()),
        CodegenError::InfeasiblePlan(verdict) => {
            let detail: Vec<String> = verdict
                .violations
                .iter()
                .map(|v| format!("{} {}", v.rule, v.subject))
                .collect();
            CliError::Infeasible(format!("plan is not feasible: {}", detail.join(", ")))
        }
        CodegenError::Model(e) => CliError::Infeasible(format!("cannot resolve model: {e}")),
        CodegenError::Placement(e) => CliError::Input(e.to_string()),
        CodegenError::Io(e) => CliError::Io(e.to_string()),
    })?;

    let written = write_manifests(out, &spec.name, &manifests)
        .map_err(|e| CliError::Io(format!("cannot write manifests under {}: {e}", out.display())))?;

    let files: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let summary = serde_json::json!({
        "out_dir": out.display().to_string(),
        "manifests": files,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn parse_override(text: &str) -> Result<RateOverride, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let err = || {
        CliError::Input(format!(
            "override must look like component:tick:rate, got '{text}'"
        ))
    };
    if parts.len() != 3 {
        return Err(err());
    }
    Ok(RateOverride {
        component: parts[0].to_string(),
        tick: parts[1].parse().map_err(|_| err())?,
        rate: parts[2].parse().map_err(|_| err())?,
    })
}

fn cmd_simulate(
    spec_path: &Path,
    topology_path: &Path,
    plan_path: &Path,
    ticks: u32,
    controller: bool,
    overrides: &[String],
    out: Option<&Path>,
) -> Result<(), CliError> {
    let spec = load_validated_spec(spec_path)?;
    let topology = load_topology_file(topology_path)?;
    let plan = load_plan_file(plan_path)?;
    let rate_overrides = overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<Result<Vec<_>, _>>()?;
    let config = SimConfig { ticks, rate_overrides };

    let policy = ThresholdPolicy::default();
    let report = run(
        &spec,
        &topology,
        &plan,
        &config,
        controller.then_some(&policy as &dyn stratum_core::controller::ControllerPolicy),
    )
    .map_err(|e| match e {
        SimError::InvalidSpec(report) => CliError::Input(report.render().trim_end().to_string()),
        SimError::InfeasiblePlan(verdict) => {
            let detail: Vec<String> = verdict
                .violations
                .iter()
                .map(|v| format!("{} {}", v.rule, v.subject))
                .collect();
            CliError::Infeasible(format!("plan is not feasible: {}", detail.join(", ")))
        }
        SimError::Placement(e) => CliError::Input(e.to_string()),
        other => CliError::Input(other.to_string()),
    })?;

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let write = |name: &str, content: String| {
            std::fs::write(dir.join(name), content)
                .map_err(|e| CliError::Io(format!("cannot write {}/{name}: {e}", dir.display())))
        };
        write("metrics.csv", report.metrics_csv())?;
        write("flows.csv", report.flows_csv())?;
        write("actions.log", report.action_log())?;
    }
    print!("{}", report.metrics_csv());
    eprintln!(
        "conservation: generated={} sink_completions={} final_queues={} residual={}",
        report.conservation.generated,
        report.conservation.sink_completions,
        report.conservation.final_queues,
        report.conservation.residual()
    );
    if !report.actions.is_empty() {
        eprint!("{}", report.action_log());
    }
    Ok(())
}

fn parse_metrics(pairs: &[String]) -> Result<BTreeMap<String, f64>, CliError> {
    let mut metrics = BTreeMap::new();
    for pair in pairs {
        let Some((name, value)) = pair.split_once('=') else {
            return Err(CliError::Input(format!(
                "metric must look like name=value, got '{pair}'"
            )));
        };
        let value: f64 = value
            .parse()
            .map_err(|_| CliError::Input(format!("metric value in '{pair}' is not a number")))?;
        metrics.insert(name.to_string(), value);
    }
    Ok(metrics)
}

fn registry_error(e: RegistryError) -> CliError {
    match e {
        RegistryError::Io(e) => CliError::Io(e.to_string()),
        RegistryError::Malformed(m) => CliError::Io(m),
        other => CliError::Input(other.to_string()),
    }
}

fn cmd_registry(command: RegistryCommand) -> Result<(), CliError> {
    match command {
        RegistryCommand::Add { registry, name, version, metrics, size_mb, gpu } => {
            let mut store = RegistryStore::load_or_default(&registry).map_err(registry_error)?;
            let metrics = parse_metrics(&metrics)?;
            let record = store
                .register(&name, &version, metrics, size_mb, gpu)
                .map_err(registry_error)?
                .clone();
            store.save(&registry).map_err(registry_error)?;
            println!("{}", serde_json::to_string_pretty(&record).expect("record serializes"));
            Ok(())
        }
        RegistryCommand::List { registry, name } => {
            let store = RegistryStore::load(&registry).map_err(registry_error)?;
            let records: Vec<_> = store
                .models
                .iter()
                .filter(|m| name.as_deref().is_none_or(|n| m.name == n))
                .collect();
            println!("{}", serde_json::to_string_pretty(&records).expect("records serialize"));
            Ok(())
        }
        RegistryCommand::Select { registry, name, strategy } => {
            let store = RegistryStore::load(&registry).map_err(registry_error)?;
            let strategy = parse_strategy(&strategy)?;
            let record = store.select_best(&name, &strategy).map_err(registry_error)?;
            println!("{}", serde_json::to_string_pretty(record).expect("record serializes"));
            Ok(())
        }
    }
}
