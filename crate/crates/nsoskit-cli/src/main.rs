//! Command-line front end: analytic evaluation, dimensioning (with the
//! exhaustive-search oracle), simulation, the closed auto-scaling loop and
//! the complexity study, all emitting machine-readable CSV/JSON plus a
//! reproducibility manifest.

mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use nsoskit::des::{simulate_scenario_traced, ArrivalProfile, ServiceFamily, SimConfig};
use nsoskit::dimensioning::{
    brute_force, bruteforce_check_count, dimension_heuristic, heuristic, stability_minimum,
    CapacityModel, DimensioningError, NsosModel,
};
use nsoskit::drp::{
    run_drp_loop, DrpConfig, DrpTimeline, LinearTrendPredictor, NoisyOraclePredictor,
    PersistencePredictor, Predictor,
};
use nsoskit::nsos::{
    enumerate_entities, response_time, Allocation, EntityId, EntityKind, KindMap, NsosError,
    NsosScenario,
};

use output::{linear_fit, quadratic_fit, write_file, RunManifest};

#[derive(Debug)]
pub struct CliError {
    message: String,
    code: i32,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { message: message.into(), code: 1 }
    }

    fn unstable(message: impl Into<String>) -> Self {
        Self { message: message.into(), code: 2 }
    }

    fn guard(message: impl Into<String>) -> Self {
        Self { message: message.into(), code: 3 }
    }
}

#[derive(Parser)]
#[command(
    name = "nsoskit",
    version,
    about = "Queueing-model toolkit for dimensioning and auto-scaling a network slicing orchestration system",
    long_about = "Exit codes: 0 success, 1 input error, 2 unstable allocation, 3 guard refusal.\n\
        Scenario files are JSON with the NsosScenario schema (rates in 1/s, times in seconds).\n\
        Allocation files: {\"entities\": [{\"kind\": \"GO\", \"cores\": 4}, {\"kind\": \"DSO\", \"domain\": 1, \"cores\": 3}, ...]}.\n\
        Profile files: {\"segments\": [{\"start\": 0.0, \"rate\": 1000.0}, ...], \"family\": \"poisson\"}."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the analytic response time of an allocation.
    Analyze(AnalyzeArgs),
    /// Find the minimum cores meeting the objective (optionally compare
    /// against exhaustive search).
    Dimension(DimensionArgs),
    /// Run the discrete-event simulator under a fixed allocation.
    Simulate(SimulateArgs),
    /// Run the closed-loop provisioning simulation.
    Drp(DrpArgs),
    /// Measure dimensioning wall time over parameter sweeps and fit its
    /// growth laws.
    Complexity(ComplexityArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    allocation: PathBuf,
    /// Report format: json (full report) or csv (per-node table).
    #[arg(long, default_value = "json")]
    format: String,
    /// Output directory (report + manifest); stdout only when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DimensionArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated external rates; defaults to the scenario's rate.
    #[arg(long)]
    sweep: Option<String>,
    /// Also run the exhaustive-search oracle per rate.
    #[arg(long)]
    brute_force: bool,
    /// Refuse brute force beyond this many response-time evaluations.
    #[arg(long, default_value_t = 10_000_000)]
    guard: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Allocation file; omit together with --dimension to auto-size.
    #[arg(long)]
    allocation: Option<PathBuf>,
    /// Size the allocation with the greedy before simulating.
    #[arg(long)]
    dimension: bool,
    /// Piecewise-constant profile JSON; constant scenario rate when omitted.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value_t = 5.0)]
    warmup: f64,
    #[arg(long, default_value_t = 10)]
    batches: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Service family for every entity: gamma | exponential | deterministic.
    #[arg(long, default_value = "gamma")]
    service: String,
    /// Write a per-request trace CSV into the output directory.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DrpArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    #[arg(long)]
    duration: f64,
    /// persistence | linear | oracle
    #[arg(long, default_value = "persistence")]
    predictor: String,
    /// Safety margin of the persistence predictor.
    #[arg(long, default_value_t = 0.1)]
    margin: f64,
    /// History length of the linear-trend predictor.
    #[arg(long, default_value_t = 6)]
    horizon: usize,
    /// Relative noise of the oracle predictor.
    #[arg(long, default_value_t = 0.1)]
    oracle_noise: f64,
    /// Control interval (prediction horizon), seconds.
    #[arg(long, default_value_t = 600.0)]
    dt: f64,
    #[arg(long, default_value_t = 60.0)]
    monitor_window: f64,
    #[arg(long, default_value_t = 82.0)]
    boot_delay: f64,
    #[arg(long, default_value_t = 0.05)]
    scale_out_threshold: f64,
    #[arg(long, default_value_t = -0.5)]
    scale_in_threshold: f64,
    /// Token-bucket depth; one second of tokens when omitted.
    #[arg(long)]
    depth: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// gamma | exponential | deterministic
    #[arg(long, default_value = "gamma")]
    service: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ComplexityArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated external rates for the quadratic fit.
    #[arg(long)]
    lambda_sweep: Option<String>,
    /// Comma-separated objectives (seconds) for the logarithmic fit.
    #[arg(long)]
    tmax_sweep: Option<String>,
    /// Comma-separated domain counts for the spread check.
    #[arg(long)]
    ndso_sweep: Option<String>,
    /// Independent timing runs averaged per point.
    #[arg(long, default_value_t = 10)]
    runs: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Dimension(args) => cmd_dimension(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Drp(args) => cmd_drp(args),
        Command::Complexity(args) => cmd_complexity(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

// ---------------------------------------------------------------------
// shared loaders

fn load_scenario(path: &Path) -> Result<NsosScenario, CliError> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let scenario: NsosScenario = serde_json::from_str(&body)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    scenario.validate().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(scenario)
}

#[derive(Debug, Serialize, Deserialize)]
struct AllocationEntry {
    kind: EntityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<u32>,
    cores: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct AllocationFile {
    entities: Vec<AllocationEntry>,
}

fn load_allocation(path: &Path, scenario: &NsosScenario) -> Result<Allocation, CliError> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let file: AllocationFile = serde_json::from_str(&body)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let entities = enumerate_entities(scenario.domains);
    let mut cores = vec![0u32; entities.len()];
    for entry in &file.entities {
        let id = EntityId { kind: entry.kind, domain: entry.domain };
        let idx = entities.iter().position(|e| *e == id).ok_or_else(|| {
            CliError::input(format!(
                "{}: entity {id} does not exist in a {}-domain scenario",
                path.display(),
                scenario.domains
            ))
        })?;
        cores[idx] = entry.cores;
    }
    Allocation::balanced(scenario, &cores)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_profile(path: &Path) -> Result<ArrivalProfile, CliError> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let profile: ArrivalProfile = serde_json::from_str(&body)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    profile.validate().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(profile)
}

fn parse_family(name: &str) -> Result<ServiceFamily, CliError> {
    match name {
        "gamma" => Ok(ServiceFamily::Gamma),
        "exponential" => Ok(ServiceFamily::Exponential),
        "deterministic" => Ok(ServiceFamily::Deterministic),
        other => Err(CliError::input(format!(
            "unknown service family '{other}' (gamma | exponential | deterministic)"
        ))),
    }
}

fn parse_sweep(raw: &str, what: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::input(format!("bad {what} value '{s}': {e}")))
        })
        .collect()
}

fn map_nsos_error(e: NsosError) -> CliError {
    match e {
        NsosError::Unstable { .. } | NsosError::MissingCapacity { .. } => {
            CliError::unstable(e.to_string())
        }
        other => CliError::input(other.to_string()),
    }
}

// ---------------------------------------------------------------------
// analyze

#[derive(Serialize)]
struct AnalyzeReport {
    total_response_time: f64,
    per_entity: Vec<EntityReport>,
    per_node: Vec<NodeReport>,
}

#[derive(Serialize)]
struct EntityReport {
    entity: String,
    response_time: f64,
    cores: u32,
    instances: u32,
}

#[derive(Serialize)]
struct NodeReport {
    entity: String,
    instance: u32,
    cores: u32,
    rate: f64,
    arrival_scv: f64,
    utilization: f64,
    waiting: f64,
    node_time: f64,
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    let allocation = load_allocation(&args.allocation, &scenario)?;
    let report = response_time(&scenario, &allocation).map_err(map_nsos_error)?;

    let mut node_instance_counter: std::collections::HashMap<EntityId, u32> =
        std::collections::HashMap::new();
    let per_node: Vec<NodeReport> = report
        .node_entities
        .iter()
        .enumerate()
        .map(|(k, &entity)| {
            let slot = node_instance_counter.entry(entity).or_insert(0);
            let instance = *slot;
            *slot += 1;
            let e_idx = allocation.entities.iter().position(|&e| e == entity).unwrap();
            NodeReport {
                entity: entity.to_string(),
                instance,
                cores: allocation.per_instance_cores[e_idx][instance as usize],
                rate: report.flow.rate[k],
                arrival_scv: report.flow.arrival_scv[k],
                utilization: report.flow.utilization[k],
                waiting: report.flow.waiting[k],
                node_time: report.flow.node_time[k],
            }
        })
        .collect();
    let per_entity: Vec<EntityReport> = report
        .per_entity
        .iter()
        .zip(&allocation.cores)
        .zip(&allocation.instances)
        .map(|(((entity, t), &cores), &instances)| EntityReport {
            entity: entity.to_string(),
            response_time: *t,
            cores,
            instances,
        })
        .collect();
    let out = AnalyzeReport { total_response_time: report.total, per_entity, per_node };
    let (name, body) = match args.format.as_str() {
        "json" => ("analyze.json", serde_json::to_string_pretty(&out).expect("report serializes")),
        "csv" => {
            let mut csv = String::from(
                "entity,instance,cores,rate,arrival_scv,utilization,waiting,node_time\n",
            );
            for n in &out.per_node {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    n.entity,
                    n.instance,
                    n.cores,
                    n.rate,
                    n.arrival_scv,
                    n.utilization,
                    n.waiting,
                    n.node_time
                );
            }
            ("analyze.csv", csv)
        }
        other => return Err(CliError::input(format!("unknown format '{other}' (json | csv)"))),
    };
    println!("{body}");

    if let Some(dir) = args.out {
        let path = write_file(&dir, name, &body)?;
        let mut manifest = RunManifest::new("analyze");
        manifest.scenario = Some(args.scenario.display().to_string());
        manifest.config = serde_json::json!({
            "allocation": args.allocation.display().to_string(),
            "format": args.format,
        });
        manifest.outputs.push(path.display().to_string());
        manifest.write(&dir)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// dimension

fn cmd_dimension(args: DimensionArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    let rates = match &args.sweep {
        Some(raw) => parse_sweep(raw, "sweep rate")?,
        None => vec![scenario.ext_rate],
    };
    let entities = enumerate_entities(scenario.domains);

    let mut header =
        String::from("lambda,feasible,total_cores,predicted_t,evaluations,iterations,wall_time_s");
    for e in &entities {
        let _ = write!(header, ",cores_{e}");
    }
    if args.brute_force {
        header.push_str(",bf_total_cores,bf_predicted_t,bf_checks,n_checks_formula");
    }
    let mut csv_body = header.clone();
    csv_body.push('\n');

    for &rate in &rates {
        let sized = scenario.with_external(rate, scenario.ext_scv);
        let model = NsosModel::new(&sized);
        let start = Instant::now();
        let result = heuristic(&model, sized.slo, sized.core_budget)
            .map_err(|e| CliError::input(e.to_string()))?;
        let wall = start.elapsed().as_secs_f64();

        let mut row = format!(
            "{rate},{},{},{},{},{},{}",
            result.feasible,
            result.total_cores,
            result.predicted_t,
            result.model_evaluations,
            result.iterations,
            wall
        );
        for &c in &result.cores {
            let _ = write!(row, ",{c}");
        }
        if args.brute_force {
            let m0: u32 = stability_minimum(&model).iter().sum();
            let estimate =
                bruteforce_check_count(model.entity_count() as u32, m0, result.total_cores)
                    .map_err(|_| {
                        CliError::guard("estimated brute-force check count overflows".to_string())
                    })?;
            if estimate > u128::from(args.guard) {
                return Err(CliError::guard(format!(
                    "brute force at rate {rate} would need about {estimate} checks (guard {})",
                    args.guard
                )));
            }
            let oracle = brute_force(&model, sized.slo, sized.core_budget, args.guard).map_err(
                |e| match e {
                    DimensioningError::TooLarge { guard } => CliError::guard(format!(
                        "brute force exceeded the {guard}-evaluation guard at rate {rate}"
                    )),
                    other => CliError::input(other.to_string()),
                },
            )?;
            let _ = write!(
                row,
                ",{},{},{},{estimate}",
                oracle.total_cores, oracle.predicted_t, oracle.model_evaluations
            );
        }
        csv_body.push_str(&row);
        csv_body.push('\n');
        println!("{row}");
    }

    if let Some(dir) = args.out {
        let path = write_file(&dir, "dimension.csv", &csv_body)?;
        let mut manifest = RunManifest::new("dimension");
        manifest.scenario = Some(args.scenario.display().to_string());
        manifest.config = serde_json::json!({
            "sweep": rates,
            "brute_force": args.brute_force,
            "guard": args.guard,
        });
        manifest.outputs.push(path.display().to_string());
        manifest.write(&dir)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// simulate

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    let allocation = match (&args.allocation, args.dimension) {
        (Some(path), _) => load_allocation(path, &scenario)?,
        (None, true) => {
            let (_, allocation) =
                dimension_heuristic(&scenario).map_err(|e| CliError::input(e.to_string()))?;
            allocation
        }
        (None, false) => {
            return Err(CliError::input("either --allocation FILE or --dimension is required"))
        }
    };
    let profile = match &args.profile {
        Some(path) => load_profile(path)?,
        None => ArrivalProfile::constant(scenario.ext_rate),
    };
    let family = parse_family(&args.service)?;
    let mut config = SimConfig::new(args.duration, args.warmup, args.seed);
    config.service_dist = KindMap::uniform(family);
    config.batch_count = args.batches;

    let (stats, trace) = simulate_scenario_traced(&scenario, &allocation.cores, &config, &profile)
        .map_err(|e| CliError::input(e.to_string()))?;

    let summary_header = "mean_response,ci95,offered,served,rejected";
    let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let summary_row = format!(
        "{},{},{},{},{}",
        fmt_opt(stats.mean_response),
        fmt_opt(stats.ci95),
        stats.offered,
        stats.served,
        stats.rejected
    );
    println!("{summary_header}");
    println!("{summary_row}");

    if let Some(dir) = args.out {
        let mut outputs = Vec::new();
        let summary = format!("{summary_header}\n{summary_row}\n");
        outputs.push(write_file(&dir, "simulate.csv", &summary)?);

        let mut per_node = String::from(
            "entity,instance,utilization,mean_wait,mean_service,mean_in_system,throughput\n",
        );
        for n in &stats.per_node {
            let _ = writeln!(
                per_node,
                "{},{},{},{},{},{},{}",
                n.entity,
                n.instance,
                n.utilization,
                fmt_opt(n.mean_wait),
                fmt_opt(n.mean_service),
                n.mean_in_system,
                n.throughput
            );
        }
        outputs.push(write_file(&dir, "per_node.csv", &per_node)?);

        if args.trace {
            let mut body =
                String::from("arrival,exit,domain,branch_a_done,branch_b_done,dso2_start\n");
            for sor in &trace {
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{}",
                    sor.arrival,
                    sor.exit,
                    sor.domain,
                    sor.branch_a_done,
                    sor.branch_b_done,
                    sor.dso2_start
                );
            }
            outputs.push(write_file(&dir, "trace.csv", &body)?);
        }

        let mut manifest = RunManifest::new("simulate");
        manifest.scenario = Some(args.scenario.display().to_string());
        manifest.seed = Some(args.seed);
        manifest.config = serde_json::json!({
            "allocation": args.allocation.as_ref().map(|p| p.display().to_string()),
            "dimension": args.dimension,
            "profile": args.profile.as_ref().map(|p| p.display().to_string()),
            "duration": args.duration,
            "warmup": args.warmup,
            "batches": args.batches,
            "service": args.service,
            "cores": allocation.cores,
        });
        manifest.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        manifest.write(&dir)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// drp

fn cmd_drp(args: DrpArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    let profile = load_profile(&args.profile)?;
    let family = parse_family(&args.service)?;

    let mut config = DrpConfig::new(args.duration, args.seed);
    config.control_interval = args.dt;
    config.monitor_window = args.monitor_window;
    config.boot_delay = args.boot_delay;
    config.scale_out_threshold = args.scale_out_threshold;
    config.scale_in_threshold = args.scale_in_threshold;
    config.bucket_depth = args.depth;
    config.service_dist = KindMap::uniform(family);

    let mut predictor: Box<dyn Predictor> = match args.predictor.as_str() {
        "persistence" => Box::new(PersistencePredictor::new(args.margin)),
        "linear" => Box::new(LinearTrendPredictor::new(args.horizon)),
        "oracle" => Box::new(NoisyOraclePredictor::new(
            profile.clone(),
            args.dt,
            args.monitor_window,
            args.oracle_noise,
            args.seed ^ 0x9e3779b97f4a7c15,
        )),
        other => {
            return Err(CliError::input(format!(
                "unknown predictor '{other}' (persistence | linear | oracle)"
            )))
        }
    };

    let timeline = run_drp_loop(&scenario, &profile, predictor.as_mut(), &config)
        .map_err(|e| CliError::input(e.to_string()))?;

    let entities = enumerate_entities(scenario.domains);
    let csv_body = timeline_csv(&timeline, &entities);
    println!(
        "windows: {}  offered: {}  rejected: {}  overall rejection fraction: {:.6}",
        timeline.windows.len(),
        timeline.total_offered,
        timeline.total_rejected,
        timeline.total_rejection_fraction()
    );

    if let Some(dir) = args.out {
        let mut outputs = Vec::new();
        outputs.push(write_file(&dir, "timeline.csv", &csv_body)?);

        let mut events = String::from("requested_at,effective_at,kind,reactive,target_total\n");
        for e in &timeline.scale_events {
            let _ = writeln!(
                events,
                "{},{},{},{},{}",
                e.requested_at,
                e.effective_at,
                match e.kind {
                    nsoskit::drp::ScaleKind::Out => "out",
                    nsoskit::drp::ScaleKind::In => "in",
                },
                e.reactive,
                e.target.iter().sum::<u32>()
            );
        }
        outputs.push(write_file(&dir, "scale_events.csv", &events)?);

        let mut manifest = RunManifest::new("drp");
        manifest.scenario = Some(args.scenario.display().to_string());
        manifest.seed = Some(args.seed);
        manifest.config = serde_json::json!({
            "profile": args.profile.display().to_string(),
            "duration": args.duration,
            "predictor": args.predictor,
            "margin": args.margin,
            "horizon": args.horizon,
            "oracle_noise": args.oracle_noise,
            "dt": args.dt,
            "monitor_window": args.monitor_window,
            "boot_delay": args.boot_delay,
            "scale_out_threshold": args.scale_out_threshold,
            "scale_in_threshold": args.scale_in_threshold,
            "depth": args.depth,
            "service": args.service,
        });
        manifest.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        manifest.write(&dir)?;
    }
    Ok(())
}

fn timeline_csv(timeline: &DrpTimeline, entities: &[EntityId]) -> String {
    let mut header = String::from(
        "start,end,actual_rate,actual_peak_rate,actual_scv,predicted_rate,predicted_scv,\
         target_total,active_total_start,active_total_end,capacity_changed,infeasible,\
         offered,admitted,rejected,completed,mean_response,response_ci95,rejection_fraction,\
         policer_rate_max,policer_depth",
    );
    for e in entities {
        let _ = write!(header, ",target_{e}");
    }
    for e in entities {
        let _ = write!(header, ",active_{e}");
    }
    let mut body = header;
    body.push('\n');
    let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for w in &timeline.windows {
        let _ = write!(
            body,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            w.start,
            w.end,
            w.actual_rate,
            w.actual_peak_rate,
            w.actual_scv,
            w.predicted_rate,
            w.predicted_scv,
            w.target_cores.iter().sum::<u32>(),
            w.active_total_start,
            w.active_total_end,
            w.capacity_changed_mid_window,
            w.infeasible,
            w.offered,
            w.admitted,
            w.rejected,
            w.completed,
            fmt_opt(w.mean_response),
            fmt_opt(w.response_ci95),
            w.rejection_fraction,
            w.policer_rate_max,
            w.policer_depth
        );
        for c in &w.target_cores {
            let _ = write!(body, ",{c}");
        }
        for c in &w.active_cores {
            let _ = write!(body, ",{c}");
        }
        body.push('\n');
    }
    body
}

// ---------------------------------------------------------------------
// complexity

fn time_heuristic(scenario: &NsosScenario, runs: u32) -> Result<f64, CliError> {
    let model = NsosModel::new(scenario);
    // One untimed run to warm caches and pin the result.
    heuristic(&model, scenario.slo, scenario.core_budget)
        .map_err(|e| CliError::input(e.to_string()))?;
    let mut total = 0.0;
    for _ in 0..runs {
        let start = Instant::now();
        let _ = heuristic(&model, scenario.slo, scenario.core_budget)
            .map_err(|e| CliError::input(e.to_string()))?;
        total += start.elapsed().as_secs_f64();
    }
    Ok(total / f64::from(runs))
}

fn uniform_domains(base: &NsosScenario, domains: u32) -> NsosScenario {
    let mut s = base.clone();
    s.domains = domains;
    s.shares = vec![1.0 / f64::from(domains); domains as usize];
    s
}

fn cmd_complexity(args: ComplexityArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    let mut csv_body = String::from("sweep,value,mean_wall_time_s\n");
    let mut fits = serde_json::Map::new();

    if let Some(raw) = &args.lambda_sweep {
        let rates = parse_sweep(raw, "lambda")?;
        let mut times = Vec::new();
        for &rate in &rates {
            let sized = scenario.with_external(rate, scenario.ext_scv);
            let t = time_heuristic(&sized, args.runs)?;
            let _ = writeln!(csv_body, "lambda,{rate},{t}");
            times.push(t);
        }
        let (coeffs, r2) = quadratic_fit(&rates, &times);
        println!(
            "lambda fit: t = {:.3e} + {:.3e} x + {:.3e} x^2   (R^2 = {r2:.4})",
            coeffs[0], coeffs[1], coeffs[2]
        );
        fits.insert(
            "lambda_quadratic".into(),
            serde_json::json!({"c0": coeffs[0], "c1": coeffs[1], "c2": coeffs[2], "r2": r2}),
        );
    }

    if let Some(raw) = &args.tmax_sweep {
        let objectives = parse_sweep(raw, "tmax")?;
        let mut xs = Vec::new();
        let mut times = Vec::new();
        for &t_max in &objectives {
            let mut sized = scenario.clone();
            sized.slo = t_max;
            sized.validate().map_err(|e| CliError::input(format!("tmax {t_max}: {e}")))?;
            let t = time_heuristic(&sized, args.runs)?;
            let _ = writeln!(csv_body, "tmax,{t_max},{t}");
            xs.push((1.0 / t_max).ln());
            times.push(t);
        }
        let (a, b, r2) = linear_fit(&xs, &times);
        println!("tmax fit: t = {a:.3e} + {b:.3e} ln(1/t_max)   (R^2 = {r2:.4})");
        fits.insert(
            "tmax_logarithmic".into(),
            serde_json::json!({"intercept": a, "slope": b, "r2": r2}),
        );
    }

    if let Some(raw) = &args.ndso_sweep {
        let counts = parse_sweep(raw, "ndso")?;
        let mut times = Vec::new();
        for &n in &counts {
            let sized = uniform_domains(&scenario, n as u32);
            sized.validate().map_err(|e| CliError::input(format!("ndso {n}: {e}")))?;
            let t = time_heuristic(&sized, args.runs)?;
            let _ = writeln!(csv_body, "ndso,{n},{t}");
            times.push(t);
        }
        let spread = times.iter().cloned().fold(f64::MIN, f64::max)
            / times.iter().cloned().fold(f64::MAX, f64::min);
        println!("ndso wall-time spread (max/min): {spread:.3}");
        fits.insert("ndso_spread".into(), serde_json::json!({"max_over_min": spread}));
    }

    if let Some(dir) = args.out {
        let mut outputs = Vec::new();
        outputs.push(write_file(&dir, "complexity.csv", &csv_body)?);
        let fits_body =
            serde_json::to_string_pretty(&serde_json::Value::Object(fits)).expect("fits serialize");
        outputs.push(write_file(&dir, "fits.json", &fits_body)?);
        let mut manifest = RunManifest::new("complexity");
        manifest.scenario = Some(args.scenario.display().to_string());
        manifest.config = serde_json::json!({
            "lambda_sweep": args.lambda_sweep,
            "tmax_sweep": args.tmax_sweep,
            "ndso_sweep": args.ndso_sweep,
            "runs": args.runs,
        });
        manifest.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        manifest.write(&dir)?;
    }
    Ok(())
}
