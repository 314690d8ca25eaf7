//! Command-line front end: benchmarking, worker daemon, discovery, scoring,
//! scenario runs, and parameter sweeps.
//!
//! Exit codes: 0 on success, 1 on scenario/runtime errors, 2 on bad usage.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use offkit::decision::{collect_node_scores, partition_task, total_offloading_score, ScoreWeights};
use offkit::domain::{validate_profile, NodeClass, NodeId, NodeProfile};
use offkit::harness::{
    load_scenario, parse_clock, parse_mode, run_scenario, run_sweep, SweepParam, CSV_HEADER,
};
use offkit::net::{
    discover, estimate_rtt, fetch_profile, worker_serve, NodeAddress, Registry, RegistrySource,
    WorkerConfig, DEFAULT_BEACON_PORT, DEFAULT_NET_DEADLINE,
};
use offkit::profiler::{
    benchmark_score, BenchmarkRunner, BenchmarkSuite, LocalRunner, StaticContext, WorkloadSpec,
};

#[derive(Parser)]
#[command(name = "offkit", version, about = "Multisite computation-offloading toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the benchmark workloads locally and print the combined score.
    Bench(BenchArgs),
    /// Start a worker daemon answering profile, benchmark, ping, and task
    /// requests.
    Worker(WorkerArgs),
    /// Print the node registry from a file or a beacon listen window.
    Discover(DiscoverArgs),
    /// Score every registry node and print the partition plan.
    Score(ScoreArgs),
    /// Execute one scenario file and emit CSV rows.
    Run(RunArgs),
    /// Vary cost_per_byte or bandwidth across a range and report the
    /// crossover between two modes.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Timed executions per workload.
    #[arg(long, default_value_t = 5)]
    runs: u32,
    /// Untimed executions discarded before timing.
    #[arg(long, default_value_t = 0)]
    warmup: u32,
    /// Mandelbrot grid edge (width = height).
    #[arg(long, default_value_t = 800)]
    mandelbrot_size: u32,
    #[arg(long, default_value_t = 256)]
    max_iter: u32,
    /// FFT size; must be a power of two.
    #[arg(long, default_value_t = 1 << 20)]
    fft_size: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct WorkerArgs {
    /// host:port to listen on.
    #[arg(long, default_value = "0.0.0.0:47470")]
    listen: String,
    #[arg(long)]
    node_id: String,
    /// mobile | cloudlet | remote_cloud
    #[arg(long)]
    class: String,
    /// on | off
    #[arg(long, default_value = "off")]
    beacon: String,
    /// Where beacons are sent.
    #[arg(long, default_value_t = WorkerConfig::default_beacon_target())]
    beacon_target: String,
    #[arg(long, default_value_t = 1.0)]
    clock_ghz: f64,
    /// Defaults to the machine's parallelism.
    #[arg(long)]
    cores: Option<u32>,
    #[arg(long, default_value_t = 1.0)]
    memory_gb: f64,
    /// Required for mobile-class workers.
    #[arg(long)]
    battery_pct: Option<f64>,
    #[arg(long)]
    charging: Option<bool>,
    /// Benchmark figure to report without running anything.
    #[arg(long)]
    gflops: Option<f64>,
    /// Run the benchmark suite once at startup and report that figure.
    #[arg(long)]
    self_bench: bool,
}

#[derive(Args)]
struct DiscoverArgs {
    /// Static registry file.
    #[arg(long, conflicts_with = "beacons")]
    registry: Option<PathBuf>,
    /// Collect UDP beacons instead of reading a file.
    #[arg(long)]
    beacons: bool,
    #[arg(long, default_value_t = DEFAULT_BEACON_PORT)]
    port: u16,
    /// Beacon listen window, seconds.
    #[arg(long, default_value_t = 2.0)]
    window_s: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    registry: PathBuf,
    /// Node treated as the offloader; defaults to the first entry.
    #[arg(long)]
    local: Option<String>,
    /// Payload size fed into the network-cost term.
    #[arg(long, default_value_t = 0)]
    task_bytes: u64,
    /// Probe payload for RTT estimation.
    #[arg(long, default_value_t = 0)]
    probe_bytes: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario clock: wall | sim.
    #[arg(long)]
    clock: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// cost_per_byte | bandwidth
    #[arg(long, default_value = "cost_per_byte")]
    param: String,
    #[arg(long, default_value_t = 10.0)]
    from: f64,
    #[arg(long, default_value_t = 10_000.0)]
    to: f64,
    #[arg(long, default_value_t = 20)]
    steps: u32,
    /// Baseline mode, e.g. local_only.
    #[arg(long, default_value = "local_only")]
    mode_a: String,
    /// Challenger mode; defaults to full_offload:<target>.
    #[arg(long)]
    mode_b: Option<String>,
    /// Target node for the default challenger mode; defaults to the first
    /// offloadee in the registry.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Bench(args) => cmd_bench(args),
        Command::Worker(args) => cmd_worker(args),
        Command::Discover(args) => cmd_discover(args),
        Command::Score(args) => cmd_score(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn runtime_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn cmd_bench(args: BenchArgs) -> ExitCode {
    let runner = LocalRunner { warmup_runs: args.warmup };
    let mandelbrot_spec = WorkloadSpec::Mandelbrot {
        width: args.mandelbrot_size,
        height: args.mandelbrot_size,
        max_iter: args.max_iter,
    };
    let fft_spec = WorkloadSpec::Fft { size: args.fft_size };
    let mandelbrot = match runner.run(&mandelbrot_spec, args.runs, Duration::MAX) {
        Ok(r) => r,
        Err(e) => return runtime_error(e),
    };
    let fft = match runner.run(&fft_spec, args.runs, Duration::MAX) {
        Ok(r) => r,
        Err(e) => return runtime_error(e),
    };
    let score = benchmark_score(&mandelbrot, &fft);
    if args.json {
        let out = serde_json::json!({
            "mandelbrot": mandelbrot,
            "fft": fft,
            "benchmark_gflops": score,
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
    } else {
        println!(
            "mandelbrot  runs={}  mean_runtime_s={:.6}  gflops={:.4}",
            mandelbrot.runs, mandelbrot.mean_runtime_s, mandelbrot.gflops
        );
        println!(
            "fft         runs={}  mean_runtime_s={:.6}  gflops={:.4}",
            fft.runs, fft.mean_runtime_s, fft.gflops
        );
        println!("benchmark score (mean gflops): {score:.4}");
    }
    ExitCode::SUCCESS
}

fn parse_class(s: &str) -> Result<NodeClass, String> {
    match s {
        "mobile" => Ok(NodeClass::Mobile),
        "cloudlet" => Ok(NodeClass::Cloudlet),
        "remote_cloud" | "cloud" => Ok(NodeClass::RemoteCloud),
        other => Err(format!("unknown class `{other}` (mobile|cloudlet|remote_cloud)")),
    }
}

fn cmd_worker(args: WorkerArgs) -> ExitCode {
    let class = match parse_class(&args.class) {
        Ok(c) => c,
        Err(e) => return usage_error(e),
    };
    let cores = args.cores.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get() as u32).unwrap_or(1)
    });
    let context = StaticContext {
        node_id: NodeId::new(args.node_id),
        class,
        cpu_clock_ghz: args.clock_ghz,
        cpu_cores: cores,
        memory_gb: args.memory_gb,
        battery_level_pct: args.battery_pct,
        charging: args.charging,
    };
    let mut benchmark_gflops = args.gflops.unwrap_or(0.0);
    if args.self_bench {
        eprintln!("running benchmark suite...");
        let runner = LocalRunner::default();
        let suite = BenchmarkSuite::default();
        let mandelbrot = match runner.run(&suite.mandelbrot, suite.runs, Duration::MAX) {
            Ok(r) => r,
            Err(e) => return runtime_error(e),
        };
        let fft = match runner.run(&suite.fft, suite.runs, Duration::MAX) {
            Ok(r) => r,
            Err(e) => return runtime_error(e),
        };
        benchmark_gflops = benchmark_score(&mandelbrot, &fft);
        eprintln!("benchmark score: {benchmark_gflops:.4} gflops");
    }
    // Reject an invalid static context (e.g. a mobile without battery
    // flags) before binding.
    let probe = NodeProfile {
        node_id: context.node_id.clone(),
        class,
        benchmark_gflops,
        cpu_clock_ghz: context.cpu_clock_ghz,
        cpu_cores: context.cpu_cores,
        memory_gb: context.memory_gb,
        battery_level_pct: context.battery_level_pct,
        charging: context.charging,
    };
    if let Err(e) = validate_profile(&probe) {
        return usage_error(e);
    }
    let beacon_target = match args.beacon.as_str() {
        "on" => Some(args.beacon_target),
        "off" => None,
        other => return usage_error(format!("--beacon takes on|off, got `{other}`")),
    };
    let config =
        WorkerConfig { listen: args.listen.clone(), context, benchmark_gflops, beacon_target };
    eprintln!("listening on {}", args.listen);
    match worker_serve(config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => runtime_error(e),
    }
}

fn cmd_discover(args: DiscoverArgs) -> ExitCode {
    let source = if args.beacons {
        RegistrySource::Beacons {
            listen_port: args.port,
            window: Duration::from_secs_f64(args.window_s),
        }
    } else {
        match args.registry {
            Some(path) => RegistrySource::File(path),
            None => return usage_error("pass --registry <file> or --beacons"),
        }
    };
    let registry = match discover(&source) {
        Ok(r) => r,
        Err(e) => return runtime_error(e),
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&registry).expect("serializable"));
    } else {
        println!("{:<16} {:<14} {:<22} link", "node_id", "class", "address");
        for entry in registry.entries.values() {
            let link = entry
                .link
                .map(|l| format!("{}s, {} B/s", l.latency_s, l.bandwidth_bytes_per_s))
                .unwrap_or_else(|| "-".into());
            println!("{:<16} {:<14} {:<22} {link}", entry.node_id, entry.class, entry.address);
        }
    }
    ExitCode::SUCCESS
}

fn cmd_score(args: ScoreArgs) -> ExitCode {
    let registry: Registry = match discover(&RegistrySource::File(args.registry)) {
        Ok(r) => r,
        Err(e) => return runtime_error(e),
    };
    if registry.is_empty() {
        return runtime_error("registry is empty");
    }
    let local_id = match &args.local {
        Some(id) => NodeId::new(id.clone()),
        None => registry.entries.keys().next().expect("non-empty").clone(),
    };
    let local_entry = match registry.get(&local_id) {
        Some(e) => e,
        None => return usage_error(format!("--local `{local_id}` not in registry")),
    };
    let profile_of = |entry: &offkit::net::RegistryEntry| -> Result<NodeProfile, String> {
        if let Some(p) = &entry.profile {
            return Ok(p.clone());
        }
        match &entry.address {
            NodeAddress::Socket(addr) => fetch_profile(addr, DEFAULT_NET_DEADLINE)
                .map_err(|e| format!("{}: {e}", entry.node_id)),
            NodeAddress::Simulated => Err(format!("entry `{}` has no profile", entry.node_id)),
        }
    };
    let local_profile = match profile_of(local_entry) {
        Ok(p) => p,
        Err(e) => return runtime_error(e),
    };
    let mut connected = Vec::new();
    for entry in registry.entries.values().filter(|e| e.node_id != local_id) {
        let profile = match profile_of(entry) {
            Ok(p) => p,
            Err(e) => return runtime_error(e),
        };
        let rtt = match estimate_rtt(entry, args.probe_bytes, args.task_bytes, DEFAULT_NET_DEADLINE)
        {
            Ok(r) => r,
            Err(e) => return runtime_error(format!("{}: {e}", entry.node_id)),
        };
        connected.push((profile, rtt));
    }
    let scores = match collect_node_scores(&local_profile, &connected, &ScoreWeights::default()) {
        Ok(s) => s,
        Err(e) => return runtime_error(e),
    };
    let total = total_offloading_score(&scores);
    let plan = partition_task(&scores);
    if args.json {
        let out = serde_json::json!({
            "scores": scores,
            "total_offloading_score": total,
            "plan": plan,
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
    } else {
        println!("{:<16} {:>12} {:>9} {:>12}", "node_id", "score", "eligible", "share_pct");
        for score in scores.scores.values() {
            let share = plan
                .shares
                .get(&score.node_id)
                .map(|s| format!("{s:.6}"))
                .unwrap_or_else(|| "-".into());
            println!(
                "{:<16} {:>12.6} {:>9} {:>12}",
                score.node_id, score.score, score.eligible, share
            );
        }
        println!("total offloading score (sum of |score|): {total:.6}");
    }
    ExitCode::SUCCESS
}

fn write_csv(out: Option<&PathBuf>, lines: &[String]) -> Result<(), std::io::Error> {
    match out {
        Some(path) => std::fs::write(path, lines.join("\n") + "\n"),
        None => {
            for line in lines {
                println!("{line}");
            }
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> ExitCode {
    if !args.scenario.exists() {
        return usage_error(format!("scenario file not found: {}", args.scenario.display()));
    }
    let mut loaded = match load_scenario(&args.scenario) {
        Ok(l) => l,
        Err(e) => return runtime_error(e),
    };
    if let Some(seed) = args.seed {
        loaded.scenario.seed = seed;
    }
    if let Some(clock) = &args.clock {
        match parse_clock(clock) {
            Ok(c) => loaded.scenario.cfg.clock = c,
            Err(e) => return usage_error(e),
        }
    }
    let run = match run_scenario(&loaded) {
        Ok(r) => r,
        Err(e) => return runtime_error(e),
    };
    let mut lines = vec![CSV_HEADER.to_string()];
    lines.extend(run.rows.iter().map(|r| r.to_line()));
    if let Err(e) = write_csv(args.out.as_ref(), &lines) {
        return runtime_error(e);
    }
    if run.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for (mode, err) in &run.failures {
            eprintln!("mode {mode} failed: {err}");
        }
        ExitCode::from(1)
    }
}

fn cmd_sweep(args: SweepArgs) -> ExitCode {
    if !args.scenario.exists() {
        return usage_error(format!("scenario file not found: {}", args.scenario.display()));
    }
    let loaded = match load_scenario(&args.scenario) {
        Ok(l) => l,
        Err(e) => return runtime_error(e),
    };
    let param = match args.param.as_str() {
        "cost_per_byte" => SweepParam::CostPerByte,
        "bandwidth" => SweepParam::Bandwidth,
        other => return usage_error(format!("unknown --param `{other}`")),
    };
    let mode_a = match parse_mode(&args.mode_a) {
        Ok(m) => m,
        Err(e) => return usage_error(e),
    };
    let mode_b_text = match args.mode_b {
        Some(text) => text,
        None => {
            let local = loaded.scenario.cfg.local_node_id.clone();
            let target = match args.target {
                Some(t) => t,
                None => match loaded
                    .registry
                    .entries
                    .keys()
                    .find(|id| Some(*id) != local.as_ref())
                {
                    Some(id) => id.to_string(),
                    None => return usage_error("registry has no offloadee to target"),
                },
            };
            format!("full_offload:{target}")
        }
    };
    let mode_b = match parse_mode(&mode_b_text) {
        Ok(m) => m,
        Err(e) => return usage_error(e),
    };
    let result = match run_sweep(&loaded, param, args.from, args.to, args.steps, &mode_a, &mode_b) {
        Ok(r) => r,
        Err(e) => return runtime_error(e),
    };
    let mut lines = vec![format!("{param},{}_s,{}_s,winner", result.mode_a, result.mode_b)];
    for point in &result.points {
        let winner = match point.winner() {
            "a" => result.mode_a.to_string(),
            _ => result.mode_b.to_string(),
        };
        lines.push(format!(
            "{:.6},{:.6},{:.6},{winner}",
            point.value, point.makespan_a, point.makespan_b
        ));
    }
    if let Err(e) = write_csv(args.out.as_ref(), &lines) {
        return runtime_error(e);
    }
    match result.crossover {
        Some(value) => eprintln!("crossover: winner flips at {param} = {value:.6}"),
        None => eprintln!("no crossover inside the swept range"),
    }
    ExitCode::SUCCESS
}
