//! Experiment harness: corpus generation, scenario files, CSV results, and
//! parameter sweeps.
//!
//! Scenario files are JSON. The named corpus sizes reproduce fixed word
//! counts (39,799 / 316,323 / 1,095,649); texts are synthetic ASCII from a
//! seeded generator so every run is reproducible byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ExecutionMode, NodeId, SearchTask};
use crate::net::Registry;
use crate::orchestrator::{
    execute, run_repeated, ClockMode, OrchestratorConfig, OrchestratorError, DEFAULT_COST_PER_BYTE,
};
use crate::rng::SplitMix64;

pub const SMALL_CORPUS_WORDS: u64 = 39_799;
pub const MEDIUM_CORPUS_WORDS: u64 = 316_323;
pub const LARGE_CORPUS_WORDS: u64 = 1_095_649;

/// CSV header emitted ahead of scenario rows.
pub const CSV_HEADER: &str =
    "scenario,mode,corpus_words,nodes,shares_pct,mean_s,min_s,max_s,transfer_s_total,compute_s_max,timeouts";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("{0}: {1}")]
    Io(PathBuf, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedSize {
    Small,
    Medium,
    Large,
}

/// Corpus selector: a named size or an explicit word count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorpusSize {
    Named(NamedSize),
    Explicit { words: u64 },
}

impl CorpusSize {
    pub fn words(&self) -> u64 {
        match self {
            CorpusSize::Named(NamedSize::Small) => SMALL_CORPUS_WORDS,
            CorpusSize::Named(NamedSize::Medium) => MEDIUM_CORPUS_WORDS,
            CorpusSize::Named(NamedSize::Large) => LARGE_CORPUS_WORDS,
            CorpusSize::Explicit { words } => *words,
        }
    }
}

/// Registry reference in a scenario file: a path (resolved relative to the
/// scenario file) or an inline entry array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegistryRef {
    Path(String),
    Inline(Registry),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub registry: RegistryRef,
    pub corpus: CorpusSize,
    /// Search keyword. When absent, a word is sampled from the generated
    /// corpus at a seeded position, guaranteeing at least one match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    pub modes: Vec<ExecutionMode>,
    #[serde(default)]
    pub cfg: OrchestratorConfig,
    #[serde(default = "default_cost_per_byte")]
    pub cost_per_byte: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_cost_per_byte() -> f64 {
    DEFAULT_COST_PER_BYTE
}

/// A scenario with its registry reference resolved.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub registry: Registry,
}

/// Parses a scenario file and resolves its registry.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario, HarnessError> {
    let bytes =
        std::fs::read(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e.to_string()))?;
    let scenario: Scenario = serde_json::from_slice(&bytes)
        .map_err(|e| HarnessError::Scenario(format!("{}: {e}", path.display())))?;
    let registry = resolve_registry(&scenario.registry, path.parent())?;
    Ok(LoadedScenario { scenario, registry })
}

pub fn resolve_registry(
    registry: &RegistryRef,
    base_dir: Option<&Path>,
) -> Result<Registry, HarnessError> {
    match registry {
        RegistryRef::Inline(reg) => Ok(reg.clone()),
        RegistryRef::Path(rel) => {
            let mut path = PathBuf::from(rel);
            if path.is_relative() {
                if let Some(dir) = base_dir {
                    path = dir.join(path);
                }
            }
            let bytes =
                std::fs::read(&path).map_err(|e| HarnessError::Io(path.clone(), e.to_string()))?;
            serde_json::from_slice(&bytes)
                .map_err(|e| HarnessError::Scenario(format!("{}: {e}", path.display())))
        }
    }
}

/// Deterministic ASCII corpus: `words` space-separated lowercase
/// pseudo-words of length 3-9. Identical (words, seed) pairs produce
/// identical bytes.
pub fn generate_corpus(words: u64, seed: u64) -> Vec<u8> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(words as usize * 8);
    for i in 0..words {
        if i > 0 {
            out.push(b' ');
        }
        let len = 3 + rng.next_below(7); // 3..=9
        for _ in 0..len {
            out.push(b'a' + rng.next_below(26) as u8);
        }
    }
    out
}

/// Samples one word of the corpus at a seeded position.
pub fn sample_pattern(text: &[u8], seed: u64) -> Option<Vec<u8>> {
    let words: Vec<&[u8]> = text.split(|b| *b == b' ').filter(|w| !w.is_empty()).collect();
    if words.is_empty() {
        return None;
    }
    let mut rng = SplitMix64::new(seed ^ 0x7061_7474_6572_6e00); // decorrelate from corpus stream
    Some(words[rng.next_below(words.len() as u64) as usize].to_vec())
}

/// Builds the search task a scenario describes.
pub fn build_task(scenario: &Scenario) -> Result<SearchTask, HarnessError> {
    let text = generate_corpus(scenario.corpus.words(), scenario.seed);
    let pattern = match &scenario.pattern {
        Some(p) if !p.is_empty() => p.clone().into_bytes(),
        Some(_) => return Err(HarnessError::Scenario("pattern must be non-empty".into())),
        None => sample_pattern(&text, scenario.seed).ok_or_else(|| {
            HarnessError::Scenario("cannot sample a pattern from an empty corpus".into())
        })?,
    };
    Ok(SearchTask::new(format!("{}#{}", scenario.name, scenario.seed), text, pattern))
}

/// One results row: a (mode, node-set) combination of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scenario: String,
    pub mode: String,
    pub corpus_words: u64,
    pub nodes: String,
    pub shares_pct: String,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub transfer_s_total: f64,
    pub compute_s_max: f64,
    pub timeouts: usize,
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            self.scenario,
            self.mode,
            self.corpus_words,
            self.nodes,
            self.shares_pct,
            self.mean_s,
            self.min_s,
            self.max_s,
            self.transfer_s_total,
            self.compute_s_max,
            self.timeouts
        )
    }
}

/// Rows plus per-mode failures; a failed mode does not stop the rest.
#[derive(Debug)]
pub struct ScenarioRun {
    pub rows: Vec<CsvRow>,
    pub failures: Vec<(String, OrchestratorError)>,
}

/// Runs every mode of a scenario and collects one CSV row per mode.
pub fn run_scenario(loaded: &LoadedScenario) -> Result<ScenarioRun, HarnessError> {
    let scenario = &loaded.scenario;
    let task = build_task(scenario)?;
    let mut rows = Vec::with_capacity(scenario.modes.len());
    let mut failures = Vec::new();
    for mode in &scenario.modes {
        match run_repeated(&task, mode, &loaded.registry, &scenario.cfg, scenario.cost_per_byte) {
            Ok(summary) => {
                let report = &summary.reports[0];
                let (nodes, shares_pct) = match &report.plan {
                    Some(plan) => {
                        let nodes: Vec<String> = plan.shares.keys().map(|n| n.to_string()).collect();
                        let shares: Vec<String> =
                            plan.shares.values().map(|s| format!("{s:.6}")).collect();
                        (nodes.join("|"), shares.join("|"))
                    }
                    None => {
                        let nodes: Vec<String> =
                            report.records.iter().map(|r| r.node_id.to_string()).collect();
                        (nodes.join("|"), "100.000000".to_string())
                    }
                };
                let transfer_s_total: f64 =
                    report.records.iter().map(|r| r.transfer_out_s + r.transfer_back_s).sum();
                let compute_s_max =
                    report.records.iter().map(|r| r.compute_s).fold(0.0f64, f64::max);
                let timeouts = summary.reports.iter().map(|r| r.timeouts()).sum();
                rows.push(CsvRow {
                    scenario: scenario.name.clone(),
                    mode: mode.to_string(),
                    corpus_words: scenario.corpus.words(),
                    nodes,
                    shares_pct,
                    mean_s: summary.mean_s,
                    min_s: summary.min_s,
                    max_s: summary.max_s,
                    transfer_s_total,
                    compute_s_max,
                    timeouts,
                });
            }
            Err(e) => failures.push((mode.to_string(), e)),
        }
    }
    Ok(ScenarioRun { rows, failures })
}

/// Swept knob: the simulated workload density, or the bandwidth of every
/// simulated link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    CostPerByte,
    Bandwidth,
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepParam::CostPerByte => f.write_str("cost_per_byte"),
            SweepParam::Bandwidth => f.write_str("bandwidth"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub makespan_a: f64,
    pub makespan_b: f64,
}

impl SweepPoint {
    pub fn winner(&self) -> &'static str {
        if self.makespan_a <= self.makespan_b {
            "a"
        } else {
            "b"
        }
    }
}

#[derive(Debug)]
pub struct SweepResult {
    pub mode_a: ExecutionMode,
    pub mode_b: ExecutionMode,
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
    /// First swept value at which the winner differs from the first point.
    pub crossover: Option<f64>,
}

/// Runs two modes across a linear parameter range and reports where the
/// faster one flips.
pub fn run_sweep(
    loaded: &LoadedScenario,
    param: SweepParam,
    from: f64,
    to: f64,
    steps: u32,
    mode_a: &ExecutionMode,
    mode_b: &ExecutionMode,
) -> Result<SweepResult, HarnessError> {
    if steps < 2 {
        return Err(HarnessError::Scenario("sweep needs at least 2 steps".into()));
    }
    if !(from.is_finite() && to.is_finite()) || from <= 0.0 || to <= 0.0 {
        return Err(HarnessError::Scenario("sweep range must be positive and finite".into()));
    }
    let scenario = &loaded.scenario;
    let task = build_task(scenario)?;
    let mut points = Vec::with_capacity(steps as usize);
    for i in 0..steps {
        let value = from + (to - from) * i as f64 / (steps - 1) as f64;
        let (registry, cost_per_byte) = match param {
            SweepParam::CostPerByte => (loaded.registry.clone(), value),
            SweepParam::Bandwidth => {
                let mut registry = loaded.registry.clone();
                for entry in registry.entries.values_mut() {
                    if let Some(link) = entry.link.as_mut() {
                        link.bandwidth_bytes_per_s = value;
                    }
                }
                (registry, scenario.cost_per_byte)
            }
        };
        let run = |mode: &ExecutionMode| {
            execute(&task, mode, &registry, &scenario.cfg, cost_per_byte)
                .map(|o| o.report.total_makespan_s)
                .map_err(|e| HarnessError::Scenario(format!("{param}={value}: {e}")))
        };
        points.push(SweepPoint { value, makespan_a: run(mode_a)?, makespan_b: run(mode_b)? });
    }
    let crossover =
        points.iter().find(|p| p.winner() != points[0].winner()).map(|p| p.value);
    Ok(SweepResult { mode_a: mode_a.clone(), mode_b: mode_b.clone(), param, points, crossover })
}

/// Parses a mode written as `local_only`, `partial_equal`,
/// `partial_engine_multi_site`, `full_offload:<node>`, or
/// `partial_engine_single_site:<node>`.
pub fn parse_mode(s: &str) -> Result<ExecutionMode, HarnessError> {
    let (name, target) = match s.split_once(':') {
        Some((name, target)) => (name, Some(target)),
        None => (s, None),
    };
    let need_target = || {
        target.map(NodeId::new).ok_or_else(|| {
            HarnessError::Scenario(format!("mode `{name}` needs a target, e.g. `{name}:cloudlet`"))
        })
    };
    match name {
        "local_only" => Ok(ExecutionMode::LocalOnly),
        "partial_equal" => Ok(ExecutionMode::PartialEqual),
        "partial_engine_multi_site" => Ok(ExecutionMode::PartialEngineMultiSite),
        "full_offload" => Ok(ExecutionMode::FullOffload { target: need_target()? }),
        "partial_engine_single_site" => {
            Ok(ExecutionMode::PartialEngineSingleSite { target: need_target()? })
        }
        other => Err(HarnessError::Scenario(format!("unknown mode `{other}`"))),
    }
}

/// The clock flag accepted by the CLI (`wall` or `sim`).
pub fn parse_clock(s: &str) -> Result<ClockMode, HarnessError> {
    match s {
        "wall" => Ok(ClockMode::Wall),
        "sim" | "simulated" => Ok(ClockMode::Simulated),
        other => Err(HarnessError::Scenario(format!("unknown clock `{other}` (wall|sim)"))),
    }
}
