//! Batch experiment driver: runs the (profile × scenario × validation)
//! matrix, aggregates trigger ratios, measures validator overhead, and
//! writes reports.
//!
//! Everything a report file contains is a pure function of the config and
//! seed — except wall-clock overhead numbers, which live in their own file
//! so the deterministic outputs diff clean across machines and runs.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentProfile, BindingMode, PlanningLatency};
use crate::page::ObservationMode;
use crate::rng::derive_seed;
use crate::runner::{self, LoopConfig, RunError, RunResult, DEFAULT_RESIDUAL_WINDOW_MS};
use crate::scenario::{self, LoadError, ManipulationType, Scenario};

/// Default planning latency for the vulnerable baseline profiles (ms).
pub const DEFAULT_VULNERABLE_LATENCY_MS: u64 = 10_000;
/// Default repetition count per matrix cell.
pub const DEFAULT_REPETITIONS: u32 = 10;

/// One agent profile row in a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub name: String,
    pub obs: ObservationMode,
    pub binding: BindingMode,
    pub latency: PlanningLatency,
}

impl ProfileSpec {
    pub fn to_profile(&self) -> AgentProfile {
        AgentProfile {
            name: self.name.clone(),
            obs_mode: self.obs,
            binding: self.binding,
            latency: self.latency,
        }
    }
}

fn default_repetitions() -> u32 {
    DEFAULT_REPETITIONS
}

fn default_residual() -> u64 {
    DEFAULT_RESIDUAL_WINDOW_MS
}

fn default_max_iterations() -> u32 {
    3
}

fn default_modes() -> Vec<bool> {
    vec![false, true]
}

/// A whole experiment: which scenarios, which profiles, validation on/off,
/// how many seeded repetitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bundled ids (`s1`..`s9`) or paths to scenario files.
    pub scenarios: Vec<String>,
    pub profiles: Vec<ProfileSpec>,
    /// Validation modes to run; `false` = baseline, `true` = mitigated.
    #[serde(default = "default_modes")]
    pub validation: Vec<bool>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    pub seed: u64,
    #[serde(default = "default_residual")]
    pub residual_window_ms: u64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u32,
    #[serde(default)]
    pub delivery_delay_ms: u64,
}

impl ExperimentConfig {
    /// The full bundled suite against the two baseline profiles, mirroring
    /// the default evaluation grid.
    pub fn default_matrix(seed: u64) -> Self {
        Self {
            scenarios: scenario::bundled_ids()
                .iter()
                .map(|s| s.to_string())
                .collect(),
            profiles: vec![
                ProfileSpec {
                    name: "coordinate".into(),
                    obs: ObservationMode::Screenshot,
                    binding: BindingMode::Coordinate,
                    latency: PlanningLatency::Fixed {
                        ms: DEFAULT_VULNERABLE_LATENCY_MS,
                    },
                },
                ProfileSpec {
                    name: "selector".into(),
                    obs: ObservationMode::Structured,
                    binding: BindingMode::ElementSelector,
                    latency: PlanningLatency::Fixed {
                        ms: DEFAULT_VULNERABLE_LATENCY_MS,
                    },
                },
            ],
            validation: vec![false, true],
            repetitions: DEFAULT_REPETITIONS,
            seed,
            residual_window_ms: DEFAULT_RESIDUAL_WINDOW_MS,
            max_iterations: 3,
            delivery_delay_ms: 0,
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: ExperimentConfig = serde_json::from_str(&raw)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.scenarios.is_empty() || self.profiles.is_empty() || self.validation.is_empty() {
            return Err(HarnessError::EmptyMatrix);
        }
        if self.repetitions == 0 {
            return Err(HarnessError::BadConfig(
                "repetitions must be at least 1".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(HarnessError::BadConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Aggregate for one (profile, scenario, validation) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellReport {
    pub profile: String,
    pub scenario: String,
    pub scenario_type: ManipulationType,
    pub validation: bool,
    pub runs: u32,
    pub triggers: u32,
    /// Any-run rule: one violating repetition marks the whole cell.
    pub trigger_flag: bool,
    pub oracle_passes: u32,
}

/// Trigger ratio per manipulation type for one (profile, validation) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeRatio {
    pub profile: String,
    pub validation: bool,
    pub scenario_type: ManipulationType,
    pub cases: u32,
    pub triggered_cases: u32,
    pub ratio: f64,
}

/// Wall-clock validator cost, aggregated per scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub per_scenario: BTreeMap<String, OverheadStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadStat {
    pub cycles: u64,
    pub mean_ms: f64,
    pub max_ms: f64,
}

/// Deterministic part of the report: cells plus ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub cells: Vec<CellReport>,
    pub ratios: Vec<TypeRatio>,
}

/// Full output of a matrix run.
#[derive(Debug, Clone)]
pub struct Report {
    pub summary: Summary,
    /// Raw per-run results, in deterministic cell order.
    pub results: Vec<RunResult>,
    /// Wall-clock numbers; segregated from the deterministic outputs.
    pub overhead: OverheadReport,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    BadConfig(String),
    #[error("config selects an empty matrix")]
    EmptyMatrix,
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("run failed: {0}")]
    Run(#[from] RunError),
    #[error("internal invariant breach: {0}")]
    Internal(String),
}

impl HarnessError {
    /// Process exit code: 2 for config/load problems, 3 for internal errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Internal(_) | HarnessError::Run(_) => 3,
            _ => 2,
        }
    }
}

/// Resolves a scenario reference: bundled id first, then filesystem path.
pub fn resolve_scenario(reference: &str) -> Result<Scenario, LoadError> {
    if scenario::bundled_source(&reference.to_ascii_lowercase()).is_some() {
        scenario::load_bundled(reference)
    } else {
        scenario::load_scenario(reference)
    }
}

struct Cell {
    profile_idx: usize,
    scenario_idx: usize,
    mode_idx: usize,
    seed: u64,
}

/// Runs the whole matrix. Cells execute in parallel up to `jobs` threads;
/// per-run seeds derive from the cell coordinates so the outcome is
/// identical regardless of scheduling.
pub fn run_matrix(config: &ExperimentConfig, jobs: usize) -> Result<Report, HarnessError> {
    config.validate()?;
    let scenarios: Vec<Scenario> = config
        .scenarios
        .iter()
        .map(|s| resolve_scenario(s))
        .collect::<Result<_, _>>()?;
    let profiles: Vec<AgentProfile> = config.profiles.iter().map(|p| p.to_profile()).collect();

    let mut cells = Vec::new();
    for (profile_idx, _) in profiles.iter().enumerate() {
        for (scenario_idx, _) in scenarios.iter().enumerate() {
            for (mode_idx, _) in config.validation.iter().enumerate() {
                for repetition in 0..config.repetitions {
                    let seed = derive_seed(&[
                        config.seed,
                        profile_idx as u64,
                        scenario_idx as u64,
                        mode_idx as u64,
                        repetition as u64,
                    ]);
                    cells.push(Cell {
                        profile_idx,
                        scenario_idx,
                        mode_idx,
                        seed,
                    });
                }
            }
        }
    }

    let jobs = jobs.max(1).min(cells.len().max(1));
    let results: Mutex<Vec<Option<Result<RunResult, RunError>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= cells.len() {
                    break;
                }
                let cell = &cells[idx];
                let loop_config = LoopConfig {
                    validation_enabled: config.validation[cell.mode_idx],
                    residual_window_ms: config.residual_window_ms,
                    max_iterations: config.max_iterations,
                    observer_config: crate::monitor::ObserverConfig {
                        delivery_delay_ms: config.delivery_delay_ms,
                        ..Default::default()
                    },
                    capture_states: false,
                };
                let outcome = runner::run_case(
                    &scenarios[cell.scenario_idx],
                    &profiles[cell.profile_idx],
                    &loop_config,
                    cell.seed,
                );
                results.lock().expect("results lock")[idx] = Some(outcome);
            });
        }
    });

    let collected = results.into_inner().expect("results lock");
    let mut runs = Vec::with_capacity(cells.len());
    for slot in collected {
        match slot {
            Some(Ok(result)) => runs.push(result),
            Some(Err(e)) => return Err(e.into()),
            None => {
                return Err(HarnessError::Internal(
                    "a matrix cell produced no result".into(),
                ))
            }
        }
    }

    let summary = summarize(config, &scenarios, &profiles, &cells, &runs)?;
    let overhead = collect_overhead(&cells, &runs, &scenarios, &config.validation);

    Ok(Report {
        summary,
        results: runs,
        overhead,
    })
}

fn summarize(
    config: &ExperimentConfig,
    scenarios: &[Scenario],
    profiles: &[AgentProfile],
    cells: &[Cell],
    runs: &[RunResult],
) -> Result<Summary, HarnessError> {
    let mut per_cell: BTreeMap<(usize, usize, usize), CellReport> = BTreeMap::new();
    for (cell, run) in cells.iter().zip(runs) {
        let key = (cell.profile_idx, cell.scenario_idx, cell.mode_idx);
        let entry = per_cell.entry(key).or_insert_with(|| CellReport {
            profile: profiles[cell.profile_idx].name.clone(),
            scenario: scenarios[cell.scenario_idx].id.clone(),
            scenario_type: scenarios[cell.scenario_idx].ty,
            validation: config.validation[cell.mode_idx],
            runs: 0,
            triggers: 0,
            trigger_flag: false,
            oracle_passes: 0,
        });
        entry.runs += 1;
        if run.triggered {
            entry.triggers += 1;
        }
        if run.oracle_pass {
            entry.oracle_passes += 1;
        }
    }
    let cells_out: Vec<CellReport> = per_cell
        .into_values()
        .map(|mut c| {
            c.trigger_flag = c.triggers > 0;
            c
        })
        .collect();

    let mut ratios = Vec::new();
    for profile in profiles {
        for &validation in &config.validation {
            for ty in [
                ManipulationType::I,
                ManipulationType::II,
                ManipulationType::III,
            ] {
                let relevant: Vec<&CellReport> = cells_out
                    .iter()
                    .filter(|c| {
                        c.profile == profile.name
                            && c.validation == validation
                            && c.scenario_type == ty
                    })
                    .collect();
                if relevant.is_empty() {
                    continue;
                }
                let cases = relevant.len() as u32;
                let triggered_cases = relevant.iter().filter(|c| c.trigger_flag).count() as u32;
                ratios.push(TypeRatio {
                    profile: profile.name.clone(),
                    validation,
                    scenario_type: ty,
                    cases,
                    triggered_cases,
                    ratio: f64::from(triggered_cases) / f64::from(cases),
                });
            }
        }
    }

    for ratio in &ratios {
        if !(0.0..=1.0).contains(&ratio.ratio) {
            return Err(HarnessError::Internal(format!(
                "trigger ratio out of range: {}",
                ratio.ratio
            )));
        }
    }

    Ok(Summary {
        seed: config.seed,
        cells: cells_out,
        ratios,
    })
}

fn collect_overhead(
    cells: &[Cell],
    runs: &[RunResult],
    scenarios: &[Scenario],
    modes: &[bool],
) -> OverheadReport {
    let mut samples: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for (cell, run) in cells.iter().zip(runs) {
        if !modes[cell.mode_idx] {
            continue;
        }
        samples
            .entry(scenarios[cell.scenario_idx].id.clone())
            .or_default()
            .extend(run.validator_wall_ns());
    }
    let per_scenario = samples
        .into_iter()
        .filter(|(_, ns)| !ns.is_empty())
        .map(|(id, ns)| {
            let cycles = ns.len() as u64;
            let mean_ms = ns.iter().sum::<u64>() as f64 / ns.len() as f64 / 1e6;
            let max_ms = ns.iter().copied().max().unwrap_or(0) as f64 / 1e6;
            (
                id,
                OverheadStat {
                    cycles,
                    mean_ms,
                    max_ms,
                },
            )
        })
        .collect();
    OverheadReport { per_scenario }
}

/// Runs only the validation-enabled half of the matrix and reports validator
/// wall cost per cycle. Virtual time is unaffected by the measurement.
pub fn measure_overhead(
    config: &ExperimentConfig,
    jobs: usize,
) -> Result<OverheadReport, HarnessError> {
    let mut on_only = config.clone();
    on_only.validation = vec![true];
    Ok(run_matrix(&on_only, jobs)?.overhead)
}

/// Output formats for `emit_report`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Human-readable trigger grid.
    Grid,
    /// Machine-readable summary + raw trace archive.
    Json,
    /// Per-type trigger ratio table.
    Csv,
}

/// Writes report files into `dir` and returns the paths written.
///
/// `results.json` and `traces.jsonl` are byte-deterministic for a given
/// config and seed; `overhead.json` carries the wall-clock measurements and
/// is written separately.
pub fn emit_report(
    report: &Report,
    dir: impl AsRef<Path>,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>, HarnessError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();

    if formats.contains(&ReportFormat::Json) {
        let path = dir.join("results.json");
        write_file(
            &path,
            &serde_json::to_string_pretty(&report.summary).expect("summary serializes"),
        )?;
        written.push(path);

        let path = dir.join("traces.jsonl");
        let mut lines = String::new();
        for run in &report.results {
            lines.push_str(&serde_json::to_string(run).expect("run serializes"));
            lines.push('\n');
        }
        write_file(&path, &lines)?;
        written.push(path);
    }

    if formats.contains(&ReportFormat::Grid) {
        let path = dir.join("grid.txt");
        write_file(&path, &render_grid(&report.summary))?;
        written.push(path);
    }

    if formats.contains(&ReportFormat::Csv) {
        let path = dir.join("trigger_ratios.csv");
        write_file(&path, &render_ratios_csv(&report.summary))?;
        written.push(path);
    }

    if !report.overhead.per_scenario.is_empty() {
        let path = dir.join("overhead.json");
        write_file(
            &path,
            &serde_json::to_string_pretty(&report.overhead).expect("overhead serializes"),
        )?;
        written.push(path);
    }

    Ok(written)
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let mut file = std::fs::File::create(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(contents.as_bytes())
        .map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Renders the trigger grid: one row per (profile, validation), one column
/// per scenario, check/cross marks.
pub fn render_grid(summary: &Summary) -> String {
    let mut scenario_ids: Vec<&str> = Vec::new();
    for cell in &summary.cells {
        if !scenario_ids.contains(&cell.scenario.as_str()) {
            scenario_ids.push(&cell.scenario);
        }
    }
    let mut rows: Vec<(String, bool)> = Vec::new();
    for cell in &summary.cells {
        let key = (cell.profile.clone(), cell.validation);
        if !rows.contains(&key) {
            rows.push(key);
        }
    }

    let mut out = String::new();
    out.push_str(&format!("{:<28}", "profile / validation"));
    for id in &scenario_ids {
        out.push_str(&format!("{:>5}", id.to_uppercase()));
    }
    out.push('\n');
    for (profile, validation) in &rows {
        let label = format!(
            "{} [{}]",
            profile,
            if *validation { "validate" } else { "baseline" }
        );
        out.push_str(&format!("{label:<28}"));
        for id in &scenario_ids {
            let mark = summary
                .cells
                .iter()
                .find(|c| c.profile == *profile && c.validation == *validation && c.scenario == *id)
                .map(|c| if c.trigger_flag { "✓" } else { "✗" })
                .unwrap_or("-");
            out.push_str(&format!("{mark:>5}"));
        }
        out.push('\n');
    }
    out.push_str("\n✓ = race triggered in at least one repetition, ✗ = never triggered.\n");
    out.push_str("Real-world columns (R1-R5): not simulated.\n");
    out
}

fn render_ratios_csv(summary: &Summary) -> String {
    let mut out = String::from("profile,validation,type,cases,triggered_cases,ratio\n");
    for r in &summary.ratios {
        out.push_str(&format!(
            "{},{},{},{},{},{:.4}\n",
            r.profile,
            if r.validation { "on" } else { "off" },
            r.scenario_type,
            r.cases,
            r.triggered_cases,
            r.ratio
        ));
    }
    out
}
