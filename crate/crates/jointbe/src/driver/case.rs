//! Config-driven runs and their artifact bundles.

use std::path::{Path, PathBuf};
use std::time::Instant;

use cpu_time::ProcessTime;
use log::info;

use super::{
    operator_checks, run_preload, run_qsma, ModalResult, OperatorReport, PreloadResult, Problem,
    RunPlan, StepRecord,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{
    modal_rows, state_rows, write_hysteresis_csv, write_modal_csv, write_state_csv,
    write_steps_csv, Manifest, PhaseTiming, StepRow,
};

/// Sets the worker count for dense linear algebra. `1` runs sequentially,
/// which makes results bit-reproducible.
pub fn set_threads(n: usize) {
    let n = n.max(1);
    // A global pool can be installed only once per process.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    faer::set_global_parallelism(if n == 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(n)
    });
}

/// Wall and CPU stopwatch for one phase.
pub struct PhaseClock {
    name: String,
    wall: Instant,
    cpu: ProcessTime,
}

impl PhaseClock {
    pub fn start(name: &str) -> Self {
        Self {
            name: name.to_string(),
            wall: Instant::now(),
            cpu: ProcessTime::now(),
        }
    }

    pub fn stop(self) -> PhaseTiming {
        let t = PhaseTiming {
            phase: self.name,
            wall_s: self.wall.elapsed().as_secs_f64(),
            cpu_s: self.cpu.elapsed().as_secs_f64(),
        };
        info!(
            "phase {}: wall {:.3} s, cpu {:.3} s",
            t.phase, t.wall_s, t.cpu_s
        );
        t
    }
}

#[derive(Debug, Clone, Default)]
pub struct CaseOptions {
    /// Replaces the configured seed.
    pub seed: Option<u64>,
    /// Replaces the configured output directory.
    pub out_dir: Option<PathBuf>,
    pub threads: usize,
}

#[derive(Debug)]
pub struct CaseResult {
    pub config: RunConfig,
    pub config_hash: String,
    pub problem: Problem,
    pub plan: RunPlan,
    pub preload: PreloadResult,
    pub modal: Vec<ModalResult>,
    pub records: Vec<StepRecord>,
    pub operator: OperatorReport,
    pub timings: Vec<PhaseTiming>,
}

/// Runs a parsed configuration in memory. `base` resolves relative paths.
pub fn run_config(config: &RunConfig, base: &Path) -> Result<CaseResult> {
    let mut timings = Vec::new();
    let clock = PhaseClock::start("build");
    let (problem, plan) = config.build(base)?;
    timings.push(clock.stop());

    let clock = PhaseClock::start("preload");
    let preload = run_preload(&plan, &problem)?;
    let operator = operator_checks(&preload.assembled);
    timings.push(clock.stop());
    let mut records = preload.records.clone();

    let modal = match &plan.qsma {
        Some(q) => {
            let clock = PhaseClock::start("qsma");
            let m = run_qsma(q, &problem, &preload, &plan.solver, &mut records)?;
            timings.push(clock.stop());
            m
        }
        None => Vec::new(),
    };
    Ok(CaseResult {
        config_hash: config.hash(),
        config: config.clone(),
        problem,
        plan,
        preload,
        modal,
        records,
        operator,
        timings,
    })
}

/// Writes the CSV artifacts and the manifest into `dir`.
pub fn write_artifacts(res: &CaseResult, dir: &Path, threads: usize) -> Result<Manifest> {
    let clock = PhaseClock::start("output");
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut files = Vec::new();

    let steps: Vec<StepRow> = res.records.iter().map(StepRow::from).collect();
    write_steps_csv(&dir.join("steps.csv"), &steps)?;
    files.push("steps.csv".to_string());

    if res.config.output.states {
        let asm = &res.preload.assembled;
        let rows = state_rows(&asm.system.point_index, &asm.points, &res.preload.state);
        write_state_csv(&dir.join("preload_state.csv"), &rows)?;
        files.push("preload_state.csv".to_string());
    }
    if !res.modal.is_empty() {
        let curves: Vec<_> = res.modal.iter().map(|m| m.curve.clone()).collect();
        write_modal_csv(&dir.join("modal.csv"), &modal_rows(&curves))?;
        files.push("modal.csv".to_string());
        if res.config.output.hysteresis {
            let recs: Vec<_> = res
                .modal
                .iter()
                .map(|m| (m.curve.mode, &m.record))
                .collect();
            write_hysteresis_csv(&dir.join("hysteresis.csv"), &recs)?;
            files.push("hysteresis.csv".to_string());
        }
    }
    let mut timings = res.timings.clone();
    timings.push(clock.stop());
    files.push("manifest.json".to_string());
    let manifest = Manifest {
        config_hash: res.config_hash.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: res.config.seed,
        threads: threads.max(1),
        files,
        timings,
    };
    manifest.write(&dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Reads a config file, runs it and writes the artifact bundle. Returns the
/// result, the manifest and the output directory.
pub fn run_case(path: &Path, opts: &CaseOptions) -> Result<(CaseResult, Manifest, PathBuf)> {
    let mut config = RunConfig::from_file(path)?;
    if let Some(s) = opts.seed {
        config.seed = s;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let res = run_config(&config, base)?;
    let dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| base.join(&config.output.directory));
    let manifest = write_artifacts(&res, &dir, opts.threads)?;
    Ok((res, manifest, dir))
}
