use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cem::CurrentPattern;
use crate::error::{Error, Result};
use crate::estimators::{compute_indicators, IndicatorTable};
use crate::marking::{mark_all, MarkingResult};
use crate::mesh::Mesh;
use crate::objective::ConductivityField;
use crate::optimizer::{minimize, warm_start, IterationLog, MmStatus, Problem};

use super::config::{RefinementMode, RunConfig};
use super::metrics::error_metrics;

/// One row of the run summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub iteration: usize,
    pub dofs: usize,
    pub elements: usize,
    pub objective: f64,
    pub fidelity: f64,
    pub penalty: f64,
    pub eta1_sq: f64,
    pub eta2_sq: f64,
    pub eta3_q: f64,
    /// Number of elements marked for refinement (all of them in uniform mode).
    pub marked: usize,
    /// Largest `η₃(T)` over the marked elements.
    pub max_marked_eta3: f64,
    pub mm_iterations: usize,
    pub mm_status: MmStatus,
    /// Errors against the finest-mesh reconstruction of the same run.
    pub l1_error: Option<f64>,
    pub l2_error: Option<f64>,
    /// Seconds spent on this loop. Not part of the deterministic CSV.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Mesh, minimizer and indicators of one loop.
#[derive(Clone, Debug)]
pub struct Level {
    pub mesh: Mesh,
    pub sigma: ConductivityField,
    pub indicators: IndicatorTable,
    pub marking: MarkingResult,
    pub history: Vec<IterationLog>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    NoMarkedElements,
    OptimizerStalled,
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct AfemRun {
    pub records: Vec<OutputRecord>,
    pub levels: Vec<Level>,
    pub stop: StopReason,
}

impl AfemRun {
    pub fn final_level(&self) -> Option<&Level> {
        self.levels.last()
    }
}

fn max_marked_eta3(table: &IndicatorTable, marked: &[usize]) -> f64 {
    marked
        .iter()
        .map(|&t| table.eta3_q[t].powf(1.0 / table.q))
        .fold(0.0, f64::max)
}

/// Solves, estimates and marks on one mesh.
fn solve_level(
    config: &RunConfig,
    mesh: &Mesh,
    sigma0: ConductivityField,
    currents: &[CurrentPattern],
    data: &[Vec<f64>],
    iteration: usize,
) -> Result<(Level, OutputRecord)> {
    let start = Instant::now();
    let params = config.params()?;
    let problem = Problem {
        mesh,
        currents,
        data,
        params,
        solver: config.solver,
    };
    let outcome = minimize(&problem, sigma0, &config.optimizer)?;
    let indicators = compute_indicators(mesh, &outcome.sigma, &outcome.states, &outcome.adjoints, &params, config.q)?;
    let marking = match config.mode {
        RefinementMode::Adaptive => mark_all(&indicators, config.theta)?,
        RefinementMode::Uniform => {
            let all: Vec<usize> = (0..mesh.num_elements()).collect();
            MarkingResult {
                state: all.clone(),
                adjoint: all.clone(),
                inequality: all.clone(),
                union: all,
            }
        }
    };
    let (eta1_sq, eta2_sq, eta3_q) = indicators.totals();
    let record = OutputRecord {
        iteration,
        dofs: mesh.dofs(),
        elements: mesh.num_elements(),
        objective: outcome.objective.total,
        fidelity: outcome.objective.fidelity,
        penalty: outcome.objective.penalty,
        eta1_sq,
        eta2_sq,
        eta3_q,
        marked: marking.union.len(),
        max_marked_eta3: max_marked_eta3(&indicators, &marking.union),
        mm_iterations: outcome.history.len() - 1,
        mm_status: outcome.status,
        l1_error: None,
        l2_error: None,
        wall_time: start.elapsed().as_secs_f64(),
    };
    let level = Level {
        mesh: mesh.clone(),
        sigma: outcome.sigma,
        indicators,
        marking,
        history: outcome.history,
    };
    Ok((level, record))
}

/// The SOLVE → ESTIMATE → MARK → REFINE loop for `config.refinements` loops,
/// starting from `σ ≡ c0` on the initial mesh. `on_level` sees each loop as
/// soon as it is done. A failure inside the loop ends the run with
/// [`StopReason::Failed`] and keeps the completed loops.
pub fn run_afem(
    config: &RunConfig,
    currents: &[CurrentPattern],
    data: &[Vec<f64>],
    mut on_level: impl FnMut(&Level, &OutputRecord),
) -> Result<AfemRun> {
    config.validate()?;
    if currents.len() != data.len() {
        return Err(Error::Config(format!(
            "{} current patterns for {} data sets",
            currents.len(),
            data.len()
        )));
    }
    let mut mesh = config.initial_mesh()?;
    let mut sigma = ConductivityField::constant(mesh.num_vertices(), config.c0);
    let mut levels: Vec<Level> = Vec::new();
    let mut records = Vec::new();
    let mut stop = StopReason::Completed;
    for k in 0..=config.refinements {
        let (level, record) = match solve_level(config, &mesh, sigma, currents, data, k) {
            Ok(r) => r,
            Err(e) => {
                stop = StopReason::Failed(e.to_string());
                break;
            }
        };
        on_level(&level, &record);
        let stalled = record.mm_status == MmStatus::Stalled;
        let empty = level.marking.union.is_empty();
        records.push(record);
        levels.push(level);
        if k == config.refinements {
            break;
        }
        if empty {
            stop = StopReason::NoMarkedElements;
            break;
        }
        if stalled {
            stop = StopReason::OptimizerStalled;
            break;
        }
        let current = levels.last().expect("level was just pushed");
        let next = match config.mode {
            RefinementMode::Adaptive => current.mesh.refine(&current.marking.union),
            RefinementMode::Uniform => current.mesh.refine_uniform(),
        };
        sigma = match warm_start(&current.mesh, &current.sigma, &next, config.c0, config.c1) {
            Ok(s) => s,
            Err(e) => {
                stop = StopReason::Failed(e.to_string());
                break;
            }
        };
        mesh = next;
    }
    if let Some(reference) = levels.last() {
        for (record, level) in records.iter_mut().zip(&levels) {
            let m = error_metrics(&level.mesh, &level.sigma, &reference.mesh, &reference.sigma)?;
            record.l1_error = Some(m.l1);
            record.l2_error = Some(m.l2);
        }
    }
    Ok(AfemRun { records, levels, stop })
}
