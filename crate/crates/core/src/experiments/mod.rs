//! Phantoms, data synthesis, the adaptive loop and file IO.

pub mod afem;
pub mod config;
pub mod currents;
pub mod data;
pub mod metrics;
pub mod output;
pub mod phantom;

use std::fs;

pub use afem::{run_afem, AfemRun, Level, OutputRecord, StopReason};
pub use config::{RefinementMode, RunConfig};
pub use currents::generate_currents;
pub use data::{add_noise, forward_voltages, synth_data, NoiseModel, SyntheticData};
pub use metrics::{compare_runs, error_metrics, interpolate_log, CurveComparison, ErrorMetrics};
pub use phantom::{Inclusion, PhantomSpec, Preset};

use crate::error::{Error, Result};

/// Synthesizes data as described by `config` on its data mesh.
pub fn synthesize(config: &RunConfig) -> Result<SyntheticData> {
    config.validate()?;
    synth_data(&config.data_mesh()?, &config.phantom, &config.currents()?, config.noise(), config.solver)
}

/// Runs the adaptive (or uniform) reconstruction on `data`, synthesizing it
/// first when absent, and writes all outputs if `config.output_dir` is set.
pub fn reconstruct(config: &RunConfig, data: Option<SyntheticData>) -> Result<(SyntheticData, AfemRun)> {
    config.validate()?;
    let data = match data {
        Some(d) => d,
        None => synthesize(config)?,
    };
    let currents = data.current_patterns()?;
    if currents.first().map(|c| c.len()) != Some(config.electrodes) {
        return Err(Error::Config("data do not match the electrode count".into()));
    }
    let dir = config.output_dir.clone();
    if let Some(dir) = &dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.json"), config.to_json()?)?;
    }
    let mut io_error: Option<Error> = None;
    let run = run_afem(config, &currents, &data.noisy, |level, record| {
        let Some(dir) = &dir else { return };
        let k = record.iteration;
        let result = (|| -> Result<()> {
            output::write_indicators(&dir.join(format!("indicators_{k:02}.csv")), &level.indicators, &level.marking)?;
            if config.write_fields {
                output::write_field(&dir.join(format!("field_{k:02}.json")), &level.mesh, &level.sigma)?;
            }
            if config.write_vtk {
                output::write_vtk(&dir.join(format!("field_{k:02}.vtk")), &level.mesh, &level.sigma)?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            io_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    if let Some(dir) = &dir {
        output::write_records(&dir.join("records.csv"), &run.records)?;
        output::write_timing(&dir.join("timing.csv"), &run.records)?;
        output::write_optimizer_log(&dir.join("optimizer_log.csv"), &run.levels)?;
        if let Some(last) = run.final_level() {
            output::write_field(&dir.join("final_field.json"), &last.mesh, &last.sigma)?;
        }
        fs::write(dir.join("stop_reason.json"), serde_json::to_string(&run.stop)?)?;
    }
    Ok((data, run))
}
