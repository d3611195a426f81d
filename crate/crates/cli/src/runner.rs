//! Thread-pooled drivers for the expensive simulation loops.
//!
//! Click generation assigns every pulse its own RNG streams, so the pulse
//! loop can be chunked across any number of worker threads and still produce
//! bit-identical streams — `--threads` changes wall time, never results.

use crate::CliError;
use pillarsim_core::emission::{
    blinking_sequence, dark_clicks, detuning_rabi_curves, mean_detected_photons,
    source_clicks_for_pulses, DetunedRabiCurve, ExperimentScenario, RabiPoint,
};
use pillarsim_core::model::{build_model_operators, PulseShape, SystemModel};
use pillarsim_core::stats::ClickStream;
use rayon::prelude::*;
use rayon::ThreadPool;
use std::ops::Range;

fn numeric(e: pillarsim_core::Error) -> CliError {
    CliError::Numeric(e.to_string())
}

/// Build a worker pool with `threads` workers (default: all cores).
pub fn make_pool(threads: Option<usize>) -> Result<ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn pulse_chunks(n_pulses: u64, workers: usize) -> Vec<Range<u64>> {
    // A few chunks per worker evens out load imbalance between bright and
    // dark stretches without fragmenting the work.
    let chunk = (n_pulses / (workers as u64 * 4)).clamp(1, 4096).max(1);
    let mut ranges = Vec::with_capacity((n_pulses / chunk + 1) as usize);
    let mut start = 0;
    while start < n_pulses {
        let end = (start + chunk).min(n_pulses);
        ranges.push(start..end);
        start = end;
    }
    ranges
}

/// Sample a scenario's full click stream on the pool. Produces exactly the
/// same stream as the serial generator for any worker count.
pub fn clicks_parallel(
    scenario: &ExperimentScenario,
    pool: &ThreadPool,
) -> Result<ClickStream, CliError> {
    scenario.validate().map_err(numeric)?;
    let ops = build_model_operators(&scenario.model).map_err(numeric)?;
    let on = match &scenario.blinking {
        Some(b) => blinking_sequence(
            b,
            scenario.train.rep_period_ps,
            scenario.train.n_pulses,
            scenario.base_seed,
        ),
        None => Vec::new(),
    };
    let ranges = pulse_chunks(scenario.train.n_pulses, pool.current_num_threads());
    let chunks: Vec<Vec<f64>> = pool
        .install(|| {
            ranges
                .into_par_iter()
                .map(|range| source_clicks_for_pulses(scenario, &ops, range, &on))
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(numeric)?;
    let mut times: Vec<f64> = chunks.into_iter().flatten().collect();
    times.extend(dark_clicks(scenario));
    times.sort_by(f64::total_cmp);
    ClickStream::new(times, scenario.train.rep_period_ps, scenario.train.n_pulses)
        .map_err(numeric)
}

/// Rabi curve with the area grid evaluated across the pool.
pub fn rabi_curve_parallel(
    model: &SystemModel,
    pulse_fwhm_ps: f64,
    eid_coeff: f64,
    areas_rad: &[f64],
    pool: &ThreadPool,
) -> Result<Vec<RabiPoint>, CliError> {
    let points = pool
        .install(|| {
            areas_rad
                .par_iter()
                .map(|&area| {
                    let pulse = PulseShape::new(area, pulse_fwhm_ps, 0.0)?;
                    Ok(RabiPoint {
                        area_rad: area,
                        detected_mean: mean_detected_photons(model, pulse, eid_coeff)?,
                    })
                })
                .collect::<Result<Vec<_>, pillarsim_core::Error>>()
        })
        .map_err(numeric)?;
    Ok(points)
}

/// Rabi curves across detunings, parallel over the detuning × area product.
pub fn detuning_rabi_curves_parallel(
    base: &SystemModel,
    pulse_fwhm_ps: f64,
    eid_coeff_resonant: f64,
    eid_slope_per_uev: f64,
    detunings_uev: &[f64],
    areas_rad: &[f64],
    pool: &ThreadPool,
) -> Result<Vec<DetunedRabiCurve>, CliError> {
    if pool.current_num_threads() <= 1 {
        return detuning_rabi_curves(
            base,
            pulse_fwhm_ps,
            eid_coeff_resonant,
            eid_slope_per_uev,
            detunings_uev,
            areas_rad,
        )
        .map_err(numeric);
    }
    // Validate parameters and fix per-curve metadata on the serial path with
    // an empty area grid, then fill the points in parallel.
    let mut curves = detuning_rabi_curves(
        base,
        pulse_fwhm_ps,
        eid_coeff_resonant,
        eid_slope_per_uev,
        detunings_uev,
        &[],
    )
    .map_err(numeric)?;
    let jobs: Vec<(usize, f64)> = (0..curves.len())
        .flat_map(|c| areas_rad.iter().map(move |&a| (c, a)))
        .collect();
    let results: Vec<RabiPoint> = pool
        .install(|| {
            jobs.par_iter()
                .map(|&(c, area)| {
                    let mut m = *base;
                    m.delta_qd_cavity_uev = detunings_uev[c];
                    let pulse = PulseShape::new(area, pulse_fwhm_ps, 0.0)?;
                    Ok(RabiPoint {
                        area_rad: area,
                        detected_mean: mean_detected_photons(&m, pulse, curves[c].eid_coeff)?,
                    })
                })
                .collect::<Result<Vec<_>, pillarsim_core::Error>>()
        })
        .map_err(numeric)?;
    for ((c, _), point) in jobs.into_iter().zip(results) {
        curves[c].points.push(point);
    }
    Ok(curves)
}
