//! The scenario-driven subcommands: each loads a scenario file, runs one
//! simulation or analysis pipeline end-to-end, and stages plot-ready CSV
//! files plus JSON reports.

use crate::output::{csv, sha256_hex, Artifacts, ManifestMeta};
use crate::runner::{clicks_parallel, detuning_rabi_curves_parallel, make_pool};
use crate::scenario::ScenarioFile;
use crate::CliError;
use pillarsim_core::emission::{detuning_series, lifetime_trace, DetunedRabiCurve};
use pillarsim_core::fit::{
    fit, DampedRabi, FitModel, FitOptions, FitResult, LorentzianPurcell,
};
use pillarsim_core::formulas::{design_sweep as sweep_designs, DesignReference};
use pillarsim_core::stats::{apply_dead_time, correlate, g2_zero, split_hbt, ClickStream};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub threads: Option<usize>,
}

fn numeric(e: pillarsim_core::Error) -> CliError {
    CliError::Numeric(e.to_string())
}

/// One parameter of a serialised fit report.
#[derive(Debug, Serialize)]
pub struct ParamReport {
    pub name: &'static str,
    pub value: f64,
    pub std_error: f64,
    pub fixed: bool,
}

/// JSON form of a fit result.
#[derive(Debug, Serialize)]
pub struct FitReport {
    pub family: &'static str,
    pub params: Vec<ParamReport>,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub converged: bool,
    pub n_points: usize,
    pub n_iterations: usize,
    pub message: String,
}

pub fn fit_report(
    family: &'static str,
    names: &[&'static str],
    result: &FitResult,
    fixed: &[bool],
) -> FitReport {
    FitReport {
        family,
        params: names
            .iter()
            .enumerate()
            .map(|(i, &name)| ParamReport {
                name,
                value: result.params[i],
                std_error: result.errors[i],
                fixed: fixed.get(i).copied().unwrap_or(false),
            })
            .collect(),
        chi2: result.chi2,
        reduced_chi2: result.reduced_chi2,
        converged: result.converged,
        n_points: result.n_points,
        n_iterations: result.n_iterations,
        message: result.message.clone(),
    }
}

fn fmt(value: f64) -> String {
    format!("{value}")
}

// ---------------------------------------------------------------------------
// design-sweep
// ---------------------------------------------------------------------------

pub fn design_sweep(scenario_path: &Path, ctx: &RunContext) -> Result<(), CliError> {
    let (file, bytes) = ScenarioFile::load(scenario_path)?;
    let (table, reference) = file.design_table()?;
    let rows = sweep_designs(
        &table,
        &DesignReference {
            d_ref_um: reference.d_ref_um,
            v_ref_lambda_n_cubed: reference.v_ref_lambda_n_cubed,
            q_2d: reference.q_2d,
            gamma_rel: reference.gamma_rel,
        },
    )
    .map_err(|e| CliError::Config(format!("scenario [sweep]: {e}")))?;

    let mut artifacts = Artifacts::new();
    artifacts.add(
        "design_sweep.csv",
        csv(
            "diameter_um,Q,F_P_max,eta_ext",
            rows.iter().map(|r| {
                format!(
                    "{},{},{},{}",
                    fmt(r.diameter_um),
                    fmt(r.q),
                    fmt(r.f_p_max),
                    fmt(r.eta_ext)
                )
            }),
        ),
    );
    let best = rows
        .iter()
        .max_by(|a, b| a.eta_ext.total_cmp(&b.eta_ext))
        .expect("non-empty table");
    println!(
        "design-sweep: {} pillars; best extraction η = {:.3} at d = {} μm (Q = {}, F_P,max = {:.2})",
        rows.len(),
        best.eta_ext,
        best.diameter_um,
        best.q,
        best.f_p_max
    );
    artifacts.write(
        &ctx.out_dir,
        ManifestMeta {
            command: "design-sweep",
            scenario_sha256: Some(sha256_hex(&bytes)),
            base_seed: None,
        },
    )
}

// ---------------------------------------------------------------------------
// detuning-scan
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DetuningFitReport {
    /// γ_C is held at κ/2 during the fit: amplitude, F_P, and γ_C are not
    /// jointly identifiable from a single Lorentzian (only the peak height
    /// and width are), and κ is known from the cavity linewidth.
    fixed_gamma_c_uev: f64,
    purcell_factor_of_model: f64,
    fit: FitReport,
}

pub fn detuning_scan(scenario_path: &Path, ctx: &RunContext) -> Result<(), CliError> {
    let (file, bytes) = ScenarioFile::load(scenario_path)?;
    let system = file.require_system()?;
    let model = file.system_model()?;
    let pulse = file.pulse_shape()?;
    let detunings = file
        .require_sweep()?
        .detunings_uev
        .clone()
        .ok_or_else(|| {
            CliError::Config("scenario [sweep]: detunings_uev required by detuning-scan".into())
        })?;

    let series = detuning_series(
        &model,
        pulse,
        system.eid_coeff,
        system.eid_slope_per_uev,
        &detunings,
    )
    .map_err(numeric)?;

    let mut artifacts = Artifacts::new();
    artifacts.add(
        "detuning_scan.csv",
        csv(
            "delta_uev,detected_mean,relative_intensity,pi_power_factor,eid_coeff",
            series.iter().map(|p| {
                format!(
                    "{},{},{},{},{}",
                    fmt(p.delta_uev),
                    fmt(p.detected_mean),
                    fmt(p.relative_intensity),
                    fmt(p.pi_power_factor),
                    fmt(p.eid_coeff)
                )
            }),
        ),
    );

    let xs: Vec<f64> = series.iter().map(|p| p.delta_uev).collect();
    let ys: Vec<f64> = series.iter().map(|p| p.relative_intensity).collect();
    let gamma_c = model.kappa_uev / 2.0;
    let mut p0 = LorentzianPurcell::initial_guess(&xs, &ys);
    p0[LorentzianPurcell::GAMMA_C] = gamma_c;
    let fixed = vec![false, false, true];
    let options = FitOptions {
        fixed: Some(fixed.clone()),
        ..FitOptions::default()
    };
    let result = fit(&LorentzianPurcell, &xs, &ys, None, &p0, &options).map_err(numeric)?;
    if !result.converged {
        return Err(CliError::Numeric(format!(
            "Lorentzian fit did not converge: {}",
            result.message
        )));
    }
    let f_p = result.params[LorentzianPurcell::F_P];
    let f_p_err = result.errors[LorentzianPurcell::F_P];
    println!(
        "detuning-scan: {} points; fitted F_P = {:.3} ± {:.3} (model {:.3}), γ_C fixed at {} μeV",
        series.len(),
        f_p,
        f_p_err,
        model.purcell_factor(),
        gamma_c
    );
    artifacts.add_json(
        "lorentzian_fit.json",
        &DetuningFitReport {
            fixed_gamma_c_uev: gamma_c,
            purcell_factor_of_model: model.purcell_factor(),
            fit: fit_report(
                LorentzianPurcell.name(),
                &["amplitude", "purcell_factor", "gamma_c_uev"],
                &result,
                &fixed,
            ),
        },
    )?;
    artifacts.write(
        &ctx.out_dir,
        ManifestMeta {
            command: "detuning-scan",
            scenario_sha256: Some(sha256_hex(&bytes)),
            base_seed: None,
        },
    )
}

// ---------------------------------------------------------------------------
// lifetime
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct LifetimeReport {
    model_used: &'static str,
    /// Decay time of the dominant slow component (ps).
    lifetime_ps: f64,
    lifetime_err_ps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fast_lifetime_ps: Option<f64>,
    baseline_counts_per_bin: f64,
    fit_window_ps: (f64, f64),
    fit: FitReport,
}

pub fn lifetime(scenario_path: &Path, ctx: &RunContext) -> Result<(), CliError> {
    let (file, bytes) = ScenarioFile::load(scenario_path)?;
    let scenario = file.experiment(ctx.seed_override)?;
    let settings = file.lifetime_settings()?;
    let trace = lifetime_trace(&scenario, settings.bin_width_ps).map_err(numeric)?;
    let fitted = pillarsim_core::fit::fit_lifetime_trace(
        &trace.time_ps,
        &trace.counts,
        settings.rise_guard_ps,
        settings.model,
    )
    .map_err(|e| CliError::Numeric(format!("lifetime fit: {e}")))?;

    let mut artifacts = Artifacts::new();
    artifacts.add(
        "lifetime_trace.csv",
        csv(
            "time_ps,counts",
            trace
                .time_ps
                .iter()
                .zip(&trace.counts)
                .map(|(&t, &c)| format!("{},{}", fmt(t), fmt(c))),
        ),
    );
    let names: &[&'static str] = if fitted.model_used == "bi_exponential" {
        &[
            "amplitude_fast",
            "lifetime_fast_ps",
            "amplitude_slow",
            "lifetime_slow_ps",
            "baseline",
        ]
    } else {
        &["amplitude", "lifetime_ps", "baseline"]
    };
    match fitted.fast_lifetime_ps {
        Some(fast) => println!(
            "lifetime: {} fit; fast {:.1} ps, slow {:.1} ± {:.1} ps",
            fitted.model_used, fast, fitted.lifetime_ps, fitted.lifetime_err_ps
        ),
        None => println!(
            "lifetime: {} fit; {:.1} ± {:.1} ps",
            fitted.model_used, fitted.lifetime_ps, fitted.lifetime_err_ps
        ),
    }
    artifacts.add_json(
        "lifetime_fit.json",
        &LifetimeReport {
            model_used: fitted.model_used,
            lifetime_ps: fitted.lifetime_ps,
            lifetime_err_ps: fitted.lifetime_err_ps,
            fast_lifetime_ps: fitted.fast_lifetime_ps,
            baseline_counts_per_bin: fitted.baseline,
            fit_window_ps: fitted.window_ps,
            fit: fit_report(fitted.model_used, names, &fitted.fit, &[]),
        },
    )?;
    artifacts.write(
        &ctx.out_dir,
        ManifestMeta {
            command: "lifetime",
            scenario_sha256: Some(sha256_hex(&bytes)),
            base_seed: Some(scenario.base_seed),
        },
    )
}

// ---------------------------------------------------------------------------
// rabi
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RabiCurveReport {
    delta_uev: f64,
    eid_coeff: f64,
    pi_power_factor: f64,
    /// Absent when the area grid is too short to constrain the model.
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitReport>,
}

pub fn rabi(scenario_path: &Path, ctx: &RunContext) -> Result<(), CliError> {
    let (file, bytes) = ScenarioFile::load(scenario_path)?;
    let system = file.require_system()?;
    let model = file.system_model()?;
    let pulse = file.pulse_shape()?;
    let areas = file.require_sweep()?.areas_rad.clone().ok_or_else(|| {
        CliError::Config("scenario [sweep]: areas_rad required by rabi".into())
    })?;
    if areas.is_empty() {
        return Err(CliError::Config("scenario [sweep]: areas_rad is empty".into()));
    }
    let detunings = file
        .sweep
        .as_ref()
        .and_then(|s| s.detunings_uev.clone())
        .unwrap_or_else(|| vec![system.delta_qd_cavity_uev]);

    let pool = make_pool(ctx.threads)?;
    let curves: Vec<DetunedRabiCurve> = detuning_rabi_curves_parallel(
        &model,
        pulse.fwhm_ps,
        system.eid_coeff,
        system.eid_slope_per_uev,
        &detunings,
        &areas,
        &pool,
    )?;

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for curve in &curves {
        for p in &curve.points {
            rows.push(format!(
                "{},{},{}",
                fmt(curve.delta_uev),
                fmt(p.area_rad),
                fmt(p.detected_mean)
            ));
        }
        reports.push(RabiCurveReport {
            delta_uev: curve.delta_uev,
            eid_coeff: curve.eid_coeff,
            pi_power_factor: curve.pi_power_factor,
            fit: fit_rabi_curve(curve),
        });
    }

    let n_fitted = reports.iter().filter(|r| r.fit.is_some()).count();
    println!(
        "rabi: {} curve(s) × {} areas; {} damped-oscillation fit(s)",
        curves.len(),
        areas.len(),
        n_fitted
    );
    let mut artifacts = Artifacts::new();
    artifacts.add("rabi_curve.csv", csv("delta_uev,area_rad,detected_mean", rows));
    artifacts.add_json("rabi_fits.json", &reports)?;
    artifacts.write(
        &ctx.out_dir,
        ManifestMeta {
            command: "rabi",
            scenario_sha256: Some(sha256_hex(&bytes)),
            base_seed: None,
        },
    )
}

/// Fit the damped-oscillation model to one curve; curves too short to
/// constrain four parameters, or spanning less than a π rotation, are
/// reported without a fit.
fn fit_rabi_curve(curve: &DetunedRabiCurve) -> Option<FitReport> {
    let xs: Vec<f64> = curve.points.iter().map(|p| p.area_rad).collect();
    let ys: Vec<f64> = curve.points.iter().map(|p| p.detected_mean).collect();
    let span = xs.iter().cloned().fold(0.0, f64::max);
    if xs.len() < 5 || span < std::f64::consts::PI {
        return None;
    }
    let p0 = DampedRabi::initial_guess(&xs, &ys);
    let result = fit(&DampedRabi, &xs, &ys, None, &p0, &FitOptions::default()).ok()?;
    Some(fit_report(
        DampedRabi.name(),
        &["amplitude", "theta_pi_rad", "theta_d_rad", "baseline"],
        &result,
        &[],
    ))
}

// ---------------------------------------------------------------------------
// hbt
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ClicksSidecar {
    rep_period_ps: f64,
    n_pulses: u64,
    n_clicks_a: usize,
    n_clicks_b: usize,
    dead_time_ps: f64,
    base_seed: u64,
    split_seed: u64,
}

#[derive(Serialize)]
struct EnvelopeReport {
    a_inf: f64,
    contrast: f64,
    k0_pulses: f64,
}

#[derive(Serialize)]
struct G2Report {
    g2_uncorrected: f64,
    g2_uncorrected_err: f64,
    /// Central-peak area normalised to the blinking-envelope extrapolation
    /// A_∞(1 + c); equals the uncorrected value when no bunching is present.
    g2_corrected: f64,
    g2_corrected_err: f64,
    central_area: f64,
    side_mean: f64,
    n_side_peaks_used: usize,
    envelope: EnvelopeReport,
    bin_width_ps: f64,
    window_ps: f64,
}

pub fn hbt(scenario_path: &Path, ctx: &RunContext) -> Result<(), CliError> {
    let (file, bytes) = ScenarioFile::load(scenario_path)?;
    let scenario = file.experiment(ctx.seed_override)?;
    let settings = file.hbt_settings(scenario.train.rep_period_ps);
    let split_seed = file.split_seed(ctx.seed_override);

    let pool = make_pool(ctx.threads)?;
    let stream = clicks_parallel(&scenario, &pool)?;
    let (mut a, mut b) = split_hbt(&stream, split_seed);
    if scenario.detector.dead_time_ps > 0.0 {
        a = apply_dead_time(&a, scenario.detector.dead_time_ps);
        b = apply_dead_time(&b, scenario.detector.dead_time_ps);
    }
    let hist = correlate(&a, &b, settings.bin_width_ps, settings.window_ps).map_err(numeric)?;
    let g2 = g2_zero(&hist, settings.n_side_peaks).map_err(numeric)?;

    println!(
        "hbt: {} clicks ({} | {}); g²(0) = {:.4} ± {:.4} corrected, {:.4} ± {:.4} raw",
        stream.len(),
        a.len(),
        b.len(),
        g2.g2_corrected,
        g2.g2_corrected_err,
        g2.g2_uncorrected,
        g2.g2_uncorrected_err,
    );
    if g2.envelope.contrast > 0.0 {
        println!(
            "hbt: side-peak bunching detected (contrast {:.3}, correlation {:.1} pulses)",
            g2.envelope.contrast, g2.envelope.k0_pulses
        );
    }

    let mut artifacts = Artifacts::new();
    if file.write_clicks() {
        artifacts.add("clicks.csv", clicks_csv(&a, &b));
        artifacts.add_json(
            "clicks.json",
            &ClicksSidecar {
                rep_period_ps: scenario.train.rep_period_ps,
                n_pulses: scenario.train.n_pulses,
                n_clicks_a: a.len(),
                n_clicks_b: b.len(),
                dead_time_ps: scenario.detector.dead_time_ps,
                base_seed: scenario.base_seed,
                split_seed,
            },
        )?;
    }
    artifacts.add(
        "histogram.csv",
        csv(
            "tau_ps,counts",
            hist.tau_ps
                .iter()
                .zip(&hist.counts)
                .map(|(&t, &c)| format!("{},{c}", fmt(t))),
        ),
    );
    artifacts.add_json(
        "g2_report.json",
        &G2Report {
            g2_uncorrected: g2.g2_uncorrected,
            g2_uncorrected_err: g2.g2_uncorrected_err,
            g2_corrected: g2.g2_corrected,
            g2_corrected_err: g2.g2_corrected_err,
            central_area: g2.central_area,
            side_mean: g2.side_mean,
            n_side_peaks_used: g2.n_side_peaks_used,
            envelope: EnvelopeReport {
                a_inf: g2.envelope.a_inf,
                contrast: g2.envelope.contrast,
                k0_pulses: g2.envelope.k0_pulses,
            },
            bin_width_ps: settings.bin_width_ps,
            window_ps: settings.window_ps,
        },
    )?;
    artifacts.write(
        &ctx.out_dir,
        ManifestMeta {
            command: "hbt",
            scenario_sha256: Some(sha256_hex(&bytes)),
            base_seed: Some(scenario.base_seed),
        },
    )
}

// ---------------------------------------------------------------------------
// paper-check
// ---------------------------------------------------------------------------

pub fn paper_check(ctx: &RunContext) -> Result<(), CliError> {
    let pool = make_pool(ctx.threads)?;
    let outcome = crate::check::run_all(ctx.seed_override, &pool)?;
    for row in &outcome.rows {
        println!("{}", crate::check::format_row(row));
    }
    let n_failed = outcome.n_failed();
    let total = outcome.rows.len();
    println!("paper-check: {}/{} rows passed", total - n_failed, total);

    let mut artifacts = Artifacts::new();
    artifacts.add_json("paper_check_report.json", &outcome.rows)?;
    artifacts.add(
        "paper_check.csv",
        csv(
            "id,name,measured,expected,pass",
            outcome.rows.iter().map(|r| {
                // Free-text columns swap commas for semicolons: the CSV layer
                // does plain numeric columns and no quoting.
                format!(
                    "{},{},{},{},{}",
                    r.id,
                    r.name,
                    r.measured.replace(',', ";"),
                    r.expected.replace(',', ";"),
                    r.pass
                )
            }),
        ),
    );
    for (name, bytes) in outcome.data_files {
        artifacts.add(&name, bytes);
    }
    artifacts.write(
        &ctx.out_dir,
        ManifestMeta {
            command: "paper-check",
            scenario_sha256: None,
            base_seed: ctx.seed_override,
        },
    )?;
    if n_failed > 0 {
        return Err(CliError::Acceptance(n_failed));
    }
    Ok(())
}

/// Time-ordered merge of the two detector streams, as a time tagger would
/// record them.
pub(crate) fn clicks_csv(a: &ClickStream, b: &ClickStream) -> Vec<u8> {
    let mut merged: Vec<(f64, char)> = a
        .timestamps_ps()
        .iter()
        .map(|&t| (t, 'a'))
        .chain(b.timestamps_ps().iter().map(|&t| (t, 'b')))
        .collect();
    merged.sort_by(|x, y| x.0.total_cmp(&y.0));
    csv(
        "channel,timestamp_ps",
        merged.into_iter().map(|(t, c)| format!("{c},{}", fmt(t))),
    )
}
