//! The acceptance suite behind `paper-check`: quantitative checks of the
//! toolkit against the published reference values for the device family it
//! models, plus internal consistency oracles (closed-form limits, independent
//! solvers, dual-route pair counting). Each check yields one pass/fail row;
//! tolerances are pinned here, next to the quantities they guard.
//!
//! The stochastic checks run the *shipped* scenario files (embedded at
//! compile time), so a green table certifies the configurations in
//! `configs/`, not just the library.

use crate::commands::clicks_csv;
use crate::output::csv;
use crate::runner::{clicks_parallel, detuning_rabi_curves_parallel};
use crate::scenario::{ScenarioFile, SPLIT_SEED_SALT};
use crate::CliError;
use pillarsim_core::emission::{
    detuning_series, lifetime_trace, DetectorModel, ExperimentScenario, PulseTrain,
};
use pillarsim_core::evolve::{evolve_master_equation, DensityMatrix, Drive, IntegratorConfig};
use pillarsim_core::fit::{
    fit, fit_lifetime_trace, DampedRabi, FitOptions, LorentzianPurcell,
};
use pillarsim_core::formulas::{
    extraction_efficiency, intensity_vs_detuning, purcell_from_lifetimes,
    single_photon_efficiency, EfficiencyChain,
};
use pillarsim_core::model::{build_model_operators, PulseShape, SystemModel};
use pillarsim_core::stats::{
    apply_dead_time, correlate, g2_zero, split_hbt, ClickStream, CoincidenceHistogram,
};
use pillarsim_core::trajectory::ensemble_expectation;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::ThreadPool;
use serde::Serialize;
use std::f64::consts::PI;

const LIFETIME_RESONANT_TOML: &str = include_str!("../../../configs/lifetime_resonant.toml");
const LIFETIME_DETUNED_TOML: &str = include_str!("../../../configs/lifetime_detuned.toml");
const HBT_DELTA75_TOML: &str = include_str!("../../../configs/hbt_delta75.toml");
const HBT_POISSON_TOML: &str = include_str!("../../../configs/hbt_poisson.toml");
const RABI_DETUNING_TOML: &str = include_str!("../../../configs/rabi_detuning.toml");

/// Noise realisation for the noisy Lorentzian-fit check; frozen so the check
/// is a fixed numerical experiment rather than a statistical one.
const NOISE_SEED: u64 = 4242;
/// Trajectory-ensemble seed for the solver-equivalence check.
const ENSEMBLE_SEED: u64 = 77;
/// Click-stream seed for the in-code ideal-source scenario.
const PERFECT_SOURCE_SEED: u64 = 424242;

fn numeric(e: pillarsim_core::Error) -> CliError {
    CliError::Numeric(e.to_string())
}

/// One row of the acceptance table.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub id: &'static str,
    pub name: &'static str,
    pub measured: String,
    pub expected: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRow {
    fn new(
        id: &'static str,
        name: &'static str,
        measured: String,
        expected: &str,
        pass: bool,
    ) -> Self {
        CheckRow {
            id,
            name,
            measured,
            expected: expected.to_string(),
            pass,
            note: None,
        }
    }

    fn with_note(mut self, note: String) -> Self {
        self.note = Some(note);
        self
    }
}

/// Render a row for the terminal table.
pub fn format_row(row: &CheckRow) -> String {
    let mut line = format!(
        "[{}] {:<3} {:<44} measured {:<26} expected {}",
        if row.pass { "PASS" } else { "FAIL" },
        row.id,
        row.name,
        row.measured,
        row.expected,
    );
    if let Some(note) = &row.note {
        line.push_str("\n           note: ");
        line.push_str(note);
    }
    line
}

// ---------------------------------------------------------------------------
// 1. Efficiency chain
// ---------------------------------------------------------------------------

pub fn criterion_1() -> Result<Vec<CheckRow>, CliError> {
    let eta_sps = single_photon_efficiency(0.430, 0.072).map_err(numeric)?;
    let chain = EfficiencyChain::from_counts(130e3, 82e6, 0.0036, 0.072).map_err(numeric)?;
    Ok(vec![
        CheckRow::new(
            "1a",
            "single-photon efficiency eta*sqrt(1-g2)",
            format!("{eta_sps:.4}"),
            "0.414 to three decimals",
            (eta_sps - 0.414).abs() < 5e-4,
        ),
        CheckRow::new(
            "1b",
            "source efficiency from 130 kcps at 82 MHz",
            format!("{:.4}", chain.eta_source),
            "inside [0.41; 0.47]",
            (0.41..=0.47).contains(&chain.eta_source),
        )
        .with_note(
            "detected counts already include both polarisation channels, so the \
             polarisation doubling factor is 1; the one-channel efficiency is half of this"
                .to_string(),
        ),
    ])
}

// ---------------------------------------------------------------------------
// 2. Extraction efficiency
// ---------------------------------------------------------------------------

pub fn criterion_2() -> Result<Vec<CheckRow>, CliError> {
    let eta = extraction_efficiency(5950.0, 6670.0, 3.2, 1.0).map_err(numeric)?;
    Ok(vec![CheckRow::new(
        "2",
        "extraction efficiency (Q=5950, Q_2D=6670, F=3.2)",
        format!("{eta:.4}"),
        "0.680 +- 0.001",
        (eta - 0.680).abs() <= 1e-3,
    )
    .with_note(format!(
        "the published headline value for these inputs is \u{2248}65%; the formula gives \
         {eta:.3}. The discrepancy is documented and reported here rather than hidden."
    ))])
}

// ---------------------------------------------------------------------------
// 3. Purcell cross-consistency
// ---------------------------------------------------------------------------

/// Fit the Lorentzian intensity model with γ_C held fixed (amplitude, F_P and
/// γ_C are not jointly identifiable from one peak; γ_C is known from κ).
fn fit_purcell_lorentzian(
    xs: &[f64],
    ys: &[f64],
    sigma: Option<&[f64]>,
    gamma_c: f64,
) -> Result<(f64, f64), CliError> {
    let mut p0 = LorentzianPurcell::initial_guess(xs, ys);
    p0[LorentzianPurcell::GAMMA_C] = gamma_c;
    let opts = FitOptions {
        fixed: Some(vec![false, false, true]),
        ..FitOptions::default()
    };
    let res = fit(&LorentzianPurcell, xs, ys, sigma, &p0, &opts).map_err(numeric)?;
    if !res.converged {
        return Err(CliError::Numeric(format!(
            "Lorentzian check fit did not converge: {}",
            res.message
        )));
    }
    Ok((
        res.params[LorentzianPurcell::F_P],
        res.errors[LorentzianPurcell::F_P],
    ))
}

pub fn criterion_3() -> Result<Vec<CheckRow>, CliError> {
    let f_lifetimes = purcell_from_lifetimes(221.0, 890.0).map_err(numeric)?;

    // Noiseless synthetic intensity-vs-detuning curve, F_P = 3.1, γ_C = κ/2.
    let true_fp = 3.1;
    let gamma_c = 116.5;
    let xs: Vec<f64> = (0..25).map(|i| -480.0 + 40.0 * i as f64).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| intensity_vs_detuning(true_fp, gamma_c, x))
        .collect::<Result<_, _>>()
        .map_err(numeric)?;
    let (fp_clean, _) = fit_purcell_lorentzian(&xs, &ys, None, gamma_c)?;

    // The same with 5% multiplicative Gaussian noise over 15 detuning points.
    // With the amplitude free, F_P is constrained by the relative-sensitivity
    // spread between the peak (∂lnI/∂F = 1/(F(F+1))) and the far tails (1/F),
    // so the points cluster at both ends; a uniform grid would dilute the
    // information and roughly double the estimator's standard error.
    let mut rng = ChaCha12Rng::seed_from_u64(NOISE_SEED);
    let xs15: Vec<f64> = [
        0.0, -25.0, 25.0, -50.0, 50.0, -75.0, 75.0, -700.0, 700.0, -800.0, 800.0, -900.0, 900.0,
        -1000.0, 1000.0,
    ]
    .to_vec();
    let mut ys15 = Vec::with_capacity(15);
    let mut sg15 = Vec::with_capacity(15);
    for &x in &xs15 {
        let truth = intensity_vs_detuning(true_fp, gamma_c, x).map_err(numeric)?;
        let z: f64 = StandardNormal.sample(&mut rng);
        ys15.push(truth * (1.0 + 0.05 * z));
        sg15.push(0.05 * truth);
    }
    let (fp_noisy, fp_noisy_err) = fit_purcell_lorentzian(&xs15, &ys15, Some(&sg15), gamma_c)?;

    Ok(vec![
        CheckRow::new(
            "3a",
            "Purcell factor from 221/890 ps lifetimes",
            format!("{f_lifetimes:.4}"),
            "3.03 +- 0.01",
            (f_lifetimes - 3.03).abs() <= 0.01,
        ),
        CheckRow::new(
            "3b",
            "noiseless Lorentzian fit recovers F_P",
            format!("{fp_clean:.9}"),
            "3.1 +- 1e-6",
            (fp_clean - true_fp).abs() < 1e-6,
        ),
        CheckRow::new(
            "3c",
            "Lorentzian fit with 5% noise on 15 points",
            format!("{fp_noisy:.3} +- {fp_noisy_err:.3}"),
            "3.1 +- 0.15",
            (fp_noisy - true_fp).abs() <= 0.15,
        ),
    ])
}

// ---------------------------------------------------------------------------
// 4. Pulse-area theorem
// ---------------------------------------------------------------------------

pub fn criterion_4() -> Result<Vec<CheckRow>, CliError> {
    let model = SystemModel {
        g_uev: 0.0,
        kappa_uev: 0.0,
        gamma_leaky_per_ps: 0.0,
        gamma_dephasing_per_ps: 0.0,
        delta_qd_cavity_uev: 0.0,
        delta_laser_qd_uev: 0.0,
        n_fock: 1,
    };
    let ops = build_model_operators(&model).map_err(numeric)?;
    let rho0 = DensityMatrix::pure(&ops.hilbert.ket(0, 0), 0.0);
    let excite = |area_rad: f64| -> Result<f64, CliError> {
        let pulse = PulseShape::new(area_rad, 1.0, 3.0).map_err(numeric)?;
        let evo = evolve_master_equation(
            &ops,
            Drive::pulse(pulse),
            &rho0,
            &[0.0, 8.0],
            &IntegratorConfig::default(),
        )
        .map_err(numeric)?;
        Ok(*evo
            .expectation_series(&ops.excited_projector)
            .map_err(numeric)?
            .last()
            .expect("non-empty grid"))
    };

    let mut max_dev: f64 = 0.0;
    for k in 0..50 {
        let theta = 3.0 * PI * k as f64 / 49.0;
        let p = excite(theta)?;
        max_dev = max_dev.max((p - (0.5 * theta).sin().powi(2)).abs());
    }
    let p_pi = excite(PI)?;
    let p_2pi = excite(2.0 * PI)?;

    Ok(vec![
        CheckRow::new(
            "4a",
            "lossless two-level curve vs sin^2(theta/2)",
            format!("max deviation {max_dev:.2e}"),
            "< 1e-4 over 50 areas in [0; 3pi]",
            max_dev < 1e-4,
        ),
        CheckRow::new(
            "4b",
            "full inversion at a pi pulse",
            format!("{p_pi:.6}"),
            ">= 0.999",
            p_pi >= 0.999,
        ),
        CheckRow::new(
            "4c",
            "full return at a 2pi pulse",
            format!("{p_2pi:.2e}"),
            "<= 0.001",
            p_2pi <= 0.001,
        ),
    ])
}

// ---------------------------------------------------------------------------
// 5. Trajectory ensemble vs master equation
// ---------------------------------------------------------------------------

pub fn criterion_5() -> Result<Vec<CheckRow>, CliError> {
    let grid = [
        0.0, 5.0, 15.0, 30.0, 60.0, 120.0, 240.0, 400.0, 600.0, 800.0, 1000.0,
    ];
    let pulse = PulseShape::new(PI, 1.3, 10.0).map_err(numeric)?;
    let mut detuned = SystemModel::default_resonant();
    detuned.delta_qd_cavity_uev = 360.0;

    let mut rows = Vec::new();
    for (id, name, model) in [
        ("5a", "10^4 trajectories vs master equation, resonant", SystemModel::default_resonant()),
        ("5b", "10^4 trajectories vs master equation, 360 ueV", detuned),
    ] {
        let ops = build_model_operators(&model).map_err(numeric)?;
        let rho0 = DensityMatrix::pure(&ops.hilbert.ket(0, 0), 0.0);
        let me = evolve_master_equation(
            &ops,
            Drive::pulse(pulse),
            &rho0,
            &grid,
            &IntegratorConfig::default(),
        )
        .map_err(numeric)?
        .expectation_series(&ops.excited_projector)
        .map_err(numeric)?;
        let ens = ensemble_expectation(
            &ops,
            Drive::pulse(pulse),
            &ops.hilbert.ket(0, 0),
            &grid,
            &ops.excited_projector,
            10_000,
            ENSEMBLE_SEED,
            &IntegratorConfig::trajectory(),
        )
        .map_err(numeric)?;

        // Agreement within 3σ of the ensemble mean at every sample time; the
        // epsilon absorbs exact zeros before the pulse arrives.
        let mut worst_sigma: f64 = 0.0;
        let mut pass = true;
        for i in 0..grid.len() {
            let diff = (ens.mean[i] - me[i]).abs();
            if diff > 3.0 * ens.std_err[i] + 1e-9 {
                pass = false;
            }
            if ens.std_err[i] > 0.0 {
                worst_sigma = worst_sigma.max(diff / ens.std_err[i]);
            }
        }
        rows.push(CheckRow::new(
            id,
            name,
            format!("max |deviation| = {worst_sigma:.2} sigma"),
            "<= 3 sigma at 10 sample times",
            pass,
        ));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// 6. Lifetime pipeline
// ---------------------------------------------------------------------------

pub fn criterion_6() -> Result<Vec<CheckRow>, CliError> {
    let mut rows = Vec::new();
    for (id, name, toml_text, target_ps, expect_bi) in [
        (
            "6a",
            "Purcell-shortened decay (bi-exp fast component)",
            LIFETIME_RESONANT_TOML,
            221.0,
            true,
        ),
        (
            "6b",
            "bare radiative decay (mono-exp fit)",
            LIFETIME_DETUNED_TOML,
            890.0,
            false,
        ),
    ] {
        let file = ScenarioFile::parse(toml_text)?;
        let scenario = file.experiment(None)?;
        let settings = file.lifetime_settings()?;
        let trace = lifetime_trace(&scenario, settings.bin_width_ps).map_err(numeric)?;
        let fitted = fit_lifetime_trace(
            &trace.time_ps,
            &trace.counts,
            settings.rise_guard_ps,
            settings.model,
        )
        .map_err(numeric)?;
        let value = if expect_bi {
            fitted.fast_lifetime_ps.ok_or_else(|| {
                CliError::Numeric("bi-exponential fit returned no fast component".into())
            })?
        } else {
            fitted.lifetime_ps
        };
        rows.push(CheckRow::new(
            id,
            name,
            format!("{value:.1} ps ({})", fitted.model_used),
            if expect_bi {
                "221 ps +- 10%"
            } else {
                "890 ps +- 10%"
            },
            (value - target_ps).abs() <= 0.10 * target_ps,
        ));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// 7. g² pipeline
// ---------------------------------------------------------------------------

struct HbtRun {
    g2: pillarsim_core::stats::G2Result,
    hist: CoincidenceHistogram,
}

/// Run the full hbt pipeline (stream → splitter → correlator → g²) on a
/// parsed scenario file.
fn run_hbt(
    file: &ScenarioFile,
    seed: Option<u64>,
    pool: &ThreadPool,
) -> Result<HbtRun, CliError> {
    let scenario = file.experiment(seed)?;
    let settings = file.hbt_settings(scenario.train.rep_period_ps);
    let stream = clicks_parallel(&scenario, pool)?;
    let (mut a, mut b) = split_hbt(&stream, file.split_seed(seed));
    if scenario.detector.dead_time_ps > 0.0 {
        a = apply_dead_time(&a, scenario.detector.dead_time_ps);
        b = apply_dead_time(&b, scenario.detector.dead_time_ps);
    }
    let hist = correlate(&a, &b, settings.bin_width_ps, settings.window_ps).map_err(numeric)?;
    let g2 = g2_zero(&hist, settings.n_side_peaks).map_err(numeric)?;
    Ok(HbtRun { g2, hist })
}

fn histogram_csv(hist: &CoincidenceHistogram) -> Vec<u8> {
    csv(
        "tau_ps,counts",
        hist.tau_ps
            .iter()
            .zip(&hist.counts)
            .map(|(&t, &c)| format!("{t},{c}")),
    )
}

/// Brute-force O(N²) pair counting with the same bin convention as the
/// production correlator; the deliberately naive second route.
fn brute_force_histogram(a: &ClickStream, b: &ClickStream, bin: f64, window: f64) -> Vec<u64> {
    let n_half = (window / bin).round() as usize;
    let n_bins = 2 * n_half + 1;
    let edge = (n_half as f64 + 0.5) * bin;
    let mut counts = vec![0u64; n_bins];
    for &ta in a.timestamps_ps() {
        for &tb in b.timestamps_ps() {
            let idx = ((tb - ta + edge) / bin).floor() as isize;
            if (0..n_bins as isize).contains(&idx) {
                counts[idx as usize] += 1;
            }
        }
    }
    counts
}

pub fn criterion_7(
    seed: Option<u64>,
    pool: &ThreadPool,
) -> Result<(Vec<CheckRow>, Vec<(String, Vec<u8>)>), CliError> {
    let mut rows = Vec::new();

    // (a) ideal source: resonant device, no blinking, no background, no darks.
    let ideal = ExperimentScenario {
        model: SystemModel::default_resonant(),
        pulse: PulseShape::new(PI, 1.3, 40.0).map_err(numeric)?,
        eid_coeff: 0.0,
        train: PulseTrain {
            rep_period_ps: 12195.1,
            n_pulses: 100_000,
        },
        detector: DetectorModel::default(),
        blinking: None,
        background: None,
        base_seed: seed.unwrap_or(PERFECT_SOURCE_SEED),
    };
    let stream = clicks_parallel(&ideal, pool)?;
    let (a, b) = split_hbt(&stream, ideal.base_seed ^ SPLIT_SEED_SALT);
    let rep = ideal.train.rep_period_ps;
    let hist = correlate(&a, &b, rep / 25.0, 30.0 * rep).map_err(numeric)?;
    let g2_ideal = g2_zero(&hist, 10).map_err(numeric)?;
    rows.push(CheckRow::new(
        "7a",
        "ideal source g2(0) at 1e5 pulses",
        format!(
            "{:.4} +- {:.4}",
            g2_ideal.g2_corrected, g2_ideal.g2_corrected_err
        ),
        "< 0.01",
        g2_ideal.g2_corrected < 0.01,
    ));

    // (b) Poissonian null test on the shipped scenario.
    let poisson = ScenarioFile::parse(HBT_POISSON_TOML)?;
    let run_b = run_hbt(&poisson, seed, pool)?;
    rows.push(CheckRow::new(
        "7b",
        "Poissonian background g2(0)",
        format!(
            "{:.4} +- {:.4}",
            run_b.g2.g2_corrected, run_b.g2.g2_corrected_err
        ),
        "1.0 +- 0.05",
        (run_b.g2.g2_corrected - 1.0).abs() <= 0.05,
    ));

    // (c) the shipped 75 μeV scenario with calibrated residual background.
    let delta75 = ScenarioFile::parse(HBT_DELTA75_TOML)?;
    let run_c = run_hbt(&delta75, seed, pool)?;
    let g2c = &run_c.g2;
    rows.push(
        CheckRow::new(
            "7c",
            "75 ueV scenario blinking-corrected g2(0)",
            format!("{:.4} +- {:.4}", g2c.g2_corrected, g2c.g2_corrected_err),
            "0.072 +- 0.02 with statistical error <= 0.015",
            (g2c.g2_corrected - 0.072).abs() <= 0.02 && g2c.g2_corrected_err <= 0.015,
        )
        .with_note(format!(
            "raw (blinking-biased) value {:.4}; side-peak bunching contrast {:.3}, \
             correlation length {:.1} pulses",
            g2c.g2_uncorrected, g2c.envelope.contrast, g2c.envelope.k0_pulses
        )),
    );

    // (d) two-pointer correlator against naive O(N²) pairing, N <= 10³.
    let mut small = ScenarioFile::parse(HBT_POISSON_TOML)?;
    if let Some(p) = small.pulse.as_mut() {
        p.n_pulses = Some(2_000);
    }
    let scenario = small.experiment(seed)?;
    let settings = small.hbt_settings(scenario.train.rep_period_ps);
    let stream = clicks_parallel(&scenario, pool)?;
    let (sa, sb) = split_hbt(&stream, small.split_seed(seed));
    let fast = correlate(&sa, &sb, settings.bin_width_ps, settings.window_ps).map_err(numeric)?;
    let brute = brute_force_histogram(&sa, &sb, settings.bin_width_ps, settings.window_ps);
    let total_fast: u64 = fast.counts.iter().sum();
    let total_brute: u64 = brute.iter().sum();
    rows.push(CheckRow::new(
        "7d",
        "correlator equals O(N^2) pairing exactly",
        format!(
            "{total_fast} vs {total_brute} pairs ({} and {} clicks); bins {}",
            sa.len(),
            sb.len(),
            if fast.counts == brute { "identical" } else { "differ" }
        ),
        "equal totals and identical bins",
        total_fast == total_brute && fast.counts == brute,
    ));

    let data = vec![(
        "delta75_histogram.csv".to_string(),
        histogram_csv(&run_c.hist),
    )];
    Ok((rows, data))
}

// ---------------------------------------------------------------------------
// 8. Detuning-series trends
// ---------------------------------------------------------------------------

pub fn criterion_8(pool: &ThreadPool) -> Result<Vec<CheckRow>, CliError> {
    let file = ScenarioFile::parse(RABI_DETUNING_TOML)?;
    let system = file.require_system()?;
    let model = file.system_model()?;
    let pulse = file.pulse_shape()?;
    let sweep = file.require_sweep()?;
    let detunings = sweep
        .detunings_uev
        .clone()
        .ok_or_else(|| CliError::Config("detuning trends need sweep.detunings_uev".into()))?;
    let areas = sweep
        .areas_rad
        .clone()
        .ok_or_else(|| CliError::Config("detuning trends need sweep.areas_rad".into()))?;

    // (i) π-pulse intensity strictly decreasing with |Δ|, > 4× total drop.
    let series = detuning_series(
        &model,
        pulse,
        system.eid_coeff,
        system.eid_slope_per_uev,
        &detunings,
    )
    .map_err(numeric)?;
    let strictly_decreasing = series
        .windows(2)
        .all(|w| w[1].relative_intensity < w[0].relative_intensity);
    let drop = series.first().map(|p| p.relative_intensity).unwrap_or(0.0)
        / series.last().map(|p| p.relative_intensity).unwrap_or(1.0);
    let mut rows = vec![CheckRow::new(
        "8a",
        "peak intensity falls monotonically with |delta|",
        format!("drop x{drop:.1} over {} detunings", series.len()),
        "strictly decreasing; > 4x total drop",
        strictly_decreasing && drop > 4.0,
    )];

    // (ii) π power grows by the cavity Lorentzian factor; exactly 2 at κ/2.
    let power_increasing = series
        .windows(2)
        .all(|w| w[1].pi_power_factor > w[0].pi_power_factor);
    let at_half_kappa = series
        .iter()
        .find(|p| (p.delta_uev - model.kappa_uev / 2.0).abs() < 1e-9)
        .ok_or_else(|| {
            CliError::Config("detuning grid must contain the kappa/2 point".into())
        })?;
    rows.push(CheckRow::new(
        "8b",
        "pi power doubles at half the cavity linewidth",
        format!("factor {:.9} at {} ueV", at_half_kappa.pi_power_factor, at_half_kappa.delta_uev),
        "2 within 1e-9; increasing along the series",
        (at_half_kappa.pi_power_factor - 2.0).abs() < 1e-9 && power_increasing,
    ));

    // (iii) fitted Rabi damping never decreases with detuning.
    let curves = detuning_rabi_curves_parallel(
        &model,
        pulse.fwhm_ps,
        system.eid_coeff,
        system.eid_slope_per_uev,
        &detunings,
        &areas,
        pool,
    )?;
    let mut damping_rates = Vec::with_capacity(curves.len());
    for curve in &curves {
        let xs: Vec<f64> = curve.points.iter().map(|p| p.area_rad).collect();
        let ys: Vec<f64> = curve.points.iter().map(|p| p.detected_mean).collect();
        let p0 = DampedRabi::initial_guess(&xs, &ys);
        let res = fit(&DampedRabi, &xs, &ys, None, &p0, &FitOptions::default()).map_err(numeric)?;
        if !res.converged {
            return Err(CliError::Numeric(format!(
                "damped-Rabi fit at {} ueV did not converge: {}",
                curve.delta_uev, res.message
            )));
        }
        damping_rates.push(1.0 / res.params[DampedRabi::THETA_D]);
    }
    // 2% slack on each step tolerates fit noise on the flattest curves.
    let non_decreasing = damping_rates
        .windows(2)
        .all(|w| w[1] >= 0.98 * w[0]);
    rows.push(CheckRow::new(
        "8c",
        "fitted Rabi damping grows with detuning",
        format!(
            "rates per rad: {}",
            damping_rates
                .iter()
                .map(|r| format!("{r:.3}"))
                .collect::<Vec<_>>()
                .join("; ")
        ),
        "non-decreasing (2% slack)",
        non_decreasing,
    ));
    Ok(rows)
}

// ---------------------------------------------------------------------------
// 9. Reproducibility
// ---------------------------------------------------------------------------

pub fn criterion_9(seed: Option<u64>, pool: &ThreadPool) -> Result<Vec<CheckRow>, CliError> {
    let generate = || -> Result<(Vec<u8>, Vec<u8>), CliError> {
        let mut file = ScenarioFile::parse(HBT_DELTA75_TOML)?;
        if let Some(p) = file.pulse.as_mut() {
            p.n_pulses = Some(5_000);
        }
        let scenario = file.experiment(seed)?;
        let settings = file.hbt_settings(scenario.train.rep_period_ps);
        let stream = clicks_parallel(&scenario, pool)?;
        let (a, b) = split_hbt(&stream, file.split_seed(seed));
        let hist =
            correlate(&a, &b, settings.bin_width_ps, settings.window_ps).map_err(numeric)?;
        Ok((clicks_csv(&a, &b), histogram_csv(&hist)))
    };
    let (clicks_1, hist_1) = generate()?;
    let (clicks_2, hist_2) = generate()?;
    let identical = clicks_1 == clicks_2 && hist_1 == hist_2;
    Ok(vec![CheckRow::new(
        "9",
        "same seed reproduces byte-identical data",
        format!(
            "clicks {} bytes, histogram {} bytes, reruns {}",
            clicks_1.len(),
            hist_1.len(),
            if identical { "identical" } else { "differ" }
        ),
        "byte-identical across two runs",
        identical,
    )])
}

// ---------------------------------------------------------------------------
// Suite driver
// ---------------------------------------------------------------------------

/// Everything `paper-check` produces: the table rows plus any data files
/// staged for the output directory.
pub struct CheckOutcome {
    pub rows: Vec<CheckRow>,
    pub data_files: Vec<(String, Vec<u8>)>,
}

impl CheckOutcome {
    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }
}

/// Run the whole acceptance suite. `seed` overrides the seeds of the
/// stochastic checks (7 and 9); the fixed numerical experiments (3c, 5) keep
/// their pinned seeds so their tolerances stay meaningful.
pub fn run_all(seed: Option<u64>, pool: &ThreadPool) -> Result<CheckOutcome, CliError> {
    let mut rows = Vec::new();
    rows.extend(criterion_1()?);
    rows.extend(criterion_2()?);
    rows.extend(criterion_3()?);
    rows.extend(criterion_4()?);
    rows.extend(criterion_5()?);
    rows.extend(criterion_6()?);
    let (rows7, data_files) = criterion_7(seed, pool)?;
    rows.extend(rows7);
    rows.extend(criterion_8(pool)?);
    rows.extend(criterion_9(seed, pool)?);
    Ok(CheckOutcome { rows, data_files })
}
