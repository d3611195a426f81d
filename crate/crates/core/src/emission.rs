//! Experiment-level emission modelling: pulse trains, detectors, blinking,
//! background light, and the deterministic (master-equation) and stochastic
//! (quantum-jump) observables built from them.
//!
//! Deterministic curves — Rabi oscillation, lifetime trace, detuning series —
//! come from the master equation and carry no sampling noise. Click streams
//! are sampled pulse by pulse from quantum-jump trajectories with a fixed
//! RNG-stream allocation, so a stream is bit-for-bit reproducible for a given
//! scenario and base seed, independent of how the pulse loop is partitioned
//! across threads.

use crate::evolve::{evolve_master_equation, Drive, Evolution, IntegratorConfig};
use crate::model::{
    build_model_operators, ModelOperators, PulseShape, SystemModel, HBAR_UEV_PS,
};
use crate::stats::ClickStream;
use crate::trajectory::{sample_jump_trajectory, TrajectorySeed};
use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
#[allow(unused_imports)] // f64 math methods in no_std builds
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};

/// RNG stream carrying the pulse-to-pulse blinking telegraph.
const STREAM_BLINKING: u64 = u64::MAX;
/// RNG stream carrying detector dark counts.
const STREAM_DARK: u64 = u64::MAX - 1;

/// The excitation pulse train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseTrain {
    /// Laser repetition period (ps).
    pub rep_period_ps: f64,
    pub n_pulses: u64,
}

/// Detection chain parameters.
///
/// `efficiency` is the end-to-end probability that an emitted cavity photon
/// produces a click (setup transmission × detector quantum efficiency).
/// Timing jitter is applied per click. Dead time is *not* applied by the
/// stream generator: each physical detector has its own dead time, and in an
/// intensity-correlation measurement the beam splitter sits before the
/// detectors — apply [`crate::stats::apply_dead_time`] per arm instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Gaussian timing response, full width at half maximum (ps).
    pub jitter_fwhm_ps: f64,
    /// Detector dead time (ps); consumed by the analysis stage.
    pub dead_time_ps: f64,
    /// Dark counts per ps (uniform in time).
    pub dark_count_rate_per_ps: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            efficiency: 1.0,
            jitter_fwhm_ps: 0.0,
            dead_time_ps: 0.0,
            dark_count_rate_per_ps: 0.0,
        }
    }
}

impl DetectorModel {
    /// Gaussian jitter standard deviation, σ = fwhm/√(8 ln 2).
    pub fn jitter_sigma_ps(&self) -> f64 {
        self.jitter_fwhm_ps / (8.0 * core::f64::consts::LN_2).sqrt()
    }
}

/// Two-state (bright/dark) telegraph intermittency of the emitter, switching
/// slowly compared to one emission cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlinkingModel {
    /// Switching rate bright → dark (1/ps).
    pub rate_to_off_per_ps: f64,
    /// Switching rate dark → bright (1/ps).
    pub rate_to_on_per_ps: f64,
}

impl BlinkingModel {
    /// Stationary probability of the bright state, β/(α+β).
    pub fn p_on(&self) -> f64 {
        self.rate_to_on_per_ps / (self.rate_to_off_per_ps + self.rate_to_on_per_ps)
    }

    /// Bunching contrast of the coincidence side peaks, c = P_off/P_on.
    pub fn expected_contrast(&self) -> f64 {
        self.rate_to_off_per_ps / self.rate_to_on_per_ps
    }

    /// Correlation length of the telegraph in pulses, k₀ = 1/((α+β)·T_rep).
    pub fn correlation_pulses(&self, rep_period_ps: f64) -> f64 {
        1.0 / ((self.rate_to_off_per_ps + self.rate_to_on_per_ps) * rep_period_ps)
    }
}

/// Uncorrelated background light reaching the detector (laser bleed-through,
/// neighbouring emitters). The per-pulse mean is the *detected* mean — no
/// further efficiency is applied — and arrival times follow the pulse with an
/// exponential delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundModel {
    pub mean_photons_per_pulse: f64,
    /// Exponential decay constant of the background arrival profile (ps).
    pub tau_ps: f64,
}

/// A complete measurement configuration.
#[derive(Debug, Clone)]
pub struct ExperimentScenario {
    pub model: SystemModel,
    /// Excitation pulse, with its centre inside the repetition window
    /// [0, rep_period).
    pub pulse: PulseShape,
    /// Drive-proportional dephasing coefficient (see [`Drive`]).
    pub eid_coeff: f64,
    pub train: PulseTrain,
    pub detector: DetectorModel,
    pub blinking: Option<BlinkingModel>,
    pub background: Option<BackgroundModel>,
    pub base_seed: u64,
}

impl ExperimentScenario {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let t = &self.train;
        if !(t.rep_period_ps > 0.0) || !t.rep_period_ps.is_finite() {
            return Err(Error::invalid("rep_period_ps", "must be positive and finite"));
        }
        if t.n_pulses == 0 {
            return Err(Error::invalid("n_pulses", "need at least one pulse"));
        }
        if t.n_pulses > (u64::MAX - 4) / 2 {
            return Err(Error::invalid("n_pulses", "exceeds the RNG stream budget"));
        }
        let (lo, hi) = self.pulse.support();
        if lo < 0.0 || hi > t.rep_period_ps {
            return Err(Error::invalid(
                "pulse",
                "support must lie inside the repetition window [0, rep_period]",
            ));
        }
        if t.rep_period_ps <= 20.0 * self.pulse.fwhm_ps {
            return Err(Error::invalid(
                "rep_period_ps",
                "must exceed 20 pulse widths so consecutive pulses stay resolved",
            ));
        }
        let d = &self.detector;
        if !(0.0..=1.0).contains(&d.efficiency) {
            return Err(Error::invalid("efficiency", "must be in [0, 1]"));
        }
        if d.jitter_fwhm_ps < 0.0 || d.dead_time_ps < 0.0 || d.dark_count_rate_per_ps < 0.0 {
            return Err(Error::invalid("detector", "jitter, dead time and dark rate must be ≥ 0"));
        }
        if !self.eid_coeff.is_finite() || self.eid_coeff < 0.0 {
            return Err(Error::invalid("eid_coeff", "must be finite and ≥ 0"));
        }
        if let Some(b) = &self.blinking {
            if b.rate_to_off_per_ps < 0.0
                || b.rate_to_on_per_ps <= 0.0
                || !(b.rate_to_off_per_ps + b.rate_to_on_per_ps).is_finite()
            {
                return Err(Error::invalid(
                    "blinking",
                    "need rate_to_on > 0 and rate_to_off ≥ 0",
                ));
            }
        }
        if let Some(b) = &self.background {
            if b.mean_photons_per_pulse < 0.0 || !(b.tau_ps > 0.0) {
                return Err(Error::invalid(
                    "background",
                    "mean must be ≥ 0 and tau positive",
                ));
            }
        }
        Ok(())
    }

    fn drive(&self) -> Drive {
        Drive::pulse_with_eid(self.pulse, self.eid_coeff)
    }
}

// ---------------------------------------------------------------------------
// Deterministic observables
// ---------------------------------------------------------------------------

/// Total photon-emission rate of the excited dot: leaky decay plus the
/// cavity-filtered Purcell rate, γ·(1 + F_P·L(Δ)) with
/// L(Δ) = 1/(1 + (2Δ/κ)²). Used to size integration windows.
fn effective_emission_rate(model: &SystemModel) -> f64 {
    let mut rate = model.gamma_leaky_per_ps;
    if model.kappa_uev > 0.0 {
        let kappa_w = model.kappa_uev / HBAR_UEV_PS;
        let lorentz = 1.0
            / (1.0 + (2.0 * model.delta_qd_cavity_uev / model.kappa_uev).powi(2));
        rate += 4.0 * model.g_uev * model.g_uev / (HBAR_UEV_PS * HBAR_UEV_PS * kappa_w) * lorentz;
    }
    rate
}

fn single_pulse_evolution(
    model: &SystemModel,
    pulse: PulseShape,
    eid_coeff: f64,
) -> Result<Evolution> {
    let ops = build_model_operators(model)?;
    let rho0 = crate::evolve::DensityMatrix::pure(&ops.hilbert.ket(0, 0), 0.0);
    let (lo, hi) = pulse.support();
    let rate = effective_emission_rate(model);
    // Integrate until the residual excitation is below ~e⁻¹²; for a system
    // with no decay channel nothing is emitted anyway.
    let settle = if rate > 0.0 { 12.0 / rate } else { 10.0 * pulse.fwhm_ps };
    let grid = [lo - 1.0, hi + settle];
    evolve_master_equation(
        &ops,
        Drive::pulse_with_eid(pulse, eid_coeff),
        &rho0,
        &grid,
        &IntegratorConfig::default(),
    )
}

/// Mean number of photons emitted into the cavity channel by one excitation
/// pulse, from the master-equation flux (no sampling noise).
pub fn mean_detected_photons(
    model: &SystemModel,
    pulse: PulseShape,
    eid_coeff: f64,
) -> Result<f64> {
    if pulse.area_rad == 0.0 {
        return Ok(0.0);
    }
    Ok(single_pulse_evolution(model, pulse, eid_coeff)?.emitted_cavity())
}

/// One point of a Rabi-oscillation measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiPoint {
    /// Pulse area Θ (radians).
    pub area_rad: f64,
    /// Mean cavity photons per pulse.
    pub detected_mean: f64,
}

/// Detected intensity versus pulse area: the Rabi oscillation of the source.
/// Deterministic (master-equation photon flux).
pub fn rabi_curve(
    model: &SystemModel,
    pulse_fwhm_ps: f64,
    eid_coeff: f64,
    areas_rad: &[f64],
) -> Result<Vec<RabiPoint>> {
    let mut points = Vec::with_capacity(areas_rad.len());
    for &area in areas_rad {
        let pulse = PulseShape::new(area, pulse_fwhm_ps, 0.0)?;
        let detected_mean = mean_detected_photons(model, pulse, eid_coeff)?;
        points.push(RabiPoint {
            area_rad: area,
            detected_mean,
        });
    }
    Ok(points)
}

/// Expected time-resolved emission histogram (a lifetime measurement).
#[derive(Debug, Clone)]
pub struct LifetimeTrace {
    /// Bin centres (ps, relative to the pulse-period start).
    pub time_ps: Vec<f64>,
    /// Expected counts per bin over the whole train.
    pub counts: Vec<f64>,
    pub bin_width_ps: f64,
}

/// Abramowitz–Stegun 7.1.26 rational approximation of erf, |error| < 1.5e-7.
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Convolve per-bin counts with a Gaussian timing response. The kernel is the
/// exact bin-integrated Gaussian (erf differences), normalised; mass jittered
/// past the trace edges is lost, as in a real measurement window.
fn gaussian_smear(values: &[f64], bin_width_ps: f64, sigma_ps: f64) -> Vec<f64> {
    if sigma_ps <= 0.0 || values.is_empty() {
        return values.to_vec();
    }
    let half = (5.0 * sigma_ps / bin_width_ps).ceil() as isize;
    let norm = 1.0 / (sigma_ps * core::f64::consts::SQRT_2);
    let mut kernel = Vec::with_capacity((2 * half + 1) as usize);
    let mut total = 0.0;
    for k in -half..=half {
        let hi = erf((k as f64 + 0.5) * bin_width_ps * norm);
        let lo = erf((k as f64 - 0.5) * bin_width_ps * norm);
        let w = 0.5 * (hi - lo);
        kernel.push(w);
        total += w;
    }
    let n = values.len() as isize;
    let mut out = vec![0.0; values.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (kk, w) in kernel.iter().enumerate() {
            let j = i as isize - (kk as isize - half);
            if j >= 0 && j < n {
                acc += w * values[j as usize];
            }
        }
        *o = acc / total;
    }
    out
}

/// Expected lifetime histogram over one repetition period.
///
/// The per-bin signal is the exact master-equation photon flux (cavity plus
/// leaky channels — both carry the same decay law, and which one dominates
/// the collected light depends on the cavity configuration), scaled by the
/// detection efficiency and, when blinking is configured, the bright-state
/// duty cycle. Background light and dark counts add their expectations; the
/// detector timing response smears the result.
pub fn lifetime_trace(scenario: &ExperimentScenario, bin_width_ps: f64) -> Result<LifetimeTrace> {
    scenario.validate()?;
    if !(bin_width_ps > 0.0) {
        return Err(Error::invalid("bin_width_ps", "must be positive"));
    }
    let n_bins = (scenario.train.rep_period_ps / bin_width_ps).floor() as usize;
    if n_bins < 16 {
        return Err(Error::invalid(
            "bin_width_ps",
            "fewer than 16 bins per repetition period",
        ));
    }
    let ops = build_model_operators(&scenario.model)?;
    let rho0 = crate::evolve::DensityMatrix::pure(&ops.hilbert.ket(0, 0), 0.0);
    let edges: Vec<f64> = (0..=n_bins).map(|i| i as f64 * bin_width_ps).collect();
    let evo = evolve_master_equation(
        &ops,
        scenario.drive(),
        &rho0,
        &edges,
        &IntegratorConfig::default(),
    )?;

    // Photon flux per bin = difference of the cumulative channel emission
    // between consecutive bin edges, summed over photon-emitting channels.
    let photon_cols: Vec<usize> = evo
        .channel_kinds
        .iter()
        .enumerate()
        .filter(|(_, k)| k.emits_photon())
        .map(|(c, _)| c)
        .collect();
    let duty = scenario.blinking.as_ref().map_or(1.0, |b| b.p_on());
    let eff = scenario.detector.efficiency;
    let mut per_pulse = vec![0.0; n_bins];
    for (i, v) in per_pulse.iter_mut().enumerate() {
        let mut flux = 0.0;
        for &c in &photon_cols {
            flux += evo.channel_flux[(i + 1, c)] - evo.channel_flux[(i, c)];
        }
        *v = flux * eff * duty;
    }

    if let Some(bg) = &scenario.background {
        let t0 = scenario.pulse.center_ps;
        for (i, v) in per_pulse.iter_mut().enumerate() {
            let lo = (edges[i] - t0).max(0.0);
            let hi = (edges[i + 1] - t0).max(0.0);
            let mass = (-lo / bg.tau_ps).exp() - (-hi / bg.tau_ps).exp();
            *v += bg.mean_photons_per_pulse * mass;
        }
    }

    let smeared = gaussian_smear(
        &per_pulse,
        bin_width_ps,
        scenario.detector.jitter_sigma_ps(),
    );
    let n = scenario.train.n_pulses as f64;
    let dark = scenario.detector.dark_count_rate_per_ps * bin_width_ps;
    let counts = smeared.iter().map(|s| n * (s + dark)).collect();
    let time_ps = (0..n_bins)
        .map(|i| (i as f64 + 0.5) * bin_width_ps)
        .collect();
    Ok(LifetimeTrace {
        time_ps,
        counts,
        bin_width_ps,
    })
}

/// One point of a cavity-detuning series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningPoint {
    /// Emitter–cavity detuning Δ (μeV).
    pub delta_uev: f64,
    /// Laser power needed for a π pulse at the emitter, relative to the
    /// resonant case: the cavity filters the incoming drive, so
    /// P_π(Δ)/P_π(0) = 1 + (2δ_LC/κ)².
    pub pi_power_factor: f64,
    /// Mean cavity photons per π pulse at this detuning.
    pub detected_mean: f64,
    /// `detected_mean` normalised to the resonant point.
    pub relative_intensity: f64,
    /// Drive-dephasing coefficient used at this detuning.
    pub eid_coeff: f64,
}

/// Detected intensity and π-pulse power across emitter–cavity detunings.
///
/// The excitation laser tracks the emitter (δ_L fixed), the cavity moves.
/// Each point propagates the master equation with the pulse area still π *at
/// the emitter* — experimentally the drive power is raised to compensate the
/// cavity filter, which is reported separately as `pi_power_factor`. The
/// drive-dephasing coefficient may grow with detuning via `eid_slope_per_uev`
/// (phonon-assisted processes strengthen off resonance).
pub fn detuning_series(
    base: &SystemModel,
    pulse: PulseShape,
    eid_coeff_resonant: f64,
    eid_slope_per_uev: f64,
    detunings_uev: &[f64],
) -> Result<Vec<DetuningPoint>> {
    if base.kappa_uev <= 0.0 {
        return Err(Error::invalid("kappa_uev", "detuning series needs a cavity"));
    }
    if eid_coeff_resonant < 0.0 || eid_slope_per_uev < 0.0 {
        return Err(Error::invalid("eid", "coefficients must be ≥ 0"));
    }
    let mut resonant = *base;
    resonant.delta_qd_cavity_uev = 0.0;
    let reference = mean_detected_photons(&resonant, pulse, eid_coeff_resonant)?;
    if reference <= 0.0 {
        return Err(Error::invalid(
            "detuning_series",
            "resonant reference emission is zero",
        ));
    }
    let mut points = Vec::with_capacity(detunings_uev.len());
    for &delta in detunings_uev {
        let mut m = *base;
        m.delta_qd_cavity_uev = delta;
        let eid = eid_coeff_resonant + eid_slope_per_uev * delta.abs();
        let detected = mean_detected_photons(&m, pulse, eid)?;
        let delta_lc = m.delta_laser_qd_uev + delta; // laser–cavity detuning
        points.push(DetuningPoint {
            delta_uev: delta,
            pi_power_factor: 1.0 + (2.0 * delta_lc / m.kappa_uev).powi(2),
            detected_mean: detected,
            relative_intensity: detected / reference,
            eid_coeff: eid,
        });
    }
    Ok(points)
}

/// A full Rabi oscillation measured at one emitter–cavity detuning.
#[derive(Debug, Clone)]
pub struct DetunedRabiCurve {
    /// Emitter–cavity detuning Δ (μeV).
    pub delta_uev: f64,
    /// Drive-dephasing coefficient used at this detuning.
    pub eid_coeff: f64,
    /// Laser power per unit pulse area relative to the resonant device,
    /// 1 + (2δ_LC/κ)².
    pub pi_power_factor: f64,
    pub points: Vec<RabiPoint>,
}

/// Rabi oscillations across a set of emitter–cavity detunings, sharing a
/// pulse-area grid. Complements [`detuning_series`]: where that reports only
/// the π-pulse intensity, this resolves the whole oscillation so its damping
/// (e.g. via a damped-Rabi fit) can be tracked against detuning.
pub fn detuning_rabi_curves(
    base: &SystemModel,
    pulse_fwhm_ps: f64,
    eid_coeff_resonant: f64,
    eid_slope_per_uev: f64,
    detunings_uev: &[f64],
    areas_rad: &[f64],
) -> Result<Vec<DetunedRabiCurve>> {
    if base.kappa_uev <= 0.0 {
        return Err(Error::invalid("kappa_uev", "detuning series needs a cavity"));
    }
    if eid_coeff_resonant < 0.0 || eid_slope_per_uev < 0.0 {
        return Err(Error::invalid("eid", "coefficients must be ≥ 0"));
    }
    let mut curves = Vec::with_capacity(detunings_uev.len());
    for &delta in detunings_uev {
        let mut m = *base;
        m.delta_qd_cavity_uev = delta;
        let eid = eid_coeff_resonant + eid_slope_per_uev * delta.abs();
        let delta_lc = m.delta_laser_qd_uev + delta;
        curves.push(DetunedRabiCurve {
            delta_uev: delta,
            eid_coeff: eid,
            pi_power_factor: 1.0 + (2.0 * delta_lc / m.kappa_uev).powi(2),
            points: rabi_curve(&m, pulse_fwhm_ps, eid, areas_rad)?,
        });
    }
    Ok(curves)
}

/// Relative change of the single-pulse cavity emission when the Fock-space
/// truncation is raised by one photon. A small value certifies that the
/// configured truncation is converged.
pub fn fock_convergence_gap(
    model: &SystemModel,
    pulse: PulseShape,
    eid_coeff: f64,
) -> Result<f64> {
    let here = mean_detected_photons(model, pulse, eid_coeff)?;
    let mut bigger = *model;
    bigger.n_fock += 1;
    let above = mean_detected_photons(&bigger, pulse, eid_coeff)?;
    Ok((here - above).abs() / above.abs().max(1e-12))
}

// ---------------------------------------------------------------------------
// Stochastic click streams
// ---------------------------------------------------------------------------

/// Bright/dark state of the emitter at each pulse, sampled from the exact
/// two-state propagator of the telegraph over one repetition period
/// (RNG stream `u64::MAX`). The initial state is drawn from the stationary
/// distribution.
pub fn blinking_sequence(
    blinking: &BlinkingModel,
    rep_period_ps: f64,
    n_pulses: u64,
    base_seed: u64,
) -> Vec<bool> {
    let mut rng = TrajectorySeed {
        base_seed,
        trajectory_index: STREAM_BLINKING,
    }
    .rng();
    let p_stat = blinking.p_on();
    let r = blinking.rate_to_off_per_ps + blinking.rate_to_on_per_ps;
    let decay = (-r * rep_period_ps).exp();
    let mut on = rng.gen::<f64>() < p_stat;
    let mut seq = Vec::with_capacity(n_pulses as usize);
    for _ in 0..n_pulses {
        seq.push(on);
        let p_next_on = p_stat + (if on { 1.0 - p_stat } else { -p_stat }) * decay;
        on = rng.gen::<f64>() < p_next_on;
    }
    seq
}

/// Detected clicks originating from source pulses with indices in `range`
/// (unsorted). Pulse i draws its quantum trajectory from RNG stream 2i and
/// its detection chain (loss, jitter, background) from stream 2i+1, so any
/// partition of the pulse range yields the same clicks — the basis for
/// thread-parallel generation. `on` is the blinking sequence for the *whole*
/// train (empty = always bright).
pub fn source_clicks_for_pulses(
    scenario: &ExperimentScenario,
    ops: &ModelOperators,
    range: Range<u64>,
    on: &[bool],
) -> Result<Vec<f64>> {
    let psi0 = ops.hilbert.ket(0, 0);
    let rep = scenario.train.rep_period_ps;
    let drive = scenario.drive();
    let cfg = IntegratorConfig::trajectory();
    let sigma_j = scenario.detector.jitter_sigma_ps();
    let jitter = if sigma_j > 0.0 {
        Some(Normal::new(0.0, sigma_j).expect("positive sigma"))
    } else {
        None
    };
    let bg_draw = match &scenario.background {
        Some(b) if b.mean_photons_per_pulse > 0.0 => Some((
            Poisson::new(b.mean_photons_per_pulse)
                .map_err(|_| Error::invalid("background", "invalid Poisson mean"))?,
            Exp::new(1.0 / b.tau_ps).map_err(|_| Error::invalid("background", "invalid tau"))?,
        )),
        _ => None,
    };

    let mut clicks = Vec::new();
    for i in range {
        let bright = on.get(i as usize).copied().unwrap_or(true);
        let t0 = i as f64 * rep;
        let mut det_rng = TrajectorySeed {
            base_seed: scenario.base_seed,
            trajectory_index: 2 * i + 1,
        }
        .rng();

        if bright && scenario.pulse.area_rad > 0.0 {
            let traj = sample_jump_trajectory(
                ops,
                drive,
                &psi0,
                0.0,
                rep,
                TrajectorySeed {
                    base_seed: scenario.base_seed,
                    trajectory_index: 2 * i,
                },
                &cfg,
            )?;
            for t in traj.cavity_clicks() {
                if det_rng.gen::<f64>() >= scenario.detector.efficiency {
                    continue;
                }
                let mut time = t0 + t;
                if let Some(n) = &jitter {
                    time += n.sample(&mut det_rng);
                }
                clicks.push(time);
            }
        }

        if let Some((poisson, exp)) = &bg_draw {
            let n_bg = poisson.sample(&mut det_rng) as u64;
            for _ in 0..n_bg {
                let mut time = t0 + scenario.pulse.center_ps + exp.sample(&mut det_rng);
                if let Some(n) = &jitter {
                    time += n.sample(&mut det_rng);
                }
                clicks.push(time);
            }
        }
    }
    Ok(clicks)
}

/// Detector dark counts over the full train: a homogeneous Poisson process on
/// RNG stream `u64::MAX − 1`.
pub fn dark_clicks(scenario: &ExperimentScenario) -> Vec<f64> {
    let rate = scenario.detector.dark_count_rate_per_ps;
    if rate <= 0.0 {
        return Vec::new();
    }
    let duration = scenario.train.rep_period_ps * scenario.train.n_pulses as f64;
    let mut rng = TrajectorySeed {
        base_seed: scenario.base_seed,
        trajectory_index: STREAM_DARK,
    }
    .rng();
    let exp = Exp::new(rate).expect("positive rate");
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += exp.sample(&mut rng);
        if t >= duration {
            return out;
        }
        out.push(t);
    }
}

/// Sample the full detected click stream of a scenario: per-pulse quantum
/// trajectories, detection loss and jitter, blinking, background light, and
/// dark counts, merged and time-ordered. Bit-for-bit reproducible for a
/// given scenario and base seed.
pub fn generate_click_stream(scenario: &ExperimentScenario) -> Result<ClickStream> {
    scenario.validate()?;
    let ops = build_model_operators(&scenario.model)?;
    let on = match &scenario.blinking {
        Some(b) => blinking_sequence(
            b,
            scenario.train.rep_period_ps,
            scenario.train.n_pulses,
            scenario.base_seed,
        ),
        None => Vec::new(),
    };
    let mut times = source_clicks_for_pulses(scenario, &ops, 0..scenario.train.n_pulses, &on)?;
    times.extend(dark_clicks(scenario));
    times.sort_by(f64::total_cmp);
    ClickStream::new(times, scenario.train.rep_period_ps, scenario.train.n_pulses)
}
