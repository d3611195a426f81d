//! Physical parameters of the driven quantum-dot–cavity system.
//!
//! Conventions used throughout the crate:
//!
//! * Energies (coupling g, cavity linewidth κ, detunings) are in μeV.
//! * Rates (leaky decay, pure dephasing) and times are in 1/ps and ps.
//! * The two unit systems meet through ħ = 658.2119 μeV·ps; conversion
//!   happens once, inside the evolution routines, never ad hoc.
//! * The frame rotates at the laser frequency. With δ_L = E_laser − E_QD and
//!   Δ = E_QD − E_cavity, the drift Hamiltonian in μeV reads
//!   H₀ = −δ_L·σ⁺σ⁻ − (δ_L + Δ)·a†a + g·(σ⁺a + σ⁻a†),
//!   and a drive pulse adds ħΩ(t)/2·(σ⁺ + σ⁻).

use crate::hilbert::HilbertConfig;
use crate::linalg::{dagger, hermiticity_defect, C64};
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;
use ndarray::Array2;
#[allow(unused_imports)] // f64 math methods in no_std builds
use num_traits::Float;

/// Reduced Planck constant in μeV·ps.
pub const HBAR_UEV_PS: f64 = 658.2119;

/// Convert an energy in μeV to an angular rate in 1/ps.
pub fn uev_to_per_ps(energy_uev: f64) -> f64 {
    energy_uev / HBAR_UEV_PS
}

/// Convert an angular rate in 1/ps to an energy in μeV.
pub fn per_ps_to_uev(rate_per_ps: f64) -> f64 {
    rate_per_ps * HBAR_UEV_PS
}

/// Parameters of the dot–cavity system in the laser frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemModel {
    /// Emitter–cavity coupling strength g (μeV).
    pub g_uev: f64,
    /// Cavity intensity linewidth κ (μeV); photons leave at rate κ/ħ.
    pub kappa_uev: f64,
    /// Radiative decay into leaky (non-cavity) modes (1/ps).
    pub gamma_leaky_per_ps: f64,
    /// Pure dephasing rate of the e–g coherence (1/ps).
    pub gamma_dephasing_per_ps: f64,
    /// QD–cavity detuning Δ = E_QD − E_cavity (μeV).
    pub delta_qd_cavity_uev: f64,
    /// Laser–QD detuning δ_L = E_laser − E_QD (μeV).
    pub delta_laser_qd_uev: f64,
    /// Fock-space truncation (highest photon number kept).
    pub n_fock: usize,
}

/// Non-fatal model diagnostics produced by [`SystemModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum ModelWarning {
    /// The weak-coupling (Purcell) regime assumes g ≪ κ; warn at g ≥ κ/4.
    StrongCoupling { g_uev: f64, kappa_uev: f64 },
}

impl SystemModel {
    /// Resonant defaults: coupling derived from a Purcell factor of 3.0 with
    /// κ = 233 μeV and a bulk radiative lifetime of 852 ps.
    pub fn default_resonant() -> Self {
        let kappa_uev = 233.0;
        let gamma_leaky_per_ps = 1.0 / 852.0;
        SystemModel {
            g_uev: g_from_purcell(3.0, kappa_uev, gamma_leaky_per_ps),
            kappa_uev,
            gamma_leaky_per_ps,
            gamma_dephasing_per_ps: 0.0,
            delta_qd_cavity_uev: 0.0,
            delta_laser_qd_uev: 0.0,
            n_fock: 2,
        }
    }

    /// Check parameter ranges. Returns warnings for physically questionable
    /// but legal settings, and errors for outright invalid ones.
    pub fn validate(&self) -> Result<Vec<ModelWarning>> {
        if !self.g_uev.is_finite() || self.g_uev < 0.0 {
            return Err(Error::invalid("g_uev", "must be finite and ≥ 0"));
        }
        if !self.kappa_uev.is_finite() || self.kappa_uev < 0.0 {
            return Err(Error::invalid("kappa_uev", "must be finite and ≥ 0"));
        }
        if !self.gamma_leaky_per_ps.is_finite() || self.gamma_leaky_per_ps < 0.0 {
            return Err(Error::invalid("gamma_leaky_per_ps", "must be finite and ≥ 0"));
        }
        if !self.gamma_dephasing_per_ps.is_finite() || self.gamma_dephasing_per_ps < 0.0 {
            return Err(Error::invalid(
                "gamma_dephasing_per_ps",
                "must be finite and ≥ 0",
            ));
        }
        if !self.delta_qd_cavity_uev.is_finite() || !self.delta_laser_qd_uev.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        if self.n_fock < 1 {
            return Err(Error::invalid("n_fock", "need at least one photon state"));
        }
        let mut warnings = Vec::new();
        if self.kappa_uev > 0.0 && self.g_uev >= self.kappa_uev / 4.0 {
            warnings.push(ModelWarning::StrongCoupling {
                g_uev: self.g_uev,
                kappa_uev: self.kappa_uev,
            });
        }
        Ok(warnings)
    }

    pub fn hilbert(&self) -> Result<HilbertConfig> {
        HilbertConfig::new(self.n_fock)
    }

    /// The resonant Purcell factor implied by (g, κ, γ_leaky):
    /// F_P = 4g²/(ħ·κ·γ_leaky).
    pub fn purcell_factor(&self) -> f64 {
        purcell_from_g(self.g_uev, self.kappa_uev, self.gamma_leaky_per_ps)
    }
}

/// Coupling strength g (μeV) that realises a resonant Purcell factor F_P for
/// a cavity of linewidth κ (μeV) and a leaky decay rate γ (1/ps):
/// inverts F_P = 4g²/(ħ·κ·γ).
pub fn g_from_purcell(f_p: f64, kappa_uev: f64, gamma_leaky_per_ps: f64) -> f64 {
    0.5 * (f_p * kappa_uev * HBAR_UEV_PS * gamma_leaky_per_ps).sqrt()
}

/// Resonant Purcell factor implied by a coupling g (μeV): F_P = 4g²/(ħ·κ·γ).
pub fn purcell_from_g(g_uev: f64, kappa_uev: f64, gamma_leaky_per_ps: f64) -> f64 {
    4.0 * g_uev * g_uev / (HBAR_UEV_PS * kappa_uev * gamma_leaky_per_ps)
}

/// Gaussian drive pulse in the rotating frame.
///
/// The Rabi envelope is Ω(t) = Θ/(σ√2π) · exp(−(t−t₀)²/2σ²) with
/// σ = fwhm/√(8 ln 2), truncated to |t − t₀| ≤ 5σ. The truncation changes
/// the pulse area by less than 6·10⁻⁷ relative, below every tolerance used
/// in this crate. Θ is the pulse area in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    /// Pulse area Θ = ∫Ω(t)dt in radians.
    pub area_rad: f64,
    /// Intensity full width at half maximum (ps).
    pub fwhm_ps: f64,
    /// Pulse centre t₀ (ps).
    pub center_ps: f64,
}

impl PulseShape {
    pub fn new(area_rad: f64, fwhm_ps: f64, center_ps: f64) -> Result<Self> {
        if !area_rad.is_finite() || area_rad < 0.0 {
            return Err(Error::invalid("area_rad", "must be finite and ≥ 0"));
        }
        if !fwhm_ps.is_finite() || fwhm_ps <= 0.0 {
            return Err(Error::invalid("fwhm_ps", "must be finite and > 0"));
        }
        if !center_ps.is_finite() {
            return Err(Error::invalid("center_ps", "must be finite"));
        }
        Ok(PulseShape {
            area_rad,
            fwhm_ps,
            center_ps,
        })
    }

    /// Gaussian standard deviation σ = fwhm/√(8 ln 2).
    pub fn sigma_ps(&self) -> f64 {
        self.fwhm_ps / (8.0 * core::f64::consts::LN_2).sqrt()
    }

    /// Instantaneous Rabi frequency Ω(t) in rad/ps.
    pub fn omega(&self, t_ps: f64) -> f64 {
        if self.area_rad == 0.0 {
            return 0.0;
        }
        let s = self.sigma_ps();
        let x = (t_ps - self.center_ps) / s;
        if x.abs() > 5.0 {
            return 0.0;
        }
        self.area_rad / (s * (2.0 * core::f64::consts::PI).sqrt()) * (-0.5 * x * x).exp()
    }

    /// Support of the truncated envelope, [t₀ − 5σ, t₀ + 5σ].
    /// Empty (start = end = t₀) for a zero-area pulse.
    pub fn support(&self) -> (f64, f64) {
        if self.area_rad == 0.0 {
            return (self.center_ps, self.center_ps);
        }
        let s = self.sigma_ps();
        (self.center_ps - 5.0 * s, self.center_ps + 5.0 * s)
    }
}

/// Which jump channel a collapse operator feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    /// Photon leaves through the cavity mode (the detected channel).
    Cavity,
    /// Photon is lost to leaky (non-cavity) radiative modes.
    Leaky,
    /// Pure dephasing event; no photon is emitted.
    Dephasing,
}

impl ChannelKind {
    /// Whether a jump in this channel corresponds to an emitted photon.
    pub fn emits_photon(&self) -> bool {
        !matches!(self, ChannelKind::Dephasing)
    }
}

/// A collapse operator with its rate folded in: entries carry units (1/ps)^½.
#[derive(Debug, Clone)]
pub struct CollapseChannel {
    pub kind: ChannelKind,
    /// √rate · operator.
    pub op: Array2<C64>,
    /// Cached op†·op, the jump-rate observable.
    pub op_dag_op: Array2<C64>,
}

impl CollapseChannel {
    pub fn new(kind: ChannelKind, op: Array2<C64>) -> Self {
        let op_dag_op = dagger(&op).dot(&op);
        CollapseChannel { kind, op, op_dag_op }
    }
}

/// Dense operators realising a [`SystemModel`], ready for the evolvers.
#[derive(Debug, Clone)]
pub struct ModelOperators {
    pub hilbert: HilbertConfig,
    /// Drift Hamiltonian in the laser frame (μeV). Hermitian by construction;
    /// verified to 10⁻¹² relative on assembly.
    pub h0_uev: Array2<C64>,
    /// Dimensionless drive operator σ⁺ + σ⁻, scaled by ħΩ(t)/2 at runtime.
    pub drive: Array2<C64>,
    /// Collapse channels with rates folded in.
    pub channels: Vec<CollapseChannel>,
    /// Excited-state projector σ⁺σ⁻ (unscaled), used for drive-proportional
    /// dephasing and as the population observable.
    pub excited_projector: Array2<C64>,
}

/// Assemble the Hamiltonian and collapse operators for a [`SystemModel`].
///
/// Collapse channels: √(κ/ħ)·a (cavity), √γ_leaky·σ⁻ (leaky), and
/// √(2γ_φ)·σ⁺σ⁻ (pure dephasing; rate convention such that the e–g coherence
/// decays at γ_φ). Channels with zero rate are omitted.
pub fn build_model_operators(model: &SystemModel) -> Result<ModelOperators> {
    model.validate()?;
    let hilbert = model.hilbert()?;

    let a = hilbert.annihilation();
    let sm = hilbert.sigma_minus();
    let sp = hilbert.sigma_plus();
    let proj = hilbert.excited_projector();

    let delta_l = model.delta_laser_qd_uev;
    let delta_lc = delta_l + model.delta_qd_cavity_uev; // E_laser − E_cavity
    let g = C64::new(model.g_uev, 0.0);

    let mut h0 = hilbert.number().mapv(|z| z * C64::new(-delta_lc, 0.0));
    h0 = h0 + proj.mapv(|z| z * C64::new(-delta_l, 0.0));
    h0 = h0 + (sp.dot(&a) + dagger(&a).dot(&sm)).mapv(|z| z * g);

    let defect = hermiticity_defect(&h0);
    let scale = crate::linalg::frobenius_norm(&h0).max(1.0);
    if defect > 1e-12 * scale {
        return Err(Error::InvalidInput(format!(
            "assembled Hamiltonian is not Hermitian (defect {defect:e})"
        )));
    }

    let mut channels = Vec::new();
    if model.kappa_uev > 0.0 {
        let rate = uev_to_per_ps(model.kappa_uev);
        channels.push(CollapseChannel::new(
            ChannelKind::Cavity,
            a.mapv(|z| z * C64::new(rate.sqrt(), 0.0)),
        ));
    }
    if model.gamma_leaky_per_ps > 0.0 {
        channels.push(CollapseChannel::new(
            ChannelKind::Leaky,
            sm.mapv(|z| z * C64::new(model.gamma_leaky_per_ps.sqrt(), 0.0)),
        ));
    }
    if model.gamma_dephasing_per_ps > 0.0 {
        channels.push(CollapseChannel::new(
            ChannelKind::Dephasing,
            proj.mapv(|z| z * C64::new((2.0 * model.gamma_dephasing_per_ps).sqrt(), 0.0)),
        ));
    }

    Ok(ModelOperators {
        hilbert,
        h0_uev: h0,
        drive: sp + sm,
        channels,
        excited_projector: proj,
    })
}
