//! Closed-form cavity-QED design and efficiency relations for micropillar
//! single-photon sources.
//!
//! Everything here is a pure function of its arguments — no quantum dynamics
//! involved — so these serve both as design tools (quality factor, Purcell
//! factor, extraction efficiency versus pillar diameter) and as independent
//! cross-checks on the simulation modules.

use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // f64 math methods in no_std builds
use num_traits::Float;

/// Quality factor from a resonance energy and its linewidth (same units):
/// Q = E/ΔE.
pub fn q_from_linewidth(energy: f64, linewidth: f64) -> Result<f64> {
    if !(energy > 0.0) || !(linewidth > 0.0) {
        return Err(Error::invalid(
            "q_from_linewidth",
            "energy and linewidth must be positive",
        ));
    }
    Ok(energy / linewidth)
}

/// Mode volume convention for [`purcell_max`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeVolume {
    /// Mode volume in units of (λ_C/n)³.
    LambdaOverNCubed(f64),
    /// Mode volume in μm³ (converted using λ_C in nm and the index n).
    CubicMicrons(f64),
}

/// Maximum Purcell factor of an emitter perfectly matched to the cavity:
/// F_P,max = 3Q(λ_C/n)³ / (4π²·V_M).
pub fn purcell_max(q: f64, lambda_c_nm: f64, n_index: f64, v_mode: ModeVolume) -> Result<f64> {
    if !(q > 0.0) || !(lambda_c_nm > 0.0) || !(n_index > 0.0) {
        return Err(Error::invalid(
            "purcell_max",
            "Q, wavelength, and index must be positive",
        ));
    }
    let v_rel = match v_mode {
        ModeVolume::LambdaOverNCubed(v) => v,
        ModeVolume::CubicMicrons(v_um3) => {
            let lam_n_um = lambda_c_nm / n_index / 1000.0;
            v_um3 / lam_n_um.powi(3)
        }
    };
    if !(v_rel > 0.0) {
        return Err(Error::invalid("purcell_max", "mode volume must be positive"));
    }
    Ok(3.0 * q / (4.0 * core::f64::consts::PI.powi(2) * v_rel))
}

/// Photon extraction efficiency of a pillar whose losses split between the
/// designed output channel and residual (sidewall/absorption) losses:
/// η_ext = (Q_pillar/Q_2D) · F_P,max/(γ + F_P,max),
/// with γ the emitter decay into leaky modes in units of its bulk rate
/// (γ = 1 for an unperturbed emitter).
pub fn extraction_efficiency(q_pillar: f64, q_2d: f64, f_p_max: f64, gamma_rel: f64) -> Result<f64> {
    if !(q_pillar > 0.0) || !(q_2d > 0.0) {
        return Err(Error::invalid("extraction_efficiency", "Q values must be positive"));
    }
    if q_pillar > q_2d {
        return Err(Error::invalid(
            "extraction_efficiency",
            format!("Q_pillar = {q_pillar} exceeds the planar limit Q_2D = {q_2d}"),
        ));
    }
    if !(f_p_max > 0.0) || !(gamma_rel > 0.0) {
        return Err(Error::invalid(
            "extraction_efficiency",
            "F_P,max and γ must be positive",
        ));
    }
    Ok((q_pillar / q_2d) * f_p_max / (gamma_rel + f_p_max))
}

/// Relative emission intensity of a detuned emitter funnelled through the
/// cavity: I_X(Δ) ∝ F_P/(F_P + 1 + Δ²/γ_C²), normalised so the prefactor is
/// the value at Δ = 0 divided by F_P/(F_P+1)… i.e. this returns the absolute
/// fraction F_P/(F_P + 1 + Δ²/γ_C²) of emission collected by the cavity mode.
pub fn intensity_vs_detuning(f_p: f64, gamma_c_uev: f64, delta_uev: f64) -> Result<f64> {
    if !(f_p > 0.0) || !(gamma_c_uev > 0.0) {
        return Err(Error::invalid(
            "intensity_vs_detuning",
            "F_P and γ_C must be positive",
        ));
    }
    let x = delta_uev / gamma_c_uev;
    Ok(f_p / (f_p + 1.0 + x * x))
}

/// Purcell factor from on/off-resonance lifetimes: F_P = T_off/T_on − 1.
pub fn purcell_from_lifetimes(t_on_ps: f64, t_off_ps: f64) -> Result<f64> {
    if !(t_on_ps > 0.0) || !(t_off_ps > 0.0) {
        return Err(Error::invalid(
            "purcell_from_lifetimes",
            "lifetimes must be positive",
        ));
    }
    if t_off_ps < t_on_ps {
        return Err(Error::invalid(
            "purcell_from_lifetimes",
            format!("T_off = {t_off_ps} ps below T_on = {t_on_ps} ps implies F_P < 0"),
        ));
    }
    Ok(t_off_ps / t_on_ps - 1.0)
}

/// First-order (delta-method) uncertainty of [`purcell_from_lifetimes`] for
/// independent lifetime errors:
/// σ(F_P)² = (σ_off/T_on)² + (T_off·σ_on/T_on²)².
pub fn purcell_from_lifetimes_error(
    t_on_ps: f64,
    t_off_ps: f64,
    sigma_on_ps: f64,
    sigma_off_ps: f64,
) -> Result<f64> {
    purcell_from_lifetimes(t_on_ps, t_off_ps)?;
    if sigma_on_ps < 0.0 || sigma_off_ps < 0.0 {
        return Err(Error::invalid(
            "purcell_from_lifetimes_error",
            "uncertainties must be non-negative",
        ));
    }
    let d_off = sigma_off_ps / t_on_ps;
    let d_on = t_off_ps * sigma_on_ps / (t_on_ps * t_on_ps);
    Ok((d_off * d_off + d_on * d_on).sqrt())
}

/// Single-photon efficiency: η_SPS = η·√(1 − g²(0)).
pub fn single_photon_efficiency(eta: f64, g2_zero: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid("single_photon_efficiency", "η must be in [0,1]"));
    }
    if !(0.0..=1.0).contains(&g2_zero) {
        return Err(Error::invalid(
            "single_photon_efficiency",
            "g²(0) must be in [0,1]",
        ));
    }
    Ok(eta * (1.0 - g2_zero).sqrt())
}

/// Convert a detected count rate into a source efficiency:
/// η = polarization_factor · counts / (rep_rate · η_setup).
///
/// `polarization_factor` is 1 when the detected counts already represent the
/// full collected emission and 2 when only one of two polarisation channels
/// was detected.
pub fn count_rate_to_efficiency(
    counts_per_s: f64,
    rep_rate_per_s: f64,
    eta_setup: f64,
    polarization_factor: u8,
) -> Result<f64> {
    if !(counts_per_s > 0.0) || !(rep_rate_per_s > 0.0) || !(eta_setup > 0.0) {
        return Err(Error::invalid(
            "count_rate_to_efficiency",
            "counts, repetition rate, and η_setup must be positive",
        ));
    }
    if !matches!(polarization_factor, 1 | 2) {
        return Err(Error::invalid(
            "count_rate_to_efficiency",
            "polarization factor must be 1 or 2",
        ));
    }
    if counts_per_s > rep_rate_per_s * eta_setup {
        return Err(Error::invalid(
            "count_rate_to_efficiency",
            format!(
                "counts {counts_per_s}/s exceed rep_rate·η_setup = {}/s (implied efficiency > 1)",
                rep_rate_per_s * eta_setup
            ),
        ));
    }
    Ok(polarization_factor as f64 * counts_per_s / (rep_rate_per_s * eta_setup))
}

/// The efficiency chain of a measured source, from raw detected counts to the
/// single-photon efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyChain {
    pub counts_per_s: f64,
    pub rep_rate_per_s: f64,
    pub eta_setup: f64,
    pub g2_zero: f64,
    /// Efficiency in one linear polarisation channel.
    pub eta_lin: f64,
    /// Source efficiency summed over both polarisations (= 2·η_lin).
    pub eta_source: f64,
    /// η_source corrected for multi-photon events.
    pub eta_sps: f64,
}

impl EfficiencyChain {
    /// Build the chain from raw numbers. The detected counts are taken to
    /// represent the full collected emission through a setup of transmission
    /// `eta_setup` (polarisation optics included), so η_source uses factor 1
    /// and η_lin is half of it.
    pub fn from_counts(
        counts_per_s: f64,
        rep_rate_per_s: f64,
        eta_setup: f64,
        g2_zero: f64,
    ) -> Result<Self> {
        let eta_source = count_rate_to_efficiency(counts_per_s, rep_rate_per_s, eta_setup, 1)?;
        let eta_sps = single_photon_efficiency(eta_source.min(1.0), g2_zero)?;
        Ok(EfficiencyChain {
            counts_per_s,
            rep_rate_per_s,
            eta_setup,
            g2_zero,
            eta_lin: 0.5 * eta_source,
            eta_source,
            eta_sps,
        })
    }
}

/// Effective pulse area seen by the emitter when the drive passes through the
/// detuned cavity: the Lorentzian field filter scales the area by
/// √(1/(1 + (2δ/κ)²)), so the laser power needed for a π rotation grows by
/// 1 + (2δ/κ)².
pub fn cavity_filtered_drive(area_rad: f64, delta_laser_cavity_uev: f64, kappa_uev: f64) -> Result<f64> {
    if !(kappa_uev > 0.0) {
        return Err(Error::invalid("cavity_filtered_drive", "κ must be positive"));
    }
    if area_rad < 0.0 {
        return Err(Error::invalid("cavity_filtered_drive", "area must be ≥ 0"));
    }
    let x = 2.0 * delta_laser_cavity_uev / kappa_uev;
    Ok(area_rad / (1.0 + x * x).sqrt())
}

/// One row of a diameter sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PillarDesign {
    pub diameter_um: f64,
    pub q: f64,
    pub f_p_max: f64,
    pub eta_ext: f64,
}

/// Reference geometry anchoring the mode-volume scaling V_M(d) = V_ref·(d/d_ref)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignReference {
    /// Reference diameter (μm).
    pub d_ref_um: f64,
    /// Mode volume at the reference diameter, in (λ_C/n)³ units.
    pub v_ref_lambda_n_cubed: f64,
    /// Planar-cavity quality factor bounding all pillars.
    pub q_2d: f64,
    /// Leaky decay rate in units of the bulk rate.
    pub gamma_rel: f64,
}

/// Sweep pillar designs over measured (diameter, Q) pairs.
///
/// The mode volume scales with the pillar cross-section, V_M ∝ d²; Q is taken
/// from measurement rather than a model, so the sweep reflects the real
/// interplay of mode confinement and sidewall losses.
pub fn design_sweep(
    q_table: &[(f64, f64)],
    reference: &DesignReference,
) -> Result<Vec<PillarDesign>> {
    if q_table.is_empty() {
        return Err(Error::invalid("design_sweep", "empty Q table"));
    }
    if !(reference.d_ref_um > 0.0) || !(reference.v_ref_lambda_n_cubed > 0.0) {
        return Err(Error::invalid("design_sweep", "reference geometry must be positive"));
    }
    let mut rows = Vec::with_capacity(q_table.len());
    for &(d_um, q) in q_table {
        if !(d_um > 0.0) || !(q > 0.0) {
            return Err(Error::invalid(
                "design_sweep",
                format!("non-positive table entry (d = {d_um}, Q = {q})"),
            ));
        }
        let v = reference.v_ref_lambda_n_cubed * (d_um / reference.d_ref_um).powi(2);
        let f_p_max = 3.0 * q / (4.0 * core::f64::consts::PI.powi(2) * v);
        let eta_ext = extraction_efficiency(q, reference.q_2d, f_p_max, reference.gamma_rel)?;
        rows.push(PillarDesign {
            diameter_um: d_um,
            q,
            f_p_max,
            eta_ext,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn quality_factor_of_the_reference_pillar() {
        // E = 1.38635 eV with a 233 μeV linewidth → Q = 5950.
        let q = q_from_linewidth(1_386_350.0, 233.0).unwrap();
        assert_relative_eq!(q, 5950.0, epsilon = 1.0);
        // Unit-free: same in meV.
        let q2 = q_from_linewidth(1386.35, 0.233).unwrap();
        assert_relative_eq!(q, q2, epsilon = 1e-9);
    }

    #[test]
    fn purcell_max_inverts_mode_volume() {
        // Q = 5950 needs V_M = 3Q/(4π²F) = 141.3 (λ/n)³ to give F_P,max = 3.2.
        let v = 3.0 * 5950.0 / (4.0 * core::f64::consts::PI.powi(2) * 3.2);
        assert_relative_eq!(v, 141.3, epsilon = 0.05);
        let f = purcell_max(5950.0, 894.0, 3.46, ModeVolume::LambdaOverNCubed(v)).unwrap();
        assert_relative_eq!(f, 3.2, epsilon = 1e-12);
        // μm³ route agrees with the relative-units route.
        let lam_n_um = 894.0 / 3.46 / 1000.0;
        let f2 = purcell_max(
            5950.0,
            894.0,
            3.46,
            ModeVolume::CubicMicrons(v * lam_n_um.powi(3)),
        )
        .unwrap();
        assert_relative_eq!(f, f2, epsilon = 1e-12);
    }

    #[test]
    fn extraction_efficiency_of_the_reference_pillar() {
        // (5950/6670)·(3.2/4.2) = 0.680 — the design value for the measured
        // device (the quoted ≈65% rounds the same inputs differently).
        let eta = extraction_efficiency(5950.0, 6670.0, 3.2, 1.0).unwrap();
        assert_relative_eq!(eta, 0.680, epsilon = 1e-3);
        assert_relative_eq!(eta, 0.679660, epsilon = 1e-5);
    }

    #[test]
    fn extraction_efficiency_rejects_q_above_planar_limit() {
        assert!(extraction_efficiency(7000.0, 6670.0, 3.2, 1.0).is_err());
    }

    #[test]
    fn intensity_vs_detuning_values() {
        // Resonance: F/(F+1) = 3.1/4.1.
        let on = intensity_vs_detuning(3.1, 233.0, 0.0).unwrap();
        assert_relative_eq!(on, 3.1 / 4.1, epsilon = 1e-12);
        // Δ = γ_C adds exactly 1 to the denominator.
        let at_width = intensity_vs_detuning(3.1, 233.0, 233.0).unwrap();
        assert_relative_eq!(at_width, 3.1 / 5.1, epsilon = 1e-12);
    }

    #[test]
    fn purcell_from_lifetimes_of_the_measured_device() {
        // T_on = 221 ps, T_off = 890 ps → F_P = 3.027.
        let f = purcell_from_lifetimes(221.0, 890.0).unwrap();
        assert_relative_eq!(f, 3.027, epsilon = 5e-4);
        assert!(purcell_from_lifetimes(890.0, 221.0).is_err());
    }

    #[test]
    fn purcell_error_delta_method_vs_monte_carlo() {
        // Delta-method error for (221±40, 890±66) ps.
        let sigma = purcell_from_lifetimes_error(221.0, 890.0, 40.0, 66.0).unwrap();
        let expect = ((66.0_f64 / 221.0).powi(2) + (890.0 * 40.0 / (221.0 * 221.0)).powi(2)).sqrt();
        assert_relative_eq!(sigma, expect, epsilon = 1e-12);
        assert_relative_eq!(sigma, 0.788, epsilon = 1e-3);

        // Monte Carlo resampling cross-check of the linearisation, in the
        // small-error regime where it is asymptotically exact. (At the full
        // ±18% on T_on the convexity of 1/T_on inflates the resampled spread
        // ~20% above the delta value; the linearised number is the
        // conventional quoted uncertainty.)
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let gauss = |rng: &mut rand_chacha::ChaCha12Rng, mu: f64, s: f64| {
            let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
            mu + s * (-2.0 * u1.max(1e-300).ln()).sqrt()
                * (2.0 * core::f64::consts::PI * u2).cos()
        };
        let (s_on, s_off) = (4.0, 6.6);
        let sigma_small = purcell_from_lifetimes_error(221.0, 890.0, s_on, s_off).unwrap();
        let n = 200_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let t_on = gauss(&mut rng, 221.0, s_on);
            let t_off = gauss(&mut rng, 890.0, s_off);
            let f = t_off / t_on - 1.0;
            sum += f;
            sq += f * f;
        }
        let mc_sigma = (sq / n as f64 - (sum / n as f64).powi(2)).sqrt();
        assert!(
            (mc_sigma - sigma_small).abs() / sigma_small < 0.03,
            "MC σ = {mc_sigma}, delta σ = {sigma_small}"
        );
    }

    #[test]
    fn single_photon_efficiency_values() {
        let eta = single_photon_efficiency(0.430, 0.072).unwrap();
        assert_relative_eq!(eta, 0.414, epsilon = 5e-4);
        assert_relative_eq!(single_photon_efficiency(0.5, 0.0).unwrap(), 0.5);
        assert!(single_photon_efficiency(1.2, 0.0).is_err());
        assert!(single_photon_efficiency(0.5, 1.5).is_err());
    }

    #[test]
    fn count_rate_conversion() {
        // 130 kHz at 82 MHz through a 0.36% setup → 0.440 source efficiency.
        let eta = count_rate_to_efficiency(130e3, 82e6, 0.0036, 1).unwrap();
        assert!((eta - 0.43).abs() <= 0.03, "η = {eta}");
        assert_relative_eq!(eta, 0.4404, epsilon = 5e-4);
        // Saturation bound: counts = rep·η_setup → exactly 1.
        let sat = count_rate_to_efficiency(82e6 * 0.0036, 82e6, 0.0036, 1).unwrap();
        assert_relative_eq!(sat, 1.0, epsilon = 1e-12);
        // Implied efficiency above 1 is an error.
        assert!(count_rate_to_efficiency(82e6 * 0.0036 * 1.01, 82e6, 0.0036, 1).is_err());
        assert!(count_rate_to_efficiency(130e3, 82e6, 0.0036, 3).is_err());
    }

    #[test]
    fn efficiency_chain_is_consistent() {
        let chain = EfficiencyChain::from_counts(130e3, 82e6, 0.0036, 0.072).unwrap();
        assert_relative_eq!(chain.eta_source, 2.0 * chain.eta_lin, epsilon = 1e-15);
        assert_relative_eq!(
            chain.eta_sps,
            chain.eta_source * (1.0 - 0.072_f64).sqrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(chain.eta_lin, 0.2202, epsilon = 5e-4);
    }

    #[test]
    fn cavity_filter_halves_pi_power_at_half_kappa() {
        // At δ = κ/2 the power transmission is 1/2, i.e. the effective area
        // drops by √2 and the π-pulse power doubles.
        let area = cavity_filtered_drive(core::f64::consts::PI, 116.5, 233.0).unwrap();
        assert_relative_eq!(
            area,
            core::f64::consts::PI / 2.0_f64.sqrt(),
            epsilon = 1e-12
        );
        // On resonance the filter is transparent.
        assert_relative_eq!(
            cavity_filtered_drive(1.0, 0.0, 233.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn design_sweep_reproduces_reference_point() {
        let reference = DesignReference {
            d_ref_um: 4.0,
            v_ref_lambda_n_cubed: 3.0 * 5950.0 / (4.0 * core::f64::consts::PI.powi(2) * 3.2),
            q_2d: 6670.0,
            gamma_rel: 1.0,
        };
        let rows = design_sweep(&[(4.0, 5950.0)], &reference).unwrap();
        assert_relative_eq!(rows[0].f_p_max, 3.2, epsilon = 1e-12);
        assert_relative_eq!(rows[0].eta_ext, 0.6797, epsilon = 1e-4);
    }

    proptest! {
        #[test]
        fn intensity_is_even_and_decreasing_in_detuning(
            f_p in 0.1f64..50.0,
            gamma in 10.0f64..1000.0,
            d1 in 0.0f64..2000.0,
            d2 in 0.0f64..2000.0,
        ) {
            let i1 = intensity_vs_detuning(f_p, gamma, d1).unwrap();
            let i1m = intensity_vs_detuning(f_p, gamma, -d1).unwrap();
            prop_assert!((i1 - i1m).abs() < 1e-15);
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let ilo = intensity_vs_detuning(f_p, gamma, lo).unwrap();
            let ihi = intensity_vs_detuning(f_p, gamma, hi).unwrap();
            prop_assert!(ihi <= ilo + 1e-15);
        }

        #[test]
        fn lifetime_purcell_round_trip(
            t_on in 10.0f64..2000.0,
            f_p in 0.0f64..100.0,
        ) {
            let t_off = t_on * (1.0 + f_p);
            let back = purcell_from_lifetimes(t_on, t_off).unwrap();
            prop_assert!((back - f_p).abs() <= 1e-12 * (1.0 + f_p));
        }

        #[test]
        fn extraction_efficiency_bounded_and_monotone_in_q(
            q in 100.0f64..6670.0,
            f in 0.1f64..30.0,
        ) {
            let eta = extraction_efficiency(q, 6670.0, f, 1.0).unwrap();
            prop_assert!(eta > 0.0 && eta < 1.0);
            let eta_hi = extraction_efficiency((q * 1.1).min(6670.0), 6670.0, f, 1.0).unwrap();
            prop_assert!(eta_hi >= eta - 1e-15);
        }

        #[test]
        fn q_is_scale_invariant(e in 1.0f64..1e7, dw in 1e-3f64..1e3, s in 0.1f64..100.0) {
            prop_assume!(e > dw);
            let q1 = q_from_linewidth(e, dw).unwrap();
            let q2 = q_from_linewidth(e * s, dw * s).unwrap();
            prop_assert!((q1 - q2).abs() <= 1e-9 * q1);
        }
    }
}
