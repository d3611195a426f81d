//! Lindblad master-equation propagation with an embedded Dormand–Prince 5(4)
//! integrator.
//!
//! The generator, in angular units of 1/ps, is
//!
//! dρ/dt = −i[H(t), ρ] + Σ_k ( C_k ρ C_k† − ½{C_k†C_k, ρ} ),
//!
//! with H(t) = H₀/ħ + (Ω(t)/2)(σ⁺+σ⁻) and the collapse operators C_k carrying
//! their rates (see [`crate::model::build_model_operators`]). Per-channel
//! emission is integrated alongside ρ as extra quadrature states, so photon
//! bookkeeping inherits the integrator's accuracy.

use crate::linalg::{dagger, hermiticity_defect, min_eigval_hermitian, trace, C64};
use crate::model::{ChannelKind, ModelOperators, PulseShape, HBAR_UEV_PS};
use crate::{Error, Result};
use alloc::format;
#[allow(unused_imports)]
use alloc::vec;
use alloc::vec::Vec;
use ndarray::{Array1, Array2};
#[allow(unused_imports)] // f64 math methods in no_std builds
use num_traits::Float;

/// Density matrix with its time stamp.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub matrix: Array2<C64>,
    pub time_ps: f64,
}

impl DensityMatrix {
    /// ρ = |ψ⟩⟨ψ| for a (normalised) ket.
    pub fn pure(ket: &Array1<C64>, time_ps: f64) -> Self {
        let n = ket.len();
        let mut m = Array2::from_elem((n, n), C64::new(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = ket[i] * ket[j].conj();
            }
        }
        DensityMatrix { matrix: m, time_ps }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Check the defining properties of a physical state: unit trace (10⁻⁹),
    /// Hermiticity (10⁻¹⁰), and positivity up to numerical noise (smallest
    /// eigenvalue ≥ −10⁻⁸).
    pub fn validate(&self) -> Result<()> {
        let tr = trace(&self.matrix);
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "density matrix trace {} + {}i deviates from 1",
                tr.re, tr.im
            )));
        }
        if hermiticity_defect(&self.matrix) > 1e-10 {
            return Err(Error::InvalidInput(
                "density matrix is not Hermitian within 1e-10".into(),
            ));
        }
        let lam_min = min_eigval_hermitian(&self.matrix);
        if lam_min < -1e-8 {
            return Err(Error::InvalidInput(format!(
                "density matrix has negative eigenvalue {lam_min:e}"
            )));
        }
        Ok(())
    }
}

/// Tr(op·ρ). Errors only on dimension mismatch.
pub fn expectation(op: &Array2<C64>, rho: &DensityMatrix) -> Result<C64> {
    if op.nrows() != rho.dim() || op.ncols() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: op.nrows(),
        });
    }
    Ok(trace(&op.dot(&rho.matrix)))
}

/// Tr(op·ρ) for a Hermitian observable: asserts the imaginary part is below
/// 10⁻¹⁰ and returns the real part.
pub fn expectation_real(op: &Array2<C64>, rho: &DensityMatrix) -> Result<f64> {
    let z = expectation(op, rho)?;
    if z.im.abs() > 1e-10 {
        return Err(Error::NotReal {
            label: "hermitian observable",
            imag: z.im,
        });
    }
    Ok(z.re)
}

/// Drive term for an evolution: an optional pulse plus an optional
/// drive-proportional pure-dephasing coefficient.
///
/// Resonantly driven quantum dots suffer excitation-induced dephasing: the
/// stronger the instantaneous drive, the faster the coherence decays. This is
/// modelled as an additional dephasing rate γ_φ(t) = eid_coeff · Ω(t), i.e. a
/// dephasing contribution proportional to the Rabi envelope. Its integrated
/// effect over one pulse scales with the pulse area, which is what damps Rabi
/// oscillations as a function of area.
#[derive(Debug, Clone, Copy, Default)]
pub struct Drive {
    pub pulse: Option<PulseShape>,
    /// Dimensionless coefficient of drive-proportional dephasing.
    pub eid_coeff: f64,
}

impl Drive {
    pub fn none() -> Self {
        Drive::default()
    }

    pub fn pulse(pulse: PulseShape) -> Self {
        Drive {
            pulse: Some(pulse),
            eid_coeff: 0.0,
        }
    }

    pub fn pulse_with_eid(pulse: PulseShape, eid_coeff: f64) -> Self {
        Drive {
            pulse: Some(pulse),
            eid_coeff,
        }
    }

    fn omega(&self, t_ps: f64) -> f64 {
        self.pulse.map_or(0.0, |p| p.omega(t_ps))
    }
}

/// Tolerances and step limits for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    /// Relative tolerance per step.
    pub rel_tol: f64,
    /// Absolute tolerance per step.
    pub abs_tol: f64,
    /// Hard ceiling on the step size (ps).
    pub max_step_ps: f64,
    /// Step-underflow guard (ps); going below this aborts the integration.
    pub min_step_ps: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step_ps: 250.0,
            min_step_ps: 1e-10,
        }
    }
}

impl IntegratorConfig {
    /// Looser tolerances for Monte Carlo trajectories, whose sampling noise
    /// (∝ 1/√N) dwarfs per-step integration error long before 1e-6.
    pub fn trajectory() -> Self {
        IntegratorConfig {
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            ..IntegratorConfig::default()
        }
    }
}

/// Result of a master-equation propagation over a sample grid.
#[derive(Debug, Clone)]
pub struct Evolution {
    /// Sample times (the caller's grid).
    pub times_ps: Vec<f64>,
    /// ρ at each sample time.
    pub states: Vec<DensityMatrix>,
    /// Cumulative emission per collapse channel at each sample time:
    /// shape (n_samples, n_channels), entry = ∫ Tr(C†C ρ) dt from the start.
    pub channel_flux: Array2<f64>,
    /// Channel kinds, aligned with the columns of `channel_flux`.
    pub channel_kinds: Vec<ChannelKind>,
    /// Largest |Tr ρ − 1| observed before per-step renormalisation.
    pub max_trace_drift: f64,
}

impl Evolution {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("evolution has at least one sample")
    }

    /// Real expectation value of a Hermitian observable at every sample time.
    pub fn expectation_series(&self, op: &Array2<C64>) -> Result<Vec<f64>> {
        self.states.iter().map(|s| expectation_real(op, s)).collect()
    }

    fn total_flux_of(&self, kind: ChannelKind, sample: usize) -> f64 {
        self.channel_kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == kind)
            .map(|(c, _)| self.channel_flux[(sample, c)])
            .sum()
    }

    /// Cumulative photon emission into the cavity channel at the final time.
    pub fn emitted_cavity(&self) -> f64 {
        self.total_flux_of(ChannelKind::Cavity, self.times_ps.len() - 1)
    }

    /// Cumulative photon emission into leaky modes at the final time.
    pub fn emitted_leaky(&self) -> f64 {
        self.total_flux_of(ChannelKind::Leaky, self.times_ps.len() - 1)
    }

    /// Cumulative cavity emission at each sample time.
    pub fn cavity_flux_series(&self) -> Vec<f64> {
        (0..self.times_ps.len())
            .map(|i| self.total_flux_of(ChannelKind::Cavity, i))
            .collect()
    }

    /// Residual excitation ⟨σ⁺σ⁻⟩ + ⟨a†a⟩ of the final state.
    pub fn residual_excitation(&self, ops: &ModelOperators) -> Result<f64> {
        let last = self.final_state();
        Ok(expectation_real(&ops.excited_projector, last)?
            + expectation_real(&ops.hilbert.number(), last)?)
    }
}

// ---------------------------------------------------------------------------
// Dormand–Prince 5(4) on flat complex state vectors
// ---------------------------------------------------------------------------

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
/// b₅ − b₄, the embedded error weights (k₁..k₇).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One adaptive driver over a flat complex state vector.
///
/// `rhs(t, y, dy)` fills dy; `ceiling(t)` bounds the step size looking forward
/// from `t` (used to resolve narrow pulses); `on_sample(i, y)` is invoked when
/// the integration lands exactly on `grid[i]`; `post_step(t, y)` may
/// renormalise the state after each accepted step and returns a drift metric.
pub(crate) fn dopri5_drive(
    mut rhs: impl FnMut(f64, &Array1<C64>, &mut Array1<C64>),
    y0: Array1<C64>,
    grid: &[f64],
    cfg: &IntegratorConfig,
    mut ceiling: impl FnMut(f64) -> f64,
    mut on_sample: impl FnMut(usize, &Array1<C64>),
    mut post_step: impl FnMut(f64, &mut Array1<C64>) -> f64,
) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::InvalidInput("sample grid needs ≥ 2 points".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "sample grid must be strictly increasing".into(),
        ));
    }
    let n = y0.len();
    let mut y = y0;
    let mut t = grid[0];
    on_sample(0, &y);

    let mut k: Vec<Array1<C64>> = (0..7).map(|_| Array1::from_elem(n, C64::new(0.0, 0.0))).collect();
    let mut ytmp = Array1::from_elem(n, C64::new(0.0, 0.0));
    rhs(t, &y, &mut k[0]);

    let mut h: f64 = (cfg.max_step_ps).min(ceiling(t)).min(grid[1] - t).max(cfg.min_step_ps);
    let mut max_drift: f64 = 0.0;
    let mut next_sample = 1usize;

    while next_sample < grid.len() {
        let t_target = grid[next_sample];
        // Clamp the step: global ceiling, pulse-aware ceiling, land on target.
        let mut h_try = h.min(cfg.max_step_ps).min(ceiling(t));
        let mut landing = false;
        if t + h_try >= t_target - 1e-14 * t_target.abs().max(1.0) {
            h_try = t_target - t;
            landing = true;
        }

        // Stage evaluations.
        for s in 0..6 {
            ytmp.assign(&y);
            for (j, aj) in A[s].iter().enumerate().take(s + 1) {
                if *aj != 0.0 {
                    let f = C64::new(h_try * aj, 0.0);
                    ytmp.zip_mut_with(&k[j], |o, kj| *o += f * kj);
                }
            }
            let ts = t + C[s] * h_try;
            let (head, tail) = k.split_at_mut(s + 1);
            let _ = head;
            rhs(ts, &ytmp, &mut tail[0]);
        }
        // 5th-order solution is stage 7's argument (FSAL): ytmp currently
        // holds y + h·Σ a₇ⱼ kⱼ, which equals the 5th-order update.
        let y5 = ytmp.clone();

        // Error estimate.
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = C64::new(0.0, 0.0);
            for (j, ej) in E.iter().enumerate() {
                if *ej != 0.0 {
                    e += C64::new(h_try * ej, 0.0) * k[j][i];
                }
            }
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].norm().max(y5[i].norm());
            err_sq += (e.norm() / sc).powi(2);
        }
        let err = (err_sq / n as f64).sqrt();

        if err.is_finite() && err <= 1.0 {
            // Accept.
            t += h_try;
            y = y5;
            max_drift = max_drift.max(post_step(t, &mut y));
            rhs(t, &y, &mut k[0]); // refresh FSAL slope after renormalisation
            if landing {
                on_sample(next_sample, &y);
                next_sample += 1;
            }
            let grow = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h_try * grow).min(cfg.max_step_ps);
        } else {
            let shrink = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h = h_try * shrink;
        }
        if h < cfg.min_step_ps {
            return Err(Error::IntegrationFailure {
                t_ps: t,
                reason: format!("step size underflow (h = {h:e} ps)"),
            });
        }
    }
    Ok(max_drift)
}

/// Step ceiling that prevents the integrator from leaping over a narrow
/// pulse: approach the support boundary exactly, then resolve the envelope
/// with at least ~8 steps per σ.
pub(crate) fn pulse_step_ceiling(pulse: Option<PulseShape>) -> impl FnMut(f64) -> f64 {
    move |t: f64| -> f64 {
        let Some(p) = pulse else {
            return f64::INFINITY;
        };
        if p.area_rad == 0.0 {
            return f64::INFINITY;
        }
        let (s0, s1) = p.support();
        let sigma = p.sigma_ps();
        if t < s0 {
            let gap = s0 - t;
            if gap > sigma / 8.0 {
                gap
            } else {
                sigma / 8.0
            }
        } else if t <= s1 {
            sigma / 8.0
        } else {
            f64::INFINITY
        }
    }
}

// ---------------------------------------------------------------------------
// Master equation
// ---------------------------------------------------------------------------

struct MasterRhs<'a> {
    ops: &'a ModelOperators,
    h0_per_ps: Array2<C64>,
    drive: Drive,
    dim: usize,
}

impl<'a> MasterRhs<'a> {
    fn new(ops: &'a ModelOperators, drive: Drive) -> Self {
        let h0_per_ps = ops.h0_uev.mapv(|z| z / C64::new(HBAR_UEV_PS, 0.0));
        let dim = ops.hilbert.dim();
        MasterRhs {
            ops,
            h0_per_ps,
            drive,
            dim,
        }
    }

    fn state_len(&self) -> usize {
        self.dim * self.dim + self.ops.channels.len()
    }

    fn unflatten(&self, y: &Array1<C64>) -> Array2<C64> {
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| y[i * self.dim + j])
    }

    fn eval(&self, t: f64, y: &Array1<C64>, dy: &mut Array1<C64>) {
        let d = self.dim;
        let rho = self.unflatten(y);
        let omega = self.drive.omega(t);

        // H(t) in 1/ps.
        let mut h = self.h0_per_ps.clone();
        if omega != 0.0 {
            let f = C64::new(0.5 * omega, 0.0);
            h.zip_mut_with(&self.ops.drive, |o, dmat| *o += f * dmat);
        }

        // −i[H, ρ]
        let mut drho = (h.dot(&rho) - rho.dot(&h)).mapv(|z| z * C64::new(0.0, -1.0));

        // Dissipators and flux rates.
        for (c_idx, ch) in self.ops.channels.iter().enumerate() {
            let jump = ch.op.dot(&rho).dot(&dagger(&ch.op));
            let anti = ch.op_dag_op.dot(&rho) + rho.dot(&ch.op_dag_op);
            let rate = trace(&ch.op_dag_op.dot(&rho)).re;
            drho = drho + jump - anti.mapv(|z| z * C64::new(0.5, 0.0));
            dy[d * d + c_idx] = C64::new(rate, 0.0);
        }

        // Drive-proportional pure dephasing, rate 2·c·Ω(t) on σ⁺σ⁻ (the
        // factor 2 matches the √(2γ_φ) collapse-operator convention).
        if self.drive.eid_coeff != 0.0 && omega != 0.0 {
            let gamma = 2.0 * self.drive.eid_coeff * omega;
            let p = &self.ops.excited_projector;
            let jump = p.dot(&rho).dot(p);
            let anti = p.dot(&rho) + rho.dot(p); // P² = P
            drho = drho + (jump - anti.mapv(|z| z * C64::new(0.5, 0.0))).mapv(|z| z * C64::new(gamma, 0.0));
        }

        for i in 0..d {
            for j in 0..d {
                dy[i * d + j] = drho[(i, j)];
            }
        }
    }
}

/// Propagate ρ through the master equation, sampling at `grid` (strictly
/// increasing; the first entry is the initial time). The caller's initial
/// state must be physical; the trace is renormalised after every accepted
/// step and the worst pre-renormalisation drift is reported.
pub fn evolve_master_equation(
    ops: &ModelOperators,
    drive: Drive,
    rho0: &DensityMatrix,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Evolution> {
    let d = ops.hilbert.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho0.dim(),
        });
    }
    rho0.validate()?;

    let rhs = MasterRhs::new(ops, drive);
    let n_ch = ops.channels.len();
    let mut y0 = Array1::from_elem(rhs.state_len(), C64::new(0.0, 0.0));
    for i in 0..d {
        for j in 0..d {
            y0[i * d + j] = rho0.matrix[(i, j)];
        }
    }

    let mut states: Vec<DensityMatrix> = Vec::with_capacity(grid.len());
    let mut flux = Array2::zeros((grid.len(), n_ch));

    let ceiling = pulse_step_ceiling(drive.pulse);
    let max_drift = dopri5_drive(
        |t, y, dy| rhs.eval(t, y, dy),
        y0,
        grid,
        cfg,
        ceiling,
        |idx, y| {
            let m = rhs.unflatten(y);
            states.push(DensityMatrix {
                matrix: m,
                time_ps: grid[idx],
            });
            for c in 0..n_ch {
                flux[(idx, c)] = y[d * d + c].re;
            }
        },
        |_t, y| {
            // Renormalise the trace; report the drift.
            let mut tr = C64::new(0.0, 0.0);
            for i in 0..d {
                tr += y[i * d + i];
            }
            let drift = (tr.re - 1.0).abs().max(tr.im.abs());
            if tr.re > 0.0 {
                let inv = C64::new(1.0 / tr.re, 0.0);
                for i in 0..d {
                    for j in 0..d {
                        y[i * d + j] *= inv;
                    }
                }
            }
            drift
        },
    )?;

    Ok(Evolution {
        times_ps: grid.to_vec(),
        states,
        channel_flux: flux,
        channel_kinds: ops.channels.iter().map(|c| c.kind).collect(),
        max_trace_drift: max_drift,
    })
}

/// Photon-number statistics of the cavity output over one excitation cycle.
///
/// Integrates the photon-counting hierarchy for the cavity channel: ρ₀ evolves
/// under the master equation minus the cavity recycling term J(ρ) = CρC†, and
/// ρ₁ additionally receives J(ρ₀). The traces of ρ₀ and ρ₁ at the end of the
/// interval are the probabilities of emitting exactly zero or one cavity
/// photon; the remainder is the multi-photon probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionStatistics {
    pub p0: f64,
    pub p1: f64,
    pub p_multi: f64,
}

pub fn cavity_emission_statistics(
    ops: &ModelOperators,
    drive: Drive,
    rho0: &DensityMatrix,
    t_start_ps: f64,
    t_end_ps: f64,
    cfg: &IntegratorConfig,
) -> Result<EmissionStatistics> {
    let d = ops.hilbert.dim();
    rho0.validate()?;
    let cavity: Vec<usize> = ops
        .channels
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == ChannelKind::Cavity)
        .map(|(i, _)| i)
        .collect();
    if cavity.is_empty() {
        return Err(Error::InvalidInput(
            "no cavity channel in the model (κ = 0)".into(),
        ));
    }

    let rhs = MasterRhs::new(ops, drive);
    // Stacked state [ρ₀; ρ₁] plus the flux quadratures of the plain RHS are
    // unused here; we drive a dedicated RHS over 2d² entries.
    let nn = d * d;
    let mut y0 = Array1::from_elem(2 * nn, C64::new(0.0, 0.0));
    for i in 0..d {
        for j in 0..d {
            y0[i * d + j] = rho0.matrix[(i, j)];
        }
    }

    let unflatten = |y: &Array1<C64>, off: usize| {
        Array2::from_shape_fn((d, d), |(i, j)| y[off + i * d + j])
    };

    let mut scratch_dy = Array1::from_elem(rhs.state_len(), C64::new(0.0, 0.0));
    let mut scratch_y = Array1::from_elem(rhs.state_len(), C64::new(0.0, 0.0));

    let grid = [t_start_ps, t_end_ps];
    let mut p0 = 0.0;
    let mut p1 = 0.0;
    let ceiling = pulse_step_ceiling(drive.pulse);

    dopri5_drive(
        |t, y, dy| {
            // Full Lindblad action on each block via the shared RHS, then
            // remove/route the cavity recycling terms.
            for (blk, out_blk) in [(0, 0), (nn, nn)] {
                for i in 0..nn {
                    scratch_y[i] = y[blk + i];
                }
                for x in scratch_y.iter_mut().skip(nn) {
                    *x = C64::new(0.0, 0.0);
                }
                rhs.eval(t, &scratch_y, &mut scratch_dy);
                for i in 0..nn {
                    dy[out_blk + i] = scratch_dy[i];
                }
            }
            let rho_a = unflatten(y, 0);
            let rho_b = unflatten(y, nn);
            for &ci in &cavity {
                let ch = &ops.channels[ci];
                let j_a = ch.op.dot(&rho_a).dot(&dagger(&ch.op));
                let j_b = ch.op.dot(&rho_b).dot(&dagger(&ch.op));
                for i in 0..d {
                    for j in 0..d {
                        // ρ₀ loses its recycling term; ρ₁ trades its own
                        // recycling for the feed from ρ₀.
                        dy[i * d + j] -= j_a[(i, j)];
                        dy[nn + i * d + j] += j_a[(i, j)] - j_b[(i, j)];
                    }
                }
            }
        },
        y0,
        &grid,
        cfg,
        ceiling,
        |idx, y| {
            if idx == 1 {
                let mut t0 = C64::new(0.0, 0.0);
                let mut t1 = C64::new(0.0, 0.0);
                for i in 0..d {
                    t0 += y[i * d + i];
                    t1 += y[nn + i * d + i];
                }
                p0 = t0.re;
                p1 = t1.re;
            }
        },
        |_t, _y| 0.0, // no renormalisation: the traces are the observables
    )?;

    Ok(EmissionStatistics {
        p0,
        p1,
        p_multi: (1.0 - p0 - p1).max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::HilbertConfig;
    use crate::model::{build_model_operators, PulseShape, SystemModel};
    use approx::assert_relative_eq;

    fn two_level_model() -> SystemModel {
        SystemModel {
            g_uev: 0.0,
            kappa_uev: 0.0,
            gamma_leaky_per_ps: 0.0,
            gamma_dephasing_per_ps: 0.0,
            delta_qd_cavity_uev: 0.0,
            delta_laser_qd_uev: 0.0,
            n_fock: 1,
        }
    }

    fn ground(h: &HilbertConfig) -> DensityMatrix {
        DensityMatrix::pure(&h.ket(0, 0), 0.0)
    }

    #[test]
    fn ground_state_is_stationary() {
        let ops = build_model_operators(&SystemModel::default_resonant()).unwrap();
        let rho0 = ground(&ops.hilbert);
        let evo = evolve_master_equation(
            &ops,
            Drive::none(),
            &rho0,
            &[0.0, 100.0, 500.0],
            &IntegratorConfig::default(),
        )
        .unwrap();
        let pe = evo.expectation_series(&ops.excited_projector).unwrap();
        assert!(pe.iter().all(|p| p.abs() < 1e-12));
        assert!(evo.emitted_cavity().abs() < 1e-12);
    }

    #[test]
    fn bare_emitter_decays_exponentially() {
        // |e,0⟩ with only leaky decay: ⟨σ⁺σ⁻⟩(t) = exp(−t/890).
        let mut model = two_level_model();
        model.gamma_leaky_per_ps = 1.0 / 890.0;
        let ops = build_model_operators(&model).unwrap();
        let rho0 = DensityMatrix::pure(&ops.hilbert.ket(1, 0), 0.0);
        let grid = [0.0, 100.0, 300.0, 890.0, 2000.0];
        let evo =
            evolve_master_equation(&ops, Drive::none(), &rho0, &grid, &IntegratorConfig::default())
                .unwrap();
        let pe = evo.expectation_series(&ops.excited_projector).unwrap();
        for (t, p) in grid.iter().zip(pe.iter()) {
            let expect = (-t / 890.0_f64).exp();
            assert!(
                (p - expect).abs() < 1e-6,
                "t = {t}: got {p}, want {expect}"
            );
        }
        // All emission is leaky; bookkeeping closes.
        let residual = evo.residual_excitation(&ops).unwrap();
        assert_relative_eq!(evo.emitted_leaky() + residual, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn cavity_photon_escapes_at_kappa() {
        // |g,1⟩ with only κ: ⟨a†a⟩(t) = exp(−κ_ω·t).
        let mut model = two_level_model();
        model.kappa_uev = 233.0;
        model.n_fock = 1;
        let ops = build_model_operators(&model).unwrap();
        let rho0 = DensityMatrix::pure(&ops.hilbert.ket(0, 1), 0.0);
        let kappa_w = crate::model::uev_to_per_ps(233.0);
        let grid = [0.0, 1.0, 5.0, 20.0];
        let evo =
            evolve_master_equation(&ops, Drive::none(), &rho0, &grid, &IntegratorConfig::default())
                .unwrap();
        let n = evo.expectation_series(&ops.hilbert.number()).unwrap();
        for (t, v) in grid.iter().zip(n.iter()) {
            assert!((v - (-kappa_w * t).exp()).abs() < 1e-7);
        }
        assert_relative_eq!(evo.emitted_cavity(), 1.0 - (-kappa_w * 20.0).exp(), epsilon = 1e-7);
    }

    #[test]
    fn pure_dephasing_decays_coherence_at_gamma() {
        // (|g,0⟩+|e,0⟩)/√2 under pure dephasing: ρ_ge(t) = ½·e^{−γ_φ t},
        // populations untouched. Pins the √(2γ_φ)σ⁺σ⁻ rate convention.
        let mut model = two_level_model();
        model.gamma_dephasing_per_ps = 0.02;
        let ops = build_model_operators(&model).unwrap();
        let h = ops.hilbert;
        let mut ket = h.ket(0, 0);
        let e = h.ket(1, 0);
        let inv = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        ket.zip_mut_with(&e, |a, b| *a = (*a + b) * inv);
        let rho0 = DensityMatrix::pure(&ket, 0.0);
        let grid = [0.0, 10.0, 50.0, 120.0];
        let evo =
            evolve_master_equation(&ops, Drive::none(), &rho0, &grid, &IntegratorConfig::default())
                .unwrap();
        for (t, s) in grid.iter().zip(evo.states.iter()) {
            let coh = s.matrix[(h.index(0, 0), h.index(1, 0))].norm();
            assert!((coh - 0.5 * (-0.02 * t).exp()).abs() < 1e-7);
            let pop = s.matrix[(h.index(1, 0), h.index(1, 0))].re;
            assert!((pop - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn pulse_area_theorem_two_level() {
        // Lossless two-level system driven by a truncated Gaussian pulse:
        // final excited population = sin²(Θ/2) within 1e-6.
        let ops = build_model_operators(&two_level_model()).unwrap();
        let rho0 = ground(&ops.hilbert);
        let pi = core::f64::consts::PI;
        for theta in [0.0, 0.5 * pi, pi, 2.0 * pi, 3.0 * pi] {
            let pulse = PulseShape::new(theta, 1.3, 0.0).unwrap();
            let (lo, hi) = pulse.support();
            let grid = [lo.min(-5.0), hi.max(5.0)];
            let evo = evolve_master_equation(
                &ops,
                Drive::pulse(pulse),
                &rho0,
                &grid,
                &IntegratorConfig::default(),
            )
            .unwrap();
            let pe = evo
                .expectation_series(&ops.excited_projector)
                .unwrap()
                .pop()
                .unwrap();
            let want = (0.5 * theta).sin().powi(2);
            assert!(
                (pe - want).abs() < 1e-6,
                "theta = {theta}: got {pe}, want {want}"
            );
        }
    }

    #[test]
    fn master_equation_matches_independent_rk4() {
        // Cross-check against a fixed-step classic RK4 Schrödinger solver for
        // the lossless driven two-level system (independent of the adaptive
        // Lindblad machinery: 2 amplitudes, no density matrix).
        let pulse = PulseShape::new(1.7, 1.3, 0.0).unwrap();
        let (lo, hi) = pulse.support();
        let n_steps = 200_000usize;
        let dt = (hi - lo) / n_steps as f64;
        let mut cg = C64::new(1.0, 0.0);
        let mut ce = C64::new(0.0, 0.0);
        // dc_g/dt = −i(Ω/2)c_e ; dc_e/dt = −i(Ω/2)c_g
        let deriv = |t: f64, cg: C64, ce: C64| {
            let f = C64::new(0.0, -0.5 * pulse.omega(t));
            (f * ce, f * cg)
        };
        let mut t = lo;
        for _ in 0..n_steps {
            let (k1g, k1e) = deriv(t, cg, ce);
            let (k2g, k2e) = deriv(t + 0.5 * dt, cg + k1g * 0.5 * dt, ce + k1e * 0.5 * dt);
            let (k3g, k3e) = deriv(t + 0.5 * dt, cg + k2g * 0.5 * dt, ce + k2e * 0.5 * dt);
            let (k4g, k4e) = deriv(t + dt, cg + k3g * dt, ce + k3e * dt);
            cg += (k1g + k2g * 2.0 + k3g * 2.0 + k4g) * (dt / 6.0);
            ce += (k1e + k2e * 2.0 + k3e * 2.0 + k4e) * (dt / 6.0);
            t += dt;
        }
        let pe_oracle = ce.norm_sqr();

        let ops = build_model_operators(&two_level_model()).unwrap();
        let rho0 = ground(&ops.hilbert);
        let evo = evolve_master_equation(
            &ops,
            Drive::pulse(pulse),
            &rho0,
            &[lo, hi],
            &IntegratorConfig::default(),
        )
        .unwrap();
        let pe = evo
            .expectation_series(&ops.excited_projector)
            .unwrap()
            .pop()
            .unwrap();
        assert!(
            (pe - pe_oracle).abs() < 1e-8,
            "adaptive {pe} vs fixed-step oracle {pe_oracle}"
        );
        // And both agree with the analytic pulse-area theorem.
        assert!((pe_oracle - (0.5 * 1.7_f64).sin().powi(2)).abs() < 1e-6);
    }

    #[test]
    fn driven_damped_evolution_stays_physical() {
        // Full model, π pulse, all rates on: every sampled state must satisfy
        // trace/Hermiticity/positivity, and the trace drift stays tiny.
        let mut model = SystemModel::default_resonant();
        model.gamma_dephasing_per_ps = 0.01;
        let ops = build_model_operators(&model).unwrap();
        let pulse = PulseShape::new(core::f64::consts::PI, 1.3, 0.0).unwrap();
        let rho0 = ground(&ops.hilbert);
        let grid: alloc::vec::Vec<f64> = (0..=40).map(|i| -10.0 + i as f64 * 30.0).collect();
        let evo = evolve_master_equation(
            &ops,
            Drive::pulse(pulse),
            &rho0,
            &grid,
            &IntegratorConfig::default(),
        )
        .unwrap();
        for s in &evo.states {
            s.validate().unwrap();
        }
        assert!(
            evo.max_trace_drift < 1e-9,
            "trace drift {}",
            evo.max_trace_drift
        );
    }

    #[test]
    fn decay_bookkeeping_closes_with_all_channels() {
        // |e,0⟩ decays through cavity and leaky channels (dephasing active):
        // emitted + residual = 1 within 1e-6.
        let mut model = SystemModel::default_resonant();
        model.gamma_dephasing_per_ps = 0.005;
        let ops = build_model_operators(&model).unwrap();
        let rho0 = DensityMatrix::pure(&ops.hilbert.ket(1, 0), 0.0);
        let evo = evolve_master_equation(
            &ops,
            Drive::none(),
            &rho0,
            &[0.0, 2500.0],
            &IntegratorConfig::default(),
        )
        .unwrap();
        let total = evo.emitted_cavity() + evo.emitted_leaky()
            + evo.residual_excitation(&ops).unwrap();
        assert_relative_eq!(total, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn purcell_enhanced_decay_rate() {
        // Resonant Purcell decay: the total decay rate of ⟨σ⁺σ⁻⟩ approaches
        // γ(1 + F_P) in the adiabatic (weak-coupling) limit. With F_P = 3.0
        // and 1/γ = 852 ps the lifetime is ≈ 213 ps.
        let model = SystemModel::default_resonant();
        let ops = build_model_operators(&model).unwrap();
        let rho0 = DensityMatrix::pure(&ops.hilbert.ket(1, 0), 0.0);
        let grid = [0.0, 100.0, 400.0];
        let evo =
            evolve_master_equation(&ops, Drive::none(), &rho0, &grid, &IntegratorConfig::default())
                .unwrap();
        let pe = evo.expectation_series(&ops.excited_projector).unwrap();
        let rate = (pe[1] / pe[2]).ln() / 300.0;
        let expected = (1.0 + 3.0) / 852.0;
        assert!(
            (rate - expected).abs() / expected < 0.02,
            "rate {rate} vs adiabatic {expected}"
        );
    }

    #[test]
    fn counting_statistics_sum_to_one_and_match_flux() {
        let model = SystemModel::default_resonant();
        let ops = build_model_operators(&model).unwrap();
        let pulse = PulseShape::new(core::f64::consts::PI, 1.3, 0.0).unwrap();
        let rho0 = ground(&ops.hilbert);
        let cfg = IntegratorConfig::default();
        let stats =
            cavity_emission_statistics(&ops, Drive::pulse(pulse), &rho0, -10.0, 2500.0, &cfg)
                .unwrap();
        assert!(stats.p0 >= 0.0 && stats.p1 >= 0.0 && stats.p_multi >= 0.0);
        // Mean cavity photon number from the hierarchy vs the flux integral.
        let evo = evolve_master_equation(
            &ops,
            Drive::pulse(pulse),
            &rho0,
            &[-10.0, 2500.0],
            &cfg,
        )
        .unwrap();
        let mean_from_hierarchy = stats.p1 + 2.0 * stats.p_multi;
        assert!(
            (evo.emitted_cavity() - mean_from_hierarchy).abs() < 5e-4,
            "flux {} vs hierarchy {}",
            evo.emitted_cavity(),
            mean_from_hierarchy
        );
        // Ideal short-pulse single-photon regime: multi-photon emission is
        // strongly suppressed.
        assert!(stats.p_multi < 1e-3, "p_multi = {}", stats.p_multi);
    }

    #[test]
    fn grid_validation() {
        let ops = build_model_operators(&two_level_model()).unwrap();
        let rho0 = ground(&ops.hilbert);
        let cfg = IntegratorConfig::default();
        assert!(evolve_master_equation(&ops, Drive::none(), &rho0, &[0.0], &cfg).is_err());
        assert!(evolve_master_equation(&ops, Drive::none(), &rho0, &[1.0, 1.0], &cfg).is_err());
    }
}
