//! Quantum-jump (Monte Carlo wave-function) unravelling of the master
//! equation.
//!
//! Between jumps the unnormalised state follows dψ/dt = −iH_eff(t)ψ with
//! H_eff = H(t) − (i/2)ΣC†C; a jump fires when ‖ψ‖² falls to a uniform
//! threshold r, the channel is chosen proportionally to ⟨ψ|C†C|ψ⟩, and the
//! state collapses to Cψ/‖Cψ‖. Cavity- and leaky-channel jumps are photon
//! emission events; dephasing jumps are recorded but emit nothing.
//!
//! Randomness is counter-based: trajectory k draws from a ChaCha12 generator
//! seeded with the ensemble's `base_seed` on stream k. Trajectories are
//! therefore independently executable in any order and bitwise reproducible
//! for a fixed (base_seed, trajectory_index) pair.

use crate::evolve::{Drive, IntegratorConfig};
use crate::linalg::C64;
use crate::model::{ChannelKind, ModelOperators, HBAR_UEV_PS};
use crate::{Error, Result};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use ndarray::{Array1, Array2};
#[allow(unused_imports)] // f64 math methods in no_std builds
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Identifies one trajectory of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectorySeed {
    pub base_seed: u64,
    pub trajectory_index: u64,
}

impl TrajectorySeed {
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.trajectory_index);
        rng
    }
}

/// A single quantum jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time_ps: f64,
    pub kind: ChannelKind,
}

/// All jumps of one trajectory, in time order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub events: Vec<JumpEvent>,
}

impl Trajectory {
    /// Emission times in the cavity (detected) channel.
    pub fn cavity_clicks(&self) -> impl Iterator<Item = f64> + '_ {
        self.events
            .iter()
            .filter(|e| e.kind == ChannelKind::Cavity)
            .map(|e| e.time_ps)
    }

    pub fn count(&self, kind: ChannelKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

/// Flat row-major complex matrix–vector product y += M·x.
#[inline]
fn matvec_acc(m: &[C64], x: &[C64], y: &mut [C64], d: usize) {
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        let mut acc = y[i];
        for j in 0..d {
            acc += row[j] * x[j];
        }
        y[i] = acc;
    }
}

/// Quadratic form ⟨x|M|x⟩ for Hermitian M (real part returned).
#[inline]
fn quad_form(m: &[C64], x: &[C64], d: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        let mut mx = C64::new(0.0, 0.0);
        for j in 0..d {
            mx += row[j] * x[j];
        }
        acc += (x[i].conj() * mx).re;
    }
    acc
}

fn flatten(a: &Array2<C64>) -> Vec<C64> {
    a.iter().copied().collect()
}

/// The non-Hermitian generator −iH_eff(t) in precombined flat form:
/// a constant part (bare Hamiltonian plus decay damping) and a part linear in
/// the instantaneous Rabi frequency Ω(t) (coherent drive plus its
/// drive-proportional dephasing damping).
struct EffectiveHamiltonian<'a> {
    ops: &'a ModelOperators,
    dim: usize,
    /// −i·H₀/ħ − (1/2)ΣC†C.
    m_const: Vec<C64>,
    /// Coefficient of Ω(t): −(i/2)·(σ⁺+σ⁻) − c_EID·σ⁺σ⁻.
    m_drive: Vec<C64>,
    /// Flat C†C per photon/dephasing channel, for jump weights.
    ch_dag_ops: Vec<Vec<C64>>,
    /// Flat σ⁺σ⁻ for the drive-proportional dephasing pseudo-channel.
    projector: Vec<C64>,
    drive: Drive,
}

impl<'a> EffectiveHamiltonian<'a> {
    fn new(ops: &'a ModelOperators, drive: Drive) -> Self {
        let d = ops.hilbert.dim();
        let mut m_const = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                let mut v = ops.h0_uev[(i, j)] / C64::new(HBAR_UEV_PS, 0.0) * C64::new(0.0, -1.0);
                for ch in &ops.channels {
                    v -= ch.op_dag_op[(i, j)] * C64::new(0.5, 0.0);
                }
                m_const[i * d + j] = v;
            }
        }
        let mut m_drive = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                m_drive[i * d + j] = ops.drive[(i, j)] * C64::new(0.0, -0.5)
                    - ops.excited_projector[(i, j)] * C64::new(drive.eid_coeff, 0.0);
            }
        }
        EffectiveHamiltonian {
            ops,
            dim: d,
            m_const,
            m_drive,
            ch_dag_ops: ops.channels.iter().map(|c| flatten(&c.op_dag_op)).collect(),
            projector: flatten(&ops.excited_projector),
            drive,
        }
    }

    /// dψ/dt = (m_const + Ω(t)·m_drive)·ψ, allocation-free.
    #[inline]
    fn rhs(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        let d = self.dim;
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        matvec_acc(&self.m_const, psi, out, d);
        let omega = self.drive.pulse.map_or(0.0, |p| p.omega(t));
        if omega != 0.0 {
            for i in 0..d {
                let row = &self.m_drive[i * d..(i + 1) * d];
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..d {
                    acc += row[j] * psi[j];
                }
                out[i] += acc * C64::new(omega, 0.0);
            }
        }
    }

    /// Per-channel jump rates ⟨ψ|C†C|ψ⟩ (unnormalised ψ) plus the
    /// drive-proportional dephasing rate.
    fn jump_weights(&self, t: f64, psi: &[C64], out: &mut Vec<f64>) {
        out.clear();
        for m in &self.ch_dag_ops {
            out.push(quad_form(m, psi, self.dim).max(0.0));
        }
        if self.drive.eid_coeff != 0.0 {
            let omega = self.drive.pulse.map_or(0.0, |p| p.omega(t));
            if omega != 0.0 {
                out.push(2.0 * self.drive.eid_coeff * omega * quad_form(&self.projector, psi, self.dim).max(0.0));
            } else {
                out.push(0.0);
            }
        }
    }

    fn channel_kind(&self, idx: usize) -> ChannelKind {
        if idx < self.ops.channels.len() {
            self.ops.channels[idx].kind
        } else {
            ChannelKind::Dephasing
        }
    }

    fn apply_jump(&self, idx: usize, psi: &[C64], out: &mut [C64]) {
        let d = self.dim;
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        if idx < self.ops.channels.len() {
            let op = &self.ops.channels[idx].op;
            for i in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..d {
                    acc += op[(i, j)] * psi[j];
                }
                out[i] = acc;
            }
        } else {
            matvec_acc(&self.projector, psi, out, d);
        }
        let norm = norm_sqr(out).sqrt();
        out.iter_mut().for_each(|v| *v /= C64::new(norm, 0.0));
    }
}

/// Preallocated buffers for the classic RK4 stage evaluations.
struct Rk4Workspace {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    stage: Vec<C64>,
}

impl Rk4Workspace {
    fn new(d: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); d];
        Rk4Workspace {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            stage: z,
        }
    }

    /// One classic RK4 step, out = y advanced by h (out must not alias y).
    fn step(&mut self, eff: &EffectiveHamiltonian, t: f64, h: f64, y: &[C64], out: &mut [C64]) {
        let d = y.len();
        eff.rhs(t, y, &mut self.k1);
        for i in 0..d {
            self.stage[i] = y[i] + self.k1[i] * C64::new(0.5 * h, 0.0);
        }
        eff.rhs(t + 0.5 * h, &self.stage, &mut self.k2);
        for i in 0..d {
            self.stage[i] = y[i] + self.k2[i] * C64::new(0.5 * h, 0.0);
        }
        eff.rhs(t + 0.5 * h, &self.stage, &mut self.k3);
        for i in 0..d {
            self.stage[i] = y[i] + self.k3[i] * C64::new(h, 0.0);
        }
        eff.rhs(t + h, &self.stage, &mut self.k4);
        let sixth = h / 6.0;
        for i in 0..d {
            out[i] = y[i]
                + (self.k1[i] + (self.k2[i] + self.k3[i]) * C64::new(2.0, 0.0) + self.k4[i])
                    * C64::new(sixth, 0.0);
        }
    }
}

fn norm_sqr(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

fn max_component(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Draw a jump threshold in (0, 1).
fn draw_threshold(rng: &mut ChaCha12Rng) -> f64 {
    loop {
        let r: f64 = rng.gen();
        if r > 1e-12 && r < 1.0 {
            return r;
        }
    }
}

/// Integrate one trajectory from `grid[0]` to `grid.last()`, calling
/// `on_sample(i, ψ, ‖ψ‖²)` when passing each grid point. Returns the jump
/// events. Precision of jump times is ~1e-9 ps (bisection).
pub fn run_jump_trajectory(
    ops: &ModelOperators,
    drive: Drive,
    psi0: &Array1<C64>,
    grid: &[f64],
    seed: TrajectorySeed,
    cfg: &IntegratorConfig,
    mut on_sample: impl FnMut(usize, &[C64], f64),
) -> Result<Trajectory> {
    let d = ops.hilbert.dim();
    if psi0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: psi0.len(),
        });
    }
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "trajectory grid must be strictly increasing with ≥ 2 points".into(),
        ));
    }
    let n0 = psi0.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if (n0 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "initial state norm² = {n0} is not 1"
        )));
    }

    let eff = EffectiveHamiltonian::new(ops, drive);
    let mut rng = seed.rng();
    let mut psi: Vec<C64> = psi0.to_vec();
    let mut t = grid[0];
    let mut r = draw_threshold(&mut rng);
    let mut events = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut ws = Rk4Workspace::new(d);
    let mut full = vec![C64::new(0.0, 0.0); d];
    let mut half1 = vec![C64::new(0.0, 0.0); d];
    let mut half2 = vec![C64::new(0.0, 0.0); d];
    let mut psi_lo = vec![C64::new(0.0, 0.0); d];
    let mut psi_mid = vec![C64::new(0.0, 0.0); d];

    on_sample(0, &psi, 1.0);
    let mut next_sample = 1usize;
    let t_end = *grid.last().unwrap();
    let mut ceiling = crate::evolve::pulse_step_ceiling(drive.pulse);
    let pulse_end = drive.pulse.map_or(f64::NEG_INFINITY, |p| p.support().1);
    let mut h: f64 = 0.1;

    // Step-doubling RK4 with Richardson error control: one full step against
    // two half steps, fifth-order extrapolation on acceptance. The error
    // scale is norm-wise (largest state component) rather than per-component:
    // near-empty basis states carry no statistical weight and must not pin
    // the step size.
    while next_sample < grid.len() {
        let t_target = grid[next_sample];
        let mut h_try = h.min(cfg.max_step_ps).min(ceiling(t));
        if t + h_try >= t_target {
            h_try = t_target - t;
        }
        if h_try < cfg.min_step_ps {
            return Err(Error::IntegrationFailure {
                t_ps: t,
                reason: format!("step underflow in trajectory (h = {h_try:e})"),
            });
        }

        ws.step(&eff, t, h_try, &psi, &mut full);
        ws.step(&eff, t, 0.5 * h_try, &psi, &mut half1);
        ws.step(&eff, t + 0.5 * h_try, 0.5 * h_try, &half1, &mut half2);
        let sc = cfg.abs_tol + cfg.rel_tol * max_component(&psi).max(max_component(&half2));
        let mut err_max = 0.0f64;
        for i in 0..d {
            err_max = err_max.max((half2[i] - full[i]).norm());
        }
        let err = err_max / sc / 15.0; // Richardson factor 2⁴−1

        if !err.is_finite() || err > 1.0 {
            let shrink = if err.is_finite() {
                (0.9 * err.powf(-0.25)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h = h_try * shrink;
            continue;
        }

        // Accepted. Fifth-order local extrapolation of the two half steps.
        for i in 0..d {
            let corr = (half2[i] - full[i]) / C64::new(15.0, 0.0);
            half2[i] += corr;
        }
        let t_new = t + h_try;

        if norm_sqr(&half2) <= r {
            // A jump occurred inside (t, t_new]: locate it by bisection,
            // re-integrating from the stored left state.
            let mut t_lo = t;
            psi_lo.copy_from_slice(&psi);
            let mut t_hi = t_new;
            while t_hi - t_lo > 1e-9 {
                let tm = 0.5 * (t_lo + t_hi);
                ws.step(&eff, t_lo, tm - t_lo, &psi_lo, &mut psi_mid);
                if norm_sqr(&psi_mid) <= r {
                    t_hi = tm;
                } else {
                    t_lo = tm;
                    core::mem::swap(&mut psi_lo, &mut psi_mid);
                }
            }
            let t_jump = t_hi;
            ws.step(&eff, t_lo, t_jump - t_lo, &psi_lo, &mut psi_mid);

            eff.jump_weights(t_jump, &psi_mid, &mut weights);
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) {
                return Err(Error::TrajectoryFailure {
                    t_ps: t_jump,
                    reason: "jump fired with zero total rate".into(),
                });
            }
            let mut u: f64 = rng.gen::<f64>() * total;
            let mut idx = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if u < *w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            events.push(JumpEvent {
                time_ps: t_jump,
                kind: eff.channel_kind(idx),
            });
            eff.apply_jump(idx, &psi_mid, &mut psi);
            t = t_jump;
            r = draw_threshold(&mut rng);
            h = (h_try * 0.5).max(cfg.min_step_ps * 10.0);
            continue;
        }

        t = t_new;
        core::mem::swap(&mut psi, &mut half2);
        let grow = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.25)).clamp(0.2, 5.0)
        };
        h = (h_try * grow).min(cfg.max_step_ps);

        if t >= t_target {
            let nrm = norm_sqr(&psi);
            on_sample(next_sample, &psi, nrm);
            next_sample += 1;
        }

        // Early exit: past the pulse, when the total jump rate integrated
        // over the remaining window is vanishingly small, the threshold
        // cannot be reached; freeze the state for the remaining samples.
        // (Same spirit as the 1e-12 floor on the threshold draw itself.)
        if t > pulse_end && next_sample < grid.len() {
            eff.jump_weights(t, &psi, &mut weights);
            let rate: f64 = weights.iter().sum::<f64>() / norm_sqr(&psi).max(1e-300);
            if rate * (t_end - t) < 1e-12 {
                let nrm = norm_sqr(&psi);
                while next_sample < grid.len() {
                    on_sample(next_sample, &psi, nrm);
                    next_sample += 1;
                }
                break;
            }
        }
    }

    Ok(Trajectory { events })
}

/// Convenience wrapper when only the jump record matters.
pub fn sample_jump_trajectory(
    ops: &ModelOperators,
    drive: Drive,
    psi0: &Array1<C64>,
    t_start_ps: f64,
    t_end_ps: f64,
    seed: TrajectorySeed,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    run_jump_trajectory(
        ops,
        drive,
        psi0,
        &[t_start_ps, t_end_ps],
        seed,
        cfg,
        |_, _, _| {},
    )
}

/// Ensemble average of a Hermitian observable over jump trajectories.
#[derive(Debug, Clone)]
pub struct EnsembleSeries {
    pub times_ps: Vec<f64>,
    pub mean: Vec<f64>,
    /// Standard error of the mean per time point.
    pub std_err: Vec<f64>,
    pub n_trajectories: usize,
}

/// Run `n_trajectories` jump trajectories (streams 0..n of `base_seed`) and
/// average ⟨ψ|O|ψ⟩/⟨ψ|ψ⟩ on the sample grid.
pub fn ensemble_expectation(
    ops: &ModelOperators,
    drive: Drive,
    psi0: &Array1<C64>,
    grid: &[f64],
    observable: &Array2<C64>,
    n_trajectories: usize,
    base_seed: u64,
    cfg: &IntegratorConfig,
) -> Result<EnsembleSeries> {
    if n_trajectories == 0 {
        return Err(Error::InvalidInput("need at least one trajectory".into()));
    }
    let obs_flat = flatten(observable);
    let d = ops.hilbert.dim();
    if observable.dim() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: observable.dim().0,
        });
    }
    let n_t = grid.len();
    let mut sum = vec![0.0; n_t];
    let mut sum_sq = vec![0.0; n_t];

    for k in 0..n_trajectories {
        let seed = TrajectorySeed {
            base_seed,
            trajectory_index: k as u64,
        };
        run_jump_trajectory(ops, drive, psi0, grid, seed, cfg, |idx, psi, nrm| {
            let val = quad_form(&obs_flat, psi, d) / nrm.max(1e-300);
            sum[idx] += val;
            sum_sq[idx] += val * val;
        })?;
    }

    let n = n_trajectories as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_err = sum_sq
        .iter()
        .zip(mean.iter())
        .map(|(sq, m)| {
            let var = (sq / n - m * m).max(0.0) * n / (n - 1.0).max(1.0);
            (var / n).sqrt()
        })
        .collect();

    Ok(EnsembleSeries {
        times_ps: grid.to_vec(),
        mean,
        std_err,
        n_trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{evolve_master_equation, DensityMatrix};
    use crate::model::{build_model_operators, PulseShape, SystemModel};

    fn leaky_only(t1_ps: f64) -> SystemModel {
        SystemModel {
            g_uev: 0.0,
            kappa_uev: 0.0,
            gamma_leaky_per_ps: 1.0 / t1_ps,
            gamma_dephasing_per_ps: 0.0,
            delta_qd_cavity_uev: 0.0,
            delta_laser_qd_uev: 0.0,
            n_fock: 1,
        }
    }

    #[test]
    fn undriven_ground_state_never_jumps() {
        let ops = build_model_operators(&SystemModel::default_resonant()).unwrap();
        let psi0 = ops.hilbert.ket(0, 0);
        for k in 0..20 {
            let tr = sample_jump_trajectory(
                &ops,
                Drive::none(),
                &psi0,
                0.0,
                5000.0,
                TrajectorySeed {
                    base_seed: 11,
                    trajectory_index: k,
                },
                &IntegratorConfig::trajectory(),
            )
            .unwrap();
            assert!(tr.events.is_empty());
        }
    }

    #[test]
    fn excited_emitter_emits_exactly_once_with_exponential_times() {
        // Pure leaky decay from |e,0⟩: every trajectory has exactly one leaky
        // jump; the empirical mean jump time matches T₁ = 890 ps within 5%.
        let ops = build_model_operators(&leaky_only(890.0)).unwrap();
        let psi0 = ops.hilbert.ket(1, 0);
        let cfg = IntegratorConfig::trajectory();
        let n = 40_000usize;
        let mut sum_t = 0.0;
        for k in 0..n {
            let tr = sample_jump_trajectory(
                &ops,
                Drive::none(),
                &psi0,
                0.0,
                20.0 * 890.0,
                TrajectorySeed {
                    base_seed: 4242,
                    trajectory_index: k as u64,
                },
                &cfg,
            )
            .unwrap();
            assert_eq!(tr.events.len(), 1, "trajectory {k}");
            assert_eq!(tr.events[0].kind, ChannelKind::Leaky);
            sum_t += tr.events[0].time_ps;
        }
        let mean = sum_t / n as f64;
        assert!(
            (mean - 890.0).abs() / 890.0 < 0.05,
            "mean jump time {mean} vs 890"
        );
    }

    #[test]
    fn trajectories_are_bitwise_reproducible_and_streams_differ() {
        let model = SystemModel::default_resonant();
        let ops = build_model_operators(&model).unwrap();
        let psi0 = ops.hilbert.ket(0, 0);
        let pulse = PulseShape::new(core::f64::consts::PI, 1.3, 0.0).unwrap();
        let cfg = IntegratorConfig::trajectory();
        let seed = TrajectorySeed {
            base_seed: 99,
            trajectory_index: 7,
        };
        let a = sample_jump_trajectory(&ops, Drive::pulse(pulse), &psi0, -10.0, 3000.0, seed, &cfg)
            .unwrap();
        let b = sample_jump_trajectory(&ops, Drive::pulse(pulse), &psi0, -10.0, 3000.0, seed, &cfg)
            .unwrap();
        assert_eq!(a, b);
        // A different stream index must decorrelate (almost surely different).
        let c = sample_jump_trajectory(
            &ops,
            Drive::pulse(pulse),
            &psi0,
            -10.0,
            3000.0,
            TrajectorySeed {
                base_seed: 99,
                trajectory_index: 8,
            },
            &cfg,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ensemble_tracks_master_equation_within_three_sigma() {
        // Driven, damped, detuned parameter sets: the trajectory ensemble
        // average of ⟨σ⁺σ⁻⟩ must agree with the master equation within 3σ
        // at every sampled time.
        let mut sets = alloc::vec::Vec::new();
        sets.push(SystemModel::default_resonant());
        let mut detuned = SystemModel::default_resonant();
        detuned.delta_qd_cavity_uev = 360.0;
        sets.push(detuned);
        let mut dephased = SystemModel::default_resonant();
        dephased.gamma_dephasing_per_ps = 0.01;
        sets.push(dephased);

        let pulse = PulseShape::new(core::f64::consts::PI, 1.3, 0.0).unwrap();
        let grid: alloc::vec::Vec<f64> =
            [-10.0, 2.0, 20.0, 60.0, 150.0, 300.0, 600.0, 1200.0].to_vec();
        let cfg = IntegratorConfig::trajectory();

        for (si, model) in sets.iter().enumerate() {
            let ops = build_model_operators(model).unwrap();
            let rho0 = DensityMatrix::pure(&ops.hilbert.ket(0, 0), grid[0]);
            let me = evolve_master_equation(
                &ops,
                Drive::pulse(pulse),
                &rho0,
                &grid,
                &IntegratorConfig::default(),
            )
            .unwrap();
            let pe_me = me.expectation_series(&ops.excited_projector).unwrap();

            let ens = ensemble_expectation(
                &ops,
                Drive::pulse(pulse),
                &ops.hilbert.ket(0, 0),
                &grid,
                &ops.excited_projector,
                2000,
                1000 + si as u64,
                &cfg,
            )
            .unwrap();

            for i in 0..grid.len() {
                let sigma = ens.std_err[i].max(1e-12);
                let dev = (ens.mean[i] - pe_me[i]).abs();
                assert!(
                    dev <= 3.0 * sigma,
                    "set {si}, t = {}: ensemble {} vs ME {} (dev {dev:.2e}, σ {sigma:.2e})",
                    grid[i],
                    ens.mean[i],
                    pe_me[i]
                );
            }
        }
    }

    #[test]
    fn photon_bookkeeping_matches_flux() {
        // Mean photons per pulse (cavity + leaky jumps) vs. master-equation
        // flux integrals, 3σ binomial-ish bound.
        let model = SystemModel::default_resonant();
        let ops = build_model_operators(&model).unwrap();
        let pulse = PulseShape::new(core::f64::consts::PI, 1.3, 0.0).unwrap();
        let psi0 = ops.hilbert.ket(0, 0);
        let cfg = IntegratorConfig::trajectory();
        let rho0 = DensityMatrix::pure(&psi0, -10.0);
        let me = evolve_master_equation(
            &ops,
            Drive::pulse(pulse),
            &rho0,
            &[-10.0, 2500.0],
            &IntegratorConfig::default(),
        )
        .unwrap();

        let n = 3000usize;
        let (mut cav, mut leak) = (0usize, 0usize);
        for k in 0..n {
            let tr = sample_jump_trajectory(
                &ops,
                Drive::pulse(pulse),
                &psi0,
                -10.0,
                2500.0,
                TrajectorySeed {
                    base_seed: 31337,
                    trajectory_index: k as u64,
                },
                &cfg,
            )
            .unwrap();
            cav += tr.count(ChannelKind::Cavity);
            leak += tr.count(ChannelKind::Leaky);
        }
        let nf = n as f64;
        for (label, got, want) in [
            ("cavity", cav as f64 / nf, me.emitted_cavity()),
            ("leaky", leak as f64 / nf, me.emitted_leaky()),
        ] {
            let sigma = (want * (1.0 - want).max(0.01) / nf).sqrt();
            assert!(
                (got - want).abs() < 3.0 * sigma.max(1e-4),
                "{label}: MC {got} vs ME {want}"
            );
        }
    }

    #[test]
    fn ideal_pulse_rarely_emits_twice() {
        // π pulse, 1.3 ps FWHM, T₁ ≈ 213 ps: re-excitation during the pulse
        // is the only multi-photon path; P(≥2 cavity clicks) < 1e-3, in
        // agreement with the counting hierarchy.
        let model = SystemModel::default_resonant();
        let ops = build_model_operators(&model).unwrap();
        let pulse = PulseShape::new(core::f64::consts::PI, 1.3, 0.0).unwrap();
        let psi0 = ops.hilbert.ket(0, 0);
        let cfg = IntegratorConfig::trajectory();
        let n = 20_000usize;
        let mut multi = 0usize;
        for k in 0..n {
            let tr = sample_jump_trajectory(
                &ops,
                Drive::pulse(pulse),
                &psi0,
                -10.0,
                2500.0,
                TrajectorySeed {
                    base_seed: 777,
                    trajectory_index: k as u64,
                },
                &cfg,
            )
            .unwrap();
            if tr.count(ChannelKind::Cavity) >= 2 {
                multi += 1;
            }
        }
        let p2_mc = multi as f64 / n as f64;
        let stats = crate::evolve::cavity_emission_statistics(
            &ops,
            Drive::pulse(pulse),
            &DensityMatrix::pure(&psi0, -10.0),
            -10.0,
            2500.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(stats.p_multi < 1e-3);
        // MC agrees within 4σ Poisson.
        let sigma = (stats.p_multi / n as f64).sqrt().max(1e-5);
        assert!(
            (p2_mc - stats.p_multi).abs() < 4.0 * sigma,
            "MC {p2_mc} vs hierarchy {}",
            stats.p_multi
        );
    }
}
