//! Weighted Levenberg–Marquardt fitting with the model families used in the
//! analysis pipeline: Lorentzian Purcell intensity profiles, mono- and
//! bi-exponential decays, and damped Rabi oscillations.
//!
//! Every family carries an analytic Jacobian (checked against central finite
//! differences in the tests), and the engine reports parameter covariances so
//! derived quantities such as the Purcell factor come with uncertainties.

use crate::linalg::{invert_real, solve_real};
use crate::{Error, Result};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use ndarray::{Array1, Array2};
#[allow(unused_imports)] // f64 math methods in no_std builds
use num_traits::Float;

/// A parametric scalar model y = f(p; x).
pub trait FitModel {
    /// Number of parameters.
    fn n_params(&self) -> usize;
    /// Model value at `x`.
    fn value(&self, params: &[f64], x: f64) -> f64;
    /// ∂f/∂p_j at `x`, written into `out` (length `n_params`).
    fn gradient(&self, params: &[f64], x: f64, out: &mut [f64]);
    /// Human-readable family name for diagnostics.
    fn name(&self) -> &'static str;
    /// Restore internal parameter conventions after a fit (e.g. ordering the
    /// time constants of a bi-exponential). Default: leave as-is.
    fn canonicalize(&self, _params: &mut [f64], _covariance: &mut Array2<f64>) {}
}

/// Engine configuration. The defaults suit all shipped analyses.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged when the cost decreases by less than this relative amount.
    pub rel_cost_tol: f64,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Give up (non-convergence) when the damping exceeds this.
    pub lambda_max: f64,
    /// Optional per-parameter (lower, upper) box; steps are clamped into it.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Optional per-parameter freeze flags.
    pub fixed: Option<Vec<bool>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            rel_cost_tol: 1e-10,
            lambda_init: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            lambda_max: 1e12,
            bounds: None,
            fixed: None,
        }
    }
}

/// Outcome of a Levenberg–Marquardt run.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// 1σ parameter uncertainties (0 for fixed parameters).
    pub errors: Vec<f64>,
    pub covariance: Array2<f64>,
    /// Final weighted sum of squared residuals.
    pub chi2: f64,
    /// χ² per degree of freedom.
    pub reduced_chi2: f64,
    pub n_points: usize,
    pub n_iterations: usize,
    pub converged: bool,
    /// Whether measurement errors were supplied (χ² is then absolute).
    pub weighted: bool,
    /// Diagnostic message when the fit stopped without converging.
    pub message: String,
}

impl FitResult {
    /// Second-order Akaike information criterion (lower is better), valid for
    /// comparing fits of the *same* data. With supplied measurement errors the
    /// Gaussian log-likelihood reduces to χ²; without them the residual
    /// variance is an extra estimated parameter.
    pub fn aicc(&self) -> f64 {
        let n = self.n_points as f64;
        let (base, k) = if self.weighted {
            (self.chi2, self.params.len() as f64)
        } else {
            let k = self.params.len() as f64 + 1.0; // + noise variance
            (n * (self.chi2.max(1e-300) / n).ln(), k)
        };
        if n - k - 1.0 > 0.0 {
            base + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0)
        } else {
            f64::INFINITY
        }
    }
}

fn check_inputs(
    model: &dyn FitModel,
    x: &[f64],
    y: &[f64],
    sigma: Option<&[f64]>,
    p0: &[f64],
    opts: &FitOptions,
) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::FitSetup(format!(
            "x and y length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if let Some(s) = sigma {
        if s.len() != y.len() {
            return Err(Error::FitSetup(format!(
                "sigma length {} does not match data length {}",
                s.len(),
                y.len()
            )));
        }
        if s.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::FitSetup("sigma entries must be positive".into()));
        }
    }
    if p0.len() != model.n_params() {
        return Err(Error::FitSetup(format!(
            "{} expects {} parameters, got {}",
            model.name(),
            model.n_params(),
            p0.len()
        )));
    }
    if x.len() <= model.n_params() {
        return Err(Error::FitSetup(format!(
            "need more than {} points to fit {}",
            model.n_params(),
            model.name()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::FitSetup("non-finite data".into()));
    }
    if p0.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitSetup("non-finite initial guess".into()));
    }
    if let Some(b) = &opts.bounds {
        if b.len() != p0.len() {
            return Err(Error::FitSetup("bounds length mismatch".into()));
        }
        for (i, &(lo, hi)) in b.iter().enumerate() {
            if lo > hi {
                return Err(Error::FitSetup(format!("bounds[{i}] inverted: {lo} > {hi}")));
            }
        }
    }
    if let Some(f) = &opts.fixed {
        if f.len() != p0.len() {
            return Err(Error::FitSetup("fixed-flag length mismatch".into()));
        }
    }
    Ok(())
}

fn clamp_params(params: &mut [f64], opts: &FitOptions) {
    if let Some(bounds) = &opts.bounds {
        for (p, &(lo, hi)) in params.iter_mut().zip(bounds) {
            *p = p.clamp(lo, hi);
        }
    }
}

fn weighted_cost(model: &dyn FitModel, params: &[f64], x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let mut cost = 0.0;
    for i in 0..x.len() {
        let r = y[i] - model.value(params, x[i]);
        cost += w[i] * r * r;
    }
    cost
}

/// Fit `model` to (x, y) data with optional 1σ errors by damped least
/// squares. Returns a result even when the iteration stalls (`converged`
/// false with a diagnostic); errors are reserved for malformed problems.
pub fn fit(
    model: &dyn FitModel,
    x: &[f64],
    y: &[f64],
    sigma: Option<&[f64]>,
    p0: &[f64],
    opts: &FitOptions,
) -> Result<FitResult> {
    check_inputs(model, x, y, sigma, p0, opts)?;
    let n = x.len();
    let m = model.n_params();
    let weights: Vec<f64> = match sigma {
        Some(s) => s.iter().map(|&si| 1.0 / (si * si)).collect(),
        None => vec![1.0; n],
    };
    let fixed = opts.fixed.clone().unwrap_or_else(|| vec![false; m]);
    let free: Vec<usize> = (0..m).filter(|&j| !fixed[j]).collect();
    if free.is_empty() {
        return Err(Error::FitSetup("all parameters fixed".into()));
    }

    let mut params = p0.to_vec();
    clamp_params(&mut params, opts);
    let mut cost = weighted_cost(model, &params, x, y, &weights);
    let mut lambda = opts.lambda_init;
    let mut converged = false;
    let mut message = String::new();
    let mut iterations = 0;

    let mut grad_buf = vec![0.0; m];
    // Normal-equation workspace over the free parameters.
    let nf = free.len();
    let mut jtj = Array2::<f64>::zeros((nf, nf));
    let mut jtr = Array1::<f64>::zeros(nf);

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        jtj.fill(0.0);
        jtr.fill(0.0);
        for i in 0..n {
            let r = y[i] - model.value(&params, x[i]);
            model.gradient(&params, x[i], &mut grad_buf);
            for (a, &ja) in free.iter().enumerate() {
                let ga = grad_buf[ja];
                jtr[a] += weights[i] * ga * r;
                for (b, &jb) in free.iter().enumerate().skip(a) {
                    jtj[(a, b)] += weights[i] * ga * grad_buf[jb];
                }
            }
        }
        for a in 0..nf {
            for b in 0..a {
                jtj[(a, b)] = jtj[(b, a)];
            }
        }

        // Inner damping loop: raise λ until a step lowers the cost.
        let mut stepped = false;
        while lambda <= opts.lambda_max {
            let mut damped = jtj.clone();
            for a in 0..nf {
                // Marquardt scaling keeps the step well-conditioned across
                // wildly different parameter magnitudes.
                let d = jtj[(a, a)];
                damped[(a, a)] = d + lambda * d.max(1e-300);
            }
            let Some(step) = solve_real(&damped, &jtr) else {
                lambda *= opts.lambda_up;
                continue;
            };
            let mut trial = params.clone();
            for (a, &ja) in free.iter().enumerate() {
                trial[ja] += step[a];
            }
            clamp_params(&mut trial, opts);
            let trial_cost = weighted_cost(model, &trial, x, y, &weights);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel_drop = (cost - trial_cost) / cost.max(1e-300);
                params = trial;
                cost = trial_cost;
                lambda = (lambda * opts.lambda_down).max(1e-14);
                stepped = true;
                if rel_drop < opts.rel_cost_tol {
                    converged = true;
                }
                break;
            }
            lambda *= opts.lambda_up;
        }
        if !stepped {
            message = format!(
                "{}: no downhill step found at iteration {iterations} (λ > {:.1e})",
                model.name(),
                opts.lambda_max
            );
            break;
        }
        if converged {
            break;
        }
    }
    if !converged && message.is_empty() {
        message = format!(
            "{}: not converged after {} iterations",
            model.name(),
            opts.max_iterations
        );
    }

    // Covariance from the undamped normal matrix at the solution.
    jtj.fill(0.0);
    for i in 0..n {
        model.gradient(&params, x[i], &mut grad_buf);
        for (a, &ja) in free.iter().enumerate() {
            for (b, &jb) in free.iter().enumerate().skip(a) {
                jtj[(a, b)] += weights[i] * grad_buf[ja] * grad_buf[jb];
            }
        }
    }
    for a in 0..nf {
        for b in 0..a {
            jtj[(a, b)] = jtj[(b, a)];
        }
    }
    let dof = n.saturating_sub(nf).max(1);
    let reduced_chi2 = cost / dof as f64;
    // Without measurement errors the fit residuals set the noise scale.
    let cov_scale = if sigma.is_some() { 1.0 } else { reduced_chi2 };
    let mut covariance = Array2::zeros((m, m));
    if let Some(inv) = invert_real(&jtj) {
        for (a, &ja) in free.iter().enumerate() {
            for (b, &jb) in free.iter().enumerate() {
                covariance[(ja, jb)] = inv[(a, b)] * cov_scale;
            }
        }
    } else if converged {
        converged = false;
        message = format!("{}: singular covariance at the solution", model.name());
    }
    let mut result_params = params;
    model.canonicalize(&mut result_params, &mut covariance);
    let errors = (0..m)
        .map(|j| covariance[(j, j)].max(0.0).sqrt())
        .collect();

    Ok(FitResult {
        params: result_params,
        errors,
        covariance,
        chi2: cost,
        reduced_chi2,
        n_points: n,
        n_iterations: iterations,
        converged,
        weighted: sigma.is_some(),
        message,
    })
}

// ---------------------------------------------------------------------------
// Model families
// ---------------------------------------------------------------------------

/// Purcell-funnelled emission intensity versus emitter–cavity detuning:
/// y = A·F_P/(F_P + 1 + (x/γ_C)²). Parameters `[a, f_p, gamma_c]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LorentzianPurcell;

impl LorentzianPurcell {
    pub const A: usize = 0;
    pub const F_P: usize = 1;
    pub const GAMMA_C: usize = 2;

    /// Heuristic start: peak value sets A, half-max point sets γ_C for a
    /// moderate trial F_P.
    pub fn initial_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
        let y_max = y.iter().cloned().fold(f64::MIN, f64::max).max(1e-12);
        let f0 = 3.0;
        let half = y_max / 2.0;
        let mut x_half = x
            .iter()
            .zip(y)
            .filter(|&(_, &yi)| yi <= half)
            .map(|(&xi, _)| xi.abs())
            .fold(f64::INFINITY, f64::min);
        if !x_half.is_finite() || x_half <= 0.0 {
            x_half = x.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0) / 2.0;
        }
        vec![y_max * (f0 + 1.0) / f0, f0, x_half / (f0 + 1.0).sqrt()]
    }
}

impl FitModel for LorentzianPurcell {
    fn n_params(&self) -> usize {
        3
    }
    fn value(&self, p: &[f64], x: f64) -> f64 {
        let u = (x / p[Self::GAMMA_C]).powi(2);
        p[Self::A] * p[Self::F_P] / (p[Self::F_P] + 1.0 + u)
    }
    fn gradient(&self, p: &[f64], x: f64, out: &mut [f64]) {
        let g = p[Self::GAMMA_C];
        let u = (x / g).powi(2);
        let den = p[Self::F_P] + 1.0 + u;
        out[Self::A] = p[Self::F_P] / den;
        out[Self::F_P] = p[Self::A] * (1.0 + u) / (den * den);
        out[Self::GAMMA_C] = p[Self::A] * p[Self::F_P] * 2.0 * x * x / (g * g * g) / (den * den);
    }
    fn name(&self) -> &'static str {
        "lorentzian_purcell"
    }
}

/// Mono-exponential decay y = A·e^(−t/T) + B. Parameters `[a, t, b]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MonoExponential;

impl MonoExponential {
    pub const A: usize = 0;
    pub const T: usize = 1;
    pub const B: usize = 2;

    /// Heuristic start from the tail level and the log-slope of the upper
    /// part of the decay.
    pub fn initial_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = x.len();
        let tail = n.saturating_sub((n / 10).max(1));
        let b0 = y[tail..].iter().sum::<f64>() / (n - tail) as f64;
        let (i_max, &y_max) = y
            .iter()
            .enumerate()
            .fold((0, &f64::MIN), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let a0 = (y_max - b0).max(1e-12);
        // Log-slope regression over the span where the signal dominates.
        let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in i_max..n {
            let v = y[i] - b0;
            if v > 0.05 * a0 {
                let ly = v.ln();
                sx += x[i];
                sy += ly;
                sxx += x[i] * x[i];
                sxy += x[i] * ly;
                cnt += 1.0;
            }
        }
        let t0 = if cnt >= 2.0 {
            let slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
            if slope < 0.0 {
                -1.0 / slope
            } else {
                (x[n - 1] - x[i_max]).max(1.0) / 3.0
            }
        } else {
            (x[n - 1] - x[0]).max(1.0) / 3.0
        };
        vec![a0, t0, b0]
    }
}

impl FitModel for MonoExponential {
    fn n_params(&self) -> usize {
        3
    }
    fn value(&self, p: &[f64], x: f64) -> f64 {
        p[Self::A] * (-x / p[Self::T]).exp() + p[Self::B]
    }
    fn gradient(&self, p: &[f64], x: f64, out: &mut [f64]) {
        let e = (-x / p[Self::T]).exp();
        out[Self::A] = e;
        out[Self::T] = p[Self::A] * e * x / (p[Self::T] * p[Self::T]);
        out[Self::B] = 1.0;
    }
    fn name(&self) -> &'static str {
        "mono_exponential"
    }
}

/// Bi-exponential decay y = A1·e^(−t/T1) + A2·e^(−t/T2) + B with the
/// convention T1 < T2 (fast component first), restored after every fit.
/// Parameters `[a1, t1, a2, t2, b]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BiExponential;

impl BiExponential {
    pub const A1: usize = 0;
    pub const T1: usize = 1;
    pub const A2: usize = 2;
    pub const T2: usize = 3;
    pub const B: usize = 4;

    /// Start from the mono-exponential guess, splitting its time constant.
    pub fn initial_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
        let mono = MonoExponential::initial_guess(x, y);
        vec![
            0.7 * mono[0],
            0.5 * mono[1],
            0.3 * mono[0],
            2.0 * mono[1],
            mono[2],
        ]
    }
}

impl FitModel for BiExponential {
    fn n_params(&self) -> usize {
        5
    }
    fn value(&self, p: &[f64], x: f64) -> f64 {
        p[Self::A1] * (-x / p[Self::T1]).exp() + p[Self::A2] * (-x / p[Self::T2]).exp() + p[Self::B]
    }
    fn gradient(&self, p: &[f64], x: f64, out: &mut [f64]) {
        let e1 = (-x / p[Self::T1]).exp();
        let e2 = (-x / p[Self::T2]).exp();
        out[Self::A1] = e1;
        out[Self::T1] = p[Self::A1] * e1 * x / (p[Self::T1] * p[Self::T1]);
        out[Self::A2] = e2;
        out[Self::T2] = p[Self::A2] * e2 * x / (p[Self::T2] * p[Self::T2]);
        out[Self::B] = 1.0;
    }
    fn name(&self) -> &'static str {
        "bi_exponential"
    }
    fn canonicalize(&self, params: &mut [f64], covariance: &mut Array2<f64>) {
        if params[Self::T1] > params[Self::T2] {
            params.swap(Self::A1, Self::A2);
            params.swap(Self::T1, Self::T2);
            let pairs = [(Self::A1, Self::A2), (Self::T1, Self::T2)];
            for &(i, j) in &pairs {
                for k in 0..covariance.ncols() {
                    let (a, b) = (covariance[(i, k)], covariance[(j, k)]);
                    covariance[(i, k)] = b;
                    covariance[(j, k)] = a;
                }
                for k in 0..covariance.nrows() {
                    let (a, b) = (covariance[(k, i)], covariance[(k, j)]);
                    covariance[(k, i)] = b;
                    covariance[(k, j)] = a;
                }
            }
        }
    }
}

/// Damped Rabi oscillation of the emitted intensity versus pulse area:
/// y = A·(1 − cos(πΘ/Θ_π)·e^(−Θ/Θ_d))/2 + B.
/// Parameters `[a, theta_pi, theta_d, b]`; Θ_π is the area of a π rotation
/// in the curve's own units (e.g. √power), Θ_d the damping scale.
#[derive(Debug, Clone, Copy, Default)]
pub struct DampedRabi;

impl DampedRabi {
    pub const A: usize = 0;
    pub const THETA_PI: usize = 1;
    pub const THETA_D: usize = 2;
    pub const B: usize = 3;

    /// Heuristic start: the first maximum sets Θ_π; the decay of the
    /// oscillation envelope about the mid-line between that peak and the tail
    /// sets Θ_d (weak damping assumed when the envelope does not shrink).
    pub fn initial_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
        let b0 = y.first().copied().unwrap_or(0.0).max(0.0);
        let y_max = y.iter().cloned().fold(f64::MIN, f64::max);
        let a0 = (y_max - b0).max(1e-12);
        // First local maximum above 80% of the global one.
        let mut i_pi = x.len() - 1;
        let mut theta_pi = x[x.len() - 1] / 2.0;
        for i in 1..x.len() - 1 {
            if y[i] >= y[i - 1] && y[i] >= y[i + 1] && y[i] - b0 > 0.8 * a0 {
                theta_pi = x[i];
                i_pi = i;
                break;
            }
        }
        let theta_pi = theta_pi.max(1e-6);
        // Deviation from the mid-line decays as (A/2)·e^(−Θ/Θ_d); compare the
        // first peak with the largest tail-quarter excursion.
        let mid = b0 + a0 / 2.0;
        let mut theta_d = 8.0 * theta_pi;
        let tail = (3 * x.len()) / 4;
        if i_pi < tail {
            let e_early = (y[i_pi] - mid).abs();
            let (mut e_late, mut x_late) = (0.0f64, x[x.len() - 1]);
            for i in tail..x.len() {
                if (y[i] - mid).abs() > e_late {
                    e_late = (y[i] - mid).abs();
                    x_late = x[i];
                }
            }
            if e_late > 0.0 && e_early > e_late && x_late > x[i_pi] {
                theta_d = ((x_late - x[i_pi]) / (e_early / e_late).ln())
                    .clamp(0.3 * theta_pi, 100.0 * theta_pi);
            }
        }
        vec![a0, theta_pi, theta_d, b0]
    }
}

impl FitModel for DampedRabi {
    fn n_params(&self) -> usize {
        4
    }
    fn value(&self, p: &[f64], x: f64) -> f64 {
        let u = core::f64::consts::PI * x / p[Self::THETA_PI];
        let damp = (-x / p[Self::THETA_D]).exp();
        p[Self::A] * (1.0 - u.cos() * damp) / 2.0 + p[Self::B]
    }
    fn gradient(&self, p: &[f64], x: f64, out: &mut [f64]) {
        let tp = p[Self::THETA_PI];
        let td = p[Self::THETA_D];
        let u = core::f64::consts::PI * x / tp;
        let damp = (-x / td).exp();
        out[Self::A] = (1.0 - u.cos() * damp) / 2.0;
        out[Self::THETA_PI] =
            -p[Self::A] / 2.0 * damp * u.sin() * core::f64::consts::PI * x / (tp * tp);
        out[Self::THETA_D] = -p[Self::A] / 2.0 * u.cos() * damp * x / (td * td);
        out[Self::B] = 1.0;
    }
    fn name(&self) -> &'static str {
        "damped_rabi"
    }
}

// ---------------------------------------------------------------------------
// Lifetime-trace fitting
// ---------------------------------------------------------------------------

/// Which decay model to fit to a lifetime histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifetimeModel {
    Mono,
    Bi,
    /// Fit both and keep the one with the lower corrected Akaike score.
    Auto,
}

/// Result of [`fit_lifetime_trace`].
#[derive(Debug, Clone)]
pub struct LifetimeFit {
    /// Decay time of the dominant (slow, radiative) component, ps.
    pub lifetime_ps: f64,
    pub lifetime_err_ps: f64,
    /// Fast-component time for bi-exponential fits, ps.
    pub fast_lifetime_ps: Option<f64>,
    /// Baseline counts per bin subtracted before fitting.
    pub baseline: f64,
    /// Fit window in absolute trace time, ps.
    pub window_ps: (f64, f64),
    pub model_used: &'static str,
    pub fit: FitResult,
}

/// Fit an exponential decay to a time-resolved emission histogram.
///
/// The detector response smears the rising edge, so the window starts
/// `rise_guard_ps` after the peak where the smeared tail has the pure decay
/// slope; the flat level before the pulse sets the background baseline.
/// Counting errors are Poissonian (√counts per bin).
pub fn fit_lifetime_trace(
    times_ps: &[f64],
    counts: &[f64],
    rise_guard_ps: f64,
    model: LifetimeModel,
) -> Result<LifetimeFit> {
    if times_ps.len() != counts.len() {
        return Err(Error::FitSetup("times and counts length mismatch".into()));
    }
    if times_ps.len() < 16 {
        return Err(Error::FitSetup("lifetime trace too short".into()));
    }
    if rise_guard_ps < 0.0 {
        return Err(Error::FitSetup("rise guard must be non-negative".into()));
    }
    let (i_peak, &peak) = counts
        .iter()
        .enumerate()
        .fold((0, &f64::MIN), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if !(peak > 0.0) {
        return Err(Error::FitSetup("empty lifetime trace".into()));
    }
    let t_peak = times_ps[i_peak];

    // Baseline: the flat stretch before the excitation pulse arrives. The
    // detector response smears the rise symmetrically, so stay twice the
    // guard ahead of the peak to keep the rising shoulder out of the average.
    let pre: Vec<f64> = times_ps
        .iter()
        .zip(counts)
        .filter(|&(&t, _)| t < t_peak - 2.0 * rise_guard_ps)
        .map(|(_, &c)| c)
        .collect();
    if pre.is_empty() {
        return Err(Error::FitSetup(
            "no pre-pulse bins to estimate the baseline; start the trace before the pulse".into(),
        ));
    }
    let baseline = pre.iter().sum::<f64>() / pre.len() as f64;

    let t_start = t_peak + rise_guard_ps;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sg = Vec::new();
    for (&t, &c) in times_ps.iter().zip(counts) {
        if t >= t_start {
            xs.push(t - t_start);
            ys.push(c - baseline);
            sg.push(c.max(1.0).sqrt());
        }
    }
    if xs.len() < 8 {
        return Err(Error::FitSetup(
            "fit window after the rise guard holds fewer than 8 bins".into(),
        ));
    }

    let opts = FitOptions {
        bounds: None,
        ..FitOptions::default()
    };
    let run_mono = |opts: &FitOptions| -> Result<FitResult> {
        let p0 = MonoExponential::initial_guess(&xs, &ys);
        let mut o = opts.clone();
        o.bounds = Some(vec![
            (0.0, f64::INFINITY),
            (1e-3, f64::INFINITY),
            (f64::NEG_INFINITY, f64::INFINITY),
        ]);
        fit(&MonoExponential, &xs, &ys, Some(&sg), &p0, &o)
    };
    let run_bi = |opts: &FitOptions| -> Result<FitResult> {
        let p0 = BiExponential::initial_guess(&xs, &ys);
        let mut o = opts.clone();
        o.bounds = Some(vec![
            (0.0, f64::INFINITY),
            (1e-3, f64::INFINITY),
            (0.0, f64::INFINITY),
            (1e-3, f64::INFINITY),
            (f64::NEG_INFINITY, f64::INFINITY),
        ]);
        fit(&BiExponential, &xs, &ys, Some(&sg), &p0, &o)
    };

    let (fit_res, used): (FitResult, &'static str) = match model {
        LifetimeModel::Mono => (run_mono(&opts)?, "mono_exponential"),
        LifetimeModel::Bi => (run_bi(&opts)?, "bi_exponential"),
        LifetimeModel::Auto => {
            let mono = run_mono(&opts)?;
            let bi = run_bi(&opts)?;
            // Prefer the simpler model unless the bi-exponential fit is both
            // converged and clearly better.
            if bi.converged && bi.aicc() + 2.0 < mono.aicc() {
                (bi, "bi_exponential")
            } else {
                (mono, "mono_exponential")
            }
        }
    };

    let (lifetime, lifetime_err, fast) = if used == "mono_exponential" {
        (
            fit_res.params[MonoExponential::T],
            fit_res.errors[MonoExponential::T],
            None,
        )
    } else {
        // Canonical order puts the slow (radiative) component second.
        (
            fit_res.params[BiExponential::T2],
            fit_res.errors[BiExponential::T2],
            Some(fit_res.params[BiExponential::T1]),
        )
    };

    Ok(LifetimeFit {
        lifetime_ps: lifetime,
        lifetime_err_ps: lifetime_err,
        fast_lifetime_ps: fast,
        baseline,
        window_ps: (t_start, *times_ps.last().unwrap()),
        model_used: used,
        fit: fit_res,
    })
}
