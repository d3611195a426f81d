//! Click-stream statistics: Hanbury Brown–Twiss splitting, coincidence
//! correlation, and pulsed g²(0) extraction with blinking correction.
//!
//! The correlator computes the *full* cross-correlation histogram between the
//! two detector arms (every pair within the window, not just start–stop), so
//! pulsed streams produce a comb of peaks at multiples of the repetition
//! period. g²(0) is the central-peak area normalised to the uncorrelated
//! side peaks; a slow on/off intermittency of the emitter ("blinking") bunches
//! nearby peaks and is divided out by fitting an exponential envelope.

use crate::fit::{fit, FitModel, FitOptions, FitResult};
use crate::{Error, Result};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // f64 math methods in no_std builds
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// A time-ordered stream of detector clicks from a pulsed experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickStream {
    timestamps_ps: Vec<f64>,
    pub rep_period_ps: f64,
    pub n_pulses: u64,
}

impl ClickStream {
    /// Wrap a sorted list of click times. Fails on unsorted or non-finite
    /// input.
    pub fn new(timestamps_ps: Vec<f64>, rep_period_ps: f64, n_pulses: u64) -> Result<Self> {
        if !(rep_period_ps > 0.0) {
            return Err(Error::invalid("ClickStream", "repetition period must be positive"));
        }
        if timestamps_ps.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("ClickStream", "non-finite timestamp"));
        }
        if timestamps_ps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("ClickStream", "timestamps must be sorted"));
        }
        Ok(ClickStream {
            timestamps_ps,
            rep_period_ps,
            n_pulses,
        })
    }

    pub fn timestamps_ps(&self) -> &[f64] {
        &self.timestamps_ps
    }

    pub fn len(&self) -> usize {
        self.timestamps_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_ps.is_empty()
    }

    /// Mean detected clicks per excitation pulse.
    pub fn clicks_per_pulse(&self) -> f64 {
        self.timestamps_ps.len() as f64 / (self.n_pulses as f64).max(1.0)
    }
}

/// Split a stream on a balanced beam splitter: each click goes to one of the
/// two arms with probability 1/2 (seeded, reproducible).
pub fn split_hbt(stream: &ClickStream, seed: u64) -> (ClickStream, ClickStream) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut a = Vec::with_capacity(stream.len() / 2 + 8);
    let mut b = Vec::with_capacity(stream.len() / 2 + 8);
    for &t in &stream.timestamps_ps {
        if rng.gen::<bool>() {
            a.push(t);
        } else {
            b.push(t);
        }
    }
    (
        ClickStream {
            timestamps_ps: a,
            rep_period_ps: stream.rep_period_ps,
            n_pulses: stream.n_pulses,
        },
        ClickStream {
            timestamps_ps: b,
            rep_period_ps: stream.rep_period_ps,
            n_pulses: stream.n_pulses,
        },
    )
}

/// Remove clicks arriving within `dead_time_ps` of an accepted click
/// (non-paralyzable detector dead time).
pub fn apply_dead_time(stream: &ClickStream, dead_time_ps: f64) -> ClickStream {
    if dead_time_ps <= 0.0 {
        return stream.clone();
    }
    let mut kept = Vec::with_capacity(stream.len());
    let mut last_accepted = f64::NEG_INFINITY;
    for &t in &stream.timestamps_ps {
        if t - last_accepted >= dead_time_ps {
            kept.push(t);
            last_accepted = t;
        }
    }
    ClickStream {
        timestamps_ps: kept,
        rep_period_ps: stream.rep_period_ps,
        n_pulses: stream.n_pulses,
    }
}

/// Histogram of arrival-time differences τ = t_stop − t_start between two
/// detector arms.
#[derive(Debug, Clone)]
pub struct CoincidenceHistogram {
    /// Bin centers (ps), symmetric around τ = 0.
    pub tau_ps: Vec<f64>,
    pub counts: Vec<u64>,
    pub bin_width_ps: f64,
    pub rep_period_ps: f64,
    /// Number of clicks in the start / stop streams.
    pub n_start: usize,
    pub n_stop: usize,
}

/// Correlate two arms: count every (start, stop) pair with
/// |t_stop − t_start| inside the window. Two-pointer sweep, O(N + pairs).
pub fn correlate(
    start: &ClickStream,
    stop: &ClickStream,
    bin_width_ps: f64,
    window_ps: f64,
) -> Result<CoincidenceHistogram> {
    if !(bin_width_ps > 0.0) || !(window_ps > 0.0) {
        return Err(Error::invalid("correlate", "bin width and window must be positive"));
    }
    if (start.rep_period_ps - stop.rep_period_ps).abs() > 1e-9 {
        return Err(Error::invalid("correlate", "arm repetition periods differ"));
    }
    let n_half = (window_ps / bin_width_ps).round() as usize;
    if n_half < 1 {
        return Err(Error::invalid("correlate", "window shorter than one bin"));
    }
    let n_bins = 2 * n_half + 1;
    // Bin i covers τ ∈ [(i − n_half − ½)·w, (i − n_half + ½)·w).
    let edge = (n_half as f64 + 0.5) * bin_width_ps;
    let mut counts = vec![0u64; n_bins];

    let ts = &start.timestamps_ps;
    let tp = &stop.timestamps_ps;
    let mut j_lo = 0usize;
    for &ta in ts {
        while j_lo < tp.len() && tp[j_lo] - ta < -edge {
            j_lo += 1;
        }
        for &tb in &tp[j_lo..] {
            let tau = tb - ta;
            if tau >= edge {
                break;
            }
            let idx = ((tau + edge) / bin_width_ps).floor() as isize;
            if (0..n_bins as isize).contains(&idx) {
                counts[idx as usize] += 1;
            }
        }
    }

    let tau_ps = (0..n_bins)
        .map(|i| (i as f64 - n_half as f64) * bin_width_ps)
        .collect();
    Ok(CoincidenceHistogram {
        tau_ps,
        counts,
        bin_width_ps,
        rep_period_ps: start.rep_period_ps,
        n_start: ts.len(),
        n_stop: tp.len(),
    })
}

/// Integrated coincidences per pulse-lag peak: every bin is assigned to the
/// nearest multiple of the repetition period, k = round(τ/T).
///
/// Peak windows tile the τ axis with period-wide slots. When the histogram
/// bin width does not divide the period an odd number of times, the k = 0
/// slot covers one bin more or fewer than its neighbours; for pulsed sources
/// this is irrelevant (the boundary bins are empty), but any *flat* component
/// (CW background, dark counts) then biases the area ratios by one part in
/// T/bin. Choose bin widths with an odd period/bin ratio — e.g. T/25 — when
/// flat light matters.
pub fn peak_areas(hist: &CoincidenceHistogram) -> Vec<(i64, f64)> {
    let mut sums: Vec<(i64, f64)> = Vec::new();
    for (tau, &c) in hist.tau_ps.iter().zip(&hist.counts) {
        let k = (tau / hist.rep_period_ps).round() as i64;
        match sums.iter_mut().find(|(kk, _)| *kk == k) {
            Some((_, s)) => *s += c as f64,
            None => sums.push((k, c as f64)),
        }
    }
    sums.sort_by_key(|&(k, _)| k);
    sums
}

/// Blinking envelope of the HBT side peaks, A(k) = A_∞·(1 + c·e^(−|k|/k₀)):
/// an emitter toggling between bright and dark periods bunches coincidences
/// at small pulse lags. Parameters `[a_inf, c, k0]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlinkingEnvelopeModel;

impl BlinkingEnvelopeModel {
    pub const A_INF: usize = 0;
    pub const C: usize = 1;
    pub const K0: usize = 2;
}

impl FitModel for BlinkingEnvelopeModel {
    fn n_params(&self) -> usize {
        3
    }
    fn value(&self, p: &[f64], x: f64) -> f64 {
        p[Self::A_INF] * (1.0 + p[Self::C] * (-x.abs() / p[Self::K0]).exp())
    }
    fn gradient(&self, p: &[f64], x: f64, out: &mut [f64]) {
        let e = (-x.abs() / p[Self::K0]).exp();
        out[Self::A_INF] = 1.0 + p[Self::C] * e;
        out[Self::C] = p[Self::A_INF] * e;
        out[Self::K0] = p[Self::A_INF] * p[Self::C] * e * x.abs() / (p[Self::K0] * p[Self::K0]);
    }
    fn name(&self) -> &'static str {
        "blinking_envelope"
    }
}

/// Fitted side-peak envelope.
#[derive(Debug, Clone)]
pub struct BlinkingEnvelope {
    /// Asymptotic (uncorrelated) peak area.
    pub a_inf: f64,
    /// Bunching contrast at zero lag, c = P_off/P_on for telegraph blinking.
    pub contrast: f64,
    /// Correlation length in pulses, k₀ = 1/((α+β)·T_rep).
    pub k0_pulses: f64,
    pub fit: Option<FitResult>,
}

/// Fit the blinking envelope to side-peak areas (k ≠ 0). When the areas are
/// statistically flat (Poisson χ²/dof < 2) the contrast is reported as zero
/// without fitting.
pub fn side_peak_envelope(areas: &[(i64, f64)]) -> Result<BlinkingEnvelope> {
    let side: Vec<(f64, f64)> = areas
        .iter()
        .filter(|&&(k, _)| k != 0)
        .map(|&(k, a)| (k.abs() as f64, a))
        .collect();
    if side.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 side peaks for the envelope, got {}",
            side.len()
        )));
    }
    let mean = side.iter().map(|&(_, a)| a).sum::<f64>() / side.len() as f64;
    if mean <= 0.0 {
        return Err(Error::InvalidInput("empty side peaks".into()));
    }
    let chi2_flat: f64 = side.iter().map(|&(_, a)| (a - mean).powi(2) / mean.max(1.0)).sum();
    if chi2_flat / (side.len() as f64 - 1.0) < 2.0 {
        return Ok(BlinkingEnvelope {
            a_inf: mean,
            contrast: 0.0,
            k0_pulses: 0.0,
            fit: None,
        });
    }

    let xs: Vec<f64> = side.iter().map(|&(k, _)| k).collect();
    let ys: Vec<f64> = side.iter().map(|&(_, a)| a).collect();
    let sg: Vec<f64> = ys.iter().map(|&a| a.max(1.0).sqrt()).collect();
    // Start from the far tail for A_∞ and the first side peak for c.
    let far = *ys.last().unwrap();
    let near = ys[0];
    let p0 = [
        far.max(1.0),
        ((near / far.max(1.0)) - 1.0).max(0.01),
        (xs.last().unwrap() / 3.0).max(1.0),
    ];
    let opts = FitOptions {
        bounds: Some(vec![
            (0.0, f64::INFINITY),
            (0.0, f64::INFINITY),
            (0.1, f64::INFINITY),
        ]),
        ..FitOptions::default()
    };
    let res = fit(&BlinkingEnvelopeModel, &xs, &ys, Some(&sg), &p0, &opts)?;
    Ok(BlinkingEnvelope {
        a_inf: res.params[BlinkingEnvelopeModel::A_INF],
        contrast: res.params[BlinkingEnvelopeModel::C],
        k0_pulses: res.params[BlinkingEnvelopeModel::K0],
        fit: Some(res),
    })
}

/// g²(0) extracted from a pulsed coincidence histogram.
#[derive(Debug, Clone)]
pub struct G2Result {
    /// Central-peak area over the plain side-peak average.
    pub g2_uncorrected: f64,
    pub g2_uncorrected_err: f64,
    /// Central-peak area over the blinking-extrapolated zero-lag area
    /// A_∞·(1 + c); equals the uncorrected value when no bunching is found.
    pub g2_corrected: f64,
    pub g2_corrected_err: f64,
    pub central_area: f64,
    pub side_mean: f64,
    pub n_side_peaks_used: usize,
    pub envelope: BlinkingEnvelope,
}

/// Compute pulsed g²(0) from the full-correlation histogram using
/// `n_side_peaks` uncorrelated peaks on each side for normalisation.
pub fn g2_zero(hist: &CoincidenceHistogram, n_side_peaks: usize) -> Result<G2Result> {
    if n_side_peaks < 2 {
        return Err(Error::invalid("g2_zero", "need at least 2 side peaks per side"));
    }
    let needed = (n_side_peaks as f64 + 0.4) * hist.rep_period_ps;
    let span = hist.tau_ps.last().copied().unwrap_or(0.0);
    if span < needed {
        return Err(Error::invalid(
            "g2_zero",
            format!("window {span} ps too short for {n_side_peaks} side peaks"),
        ));
    }
    let areas = peak_areas(hist);
    let central = areas
        .iter()
        .find(|&&(k, _)| k == 0)
        .map(|&(_, a)| a)
        .unwrap_or(0.0);
    let side: Vec<(i64, f64)> = areas
        .iter()
        .filter(|&&(k, _)| k != 0 && k.unsigned_abs() as usize <= n_side_peaks)
        .cloned()
        .collect();
    if side.len() < 2 * n_side_peaks {
        return Err(Error::invalid("g2_zero", "missing side peaks inside the window"));
    }
    let side_mean = side.iter().map(|&(_, a)| a).sum::<f64>() / side.len() as f64;
    if side_mean <= 0.0 {
        return Err(Error::invalid("g2_zero", "no side-peak coincidences"));
    }
    // Poisson errors: √A on the central area, √(ΣA)/n on the side mean.
    let side_sum: f64 = side.iter().map(|&(_, a)| a).sum();
    let side_mean_err = side_sum.sqrt() / side.len() as f64;
    let g2_unc = central / side_mean;
    let g2_unc_err = if central > 0.0 {
        g2_unc * (1.0 / central + (side_mean_err / side_mean).powi(2)).sqrt()
    } else {
        1.0 / side_mean // one-count scale when the central peak is empty
    };

    let envelope = side_peak_envelope(&side)?;
    let zero_lag_ref = if envelope.contrast > 0.0 {
        envelope.a_inf * (1.0 + envelope.contrast)
    } else {
        side_mean
    };
    let g2_cor = central / zero_lag_ref;
    let g2_cor_err = if central > 0.0 {
        g2_cor * (1.0 / central + (side_mean_err / side_mean).powi(2)).sqrt()
    } else {
        1.0 / zero_lag_ref
    };

    Ok(G2Result {
        g2_uncorrected: g2_unc,
        g2_uncorrected_err: g2_unc_err,
        g2_corrected: g2_cor,
        g2_corrected_err: g2_cor_err,
        central_area: central,
        side_mean,
        n_side_peaks_used: n_side_peaks,
        envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn stream(ts: Vec<f64>, rep: f64, n: u64) -> ClickStream {
        ClickStream::new(ts, rep, n).unwrap()
    }

    /// O(N²) reference pairing, deliberately naive.
    fn brute_force(
        a: &[f64],
        b: &[f64],
        bin: f64,
        window: f64,
    ) -> Vec<u64> {
        let n_half = (window / bin).round() as usize;
        let n_bins = 2 * n_half + 1;
        let edge = (n_half as f64 + 0.5) * bin;
        let mut counts = vec![0u64; n_bins];
        for &ta in a {
            for &tb in b {
                let tau = tb - ta;
                if tau >= -edge && tau < edge {
                    let idx = ((tau + edge) / bin).floor() as usize;
                    if idx < n_bins {
                        counts[idx] += 1;
                    }
                }
            }
        }
        counts
    }

    #[test]
    fn correlator_matches_brute_force_on_random_streams() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2024);
        for case in 0..20 {
            let n_a = 50 + (case * 37) % 400;
            let n_b = 50 + (case * 53) % 400;
            let horizon = 2.0e5;
            let mut a: Vec<f64> = (0..n_a).map(|_| rng.gen::<f64>() * horizon).collect();
            let mut b: Vec<f64> = (0..n_b).map(|_| rng.gen::<f64>() * horizon).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let bin = 97.3;
            let window = 12_000.0 + case as f64 * 311.0;
            let hist = correlate(
                &stream(a.clone(), 12195.1, 1000),
                &stream(b.clone(), 12195.1, 1000),
                bin,
                window,
            )
            .unwrap();
            let reference = brute_force(&a, &b, bin, window);
            assert_eq!(hist.counts, reference, "case {case}");
            let total: u64 = hist.counts.iter().sum();
            assert!(total > 0, "case {case} produced an empty histogram");
        }
    }

    proptest! {
        #[test]
        fn correlator_matches_brute_force_property(
            mut a in proptest::collection::vec(0.0f64..5e4, 1..80),
            mut b in proptest::collection::vec(0.0f64..5e4, 1..80),
            bin in 50.0f64..500.0,
            window_mult in 3.0f64..20.0,
        ) {
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let window = bin * window_mult;
            let hist = correlate(
                &stream(a.clone(), 12195.1, 100),
                &stream(b.clone(), 12195.1, 100),
                bin,
                window,
            ).unwrap();
            let reference = brute_force(&a, &b, bin, window);
            prop_assert_eq!(hist.counts, reference);
        }
    }

    #[test]
    fn correlation_mirrors_under_arm_exchange() {
        let a = stream(vec![10.0, 250.0, 3000.0, 3100.0, 9000.0], 1000.0, 10);
        let b = stream(vec![40.0, 260.0, 2500.0, 8000.0, 9950.0], 1000.0, 10);
        let ab = correlate(&a, &b, 50.0, 5000.0).unwrap();
        let ba = correlate(&b, &a, 50.0, 5000.0).unwrap();
        // τ → −τ: swapping arms reverses the histogram *if* the binning is
        // symmetric; bins here are centered on τ = 0, but each bin covers
        // [lo, hi), so exact-edge values can move by one bin. Use off-edge
        // data (none of the τ values above are multiples of 25).
        let mut rev = ba.counts.clone();
        rev.reverse();
        assert_eq!(ab.counts, rev);
    }

    #[test]
    fn correlation_is_translation_invariant() {
        let base = vec![10.0, 250.0, 3000.0, 3100.0, 9000.0, 12100.0];
        let shifted: Vec<f64> = base.iter().map(|t| t + 777.7).collect();
        let h1 = correlate(
            &stream(base.clone(), 1000.0, 13),
            &stream(base.clone(), 1000.0, 13),
            50.0,
            5000.0,
        )
        .unwrap();
        let h2 = correlate(
            &stream(shifted.clone(), 1000.0, 13),
            &stream(shifted, 1000.0, 13),
            50.0,
            5000.0,
        )
        .unwrap();
        assert_eq!(h1.counts, h2.counts);
    }

    #[test]
    fn poisson_light_has_flat_correlation() {
        // A split homogeneous Poisson process is two independent Poisson
        // processes: every peak area (including τ=0) matches the Poisson
        // expectation, so g² = 1.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(60);
        let rate = 4e-4; // clicks per ps
        let t_end = 5e7;
        let mut ts = Vec::new();
        let mut t = 0.0;
        loop {
            let u: f64 = rng.gen::<f64>().max(1e-300);
            t += -u.ln() / rate;
            if t >= t_end {
                break;
            }
            ts.push(t);
        }
        let s = stream(ts, 12195.1, (t_end / 12195.1) as u64);
        let (arm_a, arm_b) = split_hbt(&s, 7);
        // Flat light is the case where the peak windows must tile the period
        // exactly: use an odd period/bin ratio (see `peak_areas`).
        let hist = correlate(&arm_a, &arm_b, 12195.1 / 25.0, 11.0 * 12195.1).unwrap();
        let g2 = g2_zero(&hist, 10).unwrap();
        assert!(
            (g2.g2_uncorrected - 1.0).abs() < 4.0 * g2.g2_uncorrected_err,
            "g² = {} ± {}",
            g2.g2_uncorrected,
            g2.g2_uncorrected_err
        );
        assert!(g2.envelope.contrast == 0.0);
        assert_relative_eq!(g2.g2_corrected, g2.g2_uncorrected, epsilon = 1e-12);
    }

    #[test]
    fn perfect_photon_train_has_zero_central_peak() {
        // Exactly one photon per pulse: after the beam splitter the central
        // peak is empty (a photon cannot coincide with itself) while side
        // peaks carry ~N/4 pairs each.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(61);
        let rep = 12195.1;
        let n: u64 = 40_000;
        let ts: Vec<f64> = (0..n)
            .map(|i| i as f64 * rep + 500.0 + rng.gen::<f64>() * 80.0)
            .collect();
        let s = stream(ts, rep, n);
        let (a, b) = split_hbt(&s, 3);
        let hist = correlate(&a, &b, rep / 30.0, 11.0 * rep).unwrap();
        let g2 = g2_zero(&hist, 10).unwrap();
        assert_eq!(g2.central_area, 0.0);
        assert!(g2.g2_uncorrected == 0.0);
        assert!(g2.side_mean > n as f64 / 4.0 * 0.8);
    }

    #[test]
    fn split_conserves_and_decorrelates() {
        let rep = 1000.0;
        let ts: Vec<f64> = (0..10_000).map(|i| i as f64 * 13.7).collect();
        let s = stream(ts, rep, 137);
        let (a, b) = split_hbt(&s, 5);
        assert_eq!(a.len() + b.len(), s.len());
        // Balanced within 5σ of binomial.
        let imbalance = (a.len() as f64 - b.len() as f64).abs();
        assert!(imbalance < 5.0 * (s.len() as f64 * 0.25).sqrt());
        // Reproducible.
        let (a2, _) = split_hbt(&s, 5);
        assert_eq!(a.timestamps_ps(), a2.timestamps_ps());
        // Different seed, different split.
        let (a3, _) = split_hbt(&s, 6);
        assert_ne!(a.timestamps_ps(), a3.timestamps_ps());
    }

    #[test]
    fn thinning_leaves_g2_invariant() {
        // g² is a normalised quantity: randomly discarding half of all
        // clicks (finite detector efficiency) must not move it beyond
        // statistics. Build a bunched source (pairs with 30% probability)
        // to have a non-trivial g² to preserve.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(88);
        let rep = 10_000.0;
        let n: u64 = 60_000;
        let mut ts = Vec::new();
        for i in 0..n {
            let t0 = i as f64 * rep + 300.0;
            if rng.gen::<f64>() < 0.9 {
                ts.push(t0 + rng.gen::<f64>() * 50.0);
            }
            if rng.gen::<f64>() < 0.3 {
                ts.push(t0 + 60.0 + rng.gen::<f64>() * 50.0);
            }
        }
        ts.sort_by(f64::total_cmp);
        let full = stream(ts.clone(), rep, n);
        let thinned_ts: Vec<f64> = ts.iter().copied().filter(|_| rng.gen::<f64>() < 0.5).collect();
        let thinned = stream(thinned_ts, rep, n);

        let g2_of = |s: &ClickStream, seed: u64| {
            let (a, b) = split_hbt(s, seed);
            let h = correlate(&a, &b, rep / 25.0, 11.0 * rep).unwrap();
            g2_zero(&h, 10).unwrap()
        };
        let gf = g2_of(&full, 1);
        let gt = g2_of(&thinned, 2);
        assert!(gf.g2_uncorrected > 0.2, "source not bunched enough to test");
        let err = (gf.g2_uncorrected_err.powi(2) + gt.g2_uncorrected_err.powi(2)).sqrt();
        assert!(
            (gf.g2_uncorrected - gt.g2_uncorrected).abs() < 4.0 * err,
            "full {} vs thinned {} (err {err})",
            gf.g2_uncorrected,
            gt.g2_uncorrected
        );
    }

    #[test]
    fn dead_time_removes_only_close_pairs() {
        let s = stream(vec![0.0, 10.0, 200.0, 205.0, 400.0], 1000.0, 1);
        let cleaned = apply_dead_time(&s, 50.0);
        assert_eq!(cleaned.timestamps_ps(), &[0.0, 200.0, 400.0]);
        let untouched = apply_dead_time(&s, 0.0);
        assert_eq!(untouched.timestamps_ps(), s.timestamps_ps());
    }

    #[test]
    fn envelope_fit_recovers_synthetic_blinking() {
        // Areas drawn from A(k) = 1000·(1 + 0.8·e^{−|k|/6}) with Poisson
        // noise; the fit must recover all three parameters.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        let truth = [1000.0, 0.8, 6.0];
        let mut areas = Vec::new();
        for k in 1..=40i64 {
            for sign in [-1, 1] {
                let mean = BlinkingEnvelopeModel.value(&truth, k as f64);
                // Gaussian approximation to Poisson at counts ~ 1000.
                let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
                let gauss = (-2.0 * u1.max(1e-300).ln()).sqrt()
                    * (2.0 * core::f64::consts::PI * u2).cos();
                areas.push((sign * k, (mean + mean.sqrt() * gauss).max(0.0)));
            }
        }
        areas.sort_by_key(|&(k, _)| k);
        let env = side_peak_envelope(&areas).unwrap();
        assert_relative_eq!(env.a_inf, 1000.0, max_relative = 0.02);
        assert_relative_eq!(env.contrast, 0.8, max_relative = 0.10);
        assert_relative_eq!(env.k0_pulses, 6.0, max_relative = 0.15);
    }

    #[test]
    fn g2_of_background_contaminated_train_matches_mixture_formula() {
        // Single photons (q per pulse) plus uncorrelated Poisson background
        // (b per pulse): g² = (2qb + b²)/(q + b)². With q = 0.4, b = 0.02 the
        // mixture predicts g² ≈ 0.0930.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        let rep = 12195.1;
        let n: u64 = 300_000;
        let (q, b) = (0.4, 0.02);
        let mut ts = Vec::new();
        for i in 0..n {
            let t0 = i as f64 * rep;
            if rng.gen::<f64>() < q {
                ts.push(t0 + 500.0 + 200.0 * rng.gen::<f64>());
            }
            // Poisson(b) via thinning of at most 3 slots (b ≪ 1).
            for _ in 0..3 {
                if rng.gen::<f64>() < b / 3.0 {
                    ts.push(t0 + rng.gen::<f64>() * rep);
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        let s = stream(ts, rep, n);
        let (arm_a, arm_b) = split_hbt(&s, 41);
        let hist = correlate(&arm_a, &arm_b, rep / 25.0, 11.0 * rep).unwrap();
        let g2 = g2_zero(&hist, 10).unwrap();
        let expected = (2.0 * q * b + b * b) / (q + b).powi(2);
        assert!(
            (g2.g2_uncorrected - expected).abs() < 4.0 * g2.g2_uncorrected_err.max(0.004),
            "g² = {} ± {}, mixture predicts {expected}",
            g2.g2_uncorrected,
            g2.g2_uncorrected_err
        );
    }

    #[test]
    fn g2_rejects_short_windows_and_unsorted_input() {
        assert!(ClickStream::new(vec![2.0, 1.0], 100.0, 2).is_err());
        let s = stream(vec![10.0, 120.0, 230.0], 100.0, 3);
        let h = correlate(&s, &s, 10.0, 300.0).unwrap();
        assert!(g2_zero(&h, 10).is_err());
    }
}
