//! Continuous-signal conditioning and epoching.
//!
//! The conditioning chain differs per decoding method: the ConvNet path is
//! CAR -> resample -> exponential moving standardization -> epoch; the rLDA
//! path skips standardization; the FB-CSP path replaces it with the
//! high-pass from [`crate::filters`]. All operations here are pure.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::filters::RejectionMask;
use crate::types::{Outcome, Recording, TrialSet};

/// Parameters of the per-channel exponential moving standardization.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StandardizationConfig {
    /// Update weight of the newest sample, in (0, 1).
    pub decay: f64,
    /// Variance floor applied as `max(sqrt(v), eps)`.
    pub eps: f64,
    /// Seconds of initial data whose plain mean/variance seed the running
    /// statistics.
    pub init_block_s: f64,
}

impl Default for StandardizationConfig {
    fn default() -> Self {
        StandardizationConfig {
            decay: 0.001,
            eps: 1e-4,
            init_block_s: 4.0,
        }
    }
}

impl StandardizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "standardization decay must be in (0,1), got {}",
                self.decay
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "standardization eps must be positive, got {}",
                self.eps
            )));
        }
        if self.init_block_s < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "init_block_s must be non-negative, got {}",
                self.init_block_s
            )));
        }
        Ok(())
    }
}

/// Subtract the instantaneous mean over channels from every channel.
pub fn common_average_reference(rec: &Recording) -> Result<Recording> {
    if rec.n_channels() < 2 {
        return Err(Error::InvalidArgument(
            "common average reference needs at least two channels".into(),
        ));
    }
    let n_channels = rec.n_channels() as f64;
    let mut data = rec.data.clone();
    for t in 0..rec.n_samples() {
        let mean: f64 = data.column(t).sum() / n_channels;
        data.column_mut(t).mapv_inplace(|v| v - mean);
    }
    Ok(rec.with_data(data))
}

/// Per-channel exponential moving standardization.
///
/// Running statistics follow
/// `m_t = (1-decay)*m_{t-1} + decay*x_t` and
/// `v_t = (1-decay)*v_{t-1} + decay*(x_t - m_t)^2`,
/// seeded from the plain mean/variance of the first `init_block_s` seconds;
/// the output is `(x_t - m_t) / max(sqrt(v_t), eps)`.
pub fn ewm_standardize(rec: &Recording, cfg: &StandardizationConfig) -> Result<Recording> {
    cfg.validate()?;
    let n = rec.n_samples();
    let init_n = ((cfg.init_block_s * rec.sample_rate_hz).round() as usize)
        .clamp(1, n);
    let mut data = rec.data.clone();
    for mut channel in data.rows_mut() {
        let init = &channel.as_slice().expect("standard layout")[..init_n];
        let mut mean = init.iter().sum::<f64>() / init_n as f64;
        let mut var = init.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / init_n as f64;
        for x in channel.iter_mut() {
            mean = (1.0 - cfg.decay) * mean + cfg.decay * *x;
            let centered = *x - mean;
            var = (1.0 - cfg.decay) * var + cfg.decay * centered * centered;
            *x = centered / var.sqrt().max(cfg.eps);
        }
    }
    Ok(rec.with_data(data))
}

/// Best rational approximation `p/q` of `x` with bounded denominator,
/// via continued fractions.
fn rational_ratio(x: f64) -> Result<(u64, u64)> {
    const MAX_DEN: u64 = 1 << 16;
    let mut frac = x;
    let (mut p0, mut q0, mut p1, mut q1) = (1u64, 0u64, 0u64, 1u64);
    for _ in 0..64 {
        let a = frac.floor();
        if a < 0.0 || a > MAX_DEN as f64 {
            break;
        }
        let a_int = a as u64;
        let p2 = a_int.saturating_mul(p0).saturating_add(p1);
        let q2 = a_int.saturating_mul(q0).saturating_add(q1);
        if q2 > MAX_DEN {
            break;
        }
        (p1, q1, p0, q0) = (p0, q0, p2, q2);
        let rem = frac - a;
        if rem.abs() < 1e-12 {
            break;
        }
        frac = 1.0 / rem;
    }
    if q0 == 0 || p0 == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot express rate ratio {x} as a small rational"
        )));
    }
    if (p0 as f64 / q0 as f64 - x).abs() > 1e-9 * x.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "rate ratio {x} has no rational approximation with denominator <= {MAX_DEN}"
        )));
    }
    Ok((p0, q0))
}

/// Zeroth-order modified Bessel function of the first kind (power series),
/// used by the Kaiser window.
fn bessel_i0(x: f64) -> f64 {
    let half_x2 = (x / 2.0) * (x / 2.0);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= half_x2 / ((k * k) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Rational-ratio resampler with a Kaiser-windowed-sinc anti-alias kernel.
///
/// The anti-alias cutoff sits at 0.45x the output Nyquist frequency (or the
/// input Nyquist when upsampling), with a Kaiser window of beta = 8. Event
/// sample indices are rescaled by the rate ratio and rounded half-to-even;
/// a one-sample onset jitter from that rounding is accepted.
pub fn resample(rec: &Recording, target_hz: f64) -> Result<Recording> {
    if !(target_hz > 0.0) || !target_hz.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "invalid target sample rate {target_hz}"
        )));
    }
    let ratio = target_hz / rec.sample_rate_hz;
    let (up, down) = rational_ratio(ratio)?;
    if up == down {
        // Identity ratio: the signal passes through untouched.
        let mut out = rec.clone();
        out.sample_rate_hz = target_hz;
        return Ok(out);
    }

    let n_in = rec.n_samples();
    let n_out = ((n_in as f64) * ratio).round() as usize;
    if n_out == 0 {
        return Err(Error::InvalidArgument(
            "resampled recording would be empty".into(),
        ));
    }

    // Normalized cutoff relative to the input Nyquist.
    let cutoff_hz = 0.45 * rec.sample_rate_hz.min(target_hz) / 2.0;
    let wc = cutoff_hz / (rec.sample_rate_hz / 2.0);
    let half_width = (10.0 / wc).ceil().max(10.0) as i64;
    let beta = 8.0;
    let i0_beta = bessel_i0(beta);
    let kernel = |t: f64| -> f64 {
        let u = t / half_width as f64;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(beta * (1.0 - u * u).sqrt()) / i0_beta;
        let x = wc * t;
        let sinc = if x.abs() < 1e-12 {
            1.0
        } else {
            (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
        };
        wc * sinc * window
    };

    let mut data = Array2::zeros((rec.n_channels(), n_out));
    for (c, channel) in rec.data.rows().into_iter().enumerate() {
        let x = channel.as_slice().expect("standard layout");
        for j in 0..n_out {
            // Input-space position of output sample j, kept rational.
            let num = j as u64 * down;
            let base = (num / up) as i64;
            let frac = (num % up) as f64 / up as f64;
            let mut acc = 0.0;
            let mut weight = 0.0;
            for k in (base - half_width)..=(base + half_width + 1) {
                let h = kernel(k as f64 - base as f64 - frac);
                if h == 0.0 {
                    continue;
                }
                weight += h;
                if k >= 0 && (k as usize) < n_in {
                    acc += h * x[k as usize];
                }
            }
            data[[c, j]] = if weight.abs() > 1e-30 { acc / weight } else { 0.0 };
        }
    }

    let mut events = rec.events.clone();
    for ev in events.iter_mut() {
        let rescaled = (ev.sample_index as f64 * ratio).round_ties_even() as usize;
        ev.sample_index = rescaled.min(n_out - 1);
    }
    let mut out = rec.with_data(data);
    out.sample_rate_hz = target_hz;
    out.events = events;
    Ok(out)
}

fn epoch_offsets(rec: &Recording, interval_s: (f64, f64)) -> Result<(i64, usize)> {
    let (t_start, t_end) = interval_s;
    if !(t_end > t_start) {
        return Err(Error::InvalidArgument(format!(
            "decoding interval must have t_start < t_end, got ({t_start}, {t_end})"
        )));
    }
    let start_off = (t_start * rec.sample_rate_hz).round() as i64;
    let n_timepoints = ((t_end - t_start) * rec.sample_rate_hz).round() as usize;
    if n_timepoints == 0 {
        return Err(Error::InvalidArgument(
            "decoding interval shorter than one sample".into(),
        ));
    }
    Ok((start_off, n_timepoints))
}

/// Cut the recording into one trial per event over the given decoding
/// interval (seconds relative to stimulus onset). Pure slicing: signal
/// values are copied exactly. Initial labels are the error-vs-correct
/// projection; use [`crate::types::project_labels`] to re-label for a task.
pub fn epoch_trials(rec: &Recording, interval_s: (f64, f64)) -> Result<TrialSet> {
    let (ts, _kept) = epoch_trials_masked(rec, interval_s, None)?;
    Ok(ts)
}

/// Like [`epoch_trials`], additionally dropping every trial whose window
/// overlaps a rejected segment of `mask`. Returns the kept event indices
/// alongside the trials.
pub fn epoch_trials_masked(
    rec: &Recording,
    interval_s: (f64, f64),
    mask: Option<&RejectionMask>,
) -> Result<(TrialSet, Vec<usize>)> {
    let (start_off, n_timepoints) = epoch_offsets(rec, interval_s)?;
    if let Some(m) = mask {
        if m.len() != rec.n_samples() {
            return Err(Error::ShapeMismatch(format!(
                "rejection mask of {} samples for a recording of {}",
                m.len(),
                rec.n_samples()
            )));
        }
    }

    let mut windows = Vec::with_capacity(rec.events.len());
    for (i, ev) in rec.events.iter().enumerate() {
        let start = ev.sample_index as i64 + start_off;
        let end = start + n_timepoints as i64;
        if start < 0 || end > rec.n_samples() as i64 {
            return Err(Error::EpochOutOfBounds {
                event_index: i,
                start,
                end,
                n_samples: rec.n_samples(),
            });
        }
        let range = start as usize..end as usize;
        if mask.map_or(false, |m| m.overlaps(range.clone())) {
            continue;
        }
        windows.push((i, range));
    }

    let n_trials = windows.len();
    let mut trials = Array3::zeros((n_trials, rec.n_channels(), n_timepoints));
    let mut labels = Vec::with_capacity(n_trials);
    let mut conditions = Vec::with_capacity(n_trials);
    let mut kept = Vec::with_capacity(n_trials);
    for (k, (event_index, range)) in windows.into_iter().enumerate() {
        trials
            .index_axis_mut(ndarray::Axis(0), k)
            .assign(&rec.data.slice(ndarray::s![.., range]));
        let condition = rec.events[event_index].condition;
        labels.push(match condition.outcome {
            Outcome::Error => 1,
            Outcome::Correct => 0,
        });
        conditions.push(condition);
        kept.push(event_index);
    }

    Ok((
        TrialSet {
            trials,
            labels,
            conditions,
            sample_rate_hz: rec.sample_rate_hz,
            interval_s,
        },
        kept,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ConditionLabel, EventMarker, Robot};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec_from(data: Array2<f64>, fs: f64, events: Vec<EventMarker>) -> Recording {
        let names = (0..data.nrows()).map(|i| format!("ch{i:02}")).collect();
        Recording::new(data, fs, names, events).unwrap()
    }

    fn event(sample_index: usize) -> EventMarker {
        EventMarker {
            sample_index,
            condition: ConditionLabel {
                outcome: Outcome::Error,
                robot: Robot::Nao,
            },
        }
    }

    #[test]
    fn car_zeroes_identical_channels() {
        let rec = rec_from(Array2::from_elem((3, 5), 5.0), 250.0, vec![]);
        let out = common_average_reference(&rec).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn car_is_idempotent_on_referenced_data() {
        let data = array![[1.0, -2.0], [-1.0, 2.0]];
        let rec = rec_from(data.clone(), 250.0, vec![]);
        let out = common_average_reference(&rec).unwrap();
        assert_eq!(out.data, data);
    }

    #[test]
    fn car_matches_direct_per_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = Array2::from_shape_fn((3, 4), |_| rng.gen_range(-10.0..10.0));
        let rec = rec_from(data.clone(), 100.0, vec![]);
        let out = common_average_reference(&rec).unwrap();
        for t in 0..4 {
            let mean = (data[[0, t]] + data[[1, t]] + data[[2, t]]) / 3.0;
            for c in 0..3 {
                assert_abs_diff_eq!(out.data[[c, t]], data[[c, t]] - mean, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn car_rejects_single_channel() {
        let rec = rec_from(Array2::zeros((1, 10)), 250.0, vec![]);
        assert!(common_average_reference(&rec).is_err());
    }

    #[test]
    fn car_zero_channel_mean_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data = Array2::from_shape_fn((16, 500), |_| rng.gen_range(-50.0..50.0));
        let rms = (data.iter().map(|v| v * v).sum::<f64>() / data.len() as f64).sqrt();
        let rec = rec_from(data, 250.0, vec![]);
        let out = common_average_reference(&rec).unwrap();
        for t in 0..500 {
            let mean: f64 = out.data.column(t).sum() / 16.0;
            assert!(mean.abs() < 1e-6 * rms, "mean {mean} at t={t}");
        }
    }

    #[test]
    fn standardize_constant_signal_is_zero() {
        let rec = rec_from(Array2::from_elem((2, 100), 7.5), 100.0, vec![]);
        let cfg = StandardizationConfig {
            decay: 0.05,
            eps: 1e-4,
            init_block_s: 0.5,
        };
        let out = ewm_standardize(&rec, &cfg).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardize_matches_direct_recursion_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..20).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let rec = rec_from(
            Array2::from_shape_vec((1, 20), xs.clone()).unwrap(),
            10.0,
            vec![],
        );
        let cfg = StandardizationConfig {
            decay: 0.5,
            eps: 1e-8,
            init_block_s: 0.5, // 5 samples
        };
        let out = ewm_standardize(&rec, &cfg).unwrap();

        // ten-line direct recursion
        let init = &xs[..5];
        let mut m = init.iter().sum::<f64>() / 5.0;
        let mut v = init.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 5.0;
        for (t, &x) in xs.iter().enumerate() {
            m = 0.5 * m + 0.5 * x;
            v = 0.5 * v + 0.5 * (x - m) * (x - m);
            let expect = (x - m) / v.sqrt().max(1e-8);
            let got = out.data[[0, t]];
            assert!(
                (got - expect).abs() <= 1e-12 * expect.abs().max(1.0),
                "t={t}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn standardize_adapts_to_amplitude_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 4000;
        let xs: Vec<f64> = (0..n)
            .map(|t| {
                let scale = if t < n / 2 { 1.0 } else { 2.0 };
                scale * rng.gen_range(-1.0..1.0)
            })
            .collect();
        let rec = rec_from(Array2::from_shape_vec((1, n), xs).unwrap(), 250.0, vec![]);
        let cfg = StandardizationConfig {
            decay: 0.01,
            eps: 1e-6,
            init_block_s: 1.0,
        };
        let out = ewm_standardize(&rec, &cfg).unwrap();
        let tail = out.data.slice(ndarray::s![0, (3 * n / 4)..]);
        let mean = tail.sum() / tail.len() as f64;
        let sd = (tail.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / tail.len() as f64)
            .sqrt();
        assert!((0.5..=2.0).contains(&sd), "tail sd {sd}");
    }

    #[test]
    fn resample_identity_ratio_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = Array2::from_shape_fn((2, 50), |_| rng.gen_range(-1.0..1.0));
        let rec = rec_from(data.clone(), 250.0, vec![event(10)]);
        let out = resample(&rec, 250.0).unwrap();
        assert_eq!(out.data, data);
        assert_eq!(out.events[0].sample_index, 10);
    }

    #[test]
    fn resample_preserves_passband_sine() {
        // 10 Hz sine at 1000 Hz -> 250 Hz
        let fs = 1000.0;
        let n = 4000;
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 10.0 * t as f64 / fs).sin())
            .collect();
        let rec = rec_from(Array2::from_shape_vec((1, n), x).unwrap(), fs, vec![]);
        let out = resample(&rec, 250.0).unwrap();
        assert_eq!(out.n_samples(), 1000);
        assert_abs_diff_eq!(out.sample_rate_hz, 250.0);
        // amplitude on the central 80%: compare RMS against sin RMS = 1/sqrt(2)
        let lo = out.n_samples() / 10;
        let hi = out.n_samples() - lo;
        let seg = out.data.slice(ndarray::s![0, lo..hi]);
        let rms = (seg.iter().map(|v| v * v).sum::<f64>() / seg.len() as f64).sqrt();
        let expect = 1.0 / 2.0_f64.sqrt();
        assert!(
            (rms - expect).abs() < 0.01 * expect,
            "rms {rms} vs {expect}"
        );
    }

    #[test]
    fn resample_attenuates_aliasing_sine() {
        // 200 Hz sine at 1000 Hz is above the new Nyquist of 125 Hz
        let fs = 1000.0;
        let n = 4000;
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 200.0 * t as f64 / fs).sin())
            .collect();
        let rec = rec_from(Array2::from_shape_vec((1, n), x).unwrap(), fs, vec![]);
        let out = resample(&rec, 250.0).unwrap();
        let lo = out.n_samples() / 10;
        let hi = out.n_samples() - lo;
        let seg = out.data.slice(ndarray::s![0, lo..hi]);
        let rms = (seg.iter().map(|v| v * v).sum::<f64>() / seg.len() as f64).sqrt();
        // residual RMS below 5% of the original amplitude (1.0)
        assert!(rms < 0.05, "alias residual rms {rms}");
    }

    #[test]
    fn resample_rescales_event_indices() {
        let rec = rec_from(Array2::zeros((1, 1000)), 1000.0, vec![event(400)]);
        let out = resample(&rec, 250.0).unwrap();
        assert_eq!(out.events[0].sample_index, 100);
    }

    #[test]
    fn resample_rejects_nonpositive_rate() {
        let rec = rec_from(Array2::zeros((1, 100)), 1000.0, vec![]);
        assert!(resample(&rec, 0.0).is_err());
        assert!(resample(&rec, -5.0).is_err());
    }

    #[test]
    fn epoch_lengths_match_decoding_intervals() {
        // 250 Hz: (0,7) -> 1750 timepoints, (4,7) -> 750
        let rec = rec_from(Array2::zeros((2, 2500)), 250.0, vec![event(100)]);
        let long = epoch_trials(&rec, (0.0, 7.0)).unwrap();
        assert_eq!(long.n_timepoints(), 1750);
        let late = epoch_trials(&rec, (4.0, 7.0)).unwrap();
        assert_eq!(late.n_timepoints(), 750);
        assert_eq!(late.n_trials(), 1);
    }

    #[test]
    fn epoch_out_of_bounds_reports_event_index() {
        let rec = rec_from(Array2::zeros((1, 600)), 250.0, vec![event(0)]);
        let err = epoch_trials(&rec, (-1.0, 2.0)).unwrap_err();
        match err {
            Error::EpochOutOfBounds { event_index, .. } => assert_eq!(event_index, 0),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn epoching_is_pure_slicing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = Array2::from_shape_fn((2, 100), |_| rng.gen_range(-1.0..1.0));
        let rec = rec_from(data.clone(), 10.0, vec![event(20), event(50)]);
        let ts = epoch_trials(&rec, (0.0, 2.0)).unwrap();
        assert_eq!(ts.n_timepoints(), 20);
        for (k, onset) in [(0usize, 20usize), (1, 50)] {
            for c in 0..2 {
                for t in 0..20 {
                    assert_eq!(ts.trials[[k, c, t]], data[[c, onset + t]]);
                }
            }
        }
    }
}
