//! Core domain types: recordings, event markers, condition labels and
//! epoched trial sets.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the observed action was executed erroneously or correctly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Error,
    Correct,
}

/// Which of the two robots performed the action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Robot {
    Nao,
    Nohu,
}

/// Full condition of a trial. Both attributes are always present; the two
/// binary decoding tasks are projections of this pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionLabel {
    pub outcome: Outcome,
    pub robot: Robot,
}

/// A stimulus onset within a continuous recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventMarker {
    pub sample_index: usize,
    #[serde(flatten)]
    pub condition: ConditionLabel,
}

/// Continuous multichannel signal in microvolts with event markers.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    /// `[n_channels x n_samples]`. Values are microvolts. Stored as `f64`
    /// for numerical work; the on-disk container holds `f32`.
    pub data: Array2<f64>,
    pub sample_rate_hz: f64,
    pub channel_names: Vec<String>,
    pub events: Vec<EventMarker>,
}

impl Recording {
    /// Build a recording, checking the type invariants.
    pub fn new(
        data: Array2<f64>,
        sample_rate_hz: f64,
        channel_names: Vec<String>,
        events: Vec<EventMarker>,
    ) -> Result<Self> {
        let (n_channels, n_samples) = data.dim();
        if n_channels == 0 || n_samples == 0 {
            return Err(Error::InvalidArgument(format!(
                "recording must have at least one channel and one sample, got {n_channels}x{n_samples}"
            )));
        }
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "invalid sample rate: {sample_rate_hz}"
            )));
        }
        if channel_names.len() != n_channels {
            return Err(Error::ShapeMismatch(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                n_channels
            )));
        }
        for (i, a) in channel_names.iter().enumerate() {
            if channel_names[..i].contains(a) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate channel name {a:?}"
                )));
            }
        }
        for (i, ev) in events.iter().enumerate() {
            if ev.sample_index >= n_samples {
                return Err(Error::InvalidArgument(format!(
                    "event {i} at sample {} outside recording of {} samples",
                    ev.sample_index, n_samples
                )));
            }
        }
        Ok(Recording {
            data,
            sample_rate_hz,
            channel_names,
            events,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Same signal with replaced data matrix; metadata is carried over.
    /// The new matrix must keep the channel count.
    pub(crate) fn with_data(&self, data: Array2<f64>) -> Recording {
        debug_assert_eq!(data.nrows(), self.n_channels());
        Recording {
            data,
            sample_rate_hz: self.sample_rate_hz,
            channel_names: self.channel_names.clone(),
            events: self.events.clone(),
        }
    }
}

/// One of the two binary decoding problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Erroneous vs. correct execution, optionally restricted to trials of
    /// one robot.
    ErrorVsCorrect { robot: Option<Robot> },
    /// Which robot performed the task.
    NaoVsNohu,
}

impl Task {
    /// Class index under this task, or `None` when the trial is filtered out.
    pub fn class_of(&self, c: &ConditionLabel) -> Option<usize> {
        match self {
            Task::ErrorVsCorrect { robot } => {
                if robot.map_or(false, |r| r != c.robot) {
                    return None;
                }
                Some(match c.outcome {
                    Outcome::Correct => 0,
                    Outcome::Error => 1,
                })
            }
            Task::NaoVsNohu => Some(match c.robot {
                Robot::Nao => 0,
                Robot::Nohu => 1,
            }),
        }
    }
}

/// Epoched trials: one `[n_channels x n_timepoints]` slab per event, with
/// binary class labels and the full condition pair retained so either task
/// can be re-projected later.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    /// `[n_trials x n_channels x n_timepoints]`
    pub trials: Array3<f64>,
    /// Binary class index per trial.
    pub labels: Vec<usize>,
    /// Original condition pair per trial.
    pub conditions: Vec<ConditionLabel>,
    pub sample_rate_hz: f64,
    /// `(t_start_s, t_end_s)` relative to stimulus onset.
    pub interval_s: (f64, f64),
}

impl TrialSet {
    pub fn n_trials(&self) -> usize {
        self.trials.shape()[0]
    }

    pub fn n_channels(&self) -> usize {
        self.trials.shape()[1]
    }

    pub fn n_timepoints(&self) -> usize {
        self.trials.shape()[2]
    }

    /// Trial count per class index.
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - ones, ones)
    }

    /// Fails unless both classes are present (required by every fit
    /// operation).
    pub fn require_both_classes(&self) -> Result<()> {
        let (n0, n1) = self.class_counts();
        if n0 == 0 || n1 == 0 {
            return Err(Error::SingleClass);
        }
        Ok(())
    }

    /// New trial set holding only the given trial indices, in order.
    pub fn subset(&self, indices: &[usize]) -> TrialSet {
        let (_, c, t) = self.trials.dim();
        let mut trials = Array3::zeros((indices.len(), c, t));
        let mut labels = Vec::with_capacity(indices.len());
        let mut conditions = Vec::with_capacity(indices.len());
        for (out, &i) in indices.iter().enumerate() {
            trials
                .index_axis_mut(ndarray::Axis(0), out)
                .assign(&self.trials.index_axis(ndarray::Axis(0), i));
            labels.push(self.labels[i]);
            conditions.push(self.conditions[i]);
        }
        TrialSet {
            trials,
            labels,
            conditions,
            sample_rate_hz: self.sample_rate_hz,
            interval_s: self.interval_s,
        }
    }
}

/// Re-label (and possibly filter) a trial set for one of the binary tasks.
/// Signal data is never modified; for a robot-filtered error task the
/// non-matching trials are dropped.
pub fn project_labels(ts: &TrialSet, task: Task) -> Result<TrialSet> {
    let keep: Vec<usize> = (0..ts.n_trials())
        .filter(|&i| task.class_of(&ts.conditions[i]).is_some())
        .collect();
    if keep.is_empty() {
        return Err(Error::SingleClass);
    }
    let mut out = ts.subset(&keep);
    for (label, cond) in out.labels.iter_mut().zip(&out.conditions) {
        *label = task.class_of(cond).expect("filtered above");
    }
    out.require_both_classes()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn cond(outcome: Outcome, robot: Robot) -> ConditionLabel {
        ConditionLabel { outcome, robot }
    }

    fn four_condition_set() -> TrialSet {
        let conditions = vec![
            cond(Outcome::Error, Robot::Nao),
            cond(Outcome::Correct, Robot::Nao),
            cond(Outcome::Error, Robot::Nohu),
            cond(Outcome::Correct, Robot::Nohu),
        ];
        let mut trials = Array3::zeros((4, 2, 3));
        for i in 0..4 {
            trials.index_axis_mut(ndarray::Axis(0), i).fill(i as f64);
        }
        TrialSet {
            trials,
            labels: vec![0; 4],
            conditions,
            sample_rate_hz: 250.0,
            interval_s: (0.0, 7.0),
        }
    }

    #[test]
    fn robot_task_projects_to_zero_zero_one_one() {
        let ts = four_condition_set();
        let projected = project_labels(&ts, Task::NaoVsNohu).unwrap();
        assert_eq!(projected.labels, vec![0, 0, 1, 1]);
        assert_eq!(projected.n_trials(), 4);
    }

    #[test]
    fn error_task_with_robot_filter_drops_other_robot() {
        let ts = four_condition_set();
        let projected = project_labels(
            &ts,
            Task::ErrorVsCorrect {
                robot: Some(Robot::Nao),
            },
        )
        .unwrap();
        assert_eq!(projected.n_trials(), 2);
        assert_eq!(projected.labels, vec![1, 0]);
        // data came along untouched
        assert_eq!(projected.trials[[0, 0, 0]], 0.0);
        assert_eq!(projected.trials[[1, 1, 2]], 1.0);
    }

    #[test]
    fn single_class_projection_is_rejected() {
        let mut ts = four_condition_set();
        for c in ts.conditions.iter_mut() {
            c.robot = Robot::Nao;
        }
        let err = project_labels(&ts, Task::NaoVsNohu).unwrap_err();
        assert!(matches!(err, Error::SingleClass));
    }

    #[test]
    fn projection_leaves_signal_untouched() {
        let ts = four_condition_set();
        let before: f64 = ts.trials.sum();
        let projected = project_labels(&ts, Task::NaoVsNohu).unwrap();
        assert_eq!(projected.trials.sum(), before);
    }

    #[test]
    fn recording_invariants_are_checked() {
        let data = Array2::zeros((2, 10));
        assert!(Recording::new(
            data.clone(),
            0.0,
            vec!["a".into(), "b".into()],
            vec![]
        )
        .is_err());
        assert!(Recording::new(
            data.clone(),
            250.0,
            vec!["a".into(), "a".into()],
            vec![]
        )
        .is_err());
        let bad_event = EventMarker {
            sample_index: 10,
            condition: cond(Outcome::Error, Robot::Nao),
        };
        assert!(Recording::new(
            data,
            250.0,
            vec!["a".into(), "b".into()],
            vec![bad_event]
        )
        .is_err());
    }
}
