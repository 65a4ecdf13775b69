use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Initial and final stances of both agents in one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStances {
    pub pro_init: f64,
    pub con_init: f64,
    pub pro_final: f64,
    pub con_final: f64,
}

impl TrialStances {
    pub fn initial_gap(&self) -> f64 {
        (self.pro_init - self.con_init).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub final_pro: f64,
    pub final_con: f64,
    pub abs_final_gap: f64,
    pub gap_reduction: f64,
    pub mean_abs_shift: f64,
    pub centre_shift: f64,
    pub crossing: f64,
}

/// Trial-averaged metrics. `convergence` is the same quantity as
/// `gap_reduction`, kept under both names for the two report layouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub trials: usize,
    pub final_pro: f64,
    pub final_con: f64,
    pub abs_final_gap: f64,
    pub gap_reduction: f64,
    pub mean_abs_shift: f64,
    pub centre_shift: f64,
    pub crossing_rate: f64,
    pub convergence: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no trials to summarise")]
    Empty,
    #[error("trial {0} has a non-finite stance")]
    NotFinite(usize),
}

fn sign3(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

pub fn trial_metrics(t: &TrialStances) -> TrialMetrics {
    let abs_final_gap = (t.pro_final - t.con_final).abs();
    let pro_shift = t.pro_final - t.pro_init;
    let con_shift = t.con_final - t.con_init;
    let crossed = sign3(t.pro_final) != sign3(t.pro_init) || sign3(t.con_final) != sign3(t.con_init);
    TrialMetrics {
        final_pro: t.pro_final,
        final_con: t.con_final,
        abs_final_gap,
        gap_reduction: t.initial_gap() - abs_final_gap,
        mean_abs_shift: (pro_shift.abs() + con_shift.abs()) / 2.0,
        // inward movement: pro moving down and con moving up both count positive
        centre_shift: (-pro_shift + con_shift) / 2.0,
        crossing: if crossed { 1.0 } else { 0.0 },
    }
}

pub fn compute_metrics(trials: &[TrialStances]) -> Result<MetricSummary, MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sum = [0.0f64; 7];
    for (i, t) in trials.iter().enumerate() {
        if ![t.pro_init, t.con_init, t.pro_final, t.con_final]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(MetricsError::NotFinite(i));
        }
        let m = trial_metrics(t);
        for (acc, v) in sum.iter_mut().zip([
            m.final_pro,
            m.final_con,
            m.abs_final_gap,
            m.gap_reduction,
            m.mean_abs_shift,
            m.centre_shift,
            m.crossing,
        ]) {
            *acc += v;
        }
    }
    let n = trials.len() as f64;
    let [final_pro, final_con, abs_final_gap, gap_reduction, mean_abs_shift, centre_shift, crossing_rate] =
        sum.map(|s| s / n);
    Ok(MetricSummary {
        trials: trials.len(),
        final_pro,
        final_con,
        abs_final_gap,
        gap_reduction,
        mean_abs_shift,
        centre_shift,
        crossing_rate,
        convergence: gap_reduction,
    })
}
