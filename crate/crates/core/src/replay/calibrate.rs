//! Held-out (u, a) grid calibration and the baseline comparison.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::UaProfile;

use super::{classify_subgroup, fit_linear_baseline, linear_predict, predict, JudgedCase, ReplayCase, ReplayError, Subgroup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationGrid {
    pub u: Vec<f64>,
    pub a: Vec<f64>,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        CalibrationGrid {
            u: vec![0.005, 0.01, 0.02, 0.035, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.4, 0.6, 0.8],
            a: vec![0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0, 1.2, 1.5],
        }
    }
}

impl CalibrationGrid {
    pub fn new(u: Vec<f64>, a: Vec<f64>) -> Result<Self, ReplayError> {
        let grid = CalibrationGrid { u, a };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), ReplayError> {
        for (name, axis) in [("u", &self.u), ("a", &self.a)] {
            if axis.is_empty() {
                return Err(ReplayError::Grid(format!("{name} grid is empty")));
            }
            if axis.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(ReplayError::Grid(format!("{name} grid values must be finite and non-negative")));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ReplayError::Grid(format!("{name} grid must be strictly increasing")));
            }
        }
        Ok(())
    }

    /// Cells in tie-break order: u ascending, then a ascending.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.u
            .iter()
            .flat_map(|&u| self.a.iter().map(move |&a| (u, a)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldKey {
    Group,
    Topic,
}

impl FoldKey {
    pub fn of<'a>(&self, case: &'a ReplayCase) -> &'a str {
        match self {
            FoldKey::Group => &case.group,
            FoldKey::Topic => &case.topic,
        }
    }
}

impl FromStr for FoldKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "group" => Ok(FoldKey::Group),
            "topic" => Ok(FoldKey::Topic),
            other => Err(format!("unknown fold key {other:?} (expected group or topic)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldAssignment {
    pub folds: usize,
    pub fold_of: Vec<usize>,
    pub warning: Option<String>,
}

/// Shuffles the distinct keys with a seeded permutation and deals them
/// round-robin, so every case sharing a key lands in the same fold.
pub fn assign_folds(keys: &[&str], folds: usize, seed: u64) -> Result<FoldAssignment, ReplayError> {
    if folds == 0 {
        return Err(ReplayError::Folds("fold count must be positive".into()));
    }
    let distinct: BTreeSet<&str> = keys.iter().copied().collect();
    if distinct.is_empty() {
        return Err(ReplayError::Empty);
    }
    let mut order: Vec<&str> = distinct.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (k, warning) = if order.len() < folds {
        (
            order.len(),
            Some(format!("only {} distinct keys; using {} folds instead of {folds}", order.len(), order.len())),
        )
    } else {
        (folds, None)
    };
    let fold_of = keys
        .iter()
        .map(|key| order.iter().position(|k| k == key).expect("key is present") % k)
        .collect();
    Ok(FoldAssignment {
        folds: k,
        fold_of,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub u: f64,
    pub a: f64,
    pub train_rmse: f64,
    pub heldout_rmse: f64,
    pub n_train: usize,
    pub n_heldout: usize,
    pub beta: f64,
    pub linear_rmse: f64,
    pub no_change_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeldOutPrediction {
    pub fold: usize,
    pub be: f64,
    pub linear: f64,
    pub no_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceCell {
    pub u: f64,
    pub a: f64,
    pub rmse: f64,
    /// RMSE minus the smallest RMSE on the surface.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub folds: Vec<FoldReport>,
    /// Held-out predictions, one per input case in input order.
    pub predictions: Vec<HeldOutPrediction>,
    /// Pooled RMSE over all cases for every grid cell.
    pub surface: Vec<SurfaceCell>,
    pub warnings: Vec<String>,
}

fn sq(x: f64) -> f64 {
    x * x
}

fn root_mean(sse: f64, n: usize) -> f64 {
    (sse / n as f64).sqrt()
}

/// Selects (u, a) per fold on training RMSE and scores it on the held-out fold,
/// alongside the no-change and linear baselines.
pub fn calibrate(
    cases: &[JudgedCase],
    keys: &[&str],
    grid: &CalibrationGrid,
    folds: usize,
    seed: u64,
) -> Result<CalibrationReport, ReplayError> {
    grid.validate()?;
    if cases.len() != keys.len() {
        return Err(ReplayError::LengthMismatch {
            predictions: keys.len(),
            observations: cases.len(),
        });
    }
    let assignment = assign_folds(keys, folds, seed)?;
    if assignment.folds < 2 {
        return Err(ReplayError::Folds("need at least two distinct keys".into()));
    }
    let k = assignment.folds;
    let mut warnings: Vec<String> = assignment.warning.iter().cloned().collect();

    let cells = grid.cells();
    let mut preds = Vec::with_capacity(cells.len());
    for &(u, a) in &cells {
        let profile = UaProfile::new(u, a)?;
        let row = cases
            .iter()
            .map(|c| predict(c, &profile))
            .collect::<Result<Vec<f64>, _>>()?;
        preds.push(row);
    }
    // sse[cell][fold]
    let sse: Vec<Vec<f64>> = preds
        .iter()
        .map(|row| {
            let mut per_fold = vec![0.0; k];
            for (i, p) in row.iter().enumerate() {
                per_fold[assignment.fold_of[i]] += sq(p - cases[i].observed);
            }
            per_fold
        })
        .collect();
    let mut n_fold = vec![0usize; k];
    for &f in &assignment.fold_of {
        n_fold[f] += 1;
    }

    let mut reports = Vec::with_capacity(k);
    let mut predictions: Vec<Option<HeldOutPrediction>> = vec![None; cases.len()];
    for fold in 0..k {
        let n_train = cases.len() - n_fold[fold];
        let mut best: Option<(usize, f64)> = None;
        for (ci, per_fold) in sse.iter().enumerate() {
            let train: f64 = per_fold
                .iter()
                .enumerate()
                .filter(|&(f, _)| f != fold)
                .map(|(_, s)| s)
                .sum();
            let r = root_mean(train, n_train);
            if best.is_none_or(|(_, b)| r < b) {
                best = Some((ci, r));
            }
        }
        let (ci, train_rmse) = best.expect("grid is non-empty");
        let (u, a) = cells[ci];

        let training: Vec<(f64, f64)> = cases
            .iter()
            .zip(&assignment.fold_of)
            .filter(|&(_, &f)| f != fold)
            .map(|(c, _)| (c.net_evidence, c.delta()))
            .collect();
        let fit = fit_linear_baseline(&training);
        if let Some(w) = fit.warning {
            warnings.push(format!("fold {fold}: {w}"));
        }

        let (mut se_be, mut se_lin, mut se_nc) = (0.0, 0.0, 0.0);
        for (i, c) in cases.iter().enumerate() {
            if assignment.fold_of[i] != fold {
                continue;
            }
            let be = preds[ci][i];
            let linear = linear_predict(c.initial, fit.beta, c.net_evidence);
            let no_change = c.initial;
            se_be += sq(be - c.observed);
            se_lin += sq(linear - c.observed);
            se_nc += sq(no_change - c.observed);
            predictions[i] = Some(HeldOutPrediction {
                fold,
                be,
                linear,
                no_change,
            });
        }
        reports.push(FoldReport {
            fold,
            u,
            a,
            train_rmse,
            heldout_rmse: root_mean(se_be, n_fold[fold]),
            n_train,
            n_heldout: n_fold[fold],
            beta: fit.beta,
            linear_rmse: root_mean(se_lin, n_fold[fold]),
            no_change_rmse: root_mean(se_nc, n_fold[fold]),
        });
    }

    let pooled: Vec<f64> = sse.iter().map(|f| root_mean(f.iter().sum(), cases.len())).collect();
    let min = pooled.iter().copied().fold(f64::INFINITY, f64::min);
    let surface = cells
        .iter()
        .zip(&pooled)
        .map(|(&(u, a), &rmse)| SurfaceCell {
            u,
            a,
            rmse,
            excess: rmse - min,
        })
        .collect();

    Ok(CalibrationReport {
        folds: reports,
        predictions: predictions
            .into_iter()
            .map(|p| p.expect("every case is held out once"))
            .collect(),
        surface,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupCalibration {
    pub subgroup: Subgroup,
    /// Indices into the full case list.
    pub indices: Vec<usize>,
    pub report: Option<CalibrationReport>,
    pub warning: Option<String>,
}

pub fn subgroup_labels(cases: &[JudgedCase], eps_weak: f64) -> Vec<Subgroup> {
    cases
        .iter()
        .map(|c| classify_subgroup(c.delta(), c.net_evidence, eps_weak))
        .collect()
}

/// Calibrates each outcome-conditioned subgroup on its own. Subgroups that
/// are empty or span fewer than two keys get no report.
pub fn calibrate_by_subgroup(
    cases: &[JudgedCase],
    keys: &[&str],
    grid: &CalibrationGrid,
    folds: usize,
    seed: u64,
    eps_weak: f64,
) -> Result<Vec<SubgroupCalibration>, ReplayError> {
    let labels = subgroup_labels(cases, eps_weak);
    let mut out = Vec::new();
    for subgroup in Subgroup::ALL {
        let indices: Vec<usize> = (0..cases.len()).filter(|&i| labels[i] == subgroup).collect();
        if indices.is_empty() {
            continue;
        }
        let sub_cases: Vec<JudgedCase> = indices.iter().map(|&i| cases[i].clone()).collect();
        let sub_keys: Vec<&str> = indices.iter().map(|&i| keys[i]).collect();
        let (report, warning) = match calibrate(&sub_cases, &sub_keys, grid, folds, seed) {
            Ok(r) => (Some(r), None),
            Err(ReplayError::Folds(why)) => (None, Some(format!("{}: {why}", subgroup.label()))),
            Err(e) => return Err(e),
        };
        out.push(SubgroupCalibration {
            subgroup,
            indices,
            report,
            warning,
        });
    }
    Ok(out)
}

/// One row of the baseline comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub group: String,
    pub n: usize,
    pub mean_abs_delta: f64,
    pub no_change: f64,
    pub linear: Option<f64>,
    pub be: Option<f64>,
    /// Linear minus BE.
    pub gain: Option<f64>,
}

fn row(group: &str, cases: &[&JudgedCase], report: Option<&CalibrationReport>) -> SummaryRow {
    let n = cases.len();
    let mean_abs_delta = cases.iter().map(|c| c.delta().abs()).sum::<f64>() / n as f64;
    let no_change = root_mean(cases.iter().map(|c| sq(c.delta())).sum(), n);
    let (linear, be) = match report {
        Some(r) => {
            let lin = cases
                .iter()
                .zip(&r.predictions)
                .map(|(c, p)| sq(p.linear - c.observed))
                .sum();
            let be = cases
                .iter()
                .zip(&r.predictions)
                .map(|(c, p)| sq(p.be - c.observed))
                .sum();
            (Some(root_mean(lin, n)), Some(root_mean(be, n)))
        }
        None => (None, None),
    };
    SummaryRow {
        group: group.to_string(),
        n,
        mean_abs_delta,
        no_change,
        linear,
        be,
        gain: linear.zip(be).map(|(l, b)| l - b),
    }
}

/// "All participants" from the pooled calibration, then one row per
/// subgroup from its own calibration.
pub fn summarize(cases: &[JudgedCase], pooled: &CalibrationReport, subgroups: &[SubgroupCalibration]) -> Vec<SummaryRow> {
    let all: Vec<&JudgedCase> = cases.iter().collect();
    let mut rows = vec![row("All participants", &all, Some(pooled))];
    for s in subgroups {
        let members: Vec<&JudgedCase> = s.indices.iter().map(|&i| &cases[i]).collect();
        rows.push(row(s.subgroup.label(), &members, s.report.as_ref()));
    }
    rows
}
