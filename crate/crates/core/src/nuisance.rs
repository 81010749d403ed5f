//! Cross-fitted estimates of `mu0 = P(Y=1|T=0,X,A)`, `mu1 = P(Y=1|T=1,X,A)`
//! and `tau = mu1 - mu0`.
//!
//! Units are partitioned into folds; the prediction for a unit in fold `k`
//! uses only models fit on the other folds. Two estimators are provided:
//! exact frequency binning for discrete covariates and a logistic T-learner
//! fit by iteratively reweighted least squares. Externally supplied scores
//! can be passed through unchanged.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{AuditError, Result};

pub const DEFAULT_CLIP_EPS: f64 = 1e-4;
pub const IRLS_MAX_ITER: usize = 100;
pub const IRLS_TOL: f64 = 1e-8;
pub const IRLS_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Binning,
    Logistic,
    External,
}

impl std::str::FromStr for EstimatorKind {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binning" => Ok(EstimatorKind::Binning),
            "logistic" => Ok(EstimatorKind::Logistic),
            "external" => Ok(EstimatorKind::External),
            other => Err(AuditError::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceConfig {
    pub kind: EstimatorKind,
    pub n_folds: usize,
    pub seed: u64,
    /// Predictions are clipped to `[eps, 1 - eps]`.
    pub clip_eps: f64,
    /// Use the group label as a covariate.
    pub include_group: bool,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        NuisanceConfig {
            kind: EstimatorKind::Binning,
            n_folds: 2,
            seed: 0,
            clip_eps: DEFAULT_CLIP_EPS,
            include_group: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArmModel {
    /// Outcome counts `(n, n_y1)` per covariate cell.
    Frequencies(HashMap<Vec<u64>, (u32, u32)>),
    Logistic {
        mean: Vec<f64>,
        scale: Vec<f64>,
        coef: Vec<f64>,
    },
    /// Intercept-only fallback.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmFit {
    /// Predictions from this fit are used for units in `fold`.
    pub fold: usize,
    pub treatment: bool,
    pub model: ArmModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceModel {
    pub kind: EstimatorKind,
    pub fold_assignments: Vec<usize>,
    pub fits: Vec<ArmFit>,
    pub warnings: Vec<String>,
}

/// A random balanced partition of `n` units into `k` folds.
fn assign_folds(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    folds
}

/// `n_splits` independent fold partitions drawn from one seeded stream. The
/// first partition is the one [`fit_predict`] uses for the same seed.
pub fn resplit_bootstrap(n_units: usize, n_splits: usize, n_folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_splits == 0 {
        return Err(AuditError::Config("n_splits must be at least 1".into()));
    }
    check_folds(n_folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_splits).map(|_| assign_folds(n_units, n_folds, &mut rng)).collect())
}

fn check_folds(n_folds: usize) -> Result<()> {
    if n_folds < 2 {
        return Err(AuditError::Config(format!("n_folds must be at least 2, got {n_folds}")));
    }
    Ok(())
}

pub fn fit_predict(ds: &Dataset, cfg: &NuisanceConfig) -> Result<(Dataset, NuisanceModel)> {
    if cfg.kind == EstimatorKind::External {
        return fit_predict_with_folds(ds, cfg, &[]);
    }
    let folds = resplit_bootstrap(ds.len(), 1, cfg.n_folds, cfg.seed)?.remove(0);
    fit_predict_with_folds(ds, cfg, &folds)
}

/// Cross-fitted scores for a given fold partition.
pub fn fit_predict_with_folds(ds: &Dataset, cfg: &NuisanceConfig, folds: &[usize]) -> Result<(Dataset, NuisanceModel)> {
    if cfg.kind == EstimatorKind::External {
        if let Some(r) = ds.records().iter().find(|r| r.mu0_hat.is_none() || r.mu1_hat.is_none()) {
            return Err(AuditError::MissingScores(r.id.clone()));
        }
        let scores: Vec<(f64, f64)> = ds
            .records()
            .iter()
            .map(|r| (r.mu0_hat.unwrap(), r.mu1_hat.unwrap()))
            .collect();
        let model = NuisanceModel {
            kind: cfg.kind,
            fold_assignments: Vec::new(),
            fits: Vec::new(),
            warnings: Vec::new(),
        };
        return Ok((ds.with_scores(&scores)?, model));
    }
    check_folds(cfg.n_folds)?;
    if !(0.0..0.5).contains(&cfg.clip_eps) {
        return Err(AuditError::Config(format!("clip_eps must lie in [0, 0.5), got {}", cfg.clip_eps)));
    }
    if folds.len() != ds.len() {
        return Err(AuditError::Config(format!("{} fold labels for {} records", folds.len(), ds.len())));
    }
    if let Some(&f) = folds.iter().find(|&&f| f >= cfg.n_folds) {
        return Err(AuditError::Config(format!("fold label {f} out of range for {} folds", cfg.n_folds)));
    }
    ds.check_arms()?;

    let design = Design::new(ds, cfg.include_group);
    let cells: Vec<(usize, bool)> = (0..cfg.n_folds).flat_map(|f| [(f, false), (f, true)]).collect();
    let fitted: Vec<(ArmFit, Option<String>)> = cells
        .par_iter()
        .map(|&(fold, arm)| {
            let train: Vec<usize> = (0..ds.len())
                .filter(|&i| folds[i] != fold && ds.records()[i].treatment == arm)
                .collect();
            if train.is_empty() {
                return Err(AuditError::EmptyTrainingCell(format!(
                    "no training units with treatment={} outside fold {fold}",
                    u8::from(arm)
                )));
            }
            let (model, warning) = match cfg.kind {
                EstimatorKind::Binning => (fit_bins(ds, &design, &train), None),
                EstimatorKind::Logistic => fit_logistic(ds, &design, &train),
                EstimatorKind::External => unreachable!(),
            };
            let warning = warning.map(|w| format!("fold {fold}, treatment={}: {w}", u8::from(arm)));
            Ok((ArmFit { fold, treatment: arm, model }, warning))
        })
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let mut fits = Vec::new();
    for (fit, w) in fitted {
        if let Some(w) = w {
            log::warn!("{w}");
            warnings.push(w);
        }
        fits.push(fit);
    }

    let eps = cfg.clip_eps;
    let lookup = |fold: usize, arm: bool| &fits[2 * fold + usize::from(arm)].model;
    let scores = (0..ds.len())
        .map(|i| {
            let predict = |arm: bool| -> Result<f64> {
                let p = match lookup(folds[i], arm) {
                    ArmModel::Frequencies(table) => {
                        let key = design.key(i);
                        let (n, y) = table.get(&key).ok_or_else(|| {
                            AuditError::EmptyTrainingCell(format!(
                                "record `{}`: no treatment={} units with the same covariates outside fold {}",
                                ds.records()[i].id,
                                u8::from(arm),
                                folds[i]
                            ))
                        })?;
                        f64::from(*y) / f64::from(*n)
                    }
                    ArmModel::Logistic { mean, scale, coef } => {
                        let row = design.row(i);
                        let eta = coef[0]
                            + row
                                .iter()
                                .zip(mean.iter().zip(scale))
                                .zip(&coef[1..])
                                .map(|((x, (m, s)), b)| (x - m) / s * b)
                                .sum::<f64>();
                        sigmoid(eta)
                    }
                    ArmModel::Constant(p) => *p,
                };
                Ok(p.clamp(eps, 1.0 - eps))
            };
            Ok((predict(false)?, predict(true)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let model = NuisanceModel {
        kind: cfg.kind,
        fold_assignments: folds.to_vec(),
        fits,
        warnings,
    };
    Ok((ds.with_scores(&scores)?, model))
}

/// Covariate view of a dataset: features plus optional group indicators.
struct Design<'a> {
    ds: &'a Dataset,
    group_index: Option<HashMap<&'a str, usize>>,
    n_groups: usize,
}

impl<'a> Design<'a> {
    fn new(ds: &'a Dataset, include_group: bool) -> Self {
        let group_index =
            include_group.then(|| ds.groups().iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect());
        Design {
            ds,
            group_index,
            n_groups: ds.groups().len(),
        }
    }

    fn width(&self) -> usize {
        let groups = if self.group_index.is_some() { self.n_groups.saturating_sub(1) } else { 0 };
        self.ds.feature_names().len() + groups
    }

    fn key(&self, i: usize) -> Vec<u64> {
        let r = &self.ds.records()[i];
        let mut key: Vec<u64> = r.features.iter().map(|x| (x + 0.0).to_bits()).collect();
        if let Some(idx) = &self.group_index {
            key.push(idx[r.group.as_str()] as u64);
        }
        key
    }

    /// Features followed by one-hot indicators for all groups but the first.
    fn row(&self, i: usize) -> Vec<f64> {
        let r = &self.ds.records()[i];
        let mut row = r.features.clone();
        if let Some(idx) = &self.group_index {
            let g = idx[r.group.as_str()];
            row.extend((1..self.n_groups).map(|k| if k == g { 1.0 } else { 0.0 }));
        }
        row
    }
}

fn fit_bins(ds: &Dataset, design: &Design, train: &[usize]) -> ArmModel {
    let mut table: HashMap<Vec<u64>, (u32, u32)> = HashMap::new();
    for &i in train {
        let e = table.entry(design.key(i)).or_default();
        e.0 += 1;
        e.1 += u32::from(ds.records()[i].outcome);
    }
    ArmModel::Frequencies(table)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn fit_logistic(ds: &Dataset, design: &Design, train: &[usize]) -> (ArmModel, Option<String>) {
    let n = train.len() as f64;
    let y: Vec<f64> = train.iter().map(|&i| f64::from(u8::from(ds.records()[i].outcome))).collect();
    let ybar = y.iter().sum::<f64>() / n;
    let fallback = |why: String| (ArmModel::Constant(ybar), Some(format!("{why}; using intercept-only fit")));

    let p = design.width();
    let rows: Vec<Vec<f64>> = train.iter().map(|&i| design.row(i)).collect();
    let mut mean = vec![0.0; p];
    for r in &rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x / n;
        }
    }
    let mut scale = vec![0.0; p];
    for r in &rows {
        for ((s, x), m) in scale.iter_mut().zip(r).zip(&mean) {
            *s += (x - m).powi(2) / n;
        }
    }
    for s in scale.iter_mut() {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let x = DMatrix::from_fn(rows.len(), p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            (rows[i][j - 1] - mean[j - 1]) / scale[j - 1]
        }
    });

    let mut beta = DVector::zeros(p + 1);
    for _ in 0..IRLS_MAX_ITER {
        let eta = &x * &beta;
        let prob = eta.map(sigmoid);
        let w = prob.map(|q| q * (1.0 - q));
        let resid = DVector::from_iterator(y.len(), y.iter().zip(prob.iter()).map(|(y, q)| y - q));
        let mut h = x.transpose() * DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * w[i]);
        for k in 0..=p {
            h[(k, k)] += IRLS_RIDGE;
        }
        let g = x.transpose() * resid;
        let Some(chol) = h.cholesky() else {
            return fallback("IRLS normal equations not positive definite".into());
        };
        let step = chol.solve(&g);
        if step.iter().any(|s| !s.is_finite()) {
            return fallback("IRLS produced non-finite step".into());
        }
        beta += &step;
        if step.amax() <= IRLS_TOL {
            return (
                ArmModel::Logistic {
                    mean,
                    scale,
                    coef: beta.iter().copied().collect(),
                },
                None,
            );
        }
    }
    fallback(format!("IRLS did not converge in {IRLS_MAX_ITER} iterations"))
}
