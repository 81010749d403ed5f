//! Threshold sweeps: disparity curves, robust ROC / xROC bands, xAUC bounds.
//!
//! Every band is indexed by a threshold `theta` with policy
//! `Z = 1[tau_hat >= theta]`. The default sweep is every distinct score,
//! descending, bracketed by `+inf` (nobody treated) and `-inf` (everybody
//! treated). Thresholds at which a group is degenerate are kept as gaps.
//!
//! The upper and lower curves are envelopes: each point is attained by
//! some joint, but the curve as a whole need not be the ROC of any single
//! joint.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{AuditError, Result};
use crate::identification::{bounds, check_budget, CellSums, GroupBounds, GroupStats, GroupUnits, Metric, ScoredUnit};
use crate::support::disparity_from_bounds;

/// Common grids built by [`average_bands`] are thinned to at most this many thresholds.
pub const MAX_AVERAGE_GRID: usize = 2000;

const ENDPOINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandKind {
    #[serde(rename = "ROC")]
    Roc,
    #[serde(rename = "xROC")]
    Xroc,
    #[serde(rename = "TPR_disparity")]
    TprDisparity,
    #[serde(rename = "TNR_disparity")]
    TnrDisparity,
}

impl BandKind {
    pub fn is_roc(self) -> bool {
        matches!(self, BandKind::Roc | BandKind::Xroc)
    }
}

impl std::fmt::Display for BandKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BandKind::Roc => "ROC",
            BandKind::Xroc => "xROC",
            BandKind::TprDisparity => "TPR_disparity",
            BandKind::TnrDisparity => "TNR_disparity",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

/// One threshold of a band; `None` marks a gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub theta: f64,
    pub lower: Option<Point>,
    pub upper: Option<Point>,
}

impl BandPoint {
    pub fn is_gap(&self) -> bool {
        self.lower.is_none() || self.upper.is_none()
    }
}

/// ROC-type bands use `x = 1 - TNR`, `y = TPR`. Disparity bands use
/// `x = theta` and `y` = the disparity endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBand {
    pub kind: BandKind,
    pub groups: Vec<String>,
    pub budget: f64,
    /// Ordered by descending threshold.
    pub points: Vec<BandPoint>,
}

impl CurveBand {
    pub fn thresholds(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.theta).collect()
    }

    /// Thresholds recorded as gaps.
    pub fn gaps(&self) -> Vec<f64> {
        self.points.iter().filter(|p| p.is_gap()).map(|p| p.theta).collect()
    }

    pub fn lower_curve(&self) -> Vec<Point> {
        self.points.iter().filter(|p| !p.is_gap()).filter_map(|p| p.lower).collect()
    }

    pub fn upper_curve(&self) -> Vec<Point> {
        self.points.iter().filter(|p| !p.is_gap()).filter_map(|p| p.upper).collect()
    }

    /// Band value at `theta` read as a step function: the point at the
    /// smallest recorded threshold `>= theta`.
    pub fn step_at(&self, theta: f64) -> Option<&BandPoint> {
        // thresholds descend, so those >= theta form a prefix
        let k = self.points.partition_point(|p| p.theta >= theta);
        k.checked_sub(1).map(|i| &self.points[i])
    }

    pub fn file_stem(&self) -> String {
        let kind = match self.kind {
            BandKind::Roc => "ROC",
            BandKind::Xroc => "xROC",
            BandKind::TprDisparity => "TPR_disparity",
            BandKind::TnrDisparity => "TNR_disparity",
        };
        format!("{kind}_{}_B{}", self.groups.join("_"), self.budget)
    }

    /// Writes `theta,x_lower,y_lower,x_upper,y_upper,gap_flag`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["theta", "x_lower", "y_lower", "x_upper", "y_upper", "gap_flag"])?;
        for p in &self.points {
            let theta = p.theta.to_string();
            match (p.lower, p.upper) {
                (Some(lo), Some(hi)) => w.write_record([
                    theta,
                    lo.x.to_string(),
                    lo.y.to_string(),
                    hi.x.to_string(),
                    hi.y.to_string(),
                    "0".into(),
                ])?,
                _ => w.write_record([theta, String::new(), String::new(), String::new(), String::new(), "1".into()])?,
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Sorted prefix/suffix sums of one group's scores: group statistics for
/// any threshold policy in `O(log n)`.
#[derive(Debug, Clone)]
pub struct ThresholdSweep {
    group: String,
    budget: f64,
    /// Scores in descending order.
    taus: Vec<f64>,
    /// `prefix[k]`: sums over the `k` highest scores; `suffix[k]`: the rest.
    prefix: Vec<CellSums>,
    suffix: Vec<CellSums>,
}

impl ThresholdSweep {
    /// Uses each unit's `tau` both as its score and its effect; the
    /// units' `assigned` flags are ignored.
    pub fn new(units: &GroupUnits, budget: f64) -> Result<Self> {
        check_budget(budget)?;
        if units.is_empty() {
            return Err(AuditError::GroupNotFound(units.group.clone()));
        }
        let mut sorted: Vec<&ScoredUnit> = units.units.iter().collect();
        sorted.sort_by(|a, b| b.tau.total_cmp(&a.tau));
        let n = sorted.len();
        let mut prefix = vec![CellSums::default(); n + 1];
        let mut suffix = vec![CellSums::default(); n + 1];
        for (i, u) in sorted.iter().enumerate() {
            prefix[i + 1] = prefix[i];
            prefix[i + 1].add(u.weight, u.tau, u.clip(budget), u.floor(budget));
        }
        for (i, u) in sorted.iter().enumerate().rev() {
            suffix[i] = suffix[i + 1];
            suffix[i].add(u.weight, u.tau, u.clip(budget), u.floor(budget));
        }
        Ok(ThresholdSweep {
            group: units.group.clone(),
            budget,
            taus: sorted.iter().map(|u| u.tau).collect(),
            prefix,
            suffix,
        })
    }

    pub fn from_dataset(ds: &Dataset, group: &str, budget: f64) -> Result<Self> {
        let z = vec![false; ds.len()];
        Self::new(&GroupUnits::from_dataset(ds, &z, group)?, budget)
    }

    pub fn group(&self) -> &str {
        &self.group
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Distinct scores, descending.
    pub fn distinct_scores(&self) -> Vec<f64> {
        let mut v = self.taus.clone();
        v.dedup();
        v
    }

    /// Number of units with `tau >= theta`.
    pub fn treated(&self, theta: f64) -> usize {
        self.taus.partition_point(|&t| t >= theta)
    }

    pub fn stats(&self, theta: f64) -> GroupStats {
        let k = self.treated(theta);
        GroupStats::from_sums(&self.group, self.taus.len(), self.budget, self.suffix[k], self.prefix[k])
    }

    pub fn bounds(&self, theta: f64) -> Result<GroupBounds> {
        bounds(&self.stats(theta))
    }

    // Degenerate thresholds become `None`; anything else propagates.
    fn bounds_or_gap(&self, theta: f64) -> Result<Option<GroupBounds>> {
        match self.bounds(theta) {
            Ok(b) => Ok(Some(b)),
            Err(AuditError::DegenerateGroup { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// `+inf`, the distinct scores of all sweeps in descending order, `-inf`.
pub fn default_thresholds(sweeps: &[&ThresholdSweep]) -> Vec<f64> {
    let mut v: Vec<f64> = sweeps.iter().flat_map(|s| s.taus.iter().copied()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    let mut out = Vec::with_capacity(v.len() + 2);
    out.push(f64::INFINITY);
    out.extend(v.into_iter().filter(|t| t.is_finite()));
    out.push(f64::NEG_INFINITY);
    out
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(AuditError::Config("threshold list is empty".into()));
    }
    if thresholds.iter().any(|t| t.is_nan()) {
        return Err(AuditError::Config("threshold list contains NaN".into()));
    }
    Ok(())
}

// Thresholds sorted descending and deduplicated.
fn ordered(thresholds: &[f64]) -> Vec<f64> {
    let mut v = thresholds.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    v
}

fn check_same_budget(a: &ThresholdSweep, b: &ThresholdSweep) -> Result<()> {
    if a.budget != b.budget {
        return Err(AuditError::MismatchedBands(format!(
            "sweeps for `{}` and `{}` use budgets {} and {}",
            a.group, b.group, a.budget, b.budget
        )));
    }
    Ok(())
}

/// Band of `metric_a - metric_b` over the thresholds.
pub fn disparity_band(a: &ThresholdSweep, b: &ThresholdSweep, metric: Metric, thresholds: &[f64]) -> Result<CurveBand> {
    check_thresholds(thresholds)?;
    check_same_budget(a, b)?;
    if a.group == b.group {
        return Err(AuditError::Config(format!("disparity needs two distinct groups, got `{}` twice", a.group)));
    }
    let mut points = Vec::with_capacity(thresholds.len());
    for theta in ordered(thresholds) {
        let point = match (a.bounds_or_gap(theta)?, b.bounds_or_gap(theta)?) {
            (Some(ba), Some(bb)) => {
                let d = disparity_from_bounds(&ba, &bb, metric);
                BandPoint {
                    theta,
                    lower: Some(Point { x: theta, y: d.lower }),
                    upper: Some(Point { x: theta, y: d.upper }),
                }
            }
            _ => BandPoint { theta, lower: None, upper: None },
        };
        points.push(point);
    }
    Ok(CurveBand {
        kind: match metric {
            Metric::Tpr => BandKind::TprDisparity,
            Metric::Tnr => BandKind::TnrDisparity,
        },
        groups: vec![a.group.clone(), b.group.clone()],
        budget: a.budget,
        points,
    })
}

/// xROC band: TPR bounds of `a` against FPR bounds of `b`; with `a == b`
/// this is the ROC band of `a`.
pub fn xroc_band(a: &ThresholdSweep, b: &ThresholdSweep, thresholds: &[f64]) -> Result<CurveBand> {
    check_thresholds(thresholds)?;
    check_same_budget(a, b)?;
    let same = a.group == b.group;
    let mut points = Vec::with_capacity(thresholds.len());
    for theta in ordered(thresholds) {
        let ba = a.bounds_or_gap(theta)?;
        let bb = if same { ba.clone() } else { b.bounds_or_gap(theta)? };
        let point = match (ba, bb) {
            (Some(ba), Some(bb)) => BandPoint {
                theta,
                lower: Some(Point { x: 1.0 - bb.tnr.lower, y: ba.tpr.lower }),
                upper: Some(Point { x: 1.0 - bb.tnr.upper, y: ba.tpr.upper }),
            },
            _ => BandPoint { theta, lower: None, upper: None },
        };
        points.push(point);
    }
    Ok(CurveBand {
        kind: if same { BandKind::Roc } else { BandKind::Xroc },
        groups: if same { vec![a.group.clone()] } else { vec![a.group.clone(), b.group.clone()] },
        budget: a.budget,
        points,
    })
}

pub fn roc_band(a: &ThresholdSweep, thresholds: &[f64]) -> Result<CurveBand> {
    xroc_band(a, a, thresholds)
}

/// Disparity curve on a scored dataset; `thresholds = None` uses the
/// default sweep over both groups' scores.
pub fn disparity_curve(
    ds: &Dataset,
    a: &str,
    b: &str,
    metric: Metric,
    budget: f64,
    thresholds: Option<&[f64]>,
) -> Result<CurveBand> {
    let sa = ThresholdSweep::from_dataset(ds, a, budget)?;
    let sb = ThresholdSweep::from_dataset(ds, b, budget)?;
    let grid = thresholds.map_or_else(|| default_thresholds(&[&sa, &sb]), <[f64]>::to_vec);
    disparity_band(&sa, &sb, metric, &grid)
}

pub fn robust_roc(ds: &Dataset, a: &str, budget: f64, thresholds: Option<&[f64]>) -> Result<CurveBand> {
    let sa = ThresholdSweep::from_dataset(ds, a, budget)?;
    let grid = thresholds.map_or_else(|| default_thresholds(&[&sa]), <[f64]>::to_vec);
    roc_band(&sa, &grid)
}

pub fn robust_xroc(ds: &Dataset, a: &str, b: &str, budget: f64, thresholds: Option<&[f64]>) -> Result<CurveBand> {
    let sa = ThresholdSweep::from_dataset(ds, a, budget)?;
    let sb = ThresholdSweep::from_dataset(ds, b, budget)?;
    let grid = thresholds.map_or_else(|| default_thresholds(&[&sa, &sb]), <[f64]>::to_vec);
    xroc_band(&sa, &sb, &grid)
}

/// Trapezoid area under a curve running from (0,0) to (1,1). Points are
/// stably sorted by `x`, so vertical runs keep their sweep order.
pub fn curve_area(curve: &[Point]) -> Result<f64> {
    let near = |p: &Point, x: f64, y: f64| (p.x - x).abs() <= ENDPOINT_TOL && (p.y - y).abs() <= ENDPOINT_TOL;
    let mut pts = curve.to_vec();
    if pts.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(AuditError::InvalidBand("non-finite curve point".into()));
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    match (pts.first(), pts.last()) {
        (Some(first), Some(last)) if near(first, 0.0, 0.0) && near(last, 1.0, 1.0) => {}
        _ => return Err(AuditError::InvalidBand("curve must run from (0,0) to (1,1)".into())),
    }
    Ok(pts.windows(2).map(|w| (w[1].x - w[0].x) * (w[0].y + w[1].y) / 2.0).sum())
}

/// `(area under lower curve, area under upper curve)` of a ROC or xROC band.
pub fn xauc_bounds(band: &CurveBand) -> Result<(f64, f64)> {
    if !band.kind.is_roc() {
        return Err(AuditError::InvalidBand(format!("xAUC needs a ROC or xROC band, got {}", band.kind)));
    }
    let lo = curve_area(&band.lower_curve())?;
    let hi = curve_area(&band.upper_curve())?;
    if lo > hi + ENDPOINT_TOL {
        return Err(AuditError::InvalidBand(format!("lower area {lo} exceeds upper area {hi}")));
    }
    Ok((lo, hi))
}

/// Distinct values, descending, thinned to at most [`MAX_AVERAGE_GRID`]
/// evenly spaced ranks (the extremes are kept).
pub fn thinned_grid(values: &[f64]) -> Vec<f64> {
    let v = ordered(values);
    if v.len() <= MAX_AVERAGE_GRID {
        return v;
    }
    let last = v.len() - 1;
    let mut out: Vec<f64> = (0..MAX_AVERAGE_GRID)
        .map(|i| v[i * last / (MAX_AVERAGE_GRID - 1)])
        .collect();
    out.dedup();
    out
}

/// Union of the bands' thresholds, thinned by [`thinned_grid`].
pub fn common_grid(bands: &[CurveBand]) -> Vec<f64> {
    let all: Vec<f64> = bands.iter().flat_map(|b| b.points.iter().map(|p| p.theta)).collect();
    thinned_grid(&all)
}

/// Pointwise mean of bands over a common threshold grid. Each band is read
/// as a step function ([`CurveBand::step_at`]); bands with a gap at a
/// threshold are left out of that threshold's mean, and a threshold where
/// every band has a gap stays a gap.
pub fn average_bands(bands: &[CurveBand], grid: Option<&[f64]>) -> Result<CurveBand> {
    let first = bands
        .first()
        .ok_or_else(|| AuditError::MismatchedBands("no bands to average".into()))?;
    for b in &bands[1..] {
        if b.kind != first.kind || b.groups != first.groups || b.budget != first.budget {
            return Err(AuditError::MismatchedBands(format!(
                "{} {:?} B={} vs {} {:?} B={}",
                first.kind, first.groups, first.budget, b.kind, b.groups, b.budget
            )));
        }
    }
    let grid = grid.map_or_else(|| common_grid(bands), ordered);
    let points = grid
        .into_iter()
        .map(|theta| {
            let mut n = 0usize;
            let mut sum = [0.0; 4];
            for b in bands {
                if let Some(BandPoint { lower: Some(lo), upper: Some(hi), .. }) = b.step_at(theta) {
                    n += 1;
                    sum[0] += lo.x;
                    sum[1] += lo.y;
                    sum[2] += hi.x;
                    sum[3] += hi.y;
                }
            }
            if n == 0 {
                return BandPoint { theta, lower: None, upper: None };
            }
            let m = n as f64;
            // disparity bands keep x = theta exactly
            let x_of = |s: f64| if first.kind.is_roc() { s / m } else { theta };
            BandPoint {
                theta,
                lower: Some(Point { x: x_of(sum[0]), y: sum[1] / m }),
                upper: Some(Point { x: x_of(sum[2]), y: sum[3] / m }),
            }
        })
        .collect();
    Ok(CurveBand {
        kind: first.kind,
        groups: first.groups.clone(),
        budget: first.budget,
        points,
    })
}
