//! Point identification of group TPR/TNR under monotone treatment response,
//! and sharp interval bounds when at most `B` anti-responder mass is allowed
//! per covariate cell.
//!
//! Everything here works on [`ScoredUnit`]s: a unit (or a population cell)
//! with a weight, an effect score `tau`, the two outcome probabilities and
//! its policy assignment. Sample data uses unit weights; population-level
//! callers pass cell probabilities as weights.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{AuditError, Result};

/// Denominators below this are treated as degenerate (no responder or no
/// non-responder mass in the group).
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Fraction of negative effect scores above which a monotonicity warning is raised.
pub const NEGATIVE_TAU_WARN_FRACTION: f64 = 0.05;

const ETA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Tpr,
    Tnr,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Tpr => write!(f, "TPR"),
            Metric::Tnr => write!(f, "TNR"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredUnit {
    pub weight: f64,
    pub tau: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub assigned: bool,
}

impl ScoredUnit {
    pub fn new(tau: f64, mu0: f64, mu1: f64, assigned: bool) -> Self {
        ScoredUnit {
            weight: 1.0,
            tau,
            mu0,
            mu1,
            assigned,
        }
    }

    /// Largest anti-responder probability compatible with the observables:
    /// `min(P(Y=1|T=0), P(Y=0|T=1))`.
    pub fn cap(&self) -> f64 {
        self.mu0.min(1.0 - self.mu1).max(0.0)
    }

    /// `min(B, mu0, 1 - mu1)`.
    pub fn clip(&self, budget: f64) -> f64 {
        budget.min(self.cap())
    }

    /// Smallest admissible `eta`: responder mass `tau + eta` cannot be
    /// negative, so `eta >= -tau`. Clamped to [`clip`](Self::clip) when the
    /// data contradict the budget (`-tau > B`). Zero whenever `tau >= 0`.
    pub fn floor(&self, budget: f64) -> f64 {
        (-self.tau).max(0.0).min(self.clip(budget))
    }
}

/// The scored units of one group under a fixed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupUnits {
    pub group: String,
    pub units: Vec<ScoredUnit>,
}

impl GroupUnits {
    pub fn new(group: impl Into<String>, units: Vec<ScoredUnit>) -> Self {
        GroupUnits {
            group: group.into(),
            units,
        }
    }

    /// Collects the units of `group` from a scored dataset under assignment `z`.
    pub fn from_dataset(ds: &Dataset, z: &[bool], group: &str) -> Result<Self> {
        ds.require_group(group)?;
        if z.len() != ds.len() {
            return Err(AuditError::PolicyLength {
                expected: ds.len(),
                got: z.len(),
            });
        }
        let units = ds
            .records()
            .iter()
            .zip(z)
            .filter(|(r, _)| r.group == group)
            .map(|(r, &assigned)| {
                let (mu0, mu1, tau) = r.scores().ok_or_else(|| AuditError::MissingScores(r.id.clone()))?;
                Ok(ScoredUnit::new(tau, mu0, mu1, assigned))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupUnits::new(group, units))
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn stats(&self, budget: f64) -> Result<GroupStats> {
        check_budget(budget)?;
        if self.units.is_empty() {
            return Err(AuditError::GroupNotFound(self.group.clone()));
        }
        let mut acc = [CellSums::default(); 2];
        for u in &self.units {
            acc[usize::from(u.assigned)].add(u.weight, u.tau, u.clip(budget), u.floor(budget));
        }
        Ok(GroupStats::from_sums(&self.group, self.units.len(), budget, acc[0], acc[1]))
    }

    /// `(rho_TPR(eta), rho_TNR(eta))`: the rates obtained if `eta` were the
    /// anti-responder probability of each unit.
    pub fn rho(&self, eta: &[f64]) -> Result<RatePair> {
        if eta.len() != self.units.len() {
            return Err(AuditError::InvalidRecord(format!(
                "eta has {} entries for {} units",
                eta.len(),
                self.units.len()
            )));
        }
        let mut acc = [CellSums::default(); 2];
        for (index, (u, &e)) in self.units.iter().zip(eta).enumerate() {
            let cap = u.cap();
            if !(e >= -ETA_TOL && e <= cap + ETA_TOL) {
                return Err(AuditError::EtaOutOfRange { index, eta: e, cap });
            }
            acc[usize::from(u.assigned)].add(u.weight, u.tau + e, 0.0, 0.0);
        }
        let gs = GroupStats::from_sums(&self.group, self.units.len(), 0.0, acc[0], acc[1]);
        point_rates(&gs)
    }

    /// The allocation attaining the upper (`true`) or lower (`false`) corner
    /// of the identification box: full clip on one arm, the floor on the other.
    pub fn extreme_eta(&self, budget: f64, upper: bool) -> Vec<f64> {
        self.units
            .iter()
            .map(|u| if u.assigned == upper { u.clip(budget) } else { u.floor(budget) })
            .collect()
    }

    /// `max_i min(mu0_i, 1 - mu1_i)`; budgets at or above this are saturated.
    pub fn saturation_budget(&self) -> f64 {
        self.units.iter().map(ScoredUnit::cap).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CellSums {
    pub weight: f64,
    pub tau: f64,
    pub clip: f64,
    pub floor: f64,
}

impl CellSums {
    pub(crate) fn add(&mut self, w: f64, tau: f64, clip: f64, floor: f64) {
        self.weight += w;
        self.tau += w * tau;
        self.clip += w * clip;
        self.floor += w * floor;
    }
}

/// Per-group sufficient statistics for one policy and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: String,
    pub n: usize,
    pub budget: f64,
    /// `P(Z=1 | A=a)`
    pub r1: f64,
    pub r0: f64,
    /// `E[tau | A=a, Z=1]`, zero for an empty cell.
    pub tau1: f64,
    pub tau0: f64,
    /// `E[min(B, mu0, 1-mu1) | A=a, Z=1]`, zero for an empty cell.
    pub clip1: f64,
    pub clip0: f64,
    /// `E[max(0, -tau) | A=a, Z=z]`, clamped per unit to the clip.
    pub floor1: f64,
    pub floor0: f64,
}

impl GroupStats {
    pub(crate) fn from_sums(group: &str, n: usize, budget: f64, s0: CellSums, s1: CellSums) -> Self {
        let total = s0.weight + s1.weight;
        let mean = |num: f64, w: f64| if w > 0.0 { num / w } else { 0.0 };
        GroupStats {
            group: group.to_string(),
            n,
            budget,
            r1: s1.weight / total,
            r0: s0.weight / total,
            tau1: mean(s1.tau, s1.weight),
            tau0: mean(s0.tau, s0.weight),
            clip1: mean(s1.clip, s1.weight),
            clip0: mean(s0.clip, s0.weight),
            floor1: mean(s1.floor, s1.weight),
            floor0: mean(s0.floor, s0.weight),
        }
    }

    /// `E[tau | A=a]`
    pub fn mean_tau(&self) -> f64 {
        self.tau0 * self.r0 + self.tau1 * self.r1
    }

    /// `E[min(B, mu0, 1-mu1) | A=a]`
    pub fn mean_clip(&self) -> f64 {
        self.clip0 * self.r0 + self.clip1 * self.r1
    }

    // TPR when `add0`/`add1` is added to the Z=0/Z=1 cell means of tau.
    fn tpr_with(&self, add0: f64, add1: f64, what: &str) -> Result<f64> {
        let num = (self.tau1 + add1) * self.r1;
        let den = (self.tau0 + add0) * self.r0 + num;
        guard(&self.group, den, what)?;
        Ok(num / den)
    }

    fn tnr_with(&self, add0: f64, add1: f64, what: &str) -> Result<f64> {
        let num = (1.0 - self.tau0 - add0) * self.r0;
        let den = num + (1.0 - self.tau1 - add1) * self.r1;
        guard(&self.group, den, what)?;
        Ok(num / den)
    }
}

fn guard(group: &str, den: f64, what: &str) -> Result<()> {
    if den.is_finite() && den >= DEGENERACY_TOL {
        Ok(())
    } else {
        Err(AuditError::degenerate(group, format!("{what} denominator {den:e} below {DEGENERACY_TOL:e}")))
    }
}

pub(crate) fn check_budget(budget: f64) -> Result<()> {
    if (0.0..=1.0).contains(&budget) {
        Ok(())
    } else {
        Err(AuditError::BudgetOutOfRange(budget))
    }
}

pub fn group_stats(ds: &Dataset, z: &[bool], group: &str, budget: f64) -> Result<GroupStats> {
    GroupUnits::from_dataset(ds, z, group)?.stats(budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub tpr: f64,
    pub tnr: f64,
}

/// Identified TPR and TNR under monotone response (anti-responders absent).
pub fn point_rates(gs: &GroupStats) -> Result<RatePair> {
    Ok(RatePair {
        tpr: gs.tpr_with(0.0, 0.0, "E[tau|a]")?,
        tnr: gs.tnr_with(0.0, 0.0, "E[1-tau|a]")?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateInterval {
    pub metric: Metric,
    pub group: String,
    pub lower: f64,
    pub upper: f64,
    pub budget: f64,
}

impl RateInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        value >= self.lower - tol && value <= self.upper + tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBounds {
    pub tpr: RateInterval,
    pub tnr: RateInterval,
    /// Both lower endpoints are attained by one allocation, and both upper
    /// endpoints by another; always true for box-shaped budgets.
    pub simultaneous: bool,
}

impl GroupBounds {
    pub fn lower_pair(&self) -> RatePair {
        RatePair {
            tpr: self.tpr.lower,
            tnr: self.tnr.lower,
        }
    }

    pub fn upper_pair(&self) -> RatePair {
        RatePair {
            tpr: self.tpr.upper,
            tnr: self.tnr.upper,
        }
    }
}

/// Sharp TPR and TNR intervals at the budget stored in `gs`.
///
/// The upper pair puts the full clip mass on assigned units and none on the
/// others; the lower pair does the reverse.
pub fn bounds(gs: &GroupStats) -> Result<GroupBounds> {
    check_budget(gs.budget)?;
    let (r0, r1) = (gs.r0, gs.r1);
    let tpr_num = [(gs.tau1 + gs.floor1) * r1, (gs.tau1 + gs.clip1) * r1];
    let tpr_rest = [(gs.tau0 + gs.floor0) * r0, (gs.tau0 + gs.clip0) * r0];
    let tnr_num = [(1.0 - gs.tau0 - gs.clip0) * r0, (1.0 - gs.tau0 - gs.floor0) * r0];
    let tnr_rest = [(1.0 - gs.tau1 - gs.clip1) * r1, (1.0 - gs.tau1 - gs.floor1) * r1];
    let (tpr_lo, tpr_hi) = ratio_range(&gs.group, tpr_num, tpr_rest, "TPR")?;
    let (tnr_lo, tnr_hi) = ratio_range(&gs.group, tnr_num, tnr_rest, "TNR")?;
    let interval = |metric, lower, upper| RateInterval {
        metric,
        group: gs.group.clone(),
        lower,
        upper,
        budget: gs.budget,
    };
    Ok(GroupBounds {
        tpr: interval(Metric::Tpr, tpr_lo, tpr_hi),
        tnr: interval(Metric::Tnr, tnr_lo, tnr_hi),
        simultaneous: true,
    })
}

/// Range of `n / (n + m)` over the box `n in num`, `m in rest`, restricted to
/// members with `n + m >= DEGENERACY_TOL`. The extremes sit at opposite
/// vertices unless that vertex is degenerate, in which case they move onto
/// the face `n + m = DEGENERACY_TOL`.
fn ratio_range(group: &str, num: [f64; 2], rest: [f64; 2], what: &str) -> Result<(f64, f64)> {
    guard(group, num[1] + rest[1], &format!("largest {what}"))?;
    let d = DEGENERACY_TOL;
    let hi = if num[1] + rest[0] >= d { num[1] / (num[1] + rest[0]) } else { num[1] / d };
    let lo = if num[0] + rest[1] >= d { num[0] / (num[0] + rest[1]) } else { 1.0 - rest[1] / d };
    Ok((lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)))
}

/// Fraction of scored records with a negative effect score.
pub fn negative_tau_fraction(ds: &Dataset) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let neg = ds.records().iter().filter(|r| r.effect().is_some_and(|t| t < 0.0)).count();
    neg as f64 / ds.len() as f64
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Group a of the running example: two units, the second one treated.
    pub(crate) fn two_units() -> GroupUnits {
        GroupUnits::new(
            "a",
            vec![ScoredUnit::new(0.2, 0.3, 0.5, false), ScoredUnit::new(0.6, 0.2, 0.8, true)],
        )
    }

    /// Brute-force extremes of rho over a per-unit eta grid of `step`,
    /// always including each unit's cap.
    pub(crate) fn grid_extremes(g: &GroupUnits, budget: f64, step: f64) -> (RatePair, RatePair) {
        let axes: Vec<Vec<f64>> = g
            .units
            .iter()
            .map(|u| {
                let cap = u.clip(budget);
                let mut v: Vec<f64> = (0..).map(|k| k as f64 * step).take_while(|x| *x < cap).collect();
                v.push(cap);
                if -u.tau > 0.0 && -u.tau < cap {
                    v.push(-u.tau);
                }
                v
            })
            .collect();
        let mut lo = RatePair { tpr: f64::INFINITY, tnr: f64::INFINITY };
        let mut hi = RatePair { tpr: f64::NEG_INFINITY, tnr: f64::NEG_INFINITY };
        let mut idx = vec![0usize; axes.len()];
        loop {
            let eta: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
            // responders cannot have negative mass
            let admissible = g.units.iter().zip(&eta).all(|(u, e)| u.tau + e >= 0.0);
            let r = if admissible { g.rho(&eta).unwrap() } else { RatePair { tpr: f64::NAN, tnr: f64::NAN } };
            lo.tpr = lo.tpr.min(r.tpr);
            lo.tnr = lo.tnr.min(r.tnr);
            hi.tpr = hi.tpr.max(r.tpr);
            hi.tnr = hi.tnr.max(r.tnr);
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return (lo, hi);
                }
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn two_unit_stats() {
        let g = two_units();
        let gs = g.stats(0.1).unwrap();
        assert_abs_diff_eq!(gs.r1, 0.5);
        assert_abs_diff_eq!(gs.tau1, 0.6);
        assert_abs_diff_eq!(gs.tau0, 0.2);
        assert_abs_diff_eq!(gs.clip1, 0.1);
        assert_abs_diff_eq!(gs.clip0, 0.1);

        let gs0 = g.stats(0.0).unwrap();
        assert_eq!((gs0.clip0, gs0.clip1), (0.0, 0.0));

        let gs1 = g.stats(1.0).unwrap();
        assert_abs_diff_eq!(gs1.clip1, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(gs1.clip0, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn group_stats_from_dataset() {
        use crate::data::UnitRecord;
        let ds = Dataset::new(
            vec![
                UnitRecord::new("1", "a", false, false).with_scores(0.3, 0.5),
                UnitRecord::new("2", "a", true, true).with_scores(0.2, 0.8),
                UnitRecord::new("3", "b", true, true).with_scores(0.1, 0.9),
            ],
            vec![],
        )
        .unwrap();
        let gs = group_stats(&ds, &[false, true, true], "a", 0.1).unwrap();
        assert_eq!(gs.n, 2);
        assert_abs_diff_eq!(gs.tau1, 0.6, epsilon = 1e-15);
        assert!(matches!(
            group_stats(&ds, &[false, true, true], "zz", 0.1),
            Err(AuditError::GroupNotFound(_))
        ));
    }

    #[test]
    fn point_rates_match_enumeration() {
        // Explicit joint: two equiprobable cells, p10 = 0, p01 = tau.
        let p01 = [0.2, 0.6];
        let z = [false, true];
        let resp: f64 = p01.iter().sum();
        let tpr_true = p01.iter().zip(&z).filter(|(_, &z)| z).map(|(p, _)| p).sum::<f64>() / resp;
        let tnr_true = p01.iter().zip(&z).filter(|(_, &z)| !z).map(|(p, _)| 1.0 - p).sum::<f64>()
            / p01.iter().map(|p| 1.0 - p).sum::<f64>();

        let r = point_rates(&two_units().stats(0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(r.tpr, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(r.tnr, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.tpr, tpr_true, epsilon = 1e-12);
        assert_abs_diff_eq!(r.tnr, tnr_true, epsilon = 1e-12);
    }

    #[test]
    fn point_rates_boundaries() {
        let mut g = two_units();
        g.units.iter_mut().for_each(|u| u.assigned = true);
        let r = point_rates(&g.stats(0.0).unwrap()).unwrap();
        assert_eq!((r.tpr, r.tnr), (1.0, 0.0));
        g.units.iter_mut().for_each(|u| u.assigned = false);
        let r = point_rates(&g.stats(0.0).unwrap()).unwrap();
        assert_eq!((r.tpr, r.tnr), (0.0, 1.0));
    }

    #[test]
    fn degenerate_group() {
        let g = GroupUnits::new("z", vec![ScoredUnit::new(0.0, 0.4, 0.4, true); 3]);
        assert!(matches!(
            point_rates(&g.stats(0.0).unwrap()),
            Err(AuditError::DegenerateGroup { .. })
        ));
        let g = GroupUnits::new("o", vec![ScoredUnit::new(1.0, 0.0, 1.0, false); 3]);
        assert!(matches!(
            point_rates(&g.stats(0.0).unwrap()),
            Err(AuditError::DegenerateGroup { .. })
        ));
    }

    #[test]
    fn rho_examples() {
        let g = two_units();
        let gs = g.stats(0.0).unwrap();
        assert_eq!(g.rho(&[0.0, 0.0]).unwrap(), point_rates(&gs).unwrap());
        assert_abs_diff_eq!(g.rho(&[0.0, 0.1]).unwrap().tpr, 0.35 / 0.45, epsilon = 1e-12);
        assert_abs_diff_eq!(g.rho(&[0.1, 0.0]).unwrap().tpr, 0.3 / 0.45, epsilon = 1e-12);
    }

    #[test]
    fn rho_rejects_eta_outside_cap() {
        let g = two_units();
        assert!(matches!(g.rho(&[0.0, 0.25]), Err(AuditError::EtaOutOfRange { index: 1, .. })));
        assert!(matches!(g.rho(&[-0.1, 0.0]), Err(AuditError::EtaOutOfRange { index: 0, .. })));
    }

    #[test]
    fn bounds_two_unit_b_point_one() {
        let g = two_units();
        let b = bounds(&g.stats(0.1).unwrap()).unwrap();
        assert_abs_diff_eq!(b.tpr.lower, 0.3 / 0.45, epsilon = 1e-12);
        assert_abs_diff_eq!(b.tpr.upper, 0.35 / 0.45, epsilon = 1e-12);
        assert_abs_diff_eq!(b.tnr.lower, 0.35 / 0.55, epsilon = 1e-12);
        assert_abs_diff_eq!(b.tnr.upper, 0.4 / 0.55, epsilon = 1e-12);

        let (lo, hi) = grid_extremes(&g, 0.1, 1e-3);
        for (closed, grid) in [
            (b.tpr.lower, lo.tpr),
            (b.tpr.upper, hi.tpr),
            (b.tnr.lower, lo.tnr),
            (b.tnr.upper, hi.tnr),
        ] {
            assert!((closed - grid).abs() <= 2e-3, "closed {closed} grid {grid}");
        }
    }

    #[test]
    fn bounds_two_unit_b_one() {
        let g = two_units();
        let b = bounds(&g.stats(1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(b.tpr.lower, 0.3 / 0.55, epsilon = 1e-12);
        assert_abs_diff_eq!(b.tpr.upper, 0.8, epsilon = 1e-12);
        let (lo, hi) = grid_extremes(&g, 1.0, 1e-3);
        assert!((b.tpr.lower - lo.tpr).abs() <= 2e-3);
        assert!((b.tpr.upper - hi.tpr).abs() <= 2e-3);
    }

    #[test]
    fn negative_effect_raises_the_floor() {
        let u = ScoredUnit::new(-0.1, 0.4, 0.3, false);
        assert_eq!(u.floor(0.2), 0.1);
        assert_eq!(u.floor(0.05), 0.05);
        assert_eq!(ScoredUnit::new(0.3, 0.2, 0.5, true).floor(0.2), 0.0);

        let g = GroupUnits::new(
            "a",
            vec![
                ScoredUnit::new(-0.1, 0.4, 0.3, false),
                ScoredUnit::new(0.2, 0.3, 0.5, false),
                ScoredUnit::new(0.6, 0.2, 0.8, true),
            ],
        );
        let b = bounds(&g.stats(0.2).unwrap()).unwrap();
        let (lo, hi) = grid_extremes(&g, 0.2, 1e-2);
        for (closed, grid) in [(b.tpr.lower, lo.tpr), (b.tpr.upper, hi.tpr), (b.tnr.lower, lo.tnr), (b.tnr.upper, hi.tnr)] {
            assert_abs_diff_eq!(closed, grid, epsilon = 1e-12);
        }
    }

    #[test]
    fn vanishing_vertex_denominator_moves_to_the_face() {
        // the only responder mass can be removed entirely on the treated arm
        let g = GroupUnits::new(
            "a",
            vec![ScoredUnit::new(-0.2, 0.3, 0.1, false), ScoredUnit::new(-0.1, 0.2, 0.1, true)],
        );
        let b = bounds(&g.stats(0.3).unwrap()).unwrap();
        assert!(b.tpr.upper > 0.99 && b.tpr.lower < 0.01);
        assert!(b.tnr.lower >= 0.0 && b.tnr.upper <= 1.0);
    }

    #[test]
    fn zero_budget_collapses_exactly() {
        let gs = two_units().stats(0.0).unwrap();
        let b = bounds(&gs).unwrap();
        let p = point_rates(&gs).unwrap();
        assert_eq!(b.lower_pair(), p);
        assert_eq!(b.upper_pair(), p);
    }

    #[test]
    fn budget_out_of_range() {
        assert!(matches!(two_units().stats(1.5), Err(AuditError::BudgetOutOfRange(_))));
        assert!(matches!(two_units().stats(-0.1), Err(AuditError::BudgetOutOfRange(_))));
    }

    #[test]
    fn extreme_eta_reproduces_endpoints() {
        let g = two_units();
        let b = bounds(&g.stats(0.1).unwrap()).unwrap();
        let up = g.rho(&g.extreme_eta(0.1, true)).unwrap();
        let lo = g.rho(&g.extreme_eta(0.1, false)).unwrap();
        assert_abs_diff_eq!(up.tpr, b.tpr.upper, epsilon = 1e-12);
        assert_abs_diff_eq!(up.tnr, b.tnr.upper, epsilon = 1e-12);
        assert_abs_diff_eq!(lo.tpr, b.tpr.lower, epsilon = 1e-12);
        assert_abs_diff_eq!(lo.tnr, b.tnr.lower, epsilon = 1e-12);
    }

    fn arb_units() -> impl Strategy<Value = GroupUnits> {
        // Units consistent with p10 <= p01, so tau >= 0 and tau + cap <= 1.
        prop::collection::vec((0.05f64..0.6, 0.0f64..0.3, 0.0f64..1.0, any::<bool>()), 2..12).prop_map(|v| {
            let units = v
                .into_iter()
                .map(|(p01, p11, rest, z)| {
                    let p10 = rest * p01.min(1.0 - p01 - p11).max(0.0) * 0.5;
                    ScoredUnit::new(p01 - p10, p10 + p11, p01 + p11, z)
                })
                .collect();
            GroupUnits::new("g", units)
        })
    }

    proptest! {
        #[test]
        fn intervals_nest_and_stay_in_unit_range(g in arb_units(), b1 in 0.0f64..1.0, b2 in 0.0f64..1.0) {
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let (Ok(small), Ok(big)) = (bounds(&g.stats(lo).unwrap()), bounds(&g.stats(hi).unwrap())) else {
                return Ok(());
            };
            for (s, l) in [(&small.tpr, &big.tpr), (&small.tnr, &big.tnr)] {
                prop_assert!(l.lower <= s.lower + 1e-12 && s.upper <= l.upper + 1e-12);
                prop_assert!(s.lower <= s.upper + 1e-12);
                prop_assert!(l.lower >= -1e-12 && l.upper <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn saturation(g in arb_units(), extra in 0.0f64..0.5) {
            let sat = (g.saturation_budget() + extra).min(1.0);
            let (Ok(a), Ok(b)) = (bounds(&g.stats(sat).unwrap()), bounds(&g.stats(1.0).unwrap())) else {
                return Ok(());
            };
            prop_assert_eq!(a.tpr.lower, b.tpr.lower);
            prop_assert_eq!(a.tpr.upper, b.tpr.upper);
            prop_assert_eq!(a.tnr.lower, b.tnr.lower);
            prop_assert_eq!(a.tnr.upper, b.tnr.upper);
        }
    }
}
