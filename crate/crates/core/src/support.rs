//! Support function of the joint identification region of group TPR/TNR.
//!
//! For a contrast `mu`, `h(mu) = sup mu . rho(eta)` over all admissible
//! anti-responder allocations `eta`. The region is a product over groups, so
//! `h` is a sum of per-group terms. Each group term is a linear-fractional
//! program; after the substitution `t = 1 / E[tau + eta | a]`,
//! `omega = t * eta`, it becomes a linear program for every fixed `t`:
//!
//! ```text
//! max  mu_tpr * (t * m1 + A1) + mu_tnr / (t - 1) * (t * n0 - A0)
//! s.t. sum_i w_i * omega_i = 1 - t * E[tau | a],   0 <= omega_i <= t * clip_i
//! ```
//!
//! where `m1 = E[tau * Z]`, `n0 = E[(1 - tau) * (1 - Z)]`, and `A1`, `A0` are
//! the `w * omega` masses on assigned and unassigned units. The inner program
//! is a fractional knapsack with an exact budget, solved greedily. The outer
//! variable `t` is scanned on a uniform grid over its feasible range and the
//! best grid cell is polished by golden-section search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{AuditError, Result};
use crate::identification::{bounds, check_budget, GroupBounds, GroupUnits, Metric, RatePair, DEGENERACY_TOL};

pub const DEFAULT_GRID_N: usize = 1001;

/// Grid points with `|t - 1|` below this are skipped when the TNR coefficient is nonzero.
pub const SINGULAR_T_TOL: f64 = 1e-6;

const BUDGET_TOL: f64 = 1e-12;
const GOLDEN_ITERS: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupContrast {
    pub group: String,
    pub tpr: f64,
    pub tnr: f64,
}

/// Per-group coefficients of a linear contrast of TPR/TNR values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastDirection {
    pub coefficients: Vec<GroupContrast>,
}

impl ContrastDirection {
    pub fn new(coefficients: Vec<GroupContrast>) -> Result<Self> {
        if coefficients.iter().all(|c| c.tpr == 0.0 && c.tnr == 0.0) {
            return Err(AuditError::Config("contrast direction has no nonzero coefficient".into()));
        }
        if coefficients.iter().any(|c| !c.tpr.is_finite() || !c.tnr.is_finite()) {
            return Err(AuditError::Config("contrast coefficients must be finite".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = coefficients.iter().find(|c| !seen.insert(c.group.as_str())) {
            return Err(AuditError::Config(format!("group `{}` listed twice", dup.group)));
        }
        Ok(ContrastDirection { coefficients })
    }

    pub fn single(group: &str, tpr: f64, tnr: f64) -> Result<Self> {
        Self::new(vec![GroupContrast {
            group: group.to_string(),
            tpr,
            tnr,
        }])
    }

    /// `e_a - e_b` on one metric.
    pub fn difference(a: &str, b: &str, metric: Metric) -> Result<Self> {
        let coef = |g: &str, s: f64| match metric {
            Metric::Tpr => GroupContrast { group: g.into(), tpr: s, tnr: 0.0 },
            Metric::Tnr => GroupContrast { group: g.into(), tpr: 0.0, tnr: s },
        };
        Self::new(vec![coef(a, 1.0), coef(b, -1.0)])
    }

    /// Parses `group:tpr_coef:tnr_coef,...`. Group labels may not contain `:` or `,`.
    pub fn parse(text: &str) -> Result<Self> {
        let coefficients = text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|item| {
                let parts: Vec<&str> = item.trim().split(':').collect();
                let [group, tpr, tnr] = parts[..] else {
                    return Err(AuditError::Config(format!("expected group:tpr:tnr, got `{item}`")));
                };
                let num = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| AuditError::Config(format!("bad coefficient `{s}` in `{item}`")))
                };
                Ok(GroupContrast {
                    group: group.trim().to_string(),
                    tpr: num(tpr)?,
                    tnr: num(tnr)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(coefficients)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.coefficients
                .iter()
                .map(|g| GroupContrast {
                    group: g.group.clone(),
                    tpr: g.tpr * c,
                    tnr: g.tnr * c,
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOptimum {
    pub group: String,
    pub tpr_coef: f64,
    pub tnr_coef: f64,
    pub value: f64,
    /// Optimal `1 / E[tau + eta | a]`.
    pub t: f64,
    /// Inner budget `1 - t * E[tau | a]` distributed over `w * omega`.
    pub budget_mass: f64,
    /// Mean `eta` over assigned and unassigned units at the optimum.
    pub mean_eta_assigned: f64,
    pub mean_eta_unassigned: f64,
    /// `(rho_TPR, rho_TNR)` at the optimizer.
    pub rates: RatePair,
    /// Per-unit optimizer, in the unit order of the group.
    #[serde(skip)]
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportResult {
    pub value: f64,
    pub budget: f64,
    pub grid_resolution: usize,
    pub groups: Vec<GroupOptimum>,
}

/// Fractional knapsack with an exact budget: maximizes `sum coef_i * x_i`
/// subject to `sum x_i = budget`, `0 <= x_i <= cap_i`. Items are filled in
/// decreasing coefficient order, ties in index order. Returns `None` when the
/// budget is negative or exceeds the total capacity.
pub fn allocate_budget(coefs: &[f64], caps: &[f64], budget: f64) -> Option<Vec<f64>> {
    debug_assert_eq!(coefs.len(), caps.len());
    let total: f64 = caps.iter().sum();
    if budget < -BUDGET_TOL || budget > total + BUDGET_TOL * (1.0 + total) {
        return None;
    }
    let mut order: Vec<usize> = (0..coefs.len()).collect();
    order.sort_by(|&i, &j| coefs[j].total_cmp(&coefs[i]));
    let mut left = budget.max(0.0);
    let mut x = vec![0.0; coefs.len()];
    for i in order {
        if left <= 0.0 {
            break;
        }
        let take = caps[i].min(left);
        x[i] = take;
        left -= take;
    }
    Some(x)
}

struct GroupProgram<'a> {
    units: &'a GroupUnits,
    tpr_coef: f64,
    tnr_coef: f64,
    weights: Vec<f64>,
    floors: Vec<f64>,
    /// Width of each unit's box above its floor.
    clips: Vec<f64>,
    mean_tau: f64,
    mean_clip: f64,
    m1: f64,
    n0: f64,
    cap1: f64,
    cap0: f64,
}

impl<'a> GroupProgram<'a> {
    // Everything depends on `tau + eta` only, so the floor on `eta` is
    // folded into a shifted effect `tau + floor` and a narrower box.
    fn new(units: &'a GroupUnits, tpr_coef: f64, tnr_coef: f64, budget: f64) -> Result<Self> {
        let total: f64 = units.units.iter().map(|u| u.weight).sum();
        if units.is_empty() || total <= 0.0 {
            return Err(AuditError::GroupNotFound(units.group.clone()));
        }
        let weights: Vec<f64> = units.units.iter().map(|u| u.weight / total).collect();
        let floors: Vec<f64> = units.units.iter().map(|u| u.floor(budget)).collect();
        let clips: Vec<f64> = units.units.iter().zip(&floors).map(|(u, f)| u.clip(budget) - f).collect();
        let (mut mean_tau, mut mean_clip, mut m1, mut n0, mut cap1, mut cap0) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (((u, &w), &c), &f) in units.units.iter().zip(&weights).zip(&clips).zip(&floors) {
            let tau = u.tau + f;
            mean_tau += w * tau;
            mean_clip += w * c;
            if u.assigned {
                m1 += w * tau;
                cap1 += w * c;
            } else {
                n0 += w * (1.0 - tau);
                cap0 += w * c;
            }
        }
        if mean_tau < DEGENERACY_TOL {
            return Err(AuditError::degenerate(
                &units.group,
                format!("E[tau + floor|a] = {mean_tau:e} below {DEGENERACY_TOL:e}"),
            ));
        }
        Ok(GroupProgram {
            units,
            tpr_coef,
            tnr_coef,
            weights,
            floors,
            clips,
            mean_tau,
            mean_clip,
            m1,
            n0,
            cap1,
            cap0,
        })
    }

    fn t_range(&self) -> (f64, f64) {
        (1.0 / (self.mean_tau + self.mean_clip), 1.0 / self.mean_tau)
    }

    fn coefs_at(&self, t: f64) -> (f64, f64) {
        let c0 = if self.tnr_coef == 0.0 { 0.0 } else { -self.tnr_coef / (t - 1.0) };
        (self.tpr_coef, c0)
    }

    fn constant_at(&self, t: f64) -> f64 {
        let tnr = if self.tnr_coef == 0.0 { 0.0 } else { self.tnr_coef * t * self.n0 / (t - 1.0) };
        self.tpr_coef * t * self.m1 + tnr
    }

    /// Optimal inner value at `t`, or `None` for a skipped grid point.
    fn value_at(&self, t: f64) -> Option<f64> {
        if self.tnr_coef != 0.0 && (t - 1.0).abs() < SINGULAR_T_TOL {
            return None;
        }
        let (c1, c0) = self.coefs_at(t);
        let x = allocate_budget(&[c1, c0], &[t * self.cap1, t * self.cap0], 1.0 - t * self.mean_tau)?;
        Some(self.constant_at(t) + c1 * x[0] + c0 * x[1])
    }

    fn solve(&self, grid_n: usize) -> Result<GroupOptimum> {
        let (lo, hi) = self.t_range();
        let grid: Vec<f64> = if hi - lo <= 0.0 {
            vec![lo]
        } else {
            (0..grid_n)
                .map(|k| if k + 1 == grid_n { hi } else { lo + (hi - lo) * k as f64 / (grid_n - 1) as f64 })
                .collect()
        };
        let values: Vec<Option<f64>> = grid.par_iter().map(|&t| self.value_at(t)).collect();

        let mut best: Option<(usize, f64)> = None;
        for (k, v) in values.iter().enumerate() {
            if let Some(v) = *v {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
        }
        let Some((k, mut best_v)) = best else {
            let singular = grid.iter().all(|&t| self.tnr_coef != 0.0 && (t - 1.0).abs() < SINGULAR_T_TOL);
            return Err(if singular {
                AuditError::SingularT(self.units.group.clone())
            } else {
                AuditError::InfeasibleBudget(self.units.group.clone())
            });
        };
        let mut best_t = grid[k];

        if grid.len() > 1 {
            let a = grid[k.saturating_sub(1)];
            let b = grid[(k + 1).min(grid.len() - 1)];
            if let Some((t, v)) = self.golden(a, b) {
                if v > best_v {
                    best_t = t;
                    best_v = v;
                }
            }
        }
        self.optimum_at(best_t, best_v)
    }

    fn golden(&self, mut a: f64, mut b: f64) -> Option<(f64, f64)> {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let f = |t: f64| self.value_at(t).unwrap_or(f64::NEG_INFINITY);
        let mut x1 = b - inv_phi * (b - a);
        let mut x2 = a + inv_phi * (b - a);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..GOLDEN_ITERS {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = f(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = f(x1);
            }
        }
        let (t, v) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        v.is_finite().then_some((t, v))
    }

    fn optimum_at(&self, t: f64, value: f64) -> Result<GroupOptimum> {
        let (c1, c0) = self.coefs_at(t);
        let coefs: Vec<f64> = self.units.units.iter().map(|u| if u.assigned { c1 } else { c0 }).collect();
        let caps: Vec<f64> = self.weights.iter().zip(&self.clips).map(|(w, c)| w * t * c).collect();
        let budget_mass = 1.0 - t * self.mean_tau;
        let mass = allocate_budget(&coefs, &caps, budget_mass)
            .ok_or_else(|| AuditError::InfeasibleBudget(self.units.group.clone()))?;
        let eta: Vec<f64> = mass
            .iter()
            .zip(&self.weights)
            .zip(self.clips.iter().zip(&self.floors))
            .map(|((m, w), (c, f))| f + if *w > 0.0 { (m / (w * t)).clamp(0.0, *c) } else { 0.0 })
            .collect();
        let rates = self.units.rho(&eta)?;

        let mean_over = |assigned: bool| {
            let (num, den) = self
                .units
                .units
                .iter()
                .zip(&self.weights)
                .zip(&eta)
                .filter(|((u, _), _)| u.assigned == assigned)
                .fold((0.0, 0.0), |(n, d), ((_, w), e)| (n + w * e, d + w));
            if den > 0.0 { num / den } else { 0.0 }
        };
        Ok(GroupOptimum {
            group: self.units.group.clone(),
            tpr_coef: self.tpr_coef,
            tnr_coef: self.tnr_coef,
            value,
            t,
            budget_mass,
            mean_eta_assigned: mean_over(true),
            mean_eta_unassigned: mean_over(false),
            rates,
            eta,
        })
    }
}

/// Evaluates the support function on pre-assembled group units.
pub fn support_on_groups(
    groups: &[GroupUnits],
    mu: &ContrastDirection,
    budget: f64,
    grid_n: usize,
) -> Result<SupportResult> {
    check_budget(budget)?;
    if grid_n < 2 {
        return Err(AuditError::Config(format!("grid_n must be at least 2, got {grid_n}")));
    }
    let mut optima = Vec::new();
    for c in &mu.coefficients {
        let units = groups
            .iter()
            .find(|g| g.group == c.group)
            .ok_or_else(|| AuditError::GroupNotFound(c.group.clone()))?;
        if c.tpr == 0.0 && c.tnr == 0.0 {
            continue;
        }
        optima.push(GroupProgram::new(units, c.tpr, c.tnr, budget)?.solve(grid_n)?);
    }
    Ok(SupportResult {
        value: optima.iter().map(|o| o.value).sum(),
        budget,
        grid_resolution: grid_n,
        groups: optima,
    })
}

/// Support function `h(mu)` of the identification region for assignment `z`.
pub fn support(ds: &Dataset, z: &[bool], mu: &ContrastDirection, budget: f64, grid_n: usize) -> Result<SupportResult> {
    let groups = mu
        .coefficients
        .iter()
        .map(|c| GroupUnits::from_dataset(ds, z, &c.group))
        .collect::<Result<Vec<_>>>()?;
    support_on_groups(&groups, mu, budget, grid_n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityInterval {
    pub metric: Metric,
    pub group_a: String,
    pub group_b: String,
    pub budget: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Sharp interval of `metric_a - metric_b` from the two groups' bounds.
pub fn disparity_from_bounds(a: &GroupBounds, b: &GroupBounds, metric: Metric) -> DisparityInterval {
    let (ia, ib) = match metric {
        Metric::Tpr => (&a.tpr, &b.tpr),
        Metric::Tnr => (&a.tnr, &b.tnr),
    };
    DisparityInterval {
        metric,
        group_a: ia.group.clone(),
        group_b: ib.group.clone(),
        budget: ia.budget,
        lower: ia.lower - ib.upper,
        upper: ia.upper - ib.lower,
    }
}

pub fn disparity_extremes(
    ds: &Dataset,
    z: &[bool],
    a: &str,
    b: &str,
    metric: Metric,
    budget: f64,
) -> Result<DisparityInterval> {
    if a == b {
        return Err(AuditError::Config(format!("disparity needs two distinct groups, got `{a}` twice")));
    }
    let ba = bounds(&GroupUnits::from_dataset(ds, z, a)?.stats(budget)?)?;
    let bb = bounds(&GroupUnits::from_dataset(ds, z, b)?.stats(budget)?)?;
    Ok(disparity_from_bounds(&ba, &bb, metric))
}
