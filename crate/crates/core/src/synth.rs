//! Synthetic populations with a fully specified potential-outcome joint.
//!
//! A [`SyntheticSpec`] fixes, for every covariate point `x` and group `a`,
//! the probabilities of the four response types `p_ij = P(Y(0)=i, Y(1)=j)`
//! and the propensity `P(T=1 | x, a)`. From it we can compute the true group
//! TPR/TNR exactly, draw samples, and check the bounds of
//! [`crate::identification`] against brute force.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, UnitRecord};
use crate::error::{AuditError, Result};
use crate::identification::{bounds, GroupUnits, RatePair, ScoredUnit};

const SIMPLEX_TOL: f64 = 1e-12;
const PROB_TOL: f64 = 1e-9;

/// Largest covariate support accepted by [`sharpness_check`].
pub const MAX_SHARPNESS_SUPPORT: usize = 5;

/// Upper limit on grid points enumerated per group by [`sharpness_check`];
/// larger grids are coarsened uniformly (cap values stay on the grid).
pub const MAX_SHARPNESS_GRID: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XPoint {
    pub x: Vec<f64>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub label: String,
    pub prob: f64,
    /// `P(x | a)`; defaults to the marginal `x_support` probabilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseProbs {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl ResponseProbs {
    /// `P(Y=1 | T=0) = p10 + p11`
    pub fn mu0(&self) -> f64 {
        self.p10 + self.p11
    }

    /// `P(Y=1 | T=1) = p01 + p11`
    pub fn mu1(&self) -> f64 {
        self.p01 + self.p11
    }

    /// `tau = p01 - p10`
    pub fn tau(&self) -> f64 {
        self.p01 - self.p10
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    /// Index into `x_support`.
    pub x: usize,
    pub group: String,
    #[serde(flatten)]
    pub probs: ResponseProbs,
    #[serde(default = "default_propensity")]
    pub propensity: f64,
}

fn default_propensity() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseType {
    /// `(Y(0), Y(1)) = (0, 0)`
    Never,
    /// `(0, 1)`
    Responder,
    /// `(1, 0)`
    AntiResponder,
    /// `(1, 1)`
    Always,
}

impl ResponseType {
    pub fn outcome(self, treated: bool) -> bool {
        match self {
            ResponseType::Never => false,
            ResponseType::Always => true,
            ResponseType::Responder => treated,
            ResponseType::AntiResponder => !treated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(default)]
    pub feature_names: Vec<String>,
    pub x_support: Vec<XPoint>,
    pub groups: Vec<GroupSpec>,
    pub cells: Vec<CellSpec>,
}

/// One cell of the observable law `P(A=a, X=x, T=t, Y=y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableCell {
    pub group: String,
    pub x: usize,
    pub treatment: bool,
    pub outcome: bool,
    pub prob: f64,
}

/// A sample plus the response types that generated it, kept apart from the
/// dataset.
#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub dataset: Dataset,
    pub response_types: Vec<ResponseType>,
}

impl SyntheticSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SyntheticSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn feature_names(&self) -> Vec<String> {
        let dim = self.x_support.first().map_or(0, |p| p.x.len());
        if self.feature_names.len() == dim {
            self.feature_names.clone()
        } else {
            (1..=dim).map(|i| format!("x{i}")).collect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AuditError::InvalidSpec(m));
        if self.x_support.is_empty() || self.groups.is_empty() {
            return bad("x_support and groups must be nonempty".into());
        }
        let dim = self.x_support[0].x.len();
        if self.x_support.iter().any(|p| p.x.len() != dim) {
            return bad("all covariate points must have the same dimension".into());
        }
        check_distribution("x_support", self.x_support.iter().map(|p| p.prob))?;
        check_distribution("groups", self.groups.iter().map(|g| g.prob))?;
        for g in &self.groups {
            if let Some(px) = &g.x_probs {
                if px.len() != self.x_support.len() {
                    return bad(format!("group `{}`: x_probs has wrong length", g.label));
                }
                check_distribution(&format!("group `{}` x_probs", g.label), px.iter().copied())?;
            }
        }
        for c in &self.cells {
            let p = c.probs;
            let parts = [p.p00, p.p01, p.p10, p.p11];
            if parts.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad(format!("cell (x={}, {}) has a negative probability", c.x, c.group));
            }
            if (parts.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL {
                return bad(format!("cell (x={}, {}) does not sum to 1", c.x, c.group));
            }
            if !(c.propensity > 0.0 && c.propensity < 1.0) {
                return bad(format!("cell (x={}, {}) propensity must lie in (0, 1)", c.x, c.group));
            }
            if c.x >= self.x_support.len() {
                return bad(format!("cell refers to unknown x index {}", c.x));
            }
            if !self.groups.iter().any(|g| g.label == c.group) {
                return bad(format!("cell refers to unknown group `{}`", c.group));
            }
        }
        for (gi, g) in self.groups.iter().enumerate() {
            for x in 0..self.x_support.len() {
                let n = self.cells.iter().filter(|c| c.x == x && c.group == g.label).count();
                if n > 1 {
                    return bad(format!("duplicate cell (x={x}, {})", g.label));
                }
                if n == 0 && self.x_prob(gi, x) > 0.0 {
                    return bad(format!("missing cell (x={x}, {})", g.label));
                }
            }
        }
        Ok(())
    }

    fn group_index(&self, group: &str) -> Result<usize> {
        self.groups
            .iter()
            .position(|g| g.label == group)
            .ok_or_else(|| AuditError::GroupNotFound(group.to_string()))
    }

    /// `P(X = x | A = a)` for group index `gi`.
    pub fn x_prob(&self, gi: usize, x: usize) -> f64 {
        match &self.groups[gi].x_probs {
            Some(px) => px[x],
            None => self.x_support[x].prob,
        }
    }

    pub fn cell(&self, x: usize, group: &str) -> Option<&CellSpec> {
        self.cells.iter().find(|c| c.x == x && c.group == group)
    }

    /// The cells of `group` with positive probability, with `P(x | a)`.
    pub fn group_cells(&self, group: &str) -> Result<Vec<(f64, &CellSpec)>> {
        let gi = self.group_index(group)?;
        Ok((0..self.x_support.len())
            .filter_map(|x| {
                let w = self.x_prob(gi, x);
                (w > 0.0).then(|| self.cell(x, group).map(|c| (w, c)))?
            })
            .collect())
    }

    /// Population-level scored units of `group`: one unit per covariate cell,
    /// weighted by `P(x | a)`, carrying only observable quantities.
    pub fn population_units(&self, group: &str, policy: impl Fn(&CellSpec) -> bool) -> Result<GroupUnits> {
        let units = self
            .group_cells(group)?
            .into_iter()
            .map(|(w, c)| ScoredUnit {
                weight: w,
                tau: c.probs.tau(),
                mu0: c.probs.mu0(),
                mu1: c.probs.mu1(),
                assigned: policy(c),
            })
            .collect();
        Ok(GroupUnits::new(group, units))
    }

    /// The exact distribution of `(A, X, T, Y)`.
    pub fn observable_law(&self) -> Vec<ObservableCell> {
        let mut out = Vec::new();
        for (gi, g) in self.groups.iter().enumerate() {
            for x in 0..self.x_support.len() {
                let px = g.prob * self.x_prob(gi, x);
                let Some(c) = self.cell(x, &g.label) else { continue };
                for t in [false, true] {
                    let pt = if t { c.propensity } else { 1.0 - c.propensity };
                    let py1 = if t { c.probs.mu1() } else { c.probs.mu0() };
                    for y in [false, true] {
                        out.push(ObservableCell {
                            group: g.label.clone(),
                            x,
                            treatment: t,
                            outcome: y,
                            prob: px * pt * if y { py1 } else { 1.0 - py1 },
                        });
                    }
                }
            }
        }
        out
    }

    /// Draws `n` i.i.d. units. Observed outcomes follow `Y = Y(T)`.
    pub fn generate(&self, n: usize, seed: u64) -> Result<SyntheticSample> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let group_probs: Vec<f64> = self.groups.iter().map(|g| g.prob).collect();
        let x_probs: Vec<Vec<f64>> = (0..self.groups.len())
            .map(|gi| (0..self.x_support.len()).map(|x| self.x_prob(gi, x)).collect())
            .collect();
        let mut records = Vec::with_capacity(n);
        let mut types = Vec::with_capacity(n);
        for i in 0..n {
            let gi = sample_index(&mut rng, &group_probs);
            let x = sample_index(&mut rng, &x_probs[gi]);
            let label = &self.groups[gi].label;
            let c = self.cell(x, label).expect("validated spec has every positive cell");
            let treated = rng.random::<f64>() < c.propensity;
            let p = c.probs;
            let kind = match sample_index(&mut rng, &[p.p00, p.p01, p.p10, p.p11]) {
                0 => ResponseType::Never,
                1 => ResponseType::Responder,
                2 => ResponseType::AntiResponder,
                _ => ResponseType::Always,
            };
            records.push(
                UnitRecord::new(format!("u{i}"), label.clone(), treated, kind.outcome(treated))
                    .with_features(self.x_support[x].x.clone()),
            );
            types.push(kind);
        }
        Ok(SyntheticSample {
            dataset: Dataset::new(records, self.feature_names())?,
            response_types: types,
        })
    }
}

fn check_distribution(what: &str, probs: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for p in probs {
        if !(p.is_finite() && p >= 0.0) {
            return Err(AuditError::InvalidSpec(format!("{what}: negative or non-finite probability")));
        }
        total += p;
    }
    if (total - 1.0).abs() > PROB_TOL {
        return Err(AuditError::InvalidSpec(format!("{what}: probabilities sum to {total}")));
    }
    Ok(())
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Exact group TPR and TNR of `policy`, conditioning on the latent response
/// type: responders are `(0, 1)`, everyone else counts as a non-responder.
pub fn true_rates(spec: &SyntheticSpec, group: &str, policy: impl Fn(&CellSpec) -> bool) -> Result<RatePair> {
    let (mut resp, mut resp_z, mut non, mut non_unz) = (0.0, 0.0, 0.0, 0.0);
    for (w, c) in spec.group_cells(group)? {
        let r = w * c.probs.p01;
        let nr = w * (c.probs.p00 + c.probs.p10 + c.probs.p11);
        resp += r;
        non += nr;
        if policy(c) {
            resp_z += r;
        } else {
            non_unz += nr;
        }
    }
    if resp <= 0.0 {
        return Err(AuditError::degenerate(group, "no responder mass"));
    }
    if non <= 0.0 {
        return Err(AuditError::degenerate(group, "no non-responder mass"));
    }
    Ok(RatePair {
        tpr: resp_z / resp,
        tnr: non_unz / non,
    })
}

/// `Z = 1[tau(x, a) >= theta]` on the population effect.
pub fn threshold_policy(theta: f64) -> impl Fn(&CellSpec) -> bool {
    move |c: &CellSpec| c.probs.tau() >= theta
}

/// Largest absolute difference between the observable laws of two specs.
pub fn observable_discrepancy(a: &SyntheticSpec, b: &SyntheticSpec) -> Result<f64> {
    let (la, lb) = (a.observable_law(), b.observable_law());
    if la.len() != lb.len() {
        return Err(AuditError::InvalidSpec("observable laws have different supports".into()));
    }
    let mut worst: f64 = 0.0;
    for (ca, cb) in la.iter().zip(&lb) {
        if (ca.group.as_str(), ca.x, ca.treatment, ca.outcome) != (cb.group.as_str(), cb.x, cb.treatment, cb.outcome) {
            return Err(AuditError::InvalidSpec("observable laws have different supports".into()));
        }
        worst = worst.max((ca.prob - cb.prob).abs());
    }
    Ok(worst)
}

/// Two joints with the same observable law but different group TPRs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub spec_a: SyntheticSpec,
    pub spec_b: SyntheticSpec,
    /// Policy: treat iff `x = 1`.
    pub policy: String,
    pub group: String,
    pub rates_a: RatePair,
    pub rates_b: RatePair,
    pub observable_discrepancy: f64,
    pub observable_law: Vec<ObservableCell>,
}

impl Witness {
    pub fn tpr_gap(&self) -> f64 {
        (self.rates_a.tpr - self.rates_b.tpr).abs()
    }
}

/// Minimum TPR gap the default witness must show.
pub const WITNESS_MIN_GAP: f64 = 0.2;

fn treat_x1(c: &CellSpec) -> bool {
    c.x == 1
}

/// Builds the witness pair on `X in {0, 1}` with `Z = 1[X = 1]`, uniform
/// `(T, X)` and two equiprobable groups. Spec A is monotone with the given
/// `(p01, p11)` per covariate value in both groups. Spec B moves `shift[x]`
/// mass from `(p11, p00)` to `(p01, p10)` in group `a` only, which leaves
/// `p10 + p11` and `p01 + p11` unchanged.
pub fn build_witness(p01: [f64; 2], p11: [f64; 2], shift: [f64; 2]) -> Result<Witness> {
    let cell = |x: usize, group: &str, s: f64| CellSpec {
        x,
        group: group.into(),
        probs: ResponseProbs {
            p00: 1.0 - p01[x] - p11[x] - s,
            p01: p01[x] + s,
            p10: s,
            p11: p11[x] - s,
        },
        propensity: 0.5,
    };
    let make = |shifted: bool| SyntheticSpec {
        feature_names: vec!["x".into()],
        x_support: vec![XPoint { x: vec![0.0], prob: 0.5 }, XPoint { x: vec![1.0], prob: 0.5 }],
        groups: vec![
            GroupSpec { label: "a".into(), prob: 0.5, x_probs: None },
            GroupSpec { label: "b".into(), prob: 0.5, x_probs: None },
        ],
        cells: (0..2)
            .flat_map(|x| [cell(x, "a", if shifted { shift[x] } else { 0.0 }), cell(x, "b", 0.0)])
            .collect(),
    };
    let (spec_a, spec_b) = (make(false), make(true));
    spec_a.validate()?;
    spec_b.validate()?;
    let discrepancy = observable_discrepancy(&spec_a, &spec_b)?;
    Ok(Witness {
        rates_a: true_rates(&spec_a, "a", treat_x1)?,
        rates_b: true_rates(&spec_b, "a", treat_x1)?,
        observable_law: spec_a.observable_law(),
        observable_discrepancy: discrepancy,
        spec_a,
        spec_b,
        policy: "treat iff x = 1".into(),
        group: "a".into(),
    })
}

/// The default witness, verified by enumeration: identical observable laws
/// to 1e-12 and a TPR gap of at least [`WITNESS_MIN_GAP`].
pub fn nonidentifiability_witness() -> Result<Witness> {
    let w = build_witness([0.05, 0.25], [0.45, 0.35], [0.1, 0.0])?;
    if w.observable_discrepancy >= 1e-12 {
        return Err(AuditError::InvalidSpec(format!(
            "witness observable laws differ by {:e}",
            w.observable_discrepancy
        )));
    }
    if w.tpr_gap() < WITNESS_MIN_GAP {
        return Err(AuditError::InvalidSpec(format!("witness TPR gap {} too small", w.tpr_gap())));
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub group: String,
    pub budget: f64,
    pub grid_step: f64,
    /// Step actually used after coarsening to [`MAX_SHARPNESS_GRID`] points.
    pub effective_step: f64,
    pub grid_points: usize,
    pub grid_min: RatePair,
    pub grid_max: RatePair,
    pub closed_lower: RatePair,
    pub closed_upper: RatePair,
    /// Largest distance between a grid extreme and its closed form.
    pub gap: f64,
    /// TNR at the grid argmax of TPR (ties broken toward larger TNR).
    pub tnr_at_tpr_argmax: f64,
    pub simultaneous: bool,
    /// Largest distance between `rho` at the corner allocations and the closed forms.
    pub bang_bang_error: f64,
    pub passes: bool,
}

/// Brute-force check of the closed-form bounds for one group of a
/// population spec: enumerates per-cell `eta` on a grid over
/// `[max(0, -tau), min(B, mu0, 1 - mu1)]` (both ends included) and evaluates the
/// rates directly from their definition.
pub fn sharpness_check(
    spec: &SyntheticSpec,
    group: &str,
    policy: impl Fn(&CellSpec) -> bool,
    budget: f64,
    grid_step: f64,
) -> Result<SharpnessReport> {
    if grid_step.is_nan() || grid_step <= 0.0 {
        return Err(AuditError::Config(format!("grid_step must be positive, got {grid_step}")));
    }
    let units = spec.population_units(group, policy)?;
    let k = units.len();
    if k > MAX_SHARPNESS_SUPPORT {
        return Err(AuditError::SupportTooLarge {
            size: k,
            limit: MAX_SHARPNESS_SUPPORT,
        });
    }
    let closed = bounds(&units.stats(budget)?)?;

    let floors: Vec<f64> = units.units.iter().map(|u| u.floor(budget)).collect();
    let caps: Vec<f64> = units.units.iter().map(|u| u.clip(budget)).collect();
    let widths: Vec<f64> = caps.iter().zip(&floors).map(|(c, f)| c - f).collect();
    let full: usize = widths.iter().map(|w| (w / grid_step).ceil() as usize + 1).product();
    let effective_step = if full <= MAX_SHARPNESS_GRID {
        grid_step
    } else {
        let per_axis = (MAX_SHARPNESS_GRID as f64).powf(1.0 / k as f64).floor().max(2.0);
        let widest = widths.iter().copied().fold(0.0, f64::max);
        grid_step.max(widest / (per_axis - 1.0))
    };
    let axes: Vec<Vec<f64>> = caps
        .iter()
        .zip(&floors)
        .map(|(&cap, &floor)| {
            let mut v: Vec<f64> = (0..)
                .map(|i| floor + i as f64 * effective_step)
                .take_while(|x| *x < cap)
                .collect();
            v.push(cap);
            v
        })
        .collect();

    let total_w: f64 = units.units.iter().map(|u| u.weight).sum();
    let rates = |eta: &[f64]| -> Option<RatePair> {
        let (mut resp, mut resp_z, mut non, mut non_unz) = (0.0, 0.0, 0.0, 0.0);
        for (u, e) in units.units.iter().zip(eta) {
            let w = u.weight / total_w;
            let r = w * (u.tau + e);
            resp += r;
            non += w - r;
            if u.assigned {
                resp_z += r;
            } else {
                non_unz += w - r;
            }
        }
        (resp > 0.0 && non > 0.0).then(|| RatePair {
            tpr: resp_z / resp,
            tnr: non_unz / non,
        })
    };

    let mut grid_min = RatePair { tpr: f64::INFINITY, tnr: f64::INFINITY };
    let mut grid_max = RatePair { tpr: f64::NEG_INFINITY, tnr: f64::NEG_INFINITY };
    let mut argmax = RatePair { tpr: f64::NEG_INFINITY, tnr: f64::NEG_INFINITY };
    let mut idx = vec![0usize; k];
    let mut eta = vec![0.0; k];
    let mut points = 0usize;
    'grid: loop {
        for (e, (i, axis)) in eta.iter_mut().zip(idx.iter().zip(&axes)) {
            *e = axis[*i];
        }
        points += 1;
        if let Some(r) = rates(&eta) {
            grid_min.tpr = grid_min.tpr.min(r.tpr);
            grid_min.tnr = grid_min.tnr.min(r.tnr);
            grid_max.tpr = grid_max.tpr.max(r.tpr);
            grid_max.tnr = grid_max.tnr.max(r.tnr);
            if r.tpr > argmax.tpr || (r.tpr == argmax.tpr && r.tnr > argmax.tnr) {
                argmax = r;
            }
        }
        let mut d = 0;
        loop {
            if d == k {
                break 'grid;
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }

    let gap = [
        (grid_min.tpr, closed.tpr.lower),
        (grid_max.tpr, closed.tpr.upper),
        (grid_min.tnr, closed.tnr.lower),
        (grid_max.tnr, closed.tnr.upper),
    ]
    .iter()
    .map(|(g, c)| (g - c).abs())
    .fold(0.0, f64::max);

    let up = units.rho(&units.extreme_eta(budget, true))?;
    let lo = units.rho(&units.extreme_eta(budget, false))?;
    let bang_bang_error = [
        (up.tpr, closed.tpr.upper),
        (up.tnr, closed.tnr.upper),
        (lo.tpr, closed.tpr.lower),
        (lo.tnr, closed.tnr.lower),
    ]
    .iter()
    .map(|(a, b)| (a - b).abs())
    .fold(0.0, f64::max);

    let tol = 2.0 * grid_step;
    let simultaneous = (argmax.tnr - grid_max.tnr).abs() <= tol;
    Ok(SharpnessReport {
        group: group.to_string(),
        budget,
        grid_step,
        effective_step,
        grid_points: points,
        grid_min,
        grid_max,
        closed_lower: closed.lower_pair(),
        closed_upper: closed.upper_pair(),
        gap,
        tnr_at_tpr_argmax: argmax.tnr,
        simultaneous,
        bang_bang_error,
        passes: gap <= tol && simultaneous,
    })
}
