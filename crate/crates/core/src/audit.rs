//! End-to-end audits: ingest, cross-fit nuisance scores over bootstrap
//! splits, bound rates and disparities for every budget, sweep curves, and
//! write a JSON report plus CSV bands and SVG plots.
//!
//! Results are averaged over splits endpoint by endpoint: each split gives
//! its own interval, and the report holds the mean lower and mean upper
//! endpoint. Curves are evaluated on one threshold grid shared by all
//! splits and averaged pointwise.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{
    average_bands, disparity_band, thinned_grid, xauc_bounds, xroc_band, BandKind, CurveBand, ThresholdSweep,
};
use crate::data::{apply_policy, ingest, Dataset, Policy, Schema};
use crate::error::{AuditError, Result};
use crate::identification::{
    bounds, check_budget, point_rates, GroupBounds, GroupUnits, Metric, RatePair, NEGATIVE_TAU_WARN_FRACTION,
};
use crate::nuisance::{fit_predict_with_folds, resplit_bootstrap, EstimatorKind, NuisanceConfig, DEFAULT_CLIP_EPS};
use crate::support::{disparity_from_bounds, support, ContrastDirection, SupportResult, DEFAULT_GRID_N};
use crate::svg::band_plot;
use crate::synth::{SyntheticSample, SyntheticSpec, Witness};

pub const DEFAULT_BUDGETS: [f64; 5] = [0.0, 0.02, 0.05, 0.1, 0.2];

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RESPONDER_AUDIT_OUT";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("audit-out"), PathBuf::from)
}

/// Where the data comes from and how it is scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub input: PathBuf,
    pub schema: Schema,
    pub estimator: EstimatorKind,
    pub n_folds: usize,
    pub seed: u64,
    pub clip_eps: f64,
    pub include_group: bool,
}

impl DataConfig {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        DataConfig {
            input: input.into(),
            schema: Schema::default(),
            estimator: EstimatorKind::Binning,
            n_folds: 2,
            seed: 0,
            clip_eps: DEFAULT_CLIP_EPS,
            include_group: true,
        }
    }

    fn nuisance(&self) -> NuisanceConfig {
        NuisanceConfig {
            kind: self.estimator,
            n_folds: self.n_folds,
            seed: self.seed,
            clip_eps: self.clip_eps,
            include_group: self.include_group,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    #[serde(flatten)]
    pub data: DataConfig,
    pub n_splits: usize,
    #[serde(rename = "B_list")]
    pub budgets: Vec<f64>,
    /// Groups to audit; empty means every group in the data.
    pub groups: Vec<String>,
    /// Fixed threshold; `None` uses each split's median score.
    pub theta: Option<f64>,
    /// Not embedded in the report, so reruns into different directories
    /// produce identical reports.
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub plots: bool,
}

impl AuditConfig {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        AuditConfig {
            data: DataConfig::new(input),
            n_splits: 50,
            budgets: DEFAULT_BUDGETS.to_vec(),
            groups: Vec::new(),
            theta: None,
            out_dir: default_out_dir(),
            plots: true,
        }
    }

    /// Checks the configuration and sorts the budgets ascending.
    pub fn normalized(&self) -> Result<Self> {
        let mut cfg = self.clone();
        if cfg.budgets.is_empty() {
            return Err(AuditError::Config("B_list is empty".into()));
        }
        for &b in &cfg.budgets {
            check_budget(b)?;
        }
        cfg.budgets.sort_by(f64::total_cmp);
        cfg.budgets.dedup();
        if cfg.n_splits == 0 {
            return Err(AuditError::Config("n_splits must be at least 1".into()));
        }
        if cfg.data.estimator != EstimatorKind::External && cfg.data.n_folds < 2 {
            return Err(AuditError::Config(format!("n_folds must be at least 2, got {}", cfg.data.n_folds)));
        }
        if cfg.theta.is_some_and(|t| !t.is_finite()) {
            return Err(AuditError::Config("theta must be finite".into()));
        }
        Ok(cfg)
    }
}

/// Bounds for one group at one budget. Intervals are absent when every
/// split was degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFragment {
    pub group: String,
    #[serde(rename = "B")]
    pub budget: f64,
    pub tpr: Option<[f64; 2]>,
    pub tnr: Option<[f64; 2]>,
    pub point: Option<RatePair>,
    pub degenerate: bool,
    pub degenerate_splits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityFragment {
    pub metric: Metric,
    pub group_a: String,
    pub group_b: String,
    #[serde(rename = "B")]
    pub budget: f64,
    pub interval: Option<[f64; 2]>,
    pub point: Option<f64>,
    pub degenerate_splits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XaucFragment {
    pub group_a: String,
    pub group_b: String,
    #[serde(rename = "B")]
    pub budget: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub kind: BandKind,
    pub groups: Vec<String>,
    #[serde(rename = "B")]
    pub budget: f64,
    pub file: String,
    /// Thresholds left as gaps in the averaged band.
    pub gaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub tool: String,
    pub version: String,
    pub config: AuditConfig,
    pub seed: u64,
    pub n_units: usize,
    pub groups: Vec<String>,
    pub n_splits: usize,
    /// Threshold used in each split.
    pub thetas: Vec<f64>,
    pub negative_tau_fraction: f64,
    pub warnings: Vec<String>,
    pub rates: Vec<RateFragment>,
    pub disparities: Vec<DisparityFragment>,
    pub xauc: Vec<XaucFragment>,
    pub curves: Vec<BandSummary>,
    pub plots: Vec<String>,
}

impl AuditReport {
    pub fn rate(&self, group: &str, budget: f64) -> Option<&RateFragment> {
        self.rates.iter().find(|r| r.group == group && r.budget == budget)
    }

    pub fn disparity(&self, metric: Metric, a: &str, b: &str, budget: f64) -> Option<&DisparityFragment> {
        self.disparities
            .iter()
            .find(|d| d.metric == metric && d.group_a == a && d.group_b == b && d.budget == budget)
    }
}

/// Ingested data plus cross-fitted `(mu0, mu1)` per split.
pub struct ScoredSplits {
    pub dataset: Dataset,
    pub groups: Vec<String>,
    pub scores: Vec<Vec<(f64, f64)>>,
    pub warnings: Vec<String>,
}

impl ScoredSplits {
    pub fn split(&self, k: usize) -> Result<Dataset> {
        self.dataset.with_scores(&self.scores[k])
    }
}

fn record_scores(ds: &Dataset) -> Result<Vec<(f64, f64)>> {
    ds.records()
        .iter()
        .map(|r| match (r.mu0_hat, r.mu1_hat) {
            (Some(m0), Some(m1)) => Ok((m0, m1)),
            _ => Err(AuditError::MissingScores(r.id.clone())),
        })
        .collect()
}

/// Loads the data and scores it on `n_splits` fold partitions. External
/// scores are fixed, so they give a single split.
pub fn score_splits(data: &DataConfig, groups: &[String], n_splits: usize) -> Result<ScoredSplits> {
    let ds = ingest(&data.input, &data.schema)?;
    let groups: Vec<String> = if groups.is_empty() { ds.groups().to_vec() } else { groups.to_vec() };
    for g in &groups {
        ds.require_group(g)?;
    }
    let mut warnings = Vec::new();
    let cfg = data.nuisance();
    let scores = if data.estimator == EstimatorKind::External {
        if n_splits > 1 {
            warnings.push(format!("external scores are fixed; ignoring n_splits = {n_splits}"));
        }
        let (scored, _) = fit_predict_with_folds(&ds, &cfg, &[])?;
        vec![record_scores(&scored)?]
    } else {
        let partitions = resplit_bootstrap(ds.len(), n_splits, data.n_folds, data.seed)?;
        info!("fitting {} split(s) of {} units", partitions.len(), ds.len());
        let fitted = partitions
            .par_iter()
            .map(|folds| {
                let (scored, model) = fit_predict_with_folds(&ds, &cfg, folds)?;
                Ok((record_scores(&scored)?, model.warnings))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut scores = Vec::with_capacity(fitted.len());
        for (k, (s, w)) in fitted.into_iter().enumerate() {
            warnings.extend(w.into_iter().map(|m| format!("split {k}: {m}")));
            scores.push(s);
        }
        scores
    };
    Ok(ScoredSplits {
        dataset: ds,
        groups,
        scores,
        warnings,
    })
}

/// Median of the effect scores, averaging the two middle values.
pub fn median_score(ds: &Dataset) -> Option<f64> {
    let mut v: Vec<f64> = ds.records().iter().filter_map(|r| r.effect()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

fn choose_theta(ds: &Dataset, theta: Option<f64>) -> Result<f64> {
    match theta {
        Some(t) => Ok(t),
        None => median_score(ds).ok_or_else(|| AuditError::Config("no scores to take a median of".into())),
    }
}

fn group_pairs(groups: &[String]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            out.push((a.clone(), b.clone()));
        }
    }
    out
}

// Group bounds at one budget, or `None` for a degenerate group.
fn bounds_or_degenerate(ds: &Dataset, z: &[bool], group: &str, budget: f64) -> Result<Option<(GroupBounds, RatePair)>> {
    let gs = GroupUnits::from_dataset(ds, z, group)?.stats(budget)?;
    match bounds(&gs).and_then(|b| Ok((b, point_rates(&gs)?))) {
        Ok(v) => Ok(Some(v)),
        Err(AuditError::DegenerateGroup { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

struct SplitResult {
    theta: f64,
    negative_tau_fraction: f64,
    /// `[budget][group]`
    rates: Vec<Vec<Option<(GroupBounds, RatePair)>>>,
    bands: Vec<CurveBand>,
}

/// The bands drawn for each budget: ROC per group, xROC per ordered pair,
/// TPR and TNR disparity per unordered pair.
fn split_bands(ds: &Dataset, groups: &[String], budget: f64, grid: &[f64]) -> Result<Vec<CurveBand>> {
    let sweeps = groups
        .iter()
        .map(|g| ThresholdSweep::from_dataset(ds, g, budget))
        .collect::<Result<Vec<_>>>()?;
    let mut bands = Vec::new();
    for s in &sweeps {
        bands.push(xroc_band(s, s, grid)?);
    }
    for (i, a) in sweeps.iter().enumerate() {
        for (j, b) in sweeps.iter().enumerate() {
            if i != j {
                bands.push(xroc_band(a, b, grid)?);
            }
        }
    }
    for (i, a) in sweeps.iter().enumerate() {
        for b in &sweeps[i + 1..] {
            bands.push(disparity_band(a, b, Metric::Tpr, grid)?);
            bands.push(disparity_band(a, b, Metric::Tnr, grid)?);
        }
    }
    Ok(bands)
}

fn evaluate_split(splits: &ScoredSplits, k: usize, cfg: &AuditConfig, grid: &[f64]) -> Result<SplitResult> {
    let ds = splits.split(k)?;
    let theta = choose_theta(&ds, cfg.theta)?;
    let z = apply_policy(&ds, &Policy::threshold(theta))?;
    let mut rates = Vec::with_capacity(cfg.budgets.len());
    let mut bands = Vec::new();
    for &b in &cfg.budgets {
        rates.push(
            splits
                .groups
                .iter()
                .map(|g| bounds_or_degenerate(&ds, &z, g, b))
                .collect::<Result<Vec<_>>>()?,
        );
        bands.extend(split_bands(&ds, &splits.groups, b, grid)?);
    }
    Ok(SplitResult {
        theta,
        negative_tau_fraction: crate::identification::negative_tau_fraction(&ds),
        rates,
        bands,
    })
}

/// `+inf`, every score seen in any split (thinned), `-inf`.
fn shared_grid(splits: &ScoredSplits) -> Vec<f64> {
    let in_groups: Vec<bool> = splits
        .dataset
        .records()
        .iter()
        .map(|r| splits.groups.contains(&r.group))
        .collect();
    let mut all: Vec<f64> = splits
        .scores
        .iter()
        .flat_map(|s| s.iter().zip(&in_groups).filter(|(_, keep)| **keep).map(|((m0, m1), _)| m1 - m0))
        .collect();
    all.push(f64::INFINITY);
    all.push(f64::NEG_INFINITY);
    thinned_grid(&all)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Everything an audit computes, before anything is written.
pub struct AuditOutcome {
    pub report: AuditReport,
    /// Split-averaged bands, in report order.
    pub bands: Vec<CurveBand>,
}

pub fn compute_audit(cfg: &AuditConfig) -> Result<AuditOutcome> {
    let cfg = cfg.normalized()?;
    let splits = score_splits(&cfg.data, &cfg.groups, cfg.n_splits)?;
    let grid = shared_grid(&splits);
    let results = (0..splits.scores.len())
        .into_par_iter()
        .map(|k| evaluate_split(&splits, k, &cfg, &grid))
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = splits.warnings.clone();
    let neg = results.iter().map(|r| r.negative_tau_fraction).sum::<f64>() / results.len() as f64;
    if neg > NEGATIVE_TAU_WARN_FRACTION {
        warnings.push(format!(
            "{:.1}% of effect scores are negative; monotone response looks doubtful, prefer B > 0",
            100.0 * neg
        ));
    }

    let groups = &splits.groups;
    let mut rates = Vec::new();
    let mut disparities = Vec::new();
    for (bi, &budget) in cfg.budgets.iter().enumerate() {
        for (gi, g) in groups.iter().enumerate() {
            let ok: Vec<&(GroupBounds, RatePair)> = results.iter().filter_map(|r| r.rates[bi][gi].as_ref()).collect();
            let avg = |f: &dyn Fn(&(GroupBounds, RatePair)) -> f64| mean(&ok.iter().map(|v| f(v)).collect::<Vec<_>>());
            let pair = |lo: Option<f64>, hi: Option<f64>| lo.zip(hi).map(|(l, h)| [l, h]);
            let degenerate_splits = results.len() - ok.len();
            if degenerate_splits > 0 {
                warnings.push(format!("group `{g}`, B = {budget}: degenerate in {degenerate_splits} split(s)"));
            }
            rates.push(RateFragment {
                group: g.clone(),
                budget,
                tpr: pair(avg(&|v| v.0.tpr.lower), avg(&|v| v.0.tpr.upper)),
                tnr: pair(avg(&|v| v.0.tnr.lower), avg(&|v| v.0.tnr.upper)),
                point: avg(&|v| v.1.tpr).zip(avg(&|v| v.1.tnr)).map(|(tpr, tnr)| RatePair { tpr, tnr }),
                degenerate: ok.is_empty(),
                degenerate_splits,
            });
        }
        for (a, b) in group_pairs(groups) {
            let ia = groups.iter().position(|g| *g == a).expect("listed group");
            let ib = groups.iter().position(|g| *g == b).expect("listed group");
            for metric in [Metric::Tpr, Metric::Tnr] {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                let mut pt = Vec::new();
                for r in &results {
                    if let (Some((ba, pa)), Some((bb, pb))) = (&r.rates[bi][ia], &r.rates[bi][ib]) {
                        let d = disparity_from_bounds(ba, bb, metric);
                        lo.push(d.lower);
                        hi.push(d.upper);
                        pt.push(match metric {
                            Metric::Tpr => pa.tpr - pb.tpr,
                            Metric::Tnr => pa.tnr - pb.tnr,
                        });
                    }
                }
                disparities.push(DisparityFragment {
                    metric,
                    group_a: a.clone(),
                    group_b: b.clone(),
                    budget,
                    interval: mean(&lo).zip(mean(&hi)).map(|(l, h)| [l, h]),
                    point: mean(&pt),
                    degenerate_splits: results.len() - lo.len(),
                });
            }
        }
    }

    let n_bands = results[0].bands.len();
    let mut bands = Vec::with_capacity(n_bands);
    for i in 0..n_bands {
        let per_split: Vec<CurveBand> = results.iter().map(|r| r.bands[i].clone()).collect();
        bands.push(average_bands(&per_split, Some(&grid))?);
    }

    let mut xauc = Vec::new();
    for band in bands.iter().filter(|b| b.kind == BandKind::Xroc) {
        let (lower, upper) = match xauc_bounds(band) {
            Ok((l, h)) => (Some(l), Some(h)),
            Err(e) => {
                warnings.push(format!("xAUC {:?} B = {}: {e}", band.groups, band.budget));
                (None, None)
            }
        };
        xauc.push(XaucFragment {
            group_a: band.groups[0].clone(),
            group_b: band.groups[1].clone(),
            budget: band.budget,
            lower,
            upper,
        });
    }

    let curves = bands
        .iter()
        .map(|b| BandSummary {
            kind: b.kind,
            groups: b.groups.clone(),
            budget: b.budget,
            file: format!("curves/{}.csv", b.file_stem()),
            gaps: b.gaps(),
        })
        .collect();

    for w in &warnings {
        warn!("{w}");
    }
    let report = AuditReport {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.data.seed,
        n_units: splits.dataset.len(),
        groups: groups.clone(),
        n_splits: results.len(),
        thetas: results.iter().map(|r| r.theta).collect(),
        negative_tau_fraction: neg,
        warnings,
        rates,
        disparities,
        xauc,
        curves,
        plots: Vec::new(),
        config: cfg,
    };
    Ok(AuditOutcome { report, bands })
}

fn plot_name(b: &CurveBand) -> String {
    format!("{}_{}.svg", b.kind, b.groups.join("_"))
}

/// Writes `curves/*.csv` and, when asked, `plots/*.svg` (one plot per band
/// kind and group set, shaded per budget). Returns paths relative to `out`.
pub fn write_curves(out: &Path, bands: &[CurveBand], plots: bool) -> Result<(Vec<String>, Vec<String>)> {
    fs::create_dir_all(out.join("curves"))?;
    let mut csvs = Vec::new();
    for b in bands {
        let rel = format!("curves/{}.csv", b.file_stem());
        b.write_csv(fs::File::create(out.join(&rel))?)?;
        csvs.push(rel);
    }
    let mut svgs = Vec::new();
    if plots {
        fs::create_dir_all(out.join("plots"))?;
        let mut seen: Vec<String> = Vec::new();
        for b in bands {
            let name = plot_name(b);
            if seen.contains(&name) {
                continue;
            }
            let family: Vec<CurveBand> = bands.iter().filter(|o| plot_name(o) == name).cloned().collect();
            let title = format!("{} {}", b.kind, b.groups.join(" vs "));
            let rel = format!("plots/{name}");
            fs::write(out.join(&rel), band_plot(&title, &family))?;
            svgs.push(rel);
            seen.push(name);
        }
    }
    Ok((csvs, svgs))
}

/// Runs the audit and writes `report.json`, the curve CSVs and the plots
/// into `cfg.out_dir`.
pub fn run_audit(cfg: &AuditConfig) -> Result<AuditReport> {
    let AuditOutcome { mut report, bands } = compute_audit(cfg)?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out)?;
    let (_, svgs) = write_curves(out, &bands, cfg.plots)?;
    report.plots = svgs;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(out.join("report.json"), text)?;
    info!("report written to {}", out.join("report.json").display());
    Ok(report)
}

/// Curves only: the same pipeline as [`run_audit`] without `report.json`.
pub fn cmd_curves(cfg: &AuditConfig) -> Result<Vec<PathBuf>> {
    let AuditOutcome { bands, .. } = compute_audit(cfg)?;
    let (csvs, svgs) = write_curves(&cfg.out_dir, &bands, cfg.plots)?;
    Ok(csvs.into_iter().chain(svgs).map(|p| cfg.out_dir.join(p)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportConfig {
    #[serde(flatten)]
    pub data: DataConfig,
    /// Contrast in `group:tpr_coef:tnr_coef,...` form.
    pub mu: String,
    #[serde(rename = "B")]
    pub budget: f64,
    pub grid_n: usize,
    pub theta: Option<f64>,
}

impl SupportConfig {
    pub fn new(input: impl Into<PathBuf>, mu: impl Into<String>, budget: f64) -> Self {
        SupportConfig {
            data: DataConfig::new(input),
            mu: mu.into(),
            budget,
            grid_n: DEFAULT_GRID_N,
            theta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub config: SupportConfig,
    pub theta: f64,
    #[serde(flatten)]
    pub result: SupportResult,
}

/// Support function on the first split's scores, which are the scores an
/// audit with the same seed uses in its first split.
pub fn cmd_support(cfg: &SupportConfig) -> Result<SupportReport> {
    check_budget(cfg.budget)?;
    let mu = ContrastDirection::parse(&cfg.mu).map_err(|e| AuditError::Config(e.to_string()))?;
    let groups: Vec<String> = mu.coefficients.iter().map(|c| c.group.clone()).collect();
    let splits = score_splits(&cfg.data, &groups, 1)?;
    let ds = splits.split(0)?;
    let theta = choose_theta(&ds, cfg.theta)?;
    let z = apply_policy(&ds, &Policy::threshold(theta))?;
    let result = support(&ds, &z, &mu, cfg.budget, cfg.grid_n)?;
    Ok(SupportReport {
        config: cfg.clone(),
        theta,
        result,
    })
}

/// Draws a sample from a spec file and writes it as delimited text; the
/// response types go to `types_out` if given, never into the sample.
pub fn cmd_simulate(spec: &Path, n: usize, seed: u64, out: &Path, types_out: Option<&Path>) -> Result<SyntheticSample> {
    let spec = SyntheticSpec::load(spec)?;
    let sample = spec.generate(n, seed)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    sample.dataset.write_file(out, &Schema::default())?;
    if let Some(path) = types_out {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["id", "response_type"])?;
        for (r, t) in sample.dataset.records().iter().zip(&sample.response_types) {
            w.write_record([r.id.as_str(), serde_json::to_value(t)?.as_str().unwrap_or_default()])?;
        }
        w.flush()?;
    }
    Ok(sample)
}

/// Plain-text rendering of the witness: the shared observable law and the
/// two TPRs.
pub fn render_witness(w: &Witness) -> String {
    let mut s = String::new();
    s.push_str("Two joints of (Y(0), Y(1)) with the same observable law\n\n");
    s.push_str("group  x  p00    p01    p10    p11    (joint A | joint B)\n");
    for (ca, cb) in w.spec_a.cells.iter().zip(&w.spec_b.cells) {
        let (a, b) = (ca.probs, cb.probs);
        s.push_str(&format!(
            "{:<5}  {}  {:.3}  {:.3}  {:.3}  {:.3}  |  {:.3}  {:.3}  {:.3}  {:.3}\n",
            ca.group, ca.x, a.p00, a.p01, a.p10, a.p11, b.p00, b.p01, b.p10, b.p11
        ));
    }
    s.push_str("\nObservable law P(A, X, T, Y), identical under both joints\n");
    s.push_str("group  x  t  y  prob\n");
    for c in &w.observable_law {
        s.push_str(&format!(
            "{:<5}  {}  {}  {}  {:.6}\n",
            c.group,
            c.x,
            u8::from(c.treatment),
            u8::from(c.outcome),
            c.prob
        ));
    }
    s.push_str(&format!(
        "\nmax observable discrepancy: {:e}\npolicy: {}\nTPR of group `{}`: {:.4} under A, {:.4} under B (gap {:.4})\n",
        w.observable_discrepancy,
        w.policy,
        w.group,
        w.rates_a.tpr,
        w.rates_b.tpr,
        w.tpr_gap()
    ));
    s
}
