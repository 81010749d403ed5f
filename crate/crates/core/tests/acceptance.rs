//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs with `harness = false` so the summary is printed even on success.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use responder_audit::audit::{compute_audit, run_audit, AuditConfig};
use responder_audit::curves::{
    curve_area, roc_band, xauc_bounds, xroc_band, default_thresholds, BandKind, BandPoint, CurveBand, Point,
    ThresholdSweep,
};
use responder_audit::data::Schema;
use responder_audit::identification::{bounds, point_rates, GroupBounds, GroupUnits, RateInterval, ScoredUnit};
use responder_audit::support::{allocate_budget, support_on_groups, ContrastDirection, GroupContrast};
use responder_audit::synth::{
    nonidentifiability_witness, sharpness_check, threshold_policy, true_rates, CellSpec, GroupSpec, ResponseProbs,
    SyntheticSpec, XPoint,
};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Random population with `n_x` covariate points and the given groups.
/// Each cell's anti-responder probability is uniform on `[0, p10_max]`.
fn random_spec(rng: &mut ChaCha8Rng, n_x: usize, groups: &[&str], p10_max: f64) -> SyntheticSpec {
    let x_support = (0..n_x)
        .map(|i| XPoint { x: vec![i as f64], prob: 1.0 / n_x as f64 })
        .collect();
    let group_specs = groups
        .iter()
        .map(|g| {
            let raw: Vec<f64> = (0..n_x).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = raw.iter().sum();
            GroupSpec {
                label: g.to_string(),
                prob: 1.0 / groups.len() as f64,
                x_probs: Some(raw.iter().map(|v| v / s).collect()),
            }
        })
        .collect();
    let mut cells = Vec::new();
    for g in groups {
        for x in 0..n_x {
            let p10 = if p10_max > 0.0 { rng.random_range(0.0..=p10_max) } else { 0.0 };
            let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum::<f64>() / (1.0 - p10);
            let (p00, p01) = (raw[0] / s, raw[1] / s);
            cells.push(CellSpec {
                x,
                group: g.to_string(),
                probs: ResponseProbs { p00, p01, p10, p11: 1.0 - p10 - p00 - p01 },
                propensity: rng.random_range(0.2..0.8),
            });
        }
    }
    let spec = SyntheticSpec {
        feature_names: vec!["x".into()],
        x_support,
        groups: group_specs,
        cells,
    };
    spec.validate().expect("generated spec is valid");
    spec
}

fn random_theta(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> f64 {
    let taus: Vec<f64> = spec.cells.iter().map(|c| c.probs.tau()).collect();
    let lo = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    rng.random_range(lo - 0.05..hi + 0.05)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..200 {
        let n_x = rng.random_range(1..=6);
        let spec = random_spec(&mut rng, n_x, &["a", "b"], 0.0);
        let theta = random_theta(&mut rng, &spec);
        for g in ["a", "b"] {
            let truth = true_rates(&spec, g, threshold_policy(theta)).map_err(|e| e.to_string())?;
            let units = spec.population_units(g, threshold_policy(theta)).map_err(|e| e.to_string())?;
            let est = point_rates(&units.stats(0.0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            worst = worst.max((est.tpr - truth.tpr).abs()).max((est.tnr - truth.tnr).abs());
            checked += 1;
        }
    }
    check(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("{checked} group/spec pairs from 200 specs, max deviation {worst:.1e}"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let step = 1e-3;
    let (mut worst_gap, mut worst_bb, mut coarsest): (f64, f64, f64) = (0.0, 0.0, step);
    let mut runs = 0;
    for _ in 0..25 {
        let n_x = rng.random_range(1..=4);
        let spec = random_spec(&mut rng, n_x, &["a"], 0.0);
        let theta = random_theta(&mut rng, &spec);
        for budget in [0.05, 0.1, 0.3] {
            let rep = sharpness_check(&spec, "a", threshold_policy(theta), budget, step).map_err(|e| e.to_string())?;
            check(rep.simultaneous, || format!("simultaneity failed: {rep:?}"))?;
            worst_gap = worst_gap.max(rep.gap);
            worst_bb = worst_bb.max(rep.bang_bang_error);
            coarsest = coarsest.max(rep.effective_step);
            runs += 1;
        }
    }
    check(worst_gap <= 2.0 * step, || format!("grid gap {worst_gap:e} > {:e}", 2.0 * step))?;
    check(worst_bb <= 1e-12, || format!("bang-bang error {worst_bb:e}"))?;
    Ok(format!(
        "{runs} runs, max grid gap {worst_gap:.1e}, max bang-bang error {worst_bb:.1e}, coarsest grid step {coarsest:.1e}"
    ))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = Vec::new();
    let mut checked = 0;
    for i in 0..150 {
        let budget = [0.02, 0.05, 0.1, 0.2, 0.3][i % 5];
        let n_x = rng.random_range(1..=6);
        let spec = random_spec(&mut rng, n_x, &["a", "b"], budget);
        let theta = random_theta(&mut rng, &spec);
        for g in ["a", "b"] {
            let truth = true_rates(&spec, g, threshold_policy(theta)).map_err(|e| e.to_string())?;
            let units = spec.population_units(g, threshold_policy(theta)).map_err(|e| e.to_string())?;
            let b = match units.stats(budget).and_then(|gs| bounds(&gs)) {
                Ok(b) => b,
                Err(e) => {
                    violations.push(format!("spec {i} group {g}: {e}"));
                    continue;
                }
            };
            checked += 1;
            if !(b.tpr.contains(truth.tpr, 1e-12) && b.tnr.contains(truth.tnr, 1e-12)) {
                violations.push(format!(
                    "spec {i} group {g} B={budget}: truth ({:.4}, {:.4}) outside TPR [{:.4}, {:.4}] TNR [{:.4}, {:.4}]",
                    truth.tpr, truth.tnr, b.tpr.lower, b.tpr.upper, b.tnr.lower, b.tnr.upper
                ));
            }
        }
    }
    for v in &violations {
        eprintln!("  {v}");
    }
    check(violations.is_empty(), || format!("{} violation(s); first: {}", violations.len(), violations[0]))?;
    Ok(format!("{checked} group/spec pairs from 150 specs, 0 violations"))
}

fn criterion_4() -> Outcome {
    let w = nonidentifiability_witness().map_err(|e| e.to_string())?;
    check(w.observable_discrepancy < 1e-12, || format!("discrepancy {:e}", w.observable_discrepancy))?;
    check(w.tpr_gap() >= 0.05, || format!("TPR gap {}", w.tpr_gap()))?;
    Ok(format!(
        "discrepancy {:.1e}, TPR {:.4} vs {:.4} (gap {:.4})",
        w.observable_discrepancy,
        w.rates_a.tpr,
        w.rates_b.tpr,
        w.tpr_gap()
    ))
}

fn random_group(rng: &mut ChaCha8Rng, label: &str, n: usize) -> GroupUnits {
    let units = (0..n)
        .map(|_| {
            let mu0 = rng.random_range(0.0..0.7);
            let mu1 = mu0 + rng.random_range(0.0..1.0) * (1.0 - mu0);
            ScoredUnit {
                weight: 1.0,
                tau: mu1 - mu0,
                mu0,
                mu1,
                assigned: rng.random_bool(0.5),
            }
        })
        .collect();
    GroupUnits::new(label, units)
}

// Exhaustive vertex enumeration of max c.x s.t. sum x = s, 0 <= x <= cap:
// every vertex has all coordinates but at most one at a bound.
fn lp_vertices(coefs: &[f64], caps: &[f64], s: f64) -> Option<f64> {
    let n = coefs.len();
    let mut best: Option<f64> = None;
    for mask in 0..(1u32 << n) {
        let at_cap = |i: usize| mask & (1 << i) != 0;
        let fixed: f64 = (0..n).filter(|&i| at_cap(i)).map(|i| caps[i]).sum();
        let base: f64 = (0..n).filter(|&i| at_cap(i)).map(|i| coefs[i] * caps[i]).sum();
        let mut consider = |v: f64| best = Some(best.map_or(v, |b: f64| b.max(v)));
        if (fixed - s).abs() <= 1e-12 {
            consider(base);
        }
        for free in (0..n).filter(|&i| !at_cap(i)) {
            let r = s - fixed;
            if r >= -1e-12 && r <= caps[free] + 1e-12 {
                consider(base + coefs[free] * r);
            }
        }
    }
    best
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid_n = 2001;
    let tol = 2.0 / grid_n as f64;
    let (mut worst_unit, mut worst_hom, mut worst_sep, mut worst_lp): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for trial in 0..20 {
        let ga = { let n = rng.random_range(2..40); random_group(&mut rng, "a", n) };
        let gb = { let n = rng.random_range(2..40); random_group(&mut rng, "b", n) };
        if ga.units.iter().all(|u| u.assigned) || ga.units.iter().all(|u| !u.assigned) {
            continue;
        }
        let budget = [0.0, 0.05, 0.1, 0.3][trial % 4];
        let groups = [ga.clone(), gb.clone()];
        let closed = bounds(&ga.stats(budget).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let h = |mu: &ContrastDirection| support_on_groups(&groups, mu, budget, grid_n).map(|r| r.value);
        let dir = |tpr, tnr| ContrastDirection::single("a", tpr, tnr).unwrap();
        for (mu, expect) in [
            (dir(1.0, 0.0), closed.tpr.upper),
            (dir(-1.0, 0.0), -closed.tpr.lower),
            (dir(0.0, 1.0), closed.tnr.upper),
            (dir(0.0, -1.0), -closed.tnr.lower),
        ] {
            let v = h(&mu).map_err(|e| e.to_string())?;
            worst_unit = worst_unit.max((v - expect).abs());
        }

        let mu = ContrastDirection::new(vec![
            GroupContrast { group: "a".into(), tpr: rng.random_range(-1.0..1.0), tnr: rng.random_range(-1.0..1.0) },
            GroupContrast { group: "b".into(), tpr: rng.random_range(-1.0..1.0), tnr: rng.random_range(-1.0..1.0) },
        ])
        .unwrap();
        let base = match h(&mu) {
            Ok(v) => v,
            // a random direction can hit the t = 1 singularity on every grid point
            Err(_) => continue,
        };
        for c in [0.5, 2.0, 7.0] {
            let scaled = h(&mu.scaled(c).unwrap()).map_err(|e| e.to_string())?;
            worst_hom = worst_hom.max((scaled - c * base).abs());
        }
        let parts: f64 = mu
            .coefficients
            .iter()
            .map(|g| h(&ContrastDirection::new(vec![g.clone()]).unwrap()))
            .sum::<Result<f64, _>>()
            .map_err(|e| e.to_string())?;
        worst_sep = worst_sep.max((parts - base).abs());
    }
    for _ in 0..500 {
        let n = rng.random_range(1..=6);
        let coefs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let caps: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
        let s = rng.random_range(0.0..caps.iter().sum::<f64>());
        let x = allocate_budget(&coefs, &caps, s).ok_or("greedy reported infeasible")?;
        let greedy: f64 = x.iter().zip(&coefs).map(|(x, c)| x * c).sum();
        let exact = lp_vertices(&coefs, &caps, s).ok_or("vertex enumeration found nothing")?;
        worst_lp = worst_lp.max((greedy - exact).abs());
    }
    check(worst_unit <= tol, || format!("unit-direction error {worst_unit:e} > {tol:e}"))?;
    check(worst_hom <= 1e-9, || format!("homogeneity error {worst_hom:e}"))?;
    check(worst_sep <= 1e-9, || format!("separability error {worst_sep:e}"))?;
    check(worst_lp <= 1e-12, || format!("greedy vs vertices {worst_lp:e}"))?;
    Ok(format!(
        "unit directions {worst_unit:.1e} (tol {tol:.1e}), homogeneity {worst_hom:.1e}, separability {worst_sep:.1e}, greedy vs vertices {worst_lp:.1e}"
    ))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let budgets = [0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0];
    for _ in 0..100 {
        let g = { let n = rng.random_range(2..30); random_group(&mut rng, "a", n) };
        let other = { let n = rng.random_range(2..30); random_group(&mut rng, "b", n) };
        let mut prev: Option<GroupBounds> = None;
        for &b in &budgets {
            let Ok(cur) = g.stats(b).and_then(|gs| bounds(&gs)) else { continue };
            if b == 0.0 {
                check(cur.tpr.lower == cur.tpr.upper && cur.tnr.lower == cur.tnr.upper, || {
                    format!("B=0 did not collapse: {cur:?}")
                })?;
            }
            if let Some(p) = &prev {
                let nested = |outer: &RateInterval, inner: &RateInterval| {
                    outer.lower <= inner.lower + 1e-12 && inner.upper <= outer.upper + 1e-12
                };
                check(nested(&cur.tpr, &p.tpr) && nested(&cur.tnr, &p.tnr), || {
                    format!("not nested at B={b}: {p:?} vs {cur:?}")
                })?;
            }
            prev = Some(cur);
        }
        let sat = g.saturation_budget();
        if let (Ok(at), Ok(full)) = (
            g.stats(sat).and_then(|gs| bounds(&gs)),
            g.stats(1.0).and_then(|gs| bounds(&gs)),
        ) {
            let same = |a: &RateInterval, b: &RateInterval| a.lower == b.lower && a.upper == b.upper;
            check(same(&at.tpr, &full.tpr) && same(&at.tnr, &full.tnr), || {
                format!("bounds still move past saturation B={sat}")
            })?;
        }

        let sa = ThresholdSweep::new(&g, 0.1).map_err(|e| e.to_string())?;
        let sb = ThresholdSweep::new(&other, 0.1).map_err(|e| e.to_string())?;
        let grid = default_thresholds(&[&sa, &sb]);
        let roc = roc_band(&sa, &grid).map_err(|e| e.to_string())?;
        let xaa = xroc_band(&sa, &sa, &grid).map_err(|e| e.to_string())?;
        check(roc == xaa, || "xROC(a, a) differs from ROC(a)".into())?;
        if roc.gaps().is_empty() {
            let first = roc.points[0];
            let last = roc.points[roc.points.len() - 1];
            let origin = Some(Point { x: 0.0, y: 0.0 });
            let corner = Some(Point { x: 1.0, y: 1.0 });
            check(first.lower == origin && first.upper == origin, || format!("ROC starts at {first:?}"))?;
            check(last.lower == corner && last.upper == corner, || format!("ROC ends at {last:?}"))?;
        }
        let xab = xroc_band(&sa, &sb, &grid).map_err(|e| e.to_string())?;
        if let Ok((lo, hi)) = xauc_bounds(&xab) {
            check(lo <= hi + 1e-12, || format!("xAUC bounds reversed: {lo} > {hi}"))?;
        }
    }
    let diag: Vec<BandPoint> = (0..=100)
        .rev()
        .map(|i| {
            let p = Some(Point { x: i as f64 / 100.0, y: i as f64 / 100.0 });
            BandPoint { theta: -(i as f64), lower: p, upper: p }
        })
        .collect();
    let band = CurveBand { kind: BandKind::Xroc, groups: vec!["a".into(), "b".into()], budget: 0.0, points: diag };
    let (lo, hi) = xauc_bounds(&band).map_err(|e| e.to_string())?;
    check((lo - 0.5).abs() <= 1e-9 && (hi - 0.5).abs() <= 1e-9, || format!("diagonal xAUC ({lo}, {hi})"))?;
    check(curve_area(&band.lower_curve()).is_ok(), || "diagonal area failed".into())?;
    Ok("nesting, B=0 collapse, saturation, ROC endpoints, xROC(a,a)=ROC(a), diagonal xAUC over 100 random groups".into())
}

/// Three covariate values per group with well separated effects; the
/// delta-method standard error of each point rate at n = 50000 is about 0.005.
fn recovery_spec() -> SyntheticSpec {
    let cells = [
        ("a", 0, 0.2, 0.10),
        ("a", 1, 0.5, 0.10),
        ("a", 2, 0.8, 0.10),
        ("b", 0, 0.2, 0.10),
        ("b", 1, 0.5, 0.10),
        ("b", 2, 0.8, 0.05),
    ];
    SyntheticSpec {
        feature_names: vec!["x".into()],
        x_support: (0..3).map(|i| XPoint { x: vec![i as f64], prob: 1.0 / 3.0 }).collect(),
        groups: vec![
            GroupSpec { label: "a".into(), prob: 0.5, x_probs: Some(vec![0.3, 0.3, 0.4]) },
            GroupSpec { label: "b".into(), prob: 0.5, x_probs: Some(vec![0.4, 0.3, 0.3]) },
        ],
        cells: cells
            .iter()
            .map(|&(g, x, p01, p11)| CellSpec {
                x,
                group: g.into(),
                probs: ResponseProbs { p00: 1.0 - p01 - p11, p01, p10: 0.0, p11 },
                propensity: 0.5,
            })
            .collect(),
    }
}

fn criterion_7(dir: &Path) -> Outcome {
    let spec = recovery_spec();
    let sample = spec.generate(50_000, 7).map_err(|e| e.to_string())?;
    let input = dir.join("recovery.csv");
    sample.dataset.write_file(&input, &Schema::default()).map_err(|e| e.to_string())?;
    let theta = 0.65;
    let mut cfg = AuditConfig::new(&input);
    cfg.n_splits = 50;
    cfg.budgets = vec![0.0];
    cfg.theta = Some(theta);
    cfg.data.seed = 11;

    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let outcome = pool.install(|| compute_audit(&cfg)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut worst_rate: f64 = 0.0;
    for g in ["a", "b"] {
        let truth = true_rates(&spec, g, threshold_policy(theta)).map_err(|e| e.to_string())?;
        let point = outcome.report.rate(g, 0.0).and_then(|r| r.point).ok_or("missing point rates")?;
        worst_rate = worst_rate.max((point.tpr - truth.tpr).abs()).max((point.tnr - truth.tnr).abs());
    }

    // population step function at midpoints between (and beyond) the cell effects
    let band = outcome
        .bands
        .iter()
        .find(|b| b.kind == BandKind::TprDisparity)
        .ok_or("no disparity band")?;
    let mut worst_curve: f64 = 0.0;
    let mut compared = 0;
    for probe in [0.9, 0.65, 0.35, 0.1] {
        let truth = true_rates(&spec, "a", threshold_policy(probe)).map_err(|e| e.to_string())?.tpr
            - true_rates(&spec, "b", threshold_policy(probe)).map_err(|e| e.to_string())?.tpr;
        let Some(BandPoint { lower: Some(lo), upper: Some(hi), .. }) = band.step_at(probe) else { continue };
        worst_curve = worst_curve.max((lo.y - truth).abs()).max((hi.y - truth).abs());
        compared += 1;
    }
    check(worst_rate <= 0.02, || format!("point rates off by {worst_rate:.4}"))?;
    check(compared == 4, || format!("only {compared} of 4 probe thresholds were non-gap"))?;
    check(worst_curve <= 0.03, || format!("disparity curve off by {worst_curve:.4}"))?;
    check(elapsed < 120.0, || format!("took {elapsed:.1} s"))?;
    Ok(format!(
        "point rates within {worst_rate:.4}, disparity curve within {worst_curve:.4}, {elapsed:.1} s single-threaded"
    ))
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = vec![("report.json".to_string(), std::fs::read(dir.join("report.json")).unwrap_or_default())];
    let mut csvs: Vec<_> = std::fs::read_dir(dir.join("curves"))
        .map(|it| it.filter_map(|e| e.ok()).map(|e| e.path()).collect())
        .unwrap_or_default();
    csvs.sort();
    for p in csvs {
        out.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()));
    }
    out
}

fn criterion_8(dir: &Path) -> Outcome {
    let spec = recovery_spec();
    let input = dir.join("determinism.csv");
    spec.generate(4000, 8)
        .and_then(|s| s.dataset.write_file(&input, &Schema::default()))
        .map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for run in 0..2 {
        let mut cfg = AuditConfig::new(&input);
        cfg.n_splits = 10;
        cfg.budgets = vec![0.0, 0.05, 0.1];
        cfg.data.seed = 99;
        cfg.out_dir = dir.join(format!("run{run}"));
        run_audit(&cfg).map_err(|e| e.to_string())?;
        trees.push(read_tree(&cfg.out_dir));
    }
    check(trees[0].len() > 1, || "no curve files written".into())?;
    check(trees[0] == trees[1], || "outputs differ between runs".into())?;
    Ok(format!("{} files byte-identical across two runs", trees[0].len()))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("point identification equals exact enumeration", Box::new(criterion_1)),
        ("sharpness against exhaustive eta grid", Box::new(criterion_2)),
        ("containment of true rates", Box::new(criterion_3)),
        ("non-identifiability witness", Box::new(criterion_4)),
        ("support function consistency", Box::new(criterion_5)),
        ("structural invariants", Box::new(criterion_6)),
        ("end-to-end recovery", Box::new(|| criterion_7(dir.path()))),
        ("determinism", Box::new(|| criterion_8(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
