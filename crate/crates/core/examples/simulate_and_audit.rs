//! Draws a trial from a synthetic spec, runs the full audit and compares the
//! reported intervals with the population rates.
//!
//!     cargo run --release --example simulate_and_audit [n]

use responder_audit::audit::{compute_audit, AuditConfig};
use responder_audit::data::Schema;
use responder_audit::synth::{threshold_policy, true_rates, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20_000);
    let spec = SyntheticSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/two_groups.json"))?;
    let sample = spec.generate(n, 1)?;

    let dir = tempfile::tempdir()?;
    let input = dir.path().join("trial.csv");
    sample.dataset.write_file(&input, &Schema::default())?;

    let theta = 0.3;
    let mut cfg = AuditConfig::new(&input);
    cfg.n_splits = 20;
    cfg.budgets = vec![0.0, 0.05, 0.1];
    cfg.theta = Some(theta);
    let outcome = compute_audit(&cfg)?;
    let report = &outcome.report;

    for w in &report.warnings {
        println!("warning: {w}");
    }
    for g in ["a", "b"] {
        let truth = true_rates(&spec, g, threshold_policy(theta))?;
        println!("group {g}: population TPR {:.4}  TNR {:.4}", truth.tpr, truth.tnr);
        for &b in &cfg.budgets {
            let Some(r) = report.rate(g, b) else { continue };
            let fmt = |v: Option<[f64; 2]>| v.map_or("-".into(), |[l, h]| format!("[{l:.4}, {h:.4}]"));
            println!("  B={b:<4}  TPR {}  TNR {}", fmt(r.tpr), fmt(r.tnr));
        }
    }
    for x in &report.xauc {
        if let (Some(lo), Some(hi)) = (x.lower, x.upper) {
            println!("xAUC({}, {}) at B={}: [{lo:.4}, {hi:.4}]", x.group_a, x.group_b, x.budget);
        }
    }
    Ok(())
}
