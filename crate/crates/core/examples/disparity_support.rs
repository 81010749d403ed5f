//! Extremes of a TPR disparity two ways: from the per-group intervals and from
//! the support function of the joint identified set. Also evaluates a mixed
//! direction that no single interval answers.

use responder_audit::data::{apply_policy, Dataset, Policy, UnitRecord};
use responder_audit::identification::Metric;
use responder_audit::support::{disparity_extremes, support, ContrastDirection, DEFAULT_GRID_N};

fn main() -> responder_audit::error::Result<()> {
    let mut records = Vec::new();
    for i in 0..60u32 {
        let group = if i < 30 { "a" } else { "b" };
        let mu0 = 0.15 + 0.02 * f64::from(i % 10);
        let mu1 = mu0 + 0.05 * f64::from(i % 6);
        records.push(UnitRecord::new(format!("u{i}"), group, i % 2 == 0, i % 3 == 0).with_scores(mu0, mu1.min(0.99)));
    }
    let ds = Dataset::new(records, vec![])?;
    let z = apply_policy(&ds, &Policy::threshold(0.12))?;
    let budget = 0.05;

    let d = disparity_extremes(&ds, &z, "a", "b", Metric::Tpr, budget)?;
    println!("TPR_a - TPR_b from intervals: [{:.5}, {:.5}]", d.lower, d.upper);

    let up = support(&ds, &z, &ContrastDirection::difference("a", "b", Metric::Tpr)?, budget, DEFAULT_GRID_N)?;
    let down = support(&ds, &z, &ContrastDirection::difference("b", "a", Metric::Tpr)?, budget, DEFAULT_GRID_N)?;
    println!("TPR_a - TPR_b from support:   [{:.5}, {:.5}]", -down.value, up.value);

    let mixed = ContrastDirection::parse("a:1:0.5,b:-1:0")?;
    let s = support(&ds, &z, &mixed, budget, DEFAULT_GRID_N)?;
    println!("max TPR_a + 0.5 TNR_a - TPR_b = {:.5}", s.value);
    for g in &s.groups {
        println!("  {}: TPR {:.4} TNR {:.4} at t = {:.4}", g.group, g.rates.tpr, g.rates.tnr, g.t);
    }
    Ok(())
}
