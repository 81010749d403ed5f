//! Bounds for a hand-built group of two scored units, and the allocations
//! of anti-responder mass that attain them.

use responder_audit::identification::{bounds, point_rates, GroupUnits, ScoredUnit};

fn main() -> responder_audit::error::Result<()> {
    // (tau, mu0, mu1, treated)
    let group = GroupUnits::new(
        "a",
        vec![ScoredUnit::new(0.2, 0.3, 0.5, false), ScoredUnit::new(0.6, 0.2, 0.8, true)],
    );

    let point = point_rates(&group.stats(0.0)?)?;
    println!("no anti-responders: TPR {:.4}  TNR {:.4}", point.tpr, point.tnr);

    for budget in [0.0, 0.05, 0.1, 0.2, 1.0] {
        let b = bounds(&group.stats(budget)?)?;
        println!(
            "B = {budget:<4}  TPR [{:.4}, {:.4}]  TNR [{:.4}, {:.4}]",
            b.tpr.lower, b.tpr.upper, b.tnr.lower, b.tnr.upper
        );
    }

    let b = 0.1;
    for upper in [false, true] {
        let eta = group.extreme_eta(b, upper);
        let r = group.rho(&eta)?;
        println!("{} corner eta = {eta:?} -> TPR {:.4}  TNR {:.4}", if upper { "upper" } else { "lower" }, r.tpr, r.tnr);
    }
    println!("bounds stop widening at B = {:.2}", group.saturation_budget());
    Ok(())
}
