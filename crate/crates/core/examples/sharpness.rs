//! Compares the closed-form bounds with a brute-force search over every
//! admissible anti-responder allocation of a small population spec.

use responder_audit::synth::{sharpness_check, threshold_policy, SyntheticSpec};

fn main() -> responder_audit::error::Result<()> {
    let spec = SyntheticSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/two_groups.json"))?;
    for group in ["a", "b"] {
        for budget in [0.02, 0.1, 0.3] {
            let r = sharpness_check(&spec, group, threshold_policy(0.3), budget, 0.005)?;
            println!(
                "{group} B={budget:<4} TPR closed [{:.4}, {:.4}] grid [{:.4}, {:.4}]  gap {:.1e}  {} points  {}",
                r.closed_lower.tpr,
                r.closed_upper.tpr,
                r.grid_min.tpr,
                r.grid_max.tpr,
                r.gap,
                r.grid_points,
                if r.passes { "ok" } else { "MISMATCH" }
            );
        }
    }
    Ok(())
}
