//! Two joint distributions of potential outcomes with the same observable law
//! but very different TPRs once anti-responders are allowed.

use responder_audit::audit::render_witness;
use responder_audit::synth::{build_witness, nonidentifiability_witness};

fn main() -> responder_audit::error::Result<()> {
    let w = nonidentifiability_witness()?;
    print!("{}", render_witness(&w));

    // a smaller shift still matches the observables, with a smaller gap
    let mild = build_witness([0.05, 0.25], [0.45, 0.35], [0.03, 0.0])?;
    println!(
        "\nshift 0.03: TPR {:.4} vs {:.4}, observable discrepancy {:.1e}",
        mild.rates_a.tpr, mild.rates_b.tpr, mild.observable_discrepancy
    );
    Ok(())
}
