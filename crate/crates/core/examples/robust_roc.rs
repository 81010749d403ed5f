//! Robust ROC and xROC bands from externally supplied scores, written as CSV
//! and SVG next to each other.
//!
//!     cargo run --example robust_roc -- out/

use std::fs::File;
use std::path::PathBuf;

use responder_audit::curves::{robust_roc, robust_xroc, xauc_bounds};
use responder_audit::data::{Dataset, UnitRecord};
use responder_audit::svg::band_plot;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "roc-out".into()));
    std::fs::create_dir_all(&out)?;

    // scores on a coarse grid, with group b's effects shrunk toward zero
    let mut records = Vec::new();
    for i in 0..400 {
        let group = if i % 2 == 0 { "a" } else { "b" };
        let mu0 = 0.1 + 0.05 * f64::from(i % 5);
        let lift = 0.1 * f64::from(i % 7) * if group == "a" { 1.0 } else { 0.6 };
        records.push(UnitRecord::new(format!("u{i}"), group, i % 3 == 0, i % 4 == 0).with_scores(mu0, (mu0 + lift).min(0.95)));
    }
    let ds = Dataset::new(records, vec![])?;

    for budget in [0.0, 0.05, 0.15] {
        let roc = robust_roc(&ds, "a", budget, None)?;
        let xroc = robust_xroc(&ds, "a", "b", budget, None)?;
        let (lo, hi) = xauc_bounds(&xroc)?;
        println!("B={budget:<4} xAUC(a, b) in [{lo:.4}, {hi:.4}]  ({} thresholds)", xroc.points.len());
        for band in [&roc, &xroc] {
            band.write_csv(File::create(out.join(format!("{}.csv", band.file_stem())))?)?;
        }
    }
    let bands: Vec<_> = [0.0, 0.05, 0.15].iter().map(|&b| robust_xroc(&ds, "a", "b", b, None)).collect::<Result<_, _>>()?;
    std::fs::write(out.join("xroc_a_b.svg"), band_plot("xROC(a, b)", &bands))?;
    println!("wrote {}", out.display());
    Ok(())
}
