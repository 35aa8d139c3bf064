//! Builds a full-size synthetic manifest and checks it against the
//! published split sizes.

use mmviad::dataset::{self, Protocol};
use mmviad::synthetic;

fn main() {
    let manifest = synthetic::full_manifest(42);
    for protocol in [Protocol::Standard, Protocol::Unseen] {
        let report = dataset::validate_counts(&manifest.clips, protocol);
        println!(
            "{protocol:?}: {} clips, {} qa pairs",
            report.total_clips, report.qa_pairs
        );
        for c in report.checks.iter().filter(|c| !c.matches) {
            println!("  mismatch {}: {} vs {}", c.name, c.observed, c.expected);
        }
        for w in &report.warnings {
            println!("  warning: {w}");
        }
    }
}
