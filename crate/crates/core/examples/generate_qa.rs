//! Builds the four questions of a few synthetic clips and prints them.

use mmviad::dataset::{self, DistractorPolicy, Split};
use mmviad::synthetic;

fn main() -> mmviad::Result<()> {
    let manifest = synthetic::small_manifest(3, Split::StandardTest, 7);
    let policy = DistractorPolicy::default();
    for clip in &manifest.clips {
        println!(
            "== {} ({}, {:?})",
            clip.clip_id, clip.object_category, clip.anomaly_status
        );
        for qa in dataset::generate_qa(clip, &policy)? {
            let opts: Vec<String> = qa
                .options
                .iter()
                .map(|o| format!("{}. {}", o.letter, o.label))
                .collect();
            println!("  [{}] {}", qa.qa_id, qa.question_text);
            if !opts.is_empty() {
                println!("      {}", opts.join(" | "));
            }
            match (qa.gt_letter, &qa.gt_intervals) {
                (Some(l), _) => println!("      answer: {l}"),
                (None, Some(iv)) => println!("      answer: {iv}"),
                _ => {}
            }
        }
    }

    // a different salt reorders options but stays reproducible
    let salted = DistractorPolicy {
        salt: "variant-b".into(),
        ..policy
    };
    let qa = dataset::generate_qa(&manifest.clips[0], &salted)?;
    println!(
        "salted q3 order: {:?}",
        qa[2].options.iter().map(|o| &o.label).collect::<Vec<_>>()
    );
    Ok(())
}
