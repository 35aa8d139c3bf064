//! Scores two simulated models on a synthetic test split and prints the
//! benchmark table under both localization conventions.

use std::collections::BTreeMap;

use mmviad::dataset::{self, DistractorPolicy, Letter, Split};
use mmviad::grammar::AnswerBlock;
use mmviad::scorer::{self, LocMode, PredictionRecord, ScoreOptions};
use mmviad::synthetic;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simulate(
    manifest: &mmviad::dataset::Manifest,
    skill: f64,
    seed: u64,
) -> mmviad::Result<Vec<PredictionRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for clip in &manifest.clips {
        let qa = dataset::generate_qa(clip, &DistractorPolicy::default())?;
        let mut pick = |i: usize| -> Option<Letter> {
            let gt = qa[i].gt_letter?;
            if rng.random_bool(skill) {
                Some(gt)
            } else {
                Letter::from_index(rng.random_range(0..qa[i].options.len()))
            }
        };
        let (q1, q2, q3) = (pick(0), pick(1), pick(2));
        let q4 = if rng.random_bool(skill) {
            qa[3].gt_intervals.clone()
        } else {
            Some(synthetic::random_set(&mut rng))
        };
        out.push(PredictionRecord {
            clip_id: clip.clip_id.clone(),
            answers: AnswerBlock {
                q1,
                q2,
                q3,
                q4,
                parse_errors: Vec::new(),
            },
            raw_response: None,
        });
    }
    Ok(out)
}

fn main() -> mmviad::Result<()> {
    let manifest = synthetic::small_manifest(240, Split::StandardTest, 17);
    let models = [("strong", 0.85, 1), ("weak", 0.4, 2)];
    for mode in [LocMode::SetIou, LocMode::MaxIou] {
        let opts = ScoreOptions {
            loc_mode: mode,
            ..Default::default()
        };
        let mut reports = BTreeMap::new();
        for (name, skill, seed) in models {
            let preds = simulate(&manifest, skill, seed)?;
            reports.insert(
                name.to_string(),
                scorer::score(&preds, &manifest, None, &opts)?,
            );
        }
        println!("localization: {mode:?}");
        print!("{}", scorer::report_table(&reports)?);
        println!();
    }
    Ok(())
}
