//! Scores a group of sampled responses for one clip and turns the totals
//! into group-relative advantages.

use mmviad::dataset::{self, DistractorPolicy, Letter, Split};
use mmviad::grammar::{self, Grammar};
use mmviad::reward::{self, GroundTruthBundle, RewardConfig};
use mmviad::synthetic;
use mmviad::IntervalSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mmviad::Result<()> {
    let manifest = synthetic::small_manifest(20, Split::StandardTrain, 3);
    let clip = manifest
        .clips
        .iter()
        .find(|c| c.is_abnormal())
        .expect("abnormal clip");
    let qa = dataset::generate_qa(clip, &DistractorPolicy::default())?;
    let gt = GroundTruthBundle::from_qa(&qa)?;
    println!(
        "clip {} gt q1={} q2={} q3={} q4={}",
        clip.clip_id, gt.y_ano, gt.y_def, gt.y_obj, gt.gt_intervals
    );

    let wrong = |l: Letter| Letter::from_index((l.index() + 1) % 2).unwrap();
    let shifted: Vec<[f64; 2]> = gt
        .gt_intervals
        .to_pairs()
        .iter()
        .map(|[a, b]| [*a, (a + b) / 2.0])
        .collect();
    let shifted = IntervalSet::try_from_pairs(&shifted, clip.duration_sec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let candidates = [
        (
            "exact",
            gt.y_ano,
            gt.y_def,
            gt.y_obj,
            gt.gt_intervals.clone(),
        ),
        ("half interval", gt.y_ano, gt.y_def, gt.y_obj, shifted),
        (
            "says normal",
            wrong(gt.y_ano),
            gt.y_def,
            gt.y_obj,
            IntervalSet::empty(),
        ),
        (
            "wrong object",
            gt.y_ano,
            gt.y_def,
            wrong(gt.y_obj),
            gt.gt_intervals.clone(),
        ),
    ];

    let cfg = RewardConfig::default();
    let mut totals = Vec::new();
    for (name, q1, q2, q3, q4) in &candidates {
        let text = synthetic::response_text(Grammar::Structured, *q1, *q2, *q3, q4, &mut rng);
        let b = reward::reward_total(&grammar::parse(&text, Grammar::Structured), &gt, &cfg);
        println!(
            "{name:>14}: fmt={} ans={} sg={} vis={:.4} total={:.4}",
            b.r_fmt, b.r_ans, b.r_sg, b.r_vis, b.total
        );
        totals.push(b.total);
    }
    let adv = reward::group_advantages(&totals, &cfg)?;
    println!(
        "advantages: {:?}",
        adv.iter().map(|a| format!("{a:+.3}")).collect::<Vec<_>>()
    );
    Ok(())
}
