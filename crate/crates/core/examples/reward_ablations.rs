//! Compares the visibility-aware temporal reward with the flat IoU variant
//! and shows the effect of switching off the semantic gate.

use mmviad::dataset::Letter;
use mmviad::grammar::AnswerBlock;
use mmviad::reward::{self, GroundTruthBundle, RewardConfig};
use mmviad::IntervalSet;

fn set(pairs: &[[f64; 2]]) -> IntervalSet {
    IntervalSet::try_from_pairs(pairs, 2.0).unwrap()
}

fn main() {
    let full = RewardConfig::default();
    let flat = RewardConfig {
        flat_iou_mode: true,
        ..full
    };
    let gt = set(&[[0.5, 1.5]]);
    let cases = [
        ("nothing visible, none claimed", set(&[]), set(&[])),
        ("missed", set(&[]), gt.clone()),
        ("hallucinated", set(&[[0.2, 0.4]]), set(&[])),
        ("exact", gt.clone(), gt.clone()),
        ("partial", set(&[[0.5, 1.0]]), gt.clone()),
        (
            "partial, split in two",
            set(&[[0.5, 0.7], [0.8, 1.0]]),
            gt.clone(),
        ),
        ("disjoint", set(&[[1.6, 1.9]]), gt.clone()),
    ];
    println!("{:<30} {:>8} {:>8}", "case", "aware", "flat");
    for (name, pred, g) in &cases {
        let a = reward::reward_visibility(pred, g, &full);
        let f = reward::reward_visibility(pred, g, &flat);
        println!("{name:<30} {:>8.4} {:>8.4}", a.value, f.value);
    }

    let l = |c| Letter::new(c).unwrap();
    let truth = GroundTruthBundle {
        y_ano: l('A'),
        y_def: l('C'),
        y_obj: l('B'),
        gt_intervals: gt,
    };
    // right defect type, wrong detection verdict
    let ans = AnswerBlock {
        q1: Some(l('B')),
        q2: Some(l('C')),
        ..Default::default()
    };
    let open = RewardConfig {
        semantic_gate_enabled: false,
        ..full
    };
    println!(
        "defect reward with gate: {}, without gate: {}",
        reward::reward_semantic_gated(&ans, &truth, &full),
        reward::reward_semantic_gated(&ans, &truth, &open)
    );
}
