//! Seeded synthetic manifests with the published split structure, used by
//! the examples and test suites in place of the real rendered dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use image::{Rgb, RgbImage};

use crate::dataset::{AnomalyStatus, ClipRecord, Letter, Manifest, Protocol, Split};
use crate::grammar::Grammar;
use crate::interval::{Interval, IntervalSet, CLIP_DURATION_SEC, CLIP_FPS, FRAMES_PER_CLIP};
use crate::taxonomy::{self, DefectType};
use crate::visibility::MemoryFrames;

fn spread(total: usize, parts: usize, i: usize) -> usize {
    total / parts + usize::from(i < total % parts)
}

/// Per-category clip totals and standard-train counts, derived by spreading
/// each group's published counts evenly over its categories.
pub fn category_plan() -> Vec<(&'static str, usize, usize)> {
    let mut out = Vec::new();
    for g in taxonomy::GROUPS.iter() {
        let k = g.categories.len();
        for (i, cat) in g.categories.iter().enumerate() {
            out.push((
                *cat,
                spread(g.total_clips(), k, i),
                spread(g.train_clips, k, i),
            ));
        }
    }
    out
}

/// Picks exactly 12 categories whose clip totals sum to the published
/// unseen-test size (subset-sum over the category plan).
pub fn unseen_test_categories() -> Vec<&'static str> {
    use crate::dataset::published::{UNSEEN_TEST, UNSEEN_TEST_CATEGORIES};
    let plan = category_plan();
    let k = UNSEEN_TEST_CATEGORIES;
    // reach[n][s] = Some(index of last category used) for a subset of size n summing to s
    let mut reach = vec![vec![None::<usize>; UNSEEN_TEST + 1]; k + 1];
    let mut parent = vec![vec![(0usize, 0usize); UNSEEN_TEST + 1]; k + 1];
    reach[0][0] = Some(usize::MAX);
    for (idx, &(_, total, _)) in plan.iter().enumerate() {
        for n in (0..k).rev() {
            for s in (0..=UNSEEN_TEST - total.min(UNSEEN_TEST)).rev() {
                if reach[n][s].is_some()
                    && s + total <= UNSEEN_TEST
                    && reach[n + 1][s + total].is_none()
                {
                    reach[n + 1][s + total] = Some(idx);
                    parent[n + 1][s + total] = (n, s);
                }
            }
        }
    }
    let mut picked = Vec::new();
    let (mut n, mut s) = (k, UNSEEN_TEST);
    while n > 0 {
        let idx = reach[n][s].expect("category plan admits the unseen split");
        picked.push(plan[idx].0);
        (n, s) = parent[n][s];
    }
    picked.sort();
    picked
}

fn random_intervals(rng: &mut ChaCha8Rng) -> IntervalSet {
    let frame = 1.0 / CLIP_FPS as f64;
    let n = if rng.random_bool(0.15) { 2 } else { 1 };
    let mut out = Vec::new();
    let mut cursor = 0usize;
    for k in 0..n {
        let remaining = FRAMES_PER_CLIP - cursor;
        let slots_left = n - k;
        let max_len = (remaining / slots_left).max(4);
        let start = cursor + rng.random_range(0..max_len / 2);
        let len = rng.random_range(3..=(max_len - (start - cursor)).max(3));
        let end = (start + len).min(FRAMES_PER_CLIP);
        if start >= end {
            break;
        }
        out.push(Interval::new(start as f64 * frame, end as f64 * frame).expect("ordered"));
        cursor = end + 3;
        if cursor >= FRAMES_PER_CLIP {
            break;
        }
    }
    IntervalSet::from_intervals(out)
}

fn make_clip(
    rng: &mut ChaCha8Rng,
    clip_id: String,
    category: &str,
    splits: Vec<Split>,
) -> ClipRecord {
    use crate::dataset::published::{ABNORMAL_CLIPS, TOTAL_CLIPS};
    let abnormal = rng.random_bool(ABNORMAL_CLIPS as f64 / TOTAL_CLIPS as f64);
    let (status, defect, gt) = if abnormal {
        let d = DefectType::STRUCTURAL[rng.random_range(0..6)];
        (AnomalyStatus::Abnormal, d, random_intervals(rng))
    } else {
        (
            AnomalyStatus::Normal,
            DefectType::None,
            IntervalSet::empty(),
        )
    };
    ClipRecord {
        clip_id,
        object_category: category.to_owned(),
        semantic_group: taxonomy::group_of(category)
            .expect("known category")
            .name
            .to_owned(),
        anomaly_status: status,
        defect_type: defect,
        splits,
        gt_intervals: gt,
        duration_sec: CLIP_DURATION_SEC,
        fps: CLIP_FPS,
        frame_root: None,
        verified: None,
    }
}

/// Full-size synthetic manifest (4,014 clips) carrying both standard and
/// unseen split tags with the published per-split sizes.
pub fn full_manifest(seed: u64) -> Manifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unseen_test = unseen_test_categories();
    let mut clips = Vec::new();
    for (cat, total, train) in category_plan() {
        let unseen = if unseen_test.contains(&cat) {
            Split::UnseenTest
        } else {
            Split::UnseenTrain
        };
        for i in 0..total {
            let standard = if i < train {
                Split::StandardTrain
            } else {
                Split::StandardTest
            };
            clips.push(make_clip(
                &mut rng,
                format!("{cat}_{i:04}"),
                cat,
                vec![standard, unseen],
            ));
        }
    }
    Manifest::new(Protocol::Standard, clips)
}

/// Small manifest of `n` clips cycling through all categories, all tagged
/// `split`.
pub fn small_manifest(n: usize, split: Split, seed: u64) -> Manifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cats: Vec<&str> = taxonomy::all_categories().collect();
    let clips = (0..n)
        .map(|i| {
            let cat = cats[i % cats.len()];
            make_clip(&mut rng, format!("{cat}_s{i:05}"), cat, vec![split])
        })
        .collect();
    Manifest::new(split.protocol(), clips)
}

/// What one synthetic frame shows: an optional square red highlight
/// `(x, y, side)` in the marked render, and a uniform brightness shift of the
/// marked render against the unmarked one.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameSpec {
    pub patch: Option<(u32, u32, u32)>,
    pub illumination: i16,
}

/// Renders aligned unmarked/marked pairs over a textured gray object.
pub fn render_frames(schedule: &[FrameSpec], width: u32, height: u32) -> MemoryFrames {
    let pairs = schedule
        .iter()
        .enumerate()
        .map(|(f, spec)| {
            let unmarked = RgbImage::from_fn(width, height, |x, y| {
                let v = 90 + ((x * 7 + y * 3 + f as u32 * 5) % 60) as u8;
                Rgb([v, v.saturating_sub(4), v.saturating_add(3)])
            });
            let mut marked = unmarked.clone();
            for p in marked.pixels_mut() {
                for c in p.0.iter_mut() {
                    *c = (i16::from(*c) + spec.illumination).clamp(0, 255) as u8;
                }
            }
            if let Some((px, py, side)) = spec.patch {
                for y in py..(py + side).min(height) {
                    for x in px..(px + side).min(width) {
                        marked.put_pixel(x, y, Rgb([225, 35, 30]));
                    }
                }
            }
            (unmarked, marked)
        })
        .collect();
    MemoryFrames { pairs }
}

const WORDS: &[&str] = &[
    "the", "object", "rim", "surface", "glossy", "matte", "shows", "a", "small", "dark", "pit",
    "near", "edge", "camera", "rotates", "left", "light", "reflects", "dent", "crack", "line",
    "base", "handle", "visible", "between", "seconds", "no", "defect", "appears", "uniform",
    "texture", "wooden", "floor", "ceramic", "metal",
];

/// `n` space-separated words from a small vocabulary, with a full stop.
pub fn prose(rng: &mut impl Rng, n: usize) -> String {
    let mut words: Vec<&str> = (0..n.max(1))
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect();
    let last = words.len() - 1;
    let tail = format!("{}.", words[last]);
    words[last] = &tail;
    words.join(" ")
}

/// A well-formed response for the given answers. Interval bounds are
/// printed with Rust's shortest round-trip formatting.
pub fn response_text(
    grammar: Grammar,
    q1: Letter,
    q2: Letter,
    q3: Letter,
    q4: &IntervalSet,
    rng: &mut impl Rng,
) -> String {
    let mut out = String::new();
    if grammar == Grammar::Structured {
        let n = rng.random_range(4..30);
        let g = prose(rng, n);
        let n = rng.random_range(4..30);
        let s = prose(rng, n);
        out.push_str(&format!("<global_perception>\n{g}\n</global_perception>\n"));
        out.push_str(&format!(
            "<segment_perception>\n{s}\n</segment_perception>\n"
        ));
    }
    let n = rng.random_range(4..30);
    let t = prose(rng, n);
    out.push_str(&format!("<think>\n{t}\n</think>\n"));
    out.push_str(&format!(
        "<answer>\n<q1>{q1}</q1>\n<q2>{q2}</q2>\n<q3>{q3}</q3>\n<q4>{q4}</q4>\n</answer>"
    ));
    out
}

/// Random interval set on the frame grid, possibly empty.
pub fn random_set(rng: &mut impl Rng) -> IntervalSet {
    let n = rng.random_range(0..=3);
    let mut v = Vec::new();
    for _ in 0..n {
        let a = rng.random_range(0..FRAMES_PER_CLIP);
        let b = rng.random_range(a + 1..=FRAMES_PER_CLIP);
        let fps = f64::from(CLIP_FPS);
        v.push(Interval::new(a as f64 / fps, b as f64 / fps).expect("ordered"));
    }
    IntervalSet::from_intervals(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unseen_pick_hits_published_sizes() {
        let cats = unseen_test_categories();
        assert_eq!(cats.len(), 12);
        let plan = category_plan();
        let sum: usize = plan
            .iter()
            .filter(|(c, ..)| cats.contains(c))
            .map(|(_, t, _)| t)
            .sum();
        assert_eq!(sum, 1062);
    }

    #[test]
    fn rendered_response_parses() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = |c| Letter::new(c).unwrap();
        for g in [Grammar::Structured, Grammar::Benchmark] {
            let set = random_set(&mut rng);
            let text = response_text(g, l('A'), l('C'), l('B'), &set, &mut rng);
            let r = crate::grammar::parse(&text, g);
            assert!(r.format_ok, "{text}\n{:?}", r.violations);
            assert_eq!(r.answer.q4.as_ref(), Some(&set));
        }
    }

    #[test]
    fn illumination_only_frames_have_no_red() {
        let schedule = vec![
            FrameSpec {
                patch: None,
                illumination: 40
            };
            3
        ];
        let frames = render_frames(&schedule, 32, 18);
        assert_eq!(frames.pairs.len(), 3);
        assert_ne!(frames.pairs[0].0, frames.pairs[0].1);
    }

    #[test]
    fn synthetic_intervals_are_valid() {
        let m = small_manifest(500, Split::StandardTest, 3);
        for c in &m.clips {
            c.gt_intervals.check_within(2.0).unwrap();
            assert_eq!(c.is_abnormal(), !c.gt_intervals.is_empty());
        }
    }
}
