//! Rule-based rewards for perception-structured responses and
//! group-relative advantages.
//!
//! The composite reward is the weighted sum of four components:
//!
//! | component | range | meaning |
//! |-----------|-------|---------|
//! | `r_fmt`   | {0,1} | strict grammar conformance |
//! | `r_ans`   | {0,1,2} | detection (q1) plus object (q3) correctness |
//! | `r_sg`    | {0,1} | defect type (q2), gated on correct detection |
//! | `r_vis`   | {α_pen} ∪ [α_bon, α_bon+α_iou] ∪ {1} | visibility-aware temporal reward |

use serde::{Deserialize, Serialize};

use crate::dataset::{Letter, QaInstance, Task};
use crate::error::{Error, Result};
use crate::grammar::{AnswerBlock, StructuredResponse};
use crate::interval::IntervalSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerExtraction {
    /// Use leniently extracted answers even when the format check failed.
    #[default]
    Lenient,
    /// Treat every answer as missing unless the response is conformant.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentWeights {
    pub fmt: f64,
    pub ans: f64,
    pub sg: f64,
    pub vis: f64,
}

impl Default for ComponentWeights {
    fn default() -> Self {
        ComponentWeights {
            fmt: 1.0,
            ans: 1.0,
            sg: 1.0,
            vis: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Discovery bonus granted whenever both sides have visible intervals.
    pub alpha_bon: f64,
    /// Scale of the boundary-quality term.
    pub alpha_iou: f64,
    /// Reward for a missed or hallucinated visibility claim (non-positive).
    pub alpha_pen: f64,
    /// Decay rate of the interval-count penalty.
    pub lambda: f64,
    pub semantic_gate_enabled: bool,
    /// Replace the visibility-aware reward with a flat IoU reward.
    pub flat_iou_mode: bool,
    pub weights: ComponentWeights,
    pub std_epsilon: f64,
    pub extraction: AnswerExtraction,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha_bon: 0.3,
            alpha_iou: 0.7,
            alpha_pen: -0.3,
            lambda: 0.5,
            semantic_gate_enabled: true,
            flat_iou_mode: false,
            weights: ComponentWeights::default(),
            std_epsilon: 1e-8,
            extraction: AnswerExtraction::Lenient,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        let checks = [
            (self.alpha_iou >= 0.0, "alpha_iou must be >= 0"),
            (self.lambda >= 0.0, "lambda must be >= 0"),
            (self.alpha_pen <= 0.0, "alpha_pen must be <= 0"),
            (self.std_epsilon > 0.0, "std_epsilon must be > 0"),
            (
                w.fmt >= 0.0 && w.ans >= 0.0 && w.sg >= 0.0 && w.vis >= 0.0,
                "weights must be >= 0",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Contract(msg.into()));
            }
        }
        Ok(())
    }
}

/// Ground truth of one clip, expressed in the option letters of its QA set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBundle {
    pub y_ano: Letter,
    pub y_def: Letter,
    pub y_obj: Letter,
    pub gt_intervals: IntervalSet,
}

impl GroundTruthBundle {
    pub fn from_qa(qa: &[QaInstance]) -> Result<Self> {
        let find = |t: Task| {
            qa.iter()
                .find(|q| q.task == t)
                .ok_or_else(|| Error::Contract(format!("QA set lacks {t:?}")))
        };
        let letter = |t: Task| {
            find(t)?
                .gt_letter
                .ok_or_else(|| Error::Contract(format!("{t:?} has no ground-truth letter")))
        };
        Ok(GroundTruthBundle {
            y_ano: letter(Task::Detect)?,
            y_def: letter(Task::Defect)?,
            y_obj: letter(Task::Object)?,
            gt_intervals: find(Task::Localize)?
                .gt_intervals
                .clone()
                .ok_or_else(|| Error::Contract("localization task without intervals".into()))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityCase {
    BothEmpty,
    Missed,
    Hallucinated,
    Matched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReward {
    pub value: f64,
    pub case: VisibilityCase,
    pub iou_max: Option<f64>,
    pub count_penalty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_fmt: u8,
    pub r_ans: u8,
    pub r_sg: u8,
    pub r_vis: f64,
    pub total: f64,
    pub vis_case: VisibilityCase,
    pub diagnostics: Vec<String>,
}

fn same(pred: Option<Letter>, gt: Letter) -> bool {
    pred == Some(gt)
}

pub fn reward_format(resp: &StructuredResponse) -> u8 {
    u8::from(resp.format_ok)
}

/// Detection plus object correctness; each missing field contributes 0.
pub fn reward_answer(ans: &AnswerBlock, gt: &GroundTruthBundle) -> u8 {
    u8::from(same(ans.q1, gt.y_ano)) + u8::from(same(ans.q3, gt.y_obj))
}

/// Defect-type reward, conditioned on a correct detection answer when the gate is on.
pub fn reward_semantic_gated(ans: &AnswerBlock, gt: &GroundTruthBundle, cfg: &RewardConfig) -> u8 {
    let defect_ok = same(ans.q2, gt.y_def);
    let gate_ok = !cfg.semantic_gate_enabled || same(ans.q1, gt.y_ano);
    u8::from(defect_ok && gate_ok)
}

/// Maximum pairwise IoU between predicted and ground-truth intervals.
pub fn iou_max(pred: &IntervalSet, gt: &IntervalSet) -> Result<f64> {
    pred.max_pairwise_iou(gt)
        .ok_or_else(|| Error::Contract("iou_max needs two non-empty interval sets".into()))
}

/// Visibility-aware temporal reward (or flat IoU in ablation mode).
pub fn reward_visibility(
    pred: &IntervalSet,
    gt: &IntervalSet,
    cfg: &RewardConfig,
) -> VisibilityReward {
    let (m, n) = (pred.len(), gt.len());
    let fixed = |value, case| VisibilityReward {
        value,
        case,
        iou_max: None,
        count_penalty: None,
    };
    match (m, n) {
        (0, 0) => fixed(1.0, VisibilityCase::BothEmpty),
        (0, _) => fixed(
            if cfg.flat_iou_mode {
                0.0
            } else {
                cfg.alpha_pen
            },
            VisibilityCase::Missed,
        ),
        (_, 0) => fixed(
            if cfg.flat_iou_mode {
                0.0
            } else {
                cfg.alpha_pen
            },
            VisibilityCase::Hallucinated,
        ),
        _ => {
            let iou = iou_max(pred, gt).expect("both non-empty");
            if cfg.flat_iou_mode {
                return VisibilityReward {
                    value: iou,
                    case: VisibilityCase::Matched,
                    iou_max: Some(iou),
                    count_penalty: None,
                };
            }
            let diff = m.abs_diff(n) as f64;
            let penalty = (-cfg.lambda * diff).exp();
            VisibilityReward {
                value: cfg.alpha_bon + cfg.alpha_iou * iou * penalty,
                case: VisibilityCase::Matched,
                iou_max: Some(iou),
                count_penalty: Some(penalty),
            }
        }
    }
}

/// All components and the weighted total for one response.
pub fn reward_total(
    resp: &StructuredResponse,
    gt: &GroundTruthBundle,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let empty = AnswerBlock::default();
    let ans = match cfg.extraction {
        AnswerExtraction::Strict if !resp.format_ok => &empty,
        _ => &resp.answer,
    };
    let r_fmt = reward_format(resp);
    let r_ans = reward_answer(ans, gt);
    let r_sg = reward_semantic_gated(ans, gt, cfg);
    // a missing or unparsable q4 counts as "no visible interval"
    let none = IntervalSet::empty();
    let pred = ans.q4.as_ref().unwrap_or(&none);
    let vis = reward_visibility(pred, &gt.gt_intervals, cfg);

    let mut diagnostics = Vec::new();
    if r_fmt == 0 {
        let codes: Vec<String> = resp.violations.iter().map(|v| v.code.to_string()).collect();
        diagnostics.push(format!("format: {}", codes.join(",")));
    }
    if ans.q4.is_none() {
        diagnostics.push("q4 missing or unparsable; treated as no visible interval".into());
    }
    if cfg.semantic_gate_enabled && same(ans.q2, gt.y_def) && !same(ans.q1, gt.y_ano) {
        diagnostics.push("semantic gate closed: defect correct but detection wrong".into());
    }
    match (vis.iou_max, vis.count_penalty) {
        (Some(i), Some(p)) => diagnostics.push(format!(
            "vis: matched, iou_max={i:.4}, count_penalty={p:.4}"
        )),
        (Some(i), None) => diagnostics.push(format!("vis: flat iou={i:.4}")),
        _ => diagnostics.push(format!("vis: {:?}", vis.case)),
    }

    let w = &cfg.weights;
    let total = w.fmt * f64::from(r_fmt)
        + w.ans * f64::from(r_ans)
        + w.sg * f64::from(r_sg)
        + w.vis * vis.value;
    RewardBreakdown {
        r_fmt,
        r_ans,
        r_sg,
        r_vis: vis.value,
        total,
        vis_case: vis.case,
        diagnostics,
    }
}

/// Standardizes each reward against its group: `(r - mean) / max(std, eps)`
/// with the population standard deviation. Constant groups map to zeros.
pub fn group_advantages(rewards: &[f64], cfg: &RewardConfig) -> Result<Vec<f64>> {
    if rewards.is_empty() {
        return Err(Error::Contract(
            "group_advantages needs at least one reward".into(),
        ));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::Contract("rewards must be finite".into()));
    }
    let first = rewards[0];
    if rewards.iter().all(|&r| r == first) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt().max(cfg.std_epsilon);
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse, Grammar};

    fn l(c: char) -> Letter {
        Letter::new(c).unwrap()
    }

    fn set(pairs: &[[f64; 2]]) -> IntervalSet {
        IntervalSet::try_from_pairs(pairs, 2.0).unwrap()
    }

    fn gt(intervals: &[[f64; 2]]) -> GroundTruthBundle {
        GroundTruthBundle {
            y_ano: l('A'),
            y_def: l('E'),
            y_obj: l('C'),
            gt_intervals: set(intervals),
        }
    }

    fn answers(q1: char, q2: char, q3: char) -> AnswerBlock {
        AnswerBlock {
            q1: Some(l(q1)),
            q2: Some(l(q2)),
            q3: Some(l(q3)),
            q4: None,
            parse_errors: vec![],
        }
    }

    #[test]
    fn answer_reward_cases() {
        let g = gt(&[[0.0, 1.0]]);
        assert_eq!(reward_answer(&answers('A', 'A', 'C'), &g), 2);
        assert_eq!(reward_answer(&answers('B', 'A', 'C'), &g), 1);
        let mut a = answers('A', 'A', 'C');
        a.q3 = None;
        assert_eq!(reward_answer(&a, &g), 1);
    }

    #[test]
    fn semantic_gate_cases() {
        let g = gt(&[[0.0, 1.0]]);
        let cfg = RewardConfig::default();
        assert_eq!(reward_semantic_gated(&answers('A', 'E', 'A'), &g, &cfg), 1);
        assert_eq!(reward_semantic_gated(&answers('B', 'E', 'A'), &g, &cfg), 0);
        let ungated = RewardConfig {
            semantic_gate_enabled: false,
            ..cfg
        };
        assert_eq!(
            reward_semantic_gated(&answers('B', 'E', 'A'), &g, &ungated),
            1
        );
        assert_eq!(
            reward_semantic_gated(&answers('A', 'D', 'A'), &g, &ungated),
            0
        );
    }

    #[test]
    fn visibility_cases() {
        let cfg = RewardConfig::default();
        let e = IntervalSet::empty();
        assert_eq!(reward_visibility(&e, &e, &cfg).value, 1.0);
        assert_eq!(reward_visibility(&e, &set(&[[0.0, 1.0]]), &cfg).value, -0.3);
        assert_eq!(reward_visibility(&set(&[[0.0, 1.0]]), &e, &cfg).value, -0.3);
        let v = reward_visibility(&set(&[[0.5, 1.5]]), &set(&[[1.0, 2.0]]), &cfg);
        assert!((v.value - (0.3 + 0.7 / 3.0)).abs() < 1e-12);
        assert_eq!(v.case, VisibilityCase::Matched);
    }

    #[test]
    fn flat_iou_ablation() {
        let cfg = RewardConfig {
            flat_iou_mode: true,
            ..Default::default()
        };
        let e = IntervalSet::empty();
        assert_eq!(reward_visibility(&e, &e, &cfg).value, 1.0);
        assert_eq!(reward_visibility(&e, &set(&[[0.0, 1.0]]), &cfg).value, 0.0);
        assert_eq!(reward_visibility(&set(&[[0.0, 1.0]]), &e, &cfg).value, 0.0);
        let v = reward_visibility(&set(&[[0.5, 1.5]]), &set(&[[1.0, 2.0]]), &cfg).value;
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_max_contract() {
        assert!(iou_max(&IntervalSet::empty(), &set(&[[0.0, 1.0]])).is_err());
        assert_eq!(
            iou_max(&set(&[[0.2, 1.8]]), &set(&[[0.2, 1.8]])).unwrap(),
            1.0
        );
    }

    #[test]
    fn garbage_response_total() {
        let resp = parse("complete garbage", Grammar::Structured);
        let b = reward_total(&resp, &gt(&[[0.0, 1.0]]), &RewardConfig::default());
        assert_eq!((b.r_fmt, b.r_ans, b.r_sg), (0, 0, 0));
        assert_eq!(b.r_vis, -0.3);
        assert_eq!(b.vis_case, VisibilityCase::Missed);
        assert!((b.total + 0.3).abs() < 1e-12);
    }

    #[test]
    fn strict_extraction_zeroes_malformed_answers() {
        let raw = "<think>x</think><answer><q1>A</q1><q2>E</q2><q3>C</q3><q4>[0.0,1.0]</q4></answer> trailing";
        let resp = parse(raw, Grammar::Benchmark);
        assert!(!resp.format_ok);
        let g = gt(&[[0.0, 1.0]]);
        let lenient = reward_total(&resp, &g, &RewardConfig::default());
        assert_eq!((lenient.r_ans, lenient.r_sg), (2, 1));
        let strict = reward_total(
            &resp,
            &g,
            &RewardConfig {
                extraction: AnswerExtraction::Strict,
                ..Default::default()
            },
        );
        assert_eq!((strict.r_ans, strict.r_sg), (0, 0));
    }

    #[test]
    fn advantages_basic() {
        let cfg = RewardConfig::default();
        let a = group_advantages(&[1.0, 2.0, 3.0], &cfg).unwrap();
        let expect = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!(
            (a[0] + expect).abs() < 1e-12 && a[1].abs() < 1e-12 && (a[2] - expect).abs() < 1e-12
        );
        assert_eq!(group_advantages(&[0.7; 4], &cfg).unwrap(), vec![0.0; 4]);
        assert_eq!(group_advantages(&[5.0], &cfg).unwrap(), vec![0.0]);
        assert!(group_advantages(&[], &cfg).is_err());
        assert!(group_advantages(&[f64::NAN, 1.0], &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig::default().validate().is_ok());
        assert!(RewardConfig {
            alpha_pen: 0.1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RewardConfig {
            lambda: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
