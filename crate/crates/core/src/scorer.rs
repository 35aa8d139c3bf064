//! Benchmark scoring: per-task accuracy, localization mIoU and their mean.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{generate_qa, ClipRecord, DistractorPolicy, Letter, Manifest, Split};
use crate::error::{Error, Result};
use crate::grammar::{self, AnswerBlock, AnswerField, FieldError, Grammar};
use crate::interval::IntervalSet;
use crate::reward::GroundTruthBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub clip_id: String,
    pub answers: AnswerBlock,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub raw_response: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawPrediction {
    clip_id: String,
    #[serde(default)]
    response: Option<String>,
    #[serde(default)]
    q1: Option<String>,
    #[serde(default)]
    q2: Option<String>,
    #[serde(default)]
    q3: Option<String>,
    #[serde(default)]
    q4: Option<serde_json::Value>,
}

impl PredictionRecord {
    /// Decodes one prediction line: either typed `q1..q4` fields or a raw
    /// `response` that is run through the response parser.
    pub fn from_json_line(line: &str, grammar: Grammar, duration: f64) -> Result<Self> {
        let raw: RawPrediction = serde_json::from_str(line)?;
        if let Some(text) = raw.response {
            let parsed = grammar::parse(&text, grammar);
            return Ok(PredictionRecord {
                clip_id: raw.clip_id,
                answers: parsed.answer,
                raw_response: Some(text),
            });
        }
        let mut answers = AnswerBlock::default();
        let mut letter = |field: AnswerField, v: &Option<String>| -> Option<Letter> {
            match v.as_deref().map(str::parse::<Letter>) {
                Some(Ok(l)) => Some(l),
                Some(Err(e)) => {
                    answers.parse_errors.push(FieldError {
                        field,
                        message: e.to_string(),
                    });
                    None
                }
                None => None,
            }
        };
        let q1 = letter(AnswerField::Q1, &raw.q1).filter(|l| matches!(l.as_char(), 'A' | 'B'));
        let q2 = letter(AnswerField::Q2, &raw.q2);
        let q3 = letter(AnswerField::Q3, &raw.q3);
        answers.q1 = q1;
        answers.q2 = q2;
        answers.q3 = q3;
        if let Some(v) = raw.q4 {
            let decoded = serde_json::from_value::<Vec<[f64; 2]>>(v.clone())
                .or_else(|_| serde_json::from_value::<[f64; 2]>(v).map(|p| vec![p]))
                .map_err(|e| Error::Interval(e.to_string()))
                .and_then(|pairs| IntervalSet::from_pairs_clamped(&pairs, duration));
            match decoded {
                Ok((set, _)) => answers.q4 = Some(set),
                Err(e) => answers.parse_errors.push(FieldError {
                    field: AnswerField::Q4,
                    message: e.to_string(),
                }),
            }
        }
        Ok(PredictionRecord {
            clip_id: raw.clip_id,
            answers,
            raw_response: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocMode {
    /// Total intersection over total union of the two sets.
    #[default]
    SetIou,
    /// Best pairwise IoU, as used by the training reward.
    MaxIou,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalClipLoc {
    /// Normal clips are scored; an empty prediction scores 1.
    #[default]
    Include,
    /// Normal clips are left out of the localization mean.
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreOptions {
    pub loc_mode: LocMode,
    pub normal_clips: NormalClipLoc,
    pub policy: DistractorPolicy,
}

/// Per-clip localization IoU: 1 when both sets are empty, 0 when exactly
/// one is empty.
pub fn loc_iou(pred: &IntervalSet, gt: &IntervalSet, mode: LocMode) -> f64 {
    match (pred.is_empty(), gt.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => match mode {
            LocMode::SetIou => pred.set_iou(gt).unwrap_or(0.0),
            LocMode::MaxIou => pred.max_pairwise_iou(gt).unwrap_or(0.0),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskScores {
    pub detect_acc: f64,
    pub defect_acc: f64,
    pub loc_miou: f64,
    pub object_acc: f64,
    pub avg: f64,
}

impl TaskScores {
    pub fn new(detect_acc: f64, defect_acc: f64, loc_miou: f64, object_acc: f64) -> Self {
        TaskScores {
            detect_acc,
            defect_acc,
            loc_miou,
            object_acc,
            avg: (detect_acc + defect_acc + loc_miou + object_acc) / 4.0,
        }
    }

    pub fn rounded(&self) -> [f64; 5] {
        [
            self.detect_acc,
            self.defect_acc,
            self.loc_miou,
            self.object_acc,
            self.avg,
        ]
        .map(round_half_up_1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    #[serde(flatten)]
    pub scores: TaskScores,
    pub n_scored: usize,
    pub n_missing: usize,
    pub n_loc_scored: usize,
    pub per_category: BTreeMap<String, TaskScores>,
}

/// Rounds half away from zero at one decimal. A tiny nudge absorbs binary
/// representation error so that e.g. 57.45 rounds to 57.5.
pub fn round_half_up_1(x: f64) -> f64 {
    let scaled = x * 10.0;
    let nudge = 1e-9 * scaled.abs().max(1.0);
    (scaled.abs() + 0.5 + nudge).floor().copysign(scaled) / 10.0
}

#[derive(Default)]
struct Tally {
    n: usize,
    detect: usize,
    defect: usize,
    object: usize,
    loc_n: usize,
    loc_sum: f64,
}

impl Tally {
    fn scores(&self) -> TaskScores {
        let pct = |k: usize| {
            if self.n == 0 {
                0.0
            } else {
                100.0 * k as f64 / self.n as f64
            }
        };
        let loc = if self.loc_n == 0 {
            0.0
        } else {
            100.0 * self.loc_sum / self.loc_n as f64
        };
        TaskScores::new(pct(self.detect), pct(self.defect), loc, pct(self.object))
    }
}

/// Scores predictions over the clips of `split` (all clips when `None`).
///
/// Missing predictions score 0 on every task. A prediction naming a clip
/// absent from the manifest is an error; one naming a clip outside the
/// selected split is ignored.
pub fn score(
    preds: &[PredictionRecord],
    manifest: &Manifest,
    split: Option<Split>,
    opts: &ScoreOptions,
) -> Result<ScoreReport> {
    let known = manifest.index();
    let mut by_clip: HashMap<&str, &PredictionRecord> = HashMap::with_capacity(preds.len());
    for p in preds {
        if !known.contains_key(p.clip_id.as_str()) {
            return Err(Error::UnknownClip(p.clip_id.clone()));
        }
        if by_clip.insert(p.clip_id.as_str(), p).is_some() {
            return Err(Error::clip(&p.clip_id, "more than one prediction"));
        }
    }

    let scope: Vec<&ClipRecord> = manifest
        .clips
        .iter()
        .filter(|c| split.is_none_or(|s| c.in_split(s)))
        .collect();

    let mut total = Tally::default();
    let mut per_cat: BTreeMap<String, Tally> = BTreeMap::new();
    let mut missing = 0;
    for clip in scope {
        let qa = generate_qa(clip, &opts.policy)?;
        let gt = GroundTruthBundle::from_qa(&qa)?;
        let pred = by_clip.get(clip.clip_id.as_str());
        if pred.is_none() {
            missing += 1;
        }
        let ans = pred.map(|p| &p.answers);
        let hit = |f: fn(&AnswerBlock) -> Option<Letter>, y: Letter| {
            usize::from(ans.and_then(f) == Some(y))
        };
        let detect = hit(|a| a.q1, gt.y_ano);
        let defect = hit(|a| a.q2, gt.y_def);
        let object = hit(|a| a.q3, gt.y_obj);
        let counts_for_loc = opts.normal_clips == NormalClipLoc::Include || clip.is_abnormal();
        let loc = ans
            .and_then(|a| a.q4.as_ref())
            .map(|q4| loc_iou(q4, &gt.gt_intervals, opts.loc_mode))
            .unwrap_or(0.0);

        for t in [
            &mut total,
            per_cat.entry(clip.object_category.clone()).or_default(),
        ] {
            t.n += 1;
            t.detect += detect;
            t.defect += defect;
            t.object += object;
            if counts_for_loc {
                t.loc_n += 1;
                t.loc_sum += loc;
            }
        }
    }

    Ok(ScoreReport {
        scores: total.scores(),
        n_scored: total.n - missing,
        n_missing: missing,
        n_loc_scored: total.loc_n,
        per_category: per_cat.into_iter().map(|(k, t)| (k, t.scores())).collect(),
    })
}

/// Plain-text table in the benchmark layout, one row per model.
pub fn report_table(reports: &BTreeMap<String, ScoreReport>) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Contract(
            "report_table needs at least one report".into(),
        ));
    }
    let width = reports
        .keys()
        .map(|k| k.chars().count())
        .max()
        .unwrap_or(0)
        .max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$} | {:^23} | {:^7} | {:>6}",
        "", "Defect", "Object", ""
    );
    let _ = writeln!(
        out,
        "{:<width$} | {:>7} {:>7} {:>7} | {:>7} | {:>6}",
        "Model", "Detect.", "Class.", "Loc.", "Class.", "Avg."
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 44));
    for (name, r) in reports {
        let [d, c, l, o, a] = r.scores.rounded();
        let _ = writeln!(
            out,
            "{name:<width$} | {d:>7.1} {c:>7.1} {l:>7.1} | {o:>7.1} | {a:>6.1}"
        );
    }
    Ok(out)
}

/// Machine-readable counterpart of [`report_table`].
pub fn report_json(reports: &BTreeMap<String, ScoreReport>) -> Result<serde_json::Value> {
    if reports.is_empty() {
        return Err(Error::Contract(
            "report_json needs at least one report".into(),
        ));
    }
    let rows: BTreeMap<&String, serde_json::Value> = reports
        .iter()
        .map(|(k, r)| {
            let [d, c, l, o, a] = r.scores.rounded();
            let v = serde_json::json!({
                "report": r,
                "display": {"detect": d, "defect": c, "loc": l, "object": o, "avg": a},
            });
            (k, v)
        })
        .collect();
    Ok(serde_json::to_value(rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(pairs: &[[f64; 2]]) -> IntervalSet {
        IntervalSet::try_from_pairs(pairs, 2.0).unwrap()
    }

    #[test]
    fn rounding() {
        assert_eq!(round_half_up_1(57.45), 57.5);
        assert_eq!(round_half_up_1(86.25), 86.3);
        assert_eq!(round_half_up_1(52.925), 52.9);
        assert_eq!(round_half_up_1(40.65), 40.7);
        assert_eq!(round_half_up_1(100.0), 100.0);
        assert_eq!(round_half_up_1(0.0), 0.0);
    }

    #[test]
    fn avg_identity() {
        let s = TaskScores::new(60.7, 37.6, 49.6, 81.9);
        assert_eq!(s.avg, (60.7 + 37.6 + 49.6 + 81.9) / 4.0);
        assert_eq!(s.rounded()[4], 57.5);
        assert_eq!(TaskScores::new(91.2, 77.8, 82.3, 93.7).rounded()[4], 86.3);
    }

    #[test]
    fn loc_iou_cases() {
        let e = IntervalSet::empty();
        assert_eq!(loc_iou(&e, &e, LocMode::SetIou), 1.0);
        assert_eq!(loc_iou(&e, &set(&[[0.0, 1.0]]), LocMode::SetIou), 0.0);
        assert!(
            (loc_iou(&set(&[[0.0, 1.0]]), &set(&[[0.0, 2.0]]), LocMode::SetIou) - 0.5).abs()
                < 1e-12
        );
        let p = set(&[[0.0, 0.5], [1.5, 2.0]]);
        let g = set(&[[0.0, 2.0]]);
        assert!((loc_iou(&p, &g, LocMode::SetIou) - 0.5).abs() < 1e-12);
        assert!((loc_iou(&p, &g, LocMode::MaxIou) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn typed_prediction_lines() {
        let p = PredictionRecord::from_json_line(
            r#"{"clip_id":"x","q1":"a","q2":"C","q3":"B","q4":[[0.3,1.2]]}"#,
            Grammar::Structured,
            2.0,
        )
        .unwrap();
        assert_eq!(p.answers.q1.unwrap().as_char(), 'A');
        assert_eq!(p.answers.q4.unwrap().to_pairs(), vec![[0.3, 1.2]]);
        let p = PredictionRecord::from_json_line(
            r#"{"clip_id":"x","q1":"??","q4":[1.2,0.3]}"#,
            Grammar::Structured,
            2.0,
        )
        .unwrap();
        assert!(p.answers.q1.is_none() && p.answers.q4.is_none());
        assert_eq!(p.answers.parse_errors.len(), 2);
        let p = PredictionRecord::from_json_line(
            r#"{"clip_id":"x","q4":[0.2,0.4]}"#,
            Grammar::Structured,
            2.0,
        )
        .unwrap();
        assert_eq!(p.answers.q4.unwrap().to_pairs(), vec![[0.2, 0.4]]);
    }

    #[test]
    fn empty_report_map_is_an_error() {
        assert!(report_table(&BTreeMap::new()).is_err());
    }
}
