//! Clip records, manifests, split bookkeeping and QA-pair generation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::interval::{IntervalSet, CLIP_DURATION_SEC, CLIP_FPS};
use crate::taxonomy::{self, DefectType};

/// A multiple-choice option letter, always stored upper-case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(char);

impl Letter {
    pub fn new(c: char) -> Option<Self> {
        c.is_ascii_alphabetic()
            .then(|| Letter(c.to_ascii_uppercase()))
    }

    pub fn from_index(i: usize) -> Option<Self> {
        (i < 26).then(|| Letter((b'A' + i as u8) as char))
    }

    pub fn as_char(&self) -> char {
        self.0
    }

    pub fn index(&self) -> usize {
        (self.0 as u8 - b'A') as usize
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Letter {
    type Err = Error;

    /// Accepts exactly one ASCII letter after trimming, any case.
    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => {
                Letter::new(c).ok_or_else(|| Error::Schema(format!("`{s}` is not a letter")))
            }
            _ => Err(Error::Schema(format!(
                "`{s}` is not a single option letter"
            ))),
        }
    }
}

impl Serialize for Letter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Letter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyStatus {
    Normal,
    Abnormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Standard,
    Unseen,
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Protocol::Standard),
            "unseen" => Ok(Protocol::Unseen),
            other => Err(Error::Schema(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    StandardTrain,
    StandardTest,
    UnseenTrain,
    UnseenTest,
}

impl Split {
    pub const ALL: [Split; 4] = [
        Split::StandardTrain,
        Split::StandardTest,
        Split::UnseenTrain,
        Split::UnseenTest,
    ];

    pub fn protocol(&self) -> Protocol {
        match self {
            Split::StandardTrain | Split::StandardTest => Protocol::Standard,
            Split::UnseenTrain | Split::UnseenTest => Protocol::Unseen,
        }
    }

    pub fn is_train(&self) -> bool {
        matches!(self, Split::StandardTrain | Split::UnseenTrain)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::StandardTrain => "standard_train",
            Split::StandardTest => "standard_test",
            Split::UnseenTrain => "unseen_train",
            Split::UnseenTest => "unseen_test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("unknown split `{s}`")))
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub object_category: String,
    pub semantic_group: String,
    pub anomaly_status: AnomalyStatus,
    pub defect_type: DefectType,
    pub splits: Vec<Split>,
    pub gt_intervals: IntervalSet,
    pub duration_sec: f64,
    pub fps: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_root: Option<String>,
    /// Set by review export; `None` for manifests that never went through review.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verified: Option<bool>,
}

impl ClipRecord {
    pub fn in_split(&self, split: Split) -> bool {
        self.splits.contains(&split)
    }

    pub fn split_for(&self, protocol: Protocol) -> Option<Split> {
        self.splits
            .iter()
            .copied()
            .find(|s| s.protocol() == protocol)
    }

    pub fn is_abnormal(&self) -> bool {
        self.anomaly_status == AnomalyStatus::Abnormal
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClip {
    clip_id: String,
    object_category: String,
    #[serde(default)]
    semantic_group: Option<String>,
    anomaly_status: AnomalyStatus,
    defect_type: String,
    #[serde(default)]
    splits: Vec<Split>,
    #[serde(default)]
    gt_intervals: Vec<[f64; 2]>,
    #[serde(default)]
    duration_sec: Option<f64>,
    #[serde(default)]
    fps: Option<u32>,
    #[serde(default)]
    frame_root: Option<String>,
    #[serde(default)]
    verified: Option<bool>,
}

#[derive(Debug, Deserialize)]
struct RawManifest {
    protocol: Protocol,
    #[serde(default = "default_fps")]
    fps: u32,
    #[serde(default = "default_duration")]
    duration_sec: f64,
    clips: Vec<Value>,
}

fn default_fps() -> u32 {
    CLIP_FPS
}

fn default_duration() -> f64 {
    CLIP_DURATION_SEC
}

/// A validated manifest document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub protocol: Protocol,
    pub fps: u32,
    pub duration_sec: f64,
    pub clips: Vec<ClipRecord>,
    /// Non-fatal findings from validation.
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(protocol: Protocol, clips: Vec<ClipRecord>) -> Self {
        Manifest {
            protocol,
            fps: CLIP_FPS,
            duration_sec: CLIP_DURATION_SEC,
            clips,
            warnings: Vec::new(),
        }
    }

    pub fn get(&self, clip_id: &str) -> Option<&ClipRecord> {
        self.clips.iter().find(|c| c.clip_id == clip_id)
    }

    pub fn index(&self) -> BTreeMap<&str, &ClipRecord> {
        self.clips.iter().map(|c| (c.clip_id.as_str(), c)).collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Reads and validates a manifest document.
pub fn load_manifest(source: impl Read) -> Result<Manifest> {
    let raw: RawManifest =
        serde_json::from_reader(source).map_err(|e| Error::Schema(e.to_string()))?;
    if raw.fps == 0 || raw.duration_sec.is_nan() || raw.duration_sec <= 0.0 {
        return Err(Error::Schema(format!(
            "fps ({}) and duration_sec ({}) must be positive",
            raw.fps, raw.duration_sec
        )));
    }

    let mut seen = HashSet::new();
    let mut clips = Vec::with_capacity(raw.clips.len());
    let mut warnings = Vec::new();
    for (i, value) in raw.clips.into_iter().enumerate() {
        let id_hint = value
            .get("clip_id")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .unwrap_or_else(|| format!("#{i}"));
        let rc: RawClip =
            serde_json::from_value(value).map_err(|e| Error::clip(&id_hint, e.to_string()))?;
        let clip = validate_clip(rc, raw.fps, raw.duration_sec, &mut warnings)?;
        if !seen.insert(clip.clip_id.clone()) {
            return Err(Error::clip(&clip.clip_id, "duplicate clip_id"));
        }
        clips.push(clip);
    }

    check_unseen_disjoint(&clips)?;

    Ok(Manifest {
        protocol: raw.protocol,
        fps: raw.fps,
        duration_sec: raw.duration_sec,
        clips,
        warnings,
    })
}

fn validate_clip(
    rc: RawClip,
    fps: u32,
    duration: f64,
    warnings: &mut Vec<String>,
) -> Result<ClipRecord> {
    let id = rc.clip_id.clone();
    if id.is_empty() {
        return Err(Error::clip("", "empty clip_id"));
    }
    let group = taxonomy::group_of(&rc.object_category).ok_or_else(|| {
        Error::clip(
            &id,
            format!("unknown object_category `{}`", rc.object_category),
        )
    })?;
    if let Some(g) = &rc.semantic_group {
        if g != group.name {
            return Err(Error::clip(
                &id,
                format!(
                    "semantic_group `{g}` does not match `{}` for category `{}`",
                    group.name, rc.object_category
                ),
            ));
        }
    }
    let defect: DefectType = rc
        .defect_type
        .parse()
        .map_err(|e: Error| Error::clip(&id, e.to_string()))?;
    match (rc.anomaly_status, defect) {
        (AnomalyStatus::Normal, d) if d != DefectType::None => {
            return Err(Error::clip(
                &id,
                format!("normal clip carries defect `{d}`"),
            ))
        }
        (AnomalyStatus::Abnormal, DefectType::None) => {
            return Err(Error::clip(&id, "abnormal clip has defect_type `none`"))
        }
        _ => {}
    }

    let clip_duration = rc.duration_sec.unwrap_or(duration);
    let clip_fps = rc.fps.unwrap_or(fps);
    if clip_duration.is_nan() || clip_duration <= 0.0 || clip_fps == 0 {
        return Err(Error::clip(&id, "fps and duration_sec must be positive"));
    }
    let gt = IntervalSet::try_from_pairs(&rc.gt_intervals, clip_duration)
        .map_err(|e| Error::clip(&id, e.to_string()))?;

    let reviewed = rc.verified == Some(true);
    if rc.anomaly_status == AnomalyStatus::Normal && !gt.is_empty() && !reviewed {
        return Err(Error::clip(&id, "normal clip has visible-time intervals"));
    }
    if rc.anomaly_status == AnomalyStatus::Abnormal && gt.is_empty() && !reviewed {
        warnings.push(format!(
            "clip `{id}`: abnormal clip without visible-time intervals"
        ));
    }

    let mut protocols = BTreeSet::new();
    for s in &rc.splits {
        if !protocols.insert(s.protocol()) {
            return Err(Error::clip(
                &id,
                format!("more than one split tag for protocol {:?}", s.protocol()),
            ));
        }
    }

    Ok(ClipRecord {
        clip_id: rc.clip_id,
        object_category: rc.object_category,
        semantic_group: group.name.to_owned(),
        anomaly_status: rc.anomaly_status,
        defect_type: defect,
        splits: rc.splits,
        gt_intervals: gt,
        duration_sec: clip_duration,
        fps: clip_fps,
        frame_root: rc.frame_root,
        verified: rc.verified,
    })
}

fn check_unseen_disjoint(clips: &[ClipRecord]) -> Result<()> {
    let train: BTreeSet<&str> = clips
        .iter()
        .filter(|c| c.in_split(Split::UnseenTrain))
        .map(|c| c.object_category.as_str())
        .collect();
    if let Some(c) = clips
        .iter()
        .find(|c| c.in_split(Split::UnseenTest) && train.contains(c.object_category.as_str()))
    {
        return Err(Error::clip(
            &c.clip_id,
            format!(
                "category `{}` appears in both unseen_train and unseen_test",
                c.object_category
            ),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// QA generation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "Q1_detect")]
    Detect,
    #[serde(rename = "Q2_defect")]
    Defect,
    #[serde(rename = "Q3_object")]
    Object,
    #[serde(rename = "Q4_localize")]
    Localize,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Detect, Task::Defect, Task::Object, Task::Localize];

    pub fn tag(&self) -> &'static str {
        match self {
            Task::Detect => "q1",
            Task::Defect => "q2",
            Task::Object => "q3",
            Task::Localize => "q4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaOption {
    pub letter: Letter,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaInstance {
    pub qa_id: String,
    pub clip_id: String,
    pub task: Task,
    pub question_text: String,
    pub options: Vec<QaOption>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gt_letter: Option<Letter>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gt_intervals: Option<IntervalSet>,
}

impl QaInstance {
    pub fn letter_of(&self, label: &str) -> Option<Letter> {
        self.options
            .iter()
            .find(|o| o.label == label)
            .map(|o| o.letter)
    }

    pub fn label_of(&self, letter: Letter) -> Option<&str> {
        self.options
            .iter()
            .find(|o| o.letter == letter)
            .map(|o| o.label.as_str())
    }
}

/// How option orderings and object distractors are chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistractorPolicy {
    /// Total options of the object question (one correct plus distractors).
    pub q3_options: usize,
    /// Mixed into every ordering hash; change it to draw a different but
    /// still reproducible benchmark variant.
    pub salt: String,
}

impl Default for DistractorPolicy {
    fn default() -> Self {
        DistractorPolicy {
            q3_options: 4,
            salt: String::new(),
        }
    }
}

pub const Q1_QUESTION: &str =
    "Is there a defect or anomaly present on the object in this video clip?";
pub const Q1_YES: &str = "Yes, a defect is present.";
pub const Q1_NO: &str = "No, the object looks normal.";
pub const Q2_QUESTION: &str = "Which type of structural defect is present on the object?";
pub const Q3_QUESTION: &str = "Which object is shown in this video clip?";
pub const Q4_QUESTION: &str =
    "During which time interval (in seconds) of this 2-second clip is the anomaly visible? \
Answer [] if no anomaly is visible.";

fn ordering_key(policy: &DistractorPolicy, clip_id: &str, task: Task, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    for part in [policy.salt.as_str(), clip_id, task.tag(), label] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.finalize().into()
}

fn shuffled<'a>(
    policy: &DistractorPolicy,
    clip_id: &str,
    task: Task,
    labels: impl IntoIterator<Item = &'a str>,
) -> Vec<&'a str> {
    let mut keyed: Vec<([u8; 32], &str)> = labels
        .into_iter()
        .map(|l| (ordering_key(policy, clip_id, task, l), l))
        .collect();
    keyed.sort();
    keyed.into_iter().map(|(_, l)| l).collect()
}

fn lettered(labels: Vec<&str>) -> Vec<QaOption> {
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| QaOption {
            letter: Letter::from_index(i).expect("fewer than 26 options"),
            label: l.to_owned(),
        })
        .collect()
}

/// Produces the four QA instances of a clip. Pure in `(clip, policy)`.
///
/// Object options are semantic-group names; distractors come from other
/// groups so that every option is visually distinguishable.
pub fn generate_qa(clip: &ClipRecord, policy: &DistractorPolicy) -> Result<[QaInstance; 4]> {
    let group = taxonomy::group_of(&clip.object_category).ok_or_else(|| {
        Error::Taxonomy(format!(
            "clip `{}`: unknown object_category `{}`",
            clip.clip_id, clip.object_category
        ))
    })?;
    if !(2..=taxonomy::GROUPS.len()).contains(&policy.q3_options) {
        return Err(Error::Contract(format!(
            "q3_options must be in 2..={}, got {}",
            taxonomy::GROUPS.len(),
            policy.q3_options
        )));
    }
    let id = clip.clip_id.as_str();
    let qa_id = |t: Task| format!("{id}:{}", t.tag());

    let q1_options = lettered(vec![Q1_YES, Q1_NO]);
    let q1_gt = if clip.is_abnormal() { Q1_YES } else { Q1_NO };
    let q1 = QaInstance {
        qa_id: qa_id(Task::Detect),
        clip_id: id.to_owned(),
        task: Task::Detect,
        question_text: Q1_QUESTION.to_owned(),
        gt_letter: q1_options
            .iter()
            .find(|o| o.label == q1_gt)
            .map(|o| o.letter),
        options: q1_options,
        gt_intervals: None,
    };

    let q2_options = lettered(shuffled(
        policy,
        id,
        Task::Defect,
        DefectType::ALL.iter().map(DefectType::option_label),
    ));
    let q2_gt = clip.defect_type.option_label();
    let q2 = QaInstance {
        qa_id: qa_id(Task::Defect),
        clip_id: id.to_owned(),
        task: Task::Defect,
        question_text: Q2_QUESTION.to_owned(),
        gt_letter: q2_options
            .iter()
            .find(|o| o.label == q2_gt)
            .map(|o| o.letter),
        options: q2_options,
        gt_intervals: None,
    };

    let distractors = shuffled(
        policy,
        id,
        Task::Object,
        taxonomy::GROUPS
            .iter()
            .map(|g| g.name)
            .filter(|n| *n != group.name),
    );
    let mut chosen: Vec<&str> = distractors
        .into_iter()
        .take(policy.q3_options - 1)
        .collect();
    chosen.push(group.name);
    let q3_options = lettered(shuffled(policy, id, Task::Object, chosen));
    let q3 = QaInstance {
        qa_id: qa_id(Task::Object),
        clip_id: id.to_owned(),
        task: Task::Object,
        question_text: Q3_QUESTION.to_owned(),
        gt_letter: q3_options
            .iter()
            .find(|o| o.label == group.name)
            .map(|o| o.letter),
        options: q3_options,
        gt_intervals: None,
    };

    let q4 = QaInstance {
        qa_id: qa_id(Task::Localize),
        clip_id: id.to_owned(),
        task: Task::Localize,
        question_text: Q4_QUESTION.to_owned(),
        options: Vec::new(),
        gt_letter: None,
        gt_intervals: Some(clip.gt_intervals.clone()),
    };

    Ok([q1, q2, q3, q4])
}

// ---------------------------------------------------------------------------
// Count validation

/// Published dataset figures that manifests are compared against.
pub mod published {
    pub const NORMAL_CLIPS: usize = 1_410;
    pub const ABNORMAL_CLIPS: usize = 2_613;
    pub const TOTAL_CLIPS: usize = 4_023;
    pub const TOTAL_QA_PAIRS: usize = 16_092;
    pub const QA_PER_CLIP: usize = 4;

    pub const STANDARD_TRAIN: usize = 2_913;
    pub const STANDARD_TEST: usize = 1_101;
    pub const UNSEEN_TRAIN: usize = 2_952;
    pub const UNSEEN_TEST: usize = 1_062;
    pub const UNSEEN_TRAIN_CATEGORIES: usize = 36;
    pub const UNSEEN_TEST_CATEGORIES: usize = 12;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountCheck {
    pub name: String,
    pub observed: usize,
    pub expected: usize,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountReport {
    pub protocol: Protocol,
    pub total_clips: usize,
    pub normal_clips: usize,
    pub abnormal_clips: usize,
    pub qa_pairs: usize,
    pub split_clips: BTreeMap<Split, usize>,
    pub split_qa_pairs: BTreeMap<Split, usize>,
    pub train_categories: usize,
    pub test_categories: usize,
    pub checks: Vec<CountCheck>,
    pub warnings: Vec<String>,
}

impl CountReport {
    pub fn all_match(&self) -> bool {
        self.checks.iter().all(|c| c.matches)
    }
}

/// Compares a manifest against the published figures. Mismatches are
/// reported as warnings; this never fails.
pub fn validate_counts(clips: &[ClipRecord], protocol: Protocol) -> CountReport {
    use published::*;

    let total = clips.len();
    let normal = clips.iter().filter(|c| !c.is_abnormal()).count();
    let mut split_clips = BTreeMap::new();
    for split in Split::ALL.into_iter().filter(|s| s.protocol() == protocol) {
        split_clips.insert(split, clips.iter().filter(|c| c.in_split(split)).count());
    }
    let split_qa_pairs = split_clips
        .iter()
        .map(|(s, n)| (*s, n * QA_PER_CLIP))
        .collect();

    let (train_split, test_split) = match protocol {
        Protocol::Standard => (Split::StandardTrain, Split::StandardTest),
        Protocol::Unseen => (Split::UnseenTrain, Split::UnseenTest),
    };
    let cats = |s: Split| -> BTreeSet<&str> {
        clips
            .iter()
            .filter(|c| c.in_split(s))
            .map(|c| c.object_category.as_str())
            .collect()
    };
    let train_cats = cats(train_split);
    let test_cats = cats(test_split);

    let mut checks = Vec::new();
    let mut check = |name: &str, observed: usize, expected: usize| {
        checks.push(CountCheck {
            name: name.to_owned(),
            observed,
            expected,
            matches: observed == expected,
        })
    };
    check("total_clips", total, TOTAL_CLIPS);
    check("normal_clips", normal, NORMAL_CLIPS);
    check("abnormal_clips", total - normal, ABNORMAL_CLIPS);
    check("qa_pairs", total * QA_PER_CLIP, TOTAL_QA_PAIRS);
    let n_train = split_clips[&train_split];
    let n_test = split_clips[&test_split];
    match protocol {
        Protocol::Standard => {
            check("standard_train_clips", n_train, STANDARD_TRAIN);
            check("standard_test_clips", n_test, STANDARD_TEST);
            check(
                "standard_train_qa_pairs",
                n_train * QA_PER_CLIP,
                STANDARD_TRAIN * QA_PER_CLIP,
            );
            check(
                "standard_test_qa_pairs",
                n_test * QA_PER_CLIP,
                STANDARD_TEST * QA_PER_CLIP,
            );
            for g in taxonomy::GROUPS.iter() {
                let in_group = |s: Split| {
                    clips
                        .iter()
                        .filter(|c| c.semantic_group == g.name && c.in_split(s))
                        .count()
                };
                check(
                    &format!("group_{}_train", g.name),
                    in_group(train_split),
                    g.train_clips,
                );
                check(
                    &format!("group_{}_test", g.name),
                    in_group(test_split),
                    g.test_clips,
                );
            }
        }
        Protocol::Unseen => {
            check("unseen_train_clips", n_train, UNSEEN_TRAIN);
            check("unseen_test_clips", n_test, UNSEEN_TEST);
            check(
                "unseen_train_qa_pairs",
                n_train * QA_PER_CLIP,
                UNSEEN_TRAIN * QA_PER_CLIP,
            );
            check(
                "unseen_test_qa_pairs",
                n_test * QA_PER_CLIP,
                UNSEEN_TEST * QA_PER_CLIP,
            );
            check(
                "unseen_train_categories",
                train_cats.len(),
                UNSEEN_TRAIN_CATEGORIES,
            );
            check(
                "unseen_test_categories",
                test_cats.len(),
                UNSEEN_TEST_CATEGORIES,
            );
        }
    }

    let mut warnings: Vec<String> = checks
        .iter()
        .filter(|c| !c.matches)
        .map(|c| {
            format!(
                "{}: observed {} but published figure is {}",
                c.name, c.observed, c.expected
            )
        })
        .collect();
    let published_split_sum = match protocol {
        Protocol::Standard => STANDARD_TRAIN + STANDARD_TEST,
        Protocol::Unseen => UNSEEN_TRAIN + UNSEEN_TEST,
    };
    if published_split_sum != TOTAL_CLIPS {
        warnings.push(format!(
            "published split sizes sum to {published_split_sum} clips while the published total is {TOTAL_CLIPS}"
        ));
    }
    let overlap: Vec<&str> = train_cats.intersection(&test_cats).copied().collect();
    if protocol == Protocol::Unseen && !overlap.is_empty() {
        warnings.push(format!(
            "categories in both unseen splits: {}",
            overlap.join(", ")
        ));
    }

    CountReport {
        protocol,
        total_clips: total,
        normal_clips: normal,
        abnormal_clips: total - normal,
        qa_pairs: total * QA_PER_CLIP,
        split_clips,
        split_qa_pairs,
        train_categories: train_cats.len(),
        test_categories: test_cats.len(),
        checks,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(id: &str, cat: &str, defect: DefectType, gt: &[[f64; 2]]) -> ClipRecord {
        ClipRecord {
            clip_id: id.into(),
            object_category: cat.into(),
            semantic_group: taxonomy::group_of(cat).unwrap().name.into(),
            anomaly_status: if defect == DefectType::None {
                AnomalyStatus::Normal
            } else {
                AnomalyStatus::Abnormal
            },
            defect_type: defect,
            splits: vec![Split::StandardTest],
            gt_intervals: IntervalSet::try_from_pairs(gt, 2.0).unwrap(),
            duration_sec: 2.0,
            fps: 30,
            frame_root: None,
            verified: None,
        }
    }

    #[test]
    fn letter_parsing() {
        assert_eq!(" b ".parse::<Letter>().unwrap().as_char(), 'B');
        assert!("AB".parse::<Letter>().is_err());
        assert!("1".parse::<Letter>().is_err());
        assert!("".parse::<Letter>().is_err());
    }

    #[test]
    fn abnormal_hole_clip() {
        let c = clip("vase0_007", "vase0", DefectType::Hole, &[[0.5, 1.5]]);
        let qa = generate_qa(&c, &DistractorPolicy::default()).unwrap();
        let tasks: Vec<Task> = qa.iter().map(|q| q.task).collect();
        assert_eq!(tasks, Task::ALL);
        assert_eq!(qa[0].label_of(qa[0].gt_letter.unwrap()), Some(Q1_YES));
        assert_eq!(qa[1].label_of(qa[1].gt_letter.unwrap()), Some("hole"));
        assert_eq!(qa[2].label_of(qa[2].gt_letter.unwrap()), Some("vase"));
        assert_eq!(qa[2].options.len(), 4);
        assert_eq!(qa[3].gt_intervals.as_ref().unwrap().len(), 1);
        assert!(qa[3].options.is_empty() && qa[3].gt_letter.is_none());
    }

    #[test]
    fn normal_clip() {
        let c = clip("cup1_000", "cup1", DefectType::None, &[]);
        let qa = generate_qa(&c, &DistractorPolicy::default()).unwrap();
        assert_eq!(qa[0].gt_letter.unwrap().as_char(), 'B');
        assert_eq!(qa[1].label_of(qa[1].gt_letter.unwrap()), Some("no defect"));
        assert!(qa[3].gt_intervals.as_ref().unwrap().is_empty());
    }

    #[test]
    fn generation_is_deterministic_and_salted() {
        let c = clip("bowl3_042", "bowl3", DefectType::Crack, &[[0.0, 2.0]]);
        let p = DistractorPolicy::default();
        let a = serde_json::to_string(&generate_qa(&c, &p).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_qa(&c, &p).unwrap()).unwrap();
        assert_eq!(a, b);
        let salted = DistractorPolicy {
            salt: "v2".into(),
            ..p
        };
        let c2 = serde_json::to_string(&generate_qa(&c, &salted).unwrap()).unwrap();
        assert_ne!(a, c2);
    }

    #[test]
    fn q3_option_count_is_configurable_and_bounded() {
        let c = clip("tap0_001", "tap0", DefectType::Bulge, &[[0.1, 0.2]]);
        for n in [2, 5, 17] {
            let p = DistractorPolicy {
                q3_options: n,
                ..Default::default()
            };
            let qa = generate_qa(&c, &p).unwrap();
            assert_eq!(qa[2].options.len(), n);
        }
        let p = DistractorPolicy {
            q3_options: 18,
            ..Default::default()
        };
        assert!(generate_qa(&c, &p).is_err());
    }

    #[test]
    fn unknown_category_is_a_taxonomy_error() {
        let mut c = clip("x", "vase0", DefectType::Hole, &[]);
        c.object_category = "teapot0".into();
        assert!(matches!(
            generate_qa(&c, &DistractorPolicy::default()),
            Err(Error::Taxonomy(_))
        ));
    }

    fn manifest_json(clips: &str) -> String {
        format!(r#"{{"protocol":"standard","fps":30,"duration_sec":2.0,"clips":[{clips}]}}"#)
    }

    #[test]
    fn load_rejects_out_of_range_interval_with_clip_name() {
        let doc = manifest_json(
            r#"{"clip_id":"cap2_010","object_category":"cap2","anomaly_status":"abnormal",
                "defect_type":"scratch","splits":["standard_train"],"gt_intervals":[[0.5,2.01]]}"#,
        );
        let err = load_manifest(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("cap2_010"), "{err}");
    }

    #[test]
    fn load_rejects_duplicates_and_label_mismatch() {
        let one = r#"{"clip_id":"a","object_category":"cap2","anomaly_status":"normal","defect_type":"none"}"#;
        let err = load_manifest(manifest_json(&format!("{one},{one}")).as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate"));

        let bad = r#"{"clip_id":"b","object_category":"cap2","anomaly_status":"normal","defect_type":"hole"}"#;
        assert!(load_manifest(manifest_json(bad).as_bytes()).is_err());

        let group = r#"{"clip_id":"c","object_category":"cap2","semantic_group":"vase","anomaly_status":"normal","defect_type":"none"}"#;
        assert!(load_manifest(manifest_json(group).as_bytes()).is_err());

        let two_tags = r#"{"clip_id":"d","object_category":"cap2","anomaly_status":"normal","defect_type":"none","splits":["standard_train","standard_test"]}"#;
        assert!(load_manifest(manifest_json(two_tags).as_bytes()).is_err());
    }

    #[test]
    fn load_rejects_unseen_category_overlap() {
        let a = r#"{"clip_id":"a","object_category":"cap2","anomaly_status":"normal","defect_type":"none","splits":["unseen_train"]}"#;
        let b = r#"{"clip_id":"b","object_category":"cap2","anomaly_status":"normal","defect_type":"none","splits":["unseen_test"]}"#;
        assert!(load_manifest(manifest_json(&format!("{a},{b}")).as_bytes()).is_err());
    }

    #[test]
    fn counts_flag_published_discrepancy() {
        let c = clip("a", "cup0", DefectType::Crack, &[[0.0, 1.0]]);
        let report = validate_counts(&[c], Protocol::Standard);
        assert_eq!(report.qa_pairs, 4);
        assert!(!report.all_match());
        assert!(report
            .warnings
            .iter()
            .any(|w| w.contains("4014") && w.contains("4023")));
    }
}
