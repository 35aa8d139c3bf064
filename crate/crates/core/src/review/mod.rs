//! Human verification of candidate visible-time intervals.
//!
//! Decisions go to an append-only JSON Lines log. The in-memory store is a
//! fold of that log, so restarting the service is a replay.

mod log;
pub mod service;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::dataset::{AnomalyStatus, Manifest, Protocol};
use crate::error::{Error, Result};
use crate::interval::IntervalSet;
use crate::taxonomy::DefectType;

pub use log::DecisionLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Adjust,
    RejectNoVisibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub clip_id: String,
    pub reviewer_id: String,
    pub verdict: Verdict,
    pub final_intervals: IntervalSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub timestamp: DateTime<Utc>,
    pub decision_seq: u64,
}

/// Body of a decision submission. `final_intervals` may be omitted for
/// accept (taken from the candidates) and reject (empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub reviewer_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub final_intervals: Option<IntervalSet>,
    #[serde(default)]
    pub note: Option<String>,
}

/// Checks a verdict against the clip's candidates and resolves the final
/// interval set.
pub fn resolve_final(
    verdict: Verdict,
    candidates: &IntervalSet,
    requested: Option<&IntervalSet>,
    duration: f64,
) -> Result<IntervalSet> {
    if let Some(set) = requested {
        set.check_within(duration)
            .map_err(|e| Error::Decision(format!("final_intervals: {e}")))?;
    }
    match (verdict, requested) {
        (Verdict::Accept, None) => Ok(candidates.clone()),
        (Verdict::Accept, Some(s)) if s == candidates => Ok(s.clone()),
        (Verdict::Accept, Some(s)) => Err(Error::Decision(format!(
            "accept must keep the candidates {candidates}, got {s}"
        ))),
        (Verdict::Adjust, None) => Err(Error::Decision("adjust needs final_intervals".into())),
        (Verdict::Adjust, Some(s)) if s == candidates => Err(Error::Decision(
            "adjust with final_intervals equal to the candidates; use accept".into(),
        )),
        (Verdict::Adjust, Some(s)) => Ok(s.clone()),
        (Verdict::RejectNoVisibility, None) => Ok(IntervalSet::empty()),
        (Verdict::RejectNoVisibility, Some(s)) if s.is_empty() => Ok(IntervalSet::empty()),
        (Verdict::RejectNoVisibility, Some(s)) => Err(Error::Decision(format!(
            "reject_no_visibility must have empty final_intervals, got {s}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Pending,
    Done,
}

impl std::str::FromStr for ReviewStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pending" => Ok(ReviewStatus::Pending),
            "done" => Ok(ReviewStatus::Done),
            other => Err(Error::Schema(format!("unknown status `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewQueueState {
    pub pending: Vec<String>,
    pub done: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClipFilter {
    pub status: Option<ReviewStatus>,
    pub category: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipSummary {
    pub clip_id: String,
    pub object_category: String,
    pub semantic_group: String,
    pub anomaly_status: AnomalyStatus,
    pub defect_type: DefectType,
    pub candidates: IntervalSet,
    pub status: ReviewStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latest: Option<ReviewDecision>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipDetail {
    #[serde(flatten)]
    pub summary: ClipSummary,
    pub history: Vec<ReviewDecision>,
    pub frame_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
}

/// Review state for one manifest and one decision log.
pub struct ReviewStore {
    manifest: Manifest,
    candidates: BTreeMap<String, IntervalSet>,
    history: BTreeMap<String, Vec<ReviewDecision>>,
    log: DecisionLog,
    frame_root: Option<PathBuf>,
}

impl ReviewStore {
    /// Opens the log at `log_path` (created if absent) and replays it.
    /// Clips without an entry in `candidates` use the manifest's
    /// `gt_intervals` as their candidates.
    pub fn open(
        mut manifest: Manifest,
        mut candidates: BTreeMap<String, IntervalSet>,
        log_path: &Path,
        frame_root: Option<PathBuf>,
    ) -> Result<Self> {
        manifest.clips.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
        for id in candidates.keys() {
            if manifest.get(id).is_none() {
                return Err(Error::UnknownClip(id.clone()));
            }
        }
        for clip in &manifest.clips {
            candidates
                .entry(clip.clip_id.clone())
                .or_insert_with(|| clip.gt_intervals.clone());
        }
        let (log, decisions) = DecisionLog::open(log_path)?;
        let mut history: BTreeMap<String, Vec<ReviewDecision>> = BTreeMap::new();
        for (i, d) in decisions.into_iter().enumerate() {
            if !candidates.contains_key(&d.clip_id) {
                return Err(Error::LogCorrupt {
                    line: i + 1,
                    message: format!("decision for unknown clip `{}`", d.clip_id),
                });
            }
            let h = history.entry(d.clip_id.clone()).or_default();
            if h.last().is_some_and(|p| p.decision_seq >= d.decision_seq) {
                return Err(Error::LogCorrupt {
                    line: i + 1,
                    message: format!(
                        "decision_seq {} does not increase for `{}`",
                        d.decision_seq, d.clip_id
                    ),
                });
            }
            h.push(d);
        }
        Ok(ReviewStore {
            manifest,
            candidates,
            history,
            log,
            frame_root,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn log_path(&self) -> &Path {
        self.log.path()
    }

    pub fn candidates(&self, clip_id: &str) -> Option<&IntervalSet> {
        self.candidates.get(clip_id)
    }

    pub fn latest(&self, clip_id: &str) -> Option<&ReviewDecision> {
        self.history.get(clip_id).and_then(|h| h.last())
    }

    pub fn status(&self, clip_id: &str) -> ReviewStatus {
        if self.latest(clip_id).is_some() {
            ReviewStatus::Done
        } else {
            ReviewStatus::Pending
        }
    }

    pub fn queue(&self) -> ReviewQueueState {
        let mut pending = Vec::new();
        let mut done = BTreeSet::new();
        for c in &self.manifest.clips {
            match self.status(&c.clip_id) {
                ReviewStatus::Pending => pending.push(c.clip_id.clone()),
                ReviewStatus::Done => {
                    done.insert(c.clip_id.clone());
                }
            }
        }
        ReviewQueueState { pending, done }
    }

    fn summary(&self, clip_id: &str) -> Option<ClipSummary> {
        let c = self.manifest.get(clip_id)?;
        Some(ClipSummary {
            clip_id: c.clip_id.clone(),
            object_category: c.object_category.clone(),
            semantic_group: c.semantic_group.clone(),
            anomaly_status: c.anomaly_status,
            defect_type: c.defect_type,
            candidates: self.candidates[clip_id].clone(),
            status: self.status(clip_id),
            latest: self.latest(clip_id).cloned(),
        })
    }

    pub fn detail(&self, clip_id: &str) -> Result<ClipDetail> {
        let summary = self
            .summary(clip_id)
            .ok_or_else(|| Error::UnknownClip(clip_id.to_owned()))?;
        Ok(ClipDetail {
            summary,
            history: self.history.get(clip_id).cloned().unwrap_or_default(),
            frame_count: crate::interval::FRAMES_PER_CLIP,
        })
    }

    /// Pending clips first, then done ones, each in clip_id order.
    /// `page` counts from 1.
    pub fn list(
        &self,
        filter: &ClipFilter,
        page: usize,
        page_size: usize,
    ) -> Result<Page<ClipSummary>> {
        if page == 0 || page_size == 0 {
            return Err(Error::Schema("page and page_size start at 1".into()));
        }
        if let Some(cat) = &filter.category {
            if !crate::taxonomy::is_category(cat) {
                return Err(Error::Schema(format!("unknown category `{cat}`")));
            }
        }
        let queue = self.queue();
        let ordered = queue.pending.iter().chain(queue.done.iter());
        let matching: Vec<&String> = ordered
            .filter(|id| filter.status.is_none_or(|s| self.status(id) == s))
            .filter(|id| {
                filter.category.as_ref().is_none_or(|cat| {
                    self.manifest
                        .get(id)
                        .is_some_and(|c| &c.object_category == cat)
                })
            })
            .collect();
        let items = matching
            .iter()
            .skip((page - 1).saturating_mul(page_size))
            .take(page_size)
            .filter_map(|id| self.summary(id))
            .collect();
        Ok(Page {
            items,
            page,
            page_size,
            total: matching.len(),
        })
    }

    /// Validates, logs (with fsync) and applies one decision.
    pub fn submit(
        &mut self,
        clip_id: &str,
        req: DecisionRequest,
        now: DateTime<Utc>,
    ) -> Result<ReviewDecision> {
        let clip = self
            .manifest
            .get(clip_id)
            .ok_or_else(|| Error::UnknownClip(clip_id.to_owned()))?;
        if req.reviewer_id.trim().is_empty() {
            return Err(Error::Decision("reviewer_id is empty".into()));
        }
        let final_intervals = resolve_final(
            req.verdict,
            &self.candidates[clip_id],
            req.final_intervals.as_ref(),
            clip.duration_sec,
        )?;
        let decision = ReviewDecision {
            clip_id: clip_id.to_owned(),
            reviewer_id: req.reviewer_id,
            verdict: req.verdict,
            final_intervals,
            note: req.note,
            timestamp: now,
            decision_seq: self.latest(clip_id).map_or(1, |d| d.decision_seq + 1),
        };
        self.log.append(&decision)?;
        self.history
            .entry(clip_id.to_owned())
            .or_default()
            .push(decision.clone());
        Ok(decision)
    }

    /// Verified manifest: reviewed clips carry their latest decision's
    /// intervals and `verified: true`, the rest keep their candidates with
    /// `verified: false`. With a protocol, only clips tagged for it are
    /// exported.
    pub fn export(&self, protocol: Option<Protocol>) -> Manifest {
        let latest: BTreeMap<&str, &ReviewDecision> = self
            .history
            .iter()
            .filter_map(|(k, h)| h.last().map(|d| (k.as_str(), d)))
            .collect();
        export_fold(&self.manifest, &self.candidates, &latest, protocol)
    }

    /// Directory holding `unmarked/` and `marked/` for a clip.
    pub fn clip_frame_dir(&self, clip_id: &str) -> Option<PathBuf> {
        let clip = self.manifest.get(clip_id)?;
        match (&clip.frame_root, &self.frame_root) {
            (Some(dir), _) => Some(PathBuf::from(dir)),
            (None, Some(root)) => Some(root.join(clip_id)),
            (None, None) => None,
        }
    }
}

fn export_fold(
    manifest: &Manifest,
    candidates: &BTreeMap<String, IntervalSet>,
    latest: &BTreeMap<&str, &ReviewDecision>,
    protocol: Option<Protocol>,
) -> Manifest {
    let mut clips: Vec<_> = manifest
        .clips
        .iter()
        .filter(|c| protocol.is_none_or(|p| c.split_for(p).is_some()))
        .map(|c| {
            let mut out = c.clone();
            match latest.get(c.clip_id.as_str()) {
                Some(d) => {
                    out.gt_intervals = d.final_intervals.clone();
                    out.verified = Some(true);
                }
                None => {
                    out.gt_intervals = candidates[&c.clip_id].clone();
                    out.verified = Some(false);
                }
            }
            out
        })
        .collect();
    clips.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
    let mut out = Manifest::new(protocol.unwrap_or(manifest.protocol), clips);
    out.fps = manifest.fps;
    out.duration_sec = manifest.duration_sec;
    out
}

/// Export without a running service: replays the log file read-only.
pub fn export_offline(
    manifest: &Manifest,
    candidates: &BTreeMap<String, IntervalSet>,
    log_path: &Path,
    protocol: Option<Protocol>,
) -> Result<Manifest> {
    let decisions = log::read_decisions(log_path)?;
    let mut cands = candidates.clone();
    for c in &manifest.clips {
        cands
            .entry(c.clip_id.clone())
            .or_insert_with(|| c.gt_intervals.clone());
    }
    let mut latest: BTreeMap<&str, &ReviewDecision> = BTreeMap::new();
    for (i, d) in decisions.iter().enumerate() {
        if !cands.contains_key(&d.clip_id) {
            return Err(Error::LogCorrupt {
                line: i + 1,
                message: format!("decision for unknown clip `{}`", d.clip_id),
            });
        }
        match latest.get(d.clip_id.as_str()) {
            Some(prev) if prev.decision_seq >= d.decision_seq => {}
            _ => {
                latest.insert(&d.clip_id, d);
            }
        }
    }
    Ok(export_fold(manifest, &cands, &latest, protocol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Split;
    use crate::synthetic;

    fn set(pairs: &[[f64; 2]]) -> IntervalSet {
        IntervalSet::try_from_pairs(pairs, 2.0).unwrap()
    }

    fn req(verdict: Verdict, final_intervals: Option<IntervalSet>) -> DecisionRequest {
        DecisionRequest {
            reviewer_id: "r1".into(),
            verdict,
            final_intervals,
            note: None,
        }
    }

    #[test]
    fn verdict_consistency() {
        let cand = set(&[[0.5, 1.53]]);
        assert_eq!(
            resolve_final(Verdict::Accept, &cand, None, 2.0).unwrap(),
            cand
        );
        assert!(resolve_final(Verdict::Accept, &cand, Some(&set(&[[0.5, 1.0]])), 2.0).is_err());
        assert!(resolve_final(Verdict::Adjust, &cand, Some(&cand), 2.0).is_err());
        assert!(resolve_final(Verdict::Adjust, &cand, None, 2.0).is_err());
        let narrowed = set(&[[0.6, 1.4]]);
        assert_eq!(
            resolve_final(Verdict::Adjust, &cand, Some(&narrowed), 2.0).unwrap(),
            narrowed
        );
        assert!(resolve_final(Verdict::RejectNoVisibility, &cand, None, 2.0)
            .unwrap()
            .is_empty());
        assert!(resolve_final(Verdict::RejectNoVisibility, &cand, Some(&cand), 2.0).is_err());
        let split_merge = set(&[[0.1, 0.4], [0.9, 1.9]]);
        assert!(resolve_final(Verdict::Adjust, &cand, Some(&split_merge), 2.0).is_ok());
        let wide = IntervalSet::from_pairs_clamped(&[[0.0, 1.0]], 5.0)
            .unwrap()
            .0;
        assert!(resolve_final(Verdict::Adjust, &cand, Some(&wide), 0.5).is_err());
    }

    #[test]
    fn submit_export_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("decisions.jsonl");
        let m = synthetic::small_manifest(6, Split::StandardTest, 9);
        let ids: Vec<String> = m.clips.iter().map(|c| c.clip_id.clone()).collect();
        let now = Utc::now();

        let mut store = ReviewStore::open(m.clone(), BTreeMap::new(), &log, None).unwrap();
        let untouched = store.export(None);
        assert!(untouched.clips.iter().all(|c| c.verified == Some(false)));

        store
            .submit(&ids[0], req(Verdict::Accept, None), now)
            .unwrap();
        let adj = set(&[[0.6, 1.4]]);
        let cand1 = store.candidates(&ids[1]).unwrap().clone();
        let v = if cand1 == adj {
            set(&[[0.2, 0.3]])
        } else {
            adj.clone()
        };
        store
            .submit(&ids[1], req(Verdict::Adjust, Some(v.clone())), now)
            .unwrap();
        let d = store
            .submit(&ids[1], req(Verdict::RejectNoVisibility, None), now)
            .unwrap();
        assert_eq!(d.decision_seq, 2);
        assert!(matches!(
            store.submit("nope", req(Verdict::Accept, None), now),
            Err(Error::UnknownClip(_))
        ));

        let q = store.queue();
        assert_eq!(q.done.len(), 2);
        assert_eq!(q.pending.len(), 4);
        assert!(q.pending.iter().all(|p| !q.done.contains(p)));

        let first = store.export(None);
        let c1 = first.clips.iter().find(|c| c.clip_id == ids[1]).unwrap();
        assert!(c1.gt_intervals.is_empty());
        assert_eq!(c1.verified, Some(true));
        drop(store);

        let store = ReviewStore::open(m.clone(), BTreeMap::new(), &log, None).unwrap();
        let again = store.export(None);
        assert_eq!(first.to_json_pretty(), again.to_json_pretty());
        let offline = export_offline(&m, &BTreeMap::new(), &log, None).unwrap();
        assert_eq!(first.to_json_pretty(), offline.to_json_pretty());
    }

    #[test]
    fn listing_order_and_filters() {
        let dir = tempfile::tempdir().unwrap();
        let m = synthetic::small_manifest(60, Split::StandardTest, 2);
        let mut store =
            ReviewStore::open(m, BTreeMap::new(), &dir.path().join("l.jsonl"), None).unwrap();
        let all = store.list(&ClipFilter::default(), 1, 1000).unwrap();
        assert_eq!(all.total, 60);
        let first = all.items[0].clip_id.clone();
        store
            .submit(&first, req(Verdict::Accept, None), Utc::now())
            .unwrap();
        let all = store.list(&ClipFilter::default(), 1, 1000).unwrap();
        assert_eq!(all.items.last().unwrap().clip_id, first);
        let ids: Vec<&str> = all.items[..59].iter().map(|s| s.clip_id.as_str()).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));

        let vase = ClipFilter {
            category: Some("vase0".into()),
            ..Default::default()
        };
        let page = store.list(&vase, 1, 1000).unwrap();
        assert!(page.items.iter().all(|s| s.object_category == "vase0"));
        assert_eq!(
            page.total,
            store
                .manifest()
                .clips
                .iter()
                .filter(|c| c.object_category == "vase0")
                .count()
        );

        let bad = ClipFilter {
            category: Some("spaceship".into()),
            ..Default::default()
        };
        assert!(store.list(&bad, 1, 10).is_err());

        let paged = store.list(&ClipFilter::default(), 2, 25).unwrap();
        assert_eq!(paged.items.len(), 25);
        assert_eq!(paged.items[0].clip_id, all.items[25].clip_id);
    }
}
