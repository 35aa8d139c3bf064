//! Time intervals inside a clip and the two IoU notions used on them.
//!
//! An [`IntervalSet`] is always kept normalized: sorted by start and pairwise
//! disjoint (overlapping members are merged, abutting members are kept apart).

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Length of every benchmark clip, in seconds.
pub const CLIP_DURATION_SEC: f64 = 2.0;
/// Frame rate of every rendered clip.
pub const CLIP_FPS: u32 = 30;
/// Frames per clip (`CLIP_FPS * CLIP_DURATION_SEC`).
pub const FRAMES_PER_CLIP: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::Interval(format!(
                "non-finite bound in [{start}, {end}]"
            )));
        }
        if start >= end {
            return Err(Error::Interval(format!(
                "start must be before end, got [{start}, {end}]"
            )));
        }
        Ok(Interval { start, end })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn intersection_length(&self, other: &Interval) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }

    /// Intersection over union of two single intervals.
    pub fn iou(&self, other: &Interval) -> f64 {
        let inter = self.intersection_length(other);
        let union = self.length() + other.length() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet::default()
    }

    /// Builds a set from already-validated intervals, merging overlaps.
    pub fn from_intervals(mut intervals: Vec<Interval>) -> Self {
        intervals.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
        let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.start < last.end => last.end = last.end.max(iv.end),
                _ => merged.push(iv),
            }
        }
        IntervalSet { intervals: merged }
    }

    /// Strict construction: every pair must satisfy `0 <= start < end <= duration`.
    pub fn try_from_pairs(pairs: &[[f64; 2]], duration: f64) -> Result<Self> {
        let mut out = Vec::with_capacity(pairs.len());
        for &[s, e] in pairs {
            let iv = Interval::new(s, e)?;
            if s < 0.0 || e > duration {
                return Err(Error::Interval(format!(
                    "[{s}, {e}] lies outside [0, {duration}]"
                )));
            }
            out.push(iv);
        }
        Ok(IntervalSet::from_intervals(out))
    }

    /// Lenient construction for model output: bounds outside `[0, duration]`
    /// are clamped. Returns the set and whether any bound was clamped.
    pub fn from_pairs_clamped(pairs: &[[f64; 2]], duration: f64) -> Result<(Self, bool)> {
        let mut clamped = false;
        let mut out = Vec::with_capacity(pairs.len());
        for &[s, e] in pairs {
            Interval::new(s, e)?;
            let cs = s.clamp(0.0, duration);
            let ce = e.clamp(0.0, duration);
            if cs != s || ce != e {
                clamped = true;
            }
            out.push(Interval::new(cs, ce).map_err(|_| {
                Error::Interval(format!(
                    "[{s}, {e}] is empty after clamping to [0, {duration}]"
                ))
            })?);
        }
        Ok((IntervalSet::from_intervals(out), clamped))
    }

    pub fn check_within(&self, duration: f64) -> Result<()> {
        match self
            .intervals
            .iter()
            .find(|iv| iv.start < 0.0 || iv.end > duration)
        {
            Some(iv) => Err(Error::Interval(format!(
                "[{}, {}] lies outside [0, {duration}]",
                iv.start, iv.end
            ))),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.intervals.iter()
    }

    pub fn as_slice(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.intervals.iter().map(|iv| [iv.start, iv.end]).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(Interval::length).sum()
    }

    /// Length of the intersection of the two unions (linear merge).
    pub fn intersection_length(&self, other: &IntervalSet) -> f64 {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        let mut total = 0.0;
        while i < a.len() && j < b.len() {
            total += a[i].intersection_length(&b[j]);
            if a[i].end < b[j].end {
                i += 1;
            } else {
                j += 1;
            }
        }
        total
    }

    /// Whole-set IoU: total intersection length over total union length.
    /// Returns `None` when both sets are empty.
    pub fn set_iou(&self, other: &IntervalSet) -> Option<f64> {
        let inter = self.intersection_length(other);
        let union = self.total_length() + other.total_length() - inter;
        if union <= 0.0 {
            None
        } else {
            Some((inter / union).clamp(0.0, 1.0))
        }
    }

    /// Best IoU over all (self, other) member pairs. `None` if either is empty.
    pub fn max_pairwise_iou(&self, other: &IntervalSet) -> Option<f64> {
        if self.is_empty() || other.is_empty() {
            return None;
        }
        let best = self
            .intervals
            .iter()
            .flat_map(|p| other.intervals.iter().map(move |g| p.iou(g)))
            .fold(0.0_f64, f64::max);
        Some(best)
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "[{},{}]", iv.start, iv.end)?;
        }
        f.write_str("]")
    }
}

impl Serialize for IntervalSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_pairs().serialize(serializer)
    }
}

/// Deserialization checks ordering and finiteness; the clip-duration bound
/// is the caller's job (see [`IntervalSet::check_within`]).
impl<'de> Deserialize<'de> for IntervalSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        let mut out = Vec::with_capacity(pairs.len());
        for [s, e] in pairs {
            let iv = Interval::new(s, e).map_err(serde::de::Error::custom)?;
            if s < 0.0 {
                return Err(serde::de::Error::custom(format!("negative start {s}")));
            }
            out.push(iv);
        }
        Ok(IntervalSet::from_intervals(out))
    }
}
