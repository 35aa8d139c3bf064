//! Candidate visible-time intervals from aligned marked/unmarked renders.
//!
//! Each frame pair is block-averaged, then a block counts as "defect
//! visible" when the marked render differs from the unmarked one and is
//! red-dominant there. Per-frame counts are thresholded into flags, and the
//! flag vector is turned into intervals by run merging.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalSet, CLIP_FPS, FRAMES_PER_CLIP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffParams {
    /// Minimum per-channel absolute difference (8-bit scale).
    pub channel_threshold: u8,
    /// How far red must exceed green and blue in the marked render.
    pub red_dominance_delta: u8,
    /// Minimum number of counted blocks for a frame to be flagged.
    pub area_threshold: u32,
    /// Runs separated by at most this many unflagged frames are merged.
    pub gap_fill_frames: u32,
    /// Runs shorter than this (after merging) are dropped.
    pub min_interval_frames: u32,
    /// Block size for averaging before the comparison; 1 disables it.
    pub downscale_factor: u32,
}

impl Default for DiffParams {
    fn default() -> Self {
        DiffParams {
            channel_threshold: 30,
            red_dominance_delta: 40,
            area_threshold: 25,
            gap_fill_frames: 2,
            min_interval_frames: 3,
            downscale_factor: 2,
        }
    }
}

pub struct FramePair {
    pub frame_index: usize,
    pub unmarked: RgbImage,
    pub marked: RgbImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityTrace {
    pub clip_id: String,
    pub flags: Vec<bool>,
    pub diff_pixel_counts: Vec<u32>,
    pub params: DiffParams,
}

/// Number of (downscaled) pixels where the marked render shows red highlight
/// that the unmarked render lacks.
pub fn frame_diff(pair: &FramePair, params: &DiffParams) -> Result<u32> {
    let (w, h) = pair.unmarked.dimensions();
    if pair.marked.dimensions() != (w, h) {
        return Err(Error::Alignment(format!(
            "frame {}: unmarked is {}x{}, marked is {}x{}",
            pair.frame_index,
            w,
            h,
            pair.marked.width(),
            pair.marked.height()
        )));
    }
    if params.downscale_factor == 0 {
        return Err(Error::Contract("downscale_factor must be >= 1".into()));
    }
    let f = params.downscale_factor;
    let threshold = f64::from(params.channel_threshold);
    let delta = f64::from(params.red_dominance_delta);
    let mut count = 0;
    for by in (0..h).step_by(f as usize) {
        for bx in (0..w).step_by(f as usize) {
            let (mut m, mut u) = ([0u32; 3], [0u32; 3]);
            let mut n = 0u32;
            for y in by..(by + f).min(h) {
                for x in bx..(bx + f).min(w) {
                    let pm = pair.marked.get_pixel(x, y).0;
                    let pu = pair.unmarked.get_pixel(x, y).0;
                    for c in 0..3 {
                        m[c] += u32::from(pm[c]);
                        u[c] += u32::from(pu[c]);
                    }
                    n += 1;
                }
            }
            let avg = |s: [u32; 3]| s.map(|v| f64::from(v) / f64::from(n));
            let (m, u) = (avg(m), avg(u));
            let differs = (0..3).map(|c| (m[c] - u[c]).abs()).fold(0.0, f64::max) > threshold;
            let red = m[0] > m[1] + delta && m[0] > m[2] + delta;
            if differs && red {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Turns per-frame flags into frame runs `[start, end)`: merge runs whose
/// gap is at most `gap_fill_frames`, then drop runs shorter than
/// `min_interval_frames`.
pub fn flag_runs(flags: &[bool], params: &DiffParams) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < flags.len() {
        if !flags[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < flags.len() && flags[i] {
            i += 1;
        }
        match runs.last_mut() {
            Some(last) if start - last.1 <= params.gap_fill_frames as usize => last.1 = i,
            _ => runs.push((start, i)),
        }
    }
    runs.retain(|(s, e)| e - s >= params.min_interval_frames as usize);
    runs
}

/// Candidate intervals in seconds; frame `i` covers `[i/fps, (i+1)/fps)`.
pub fn derive_intervals(trace: &VisibilityTrace, params: &DiffParams, fps: u32) -> IntervalSet {
    let fps = f64::from(fps);
    let intervals = flag_runs(&trace.flags, params)
        .into_iter()
        .map(|(s, e)| Interval::new(s as f64 / fps, e as f64 / fps).expect("non-empty run"))
        .collect();
    IntervalSet::from_intervals(intervals)
}

/// Anything that can hand out the aligned frame pairs of one clip.
pub trait FrameSource: Sync {
    fn frame_count(&self) -> usize;
    fn load_pair(&self, index: usize) -> Result<FramePair>;
}

/// In-memory frames, mostly for synthetic clips.
pub struct MemoryFrames {
    pub pairs: Vec<(RgbImage, RgbImage)>,
}

impl MemoryFrames {
    /// Writes the pairs as PNGs in the standard on-disk layout.
    pub fn write_to(&self, root: &Path, clip_id: &str) -> Result<()> {
        for variant in [FrameVariant::Unmarked, FrameVariant::Marked] {
            let dir = root.join(clip_id).join(variant.dir_name());
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        for (i, (u, m)) in self.pairs.iter().enumerate() {
            for (variant, img) in [(FrameVariant::Unmarked, u), (FrameVariant::Marked, m)] {
                let path = frame_path(root, clip_id, variant, i);
                img.save_with_format(&path, image::ImageFormat::Png)
                    .map_err(|e| Error::Frame(format!("{}: {e}", path.display())))?;
            }
        }
        Ok(())
    }
}

impl FrameSource for MemoryFrames {
    fn frame_count(&self) -> usize {
        self.pairs.len()
    }

    fn load_pair(&self, index: usize) -> Result<FramePair> {
        let (u, m) = self
            .pairs
            .get(index)
            .ok_or_else(|| Error::Frame(format!("missing frame {index}")))?;
        Ok(FramePair {
            frame_index: index,
            unmarked: u.clone(),
            marked: m.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameVariant {
    Unmarked,
    Marked,
}

impl FrameVariant {
    pub fn dir_name(&self) -> &'static str {
        match self {
            FrameVariant::Unmarked => "unmarked",
            FrameVariant::Marked => "marked",
        }
    }
}

/// Path of one stored frame: `<root>/<clip_id>/<variant>/frame_NNNN.png`.
pub fn frame_path(root: &Path, clip_id: &str, variant: FrameVariant, index: usize) -> PathBuf {
    root.join(clip_id)
        .join(variant.dir_name())
        .join(format!("frame_{index:04}.png"))
}

/// PNG frames on disk in the standard layout.
pub struct DirFrames {
    pub root: PathBuf,
    pub clip_id: String,
    pub frames: usize,
}

impl DirFrames {
    pub fn new(root: impl Into<PathBuf>, clip_id: impl Into<String>) -> Self {
        DirFrames {
            root: root.into(),
            clip_id: clip_id.into(),
            frames: FRAMES_PER_CLIP,
        }
    }

    fn load(&self, variant: FrameVariant, index: usize) -> Result<RgbImage> {
        let path = frame_path(&self.root, &self.clip_id, variant, index);
        let bytes =
            fs::read(&path).map_err(|e| Error::Frame(format!("{}: {e}", path.display())))?;
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| Error::Frame(format!("{}: {e}", path.display())))?;
        Ok(img.to_rgb8())
    }
}

impl FrameSource for DirFrames {
    fn frame_count(&self) -> usize {
        self.frames
    }

    fn load_pair(&self, index: usize) -> Result<FramePair> {
        Ok(FramePair {
            frame_index: index,
            unmarked: self.load(FrameVariant::Unmarked, index)?,
            marked: self.load(FrameVariant::Marked, index)?,
        })
    }
}

/// Diffs every frame of a clip and derives its candidate intervals.
pub fn derive_clip(
    clip_id: &str,
    source: &dyn FrameSource,
    params: &DiffParams,
    fps: u32,
) -> Result<(VisibilityTrace, IntervalSet)> {
    let n = source.frame_count();
    let per_frame: Vec<(u32, (u32, u32))> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pair = source.load_pair(i)?;
            let dims = pair.unmarked.dimensions();
            Ok((frame_diff(&pair, params)?, dims))
        })
        .collect::<Result<_>>()?;
    if let Some(&(_, first)) = per_frame.first() {
        if let Some(i) = per_frame.iter().position(|&(_, d)| d != first) {
            return Err(Error::Alignment(format!(
                "clip {clip_id}: frame {i} is {}x{} but frame 0 is {}x{}",
                per_frame[i].1 .0, per_frame[i].1 .1, first.0, first.1
            )));
        }
    }
    let counts: Vec<u32> = per_frame.into_iter().map(|(c, _)| c).collect();
    let trace = VisibilityTrace {
        clip_id: clip_id.to_owned(),
        flags: counts.iter().map(|&c| c >= params.area_threshold).collect(),
        diff_pixel_counts: counts,
        params: *params,
    };
    let intervals = derive_intervals(&trace, params, fps);
    Ok((trace, intervals))
}

/// On-disk candidate document for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDoc {
    pub clip_id: String,
    pub candidates: IntervalSet,
    pub params: DiffParams,
    pub diff_counts: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl CandidateDoc {
    pub fn from_trace(trace: &VisibilityTrace, candidates: IntervalSet) -> Self {
        CandidateDoc {
            clip_id: trace.clip_id.clone(),
            candidates,
            params: trace.params,
            diff_counts: trace.diff_pixel_counts.clone(),
            meta: None,
        }
    }
}

/// Clip directories under a frame root, sorted by name.
pub fn list_clip_dirs(root: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().join(FrameVariant::Marked.dir_name()).is_dir() {
            out.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    out.sort();
    Ok(out)
}

/// Reads every `*.json` candidate document in `dir`, keyed by clip id.
pub fn load_candidate_dir(dir: &Path) -> Result<std::collections::BTreeMap<String, IntervalSet>> {
    let mut out = std::collections::BTreeMap::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for p in paths {
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let doc: CandidateDoc = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", p.display())))?;
        if out.insert(doc.clip_id.clone(), doc.candidates).is_some() {
            return Err(Error::clip(doc.clip_id, "more than one candidate document"));
        }
    }
    Ok(out)
}

pub const DEFAULT_FPS: u32 = CLIP_FPS;

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn gray(w: u32, h: u32, v: u8) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb([v, v, v]))
    }

    fn pair(unmarked: RgbImage, marked: RgbImage) -> FramePair {
        FramePair {
            frame_index: 0,
            unmarked,
            marked,
        }
    }

    #[test]
    fn identical_frames() {
        let g = gray(40, 30, 128);
        assert_eq!(
            frame_diff(&pair(g.clone(), g), &DiffParams::default()).unwrap(),
            0
        );
    }

    #[test]
    fn red_patch_counts() {
        let u = gray(40, 30, 128);
        let mut m = u.clone();
        for y in 10..20 {
            for x in 4..14 {
                m.put_pixel(x, y, Rgb([255, 0, 0]));
            }
        }
        let p = pair(u, m);
        assert_eq!(frame_diff(&p, &DiffParams::default()).unwrap(), 25);
        let full = DiffParams {
            downscale_factor: 1,
            ..Default::default()
        };
        assert_eq!(frame_diff(&p, &full).unwrap(), 100);
    }

    #[test]
    fn illumination_shift_is_ignored() {
        let u = gray(40, 30, 100);
        let m = gray(40, 30, 150);
        assert_eq!(frame_diff(&pair(u, m), &DiffParams::default()).unwrap(), 0);
    }

    #[test]
    fn size_mismatch() {
        let r = frame_diff(&pair(gray(4, 4, 0), gray(4, 5, 0)), &DiffParams::default());
        assert!(matches!(r, Err(Error::Alignment(_))));
    }

    fn trace_from(flags: Vec<bool>) -> VisibilityTrace {
        VisibilityTrace {
            clip_id: "c".into(),
            diff_pixel_counts: flags.iter().map(|&f| u32::from(f) * 100).collect(),
            flags,
            params: DiffParams::default(),
        }
    }

    fn flags(ranges: &[(usize, usize)]) -> Vec<bool> {
        (0..60)
            .map(|i| ranges.iter().any(|&(s, e)| (s..=e).contains(&i)))
            .collect()
    }

    #[test]
    fn interval_derivation_examples() {
        let p = DiffParams::default();
        assert!(derive_intervals(&trace_from(vec![false; 60]), &p, 30).is_empty());

        let got = derive_intervals(&trace_from(flags(&[(15, 45)])), &p, 30);
        assert_eq!(got.to_pairs(), vec![[0.5, 46.0 / 30.0]]);

        let got = derive_intervals(&trace_from(flags(&[(10, 20), (23, 40)])), &p, 30);
        assert_eq!(got.to_pairs(), vec![[10.0 / 30.0, 41.0 / 30.0]]);

        let got = derive_intervals(&trace_from(flags(&[(10, 20), (24, 40)])), &p, 30);
        assert_eq!(got.len(), 2);

        let got = derive_intervals(&trace_from(flags(&[(30, 30)])), &p, 30);
        assert!(got.is_empty());

        let got = derive_intervals(&trace_from(flags(&[(0, 59)])), &p, 30);
        assert_eq!(got.to_pairs(), vec![[0.0, 2.0]]);
    }
}
