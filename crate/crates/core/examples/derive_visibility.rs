//! Renders a synthetic clip whose highlight appears in two bursts, then
//! recovers candidate visibility intervals from the frame pairs.

use mmviad::synthetic::{self, FrameSpec};
use mmviad::visibility::{self, DiffParams, DEFAULT_FPS};

fn main() -> mmviad::Result<()> {
    // visible on frames 6..20 and 24..41, with a one-frame flicker at 13
    let schedule: Vec<FrameSpec> = (0..60)
        .map(|i| {
            let on = ((6..20).contains(&i) && i != 13) || (24..41).contains(&i);
            FrameSpec {
                patch: on.then_some((30, 12, 12)),
                illumination: 8,
            }
        })
        .collect();
    let frames = synthetic::render_frames(&schedule, 96, 54);

    let params = DiffParams::default();
    let (trace, cands) = visibility::derive_clip("demo_0001", &frames, &params, DEFAULT_FPS)?;
    let strip: String = trace
        .flags
        .iter()
        .map(|&f| if f { '#' } else { '.' })
        .collect();
    println!("flags      {strip}");
    println!("candidates {cands}");

    // without gap filling the flicker splits the first burst
    let strict = DiffParams {
        gap_fill_frames: 0,
        ..params
    };
    println!(
        "no gap fill {}",
        visibility::derive_intervals(&trace, &strict, DEFAULT_FPS)
    );

    // the same clip through the on-disk layout the CLI and service use
    let dir = tempfile_dir();
    frames.write_to(&dir, "demo_0001")?;
    let (_, from_disk) = visibility::derive_clip(
        "demo_0001",
        &visibility::DirFrames::new(&dir, "demo_0001"),
        &params,
        DEFAULT_FPS,
    )?;
    assert_eq!(from_disk, cands);
    println!(
        "on-disk frames agree ({} png files)",
        2 * frames.pairs.len()
    );
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("mmviad-derive-{}", std::process::id()));
    std::fs::create_dir_all(&d).expect("temp dir");
    d
}
