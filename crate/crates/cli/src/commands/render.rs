use std::path::Path;

use anyhow::{Context, Result};
use dance_core::fsutil::write_atomic;
use dance_core::metrics::BeatSequence;
use dance_core::motion::PoseSequence;
use rayon::prelude::*;

use crate::render::{beat_plot_svg, frame_svg, Canvas, View};
use crate::Warnings;

pub const BEAT_PLOT_NAME: &str = "beats.svg";

#[derive(Debug, Clone)]
pub struct RenderArgs<'a> {
    pub poses: &'a Path,
    pub out: &'a Path,
    pub view: View,
    /// Overrides the file's frame rate in the burned-in time stamps.
    pub fps: Option<f64>,
    pub beats: Option<&'a Path>,
    pub size: f64,
}

/// Writes `frame_00000.svg`, `frame_00001.svg`, ... and, with beats, a plot.
pub fn run(args: &RenderArgs<'_>, warn: &mut Warnings) -> Result<()> {
    let seq = PoseSequence::load(args.poses)?;
    let fps = args.fps.unwrap_or(seq.fps());
    anyhow::ensure!(fps > 0.0 && fps.is_finite(), "--fps must be positive");
    let beats = match args.beats {
        Some(p) => BeatSequence::load(p)?,
        None => BeatSequence::default(),
    };
    if let Some(&last) = beats.frames().last() {
        if last >= seq.len() {
            warn.push(format!(
                "beat frame {last} lies past the {}-frame sequence",
                seq.len()
            ));
        }
    }
    std::fs::create_dir_all(args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let canvas = Canvas::fit(&seq, args.view, args.size);
    (0..seq.len()).into_par_iter().try_for_each(|t| {
        let beat = beats.frames().binary_search(&t).is_ok();
        let svg = frame_svg(&seq, t, args.view, &canvas, fps, beat);
        write_atomic(&args.out.join(format!("frame_{t:05}.svg")), svg.as_bytes())
    })?;
    if args.beats.is_some() {
        write_atomic(
            &args.out.join(BEAT_PLOT_NAME),
            beat_plot_svg(&seq, &beats).as_bytes(),
        )?;
    }
    println!("{} frames rendered to {}", seq.len(), args.out.display());
    Ok(())
}
