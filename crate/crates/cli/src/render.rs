//! SVG stick figures and beat plots.

use std::fmt::Write;

use dance_core::metrics::beats::aggregate_speed;
use dance_core::metrics::{joint_angles, BeatSequence};
use dance_core::motion::skeleton::bones;
use dance_core::motion::{PoseSequence, NUM_JOINTS};
use serde::{Deserialize, Serialize};

/// Orthographic camera direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum View {
    /// Looking along −z: image axes are x and y.
    Front,
    /// Looking along x: image axes are z and y.
    Side,
    /// Looking down y: image axes are x and z.
    Top,
}

impl View {
    /// Image-plane coordinates (right, up) of a world point.
    pub fn project(self, p: [f64; 3]) -> [f64; 2] {
        match self {
            View::Front => [p[0], p[1]],
            View::Side => [p[2], p[1]],
            View::Top => [p[0], -p[2]],
        }
    }
}

const BEAT_FILL: &str = "#ffe9b3";
const PLAIN_FILL: &str = "#ffffff";

/// Fixed mapping from image-plane coordinates to pixels, shared by every
/// frame so the figure does not jump around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canvas {
    pub size: f64,
    center: [f64; 2],
    scale: f64,
}

impl Canvas {
    pub fn fit(seq: &PoseSequence, view: View, size: f64) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for t in 0..seq.len() {
            for j in 0..NUM_JOINTS {
                let q = view.project(seq.joint(t, j));
                for k in 0..2 {
                    lo[k] = lo[k].min(q[k]);
                    hi[k] = hi[k].max(q[k]);
                }
            }
        }
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let extent = if extent > 1e-9 { extent } else { 1.0 };
        Self {
            size,
            center: [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0],
            scale: 0.8 * size / extent,
        }
    }

    pub fn pixel(&self, q: [f64; 2]) -> [f64; 2] {
        [
            self.size / 2.0 + (q[0] - self.center[0]) * self.scale,
            self.size / 2.0 - (q[1] - self.center[1]) * self.scale,
        ]
    }
}

/// One frame as a standalone SVG document.
pub fn frame_svg(
    seq: &PoseSequence,
    t: usize,
    view: View,
    canvas: &Canvas,
    fps: f64,
    beat: bool,
) -> String {
    let px: Vec<[f64; 2]> = (0..NUM_JOINTS)
        .map(|j| canvas.pixel(view.project(seq.joint(t, j))))
        .collect();
    let s = canvas.size;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#
    );
    let fill = if beat { BEAT_FILL } else { PLAIN_FILL };
    let _ = writeln!(out, r#"<rect width="{s}" height="{s}" fill="{fill}"/>"#);
    let _ = writeln!(
        out,
        r##"<g stroke="#223344" stroke-width="3" stroke-linecap="round">"##
    );
    for (a, b) in bones() {
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
            px[a][0], px[a][1], px[b][0], px[b][1]
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g fill="#cc3333">"##);
    for p in &px {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, p[0], p[1]);
    }
    let _ = writeln!(out, "</g>");
    let label = format!(
        "frame {t}  {:.3} s{}",
        t as f64 / fps,
        if beat { "  beat" } else { "" }
    );
    let _ = writeln!(
        out,
        r#"<text x="8" y="20" font-family="monospace" font-size="14">{label}</text>"#
    );
    out.push_str("</svg>\n");
    out
}

/// Aggregate joint-angle speed over time with beat frames marked.
pub fn beat_plot_svg(seq: &PoseSequence, beats: &BeatSequence) -> String {
    let (w, h, pad) = (800.0, 200.0, 20.0);
    let speed = aggregate_speed(&joint_angles(seq));
    let top = speed
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let top = if top > 0.0 { top } else { 1.0 };
    let span = (seq.len().max(2) - 1) as f64;
    let x = |frame: f64| pad + (w - 2.0 * pad) * frame / span;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * v / top;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{w}" height="{h}" fill="{PLAIN_FILL}"/>"#
    );
    let _ = writeln!(out, r##"<g stroke="#e0a000" stroke-width="1">"##);
    for &f in beats.frames() {
        let _ = writeln!(
            out,
            r#"<line x1="{0:.2}" y1="{pad}" x2="{0:.2}" y2="{1}"/>"#,
            x(f as f64),
            h - pad
        );
    }
    let _ = writeln!(out, "</g>");
    // speed[i] belongs to frame i + 1
    let points: Vec<String> = speed
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, &v)| format!("{:.2},{:.2}", x((i + 1) as f64), y(v)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline fill="none" stroke="#223344" stroke-width="1.5" points="{}"/>"##,
        points.join(" ")
    );
    let _ = writeln!(
        out,
        r#"<text x="{pad}" y="14" font-family="monospace" font-size="12">joint-angle speed, {} beats</text>"#,
        beats.len()
    );
    out.push_str("</svg>\n");
    out
}
