//! Static SVG figures: bird's-eye plan overlays and precision/recall curves.

use atlasbench_core::bev::BevPoint;
use atlasbench_core::geom::OrientedRect;
use atlasbench_core::metrics::{plan_footprints, EgoFootprint, PrCurve};
use atlasbench_core::scene::Scene;
use std::fmt::Write;

const SIZE: f64 = 480.0;
/// Ego-frame window in meters: x in [-30, 30], y in [-10, 50].
const X0: f64 = -30.0;
const Y0: f64 = -10.0;
const SPAN: f64 = 60.0;

fn px(p: BevPoint) -> (f64, f64) {
    ((p.x - X0) / SPAN * SIZE, SIZE - (p.y - Y0) / SPAN * SIZE)
}

fn polyline(points: &[BevPoint]) -> String {
    points
        .iter()
        .map(|&p| {
            let (x, y) = px(p);
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn rect(r: &OrientedRect, style: &str) -> String {
    format!("<polygon points=\"{}\" {style}/>\n", polyline(&r.corners()))
}

/// Agents and lanes at `t0`, the ground-truth plan (green) and the predicted
/// plan (red) in the ego frame.
pub fn bev_svg(scene: &Scene, t0: usize, pred: &[BevPoint], gt: &[BevPoint], footprint: &EgoFootprint) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let frame = &scene.frames[t0];
    let pose = frame.ego.pose();
    for lane in &frame.lanes {
        let pts: Vec<BevPoint> = lane.points.iter().map(|&p| pose.to_local(p)).collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#bbbbbb\" stroke-width=\"1.5\"/>",
            polyline(&pts)
        );
    }
    for a in &frame.agents {
        let r = OrientedRect::new(pose.to_local(a.center), a.length, a.width, pose.heading_to_local(a.heading));
        s += &rect(&r, "fill=\"#8fa8c8\" stroke=\"#34495e\" stroke-width=\"0.8\"");
    }
    let ego = OrientedRect::new(BevPoint::ORIGIN, footprint.length, footprint.width, std::f64::consts::FRAC_PI_2);
    s += &rect(&ego, "fill=\"#f5b041\" stroke=\"black\" stroke-width=\"0.8\"");
    for r in plan_footprints(pred, footprint) {
        s += &rect(&r, "fill=\"none\" stroke=\"#e74c3c\" stroke-width=\"0.5\" stroke-dasharray=\"2,2\"");
    }
    for (pts, color) in [(gt, "#27ae60"), (pred, "#e74c3c")] {
        let mut line = vec![BevPoint::ORIGIN];
        line.extend_from_slice(pts);
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            polyline(&line)
        );
        for &p in pts {
            let (x, y) = px(p);
            let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.5\" fill=\"{color}\"/>");
        }
    }
    s += "</svg>\n";
    s
}

const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// Precision against recall, one series per distance threshold.
pub fn pr_svg(curves: &[PrCurve]) -> String {
    let (w, h, m) = (420.0, 360.0, 40.0);
    let x = |r: f64| m + r * (w - 2.0 * m);
    let y = |p: f64| h - m - p * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<polyline points=\"{:.1},{:.1} {:.1},{:.1} {:.1},{:.1}\" fill=\"none\" stroke=\"black\"/>",
        x(0.0),
        y(1.0),
        x(0.0),
        y(0.0),
        x(1.0),
        y(0.0)
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">recall</text>",
        x(0.5),
        h - 8.0
    );
    let _ = writeln!(
        s,
        "<text x=\"12\" y=\"{:.1}\" font-size=\"12\" transform=\"rotate(-90 12 {:.1})\" text-anchor=\"middle\">precision</text>",
        y(0.5),
        y(0.5)
    );
    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.recall), y(p.precision)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            pts.join(" ")
        );
        for p in &c.points {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                x(p.recall),
                y(p.precision)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"{color}\">{} m</text>",
            w - m - 40.0,
            m + 14.0 * i as f64,
            c.threshold
        );
    }
    s += "</svg>\n";
    s
}
