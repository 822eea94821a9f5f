//! Deterministic PNG plots: trajectory overlays and error bar charts.
//!
//! Everything is drawn with integer line rasterization and a small bitmap
//! font, so re-plotting the same data yields byte-identical files.

use anyhow::{bail, Context, Result};
use image::{Rgb, RgbImage};

use tacshear::servo::StepLog;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const BLACK: Rgb<u8> = Rgb([20, 20, 20]);
/// Leader path color (red) and follower path color (blue).
const LEADER: Rgb<u8> = Rgb([210, 40, 40]);
const FOLLOWER: Rgb<u8> = Rgb([40, 70, 210]);
const BASELINE_GRAY: Rgb<u8> = Rgb([170, 170, 170]);

/// A task log parsed back from its JSON-lines file.
pub struct ParsedLog {
    pub mean_error: f64,
    pub std_error: f64,
    pub steps: Vec<StepLog>,
}

pub fn parse_jsonl(text: &str) -> Result<ParsedLog> {
    let mut lines = text.lines();
    let summary: serde_json::Value =
        serde_json::from_str(lines.next().context("empty task log")?)
            .context("malformed task log summary line")?;
    let mean_error = summary["mean_error"].as_f64().context("summary lacks mean_error")?;
    let std_error = summary["std_error"].as_f64().context("summary lacks std_error")?;
    let steps: Vec<StepLog> = lines
        .map(|l| serde_json::from_str(l).context("malformed task log step line"))
        .collect::<Result<_>>()?;
    if steps.is_empty() {
        bail!("task log has no steps");
    }
    Ok(ParsedLog { mean_error, std_error, steps })
}

/// Annotation text for a trajectory plot.
pub fn error_annotation(mean: f64, std: f64) -> String {
    format!("error={mean:.2}±{std:.2} mm")
}

/// Planar (x, y) overlay of the leader (red) and follower (blue) paths,
/// titled with the tracking error.
pub fn draw_trajectories(log: &ParsedLog) -> RgbImage {
    let (w, h) = (480u32, 480u32);
    let mut img = RgbImage::from_pixel(w, h, WHITE);

    let leader: Vec<[f64; 2]> =
        log.steps.iter().map(|s| [s.object_pose.x, s.object_pose.y]).collect();
    let follower: Vec<[f64; 2]> =
        log.steps.iter().map(|s| [s.sensor_pose.x, s.sensor_pose.y]).collect();

    let all = leader.iter().chain(follower.iter());
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in all {
        for d in 0..2 {
            min[d] = min[d].min(p[d]);
            max[d] = max[d].max(p[d]);
        }
    }
    let margin = 40.0;
    let span = [(max[0] - min[0]).max(1e-9), (max[1] - min[1]).max(1e-9)];
    let scale = ((w as f64 - 2.0 * margin) / span[0]).min((h as f64 - 2.0 * margin) / span[1]);
    let project = |p: [f64; 2]| -> (i32, i32) {
        let x = margin + (p[0] - min[0]) * scale + (w as f64 - 2.0 * margin - span[0] * scale) / 2.0;
        // Image rows grow downward; flip y so +y is up.
        let y = h as f64 - margin - (p[1] - min[1]) * scale
            - (h as f64 - 2.0 * margin - span[1] * scale) / 2.0;
        (x.round() as i32, y.round() as i32)
    };

    for path in [(&leader, LEADER), (&follower, FOLLOWER)] {
        let (points, color) = path;
        for pair in points.windows(2) {
            let (x0, y0) = project(pair[0]);
            let (x1, y1) = project(pair[1]);
            draw_line(&mut img, x0, y0, x1, y1, color);
        }
    }

    draw_text(&mut img, 12, 10, &error_annotation(log.mean_error, log.std_error), 2, BLACK);
    // Legend: a short stroke of each color.
    draw_line(&mut img, 12, 36, 36, 36, LEADER);
    draw_line(&mut img, 52, 36, 76, 36, FOLLOWER);
    img
}

/// Per-dimension bar chart of estimator MAE (blue) against the
/// predict-the-training-mean baseline (gray), values annotated above.
pub fn bar_chart(mae: &[f64], baseline: &[f64]) -> RgbImage {
    let dims = mae.len();
    let group_w = 90u32;
    let (w, h) = (group_w * dims as u32 + 30, 320u32);
    let mut img = RgbImage::from_pixel(w, h, WHITE);
    let top = 40.0;
    let bottom = (h - 30) as f64;
    let peak = mae
        .iter()
        .chain(baseline.iter())
        .fold(0.0f64, |a, &v| a.max(v))
        .max(1e-9);
    let bar_h = |v: f64| ((bottom - top) * v / peak).round() as i32;

    for d in 0..dims {
        let x0 = 20 + d as i32 * group_w as i32;
        for (slot, (v, color)) in
            [(mae[d], FOLLOWER), (baseline[d], BASELINE_GRAY)].into_iter().enumerate()
        {
            let bx = x0 + slot as i32 * 34;
            let height = bar_h(v);
            fill_rect(&mut img, bx, bottom as i32 - height, 26, height.max(1), color);
            draw_text(
                &mut img,
                bx,
                bottom as i32 - height - 12,
                &format!("{v:.2}"),
                1,
                BLACK,
            );
        }
        draw_text(&mut img, x0 + 28, (bottom as i32) + 8, &format!("{d}"), 1, BLACK);
    }
    draw_line(&mut img, 14, bottom as i32, w as i32 - 8, bottom as i32, BLACK);
    img
}

fn fill_rect(img: &mut RgbImage, x: i32, y: i32, w: i32, h: i32, color: Rgb<u8>) {
    for dy in 0..h {
        for dx in 0..w {
            put(img, x + dx, y + dy, color);
        }
    }
}

fn put(img: &mut RgbImage, x: i32, y: i32, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

/// Bresenham line.
fn draw_line(img: &mut RgbImage, x0: i32, y0: i32, x1: i32, y1: i32, color: Rgb<u8>) {
    let (mut x, mut y) = (x0, y0);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(img, x, y, color);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// 5x7 bitmap glyphs for the characters the plots need; one u8 per row,
/// low five bits, MSB-left.
fn glyph(c: char) -> [u8; 7] {
    match c {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '=' => [0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00],
        '±' => [0x04, 0x04, 0x1F, 0x04, 0x04, 0x00, 0x1F],
        'e' => [0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E],
        'r' => [0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10],
        'o' => [0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E],
        'm' => [0x00, 0x00, 0x1A, 0x15, 0x15, 0x15, 0x15],
        _ => [0; 7],
    }
}

fn draw_text(img: &mut RgbImage, x: i32, y: i32, text: &str, scale: i32, color: Rgb<u8>) {
    let mut cx = x;
    for c in text.chars() {
        let rows = glyph(c);
        for (r, row) in rows.iter().enumerate() {
            for col in 0..5 {
                if row & (0x10 >> col) != 0 {
                    fill_rect(
                        img,
                        cx + col as i32 * scale,
                        y + r as i32 * scale,
                        scale,
                        scale,
                        color,
                    );
                }
            }
        }
        cx += 6 * scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tacshear::pose::{Pose4, ShearVector};

    fn step(i: usize, lead: [f64; 2], follow: [f64; 2]) -> StepLog {
        StepLog {
            step: i,
            object_pose: Pose4 { x: lead[0], y: lead[1], z: 0.0, yaw: 0.0 },
            sensor_pose: Pose4 { x: follow[0], y: follow[1], z: 19.0, yaw: 0.0 },
            shear: ShearVector::ZERO,
            depth: 1.0,
            in_contact: true,
            error: 0.0,
            error_y: 0.0,
        }
    }

    #[test]
    fn annotation_formats_mean_and_std() {
        assert_eq!(error_annotation(1.234, 0.56), "error=1.23±0.56 mm");
        assert_eq!(error_annotation(0.0, 0.0), "error=0.00±0.00 mm");
    }

    #[test]
    fn identical_paths_overlap_exactly() {
        // Follower on top of the leader: every leader pixel is overdrawn
        // blue, so no red survives.
        let steps: Vec<StepLog> =
            (0..50).map(|i| step(i, [i as f64, i as f64 / 2.0], [i as f64, i as f64 / 2.0])).collect();
        let log = ParsedLog { mean_error: 0.0, std_error: 0.0, steps };
        let img = draw_trajectories(&log);
        let red = img.pixels().filter(|p| **p == LEADER).count();
        let blue = img.pixels().filter(|p| **p == FOLLOWER).count();
        // Only the legend stroke stays red.
        assert!(red <= 25, "{red} leader pixels visible");
        assert!(blue > 50);
    }

    #[test]
    fn distinct_paths_show_both_colors() {
        let steps: Vec<StepLog> =
            (0..50).map(|i| step(i, [i as f64, 0.0], [i as f64, 10.0])).collect();
        let log = ParsedLog { mean_error: 10.0, std_error: 0.0, steps };
        let img = draw_trajectories(&log);
        assert!(img.pixels().filter(|p| **p == LEADER).count() > 40);
        assert!(img.pixels().filter(|p| **p == FOLLOWER).count() > 40);
    }

    #[test]
    fn drawing_is_deterministic() {
        let steps: Vec<StepLog> =
            (0..30).map(|i| step(i, [i as f64, (i * i) as f64 / 30.0], [i as f64, 1.0])).collect();
        let log = ParsedLog { mean_error: 0.5, std_error: 0.25, steps };
        assert_eq!(draw_trajectories(&log), draw_trajectories(&log));
    }

    #[test]
    fn bar_chart_draws_each_dimension() {
        let img = bar_chart(&[0.1, 0.2, 0.3, 0.4], &[1.0, 1.0, 1.5, 0.5]);
        assert_eq!(img.width(), 90 * 4 + 30);
        assert!(img.pixels().filter(|p| **p == FOLLOWER).count() > 100);
        assert!(img.pixels().filter(|p| **p == BASELINE_GRAY).count() > 100);
    }

    #[test]
    fn jsonl_parse_rejects_garbage() {
        assert!(parse_jsonl("").is_err());
        assert!(parse_jsonl("{}").is_err());
        assert!(parse_jsonl("{\"mean_error\":1.0,\"std_error\":0.1}\nnot json").is_err());
        // A summary with no steps is also malformed.
        assert!(parse_jsonl("{\"mean_error\":1.0,\"std_error\":0.1}").is_err());
    }
}
