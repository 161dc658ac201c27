//! Self-contained SVG renderings of stored run artifacts: the data with its
//! posterior-predictive band, the effective-reproduction-number band, and
//! posterior histograms. No plotting dependencies; output is deterministic
//! for identical inputs.

use std::fmt::Write as _;

use sirfit_core::PosteriorSamples;

use crate::artifacts::EnvelopeTable;

/// Default number of histogram bins.
pub const DEFAULT_BINS: usize = 40;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;

/// Maps a data rectangle onto a pixel rectangle (y inverted).
struct Frame {
    px_left: f64,
    px_right: f64,
    px_top: f64,
    px_bottom: f64,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(px: (f64, f64, f64, f64), x: (f64, f64), y: (f64, f64)) -> Self {
        let (px_left, px_right, px_top, px_bottom) = px;
        let pad = |lo: f64, hi: f64| {
            if hi > lo {
                (lo, hi)
            } else {
                // Degenerate range: widen symmetrically so division is safe.
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x_min, x_max) = pad(x.0, x.1);
        let (y_min, y_max) = pad(y.0, y.1);
        Self {
            px_left,
            px_right,
            px_top,
            px_bottom,
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    fn x(&self, v: f64) -> f64 {
        self.px_left + (v - self.x_min) / (self.x_max - self.x_min) * (self.px_right - self.px_left)
    }

    fn y(&self, v: f64) -> f64 {
        self.px_bottom
            - (v - self.y_min) / (self.y_max - self.y_min) * (self.px_bottom - self.px_top)
    }
}

/// Pixel coordinate formatting: two decimals is sub-pixel and stable.
fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// Tick label formatting: up to four significant decimals, trailing zeros
/// trimmed.
fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Roughly `target` round tick positions covering `[min, max]`.
fn ticks(min: f64, max: f64, target: usize) -> Vec<f64> {
    let range = max - min;
    if !(range.is_finite() && range > 0.0) {
        return vec![min];
    }
    let raw = range / target.max(1) as f64;
    let magnitude = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * magnitude)
        .find(|&s| s >= raw)
        .unwrap_or(magnitude * 10.0);
    // Index arithmetic with a clamp keeps accumulated rounding from pushing
    // the last tick a hair outside the data range.
    let first = (min / step).ceil() as i64;
    let last = (max / step + 1e-9).floor() as i64;
    let mut out = Vec::new();
    for k in first..=last {
        let t = (k as f64 * step).clamp(min, max);
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
    }
    if out.is_empty() {
        out.push(min);
        out.push(max);
    }
    out
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"16\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        px(frame.px_left),
        px(frame.px_top),
        px(frame.px_right - frame.px_left),
        px(frame.px_bottom - frame.px_top)
    );
    for t in ticks(frame.x_min, frame.x_max, 6) {
        let x = frame.x(t);
        let _ = write!(
            out,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n\
             <text x=\"{0}\" y=\"{3}\" text-anchor=\"middle\">{4}</text>\n",
            px(x),
            px(frame.px_bottom),
            px(frame.px_bottom + 4.0),
            px(frame.px_bottom + 18.0),
            tick_label(t)
        );
    }
    for t in ticks(frame.y_min, frame.y_max, 5) {
        let y = frame.y(t);
        let _ = write!(
            out,
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\"/>\n\
             <text x=\"{3}\" y=\"{4}\" text-anchor=\"end\">{5}</text>\n",
            px(y),
            px(frame.px_left - 4.0),
            px(frame.px_left),
            px(frame.px_left - 7.0),
            px(y + 4.0),
            tick_label(t)
        );
    }
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        px((frame.px_left + frame.px_right) / 2.0),
        px(frame.px_bottom + 34.0),
        escape(x_label)
    );
    let _ = write!(
        out,
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        px((frame.px_top + frame.px_bottom) / 2.0),
        px((frame.px_top + frame.px_bottom) / 2.0),
        escape(y_label)
    );
}

fn band(out: &mut String, frame: &Frame, pts: &[(f64, f64, f64)], fill: &str) {
    if pts.is_empty() {
        return;
    }
    let mut d = String::new();
    for (i, &(x, lo, _)) in pts.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(d, "{cmd}{},{} ", px(frame.x(x)), px(frame.y(lo)));
    }
    for &(x, _, hi) in pts.iter().rev() {
        let _ = write!(d, "L{},{} ", px(frame.x(x)), px(frame.y(hi)));
    }
    let _ = write!(out, "<path d=\"{}Z\" fill=\"{fill}\" stroke=\"none\"/>\n", d);
}

fn line(out: &mut String, frame: &Frame, pts: &[(f64, f64)], stroke: &str, dashed: bool) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{},{}", px(frame.x(x)), px(frame.y(y))))
        .collect();
    let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
    let _ = write!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"{dash}/>\n",
        coords.join(" ")
    );
}

fn dots(out: &mut String, frame: &Frame, pts: &[(f64, f64)]) {
    for &(x, y) in pts {
        let _ = write!(
            out,
            "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"black\"/>\n",
            px(frame.x(x)),
            px(frame.y(y))
        );
    }
}

/// Observed interest with the posterior-predictive median and 95% band.
#[must_use]
pub fn fit_plot(table: &EnvelopeTable, label: &str) -> String {
    let mut band_pts = Vec::new();
    let mut median_pts = Vec::new();
    let mut obs_pts = Vec::new();
    let mut y_max = 0.0f64;
    for (idx, &day) in table.days.iter().enumerate() {
        let x = day as f64;
        if let (Some(lo), Some(hi)) = (table.lower95[idx], table.upper95[idx]) {
            band_pts.push((x, lo, hi));
            y_max = y_max.max(hi);
        }
        if let Some(m) = table.median[idx] {
            median_pts.push((x, m));
            y_max = y_max.max(m);
        }
        if let Some(obs) = table.observed[idx] {
            obs_pts.push((x, obs));
            y_max = y_max.max(obs);
        }
    }
    let x_max = table.days.last().copied().unwrap_or(1) as f64;
    let frame = Frame::new((60.0, WIDTH - 20.0, 30.0, HEIGHT - 50.0), (0.0, x_max), (0.0, y_max));
    let mut out = header(&format!("Fit: {label}"));
    band(&mut out, &frame, &band_pts, "#9ecae1");
    line(&mut out, &frame, &median_pts, "#2171b5", false);
    dots(&mut out, &frame, &obs_pts);
    axes(&mut out, &frame, "day", "interest");
    out.push_str("</svg>\n");
    out
}

/// Effective reproduction number band with the replacement threshold.
#[must_use]
pub fn effective_r_plot(table: &EnvelopeTable) -> String {
    let band_pts: Vec<(f64, f64, f64)> = table
        .days
        .iter()
        .enumerate()
        .map(|(idx, &day)| (day as f64, table.rt_lower95[idx], table.rt_upper95[idx]))
        .collect();
    let median_pts: Vec<(f64, f64)> = table
        .days
        .iter()
        .enumerate()
        .map(|(idx, &day)| (day as f64, table.rt_median[idx]))
        .collect();
    let y_max = band_pts.iter().map(|&(_, _, hi)| hi).fold(1.0, f64::max);
    let x_max = table.days.last().copied().unwrap_or(1) as f64;
    let frame = Frame::new((60.0, WIDTH - 20.0, 30.0, HEIGHT - 50.0), (0.0, x_max), (0.0, y_max));
    let mut out = header("Effective reproduction number");
    band(&mut out, &frame, &band_pts, "#fdd0a2");
    line(&mut out, &frame, &median_pts, "#d94801", false);
    line(&mut out, &frame, &[(0.0, 1.0), (x_max, 1.0)], "black", true);
    axes(&mut out, &frame, "day", "R(t)");
    out.push_str("</svg>\n");
    out
}

/// Histogram bin counts over `[min, max]` of the values.
fn histogram(values: &[f64], bins: usize) -> (f64, f64, Vec<usize>) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0usize; bins];
    let width = (max - min).max(f64::MIN_POSITIVE);
    for &v in values {
        let idx = (((v - min) / width) * bins as f64) as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    (min, max, counts)
}

/// Four-panel histogram figure of the pooled posterior draws
/// (beta, gamma, r, i0), each binned over its own draw range.
#[must_use]
pub fn posterior_histograms(samples: &PosteriorSamples, bins: usize) -> String {
    let panels: [(&str, Vec<f64>); 4] = [
        ("beta (per day)", samples.param_series(0)),
        ("gamma (per day)", samples.param_series(1)),
        ("r (interest per % incidence)", samples.param_series(2)),
        ("i0 (initial proportion)", samples.param_series(3)),
    ];
    let mut out = header("Posterior distributions");
    for (panel, (name, values)) in panels.iter().enumerate() {
        let col = (panel % 2) as f64;
        let row = (panel / 2) as f64;
        let left = 60.0 + col * 340.0;
        let top = 40.0 + row * 190.0;
        let (min, max, counts) = histogram(values, bins);
        let tallest = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
        let frame = Frame::new(
            (left, left + 300.0, top, top + 140.0),
            (min, max),
            (0.0, tallest),
        );
        for (bin, &count) in counts.iter().enumerate() {
            let w = (max - min).max(f64::MIN_POSITIVE) / bins as f64;
            let x0 = frame.x(min + bin as f64 * w);
            let x1 = frame.x(min + (bin as f64 + 1.0) * w);
            let y = frame.y(count as f64);
            let _ = write!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#74c476\" stroke=\"white\" stroke-width=\"0.5\"/>\n",
                px(x0),
                px(y),
                px(x1 - x0),
                px(frame.y(0.0) - y)
            );
        }
        axes(&mut out, &frame, name, "draws");
    }
    out.push_str("</svg>\n");
    out
}
