//! Inline SVG chart primitives.
//!
//! Every function returns a complete `<svg>` element. Geometry is written
//! with two decimals and numeric labels with the canonical four, so equal
//! inputs always give equal bytes.

use std::fmt::Write;

use crate::json::fixed;
use crate::survey::BoxStats;

const WIDTH: f64 = 700.0;
const LABEL_W: f64 = 190.0;
const PLOT_W: f64 = 300.0;
const ROW_H: f64 = 26.0;
const TOP: f64 = 12.0;
const AXIS_H: f64 = 34.0;
const FONT: &str = r#"font-family="Helvetica, Arial, sans-serif" font-size="11""#;

pub const EMPTY_TONE: &str = "#f2efe8";
pub const ABSENT_TONE: &str = "#d9d9d9";
const GREY: &str = "#b3b3b3";
const INK: &str = "#222222";
const BOX_FILL: &str = "#9ecae1";
const POINT: &str = "#3182bd";
const HEAT_LOW: (u8, u8, u8) = (0xde, 0xeb, 0xf7);
const HEAT_HIGH: (u8, u8, u8) = (0x08, 0x30, 0x6b);
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

/// Color scale for heatmap cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeatScale {
    #[default]
    Linear,
    Log,
}

impl HeatScale {
    /// Position of `count` on the color ramp in `[0, 1]`. Zero maps to `None`
    /// and is drawn with the empty tone.
    pub fn position(self, count: u64, max: u64) -> Option<f64> {
        if count == 0 || max == 0 {
            return None;
        }
        Some(match self {
            HeatScale::Linear => count as f64 / max as f64,
            HeatScale::Log => (1.0 + count as f64).ln() / (1.0 + max as f64).ln(),
        })
    }

    /// Cell color for `count`; monotone darker with count.
    pub fn color(self, count: u64, max: u64) -> String {
        match self.position(count, max) {
            None => EMPTY_TONE.to_string(),
            Some(t) => {
                let lerp =
                    |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8;
                format!(
                    "#{:02x}{:02x}{:02x}",
                    lerp(HEAT_LOW.0, HEAT_HIGH.0),
                    lerp(HEAT_LOW.1, HEAT_HIGH.1),
                    lerp(HEAT_LOW.2, HEAT_HIGH.2)
                )
            }
        }
    }
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// A linear value axis with fixed ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub ticks: Vec<f64>,
    pub label: String,
}

impl Axis {
    pub fn likert(label: &str) -> Self {
        Axis {
            lo: 1.0,
            hi: 5.0,
            ticks: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            label: label.to_string(),
        }
    }

    pub fn unit(label: &str) -> Self {
        Axis {
            lo: 0.0,
            hi: 1.0,
            ticks: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            label: label.to_string(),
        }
    }

    pub fn sus() -> Self {
        Axis {
            lo: 0.0,
            hi: 100.0,
            ticks: vec![0.0, 25.0, 50.0, 75.0, 100.0],
            label: "SUS score".to_string(),
        }
    }

    /// Zero-based axis covering `max` with round tick steps.
    pub fn covering(max: f64, label: &str) -> Self {
        let max = if max > 0.0 { max } else { 1.0 };
        let raw = max / 4.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 2.5, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let hi = (max / step).ceil() * step;
        let ticks = (0..=((hi / step).round() as usize))
            .map(|i| i as f64 * step)
            .collect();
        Axis {
            lo: 0.0,
            hi,
            ticks,
            label: label.to_string(),
        }
    }

    fn x(&self, v: f64) -> f64 {
        let span = self.hi - self.lo;
        let t = if span > 0.0 {
            (v - self.lo) / span
        } else {
            0.5
        };
        LABEL_W + t.clamp(0.0, 1.0) * PLOT_W
    }

    fn tick_label(v: f64) -> String {
        if v.fract() == 0.0 && v.abs() < 1e15 {
            format!("{}", v as i64)
        } else {
            format!("{v}")
        }
    }

    fn draw(&self, out: &mut String, y: f64) {
        let _ = write!(
            out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{INK}"/>"#,
            px(LABEL_W),
            px(y),
            px(LABEL_W + PLOT_W),
            px(y)
        );
        for &t in &self.ticks {
            let x = px(self.x(t));
            let _ = write!(
                out,
                r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="{INK}"/><text x="{x}" y="{}" text-anchor="middle" class="tick">{}</text>"#,
                px(y),
                px(y + 4.0),
                px(y + 15.0),
                Axis::tick_label(t)
            );
        }
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" class="axis-label">{}</text>"#,
            px(LABEL_W + PLOT_W / 2.0),
            px(y + 29.0),
            escape(&self.label)
        );
    }
}

fn open(out: &mut String, height: f64, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" role="img" {FONT}><title>{t}</title>"#,
        w = px(WIDTH),
        h = px(height),
        t = escape(title)
    );
}

/// One labelled row of a box-whisker or strip chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    pub stats: Option<BoxStats>,
    /// Raw observations drawn as a strip; empty for plain box-whiskers.
    pub points: Vec<f64>,
    /// Drawn in grey with a marker note.
    pub greyed: bool,
    /// Replaces the statistics label, e.g. "no data" or "dropped".
    pub note: Option<String>,
}

impl Row {
    pub fn new(label: &str, stats: Option<BoxStats>) -> Self {
        Row {
            label: label.to_string(),
            stats,
            points: Vec::new(),
            greyed: false,
            note: None,
        }
    }
}

/// Text shown right of a box: sample size and median, taken verbatim from
/// the statistics.
pub fn stats_label(stats: &BoxStats) -> String {
    format!("n = {}, median {}", stats.n, fixed(stats.median))
}

fn draw_box(out: &mut String, axis: &Axis, stats: &BoxStats, mid: f64, color: &str, stroke: &str) {
    let half = ROW_H * 0.3;
    let (wl, wh) = (axis.x(stats.whisker_low), axis.x(stats.whisker_high));
    let (lh, uh) = (axis.x(stats.lower_hinge), axis.x(stats.upper_hinge));
    let med = axis.x(stats.median);
    let _ = write!(
        out,
        concat!(
            r#"<g class="box" data-n="{n}" data-median="{median}" data-lower-hinge="{lhv}" data-upper-hinge="{uhv}">"#,
            r#"<line x1="{wl}" y1="{m}" x2="{lh}" y2="{m}" stroke="{s}"/>"#,
            r#"<line x1="{uh}" y1="{m}" x2="{wh}" y2="{m}" stroke="{s}"/>"#,
            r#"<line x1="{wl}" y1="{t}" x2="{wl}" y2="{b}" stroke="{s}"/>"#,
            r#"<line x1="{wh}" y1="{t}" x2="{wh}" y2="{b}" stroke="{s}"/>"#,
            r#"<rect x="{lh}" y="{t}" width="{bw}" height="{bh}" fill="{c}" fill-opacity="0.7" stroke="{s}"/>"#,
            r#"<line x1="{med}" y1="{t}" x2="{med}" y2="{b}" stroke="{s}" stroke-width="2"/>"#
        ),
        n = stats.n,
        median = fixed(stats.median),
        lhv = fixed(stats.lower_hinge),
        uhv = fixed(stats.upper_hinge),
        wl = px(wl),
        wh = px(wh),
        lh = px(lh),
        uh = px(uh),
        med = px(med),
        m = px(mid),
        t = px(mid - half),
        b = px(mid + half),
        bw = px(uh - lh),
        bh = px(2.0 * half),
        c = color,
        s = stroke,
    );
    for &o in &stats.outliers {
        let _ = write!(
            out,
            r#"<circle class="outlier" cx="{}" cy="{}" r="2.5" fill="none" stroke="{stroke}"/>"#,
            px(axis.x(o)),
            px(mid)
        );
    }
    out.push_str("</g>");
}

/// Deterministic vertical jitter for strip points.
fn jitter(i: usize) -> f64 {
    ((i * 7919 + 3) % 13) as f64 / 12.0 - 0.5
}

/// Horizontal box-whisker (or box-on-strip when rows carry points) chart
/// with one row per label.
pub fn box_chart(title: &str, axis: &Axis, rows: &[Row]) -> String {
    let height = TOP + ROW_H * rows.len() as f64 + AXIS_H;
    let mut out = String::new();
    open(&mut out, height, title);
    for (r, row) in rows.iter().enumerate() {
        let mid = TOP + ROW_H * (r as f64 + 0.5);
        let (color, stroke, class) = if row.greyed {
            (GREY, GREY, "row greyed")
        } else {
            (BOX_FILL, INK, "row")
        };
        let _ = write!(
            out,
            r#"<g class="{class}" data-label="{}"><text x="{}" y="{}" text-anchor="end" class="row-label">{}</text>"#,
            escape(&row.label),
            px(LABEL_W - 8.0),
            px(mid + 4.0),
            escape(&row.label)
        );
        for (i, &v) in row.points.iter().enumerate() {
            let _ = write!(
                out,
                r#"<circle class="point" cx="{}" cy="{}" r="2" fill="{}" fill-opacity="0.5"/>"#,
                px(axis.x(v)),
                px(mid + jitter(i) * ROW_H * 0.6),
                if row.greyed { GREY } else { POINT }
            );
        }
        if let Some(stats) = &row.stats {
            draw_box(&mut out, axis, stats, mid, color, stroke);
        }
        let text = match (&row.note, &row.stats) {
            (Some(note), Some(stats)) => format!("{}; {note}", stats_label(stats)),
            (Some(note), None) => note.clone(),
            (None, Some(stats)) => stats_label(stats),
            (None, None) => "no data".to_string(),
        };
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" class="stat">{}</text></g>"#,
            px(LABEL_W + PLOT_W + 10.0),
            px(mid + 4.0),
            escape(&text)
        );
    }
    axis.draw(&mut out, TOP + ROW_H * rows.len() as f64);
    out.push_str("</svg>");
    out
}

/// A from-to count matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap<'a> {
    pub title: &'a str,
    pub labels: &'a [String],
    pub counts: &'a [Vec<u64>],
    /// Axis entries the system does not have; drawn hatched.
    pub absent: &'a [bool],
    pub scale: HeatScale,
}

pub fn heatmap(h: &Heatmap<'_>) -> String {
    let n = h.labels.len();
    let cell = if n == 0 {
        24.0
    } else {
        (440.0 / n as f64).clamp(10.0, 30.0)
    };
    let left = 170.0;
    let top = 150.0;
    let grid = cell * n as f64;
    let width = left + grid + 200.0;
    let height = top + grid + 52.0;
    let max = h.counts.iter().flatten().copied().max().unwrap_or(0);
    let mut out = String::new();
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{hh}" viewBox="0 0 {w} {hh}" role="img" {FONT}><title>{t}</title>"#,
        w = px(width),
        hh = px(height),
        t = escape(h.title)
    );
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" class="axis-label">to (column)</text><text x="10" y="{}" class="axis-label">from (row)</text>"#,
        px(left),
        px(12.0),
        px(top - 6.0)
    );
    for (i, label) in h.labels.iter().enumerate() {
        let c = px(left + cell * (i as f64 + 0.5));
        let _ = write!(
            out,
            r#"<text x="{c}" y="{y}" transform="rotate(-60 {c} {y})" class="tick">{l}</text>"#,
            y = px(top - 4.0),
            l = escape(label)
        );
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" class="tick">{}</text>"#,
            px(left - 4.0),
            px(top + cell * (i as f64 + 0.5) + 4.0),
            escape(label)
        );
    }
    for (i, row) in h.counts.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            let absent = h.absent.get(i).copied().unwrap_or(false)
                || h.absent.get(j).copied().unwrap_or(false);
            let (fill, class) = if absent {
                (ABSENT_TONE.to_string(), "cell absent")
            } else if count == 0 {
                (EMPTY_TONE.to_string(), "cell empty")
            } else {
                (h.scale.color(count, max), "cell")
            };
            let (x, y) = (left + cell * j as f64, top + cell * i as f64);
            let _ = write!(
                out,
                r##"<rect class="{class}" x="{}" y="{}" width="{c}" height="{c}" fill="{fill}" stroke="#ffffff" data-count="{count}"><title>{} to {}: {count}</title></rect>"##,
                px(x),
                px(y),
                escape(&h.labels[i]),
                escape(&h.labels[j]),
                c = px(cell),
            );
            if cell >= 16.0 && count > 0 {
                let dark = h.scale.position(count, max).unwrap_or(0.0) > 0.55;
                let _ = write!(
                    out,
                    r#"<text x="{}" y="{}" text-anchor="middle" class="cell-label" fill="{}">{count}</text>"#,
                    px(x + cell / 2.0),
                    px(y + cell / 2.0 + 4.0),
                    if dark { "#ffffff" } else { INK }
                );
            }
        }
    }
    let legend_y = top + grid + 14.0;
    let steps = 5;
    for s in 0..steps {
        let count = if max == 0 {
            0
        } else {
            ((max as f64) * (s + 1) as f64 / steps as f64).ceil() as u64
        };
        let _ = write!(
            out,
            r#"<rect x="{}" y="{}" width="24" height="10" fill="{}"/>"#,
            px(left + 24.0 * s as f64),
            px(legend_y),
            h.scale.color(count, max)
        );
    }
    let scale = match h.scale {
        HeatScale::Linear => "linear",
        HeatScale::Log => "log",
    };
    let _ = write!(
        out,
        r#"<rect x="{}" y="{}" width="10" height="10" fill="{EMPTY_TONE}" stroke="{GREY}"/><text x="{}" y="{}" class="tick">max {max} ({scale}); empty = 0</text></svg>"#,
        px(left + 24.0 * steps as f64 + 8.0),
        px(legend_y),
        px(left + 24.0 * steps as f64 + 24.0),
        px(legend_y + 9.0)
    );
    out
}

/// Vertical stacked columns: one column per entry, one segment per series.
pub fn stacked_columns(
    title: &str,
    series: &[String],
    columns: &[(String, Vec<u64>)],
    unit: &str,
) -> String {
    let plot_h = 220.0;
    let top = 16.0;
    let left = 78.0;
    let col_w = if columns.is_empty() {
        20.0
    } else {
        (520.0 / columns.len() as f64).clamp(6.0, 36.0)
    };
    let legend_rows = series.len().div_ceil(3) as f64;
    let height = top + plot_h + 60.0 + 16.0 * legend_rows;
    let max = columns
        .iter()
        .map(|(_, v)| v.iter().sum::<u64>())
        .max()
        .unwrap_or(0);
    let axis = Axis::covering(max as f64, unit);
    let y_of = |v: f64| top + plot_h - plot_h * v / axis.hi;
    let mut out = String::new();
    open(&mut out, height, title);
    for &t in &axis.ticks {
        let _ = write!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{EMPTY_TONE}"/><text x="{}" y="{}" text-anchor="end" class="tick">{}</text>"#,
            px(left),
            px(left + col_w * columns.len() as f64),
            px(left - 4.0),
            px(y_of(t) + 4.0),
            Axis::tick_label(t),
            y = px(y_of(t)),
        );
    }
    for (c, (label, values)) in columns.iter().enumerate() {
        let x = left + col_w * c as f64;
        let total: u64 = values.iter().sum();
        let _ = write!(
            out,
            r#"<g class="column" data-label="{}" data-total="{total}">"#,
            escape(label)
        );
        let mut acc = 0u64;
        for (s, &v) in values.iter().enumerate() {
            if v == 0 {
                continue;
            }
            let (y1, y0) = (y_of((acc + v) as f64), y_of(acc as f64));
            let _ = write!(
                out,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" data-value="{v}"><title>{}: {}: {v}</title></rect>"#,
                px(x + 1.0),
                px(y1),
                px(col_w - 2.0),
                px(y0 - y1),
                PALETTE[s % PALETTE.len()],
                escape(label),
                escape(series.get(s).map_or("", String::as_str))
            );
            acc += v;
        }
        let cx = px(x + col_w / 2.0);
        let ly = px(top + plot_h + 10.0);
        let _ = write!(
            out,
            r#"<text x="{cx}" y="{ly}" transform="rotate(-60 {cx} {ly})" text-anchor="end" class="tick">{}</text></g>"#,
            escape(label)
        );
    }
    let _ = write!(
        out,
        r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle" class="axis-label">{}</text>"#,
        px(top + plot_h / 2.0),
        px(top + plot_h / 2.0),
        escape(unit)
    );
    let legend_y = top + plot_h + 52.0;
    for (s, name) in series.iter().enumerate() {
        let (x, y) = (
            left + 190.0 * (s % 3) as f64,
            legend_y + 16.0 * (s / 3) as f64,
        );
        let _ = write!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}" class="tick">{}</text>"#,
            px(x),
            px(y),
            PALETTE[s % PALETTE.len()],
            px(x + 14.0),
            px(y + 9.0),
            escape(name)
        );
    }
    out.push_str("</svg>");
    out
}
