//! Minimal standalone SVG scatter plots.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

impl Scatter {
    /// Finite points only; each becomes one `<circle>`.
    fn finite(&self) -> impl Iterator<Item = (usize, (f64, f64))> + '_ {
        self.series.iter().enumerate().flat_map(|(i, s)| {
            s.points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(move |p| (i, *p))
        })
    }

    pub fn render(&self) -> String {
        let (x0, x1) = extent(self.finite().map(|(_, p)| p.0));
        let (y0, y1) = extent(self.finite().map(|(_, p)| p.1));
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>
<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title),
            WIDTH / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label),
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label),
            b = HEIGHT - MARGIN,
            r = WIDTH - MARGIN,
        );
        for (v, x, y, anchor) in [
            (x0, MARGIN, HEIGHT - MARGIN + 16.0, "start"),
            (x1, WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "end"),
            (y0, MARGIN - 4.0, HEIGHT - MARGIN, "end"),
            (y1, MARGIN - 4.0, MARGIN + 4.0, "end"),
        ] {
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.3}</text>"#
            );
        }
        if y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{MARGIN}" y1="{z:.2}" x2="{}" y2="{z:.2}" stroke="#bbbbbb" stroke-dasharray="4 3"/>"##,
                WIDTH - MARGIN,
                z = sy(0.0),
            );
        }
        for (i, series) in self.series.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{}">{}</text>"#,
                WIDTH - MARGIN + 6.0,
                MARGIN + 16.0 * i as f64,
                PALETTE[i % PALETTE.len()],
                escape(&series.label)
            );
        }
        for (i, (x, y)) in self.finite() {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.7"/>"#,
                sx(x),
                sy(y),
                PALETTE[i % PALETTE.len()]
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
