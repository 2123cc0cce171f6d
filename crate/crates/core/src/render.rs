//! SVG scatter plots of maps.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::features::{FeatureRecord, FEATURE_NAMES};
use crate::spectral::{boundary_interpolation, top_singular_values, Boundary};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("point {0:?} has non-finite coordinates")]
    NonFinite(String),
}

/// One instance on the plot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotPoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub category: Option<String>,
    pub characteristic: bool,
    pub features: Option<FeatureRecord>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum ColorBy {
    #[default]
    None,
    Source,
    Feature(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RenderSpec {
    pub title: String,
    pub color: ColorBy,
    /// Shape `(n, m)` of an explicit map: enables sigma axes and boundary overlays.
    pub explicit: Option<(usize, usize)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 560.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const DEFAULT_COLOR: &str = "#3b6ea5";
const MISSING_COLOR: &str = "#b0b0b0";
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const VIRIDIS: [(u8, u8, u8); 9] = [
    (68, 1, 84),
    (71, 44, 122),
    (59, 81, 139),
    (44, 113, 142),
    (33, 144, 141),
    (39, 173, 129),
    (92, 200, 99),
    (170, 220, 50),
    (253, 231, 37),
];

/// Viridis-like color for `t` in `[0, 1]`.
pub fn viridis(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |x: u8, y: u8| (x as f64 + f * (y as f64 - x as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
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

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn polyline(frame: &Frame, pts: &[(f64, f64)]) -> String {
    pts.iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            format!(
                "{}{:.2},{:.2}",
                if i == 0 { "M" } else { " L" },
                frame.px(x),
                frame.py(y)
            )
        })
        .collect()
}

/// Boundary curves in `(sigma2, sigma1)` coordinates.
fn boundary_curves(n: usize, m: usize) -> Vec<(&'static str, Vec<(f64, f64)>)> {
    let (nf, mf) = (n as f64, m as f64);
    let l = (m / n) as f64;
    let low = (nf / mf).sqrt();
    let top = nf.sqrt();
    let mid = (nf / 2.0).sqrt();
    let arc: Vec<(f64, f64)> = (0..=32)
        .map(|k| {
            let a = std::f64::consts::FRAC_PI_4 * k as f64 / 32.0;
            (top * a.sin(), top * a.cos())
        })
        .collect();
    let mut curves = vec![
        ("west", vec![(0.0, low), (0.0, top)]),
        ("south", vec![(0.0, low), (l.sqrt() * nf / mf, low)]),
        ("north", arc),
        ("east", vec![(low, low), (mid, mid)]),
    ];
    if let Ok(path) = boundary_interpolation(Boundary::East, n, m, 5) {
        let pts = path
            .iter()
            .map(|u| {
                let p = top_singular_values(u);
                (p.sigma2, p.sigma1)
            })
            .collect();
        curves.push(("east-path", pts));
    }
    curves
}

enum Coloring {
    Single,
    Categories(Vec<String>),
    Ramp { name: String, lo: f64, hi: f64 },
}

fn feature_value(p: &PlotPoint, name: &str) -> Option<f64> {
    p.features
        .as_ref()
        .and_then(|f| f.get(name).ok().flatten())
        .map(|v| v.as_f64())
}

/// Renders a self-contained SVG 1.1 scatter plot.
///
/// Markers: a cross when an envy-free allocation exists, a star for
/// characteristic instances, a circle otherwise. Every marker element has
/// `class="marker"`, `data-x`/`data-y` with the plotted coordinates and a
/// `<title>` with the instance label.
pub fn render_svg(points: &[PlotPoint], spec: &RenderSpec) -> Result<String, RenderError> {
    if let Some(p) = points.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(RenderError::NonFinite(p.label.clone()));
    }
    let coloring = match &spec.color {
        ColorBy::None => Coloring::Single,
        ColorBy::Source => {
            let cats: BTreeSet<String> = points.iter().filter_map(|p| p.category.clone()).collect();
            Coloring::Categories(cats.into_iter().collect())
        }
        ColorBy::Feature(name) => {
            if !FEATURE_NAMES.contains(&name.as_str()) {
                return Err(RenderError::UnknownFeature(name.clone()));
            }
            let values: Vec<f64> = points.iter().filter_map(|p| feature_value(p, name)).collect();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Coloring::Ramp {
                name: name.clone(),
                lo,
                hi,
            }
        }
    };
    let curves = spec.explicit.map(|(n, m)| boundary_curves(n, m)).unwrap_or_default();

    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    for (_, c) in &curves {
        xs.extend(c.iter().map(|p| p.0));
        ys.extend(c.iter().map(|p| p.1));
    }
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            return (-1.0, 1.0);
        }
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
        (lo - pad, hi + pad)
    };
    let (x0, x1) = span(&xs);
    let (y0, y1) = span(&ys);
    let frame = Frame { x0, x1, y0, y1 };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (WIDTH - RIGHT + LEFT) / 2.0,
        escape_xml(&spec.title)
    );
    let (xl, yl) = if spec.explicit.is_some() {
        ("σ₂", "σ₁")
    } else {
        ("x", "y")
    };
    let (bx0, bx1, by0, by1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r##"<g class="axes" stroke="#333" fill="none"><rect x="{bx0}" y="{by0}" width="{}" height="{}"/></g>"##,
        bx1 - bx0,
        by1 - by0
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text><text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.2}</text>"#,
            frame.px(xv),
            by1 + 16.0,
            bx0 - 6.0,
            frame.py(yv) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xl}</text><text x="16" y="{:.2}" text-anchor="middle">{yl}</text>"#,
        (bx0 + bx1) / 2.0,
        HEIGHT - 12.0,
        (by0 + by1) / 2.0
    );
    for (name, pts) in &curves {
        let dash = if *name == "east-path" {
            r#" stroke-dasharray="4 3""#
        } else {
            ""
        };
        let _ = writeln!(
            s,
            r##"<path class="boundary" data-boundary="{name}" d="{}" stroke="#555" stroke-width="1.2" fill="none"{dash}/>"##,
            polyline(&frame, pts)
        );
    }

    let _ = writeln!(s, r#"<g class="points">"#);
    for p in points {
        let color = match &coloring {
            Coloring::Single => DEFAULT_COLOR.to_string(),
            Coloring::Categories(cats) => p
                .category
                .as_ref()
                .and_then(|c| cats.iter().position(|x| x == c))
                .map_or(MISSING_COLOR.to_string(), |i| PALETTE[i % PALETTE.len()].to_string()),
            Coloring::Ramp { name, lo, hi } => match feature_value(p, name) {
                Some(v) => viridis(if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }),
                None => MISSING_COLOR.to_string(),
            },
        };
        let (cx, cy) = (frame.px(p.x), frame.py(p.y));
        let title = format!("<title>{}</title>", escape_xml(&p.label));
        let data = format!(r#"data-x="{}" data-y="{}""#, p.x, p.y);
        let ef = p.features.as_ref().and_then(|f| f.ef_exists) == Some(true);
        if ef {
            let r = 5.0;
            let _ = writeln!(
                s,
                r#"<path class="marker" data-shape="cross" {data} d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="{color}" stroke-width="2" fill="none">{title}</path>"#,
                cx - r,
                cy - r,
                cx + r,
                cy + r,
                cx - r,
                cy + r,
                cx + r,
                cy - r
            );
        } else if p.characteristic {
            let pts: Vec<String> = (0..10)
                .map(|k| {
                    let r = if k % 2 == 0 { 8.0 } else { 3.5 };
                    let a = std::f64::consts::PI * k as f64 / 5.0 - std::f64::consts::FRAC_PI_2;
                    format!("{:.2},{:.2}", cx + r * a.cos(), cy + r * a.sin())
                })
                .collect();
            let _ = writeln!(
                s,
                r##"<polygon class="marker" data-shape="star" {data} points="{}" fill="{color}" stroke="#222" stroke-width="0.6">{title}</polygon>"##,
                pts.join(" ")
            );
        } else {
            let _ = writeln!(
                s,
                r#"<circle class="marker" data-shape="circle" {data} cx="{cx:.2}" cy="{cy:.2}" r="3.5" fill="{color}" fill-opacity="0.85">{title}</circle>"#
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let lx = WIDTH - RIGHT + 16.0;
    let mut ly = TOP + 10.0;
    let _ = writeln!(s, r#"<g class="legend">"#);
    match &coloring {
        Coloring::Single => {}
        Coloring::Categories(cats) => {
            for (i, c) in cats.iter().enumerate() {
                let _ = writeln!(
                    s,
                    r#"<rect x="{lx}" y="{ly}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
                    PALETTE[i % PALETTE.len()],
                    lx + 16.0,
                    ly + 9.0,
                    escape_xml(c)
                );
                ly += 16.0;
            }
        }
        Coloring::Ramp { name, lo, hi } => {
            let _ = writeln!(s, r#"<text x="{lx}" y="{}">{}</text>"#, ly + 9.0, escape_xml(name));
            ly += 16.0;
            for k in 0..10 {
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{ly}" width="12" height="12" fill="{}"/>"#,
                    lx + 12.0 * k as f64,
                    viridis(k as f64 / 9.0)
                );
            }
            ly += 26.0;
            let fmt = |v: f64| if v.is_finite() { format!("{v:.3}") } else { "n/a".into() };
            let _ = writeln!(
                s,
                r#"<text x="{lx}" y="{ly}">{}</text><text x="{}" y="{ly}" text-anchor="end">{}</text>"#,
                fmt(*lo),
                lx + 120.0,
                fmt(*hi)
            );
            ly += 10.0;
            let _ = writeln!(
                s,
                r#"<rect x="{lx}" y="{ly}" width="10" height="10" fill="{MISSING_COLOR}"/><text x="{}" y="{}">missing</text>"#,
                lx + 16.0,
                ly + 9.0
            );
            ly += 16.0;
        }
    }
    ly += 10.0;
    for (shape, text) in [
        ("circle", "instance"),
        ("star", "characteristic"),
        ("cross", "envy-free exists"),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{lx}" y="{}" data-legend-shape="{shape}">{} {text}</text>"#,
            ly + 9.0,
            match shape {
                "circle" => "●",
                "star" => "★",
                _ => "✕",
            }
        );
        ly += 16.0;
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}
