//! Draws the diagnostic products as static SVG 1.1 files and numbered
//! frame sequences. Everything is deterministic: no clock, no global
//! rng, fixed canvas, and the data-to-pixel mapping of every panel is
//! written into the file as `data-*` attributes so a reader (or a
//! test) can invert it.

use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::{Embedding, InterpPoint, PointKind, SearchSummary, TourFrame};
use crate::error::{Error, Result};
use crate::trace::{fmt_float, Method, State};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
/// 5% of the canvas on every side.
const MARGIN_X: f64 = 40.0;
const MARGIN_Y: f64 = 30.0;

/// Two to four distinguishable hues; grey stays reserved for final
/// iterations and background context.
pub const PALETTE: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];
pub const GREY: &str = "#808080";

pub fn method_color(method: Method) -> &'static str {
    match method {
        Method::Crs => PALETTE[0],
        Method::Sa => PALETTE[1],
        Method::Pd => PALETTE[2],
        Method::Polish => PALETTE[3],
    }
}

/// A pixel-space rectangle (y grows downward).
#[derive(Clone, Copy, Debug)]
struct Rect {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl Rect {
    fn plot_area() -> Rect {
        Rect { x: MARGIN_X, y: MARGIN_Y, w: WIDTH - 2.0 * MARGIN_X, h: HEIGHT - 2.0 * MARGIN_Y }
    }
}

/// The affine data-to-pixel mapping of one panel:
/// px = x_scale * x + x_offset, py = y_scale * y + y_offset.
/// y_scale is negative (data y grows upward, pixels downward).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine2 {
    pub x_scale: f64,
    pub x_offset: f64,
    pub y_scale: f64,
    pub y_offset: f64,
}

impl Affine2 {
    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (self.x_scale * x + self.x_offset, self.y_scale * y + self.y_offset)
    }

    pub fn invert(&self, px: f64, py: f64) -> (f64, f64) {
        ((px - self.x_offset) / self.x_scale, (py - self.y_offset) / self.y_scale)
    }

    /// Reads the mapping back from a panel's attributes.
    pub fn from_attrs(get: impl Fn(&str) -> Option<String>) -> Option<Affine2> {
        let parse = |name: &str| get(name).and_then(|v| v.parse::<f64>().ok());
        Some(Affine2 {
            x_scale: parse("data-x-scale")?,
            x_offset: parse("data-x-offset")?,
            y_scale: parse("data-y-scale")?,
            y_offset: parse("data-y-offset")?,
        })
    }

    fn attrs(&self) -> String {
        format!(
            "data-x-scale=\"{}\" data-x-offset=\"{}\" data-y-scale=\"{}\" data-y-offset=\"{}\"",
            fmt_float(self.x_scale),
            fmt_float(self.x_offset),
            fmt_float(self.y_scale),
            fmt_float(self.y_offset)
        )
    }
}

/// Pads a degenerate range so a mapping always exists.
fn widen(range: (f64, f64)) -> (f64, f64) {
    let (lo, hi) = range;
    if hi - lo > 1e-12 {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn fit(x_range: (f64, f64), y_range: (f64, f64), rect: Rect) -> Affine2 {
    let (x0, x1) = widen(x_range);
    let (y0, y1) = widen(y_range);
    let x_scale = rect.w / (x1 - x0);
    let y_scale = -rect.h / (y1 - y0);
    Affine2 {
        x_scale,
        x_offset: rect.x - x_scale * x0,
        y_scale,
        y_offset: rect.y + rect.h - y_scale * y0,
    }
}

/// Equal units per pixel on both axes, data centered: circles stay
/// circles.
fn fit_square(x_range: (f64, f64), y_range: (f64, f64), rect: Rect) -> Affine2 {
    let (x0, x1) = widen(x_range);
    let (y0, y1) = widen(y_range);
    let s = (rect.w / (x1 - x0)).min(rect.h / (y1 - y0));
    Affine2 {
        x_scale: s,
        x_offset: rect.x + rect.w / 2.0 - s * (x0 + x1) / 2.0,
        y_scale: -s,
        y_offset: rect.y + rect.h / 2.0 + s * (y0 + y1) / 2.0,
    }
}

fn esc(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Pixel coordinates round to 1/100 px in the output; well under the
/// half-pixel placement contract.
fn px(v: f64) -> String {
    format!("{v:.2}")
}

struct Svg {
    buf: String,
    open_groups: usize,
}

impl Svg {
    fn new() -> Svg {
        let mut buf = String::with_capacity(16 * 1024);
        buf.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        buf.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" \
             height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        buf.push_str(&format!(
            "<rect class=\"canvas\" x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             fill=\"#ffffff\"/>\n"
        ));
        Svg { buf, open_groups: 0 }
    }

    fn open_group(&mut self, attrs: &str) {
        self.buf.push_str(&format!("<g {attrs}>\n"));
        self.open_groups += 1;
    }

    fn close_group(&mut self) {
        assert!(self.open_groups > 0, "unbalanced group");
        self.buf.push_str("</g>\n");
        self.open_groups -= 1;
    }

    fn circle(&mut self, class: &str, cx: f64, cy: f64, r: f64, style: &str) {
        self.buf.push_str(&format!(
            "<circle class=\"{class}\" cx=\"{}\" cy=\"{}\" r=\"{}\" {style}/>\n",
            px(cx),
            px(cy),
            px(r)
        ));
    }

    fn line(&mut self, class: &str, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        self.buf.push_str(&format!(
            "<line class=\"{class}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" {style}/>\n",
            px(x1),
            px(y1),
            px(x2),
            px(y2)
        ));
    }

    fn rect(&mut self, class: &str, r: Rect, style: &str) {
        self.buf.push_str(&format!(
            "<rect class=\"{class}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" {style}/>\n",
            px(r.x),
            px(r.y),
            px(r.w),
            px(r.h)
        ));
    }

    fn polyline(&mut self, class: &str, points: &[(f64, f64)], style: &str) {
        let coords: Vec<String> =
            points.iter().map(|(x, y)| format!("{},{}", px(*x), px(*y))).collect();
        self.buf.push_str(&format!(
            "<polyline class=\"{class}\" points=\"{}\" fill=\"none\" {style}/>\n",
            coords.join(" ")
        ));
    }

    fn text(&mut self, class: &str, x: f64, y: f64, content: &str, style: &str) {
        self.buf.push_str(&format!(
            "<text class=\"{class}\" x=\"{}\" y=\"{}\" font-family=\"sans-serif\" \
             text-anchor=\"middle\" {style}>{}</text>\n",
            px(x),
            px(y),
            esc(content)
        ));
    }

    /// A five-point star marker centered at (cx, cy).
    fn star(&mut self, class: &str, cx: f64, cy: f64, r: f64, style: &str) {
        let mut points = Vec::with_capacity(10);
        for k in 0..10 {
            let radius = if k % 2 == 0 { r } else { 0.4 * r };
            let angle = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
            points.push(format!(
                "{},{}",
                px(cx + radius * angle.cos()),
                px(cy + radius * angle.sin())
            ));
        }
        self.buf.push_str(&format!(
            "<polygon class=\"{class}\" points=\"{}\" {style}/>\n",
            points.join(" ")
        ));
    }

    fn finish(mut self) -> String {
        assert_eq!(self.open_groups, 0, "unbalanced groups at finish");
        self.buf.push_str("</svg>\n");
        self.buf
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, content)?;
    Ok(())
}

/// frame_000001.svg, frame_000002.svg, ...
pub fn frame_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("frame_{i:06}.svg"))
}

/// Deterministic jitter in [-0.5, 0.5): the fractional part of the
/// golden-ratio sequence, no rng involved.
fn jitter(i: usize) -> f64 {
    ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5
}

/// Draws one x-group per iteration: a boxplot of that iteration's
/// search values (or the raw points, jittered, when there were at most
/// `cutoff` tries), the accepted bases as connected larger points, and
/// the try count along the bottom. The run's last iteration is greyed
/// out: it is where the search gave up.
pub fn render_search(summary: &SearchSummary, path: &Path) -> Result<()> {
    if summary.rows.is_empty() {
        return Err(Error::Empty("search summary has no rows".into()));
    }
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for r in &summary.rows {
        y_lo = y_lo.min(r.min);
        y_hi = y_hi.max(r.max);
        if let Some(a) = r.accepted_index {
            y_lo = y_lo.min(a);
            y_hi = y_hi.max(a);
        }
    }
    let pad = 0.05 * (y_hi - y_lo).max(1e-9);
    let j_min = summary.rows.first().unwrap().j as f64;
    let j_max = summary.rows.last().unwrap().j as f64;
    let map = fit((j_min - 0.5, j_max + 0.5), (y_lo - pad, y_hi + pad), Rect::plot_area());

    let mut svg = Svg::new();
    svg.open_group(&format!("class=\"plot\" {}", map.attrs()));
    svg.rect(
        "frame",
        Rect::plot_area(),
        "fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\"",
    );

    for row in &summary.rows {
        let color = if row.last_iteration { GREY } else { PALETTE[0] };
        let x = row.j as f64;
        svg.open_group(&format!("class=\"iteration\" data-j=\"{}\"", row.j));
        if row.point_display {
            for (i, v) in row.values.iter().enumerate() {
                let (cx, cy) = map.map(x + 0.35 * jitter(i), *v);
                svg.circle(
                    "search-point",
                    cx,
                    cy,
                    2.5,
                    &format!("fill=\"{color}\" fill-opacity=\"0.7\""),
                );
            }
        } else {
            let half = 0.22;
            let (bx0, by_q3) = map.map(x - half, row.quartiles[2]);
            let (bx1, by_q1) = map.map(x + half, row.quartiles[0]);
            let (cx, by_med) = map.map(x, row.quartiles[1]);
            let (_, by_min) = map.map(x, row.min);
            let (_, by_max) = map.map(x, row.max);
            svg.line("whisker", cx, by_min, cx, by_q1, &format!("stroke=\"{color}\""));
            svg.line("whisker", cx, by_q3, cx, by_max, &format!("stroke=\"{color}\""));
            svg.rect(
                "box",
                Rect { x: bx0, y: by_q3, w: bx1 - bx0, h: by_q1 - by_q3 },
                &format!("fill=\"{color}\" fill-opacity=\"0.25\" stroke=\"{color}\""),
            );
            svg.line("median", bx0, by_med, bx1, by_med, &format!("stroke=\"{color}\" stroke-width=\"2\""));
        }
        svg.close_group();

        let (tx, _) = map.map(x, 0.0);
        svg.text(
            "try-count",
            tx,
            HEIGHT - 10.0,
            &row.tries.to_string(),
            "font-size=\"11\" fill=\"#555555\"",
        );
    }

    let accepted: Vec<(f64, f64)> = summary
        .rows
        .iter()
        .filter_map(|r| r.accepted_index.map(|a| map.map(r.j as f64, a)))
        .collect();
    svg.polyline(
        "accepted-path",
        &accepted,
        &format!("stroke=\"{}\" stroke-width=\"1.5\"", PALETTE[1]),
    );
    for (cx, cy) in &accepted {
        svg.circle("accepted", *cx, *cy, 4.0, &format!("fill=\"{}\"", PALETTE[1]));
    }

    svg.close_group();
    write_file(path, &svg.finish())
}

/// Index value against time: a line through the interpolation frames
/// and a dot at every accepted target. Several series render as
/// side-by-side panels sharing the canvas.
pub fn render_trace(series_list: &[Vec<InterpPoint>], path: &Path) -> Result<()> {
    if series_list.is_empty() || series_list.iter().any(|s| s.is_empty()) {
        return Err(Error::Empty("trace rendering needs non-empty series".into()));
    }
    let n_panels = series_list.len();
    let area = Rect::plot_area();
    let gutter = 12.0;
    let panel_w = (area.w - gutter * (n_panels as f64 - 1.0)) / n_panels as f64;

    let mut svg = Svg::new();
    for (pi, series) in series_list.iter().enumerate() {
        let rect = Rect { x: area.x + pi as f64 * (panel_w + gutter), y: area.y, w: panel_w, h: area.h };
        let t_max = series.iter().map(|p| p.t).max().unwrap() as f64;
        let mut y_lo = f64::INFINITY;
        let mut y_hi = f64::NEG_INFINITY;
        for p in series {
            y_lo = y_lo.min(p.index_value);
            y_hi = y_hi.max(p.index_value);
        }
        let pad = 0.05 * (y_hi - y_lo).max(1e-9);
        // The x-axis spans [1, max t] edge to edge.
        let map = fit((1.0, t_max), (y_lo - pad, y_hi + pad), rect);

        svg.open_group(&format!("class=\"panel\" data-panel=\"{pi}\" {}", map.attrs()));
        svg.rect("frame", rect, "fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\"");

        let line_pts: Vec<(f64, f64)> = series
            .iter()
            .filter(|p| p.state == State::Interpolation)
            .map(|p| map.map(p.t as f64, p.index_value))
            .collect();
        if line_pts.len() >= 2 {
            svg.polyline(
                "interp-line",
                &line_pts,
                &format!("stroke=\"{}\" stroke-width=\"1.5\"", PALETTE[0]),
            );
        }
        for p in series.iter().filter(|p| p.state == State::NewBasis) {
            let (cx, cy) = map.map(p.t as f64, p.index_value);
            svg.circle("target-dot", cx, cy, 3.0, &format!("fill=\"{}\"", PALETTE[1]));
        }
        svg.close_group();
    }
    write_file(path, &svg.finish())
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EmbedOptions {
    /// Also draw anchor and search bases at reduced size.
    pub details: bool,
    /// Write a frame sequence revealing records by time instead of one
    /// static file.
    pub animate: bool,
    /// Frame count when animating.
    pub checkpoints: usize,
}

/// States drawn as the tour path in embedding views.
fn on_path(state: State) -> bool {
    matches!(state, State::Start | State::Interpolation | State::Final)
}

fn embed_map(embedding: &Embedding) -> Affine2 {
    let r = embedding.radius * 1.05;
    let (cx, cy) = (embedding.center[0], embedding.center[1]);
    fit_square((cx - r, cx + r), (cy - r, cy + r), Rect::plot_area())
}

fn render_embedding_frame(
    embedding: &Embedding,
    options: &EmbedOptions,
    t_limit: Option<u64>,
) -> String {
    let map = embed_map(embedding);
    let mut svg = Svg::new();
    svg.open_group(&format!("class=\"plot\" {}", map.attrs()));

    // The reachable space is a disc: draw its outline.
    let (bx, by) = map.map(embedding.center[0], embedding.center[1]);
    svg.circle(
        "space-boundary",
        bx,
        by,
        embedding.radius * map.x_scale,
        &format!("fill=\"none\" stroke=\"{GREY}\" stroke-width=\"1.5\""),
    );

    for log in 0..embedding.log_count() {
        let color = PALETTE[log % PALETTE.len()];
        let records = embedding.log_records(log);
        let visible =
            |t: u64| -> bool { t_limit.map_or(true, |limit| t <= limit) };

        // Tour path with opacity ramping from transparent to opaque.
        let path_pts: Vec<(&[f64; 2], u64)> = records
            .iter()
            .filter(|(_, t, _, state, _)| on_path(*state) && visible(*t))
            .map(|(p, t, _, _, _)| (&p.xy, *t))
            .collect();
        let denom = (path_pts.len().max(2) - 1) as f64;
        for (i, w) in path_pts.windows(2).enumerate() {
            let (a, b) = (w[0].0, w[1].0);
            let (x1, y1) = map.map(a[0], a[1]);
            let (x2, y2) = map.map(b[0], b[1]);
            let opacity = 0.1 + 0.9 * ((i + 1) as f64 / denom);
            svg.line(
                "interp-path",
                x1,
                y1,
                x2,
                y2,
                &format!("stroke=\"{color}\" stroke-width=\"1.5\" stroke-opacity=\"{opacity:.3}\""),
            );
        }

        if options.details {
            for (p, t, _, state, _) in &records {
                if !visible(*t) {
                    continue;
                }
                let (cx, cy) = map.map(p.xy[0], p.xy[1]);
                match state {
                    State::NewBasis => svg.circle(
                        "anchor",
                        cx,
                        cy,
                        2.5,
                        &format!("fill=\"{color}\" fill-opacity=\"0.9\""),
                    ),
                    s if s.is_search() && *s != State::Start => svg.circle(
                        "search",
                        cx,
                        cy,
                        1.5,
                        &format!("fill=\"{color}\" fill-opacity=\"0.4\""),
                    ),
                    _ => {}
                }
            }
        }

        // Interruptions: dashed link from where a leg stopped to the
        // target it was headed for.
        let anchors: Vec<(&[f64; 2], u64, u32)> = records
            .iter()
            .filter(|(_, _, _, state, _)| *state == State::NewBasis)
            .map(|(p, t, j, _, _)| (&p.xy, *t, *j))
            .collect();
        for (axy, at, aj) in anchors {
            if !visible(at) {
                continue;
            }
            let stop = records
                .iter()
                .filter(|(_, t, j, state, _)| {
                    *j == aj && *state == State::Interpolation && visible(*t)
                })
                .next_back();
            if let Some((stop_p, _, _, _, _)) = stop {
                let dx = stop_p.xy[0] - axy[0];
                let dy = stop_p.xy[1] - axy[1];
                if (dx * dx + dy * dy).sqrt() > 1e-9 {
                    let (x1, y1) = map.map(stop_p.xy[0], stop_p.xy[1]);
                    let (x2, y2) = map.map(axy[0], axy[1]);
                    svg.line(
                        "interruption",
                        x1,
                        y1,
                        x2,
                        y2,
                        &format!("stroke=\"{color}\" stroke-width=\"1\" stroke-dasharray=\"4 3\""),
                    );
                }
            }
        }

        // Start and end markers for what is visible.
        if let Some((p, _)) = path_pts.first() {
            let (cx, cy) = map.map(p[0], p[1]);
            svg.circle(
                "start-marker",
                cx,
                cy,
                5.0,
                &format!("fill=\"#ffffff\" stroke=\"{color}\" stroke-width=\"2\""),
            );
        }
        if path_pts.len() > 1 {
            let (p, _) = path_pts.last().unwrap();
            let (cx, cy) = map.map(p[0], p[1]);
            svg.circle("end-marker", cx, cy, 5.0, &format!("fill=\"{color}\""));
        }

        if let Some(theo) = embedding.theoretical_coord(log) {
            let (cx, cy) = map.map(theo[0], theo[1]);
            svg.star(
                "theoretical",
                cx,
                cy,
                8.0,
                &format!("fill=\"{}\" stroke=\"#333333\" stroke-width=\"0.8\"", PALETTE[3]),
            );
        }
    }

    svg.close_group();
    svg.finish()
}

/// Draws the PCA embedding. Static mode writes one SVG at `path`;
/// animate mode treats `path` as a directory and writes
/// `checkpoints` frames that reveal the records in time order.
pub fn render_embedding(embedding: &Embedding, options: &EmbedOptions, path: &Path) -> Result<()> {
    if !options.animate {
        return write_file(path, &render_embedding_frame(embedding, options, None));
    }
    if options.checkpoints == 0 {
        return Err(Error::InvalidArgument("animate needs at least one checkpoint".into()));
    }
    let t_max = embedding
        .points
        .iter()
        .filter_map(|p| match p.kind {
            PointKind::Record { t, .. } => Some(t),
            _ => None,
        })
        .max()
        .ok_or_else(|| Error::Empty("embedding has no record points".into()))?;
    fs::create_dir_all(path)?;
    for k in 1..=options.checkpoints {
        let limit = (t_max as f64 * k as f64 / options.checkpoints as f64).ceil() as u64;
        let frame = render_embedding_frame(embedding, options, Some(limit));
        write_file(&frame_path(path, k), &frame)?;
    }
    Ok(())
}

/// Who a tour point belongs to, aligned with the rows of the point
/// matrix the tour projected.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TourPointRole {
    Background,
    /// A record of `log`, drawn on that log's path in row order.
    Path { log: usize, method: Method },
}

/// Writes one numbered SVG per tour frame into `dir`: background
/// points grey, each run's visited bases as a colored path (hue by
/// method). All frames share one scale so the motion is comparable.
pub fn render_space_tour(frames: &[TourFrame], roles: &[TourPointRole], dir: &Path) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::Empty("no tour frames to render".into()));
    }
    for f in frames {
        if f.coords.rows() != roles.len() {
            return Err(Error::DimensionMismatch(format!(
                "tour frame has {} points but {} roles",
                f.coords.rows(),
                roles.len()
            )));
        }
    }
    let mut extent = 0.0f64;
    for f in frames {
        for i in 0..f.coords.rows() {
            extent = extent.max(f.coords.get(i, 0).abs()).max(f.coords.get(i, 1).abs());
        }
    }
    let extent = (extent * 1.05).max(1e-9);
    let map = fit_square((-extent, extent), (-extent, extent), Rect::plot_area());

    fs::create_dir_all(dir)?;
    for (fi, frame) in frames.iter().enumerate() {
        let mut svg = Svg::new();
        svg.open_group(&format!("class=\"plot\" data-frame=\"{}\" {}", fi + 1, map.attrs()));

        for (i, role) in roles.iter().enumerate() {
            if *role == TourPointRole::Background {
                let (cx, cy) = map.map(frame.coords.get(i, 0), frame.coords.get(i, 1));
                svg.circle(
                    "background",
                    cx,
                    cy,
                    1.5,
                    &format!("fill=\"{GREY}\" fill-opacity=\"0.5\""),
                );
            }
        }

        let mut logs: Vec<(usize, Method)> = roles
            .iter()
            .filter_map(|r| match r {
                TourPointRole::Path { log, method } => Some((*log, *method)),
                TourPointRole::Background => None,
            })
            .collect();
        logs.dedup();
        logs.sort_unstable_by_key(|(log, _)| *log);
        logs.dedup_by_key(|(log, _)| *log);
        for (log, method) in logs {
            let pts: Vec<(f64, f64)> = roles
                .iter()
                .enumerate()
                .filter(|(_, r)| matches!(r, TourPointRole::Path { log: l, .. } if *l == log))
                .map(|(i, _)| map.map(frame.coords.get(i, 0), frame.coords.get(i, 1)))
                .collect();
            if pts.len() >= 2 {
                svg.polyline(
                    "run-path",
                    &pts,
                    &format!(
                        "stroke=\"{}\" stroke-width=\"1.5\" stroke-opacity=\"0.9\"",
                        method_color(method)
                    ),
                );
            } else if let Some((cx, cy)) = pts.first() {
                svg.circle("run-path", *cx, *cy, 2.0, &format!("fill=\"{}\"", method_color(method)));
            }
        }

        svg.close_group();
        write_file(&frame_path(dir, fi + 1), &svg.finish())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{
        basis_space_tour, interp_trace, pca_embed, search_summary, torus_background,
    };
    use crate::indexes::Holes;
    use crate::optimizers::{optimize, OptimizerConfig};
    use crate::rng::seeded;
    use crate::simdata::boa5;
    use crate::trace::TraceLog;

    fn crs_log(seed: u64) -> TraceLog {
        let ds = boa5(250, seed).unwrap();
        let cfg = OptimizerConfig { seed, ..Default::default() };
        optimize(ds.values(), &Holes, &cfg).unwrap().trace
    }

    fn parse(path: &Path) -> (String, ()) {
        let text = std::fs::read_to_string(path).unwrap();
        roxmltree::Document::parse(&text).expect("well-formed XML");
        (text, ())
    }

    fn count_class(text: &str, class: &str) -> usize {
        let doc = roxmltree::Document::parse(text).unwrap();
        doc.descendants().filter(|n| n.attribute("class") == Some(class)).count()
    }

    #[test]
    fn search_rendering_structure() {
        let log = crs_log(1);
        let summary = search_summary(&log, 15).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("search.svg");
        render_search(&summary, &path).unwrap();
        let (text, ()) = parse(&path);

        let doc = roxmltree::Document::parse(&text).unwrap();
        let groups = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("iteration"))
            .count();
        assert_eq!(groups, summary.rows.len());
        assert_eq!(count_class(&text, "try-count"), summary.rows.len());

        // The accepted polyline has one vertex per accepted basis.
        let accepted = summary.rows.iter().filter(|r| r.accepted_index.is_some()).count();
        let poly = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("accepted-path"))
            .unwrap();
        let vertex_count = poly.attribute("points").unwrap().split(' ').count();
        assert_eq!(vertex_count, accepted);
        assert_eq!(count_class(&text, "accepted"), accepted);
    }

    #[test]
    fn search_accepted_points_invert_to_their_data() {
        let log = crs_log(2);
        let summary = search_summary(&log, 15).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("search.svg");
        render_search(&summary, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();

        let plot = doc.descendants().find(|n| n.attribute("class") == Some("plot")).unwrap();
        let map = Affine2::from_attrs(|k| plot.attribute(k).map(str::to_string)).unwrap();

        let circles: Vec<(f64, f64)> = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("accepted"))
            .map(|n| {
                (
                    n.attribute("cx").unwrap().parse().unwrap(),
                    n.attribute("cy").unwrap().parse().unwrap(),
                )
            })
            .collect();
        let expected: Vec<(f64, f64)> = summary
            .rows
            .iter()
            .filter_map(|r| r.accepted_index.map(|a| (r.j as f64, a)))
            .collect();
        assert_eq!(circles.len(), expected.len());
        for ((cx, cy), (j, a)) in circles.iter().zip(&expected) {
            let (ex, ey) = map.map(*j, *a);
            assert!((cx - ex).abs() <= 0.5 && (cy - ey).abs() <= 0.5);
            // And the inverse lands back on the data.
            let (ij, ia) = map.invert(*cx, *cy);
            assert!((ij - j).abs() < 0.05);
            assert!((ia - a).abs() < (0.5 / map.y_scale.abs()));
        }
    }

    #[test]
    fn trace_rendering_dots_and_panels() {
        let log_a = crs_log(3);
        let log_b = crs_log(4);
        let series = vec![interp_trace(&log_a), interp_trace(&log_b)];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.svg");
        render_trace(&series, &path).unwrap();
        let (text, ()) = parse(&path);

        assert_eq!(count_class(&text, "panel"), 2);
        let dots = count_class(&text, "target-dot");
        let expected: usize =
            series.iter().map(|s| s.iter().filter(|p| p.state == State::NewBasis).count()).sum();
        assert_eq!(dots, expected);

        // Each panel's x-axis spans [1, max t]: the mapping sends 1 to
        // the panel's left edge and max t to its right edge.
        let doc = roxmltree::Document::parse(&text).unwrap();
        for (pi, s) in series.iter().enumerate() {
            let panel = doc
                .descendants()
                .find(|n| n.attribute("data-panel") == Some(pi.to_string().as_str()))
                .unwrap();
            let map = Affine2::from_attrs(|k| panel.attribute(k).map(str::to_string)).unwrap();
            let t_max = s.iter().map(|p| p.t).max().unwrap() as f64;
            let (left, _) = map.map(1.0, 0.0);
            let (right, _) = map.map(t_max, 0.0);
            let frame = panel
                .descendants()
                .find(|n| n.attribute("class") == Some("frame"))
                .unwrap();
            let fx: f64 = frame.attribute("x").unwrap().parse().unwrap();
            let fw: f64 = frame.attribute("width").unwrap().parse().unwrap();
            assert!((left - fx).abs() < 0.5);
            assert!((right - (fx + fw)).abs() < 0.5);
        }
    }

    fn embedding_for_tests(details_log: u64) -> Embedding {
        let mut log = crs_log(details_log);
        log.bind_theoretical(crate::simdata::theoretical_best("boa5", 1).unwrap()).unwrap();
        let mut rng = seeded(5);
        pca_embed(&[&log], 300, &mut rng).unwrap()
    }

    #[test]
    fn embedding_static_structure() {
        let emb = embedding_for_tests(5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embed.svg");
        render_embedding(&emb, &EmbedOptions::default(), &path).unwrap();
        let (text, ()) = parse(&path);

        assert_eq!(count_class(&text, "space-boundary"), 1);
        assert_eq!(count_class(&text, "theoretical"), 1);
        assert_eq!(count_class(&text, "start-marker"), 1);
        assert_eq!(count_class(&text, "end-marker"), 1);
        assert!(count_class(&text, "interp-path") > 0);
        // No details: no anchor or search points.
        assert_eq!(count_class(&text, "anchor"), 0);
        assert_eq!(count_class(&text, "search"), 0);
    }

    #[test]
    fn embedding_details_points_stay_inside_the_boundary() {
        let emb = embedding_for_tests(6);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embed.svg");
        render_embedding(&emb, &EmbedOptions { details: true, ..Default::default() }, &path)
            .unwrap();
        let (text, ()) = parse(&path);
        assert!(count_class(&text, "anchor") > 0);
        assert!(count_class(&text, "search") > 0);

        let doc = roxmltree::Document::parse(&text).unwrap();
        let boundary = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("space-boundary"))
            .unwrap();
        let bx: f64 = boundary.attribute("cx").unwrap().parse().unwrap();
        let by: f64 = boundary.attribute("cy").unwrap().parse().unwrap();
        let br: f64 = boundary.attribute("r").unwrap().parse().unwrap();
        for n in doc.descendants().filter(|n| {
            matches!(n.attribute("class"), Some("anchor") | Some("search") | Some("end-marker"))
        }) {
            let cx: f64 = n.attribute("cx").unwrap().parse().unwrap();
            let cy: f64 = n.attribute("cy").unwrap().parse().unwrap();
            let dist = ((cx - bx).powi(2) + (cy - by).powi(2)).sqrt();
            assert!(dist <= br * 1.01 + 0.5, "point {dist} outside boundary {br}");
        }
    }

    #[test]
    fn embedding_animation_writes_checkpoint_frames() {
        let emb = embedding_for_tests(7);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("frames");
        let opts = EmbedOptions { animate: true, checkpoints: 6, ..Default::default() };
        render_embedding(&emb, &opts, &out).unwrap();
        let mut files: Vec<String> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        files.sort();
        assert_eq!(files.len(), 6);
        assert_eq!(files[0], "frame_000001.svg");
        assert_eq!(files[5], "frame_000006.svg");
        for f in &files {
            parse(&out.join(f));
        }
        // Later frames reveal at least as much of the path.
        let early = std::fs::read_to_string(out.join(&files[0])).unwrap();
        let late = std::fs::read_to_string(out.join(&files[5])).unwrap();
        assert!(count_class(&late, "interp-path") >= count_class(&early, "interp-path"));
    }

    #[test]
    fn space_tour_writes_one_file_per_frame_deterministically() {
        let mut rng = seeded(11);
        let background = torus_background(3, 60, &mut rng).unwrap();
        let mut roles = vec![TourPointRole::Background; 60];
        // Tack on a tiny two-log path set.
        let mut points = crate::linalg::Matrix::zeros(66, 6);
        for i in 0..60 {
            for c in 0..6 {
                points.set(i, c, background.get(i, c));
            }
        }
        for i in 60..63 {
            points.set(i, 0, 0.1 * i as f64);
            points.set(i, 1, 1.0);
            roles.push(TourPointRole::Path { log: 0, method: Method::Crs });
        }
        for i in 63..66 {
            points.set(i, 2, 0.05 * i as f64);
            points.set(i, 3, -1.0);
            roles.push(TourPointRole::Path { log: 1, method: Method::Sa });
        }

        let mut tour_rng = seeded(13);
        let frames = basis_space_tour(&points, 8, &mut tour_rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        render_space_tour(&frames, &roles, &out_a).unwrap();
        render_space_tour(&frames, &roles, &out_b).unwrap();

        let names: Vec<PathBuf> =
            (1..=8).map(|i| frame_path(Path::new(""), i)).collect();
        for name in &names {
            let (text_a, ()) = parse(&out_a.join(name));
            let text_b = std::fs::read_to_string(out_b.join(name)).unwrap();
            assert_eq!(text_a, text_b, "frames must be byte-identical");
            assert_eq!(count_class(&text_a, "background"), 60);
            assert_eq!(count_class(&text_a, "run-path"), 2);
        }
        assert_eq!(std::fs::read_dir(&out_a).unwrap().count(), 8);
    }

    #[test]
    fn tour_role_mismatch_is_rejected() {
        let mut rng = seeded(1);
        let points = torus_background(3, 10, &mut rng).unwrap();
        let frames = basis_space_tour(&points, 2, &mut rng).unwrap();
        let roles = vec![TourPointRole::Background; 9];
        let dir = tempfile::tempdir().unwrap();
        assert!(render_space_tour(&frames, &roles, dir.path()).is_err());
    }

    #[test]
    fn affine_round_trip() {
        let map = fit((1.0, 21.0), (0.0, 2.0), Rect::plot_area());
        let (px, py) = map.map(11.0, 1.0);
        let (x, y) = map.invert(px, py);
        assert!((x - 11.0).abs() < 1e-12 && (y - 1.0).abs() < 1e-12);
        // Degenerate ranges still give a usable mapping.
        let flat = fit((3.0, 3.0), (5.0, 5.0), Rect::plot_area());
        assert!(flat.x_scale.is_finite() && flat.y_scale.is_finite());
        let sq = fit_square((-2.0, 2.0), (-1.0, 1.0), Rect::plot_area());
        assert_eq!(sq.x_scale, -sq.y_scale);
    }
}
