//! Turns trace logs into the four diagnostic data products: per
//! iteration search summaries, the index-against-time series, the PCA
//! embedding of all visited bases, and grand-tour views of the basis
//! space. These are plain data; the render module draws them.

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Matrix};
use crate::manifold::{geodesic_path, random_basis, Basis};
use crate::rng::RunRng;
use crate::trace::{fmt_float, State, TraceLog};

/// One summarized outer iteration of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSummaryRow {
    pub j: u32,
    /// Evaluations spent searching in this iteration.
    pub tries: usize,
    /// Raw search values, in logging order (for point display).
    pub values: Vec<f64>,
    pub min: f64,
    /// Lower quartile, median, upper quartile of `values`.
    pub quartiles: [f64; 3],
    pub max: f64,
    /// Value of the accepted target, if this iteration found one.
    pub accepted_index: Option<f64>,
    /// Few enough tries to draw individual points instead of a box.
    pub point_display: bool,
    /// The run's last iteration (greyed out when it found nothing).
    pub last_iteration: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSummary {
    pub rows: Vec<SearchSummaryRow>,
    pub cutoff: usize,
}

/// Linear-interpolation quantile (the common "type 7" rule) of an
/// already sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Summarizes every outer iteration's search effort: how many bases
/// were tried, their value spread, and what (if anything) was
/// accepted. Iterations with at most `cutoff` tries are flagged for
/// point display rather than a boxplot.
pub fn search_summary(log: &TraceLog, cutoff: usize) -> Result<SearchSummary> {
    let counts = log.get_search_count();
    if counts.is_empty() {
        return Err(Error::Empty("trace log has no search records".into()));
    }
    let last_j = counts.iter().map(|(j, _)| *j).max().unwrap();
    let mut rows = Vec::with_capacity(counts.len());
    for (j, tries) in counts {
        let values: Vec<f64> = log
            .get_search()
            .into_iter()
            .filter(|r| r.j == j)
            .map(|r| r.index_value)
            .collect();
        debug_assert_eq!(values.len(), tries);
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let accepted_index = log
            .get_search()
            .into_iter()
            .find(|r| r.j == j && matches!(r.state, State::Start | State::NewBasis))
            .map(|r| r.index_value);
        rows.push(SearchSummaryRow {
            j,
            tries,
            min: sorted[0],
            quartiles: [
                quantile_sorted(&sorted, 0.25),
                quantile_sorted(&sorted, 0.5),
                quantile_sorted(&sorted, 0.75),
            ],
            max: sorted[sorted.len() - 1],
            values,
            accepted_index,
            point_display: tries <= cutoff,
            last_iteration: j == last_j,
        });
    }
    Ok(SearchSummary { rows, cutoff })
}

impl SearchSummary {
    /// One row per iteration; raw values are not included.
    pub fn write_csv(&self, w: &mut dyn std::io::Write) -> Result<()> {
        writeln!(
            w,
            "j,tries,min,q1,median,q3,max,accepted_index,point_display,last_iteration"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.j,
                r.tries,
                fmt_float(r.min),
                fmt_float(r.quartiles[0]),
                fmt_float(r.quartiles[1]),
                fmt_float(r.quartiles[2]),
                fmt_float(r.max),
                r.accepted_index.map(fmt_float).unwrap_or_default(),
                r.point_display,
                r.last_iteration
            )?;
        }
        Ok(())
    }
}

/// One point of the index-against-time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpPoint {
    pub t: u64,
    pub index_value: f64,
    pub state: State,
    pub j: u32,
}

/// The time series behind the trace plot: interpolation frames (drawn
/// as a line) and accepted targets (drawn as dots), in time order.
pub fn interp_trace(log: &TraceLog) -> Vec<InterpPoint> {
    log.records()
        .iter()
        .filter(|r| matches!(r.state, State::Interpolation | State::NewBasis))
        .map(|r| InterpPoint { t: r.t, index_value: r.index_value, state: r.state, j: r.j })
        .collect()
}

pub fn write_interp_csv(points: &[InterpPoint], w: &mut dyn std::io::Write) -> Result<()> {
    writeln!(w, "t,index_value,state,j")?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.t, fmt_float(p.index_value), p.state.as_str(), p.j)?;
    }
    Ok(())
}

/// What an embedded point came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointKind {
    /// A logged basis: which log, its time stamp, and trace fields
    /// carried over for styling.
    Record { log: usize, t: u64, j: u32, state: State, index_value: f64 },
    /// A random background basis (log index it was bound to).
    Background { log: usize },
    /// The flattened zero matrix; its image is the center.
    Zero,
    /// A log's bound theoretical-best basis.
    Theoretical { log: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedPoint {
    pub xy: [f64; 2],
    pub kind: PointKind,
}

/// A 2-D principal-component view of every basis several runs visited.
/// The basis space is bounded, so the picture is a disc: `center` is
/// the image of the zero matrix and `radius` the largest distance from
/// it to any embedded point.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub points: Vec<EmbedPoint>,
    pub center: [f64; 2],
    pub radius: f64,
    /// Per input log: whether all its bases were negated to agree with
    /// the first log's end orientation.
    pub flipped: Vec<bool>,
}

impl Embedding {
    /// Embedded record points of one log, in time order.
    pub fn log_records(&self, log: usize) -> Vec<(&EmbedPoint, u64, u32, State, f64)> {
        let mut out: Vec<(&EmbedPoint, u64, u32, State, f64)> = self
            .points
            .iter()
            .filter_map(|p| match p.kind {
                PointKind::Record { log: l, t, j, state, index_value } if l == log => {
                    Some((p, t, j, state, index_value))
                }
                _ => None,
            })
            .collect();
        out.sort_by_key(|(_, t, _, _, _)| *t);
        out
    }

    pub fn coord_of(&self, log: usize, t: u64) -> Option<[f64; 2]> {
        self.points.iter().find_map(|p| match p.kind {
            PointKind::Record { log: l, t: pt, .. } if l == log && pt == t => Some(p.xy),
            _ => None,
        })
    }

    pub fn theoretical_coord(&self, log: usize) -> Option<[f64; 2]> {
        self.points.iter().find_map(|p| match p.kind {
            PointKind::Theoretical { log: l } if l == log => Some(p.xy),
            _ => None,
        })
    }

    pub fn log_count(&self) -> usize {
        self.flipped.len()
    }

    pub fn write_csv(&self, w: &mut dyn std::io::Write) -> Result<()> {
        writeln!(w, "x,y,kind,log,t,j,state,index_value")?;
        for p in &self.points {
            let (x, y) = (fmt_float(p.xy[0]), fmt_float(p.xy[1]));
            match p.kind {
                PointKind::Record { log, t, j, state, index_value } => writeln!(
                    w,
                    "{x},{y},record,{log},{t},{j},{},{}",
                    state.as_str(),
                    fmt_float(index_value)
                )?,
                PointKind::Background { log } => writeln!(w, "{x},{y},background,{log},,,,")?,
                PointKind::Zero => writeln!(w, "{x},{y},zero,,,,,")?,
                PointKind::Theoretical { log } => writeln!(w, "{x},{y},theoretical,{log},,,,")?,
            }
        }
        Ok(())
    }
}

/// Flattens every logged basis of all runs (plus background bases and
/// the zero matrix), fits a PCA on the pooled vectors, and returns the
/// 2-D images. When two runs finish at opposite ends of the basis
/// space (negative alignment of their final bases with the first
/// log's), every basis of the disagreeing log is negated first so the
/// runs land on the same hemisphere.
///
/// `m_background` fresh random bases are drawn and pooled in addition
/// to any background already bound to the logs; they give the fit the
/// full extent of the space so the disc outline is visible.
pub fn pca_embed(logs: &[&TraceLog], m_background: usize, rng: &mut RunRng) -> Result<Embedding> {
    if logs.is_empty() {
        return Err(Error::Empty("no trace logs to embed".into()));
    }
    let (p, d) = (logs[0].metadata().p, logs[0].metadata().d);
    for log in logs {
        if log.metadata().p != p || log.metadata().d != d {
            return Err(Error::DimensionMismatch(
                "all embedded logs must share the same basis shape".into(),
            ));
        }
    }
    let q = p * d;

    let ends: Vec<Vec<f64>> = logs
        .iter()
        .map(|log| {
            log.records()
                .last()
                .map(|r| r.basis.flatten())
                .ok_or_else(|| Error::Empty("cannot embed an empty trace log".into()))
        })
        .collect::<Result<_>>()?;
    let flipped: Vec<bool> = ends
        .iter()
        .map(|e| e.iter().zip(&ends[0]).map(|(a, b)| a * b).sum::<f64>() < 0.0)
        .collect();

    // Pool flattened vectors with their provenance.
    let mut flat: Vec<Vec<f64>> = Vec::new();
    let mut kinds: Vec<PointKind> = Vec::new();
    for (li, log) in logs.iter().enumerate() {
        let sign = if flipped[li] { -1.0 } else { 1.0 };
        for r in log.records() {
            flat.push(r.basis.flatten().iter().map(|v| sign * v).collect());
            kinds.push(PointKind::Record {
                log: li,
                t: r.t,
                j: r.j,
                state: r.state,
                index_value: r.index_value,
            });
        }
        for b in log.background() {
            flat.push(b.flatten());
            kinds.push(PointKind::Background { log: li });
        }
        if let Some(theo) = log.get_theo() {
            flat.push(theo.flatten());
            kinds.push(PointKind::Theoretical { log: li });
        }
    }
    for _ in 0..m_background {
        flat.push(random_basis(p, d, rng)?.flatten());
        kinds.push(PointKind::Background { log: 0 });
    }
    flat.push(vec![0.0; q]);
    kinds.push(PointKind::Zero);

    if flat.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "embedding needs at least 3 points, got {}",
            flat.len()
        )));
    }

    // Standard PCA: mean-center, eigen-decompose the covariance, keep
    // the top two components.
    let n = flat.len();
    let mut mean = vec![0.0; q];
    for row in &flat {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut centered = Matrix::zeros(n, q);
    for (i, row) in flat.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            centered.set(i, c, v - mean[c]);
        }
    }
    let mut cov = centered.t_mul(&centered);
    let scale = 1.0 / (n as f64 - 1.0);
    for c in 0..q {
        for r in 0..q {
            cov.set(r, c, cov.get(r, c) * scale);
        }
    }
    let (_values, vectors) = sym_eigen(&cov);
    let project = |row: &[f64]| -> [f64; 2] {
        let mut xy = [0.0; 2];
        for (k, out) in xy.iter_mut().enumerate() {
            *out = row
                .iter()
                .zip(mean.iter())
                .enumerate()
                .map(|(c, (v, m))| (v - m) * vectors.get(c, k))
                .sum();
        }
        xy
    };

    let points: Vec<EmbedPoint> = flat
        .iter()
        .zip(kinds)
        .map(|(row, kind)| EmbedPoint { xy: project(row), kind })
        .collect();
    let center = points
        .iter()
        .find(|p| p.kind == PointKind::Zero)
        .map(|p| p.xy)
        .expect("zero point pooled");
    let radius = points
        .iter()
        .map(|p| ((p.xy[0] - center[0]).powi(2) + (p.xy[1] - center[1]).powi(2)).sqrt())
        .fold(0.0, f64::max);

    Ok(Embedding { points, center, radius, flipped })
}

/// One view of the grand tour through the flattened basis space.
#[derive(Clone, Debug)]
pub struct TourFrame {
    /// The 2-frame the space is projected onto (q x 2, orthonormal).
    pub frame: Basis,
    /// Projections of every input point (rows match `points`).
    pub coords: Matrix,
}

/// A grand tour over the rows of `points` (flattened bases and
/// background, one point per row): random orthonormal 2-frames of the
/// row space, geodesically interpolated, each emitting the orthogonal
/// projection of all points. Exactly `n_frames` frames are returned.
pub fn basis_space_tour(points: &Matrix, n_frames: usize, rng: &mut RunRng) -> Result<Vec<TourFrame>> {
    let q = points.cols();
    if q < 3 {
        return Err(Error::InvalidArgument(format!(
            "tour needs at least 3 columns to rotate a 2-frame, got {q}"
        )));
    }
    if n_frames == 0 {
        return Err(Error::InvalidArgument("n_frames must be at least 1".into()));
    }
    const TOUR_STEP: f64 = 0.1;
    let mut current = random_basis(q, 2, rng)?;
    let mut frames: Vec<TourFrame> = Vec::with_capacity(n_frames);
    frames.push(TourFrame { frame: current.clone(), coords: points.matmul(current.matrix()) });
    while frames.len() < n_frames {
        let target = random_basis(q, 2, rng)?;
        let path = geodesic_path(&current, &target, TOUR_STEP)?;
        for frame in path.frames().iter().skip(1) {
            if frames.len() == n_frames {
                break;
            }
            frames.push(TourFrame {
                frame: frame.clone(),
                coords: points.matmul(frame.matrix()),
            });
        }
        current = target;
    }
    Ok(frames)
}

/// `n` random p x 2 bases, flattened one per row. For p = 3 the rows
/// lie on a torus, the shape the tour view is meant to reveal.
pub fn torus_background(p: usize, n: usize, rng: &mut RunRng) -> Result<Matrix> {
    if p < 3 {
        return Err(Error::InvalidArgument(format!(
            "torus background needs p >= 3, got {p}"
        )));
    }
    let mut out = Matrix::zeros(n, 2 * p);
    for i in 0..n {
        let b = random_basis(p, 2, rng)?;
        for (c, v) in b.flatten().into_iter().enumerate() {
            out.set(i, c, v);
        }
    }
    Ok(out)
}
