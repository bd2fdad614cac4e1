//! The tidy optimization trace: one row per event, with enough
//! bookkeeping to reconstruct every diagnostic after the fact. Records
//! carry a global ordinal `t`, the outer/inner counters `(j, l)`, the
//! sampling neighbourhood `alpha`, the evaluated basis and its index
//! value, and a state tag describing what kind of event the row is.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::manifold::{geodesic_distance, Basis};
use crate::rng::RunRng;

/// What kind of event a trace row records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    Start,
    RandomSearch,
    NewBasis,
    Interpolation,
    DirectionSearch,
    BestDirectionSearch,
    BestLineSearch,
    PolishSearch,
    Final,
}

impl State {
    pub fn as_str(self) -> &'static str {
        match self {
            State::Start => "start",
            State::RandomSearch => "random_search",
            State::NewBasis => "new_basis",
            State::Interpolation => "interpolation",
            State::DirectionSearch => "direction_search",
            State::BestDirectionSearch => "best_direction_search",
            State::BestLineSearch => "best_line_search",
            State::PolishSearch => "polish_search",
            State::Final => "final",
        }
    }

    pub fn parse(s: &str) -> Result<State> {
        Ok(match s {
            "start" => State::Start,
            "random_search" => State::RandomSearch,
            "new_basis" => State::NewBasis,
            "interpolation" => State::Interpolation,
            "direction_search" => State::DirectionSearch,
            "best_direction_search" => State::BestDirectionSearch,
            "best_line_search" => State::BestLineSearch,
            "polish_search" => State::PolishSearch,
            "final" => State::Final,
            other => return Err(Error::InvalidArgument(format!("unknown state {other:?}"))),
        })
    }

    /// States that represent an index evaluation made while searching
    /// for a better basis (everything except interpolation frames and
    /// the closing marker). The start basis counts: it is the first
    /// evaluation of every run.
    pub fn is_search(self) -> bool {
        !matches!(self, State::Interpolation | State::Final)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which optimiser produced a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Crs,
    Sa,
    Pd,
    Polish,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Crs => "crs",
            Method::Sa => "sa",
            Method::Pd => "pd",
            Method::Polish => "polish",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Ok(match s {
            "crs" => Method::Crs,
            "sa" => Method::Sa,
            "pd" => Method::Pd,
            "polish" => Method::Polish,
            other => return Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// Global ordinal, 1-based, assigned on insertion.
    pub t: u64,
    pub method: Method,
    pub state: State,
    /// Outer iteration counter. The start record is iteration 1.
    pub j: u32,
    /// Inner counter: try number for search states, frame number for
    /// interpolation states.
    pub l: u32,
    /// Sampling neighbourhood size in effect when the row was made.
    pub alpha: f64,
    pub index_value: f64,
    pub basis: Basis,
}

/// Run-level context stored beside the records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub p: usize,
    pub d: usize,
    /// Observation count of the data the run projected.
    pub n: usize,
    pub index: String,
    pub seed: u64,
    /// Snapshot of the optimiser configuration, kept as loose JSON so
    /// the trace format does not depend on the config type.
    pub config: serde_json::Value,
}

/// An append-only, strictly ordered log of trace records plus optional
/// bound context (theoretical-best basis, random background bases).
#[derive(Clone, Debug, PartialEq)]
pub struct TraceLog {
    records: Vec<TraceRecord>,
    metadata: TraceMetadata,
    theoretical: Option<Basis>,
    background: Vec<Basis>,
}

impl TraceLog {
    pub fn new(metadata: TraceMetadata) -> Self {
        Self { records: Vec::new(), metadata, theoretical: None, background: Vec::new() }
    }

    pub fn metadata(&self) -> &TraceMetadata {
        &self.metadata
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends an event, assigning the next `t`. Rejects non-finite
    /// index values and bases that do not match the log's (p, d).
    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        method: Method,
        state: State,
        j: u32,
        l: u32,
        alpha: f64,
        index_value: f64,
        basis: Basis,
    ) -> Result<u64> {
        if !index_value.is_finite() {
            return Err(Error::NonFinite(format!(
                "index value {index_value} at state {state} is not finite"
            )));
        }
        if !alpha.is_finite() {
            return Err(Error::NonFinite(format!("alpha {alpha} is not finite")));
        }
        if basis.p() != self.metadata.p || basis.d() != self.metadata.d {
            return Err(Error::DimensionMismatch(format!(
                "basis is {} x {} but the log records {} x {}",
                basis.p(),
                basis.d(),
                self.metadata.p,
                self.metadata.d
            )));
        }
        let t = self.records.len() as u64 + 1;
        self.records.push(TraceRecord { t, method, state, j, l, alpha, index_value, basis });
        Ok(t)
    }

    pub fn get_start(&self) -> Result<&TraceRecord> {
        self.records.first().ok_or_else(|| Error::Empty("trace log has no records".into()))
    }

    /// Record with the highest index value; ties break to smallest t.
    pub fn get_best(&self) -> Result<&TraceRecord> {
        self.records
            .iter()
            .reduce(|best, r| if r.index_value > best.index_value { r } else { best })
            .ok_or_else(|| Error::Empty("trace log has no records".into()))
    }

    /// Accepted target bases, one per successful outer iteration.
    pub fn get_anchor(&self) -> Vec<&TraceRecord> {
        self.by_state(State::NewBasis)
    }

    pub fn get_interp(&self) -> Vec<&TraceRecord> {
        self.by_state(State::Interpolation)
    }

    /// The last interpolation record of each outer iteration, in j
    /// order: where each leg actually stopped.
    pub fn get_interp_last(&self) -> Vec<&TraceRecord> {
        let mut last: Vec<&TraceRecord> = Vec::new();
        for r in self.records.iter().filter(|r| r.state == State::Interpolation) {
            match last.last() {
                Some(prev) if prev.j == r.j => *last.last_mut().expect("non-empty") = r,
                _ => last.push(r),
            }
        }
        last
    }

    /// Every record that evaluated a candidate during search (see
    /// [`State::is_search`]).
    pub fn get_search(&self) -> Vec<&TraceRecord> {
        self.records.iter().filter(|r| r.state.is_search()).collect()
    }

    /// Search-record counts per outer iteration, ascending in j.
    pub fn get_search_count(&self) -> Vec<(u32, usize)> {
        let mut counts: Vec<(u32, usize)> = Vec::new();
        for r in self.records.iter().filter(|r| r.state.is_search()) {
            match counts.iter_mut().find(|(j, _)| *j == r.j) {
                Some((_, c)) => *c += 1,
                None => counts.push((r.j, 1)),
            }
        }
        counts.sort_by_key(|&(j, _)| j);
        counts
    }

    /// Pairs (where the leg stopped, the accepted target it was headed
    /// for) for every iteration where interruption cut the leg short,
    /// meaning the two differ by more than 1e-6 in geodesic distance.
    pub fn get_interrupt(&self) -> Vec<(&TraceRecord, &TraceRecord)> {
        let mut out = Vec::new();
        for stop in self.get_interp_last() {
            let anchor = self
                .records
                .iter()
                .find(|r| r.state == State::NewBasis && r.j == stop.j);
            if let Some(anchor) = anchor {
                match geodesic_distance(&stop.basis, &anchor.basis) {
                    Ok(dist) if dist > 1e-6 => out.push((stop, anchor)),
                    _ => {}
                }
            }
        }
        out
    }

    /// Probe and line-search evaluations of the pseudo-derivative
    /// optimiser.
    pub fn get_dir_search(&self) -> Vec<&TraceRecord> {
        self.records
            .iter()
            .filter(|r| {
                matches!(
                    r.state,
                    State::DirectionSearch | State::BestDirectionSearch | State::BestLineSearch
                )
            })
            .collect()
    }

    /// All logged bases flattened column-major, one row per record.
    pub fn get_basis_matrix(&self) -> Matrix {
        let (p, d) = (self.metadata.p, self.metadata.d);
        let mut m = Matrix::zeros(self.records.len(), p * d);
        for (r, rec) in self.records.iter().enumerate() {
            for (c, v) in rec.basis.flatten().into_iter().enumerate() {
                m.set(r, c, v);
            }
        }
        m
    }

    pub fn bind_theoretical(&mut self, basis: Basis) -> Result<()> {
        if basis.p() != self.metadata.p || basis.d() != self.metadata.d {
            return Err(Error::DimensionMismatch(format!(
                "theoretical basis is {} x {}, log is {} x {}",
                basis.p(),
                basis.d(),
                self.metadata.p,
                self.metadata.d
            )));
        }
        self.theoretical = Some(basis);
        Ok(())
    }

    pub fn get_theo(&self) -> Option<&Basis> {
        self.theoretical.as_ref()
    }

    /// Draws and stores `m` random background bases of the log's
    /// shape, for embedding context.
    pub fn bind_random(&mut self, m: usize, rng: &mut RunRng) -> Result<()> {
        let mut bases = Vec::with_capacity(m);
        for _ in 0..m {
            bases.push(crate::manifold::random_basis(self.metadata.p, self.metadata.d, rng)?);
        }
        self.background = bases;
        Ok(())
    }

    /// Stores pre-built background bases, replacing any bound set.
    pub fn bind_background(&mut self, bases: Vec<Basis>) -> Result<()> {
        for b in &bases {
            if b.p() != self.metadata.p || b.d() != self.metadata.d {
                return Err(Error::DimensionMismatch(format!(
                    "background basis is {} x {}, log is {} x {}",
                    b.p(),
                    b.d(),
                    self.metadata.p,
                    self.metadata.d
                )));
            }
        }
        self.background = bases;
        Ok(())
    }

    pub fn background(&self) -> &[Basis] {
        &self.background
    }

    fn by_state(&self, state: State) -> Vec<&TraceRecord> {
        self.records.iter().filter(|r| r.state == state).collect()
    }
}

/// On-disk encodings for a trace log. Both carry the records; the
/// metadata and bound bases live in a JSON sidecar next to the file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Format> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(Format::Csv),
            Some("jsonl") => Ok(Format::Jsonl),
            other => Err(Error::InvalidArgument(format!(
                "cannot infer trace format from extension {other:?} (use .csv or .jsonl)"
            ))),
        }
    }
}

/// Sidecar path for a trace file: the same stem with extension
/// `meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    metadata: TraceMetadata,
    theoretical: Option<Basis>,
    background: Vec<Basis>,
}

/// 17 significant digits: round-trips every binary64 exactly.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `log` to `path` in the given format, plus the metadata
/// sidecar at [`meta_path`].
pub fn serialize(log: &TraceLog, path: &Path, format: Format) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    match format {
        Format::Csv => write_csv(log, &mut w)?,
        Format::Jsonl => write_jsonl(log, &mut w)?,
    }
    w.flush()?;

    let sidecar = Sidecar {
        metadata: log.metadata.clone(),
        theoretical: log.theoretical.clone(),
        background: log.background.clone(),
    };
    let meta = std::fs::File::create(meta_path(path))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(meta), &sidecar)?;
    Ok(())
}

/// Reads a trace written by [`serialize`], inferring the format from
/// the extension and loading the sidecar.
pub fn deserialize(path: &Path) -> Result<TraceLog> {
    let format = Format::from_path(path)?;
    let meta = meta_path(path);
    let sidecar_file = std::fs::File::open(&meta).map_err(|e| {
        Error::InvalidArgument(format!("missing metadata sidecar {}: {e}", meta.display()))
    })?;
    let sidecar: Sidecar = serde_json::from_reader(std::io::BufReader::new(sidecar_file))?;

    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let records = match format {
        Format::Csv => read_csv(reader, &sidecar.metadata)?,
        Format::Jsonl => read_jsonl(reader, &sidecar.metadata)?,
    };
    Ok(TraceLog {
        records,
        metadata: sidecar.metadata,
        theoretical: sidecar.theoretical,
        background: sidecar.background,
    })
}

fn csv_header(p: usize, d: usize) -> Vec<String> {
    let mut h: Vec<String> =
        ["t", "method", "state", "j", "l", "alpha", "index_value"].map(String::from).to_vec();
    for k in 1..=p * d {
        h.push(format!("basis_{k}"));
    }
    h
}

fn write_csv<W: Write>(log: &TraceLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let (p, d) = (log.metadata.p, log.metadata.d);
    w.write_record(csv_header(p, d))?;
    for r in &log.records {
        let mut row: Vec<String> = vec![
            r.t.to_string(),
            r.method.to_string(),
            r.state.to_string(),
            r.j.to_string(),
            r.l.to_string(),
            fmt_float(r.alpha),
            fmt_float(r.index_value),
        ];
        row.extend(r.basis.flatten().into_iter().map(fmt_float));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<R: BufRead>(reader: R, meta: &TraceMetadata) -> Result<Vec<TraceRecord>> {
    let (p, d) = (meta.p, meta.d);
    let expect = csv_header(p, d);
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?;
    if headers.iter().ne(expect.iter().map(|s| s.as_str())) {
        return Err(Error::Parse { line: 1, message: "unexpected CSV header".into() });
    }
    let mut records = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != expect.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", expect.len(), rec.len()),
            });
        }
        let field = |k: usize| rec.get(k).expect("length checked");
        let parse_f = |k: usize| -> Result<f64> {
            field(k)
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("bad float {:?}", field(k)) })
        };
        let parse_u = |k: usize| -> Result<u64> {
            field(k)
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("bad integer {:?}", field(k)) })
        };
        let mut flat = Vec::with_capacity(p * d);
        for k in 0..p * d {
            flat.push(parse_f(7 + k)?);
        }
        let basis = Basis::from_flat(p, d, &flat)
            .map_err(|e| Error::Parse { line, message: e.to_string() })?;
        records.push(TraceRecord {
            t: parse_u(0)?,
            method: Method::parse(field(1)).map_err(|e| Error::Parse { line, message: e.to_string() })?,
            state: State::parse(field(2)).map_err(|e| Error::Parse { line, message: e.to_string() })?,
            j: parse_u(3)? as u32,
            l: parse_u(4)? as u32,
            alpha: parse_f(5)?,
            index_value: parse_f(6)?,
            basis,
        });
    }
    Ok(records)
}

fn write_jsonl<W: Write>(log: &TraceLog, mut out: W) -> Result<()> {
    for r in &log.records {
        let basis: Vec<String> = r.basis.flatten().into_iter().map(fmt_float).collect();
        writeln!(
            out,
            "{{\"t\":{},\"method\":\"{}\",\"state\":\"{}\",\"j\":{},\"l\":{},\"alpha\":{},\"index_value\":{},\"basis\":[{}]}}",
            r.t,
            r.method,
            r.state,
            r.j,
            r.l,
            fmt_float(r.alpha),
            fmt_float(r.index_value),
            basis.join(",")
        )?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct JsonlRow {
    t: u64,
    method: String,
    state: String,
    j: u32,
    l: u32,
    alpha: f64,
    index_value: f64,
    basis: Vec<f64>,
}

fn read_jsonl<R: BufRead>(reader: R, meta: &TraceMetadata) -> Result<Vec<TraceRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonlRow = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let basis = Basis::from_flat(meta.p, meta.d, &row.basis)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        records.push(TraceRecord {
            t: row.t,
            method: Method::parse(&row.method)
                .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?,
            state: State::parse(&row.state)
                .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?,
            j: row.j,
            l: row.l,
            alpha: row.alpha,
            index_value: row.index_value,
            basis,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::random_basis;
    use crate::rng::seeded;

    fn meta(p: usize, d: usize) -> TraceMetadata {
        TraceMetadata {
            p,
            d,
            n: 100,
            index: "holes".to_string(),
            seed: 42,
            config: serde_json::json!({"alpha0": 0.5}),
        }
    }

    fn small_log() -> TraceLog {
        let mut log = TraceLog::new(meta(3, 1));
        let e = |k: usize| Basis::axis(3, &[k]).unwrap();
        let rec = |log: &mut TraceLog, state, j, l, v: f64, b: Basis| {
            log.record(Method::Crs, state, j, l, 0.5, v, b).unwrap()
        };
        rec(&mut log, State::Start, 1, 1, 0.1, e(0));
        rec(&mut log, State::RandomSearch, 2, 1, 0.05, e(1));
        rec(&mut log, State::NewBasis, 2, 2, 0.3, e(2));
        rec(&mut log, State::Interpolation, 2, 1, 0.15, e(1));
        rec(&mut log, State::Interpolation, 2, 2, 0.3, e(2));
        rec(&mut log, State::RandomSearch, 3, 1, 0.2, e(0));
        rec(&mut log, State::Final, 3, 1, 0.3, e(2));
        log
    }

    #[test]
    fn record_assigns_sequential_t() {
        let log = small_log();
        let ts: Vec<u64> = log.records().iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn record_rejects_bad_rows() {
        let mut log = TraceLog::new(meta(3, 1));
        let b = Basis::axis(3, &[0]).unwrap();
        assert!(log
            .record(Method::Crs, State::Start, 1, 1, 0.5, f64::NAN, b.clone())
            .is_err());
        let wrong = Basis::axis(4, &[0]).unwrap();
        assert!(log.record(Method::Crs, State::Start, 1, 1, 0.5, 0.1, wrong).is_err());
        assert!(log.record(Method::Crs, State::Start, 1, 1, 0.5, 0.1, b).is_ok());
    }

    #[test]
    fn best_takes_highest_value_earliest_t() {
        let mut log = TraceLog::new(meta(3, 1));
        let b = Basis::axis(3, &[0]).unwrap();
        for v in [0.1, 0.3, 0.2, 0.3] {
            log.record(Method::Crs, State::RandomSearch, 2, 1, 0.5, v, b.clone()).unwrap();
        }
        let best = log.get_best().unwrap();
        assert_eq!(best.t, 2);
        assert_eq!(best.index_value, 0.3);
    }

    #[test]
    fn getters_on_empty_log() {
        let log = TraceLog::new(meta(3, 1));
        assert!(log.get_start().is_err());
        assert!(log.get_best().is_err());
        assert!(log.get_anchor().is_empty());
        assert!(log.get_interrupt().is_empty());
    }

    #[test]
    fn accessors_filter_by_state() {
        let log = small_log();
        assert_eq!(log.get_start().unwrap().t, 1);
        assert_eq!(log.get_anchor().len(), 1);
        assert_eq!(log.get_interp().len(), 2);
        // start, random_search, new_basis, random_search; the final
        // marker is not an evaluation event.
        assert_eq!(log.get_search().len(), 4);
        assert_eq!(log.get_search_count(), vec![(1, 1), (2, 2), (3, 1)]);
        assert!(log.get_dir_search().is_empty());
    }

    #[test]
    fn interp_last_picks_the_final_frame_per_iteration() {
        let log = small_log();
        let last = log.get_interp_last();
        assert_eq!(last.len(), 1);
        assert_eq!(last[0].t, 5);
        assert_eq!(last[0].l, 2);
    }

    #[test]
    fn interrupt_pairs_appear_only_when_the_leg_stopped_short() {
        // Leg in small_log ends exactly on the anchor: no pairs.
        assert!(small_log().get_interrupt().is_empty());

        let mut log = TraceLog::new(meta(3, 1));
        let e = |k: usize| Basis::axis(3, &[k]).unwrap();
        log.record(Method::Crs, State::Start, 1, 1, 0.5, 0.1, e(0)).unwrap();
        log.record(Method::Crs, State::NewBasis, 2, 1, 0.5, 0.3, e(2)).unwrap();
        // Interpolation stopped at a frame that is not the anchor.
        log.record(Method::Crs, State::Interpolation, 2, 1, 0.5, 0.35, e(1)).unwrap();
        let pairs = log.get_interrupt();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].0.t, 3);
        assert_eq!(pairs[0].1.t, 2);
    }

    #[test]
    fn basis_matrix_shape_and_content() {
        let log = small_log();
        let m = log.get_basis_matrix();
        assert_eq!(m.rows(), log.len());
        assert_eq!(m.cols(), 3);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(2, 2), 1.0);
    }

    #[test]
    fn binding_context() {
        let mut log = small_log();
        assert!(log.get_theo().is_none());
        log.bind_theoretical(Basis::axis(3, &[1]).unwrap()).unwrap();
        assert!(log.get_theo().is_some());
        assert!(log.bind_theoretical(Basis::axis(4, &[1]).unwrap()).is_err());
        let mut rng = seeded(3);
        log.bind_random(10, &mut rng).unwrap();
        assert_eq!(log.background().len(), 10);
    }

    fn synthetic_log(n_records: usize) -> TraceLog {
        let mut rng = seeded(17);
        let mut log = TraceLog::new(meta(4, 2));
        log.bind_theoretical(Basis::axis(4, &[0, 1]).unwrap()).unwrap();
        log.bind_random(5, &mut rng).unwrap();
        let states = [
            State::Start,
            State::RandomSearch,
            State::NewBasis,
            State::Interpolation,
            State::PolishSearch,
        ];
        for k in 0..n_records {
            let b = random_basis(4, 2, &mut rng).unwrap();
            log.record(
                Method::Sa,
                states[k % states.len()],
                (k / 7) as u32 + 1,
                (k % 7) as u32 + 1,
                0.5 * 0.99f64.powi(k as i32),
                (k as f64).sin() * 1e-3 + 0.2,
                b,
            )
            .unwrap();
        }
        log
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let log = synthetic_log(500);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        serialize(&log, &path, Format::Csv).unwrap();
        let back = deserialize(&path).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let log = synthetic_log(120);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        serialize(&log, &path, Format::Jsonl).unwrap();
        let back = deserialize(&path).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn csv_header_is_pinned() {
        let log = small_log();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        serialize(&log, &path, Format::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "t,method,state,j,l,alpha,index_value,basis_1,basis_2,basis_3");
    }

    #[test]
    fn malformed_csv_row_reports_its_line() {
        let log = small_log();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        serialize(&log, &path, Format::Csv).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replace("new_basis", "not_a_state");
        std::fs::write(&path, text).unwrap();
        match deserialize(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_sidecar_is_a_clear_error() {
        let log = small_log();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        serialize(&log, &path, Format::Csv).unwrap();
        std::fs::remove_file(meta_path(&path)).unwrap();
        match deserialize(&path) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains("sidecar")),
            other => panic!("expected sidecar error, got {other:?}"),
        }
    }

    #[test]
    fn format_inference() {
        assert_eq!(Format::from_path(Path::new("a/b.csv")).unwrap(), Format::Csv);
        assert_eq!(Format::from_path(Path::new("a/b.jsonl")).unwrap(), Format::Jsonl);
        assert!(Format::from_path(Path::new("a/b.txt")).is_err());
        assert_eq!(meta_path(Path::new("runs/t1.csv")), PathBuf::from("runs/t1.meta.json"));
    }
}
