//! Derivative-free optimisers over projection bases.
//!
//! All methods share the same outer loop: evaluate a start basis, find
//! a better target (each method has its own inner loop), reconcile the
//! target's orientation, geodesically interpolate toward it while
//! logging every frame, and repeat until no target can be found or the
//! accepted target is closer than `min_geodesic_dist`.
//!
//! Two positions are tracked. The search anchor is the last accepted
//! target; candidates are blended from it and compared against its
//! value, exactly the A_cur update of the inner loops. The tour
//! position is where the interpolation actually stopped, which is the
//! target itself unless interruption is on, in which case each leg
//! stops at its highest-index frame and the next leg starts there.
//! Keeping the two apart means interruption changes what the run keeps
//! and shows, never what the search does next, so a run with
//! interruption reaches the same targets as one without and can only
//! end on an equal or better basis.
//!
//! Index bookkeeping: the running value `I_cur` is the value logged
//! when the anchor was accepted. It is carried, not re-evaluated, so
//! for stochastic indexes every comparison is against the value that
//! acceptance was actually based on, and accepted values increase
//! monotonically for methods that only accept improvements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indexes::{evaluate_on, IndexFunction};
use crate::linalg::Matrix;
use crate::manifold::{
    geodesic_distance, geodesic_path, linear_blend, orient_match, random_basis, Basis,
    GeodesicSegment,
};
use crate::rng::{seeded, seeded_stream, uniform, RunRng};
use crate::trace::{Method, State, TraceLog, TraceMetadata};

/// Thresholds of the polish refinement stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolishConfig {
    /// Candidates drawn per inner batch.
    pub candidates: usize,
    /// Stop when the accepted basis is within this geodesic distance.
    pub min_dist: f64,
    /// Stop when the relative index improvement falls to this.
    pub min_rel_index: f64,
    /// Stop when the shrinking neighbourhood reaches this size.
    pub min_alpha: f64,
}

impl Default for PolishConfig {
    fn default() -> Self {
        Self { candidates: 100, min_dist: 1e-3, min_rel_index: 1e-5, min_alpha: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Projection dimension.
    pub d: usize,
    /// Initial sampling neighbourhood size.
    pub alpha0: f64,
    /// Multiplicative neighbourhood decay, applied once per outer
    /// iteration (per inner batch for polish).
    pub cooling: f64,
    /// Inner tries per outer iteration before giving up.
    pub l_max: u32,
    /// Simulated annealing initial temperature.
    pub t0: f64,
    /// Random directions probed per pseudo-derivative try.
    pub pd_directions: usize,
    /// Probe angle (radians) for pseudo-derivative direction search.
    pub pd_delta: f64,
    /// Pseudo-derivative tries per outer iteration. One try costs a
    /// whole direction search plus a line search, so its budget is
    /// far smaller than l_max.
    pub pd_l_max: u32,
    /// Stop a leg at its best frame rather than the target. `None`
    /// resolves to "on for CRS, off otherwise".
    pub interrupt: Option<bool>,
    /// Flip a target's first column when det(current^T target) < 0.
    pub orient_check: bool,
    /// Greatest span motion between consecutive interpolation frames.
    pub step_angle: f64,
    pub seed: u64,
    /// Accepting a target closer than this ends the run.
    pub min_geodesic_dist: f64,
    pub polish: PolishConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Crs,
            d: 1,
            alpha0: 0.5,
            cooling: 0.99,
            l_max: 25,
            t0: 0.01,
            pd_directions: 4,
            pd_delta: 0.01,
            pd_l_max: 5,
            interrupt: None,
            orient_check: true,
            step_angle: 0.05,
            seed: 0,
            min_geodesic_dist: 1e-3,
            polish: PolishConfig::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return bad(format!("alpha0 must lie in (0, 1], got {}", self.alpha0));
        }
        if !(self.cooling > 0.0 && self.cooling <= 1.0) {
            return bad(format!("cooling must lie in (0, 1], got {}", self.cooling));
        }
        if self.l_max < 1 {
            return bad("l_max must be at least 1".into());
        }
        if !(self.t0 > 0.0) {
            return bad(format!("t0 must be positive, got {}", self.t0));
        }
        if self.d == 0 || self.d > 2 {
            return bad(format!("d must be 1 or 2, got {}", self.d));
        }
        if self.pd_directions < 1 {
            return bad("pd_directions must be at least 1".into());
        }
        if !(self.pd_delta > 0.0 && self.pd_delta < std::f64::consts::FRAC_PI_4) {
            return bad(format!("pd_delta must lie in (0, pi/4), got {}", self.pd_delta));
        }
        if self.pd_l_max < 1 {
            return bad("pd_l_max must be at least 1".into());
        }
        if !(self.step_angle > 0.0) {
            return bad(format!("step_angle must be positive, got {}", self.step_angle));
        }
        if !(self.min_geodesic_dist >= 0.0) {
            return bad(format!("min_geodesic_dist must be >= 0, got {}", self.min_geodesic_dist));
        }
        let p = &self.polish;
        if p.candidates < 1 || !(p.min_dist >= 0.0) || !(p.min_rel_index >= 0.0) || !(p.min_alpha >= 0.0)
        {
            return bad("polish thresholds must be non-negative with at least one candidate".into());
        }
        Ok(())
    }

    /// Interruption default: on for CRS, off for the others.
    pub fn interrupt_enabled(&self) -> bool {
        self.interrupt.unwrap_or(self.method == Method::Crs)
    }

    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// An inner loop used up every try without finding a target.
    LMaxExhausted,
    /// The accepted target was within `min_geodesic_dist` of current.
    TooClose,
    /// A polish threshold (distance, relative index, or alpha) fired.
    PolishThreshold,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::LMaxExhausted => "l_max_exhausted",
            Termination::TooClose => "too_close",
            Termination::PolishThreshold => "polish_threshold",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub final_basis: Basis,
    pub final_index: f64,
    pub trace: TraceLog,
    /// Accepted outer iterations (number of targets reached).
    pub iterations: u32,
    pub terminated_by: Termination,
}

/// Probability that simulated annealing gives a worse candidate a
/// second chance at inner try `l`: min{exp(-|delta| / T(l)), 1} with
/// T(l) = t0 / ln(l + 1).
pub fn sa_acceptance_probability(delta: f64, t0: f64, l: u32) -> f64 {
    let temperature = t0 / ((l as f64) + 1.0).ln();
    (-delta.abs() / temperature).exp().min(1.0)
}

/// Everything an interpolation leg needs besides the endpoints.
pub struct LegContext<'a> {
    pub data: &'a Matrix,
    pub index: &'a dyn IndexFunction,
    pub method: Method,
    pub j: u32,
    pub alpha: f64,
    pub step_angle: f64,
    pub interrupt: bool,
}

/// Walks the geodesic from `current` to `target`, logging one
/// interpolation record per frame (the first frame repeats `current`
/// and is not logged). Fresh index evaluations are made for interior
/// frames; the last frame is the target and reuses `target_value`,
/// the value acceptance was based on. With interruption the leg is
/// truncated at its highest-value frame (records after it are not
/// kept). Returns the basis the walk stopped at and its value.
pub fn interpolate_leg(
    log: &mut TraceLog,
    rng: &mut RunRng,
    ctx: &LegContext,
    current: &Basis,
    target: &Basis,
    target_value: f64,
) -> Result<(Basis, f64)> {
    let path = geodesic_path(current, target, ctx.step_angle)?;
    let frames = path.frames();
    if frames.len() < 2 {
        return Ok((target.clone(), target_value));
    }
    let mut values = Vec::with_capacity(frames.len() - 1);
    for (i, frame) in frames.iter().enumerate().skip(1) {
        let v = if i == frames.len() - 1 {
            target_value
        } else {
            evaluate_on(ctx.index, ctx.data, frame, rng)?
        };
        values.push(v);
    }
    let keep = if ctx.interrupt {
        let mut best = 0usize;
        for (i, v) in values.iter().enumerate() {
            if *v > values[best] {
                best = i;
            }
        }
        best + 1
    } else {
        values.len()
    };
    for i in 0..keep {
        log.record(
            ctx.method,
            State::Interpolation,
            ctx.j,
            (i + 1) as u32,
            ctx.alpha,
            values[i],
            frames[i + 1].clone(),
        )?;
    }
    Ok((frames[keep].clone(), values[keep - 1]))
}

struct Runner<'a> {
    data: &'a Matrix,
    index: &'a dyn IndexFunction,
    cfg: &'a OptimizerConfig,
    method: Method,
    rng: RunRng,
    log: TraceLog,
    /// Search anchor: the last accepted target.
    current: Basis,
    /// Its accepted index value, the bar candidates must clear.
    i_cur: f64,
    /// Where the tour stopped: the target, or the interruption frame.
    tour: Basis,
    tour_value: f64,
    alpha: f64,
}

/// An accepted inner-loop outcome: the target basis, its index value,
/// and the try at which it was found.
struct Accepted {
    basis: Basis,
    value: f64,
    l: u32,
}

impl<'a> Runner<'a> {
    fn start(
        data: &'a Matrix,
        index: &'a dyn IndexFunction,
        cfg: &'a OptimizerConfig,
        method: Method,
        mut rng: RunRng,
        start: Option<&Basis>,
    ) -> Result<Self> {
        cfg.validate()?;
        let p = data.cols();
        if p <= cfg.d {
            return Err(Error::DimensionMismatch(format!(
                "data has {p} variables; cannot project to d = {}",
                cfg.d
            )));
        }
        let current = match start {
            Some(b) => {
                if b.p() != p || b.d() != cfg.d {
                    return Err(Error::DimensionMismatch(format!(
                        "start basis is {} x {}, expected {} x {}",
                        b.p(),
                        b.d(),
                        p,
                        cfg.d
                    )));
                }
                b.clone()
            }
            None => random_basis(p, cfg.d, &mut rng)?,
        };
        let i_cur = evaluate_on(index, data, &current, &mut rng)?;
        let mut log = TraceLog::new(TraceMetadata {
            p,
            d: cfg.d,
            n: data.rows(),
            index: index.name().to_string(),
            seed: cfg.seed,
            config: cfg.snapshot(),
        });
        log.record(method, State::Start, 1, 1, cfg.alpha0, i_cur, current.clone())?;
        Ok(Self {
            data,
            index,
            cfg,
            method,
            rng,
            log,
            tour: current.clone(),
            tour_value: i_cur,
            current,
            i_cur,
            alpha: cfg.alpha0,
        })
    }

    fn evaluate(&mut self, basis: &Basis) -> Result<f64> {
        evaluate_on(self.index, self.data, basis, &mut self.rng)
    }

    /// Orthonormalized blend of the current basis with a fresh random
    /// one. Degenerate draws (measure zero) are redrawn.
    fn draw_candidate(&mut self) -> Result<Basis> {
        for _ in 0..64 {
            let rand = random_basis(self.current.p(), self.current.d(), &mut self.rng)?;
            match linear_blend(&self.current, &rand, self.alpha) {
                Ok(b) => return Ok(b),
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Degenerate("could not draw a usable candidate".into()))
    }

    fn inner_crs(&mut self, j: u32) -> Result<Option<Accepted>> {
        for l in 1..=self.cfg.l_max {
            let cand = self.draw_candidate()?;
            let value = self.evaluate(&cand)?;
            if value > self.i_cur {
                return Ok(Some(Accepted { basis: cand, value, l }));
            }
            self.log.record(self.method, State::RandomSearch, j, l, self.alpha, value, cand)?;
        }
        Ok(None)
    }

    fn inner_sa(&mut self, j: u32) -> Result<Option<Accepted>> {
        for l in 1..=self.cfg.l_max {
            let cand = self.draw_candidate()?;
            let value = self.evaluate(&cand)?;
            if value > self.i_cur {
                return Ok(Some(Accepted { basis: cand, value, l }));
            }
            // Second chance for a worse candidate.
            let p = sa_acceptance_probability(self.i_cur - value, self.cfg.t0, l);
            let u = uniform(&mut self.rng);
            if p > u {
                return Ok(Some(Accepted { basis: cand, value, l }));
            }
            self.log.record(self.method, State::RandomSearch, j, l, self.alpha, value, cand)?;
        }
        Ok(None)
    }

    /// A random basis far enough from current to define a direction.
    fn draw_direction(&mut self) -> Result<GeodesicSegment> {
        for _ in 0..64 {
            let rand = random_basis(self.current.p(), self.current.d(), &mut self.rng)?;
            let seg = GeodesicSegment::new(&self.current, &rand)?;
            if seg.total_angle() > 1e-9 {
                return Ok(seg);
            }
        }
        Err(Error::Degenerate("could not draw a usable direction".into()))
    }

    fn inner_pd(&mut self, j: u32) -> Result<Option<Accepted>> {
        let delta = self.cfg.pd_delta;
        // A noisy index cannot trust the stored current value; measure
        // it again so this iteration's comparisons use a fresh reading.
        if !self.index.smooth() {
            let here = self.current.clone();
            self.i_cur = self.evaluate(&here)?;
        }
        for l in 1..=self.cfg.pd_l_max {
            // Probe both ways along each of n random directions.
            let mut best_probe: Option<(Basis, f64)> = None;
            for _ in 0..self.cfg.pd_directions {
                let seg = self.draw_direction()?;
                for sign in [1.0, -1.0] {
                    let probe = seg.frame_at_angle(sign * delta)?;
                    let value = self.evaluate(&probe)?;
                    self.log.record(
                        self.method,
                        State::DirectionSearch,
                        j,
                        l,
                        self.alpha,
                        value,
                        probe.clone(),
                    )?;
                    if best_probe.as_ref().map_or(true, |(_, bv)| value > *bv) {
                        best_probe = Some((probe, value));
                    }
                }
            }
            let (probe, probe_value) = best_probe.expect("at least one probe");
            self.log.record(
                self.method,
                State::BestDirectionSearch,
                j,
                l,
                self.alpha,
                probe_value,
                probe.clone(),
            )?;

            // Line search along the probe direction over a 90 degree
            // window centred on the current basis.
            let seg = GeodesicSegment::new(&self.current, &probe)?;
            let window = std::f64::consts::FRAC_PI_4;
            let mut failure: Option<Error> = None;
            let angle = {
                let log = &mut self.log;
                let rng = &mut self.rng;
                let (data, index, method, alpha) = (self.data, self.index, self.method, self.alpha);
                let mut eval_at = |angle: f64| -> f64 {
                    let out = seg.frame_at_angle(angle).and_then(|frame| {
                        let v = evaluate_on(index, data, &frame, rng)?;
                        log.record(method, State::BestLineSearch, j, l, alpha, v, frame)?;
                        Ok(v)
                    });
                    match out {
                        Ok(v) => v,
                        Err(e) => {
                            if failure.is_none() {
                                failure = Some(e);
                            }
                            f64::NEG_INFINITY
                        }
                    }
                };
                golden_section_max(&mut eval_at, -window, window, 20)
            };
            if let Some(e) = failure {
                return Err(e);
            }
            // The step lands where the line search converged; its index
            // is measured there, not taken from the samples above.
            let basis = seg.frame_at_angle(angle)?;
            let value = self.evaluate(&basis)?;

            // Accept on a relative improvement of at least 0.1%.
            if value > 0.0 {
                let p_diff = (value - self.i_cur) / value;
                if p_diff > 0.001 {
                    return Ok(Some(Accepted { basis, value, l }));
                }
            }
        }
        Ok(None)
    }

    /// One batch of the polish stage: many candidates, best-of-batch.
    /// Shrinks alpha after every batch (the polish distinction).
    fn polish_batch(&mut self, j: u32, l: u32) -> Result<(Basis, f64)> {
        let mut best: Option<(Basis, f64)> = None;
        for _ in 0..self.cfg.polish.candidates {
            let cand = self.draw_candidate()?;
            let value = self.evaluate(&cand)?;
            self.log.record(self.method, State::PolishSearch, j, l, self.alpha, value, cand.clone())?;
            if best.as_ref().map_or(true, |(_, bv)| value > *bv) {
                best = Some((cand, value));
            }
        }
        self.alpha *= self.cfg.cooling;
        Ok(best.expect("at least one candidate"))
    }

    /// Accepts `target`: reconciles its orientation against the tour
    /// position, logs the anchor, interpolates the leg (with
    /// interruption if configured), and advances both positions.
    /// Returns the anchor-to-target distance used for termination.
    fn move_to(&mut self, accepted: Accepted, j: u32) -> Result<f64> {
        let dist = geodesic_distance(&self.current, &accepted.basis)?;
        let target = if self.cfg.orient_check {
            orient_match(&self.tour, &accepted.basis)?
        } else {
            accepted.basis.clone()
        };
        self.log.record(self.method, State::NewBasis, j, accepted.l, self.alpha, accepted.value, target.clone())?;
        let ctx = LegContext {
            data: self.data,
            index: self.index,
            method: self.method,
            j,
            alpha: self.alpha,
            step_angle: self.cfg.step_angle,
            interrupt: self.cfg.interrupt_enabled(),
        };
        let (stopped, value) =
            interpolate_leg(&mut self.log, &mut self.rng, &ctx, &self.tour, &target, accepted.value)?;
        self.tour = stopped;
        self.tour_value = value;
        self.current = accepted.basis;
        self.i_cur = accepted.value;
        Ok(dist)
    }

    fn finish(mut self, j: u32, terminated_by: Termination) -> Result<RunResult> {
        self.log.record(self.method, State::Final, j, 1, self.alpha, self.tour_value, self.tour.clone())?;
        let iterations = self.log.get_anchor().len() as u32;
        Ok(RunResult {
            final_basis: self.tour,
            final_index: self.tour_value,
            trace: self.log,
            iterations,
            terminated_by,
        })
    }

    fn run_search(mut self) -> Result<RunResult> {
        let mut j = 1u32;
        loop {
            j += 1;
            let outcome = match self.method {
                Method::Crs => self.inner_crs(j)?,
                Method::Sa => self.inner_sa(j)?,
                Method::Pd => self.inner_pd(j)?,
                Method::Polish => unreachable!("polish runs through run_polish"),
            };
            if self.method != Method::Pd {
                // Neighbourhood decay per outer iteration. PD probes at
                // a fixed angle and does not use alpha.
                self.alpha *= self.cfg.cooling;
            }
            match outcome {
                None => return self.finish(j, Termination::LMaxExhausted),
                Some(accepted) => {
                    let dist = self.move_to(accepted, j)?;
                    if dist < self.cfg.min_geodesic_dist {
                        return self.finish(j, Termination::TooClose);
                    }
                }
            }
        }
    }

    fn run_polish(mut self) -> Result<RunResult> {
        let mut j = 1u32;
        loop {
            j += 1;
            let mut accepted: Option<Accepted> = None;
            let mut threshold = false;
            for l in 1..=self.cfg.l_max {
                let (basis, value) = self.polish_batch(j, l)?;
                if value > self.i_cur {
                    accepted = Some(Accepted { basis, value, l });
                    break;
                }
                if self.alpha <= self.cfg.polish.min_alpha {
                    threshold = true;
                    break;
                }
            }
            match accepted {
                None => {
                    let reason = if threshold {
                        Termination::PolishThreshold
                    } else {
                        Termination::LMaxExhausted
                    };
                    return self.finish(j, reason);
                }
                Some(accepted) => {
                    let before = self.i_cur;
                    let value = accepted.value;
                    let dist = self.move_to(accepted, j)?;
                    let rel = (value - before) / before.abs().max(f64::MIN_POSITIVE);
                    if dist <= self.cfg.polish.min_dist
                        || rel <= self.cfg.polish.min_rel_index
                        || self.alpha <= self.cfg.polish.min_alpha
                    {
                        return self.finish(j, Termination::PolishThreshold);
                    }
                }
            }
        }
    }
}

/// Runs the configured optimiser (CRS, SA, or PD) from a random start.
pub fn optimize(
    data: &Matrix,
    index: &dyn IndexFunction,
    cfg: &OptimizerConfig,
) -> Result<RunResult> {
    if cfg.method == Method::Polish {
        return Err(Error::InvalidArgument(
            "polish refines an existing basis; use polish_from".into(),
        ));
    }
    let rng = seeded(cfg.seed);
    Runner::start(data, index, cfg, cfg.method, rng, None)?.run_search()
}

/// Polish refinement from an existing basis (typically another run's
/// final basis). Uses a separate random stream from the same seed so a
/// polish stage never replays its parent run's draws.
pub fn polish_from(
    data: &Matrix,
    index: &dyn IndexFunction,
    start: &Basis,
    cfg: &OptimizerConfig,
) -> Result<RunResult> {
    let rng = seeded_stream(cfg.seed, 1);
    Runner::start(data, index, cfg, Method::Polish, rng, Some(start))?.run_polish()
}

/// Golden-section maximization of `f` on [a, b] using exactly `evals`
/// evaluations. Returns the midpoint of the final bracket, the
/// search's estimate of the maximizer.
fn golden_section_max(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, evals: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 2..evals {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        }
    }
    (a + b) / 2.0
}
