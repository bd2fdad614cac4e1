//! Projection indexes: scalar scores of how interesting a projected
//! point cloud looks. Higher is more interesting. Indexes see only the
//! projected data, never the basis that produced it.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::manifold::Basis;
use crate::rng::{standard_normal, RunRng};

/// Projects `data` (n x p) through `basis` (p x d) to an n x d cloud.
pub fn project(data: &Matrix, basis: &Basis) -> Result<Matrix> {
    if data.cols() != basis.p() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} variables but the basis expects {}",
            data.cols(),
            basis.p()
        )));
    }
    Ok(data.matmul(basis.matrix()))
}

/// A projection index. `evaluate` receives the projected cloud, plus
/// the run's random stream for indexes that compare against freshly
/// drawn reference samples.
pub trait IndexFunction {
    fn name(&self) -> &'static str;

    /// Whether repeated evaluation of the same projection returns the
    /// same value. Stochastic indexes return `false`; optimisers use
    /// this to decide how much to trust single evaluations.
    fn smooth(&self) -> bool;

    fn evaluate(&self, projected: &Matrix, rng: &mut RunRng) -> Result<f64>;
}

/// Projects and evaluates in one step.
pub fn evaluate_on(
    index: &dyn IndexFunction,
    data: &Matrix,
    basis: &Basis,
    rng: &mut RunRng,
) -> Result<f64> {
    let y = project(data, basis)?;
    index.evaluate(&y, rng)
}

/// Looks up an index by its registered name.
pub fn index_by_name(name: &str) -> Result<Box<dyn IndexFunction + Send + Sync>> {
    match name {
        "holes" => Ok(Box::new(Holes)),
        "kolmogorov" => Ok(Box::new(Kolmogorov)),
        other => Err(Error::InvalidArgument(format!(
            "unknown index {other:?} (available: holes, kolmogorov)"
        ))),
    }
}

/// The holes index rewards projections with a sparse centre:
///
/// I = (1 - mean_i exp(-|y_i|^2 / 2)) / (1 - exp(-d / 2))
///
/// It is 0 when every point sits at the origin and approaches
/// 1 / (1 - exp(-d/2)) as all points move far away. Deterministic and
/// smooth in the projection.
pub struct Holes;

impl IndexFunction for Holes {
    fn name(&self) -> &'static str {
        "holes"
    }

    fn smooth(&self) -> bool {
        true
    }

    fn evaluate(&self, projected: &Matrix, _rng: &mut RunRng) -> Result<f64> {
        let (n, d) = (projected.rows(), projected.cols());
        if n == 0 || d == 0 {
            return Err(Error::Empty("holes index needs a non-empty cloud".into()));
        }
        if !projected.is_finite() {
            return Err(Error::NonFinite("projected data contains non-finite values".into()));
        }
        let mut acc = 0.0f64;
        for r in 0..n {
            let mut sq = 0.0f64;
            for c in 0..d {
                let v = projected.get(r, c);
                sq += v * v;
            }
            acc += (-0.5 * sq).exp();
        }
        let numerator = 1.0 - acc / n as f64;
        let denominator = 1.0 - (-(d as f64) / 2.0).exp();
        Ok(numerator / denominator)
    }
}

/// One-sided Kolmogorov deviation of a 1-d projection from normality:
/// the largest signed excess of the sample ECDF over the ECDF of a
/// freshly drawn standard normal reference sample of the same size,
/// taken over all pooled observation points. Always non-negative, and
/// noisy by construction: each evaluation draws a new reference.
pub struct Kolmogorov;

impl IndexFunction for Kolmogorov {
    fn name(&self) -> &'static str {
        "kolmogorov"
    }

    fn smooth(&self) -> bool {
        false
    }

    fn evaluate(&self, projected: &Matrix, rng: &mut RunRng) -> Result<f64> {
        if projected.cols() != 1 {
            return Err(Error::InvalidArgument(format!(
                "kolmogorov index applies to 1-d projections, got d = {}",
                projected.cols()
            )));
        }
        let n = projected.rows();
        if n == 0 {
            return Err(Error::Empty("kolmogorov index needs a non-empty cloud".into()));
        }
        if !projected.is_finite() {
            return Err(Error::NonFinite("projected data contains non-finite values".into()));
        }
        let mut sample: Vec<f64> = projected.col(0).to_vec();
        let mut reference: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        sample.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
        reference.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));

        // Walk the pooled order statistics; at each point the signed
        // ECDF difference is (#sample <= t - #reference <= t) / n.
        let mut pooled: Vec<f64> = Vec::with_capacity(2 * n);
        pooled.extend_from_slice(&sample);
        pooled.extend_from_slice(&reference);
        pooled.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));

        let (mut i, mut j) = (0usize, 0usize);
        let mut best = 0.0f64;
        for &t in &pooled {
            while i < n && sample[i] <= t {
                i += 1;
            }
            while j < n && reference[j] <= t {
                j += 1;
            }
            let diff = (i as f64 - j as f64) / n as f64;
            if diff > best {
                best = diff;
            }
        }
        Ok(best)
    }
}
