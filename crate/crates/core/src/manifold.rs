//! Column-orthonormal projection bases and geodesics between them.
//!
//! A `Basis` is a p x d matrix A with A^T A = I. The distance between
//! two bases is measured between their column spans: from the singular
//! values of A^T B one gets the principal angles theta_i =
//! arccos(sigma_i), and the distance is sqrt(sum theta_i^2). Geodesic
//! paths rotate the principal directions of the start span into those
//! of the target span at constant speed, with an in-plane rotation
//! folded in so the path lands on the target matrix entrywise, not
//! just on its span.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{determinant, dot, jacobi_svd, norm, Matrix};
use crate::rng::{standard_normal, RunRng};

/// Largest deviation of A^T A from the identity a `Basis` tolerates.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Residual norm below which a column is treated as linearly
/// dependent during orthonormalization.
pub const RANK_TOL: f64 = 1e-12;

/// A p x d matrix with orthonormal columns, 1 <= d < p. Construction
/// validates the invariant; everything downstream may rely on it.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    m: Matrix,
}

impl Basis {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.cols() < 1 || m.cols() >= m.rows() {
            return Err(Error::DimensionMismatch(format!(
                "basis must be p x d with 1 <= d < p, got {} x {}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("basis entries must be finite".into()));
        }
        let err = m.orthonormality_error();
        if err > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "columns are not orthonormal (deviation {err:.3e})"
            )));
        }
        Ok(Self { m })
    }

    pub fn p(&self) -> usize {
        self.m.rows()
    }

    pub fn d(&self) -> usize {
        self.m.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn column(&self, k: usize) -> &[f64] {
        self.m.col(k)
    }

    /// Column-major flattening, length p * d.
    pub fn flatten(&self) -> Vec<f64> {
        self.m.data().to_vec()
    }

    pub fn from_flat(p: usize, d: usize, flat: &[f64]) -> Result<Self> {
        Self::new(Matrix::new(p, d, flat.to_vec())?)
    }

    /// Basis whose columns are the given coordinate axes of R^p.
    pub fn axis(p: usize, cols: &[usize]) -> Result<Self> {
        let mut m = Matrix::zeros(p, cols.len());
        for (j, &c) in cols.iter().enumerate() {
            if c >= p {
                return Err(Error::InvalidArgument(format!(
                    "axis index {c} out of range for p = {p}"
                )));
            }
            m.set(c, j, 1.0);
        }
        Self::new(m)
    }

    pub fn orthonormality_error(&self) -> f64 {
        self.m.orthonormality_error()
    }

    pub fn max_abs_diff(&self, other: &Basis) -> f64 {
        self.m.max_abs_diff(other.matrix())
    }

    /// Copy with column `k` negated. Spans are unchanged.
    pub fn with_negated_column(&self, k: usize) -> Basis {
        let mut m = self.m.clone();
        for v in m.col_mut(k) {
            *v = -*v;
        }
        Basis { m }
    }
}

#[derive(Serialize, Deserialize)]
struct BasisRepr {
    p: usize,
    d: usize,
    data: Vec<f64>,
}

impl Serialize for Basis {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BasisRepr { p: self.p(), d: self.d(), data: self.flatten() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Basis {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = BasisRepr::deserialize(de)?;
        Basis::from_flat(repr.p, repr.d, &repr.data).map_err(serde::de::Error::custom)
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass per
/// column. Columns are processed in order, so the span of the leading
/// k input columns equals the span of the leading k output columns.
/// A residual below `RANK_TOL` reports rank deficiency.
pub fn orthonormalize(m: &Matrix) -> Result<Basis> {
    if m.cols() < 1 || m.cols() >= m.rows() {
        return Err(Error::DimensionMismatch(format!(
            "need p x d input with 1 <= d < p, got {} x {}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("input entries must be finite".into()));
    }
    let mut w = m.clone();
    for j in 0..w.cols() {
        // The second pass removes the components reintroduced by
        // roundoff in the first; this keeps the Gram matrix within
        // ~1e-15 of the identity even for nearly dependent inputs.
        for _ in 0..2 {
            for i in 0..j {
                let r = dot(w.col(i), w.col(j));
                let (head, tail) = w.split_cols(i, j);
                for (x, y) in tail.iter_mut().zip(head.iter()) {
                    *x -= r * *y;
                }
            }
        }
        let nrm = norm(w.col(j));
        if nrm < RANK_TOL {
            return Err(Error::Degenerate(format!(
                "column {j} is linearly dependent on the preceding columns"
            )));
        }
        let inv = 1.0 / nrm;
        for v in w.col_mut(j) {
            *v *= inv;
        }
    }
    Basis::new(w)
}

fn check_same_shape(a: &Basis, b: &Basis) -> Result<()> {
    if a.p() != b.p() || a.d() != b.d() {
        return Err(Error::DimensionMismatch(format!(
            "bases have shapes {} x {} and {} x {}",
            a.p(),
            a.d(),
            b.p(),
            b.d()
        )));
    }
    Ok(())
}

/// Principal angles between the spans of `a` and `b`: arccos of the
/// singular values of a^T b, clamped into [-1, 1]. Ascending order is
/// not guaranteed; values lie in [0, pi/2].
pub fn principal_angles(a: &Basis, b: &Basis) -> Result<Vec<f64>> {
    check_same_shape(a, b)?;
    let m = a.matrix().t_mul(b.matrix());
    let svd = jacobi_svd(&m);
    Ok(svd.sigma.iter().map(|s| s.clamp(-1.0, 1.0).acos()).collect())
}

/// Geodesic distance between spans: sqrt of the sum of squared
/// principal angles. This is a pseudometric on matrices (bases with
/// equal spans are at distance zero).
pub fn geodesic_distance(a: &Basis, b: &Basis) -> Result<f64> {
    let angles = principal_angles(a, b)?;
    Ok(angles.iter().map(|t| t * t).sum::<f64>().sqrt())
}

/// Precomputed geodesic between two bases, parameterized by the
/// fraction t in [0, 1]. Supports d <= 2.
///
/// Frames rotate each principal direction of `from` toward the
/// matching direction of `to` at rate theta_i, together with the
/// in-plane rotation that makes frame(1) equal `to` entrywise. When
/// the alignment matrix from^T to has negative determinant there is no
/// orientation-preserving route; the smallest principal rotation then
/// takes the long way round (theta > pi/2), which is the pathology the
/// optimisers avoid by reconciling orientation first.
pub struct GeodesicSegment {
    from: Basis,
    to: Basis,
    a_rot: Matrix,
    w: Matrix,
    theta: Vec<f64>,
    u: Matrix,
    phi: f64,
    total_angle: f64,
}

impl GeodesicSegment {
    pub fn new(from: &Basis, to: &Basis) -> Result<Self> {
        check_same_shape(from, to)?;
        let d = from.d();
        if d > 2 {
            return Err(Error::InvalidArgument(format!(
                "geodesic segments support d <= 2, got d = {d}"
            )));
        }
        let m = from.matrix().t_mul(to.matrix());
        let det = determinant(&m);
        let mut svd = jacobi_svd(&m);

        // Opposite orientation: send the smallest singular value
        // negative (flipping the matching right singular vector keeps
        // the decomposition valid) so its rotation angle exceeds pi/2.
        if det < 0.0 {
            let last = d - 1;
            svd.sigma[last] = -svd.sigma[last];
            for v in svd.v.col_mut(last) {
                *v = -*v;
            }
        }
        // The in-plane rotation u^T v must be orientation preserving.
        // When m is singular the completed u column is free, so align
        // it; otherwise the determinant signs already agree.
        if determinant(&svd.u) * determinant(&svd.v) < 0.0 {
            let mut fixed = false;
            for j in 0..d {
                if svd.sigma[j].abs() <= crate::linalg::JACOBI_TOL {
                    for v in svd.u.col_mut(j) {
                        *v = -*v;
                    }
                    fixed = true;
                    break;
                }
            }
            if !fixed {
                return Err(Error::Degenerate(
                    "inconsistent orientation in singular value factors".into(),
                ));
            }
        }

        let a_rot = from.matrix().matmul(&svd.u);
        let b_rot = to.matrix().matmul(&svd.v);
        let theta: Vec<f64> = svd.sigma.iter().map(|s| s.clamp(-1.0, 1.0).acos()).collect();

        let mut w = Matrix::zeros(from.p(), d);
        for i in 0..d {
            let mut r: Vec<f64> = b_rot
                .col(i)
                .iter()
                .zip(a_rot.col(i))
                .map(|(b, a)| b - theta[i].cos() * a)
                .collect();
            let nrm = norm(&r);
            if nrm > RANK_TOL {
                for v in &mut r {
                    *v /= nrm;
                }
                w.col_mut(i).copy_from_slice(&r);
            } else if theta[i] > std::f64::consts::FRAC_PI_2 {
                // Antipodal pair: any direction orthogonal to every
                // other column serves as the rotation companion.
                let c = companion_direction(&a_rot, &w, i)?;
                w.col_mut(i).copy_from_slice(&c);
            }
            // theta ~ 0 keeps w_i = 0: that column never moves.
        }

        let q = svd.u.t_mul(&svd.v);
        let phi = if d == 2 { q.get(1, 0).atan2(q.get(0, 0)) } else { 0.0 };
        let total_angle = theta.iter().map(|t| t * t).sum::<f64>().sqrt();

        Ok(Self { from: from.clone(), to: to.clone(), a_rot, w, theta, u: svd.u, phi, total_angle })
    }

    pub fn from_basis(&self) -> &Basis {
        &self.from
    }

    pub fn to_basis(&self) -> &Basis {
        &self.to
    }

    /// Angle swept between the two spans along this segment. Equals
    /// `geodesic_distance(from, to)` whenever the alignment
    /// determinant is non-negative.
    pub fn total_angle(&self) -> f64 {
        self.total_angle
    }

    /// Frame at fraction `t` of the way along the segment. `t` may lie
    /// outside [0, 1] to extrapolate past the endpoints.
    pub fn frame_at_fraction(&self, t: f64) -> Result<Basis> {
        let (p, d) = (self.from.p(), self.from.d());
        let mut g = Matrix::zeros(p, d);
        for i in 0..d {
            let (sin_a, cos_a) = (self.theta[i] * t).sin_cos();
            let (ac, wc) = (self.a_rot.col(i), self.w.col(i));
            let gc = g.col_mut(i);
            for r in 0..p {
                gc[r] = cos_a * ac[r] + sin_a * wc[r];
            }
        }
        let f = if d == 1 {
            g.scaled(self.u.get(0, 0))
        } else {
            // In-plane factor rot(t * phi)^T u^T applied on the right.
            let (sin_p, cos_p) = (t * self.phi).sin_cos();
            let mut rot = Matrix::zeros(2, 2);
            rot.set(0, 0, cos_p);
            rot.set(1, 0, sin_p);
            rot.set(0, 1, -sin_p);
            rot.set(1, 1, cos_p);
            g.matmul(&self.u.matmul(&rot).transpose())
        };
        orthonormalize(&f)
    }

    /// Frame at signed arc length `s` (radians of span motion) from
    /// the start. Errors when the segment has no span motion at all.
    pub fn frame_at_angle(&self, s: f64) -> Result<Basis> {
        if self.total_angle < 1e-12 {
            return Err(Error::Degenerate(
                "segment spans coincide; no direction to walk along".into(),
            ));
        }
        self.frame_at_fraction(s / self.total_angle)
    }
}

/// First unit vector orthogonal to all columns of `a` and to the
/// other columns of `w`, taken from the coordinate axes.
fn companion_direction(a: &Matrix, w: &Matrix, skip: usize) -> Result<Vec<f64>> {
    let p = a.rows();
    for cand in 0..p {
        let mut v = vec![0.0; p];
        v[cand] = 1.0;
        for k in 0..a.cols() {
            let r = dot(&v, a.col(k));
            for (x, y) in v.iter_mut().zip(a.col(k)) {
                *x -= r * y;
            }
        }
        for k in 0..w.cols() {
            if k == skip {
                continue;
            }
            let r = dot(&v, w.col(k));
            for (x, y) in v.iter_mut().zip(w.col(k)) {
                *x -= r * y;
            }
        }
        let nrm = norm(&v);
        if nrm > 0.5 {
            for x in &mut v {
                *x /= nrm;
            }
            return Ok(v);
        }
    }
    Err(Error::Degenerate(
        "antipodal columns leave no free rotation plane".into(),
    ))
}

/// Evenly spaced frames along the geodesic from `from` to `to`.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    frames: Vec<Basis>,
    total_angle: f64,
}

impl GeodesicPath {
    pub fn frames(&self) -> &[Basis] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn first(&self) -> &Basis {
        &self.frames[0]
    }

    pub fn last(&self) -> &Basis {
        self.frames.last().expect("paths hold at least one frame")
    }

    pub fn total_angle(&self) -> f64 {
        self.total_angle
    }
}

/// Frames from `from` to `to` spaced at most `step_angle` radians of
/// span motion apart: ceil(total / step) + 1 frames, the first equal
/// to `from` and the last equal to `to`. Identical inputs give a
/// single frame.
pub fn geodesic_path(from: &Basis, to: &Basis, step_angle: f64) -> Result<GeodesicPath> {
    if !(step_angle.is_finite() && step_angle > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step angle must be positive and finite, got {step_angle}"
        )));
    }
    if from.max_abs_diff(to) <= 1e-12 {
        return Ok(GeodesicPath { frames: vec![from.clone()], total_angle: 0.0 });
    }
    let seg = GeodesicSegment::new(from, to)?;
    let steps = ((seg.total_angle() / step_angle).ceil() as usize).max(1);
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(from.clone());
    for k in 1..steps {
        frames.push(seg.frame_at_fraction(k as f64 / steps as f64)?);
    }
    frames.push(to.clone());
    Ok(GeodesicPath { frames, total_angle: seg.total_angle() })
}

/// Reconciles the orientation of `target` with `current`: if
/// det(current^T target) is negative the first column of the target is
/// negated, otherwise the target is returned unchanged. The span, and
/// hence any span-based projection index, is unaffected.
pub fn orient_match(current: &Basis, target: &Basis) -> Result<Basis> {
    check_same_shape(current, target)?;
    let m = current.matrix().t_mul(target.matrix());
    if determinant(&m) < 0.0 {
        Ok(target.with_negated_column(0))
    } else {
        Ok(target.clone())
    }
}

/// Alignment determinant det(current^T target); negative means the
/// bases sit on opposite orientations of their spans.
pub fn alignment_determinant(current: &Basis, target: &Basis) -> Result<f64> {
    check_same_shape(current, target)?;
    Ok(determinant(&current.matrix().t_mul(target.matrix())))
}

/// Haar-distributed random basis: orthonormalized standard normal
/// entries. Redraws on the (measure zero) rank-deficient draw.
pub fn random_basis(p: usize, d: usize, rng: &mut RunRng) -> Result<Basis> {
    for _ in 0..64 {
        let mut m = Matrix::zeros(p, d);
        for c in 0..d {
            for v in m.col_mut(c) {
                *v = standard_normal(rng);
            }
        }
        match orthonormalize(&m) {
            Ok(b) => return Ok(b),
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Degenerate("random draws kept collapsing".into()))
}

/// Orthonormalized convex blend (1 - alpha) current + alpha random:
/// the candidate generator of the random searches. Degenerate blends
/// surface as errors so callers can redraw.
pub fn linear_blend(current: &Basis, random: &Basis, alpha: f64) -> Result<Basis> {
    check_same_shape(current, random)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "blend fraction must lie in [0, 1], got {alpha}"
        )));
    }
    let m = current.matrix().scaled(1.0 - alpha).add(&random.matrix().scaled(alpha));
    orthonormalize(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, uniform};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn basis(p: usize, d: usize, flat: &[f64]) -> Basis {
        Basis::from_flat(p, d, flat).unwrap()
    }

    fn e1() -> Basis {
        basis(2, 1, &[1.0, 0.0])
    }

    fn e2() -> Basis {
        basis(2, 1, &[0.0, 1.0])
    }

    #[test]
    fn identity_block_is_already_orthonormal() {
        let m = Matrix::new(3, 2, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let b = orthonormalize(&m).unwrap();
        assert!(b.matrix().max_abs_diff(&m) < 1e-15);
    }

    #[test]
    fn orthonormalize_scales_single_column() {
        let m = Matrix::new(3, 1, vec![2.0, 0.0, 0.0]).unwrap();
        let b = orthonormalize(&m).unwrap();
        assert_eq!(b.flatten(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn orthonormalize_hand_case() {
        let m = Matrix::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let b = orthonormalize(&m).unwrap();
        let expect = Matrix::new(3, 2, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(b.matrix().max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn orthonormalize_rejects_duplicate_columns() {
        let m = Matrix::new(3, 2, vec![1.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        match orthonormalize(&m) {
            Err(Error::Degenerate(_)) => {}
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn basis_rejects_wide_and_skewed_input() {
        assert!(Basis::from_flat(2, 2, &[1.0, 0.0, 0.0, 1.0]).is_err());
        assert!(Basis::from_flat(3, 1, &[1.0, 1.0, 0.0]).is_err());
        assert!(Basis::from_flat(3, 1, &[f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn distance_of_a_basis_to_itself_is_zero() {
        let mut rng = seeded(3);
        let a = random_basis(5, 2, &mut rng).unwrap();
        assert!(geodesic_distance(&a, &a).unwrap() < 1e-6);
    }

    #[test]
    fn distance_between_orthogonal_lines_is_right_angle() {
        let d = geodesic_distance(&e1(), &e2()).unwrap();
        assert!((d - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn distance_ignores_column_sign() {
        let minus_e1 = basis(2, 1, &[-1.0, 0.0]);
        assert!(geodesic_distance(&e1(), &minus_e1).unwrap() < 1e-7);
    }

    #[test]
    fn distance_checks_shapes() {
        let a = basis(3, 1, &[1.0, 0.0, 0.0]);
        assert!(geodesic_distance(&a, &e1()).is_err());
    }

    #[test]
    fn path_between_equal_bases_is_one_frame() {
        let p = geodesic_path(&e1(), &e1(), 0.05).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.first(), &e1());
    }

    #[test]
    fn quarter_turn_path_with_three_frames() {
        let p = geodesic_path(&e1(), &e2(), FRAC_PI_4).unwrap();
        assert_eq!(p.len(), 3);
        let mid = basis(2, 1, &[FRAC_PI_4.cos(), FRAC_PI_4.sin()]);
        assert!(p.frames()[1].max_abs_diff(&mid) < 1e-12);
        assert!(p.first().max_abs_diff(&e1()) < 1e-12);
        assert!(p.last().max_abs_diff(&e2()) < 1e-12);
    }

    #[test]
    fn path_frames_stay_in_the_plane_of_the_endpoints() {
        let mut rng = seeded(11);
        let a = random_basis(4, 1, &mut rng).unwrap();
        let b = random_basis(4, 1, &mut rng).unwrap();
        let path = geodesic_path(&a, &b, 0.05).unwrap();

        // Orthonormal frame for span{a, b}.
        let q1: Vec<f64> = a.column(0).to_vec();
        let r = dot(b.column(0), &q1);
        let mut q2: Vec<f64> = b.column(0).iter().zip(&q1).map(|(x, y)| x - r * y).collect();
        let n2 = norm(&q2);
        for v in &mut q2 {
            *v /= n2;
        }
        for f in path.frames() {
            let c = f.column(0);
            let c1 = dot(c, &q1);
            let c2 = dot(c, &q2);
            let out: f64 = c
                .iter()
                .enumerate()
                .map(|(i, v)| (v - c1 * q1[i] - c2 * q2[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(out < 1e-8, "frame leaves the endpoint plane by {out:.3e}");
        }
    }

    #[test]
    fn path_speed_is_constant_and_endpoints_exact() {
        let mut rng = seeded(21);
        for _ in 0..50 {
            let p = 3 + (uniform_usize(&mut rng, 4));
            let d = 1 + uniform_usize(&mut rng, 2).min(p - 2);
            let a = random_basis(p, d, &mut rng).unwrap();
            let b = random_basis(p, d, &mut rng).unwrap();
            let path = geodesic_path(&a, &b, 0.05).unwrap();
            assert!(path.first().max_abs_diff(&a) < 1e-8);
            assert!(path.last().max_abs_diff(&b) < 1e-8);
            let steps: Vec<f64> = path
                .frames()
                .windows(2)
                .map(|w| geodesic_distance(&w[0], &w[1]).unwrap())
                .collect();
            let first = steps[0];
            for s in &steps {
                assert!((s - first).abs() < 1e-6, "step {s} vs {first}");
            }
        }
    }

    fn uniform_usize(rng: &mut RunRng, n: usize) -> usize {
        (crate::rng::uniform(rng) * n as f64) as usize % n
    }

    #[test]
    fn path_reaches_an_opposite_orientation_target_exactly() {
        // det(a^T b) < 0 forces the long way round; the path must
        // still land on b entrywise.
        let a = basis(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = basis(3, 2, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(alignment_determinant(&a, &b).unwrap() < 0.0);
        let path = geodesic_path(&a, &b, 0.05).unwrap();
        assert!(path.first().max_abs_diff(&a) < 1e-8);
        assert!(path.last().max_abs_diff(&b) < 1e-8);
        for f in path.frames() {
            assert!(f.orthonormality_error() < ORTHONORMAL_TOL);
        }
    }

    #[test]
    fn orient_match_flips_a_reversed_line() {
        let target = basis(2, 1, &[-1.0, 0.0]);
        let fixed = orient_match(&e1(), &target).unwrap();
        assert!(fixed.max_abs_diff(&e1()) < 1e-15);
    }

    #[test]
    fn orient_match_keeps_orthogonal_target() {
        // Zero determinant is left alone.
        let fixed = orient_match(&e1(), &e2()).unwrap();
        assert_eq!(fixed, e2());
    }

    #[test]
    fn orient_match_is_idempotent_and_preserves_alignment_magnitude() {
        let mut rng = seeded(5);
        for _ in 0..50 {
            let cur = random_basis(5, 2, &mut rng).unwrap();
            let tgt = random_basis(5, 2, &mut rng).unwrap();
            let det_before = alignment_determinant(&cur, &tgt).unwrap();
            let fixed = orient_match(&cur, &tgt).unwrap();
            let det_after = alignment_determinant(&cur, &fixed).unwrap();
            assert!(det_after >= 0.0);
            assert!((det_after.abs() - det_before.abs()).abs() < 1e-12);
            let again = orient_match(&cur, &fixed).unwrap();
            assert_eq!(again, fixed);
        }
    }

    #[test]
    fn random_basis_is_reproducible_and_valid() {
        let mut r1 = seeded(77);
        let mut r2 = seeded(77);
        let a = random_basis(6, 2, &mut r1).unwrap();
        let b = random_basis(6, 2, &mut r2).unwrap();
        assert_eq!(a, b);
        assert!(a.orthonormality_error() < ORTHONORMAL_TOL);
    }

    #[test]
    fn random_basis_coordinates_are_centered() {
        let mut rng = seeded(13);
        let n = 10_000;
        let mut sums = [0.0f64; 5];
        for _ in 0..n {
            let b = random_basis(5, 1, &mut rng).unwrap();
            for (s, v) in sums.iter_mut().zip(b.column(0)) {
                *s += v;
            }
        }
        // Coordinates of a Haar line have mean 0 and variance 1/5.
        let tol = 4.0 * (1.0 / 5.0f64).sqrt() / (n as f64).sqrt();
        for s in sums {
            assert!((s / n as f64).abs() < tol);
        }
    }

    #[test]
    fn blend_endpoints() {
        let mut rng = seeded(2);
        let cur = random_basis(4, 2, &mut rng).unwrap();
        let rnd = random_basis(4, 2, &mut rng).unwrap();
        let at_zero = linear_blend(&cur, &rnd, 0.0).unwrap();
        assert!(at_zero.max_abs_diff(&cur) < 1e-12);
        let at_one = linear_blend(&cur, &rnd, 1.0).unwrap();
        assert!(at_one.max_abs_diff(&orthonormalize(rnd.matrix()).unwrap()) < 1e-12);
    }

    #[test]
    fn blend_halfway_between_axes() {
        let got = linear_blend(&e1(), &e2(), 0.5).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert!(got.max_abs_diff(&basis(2, 1, &[s, s])) < 1e-12);
    }

    #[test]
    fn blend_of_opposite_lines_is_degenerate() {
        let minus_e1 = basis(2, 1, &[-1.0, 0.0]);
        match linear_blend(&e1(), &minus_e1, 0.5) {
            Err(Error::Degenerate(_)) => {}
            other => panic!("expected degenerate blend, got {other:?}"),
        }
    }

    #[test]
    fn blend_rejects_out_of_range_alpha() {
        assert!(linear_blend(&e1(), &e2(), 1.5).is_err());
        assert!(linear_blend(&e1(), &e2(), -0.1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn orthonormalize_output_is_orthonormal(
            seed in any::<u64>(),
            p in 2usize..=8,
            d in 1usize..=2,
        ) {
            prop_assume!(d < p);
            let mut rng = seeded(seed);
            let mut m = Matrix::zeros(p, d);
            for c in 0..d {
                for v in m.col_mut(c) {
                    *v = 5.0 * (uniform(&mut rng) - 0.5);
                }
            }
            match orthonormalize(&m) {
                Ok(b) => prop_assert!(b.orthonormality_error() < 1e-10),
                Err(Error::Degenerate(_)) => {}
                Err(e) => prop_assert!(false, "unexpected error {e:?}"),
            }
        }

        #[test]
        fn distance_is_a_symmetric_pseudometric(
            seed in any::<u64>(),
            p in 2usize..=6,
            d in 1usize..=2,
        ) {
            prop_assume!(d < p);
            let mut rng = seeded(seed);
            let a = random_basis(p, d, &mut rng).unwrap();
            let b = random_basis(p, d, &mut rng).unwrap();
            let ab = geodesic_distance(&a, &b).unwrap();
            let ba = geodesic_distance(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!(geodesic_distance(&a, &a).unwrap() < 1e-6);
        }

        #[test]
        fn paths_preserve_the_basis_invariant(
            seed in any::<u64>(),
            p in 3usize..=6,
            d in 1usize..=2,
        ) {
            let mut rng = seeded(seed);
            let a = random_basis(p, d, &mut rng).unwrap();
            let b = random_basis(p, d, &mut rng).unwrap();
            let path = geodesic_path(&a, &b, 0.1).unwrap();
            for f in path.frames() {
                prop_assert!(f.orthonormality_error() < ORTHONORMAL_TOL);
            }
        }
    }
}
