//! SO(3)/SE(3) primitives for rod kinematics.
//!
//! Rotations are stored as full 3x3 matrices because both the mismatch cost
//! and the network input encoding consume the directors (columns) directly.
//! Twists are ordered `(angular, linear)`, matching the strain layout
//! `(kappa, nu)` of the rod.

use nalgebra::{Matrix3, Vector3};
use std::ops::Mul;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this rotation angle the Rodrigues coefficients are evaluated by
/// their Taylor series. Closed forms such as `(t - sin t) / t^3` lose
/// roughly `eps / t^2` relative accuracy, so the series (kept to the t^10
/// term) is used well past the point where it is merely "small angle".
const SERIES_ANGLE: f64 = 0.1;

/// Tolerance on `|R^T R - I|_F` beyond which a rotation counts as drifted.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// `v^`, the skew matrix with `hat(v) * w == v x w`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]; reads the strictly-lower entries `(m32, m13, m21)`.
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// An element of SO(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Validates orthonormality and orientation against [`ORTHONORMAL_TOL`].
    pub fn new(m: Mat3) -> Option<Self> {
        let r = Rotation(m);
        (r.orthonormality_error() <= ORTHONORMAL_TOL
            && (m.determinant() - 1.0).abs() <= ORTHONORMAL_TOL)
            .then_some(r)
    }

    /// Wraps a matrix without checking it. Used for measured frames, which
    /// may carry small sensor-level deviations from orthonormality.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    /// Rotation from directors `d1` and `d3`, with `d2 = d3 x d1`.
    /// No re-orthonormalization is applied.
    pub fn from_directors_unchecked(d1: &Vec3, d3: &Vec3) -> Self {
        let d2 = d3.cross(d1);
        Rotation(Mat3::from_columns(&[*d1, d2, *d3]))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn director(&self, i: usize) -> Vec3 {
        self.0.column(i).into_owned()
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// `|R^T R - I|_F`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).norm()
    }

    /// Nearest rotation in the Frobenius sense (polar factor of the SVD).
    pub fn renormalized(&self) -> Self {
        let svd = self.0.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Rotation(r)
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// An element of SE(3): material frame plus centerline position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub position: Vec3,
}

impl Pose {
    pub fn new(rotation: Rotation, position: Vec3) -> Self {
        Pose { rotation, position }
    }

    pub fn identity() -> Self {
        Pose::new(Rotation::identity(), Vec3::zeros())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Pose::new(rt, -(rt * self.position))
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        compose(self, other)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.rotation.matrix().iter().all(|v| v.is_finite())
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        compose(&self, &rhs)
    }
}

/// An element of se(3) in vector form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Twist {
    pub angular: Vec3,
    pub linear: Vec3,
}

impl Twist {
    pub fn new(angular: Vec3, linear: Vec3) -> Self {
        Twist { angular, linear }
    }

    pub fn zero() -> Self {
        Twist::new(Vec3::zeros(), Vec3::zeros())
    }
}

/// `sum_k (-1)^k t^(2k) / (2k + offset)!`, and its derivative divided by `t`.
fn alternating_series(t2: f64, offset: u32) -> (f64, f64) {
    let mut value = 0.0;
    let mut deriv = 0.0;
    let mut power = 1.0; // t^(2k)
    let mut prev_power = 0.0; // t^(2k - 2)
    let mut fact: f64 = (1..=offset).map(f64::from).product();
    for k in 0..6u32 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        if k > 0 {
            let n = 2 * k + offset;
            fact *= f64::from(n - 1) * f64::from(n);
        }
        value += sign * power / fact;
        if k > 0 {
            deriv += sign * f64::from(2 * k) * prev_power / fact;
        }
        prev_power = power;
        power *= t2;
    }
    (value, deriv)
}

/// Rodrigues coefficients `a = sin t / t`, `b = (1 - cos t) / t^2`,
/// `c = (t - sin t) / t^3`, with `da = a'(t) / t` etc.
#[derive(Clone, Copy, Debug)]
struct ExpCoeffs {
    a: f64,
    b: f64,
    c: f64,
    da: f64,
    db: f64,
    dc: f64,
}

impl ExpCoeffs {
    fn new(theta: f64) -> Self {
        if theta < SERIES_ANGLE {
            let t2 = theta * theta;
            let (a, da) = alternating_series(t2, 1);
            let (b, db) = alternating_series(t2, 2);
            let (c, dc) = alternating_series(t2, 3);
            ExpCoeffs { a, b, c, da, db, dc }
        } else {
            let (s, co) = theta.sin_cos();
            let t2 = theta * theta;
            let t3 = t2 * theta;
            let half = (0.5 * theta).sin();
            let one_minus_cos = 2.0 * half * half;
            let a = s / theta;
            let b = one_minus_cos / t2;
            let c = (theta - s) / t3;
            let da = (theta * co - s) / t3;
            let db = (theta * s - 2.0 * one_minus_cos) / (t2 * t2);
            let dc = one_minus_cos / (t2 * t2) - 3.0 * (theta - s) / (t3 * t2);
            ExpCoeffs { a, b, c, da, db, dc }
        }
    }
}

/// Closed-form `exp(h * omega^)` (Rodrigues).
pub fn exp_so3(omega: &Vec3, h: f64) -> Rotation {
    let phi = omega * h;
    let k = ExpCoeffs::new(phi.norm());
    let w = hat(&phi);
    Rotation(Mat3::identity() + w * k.a + w * w * k.b)
}

/// Closed-form `exp(h * xi^)` on SE(3).
pub fn exp_se3(xi: &Twist, h: f64) -> Pose {
    let (r, p) = exp_se3_parts(&(xi.angular * h), &(xi.linear * h));
    Pose::new(Rotation(r), p)
}

/// Rotation and translation of `exp` for the already scaled pair
/// `(phi, rho) = (h * angular, h * linear)`.
pub(crate) fn exp_se3_parts(phi: &Vec3, rho: &Vec3) -> (Mat3, Vec3) {
    let k = ExpCoeffs::new(phi.norm());
    let w = hat(phi);
    let w2 = w * w;
    let r = Mat3::identity() + w * k.a + w2 * k.b;
    let v = Mat3::identity() + w * k.b + w2 * k.c;
    (r, v * rho)
}

/// Reverse-mode derivative of [`exp_se3_parts`].
///
/// Given the gradient of a scalar with respect to the rotation entries and
/// the translation of `exp((phi, rho)^)`, returns its gradient with respect
/// to `phi` and `rho`.
pub(crate) fn exp_se3_pullback(
    phi: &Vec3,
    rho: &Vec3,
    grad_rot: &Mat3,
    grad_pos: &Vec3,
) -> (Vec3, Vec3) {
    let k = ExpCoeffs::new(phi.norm());
    let w = hat(phi);
    let w2 = w * w;
    let wt = w.transpose();

    let v = Mat3::identity() + w * k.b + w2 * k.c;
    let grad_rho = v.transpose() * grad_pos;

    // Scalar sensitivities to the three coefficients.
    let w_rho = w * rho;
    let bar_a = grad_rot.dot(&w);
    let bar_b = grad_rot.dot(&w2) + grad_pos.dot(&w_rho);
    let bar_c = grad_pos.dot(&(w * w_rho));

    // Sensitivity to the entries of W at fixed coefficients.
    let g_rho = grad_pos * rho.transpose();
    let m = grad_rot * k.a
        + (grad_rot * wt + wt * grad_rot) * k.b
        + g_rho * k.b
        + (grad_pos * w_rho.transpose() + wt * g_rho) * k.c;

    let grad_phi = vee(&(m - m.transpose())) + phi * (bar_a * k.da + bar_b * k.db + bar_c * k.dc);
    (grad_phi, grad_rho)
}

/// `a * b`: rotation `Ra Rb`, position `Ra xb + xa`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose::new(a.rotation * b.rotation, a.rotation * b.position + a.position)
}

/// One summand of the measurement mismatch cost:
/// `|x_p - x_m|^2 / L0^2 + |Q_p - Q_m|_F^2 / 8`.
pub fn pose_mismatch(p: &Pose, m: &Pose, length: f64) -> f64 {
    let dx = p.position - m.position;
    let dq = p.rotation.matrix() - m.rotation.matrix();
    dx.norm_squared() / (length * length) + dq.norm_squared() / 8.0
}
