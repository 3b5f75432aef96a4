//! Rotation helpers shared by the controller, reward and metrics.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

pub type Vec3 = Vector3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// Rotation vector (axis times angle) of `R_aᵀ R_b`, i.e. the rotation that
/// takes attitude `a` onto attitude `b`, expressed in the frame of `a`.
pub fn rotation_error(a: &Quat, b: &Quat) -> Vec3 {
    (a.inverse() * b).scaled_axis()
}

/// `trace(R_aᵀ R_b)`.
pub fn relative_trace(a: &Quat, b: &Quat) -> f64 {
    let ra = a.to_rotation_matrix();
    let rb = b.to_rotation_matrix();
    (ra.matrix().transpose() * rb.matrix()).trace()
}

/// Unitless attitude error `3 − trace(R_aᵀ R_b)`, equal to `2 − 2cos(ω)`.
pub fn trace_attitude_error(a: &Quat, b: &Quat) -> f64 {
    3.0 - relative_trace(a, b)
}

/// Minimum rotation angle between two attitudes, in `[0, π]`.
pub fn geodesic_angle(a: &Quat, b: &Quat) -> f64 {
    let c = ((relative_trace(a, b) - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos()
}

/// Level attitude with the given heading.
pub fn yaw_attitude(yaw: f64) -> Quat {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
}

/// Attitude whose body z-axis is `z_axis` (unit) and whose heading is as
/// close as possible to `yaw`.
pub fn attitude_from_z_and_yaw(z_axis: &Vec3, yaw: f64) -> Quat {
    let heading = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
    let mut y_axis = z_axis.cross(&heading);
    let n = y_axis.norm();
    if n < 1e-9 {
        // Thrust axis horizontal along the heading; pick any orthogonal y.
        let alt = Vec3::new(-yaw.sin(), yaw.cos(), 0.0);
        y_axis = alt - z_axis * z_axis.dot(&alt);
        y_axis /= y_axis.norm();
    } else {
        y_axis /= n;
    }
    let x_axis = y_axis.cross(z_axis);
    let m = Matrix3::from_columns(&[x_axis, y_axis, *z_axis]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

/// Roll and pitch magnitude test: angle between body z and world z.
pub fn tilt_angle(q: &Quat) -> f64 {
    let z = q * Vec3::z();
    z.z.clamp(-1.0, 1.0).acos()
}
