use nalgebra::{Matrix3, Vector3};

use crate::constants::MU0_OVER_4PI;
use crate::error::{Error, Result};

/// Micrometres to metres.
pub const UM: f64 = 1e-6;

/// Point-dipole field (T) of `moment` (J/T) at `displacement` (m) from the dipole.
pub fn dipolar_field(moment: Vector3<f64>, displacement: Vector3<f64>) -> Result<Vector3<f64>> {
    let r = displacement.norm();
    if !(r > 0.0) {
        return Err(Error::ZeroDisplacement);
    }
    let n = displacement / r;
    Ok((n * (3.0 * n.dot(&moment)) - moment) * (MU0_OVER_4PI / (r * r * r)))
}

/// `(3 (a.r)^2 / r^2 - 1) / r^3` for a displacement in um, in um^-3.
///
/// Multiplied by `mu0/4pi * m * 1e18` this is the field along `a` of a moment
/// `m a` at displacement `r`.
#[inline]
pub(crate) fn projected_kernel(axis: &Vector3<f64>, r: [f64; 3]) -> f64 {
    let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    let ar = axis[0] * r[0] + axis[1] * r[1] + axis[2] * r[2];
    (3.0 * ar * ar / r2 - 1.0) / (r2 * r2.sqrt())
}

/// Converts a kernel value in um^-3 to tesla for a moment `moment` (J/T).
pub(crate) fn kernel_to_tesla(moment: f64) -> f64 {
    MU0_OVER_4PI * moment / (UM * UM * UM)
}

/// `ln(a + sqrt(a^2 + q))` with `q = b^2 + c^2`, stable for negative `a`.
fn log_sum(a: f64, q: f64, r: f64) -> f64 {
    if a >= 0.0 {
        (a + r).ln()
    } else {
        (q / (r - a)).ln()
    }
}

/// Integral over the box `[lo, hi]` of `(3 r r^T - r^2 I) / r^5`, with `r`
/// running from the point `p` to the box (dimensionless).
///
/// Equivalently, the field tensor at `p` of the box uniformly magnetized,
/// up to `mu0/4pi`. The point must not lie on the box surface.
pub fn box_field_tensor(lo: [f64; 3], hi: [f64; 3], p: [f64; 3]) -> Matrix3<f64> {
    let mut t = Matrix3::zeros();
    for a in 0..2 {
        let x = if a == 0 { lo[0] } else { hi[0] } - p[0];
        for b in 0..2 {
            let y = if b == 0 { lo[1] } else { hi[1] } - p[1];
            for c in 0..2 {
                let z = if c == 0 { lo[2] } else { hi[2] } - p[2];
                let s = if (a + b + c) % 2 == 0 { 1.0 } else { -1.0 };
                let (x2, y2, z2) = (x * x, y * y, z * z);
                let r = (x2 + y2 + z2).sqrt();
                t[(0, 0)] += s * (y * z / (x * r)).atan();
                t[(1, 1)] += s * (x * z / (y * r)).atan();
                t[(2, 2)] += s * (x * y / (z * r)).atan();
                t[(0, 1)] -= s * log_sum(z, x2 + y2, r);
                t[(0, 2)] -= s * log_sum(y, x2 + z2, r);
                t[(1, 2)] -= s * log_sum(x, y2 + z2, r);
            }
        }
    }
    t[(1, 0)] = t[(0, 1)];
    t[(2, 0)] = t[(0, 2)];
    t[(2, 1)] = t[(1, 2)];
    t
}

/// `a^T T a` for [`box_field_tensor`], computing only what the axis needs.
pub(crate) fn box_projected(lo: [f64; 3], hi: [f64; 3], p: [f64; 3], axis: &Vector3<f64>) -> f64 {
    if axis[0] == 0.0 && axis[1] == 0.0 {
        let mut acc = 0.0;
        for (a, xa) in [lo[0], hi[0]].into_iter().enumerate() {
            let x = xa - p[0];
            for (b, yb) in [lo[1], hi[1]].into_iter().enumerate() {
                let y = yb - p[1];
                for (c, zc) in [lo[2], hi[2]].into_iter().enumerate() {
                    let z = zc - p[2];
                    let r = (x * x + y * y + z * z).sqrt();
                    let s = if (a + b + c) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += s * (x * y / (z * r)).atan();
                }
            }
        }
        return acc * axis[2] * axis[2];
    }
    let t = box_field_tensor(lo, hi, p);
    (axis.transpose() * t * axis)[(0, 0)]
}
