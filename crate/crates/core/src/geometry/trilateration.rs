use super::{triangle_area, GeometryError, Tolerance, Vec3};

/// Intersects three spheres centered on a triangle.
///
/// Returns the two mirror-image solutions across the base plane (positive
/// side first, with respect to the normal `(b - a) x (c - a)`), a single
/// in-plane solution when the two would lie within `2 * epsilon` of each
/// other, or nothing when the spheres miss each other by more than the plane
/// slack. Slightly negative squared heights inside the slack are rounding
/// from quantized radii and count as in-plane.
pub fn trilaterate(
    pa: Vec3,
    pb: Vec3,
    pc: Vec3,
    ra: f64,
    rb: f64,
    rc: f64,
    tol: Tolerance,
) -> Result<Vec<Vec3>, GeometryError> {
    let ab = (pb - pa).norm();
    let bc = (pc - pb).norm();
    let ca = (pa - pc).norm();
    let longest = ab.max(bc).max(ca);
    if triangle_area(ab, bc, ca) < tol.epsilon * longest * longest {
        return Err(GeometryError::CollinearBase);
    }

    let ex = (pb - pa) / ab;
    let i = ex.dot(&(pc - pa));
    let ey_raw = pc - pa - ex * i;
    let j = ey_raw.norm();
    let ey = ey_raw / j;
    let ez = ex.cross(&ey);

    let x = (ra * ra - rb * rb + ab * ab) / (2.0 * ab);
    let y = (ra * ra - rc * rc + i * i + j * j) / (2.0 * j) - i * x / j;
    let z2 = ra * ra - x * x - y * y;

    let slack = tol.plane_slack(ra.max(rb).max(rc));
    let foot = pa + ex * x + ey * y;
    if z2 < -slack {
        return Ok(Vec::new());
    }
    if z2 <= tol.epsilon * tol.epsilon {
        return Ok(vec![foot]);
    }
    let z = z2.sqrt();
    Ok(vec![foot + ez * z, foot - ez * z])
}
