//! Fibonacci lattices on the upper unit hemisphere.

use std::f64::consts::PI;

use crate::Vec3;

/// `π (3 − √5)`
pub const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// `n` near-uniform directions with `z > 0`. Point `k` sits at height
/// `1 − (k + ½)/n`, so the polar angle increases strictly with `k`.
pub fn hemisphere(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|k| {
            let z = 1.0 - (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = (k as f64 * GOLDEN_ANGLE) % (2.0 * PI);
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Mean angular spacing of an `n`-point hemisphere lattice.
pub fn hemisphere_pitch(n: usize) -> f64 {
    (2.0 * PI / n as f64).sqrt()
}

/// Vogel spiral of `m` points filling the spherical cap of angular radius
/// `radius` around unit vector `center`.
pub fn cap(center: &Vec3, radius: f64, m: usize) -> Vec<Vec3> {
    let (e1, e2) = orthonormal_complement(center);
    (0..m)
        .map(|j| {
            let rho = radius * ((j as f64 + 0.5) / m as f64).sqrt();
            let psi = j as f64 * GOLDEN_ANGLE;
            (center * rho.cos() + (e1 * psi.cos() + e2 * psi.sin()) * rho.sin()).normalize()
        })
        .collect()
}

/// Two unit vectors completing `a` to a right-handed orthonormal basis. The
/// first is built from the world axis least aligned with `a`.
pub fn orthonormal_complement(a: &Vec3) -> (Vec3, Vec3) {
    let a = a.normalize();
    let abs = a.abs();
    let axis = if abs.x <= abs.y && abs.x <= abs.z {
        Vec3::x()
    } else if abs.y <= abs.z {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let e1 = (axis - a * a.dot(&axis)).normalize();
    let e1 = (e1 - a * a.dot(&e1)).normalize();
    (e1, a.cross(&e1))
}

/// Representative of `±v` on the closed upper hemisphere.
pub fn canonical(v: &Vec3) -> Vec3 {
    let flip = v.z < 0.0 || (v.z == 0.0 && (v.y < 0.0 || (v.y == 0.0 && v.x < 0.0)));
    if flip {
        -v
    } else {
        *v
    }
}

/// `(polar, azimuth)` with azimuth in `[0, 2π)`.
pub fn spherical_angles(v: &Vec3) -> (f64, f64) {
    let polar = v.z.clamp(-1.0, 1.0).acos();
    let mut az = v.y.atan2(v.x);
    if az < 0.0 {
        az += 2.0 * PI;
    }
    (polar, az)
}
