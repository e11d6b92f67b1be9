//! The morphological descriptor: number of non-degenerate critical points of the
//! height function `s ↦ v·p(s)` along the discrete centerline.
//!
//! A critical point sits where consecutive link tangents project with opposite
//! signs onto `v`. The crossing between links `i` and `i + 1` is attributed to
//! joint `i + 1`, the first link carrying the new sign. Tangents with
//! `|v·t_i| ≤ eps_tan` are treated as zeros: a run of zeros counts once if the
//! signs on either side differ, it is attributed to the first zero, and the
//! direction is reported as non-generic. A crossing at joint `j` is degenerate
//! when the dimensionless curvature projection `|v·κ_j| L` is at most `eps_deg`.

pub mod lattice;

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::{Error, Result, RobotModel, Shape, Vec3};

pub const DEFAULT_EPS_TAN: f64 = 1e-10;
pub const DEFAULT_EPS_DEG: f64 = 1e-8;

/// Unit projection direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction(Vec3);

impl Direction {
    /// Normalises `v`; rejects zero or non-finite vectors.
    pub fn new(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid(
                "direction",
                "must be a finite non-zero vector",
            ));
        }
        let u = v / n;
        // second pass absorbs the rounding of the first division
        Ok(Direction(u / u.norm()))
    }

    pub fn vector(&self) -> &Vec3 {
        &self.0
    }

    pub fn neg(&self) -> Direction {
        Direction(-self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub eps_tan: f64,
    pub eps_deg: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            eps_tan: DEFAULT_EPS_TAN,
            eps_deg: DEFAULT_EPS_DEG,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorseResult {
    pub direction: Direction,
    /// Morse number: critical joints that are not degenerate.
    pub count: usize,
    pub critical_joints: Vec<usize>,
    pub degenerate_flags: Vec<bool>,
    /// False when some tangent is orthogonal to the direction within `eps_tan`.
    pub generic: bool,
}

impl MorseResult {
    pub fn label(&self) -> String {
        classify(self)
    }

    /// Joints that count toward the Morse number.
    pub fn non_degenerate_joints(&self) -> impl Iterator<Item = usize> + '_ {
        self.critical_joints
            .iter()
            .zip(&self.degenerate_flags)
            .filter(|(_, d)| !**d)
            .map(|(j, _)| *j)
    }
}

pub fn morse_number(shape: &Shape, v: &Direction, thresholds: Thresholds) -> MorseResult {
    let dir = v.vector();
    let total = shape.total_length();
    let mut generic = true;
    let mut critical_joints = Vec::new();
    let mut degenerate_flags = Vec::new();
    let mut last: Option<(usize, bool)> = None;
    for (j, t) in shape.tangents.iter().enumerate() {
        let d = dir.dot(t);
        if d.abs() <= thresholds.eps_tan {
            generic = false;
            continue;
        }
        let positive = d > 0.0;
        if let Some((p, was_positive)) = last {
            if was_positive != positive {
                let joint = p + 1;
                let bend = dir.dot(shape.curvature(joint)) * total;
                critical_joints.push(joint);
                degenerate_flags.push(bend.abs() <= thresholds.eps_deg);
            }
        }
        last = Some((j, positive));
    }
    let count = degenerate_flags.iter().filter(|d| !**d).count();
    MorseResult {
        direction: *v,
        count,
        critical_joints,
        degenerate_flags,
        generic,
    }
}

/// `t̄_0`, the base tangent of the reference state.
pub fn direction_initial(model: &RobotModel) -> Direction {
    Direction::new(model.ref_frames()[0].t).expect("reference tangents are unit vectors")
}

/// Unit vector orthogonal to the distal tangent inside the plane spanned by
/// `base_tangent` and the distal tangent, oriented toward `base_tangent`.
///
/// When the two tangents are parallel the plane is undefined and the
/// orthogonal completion built from the least-aligned world axis is returned.
pub fn direction_distal_orthogonal(shape: &Shape, base_tangent: &Vec3) -> Direction {
    let td = shape
        .tangents
        .last()
        .expect("shape has at least one link")
        .normalize();
    let w = base_tangent - td * td.dot(base_tangent);
    let v = if w.norm() > 1e-9 {
        w.normalize()
    } else {
        lattice::orthonormal_complement(&td).0
    };
    let v = (v - td * td.dot(&v)).normalize();
    Direction(v)
}

/// Ranking used by the spherical search: higher count, then generic, then
/// smaller polar angle, then smaller azimuth.
fn better(a: &MorseResult, b: &MorseResult) -> bool {
    let by_count = a.count.cmp(&b.count).then(a.generic.cmp(&b.generic));
    match by_count {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => {
            let (pa, aa) = lattice::spherical_angles(a.direction.vector());
            let (pb, ab) = lattice::spherical_angles(b.direction.vector());
            (pa, aa) < (pb, ab)
        }
    }
}

fn best_of(shape: &Shape, candidates: &[Vec3], thresholds: Thresholds) -> Option<MorseResult> {
    let results: Vec<MorseResult> = candidates
        .par_iter()
        .map(|v| morse_number(shape, &Direction(*v), thresholds))
        .collect();
    results
        .into_iter()
        .reduce(|best, r| if better(&r, &best) { r } else { best })
}

/// Spherical search for the direction maximising the Morse number.
///
/// Scans an `n_samples` Fibonacci lattice on the upper hemisphere (the count is
/// invariant under `v → −v`), then a local lattice at a tenth of the pitch
/// around the best point. Extra `seeds` (e.g. the other strategies' directions)
/// join the comparison so the result is never worse than any of them.
pub fn direction_max_search_seeded(
    shape: &Shape,
    n_samples: usize,
    seeds: &[Direction],
    thresholds: Thresholds,
) -> Result<(Direction, MorseResult)> {
    if n_samples < 32 {
        return Err(Error::invalid("n_samples", format!("{n_samples} < 32")));
    }
    let mut coarse = lattice::hemisphere(n_samples);
    coarse.extend(seeds.iter().map(|s| lattice::canonical(s.vector())));
    let best = best_of(shape, &coarse, thresholds).expect("non-empty lattice");
    let pitch = lattice::hemisphere_pitch(n_samples);
    let fine_pitch = pitch / 10.0;
    let m = ((std::f64::consts::PI * pitch * pitch) / (fine_pitch * fine_pitch)).round() as usize;
    let local: Vec<Vec3> = lattice::cap(best.direction.vector(), pitch, m)
        .iter()
        .map(lattice::canonical)
        .collect();
    let refined = match best_of(shape, &local, thresholds) {
        Some(r) if better(&r, &best) => r,
        _ => best,
    };
    Ok((refined.direction, refined))
}

pub fn direction_max_search(shape: &Shape, n_samples: usize) -> Result<(Direction, MorseResult)> {
    direction_max_search_seeded(shape, n_samples, &[], Thresholds::default())
}

/// `0 → J`, `1 → C`, `2 → S`, `k → M<k>`; `?` marks a non-generic direction.
pub fn classify(result: &MorseResult) -> String {
    let base = match result.count {
        0 => "J".to_string(),
        1 => "C".to_string(),
        2 => "S".to_string(),
        k => format!("M{k}"),
    };
    if result.generic {
        base
    } else {
        base + "?"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_kinematics, Configuration, Frame};

    fn planar(angles: &[f64]) -> Shape {
        let n = angles.len();
        let model = RobotModel::uniform(
            n,
            1.0,
            Frame::new(Vec3::z(), Vec3::x()).unwrap(),
            Vec3::repeat(1.0),
            vec![],
        )
        .unwrap();
        let theta =
            Configuration::new(angles.iter().map(|a| Vec3::new(0.0, *a, 0.0)).collect()).unwrap();
        forward_kinematics(&model, &theta).unwrap()
    }

    fn z() -> Direction {
        Direction::new(Vec3::z()).unwrap()
    }

    fn result(count: usize, generic: bool) -> MorseResult {
        MorseResult {
            direction: z(),
            count,
            critical_joints: vec![],
            degenerate_flags: vec![],
            generic,
        }
    }

    #[test]
    fn straight_has_no_critical_points() {
        let r = morse_number(&planar(&[0.0; 10]), &z(), Thresholds::default());
        assert_eq!(r.count, 0);
        assert!(r.generic);
        assert_eq!(classify(&r), "J");
    }

    #[test]
    fn arc_crosses_once() {
        let r = morse_number(&planar(&[0.02; 100]), &z(), Thresholds::default());
        assert_eq!(r.count, 1);
        assert_eq!(r.critical_joints, vec![78]);
        assert_eq!(r.degenerate_flags, vec![false]);
        assert_eq!(classify(&r), "C");
    }

    #[test]
    fn s_curve_crosses_twice() {
        let mut angles = vec![0.04; 50];
        angles.extend(vec![-0.04; 50]);
        let r = morse_number(&planar(&angles), &z(), Thresholds::default());
        assert_eq!(r.count, 2);
        assert_eq!(classify(&r), "S");
        let flipped = morse_number(&planar(&angles), &z().neg(), Thresholds::default());
        assert_eq!(flipped.critical_joints, r.critical_joints);
    }

    #[test]
    fn zero_run_counts_once_and_marks_non_generic() {
        // tangents: z, x, x, -z  => one crossing through the zero run
        let s = Shape::from_tangents(
            vec![Vec3::z(), Vec3::x(), Vec3::x(), -Vec3::z()],
            vec![1.0; 4],
        );
        let r = morse_number(&s, &z(), Thresholds::default());
        assert_eq!(r.count, 1);
        assert_eq!(r.critical_joints, vec![1]);
        assert!(!r.generic);
        assert_eq!(classify(&r), "C?");
        // same sign on both sides of the run: no crossing
        let s = Shape::from_tangents(vec![Vec3::z(), Vec3::x(), Vec3::z()], vec![1.0; 3]);
        let r = morse_number(&s, &z(), Thresholds::default());
        assert_eq!(r.count, 0);
        assert!(!r.generic);
    }

    #[test]
    fn flat_crossing_is_degenerate() {
        let a = Vec3::new(1.0, 0.0, 1e-12).normalize();
        let b = Vec3::new(1.0, 0.0, -1e-12).normalize();
        let s = Shape::from_tangents(vec![a, b], vec![1.0, 1.0]);
        let t = Thresholds {
            eps_tan: 1e-13,
            eps_deg: 1e-8,
        };
        let r = morse_number(&s, &z(), t);
        assert_eq!(r.critical_joints, vec![1]);
        assert_eq!(r.degenerate_flags, vec![true]);
        assert_eq!(r.count, 0);
    }

    #[test]
    fn labels() {
        assert_eq!(classify(&result(0, true)), "J");
        assert_eq!(classify(&result(1, true)), "C");
        assert_eq!(classify(&result(2, true)), "S");
        assert_eq!(classify(&result(3, true)), "M3");
        assert_eq!(classify(&result(2, false)), "S?");
    }

    #[test]
    fn initial_direction_follows_model() {
        let f = Frame::new(Vec3::z(), Vec3::x()).unwrap();
        let m = RobotModel::uniform(4, 1.0, f, Vec3::repeat(1.0), vec![]).unwrap();
        assert_eq!(*direction_initial(&m).vector(), Vec3::z());
        let r = crate::model::exp_so3(&Vec3::new(0.3, 0.2, -0.4)).unwrap();
        let d = direction_initial(&m.rotated(&r).unwrap());
        assert!((d.vector() - r * Vec3::z()).norm() < 1e-12);
        assert!((d.vector().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distal_orthogonal_cases() {
        let straight = planar(&[0.0; 5]);
        let d = direction_distal_orthogonal(&straight, &Vec3::z());
        assert_eq!(*d.vector(), Vec3::x());
        // quarter circle: distal tangent is x, so the answer is the base tangent
        let quarter = planar(&[std::f64::consts::FRAC_PI_2 / 10.0; 10]);
        let d = direction_distal_orthogonal(&quarter, &Vec3::z());
        assert!((d.vector() - Vec3::z()).norm() < 1e-12);
        let bent = planar(&[0.3, -0.1, 0.25, 0.4]);
        let d = direction_distal_orthogonal(&bent, &Vec3::z());
        assert!(d.vector().dot(bent.tangents.last().unwrap()).abs() <= 1e-12);
        assert!(d.vector().dot(&Vec3::z()) >= 0.0);
    }

    #[test]
    fn max_search_on_straight_returns_tie_break() {
        let (d, r) = direction_max_search(&planar(&[0.0; 6]), 64).unwrap();
        assert_eq!(r.count, 0);
        // every direction ties; the smallest polar angle wins
        let first = lattice::hemisphere(64)[0];
        let (p, _) = lattice::spherical_angles(d.vector());
        assert!(p <= lattice::spherical_angles(&first).0 + 1e-12);
    }

    #[test]
    fn max_search_dominates_lattice() {
        let mut angles = vec![0.04; 50];
        angles.extend(vec![-0.04; 50]);
        let s = planar(&angles);
        let (_, best) = direction_max_search(&s, 128).unwrap();
        assert_eq!(best.count, 2);
        for v in lattice::hemisphere(128) {
            assert!(
                morse_number(&s, &Direction::new(v).unwrap(), Thresholds::default()).count
                    <= best.count
            );
        }
        assert!(direction_max_search(&s, 16).is_err());
    }

    #[test]
    fn direction_rejects_zero() {
        assert!(Direction::new(Vec3::zeros()).is_err());
        let d = Direction::new(Vec3::new(3.0, 4.0, 0.0)).unwrap();
        assert!((d.vector().norm() - 1.0).abs() <= 1e-15);
    }
}
