//! Ground-truth world: rectangular vehicles on constant-velocity paths and
//! sector-FOV Lidar-style sensors producing ray-cast detections plus
//! uniform Poisson clutter.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::ekf::{rotation, MotionParams, SensorPose};
use crate::filter::SensorView;
use crate::sector::Sector;

/// A rectangular ground-truth vehicle.
#[derive(Debug, Clone)]
pub struct TruthTarget {
    pub center: Vector2<f64>,
    pub heading: f64,
    pub velocity: Vector2<f64>,
    pub turn_rate: f64,
    pub length: f64,
    pub width: f64,
    pub birth_step: usize,
    /// First step at which the target no longer exists.
    pub death_step: usize,
}

impl TruthTarget {
    pub fn alive(&self, step: usize) -> bool {
        step >= self.birth_step && step < self.death_step
    }

    /// Rectangle corners in the global frame, counter-clockwise.
    pub fn corners(&self) -> [Vector2<f64>; 4] {
        let r = rotation(self.heading);
        let half = [
            Vector2::new(self.length / 2.0, self.width / 2.0),
            Vector2::new(-self.length / 2.0, self.width / 2.0),
            Vector2::new(-self.length / 2.0, -self.width / 2.0),
            Vector2::new(self.length / 2.0, -self.width / 2.0),
        ];
        [
            self.center + r * half[3],
            self.center + r * half[0],
            self.center + r * half[1],
            self.center + r * half[2],
        ]
    }
}

/// Axis-aligned box on which clutter is uniform.
#[derive(Debug, Clone)]
pub struct ClutterRegion {
    pub min: Vector2<f64>,
    pub max: Vector2<f64>,
}

impl ClutterRegion {
    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    /// Uniform density value inside the region.
    pub fn density(&self) -> f64 {
        1.0 / self.area()
    }
}

/// Full description of one sensor: pose, ray fan, range, and clutter model.
#[derive(Debug, Clone)]
pub struct SensorModel {
    pub pose: SensorPose,
    pub opening_angle: f64,
    pub angular_resolution: f64,
    pub max_range: f64,
    pub clutter_rate: f64,
    pub clutter_region: ClutterRegion,
}

impl SensorModel {
    pub fn fov(&self) -> Sector {
        Sector {
            origin: self.pose.position,
            orientation: self.pose.orientation,
            opening: self.opening_angle,
            max_range: self.max_range,
        }
    }

    pub fn view(&self) -> SensorView {
        SensorView { pose: self.pose.clone(), fov: self.fov() }
    }
}

/// Advances a truth target by one sampling interval (noiseless kinematics).
pub fn step_truth(t: &TruthTarget, dt: f64) -> TruthTarget {
    let mut out = t.clone();
    out.center += t.velocity * dt;
    out.heading += t.turn_rate * dt;
    out
}

/// Advances a truth target with process noise drawn from the motion model,
/// for scenarios where the truth should not follow the filter model
/// exactly.
pub fn step_truth_noisy(t: &TruthTarget, mp: &MotionParams, rng: &mut impl Rng) -> TruthTarget {
    let mut out = step_truth(t, mp.t);
    let eig = mp.kinematic_w.clone().symmetric_eigen();
    // Sample w = V sqrt(Lambda) z with z standard normal.
    let mut w = nalgebra::DVector::zeros(6);
    for i in 0..6 {
        let lam = eig.eigenvalues[i].max(0.0).sqrt();
        let z: f64 = StandardNormal.sample(rng);
        w += eig.eigenvectors.column(i) * (lam * z);
    }
    out.center.x += w[0];
    out.center.y += w[1];
    out.heading += w[2];
    out.velocity.x += w[3];
    out.velocity.y += w[4];
    out.turn_rate += w[5];
    out
}

/// One scan worth of target-generated detections.
#[derive(Debug, Clone)]
pub struct Scan {
    /// Noisy detections in the global frame, in ray order.
    pub detections: Vec<Vector2<f64>>,
    /// True number of detections per entry of the target slice, for rate
    /// evaluation.
    pub per_target_counts: Vec<usize>,
}

/// Intersection parameter of a ray with a segment, if any.
fn ray_segment(
    origin: &Vector2<f64>,
    dir: &Vector2<f64>,
    a: &Vector2<f64>,
    b: &Vector2<f64>,
) -> Option<f64> {
    let seg = b - a;
    let denom = dir.x * seg.y - dir.y * seg.x;
    if denom.abs() < 1e-12 {
        return None;
    }
    let ao = a - origin;
    let t = (ao.x * seg.y - ao.y * seg.x) / denom;
    let u = (ao.x * dir.y - ao.y * dir.x) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Casts the sensor's ray fan against all targets. Each ray returns at most
/// one detection: the nearest intersection within range across all targets,
/// so targets occlude each other (and their own far sides). Noise is added
/// after intersection, in global coordinates.
pub fn cast_rays(s: &SensorModel, targets: &[TruthTarget], rng: &mut impl Rng) -> Scan {
    let n_rays = (s.opening_angle / s.angular_resolution + 1e-9).floor() as usize + 1;
    let start = s.pose.orientation - s.opening_angle / 2.0;
    let chol = s
        .pose
        .meas_cov
        .cholesky()
        .map(|c| c.l())
        .unwrap_or_else(Matrix2::zeros);

    let mut detections = Vec::new();
    let mut per_target_counts = vec![0usize; targets.len()];
    let corners: Vec<[Vector2<f64>; 4]> = targets.iter().map(|t| t.corners()).collect();
    for k in 0..n_rays {
        let angle = start + k as f64 * s.angular_resolution;
        let dir = Vector2::new(angle.cos(), angle.sin());
        let mut best: Option<(f64, usize)> = None;
        for (ti, cs) in corners.iter().enumerate() {
            for e in 0..4 {
                let a = &cs[e];
                let b = &cs[(e + 1) % 4];
                if let Some(t) = ray_segment(&s.pose.position, &dir, a, b) {
                    if t <= s.max_range && best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, ti));
                    }
                }
            }
        }
        if let Some((t, ti)) = best {
            let hit = s.pose.position + dir * t;
            let z: Vector2<f64> =
                Vector2::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
            detections.push(hit + chol * z);
            per_target_counts[ti] += 1;
        }
    }
    Scan { detections, per_target_counts }
}

/// Draws a Poisson number of clutter points uniform on the clutter region.
pub fn sample_clutter(s: &SensorModel, rng: &mut impl Rng) -> Vec<Vector2<f64>> {
    if s.clutter_rate <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(s.clutter_rate).expect("positive clutter rate").sample(rng) as usize;
    (0..count)
        .map(|_| {
            Vector2::new(
                rng.gen_range(s.clutter_region.min.x..s.clutter_region.max.x),
                rng.gen_range(s.clutter_region.min.y..s.clutter_region.max.y),
            )
        })
        .collect()
}
