//! Tracking performance metrics: the GOSPA set distance over target
//! centers, contour polygons with intersection-over-union, and Monte-Carlo
//! aggregation.

use nalgebra::{DMatrix, Vector2};

use crate::assignment::{solve, CostMatrix};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::rfs::{EtState, KINEMATIC_DIM, SLOT_HEADING, SLOT_X, SLOT_Y};

/// GOSPA parameters: cutoff `c`, power `p`, cardinality factor `alpha`.
#[derive(Debug, Clone, Copy)]
pub struct GospaParams {
    pub c: f64,
    pub p: f64,
    pub alpha: f64,
}

impl GospaParams {
    pub fn new(c: f64, p: f64, alpha: f64) -> Self {
        assert!(c > 0.0 && p >= 1.0 && alpha > 0.0 && alpha <= 2.0);
        Self { c, p, alpha }
    }
}

/// GOSPA distance plus the optimal pairing it induces.
#[derive(Debug, Clone)]
pub struct GospaResult {
    pub distance: f64,
    /// Matched `(estimate index, truth index)` pairs.
    pub pairs: Vec<(usize, usize)>,
}

/// GOSPA distance between estimated and true target positions: the smaller
/// set is optimally assigned into the larger under the cutoff distance, and
/// the cardinality mismatch pays `c^p / alpha` per unpaired target.
pub fn gospa(
    estimates: &[Vector2<f64>],
    truths: &[Vector2<f64>],
    gp: &GospaParams,
) -> GospaResult {
    let n = estimates.len();
    let m = truths.len();
    let card = (gp.c.powf(gp.p) / gp.alpha) * (n.abs_diff(m)) as f64;
    if n == 0 || m == 0 {
        return GospaResult { distance: card.powf(1.0 / gp.p), pairs: Vec::new() };
    }
    let costs = DMatrix::from_fn(n, m, |i, j| {
        (estimates[i] - truths[j]).norm().min(gp.c).powf(gp.p)
    });
    let assignment = solve(&CostMatrix::new(costs)).expect("finite costs are always feasible");
    GospaResult {
        distance: (assignment.total_cost + card).powf(1.0 / gp.p),
        pairs: assignment.pairs,
    }
}

/// Simple polygon, counter-clockwise vertex order.
#[derive(Debug, Clone)]
pub struct Polygon {
    pub vertices: Vec<Vector2<f64>>,
}

impl Polygon {
    /// Axis-aligned rectangle rotated to a heading, counter-clockwise.
    pub fn rectangle(center: Vector2<f64>, heading: f64, length: f64, width: f64) -> Self {
        let r = crate::ekf::rotation(heading);
        let half = [
            Vector2::new(length / 2.0, -width / 2.0),
            Vector2::new(length / 2.0, width / 2.0),
            Vector2::new(-length / 2.0, width / 2.0),
            Vector2::new(-length / 2.0, -width / 2.0),
        ];
        Polygon { vertices: half.iter().map(|h| center + r * h).collect() }
    }

    /// Shoelace area; positive for counter-clockwise order.
    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        if v.len() < 3 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..v.len() {
            let a = v[i];
            let b = v[(i + 1) % v.len()];
            acc += a.x * b.y - b.x * a.y;
        }
        acc / 2.0
    }
}

/// Samples the posterior mean contour of an extended target as a global
/// frame polygon. Radii are clamped at a small positive floor since the
/// Gaussian posterior does not constrain them positive.
pub fn shape_polygon(e: &EtState, gp: &GpModel, n_angles: usize) -> Polygon {
    assert!(n_angles >= 8, "too few contour samples");
    let center = Vector2::new(e.spatial.mean[SLOT_X], e.spatial.mean[SLOT_Y]);
    let heading = e.spatial.mean[SLOT_HEADING];
    let radii = e.spatial.mean.rows(KINEMATIC_DIM, gp.n_support()).into_owned();
    let vertices = (0..n_angles)
        .map(|k| {
            let local = 2.0 * std::f64::consts::PI * k as f64 / n_angles as f64;
            let r = gp.radius_at(local, &radii).max(0.01);
            let global = heading + local;
            center + Vector2::new(global.cos(), global.sin()) * r
        })
        .collect();
    Polygon { vertices }
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Clips a subject polygon against one half-plane (left of `a -> b`).
fn clip_halfplane(subject: &[Vector2<f64>], a: &Vector2<f64>, b: &Vector2<f64>) -> Vec<Vector2<f64>> {
    let mut out = Vec::with_capacity(subject.len() + 2);
    for i in 0..subject.len() {
        let cur = subject[i];
        let prev = subject[(i + subject.len() - 1) % subject.len()];
        let cur_in = cross(a, b, &cur) >= 0.0;
        let prev_in = cross(a, b, &prev) >= 0.0;
        if cur_in != prev_in {
            // Edge crosses the boundary; add the intersection point.
            let d = cur - prev;
            let n = Vector2::new(-(b.y - a.y), b.x - a.x);
            let denom = d.dot(&n);
            if denom.abs() > 1e-15 {
                let t = (a - prev).dot(&n) / denom;
                out.push(prev + d * t);
            }
        }
        if cur_in {
            out.push(cur);
        }
    }
    out
}

/// Intersection-over-union of a convex truth polygon and an estimated
/// (star-convex) polygon, via half-plane clipping and shoelace areas.
pub fn iou(truth: &Polygon, estimate: &Polygon) -> f64 {
    let a_truth = truth.area().abs();
    let a_est = estimate.area().abs();
    if a_truth <= 0.0 || a_est <= 0.0 {
        return 0.0;
    }
    let mut clipped = estimate.vertices.clone();
    let n = truth.vertices.len();
    for i in 0..n {
        if clipped.len() < 3 {
            return 0.0;
        }
        let a = truth.vertices[i];
        let b = truth.vertices[(i + 1) % n];
        clipped = clip_halfplane(&clipped, &a, &b);
    }
    if clipped.len() < 3 {
        return 0.0;
    }
    let inter = Polygon { vertices: clipped }.area().abs();
    let union = a_truth + a_est - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Per-step mean over runs plus the overall time average.
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub per_step_mean: Vec<f64>,
    pub time_average: f64,
}

/// Averages equal-length per-step series over Monte-Carlo runs.
pub fn aggregate(runs: &[Vec<f64>]) -> Result<Aggregate> {
    if runs.is_empty() {
        return Ok(Aggregate { per_step_mean: Vec::new(), time_average: 0.0 });
    }
    let len = runs[0].len();
    for r in runs {
        if r.len() != len {
            return Err(Error::DimensionMismatch {
                context: "aggregate",
                expected: len,
                got: r.len(),
            });
        }
    }
    let per_step_mean: Vec<f64> = (0..len)
        .map(|k| runs.iter().map(|r| r[k]).sum::<f64>() / runs.len() as f64)
        .collect();
    let time_average = if len == 0 {
        0.0
    } else {
        per_step_mean.iter().sum::<f64>() / len as f64
    };
    Ok(Aggregate { per_step_mean, time_average })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::GpHyperParams;
    use crate::rfs::{GammaDensity, GaussianDensity};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn params() -> GospaParams {
        GospaParams::new(20.0, 2.0, 2.0)
    }

    #[test]
    fn gospa_empty_sets() {
        let r = gospa(&[], &[], &params());
        assert_eq!(r.distance, 0.0);
    }

    #[test]
    fn gospa_single_unmatched_truth() {
        let r = gospa(&[], &[Vector2::new(3.0, 4.0)], &params());
        assert_relative_eq!(r.distance, (400.0f64 / 2.0).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(r.distance, 14.1421356, epsilon = 1e-6);
    }

    #[test]
    fn gospa_single_pair_below_cutoff() {
        let r = gospa(&[Vector2::new(0.0, 0.0)], &[Vector2::new(3.0, 0.0)], &params());
        assert_relative_eq!(r.distance, 3.0, epsilon = 1e-12);
        assert_eq!(r.pairs, vec![(0, 0)]);
    }

    #[test]
    fn gospa_brute_force_oracle_small() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let gp = params();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(0..=4);
            let m = rng.gen_range(0..=4);
            let est: Vec<Vector2<f64>> = (0..n)
                .map(|_| Vector2::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0)))
                .collect();
            let tru: Vec<Vector2<f64>> = (0..m)
                .map(|_| Vector2::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0)))
                .collect();
            let got = gospa(&est, &tru, &gp).distance;
            let want = brute_force_gospa(&est, &tru, &gp);
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    /// Direct enumeration of all injective assignments of the smaller set.
    fn brute_force_gospa(est: &[Vector2<f64>], tru: &[Vector2<f64>], gp: &GospaParams) -> f64 {
        let (small, large, est_small) = if est.len() <= tru.len() {
            (est, tru, true)
        } else {
            (tru, est, false)
        };
        let card = gp.c.powf(gp.p) / gp.alpha * (large.len() - small.len()) as f64;
        if small.is_empty() {
            return card.powf(1.0 / gp.p);
        }
        let idx: Vec<usize> = (0..large.len()).collect();
        let mut best = f64::INFINITY;
        permute(&idx, small.len(), &mut Vec::new(), &mut |pick| {
            let mut acc = 0.0;
            for (i, &j) in pick.iter().enumerate() {
                let d = if est_small {
                    (small[i] - large[j]).norm()
                } else {
                    (large[j] - small[i]).norm()
                };
                acc += d.min(gp.c).powf(gp.p);
            }
            best = best.min(acc);
        });
        (best + card).powf(1.0 / gp.p)
    }

    fn permute(pool: &[usize], k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for &p in pool {
            if !cur.contains(&p) {
                cur.push(p);
                permute(pool, k, cur, f);
                cur.pop();
            }
        }
    }

    #[test]
    fn gospa_is_symmetric_and_triangular_on_samples() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let gp = params();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let sample = |rng: &mut ChaCha8Rng| -> Vec<Vector2<f64>> {
            let n = rng.gen_range(0..=4);
            (0..n)
                .map(|_| Vector2::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0)))
                .collect()
        };
        for _ in 0..100 {
            let a = sample(&mut rng);
            let b = sample(&mut rng);
            let c = sample(&mut rng);
            let dab = gospa(&a, &b, &gp).distance;
            let dba = gospa(&b, &a, &gp).distance;
            assert!((dab - dba).abs() < 1e-9);
            let dac = gospa(&a, &c, &gp).distance;
            let dcb = gospa(&c, &b, &gp).distance;
            assert!(dab <= dac + dcb + 1e-9, "{dab} > {dac} + {dcb}");
        }
    }

    #[test]
    fn rectangle_area_shoelace() {
        let r = Polygon::rectangle(Vector2::new(3.0, -2.0), 0.4, 5.0, 3.0);
        assert_relative_eq!(r.area(), 15.0, epsilon = 1e-12);
    }

    fn unit_circle_state(gp: &GpModel, heading: f64) -> EtState {
        let n = gp.n_support();
        let mut mean = DVector::zeros(KINEMATIC_DIM + n);
        mean[SLOT_HEADING] = heading;
        for i in 0..n {
            mean[KINEMATIC_DIM + i] = 1.0;
        }
        EtState {
            rate: GammaDensity::new(5.0, 1.0),
            spatial: GaussianDensity::new_unchecked(
                mean,
                nalgebra::DMatrix::identity(KINEMATIC_DIM + n, KINEMATIC_DIM + n),
            ),
        }
    }

    #[test]
    fn shape_polygon_unit_radii() {
        let gp = GpModel::new(GpHyperParams::uniform(20, 2.0, 2.0, std::f64::consts::PI / 8.0))
            .unwrap();
        let st = unit_circle_state(&gp, 0.0);
        let poly = shape_polygon(&st, &gp, 20);
        // Sample angles coincide with support angles, so radii interpolate
        // exactly; check the four cardinal vertices.
        assert_relative_eq!(poly.vertices[0].x, 1.0, epsilon = 1e-8);
        assert_relative_eq!(poly.vertices[0].y, 0.0, epsilon = 1e-8);
        assert_relative_eq!(poly.vertices[5].x, 0.0, epsilon = 1e-8);
        assert_relative_eq!(poly.vertices[5].y, 1.0, epsilon = 1e-8);
        assert_relative_eq!(poly.vertices[10].x, -1.0, epsilon = 1e-8);

        // Rotating the target rotates the polygon.
        let rotated = shape_polygon(&unit_circle_state(&gp, std::f64::consts::FRAC_PI_2), &gp, 20);
        assert_relative_eq!(rotated.vertices[0].x, 0.0, epsilon = 1e-8);
        assert_relative_eq!(rotated.vertices[0].y, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn iou_reference_cases() {
        let sq = |cx: f64| Polygon::rectangle(Vector2::new(cx, 0.0), 0.0, 1.0, 1.0);
        assert_relative_eq!(iou(&sq(0.0), &sq(0.0)), 1.0, epsilon = 1e-12);
        assert_relative_eq!(iou(&sq(0.0), &sq(5.0)), 0.0, epsilon = 1e-12);
        assert_relative_eq!(iou(&sq(0.0), &sq(0.5)), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_nested_shrink_is_monotone() {
        let truth = Polygon::rectangle(Vector2::new(0.0, 0.0), 0.0, 4.0, 2.0);
        let mut prev = 0.0;
        for k in 1..=4 {
            let s = k as f64 / 4.0;
            let est = Polygon::rectangle(Vector2::new(0.0, 0.0), 0.0, 4.0 * s, 2.0 * s);
            let v = iou(&truth, &est);
            assert!(v >= prev);
            prev = v;
        }
        assert_relative_eq!(prev, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn aggregate_means() {
        let out = aggregate(&[vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap();
        assert_eq!(out.per_step_mean, vec![2.0, 2.0]);
        assert_relative_eq!(out.time_average, 2.0);

        let single = aggregate(&[vec![4.0, 6.0]]).unwrap();
        assert_eq!(single.per_step_mean, vec![4.0, 6.0]);

        assert!(aggregate(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
