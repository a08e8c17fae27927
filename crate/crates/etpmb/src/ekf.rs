//! Extended-target measurement model and EKF recursion.
//!
//! A detection is explained as the target center plus the extent radius in
//! the direction of the detection. The bearing from the predicted center is
//! used as a point estimate (greedy association of measurement to contour
//! angle). Per-target updates stack all detections of one measurement cell
//! into a single EKF step; the measurement-rate gamma density is updated by
//! conjugacy alongside.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::rfs::{
    gaussian_logpdf, EtState, GammaDensity, GaussianDensity, KINEMATIC_DIM, SLOT_HEADING,
    SLOT_VX, SLOT_X, SLOT_Y,
};

/// Detections closer than this to the predicted center have an undefined
/// bearing and are left out of the update stack.
pub const CENTER_GUARD_RADIUS: f64 = 1e-6;

/// Pose and noise model of one sensor.
#[derive(Debug, Clone)]
pub struct SensorPose {
    /// Sensor position in the global frame (m).
    pub position: Vector2<f64>,
    /// Sensor orientation in the global frame (rad).
    pub orientation: f64,
    /// Measurement noise covariance.
    pub meas_cov: Matrix2<f64>,
}

/// Counter-clockwise planar rotation matrix.
pub fn rotation(alpha: f64) -> Matrix2<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Expresses a global point in the sensor coordinate frame.
pub fn to_sensor_frame(pose: &SensorPose, p_global: &Vector2<f64>) -> Vector2<f64> {
    rotation(-pose.orientation) * (p_global - pose.position)
}

/// Kinematic and extent motion parameters shared by truth and filter.
#[derive(Debug, Clone)]
pub struct MotionParams {
    /// Sampling time (s).
    pub t: f64,
    /// Transition matrix over `[x, y, psi, vx, vy, psi_dot]`.
    pub kinematic_f: DMatrix<f64>,
    /// Process noise over the kinematic slots.
    pub kinematic_w: DMatrix<f64>,
    /// Extent forgetting rate; the extent transition is `exp(-beta T) I`.
    pub beta: f64,
    /// Measurement-rate forgetting factor (> 1 widens the gamma over time).
    pub eta: f64,
    /// Survival probability per step.
    pub p_survival: f64,
}

impl MotionParams {
    /// Constant-velocity model `[[1, T], [0, 1]] (x) I_3` with process noise
    /// `[[T^3/3, T^2/2], [T^2/2, T]] (x) diag(q)`.
    pub fn constant_velocity(t: f64, q: [f64; 3], beta: f64, eta: f64, p_survival: f64) -> Self {
        let mut f = DMatrix::identity(KINEMATIC_DIM, KINEMATIC_DIM);
        let mut w = DMatrix::zeros(KINEMATIC_DIM, KINEMATIC_DIM);
        for i in 0..3 {
            f[(i, i + 3)] = t;
            w[(i, i)] = t.powi(3) / 3.0 * q[i];
            w[(i, i + 3)] = t.powi(2) / 2.0 * q[i];
            w[(i + 3, i)] = t.powi(2) / 2.0 * q[i];
            w[(i + 3, i + 3)] = t * q[i];
        }
        Self { t, kinematic_f: f, kinematic_w: w, beta, eta, p_survival }
    }

    /// Full-state transition matrix including the extent block.
    pub fn full_f(&self, n_extent: usize) -> DMatrix<f64> {
        let dim = KINEMATIC_DIM + n_extent;
        let mut f = DMatrix::zeros(dim, dim);
        f.view_mut((0, 0), (KINEMATIC_DIM, KINEMATIC_DIM))
            .copy_from(&self.kinematic_f);
        let decay = (-self.beta * self.t).exp();
        for i in 0..n_extent {
            f[(KINEMATIC_DIM + i, KINEMATIC_DIM + i)] = decay;
        }
        f
    }

    /// Full-state process noise including the extent block, which reuses the
    /// GP prior covariance scaled by the forgetting rate.
    pub fn full_w(&self, gp: &GpModel) -> DMatrix<f64> {
        let n = gp.n_support();
        let dim = KINEMATIC_DIM + n;
        let mut w = DMatrix::zeros(dim, dim);
        w.view_mut((0, 0), (KINEMATIC_DIM, KINEMATIC_DIM))
            .copy_from(&self.kinematic_w);
        let scale = 1.0 - (-2.0 * self.beta * self.t).exp();
        w.view_mut((KINEMATIC_DIM, KINEMATIC_DIM), (n, n))
            .copy_from(&(&gp.gram * scale));
        w
    }
}

/// Per-detection evaluation of the measurement model at a state mean.
struct MeasEval {
    /// Predicted measurement in the sensor frame.
    h: Vector2<f64>,
    /// Measurement covariance inflated by the extent regression residual.
    r_tilde: Matrix2<f64>,
    /// Jacobian of `h` with respect to the full spatial state.
    jac: DMatrix<f64>,
}

fn eval_measurement(
    state_mean: &DVector<f64>,
    z_sensor: &Vector2<f64>,
    pose: &SensorPose,
    gp: &GpModel,
) -> Result<MeasEval> {
    let n = gp.n_support();
    let dim = KINEMATIC_DIM + n;
    if state_mean.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "measurement model",
            expected: dim,
            got: state_mean.len(),
        });
    }
    let center = Vector2::new(state_mean[SLOT_X], state_mean[SLOT_Y]);
    let heading = state_mean[SLOT_HEADING];
    let radii = state_mean.rows(KINEMATIC_DIM, n).into_owned();

    let to_sensor = rotation(-pose.orientation);
    let center_s = to_sensor * (center - pose.position);
    let v = z_sensor - center_s;
    let dist = v.norm();
    if dist <= CENTER_GUARD_RADIUS {
        return Err(Error::CenterCoincident);
    }
    let theta_s = v.y.atan2(v.x);
    let e = v / dist;
    // Local contour angle: bearing in the sensor frame minus the target
    // heading expressed in the sensor frame.
    let theta_l = theta_s - (heading - pose.orientation);

    let (h_row, k_f) = gp.regress(theta_l);
    let radius = (&h_row * &radii)[(0, 0)];
    let h = center_s + e * radius;
    let r_tilde = pose.meas_cov + e * e.transpose() * k_f;

    // Jacobian blocks. The bearing and the regression row both depend on
    // the center, so three terms chain through the sensor-frame rotation.
    let dh_row = gp.regress_deriv(theta_l);
    let slope = (&dh_row * &radii)[(0, 0)];

    let de_dc = (v * v.transpose()) / dist.powi(3) - Matrix2::identity() / dist;
    let dtheta_dc = nalgebra::RowVector2::new(v.y, -v.x) / (dist * dist);
    let dh_dc = (Matrix2::identity() + de_dc * radius + e * dtheta_dc * slope) * to_sensor;

    let mut jac = DMatrix::zeros(2, dim);
    jac.view_mut((0, SLOT_X), (2, 2)).copy_from(&dh_dc);
    // d theta_l / d psi = -1.
    let dh_dpsi = -e * slope;
    jac[(0, SLOT_HEADING)] = dh_dpsi.x;
    jac[(1, SLOT_HEADING)] = dh_dpsi.y;
    // Velocity slots do not enter the measurement function.
    debug_assert_eq!(SLOT_VX, 3);
    for j in 0..n {
        jac[(0, KINEMATIC_DIM + j)] = e.x * h_row[j];
        jac[(1, KINEMATIC_DIM + j)] = e.y * h_row[j];
    }
    Ok(MeasEval { h, r_tilde, jac })
}

/// Predicted sensor-frame measurement and inflated noise covariance for a
/// detection, both evaluated at the given spatial mean.
pub fn measure_mean_cov(
    state_mean: &DVector<f64>,
    z_sensor: &Vector2<f64>,
    pose: &SensorPose,
    gp: &GpModel,
) -> Result<(Vector2<f64>, Matrix2<f64>)> {
    let ev = eval_measurement(state_mean, z_sensor, pose, gp)?;
    Ok((ev.h, ev.r_tilde))
}

/// Analytic measurement Jacobian (2 x state dim) at the given spatial mean.
pub fn measure_jacobian(
    state_mean: &DVector<f64>,
    z_sensor: &Vector2<f64>,
    pose: &SensorPose,
    gp: &GpModel,
) -> Result<DMatrix<f64>> {
    Ok(eval_measurement(state_mean, z_sensor, pose, gp)?.jac)
}

/// EKF time update: linear kinematics, exponentially forgetting extent, and
/// gamma forgetting on the measurement rate (mean preserving).
pub fn ekf_predict(e: &EtState, mp: &MotionParams, gp: &GpModel) -> EtState {
    let n = gp.n_support();
    let f = mp.full_f(n);
    let w = mp.full_w(gp);
    let mean = &f * &e.spatial.mean;
    let cov = &f * &e.spatial.cov * f.transpose() + w;
    EtState {
        rate: GammaDensity::new(e.rate.alpha / mp.eta, e.rate.beta / mp.eta),
        spatial: GaussianDensity::conditioned(mean, cov),
    }
}

/// Result of a stacked EKF measurement update.
pub struct UpdateOutcome {
    pub state: EtState,
    /// Log predicted likelihood of the detection set: the gamma rate factor
    /// times the per-detection innovation Gaussians.
    pub log_likelihood: f64,
    /// Detections dropped because they fell inside the center guard radius.
    pub n_rejected: usize,
}

/// Gauss-Newton passes used when a track is created from a diffuse prior.
/// With the per-detection bearings frozen at the predicted mean, a pure
/// extent inflation reproduces any detection set exactly, so a single pass
/// anchors the center wherever the prior put it and dumps the innovation
/// into the radii. Re-aiming the bearings at the refined mean breaks that
/// ridge. Established tracks have noise-scale innovations and use a single
/// pass (the plain stacked update).
pub const BIRTH_UPDATE_PASSES: usize = 5;

/// Stacked EKF update of one extended target with a set of detections in the
/// global frame: a single stacked measurement update with block-diagonal
/// per-detection noise, linearized at the predicted mean. The rate
/// parameters advance by `(alpha + |W|, beta + 1)`.
pub fn ekf_update(
    e: &EtState,
    detections: &[Vector2<f64>],
    pose: &SensorPose,
    gp: &GpModel,
) -> Result<UpdateOutcome> {
    ekf_update_with_passes(e, detections, pose, gp, 1)
}

/// Stacked update whose linearization point is refined by up to `passes`
/// Gauss-Newton steps about the prior. The predicted likelihood is always
/// evaluated at the first linearization (the predicted mean), so hypothesis
/// weights do not depend on the pass count; only the posterior mean and
/// covariance do.
pub fn ekf_update_with_passes(
    e: &EtState,
    detections: &[Vector2<f64>],
    pose: &SensorPose,
    gp: &GpModel,
    passes: usize,
) -> Result<UpdateOutcome> {
    if detections.is_empty() {
        return Err(Error::InvalidArgument("ekf_update needs at least one detection"));
    }
    let dim = e.spatial.dim();
    let mut z_sensor = Vec::with_capacity(detections.len());
    let mut n_rejected = 0;
    for z in detections {
        let zs = to_sensor_frame(pose, z);
        match eval_measurement(&e.spatial.mean, &zs, pose, gp) {
            Ok(_) => z_sensor.push(zs),
            Err(Error::CenterCoincident) => n_rejected += 1,
            Err(other) => return Err(other),
        }
    }
    if z_sensor.is_empty() {
        return Err(Error::CenterCoincident);
    }

    let m = z_sensor.len();
    let prior_mean = &e.spatial.mean;
    let p = &e.spatial.cov;
    let mut log_likelihood = None;
    let mut lin_mean = prior_mean.clone();
    let mut mean = prior_mean.clone();
    let mut cov = p.clone();

    for pass in 0..passes.max(1) {
        let mut evals = Vec::with_capacity(m);
        let mut ok = true;
        for zs in &z_sensor {
            match eval_measurement(&lin_mean, zs, pose, gp) {
                Ok(ev) => evals.push(ev),
                // A refined mean can move a detection inside the guard
                // radius; keep the previous pass's result then.
                Err(Error::CenterCoincident) => {
                    ok = false;
                    break;
                }
                Err(other) => return Err(other),
            }
        }
        if !ok {
            break;
        }

        let mut h_stack = DMatrix::zeros(2 * m, dim);
        let mut residual = DVector::zeros(2 * m);
        let mut r_stack = DMatrix::zeros(2 * m, 2 * m);
        for (l, ev) in evals.iter().enumerate() {
            h_stack.view_mut((2 * l, 0), (2, dim)).copy_from(&ev.jac);
            residual[2 * l] = z_sensor[l].x - ev.h.x;
            residual[2 * l + 1] = z_sensor[l].y - ev.h.y;
            r_stack.view_mut((2 * l, 2 * l), (2, 2)).copy_from(&ev.r_tilde);
        }

        let hp = &h_stack * p;
        let s = &hp * h_stack.transpose() + &r_stack;
        let chol = s.clone().cholesky().ok_or_else(|| Error::SingularMatrix {
            context: "innovation covariance",
            condition: crate::rfs::condition_estimate(&s),
        })?;

        if pass == 0 {
            // Predicted likelihood: conjugate gamma factor for the cell
            // size plus the per-detection marginal innovation densities,
            // all at the predicted mean.
            let n_total = detections.len() as f64;
            let (a0, b0) = (e.rate.alpha, e.rate.beta);
            let (a1, b1) = (a0 + n_total, b0 + 1.0);
            let mut ll = ln_gamma(a1) + a0 * b0.ln() - ln_gamma(a0) - a1 * b1.ln();
            for (l, ev) in evals.iter().enumerate() {
                let s_block = s.view((2 * l, 2 * l), (2, 2)).into_owned();
                let marginal = GaussianDensity::new_unchecked(
                    DVector::from_column_slice(&[ev.h.x, ev.h.y]),
                    s_block,
                );
                let z = DVector::from_column_slice(&[z_sensor[l].x, z_sensor[l].y]);
                ll += gaussian_logpdf(&z, &marginal)?;
            }
            log_likelihood = Some(ll);
        }

        // Gauss-Newton step about the prior: the residual is corrected for
        // the offset between the prior mean and the linearization point.
        let offset = &h_stack * (prior_mean - &lin_mean);
        let s_inv_hp = chol.solve(&hp);
        let new_mean = prior_mean + s_inv_hp.transpose() * (&residual - offset);
        cov = p - s_inv_hp.transpose() * &hp;
        let moved = (&new_mean - &lin_mean).amax();
        mean = new_mean.clone();
        lin_mean = new_mean;
        if moved < 1e-9 {
            break;
        }
    }

    let n_total = detections.len() as f64;
    Ok(UpdateOutcome {
        state: EtState {
            rate: GammaDensity::new(e.rate.alpha + n_total, e.rate.beta + 1.0),
            spatial: GaussianDensity::conditioned(mean, cov),
        },
        log_likelihood: log_likelihood.expect("first pass always runs"),
        n_rejected,
    })
}

/// Log gamma function via the Lanczos approximation (g = 7, n = 9), valid
/// for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0, "ln_gamma requires a positive argument");
    if x < 0.5 {
        // Reflection keeps the series in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}
