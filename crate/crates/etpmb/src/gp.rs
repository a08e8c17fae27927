//! Gaussian-process model of a star-convex target extent.
//!
//! The extent is a radius function of the local (body-frame) angle, sampled
//! at a fixed set of support angles and smoothed by a periodic kernel. This
//! module provides the kernel, the Gram matrix, and the GP regression row
//! that interpolates the radius at an arbitrary angle from the support
//! radii.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

/// Hyper-parameters of the periodic extent kernel plus the support angles.
#[derive(Debug, Clone)]
pub struct GpHyperParams {
    /// Signal variance of the periodic term.
    pub sigma_f2: f64,
    /// Additive radius variance; keeps the Gram matrix well conditioned and
    /// lets the prior describe shapes of different overall size.
    pub sigma_r2: f64,
    /// Squared length scale of the periodic term.
    pub l2: f64,
    /// Support angles in `[0, 2*pi)`, strictly increasing, at least 3.
    pub support_angles: Vec<f64>,
}

impl GpHyperParams {
    /// `n` uniformly spaced support angles with the given kernel parameters.
    pub fn uniform(n: usize, sigma_f2: f64, sigma_r2: f64, l2: f64) -> Self {
        assert!(n >= 3, "need at least 3 support angles");
        let support_angles = (0..n)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
            .collect();
        Self { sigma_f2, sigma_r2, l2, support_angles }
    }

    pub fn n_support(&self) -> usize {
        self.support_angles.len()
    }
}

/// Periodic kernel `sigma_f^2 * exp(-2 sin^2(|u-v|/2) / l^2) + sigma_r^2`.
pub fn kernel_eval(u: f64, v: f64, hp: &GpHyperParams) -> f64 {
    let s = ((u - v) / 2.0).sin();
    hp.sigma_f2 * (-2.0 * s * s / hp.l2).exp() + hp.sigma_r2
}

/// Derivative of the kernel with respect to its first argument.
///
/// Only the periodic term depends on the angle, so the additive radius
/// variance drops out of the derivative.
pub fn kernel_deriv(u: f64, v: f64, hp: &GpHyperParams) -> f64 {
    let periodic = kernel_eval(u, v, hp) - hp.sigma_r2;
    -(1.0 / hp.l2) * (u - v).sin() * periodic
}

/// Precomputed GP quantities shared by every evaluation against one set of
/// hyper-parameters: the Gram matrix over the support angles and its
/// inverse. Built once per filter and shared read-only.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub params: GpHyperParams,
    pub gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

impl GpModel {
    pub fn new(params: GpHyperParams) -> Result<Self> {
        let n = params.n_support();
        if n < 3 {
            return Err(Error::InvalidArgument("need at least 3 support angles"));
        }
        for w in params.support_angles.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidArgument(
                    "support angles must be strictly increasing",
                ));
            }
        }
        let gram = DMatrix::from_fn(n, n, |i, j| {
            kernel_eval(params.support_angles[i], params.support_angles[j], &params)
        });
        let chol = gram.clone().cholesky().ok_or_else(|| Error::SingularMatrix {
            context: "gp gram matrix",
            condition: crate::rfs::condition_estimate(&gram),
        })?;
        let gram_inv = chol.inverse();
        Ok(Self { params, gram, gram_inv })
    }

    pub fn n_support(&self) -> usize {
        self.params.n_support()
    }

    /// Cross-covariance row `K(theta, u)` between one angle and the support
    /// angles.
    pub fn cross_row(&self, theta: f64) -> RowDVector<f64> {
        RowDVector::from_fn(self.n_support(), |_, j| {
            kernel_eval(theta, self.params.support_angles[j], &self.params)
        })
    }

    /// GP regression at local angle `theta`: the row mapping support radii
    /// to the interpolated radius, and the residual variance (clamped at
    /// zero from below).
    pub fn regress(&self, theta: f64) -> (RowDVector<f64>, f64) {
        let cross = self.cross_row(theta);
        let h_row = &cross * &self.gram_inv;
        let k_f = kernel_eval(theta, theta, &self.params) - (&h_row * cross.transpose())[(0, 0)];
        (h_row, k_f.max(0.0))
    }

    /// Derivative of the regression row with respect to the angle.
    pub fn regress_deriv(&self, theta: f64) -> RowDVector<f64> {
        let d_cross = RowDVector::from_fn(self.n_support(), |_, j| {
            kernel_deriv(theta, self.params.support_angles[j], &self.params)
        });
        &d_cross * &self.gram_inv
    }

    /// Interpolated radius at `theta` for a given support-radius vector.
    pub fn radius_at(&self, theta: f64, radii: &DVector<f64>) -> f64 {
        let (h, _) = self.regress(theta);
        (h * radii)[(0, 0)]
    }
}
