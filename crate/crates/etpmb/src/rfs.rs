//! Core random-finite-set density types: Gaussians, gamma rate priors,
//! extended-target states, Bernoulli components, Poisson intensities and the
//! Poisson multi-Bernoulli (PMB) density built from them.
//!
//! All types are immutable values and safe to clone across threads.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Index of the first extent-radius slot in the spatial state vector.
///
/// The spatial state is laid out as `[x, y, psi, vx, vy, psi_dot, f_1..f_N]`:
/// planar center, heading, their rates, then the extent radii at the
/// support angles.
pub const KINEMATIC_DIM: usize = 6;

/// Slot indices into the spatial state vector.
pub const SLOT_X: usize = 0;
pub const SLOT_Y: usize = 1;
pub const SLOT_HEADING: usize = 2;
pub const SLOT_VX: usize = 3;
pub const SLOT_VY: usize = 4;
pub const SLOT_TURN_RATE: usize = 5;

/// Eigenvalue floor used when conditioning covariance matrices.
pub const COV_JITTER: f64 = 1e-9;

/// Opaque track identifier, unique within one PMB density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrackId(pub u64);

impl std::fmt::Display for TrackId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A Gaussian density over a real vector, the workhorse of the whole filter.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianDensity {
    /// Builds a density, symmetrizing the covariance and adding jitter when
    /// the smallest eigenvalue falls below [`COV_JITTER`]. Long chains of
    /// extent updates accumulate asymmetry, so every covariance produced by
    /// an update or fusion goes through here.
    pub fn conditioned(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        assert_eq!(
            mean.len(),
            cov.nrows(),
            "mean and covariance dimensions disagree"
        );
        let sym = (&cov + cov.transpose()) * 0.5;
        let min_eig = sym
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        let cov = if min_eig < COV_JITTER {
            // Shift the spectrum so the smallest eigenvalue clears the floor.
            let bump = COV_JITTER + (-min_eig).max(0.0);
            &sym + DMatrix::identity(sym.nrows(), sym.ncols()) * bump
        } else {
            sym
        };
        Self { mean, cov }
    }

    /// Builds a density from parts already known to be symmetric PSD.
    pub fn new_unchecked(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Gamma density with shape `alpha` and rate `beta`; the conjugate prior for
/// the Poisson measurement rate of an extended target.
#[derive(Debug, Clone, Copy)]
pub struct GammaDensity {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaDensity {
    pub fn new(alpha: f64, beta: f64) -> Self {
        assert!(alpha > 0.0 && beta > 0.0, "gamma parameters must be positive");
        Self { alpha, beta }
    }
}

/// Mean of a gamma density, used as the point estimate of the measurement
/// rate when reporting and when evaluating the missed-detection factor in
/// point-estimate mode.
pub fn gamma_mean(g: &GammaDensity) -> f64 {
    g.alpha / g.beta
}

/// State of a single extended target: gamma measurement-rate density plus a
/// Gaussian over the spatial state (center, heading, rates, extent radii).
#[derive(Debug, Clone)]
pub struct EtState {
    pub rate: GammaDensity,
    pub spatial: GaussianDensity,
}

impl EtState {
    /// Number of extent support points encoded in the spatial state.
    pub fn extent_dim(&self) -> usize {
        self.spatial.dim() - KINEMATIC_DIM
    }
}

/// Bernoulli component of a PMB: a target that exists with probability `r`
/// and has state density `state` if it does.
#[derive(Debug, Clone)]
pub struct BernoulliComponent {
    pub r: f64,
    pub state: EtState,
    pub track_id: TrackId,
}

/// One weighted component of a Poisson intensity. The rate prior rides along
/// so that targets detected for the first time inherit a gamma prior.
#[derive(Debug, Clone)]
pub struct PoissonComponent {
    pub weight: f64,
    pub spatial: GaussianDensity,
    pub rate_prior: GammaDensity,
}

/// Poisson point-process intensity for undetected targets, represented as a
/// non-normalized Gaussian mixture.
#[derive(Debug, Clone, Default)]
pub struct PoissonIntensity {
    pub components: Vec<PoissonComponent>,
}

impl PoissonIntensity {
    pub fn empty() -> Self {
        Self { components: Vec::new() }
    }

    /// Total mass of the intensity (expected number of undetected targets).
    pub fn mass(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Evaluates the intensity at a spatial point (marginalized over rate).
    pub fn eval_spatial(&self, x: &DVector<f64>) -> Result<f64> {
        let mut v = 0.0;
        for c in &self.components {
            v += c.weight * gaussian_logpdf(x, &c.spatial)?.exp();
        }
        Ok(v)
    }

    /// Collapses the mixture to a single component by moment matching.
    /// Returns `None` for an empty or zero-mass intensity.
    pub fn moment_matched(&self) -> Option<PoissonComponent> {
        let mass = self.mass();
        if self.components.is_empty() || mass <= 0.0 {
            return None;
        }
        let dim = self.components[0].spatial.dim();
        let mut mean = DVector::zeros(dim);
        for c in &self.components {
            mean += &c.spatial.mean * (c.weight / mass);
        }
        let mut cov = DMatrix::zeros(dim, dim);
        for c in &self.components {
            let d = &c.spatial.mean - &mean;
            cov += (&c.spatial.cov + &d * d.transpose()) * (c.weight / mass);
        }
        // Match mean and variance of the gamma mixture as well.
        let e: f64 = self
            .components
            .iter()
            .map(|c| c.weight / mass * gamma_mean(&c.rate_prior))
            .sum();
        let second: f64 = self
            .components
            .iter()
            .map(|c| {
                let m = gamma_mean(&c.rate_prior);
                let v = c.rate_prior.alpha / (c.rate_prior.beta * c.rate_prior.beta);
                c.weight / mass * (v + m * m)
            })
            .sum();
        let var = (second - e * e).max(1e-12);
        Some(PoissonComponent {
            weight: mass,
            spatial: GaussianDensity::conditioned(mean, cov),
            rate_prior: GammaDensity::new(e * e / var, e / var),
        })
    }
}

/// Poisson multi-Bernoulli density: a PPP for undetected targets plus a list
/// of Bernoulli tracks for targets detected at least once.
#[derive(Debug, Clone, Default)]
pub struct PmbDensity {
    pub ppp: PoissonIntensity,
    pub bernoullis: Vec<BernoulliComponent>,
}

impl PmbDensity {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Expected number of targets: sum of existence probabilities plus the
    /// PPP mass.
    pub fn expected_cardinality(&self) -> f64 {
        self.bernoullis.iter().map(|b| b.r).sum::<f64>() + self.ppp.mass()
    }

    /// Smallest track id not yet in use; new tracks count up from here.
    pub fn next_track_id(&self) -> u64 {
        self.bernoullis
            .iter()
            .map(|b| b.track_id.0 + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn assert_unique_ids(&self) {
        let mut ids: Vec<u64> = self.bernoullis.iter().map(|b| b.track_id.0).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), self.bernoullis.len(), "duplicate track ids");
    }
}

/// Log-density of a Gaussian at `x`.
///
/// Fails with a condition-number diagnostic when the covariance cannot be
/// Cholesky-factorized.
pub fn gaussian_logpdf(x: &DVector<f64>, g: &GaussianDensity) -> Result<f64> {
    if x.len() != g.mean.len() {
        return Err(Error::DimensionMismatch {
            context: "gaussian_logpdf",
            expected: g.mean.len(),
            got: x.len(),
        });
    }
    let chol = g.cov.clone().cholesky().ok_or_else(|| Error::SingularMatrix {
        context: "gaussian_logpdf",
        condition: condition_estimate(&g.cov),
    })?;
    let d = x - &g.mean;
    let solved = chol.solve(&d);
    let maha = d.dot(&solved);
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let k = x.len() as f64;
    Ok(-0.5 * (k * (2.0 * std::f64::consts::PI).ln() + log_det + maha))
}

/// Ratio of extreme eigenvalue magnitudes, reported in singularity errors.
pub(crate) fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Two-dimensional marginal of an extended-target state over the center
/// position slots, used by the set metric and by data-association gating.
pub fn marginal_center(e: &EtState) -> GaussianDensity {
    let mean = DVector::from_column_slice(&[
        e.spatial.mean[SLOT_X],
        e.spatial.mean[SLOT_Y],
    ]);
    let cov = e.spatial.cov.view((0, 0), (2, 2)).into_owned();
    GaussianDensity::new_unchecked(mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gaussian_1d(mean: f64, var: f64) -> GaussianDensity {
        GaussianDensity::new_unchecked(
            DVector::from_column_slice(&[mean]),
            DMatrix::from_element(1, 1, var),
        )
    }

    #[test]
    fn logpdf_standard_normal_at_zero() {
        let g = gaussian_1d(0.0, 1.0);
        let v = gaussian_logpdf(&DVector::from_column_slice(&[0.0]), &g).unwrap();
        assert_relative_eq!(v, -0.9189385, epsilon = 1e-6);
    }

    #[test]
    fn logpdf_at_mean_general_dim() {
        for d in [1usize, 3, 7] {
            let g = GaussianDensity::new_unchecked(DVector::zeros(d), DMatrix::identity(d, d));
            let v = gaussian_logpdf(&DVector::zeros(d), &g).unwrap();
            assert_relative_eq!(
                v,
                -(d as f64 / 2.0) * (2.0 * std::f64::consts::PI).ln(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn logpdf_scaled_1d() {
        let g = gaussian_1d(0.0, 4.0);
        let v = gaussian_logpdf(&DVector::from_column_slice(&[2.0]), &g).unwrap();
        assert_relative_eq!(v, -0.9189385 - 0.5 * 4.0f64.ln() - 0.5, epsilon = 1e-6);
    }

    #[test]
    fn logpdf_singular_covariance_errors() {
        let g = GaussianDensity::new_unchecked(DVector::zeros(2), DMatrix::zeros(2, 2));
        let err = gaussian_logpdf(&DVector::zeros(2), &g).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { .. }));
    }

    #[test]
    fn logpdf_integrates_to_one_2d() {
        // Midpoint quadrature over a wide grid for a couple of random-ish
        // densities; checks normalization to 1e-2.
        let cases = [
            (DVector::from_column_slice(&[0.3, -0.2]), [1.0, 0.3, 0.3, 0.8]),
            (DVector::from_column_slice(&[-1.0, 0.5]), [2.0, -0.5, -0.5, 1.5]),
        ];
        for (mean, cov) in cases {
            let g = GaussianDensity::new_unchecked(
                mean,
                DMatrix::from_row_slice(2, 2, &cov),
            );
            let (lo, hi, n) = (-12.0, 12.0, 240);
            let h = (hi - lo) / n as f64;
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let x = DVector::from_column_slice(&[
                        lo + (i as f64 + 0.5) * h,
                        lo + (j as f64 + 0.5) * h,
                    ]);
                    total += gaussian_logpdf(&x, &g).unwrap().exp() * h * h;
                }
            }
            assert_relative_eq!(total, 1.0, epsilon = 1e-2);
        }
    }

    #[test]
    fn gamma_mean_examples() {
        assert_relative_eq!(gamma_mean(&GammaDensity::new(10.0, 5.0)), 2.0);
        assert_relative_eq!(gamma_mean(&GammaDensity::new(1.0, 1.0)), 1.0);
        assert_relative_eq!(gamma_mean(&GammaDensity::new(15.0, 5.5)), 2.7272727, epsilon = 1e-6);
    }

    #[test]
    fn conditioned_fixes_asymmetry_and_indefiniteness() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.3, 1.0]);
        let g = GaussianDensity::conditioned(DVector::zeros(2), cov);
        assert_relative_eq!(g.cov[(0, 1)], g.cov[(1, 0)], epsilon = 1e-15);

        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let g = GaussianDensity::conditioned(DVector::zeros(2), indefinite);
        let min_eig = g
            .cov
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(min_eig >= -COV_JITTER);
    }

    #[test]
    fn marginal_center_identity_cov() {
        let mut mean = DVector::zeros(26);
        mean[0] = 1.0;
        mean[1] = 2.0;
        let e = EtState {
            rate: GammaDensity::new(5.0, 1.0),
            spatial: GaussianDensity::new_unchecked(mean, DMatrix::identity(26, 26)),
        };
        let m = marginal_center(&e);
        assert_eq!(m.mean.as_slice(), &[1.0, 2.0]);
        assert_eq!(m.cov, DMatrix::identity(2, 2));
    }

    #[test]
    fn marginal_center_block_extraction() {
        let mut cov = DMatrix::identity(8, 8);
        cov[(0, 0)] = 2.0;
        cov[(0, 1)] = 1.0;
        cov[(1, 0)] = 1.0;
        cov[(1, 1)] = 2.0;
        let mut mean = DVector::zeros(8);
        mean[0] = 3.0;
        mean[1] = -4.0;
        let e = EtState {
            rate: GammaDensity::new(5.0, 1.0),
            spatial: GaussianDensity::new_unchecked(mean, cov),
        };
        let m = marginal_center(&e);
        assert_eq!(m.mean.as_slice(), &[3.0, -4.0]);
        assert_eq!(m.cov, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn moment_matching_preserves_mass_and_mean() {
        let comp = |w: f64, m: f64| PoissonComponent {
            weight: w,
            spatial: gaussian_1d(m, 1.0),
            rate_prior: GammaDensity::new(5.0, 1.0),
        };
        let intensity = PoissonIntensity {
            components: vec![comp(0.4, 0.0), comp(0.6, 2.0)],
        };
        let m = intensity.moment_matched().unwrap();
        assert_relative_eq!(m.weight, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.spatial.mean[0], 1.2, epsilon = 1e-12);
        // Scatter term: 0.4*(1 + 1.44) + 0.6*(1 + 0.64) = 1.96
        assert_relative_eq!(m.spatial.cov[(0, 0)], 1.96, epsilon = 1e-9);
        assert_relative_eq!(gamma_mean(&m.rate_prior), 5.0, epsilon = 1e-9);
    }
}
