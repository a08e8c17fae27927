//! Scenario configuration: TOML schema, validation, and conversion into the
//! library's model types.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use etpmb::ekf::{MotionParams, SensorPose};
use etpmb::filter::{FilterModel, QdMode};
use etpmb::fusion::FusionConfig;
use etpmb::gp::{GpHyperParams, GpModel};
use etpmb::metrics::GospaParams;
use etpmb::rfs::{GammaDensity, GaussianDensity, PoissonComponent, PoissonIntensity, KINEMATIC_DIM};
use etpmb::sim::{ClutterRegion, SensorModel, TruthTarget};

/// Which filters run and how their posteriors combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One filter per sensor, no information exchange.
    Independent,
    /// One filter per sensor with periodic posterior fusion.
    Fusion,
    /// A single filter updated sequentially with every sensor's scan.
    Centralized,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Independent => write!(f, "independent"),
            Mode::Fusion => write!(f, "fusion"),
            Mode::Centralized => write!(f, "centralized"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Mode::Independent),
            "fusion" => Ok(Mode::Fusion),
            "centralized" => Ok(Mode::Centralized),
            other => bail!("unknown mode `{other}` (expected independent|fusion|centralized)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSection {
    pub p_survival: f64,
    pub p_detect: f64,
    pub clutter_rate: f64,
    pub sampling_time: f64,
    /// Process noise intensities for position-x, position-y, heading.
    pub process_noise: [f64; 3],
    /// Extent forgetting rate (beta).
    pub extent_forgetting: f64,
    /// Measurement-rate forgetting factor (eta > 1).
    pub rate_forgetting: f64,
    pub existence_threshold: f64,
    pub recycle_threshold: f64,
    pub max_hypotheses: usize,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    #[serde(default = "default_gate")]
    pub gate_mahalanobis: f64,
    #[serde(default = "default_qd_mode")]
    pub qd_mode: String,
}

fn default_gate() -> f64 {
    5.0
}

fn default_qd_mode() -> String {
    "exact".to_owned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSection {
    pub n_support: usize,
    pub sigma_f2: f64,
    pub sigma_r2: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthSection {
    /// Expected newborn targets per step.
    pub rate: f64,
    pub position: [f64; 2],
    pub position_var: f64,
    pub heading_var: f64,
    pub velocity_var: f64,
    pub turn_rate_var: f64,
    /// Prior mean extent radius applied to every support angle.
    pub extent_mean: f64,
    /// Gamma prior (shape, rate) on the measurement rate of new targets.
    pub rate_prior: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSection {
    /// Per-sensor weights; defaults to uniform when omitted.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub recycle_threshold: f64,
    pub kld_gate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSection {
    pub position: [f64; 2],
    pub orientation_deg: f64,
    pub opening_deg: f64,
    pub resolution_deg: f64,
    pub max_range: f64,
    pub noise_var: f64,
    pub clutter_rate: f64,
    /// Clutter box `[min_x, min_y, max_x, max_y]`.
    pub clutter_region: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSection {
    pub center: [f64; 2],
    pub velocity: [f64; 2],
    /// Defaults to the velocity direction when omitted.
    #[serde(default)]
    pub heading_deg: Option<f64>,
    #[serde(default)]
    pub turn_rate: f64,
    pub length: f64,
    pub width: f64,
    #[serde(default)]
    pub birth_step: usize,
    #[serde(default = "default_death")]
    pub death_step: usize,
}

fn default_death() -> usize {
    // Effectively "never dies" while staying representable in TOML (i64).
    1_000_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSection {
    pub gospa_c: f64,
    pub gospa_p: f64,
    pub gospa_alpha: f64,
    /// Contour samples used when rendering estimate polygons.
    #[serde(default = "default_iou_samples")]
    pub iou_samples: usize,
}

fn default_iou_samples() -> usize {
    100
}

/// Complete scenario description as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub steps: usize,
    pub mc_runs: usize,
    pub seed: u64,
    #[serde(default = "default_interval")]
    pub fusion_interval: usize,
    /// Adds motion-model process noise to the ground truth; the default
    /// keeps truth and filter motion models identical (noiseless truth).
    #[serde(default)]
    pub truth_process_noise: bool,
    pub filter: FilterSection,
    pub gp: GpSection,
    pub birth: BirthSection,
    #[serde(default)]
    pub fusion: Option<FusionSection>,
    pub sensors: Vec<SensorSection>,
    pub targets: Vec<TargetSection>,
    pub metrics: MetricsSection,
}

fn default_interval() -> usize {
    1
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            bail!("steps must be at least 1");
        }
        if self.mc_runs == 0 {
            bail!("mc_runs must be at least 1");
        }
        if self.fusion_interval == 0 {
            bail!("fusion_interval must be at least 1");
        }
        if self.sensors.is_empty() {
            bail!("at least one sensor is required");
        }
        if self.mode == Mode::Fusion && self.sensors.len() < 2 {
            bail!("mode = fusion requires at least 2 sensors");
        }
        if self.filter.dbscan_eps <= 0.0 {
            bail!("filter.dbscan_eps must be positive");
        }
        if !(0.0..=1.0).contains(&self.filter.p_detect) {
            bail!("filter.p_detect must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.filter.p_survival) {
            bail!("filter.p_survival must lie in [0, 1]");
        }
        if self.filter.rate_forgetting <= 0.0 {
            bail!("filter.rate_forgetting must be positive");
        }
        if self.gp.n_support < 3 {
            bail!("gp.n_support must be at least 3");
        }
        if let Some(f) = &self.fusion {
            if let Some(w) = &f.weights {
                if w.len() != self.sensors.len() {
                    bail!(
                        "fusion.weights has {} entries but there are {} sensors",
                        w.len(),
                        self.sensors.len()
                    );
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    bail!("fusion.weights must sum to 1 (got {sum})");
                }
            }
        } else if self.mode == Mode::Fusion {
            bail!("mode = fusion requires a [fusion] section");
        }
        for (i, s) in self.sensors.iter().enumerate() {
            if s.opening_deg <= 0.0 || s.opening_deg > 360.0 {
                bail!("sensors[{i}].opening_deg must lie in (0, 360]");
            }
            if s.resolution_deg <= 0.0 {
                bail!("sensors[{i}].resolution_deg must be positive");
            }
            if s.clutter_region[0] >= s.clutter_region[2]
                || s.clutter_region[1] >= s.clutter_region[3]
            {
                bail!("sensors[{i}].clutter_region must be a nonempty box");
            }
        }
        for (i, t) in self.targets.iter().enumerate() {
            if t.length <= 0.0 || t.width <= 0.0 {
                bail!("targets[{i}] must have positive length and width");
            }
            if t.death_step <= t.birth_step {
                bail!("targets[{i}] dies before it is born");
            }
        }
        Ok(())
    }

    pub fn qd_mode(&self) -> Result<QdMode> {
        match self.filter.qd_mode.as_str() {
            "exact" => Ok(QdMode::Exact),
            "point" => Ok(QdMode::PointEstimate),
            other => bail!("filter.qd_mode `{other}` must be `exact` or `point`"),
        }
    }

    pub fn sensor_models(&self) -> Vec<SensorModel> {
        self.sensors
            .iter()
            .map(|s| SensorModel {
                pose: SensorPose {
                    position: Vector2::new(s.position[0], s.position[1]),
                    orientation: s.orientation_deg.to_radians(),
                    meas_cov: Matrix2::identity() * s.noise_var,
                },
                opening_angle: s.opening_deg.to_radians(),
                angular_resolution: s.resolution_deg.to_radians(),
                max_range: s.max_range,
                clutter_rate: s.clutter_rate,
                clutter_region: ClutterRegion {
                    min: Vector2::new(s.clutter_region[0], s.clutter_region[1]),
                    max: Vector2::new(s.clutter_region[2], s.clutter_region[3]),
                },
            })
            .collect()
    }

    pub fn truth_targets(&self) -> Vec<TruthTarget> {
        self.targets
            .iter()
            .map(|t| TruthTarget {
                center: Vector2::new(t.center[0], t.center[1]),
                heading: t
                    .heading_deg
                    .map(|d| d.to_radians())
                    .unwrap_or_else(|| t.velocity[1].atan2(t.velocity[0])),
                velocity: Vector2::new(t.velocity[0], t.velocity[1]),
                turn_rate: t.turn_rate,
                length: t.length,
                width: t.width,
                birth_step: t.birth_step,
                death_step: t.death_step,
            })
            .collect()
    }

    pub fn gp_model(&self) -> Result<Arc<GpModel>> {
        let hp = GpHyperParams::uniform(self.gp.n_support, self.gp.sigma_f2, self.gp.sigma_r2, self.gp.l2);
        Ok(Arc::new(GpModel::new(hp).context("building the GP extent model")?))
    }

    /// Birth intensity with a single component: diffuse kinematics around
    /// the configured position and the GP prior over the extent block.
    pub fn birth_intensity(&self, gp: &GpModel) -> PoissonIntensity {
        let n = gp.n_support();
        let dim = KINEMATIC_DIM + n;
        let mut mean = DVector::zeros(dim);
        mean[0] = self.birth.position[0];
        mean[1] = self.birth.position[1];
        for i in 0..n {
            mean[KINEMATIC_DIM + i] = self.birth.extent_mean;
        }
        let mut cov = DMatrix::zeros(dim, dim);
        cov[(0, 0)] = self.birth.position_var;
        cov[(1, 1)] = self.birth.position_var;
        cov[(2, 2)] = self.birth.heading_var;
        cov[(3, 3)] = self.birth.velocity_var;
        cov[(4, 4)] = self.birth.velocity_var;
        cov[(5, 5)] = self.birth.turn_rate_var;
        cov.view_mut((KINEMATIC_DIM, KINEMATIC_DIM), (n, n)).copy_from(&gp.gram);
        PoissonIntensity {
            components: vec![PoissonComponent {
                weight: self.birth.rate,
                spatial: GaussianDensity::conditioned(mean, cov),
                rate_prior: GammaDensity::new(self.birth.rate_prior[0], self.birth.rate_prior[1]),
            }],
        }
    }

    pub fn filter_model(&self, gp: Arc<GpModel>) -> Result<FilterModel> {
        let birth = self.birth_intensity(&gp);
        let motion = MotionParams::constant_velocity(
            self.filter.sampling_time,
            self.filter.process_noise,
            self.filter.extent_forgetting,
            self.filter.rate_forgetting,
            self.filter.p_survival,
        );
        // Clutter density: uniform over the (first sensor's) clutter box.
        let region = &self.sensors[0].clutter_region;
        let area = (region[2] - region[0]) * (region[3] - region[1]);
        let mut model = FilterModel::with_defaults(birth, motion, gp);
        model.p_detect = self.filter.p_detect;
        model.clutter_rate = self.filter.clutter_rate;
        model.clutter_density = 1.0 / area;
        model.dbscan_eps = self.filter.dbscan_eps;
        model.dbscan_min_pts = self.filter.dbscan_min_pts;
        model.recycle_threshold = self.filter.recycle_threshold;
        model.existence_threshold = self.filter.existence_threshold;
        model.max_hypotheses = self.filter.max_hypotheses;
        model.gate_mahalanobis = self.filter.gate_mahalanobis;
        model.qd_mode = self.qd_mode()?;
        Ok(model)
    }

    pub fn fusion_config(&self) -> FusionConfig {
        let n = self.sensors.len();
        match &self.fusion {
            Some(f) => FusionConfig {
                weights: f.weights.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]),
                recycle_threshold: f.recycle_threshold,
                kld_gate: f.kld_gate,
            },
            None => FusionConfig::uniform(n),
        }
    }

    pub fn gospa_params(&self) -> GospaParams {
        GospaParams::new(self.metrics.gospa_c, self.metrics.gospa_p, self.metrics.gospa_alpha)
    }
}

/// Loads and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading scenario file {}", path.display()))?;
    let cfg: ScenarioConfig = toml::from_str(&text)
        .with_context(|| format!("parsing scenario file {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Serializes a scenario back to TOML.
pub fn emit_config(cfg: &ScenarioConfig) -> Result<String> {
    toml::to_string_pretty(cfg).context("serializing scenario")
}
