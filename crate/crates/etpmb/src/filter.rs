//! Per-sensor extended-target PMB recursion: prediction, measurement-cell
//! clustering, data-association update with reduction to the single best
//! multi-Bernoulli, recycling, and estimate extraction.

use std::sync::Arc;

use nalgebra::Vector2;

use crate::dbscan::dbscan;
use crate::ekf::{
    ekf_predict, ekf_update_with_passes, MotionParams, SensorPose,
    BIRTH_UPDATE_PASSES,
};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::rfs::{
    gamma_mean, marginal_center, BernoulliComponent, EtState, GammaDensity, PmbDensity,
    PoissonComponent, PoissonIntensity, TrackId,
};
use crate::sector::Sector;

/// How the expected missed-detection factor integrates over the gamma rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdMode {
    /// Closed form under the conjugate prior:
    /// `1 - pD + pD (beta / (beta + 1))^alpha`.
    Exact,
    /// Plug-in at the predicted rate mean: `1 - pD + pD exp(-alpha/beta)`.
    PointEstimate,
}

/// Pose plus field of view of the sensor driving an update.
#[derive(Debug, Clone)]
pub struct SensorView {
    pub pose: SensorPose,
    pub fov: Sector,
}

/// All tuning of one PMB filter instance.
#[derive(Debug, Clone)]
pub struct FilterModel {
    /// Birth intensity added at every prediction.
    pub birth: PoissonIntensity,
    /// Detection probability inside the field of view (zero outside).
    pub p_detect: f64,
    /// Mean number of clutter detections per scan.
    pub clutter_rate: f64,
    /// Spatial clutter density value (uniform over the clutter region).
    pub clutter_density: f64,
    pub motion: MotionParams,
    pub gp: Arc<GpModel>,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// Bernoullis below this existence probability are recycled into the PPP.
    pub recycle_threshold: f64,
    /// Existence threshold for reporting a track.
    pub existence_threshold: f64,
    /// Beam cap on the number of data-association hypotheses.
    pub max_hypotheses: usize,
    pub qd_mode: QdMode,
    /// Mahalanobis gate between a cell centroid and a track's predicted
    /// center marginal.
    pub gate_mahalanobis: f64,
    /// PPP mixture housekeeping: merge radius on the center (m), absolute
    /// prune weight, and component cap.
    pub ppp_merge_distance: f64,
    pub ppp_prune_weight: f64,
    pub ppp_max_components: usize,
}

impl FilterModel {
    pub fn with_defaults(birth: PoissonIntensity, motion: MotionParams, gp: Arc<GpModel>) -> Self {
        Self {
            birth,
            p_detect: 0.99,
            clutter_rate: 2.0,
            clutter_density: 1.0 / (400.0 * 400.0),
            motion,
            gp,
            dbscan_eps: 4.0,
            dbscan_min_pts: 4,
            recycle_threshold: 0.1,
            existence_threshold: 0.5,
            max_hypotheses: 100,
            qd_mode: QdMode::Exact,
            gate_mahalanobis: 5.0,
            ppp_merge_distance: 0.5,
            ppp_prune_weight: 1e-6,
            ppp_max_components: 30,
        }
    }

    fn p_detect_at(&self, fov: &Sector, p: &Vector2<f64>) -> f64 {
        if fov.contains(p) {
            self.p_detect
        } else {
            0.0
        }
    }

    /// Expected missed-detection factor `<f; qD>` for one target.
    pub fn qd_factor(&self, rate: &GammaDensity, p_d: f64) -> f64 {
        let survive = match self.qd_mode {
            QdMode::Exact => (rate.beta / (rate.beta + 1.0)).powf(rate.alpha),
            QdMode::PointEstimate => (-gamma_mean(rate)).exp(),
        };
        1.0 - p_d + p_d * survive
    }
}

/// A group of detections treated as generated by at most one target.
#[derive(Debug, Clone)]
pub struct MeasurementCell {
    pub detections: Vec<Vector2<f64>>,
    pub cell_id: usize,
}

/// Explanation of one cell inside a data-association hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellAssignment {
    /// The cell updates an existing track.
    Track(TrackId),
    /// The cell is explained by the Poisson intensity: a newly detected
    /// target, or (for single-detection cells) possibly clutter.
    NewOrClutter,
}

/// One data-association hypothesis over all cells.
#[derive(Debug, Clone)]
pub struct DaHypothesis {
    /// Normalized log weight.
    pub log_weight: f64,
    /// Per-cell explanation, aligned with the cell list.
    pub assignments: Vec<CellAssignment>,
}

/// PMB prediction: survival-scaled tracks and Poisson components pushed
/// through the motion model, plus fresh birth components.
pub fn predict(pmb: &PmbDensity, model: &FilterModel) -> PmbDensity {
    let p_s = model.motion.p_survival;
    let bernoullis = pmb
        .bernoullis
        .iter()
        .map(|b| BernoulliComponent {
            r: p_s * b.r,
            state: ekf_predict(&b.state, &model.motion, &model.gp),
            track_id: b.track_id,
        })
        .collect();
    let mut components: Vec<PoissonComponent> = pmb
        .ppp
        .components
        .iter()
        .map(|c| {
            let st = ekf_predict(
                &EtState { rate: c.rate_prior, spatial: c.spatial.clone() },
                &model.motion,
                &model.gp,
            );
            PoissonComponent {
                weight: p_s * c.weight,
                spatial: st.spatial,
                rate_prior: st.rate,
            }
        })
        .collect();
    components.extend(model.birth.components.iter().cloned());
    PmbDensity { ppp: PoissonIntensity { components }, bernoullis }
}

/// Clusters a scan into measurement cells with DBSCAN; noise points become
/// singleton cells since they may be clutter or single-return targets.
pub fn cluster(measurements: &[Vector2<f64>], eps: f64, min_pts: usize) -> Vec<MeasurementCell> {
    let labels = dbscan(measurements, eps, min_pts);
    let n_clusters = labels.iter().flatten().max().map_or(0, |&m| m + 1);
    let mut cells: Vec<Vec<Vector2<f64>>> = vec![Vec::new(); n_clusters];
    let mut noise = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        match label {
            Some(c) => cells[*c].push(measurements[i]),
            None => noise.push(vec![measurements[i]]),
        }
    }
    cells.extend(noise);
    cells
        .into_iter()
        .enumerate()
        .map(|(cell_id, detections)| MeasurementCell { detections, cell_id })
        .collect()
}

/// Scores cached for one cell against the predicted density.
struct CellScores {
    /// `ln(kappa + <D; l>)` for singleton cells, `ln <D; l>` otherwise.
    untracked_log_lik: f64,
    /// Bernoulli created when the winning hypothesis explains the cell via
    /// the PPP; `None` when no Poisson component could be updated.
    new_bernoulli: Option<(f64, EtState)>,
    /// Gated existing-track options: `(track index, log likelihood,
    /// posterior state)`.
    track_options: Vec<(usize, f64, EtState)>,
}

fn score_cells(
    pmb: &PmbDensity,
    cells: &[MeasurementCell],
    sensor: &SensorView,
    model: &FilterModel,
) -> Result<(Vec<CellScores>, Vec<f64>)> {
    // Missed-detection factor per predicted track.
    let log_miss: Vec<f64> = pmb
        .bernoullis
        .iter()
        .map(|b| {
            let center = marginal_center(&b.state);
            let p_d = model.p_detect_at(&sensor.fov, &Vector2::new(center.mean[0], center.mean[1]));
            let qd = model.qd_factor(&b.state.rate, p_d);
            (1.0 - b.r + b.r * qd).ln()
        })
        .collect();

    let mut scores = Vec::with_capacity(cells.len());
    for cell in cells {
        let centroid = cell
            .detections
            .iter()
            .fold(Vector2::zeros(), |acc, z| acc + z)
            / cell.detections.len() as f64;

        // Existing tracks within the gate. The gate covariance is the
        // center marginal inflated by the prior contour variance: the cell
        // centroid sits on the visible boundary, not at the center, so the
        // extent scale must enter or every cell of a well-localized track
        // falls outside its own gate.
        let extent_var = model.gp.params.sigma_f2 + model.gp.params.sigma_r2;
        let mut track_options = Vec::new();
        for (ti, b) in pmb.bernoullis.iter().enumerate() {
            let center = marginal_center(&b.state);
            let cm = Vector2::new(center.mean[0], center.mean[1]);
            let p_d = model.p_detect_at(&sensor.fov, &cm);
            if p_d <= 0.0 {
                continue;
            }
            let d = centroid - cm;
            let gate_cov = center.cov.clone() + nalgebra::DMatrix::identity(2, 2) * extent_var;
            let maha2 = match gate_cov.cholesky() {
                Some(chol) => {
                    let dv = nalgebra::DVector::from_column_slice(&[d.x, d.y]);
                    let s = chol.solve(&dv);
                    dv.dot(&s)
                }
                None => f64::INFINITY,
            };
            if maha2.sqrt() >= model.gate_mahalanobis {
                continue;
            }
            match ekf_update_with_passes(
                &b.state,
                &cell.detections,
                &sensor.pose,
                &model.gp,
                BIRTH_UPDATE_PASSES,
            ) {
                Ok(out) => {
                    let log_lik = b.r.max(1e-300).ln() + p_d.ln() + out.log_likelihood;
                    track_options.push((ti, log_lik, out.state));
                }
                Err(Error::CenterCoincident) => continue,
                Err(e) => return Err(e),
            }
        }

        // Poisson intensity: a newly detected target.
        let mut contributions: Vec<(f64, EtState)> = Vec::new();
        for comp in &pmb.ppp.components {
            let cm = Vector2::new(comp.spatial.mean[0], comp.spatial.mean[1]);
            let p_d = model.p_detect_at(&sensor.fov, &cm);
            if p_d <= 0.0 || comp.weight <= 0.0 {
                continue;
            }
            let prior = EtState { rate: comp.rate_prior, spatial: comp.spatial.clone() };
            // New tracks start from a diffuse prior, where the single-pass
            // linearization collapses; refine the birth update.
            match ekf_update_with_passes(
                &prior,
                &cell.detections,
                &sensor.pose,
                &model.gp,
                BIRTH_UPDATE_PASSES,
            ) {
                Ok(out) => {
                    let c = comp.weight.ln() + p_d.ln() + out.log_likelihood;
                    contributions.push((c, out.state));
                }
                Err(Error::CenterCoincident) => continue,
                Err(e) => return Err(e),
            }
        }
        let log_d_l = logsumexp(contributions.iter().map(|(c, _)| *c));
        let best = contributions
            .into_iter()
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let log_kappa = if cell.detections.len() == 1 {
            (model.clutter_rate * model.clutter_density).max(0.0).ln()
        } else {
            f64::NEG_INFINITY
        };
        let untracked_log_lik = log_add(log_kappa, log_d_l);
        let new_bernoulli = best.map(|(_, state)| {
            let r = if cell.detections.len() == 1 {
                // Target versus clutter odds for a single detection.
                (log_d_l - untracked_log_lik).exp()
            } else {
                1.0
            };
            (r, state)
        });
        scores.push(CellScores { untracked_log_lik, new_bernoulli, track_options });
    }
    Ok((scores, log_miss))
}

fn logsumexp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let max = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn log_add(a: f64, b: f64) -> f64 {
    logsumexp([a, b].into_iter())
}

/// Enumerates data-association hypotheses over the cells, beam-capped at
/// `max_hypotheses`, and returns them with normalized log weights in
/// descending order.
pub fn enumerate_hypotheses(
    pmb: &PmbDensity,
    cells: &[MeasurementCell],
    sensor: &SensorView,
    model: &FilterModel,
) -> Result<Vec<DaHypothesis>> {
    assert!(pmb.bernoullis.len() <= 128, "too many tracks for the hypothesis bitmask");
    let (scores, log_miss) = score_cells(pmb, cells, sensor, model)?;

    struct Partial {
        log_w: f64,
        used: u128,
        choices: Vec<CellAssignment>,
    }
    let base: f64 = log_miss.iter().sum();
    let mut beam = vec![Partial { log_w: base, used: 0, choices: Vec::new() }];
    for sc in &scores {
        let mut next = Vec::with_capacity(beam.len() * (1 + sc.track_options.len()));
        for p in &beam {
            let mut choices = p.choices.clone();
            choices.push(CellAssignment::NewOrClutter);
            next.push(Partial {
                log_w: p.log_w + sc.untracked_log_lik,
                used: p.used,
                choices,
            });
            for &(ti, log_lik, _) in &sc.track_options {
                if p.used & (1u128 << ti) != 0 {
                    continue;
                }
                let mut choices = p.choices.clone();
                choices.push(CellAssignment::Track(pmb.bernoullis[ti].track_id));
                next.push(Partial {
                    log_w: p.log_w + log_lik - log_miss[ti],
                    used: p.used | (1u128 << ti),
                    choices,
                });
            }
        }
        next.sort_by(|a, b| b.log_w.partial_cmp(&a.log_w).unwrap());
        next.truncate(model.max_hypotheses.max(1));
        beam = next;
    }

    let norm = logsumexp(beam.iter().map(|p| p.log_w));
    if !norm.is_finite() {
        return Err(Error::NoFeasibleHypothesis(
            "all hypothesis weights vanished (no association and no clutter explanation)",
        ));
    }
    Ok(beam
        .into_iter()
        .map(|p| DaHypothesis { log_weight: p.log_w - norm, assignments: p.choices })
        .collect())
}

/// PMB measurement update: scores data-association hypotheses over the
/// cells, keeps the highest-weight multi-Bernoulli, and scales the Poisson
/// intensity by the missed-detection factor.
pub fn update(
    pmb: &PmbDensity,
    cells: &[MeasurementCell],
    sensor: &SensorView,
    model: &FilterModel,
) -> Result<PmbDensity> {
    let (scores, _) = score_cells(pmb, cells, sensor, model)?;
    let hypotheses = enumerate_hypotheses(pmb, cells, sensor, model)?;
    let winner = &hypotheses[0];

    let mut bernoullis: Vec<BernoulliComponent> = Vec::new();
    let mut updated = vec![false; pmb.bernoullis.len()];
    let mut next_id = pmb.next_track_id();
    for (ci, assignment) in winner.assignments.iter().enumerate() {
        match assignment {
            CellAssignment::Track(id) => {
                let (ti, _, state) = scores[ci]
                    .track_options
                    .iter()
                    .find(|(ti, _, _)| pmb.bernoullis[*ti].track_id == *id)
                    .expect("winning hypothesis references a scored track");
                updated[*ti] = true;
                bernoullis.push(BernoulliComponent {
                    r: 1.0,
                    state: state.clone(),
                    track_id: *id,
                });
            }
            CellAssignment::NewOrClutter => {
                if let Some((r, state)) = &scores[ci].new_bernoulli {
                    if *r > 0.0 {
                        bernoullis.push(BernoulliComponent {
                            r: *r,
                            state: state.clone(),
                            track_id: TrackId(next_id),
                        });
                        next_id += 1;
                    }
                }
            }
        }
    }
    // Tracks not assigned any cell take the missed-detection update.
    for (ti, b) in pmb.bernoullis.iter().enumerate() {
        if updated[ti] {
            continue;
        }
        let center = marginal_center(&b.state);
        let p_d = model.p_detect_at(&sensor.fov, &Vector2::new(center.mean[0], center.mean[1]));
        let qd = model.qd_factor(&b.state.rate, p_d);
        let r = b.r * qd / (1.0 - b.r + b.r * qd);
        bernoullis.push(BernoulliComponent { r, state: b.state.clone(), track_id: b.track_id });
    }

    // Undetected targets stay undetected with probability qD.
    let components = pmb
        .ppp
        .components
        .iter()
        .map(|c| {
            let p_d = model.p_detect_at(
                &sensor.fov,
                &Vector2::new(c.spatial.mean[0], c.spatial.mean[1]),
            );
            PoissonComponent {
                weight: c.weight * model.qd_factor(&c.rate_prior, p_d),
                spatial: c.spatial.clone(),
                rate_prior: c.rate_prior,
            }
        })
        .collect();

    Ok(PmbDensity { ppp: PoissonIntensity { components }, bernoullis })
}

/// Moves Bernoullis with existence below the threshold back into the PPP,
/// preserving the expected cardinality.
pub fn recycle(pmb: &PmbDensity, threshold: f64) -> PmbDensity {
    let mut ppp = pmb.ppp.clone();
    let mut bernoullis = Vec::with_capacity(pmb.bernoullis.len());
    for b in &pmb.bernoullis {
        if b.r < threshold {
            if b.r > 0.0 {
                ppp.components.push(PoissonComponent {
                    weight: b.r,
                    spatial: b.state.spatial.clone(),
                    rate_prior: b.state.rate,
                });
            }
        } else {
            bernoullis.push(b.clone());
        }
    }
    PmbDensity { ppp, bernoullis }
}

/// Tracks whose existence probability strictly exceeds the threshold,
/// reported with their posterior mean state.
pub fn extract_estimates(pmb: &PmbDensity, r_th: f64) -> Vec<(TrackId, EtState)> {
    pmb.bernoullis
        .iter()
        .filter(|b| b.r > r_th)
        .map(|b| (b.track_id, b.state.clone()))
        .collect()
}

/// Mixture housekeeping on the Poisson intensity: merges components whose
/// centers nearly coincide (moment matching preserves mass), prunes
/// negligible weights, and caps the component count.
pub fn reduce_ppp(intensity: &PoissonIntensity, model: &FilterModel) -> PoissonIntensity {
    let mut order: Vec<usize> = (0..intensity.components.len()).collect();
    order.sort_by(|&a, &b| {
        intensity.components[b]
            .weight
            .partial_cmp(&intensity.components[a].weight)
            .unwrap()
    });
    let mut taken = vec![false; intensity.components.len()];
    let mut merged: Vec<PoissonComponent> = Vec::new();
    for &i in &order {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let head = &intensity.components[i];
        let hc = Vector2::new(head.spatial.mean[0], head.spatial.mean[1]);
        let mut group = vec![head.clone()];
        for &j in &order {
            if taken[j] {
                continue;
            }
            let c = &intensity.components[j];
            let cc = Vector2::new(c.spatial.mean[0], c.spatial.mean[1]);
            if (hc - cc).norm() <= model.ppp_merge_distance {
                taken[j] = true;
                group.push(c.clone());
            }
        }
        let combined = PoissonIntensity { components: group };
        if let Some(c) = combined.moment_matched() {
            merged.push(c);
        }
    }
    merged.retain(|c| c.weight >= model.ppp_prune_weight);
    merged.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap());
    merged.truncate(model.ppp_max_components);
    PoissonIntensity { components: merged }
}

/// Convenience driver bundling the per-step recursion for one filter.
#[derive(Debug, Clone)]
pub struct EtPmbFilter {
    pub model: FilterModel,
    pub pmb: PmbDensity,
}

impl EtPmbFilter {
    pub fn new(model: FilterModel) -> Self {
        Self { model, pmb: PmbDensity::empty() }
    }

    pub fn predict_step(&mut self) {
        self.pmb = predict(&self.pmb, &self.model);
    }

    pub fn update_step(&mut self, measurements: &[Vector2<f64>], view: &SensorView) -> Result<()> {
        let cells = cluster(measurements, self.model.dbscan_eps, self.model.dbscan_min_pts);
        self.pmb = update(&self.pmb, &cells, view, &self.model)?;
        Ok(())
    }

    /// PPP reduction and track recycling, run once per time step.
    pub fn housekeeping(&mut self) {
        self.pmb.ppp = reduce_ppp(&self.pmb.ppp, &self.model);
        self.pmb = recycle(&self.pmb, self.model.recycle_threshold);
    }

    /// One full prediction/update cycle against a single sensor.
    pub fn step(&mut self, measurements: &[Vector2<f64>], view: &SensorView) -> Result<()> {
        self.predict_step();
        self.update_step(measurements, view)?;
        self.housekeeping();
        Ok(())
    }

    pub fn estimates(&self) -> Vec<(TrackId, EtState)> {
        extract_estimates(&self.pmb, self.model.existence_threshold)
    }
}
