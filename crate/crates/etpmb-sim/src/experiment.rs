//! Experiment orchestration: simulate the ground truth, drive the filters
//! in the configured mode, and collect per-step metrics.

use anyhow::{Context, Result};
use nalgebra::Vector2;
use rayon::prelude::*;

use etpmb::filter::{EtPmbFilter, SensorView};
use etpmb::fusion::{fuse_pmbs, partition_fov, FovPartition, FusionConfig};
use etpmb::metrics::{gospa, iou, shape_polygon, Polygon};
use etpmb::rfs::{gamma_mean, EtState, SLOT_HEADING, SLOT_VX, SLOT_VY, SLOT_X, SLOT_Y};
use etpmb::rng::{stream, Purpose};
use etpmb::sim::{cast_rays, sample_clutter, step_truth, step_truth_noisy, SensorModel, TruthTarget};

use crate::config::{Mode, ScenarioConfig};

/// One reported track at one step.
#[derive(Debug, Clone)]
pub struct EstimateRecord {
    pub track_id: u64,
    pub r: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub rate_mean: f64,
}

/// Metrics of one filter at one step of one run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run: usize,
    pub step: usize,
    pub filter_id: String,
    pub gospa: f64,
    /// Per scenario target: NaN while the target does not exist, otherwise
    /// the IOU of the matched estimate (0 when unmatched).
    pub iou_per_target: Vec<f64>,
    /// Per scenario target: the matched track's posterior mean rate, NaN
    /// when unmatched or not alive.
    pub rate_estimates: Vec<f64>,
    pub estimates: Vec<EstimateRecord>,
}

/// Ground-truth snapshot of one target at one step, with the true
/// per-sensor detection counts for rate evaluation.
#[derive(Debug, Clone)]
pub struct TruthRecord {
    pub run: usize,
    pub step: usize,
    pub target: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub truth: Vec<TruthRecord>,
}

/// Runs every Monte-Carlo run of the scenario. Runs execute in parallel;
/// all randomness is keyed by `(seed, run, sensor, step, purpose)` so the
/// output is independent of scheduling.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let per_run: Vec<(Vec<RunRecord>, Vec<TruthRecord>)> = (0..cfg.mc_runs)
        .into_par_iter()
        .map(|run| run_single(cfg, run))
        .collect::<Result<_>>()?;
    let mut out = ExperimentOutput::default();
    for (records, truth) in per_run {
        out.records.extend(records);
        out.truth.extend(truth);
    }
    Ok(out)
}

struct FilterSlot {
    id: String,
    filter: EtPmbFilter,
}

fn filter_ids(mode: Mode, n_sensors: usize) -> Vec<String> {
    match mode {
        Mode::Independent => (0..n_sensors).map(|s| format!("independent_s{}", s + 1)).collect(),
        Mode::Fusion => (0..n_sensors).map(|s| format!("fusion_s{}", s + 1)).collect(),
        Mode::Centralized => vec!["centralized".to_owned()],
    }
}

fn run_single(cfg: &ScenarioConfig, run: usize) -> Result<(Vec<RunRecord>, Vec<TruthRecord>)> {
    let gp = cfg.gp_model()?;
    let model = cfg.filter_model(gp.clone())?;
    let sensors: Vec<SensorModel> = cfg.sensor_models();
    let views: Vec<SensorView> = sensors.iter().map(|s| s.view()).collect();
    let partition: FovPartition = partition_fov(&sensors.iter().map(|s| s.fov()).collect::<Vec<_>>());
    let fusion_cfg: FusionConfig = cfg.fusion_config();
    let n_targets = cfg.targets.len();

    let mut filters: Vec<FilterSlot> = filter_ids(cfg.mode, sensors.len())
        .into_iter()
        .map(|id| FilterSlot { id, filter: EtPmbFilter::new(model.clone()) })
        .collect();

    // Target states at their birth steps; advanced while alive.
    let initial: Vec<TruthTarget> = cfg.truth_targets();
    let mut current: Vec<TruthTarget> = initial.clone();

    let mut records = Vec::new();
    let mut truth_records = Vec::new();

    for step in 0..cfg.steps {
        // Advance targets that were already alive at the previous step.
        for (i, t) in current.iter_mut().enumerate() {
            if step > t.birth_step && t.alive(step) {
                *t = if cfg.truth_process_noise {
                    let mut rng =
                        stream(cfg.seed, run as u64, 9000 + i as u64, step as u64, Purpose::ProcessNoise);
                    step_truth_noisy(t, &model.motion, &mut rng)
                } else {
                    step_truth(t, model.motion.t)
                };
            }
        }
        let alive: Vec<usize> = (0..n_targets).filter(|&i| current[i].alive(step)).collect();
        let alive_targets: Vec<TruthTarget> = alive.iter().map(|&i| current[i].clone()).collect();

        // One scan per sensor: ray-cast detections plus clutter.
        let mut measurements: Vec<Vec<Vector2<f64>>> = Vec::with_capacity(sensors.len());
        let mut counts: Vec<Vec<usize>> = vec![vec![0; sensors.len()]; n_targets];
        for (s, sensor) in sensors.iter().enumerate() {
            let mut noise_rng =
                stream(cfg.seed, run as u64, s as u64, step as u64, Purpose::MeasurementNoise);
            let scan = cast_rays(sensor, &alive_targets, &mut noise_rng);
            for (ai, &ti) in alive.iter().enumerate() {
                counts[ti][s] = scan.per_target_counts[ai];
            }
            let mut clutter_rng =
                stream(cfg.seed, run as u64, s as u64, step as u64, Purpose::Clutter);
            let mut meas = scan.detections;
            meas.extend(sample_clutter(sensor, &mut clutter_rng));
            measurements.push(meas);
        }

        // Drive the filters.
        match cfg.mode {
            Mode::Independent | Mode::Fusion => {
                for (s, slot) in filters.iter_mut().enumerate() {
                    slot.filter
                        .step(&measurements[s], &views[s])
                        .with_context(|| format!("filter {} step {step} run {run}", slot.id))?;
                }
                if cfg.mode == Mode::Fusion && (step + 1) % cfg.fusion_interval == 0 {
                    let pmbs: Vec<_> = filters.iter().map(|f| f.filter.pmb.clone()).collect();
                    let fused = fuse_pmbs(&pmbs, &fusion_cfg, &partition)
                        .with_context(|| format!("fusion at step {step} run {run}"))?;
                    for (s, slot) in filters.iter_mut().enumerate() {
                        slot.filter.pmb = fused.per_sensor[s].clone();
                    }
                }
            }
            Mode::Centralized => {
                let slot = &mut filters[0];
                slot.filter.predict_step();
                for (s, view) in views.iter().enumerate() {
                    slot.filter
                        .update_step(&measurements[s], view)
                        .with_context(|| format!("centralized update sensor {s} step {step}"))?;
                }
                slot.filter.housekeeping();
            }
        }

        // Metrics for every filter against the alive truth.
        for slot in &filters {
            records.push(evaluate(
                cfg,
                run,
                step,
                &slot.id,
                &slot.filter,
                &current,
                &alive,
                &gp,
            ));
        }
        for &ti in &alive {
            let t = &current[ti];
            truth_records.push(TruthRecord {
                run,
                step,
                target: ti,
                x: t.center.x,
                y: t.center.y,
                heading: t.heading,
                vx: t.velocity.x,
                vy: t.velocity.y,
                counts: counts[ti].clone(),
            });
        }
    }
    Ok((records, truth_records))
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    cfg: &ScenarioConfig,
    run: usize,
    step: usize,
    filter_id: &str,
    filter: &EtPmbFilter,
    current: &[TruthTarget],
    alive: &[usize],
    gp: &etpmb::gp::GpModel,
) -> RunRecord {
    let estimates: Vec<(etpmb::rfs::TrackId, EtState)> = filter.estimates();
    let est_centers: Vec<Vector2<f64>> = estimates
        .iter()
        .map(|(_, e)| Vector2::new(e.spatial.mean[SLOT_X], e.spatial.mean[SLOT_Y]))
        .collect();
    let truth_centers: Vec<Vector2<f64>> = alive.iter().map(|&i| current[i].center).collect();
    let gospa_out = gospa(&est_centers, &truth_centers, &cfg.gospa_params());

    let n_targets = current.len();
    let mut iou_per_target = vec![f64::NAN; n_targets];
    let mut rate_estimates = vec![f64::NAN; n_targets];
    for &ti in alive {
        iou_per_target[ti] = 0.0;
    }
    for &(est_i, truth_j) in &gospa_out.pairs {
        let ti = alive[truth_j];
        let t = &current[ti];
        let rect = Polygon::rectangle(t.center, t.heading, t.length, t.width);
        let poly = shape_polygon(&estimates[est_i].1, gp, cfg.metrics.iou_samples);
        iou_per_target[ti] = iou(&rect, &poly);
        rate_estimates[ti] = gamma_mean(&estimates[est_i].1.rate);
    }

    let estimates = estimates
        .iter()
        .map(|(id, e)| EstimateRecord {
            track_id: id.0,
            r: filter
                .pmb
                .bernoullis
                .iter()
                .find(|b| b.track_id == *id)
                .map(|b| b.r)
                .unwrap_or(f64::NAN),
            x: e.spatial.mean[SLOT_X],
            y: e.spatial.mean[SLOT_Y],
            heading: e.spatial.mean[SLOT_HEADING],
            vx: e.spatial.mean[SLOT_VX],
            vy: e.spatial.mean[SLOT_VY],
            rate_mean: gamma_mean(&e.rate),
        })
        .collect();

    RunRecord {
        run,
        step,
        filter_id: filter_id.to_owned(),
        gospa: gospa_out.distance,
        iou_per_target,
        rate_estimates,
        estimates,
    }
}
