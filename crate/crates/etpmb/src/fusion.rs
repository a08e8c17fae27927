//! Decentralized fusion of per-sensor PMB posteriors by weighted
//! Kullback-Leibler averaging.
//!
//! The deployment region is partitioned by which sensors cover each point.
//! Within every subregion the sensors' Bernoulli tracks are padded with
//! parts split off the local Poisson intensities until all sides have the
//! same number of components, a minimum-divergence assignment matches the
//! components pairwise, and each matched slot fuses in closed form
//! (geometric mean of Gaussians, the corresponding existence formulas for
//! Bernoulli and Poisson components). Leftover Poisson mass is re-added
//! with the fusion weights so that fusing identical inputs is an identity.
//!
//! Measurement-rate gamma densities are deliberately not fused: rates are
//! sensor-specific, so every sensor keeps its local gamma for each track it
//! contributed, matched through the fusion map.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::assignment::{solve, CostMatrix};
use crate::error::{Error, Result};
use crate::rfs::{
    BernoulliComponent, GammaDensity, GaussianDensity, PmbDensity, PoissonComponent,
    PoissonIntensity, TrackId,
};
use crate::sector::Sector;

/// Weights and thresholds controlling one fusion epoch.
#[derive(Debug, Clone)]
pub struct FusionConfig {
    /// Per-sensor fusion weights, summing to one.
    pub weights: Vec<f64>,
    /// Fused Bernoullis below this existence probability are recycled.
    pub recycle_threshold: f64,
    /// Bernoulli pairs whose symmetric divergence exceeds this fall back to
    /// Poisson-part slots instead of fusing with each other.
    pub kld_gate: f64,
}

impl FusionConfig {
    /// Uniform weights over `n` sensors with default thresholds.
    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
            recycle_threshold: 0.1,
            kld_gate: 50.0,
        }
    }

    fn validate(&self, n_sensors: usize) -> Result<()> {
        if self.weights.len() != n_sensors {
            return Err(Error::InvalidArgument("one fusion weight per sensor"));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.weights.iter().any(|w| *w < 0.0 || *w > 1.0) {
            return Err(Error::InvalidArgument("fusion weights must lie in [0,1] and sum to 1"));
        }
        Ok(())
    }
}

/// Partition of the deployment region by sensor coverage. A point's
/// subregion is the bitmask of sensors whose field of view contains it.
#[derive(Debug, Clone)]
pub struct FovPartition {
    pub sectors: Vec<Sector>,
}

/// Builds the coverage partition for a set of sector fields of view.
pub fn partition_fov(sectors: &[Sector]) -> FovPartition {
    FovPartition { sectors: sectors.to_vec() }
}

impl FovPartition {
    pub fn n_sensors(&self) -> usize {
        self.sectors.len()
    }

    pub fn n_subregions(&self) -> usize {
        1 << self.sectors.len()
    }

    /// Subregion index (coverage bitmask) of a point; 0 means covered by no
    /// sensor.
    pub fn subregion_of(&self, p: &Vector2<f64>) -> usize {
        let mut mask = 0;
        for (i, s) in self.sectors.iter().enumerate() {
            if s.contains(p) {
                mask |= 1 << i;
            }
        }
        mask
    }
}

/// Component counts chosen for one fusion epoch.
#[derive(Debug, Clone)]
pub struct KPlan {
    /// Common number of components per sensor.
    pub k: usize,
    /// Slots per subregion: the maximum Bernoulli count any sensor has
    /// there.
    pub k_per_subregion: Vec<(usize, usize)>,
    /// Poisson parts each sensor must contribute: `K - N_s`.
    pub parts_needed: Vec<usize>,
}

/// Chooses the common component count `K` from per-subregion Bernoulli
/// counts: each subregion contributes the maximum count over sensors.
pub fn determine_k(pmbs: &[&PmbDensity], partition: &FovPartition) -> KPlan {
    let mut per_subregion: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    for (s, pmb) in pmbs.iter().enumerate() {
        for b in &pmb.bernoullis {
            let c = Vector2::new(b.state.spatial.mean[0], b.state.spatial.mean[1]);
            let l = partition.subregion_of(&c);
            per_subregion.entry(l).or_insert_with(|| vec![0; pmbs.len()])[s] += 1;
        }
    }
    let k_per_subregion: Vec<(usize, usize)> = per_subregion
        .iter()
        .map(|(&l, counts)| (l, *counts.iter().max().unwrap()))
        .collect();
    let k: usize = k_per_subregion.iter().map(|(_, kl)| kl).sum();
    let parts_needed = pmbs.iter().map(|p| k - p.bernoullis.len().min(k)).collect();
    KPlan { k, k_per_subregion, parts_needed }
}

/// Splits an intensity into `m` parts whose sum reproduces it exactly:
/// whole components are distributed round-robin when there are enough,
/// otherwise every part carries the full mixture at `1/m` weight.
pub fn split_ppp(ppp: &PoissonIntensity, m: usize) -> Vec<PoissonIntensity> {
    assert!(m >= 1);
    let mut parts = vec![PoissonIntensity::empty(); m];
    if ppp.components.len() >= m {
        for (i, c) in ppp.components.iter().enumerate() {
            parts[i % m].components.push(c.clone());
        }
    } else {
        for part in &mut parts {
            part.components = ppp
                .components
                .iter()
                .map(|c| PoissonComponent {
                    weight: c.weight / m as f64,
                    spatial: c.spatial.clone(),
                    rate_prior: c.rate_prior,
                })
                .collect();
        }
    }
    parts
}

/// Kullback-Leibler divergence `D(a || b)` between Gaussians.
pub fn gaussian_kld(a: &GaussianDensity, b: &GaussianDensity) -> Result<f64> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch { context: "gaussian_kld", expected: d, got: b.dim() });
    }
    let chol_b = b.cov.clone().cholesky().ok_or_else(|| Error::SingularMatrix {
        context: "gaussian_kld",
        condition: crate::rfs::condition_estimate(&b.cov),
    })?;
    let chol_a = a.cov.clone().cholesky().ok_or_else(|| Error::SingularMatrix {
        context: "gaussian_kld",
        condition: crate::rfs::condition_estimate(&a.cov),
    })?;
    let trace = chol_b.solve(&a.cov).trace();
    let dm = &b.mean - &a.mean;
    let maha = dm.dot(&chol_b.solve(&dm));
    let log_det_b = 2.0 * chol_b.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_det_a = 2.0 * chol_a.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(0.5 * (trace + maha - d as f64 + log_det_b - log_det_a))
}

/// Symmetric divergence used as the fusion-map cost.
pub fn symmetric_kld(a: &GaussianDensity, b: &GaussianDensity) -> Result<f64> {
    Ok(0.5 * (gaussian_kld(a, b)? + gaussian_kld(b, a)?))
}

/// Weighted geometric mean of Gaussians (covariance intersection):
/// the fused information matrix is the weighted sum of the inputs', and the
/// log normalization constant of the density product comes along.
pub fn fuse_gaussians(gs: &[&GaussianDensity], w: &[f64]) -> Result<(GaussianDensity, f64)> {
    if gs.is_empty() || gs.len() != w.len() {
        return Err(Error::InvalidArgument("need one weight per density"));
    }
    if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("fusion weights must sum to 1"));
    }
    let dim = gs[0].dim();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut info = DMatrix::zeros(dim, dim);
    let mut info_mean = DVector::zeros(dim);
    let mut log_c = 0.0;
    for (g, &wi) in gs.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        if g.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "fuse_gaussians",
                expected: dim,
                got: g.dim(),
            });
        }
        let chol = g.cov.clone().cholesky().ok_or_else(|| Error::SingularMatrix {
            context: "fuse_gaussians",
            condition: crate::rfs::condition_estimate(&g.cov),
        })?;
        let inv = chol.inverse();
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        info += &inv * wi;
        info_mean += inv * &g.mean * wi;
        log_c -= wi / 2.0 * (dim as f64 * two_pi.ln() + log_det);
        log_c -= wi / 2.0 * g.mean.dot(&(&g.cov.clone().cholesky().unwrap().solve(&g.mean)));
    }
    let chol_info = info.clone().cholesky().ok_or_else(|| Error::SingularMatrix {
        context: "fuse_gaussians fused information",
        condition: crate::rfs::condition_estimate(&info),
    })?;
    let mean = chol_info.solve(&info_mean);
    let cov = chol_info.inverse();
    let log_det_fused = -2.0 * chol_info.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    log_c += 0.5 * (dim as f64 * two_pi.ln() + log_det_fused);
    log_c += 0.5 * mean.dot(&info_mean);
    Ok((GaussianDensity::conditioned(mean, cov), log_c))
}

/// Combines the log-domain existence terms. Degenerate inputs follow the
/// limits of the fusion formula: an input with `r = 1` rules out the empty
/// hypothesis entirely (the fused existence is 1 no matter how little the
/// spatial densities overlap), and an input with `r = 0` forces 0.
fn fused_existence(log_num: f64, log_1mr: f64) -> f64 {
    match (log_num.is_finite(), log_1mr.is_finite()) {
        (true, true) => 1.0 / (1.0 + (log_1mr - log_num).exp()),
        (true, false) => 1.0,
        (false, true) => 0.0,
        // Contradictory certainties; resolve conservatively.
        (false, false) => 0.0,
    }
}

/// Fuses Bernoulli components. The spatial densities combine through
/// [`fuse_gaussians`]; the rate gamma is not fused (rates are sensor
/// specific) and the first input's gamma and track id are carried along.
pub fn fuse_bernoullis(bs: &[&BernoulliComponent], w: &[f64]) -> Result<BernoulliComponent> {
    if bs.is_empty() || bs.len() != w.len() {
        return Err(Error::InvalidArgument("need one weight per Bernoulli"));
    }
    let spatials: Vec<&GaussianDensity> = bs.iter().map(|b| &b.state.spatial).collect();
    let (spatial, log_c) = fuse_gaussians(&spatials, w)?;
    let mut log_r = log_c;
    let mut log_1mr = 0.0;
    for (b, &wi) in bs.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        log_r += wi * b.r.max(1e-12).ln();
        log_1mr += wi * (1.0 - b.r).max(0.0).ln();
    }
    let r = fused_existence(log_r, log_1mr);
    Ok(BernoulliComponent {
        r,
        state: crate::rfs::EtState { rate: bs[0].state.rate, spatial },
        track_id: bs[0].track_id,
    })
}

/// Fuses Poisson intensities; each input is moment-matched to a single
/// Gaussian first. The fused mass is the normalization-weighted geometric
/// mean of the input masses. A zero-mass input with positive weight yields
/// the empty intensity.
pub fn fuse_ppps(parts: &[&PoissonIntensity], w: &[f64]) -> Result<PoissonIntensity> {
    if parts.is_empty() || parts.len() != w.len() {
        return Err(Error::InvalidArgument("need one weight per intensity"));
    }
    let mut matched = Vec::new();
    for (p, &wi) in parts.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        match p.moment_matched() {
            Some(c) => matched.push((c, wi)),
            None => return Ok(PoissonIntensity::empty()),
        }
    }
    if matched.is_empty() {
        return Ok(PoissonIntensity::empty());
    }
    let spatials: Vec<&GaussianDensity> = matched.iter().map(|(c, _)| &c.spatial).collect();
    let weights: Vec<f64> = matched.iter().map(|(_, wi)| *wi).collect();
    let (spatial, log_c) = fuse_gaussians(&spatials, &weights)?;
    let log_mass: f64 =
        log_c + matched.iter().map(|(c, wi)| wi * c.weight.ln()).sum::<f64>();
    Ok(PoissonIntensity {
        components: vec![PoissonComponent {
            weight: log_mass.exp(),
            spatial,
            rate_prior: matched[0].0.rate_prior,
        }],
    })
}

/// One Poisson part offered as a fusion slot: its mass, a single Gaussian
/// (absent when the part has no mass) and the rate prior it carries.
#[derive(Debug, Clone)]
pub struct PppPart {
    pub mass: f64,
    pub spatial: Option<GaussianDensity>,
    pub rate_prior: Option<GammaDensity>,
}

impl PppPart {
    pub fn empty() -> Self {
        Self { mass: 0.0, spatial: None, rate_prior: None }
    }
}

/// Fuses Bernoullis with Poisson parts into a single Bernoulli (exact for
/// this mixed case). Weights are aligned with the concatenation of
/// `bernoullis` then `parts` and must sum to one overall.
pub fn fuse_mixed(
    bernoullis: &[&BernoulliComponent],
    parts: &[&PppPart],
    w: &[f64],
) -> Result<BernoulliComponent> {
    if bernoullis.is_empty() || parts.is_empty() {
        return Err(Error::InvalidArgument("fuse_mixed needs both Bernoullis and parts"));
    }
    if w.len() != bernoullis.len() + parts.len() {
        return Err(Error::InvalidArgument("need one weight per component"));
    }
    let (w_b, w_p) = w.split_at(bernoullis.len());

    // A zero-mass part with positive weight forces zero fused existence;
    // the spatial density then only matters for bookkeeping.
    let dead = parts
        .iter()
        .zip(w_p)
        .any(|(p, &wi)| wi > 0.0 && (p.mass <= 0.0 || p.spatial.is_none()));
    if dead {
        return Ok(BernoulliComponent {
            r: 0.0,
            state: bernoullis[0].state.clone(),
            track_id: bernoullis[0].track_id,
        });
    }

    let mut spatials: Vec<&GaussianDensity> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (b, &wi) in bernoullis.iter().zip(w_b) {
        spatials.push(&b.state.spatial);
        weights.push(wi);
    }
    for (p, &wi) in parts.iter().zip(w_p) {
        spatials.push(p.spatial.as_ref().unwrap());
        weights.push(wi);
    }
    let (spatial, log_c) = fuse_gaussians(&spatials, &weights)?;

    let mut log_num = log_c;
    let mut log_1mr = 0.0;
    for (b, &wi) in bernoullis.iter().zip(w_b) {
        if wi == 0.0 {
            continue;
        }
        log_num += wi * b.r.max(1e-12).ln();
        log_1mr += wi * (1.0 - b.r).max(0.0).ln();
    }
    for (p, &wi) in parts.iter().zip(w_p) {
        if wi == 0.0 {
            continue;
        }
        log_num += wi * p.mass.ln();
    }
    let r = fused_existence(log_num, log_1mr);
    Ok(BernoulliComponent {
        r,
        state: crate::rfs::EtState { rate: bernoullis[0].state.rate, spatial },
        track_id: bernoullis[0].track_id,
    })
}

/// One slot offered by a sensor for the fusion map.
#[derive(Debug, Clone)]
pub enum ComponentKind {
    Bernoulli(BernoulliComponent),
    PppPart(PppPart),
}

/// Fusion-map component: what is offered plus the subregion it belongs to.
/// Components may only be matched within their subregion.
#[derive(Debug, Clone)]
pub struct FusionComponent {
    pub kind: ComponentKind,
    pub subregion: usize,
}

impl FusionComponent {
    fn spatial(&self) -> Option<&GaussianDensity> {
        match &self.kind {
            ComponentKind::Bernoulli(b) => Some(&b.state.spatial),
            ComponentKind::PppPart(p) => p.spatial.as_ref(),
        }
    }

    fn is_bernoulli(&self) -> bool {
        matches!(self.kind, ComponentKind::Bernoulli(_))
    }
}

/// Cost placed on matches involving a component without a spatial density,
/// so massless filler parts absorb whatever is left.
const MASSLESS_MATCH_COST: f64 = 1e12;

/// Builds the fusion map between two equally sized component lists:
/// `result[i]` is the index in `other` matched to `ref_components[i]`.
/// Matching minimizes the total symmetric Gaussian divergence; Bernoulli
/// pairs above `kld_gate` are forbidden (they fall back to Poisson parts),
/// and cross-subregion matches are never allowed.
pub fn build_fusion_map(
    ref_components: &[FusionComponent],
    other_components: &[FusionComponent],
    kld_gate: f64,
) -> Result<Vec<usize>> {
    if ref_components.len() != other_components.len() {
        return Err(Error::InvalidArgument("fusion sides must have equal component counts"));
    }
    let mut by_subregion: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> =
        std::collections::BTreeMap::new();
    for (i, c) in ref_components.iter().enumerate() {
        by_subregion.entry(c.subregion).or_default().0.push(i);
    }
    for (j, c) in other_components.iter().enumerate() {
        by_subregion.entry(c.subregion).or_default().1.push(j);
    }

    let mut map = vec![usize::MAX; ref_components.len()];
    for (_, (refs, others)) in by_subregion {
        if refs.len() != others.len() {
            return Err(Error::InvalidArgument(
                "subregion component counts differ between fusion sides",
            ));
        }
        if refs.is_empty() {
            continue;
        }
        let cost_at = |a: &FusionComponent, b: &FusionComponent, gated: bool| -> Result<f64> {
            Ok(match (a.spatial(), b.spatial()) {
                (Some(ga), Some(gb)) => {
                    let c = symmetric_kld(ga, gb)?;
                    if gated && a.is_bernoulli() && b.is_bernoulli() && c > kld_gate {
                        f64::INFINITY
                    } else {
                        c
                    }
                }
                _ => MASSLESS_MATCH_COST,
            })
        };
        let build = |gated: bool| -> Result<CostMatrix> {
            let n = refs.len();
            let mut m = DMatrix::zeros(n, n);
            for (a, &i) in refs.iter().enumerate() {
                for (b, &j) in others.iter().enumerate() {
                    m[(a, b)] = cost_at(&ref_components[i], &other_components[j], gated)?;
                }
            }
            Ok(CostMatrix::new(m))
        };
        let assignment = match solve(&build(true)?) {
            Ok(a) => a,
            // The gate can over-forbid when a subregion has no filler
            // slots; retry on raw divergences.
            Err(Error::InfeasibleAssignment) => solve(&build(false)?)?,
            Err(e) => return Err(e),
        };
        for (a, b) in assignment.pairs {
            map[refs[a]] = others[b];
        }
    }
    Ok(map)
}

/// A track in the running fused density, remembering each sensor's local
/// rate density where one exists.
#[derive(Debug, Clone)]
struct FoldTrack {
    r: f64,
    spatial: GaussianDensity,
    track_id: TrackId,
    gammas: Vec<Option<GammaDensity>>,
}

impl FoldTrack {
    fn first_gamma(&self) -> GammaDensity {
        self.gammas
            .iter()
            .flatten()
            .next()
            .copied()
            .unwrap_or(GammaDensity::new(5.0, 1.0))
    }

    fn as_bernoulli(&self, sensor: Option<usize>) -> BernoulliComponent {
        let rate = sensor
            .and_then(|s| self.gammas[s])
            .unwrap_or_else(|| self.first_gamma());
        BernoulliComponent {
            r: self.r,
            state: crate::rfs::EtState { rate, spatial: self.spatial.clone() },
            track_id: self.track_id,
        }
    }
}

struct FoldState {
    tracks: Vec<FoldTrack>,
    ppp: PoissonIntensity,
}

/// Output of one fusion epoch.
#[derive(Debug, Clone)]
pub struct FusionResult {
    /// Fused PMB carrying, per track, the first contributing sensor's rate
    /// density.
    pub fused: PmbDensity,
    /// Per-sensor copies that differ only in the rate densities: each
    /// sensor keeps its own local gamma for tracks it contributed.
    pub per_sensor: Vec<PmbDensity>,
}

/// Restriction of an intensity to one subregion, by component mean.
fn restrict<'a>(
    ppp: &'a PoissonIntensity,
    partition: &FovPartition,
    subregion: usize,
) -> Vec<&'a PoissonComponent> {
    ppp.components
        .iter()
        .filter(|c| {
            partition.subregion_of(&Vector2::new(c.spatial.mean[0], c.spatial.mean[1]))
                == subregion
        })
        .collect()
}

/// Builds `deficit` filler parts from the restricted intensity. Returns the
/// parts plus the fraction of the restricted mass left unallocated.
fn make_parts(restricted: &[&PoissonComponent], deficit: usize) -> (Vec<PppPart>, f64) {
    if deficit == 0 {
        return (Vec::new(), 1.0);
    }
    let mixture = PoissonIntensity {
        components: restricted.iter().map(|c| (*c).clone()).collect(),
    };
    let mass = mixture.mass();
    match mixture.moment_matched() {
        Some(m) if mass > 0.0 => {
            // Bernoulli-Poisson fusion degrades for part masses near one,
            // so cap each part and keep the remainder aside for the merge.
            let part_mass = (mass / deficit as f64).min(0.9);
            let parts = (0..deficit)
                .map(|_| PppPart {
                    mass: part_mass,
                    spatial: Some(m.spatial.clone()),
                    rate_prior: Some(m.rate_prior),
                })
                .collect();
            let leftover = (mass - part_mass * deficit as f64) / mass;
            (parts, leftover)
        }
        _ => (vec![PppPart::empty(); deficit], 1.0),
    }
}

fn center_of(g: &GaussianDensity) -> Vector2<f64> {
    Vector2::new(g.mean[0], g.mean[1])
}

fn fold_pair(
    acc: FoldState,
    incoming: &PmbDensity,
    incoming_sensor: usize,
    n_sensors: usize,
    w_acc: f64,
    w_new: f64,
    partition: &FovPartition,
    cfg: &FusionConfig,
    next_id: &mut u64,
) -> Result<FoldState> {
    let inc_tracks: Vec<FoldTrack> = incoming
        .bernoullis
        .iter()
        .map(|b| {
            let mut gammas = vec![None; n_sensors];
            gammas[incoming_sensor] = Some(b.state.rate);
            FoldTrack { r: b.r, spatial: b.state.spatial.clone(), track_id: b.track_id, gammas }
        })
        .collect();

    // Group both sides' tracks by subregion.
    let mut subregions: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> =
        std::collections::BTreeMap::new();
    for (i, t) in acc.tracks.iter().enumerate() {
        subregions
            .entry(partition.subregion_of(&center_of(&t.spatial)))
            .or_default()
            .0
            .push(i);
    }
    for (j, t) in inc_tracks.iter().enumerate() {
        subregions
            .entry(partition.subregion_of(&center_of(&t.spatial)))
            .or_default()
            .1
            .push(j);
    }

    // Unallocated leftover fraction per (side, subregion).
    let mut leftover_acc: std::collections::BTreeMap<usize, f64> = Default::default();
    let mut leftover_inc: std::collections::BTreeMap<usize, f64> = Default::default();

    let mut fused_tracks: Vec<FoldTrack> = Vec::new();
    let mut fused_ppp_parts: Vec<PoissonComponent> = Vec::new();

    for (&l, (acc_idx, inc_idx)) in &subregions {
        let k_l = acc_idx.len().max(inc_idx.len());
        let (acc_parts, acc_left) = make_parts(&restrict(&acc.ppp, partition, l), k_l - acc_idx.len());
        let (inc_parts, inc_left) =
            make_parts(&restrict(&incoming.ppp, partition, l), k_l - inc_idx.len());
        if k_l > acc_idx.len() {
            leftover_acc.insert(l, acc_left);
        }
        if k_l > inc_idx.len() {
            leftover_inc.insert(l, inc_left);
        }

        let ref_side: Vec<FusionComponent> = acc_idx
            .iter()
            .map(|&i| FusionComponent {
                kind: ComponentKind::Bernoulli(acc.tracks[i].as_bernoulli(None)),
                subregion: l,
            })
            .chain(acc_parts.iter().map(|p| FusionComponent {
                kind: ComponentKind::PppPart(p.clone()),
                subregion: l,
            }))
            .collect();
        let other_side: Vec<FusionComponent> = inc_idx
            .iter()
            .map(|&j| FusionComponent {
                kind: ComponentKind::Bernoulli(inc_tracks[j].as_bernoulli(None)),
                subregion: l,
            })
            .chain(inc_parts.iter().map(|p| FusionComponent {
                kind: ComponentKind::PppPart(p.clone()),
                subregion: l,
            }))
            .collect();

        let map = build_fusion_map(&ref_side, &other_side, cfg.kld_gate)?;
        let w = [w_acc, w_new];
        for (slot, &target) in map.iter().enumerate() {
            let a_is_track = slot < acc_idx.len();
            let b_is_track = target < inc_idx.len();
            match (a_is_track, b_is_track) {
                (true, true) => {
                    let a = &acc.tracks[acc_idx[slot]];
                    let b = &inc_tracks[inc_idx[target]];
                    let fused = fuse_bernoullis(
                        &[&a.as_bernoulli(None), &b.as_bernoulli(None)],
                        &w,
                    )?;
                    let mut gammas = a.gammas.clone();
                    gammas[incoming_sensor] = b.gammas[incoming_sensor];
                    fused_tracks.push(FoldTrack {
                        r: fused.r,
                        spatial: fused.state.spatial,
                        track_id: a.track_id,
                        gammas,
                    });
                }
                (true, false) => {
                    let a = &acc.tracks[acc_idx[slot]];
                    let part = &inc_parts[target - inc_idx.len()];
                    let fused = fuse_mixed(&[&a.as_bernoulli(None)], &[part], &w)?;
                    fused_tracks.push(FoldTrack {
                        r: fused.r,
                        spatial: fused.state.spatial,
                        track_id: a.track_id,
                        gammas: a.gammas.clone(),
                    });
                }
                (false, true) => {
                    let part = &acc_parts[slot - acc_idx.len()];
                    let b = &inc_tracks[inc_idx[target]];
                    let fused =
                        fuse_mixed(&[&b.as_bernoulli(None)], &[part], &[w_new, w_acc])?;
                    // A track seen only by the incoming sensor becomes a
                    // new fused track with a fresh identity.
                    fused_tracks.push(FoldTrack {
                        r: fused.r,
                        spatial: fused.state.spatial,
                        track_id: TrackId(*next_id),
                        gammas: b.gammas.clone(),
                    });
                    *next_id += 1;
                }
                (false, false) => {
                    let pa = &acc_parts[slot - acc_idx.len()];
                    let pb = &inc_parts[target - inc_idx.len()];
                    let ia = part_intensity(pa);
                    let ib = part_intensity(pb);
                    let fused = fuse_ppps(&[&ia, &ib], &w)?;
                    fused_ppp_parts.extend(fused.components);
                }
            }
        }
    }

    // Re-add unallocated Poisson mass with the fusion weights so identical
    // inputs fuse to themselves.
    let mut components = fused_ppp_parts;
    for side in [
        (&acc.ppp, &leftover_acc, w_acc),
        (&incoming.ppp, &leftover_inc, w_new),
    ] {
        let (ppp, leftovers, weight) = side;
        for c in &ppp.components {
            let l = partition.subregion_of(&center_of(&c.spatial));
            let scale = leftovers.get(&l).copied().unwrap_or(1.0);
            let w = c.weight * scale * weight;
            if w > 0.0 {
                components.push(PoissonComponent {
                    weight: w,
                    spatial: c.spatial.clone(),
                    rate_prior: c.rate_prior,
                });
            }
        }
    }
    let ppp = merge_duplicate_components(PoissonIntensity { components });

    Ok(FoldState { tracks: fused_tracks, ppp })
}

fn part_intensity(p: &PppPart) -> PoissonIntensity {
    match (&p.spatial, p.mass > 0.0) {
        (Some(g), true) => PoissonIntensity {
            components: vec![PoissonComponent {
                weight: p.mass,
                spatial: g.clone(),
                rate_prior: p.rate_prior.unwrap_or(GammaDensity::new(5.0, 1.0)),
            }],
        },
        _ => PoissonIntensity::empty(),
    }
}

/// Sums the weights of components with coinciding means and covariances;
/// restores component-wise idempotence after the weighted leftover re-add.
fn merge_duplicate_components(ppp: PoissonIntensity) -> PoissonIntensity {
    let mut merged: Vec<PoissonComponent> = Vec::new();
    'outer: for c in ppp.components {
        for m in &mut merged {
            if (&m.spatial.mean - &c.spatial.mean).amax() < 1e-9
                && (&m.spatial.cov - &c.spatial.cov).amax() < 1e-9
            {
                m.weight += c.weight;
                continue 'outer;
            }
        }
        merged.push(c);
    }
    PoissonIntensity { components: merged }
}

/// Fuses the per-sensor PMB posteriors of one time step.
///
/// Sensors beyond the first fold in sequentially with cumulative weights,
/// which reproduces the configured per-sensor weights overall. The fused
/// density is recycled at the end: fused tracks below the threshold move
/// into the Poisson intensity.
pub fn fuse_pmbs(
    pmbs: &[PmbDensity],
    cfg: &FusionConfig,
    partition: &FovPartition,
) -> Result<FusionResult> {
    if pmbs.len() < 2 {
        return Err(Error::InvalidArgument("fusion needs at least two posteriors"));
    }
    cfg.validate(pmbs.len())?;
    let n = pmbs.len();
    let mut next_id = pmbs.iter().map(|p| p.next_track_id()).max().unwrap_or(0);

    let mut acc = FoldState {
        tracks: pmbs[0]
            .bernoullis
            .iter()
            .map(|b| {
                let mut gammas = vec![None; n];
                gammas[0] = Some(b.state.rate);
                FoldTrack {
                    r: b.r,
                    spatial: b.state.spatial.clone(),
                    track_id: b.track_id,
                    gammas,
                }
            })
            .collect(),
        ppp: pmbs[0].ppp.clone(),
    };
    let mut cum_w = cfg.weights[0];
    for s in 1..n {
        let total = cum_w + cfg.weights[s];
        let (w_acc, w_new) = if total > 0.0 {
            (cum_w / total, cfg.weights[s] / total)
        } else {
            (1.0, 0.0)
        };
        acc = fold_pair(acc, &pmbs[s], s, n, w_acc, w_new, partition, cfg, &mut next_id)?;
        cum_w = total;
    }

    // Recycle fused tracks with negligible existence.
    let mut ppp = acc.ppp;
    let mut tracks = Vec::new();
    for t in acc.tracks {
        if t.r < cfg.recycle_threshold {
            if t.r > 0.0 {
                ppp.components.push(PoissonComponent {
                    weight: t.r,
                    spatial: t.spatial.clone(),
                    rate_prior: t.first_gamma(),
                });
            }
        } else {
            tracks.push(t);
        }
    }

    let per_sensor = (0..n)
        .map(|s| PmbDensity {
            ppp: ppp.clone(),
            bernoullis: tracks.iter().map(|t| t.as_bernoulli(Some(s))).collect(),
        })
        .collect();
    let fused = PmbDensity {
        ppp,
        bernoullis: tracks.iter().map(|t| t.as_bernoulli(None)).collect(),
    };
    Ok(FusionResult { fused, per_sensor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfs::EtState;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn g1(mean: f64, var: f64) -> GaussianDensity {
        GaussianDensity::new_unchecked(
            DVector::from_column_slice(&[mean]),
            DMatrix::from_element(1, 1, var),
        )
    }

    fn g2(x: f64, y: f64) -> GaussianDensity {
        GaussianDensity::new_unchecked(
            DVector::from_column_slice(&[x, y]),
            DMatrix::identity(2, 2),
        )
    }

    fn bern(r: f64, spatial: GaussianDensity, id: u64) -> BernoulliComponent {
        BernoulliComponent {
            r,
            state: EtState { rate: GammaDensity::new(10.0, 1.0), spatial },
            track_id: TrackId(id),
        }
    }

    #[test]
    fn gaussian_fusion_identical_inputs() {
        let g = g1(1.3, 2.0);
        let (fused, log_c) = fuse_gaussians(&[&g, &g], &[0.3, 0.7]).unwrap();
        assert_relative_eq!(fused.mean[0], 1.3, epsilon = 1e-12);
        assert_relative_eq!(fused.cov[(0, 0)], 2.0, epsilon = 1e-9);
        assert_relative_eq!(log_c, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_fusion_one_dimensional_means_average() {
        let (fused, _) = fuse_gaussians(&[&g1(0.0, 2.0), &g1(2.0, 2.0)], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(fused.mean[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(fused.cov[(0, 0)], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn gaussian_fusion_information_identity() {
        let a = GaussianDensity::new_unchecked(
            DVector::from_column_slice(&[1.0, -1.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0]),
        );
        let b = GaussianDensity::new_unchecked(
            DVector::from_column_slice(&[0.0, 3.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 3.0]),
        );
        let w = [0.35, 0.65];
        let (fused, _) = fuse_gaussians(&[&a, &b], &w).unwrap();
        let expect = a.cov.clone().try_inverse().unwrap() * w[0]
            + b.cov.clone().try_inverse().unwrap() * w[1];
        let got = fused.cov.try_inverse().unwrap();
        assert!((expect - got).amax() < 1e-9);
    }

    #[test]
    fn bernoulli_fusion_cases() {
        let same = bern(0.9, g1(0.0, 1.0), 0);
        let fused = fuse_bernoullis(&[&same, &same], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(fused.r, 0.9, epsilon = 1e-12);

        let b1 = bern(0.9, g1(0.0, 1.0), 0);
        let b2 = bern(0.5, g1(0.0, 1.0), 1);
        let fused = fuse_bernoullis(&[&b1, &b2], &[0.5, 0.5]).unwrap();
        let expect = 0.45f64.sqrt() / (0.05f64.sqrt() + 0.45f64.sqrt());
        assert_relative_eq!(fused.r, expect, epsilon = 1e-9);
        assert_relative_eq!(fused.r, 0.75, epsilon = 1e-6);
        assert_eq!(fused.track_id, TrackId(0));
    }

    #[test]
    fn ppp_fusion_geometric_mean() {
        let p = |mass: f64| PoissonIntensity {
            components: vec![PoissonComponent {
                weight: mass,
                spatial: g1(0.0, 1.0),
                rate_prior: GammaDensity::new(5.0, 1.0),
            }],
        };
        let fused = fuse_ppps(&[&p(4.0), &p(9.0)], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(fused.mass(), 6.0, epsilon = 1e-6);

        let same = fuse_ppps(&[&p(0.4), &p(0.4)], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(same.mass(), 0.4, epsilon = 1e-9);

        let degenerate = fuse_ppps(&[&p(0.4), &p(9.0)], &[1.0, 0.0]).unwrap();
        assert_relative_eq!(degenerate.mass(), 0.4, epsilon = 1e-9);
        assert_relative_eq!(degenerate.components[0].spatial.mean[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mixed_fusion_hand_case() {
        let b = bern(0.9, g1(0.0, 1.0), 3);
        let part = PppPart {
            mass: 0.1,
            spatial: Some(g1(0.0, 1.0)),
            rate_prior: Some(GammaDensity::new(5.0, 1.0)),
        };
        let fused = fuse_mixed(&[&b], &[&part], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(fused.r, 0.48683, epsilon = 1e-5);
        assert_eq!(fused.track_id, TrackId(3));

        let keep = fuse_mixed(&[&b], &[&part], &[1.0, 0.0]).unwrap();
        assert_relative_eq!(keep.r, 0.9, epsilon = 1e-9);
        assert_relative_eq!(keep.state.spatial.mean[0], 0.0, epsilon = 1e-12);

        let dead = fuse_mixed(&[&b], &[&PppPart::empty()], &[0.5, 0.5]).unwrap();
        assert_eq!(dead.r, 0.0);
    }

    #[test]
    fn split_ppp_conserves_intensity() {
        let single = PoissonIntensity {
            components: vec![PoissonComponent {
                weight: 0.5,
                spatial: g1(0.0, 1.0),
                rate_prior: GammaDensity::new(5.0, 1.0),
            }],
        };
        let parts = split_ppp(&single, 2);
        assert_eq!(parts.len(), 2);
        assert_relative_eq!(parts[0].mass(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(parts[1].mass(), 0.25, epsilon = 1e-15);

        assert_eq!(split_ppp(&single, 1)[0].components.len(), 1);

        let three = PoissonIntensity {
            components: vec![
                PoissonComponent {
                    weight: 0.2,
                    spatial: g1(-1.0, 1.0),
                    rate_prior: GammaDensity::new(5.0, 1.0),
                },
                PoissonComponent {
                    weight: 0.3,
                    spatial: g1(0.5, 2.0),
                    rate_prior: GammaDensity::new(5.0, 1.0),
                },
                PoissonComponent {
                    weight: 0.1,
                    spatial: g1(2.0, 0.5),
                    rate_prior: GammaDensity::new(5.0, 1.0),
                },
            ],
        };
        let parts = split_ppp(&three, 2);
        for x in [-1.3, -0.2, 0.4, 1.9] {
            let xv = DVector::from_column_slice(&[x]);
            let orig = three.eval_spatial(&xv).unwrap();
            let sum: f64 = parts.iter().map(|p| p.eval_spatial(&xv).unwrap()).sum();
            assert_relative_eq!(orig, sum, epsilon = 1e-12);
        }
    }

    fn sector(x: f64, y: f64, orient_deg: f64, opening_deg: f64, range: f64) -> Sector {
        Sector {
            origin: Vector2::new(x, y),
            orientation: orient_deg.to_radians(),
            opening: opening_deg.to_radians(),
            max_range: range,
        }
    }

    #[test]
    fn partition_membership() {
        let disjoint =
            partition_fov(&[sector(0.0, 0.0, 0.0, 60.0, 50.0), sector(200.0, 0.0, 180.0, 60.0, 50.0)]);
        assert_eq!(disjoint.subregion_of(&Vector2::new(20.0, 0.0)), 0b01);
        assert_eq!(disjoint.subregion_of(&Vector2::new(180.0, 0.0)), 0b10);
        assert_eq!(disjoint.subregion_of(&Vector2::new(100.0, 100.0)), 0);

        let overlapping =
            partition_fov(&[sector(0.0, 0.0, 0.0, 90.0, 100.0), sector(50.0, -50.0, 90.0, 90.0, 100.0)]);
        assert_eq!(overlapping.subregion_of(&Vector2::new(50.0, 5.0)), 0b11);
        // Beyond every max range.
        assert_eq!(overlapping.subregion_of(&Vector2::new(500.0, 0.0)), 0);
    }

    #[test]
    fn k_selection_follows_subregion_maxima() {
        let partition =
            partition_fov(&[sector(0.0, 0.0, 0.0, 90.0, 100.0), sector(50.0, -50.0, 90.0, 90.0, 100.0)]);
        // Overlap point: (50, 5). Sensor-2 exclusive: (30, -40).
        let overlap = g2(50.0, 5.0);
        let exclusive = g2(30.0, -40.0);
        let overlap_dim = |g: &GaussianDensity| g.clone();

        let pmb1 = PmbDensity {
            ppp: PoissonIntensity::empty(),
            bernoullis: vec![
                bern(0.9, overlap_dim(&overlap), 0),
                bern(0.8, g2(52.0, 8.0), 1),
            ],
        };
        let pmb2 = PmbDensity {
            ppp: PoissonIntensity::empty(),
            bernoullis: vec![bern(0.9, overlap_dim(&overlap), 0), bern(0.7, exclusive, 1)],
        };
        let plan = determine_k(&[&pmb1, &pmb2], &partition);
        assert_eq!(plan.k, 3);
        assert_eq!(plan.parts_needed, vec![1, 1]);

        let empty = PmbDensity::empty();
        let plan = determine_k(&[&pmb1, &empty], &partition);
        assert_eq!(plan.k, 2);
        assert_eq!(plan.parts_needed, vec![0, 2]);

        // Identical counts everywhere: no parts needed on either side.
        let plan = determine_k(&[&pmb1, &pmb1], &partition);
        assert_eq!(plan.k, 2);
        assert_eq!(plan.parts_needed, vec![0, 0]);
    }

    #[test]
    fn fusion_map_identity_and_swap() {
        let comps = |positions: &[(f64, f64)]| -> Vec<FusionComponent> {
            positions
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| FusionComponent {
                    kind: ComponentKind::Bernoulli(bern(0.9, g2(x, y), i as u64)),
                    subregion: 3,
                })
                .collect()
        };
        let a = comps(&[(0.0, 0.0), (10.0, 0.0)]);
        let map = build_fusion_map(&a, &a, 1e9).unwrap();
        assert_eq!(map, vec![0, 1]);

        let b = comps(&[(10.0, 0.0), (0.0, 0.0)]);
        let map = build_fusion_map(&a, &b, 1e9).unwrap();
        assert_eq!(map, vec![1, 0]);
    }

    #[test]
    fn fusion_map_matches_brute_force_permutations() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..40 {
            let k = rng.gen_range(1..=6usize);
            let make = |rng: &mut ChaCha8Rng| -> Vec<FusionComponent> {
                (0..k)
                    .map(|i| FusionComponent {
                        kind: ComponentKind::Bernoulli(bern(
                            0.9,
                            g2(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)),
                            i as u64,
                        )),
                        subregion: 1,
                    })
                    .collect()
            };
            let a = make(&mut rng);
            let b = make(&mut rng);
            let map = build_fusion_map(&a, &b, 1e12).unwrap();
            let total: f64 = (0..k)
                .map(|i| {
                    symmetric_kld(a[i].spatial().unwrap(), b[map[i]].spatial().unwrap()).unwrap()
                })
                .sum();
            // Brute force over all permutations.
            let mut perm: Vec<usize> = (0..k).collect();
            let mut best = f64::INFINITY;
            permute(&mut perm, 0, &mut |p: &[usize]| {
                let c: f64 = (0..k)
                    .map(|i| {
                        symmetric_kld(a[i].spatial().unwrap(), b[p[i]].spatial().unwrap()).unwrap()
                    })
                    .sum();
                best = best.min(c);
            });
            assert!((total - best).abs() < 1e-9, "{total} vs {best}");
        }
    }

    fn permute(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            f(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, f);
            items.swap(k, i);
        }
    }

    #[test]
    fn symmetric_kld_examples() {
        let a = g1(0.0, 1.0);
        let b = g1(1.0, 1.0);
        assert_relative_eq!(gaussian_kld(&a, &b).unwrap(), 0.5, epsilon = 1e-12);
        let c = symmetric_kld(&a, &b).unwrap();
        assert_relative_eq!(c, 0.5, epsilon = 1e-12);
        assert_relative_eq!(c, symmetric_kld(&b, &a).unwrap(), epsilon = 1e-14);
        assert_relative_eq!(symmetric_kld(&a, &a).unwrap(), 0.0, epsilon = 1e-12);
    }

    fn two_sensor_partition() -> FovPartition {
        partition_fov(&[
            sector(-50.0, 0.0, 0.0, 170.0, 300.0),
            sector(50.0, 0.0, 180.0, 170.0, 300.0),
        ])
    }

    fn pmb_with_track_and_birth(x: f64, y: f64, id: u64) -> PmbDensity {
        PmbDensity {
            ppp: PoissonIntensity {
                components: vec![PoissonComponent {
                    weight: 0.1,
                    spatial: g2(0.0, 0.0),
                    rate_prior: GammaDensity::new(5.0, 1.0),
                }],
            },
            bernoullis: vec![bern(0.95, g2(x, y), id)],
        }
    }

    #[test]
    fn pmb_self_fusion_is_identity() {
        let pmb = pmb_with_track_and_birth(0.0, 10.0, 4);
        let partition = two_sensor_partition();
        let cfg = FusionConfig::uniform(2);
        let out = fuse_pmbs(&[pmb.clone(), pmb.clone()], &cfg, &partition).unwrap();
        assert_eq!(out.fused.bernoullis.len(), 1);
        let b = &out.fused.bernoullis[0];
        assert_relative_eq!(b.r, 0.95, epsilon = 1e-10);
        assert_relative_eq!(b.state.spatial.mean[0], 0.0, epsilon = 1e-10);
        assert_eq!(b.track_id, TrackId(4));
        assert_eq!(out.fused.ppp.components.len(), 1);
        assert_relative_eq!(out.fused.ppp.mass(), 0.1, epsilon = 1e-10);
    }

    #[test]
    fn lone_track_fuses_against_poisson_part() {
        // Sensor 1 sees a track in the overlap; sensor 2 has only its birth
        // intensity there. The fused track survives with reduced existence.
        let pmb1 = pmb_with_track_and_birth(0.0, 2.0, 7);
        let pmb2 = PmbDensity {
            ppp: PoissonIntensity {
                components: vec![PoissonComponent {
                    weight: 0.4,
                    spatial: g2(0.0, 2.0),
                    rate_prior: GammaDensity::new(5.0, 1.0),
                }],
            },
            bernoullis: vec![],
        };
        let partition = two_sensor_partition();
        let cfg = FusionConfig::uniform(2);
        let out = fuse_pmbs(&[pmb1, pmb2], &cfg, &partition).unwrap();
        assert_eq!(out.fused.bernoullis.len(), 1);
        let r = out.fused.bernoullis[0].r;
        // sqrt(0.95 * 0.4) / (sqrt(0.05) + sqrt(0.95 * 0.4)) with C = 1.
        let expect = (0.95f64 * 0.4).sqrt() / (0.05f64.sqrt() + (0.95f64 * 0.4).sqrt());
        assert_relative_eq!(r, expect, epsilon = 1e-9);
    }

    #[test]
    fn fused_cardinality_between_inputs_for_identical_spatials() {
        let pmb_a = pmb_with_track_and_birth(0.0, 10.0, 0);
        let mut pmb_b = pmb_with_track_and_birth(0.0, 10.0, 0);
        pmb_b.bernoullis[0].r = 0.6;
        pmb_b.ppp.components[0].weight = 0.3;
        let partition = two_sensor_partition();
        let cfg = FusionConfig::uniform(2);
        let out = fuse_pmbs(&[pmb_a.clone(), pmb_b.clone()], &cfg, &partition).unwrap();
        let fused_card = out.fused.expected_cardinality();
        let lo = pmb_a.expected_cardinality().min(pmb_b.expected_cardinality());
        let hi = pmb_a.expected_cardinality().max(pmb_b.expected_cardinality());
        assert!(fused_card >= lo - 1e-9 && fused_card <= hi + 1e-9, "{fused_card} not in [{lo}, {hi}]");
    }

    #[test]
    fn per_sensor_output_keeps_local_rates() {
        let mut pmb1 = pmb_with_track_and_birth(0.0, 10.0, 2);
        pmb1.bernoullis[0].state.rate = GammaDensity::new(40.0, 2.0);
        let mut pmb2 = pmb_with_track_and_birth(0.2, 10.1, 9);
        pmb2.bernoullis[0].state.rate = GammaDensity::new(10.0, 2.0);
        let partition = two_sensor_partition();
        let cfg = FusionConfig::uniform(2);
        let out = fuse_pmbs(&[pmb1, pmb2], &cfg, &partition).unwrap();
        assert_eq!(out.per_sensor.len(), 2);
        let r0 = out.per_sensor[0].bernoullis[0].state.rate;
        let r1 = out.per_sensor[1].bernoullis[0].state.rate;
        assert_relative_eq!(r0.alpha, 40.0);
        assert_relative_eq!(r1.alpha, 10.0);
        // The canonical fused density carries the reference sensor's rate.
        assert_relative_eq!(out.fused.bernoullis[0].state.rate.alpha, 40.0);
    }

    #[test]
    fn bernoulli_fusion_monotone_in_inputs() {
        let spatial = g1(0.0, 1.0);
        let mut prev = 0.0;
        for k in 1..10 {
            let r1 = k as f64 / 10.0;
            let b1 = bern(r1, spatial.clone(), 0);
            let b2 = bern(0.5, spatial.clone(), 1);
            let fused = fuse_bernoullis(&[&b1, &b2], &[0.5, 0.5]).unwrap();
            assert!(fused.r > prev, "not monotone at r1 = {r1}");
            prev = fused.r;
        }
    }
}
