//! The multi-stage reconstruction loop.
//!
//! Training is greedy, one stage at a time: starting from the
//! edge-preserving reconstruction `x₀` of the training sinogram, stage `k`
//! trains a fresh destreaking pair on `(x_{k−1} → ground truth)` patches,
//! then produces `x_k` by destreaking `x_{k−1}`, aggregating the predicted
//! slices, and applying the data-consistency solve against the training
//! measurements. Inference replays the same loop with the stored
//! parameters; the EP initialization is recomputed per test object.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dc::{data_consistency, DcOptions};
use crate::ep::{ep_reconstruct, EpConfig};
use crate::fdk::{fdk_reconstruct, RampFilter};
use crate::geometry::ConeBeamGeometry;
use crate::metrics::{make_mask, nmae};
use crate::nn::{generator_forward, DiscriminatorParams, GeneratorParams};
use crate::parallel;
use crate::patching::{aggregate_slices, extract_subvolumes};
use crate::training::{train_stage, StageTrainOutput, TrainConfig};
use crate::types::{Error, Image2, Result, Sinogram, Volume3D};

/// Everything the pipeline needs beyond the measurements themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Number of destreak + data-consistency stages.
    pub stages: usize,
    pub train: TrainConfig,
    /// Subvolume depth (slices per patch window).
    pub depth: usize,
    /// In-plane patch extent (centered crop).
    pub crop: usize,
    pub ep: EpConfig,
    pub fdk_filter: RampFilter,
    /// Data-consistency regularization weight.
    pub dc_beta: f64,
    /// CG iterations per data-consistency solve.
    pub dc_iters: usize,
    /// ROI mask dilation radius in voxels.
    pub mask_dilation: usize,
}

impl PipelineConfig {
    /// Stated defaults, with the patch extent covering the full slice of
    /// the given geometry.
    pub fn default_for(geom: &ConeBeamGeometry) -> Self {
        Self {
            stages: 4,
            train: TrainConfig::default(),
            depth: 8,
            crop: geom.vol_nx.min(geom.vol_ny),
            ep: EpConfig::default(),
            fdk_filter: RampFilter::Hann,
            dc_beta: 1.0,
            dc_iters: 50,
            mask_dilation: 3,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::InvalidArgument(String::from("stage count must be at least 1")));
        }
        self.train.validate()?;
        self.ep.validate()?;
        if !(self.dc_beta > 0.0) || self.dc_iters == 0 {
            return Err(Error::InvalidArgument(String::from(
                "dc_beta must be positive and dc_iters at least 1",
            )));
        }
        Ok(())
    }

    /// Per-stage seed: stages must not share initialization or shuffling
    /// streams, and the derivation must be reproducible.
    fn stage_seed(&self, stage_index: usize) -> u64 {
        self.train.seed.wrapping_add(stage_index as u64)
    }
}

/// Trained parameters of one stage plus training provenance.
#[derive(Debug, Clone)]
pub struct StageCheckpoint {
    /// 1-based position in the pipeline.
    pub stage_index: usize,
    pub gen: GeneratorParams,
    pub disc: DiscriminatorParams,
    pub train_config: TrainConfig,
    pub gen_losses: Vec<f64>,
    pub disc_losses: Vec<f64>,
}

impl StageCheckpoint {
    fn from_training(stage_index: usize, cfg: TrainConfig, out: StageTrainOutput) -> Self {
        Self {
            stage_index,
            gen: out.gen,
            disc: out.disc,
            train_config: cfg,
            gen_losses: out.gen_losses,
            disc_losses: out.disc_losses,
        }
    }
}

/// Destreaks a whole volume: every valid-center subvolume through the
/// generator, predicted central slices aggregated with zero boundary
/// slices. Patches narrower than the slice are re-embedded at their crop
/// offset.
pub fn destreak_volume(
    gen: &GeneratorParams,
    volume: &Volume3D,
    depth: usize,
    crop: usize,
) -> Result<Volume3D> {
    let subs = extract_subvolumes(volume, depth, crop)?;
    let x0 = (volume.nx - crop) / 2;
    let y0 = (volume.ny - crop) / 2;

    let predictions: Vec<Result<(usize, Image2)>> = parallel::map_indexed(subs.len(), |i| {
        let sub = &subs[i];
        let (pred, _) = generator_forward(gen, sub)?;
        let mut full = Image2::zeros(volume.nx, volume.ny);
        for yy in 0..crop {
            for xx in 0..crop {
                full.data[(y0 + yy) * volume.nx + (x0 + xx)] = pred.data[yy * crop + xx] as f32;
            }
        }
        Ok((sub.z_center, full))
    });
    let slices: Vec<(usize, Image2)> = predictions.into_iter().collect::<Result<_>>()?;
    aggregate_slices(&slices, volume.nz, volume.voxel_mm)
}

/// Output of [`train_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineTrainOutput {
    pub checkpoints: Vec<StageCheckpoint>,
    /// NMAE of the EP initialization on the training volume.
    pub x0_nmae: f64,
    /// NMAE of each stage's post-data-consistency training volume.
    pub stage_nmae: Vec<f64>,
}

/// Trains all stages greedily on a single (ground truth, sinogram) pair.
pub fn train_pipeline(
    gt: &Volume3D,
    y_train: &Sinogram,
    cfg: &PipelineConfig,
) -> Result<PipelineTrainOutput> {
    cfg.validate()?;
    gt.check_matches(&y_train.geometry)?;
    let geom = &y_train.geometry;

    let x_fdk = fdk_reconstruct(y_train, geom, &y_train.views, cfg.fdk_filter)?;
    let x0 = ep_reconstruct(y_train, &cfg.ep, &x_fdk)?.volume;
    let roi = make_mask(gt, cfg.mask_dilation)?;
    let x0_nmae = nmae(gt, &x0, &roi)?;

    let mut checkpoints = Vec::with_capacity(cfg.stages);
    let mut stage_nmae = Vec::with_capacity(cfg.stages);
    let mut x = x0;
    for k in 1..=cfg.stages {
        let stage_cfg = TrainConfig { seed: cfg.stage_seed(k), ..cfg.train.clone() };
        let trained = train_stage(&x, gt, &roi, &stage_cfg, cfg.depth, cfg.crop)?;
        let destreaked = destreak_volume(&trained.gen, &x, cfg.depth, cfg.crop)?;
        x = data_consistency(&destreaked, y_train, cfg.dc_beta, cfg.dc_iters, DcOptions::default())?
            .volume;
        stage_nmae.push(nmae(gt, &x, &roi)?);
        checkpoints.push(StageCheckpoint::from_training(k, stage_cfg, trained));
    }

    Ok(PipelineTrainOutput { checkpoints, x0_nmae, stage_nmae })
}

/// Per-stage intermediates kept when diagnostics are requested.
#[derive(Debug, Clone)]
pub struct StageOutputs {
    /// Aggregated generator output before data consistency.
    pub destreaked: Volume3D,
    /// The stage output after data consistency.
    pub consistent: Volume3D,
}

/// Output of [`reconstruct`].
#[derive(Debug, Clone)]
pub struct ReconOutput {
    /// Final stage output `x_K`.
    pub volume: Volume3D,
    pub fdk: Volume3D,
    /// The EP initialization `x₀`.
    pub ep: Volume3D,
    pub stages: Option<Vec<StageOutputs>>,
}

/// Runs the trained pipeline on held-out measurements.
pub fn reconstruct(
    y: &Sinogram,
    checkpoints: &[StageCheckpoint],
    cfg: &PipelineConfig,
    diagnostics: bool,
) -> Result<ReconOutput> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidArgument(String::from("no stage checkpoints provided")));
    }
    for (i, ck) in checkpoints.iter().enumerate() {
        if ck.stage_index != i + 1 {
            return Err(Error::InvalidArgument(format!(
                "checkpoints must be ordered 1..K: position {} holds stage {}",
                i + 1,
                ck.stage_index
            )));
        }
        if !ck.gen.is_finite() || !ck.disc.is_finite() {
            return Err(Error::NonFinite(format!("checkpoint {} parameters", ck.stage_index)));
        }
    }
    let geom = &y.geometry;

    let fdk = fdk_reconstruct(y, geom, &y.views, cfg.fdk_filter)?;
    let ep = ep_reconstruct(y, &cfg.ep, &fdk)?.volume;

    let mut x = ep.clone();
    let mut stages = diagnostics.then(Vec::new);
    for ck in checkpoints {
        let destreaked = destreak_volume(&ck.gen, &x, cfg.depth, cfg.crop)?;
        x = data_consistency(&destreaked, y, cfg.dc_beta, cfg.dc_iters, DcOptions::default())?
            .volume;
        if let Some(list) = stages.as_mut() {
            list.push(StageOutputs { destreaked, consistent: x.clone() });
        }
    }

    Ok(ReconOutput { volume: x, fdk, ep, stages })
}
