//! Stage checkpoint files and the trained-run directory layout.
//!
//! One `.ckpt` file per stage carries the stage index, the training config,
//! the loss histories and both parameter blobs (little-endian f32 in
//! declared field order, generator first). A run directory adds
//! `manifest.txt` recording the geometry (inline plus hash), view set,
//! pipeline configuration and per-stage training NMAE.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cbct_core::fdk::RampFilter;
use cbct_core::nn::{DiscriminatorParams, GeneratorParams};
use cbct_core::pipeline::{PipelineConfig, PipelineTrainOutput, StageCheckpoint};
use cbct_core::training::TrainConfig;
use cbct_core::ConeBeamGeometry;

use crate::formats::{
    kv_f64, kv_u64, kv_usize, parse_kv, read_container, write_container, CHECKPOINT_MAGIC,
};
use crate::geomcfg;

fn join_f64(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

fn split_f64(text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| s.trim().parse::<f64>().context("bad numeric list entry"))
        .collect()
}

pub fn save_checkpoint(path: &Path, ck: &StageCheckpoint) -> Result<()> {
    let gen_flat = ck.gen.flatten();
    let disc_flat = ck.disc.flatten();
    let header = format!(
        "stage={}\nepochs={}\nbatch_size={}\ndisc_every={}\nlr_g={}\nlr_d={}\nseed={}\n\
         gen_params={}\ndisc_params={}\nlosses_gen={}\nlosses_disc={}\n",
        ck.stage_index,
        ck.train_config.epochs,
        ck.train_config.batch_size,
        ck.train_config.disc_every,
        ck.train_config.lr_g,
        ck.train_config.lr_d,
        ck.train_config.seed,
        gen_flat.len(),
        disc_flat.len(),
        join_f64(&ck.gen_losses),
        join_f64(&ck.disc_losses),
    );
    let mut payload: Vec<f32> = Vec::with_capacity(gen_flat.len() + disc_flat.len());
    payload.extend(gen_flat.iter().map(|&v| v as f32));
    payload.extend(disc_flat.iter().map(|&v| v as f32));
    write_container(path, CHECKPOINT_MAGIC, &header, &payload)
}

pub fn load_checkpoint(path: &Path) -> Result<StageCheckpoint> {
    let (kv, payload) = read_container(path, CHECKPOINT_MAGIC)?;
    let gen_n = kv_usize(&kv, "gen_params")?;
    let disc_n = kv_usize(&kv, "disc_params")?;
    if payload.len() != gen_n + disc_n {
        bail!(
            "{}: parameter payload has {} values, header promises {}",
            path.display(),
            payload.len(),
            gen_n + disc_n
        );
    }
    let gen_flat: Vec<f64> = payload[..gen_n].iter().map(|&v| v as f64).collect();
    let disc_flat: Vec<f64> = payload[gen_n..].iter().map(|&v| v as f64).collect();
    Ok(StageCheckpoint {
        stage_index: kv_usize(&kv, "stage")?,
        gen: GeneratorParams::from_flat(&gen_flat)?,
        disc: DiscriminatorParams::from_flat(&disc_flat)?,
        train_config: TrainConfig {
            epochs: kv_usize(&kv, "epochs")?,
            batch_size: kv_usize(&kv, "batch_size")?,
            disc_every: kv_usize(&kv, "disc_every")?,
            lr_g: kv_f64(&kv, "lr_g")?,
            lr_d: kv_f64(&kv, "lr_d")?,
            seed: kv_u64(&kv, "seed")?,
        },
        gen_losses: split_f64(kv.get("losses_gen").map(String::as_str).unwrap_or(""))?,
        disc_losses: split_f64(kv.get("losses_disc").map(String::as_str).unwrap_or(""))?,
    })
}

/// Everything `reconstruct` and the experiment harnesses need to replay a
/// trained run.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub geometry: ConeBeamGeometry,
    pub n_views: usize,
    pub view_offset_deg: f64,
    pub config: PipelineConfig,
    pub x0_nmae: f64,
    pub stage_nmae: Vec<f64>,
}

fn filter_name(f: RampFilter) -> &'static str {
    match f {
        RampFilter::Hann => "hann",
        RampFilter::RamLak => "ramlak",
    }
}

pub fn filter_from_name(name: &str) -> Result<RampFilter> {
    match name {
        "hann" => Ok(RampFilter::Hann),
        "ramlak" => Ok(RampFilter::RamLak),
        other => bail!("unknown filter `{other}` (expected `hann` or `ramlak`)"),
    }
}

fn stage_file(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("stage_{index}.ckpt"))
}

/// Writes the manifest and one checkpoint file per stage.
pub fn save_run(
    dir: &Path,
    geometry: &ConeBeamGeometry,
    n_views: usize,
    view_offset_deg: f64,
    config: &PipelineConfig,
    output: &PipelineTrainOutput,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let stage_files: Vec<String> = output
        .checkpoints
        .iter()
        .map(|ck| format!("stage_{}.ckpt", ck.stage_index))
        .collect();
    let manifest = format!(
        "format=cbct-checkpoint-dir\nversion=1\nstages={}\nn_views={n_views}\nview_offset_deg={view_offset_deg}\n\
         geometry_sha256={}\ndso_mm={}\ndsd_mm={}\ndet_rows={}\ndet_cols={}\ndet_pixel_mm={}\n\
         vol_nx={}\nvol_ny={}\nvol_nz={}\nvoxel_mm={}\n\
         depth={}\ncrop={}\nep_beta={}\nep_delta={}\nep_iters={}\nfdk_filter={}\n\
         dc_beta={}\ndc_cg_iters={}\nmask_dilation={}\n\
         epochs={}\nbatch_size={}\ndisc_every={}\nlr_g={}\nlr_d={}\nseed={}\n\
         x0_nmae={}\nstage_nmae={}\nstage_files={}\n",
        config.stages,
        geomcfg::geometry_hash(geometry),
        geometry.dso_mm,
        geometry.dsd_mm,
        geometry.det_rows,
        geometry.det_cols,
        geometry.det_pixel_mm,
        geometry.vol_nx,
        geometry.vol_ny,
        geometry.vol_nz,
        geometry.voxel_mm,
        config.depth,
        config.crop,
        config.ep.beta,
        config.ep.delta,
        config.ep.n_iters,
        filter_name(config.fdk_filter),
        config.dc_beta,
        config.dc_iters,
        config.mask_dilation,
        config.train.epochs,
        config.train.batch_size,
        config.train.disc_every,
        config.train.lr_g,
        config.train.lr_d,
        config.train.seed,
        output.x0_nmae,
        join_f64(&output.stage_nmae),
        stage_files.join(","),
    );
    fs::write(dir.join("manifest.txt"), manifest)?;
    for ck in &output.checkpoints {
        save_checkpoint(&stage_file(dir, ck.stage_index), ck)?;
    }
    Ok(())
}

/// Loads the manifest and all stage checkpoints, in order.
pub fn load_run(dir: &Path) -> Result<(RunManifest, Vec<StageCheckpoint>)> {
    let text = fs::read_to_string(dir.join("manifest.txt"))
        .with_context(|| format!("reading {}", dir.join("manifest.txt").display()))?;
    let kv = parse_kv(&text);
    if kv.get("format").map(String::as_str) != Some("cbct-checkpoint-dir") {
        bail!("{}: not a checkpoint directory manifest", dir.display());
    }

    let geometry = ConeBeamGeometry {
        dso_mm: kv_f64(&kv, "dso_mm")?,
        dsd_mm: kv_f64(&kv, "dsd_mm")?,
        det_rows: kv_usize(&kv, "det_rows")?,
        det_cols: kv_usize(&kv, "det_cols")?,
        det_pixel_mm: kv_f64(&kv, "det_pixel_mm")?,
        vol_nx: kv_usize(&kv, "vol_nx")?,
        vol_ny: kv_usize(&kv, "vol_ny")?,
        vol_nz: kv_usize(&kv, "vol_nz")?,
        voxel_mm: kv_f64(&kv, "voxel_mm")?,
    };
    let expected_hash = kv.get("geometry_sha256").context("missing geometry_sha256")?;
    let actual = geomcfg::geometry_hash(&geometry);
    if &actual != expected_hash {
        bail!("{}: geometry hash mismatch ({actual} vs {expected_hash})", dir.display());
    }

    let config = PipelineConfig {
        stages: kv_usize(&kv, "stages")?,
        train: TrainConfig {
            epochs: kv_usize(&kv, "epochs")?,
            batch_size: kv_usize(&kv, "batch_size")?,
            disc_every: kv_usize(&kv, "disc_every")?,
            lr_g: kv_f64(&kv, "lr_g")?,
            lr_d: kv_f64(&kv, "lr_d")?,
            seed: kv_u64(&kv, "seed")?,
        },
        depth: kv_usize(&kv, "depth")?,
        crop: kv_usize(&kv, "crop")?,
        ep: cbct_core::ep::EpConfig {
            beta: kv_f64(&kv, "ep_beta")?,
            delta: kv_f64(&kv, "ep_delta")?,
            n_iters: kv_usize(&kv, "ep_iters")?,
        },
        fdk_filter: filter_from_name(kv.get("fdk_filter").context("missing fdk_filter")?)?,
        dc_beta: kv_f64(&kv, "dc_beta")?,
        dc_iters: kv_usize(&kv, "dc_cg_iters")?,
        mask_dilation: kv_usize(&kv, "mask_dilation")?,
    };

    let manifest = RunManifest {
        geometry,
        n_views: kv_usize(&kv, "n_views")?,
        view_offset_deg: kv_f64(&kv, "view_offset_deg")?,
        config,
        x0_nmae: kv_f64(&kv, "x0_nmae")?,
        stage_nmae: split_f64(kv.get("stage_nmae").map(String::as_str).unwrap_or(""))?,
    };

    let mut checkpoints = Vec::with_capacity(manifest.config.stages);
    for k in 1..=manifest.config.stages {
        checkpoints.push(load_checkpoint(&stage_file(dir, k))?);
    }
    Ok((manifest, checkpoints))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cbct_core::nn::init_params;

    fn sample_checkpoint(stage: usize, seed: u64) -> StageCheckpoint {
        let (gen, disc) = init_params(seed);
        StageCheckpoint {
            stage_index: stage,
            gen,
            disc,
            train_config: TrainConfig { seed, ..TrainConfig::default() },
            gen_losses: vec![0.5, 0.25, 0.125],
            disc_losses: vec![0.5],
        }
    }

    #[test]
    fn checkpoint_round_trip_preserves_f32_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stage_1.ckpt");
        let ck = sample_checkpoint(1, 9);
        save_checkpoint(&path, &ck).unwrap();
        let back = load_checkpoint(&path).unwrap();

        assert_eq!(back.stage_index, 1);
        assert_eq!(back.train_config, ck.train_config);
        assert_eq!(back.gen_losses, ck.gen_losses);
        // Parameters survive as their f32 projections, exactly.
        for (a, b) in back.gen.flatten().iter().zip(ck.gen.flatten()) {
            assert_eq!(*a, b as f32 as f64);
        }
        // Saving what was loaded reproduces the same bytes.
        let path2 = dir.path().join("again.ckpt");
        save_checkpoint(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn run_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let geom = ConeBeamGeometry::preset(cbct_core::GeometryPreset::Desk);
        let cfg = PipelineConfig { stages: 2, ..PipelineConfig::default_for(&geom) };
        let out = PipelineTrainOutput {
            checkpoints: vec![sample_checkpoint(1, 1), sample_checkpoint(2, 2)],
            x0_nmae: 0.4,
            stage_nmae: vec![0.3, 0.25],
        };
        save_run(dir.path(), &geom, 8, 0.0, &cfg, &out).unwrap();
        let (manifest, cks) = load_run(dir.path()).unwrap();
        assert_eq!(manifest.geometry, geom);
        assert_eq!(manifest.n_views, 8);
        assert_eq!(manifest.config.stages, 2);
        assert_eq!(manifest.stage_nmae, vec![0.3, 0.25]);
        assert_eq!(cks.len(), 2);
        assert_eq!(cks[0].stage_index, 1);
        assert_eq!(cks[1].stage_index, 2);
    }
}
