use serde::{Deserialize, Serialize};

use super::{scale_aware_icp, AlignStage, CoarseEstimate, CoarseRegistrar, IcpParams, IcpResult, RegistrationError};
use crate::geometry::{compute_obb, estimate_scale_from_obb, sample_surface, PointCloud, TriangleMesh};
use crate::rng::derive_seed;

/// Which cloud is moved during registration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignDirection {
    /// Register the asset onto the guidance directly.
    AssetToGuidance,
    /// Register the guidance onto the asset and invert. Partial guidance
    /// then sits inside the complete asset, so trimming only has to
    /// discard guidance noise.
    #[default]
    GuidanceToAsset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    pub sample_n: usize,
    pub seed: u64,
    pub icp: IcpParams,
    pub direction: AlignDirection,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self { sample_n: 5000, seed: 0, icp: IcpParams::default(), direction: AlignDirection::default() }
    }
}

/// Outcome of [`global_to_local_align`]. `result.transform` always maps the
/// asset into the guidance frame and `result.final_rmse` is measured in the
/// guidance frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub result: IcpResult,
    pub coarse: CoarseEstimate,
    pub obb_scale: f64,
}

/// Surface samples of both meshes plus a coarse asset→guidance estimate.
#[derive(Debug, Clone)]
pub struct CoarseStage {
    pub asset_points: PointCloud,
    pub guidance_points: PointCloud,
    pub obb_scale: f64,
    /// Always maps the asset into the guidance frame.
    pub coarse: CoarseEstimate,
}

/// Sample both surfaces, estimate scale from oriented boxes and register
/// coarsely in the configured direction.
pub fn coarse_stage(
    source: &TriangleMesh,
    guidance: &TriangleMesh,
    config: &AlignConfig,
    registrar: &dyn CoarseRegistrar,
) -> Result<CoarseStage, RegistrationError> {
    let p = sample_surface(source, config.sample_n, derive_seed(config.seed, 1))
        .map_err(|e| RegistrationError::from(e).at(AlignStage::Sampling))?;
    let q = sample_surface(guidance, config.sample_n, derive_seed(config.seed, 2))
        .map_err(|e| RegistrationError::from(e).at(AlignStage::Sampling))?;
    let obb_scale = estimate_scale_from_obb(&compute_obb(&p), &compute_obb(&q))
        .map_err(|e| RegistrationError::from(e).at(AlignStage::ScaleEstimate))?;
    let seed = derive_seed(config.seed, 3);
    let coarse = match config.direction {
        AlignDirection::AssetToGuidance => registrar.register(&p, &q, obb_scale, seed),
        AlignDirection::GuidanceToAsset => registrar
            .register(&q, &p, 1.0 / obb_scale, seed)
            .map(|c| CoarseEstimate { transform: c.transform.inverse(), ..c }),
    }
    .map_err(|e| e.at(AlignStage::Coarse))?;
    Ok(CoarseStage { asset_points: p, guidance_points: q, obb_scale, coarse })
}

/// Coarse stage followed by scale-aware ICP refinement.
pub fn global_to_local_align(
    source: &TriangleMesh,
    guidance: &TriangleMesh,
    config: &AlignConfig,
    registrar: &dyn CoarseRegistrar,
) -> Result<Alignment, RegistrationError> {
    config.icp.validate()?;
    let stage = coarse_stage(source, guidance, config, registrar)?;
    let (p, q, coarse) = (&stage.asset_points, &stage.guidance_points, stage.coarse);
    let result = match config.direction {
        AlignDirection::AssetToGuidance => {
            scale_aware_icp(p, q, &coarse.transform, &config.icp).map_err(|e| e.at(AlignStage::Refine))?
        }
        AlignDirection::GuidanceToAsset => {
            let mut r = scale_aware_icp(q, p, &coarse.transform.inverse(), &config.icp)
                .map_err(|e| e.at(AlignStage::Refine))?;
            r.transform = r.transform.inverse();
            // Residuals were measured in the asset frame.
            r.final_rmse *= r.transform.scale;
            r
        }
    };
    Ok(Alignment { result, coarse, obb_scale: stage.obb_scale })
}
