use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, PipelineStage};
use crate::collision::{CollisionParams, OptimizationTrace};
use crate::geometry::{load_mesh, Aabb, SimilarityTransform};
use crate::metrics::{IntersectionReport, DEFAULT_SAMPLES};
use crate::registration::{AlignDirection, CoarseEstimate, IcpParams, IcpResult};
use crate::sdf::{DEFAULT_PADDING, DEFAULT_RESOLUTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub asset_mesh_path: PathBuf,
    pub guidance_mesh_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_hint: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub collision: CollisionParams,
    pub icp: IcpParams,
    /// Surface samples per mesh for registration and placement.
    pub sample_count: usize,
    pub sdf_resolution: usize,
    pub sdf_padding: f64,
    pub seed: u64,
    /// `"ppf-ransac"` or `"external:<command>"`.
    pub registrar: String,
    pub align_direction: AlignDirection,
    pub metrics_samples: usize,
    /// Abort on the first object that cannot be placed.
    pub strict: bool,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            collision: CollisionParams::default(),
            icp: IcpParams::default(),
            sample_count: 5000,
            sdf_resolution: DEFAULT_RESOLUTION,
            sdf_padding: DEFAULT_PADDING,
            seed: 0,
            registrar: "ppf-ransac".into(),
            align_direction: AlignDirection::default(),
            metrics_samples: DEFAULT_SAMPLES,
            strict: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinementConfig {
    pub enabled: bool,
    pub max_iterations: usize,
    /// Penetration depth that triggers an edit; `None` means epsilon.
    pub trigger_threshold: Option<f64>,
    /// External editor command; the mock editor is used when unset.
    pub editor: Option<String>,
    pub editor_timeout_secs: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self { enabled: false, max_iterations: 5, trigger_threshold: None, editor: None, editor_timeout_secs: 60.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub params: SceneParams,
    #[serde(default)]
    pub refinement: RefinementConfig,
    /// Directory relative mesh paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SceneSpec {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut spec: SceneSpec = serde_json::from_str(text)?;
        spec.base_dir = base_dir.into();
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.into(), source })?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|source| PipelineError::Io { path: path.into(), source })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidScene(m));
        if self.objects.len() < 2 {
            return bad(format!("need at least 2 objects, got {}", self.objects.len()));
        }
        let mut seen = HashSet::new();
        for o in &self.objects {
            if !seen.insert(o.id.as_str()) {
                return bad(format!("duplicate object id '{}'", o.id));
            }
        }
        let hints = self.objects.iter().filter(|o| o.anchor_hint == Some(true)).count();
        if hints > 1 {
            return bad(format!("{hints} objects carry anchor_hint; at most one may"));
        }
        if self.params.sample_count < 3 {
            return bad("sample_count must be at least 3".into());
        }
        if self.params.sdf_resolution < 8 {
            return bad("sdf_resolution must be at least 8".into());
        }
        if self.params.metrics_samples < 1 {
            return bad("metrics_samples must be at least 1".into());
        }
        self.params.collision.validate().map_err(|e| PipelineError::InvalidScene(e.to_string()))?;
        self.params.icp.validate().map_err(|e| PipelineError::InvalidScene(e.to_string()))?;
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }
}

/// Anchor by hint, else the guidance box with the largest x–y footprint,
/// then the largest volume, then the lowest index.
pub fn select_anchor_index(hints: &[Option<bool>], guidance_bounds: &[Aabb]) -> usize {
    if let Some(i) = hints.iter().position(|h| *h == Some(true)) {
        return i;
    }
    let key = |b: &Aabb| {
        let e = b.extent();
        (e.x * e.y, b.volume())
    };
    let mut best = 0;
    for i in 1..guidance_bounds.len() {
        let (a, v) = key(&guidance_bounds[i]);
        let (ba, bv) = key(&guidance_bounds[best]);
        if a > ba || (a == ba && v > bv) {
            best = i;
        }
    }
    best
}

/// Loads every guidance mesh and applies [`select_anchor_index`].
pub fn select_anchor(spec: &SceneSpec) -> Result<String, PipelineError> {
    let hints: Vec<Option<bool>> = spec.objects.iter().map(|o| o.anchor_hint).collect();
    if let Some(i) = hints.iter().position(|h| *h == Some(true)) {
        return Ok(spec.objects[i].id.clone());
    }
    let bounds = spec
        .objects
        .iter()
        .map(|o| {
            load_mesh(spec.resolve(&o.guidance_mesh_path))
                .map(|m| m.aabb())
                .map_err(|e| PipelineError::object(&o.id, PipelineStage::LoadGuidance, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(spec.objects[select_anchor_index(&hints, &bounds)].id.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationRecord {
    pub obb_scale: f64,
    pub coarse: CoarseEstimate,
    /// Present for the anchor, which is refined by ICP alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icp: Option<IcpResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposedObject {
    pub id: String,
    pub asset_mesh_path: PathBuf,
    /// `None` when the object could not be placed.
    pub transform: Option<SimilarityTransform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registration: Option<RegistrationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimization: Option<OptimizationTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub a: String,
    pub b: String,
    pub report: IntersectionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub iteration: usize,
    pub object_id: String,
    pub depth_before: f64,
    /// `"replace"`, `"no-change"` or `"editor-failure"`.
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_after: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposedScene {
    pub anchor_id: String,
    pub epsilon: f64,
    pub objects: Vec<ComposedObject>,
    pub pairwise: Vec<PairReport>,
    #[serde(default)]
    pub refinement: Vec<RefinementRecord>,
}

impl ComposedScene {
    pub fn object(&self, id: &str) -> Option<&ComposedObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Deepest mutual penetration over all pairs.
    pub fn max_penetration(&self) -> f64 {
        self.pairwise.iter().map(|p| p.report.max_penetration_depth).fold(0.0, f64::max)
    }

    pub fn max_r_volume(&self) -> f64 {
        self.pairwise.iter().map(|p| p.report.r_volume).fold(0.0, f64::max)
    }
}
