//! End-to-end composition: anchor alignment, collision-aware placement of
//! the remaining objects, pairwise metrics, the editor refinement loop and
//! a synthetic benchmark generator.

mod compose;
mod refine;
mod scene;
pub mod synthetic;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub use compose::{compose, compose_pair, compose_sequential};
pub use refine::{
    refinement_loop, Editor, EditorError, EditorRequest, EditorResponse, ExternalEditor, MockEditor, ObjectPose,
};
pub use scene::{
    select_anchor, select_anchor_index, ComposedObject, ComposedScene, ObjectSpec, PairReport, RefinementConfig,
    RefinementRecord, RegistrationRecord, SceneParams, SceneSpec,
};
pub use synthetic::{generate_synthetic_case, generate_synthetic_scene, GroundTruth, SyntheticCase, SyntheticKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineStage {
    LoadAsset,
    LoadGuidance,
    AnchorAlignment,
    SdfBake,
    Placement,
    Metrics,
}

impl fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LoadAsset => "loading asset mesh",
            Self::LoadGuidance => "loading guidance mesh",
            Self::AnchorAlignment => "anchor alignment",
            Self::SdfBake => "SDF bake",
            Self::Placement => "placement",
            Self::Metrics => "metrics",
        })
    }
}

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("object '{id}', {stage}: {source}")]
    Object {
        id: String,
        stage: PipelineStage,
        #[source]
        source: BoxError,
    },
    #[error("pair '{a}'/'{b}' metrics: {source}")]
    Metrics {
        a: String,
        b: String,
        #[source]
        source: crate::metrics::MetricsError,
    },
    #[error("registrar: {0}")]
    Registrar(#[from] crate::registration::RegistrationError),
}

impl PipelineError {
    pub(crate) fn object(id: &str, stage: PipelineStage, source: impl Into<BoxError>) -> Self {
        Self::Object { id: id.to_owned(), stage, source: source.into() }
    }

    /// Id of the object the error is attributed to, if any.
    pub fn object_id(&self) -> Option<&str> {
        match self {
            Self::Object { id, .. } => Some(id),
            _ => None,
        }
    }
}
