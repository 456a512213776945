//! Similarity registration: closed-form solve, scale-aware ICP, coarse
//! global registration and the global-to-local alignment pipeline.

mod align;
pub mod coarse;
mod correspondence;
mod icp;
mod umeyama;

use std::fmt;

use thiserror::Error;

use crate::geometry::GeometryError;

pub use align::{coarse_stage, global_to_local_align, AlignConfig, AlignDirection, Alignment, CoarseStage};
pub use coarse::{registrar_from_id, CoarseEstimate, CoarseRegistrar, ExternalRegistrar, PpfRansac, PpfRansacParams};
pub use correspondence::{find_correspondences, find_correspondences_indexed, Correspondences};
pub use icp::{alignment_objective, scale_aware_icp, IcpIteration, IcpParams, IcpResult};
pub use umeyama::umeyama_solve;

/// Pipeline stage that produced an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignStage {
    Sampling,
    ScaleEstimate,
    Coarse,
    Refine,
}

impl fmt::Display for AlignStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sampling => "surface sampling",
            Self::ScaleEstimate => "OBB scale estimate",
            Self::Coarse => "coarse registration",
            Self::Refine => "scale-aware ICP",
        })
    }
}

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("source and target lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("no correspondences survived rejection")]
    NoCorrespondences,
    #[error("registration failed: {0}")]
    RegistrationFailed(String),
    #[error("external registrar: {0}")]
    External(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{stage}: {source}")]
    Stage {
        stage: AlignStage,
        #[source]
        source: Box<RegistrationError>,
    },
}

impl RegistrationError {
    pub(crate) fn at(self, stage: AlignStage) -> Self {
        Self::Stage { stage, source: Box::new(self) }
    }

    /// The innermost error, with stage labels stripped.
    pub fn root(&self) -> &RegistrationError {
        match self {
            Self::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
