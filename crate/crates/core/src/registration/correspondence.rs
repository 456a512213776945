use serde::{Deserialize, Serialize};

use super::{IcpParams, RegistrationError};
use crate::geometry::kdtree::KdTree;
use crate::geometry::{Point, PointCloud};

/// Source/target index pairs, ascending by source index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Correspondences {
    pub pairs: Vec<(usize, usize)>,
    pub weights: Option<Vec<f64>>,
    /// Squared distance of each pair at the pose it was found.
    pub distances_squared: Vec<f64>,
}

impl Correspondences {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Nearest target point for every source point, then distance rejection,
/// then trimming of the worst `trim_fraction` of what is left.
pub fn find_correspondences(
    transformed_source: &PointCloud,
    target: &PointCloud,
    params: &IcpParams,
) -> Result<Correspondences, RegistrationError> {
    if target.is_empty() {
        return Err(RegistrationError::EmptyCloud);
    }
    find_correspondences_indexed(&transformed_source.points, &KdTree::new(&target.points), params)
}

/// As [`find_correspondences`] with a prebuilt target index.
pub fn find_correspondences_indexed(
    transformed_source: &[Point],
    target: &KdTree,
    params: &IcpParams,
) -> Result<Correspondences, RegistrationError> {
    if transformed_source.is_empty() || target.is_empty() {
        return Err(RegistrationError::EmptyCloud);
    }
    let max_d2 = params.correspondence_max_dist.map(|d| d * d);
    let mut cands: Vec<(usize, usize, f64)> = transformed_source
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let (j, d2) = target.nearest(p)?;
            match max_d2 {
                Some(m) if d2 > m => None,
                _ => Some((i, j, d2)),
            }
        })
        .collect();

    let drop = ((params.trim_fraction * cands.len() as f64) + 1e-9).floor() as usize;
    if drop > 0 {
        cands.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
        cands.truncate(cands.len() - drop);
        cands.sort_by_key(|c| c.0);
    }
    if cands.is_empty() {
        return Err(RegistrationError::NoCorrespondences);
    }
    Ok(Correspondences {
        pairs: cands.iter().map(|c| (c.0, c.1)).collect(),
        weights: None,
        distances_squared: cands.iter().map(|c| c.2).collect(),
    })
}
