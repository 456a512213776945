use super::scene::{select_anchor_index, ComposedObject, ComposedScene, PairReport, RegistrationRecord, SceneSpec};
use super::{PipelineError, PipelineStage};
use crate::collision::{optimize_placement, CollisionParams, OptimizationTrace};
use crate::geometry::{load_mesh, SimilarityTransform, TriangleMesh};
use crate::metrics::intersection_report;
use crate::registration::{coarse_stage, global_to_local_align, registrar_from_id, AlignConfig, CoarseRegistrar};
use crate::rng::derive_seed;
use crate::sdf::{bake_sdf, DistanceField, SdfGrid, UnionField};

/// Seed tag offset for pairwise metrics, clear of the per-object tags.
const METRICS_TAG: u64 = 1 << 32;

pub(crate) struct Context<'a> {
    pub spec: &'a SceneSpec,
    pub registrar: Box<dyn CoarseRegistrar>,
}

impl<'a> Context<'a> {
    pub fn new(spec: &'a SceneSpec) -> Result<Self, PipelineError> {
        spec.validate()?;
        Ok(Self { spec, registrar: registrar_from_id(&spec.params.registrar)? })
    }

    pub fn align_config(&self, index: usize) -> AlignConfig {
        let p = &self.spec.params;
        AlignConfig { sample_n: p.sample_count, seed: derive_seed(p.seed, index as u64), icp: p.icp, direction: p.align_direction }
    }

    pub fn load(&self, index: usize, guidance: bool) -> Result<TriangleMesh, PipelineError> {
        let o = &self.spec.objects[index];
        let (path, stage) = if guidance {
            (&o.guidance_mesh_path, PipelineStage::LoadGuidance)
        } else {
            (&o.asset_mesh_path, PipelineStage::LoadAsset)
        };
        load_mesh(self.spec.resolve(path)).map_err(|e| PipelineError::object(&o.id, stage, e))
    }

    pub fn bake(&self, index: usize, world: &TriangleMesh) -> Result<SdfGrid, PipelineError> {
        let p = &self.spec.params;
        bake_sdf(world, p.sdf_resolution, p.sdf_padding)
            .map_err(|e| PipelineError::object(&self.spec.objects[index].id, PipelineStage::SdfBake, e))
    }

    /// Coarse initialisation against the guidance, then collision-aware
    /// optimisation against `fields`.
    pub fn place(
        &self,
        index: usize,
        asset: &TriangleMesh,
        guidance: &TriangleMesh,
        fields: &[&dyn DistanceField],
        collision: &CollisionParams,
    ) -> Result<(SimilarityTransform, RegistrationRecord, OptimizationTrace), PipelineError> {
        let id = &self.spec.objects[index].id;
        let err = |e: Box<dyn std::error::Error + Send + Sync>| PipelineError::object(id, PipelineStage::Placement, e);
        let stage = coarse_stage(asset, guidance, &self.align_config(index), self.registrar.as_ref())
            .map_err(|e| err(e.into()))?;
        let field = UnionField::new(fields.to_vec());
        let trace = optimize_placement(
            &stage.asset_points,
            &stage.guidance_points,
            &field,
            &stage.coarse.transform,
            collision,
            &self.spec.params.icp,
        )
        .map_err(|e| err(e.into()))?;
        let record = RegistrationRecord { obb_scale: stage.obb_scale, coarse: stage.coarse, icp: None };
        Ok((trace.final_transform, record, trace))
    }

    /// Reports for every pair of placed objects, in list order.
    pub fn pairwise(&self, world: &[Option<TriangleMesh>]) -> Result<Vec<PairReport>, PipelineError> {
        let n = world.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let (Some(a), Some(b)) = (&world[i], &world[j]) else { continue };
                let (ia, ib) = (&self.spec.objects[i].id, &self.spec.objects[j].id);
                let seed = derive_seed(self.spec.params.seed, METRICS_TAG + (i * n + j) as u64);
                let report = intersection_report(a, b, self.spec.params.metrics_samples, seed)
                    .map_err(|source| PipelineError::Metrics { a: ia.clone(), b: ib.clone(), source })?;
                out.push(PairReport { a: ia.clone(), b: ib.clone(), report });
            }
        }
        Ok(out)
    }
}

/// Anchor alignment followed by sequential collision-aware placement of the
/// other objects in list order. Each placement is pushed out of the union
/// of every object placed before it.
pub fn compose(spec: &SceneSpec) -> Result<ComposedScene, PipelineError> {
    let ctx = Context::new(spec)?;
    let n = spec.objects.len();
    let mut assets = Vec::with_capacity(n);
    let mut guidance = Vec::with_capacity(n);
    for i in 0..n {
        assets.push(ctx.load(i, false)?);
        guidance.push(ctx.load(i, true)?);
    }
    let hints: Vec<Option<bool>> = spec.objects.iter().map(|o| o.anchor_hint).collect();
    let bounds: Vec<_> = guidance.iter().map(|g| g.aabb()).collect();
    let anchor = select_anchor_index(&hints, &bounds);
    let anchor_id = spec.objects[anchor].id.clone();

    let mut objects: Vec<ComposedObject> = spec
        .objects
        .iter()
        .map(|o| ComposedObject {
            id: o.id.clone(),
            asset_mesh_path: spec.resolve(&o.asset_mesh_path),
            transform: None,
            registration: None,
            optimization: None,
            error: None,
        })
        .collect();

    let align = global_to_local_align(&assets[anchor], &guidance[anchor], &ctx.align_config(anchor), ctx.registrar.as_ref())
        .map_err(|e| PipelineError::object(&anchor_id, PipelineStage::AnchorAlignment, e))?;
    let anchor_t = align.result.transform;
    objects[anchor].transform = Some(anchor_t);
    objects[anchor].registration =
        Some(RegistrationRecord { obb_scale: align.obb_scale, coarse: align.coarse, icp: Some(align.result) });

    let mut world: Vec<Option<TriangleMesh>> = vec![None; n];
    world[anchor] = Some(assets[anchor].transformed(&anchor_t));
    let anchor_world = world[anchor].as_ref().expect("anchor placed");
    let collision = spec.params.collision.resolved(anchor_world.aabb().diagonal());
    let epsilon = collision.epsilon.expect("resolved");

    let mut grids: Vec<Option<SdfGrid>> = vec![None; n];
    let mut order = vec![anchor];
    for i in (0..n).filter(|&i| i != anchor) {
        for &j in &order {
            if grids[j].is_none() {
                grids[j] = Some(ctx.bake(j, world[j].as_ref().expect("placed"))?);
            }
        }
        let fields: Vec<&dyn DistanceField> =
            order.iter().map(|&j| grids[j].as_ref().expect("baked") as &dyn DistanceField).collect();
        match ctx.place(i, &assets[i], &guidance[i], &fields, &collision) {
            Ok((t, reg, trace)) => {
                world[i] = Some(assets[i].transformed(&t));
                objects[i].transform = Some(t);
                objects[i].registration = Some(reg);
                objects[i].optimization = Some(trace);
                order.push(i);
            }
            Err(e) if spec.params.strict => return Err(e),
            Err(e) => {
                log::warn!("{e}");
                objects[i].error = Some(e.to_string());
            }
        }
    }

    let pairwise = ctx.pairwise(&world)?;
    Ok(ComposedScene { anchor_id, epsilon, objects, pairwise, refinement: Vec::new() })
}

/// [`compose`] for exactly two objects.
pub fn compose_pair(spec: &SceneSpec) -> Result<ComposedScene, PipelineError> {
    if spec.objects.len() != 2 {
        return Err(PipelineError::InvalidScene(format!("pair composition needs 2 objects, got {}", spec.objects.len())));
    }
    compose(spec)
}

/// [`compose`] for three or more objects.
pub fn compose_sequential(spec: &SceneSpec) -> Result<ComposedScene, PipelineError> {
    if spec.objects.len() < 3 {
        return Err(PipelineError::InvalidScene(format!(
            "sequential composition needs at least 3 objects, got {}",
            spec.objects.len()
        )));
    }
    compose(spec)
}
