use std::path::Path;

use meshcompose::geometry::{primitives, save_obj, SimilarityTransform, TriangleMesh, Vector};
use meshcompose::pipeline::{
    compose, compose_pair, compose_sequential, generate_synthetic_scene, refinement_loop, ComposedScene, Editor,
    EditorError, EditorRequest, EditorResponse, MockEditor, PipelineError, PipelineStage, SceneSpec, SyntheticKind,
};
use meshcompose::registration::{global_to_local_align, registrar_from_id, AlignConfig, AlignDirection};
use meshcompose::rng::derive_seed;
use nalgebra::UnitQuaternion;

/// Cheaper settings; nothing here depends on metric precision.
fn quick(spec: &mut SceneSpec) {
    spec.params.sample_count = 2000;
    spec.params.sdf_resolution = 64;
    spec.params.metrics_samples = 20_000;
}

fn synthetic(kind: SyntheticKind, seed: u64, count: usize, dir: &Path) -> SceneSpec {
    let mut spec = generate_synthetic_scene(kind, seed, count, dir).unwrap().spec;
    quick(&mut spec);
    spec
}

fn shifted(m: TriangleMesh, x: f64) -> TriangleMesh {
    m.transformed(&SimilarityTransform::new(1.0, UnitQuaternion::identity(), Vector::new(x, 0.0, 0.0)))
}

/// Anchor cube and a second cube that overlaps it by 0.3 along x.
fn overlapping_cubes(dir: &Path) -> SceneSpec {
    let cube = primitives::subdivided_box(Vector::new(0.5, 0.5, 0.5), 6);
    save_obj(&cube, dir.join("a.obj")).unwrap();
    save_obj(&shifted(cube, 0.7), dir.join("b.obj")).unwrap();
    let json = r#"{"objects": [
        {"id": "a", "asset_mesh_path": "a.obj", "guidance_mesh_path": "a.obj", "anchor_hint": true},
        {"id": "b", "asset_mesh_path": "b.obj", "guidance_mesh_path": "b.obj"}],
      "refinement": {"enabled": true}}"#;
    let mut spec = SceneSpec::from_json(json, dir).unwrap();
    quick(&mut spec);
    spec
}

fn anchor_transform(s: &ComposedScene) -> SimilarityTransform {
    s.objects.iter().find(|o| o.id == s.anchor_id).and_then(|o| o.transform).unwrap()
}

#[test]
fn zero_beta_pair_matches_independent_registration() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = synthetic(SyntheticKind::Clean, 4, 2, dir.path());
    spec.params.collision.beta_max = 0.0;
    spec.params.align_direction = AlignDirection::AssetToGuidance;
    spec.params.icp.max_iterations = spec.params.collision.k_max;
    spec.params.icp.convergence_tol = 1e-12;
    let scene = compose_pair(&spec).unwrap();
    let registrar = registrar_from_id(&spec.params.registrar).unwrap();
    for (i, o) in spec.objects.iter().enumerate() {
        let asset = meshcompose::geometry::load_mesh(spec.resolve(&o.asset_mesh_path)).unwrap();
        let guide = meshcompose::geometry::load_mesh(spec.resolve(&o.guidance_mesh_path)).unwrap();
        let config = AlignConfig {
            sample_n: spec.params.sample_count,
            seed: derive_seed(spec.params.seed, i as u64),
            icp: spec.params.icp,
            direction: spec.params.align_direction,
        };
        let t = global_to_local_align(&asset, &guide, &config, registrar.as_ref()).unwrap().result.transform;
        let got = scene.objects[i].transform.unwrap();
        let sign = got.rotation.coords.dot(&t.rotation.coords).signum();
        assert!((got.scale - t.scale).abs() < 1e-6, "{}", o.id);
        assert!((got.rotation.coords - sign * t.rotation.coords).amax() < 1e-6, "{}", o.id);
        assert!((got.translation - t.translation).amax() < 1e-6, "{}", o.id);
    }
}

#[test]
fn sequential_places_every_non_anchor_once() {
    let dir = tempfile::tempdir().unwrap();
    let spec = synthetic(SyntheticKind::Clean, 2, 3, dir.path());
    let scene = compose_sequential(&spec).unwrap();
    let traced = scene.objects.iter().filter(|o| o.optimization.is_some()).count();
    assert_eq!(traced, 2);
    let anchor = scene.objects.iter().find(|o| o.id == scene.anchor_id).unwrap();
    assert!(anchor.optimization.is_none() && anchor.registration.as_ref().unwrap().icp.is_some());
    assert_eq!(scene.pairwise.len(), 3);
    assert!(compose_pair(&spec).is_err());
}

#[test]
fn composed_scene_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let spec = synthetic(SyntheticKind::Clean, 7, 2, dir.path());
    let scene = compose(&spec).unwrap();
    let back = ComposedScene::from_json(&scene.to_json().unwrap()).unwrap();
    for (a, b) in scene.objects.iter().zip(&back.objects) {
        let (a, b) = (a.transform.unwrap(), b.transform.unwrap());
        assert!((a.scale - b.scale).abs() <= 1e-12);
        assert!((a.rotation.coords - b.rotation.coords).amax() <= 1e-12);
        assert!((a.translation - b.translation).amax() <= 1e-12);
    }
    assert_eq!(back, scene);
}

struct Stubborn(usize);

impl Editor for Stubborn {
    fn edit(&mut self, _: &EditorRequest) -> Result<EditorResponse, EditorError> {
        self.0 += 1;
        Ok(EditorResponse::Replace { mesh_path: "b.obj".into() })
    }
}

struct Broken;

impl Editor for Broken {
    fn edit(&mut self, _: &EditorRequest) -> Result<EditorResponse, EditorError> {
        Err(EditorError::Malformed("garbage".into()))
    }
}

#[test]
fn refinement_respects_cap_and_keeps_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = overlapping_cubes(dir.path());
    let scene = compose(&spec).unwrap();
    assert!(scene.max_penetration() > scene.epsilon, "cubes should still collide");
    let anchor = serde_json::to_string(&anchor_transform(&scene)).unwrap();

    for cap in [0, 2, 5] {
        spec.refinement.max_iterations = cap;
        let mut editor = Stubborn(0);
        let out = refinement_loop(scene.clone(), &spec, &mut editor).unwrap();
        assert_eq!(editor.0, cap);
        assert_eq!(out.refinement.len(), cap);
        assert_eq!(serde_json::to_string(&anchor_transform(&out)).unwrap(), anchor);
        assert!(out.max_penetration() <= scene.max_penetration());
    }

    spec.refinement.max_iterations = 5;
    let mut mock = MockEditor::default();
    let out = refinement_loop(scene.clone(), &spec, &mut mock).unwrap();
    assert_eq!(mock.calls, 1);
    assert_eq!(out.refinement[0].action, "no-change");

    let out = refinement_loop(scene.clone(), &spec, &mut Broken).unwrap();
    assert_eq!(out.refinement.len(), 1);
    assert_eq!(out.refinement[0].action, "editor-failure");
    assert_eq!(out.objects, scene.objects);

    spec.refinement.trigger_threshold = Some(1e9);
    let mut mock = MockEditor::default();
    let out = refinement_loop(scene.clone(), &spec, &mut mock).unwrap();
    assert_eq!(mock.calls, 0);
    assert_eq!(out, scene);
}

#[test]
fn strict_errors_name_the_object() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = overlapping_cubes(dir.path());
    spec.objects[1].asset_mesh_path = "missing.obj".into();
    match compose(&spec) {
        Err(PipelineError::Object { id, stage, .. }) => {
            assert_eq!(id, "b");
            assert_eq!(stage, PipelineStage::LoadAsset);
        }
        other => panic!("expected an object error, got {other:?}"),
    }
}

#[test]
fn lenient_mode_records_placement_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = overlapping_cubes(dir.path());
    // A flat guidance sheet gives no usable scale prior.
    let sheet = TriangleMesh::new(
        vec![[0.0, 0.0, 0.0].into(), [1.0, 0.0, 0.0].into(), [1.0, 1.0, 0.0].into(), [0.0, 1.0, 0.0].into()],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .unwrap();
    save_obj(&sheet, dir.path().join("sheet.obj")).unwrap();
    spec.objects[1].guidance_mesh_path = "sheet.obj".into();

    let err = compose(&spec).unwrap_err();
    assert!(matches!(&err, PipelineError::Object { id, stage: PipelineStage::Placement, .. } if id == "b"), "{err}");

    spec.params.strict = false;
    let scene = compose(&spec).unwrap();
    let b = &scene.objects[1];
    assert!(b.transform.is_none() && b.error.as_deref().is_some_and(|e| e.contains("'b'")));
    assert!(scene.objects[0].transform.is_some());
    assert!(scene.pairwise.is_empty());
}
