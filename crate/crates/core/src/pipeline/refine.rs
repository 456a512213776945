use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::compose::Context;
use super::scene::{ComposedScene, RefinementRecord, SceneSpec};
use super::{PipelineError, PipelineStage};
use crate::collision::CollisionParams;
use crate::geometry::{load_mesh, SimilarityTransform, TriangleMesh};
use crate::sdf::{DistanceField, SdfGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose {
    pub id: String,
    pub asset_mesh_path: PathBuf,
    pub transform: Option<SimilarityTransform>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditorRequest {
    pub iteration: usize,
    pub object_id: String,
    pub max_penetration_depth: f64,
    pub pairwise_r_volume: f64,
    /// Current pose of every object in the scene.
    pub scene: Vec<ObjectPose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum EditorResponse {
    /// Swap the object's asset for the mesh at `mesh_path`.
    Replace { mesh_path: PathBuf },
    NoChange,
}

#[derive(Debug, Error)]
pub enum EditorError {
    #[error("cannot run editor: {0}")]
    Io(#[from] std::io::Error),
    #[error("editor exited with {0}")]
    Exit(std::process::ExitStatus),
    #[error("editor timed out after {0:?}")]
    Timeout(Duration),
    #[error("malformed editor response: {0}")]
    Malformed(String),
}

pub trait Editor {
    fn edit(&mut self, request: &EditorRequest) -> Result<EditorResponse, EditorError>;
}

/// Always answers no-change.
#[derive(Debug, Clone, Default)]
pub struct MockEditor {
    pub calls: usize,
}

impl Editor for MockEditor {
    fn edit(&mut self, _request: &EditorRequest) -> Result<EditorResponse, EditorError> {
        self.calls += 1;
        Ok(EditorResponse::NoChange)
    }
}

/// Subprocess editor: request JSON on stdin, response JSON on stdout.
#[derive(Debug, Clone)]
pub struct ExternalEditor {
    program: String,
    args: Vec<String>,
    timeout: Duration,
}

impl ExternalEditor {
    pub fn new(command: &str, timeout: Duration) -> Result<Self, EditorError> {
        let mut parts = command.split_whitespace().map(str::to_owned);
        let program = parts.next().ok_or_else(|| EditorError::Malformed("empty editor command".into()))?;
        Ok(Self { program, args: parts.collect(), timeout })
    }
}

impl Editor for ExternalEditor {
    fn edit(&mut self, request: &EditorRequest) -> Result<EditorResponse, EditorError> {
        let body = serde_json::to_vec(request).map_err(|e| EditorError::Malformed(e.to_string()))?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || {
            let _ = stdin.write_all(&body);
        });
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            stdout.read_to_end(&mut buf).map(|_| buf)
        });
        let start = Instant::now();
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if start.elapsed() >= self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Err(EditorError::Timeout(self.timeout));
            }
            std::thread::sleep(Duration::from_millis(10));
        };
        let _ = writer.join();
        let out = reader.join().map_err(|_| EditorError::Malformed("stdout reader panicked".into()))??;
        if !status.success() {
            return Err(EditorError::Exit(status));
        }
        serde_json::from_slice(&out).map_err(|e| EditorError::Malformed(e.to_string()))
    }
}

fn world_meshes(scene: &ComposedScene) -> Result<Vec<Option<TriangleMesh>>, PipelineError> {
    scene
        .objects
        .iter()
        .map(|o| match &o.transform {
            Some(t) => load_mesh(&o.asset_mesh_path)
                .map(|m| Some(m.transformed(t)))
                .map_err(|e| PipelineError::object(&o.id, PipelineStage::LoadAsset, e)),
            None => Ok(None),
        })
        .collect()
}

/// Index of the object to edit: the later-placed member of the deepest pair.
fn offender(scene: &ComposedScene, spec: &SceneSpec) -> Option<(usize, f64, f64)> {
    let mut worst: Option<&super::PairReport> = None;
    for p in &scene.pairwise {
        if worst.map_or(true, |w| p.report.max_penetration_depth > w.report.max_penetration_depth) {
            worst = Some(p);
        }
    }
    let w = worst?;
    let (a, b) = (spec.index_of(&w.a)?, spec.index_of(&w.b)?);
    let idx = if w.a == scene.anchor_id {
        b
    } else if w.b == scene.anchor_id {
        a
    } else {
        a.max(b)
    };
    Some((idx, w.report.max_penetration_depth, w.report.r_volume))
}

/// Asks `editor` to revise the worst-colliding object until the deepest
/// penetration falls to the trigger threshold, the editor declines, or the
/// iteration cap is hit. Only the edited object is re-placed. Returns the
/// scene with the smallest penetration seen.
pub fn refinement_loop(
    scene: ComposedScene,
    spec: &SceneSpec,
    editor: &mut dyn Editor,
) -> Result<ComposedScene, PipelineError> {
    let ctx = Context::new(spec)?;
    let trigger = spec.refinement.trigger_threshold.unwrap_or(scene.epsilon);
    let collision = CollisionParams { epsilon: Some(scene.epsilon), ..spec.params.collision };
    let mut records = scene.refinement.clone();
    let mut best = scene.clone();
    let mut current = scene;

    for iteration in 0..spec.refinement.max_iterations {
        let Some((idx, depth, r_volume)) = offender(&current, spec) else { break };
        if depth <= trigger {
            break;
        }
        let object_id = spec.objects[idx].id.clone();
        let request = EditorRequest {
            iteration,
            object_id: object_id.clone(),
            max_penetration_depth: depth,
            pairwise_r_volume: r_volume,
            scene: current
                .objects
                .iter()
                .map(|o| ObjectPose { id: o.id.clone(), asset_mesh_path: o.asset_mesh_path.clone(), transform: o.transform })
                .collect(),
        };
        let mut record = RefinementRecord {
            iteration,
            object_id: object_id.clone(),
            depth_before: depth,
            action: String::new(),
            depth_after: None,
            detail: None,
        };
        let fail = |mut record: RefinementRecord, detail: String| {
            log::warn!("refinement stopped at iteration {iteration}: {detail}");
            record.action = "editor-failure".into();
            record.detail = Some(detail);
            record
        };
        let mesh_path = match editor.edit(&request) {
            Err(e) => {
                records.push(fail(record, e.to_string()));
                break;
            }
            Ok(EditorResponse::NoChange) => {
                record.action = "no-change".into();
                records.push(record);
                break;
            }
            Ok(EditorResponse::Replace { mesh_path }) => spec.resolve(&mesh_path),
        };
        record.action = "replace".into();
        record.detail = Some(mesh_path.display().to_string());
        let asset = match load_mesh(&mesh_path) {
            Ok(m) => m,
            Err(e) => {
                records.push(fail(record, format!("{}: {e}", mesh_path.display())));
                break;
            }
        };
        let guidance = ctx.load(idx, true)?;
        let mut world = world_meshes(&current)?;
        let grids = (0..world.len())
            .filter(|&j| j != idx)
            .filter_map(|j| world[j].as_ref().map(|m| (j, m)))
            .map(|(j, m)| ctx.bake(j, m))
            .collect::<Result<Vec<SdfGrid>, _>>()?;
        let fields: Vec<&dyn DistanceField> = grids.iter().map(|g| g as &dyn DistanceField).collect();
        let (t, reg, trace) = match ctx.place(idx, &asset, &guidance, &fields, &collision) {
            Ok(r) => r,
            Err(e) => {
                records.push(fail(record, e.to_string()));
                break;
            }
        };
        world[idx] = Some(asset.transformed(&t));
        let mut next = current.clone();
        let o = &mut next.objects[idx];
        o.asset_mesh_path = mesh_path;
        o.transform = Some(t);
        o.registration = Some(reg);
        o.optimization = Some(trace);
        o.error = None;
        next.pairwise = ctx.pairwise(&world)?;
        let after = next.max_penetration();
        record.depth_after = Some(after);
        records.push(record);
        if after < best.max_penetration() {
            best = next.clone();
        }
        current = next;
    }
    best.refinement = records;
    Ok(best)
}
