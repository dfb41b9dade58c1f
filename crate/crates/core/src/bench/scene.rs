//! Scene configuration files, built-in scenes and on-disk datasets.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::formats::{self, FORMAT_VERSION};
use super::BenchError;
use crate::camera::{CameraIntrinsics, Pose};
use crate::cmax::{CmaxConfig, MotionModel};
use crate::event::{EventStream, Micros};
use crate::pipeline::{MarkerMap, PipelineConfig};
use crate::protocol::ProtocolConfig;
use crate::sim::{
    export_ground_truth, inject_noise, make_annotations, simulate_edge_events, simulate_led_events, Annotation,
    EdgeSegment, LedMarker, Motion, Sensitivity, SimConfig, TrajectorySpec, Waypoint,
};
use crate::so3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSection {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u16,
    pub height: u16,
}

impl Default for CameraSection {
    fn default() -> Self {
        Self { fx: 600.0, fy: 600.0, cx: 320.0, cy: 240.0, width: 640, height: 480 }
    }
}

impl CameraSection {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics, String> {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub sensitivity: Sensitivity,
    /// Overrides the sensitivity preset's threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast_threshold: Option<f64>,
    pub render_step_us: Micros,
    pub noise_rate_hz: f64,
    pub jitter_us: Micros,
    pub dup_events: u32,
    pub seed: u64,
    pub annotation_rate_hz: f64,
    pub gt_pose_rate_hz: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            sensitivity: Sensitivity::Low,
            contrast_threshold: None,
            render_step_us: 100,
            noise_rate_hz: 0.0,
            jitter_us: 0,
            dup_events: 0,
            seed: 0,
            annotation_rate_hz: 120.0,
            gt_pose_rate_hz: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Static,
    Translation,
    Rotation,
    Waypoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointConfig {
    pub t: Micros,
    pub position: [f64; 3],
    /// Rotation vector (axis times angle, radians), camera to world.
    #[serde(default)]
    pub rotation: [f64; 3],
}

/// Start pose (camera center and rotation vector) plus motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub kind: TrajectoryKind,
    pub t0: Micros,
    pub t1: Micros,
    pub position: [f64; 3],
    pub rotation: [f64; 3],
    /// m/s, world frame (translation).
    pub velocity: [f64; 3],
    /// rad/s, world frame (rotation).
    pub angular_velocity: [f64; 3],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub waypoints: Vec<WaypointConfig>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Static,
            t0: 0,
            t1: 300_000,
            position: [0.0; 3],
            rotation: [0.0; 3],
            velocity: [0.0; 3],
            angular_velocity: [0.0; 3],
            waypoints: Vec::new(),
        }
    }
}

fn pose_of(position: [f64; 3], rotation: [f64; 3]) -> Pose {
    Pose { rotation: so3::rotation_exp(&Vector3::from(rotation)), translation: Vector3::from(position) }
}

impl TrajectoryConfig {
    pub fn spec(&self) -> Result<TrajectorySpec, String> {
        let motion = match self.kind {
            TrajectoryKind::Static => Motion::Static,
            TrajectoryKind::Translation => Motion::Translation { velocity: Vector3::from(self.velocity) },
            TrajectoryKind::Rotation => Motion::Rotation { angular_velocity: Vector3::from(self.angular_velocity) },
            TrajectoryKind::Waypoints => Motion::Waypoints(
                self.waypoints.iter().map(|w| Waypoint { t: w.t, pose: pose_of(w.position, w.rotation) }).collect(),
            ),
        };
        TrajectorySpec::new(pose_of(self.position, self.rotation), motion, self.t0, self.t1).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerConfig {
    pub id: u64,
    pub position: [f64; 3],
    pub radius_m: f64,
    #[serde(default)]
    pub phase_us: Micros,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub contrast: f64,
}

/// Pipeline settings stored with a scene. Whether compensation runs is
/// chosen per benchmark mode, and the protocol comes from the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub window_us: Micros,
    pub frame_rate_hz: f64,
    pub model: MotionModel,
    pub min_points_pnp: usize,
    pub cmax: CmaxConfig,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            window_us: p.window_us,
            frame_rate_hz: p.frame_rate_hz,
            model: p.model,
            min_points_pnp: p.min_points_pnp,
            cmax: p.cmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub camera: CameraSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default, rename = "marker")]
    pub markers: Vec<MarkerConfig>,
    #[serde(default, rename = "edge")]
    pub edges: Vec<EdgeConfig>,
    #[serde(default)]
    pub pipeline: PipelineSection,
}

impl SceneConfig {
    pub const PRESETS: [&'static str; 3] = ["translation", "rotation", "static"];

    /// Built-in benchmark scenes: eight markers 2 to 2.3 m in front of the
    /// camera, a few background edges, light noise and 0.3 s of motion.
    /// `translation` moves the camera sideways at 0.8 m/s (about 6 px per
    /// 25 ms window at 2 m), `rotation` pans at 0.5 rad/s and `static`
    /// holds still.
    pub fn preset(name: &str) -> Option<Self> {
        let (kind, model) = match name {
            "translation" => (TrajectoryKind::Translation, MotionModel::Flow2),
            "rotation" => (TrajectoryKind::Rotation, MotionModel::Rot3),
            "static" => (TrajectoryKind::Static, MotionModel::Flow2),
            _ => return None,
        };
        let ids = [0x5a, 0x81, 0x3c, 0xe7, 0x12, 0xb4, 0x69, 0xd2];
        let spots = [
            (-0.45, -0.30, 2.0),
            (0.05, -0.32, 2.2),
            (0.50, -0.28, 2.1),
            (-0.40, 0.05, 2.3),
            (0.45, 0.02, 2.0),
            (-0.50, 0.30, 2.1),
            (0.00, 0.28, 2.0),
            (0.40, 0.32, 2.2),
        ];
        let markers = ids
            .iter()
            .zip(spots)
            .enumerate()
            .map(|(i, (&id, (x, y, z)))| MarkerConfig {
                id,
                position: [x, y, z],
                // 3 px disk
                radius_m: 3.0 * z / 600.0,
                phase_us: 700 * i as Micros,
            })
            .collect();
        let edges = vec![
            EdgeConfig { a: [-0.9, -0.55, 2.4], b: [0.9, -0.55, 2.4], contrast: 1.0 },
            EdgeConfig { a: [-0.2, -0.15, 2.2], b: [-0.2, 0.15, 2.2], contrast: 0.8 },
            EdgeConfig { a: [0.2, 0.45, 2.1], b: [0.7, 0.55, 2.1], contrast: -0.9 },
        ];
        let trajectory = TrajectoryConfig {
            kind,
            velocity: [0.8, 0.0, 0.0],
            angular_velocity: [0.0, 0.5, 0.0],
            ..Default::default()
        };
        Some(Self {
            version: FORMAT_VERSION,
            name: name.to_string(),
            camera: CameraSection::default(),
            sim: SimSection {
                sensitivity: Sensitivity::Medium,
                noise_rate_hz: 0.05,
                jitter_us: 5,
                seed: 7,
                ..Default::default()
            },
            protocol: ProtocolConfig::default(),
            trajectory,
            markers,
            edges,
            pipeline: PipelineSection { model, ..Default::default() },
        })
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, BenchError> {
        let s: Self = formats::from_toml(text, path)?;
        if s.version != FORMAT_VERSION {
            return Err(BenchError::schema(path, format!("unsupported version {}", s.version)));
        }
        s.validate().map_err(|m| BenchError::schema(path, m))?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        self.sim_config()?.validate().map_err(|e| e.to_string())?;
        self.trajectory.spec()?;
        self.pipeline_config(false)?;
        let mut ids: Vec<u64> = self.markers.iter().map(|m| m.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err("duplicate marker id".into());
        }
        for m in &self.markers {
            if !(m.radius_m.is_finite() && m.radius_m > 0.0) || !m.position.iter().all(|v| v.is_finite()) {
                return Err(format!("marker {}: invalid position or radius", m.id));
            }
        }
        Ok(())
    }

    pub fn sim_config(&self) -> Result<SimConfig, String> {
        let s = &self.sim;
        let mut cfg = SimConfig::new(self.camera.intrinsics()?, s.sensitivity);
        if let Some(c) = s.contrast_threshold {
            cfg.contrast_threshold = c;
        }
        cfg.render_step_us = s.render_step_us;
        cfg.noise_rate_hz = s.noise_rate_hz;
        cfg.jitter_us = s.jitter_us;
        cfg.dup_events = s.dup_events;
        cfg.seed = s.seed;
        cfg.frame_rate_hz = self.pipeline.frame_rate_hz;
        cfg.annotation_rate_hz = s.annotation_rate_hz;
        cfg.gt_pose_rate_hz = s.gt_pose_rate_hz;
        cfg.protocol = self.protocol;
        Ok(cfg)
    }

    pub fn pipeline_config(&self, compensate: bool) -> Result<PipelineConfig, String> {
        let p = &self.pipeline;
        let cfg = PipelineConfig {
            window_us: p.window_us,
            frame_rate_hz: p.frame_rate_hz,
            compensate,
            model: p.model,
            protocol: self.protocol,
            cmax: p.cmax.clone(),
            min_points_pnp: p.min_points_pnp,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn led_markers(&self) -> Vec<LedMarker> {
        self.markers
            .iter()
            .map(|m| LedMarker { id: m.id, position: Vector3::from(m.position), radius_m: m.radius_m, phase_us: m.phase_us })
            .collect()
    }

    pub fn marker_map(&self) -> MarkerMap {
        self.markers.iter().map(|m| (m.id, Vector3::from(m.position))).collect()
    }

    fn edge_segments(&self) -> Vec<EdgeSegment> {
        self.edges
            .iter()
            .map(|e| EdgeSegment { a: Vector3::from(e.a), b: Vector3::from(e.b), contrast: e.contrast })
            .collect()
    }
}

/// Everything a benchmark sequence needs, in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scene: SceneConfig,
    pub events: EventStream,
    pub gt_poses: Vec<(Micros, Pose)>,
    pub annotations: Vec<Annotation>,
    pub calibration: CameraIntrinsics,
    pub markers: MarkerMap,
}

/// Simulates LED, edge and noise events for a scene, with ground truth and
/// annotations.
pub fn simulate_scene(scene: &SceneConfig) -> Result<Dataset, BenchError> {
    let invalid = |m: String| BenchError::schema(format!("scene `{}`", scene.name), m);
    scene.validate().map_err(invalid)?;
    let cfg = scene.sim_config().map_err(invalid)?;
    let spec = scene.trajectory.spec().map_err(invalid)?;
    let sim = |e: crate::sim::SimError| BenchError::Pipeline(format!("simulation: {e}"));
    let leds = scene.led_markers();
    let events = simulate_led_events(&leds, &spec, &cfg).map_err(sim)?;
    let edges = simulate_edge_events(&scene.edge_segments(), &spec, &cfg).map_err(sim)?;
    let events = inject_noise(events.merge(edges), spec.t0, spec.t1, &cfg).map_err(sim)?;
    Ok(Dataset {
        events,
        gt_poses: export_ground_truth(&spec, &cfg).map_err(sim)?,
        annotations: make_annotations(&leds, &spec, &cfg).map_err(sim)?,
        calibration: cfg.intrinsics,
        markers: scene.marker_map(),
        scene: scene.clone(),
    })
}

/// File names inside a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLayout {
    pub dir: PathBuf,
}

impl DatasetLayout {
    pub const EVENTS: &'static str = "events.bin";
    pub const GT_POSES: &'static str = "gt_poses.csv";
    pub const ANNOTATIONS: &'static str = "annotations.csv";
    pub const CALIBRATION: &'static str = "calibration.toml";
    pub const MARKERS: &'static str = "markers.toml";
    pub const SCENE: &'static str = "scene.toml";

    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn files() -> [&'static str; 6] {
        [Self::EVENTS, Self::GT_POSES, Self::ANNOTATIONS, Self::CALIBRATION, Self::MARKERS, Self::SCENE]
    }

    /// The first missing file, if any.
    pub fn check(&self) -> Result<(), BenchError> {
        for f in Self::files() {
            let p = self.path(f);
            if !p.is_file() {
                return Err(BenchError::Missing(p));
            }
        }
        Ok(())
    }
}

impl Dataset {
    pub fn write(&self, layout: &DatasetLayout) -> Result<(), BenchError> {
        std::fs::create_dir_all(&layout.dir).map_err(|e| BenchError::io(&layout.dir, e))?;
        formats::write_events(&layout.path(DatasetLayout::EVENTS), &self.events)?;
        formats::write_with(&layout.path(DatasetLayout::GT_POSES), |w| formats::write_poses(w, &self.gt_poses))?;
        formats::write_with(&layout.path(DatasetLayout::ANNOTATIONS), |w| {
            formats::write_annotations(w, &self.annotations)
        })?;
        formats::write_text(&layout.path(DatasetLayout::CALIBRATION), &formats::calibration_to_toml(&self.calibration))?;
        formats::write_text(&layout.path(DatasetLayout::MARKERS), &formats::markers_to_toml(&self.markers))?;
        formats::write_text(&layout.path(DatasetLayout::SCENE), &self.scene.to_toml())
    }

    pub fn read(layout: &DatasetLayout) -> Result<Self, BenchError> {
        layout.check()?;
        let scene_path = layout.path(DatasetLayout::SCENE);
        let scene = SceneConfig::from_toml(&formats::read_to_string(&scene_path)?, &scene_path)?;
        let calibration = formats::read_calibration(&layout.path(DatasetLayout::CALIBRATION))?;
        let events = formats::read_events(&layout.path(DatasetLayout::EVENTS))?;
        if (events.width(), events.height()) != (calibration.width, calibration.height) {
            return Err(BenchError::schema(
                layout.path(DatasetLayout::EVENTS),
                format!(
                    "sensor is {}x{} but calibration says {}x{}",
                    events.width(),
                    events.height(),
                    calibration.width,
                    calibration.height
                ),
            ));
        }
        Ok(Self {
            events,
            gt_poses: formats::read_with(&layout.path(DatasetLayout::GT_POSES), formats::read_poses)?,
            annotations: formats::read_with(&layout.path(DatasetLayout::ANNOTATIONS), formats::read_annotations)?,
            calibration,
            markers: formats::read_markers(&layout.path(DatasetLayout::MARKERS))?,
            scene,
        })
    }
}
