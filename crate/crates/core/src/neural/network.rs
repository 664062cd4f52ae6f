use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Mlp, MlpConfig};
use crate::camera::{project, CameraRig};
use crate::encoding::{articulation_embed_with, EncoderConfig};
use crate::error::invalid;
use crate::field::{FeaturePyramid, PyramidConfig};
use crate::kinematics::{self, HandModel, HandPose, RigidTransform, ARTICULATION_DIM};
use crate::par::{self, Execution};
use crate::{Error, Result, Vec3};

/// Rows per batched forward pass.
pub(crate) const EVAL_CHUNK: usize = 64;

/// How the decoder sees the hand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// Encoded joint-local coordinates of the query point.
    Articulation,
    /// Raw articulation vector appended to the query point.
    PoseParameters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub conditioning: Conditioning,
    pub encoder: EncoderConfig,
    pub pyramid: PyramidConfig,
    pub image_channels: usize,
    pub hidden_width: usize,
    pub activation: Activation,
    /// Millimeters per unit of network output.
    pub output_scale: f64,
    /// Multiplies millimeter query coordinates before they enter the network.
    pub point_scale: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            conditioning: Conditioning::Articulation,
            encoder: EncoderConfig::default(),
            pyramid: PyramidConfig::default(),
            image_channels: 2,
            hidden_width: 64,
            activation: Activation::default(),
            output_scale: 100.0,
            point_scale: 0.01,
            seed: 0,
        }
    }
}

/// Column ranges of the decoder input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLayout {
    pub point: Range<usize>,
    /// Camera-frame depth of the point relative to the depth offset.
    pub point_depth: Range<usize>,
    pub local_features: Range<usize>,
    pub global_feature: Range<usize>,
    pub conditioning: Range<usize>,
}

impl InputLayout {
    pub fn width(&self) -> usize {
        self.conditioning.end
    }

    /// `1/sqrt(width)` applied to the conditioning block, so a 585-wide
    /// embedding does not swamp the 26 point and image columns.
    pub fn conditioning_scale(&self) -> f64 {
        1.0 / (self.conditioning.len() as f64).sqrt()
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.pyramid.validate()?;
        if self.image_channels == 0 || self.hidden_width == 0 {
            return Err(invalid("image channels and hidden width must be positive"));
        }
        if !(self.output_scale > 0.0 && self.point_scale > 0.0) {
            return Err(invalid("output and point scales must be positive"));
        }
        Ok(())
    }

    pub fn layout(&self) -> InputLayout {
        let local = self.pyramid.local_width(self.image_channels);
        let global = self.pyramid.global_width;
        let cond = match self.conditioning {
            Conditioning::Articulation => self.encoder.articulation_width(),
            Conditioning::PoseParameters => ARTICULATION_DIM,
        };
        let a = 4;
        let b = a + local;
        let c = b + global;
        InputLayout { point: 0..3, point_depth: 3..4, local_features: a..b, global_feature: b..c, conditioning: c..c + cond }
    }

    pub fn mlp_config(&self) -> MlpConfig {
        MlpConfig { hidden_width: self.hidden_width, activation: self.activation, ..MlpConfig::decoder(self.layout().width()) }
    }
}

/// Everything the decoder needs to know about one image.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneContext {
    pub model: HandModel,
    pub pose: HandPose,
    pub camera: CameraRig,
    /// Pyramid whose global feature holds the pooled image channels.
    pub pyramid: FeaturePyramid,
}

/// A scene evaluated at one articulation with the current global projection.
#[derive(Clone, Debug)]
pub struct PreparedScene<'a> {
    pub scene: &'a SceneContext,
    pub articulation: [f64; ARTICULATION_DIM],
    wrist_to_joint: Vec<RigidTransform>,
    global: RigidTransform,
    global_feature: Vec<f64>,
}

impl PreparedScene<'_> {
    pub fn global_feature(&self) -> &[f64] {
        &self.global_feature
    }
}

/// Learned linear map from pooled image channels to the global feature.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalProjection {
    inputs: usize,
    outputs: usize,
    params: Vec<f64>,
}

impl GlobalProjection {
    pub fn init(inputs: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let params = (0..outputs * inputs + outputs).map(|_| rng.random_range(-bound..bound) as f32 as f64).collect();
        Self { inputs, outputs, params }
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn apply(&self, pooled: &[f64]) -> Vec<f64> {
        let (w, b) = self.params.split_at(self.outputs * self.inputs);
        (0..self.outputs)
            .map(|o| b[o] + w[o * self.inputs..(o + 1) * self.inputs].iter().zip(pooled).map(|(a, p)| a * p).sum::<f64>())
            .collect()
    }

    /// Accumulates the parameter gradient for upstream `d` on the output.
    pub fn accumulate_grad(&self, pooled: &[f64], d: &[f64], grad: &mut [f64]) {
        let (gw, gb) = grad.split_at_mut(self.outputs * self.inputs);
        for o in 0..self.outputs {
            gb[o] += d[o];
            for i in 0..self.inputs {
                gw[o * self.inputs + i] += d[o] * pooled[i];
            }
        }
    }
}

/// Decoder plus global projection.
#[derive(Clone, Debug, PartialEq)]
pub struct SdfNetwork {
    config: NetworkConfig,
    mlp: Mlp,
    projection: GlobalProjection,
}

impl SdfNetwork {
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mlp = Mlp::init(config.mlp_config(), config.seed)?;
        let projection =
            GlobalProjection::init(config.image_channels, config.pyramid.global_width, config.seed ^ 0x9e37_79b9_7f4a_7c15);
        Ok(Self { config, mlp, projection })
    }

    pub fn from_params(config: NetworkConfig, params: &[f64]) -> Result<Self> {
        let mut net = Self::new(config)?;
        net.set_params(params)?;
        Ok(net)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn projection(&self) -> &GlobalProjection {
        &self.projection
    }

    pub fn layout(&self) -> InputLayout {
        self.config.layout()
    }

    pub fn num_params(&self) -> usize {
        self.mlp.num_params() + self.projection.num_params()
    }

    /// Decoder parameters followed by projection parameters.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.mlp.params().to_vec();
        p.extend_from_slice(&self.projection.params);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Shape { expected: self.num_params(), actual: params.len() });
        }
        let (a, b) = params.split_at(self.mlp.num_params());
        self.mlp.set_params(a)?;
        self.projection.params.copy_from_slice(b);
        Ok(())
    }

    /// Rejects scenes whose image does not match the network's pyramid.
    pub fn check_scene(&self, scene: &SceneContext) -> Result<()> {
        let pyr = &scene.pyramid;
        let factors: Vec<usize> = pyr.levels.iter().map(|l| l.factor).collect();
        if factors != self.config.pyramid.factors {
            return Err(Error::HeaderMismatch(format!(
                "pyramid factors {factors:?} differ from checkpoint {:?}",
                self.config.pyramid.factors
            )));
        }
        if pyr.levels.iter().any(|l| l.image.channels() != self.config.image_channels)
            || pyr.global_feature.len() != self.config.image_channels
        {
            return Err(Error::HeaderMismatch(format!(
                "scene has a different channel count than the checkpoint ({})",
                self.config.image_channels
            )));
        }
        Ok(())
    }

    pub fn prepare<'a>(&self, scene: &'a SceneContext) -> Result<PreparedScene<'a>> {
        self.prepare_with(scene, &scene.pose.articulation)
    }

    /// Prepares `scene` with a replacement articulation.
    pub fn prepare_with<'a>(&self, scene: &'a SceneContext, articulation: &[f64]) -> Result<PreparedScene<'a>> {
        self.check_scene(scene)?;
        let wrist_to_joint = kinematics::forward_kinematics(&scene.model, articulation)?;
        let mut art = [0.0; ARTICULATION_DIM];
        art.copy_from_slice(articulation);
        Ok(PreparedScene {
            scene,
            articulation: art,
            wrist_to_joint,
            global: scene.pose.global_transform(),
            global_feature: self.projection.apply(&scene.pyramid.global_feature),
        })
    }

    /// Writes the decoder input for wrist-frame point `x` into `row`.
    pub fn encode_into(&self, prep: &PreparedScene<'_>, x: &Vec3, row: &mut [f64]) {
        let layout = self.layout();
        for a in 0..3 {
            row[a] = x[a] * self.config.point_scale;
        }
        let cam = &prep.scene.camera;
        let c = cam.to_camera(&prep.global, x);
        row[layout.point_depth.start] = (c.z - cam.depth_offset.z) * self.config.point_scale;
        let pixel = project(cam, &prep.global, x).unwrap_or(cam.intrinsics.principal_point);
        prep.scene.pyramid.sample_local_into(pixel, &mut row[layout.local_features.clone()]);
        row[layout.global_feature.clone()].copy_from_slice(&prep.global_feature);
        let k = layout.conditioning_scale();
        let cond = &mut row[layout.conditioning];
        match self.config.conditioning {
            Conditioning::Articulation => articulation_embed_with(&self.config.encoder, &prep.wrist_to_joint, x, cond),
            Conditioning::PoseParameters => cond.copy_from_slice(&prep.articulation),
        }
        cond.iter_mut().for_each(|v| *v *= k);
    }

    pub fn encode_batch(&self, prep: &PreparedScene<'_>, points: &[Vec3]) -> Vec<f64> {
        let w = self.layout().width();
        let mut rows = vec![0.0; points.len() * w];
        for (p, row) in points.iter().zip(rows.chunks_exact_mut(w)) {
            self.encode_into(prep, p, row);
        }
        rows
    }

    /// Signed distances (mm) at `points`, evaluated in fixed-size chunks.
    pub fn eval_points(&self, prep: &PreparedScene<'_>, points: &[Vec3], exec: Execution) -> Vec<f64> {
        par::map_chunks(exec, points, EVAL_CHUNK, |_, chunk| {
            let rows = self.encode_batch(prep, chunk);
            let cache = self.mlp.forward_batch(&rows, chunk.len()).expect("rows match the decoder width");
            cache.outputs().iter().map(|o| o * self.config.output_scale).collect::<Vec<f64>>()
        })
        .concat()
    }
}
