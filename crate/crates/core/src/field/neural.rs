use super::SdfField;
use crate::neural::{PreparedScene, SceneContext, SdfNetwork};
use crate::par::Execution;
use crate::{Aabb, Result, Vec3};

/// A trained decoder bound to one scene and articulation.
#[derive(Clone, Debug)]
pub struct NeuralSdf<'a> {
    network: &'a SdfNetwork,
    prepared: PreparedScene<'a>,
    bounds: Aabb,
}

impl<'a> NeuralSdf<'a> {
    pub fn new(network: &'a SdfNetwork, scene: &'a SceneContext, bounds: Aabb) -> Result<Self> {
        Ok(Self { network, prepared: network.prepare(scene)?, bounds })
    }

    pub fn with_articulation(network: &'a SdfNetwork, scene: &'a SceneContext, articulation: &[f64], bounds: Aabb) -> Result<Self> {
        Ok(Self { network, prepared: network.prepare_with(scene, articulation)?, bounds })
    }

    pub fn articulation(&self) -> &[f64] {
        &self.prepared.articulation
    }

    pub fn network(&self) -> &SdfNetwork {
        self.network
    }
}

impl SdfField for NeuralSdf<'_> {
    fn eval(&self, x: &Vec3) -> f64 {
        self.network.eval_points(&self.prepared, std::slice::from_ref(x), Execution::Sequential)[0]
    }

    fn domain_bounds(&self) -> Aabb {
        self.bounds
    }

    fn eval_batch(&self, points: &[Vec3], exec: Execution) -> Vec<f64> {
        self.network.eval_points(&self.prepared, points, exec)
    }

    fn reconditioned(&self, articulation: &[f64]) -> Option<Box<dyn SdfField + '_>> {
        NeuralSdf::with_articulation(self.network, self.prepared.scene, articulation, self.bounds)
            .ok()
            .map(|f| Box::new(f) as Box<dyn SdfField>)
    }
}
