//! Test-time articulation refinement against a frozen signed-distance field.
//!
//! The objective is `sum_H max(-f, 0) + sum_C max(|min(f - tau, 0)| - eps, 0)`
//! over hand-surface samples `H` and the contact-labelled subset `C`. Only the
//! articulation moves; the global pose is fixed.

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::field::{CountingField, GridSdf, SdfField};
use crate::kinematics::{HandModel, HandPose, SurfaceTemplate, ARTICULATION_DIM};
use crate::par::Execution;
use crate::{Aabb, Result, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// tau, mm.
    pub contact_threshold: f64,
    /// epsilon, mm.
    pub contact_margin: f64,
    pub steps: usize,
    /// Initial trial step of the line search (rad per unit gradient).
    pub learning_rate: f64,
    pub hand_samples_per_bone: usize,
    pub freeze_field: bool,
    /// Nodes per axis of the frozen snapshot.
    pub grid_resolution: usize,
    /// Extra margin (mm) around the hand when baking the snapshot.
    pub grid_padding: f64,
    /// Central-difference step (mm) for field gradients.
    pub gradient_step: f64,
    pub max_halvings: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            contact_threshold: 10.0,
            contact_margin: 2.0,
            steps: 200,
            learning_rate: 1e-4,
            hand_samples_per_bone: 32,
            freeze_field: true,
            grid_resolution: 96,
            grid_padding: 30.0,
            gradient_step: 0.01,
            max_halvings: 10,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.contact_margin >= 0.0 && self.contact_threshold > self.contact_margin) {
            return Err(invalid("refinement needs contact_threshold > contact_margin >= 0"));
        }
        if self.steps == 0 || self.hand_samples_per_bone == 0 {
            return Err(invalid("steps and hand_samples_per_bone must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.gradient_step > 0.0) {
            return Err(invalid("learning_rate and gradient_step must be positive"));
        }
        if self.freeze_field && self.grid_resolution < 2 {
            return Err(invalid("grid_resolution must be at least 2"));
        }
        Ok(())
    }
}

pub fn intersection_penalty<F: SdfField + ?Sized>(field: &F, hand_points: &[Vec3]) -> Result<f64> {
    if hand_points.is_empty() {
        return Err(invalid("hand point set is empty"));
    }
    Ok(field.eval_batch(hand_points, Execution::default()).iter().map(|f| (-f).max(0.0)).sum())
}

fn contact_value(f: f64, tau: f64, eps: f64) -> f64 {
    ((f - tau).min(0.0).abs() - eps).max(0.0)
}

pub fn contact_loss<F: SdfField + ?Sized>(field: &F, contact_points: &[Vec3], tau: f64, eps: f64) -> Result<f64> {
    if contact_points.is_empty() {
        return Err(invalid("contact point set is empty"));
    }
    if !(tau > eps) {
        return Err(invalid("contact threshold must exceed the margin"));
    }
    Ok(field.eval_batch(contact_points, Execution::default()).iter().map(|f| contact_value(*f, tau, eps)).sum())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub total: f64,
    pub intersection: f64,
    pub contact: f64,
}

/// Hand samples in bone-local form, posed on demand.
struct HandSamples<'a> {
    model: &'a HandModel,
    templates: Vec<SurfaceTemplate>,
    contact: Vec<bool>,
}

impl<'a> HandSamples<'a> {
    fn new(model: &'a HandModel, per_bone: usize) -> Result<Self> {
        let templates = model.surface_templates(per_bone)?;
        let labels = model.contact_labels();
        let contact = templates.iter().map(|t| labels[t.bone]).collect();
        Ok(Self { model, templates, contact })
    }

    fn positions(&self, articulation: &[f64]) -> Result<Vec<Vec3>> {
        let placements = self.model.skeleton().placements(articulation)?;
        Ok(self.templates.iter().map(|t| placements[t.frame].apply(&t.local)).collect())
    }

    fn terms(&self, values: &[f64], cfg: &RefineConfig) -> ObjectiveTerms {
        let mut t = ObjectiveTerms::default();
        for (f, c) in values.iter().zip(&self.contact) {
            t.intersection += (-f).max(0.0);
            if *c {
                t.contact += contact_value(*f, cfg.contact_threshold, cfg.contact_margin);
            }
        }
        t.total = t.intersection + t.contact;
        t
    }

    fn evaluate<F: SdfField + ?Sized>(&self, field: &F, articulation: &[f64], cfg: &RefineConfig) -> Result<ObjectiveTerms> {
        let pts = self.positions(articulation)?;
        Ok(self.terms(&field.eval_batch(&pts, Execution::default()), cfg))
    }

    fn gradient<F: SdfField + ?Sized>(
        &self,
        field: &F,
        articulation: &[f64],
        cfg: &RefineConfig,
    ) -> Result<(ObjectiveTerms, [f64; ARTICULATION_DIM])> {
        let pts = self.positions(articulation)?;
        let h = cfg.gradient_step;
        let mut queries = Vec::with_capacity(7 * pts.len());
        for p in &pts {
            queries.push(*p);
            for a in 0..3 {
                let e = Vec3::ith(a, h);
                queries.push(p + e);
                queries.push(p - e);
            }
        }
        let vals = field.eval_batch(&queries, Execution::default());
        let values: Vec<f64> = vals.chunks_exact(7).map(|c| c[0]).collect();
        let terms = self.terms(&values, cfg);
        let posed = self.model.skeleton().pose(articulation)?;
        let mut grad = [0.0; ARTICULATION_DIM];
        let (tau, eps) = (cfg.contact_threshold, cfg.contact_margin);
        for (i, (p, t)) in pts.iter().zip(&self.templates).enumerate() {
            let f = values[i];
            let mut w = if f < 0.0 { -1.0 } else { 0.0 };
            if self.contact[i] && f < tau && tau - f > eps {
                w -= 1.0;
            }
            if w == 0.0 {
                continue;
            }
            let c = &vals[7 * i..7 * i + 7];
            let g = Vec3::new((c[1] - c[2]) / (2.0 * h), (c[3] - c[4]) / (2.0 * h), (c[5] - c[6]) / (2.0 * h));
            for (k, col) in posed.point_jacobian(t.frame, p).iter().enumerate() {
                grad[k] += w * g.dot(col);
            }
        }
        Ok((terms, grad))
    }
}

/// Objective terms and their articulation gradient.
pub fn refine_objective<F: SdfField + ?Sized>(
    field: &F,
    model: &HandModel,
    articulation: &[f64],
    cfg: &RefineConfig,
) -> Result<(ObjectiveTerms, [f64; ARTICULATION_DIM])> {
    HandSamples::new(model, cfg.hand_samples_per_bone)?.gradient(field, articulation, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub config: RefineConfig,
    pub initial: ObjectiveTerms,
    /// Objective after each step.
    pub total: Vec<f64>,
    pub intersection: Vec<f64>,
    pub contact: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub initial_articulation: Vec<f64>,
    pub final_articulation: Vec<f64>,
    pub diverged: bool,
    pub field_frozen: bool,
    pub field_refreshed: bool,
    /// Objective on the re-conditioned field, when refreshed.
    pub refreshed: Option<ObjectiveTerms>,
    /// Field queries answered by the snapshot during the loop.
    pub snapshot_queries: u64,
    /// Queries that reached the original field during the loop.
    pub live_queries: u64,
}

/// Gradient descent with backtracking on the articulation of `pose`.
pub fn refine_pose<F: SdfField + ?Sized>(
    field: &F,
    model: &HandModel,
    pose: &HandPose,
    cfg: &RefineConfig,
) -> Result<(HandPose, RefineReport)> {
    cfg.validate()?;
    let samples = HandSamples::new(model, cfg.hand_samples_per_bone)?;
    let live = CountingField::new(field);
    let snapshot = if cfg.freeze_field {
        let pts = samples.positions(&pose.articulation)?;
        let bounds = Aabb::from_points(&pts).padded(cfg.contact_threshold + cfg.grid_padding);
        let grid = GridSdf::from_field(&live, bounds, [cfg.grid_resolution; 3], Execution::default())?;
        Some(CountingField::new(grid))
    } else {
        None
    };
    let live_before = live.queries();
    let loop_field: &dyn SdfField = match &snapshot {
        Some(s) => s,
        None => &live,
    };

    let mut theta = pose.articulation;
    let (mut terms, mut grad) = samples.gradient(loop_field, &theta, cfg)?;
    let initial = terms;
    let mut report = RefineReport {
        config: cfg.clone(),
        initial,
        total: Vec::with_capacity(cfg.steps),
        intersection: Vec::with_capacity(cfg.steps),
        contact: Vec::with_capacity(cfg.steps),
        step_sizes: Vec::with_capacity(cfg.steps),
        initial_articulation: theta.to_vec(),
        final_articulation: Vec::new(),
        diverged: false,
        field_frozen: cfg.freeze_field,
        field_refreshed: false,
        refreshed: None,
        snapshot_queries: 0,
        live_queries: 0,
    };
    for _ in 0..cfg.steps {
        if !terms.total.is_finite() || !grad.iter().all(|g| g.is_finite()) {
            report.diverged = true;
            break;
        }
        let mut alpha = cfg.learning_rate;
        let mut accepted = None;
        if grad.iter().any(|g| *g != 0.0) {
            for _ in 0..=cfg.max_halvings {
                let mut trial = theta;
                for (t, g) in trial.iter_mut().zip(&grad) {
                    *t -= alpha * g;
                }
                let t = samples.evaluate(loop_field, &trial, cfg)?;
                if t.total.is_finite() && t.total <= terms.total {
                    accepted = Some(trial);
                    break;
                }
                alpha *= 0.5;
            }
        }
        match accepted {
            Some(next) => {
                theta = next;
                (terms, grad) = samples.gradient(loop_field, &theta, cfg)?;
                report.step_sizes.push(alpha);
            }
            None => report.step_sizes.push(0.0),
        }
        report.total.push(terms.total);
        report.intersection.push(terms.intersection);
        report.contact.push(terms.contact);
    }
    report.snapshot_queries = snapshot.as_ref().map_or(0, |s| s.queries());
    report.live_queries = live.queries() - live_before;
    if let Some(refreshed) = field.reconditioned(&theta) {
        report.refreshed = Some(samples.evaluate(&refreshed, &theta, cfg)?);
        report.field_refreshed = true;
    }
    report.final_articulation = theta.to_vec();
    let mut out = pose.clone();
    out.articulation = theta;
    Ok((out, report))
}
