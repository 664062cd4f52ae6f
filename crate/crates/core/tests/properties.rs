use proptest::prelude::*;

use gripsdf::camera::{project, CameraRig, Intrinsics};
use gripsdf::data::{near_surface_count, MeshSdf};
use gripsdf::encoding::{articulation_embed, positional_encode, EncoderConfig};
use gripsdf::field::{AnalyticSdf, GridSdf, Primitive, SdfField};
use gripsdf::kinematics::{HandModel, HandPose, RigidTransform, ARTICULATION_DIM, NUM_FRAMES};
use gripsdf::mesh::{cube_mesh, export_mesh, import_mesh, marching_cubes, MeshFormat};
use gripsdf::metrics::{chamfer_distance, f_score, precision_recall, KdTree};
use gripsdf::neural::{stencil_loss, TrainConfig};
use gripsdf::par::Execution;
use gripsdf::refine::{contact_loss, intersection_penalty};
use gripsdf::{Aabb, Mat3, Vec3};

fn vec3(half: f64) -> impl Strategy<Value = Vec3> {
    [-half..half, -half..half, -half..half].prop_map(|[x, y, z]| Vec3::new(x, y, z))
}

fn articulation(scale: f64) -> impl Strategy<Value = [f64; ARTICULATION_DIM]> {
    proptest::collection::vec(-scale..scale, ARTICULATION_DIM).prop_map(|v| v.try_into().unwrap())
}

fn points(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec3>> {
    proptest::collection::vec(vec3(40.0), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn placements_are_rigid(a in articulation(2.5)) {
        let model = HandModel::default_adult();
        for t in model.skeleton().placements(&a).unwrap() {
            let r = t.rotation;
            prop_assert!((r.transpose() * r - Mat3::identity()).amax() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rigid_inverse_round_trips(w in vec3(3.0), t in vec3(100.0), x in vec3(200.0)) {
        let tr = RigidTransform::from_axis_angle(&w, t);
        prop_assert!((tr.inverse().apply(&tr.apply(&x)) - x).norm() < 1e-9);
        prop_assert!(tr.compose(&tr.inverse()).rotation.relative_eq(&Mat3::identity(), 1e-12, 1e-12));
    }

    #[test]
    fn hand_pose_json_round_trip(a in articulation(3.0), g in vec3(1.0), t in vec3(300.0)) {
        let pose = HandPose { articulation: a, global_rotation: g, global_translation: t };
        let back: HandPose = serde_json::from_str(&serde_json::to_string(&pose).unwrap()).unwrap();
        prop_assert_eq!(back, pose);
    }

    #[test]
    fn joint_locality(a in articulation(1.2), x in vec3(150.0), j in 1..NUM_FRAMES, d in vec3(0.5)) {
        let model = HandModel::default_adult();
        let cfg = EncoderConfig::default();
        let mut b = a;
        for k in 0..3 {
            b[3 * (j - 1) + k] += d[k];
        }
        let (ea, eb) = (articulation_embed(&model, &a, &x, &cfg).unwrap(), articulation_embed(&model, &b, &x, &cfg).unwrap());
        let w = 3 * cfg.width_per_scalar();
        for f in 1..NUM_FRAMES {
            if !model.skeleton().is_ancestor_or_self(j, f) {
                prop_assert_eq!(&ea[(f - 1) * w..f * w], &eb[(f - 1) * w..f * w]);
            }
        }
    }

    #[test]
    fn encoding_is_bounded(v in proptest::collection::vec(-10.0f64..10.0, 1..8)) {
        let cfg = EncoderConfig { include_input: false, ..EncoderConfig::default() };
        let e = positional_encode(&cfg, &v).unwrap();
        prop_assert_eq!(e.len(), v.len() * cfg.width_per_scalar());
        prop_assert!(e.iter().all(|s| s.abs() <= 1.0));
    }

    #[test]
    fn camera_round_trip(x in vec3(150.0), w in vec3(0.3), depth in 300.0f64..800.0) {
        let rig = CameraRig::new(Intrinsics::default(), Vec3::new(5.0, -3.0, depth)).unwrap();
        let g = RigidTransform::from_axis_angle(&w, Vec3::zeros());
        let c = rig.to_camera(&g, &x);
        prop_assert!((rig.to_wrist(&g, &c) - x).norm() < 1e-9);
        let [u, v] = project(&rig, &g, &x).unwrap();
        let d = rig.ray_direction([u, v]);
        prop_assert!((d - c.normalize()).norm() < 1e-9);
    }

    #[test]
    fn grid_interpolates_linear_fields_exactly(a in vec3(1.0), b in -5.0f64..5.0, q in vec3(30.0)) {
        struct Plane(Vec3, f64);
        impl SdfField for Plane {
            fn eval(&self, x: &Vec3) -> f64 { self.0.dot(x) + self.1 }
            fn domain_bounds(&self) -> Aabb { Aabb::cube(30.0) }
        }
        let plane = Plane(a, b);
        let grid = GridSdf::from_field(&plane, Aabb::cube(30.0), [7, 5, 6], Execution::Sequential).unwrap();
        prop_assert!((grid.eval(&q) - plane.eval(&q)).abs() < 1e-4);
    }

    #[test]
    fn mesh_sdf_matches_box(p in vec3(120.0)) {
        let mesh = MeshSdf::new(cube_mesh(Vec3::zeros(), 50.0)).unwrap();
        let exact = AnalyticSdf::new(Primitive::Box { center: Vec3::zeros(), half_extents: Vec3::repeat(50.0), rotation: Vec3::zeros() }).unwrap();
        prop_assert!((mesh.eval(&p) - exact.eval(&p)).abs() < 1e-6);
    }

    #[test]
    fn extracted_spheres_are_closed(c in vec3(10.0), r in 15.0f64..45.0, res in 12usize..40) {
        let s = AnalyticSdf::sphere(c, r).unwrap();
        let m = marching_cubes(&s, &Aabb::cube(60.0), [res; 3]).unwrap();
        prop_assert!(!m.is_empty());
        prop_assert!(m.is_watertight());
    }

    #[test]
    fn kd_tree_matches_brute_force(pts in points(1..200), q in vec3(60.0)) {
        let tree = KdTree::new(&pts);
        let (i, d) = tree.nearest(&q).unwrap();
        let best = pts.iter().map(|p| (p - q).norm_squared()).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(d, best);
        prop_assert_eq!((pts[i] - q).norm_squared(), best);
    }

    #[test]
    fn chamfer_and_f_score_laws(a in points(1..80), b in points(1..80), t in 1.0f64..30.0) {
        let ab = chamfer_distance(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, chamfer_distance(&b, &a).unwrap());
        prop_assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        let f = f_score(&a, &b, t).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        let (p, r) = precision_recall(&a, &b, t).unwrap();
        let (p2, r2) = precision_recall(&b, &a, t).unwrap();
        prop_assert_eq!((p, r), (r2, p2));
        prop_assert_eq!(f_score(&a, &a, t).unwrap(), 1.0);
    }

    #[test]
    fn mesh_io_round_trip(c in vec3(50.0), h in 1.0f64..30.0) {
        let m = cube_mesh(c, h);
        for fmt in [MeshFormat::Obj, MeshFormat::Ply] {
            let back = import_mesh(&export_mesh(&m, fmt).unwrap(), fmt).unwrap();
            prop_assert_eq!(&back.triangles, &m.triangles);
            for (u, v) in back.vertices.iter().zip(&m.vertices) {
                prop_assert_eq!(u.map(|x| x as f32), v.map(|x| x as f32));
            }
        }
    }

    #[test]
    fn penalties_are_non_negative(pts in points(1..50), tau in 3.0f64..20.0) {
        let s = AnalyticSdf::sphere(Vec3::zeros(), 20.0).unwrap();
        prop_assert!(intersection_penalty(&s, &pts).unwrap() >= 0.0);
        prop_assert!(contact_loss(&s, &pts, tau, 2.0).unwrap() >= 0.0);
        let outside: Vec<Vec3> = pts.iter().map(|p| p.normalize() * 20.0 * 1.0001 + p.normalize() * tau).collect();
        prop_assert_eq!(intersection_penalty(&s, &outside).unwrap(), 0.0);
    }

    #[test]
    fn near_surface_share(n in 1usize..100_000) {
        let k = near_surface_count(n);
        prop_assert!(k <= n && k >= 1);
        prop_assert!(k * 100 >= 95 * n);
    }

    #[test]
    fn stencil_loss_is_zero_only_at_target(values in proptest::array::uniform7(-50.0f64..50.0), target in -50.0f64..50.0) {
        let cfg = TrainConfig { eikonal_coefficient: 0.0, ..TrainConfig::default() };
        let t = stencil_loss(&values, target, &cfg);
        prop_assert_eq!(t.eikonal, 0.0);
        prop_assert_eq!(t.data, (values[0] - target).abs());
    }
}
