use std::io::{Read, Write};

use super::SdfField;
use crate::error::invalid;
use crate::par::{self, Execution};
use crate::{Aabb, Error, Result, Vec3};

const MAGIC: &[u8; 4] = b"GSDF";

/// Signed distances sampled on a regular lattice, trilinearly interpolated.
///
/// Node `(i, j, k)` sits at `min + (i, j, k) * extent / (n - 1)`; values are
/// stored x-fastest. Outside the bounds the field returns the value at the
/// clamped point plus the Euclidean distance to the box.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSdf {
    resolution: [usize; 3],
    bounds: Aabb,
    values: Vec<f32>,
}

impl GridSdf {
    pub fn new(resolution: [usize; 3], bounds: Aabb, values: Vec<f32>) -> Result<Self> {
        if resolution.iter().any(|n| *n < 2) {
            return Err(invalid("grid resolution must be at least 2 per axis"));
        }
        if bounds.is_degenerate() {
            return Err(invalid("grid bounds are degenerate"));
        }
        let n = resolution.iter().product::<usize>();
        if values.len() != n {
            return Err(Error::Shape { expected: n, actual: values.len() });
        }
        Ok(Self { resolution, bounds, values })
    }

    /// Samples `field` at every node; slabs of constant z run in parallel.
    pub fn from_field<F: SdfField + ?Sized>(
        field: &F,
        bounds: Aabb,
        resolution: [usize; 3],
        exec: Execution,
    ) -> Result<Self> {
        let shell = Self::new(resolution, bounds, vec![0.0; resolution.iter().product()])?;
        let [nx, ny, nz] = resolution;
        let slabs = par::map_range(exec, nz, |k| {
            let pts: Vec<Vec3> = (0..nx * ny).map(|ij| shell.node(ij % nx, ij / nx, k)).collect();
            field
                .eval_batch(&pts, Execution::Sequential)
                .into_iter()
                .map(|v| v as f32)
                .collect::<Vec<f32>>()
        });
        Ok(Self { values: slabs.concat(), ..shell })
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn spacing(&self) -> Vec3 {
        let e = self.bounds.extent();
        Vec3::new(
            e.x / (self.resolution[0] - 1) as f64,
            e.y / (self.resolution[1] - 1) as f64,
            e.z / (self.resolution[2] - 1) as f64,
        )
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution[0] * (j + self.resolution[1] * k)
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let s = self.spacing();
        self.bounds.min + Vec3::new(i as f64 * s.x, j as f64 * s.y, k as f64 * s.z)
    }

    fn trilinear(&self, p: &Vec3) -> f64 {
        let s = self.spacing();
        let mut base = [0usize; 3];
        let mut t = [0.0; 3];
        for a in 0..3 {
            let f = ((p[a] - self.bounds.min[a]) / s[a]).max(0.0);
            let i = (f.floor() as usize).min(self.resolution[a] - 2);
            base[a] = i;
            t[a] = (f - i as f64).clamp(0.0, 1.0);
        }
        let [i, j, k] = base;
        let v = |di: usize, dj: usize, dk: usize| self.value(i + di, j + dj, k + dk) as f64;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let x00 = lerp(v(0, 0, 0), v(1, 0, 0), t[0]);
        let x10 = lerp(v(0, 1, 0), v(1, 1, 0), t[0]);
        let x01 = lerp(v(0, 0, 1), v(1, 0, 1), t[0]);
        let x11 = lerp(v(0, 1, 1), v(1, 1, 1), t[0]);
        lerp(lerp(x00, x10, t[1]), lerp(x01, x11, t[1]), t[2])
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for n in self.resolution {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        for v in self.bounds.min.iter().chain(self.bounds.max.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(4 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("missing GSDF magic".into()));
        }
        let mut u = [0u8; 4];
        let mut res = [0usize; 3];
        for n in res.iter_mut() {
            r.read_exact(&mut u)?;
            *n = u32::from_le_bytes(u) as usize;
        }
        let mut d = [0u8; 8];
        let mut b = [0.0f64; 6];
        for v in b.iter_mut() {
            r.read_exact(&mut d)?;
            *v = f64::from_le_bytes(d);
        }
        let n: usize = res.iter().product();
        let mut raw = vec![0u8; 4 * n];
        r.read_exact(&mut raw)?;
        let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Self::new(res, Aabb::new(Vec3::new(b[0], b[1], b[2]), Vec3::new(b[3], b[4], b[5])), values)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

impl SdfField for GridSdf {
    fn eval(&self, x: &Vec3) -> f64 {
        let q = self.bounds.clamp(x);
        self.trilinear(&q) + self.bounds.distance(x)
    }

    fn domain_bounds(&self) -> Aabb {
        self.bounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{eval_grad, AnalyticSdf};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere_grid(n: usize) -> (AnalyticSdf, GridSdf) {
        let s = AnalyticSdf::sphere(Vec3::zeros(), 50.0).unwrap();
        let g = GridSdf::from_field(&s, Aabb::cube(100.0), [n; 3], Execution::default()).unwrap();
        (s, g)
    }

    #[test]
    fn grid_matches_analytic_sphere() {
        let (s, g) = sphere_grid(64);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = Vec3::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
            assert!((g.eval(&x) - s.eval(&x)).abs() < 0.5);
        }
    }

    #[test]
    fn grid_gradient_is_near_unit_close_to_surface() {
        let (_, g) = sphere_grid(64);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut total = 0.0;
        for _ in 0..1000 {
            let dir = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
            let x = dir * (50.0 + rng.random_range(-5.0..5.0));
            total += (eval_grad(&g, &x, 1.0).unwrap().norm() - 1.0).abs();
        }
        assert!(total / 1000.0 < 0.05, "mean deviation {}", total / 1000.0);
    }

    #[test]
    fn outside_queries_never_go_negative() {
        let s = AnalyticSdf::sphere(Vec3::zeros(), 60.0).unwrap();
        // The sphere pokes out of the box, so boundary values are negative.
        let g = GridSdf::from_field(&s, Aabb::cube(50.0), [16; 3], Execution::Sequential).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x = Vec3::new(rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0));
            let d = g.bounds().distance(&x);
            if d > 0.0 {
                let boundary = g.eval(&g.bounds().clamp(&x));
                assert!((g.eval(&x) - (boundary + d)).abs() < 1e-9);
                assert!(g.eval(&x) >= d - 60.0 - 1e-9);
            }
        }
    }

    #[test]
    fn nodes_reproduce_samples() {
        let (s, g) = sphere_grid(9);
        for (i, j, k) in [(0, 0, 0), (3, 4, 5), (8, 8, 8)] {
            assert_eq!(g.eval(&g.node(i, j, k)), s.eval(&g.node(i, j, k)) as f32 as f64);
        }
    }

    #[test]
    fn binary_round_trip() {
        let (_, g) = sphere_grid(5);
        let bytes = g.to_bytes();
        assert_eq!(&bytes[..4], b"GSDF");
        assert_eq!(bytes.len(), 4 + 12 + 48 + 4 * 125);
        assert_eq!(GridSdf::read_from(&bytes[..]).unwrap(), g);
        assert!(GridSdf::read_from(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn sequential_and_parallel_bake_agree() {
        let s = AnalyticSdf::sphere(Vec3::new(3.0, 1.0, 0.0), 30.0).unwrap();
        let a = GridSdf::from_field(&s, Aabb::cube(50.0), [12, 10, 14], Execution::Sequential).unwrap();
        let b = GridSdf::from_field(&s, Aabb::cube(50.0), [12, 10, 14], Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
