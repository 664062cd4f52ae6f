use std::collections::HashMap;
use std::sync::OnceLock;

use super::Mesh;
use crate::error::invalid;
use crate::field::{GridSdf, SdfField};
use crate::par::{self, Execution};
use crate::{Aabb, Error, Result, Vec3};

// Corner c has offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// The 12 cube edges as (low corner, axis).
const EDGES: [(usize, usize); 12] = [
    (0, 0), (2, 0), (4, 0), (6, 0),
    (0, 1), (1, 1), (4, 1), (5, 1),
    (0, 2), (1, 2), (2, 2), (3, 2),
];

fn edge_between(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    let axis = (hi - lo).trailing_zeros() as usize;
    EDGES.iter().position(|e| *e == (lo, axis)).expect("corners share an edge")
}

/// Per-case surface loops, each a cyclic list of cube edges.
fn case_table() -> &'static Vec<Vec<Vec<usize>>> {
    static TABLE: OnceLock<Vec<Vec<Vec<usize>>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..256).map(build_case).collect())
}

fn build_case(case: usize) -> Vec<Vec<usize>> {
    let inside = |c: usize| case >> c & 1 == 1;
    let pos = |c: usize| corner_offset(c).map(|v| v as f64);
    // Directed segments (from edge, to edge), inside region on the left when
    // the face is seen from outside the cube.
    let mut next: HashMap<usize, usize> = HashMap::new();
    for axis in 0..3 {
        for side in 0..2 {
            let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
            let cyc: Vec<usize> = [(0, 0), (1, 0), (1, 1), (0, 1)]
                .iter()
                .map(|&(u, v)| (side << axis) | (u << b) | (v << c))
                .collect();
            let mut normal = [0.0; 3];
            normal[axis] = if side == 1 { 1.0 } else { -1.0 };
            let crossing = |k: usize| inside(cyc[k]) != inside(cyc[(k + 1) % 4]);
            let crossed: Vec<usize> = (0..4).filter(|&k| crossing(k)).collect();
            // (edge k of the face, edge l of the face, corner on the inside side)
            let segments: Vec<(usize, usize, usize)> = match crossed.len() {
                0 => vec![],
                2 => {
                    let ins = (0..4).find(|&k| inside(cyc[k])).unwrap();
                    vec![(crossed[0], crossed[1], cyc[ins])]
                }
                4 => (0..4)
                    .filter(|&k| inside(cyc[k]))
                    .map(|k| ((k + 3) % 4, k, cyc[k]))
                    .collect(),
                _ => unreachable!("a face has an even number of crossings"),
            };
            for (k, l, ins) in segments {
                let ek = edge_between(cyc[k], cyc[(k + 1) % 4]);
                let el = edge_between(cyc[l], cyc[(l + 1) % 4]);
                let mid = |e: usize| {
                    let (lo, ax) = EDGES[e];
                    let mut p = pos(lo);
                    p[ax] += 0.5;
                    Vec3::from(p)
                };
                let (p, q, o) = (mid(ek), mid(el), Vec3::from(pos(ins)));
                let left = (q - p).cross(&(o - p)).dot(&Vec3::from(normal)) > 0.0;
                let (from, to) = if left { (ek, el) } else { (el, ek) };
                next.insert(from, to);
            }
        }
    }
    let mut loops = Vec::new();
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut used = [false; 12];
    for s in starts {
        if used[s] {
            continue;
        }
        let mut lp = vec![s];
        used[s] = true;
        let mut e = next[&s];
        while e != s {
            used[e] = true;
            lp.push(e);
            e = next[&e];
        }
        loops.push(lp);
    }
    loops
}

/// Extracts the zero level set of `field` sampled on a lattice of
/// `resolution` nodes spanning `bounds`.
pub fn marching_cubes<F: SdfField + ?Sized>(field: &F, bounds: &Aabb, resolution: [usize; 3]) -> Result<Mesh> {
    marching_cubes_with(field, bounds, resolution, Execution::default())
}

pub fn marching_cubes_with<F: SdfField + ?Sized>(
    field: &F,
    bounds: &Aabb,
    resolution: [usize; 3],
    exec: Execution,
) -> Result<Mesh> {
    check(bounds, resolution)?;
    let [nx, ny, nz] = resolution;
    let node = node_fn(bounds, resolution);
    let slabs = par::map_range(exec, nz, |k| {
        let pts: Vec<Vec3> = (0..nx * ny).map(|ij| node(ij % nx, ij / nx, k)).collect();
        field.eval_batch(&pts, Execution::Sequential)
    });
    marching_cubes_samples(&slabs.concat(), bounds, resolution)
}

fn check(bounds: &Aabb, resolution: [usize; 3]) -> Result<()> {
    if resolution.iter().any(|n| *n < 2) {
        return Err(invalid("marching cubes needs at least 2 samples per axis"));
    }
    if bounds.is_degenerate() {
        return Err(invalid("marching cubes bounds are degenerate"));
    }
    Ok(())
}

fn node_fn(bounds: &Aabb, resolution: [usize; 3]) -> impl Fn(usize, usize, usize) -> Vec3 + Sync + '_ {
    let e = bounds.extent();
    let s = Vec3::from_fn(|a, _| e[a] / (resolution[a] - 1) as f64);
    move |i, j, k| bounds.min + Vec3::new(i as f64 * s.x, j as f64 * s.y, k as f64 * s.z)
}

/// Zero level set of a baked grid.
pub fn extract_grid(grid: &GridSdf) -> Result<Mesh> {
    let values: Vec<f64> = grid.values().iter().map(|v| *v as f64).collect();
    marching_cubes_samples(&values, grid.bounds(), grid.resolution())
}

/// Bakes `field` on a `resolution`-node lattice over `bounds` and extracts
/// its zero level set. Returns the mesh and the baked grid.
pub fn reconstruct<F: SdfField + ?Sized>(
    field: &F,
    bounds: &Aabb,
    resolution: [usize; 3],
    exec: Execution,
) -> Result<(Mesh, GridSdf)> {
    check(bounds, resolution)?;
    let grid = GridSdf::from_field(field, *bounds, resolution, exec)?;
    Ok((extract_grid(&grid)?, grid))
}

/// Marching cubes over precomputed node values (x-fastest order).
pub fn marching_cubes_samples(values: &[f64], bounds: &Aabb, resolution: [usize; 3]) -> Result<Mesh> {
    check(bounds, resolution)?;
    let [nx, ny, nz] = resolution;
    if values.len() != nx * ny * nz {
        return Err(Error::Shape { expected: nx * ny * nz, actual: values.len() });
    }
    let node = node_fn(bounds, resolution);
    let idx = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let table = case_table();
    let mut vertex_of_edge: HashMap<usize, u32> = HashMap::new();
    let mut mesh = Mesh::empty();
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut case = 0usize;
                let mut v = [0.0; 8];
                for (c, vc) in v.iter_mut().enumerate() {
                    let [di, dj, dk] = corner_offset(c);
                    *vc = values[idx(i + di, j + dj, k + dk)];
                    if *vc < 0.0 {
                        case |= 1 << c;
                    }
                }
                let loops = &table[case];
                if loops.is_empty() {
                    continue;
                }
                let mut vertex = |e: usize| -> u32 {
                    let (lo, axis) = EDGES[e];
                    let [di, dj, dk] = corner_offset(lo);
                    let (a, b, c) = (i + di, j + dj, k + dk);
                    let key = 3 * idx(a, b, c) + axis;
                    *vertex_of_edge.entry(key).or_insert_with(|| {
                        let hi = lo | (1 << axis);
                        let (v0, v1) = (v[lo], v[hi]);
                        let t = (v0 / (v0 - v1)).clamp(1e-6, 1.0 - 1e-6);
                        let p0 = node(a, b, c);
                        let mut off = [0usize; 3];
                        off[axis] = 1;
                        let p1 = node(a + off[0], b + off[1], c + off[2]);
                        mesh.vertices.push(p0 + (p1 - p0) * t);
                        (mesh.vertices.len() - 1) as u32
                    })
                };
                let loop_ids: Vec<Vec<u32>> = loops.iter().map(|lp| lp.iter().map(|&e| vertex(e)).collect()).collect();
                for ids in loop_ids {
                    if ids.len() == 3 {
                        mesh.triangles.push([ids[0], ids[2], ids[1]]);
                        continue;
                    }
                    // A fan diagonal could coincide with one chosen by the
                    // neighbouring cube on a shared face; a private centre
                    // vertex keeps every edge at degree two.
                    let centre = ids.iter().map(|&v| mesh.vertices[v as usize]).sum::<Vec3>() / ids.len() as f64;
                    mesh.vertices.push(centre);
                    let c = (mesh.vertices.len() - 1) as u32;
                    for w in 0..ids.len() {
                        mesh.triangles.push([c, ids[(w + 1) % ids.len()], ids[w]]);
                    }
                }
            }
        }
    }
    Ok(mesh)
}
