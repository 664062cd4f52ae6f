use crate::Vec3;

const LEAF: usize = 8;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Exact nearest-neighbour index over a fixed point set.
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    root: Node,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let pts = points.to_vec();
        let mut order: Vec<usize> = (0..pts.len()).collect();
        let root = build(&pts, &mut order, 0);
        Self { points: pts, order, root }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the closest point; ties keep the lowest index.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(&self.root, q, &mut best);
        Some(best)
    }

    fn search(&self, node: &Node, q: &Vec3, best: &mut (usize, f64)) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let d = (self.points[i] - q).norm_squared();
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // Points beyond the plane are at least |diff| away; equal distances
                // must still be visited to resolve ties by index.
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(points: &[Vec3], order: &mut [usize], offset: usize) -> Node {
    let n = order.len();
    if n <= LEAF {
        return Node::Leaf { start: offset, end: offset + n };
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &i in order.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let axis = (hi - lo).imax();
    if hi[axis] <= lo[axis] {
        return Node::Leaf { start: offset, end: offset + n };
    }
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |a, b| points[*a][axis].total_cmp(&points[*b][axis]));
    let value = points[order[mid]][axis];
    let (l, r) = order.split_at_mut(mid);
    Node::Split {
        axis,
        value,
        left: Box::new(build(points, l, offset)),
        right: Box::new(build(points, r, offset + mid)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pts: Vec<Vec3> = (0..1500).map(|_| Vec3::new(rng.random(), rng.random(), rng.random()) * 100.0).collect();
        // Duplicates and a degenerate cluster.
        pts.extend(std::iter::repeat_n(Vec3::new(5.0, 5.0, 5.0), 20));
        let tree = KdTree::new(&pts);
        for _ in 0..500 {
            let q = Vec3::new(rng.random(), rng.random(), rng.random()) * 120.0;
            let brute = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - q).norm_squared()))
                .fold((usize::MAX, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
            assert_eq!(tree.nearest(&q).unwrap(), brute);
        }
    }
}
