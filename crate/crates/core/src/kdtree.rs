//! Minimal 3D kd-tree for nearest-neighbor queries during ICP.

use nalgebra::Point3;

struct Node {
    /// Index into the reordered point buffer at which this node's point lives.
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

pub struct KdTree {
    nodes: Vec<Node>,
    points: Vec<Point3<f64>>,
    root: Option<usize>,
}

impl KdTree {
    pub fn build(points: &[Point3<f64>]) -> Self {
        let mut indices: Vec<usize> = (0..points.len()).collect();
        let mut tree = KdTree {
            nodes: Vec::with_capacity(points.len()),
            points: points.to_vec(),
            root: None,
        };
        tree.root = tree.split(&mut indices, 0);
        tree
    }

    fn split(&mut self, indices: &mut [usize], depth: usize) -> Option<usize> {
        if indices.is_empty() {
            return None;
        }
        let axis = depth % 3;
        indices.sort_unstable_by(|&a, &b| {
            self.points[a][axis]
                .partial_cmp(&self.points[b][axis])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mid = indices.len() / 2;
        let node_idx = self.nodes.len();
        self.nodes.push(Node {
            point: indices[mid],
            axis,
            left: None,
            right: None,
        });
        let (left, rest) = indices.split_at_mut(mid);
        let right = &mut rest[1..];
        let l = self.split(left, depth + 1);
        let r = self.split(right, depth + 1);
        self.nodes[node_idx].left = l;
        self.nodes[node_idx].right = r;
        Some(node_idx)
    }

    /// Nearest point to `query`; ties resolve deterministically by traversal
    /// order (strict improvement required to replace the incumbent).
    pub fn nearest(&self, query: &Point3<f64>) -> Option<Point3<f64>> {
        let root = self.root?;
        let mut best = (f64::INFINITY, 0usize);
        self.search(root, query, &mut best);
        Some(self.points[best.1])
    }

    fn search(&self, node_idx: usize, query: &Point3<f64>, best: &mut (f64, usize)) {
        let node = &self.nodes[node_idx];
        let p = &self.points[node.point];
        let d2 = (p - query).norm_squared();
        if d2 < best.0 {
            *best = (d2, node.point);
        }
        let delta = query[node.axis] - p[node.axis];
        let (near, far) = if delta < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(n) = near {
            self.search(n, query, best);
        }
        if let Some(f) = far {
            if delta * delta < best.0 {
                self.search(f, query, best);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points: Vec<Point3<f64>> = (0..400)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let tree = KdTree::build(&points);
        for _ in 0..200 {
            let q = Point3::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            );
            let got = tree.nearest(&q).unwrap();
            let brute = points
                .iter()
                .min_by(|a, b| {
                    (*a - q)
                        .norm_squared()
                        .partial_cmp(&(*b - q).norm_squared())
                        .unwrap()
                })
                .unwrap();
            assert_eq!((got - q).norm_squared(), (brute - q).norm_squared());
        }
    }

    #[test]
    fn empty_tree_returns_none() {
        let tree = KdTree::build(&[]);
        assert!(tree.nearest(&Point3::origin()).is_none());
    }
}
