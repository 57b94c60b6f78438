//! Axis-aligned bounding-volume hierarchy over triangles, used for ray
//! casting and nearest-point queries.

use crate::Vec3;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&mut self, o: &Aabb) {
        self.min = self.min.inf(&o.min);
        self.max = self.max.sup(&o.max);
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn contains(&self, p: &Vec3, pad: f64) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] - pad && p[k] <= self.max[k] + pad)
    }

    /// Squared distance from a point to the box (zero inside).
    pub fn distance2(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let e = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d += e * e;
        }
        d
    }

    /// Slab test; `inv` is the componentwise inverse of the ray direction.
    pub fn hit_by_ray(&self, origin: &Vec3, inv: &Vec3, t_min: f64) -> bool {
        let mut t0 = t_min;
        let mut t1 = f64::INFINITY;
        for k in 0..3 {
            let a = (self.min[k] - origin[k]) * inv[k];
            let b = (self.max[k] - origin[k]) * inv[k];
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            t0 = t0.max(lo);
            t1 = t1.min(hi);
        }
        t0 <= t1
    }
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    // Leaf: `start..start+count` into `order`. Internal: children at `left`, `left + 1`
    // is not assumed; both stored explicitly.
    start: usize,
    count: usize,
    left: usize,
    right: usize,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(boxes: &[Aabb]) -> Self {
        let centres: Vec<Vec3> = boxes.iter().map(|b| (b.min + b.max) * 0.5).collect();
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        let mut nodes = Vec::with_capacity(2 * boxes.len() / LEAF_SIZE + 1);
        if !boxes.is_empty() {
            build_node(&mut nodes, &mut order, 0, boxes.len(), boxes, &centres);
        }
        Bvh { nodes, order }
    }

    /// Calls `visit` for every item whose box the ray enters.
    pub fn ray_candidates(&self, origin: &Vec3, dir: &Vec3, t_min: f64, mut visit: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !node.bounds.hit_by_ray(origin, &inv, t_min) {
                continue;
            }
            if node.count > 0 {
                for &i in &self.order[node.start..node.start + node.count] {
                    visit(i);
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
    }

    /// Branch-and-bound nearest search. `dist2` returns the squared distance
    /// to an item; the best item and its squared distance are returned.
    pub fn nearest(&self, p: &Vec3, mut dist2: impl FnMut(usize) -> f64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut stack = vec![(0usize, self.nodes[0].bounds.distance2(p))];
        while let Some((n, d)) = stack.pop() {
            if let Some((_, bd)) = best {
                if d > bd {
                    continue;
                }
            }
            let node = &self.nodes[n];
            if node.count > 0 {
                for &i in &self.order[node.start..node.start + node.count] {
                    let di = dist2(i);
                    // Ties resolve to the smaller item id so the answer does
                    // not depend on traversal order.
                    let better = match best {
                        None => true,
                        Some((bi, bd)) => di < bd || (di == bd && i < bi),
                    };
                    if better {
                        best = Some((i, di));
                    }
                }
            } else {
                let dl = self.nodes[node.left].bounds.distance2(p);
                let dr = self.nodes[node.right].bounds.distance2(p);
                // Push the farther child first so the nearer one is popped next.
                if dl < dr {
                    stack.push((node.right, dr));
                    stack.push((node.left, dl));
                } else {
                    stack.push((node.left, dl));
                    stack.push((node.right, dr));
                }
            }
        }
        best
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    start: usize,
    end: usize,
    boxes: &[Aabb],
    centres: &[Vec3],
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbox = Aabb::empty();
    for &i in &order[start..end] {
        bounds.merge(&boxes[i]);
        cbox.grow(&centres[i]);
    }
    let id = nodes.len();
    nodes.push(Node { bounds, start, count: end - start, left: 0, right: 0 });
    if end - start <= LEAF_SIZE {
        return id;
    }
    let ext = cbox.max - cbox.min;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    if ext[axis] <= 0.0 {
        return id;
    }
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centres[a][axis].total_cmp(&centres[b][axis]).then(a.cmp(&b))
    });
    let left = build_node(nodes, order, start, mid, boxes, centres);
    let right = build_node(nodes, order, mid, end, boxes, centres);
    let node = &mut nodes[id];
    node.count = 0;
    node.left = left;
    node.right = right;
    id
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_boxes(pts: &[Vec3]) -> Vec<Aabb> {
        pts.iter().map(|p| Aabb { min: *p, max: *p }).collect()
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let pts: Vec<Vec3> = (0..200)
            .map(|i| {
                let t = i as f64;
                Vec3::new((t * 0.37).sin(), (t * 1.13).cos(), (t * 0.71).sin() * 2.0)
            })
            .collect();
        let bvh = Bvh::build(&point_boxes(&pts));
        for q in [Vec3::new(0.1, 0.2, 0.3), Vec3::new(-3.0, 1.0, 0.0), Vec3::new(0.5, -0.5, 1.5)] {
            let (i, _) = bvh.nearest(&q, |k| (pts[k] - q).norm_squared()).unwrap();
            let j = (0..pts.len())
                .min_by(|&a, &b| (pts[a] - q).norm_squared().total_cmp(&(pts[b] - q).norm_squared()))
                .unwrap();
            assert_eq!(i, j);
        }
    }

    #[test]
    fn empty_tree_has_no_answers() {
        let bvh = Bvh::build(&[]);
        assert!(bvh.nearest(&Vec3::zeros(), |_| 0.0).is_none());
        let mut n = 0;
        bvh.ray_candidates(&Vec3::zeros(), &Vec3::x(), 0.0, |_| n += 1);
        assert_eq!(n, 0);
    }
}
