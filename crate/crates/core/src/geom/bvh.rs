//! Bounding volume hierarchy over triangles, median split on the longest
//! centroid axis.

use alloc::vec;
use alloc::vec::Vec;

use super::{intersect_ray_triangle, Aabb, Point3, Ray, TriangleMesh};
use crate::{Error, Result};

/// Maximum triangles per leaf.
pub const LEAF_SIZE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeKind {
    Internal { left: u32, right: u32 },
    /// Range into [`Bvh::order`].
    Leaf { start: u32, count: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BvhNode {
    pub aabb: Aabb,
    pub kind: NodeKind,
}

/// Flat BVH. Node 0 is the root; children always follow their parent.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
}

pub fn build_bvh(mesh: &TriangleMesh) -> Result<Bvh> {
    Bvh::build(mesh)
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::Empty { what: "mesh" });
        }
        let n = mesh.len();
        let boxes: Vec<Aabb> = (0..n).map(|i| mesh.triangle_aabb(i)).collect();
        let centroids: Vec<Point3> = boxes.iter().map(Aabb::center).collect();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes: Vec<BvhNode> = Vec::with_capacity(2 * n / LEAF_SIZE + 1);

        // (node slot, start, end)
        let mut stack = vec![(0usize, 0usize, n)];
        nodes.push(placeholder());
        while let Some((slot, start, end)) = stack.pop() {
            let range = &mut order[start..end];
            let mut bounds = boxes[range[0] as usize];
            let mut cbounds = Aabb::from_point(centroids[range[0] as usize]);
            for &t in range.iter() {
                bounds = bounds.union(&boxes[t as usize]);
                cbounds.grow(centroids[t as usize]);
            }
            let count = end - start;
            if count <= LEAF_SIZE {
                nodes[slot] = BvhNode {
                    aabb: bounds,
                    kind: NodeKind::Leaf {
                        start: start as u32,
                        count: count as u32,
                    },
                };
                continue;
            }
            let axis = cbounds.longest_axis();
            let mid = count / 2;
            range.select_nth_unstable_by(mid, |&a, &b| {
                centroids[a as usize][axis]
                    .total_cmp(&centroids[b as usize][axis])
                    .then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(placeholder());
            let right = nodes.len();
            nodes.push(placeholder());
            nodes[slot] = BvhNode {
                aabb: bounds,
                kind: NodeKind::Internal {
                    left: left as u32,
                    right: right as u32,
                },
            };
            stack.push((right, start + mid, end));
            stack.push((left, start, start + mid));
        }
        Ok(Bvh { nodes, order })
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    /// Triangle indices referenced by leaf ranges.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn root_aabb(&self) -> Aabb {
        self.nodes[0].aabb
    }

    fn visit(&self, mesh: &TriangleMesh, ray: &Ray, t_max: f64, eps: f64, mut on_hit: impl FnMut(usize) -> bool) {
        let mut stack = Vec::with_capacity(64);
        stack.push(0u32);
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i as usize];
            if !node.aabb.hit_segment(ray.origin, ray.direction, t_max) {
                continue;
            }
            match node.kind {
                NodeKind::Internal { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
                NodeKind::Leaf { start, count } => {
                    for &t in &self.order[start as usize..(start + count) as usize] {
                        let tri = mesh.triangle(t as usize);
                        if intersect_ray_triangle(ray, &tri, t_max, eps).is_some() && on_hit(t as usize) {
                            return;
                        }
                    }
                }
            }
        }
    }

    /// True if any triangle intersects the segment `(eps, t_max - eps)`.
    pub fn any_hit(&self, mesh: &TriangleMesh, ray: &Ray, t_max: f64, eps: f64) -> bool {
        let mut hit = false;
        self.visit(mesh, ray, t_max, eps, |_| {
            hit = true;
            true
        });
        hit
    }

    /// Sorted indices of every triangle intersecting the segment.
    pub fn hits(&self, mesh: &TriangleMesh, ray: &Ray, t_max: f64, eps: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(mesh, ray, t_max, eps, |t| {
            out.push(t);
            false
        });
        out.sort_unstable();
        out
    }

    /// Check the structural invariants against the mesh it was built from.
    pub fn validate(&self, mesh: &TriangleMesh) -> Result<()> {
        let mut seen = vec![0u32; mesh.len()];
        let mut visited = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if core::mem::replace(&mut visited[i], true) {
                return Err(Error::invalid("bvh", "node reachable twice"));
            }
            let node = &self.nodes[i];
            match node.kind {
                NodeKind::Internal { left, right } => {
                    for c in [left as usize, right as usize] {
                        if c <= i || c >= self.nodes.len() {
                            return Err(Error::invalid("bvh", "child index does not follow parent"));
                        }
                        stack.push(c);
                    }
                }
                NodeKind::Leaf { start, count } => {
                    if count as usize > LEAF_SIZE {
                        return Err(Error::invalid("bvh", "oversized leaf"));
                    }
                    for &t in &self.order[start as usize..(start + count) as usize] {
                        seen[t as usize] += 1;
                        if !node.aabb.encloses(&mesh.triangle_aabb(t as usize)) {
                            return Err(Error::invalid("bvh", "leaf box does not enclose triangle"));
                        }
                    }
                }
            }
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(Error::invalid("bvh", "triangle not in exactly one leaf"));
        }
        Ok(())
    }
}

fn placeholder() -> BvhNode {
    BvhNode {
        aabb: Aabb::from_point(Point3::ORIGIN),
        kind: NodeKind::Leaf { start: 0, count: 0 },
    }
}
