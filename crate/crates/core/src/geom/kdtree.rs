//! Exact nearest-neighbour search over 3-D points.
//!
//! Results are ordered by (squared distance, index), so ties resolve to the
//! lowest index exactly as a brute-force scan would.

use alloc::vec;
use alloc::vec::Vec;

use super::{Aabb, Point3};

const BUCKET: usize = 12;

#[derive(Clone, Debug)]
enum KdNode {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Point3>,
    idx: Vec<u32>,
    nodes: Vec<KdNode>,
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            idx: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        if end - start <= BUCKET {
            self.nodes.push(KdNode::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        let pts = &self.points;
        let slice = &mut self.idx[start..end];
        let mut bb = Aabb::from_point(pts[slice[0] as usize]);
        for &i in slice.iter() {
            bb.grow(pts[i as usize]);
        }
        let axis = bb.longest_axis();
        let mid = (end - start) / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| pts[a as usize][axis].total_cmp(&pts[b as usize][axis]));
        let value = pts[slice[mid] as usize][axis];
        self.nodes.push(KdNode::Leaf { start: 0, end: 0 });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id as usize] = KdNode::Split {
            axis: axis as u8,
            value,
            left,
            right,
        };
        id
    }

    /// Nearest point to `q` as (index, squared distance).
    pub fn nearest(&self, q: Point3) -> Option<(usize, f64)> {
        self.knn(q, 1, None).first().copied()
    }

    /// The `k` nearest points to `q`, optionally skipping one index, sorted by
    /// (squared distance, index).
    pub fn knn(&self, q: Point3, k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        if k == 0 || self.points.is_empty() {
            return best;
        }
        let exclude = exclude.map(|e| e as u32);
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            match self.nodes[n as usize] {
                KdNode::Leaf { start, end } => {
                    for &i in &self.idx[start as usize..end as usize] {
                        if Some(i) == exclude {
                            continue;
                        }
                        let d = self.points[i as usize].dist_sq(q);
                        insert(&mut best, k, i as usize, d);
                    }
                }
                KdNode::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let diff = q[axis as usize] - value;
                    let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                    let worst = if best.len() < k { f64::INFINITY } else { best[k - 1].1 };
                    if diff * diff <= worst {
                        stack.push(far);
                    }
                    stack.push(near);
                }
            }
        }
        best
    }
}

fn insert(best: &mut Vec<(usize, f64)>, k: usize, i: usize, d: f64) {
    let before = |a: &(usize, f64)| a.1 < d || (a.1 == d && a.0 < i);
    if best.len() == k {
        let w = best[k - 1];
        if !(d < w.1 || (d == w.1 && i < w.0)) {
            return;
        }
        best.pop();
    }
    let pos = best.partition_point(before);
    best.insert(pos, (i, d));
}
