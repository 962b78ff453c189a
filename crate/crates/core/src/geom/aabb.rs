use serde::{Deserialize, Serialize};

use super::{Point3, PointCloud};
use crate::{Error, Result};

/// Axis-aligned bounding box, `min <= max` componentwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::non_finite("aabb corner"));
        }
        if min.x > max.x || min.y > max.y || min.z > max.z {
            return Err(Error::invalid("aabb", "min exceeds max"));
        }
        Ok(Aabb { min, max })
    }

    pub fn from_point(p: Point3) -> Self {
        Aabb { min: p, max: p }
    }

    pub fn from_points(points: &[Point3]) -> Result<Self> {
        let (first, rest) = points
            .split_first()
            .ok_or(Error::Empty { what: "point set" })?;
        let mut b = Aabb::from_point(*first);
        for p in rest {
            b.grow(*p);
        }
        Ok(b)
    }

    pub fn grow(&mut self, p: Point3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        (self.min + self.max) * 0.5
    }

    /// Centre of the bottom (min-z) face.
    pub fn base_center(&self) -> Point3 {
        let c = self.center();
        Point3::new(c.x, c.y, self.min.z)
    }

    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    pub fn max_extent(&self) -> f64 {
        let e = self.extent();
        e.x.max(e.y).max(e.z)
    }

    pub fn contains(&self, p: Point3) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    pub fn encloses(&self, o: &Aabb) -> bool {
        self.contains(o.min) && self.contains(o.max)
    }

    pub fn inflate(&self, margin: f64) -> Aabb {
        let m = Point3::splat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn translate(&self, offset: Point3) -> Aabb {
        Aabb {
            min: self.min + offset,
            max: self.max + offset,
        }
    }

    /// Conservative slab test of the segment `origin + t * dir`, `t in [0, t_max]`.
    ///
    /// The box is padded by a relative 1e-9 so that any hit reported by the
    /// exact triangle test is never culled.
    pub fn hit_segment(&self, origin: Point3, dir: Point3, t_max: f64) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for axis in 0..3 {
            let lo = self.min[axis];
            let hi = self.max[axis];
            let pad = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
            let (lo, hi) = (lo - pad, hi + pad);
            let o = origin[axis];
            let d = dir[axis];
            if d == 0.0 {
                if o < lo || o > hi {
                    return false;
                }
                continue;
            }
            let inv = 1.0 / d;
            let mut ta = (lo - o) * inv;
            let mut tb = (hi - o) * inv;
            if ta > tb {
                core::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

/// Tight componentwise bounds of a cloud.
pub fn compute_aabb(cloud: &PointCloud) -> Result<Aabb> {
    Aabb::from_points(cloud.points())
}
