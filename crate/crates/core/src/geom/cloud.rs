use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Aabb, Point3};
use crate::{Error, Result};

/// Organ class assigned by an upstream segmentation step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Organ {
    Silique = 0,
    Stem = 1,
    Leaf = 2,
    Flower = 3,
    Other = 4,
}

impl Organ {
    pub const ALL: [Organ; 5] = [
        Organ::Silique,
        Organ::Stem,
        Organ::Leaf,
        Organ::Flower,
        Organ::Other,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Organ> {
        Organ::ALL.get(code as usize).copied()
    }
}

/// A point set with optional per-point label channels.
///
/// Every present channel has exactly one entry per point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    organ: Option<Vec<Organ>>,
    plant: Option<Vec<u32>>,
    occluded: Option<Vec<bool>>,
    synthetic: Option<Vec<bool>>,
}

fn check_len<T>(channel: &'static str, n: usize, v: &[T]) -> Result<()> {
    if v.len() != n {
        return Err(Error::LabelLength {
            channel,
            expected: n,
            got: v.len(),
        });
    }
    Ok(())
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::non_finite(alloc::format!("point {i}")));
        }
        Ok(PointCloud {
            points,
            ..Default::default()
        })
    }

    pub fn with_organ(mut self, organ: Vec<Organ>) -> Result<Self> {
        check_len("organ", self.len(), &organ)?;
        self.organ = Some(organ);
        Ok(self)
    }

    pub fn with_plant_ids(mut self, ids: Vec<u32>) -> Result<Self> {
        check_len("plant_id", self.len(), &ids)?;
        self.plant = Some(ids);
        Ok(self)
    }

    pub fn with_occluded(mut self, flags: Vec<bool>) -> Result<Self> {
        check_len("occluded", self.len(), &flags)?;
        self.occluded = Some(flags);
        Ok(self)
    }

    pub fn with_synthetic(mut self, flags: Vec<bool>) -> Result<Self> {
        check_len("synthetic", self.len(), &flags)?;
        self.synthetic = Some(flags);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn organ(&self) -> Option<&[Organ]> {
        self.organ.as_deref()
    }

    pub fn plant_ids(&self) -> Option<&[u32]> {
        self.plant.as_deref()
    }

    pub fn occluded(&self) -> Option<&[bool]> {
        self.occluded.as_deref()
    }

    pub fn synthetic(&self) -> Option<&[bool]> {
        self.synthetic.as_deref()
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn aabb(&self) -> Result<Aabb> {
        Aabb::from_points(&self.points)
    }

    /// Sub-cloud of the given indices (repeats allowed), carrying all channels.
    pub fn select(&self, indices: &[usize]) -> Result<PointCloud> {
        let n = self.len();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange {
                what: "point cloud",
                index: bad,
                len: n,
            });
        }
        fn pick<T: Copy>(v: &Option<Vec<T>>, idx: &[usize]) -> Option<Vec<T>> {
            v.as_ref().map(|v| idx.iter().map(|&i| v[i]).collect())
        }
        Ok(PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            organ: pick(&self.organ, indices),
            plant: pick(&self.plant, indices),
            occluded: pick(&self.occluded, indices),
            synthetic: pick(&self.synthetic, indices),
        })
    }

    /// Points whose index satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> PointCloud {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        self.select(&idx).expect("indices in range")
    }

    pub fn translate(&mut self, offset: Point3) {
        for p in &mut self.points {
            *p += offset;
        }
    }

    pub fn map_points(&mut self, mut f: impl FnMut(Point3) -> Point3) -> Result<()> {
        for p in &mut self.points {
            *p = f(*p);
        }
        if self.points.iter().any(|p| !p.is_finite()) {
            return Err(Error::non_finite("mapped point"));
        }
        Ok(())
    }

    /// Concatenation. A label channel survives only if every input has it.
    pub fn concat(clouds: &[&PointCloud]) -> PointCloud {
        fn join<T: Copy>(
            clouds: &[&PointCloud],
            get: impl Fn(&PointCloud) -> Option<&[T]>,
        ) -> Option<Vec<T>> {
            if clouds.is_empty() || clouds.iter().any(|c| get(c).is_none()) {
                return None;
            }
            Some(clouds.iter().flat_map(|c| get(c).unwrap().iter().copied()).collect())
        }
        PointCloud {
            points: clouds.iter().flat_map(|c| c.points.iter().copied()).collect(),
            organ: join(clouds, PointCloud::organ),
            plant: join(clouds, PointCloud::plant_ids),
            occluded: join(clouds, PointCloud::occluded),
            synthetic: join(clouds, PointCloud::synthetic),
        }
    }

    /// Drop every label channel.
    pub fn strip_labels(&self) -> PointCloud {
        PointCloud {
            points: self.points.clone(),
            ..Default::default()
        }
    }

    pub fn set_plant_ids(&mut self, ids: Vec<u32>) -> Result<()> {
        check_len("plant_id", self.len(), &ids)?;
        self.plant = Some(ids);
        Ok(())
    }

    pub fn set_occluded(&mut self, flags: Vec<bool>) -> Result<()> {
        check_len("occluded", self.len(), &flags)?;
        self.occluded = Some(flags);
        Ok(())
    }

    pub fn set_synthetic(&mut self, flags: Vec<bool>) -> Result<()> {
        check_len("synthetic", self.len(), &flags)?;
        self.synthetic = Some(flags);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn label_length_enforced() {
        let c = PointCloud::new(vec![Point3::ORIGIN; 3]).unwrap();
        assert!(matches!(
            c.clone().with_plant_ids(vec![0, 1]),
            Err(Error::LabelLength { expected: 3, got: 2, .. })
        ));
        assert!(c.with_occluded(vec![true, false, true]).is_ok());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(PointCloud::new(vec![Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn concat_keeps_common_channels() {
        let a = PointCloud::new(vec![Point3::ORIGIN])
            .unwrap()
            .with_plant_ids(vec![0])
            .unwrap()
            .with_occluded(vec![true])
            .unwrap();
        let b = PointCloud::new(vec![Point3::splat(1.0)])
            .unwrap()
            .with_plant_ids(vec![1])
            .unwrap();
        let c = PointCloud::concat(&[&a, &b]);
        assert_eq!(c.len(), 2);
        assert_eq!(c.plant_ids(), Some(&[0u32, 1][..]));
        assert!(c.occluded().is_none());
    }

    #[test]
    fn organ_codes_round_trip() {
        for o in Organ::ALL {
            assert_eq!(Organ::from_code(o.code()), Some(o));
        }
        assert_eq!(Organ::from_code(9), None);
    }
}
