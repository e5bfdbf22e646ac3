//! Small geometric vocabulary shared by every module.

use serde::{Deserialize, Serialize};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
        max: Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
    };

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Aabb {
        let mut b = Aabb::EMPTY;
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn longest_extent(&self) -> f64 {
        self.extent().max()
    }

    pub fn shortest_extent(&self) -> f64 {
        self.extent().min()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for a in 0..3 {
            let v = if p[a] < self.min[a] {
                self.min[a] - p[a]
            } else if p[a] > self.max[a] {
                p[a] - self.max[a]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2
    }

    /// Slab test; returns the parametric interval `[t0, t1]` of the ray inside the box.
    pub fn ray_interval(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<(f64, f64)> {
        let mut t0 = 0.0_f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut near = (self.min[a] - origin[a]) * inv_dir[a];
            let mut far = (self.max[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN (0 * inf) means the ray lies in the slab plane; keep the interval.
            if near.is_nan() || far.is_nan() {
                continue;
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

/// Uniform scale followed by a translation: `p ↦ scale·p + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub scale: f64,
    pub translation: [f64; 3],
}

impl Default for Similarity {
    fn default() -> Self {
        Similarity::IDENTITY
    }
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        scale: 1.0,
        translation: [0.0; 3],
    };

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        p * self.scale + Vec3::from(self.translation)
    }

    pub fn inverse(&self) -> Similarity {
        let inv = 1.0 / self.scale;
        let t = Vec3::from(self.translation);
        Similarity {
            scale: inv,
            translation: (-t * inv).into(),
        }
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Similarity) -> Similarity {
        Similarity {
            scale: self.scale * first.scale,
            translation: self.apply(&Vec3::from(first.translation)).into(),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_inverse_round_trip() {
        let s = Similarity {
            scale: 0.25,
            translation: [1.0, -2.0, 0.5],
        };
        let p = Vec3::new(3.0, 4.0, -7.0);
        let q = s.inverse().apply(&s.apply(&p));
        assert!((p - q).norm() < 1e-12);
        let c = s.inverse().compose(&s);
        assert!((c.scale - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ray_interval_hits_and_misses() {
        let b = Aabb {
            min: Vec3::new(-1.0, -1.0, -1.0),
            max: Vec3::new(1.0, 1.0, 1.0),
        };
        let o = Vec3::new(0.0, 0.0, 5.0);
        let d = Vec3::new(0.0, 0.0, -1.0);
        let inv = d.map(|c| 1.0 / c);
        let (t0, t1) = b.ray_interval(&o, &inv, f64::INFINITY).unwrap();
        assert_eq!((t0, t1), (4.0, 6.0));
        let o2 = Vec3::new(2.0, 0.0, 5.0);
        assert!(b.ray_interval(&o2, &inv, f64::INFINITY).is_none());
    }
}
