use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Overlap lengths at or below this are treated as grazing contact.
pub const GRAZING_TOLERANCE_M: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn horizontal_norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn axis(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn with_axis(mut self, axis: usize, value: f64) -> Self {
        match axis {
            0 => self.x = value,
            1 => self.y = value,
            _ => self.z = value,
        }
        self
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// Parameter interval `(t0, t1) ⊂ [0, 1]` of the segment `a → b` that lies
    /// strictly inside the box, or `None`. Segments sliding along a face do
    /// not count as inside.
    pub fn clip_segment(&self, a: Vec3, b: Vec3) -> Option<(f64, f64)> {
        let d = b - a;
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        for axis in 0..3 {
            let o = a.axis(axis);
            let dd = d.axis(axis);
            let lo = self.min.axis(axis);
            let hi = self.max.axis(axis);
            if dd.abs() < 1e-15 {
                if o <= lo || o >= hi {
                    return None;
                }
            } else {
                let mut ta = (lo - o) / dd;
                let mut tb = (hi - o) / dd;
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 >= t1 {
                    return None;
                }
            }
        }
        Some((t0, t1))
    }

    /// Length in meters of the segment `a → b` inside the box.
    pub fn penetration_length(&self, a: Vec3, b: Vec3) -> f64 {
        self.clip_segment(a, b)
            .map_or(0.0, |(t0, t1)| (t1 - t0) * (b - a).norm())
    }

    /// True when the segment passes through the interior (not just grazing).
    pub fn blocks(&self, a: Vec3, b: Vec3) -> bool {
        self.penetration_length(a, b) > GRAZING_TOLERANCE_M
    }
}

/// Axis-aligned rectangle in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]).max(0.0) * (self.max[1] - self.min[1]).max(0.0)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        o.min[0] >= self.min[0]
            && o.max[0] <= self.max[0]
            && o.min[1] >= self.min[1]
            && o.max[1] <= self.max[1]
    }

    /// Interiors overlap (touching edges do not count).
    pub fn overlaps(&self, o: &Rect) -> bool {
        self.min[0] < o.max[0]
            && o.min[0] < self.max[0]
            && self.min[1] < o.max[1]
            && o.min[1] < self.max[1]
    }

    pub fn inflate(&self, margin: f64) -> Rect {
        Rect::new(
            [self.min[0] - margin, self.min[1] - margin],
            [self.max[0] + margin, self.max[1] + margin],
        )
    }

    /// Whether the 2-D segment `a → b` touches the closed rectangle.
    pub fn intersects_segment(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        for axis in 0..2 {
            let d = b[axis] - a[axis];
            if d.abs() < 1e-15 {
                if a[axis] < self.min[axis] || a[axis] > self.max[axis] {
                    return false;
                }
            } else {
                let mut ta = (self.min[axis] - a[axis]) / d;
                let mut tb = (self.max[axis] - a[axis]) / d;
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Exact area of a union of axis-aligned rectangles (coordinate compression).
pub fn union_area(rects: &[Rect]) -> f64 {
    let mut xs: Vec<f64> = rects.iter().flat_map(|r| [r.min[0], r.max[0]]).collect();
    let mut ys: Vec<f64> = rects.iter().flat_map(|r| [r.min[1], r.max[1]]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut area = 0.0;
    for wx in xs.windows(2) {
        for wy in ys.windows(2) {
            let c = [(wx[0] + wx[1]) / 2.0, (wy[0] + wy[1]) / 2.0];
            if rects.iter().any(|r| r.contains(c)) {
                area += (wx[1] - wx[0]) * (wy[1] - wy[0]);
            }
        }
    }
    area
}
