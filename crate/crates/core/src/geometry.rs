//! Points and axis-aligned regions in meters.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// A UAV location; `z` is the altitude above the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Lifts the point to altitude `z`.
    pub fn at(self, z: f64) -> Point3 {
        Point3::new(self.x, self.y, z)
    }
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn ground(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn distance(self, other: Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Horizontal distance between the ground projection and a user.
    pub fn horizontal_distance(self, user: Point2) -> f64 {
        self.ground().distance(user)
    }

    /// 3-D distance to a user standing on the ground plane.
    pub fn distance_to_user(self, user: Point2) -> f64 {
        let dx = self.x - user.x;
        let dy = self.y - user.y;
        (dx * dx + dy * dy + self.z * self.z).sqrt()
    }

    pub(crate) fn sub(self, o: Point3) -> [f64; 3] {
        [self.x - o.x, self.y - o.y, self.z - o.z]
    }
}

/// The ground region within which demand arises.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect2 {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect2 {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Rect2 {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Longest side; the length unit of the normalized demand coordinates.
    pub fn side(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn is_valid(&self) -> bool {
        self.x_min.is_finite()
            && self.x_max.is_finite()
            && self.y_min.is_finite()
            && self.y_max.is_finite()
            && self.x_min <= self.x_max
            && self.y_min <= self.y_max
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(self.x_min, self.y_min),
            Point2::new(self.x_max, self.y_min),
            Point2::new(self.x_min, self.y_max),
            Point2::new(self.x_max, self.y_max),
        ]
    }
}

/// The flight box; `h_min`/`h_max` bound the altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Box3 {
    pub const fn new(ground: Rect2, h_min: f64, h_max: f64) -> Self {
        Box3 {
            x_min: ground.x_min,
            x_max: ground.x_max,
            y_min: ground.y_min,
            y_max: ground.y_max,
            h_min,
            h_max,
        }
    }

    pub fn ground(&self) -> Rect2 {
        Rect2::new(self.x_min, self.x_max, self.y_min, self.y_max)
    }

    pub fn is_valid(&self) -> bool {
        self.ground().is_valid() && self.h_min.is_finite() && self.h_max.is_finite() && self.h_min <= self.h_max
    }

    pub fn contains(&self, p: Point3) -> bool {
        self.ground().contains(p.ground()) && p.z >= self.h_min && p.z <= self.h_max
    }

    /// Componentwise projection onto the box.
    pub fn project(&self, p: Point3) -> Point3 {
        Point3::new(
            p.x.clamp(self.x_min, self.x_max),
            p.y.clamp(self.y_min, self.y_max),
            p.z.clamp(self.h_min, self.h_max),
        )
    }

    /// Center of the box floor.
    pub fn floor_center(&self) -> Point3 {
        Point3::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
            self.h_min,
        )
    }

    pub fn corners(&self) -> [Point3; 8] {
        let mut out = [Point3::new(0.0, 0.0, 0.0); 8];
        for (k, c) in out.iter_mut().enumerate() {
            *c = Point3::new(
                if k & 1 == 0 { self.x_min } else { self.x_max },
                if k & 2 == 0 { self.y_min } else { self.y_max },
                if k & 4 == 0 { self.h_min } else { self.h_max },
            );
        }
        out
    }
}

/// `count` evenly spaced values on `[lo, hi]`, endpoints included.
/// A single value sits at `lo`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|k| if k + 1 == count { hi } else { lo + step * k as f64 })
                .collect()
        }
    }
}
