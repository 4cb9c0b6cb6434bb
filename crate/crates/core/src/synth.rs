//! Seeded synthetic point clouds spanning roughly 100 units.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Point3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Uniform in an axis-aligned 100 × 80 × 60 box.
    Box,
    /// Sphere of radius 50 with slight radial noise.
    Shell,
    /// Solid ellipsoid with semi-axes 50, 20, 8 in a random orientation.
    Ellipsoid,
    /// Mixture of 8 isotropic Gaussians.
    Clusters,
    /// Tilted 100 × 100 × 2 plate.
    Slab,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Box,
        Family::Shell,
        Family::Ellipsoid,
        Family::Clusters,
        Family::Slab,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Box => "box",
            Family::Shell => "shell",
            Family::Ellipsoid => "ellipsoid",
            Family::Clusters => "clusters",
            Family::Slab => "slab",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown synthetic family {s:?}")))
    }
}

/// A parsed `synthetic:<family>:<m>[:<seed>]` specifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub family: Family,
    pub m: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn generate(&self) -> Result<PointCloud> {
        generate(self.family, self.m, self.seed)
    }

    /// Model name used in reports, e.g. `box-5000-s7`.
    pub fn label(&self) -> String {
        format!("{}-{}-s{}", self.family, self.m, self.seed)
    }
}

impl FromStr for SynthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("expected synthetic:<family>:<m>[:<seed>], got {s:?}"));
        let mut parts = s.split(':');
        if parts.next() != Some("synthetic") {
            return Err(bad());
        }
        let family = parts.next().ok_or_else(bad)?.parse()?;
        let m = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        let seed = match parts.next() {
            Some(t) => t.parse().map_err(|_| bad())?,
            None => 0,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(SynthSpec { family, m, seed })
    }
}

pub fn generate(family: Family, m: usize, seed: u64) -> Result<PointCloud> {
    if m == 0 {
        return Err(Error::EmptyCloud);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point3<f64>> = match family {
        Family::Box => (0..m)
            .map(|_| {
                Point3::new(
                    rng.random_range(0.0..100.0),
                    rng.random_range(0.0..80.0),
                    rng.random_range(0.0..60.0),
                )
            })
            .collect(),
        Family::Shell => {
            let noise = Normal::new(0.0, 0.5).unwrap();
            (0..m)
                .map(|_| {
                    let d: [f64; 3] = UnitSphere.sample(&mut rng);
                    let r = 50.0 + noise.sample(&mut rng);
                    Point3::from(Vector3::from(d) * r)
                })
                .collect()
        }
        Family::Ellipsoid => {
            let rot = random_rotation(&mut rng);
            let axes = Vector3::new(50.0, 20.0, 8.0);
            (0..m)
                .map(|_| {
                    let u = ball_sample(&mut rng);
                    Point3::from(rot * u.component_mul(&axes))
                })
                .collect()
        }
        Family::Clusters => {
            let centers: Vec<(Vector3<f64>, f64)> = (0..8)
                .map(|_| {
                    let c = Vector3::from_fn(|_, _| rng.random_range(0.0..100.0));
                    (c, rng.random_range(3.0..8.0))
                })
                .collect();
            let std = Normal::new(0.0, 1.0).unwrap();
            (0..m)
                .map(|_| {
                    let (c, s) = centers[rng.random_range(0..centers.len())];
                    Point3::from(c + Vector3::from_fn(|_, _| std.sample(&mut rng)) * s)
                })
                .collect()
        }
        Family::Slab => {
            let rot = random_rotation(&mut rng);
            (0..m)
                .map(|_| {
                    let v = Vector3::new(
                        rng.random_range(-50.0..50.0),
                        rng.random_range(-50.0..50.0),
                        rng.random_range(-1.0..1.0),
                    );
                    Point3::from(rot * v)
                })
                .collect()
        }
    };
    PointCloud::new(points)
}

fn random_rotation(rng: &mut impl Rng) -> Rotation3<f64> {
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle)
}

fn ball_sample(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        if v.norm_squared() <= 1.0 {
            return v;
        }
    }
}
