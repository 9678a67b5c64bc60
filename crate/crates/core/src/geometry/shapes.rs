use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Point3;
use crate::error::{Error, Result};

/// Surfaces with closed-form unsigned distance, used as ground truth.
///
/// The torus lies around the z axis and the disk in the z = 0 plane, both
/// centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticShape {
    Sphere { radius: f64 },
    Torus { major: f64, minor: f64 },
    Disk { radius: f64 },
}

impl AnalyticShape {
    pub const NAMES: [&'static str; 3] = ["sphere", "torus", "disk"];

    /// Default instance of a named shape, fitting inside the unit ball.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sphere" => Ok(Self::Sphere { radius: 1.0 }),
            "torus" => Ok(Self::Torus { major: 0.7, minor: 0.3 }),
            "disk" | "plane-disk" => Ok(Self::Disk { radius: 1.0 }),
            other => Err(Error::invalid(format!(
                "unknown shape `{other}` (expected one of: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sphere { .. } => "sphere",
            Self::Torus { .. } => "torus",
            Self::Disk { .. } => "disk",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Sphere { radius } | Self::Disk { radius } => radius > 0.0 && radius.is_finite(),
            Self::Torus { major, minor } => minor > 0.0 && major > minor && major.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid shape parameters: {self}")))
        }
    }

    pub fn distance(&self, p: &Point3) -> f64 {
        let rho = p[0].hypot(p[1]);
        match *self {
            Self::Sphere { radius } => ((rho.hypot(p[2])) - radius).abs(),
            Self::Torus { major, minor } => ((rho - major).hypot(p[2]) - minor).abs(),
            Self::Disk { radius } => {
                if rho <= radius {
                    p[2].abs()
                } else {
                    (rho - radius).hypot(p[2])
                }
            }
        }
    }

    /// Area-uniform surface samples, reproducible from `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample_one(&mut rng)).collect()
    }

    fn sample_one(&self, rng: &mut ChaCha8Rng) -> Point3 {
        match *self {
            Self::Sphere { radius } => loop {
                let g: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
                let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                if n > 1e-12 {
                    break g.map(|v| radius * v / n);
                }
            },
            Self::Torus { major, minor } => {
                // area element is proportional to major + minor * cos(theta)
                let theta = loop {
                    let t = rng.random_range(0.0..TAU);
                    let u: f64 = rng.random();
                    if u * (major + minor) <= major + minor * t.cos() {
                        break t;
                    }
                };
                let phi = rng.random_range(0.0..TAU);
                let ring = major + minor * theta.cos();
                [ring * phi.cos(), ring * phi.sin(), minor * theta.sin()]
            }
            Self::Disk { radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let phi = rng.random_range(0.0..TAU);
                [r * phi.cos(), r * phi.sin(), 0.0]
            }
        }
    }
}

/// `sphere:R`, `torus:R,r`, `disk:R`, or a bare name for the default.
impl FromStr for AnalyticShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (s.trim(), None),
        };
        let mut shape = Self::by_name(name)?;
        if let Some(args) = args {
            let values = args
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::invalid(format!("shape `{s}`: {e}")))?;
            shape = match (shape, values.as_slice()) {
                (Self::Sphere { .. }, [r]) => Self::Sphere { radius: *r },
                (Self::Disk { .. }, [r]) => Self::Disk { radius: *r },
                (Self::Torus { .. }, [big, small]) => Self::Torus { major: *big, minor: *small },
                _ => return Err(Error::invalid(format!("shape `{s}`: wrong number of parameters"))),
            };
        }
        shape.validate()?;
        Ok(shape)
    }
}

impl fmt::Display for AnalyticShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sphere { radius } => write!(f, "sphere:{radius}"),
            Self::Torus { major, minor } => write!(f, "torus:{major},{minor}"),
            Self::Disk { radius } => write!(f, "disk:{radius}"),
        }
    }
}
