use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Inclusion {
    /// `amplitude · χ_B` for the open disk `B`.
    Disk { center: Point, radius: f64, amplitude: f64 },
    /// `amplitude · exp(−|x − center|² / (2 width²))`.
    Gaussian { center: Point, width: f64, amplitude: f64 },
}

impl Inclusion {
    pub fn value(&self, x: Point) -> f64 {
        match *self {
            Inclusion::Disk {
                center,
                radius,
                amplitude,
            } => {
                let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                if d2 < radius * radius {
                    amplitude
                } else {
                    0.0
                }
            }
            Inclusion::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                amplitude * (-d2 / (2.0 * width * width)).exp()
            }
        }
    }

    /// Distance from `x` to the disk boundary (`None` for smooth inclusions).
    pub fn interface_distance(&self, x: Point) -> Option<f64> {
        match *self {
            Inclusion::Disk { center, radius, .. } => {
                Some(((x[0] - center[0]).hypot(x[1] - center[1]) - radius).abs())
            }
            Inclusion::Gaussian { .. } => None,
        }
    }
}

/// True conductivity: a positive background plus non-negative inclusions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub background: f64,
    pub inclusions: Vec<Inclusion>,
}

fn two_centres() -> [Point; 2] {
    [[0.0, 0.5], [0.0, -0.5]]
}

impl PhantomSpec {
    pub fn new(background: f64, inclusions: Vec<Inclusion>) -> Result<Self> {
        let p = Self {
            background,
            inclusions,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.background > 0.0 && self.background.is_finite()) {
            return Err(Error::Config(format!("background {} must be positive", self.background)));
        }
        for inc in &self.inclusions {
            let (size, amplitude) = match *inc {
                Inclusion::Disk { radius, amplitude, .. } => (radius, amplitude),
                Inclusion::Gaussian { width, amplitude, .. } => (width, amplitude),
            };
            if !(size > 0.0) || !(amplitude >= 0.0) || !amplitude.is_finite() {
                return Err(Error::Config(format!("invalid inclusion {inc:?}")));
            }
        }
        Ok(())
    }

    /// Two disks of radius 0.3 at `(0, ±0.5)` with the given amplitude on background 1.
    pub fn two_disks(amplitude: f64) -> Self {
        Self {
            background: 1.0,
            inclusions: two_centres()
                .into_iter()
                .map(|center| Inclusion::Disk {
                    center,
                    radius: 0.3,
                    amplitude,
                })
                .collect(),
        }
    }

    /// Two Gaussian bumps of height 1.2 at `(0, ±0.5)` on background 2.
    pub fn gaussian_bumps() -> Self {
        Self {
            background: 2.0,
            inclusions: two_centres()
                .into_iter()
                .map(|center| Inclusion::Gaussian {
                    center,
                    width: 0.2,
                    amplitude: 1.2,
                })
                .collect(),
        }
    }

    /// Four disks of radius 0.2 at `(±0.6, ±0.6)` on background 1.
    pub fn four_disks() -> Self {
        Self {
            background: 1.0,
            inclusions: [[0.6, 0.6], [0.6, -0.6], [-0.6, 0.6], [-0.6, -0.6]]
                .into_iter()
                .map(|center| Inclusion::Disk {
                    center,
                    radius: 0.2,
                    amplitude: 1.0,
                })
                .collect(),
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        self.background + self.inclusions.iter().map(|i| i.value(x)).sum::<f64>()
    }

    /// Nodal evaluation on `mesh`; interface vertices take the background value.
    pub fn nodal(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.vertices().iter().map(|&x| self.value(x)).collect()
    }

    /// Distance to the nearest disk interface, if there is one.
    pub fn interface_distance(&self, x: Point) -> Option<f64> {
        self.inclusions
            .iter()
            .filter_map(|i| i.interface_distance(x))
            .min_by(|a, b| a.total_cmp(b))
    }
}

/// Named test configurations with their conductivity bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Two unit-contrast disks.
    TwoDisks,
    /// Two smooth bumps on a raised background.
    GaussianBumps,
    /// Two disks of contrast 5.
    HighContrast,
    /// Four small disks near the corners.
    FourDisks,
}

impl Preset {
    pub fn phantom(self) -> PhantomSpec {
        match self {
            Preset::TwoDisks => PhantomSpec::two_disks(1.0),
            Preset::GaussianBumps => PhantomSpec::gaussian_bumps(),
            Preset::HighContrast => PhantomSpec::two_disks(5.0),
            Preset::FourDisks => PhantomSpec::four_disks(),
        }
    }

    /// `(c0, c1)` used for reconstruction.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Preset::TwoDisks | Preset::FourDisks => (1.0, 2.0),
            Preset::GaussianBumps => (2.0, 3.2),
            Preset::HighContrast => (1.0, 6.0),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-disks" => Ok(Preset::TwoDisks),
            "gaussian-bumps" => Ok(Preset::GaussianBumps),
            "high-contrast" => Ok(Preset::HighContrast),
            "four-disks" => Ok(Preset::FourDisks),
            other => Err(Error::Config(format!("unknown phantom preset `{other}`"))),
        }
    }
}
