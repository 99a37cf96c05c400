//! Physical constants, rotation drive profiles and spin branches.
//!
//! Every other module consumes these types. They are immutable once built;
//! a [`DriveProfile`] always carries a validated total evolution time.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Oscillator constants of the radial trap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    mass: f64,
    hbar: f64,
    trap_frequency: f64,
    radius: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            mass: 1.0,
            hbar: 1.0,
            trap_frequency: 1.0,
            radius: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn new(mass: f64, hbar: f64, trap_frequency: f64, radius: f64) -> Result<Self> {
        for (name, v) in [
            ("mass", mass),
            ("hbar", hbar),
            ("trap_frequency", trap_frequency),
            ("radius", radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(PhysicalParams {
            mass,
            hbar,
            trap_frequency,
            radius,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn trap_frequency(&self) -> f64 {
        self.trap_frequency
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `sqrt(m ω / 2ħ) · r`, the scale multiplying the drive in the coupling amplitude.
    pub fn coupling_scale(&self) -> f64 {
        (self.mass * self.trap_frequency / (2.0 * self.hbar)).sqrt() * self.radius
    }

    /// True when m = ħ = ω = r = 1 exactly.
    pub fn is_unit(&self) -> bool {
        self.mass == 1.0 && self.hbar == 1.0 && self.trap_frequency == 1.0 && self.radius == 1.0
    }
}

/// Spin label of one interferometer path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpinBranch {
    /// Co-rotating with the drive, η = +1.
    Up,
    /// Counter-rotating, η = −1.
    Down,
}

impl SpinBranch {
    pub const ALL: [SpinBranch; 2] = [SpinBranch::Up, SpinBranch::Down];

    pub fn eta(self) -> f64 {
        match self {
            SpinBranch::Up => 1.0,
            SpinBranch::Down => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpinBranch::Up => "up",
            SpinBranch::Down => "down",
        }
    }
}

impl fmt::Display for SpinBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpinBranch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" | "u" | "+" => Ok(SpinBranch::Up),
            "down" | "d" | "-" => Ok(SpinBranch::Down),
            other => Err(Error::Domain(format!("unknown spin branch '{other}'"))),
        }
    }
}

/// The induced angular frequency ω_p(t) of the state-dependent potential.
#[derive(Debug, Clone, PartialEq)]
pub enum InducedDrive {
    Constant(f64),
    /// Piecewise-linear through `(time, value)` knots; the first knot sits at t = 0.
    Sampled(Vec<(f64, f64)>),
}

impl InducedDrive {
    fn validate(&self) -> Result<()> {
        match self {
            InducedDrive::Constant(w) => {
                if !(w.is_finite() && *w > 0.0) {
                    return Err(Error::Domain(format!("omega_p must be positive, got {w}")));
                }
            }
            InducedDrive::Sampled(knots) => {
                if knots.len() < 2 {
                    return Err(Error::Domain("sampled drive needs at least two knots".into()));
                }
                if knots[0].0 != 0.0 {
                    return Err(Error::Domain(format!(
                        "sampled drive must start at t = 0, first knot at {}",
                        knots[0].0
                    )));
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::Domain("knot times must be strictly increasing".into()));
                    }
                }
                if let Some(&(t, v)) = knots.iter().find(|(t, v)| !(t.is_finite() && v.is_finite() && *v > 0.0)) {
                    return Err(Error::Domain(format!("omega_p must be positive, got {v} at t = {t}")));
                }
            }
        }
        Ok(())
    }

    /// ω_p(t); sampled drives interpolate linearly and are undefined past the last knot.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        match self {
            InducedDrive::Constant(w) => Ok(*w),
            InducedDrive::Sampled(knots) => {
                let last = knots[knots.len() - 1];
                if t < 0.0 || t > last.0 {
                    return Err(Error::Domain(format!("t = {t} outside sampled range [0, {}]", last.0)));
                }
                let k = knots.partition_point(|&(tk, _)| tk <= t);
                if k >= knots.len() {
                    return Ok(last.1);
                }
                let (t0, v0) = knots[k - 1];
                let (t1, v1) = knots[k];
                Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
            }
        }
    }

    /// Knot times strictly inside (0, end), where the sampled profile has kinks.
    pub fn breakpoints(&self, end: f64) -> Vec<f64> {
        match self {
            InducedDrive::Constant(_) => Vec::new(),
            InducedDrive::Sampled(knots) => knots
                .iter()
                .map(|&(t, _)| t)
                .filter(|&t| t > 0.0 && t < end)
                .collect(),
        }
    }
}

/// Solves `∫₀ᵀ ω_p(t) dt = π` for the total evolution time T.
pub fn total_time(drive: &InducedDrive) -> Result<f64> {
    drive.validate()?;
    match drive {
        InducedDrive::Constant(w) => Ok(PI / w),
        InducedDrive::Sampled(knots) => {
            let mut acc = 0.0;
            for seg in knots.windows(2) {
                let (t0, v0) = seg[0];
                let (t1, v1) = seg[1];
                let len = t1 - t0;
                let area = 0.5 * (v0 + v1) * len;
                if acc + area >= PI {
                    let rem = PI - acc;
                    let slope = (v1 - v0) / len;
                    // v0 τ + slope τ²/2 = rem, positive root in the cancellation-free form
                    let disc = (v0 * v0 + 2.0 * slope * rem).max(0.0);
                    let tau = 2.0 * rem / (v0 + disc.sqrt());
                    return Ok(t0 + tau.min(len));
                }
                acc += area;
            }
            Err(Error::InsufficientProfile {
                reached: acc,
                last_time: knots[knots.len() - 1].0,
            })
        }
    }
}

/// The rotation protocol: the frequency to estimate plus the induced drive.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveProfile {
    omega_s: f64,
    drive: InducedDrive,
    total_time: f64,
}

impl DriveProfile {
    pub fn new(omega_s: f64, drive: InducedDrive) -> Result<Self> {
        if !omega_s.is_finite() {
            return Err(Error::Domain(format!("omega_s must be finite, got {omega_s}")));
        }
        let total_time = total_time(&drive)?;
        Ok(DriveProfile {
            omega_s,
            drive,
            total_time,
        })
    }

    pub fn constant(omega_s: f64, omega_p: f64) -> Result<Self> {
        Self::new(omega_s, InducedDrive::Constant(omega_p))
    }

    pub fn sampled(omega_s: f64, knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(omega_s, InducedDrive::Sampled(knots))
    }

    pub fn omega_s(&self) -> f64 {
        self.omega_s
    }

    pub fn drive(&self) -> &InducedDrive {
        &self.drive
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    /// Constant ω_p, if this is a constant drive.
    pub fn constant_omega_p(&self) -> Option<f64> {
        match self.drive {
            InducedDrive::Constant(w) => Some(w),
            InducedDrive::Sampled(_) => None,
        }
    }

    /// Same drive at a different rotation frequency. T does not depend on ω_s.
    pub fn with_omega_s(&self, omega_s: f64) -> Self {
        DriveProfile {
            omega_s,
            drive: self.drive.clone(),
            total_time: self.total_time,
        }
    }

    pub fn omega_p_at(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        self.drive.value_at(t)
    }

    /// ω_s + η_σ ω_p(t).
    pub fn branch_drive(&self, branch: SpinBranch, t: f64) -> Result<f64> {
        Ok(self.omega_s + branch.eta() * self.omega_p_at(t)?)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.total_time) {
            return Err(Error::Domain(format!(
                "t = {t} outside evolution window [0, {}]",
                self.total_time
            )));
        }
        Ok(())
    }
}

/// A_σ(t) = sqrt(mω/2ħ) · r · (ω_s + η_σ ω_p(t)).
pub fn coupling_amplitude(
    params: &PhysicalParams,
    profile: &DriveProfile,
    branch: SpinBranch,
    t: f64,
) -> Result<f64> {
    Ok(params.coupling_scale() * profile.branch_drive(branch, t)?)
}
