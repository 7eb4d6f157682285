use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Broadband,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl Band {
    pub const ALL: [Band; 5] = [Band::Broadband, Band::Theta, Band::Alpha, Band::Beta, Band::Gamma];
    /// The four frequency bands, without broadband.
    pub const FREQUENCY: [Band; 4] = [Band::Theta, Band::Alpha, Band::Beta, Band::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Band::Broadband => "broadband",
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::Gamma => "gamma",
        }
    }

    /// Canonical band edges.
    pub fn spec(self) -> BandSpec {
        let (lo_hz, hi_hz) = match self {
            Band::Broadband => (0.5, 50.0),
            Band::Theta => (4.0, 8.0),
            Band::Alpha => (8.5, 13.0),
            Band::Beta => (13.5, 30.0),
            Band::Gamma => (30.5, 49.5),
        };
        BandSpec {
            band: self,
            lo_hz,
            hi_hz,
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "broadband" | "full" => Ok(Band::Broadband),
            "theta" => Ok(Band::Theta),
            "alpha" => Ok(Band::Alpha),
            "beta" => Ok(Band::Beta),
            "gamma" => Ok(Band::Gamma),
            _ => Err(Error::invalid(format!("unknown band {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub band: Band,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl BandSpec {
    pub fn center_hz(&self) -> f64 {
        0.5 * (self.lo_hz + self.hi_hz)
    }

    /// Checks `0 < lo < hi < fs/2`.
    pub fn validate(&self, fs: f64) -> Result<()> {
        let nyquist = fs / 2.0;
        if !(self.lo_hz > 0.0 && self.lo_hz < self.hi_hz) {
            return Err(Error::invalid(format!(
                "band {}: edges must satisfy 0 < lo < hi, got {}..{}",
                self.band, self.lo_hz, self.hi_hz
            )));
        }
        if self.hi_hz >= nyquist {
            return Err(Error::invalid(format!(
                "band {}: upper edge {} Hz is not below Nyquist ({nyquist} Hz)",
                self.band, self.hi_hz
            )));
        }
        Ok(())
    }
}
