use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Result};

/// Axis-aligned sample channel above the diamond.
///
/// The diamond surface is the plane `z = 0` with the diamond below it. The
/// channel is centred on the origin in x (length) and y (width) and spans
/// `floor_offset <= z <= floor_offset + height`. All lengths in micrometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub floor_offset: f64,
}

impl ChannelGeometry {
    pub fn new(length: f64, width: f64, height: f64, floor_offset: f64) -> Result<Self> {
        let g = Self {
            length,
            width,
            height,
            floor_offset,
        };
        g.validate()?;
        Ok(g)
    }

    /// 1000 x 100 x 80 um channel sitting on the diamond.
    pub fn chip() -> Self {
        Self {
            length: 1000.0,
            width: 100.0,
            height: 80.0,
            floor_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("length", self.length)?;
        require_positive("width", self.width)?;
        require_positive("height", self.height)?;
        require_non_negative("floor_offset", self.floor_offset)?;
        Ok(())
    }

    pub fn lower(&self) -> [f64; 3] {
        [-0.5 * self.length, -0.5 * self.width, self.floor_offset]
    }

    pub fn upper(&self) -> [f64; 3] {
        [0.5 * self.length, 0.5 * self.width, self.floor_offset + self.height]
    }

    /// um^3.
    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        (0..3).all(|i| p[i] >= lo[i] && p[i] <= hi[i])
    }

    /// Point of the channel for unit-cube coordinates `u`.
    pub fn point(&self, u: [f64; 3]) -> [f64; 3] {
        let (lo, hi) = (self.lower(), self.upper());
        [
            lo[0] + u[0] * (hi[0] - lo[0]),
            lo[1] + u[1] * (hi[1] - lo[1]),
            lo[2] + u[2] * (hi[2] - lo[2]),
        ]
    }
}

/// Optically excited NV volume: a cylinder hanging below the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorCylinder {
    pub diameter: f64,
    /// NV layer thickness.
    pub depth: f64,
    /// Axis position in the surface plane.
    #[serde(default)]
    pub center: [f64; 2],
}

impl SensorCylinder {
    pub fn new(diameter: f64, depth: f64, center: [f64; 2]) -> Result<Self> {
        let s = Self {
            diameter,
            depth,
            center,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn centred(diameter: f64, depth: f64) -> Result<Self> {
        Self::new(diameter, depth, [0.0, 0.0])
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("diameter", self.diameter)?;
        require_positive("depth", self.depth)?;
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(crate::error::invalid("center", "must be finite"));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }

    pub fn with_depth(&self, depth: f64) -> Self {
        Self { depth, ..*self }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        p[2] <= 0.0 && p[2] >= -self.depth && dx * dx + dy * dy <= self.radius() * self.radius()
    }

    /// Uniform point for unit coordinates `u`; depth runs over `(0, depth]`.
    pub fn point(&self, u: [f64; 3]) -> [f64; 3] {
        let r = self.radius() * u[0].sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u[1]).sin_cos();
        [
            self.center[0] + r * c,
            self.center[1] + r * s,
            -self.depth * (1.0 - u[2]),
        ]
    }
}

/// Sensing volume of a spot of diameter `spot_diameter` through a channel of
/// height `channel_height` (both um), in picolitres.
pub fn sensing_volume(spot_diameter: f64, channel_height: f64) -> f64 {
    let r = 0.5 * spot_diameter;
    std::f64::consts::PI * r * r * channel_height * 1e-3
}
