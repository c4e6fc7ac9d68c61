//! Vessel proposals: a pluggable segmenter backend producing a probability
//! grid plus thresholded mask, and refitting of the built-in backend on
//! human-corrected masks.

mod external;
mod filter;
mod fit;

use serde::{Deserialize, Serialize};

pub use external::ExternalEndpoint;
pub use filter::vesselness;
pub use fit::{fit_on_corrections, FitGrid, FitOutcome};

use crate::error::{Error, Result};
use crate::raster::{GrayImage, Mask, ProbabilityGrid};

/// Threshold used for the very first round: deliberately permissive so that
/// faint vessels are proposed and the annotator mostly erases.
pub const INITIAL_THRESHOLD: f64 = 0.10;

/// How the structureness term `1 - exp(-S^2 / 2c^2)` is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structureness {
    /// `c` is half of the largest Hessian norm in the image at that scale.
    HalfMaxNorm,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselnessParams {
    /// Ridge widths in pixels; smoothing uses sigma = width / 2.
    pub scales: Vec<f64>,
    pub beta: f64,
    pub structureness: Structureness,
    pub threshold: f64,
}

impl Default for VesselnessParams {
    fn default() -> Self {
        Self {
            scales: vec![2.0, 4.0, 8.0, 16.0],
            beta: 0.5,
            structureness: Structureness::HalfMaxNorm,
            threshold: INITIAL_THRESHOLD,
        }
    }
}

impl VesselnessParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::invalid("vesselness needs at least one scale"));
        }
        if self.scales.iter().any(|&s| !(s >= 1.0) || !s.is_finite()) {
            return Err(Error::invalid("vesselness scales must be finite and >= 1"));
        }
        if self.scales.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::invalid(
                "vesselness scales must be strictly increasing",
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::invalid(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid("beta must be positive"));
        }
        if let Structureness::Fixed(c) = self.structureness {
            if !(c > 0.0) {
                return Err(Error::invalid("fixed structureness must be positive"));
            }
        }
        Ok(())
    }
}

/// The proposer: either the built-in ridge filter or a remote model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SegmenterBackend {
    #[serde(rename = "builtin-vesselness")]
    Builtin(VesselnessParams),
    #[serde(rename = "external-service")]
    External(ExternalEndpoint),
}

impl Default for SegmenterBackend {
    fn default() -> Self {
        SegmenterBackend::Builtin(VesselnessParams::default())
    }
}

impl SegmenterBackend {
    pub fn threshold(&self) -> f64 {
        match self {
            SegmenterBackend::Builtin(p) => p.threshold,
            SegmenterBackend::External(e) => e.threshold,
        }
    }
}

/// Probability grid and proposal mask (`grid >= threshold`) for one image.
pub fn propose(img: &GrayImage, backend: &SegmenterBackend) -> Result<(ProbabilityGrid, Mask)> {
    let grid = match backend {
        SegmenterBackend::Builtin(params) => vesselness(img, params)?,
        SegmenterBackend::External(endpoint) => endpoint.segment(img)?,
    };
    let mask = grid.threshold(backend.threshold());
    Ok((grid, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(VesselnessParams::default().validate().is_ok());
        let bad = |f: fn(&mut VesselnessParams)| {
            let mut p = VesselnessParams::default();
            f(&mut p);
            p.validate().is_err()
        };
        assert!(bad(|p| p.scales.clear()));
        assert!(bad(|p| p.scales = vec![4.0, 2.0]));
        assert!(bad(|p| p.scales = vec![0.5]));
        assert!(bad(|p| p.threshold = 1.2));
    }

    #[test]
    fn zero_threshold_proposes_everything() {
        let img = GrayImage::from_fn(20, 20, |x, y| ((x * y) % 200) as u8);
        let mut params = VesselnessParams::default();
        params.threshold = 0.0;
        let (_, mask) = propose(&img, &SegmenterBackend::Builtin(params)).unwrap();
        assert_eq!(mask.count_ones(), 400);
    }

    #[test]
    fn backend_serde_tags() {
        let json = serde_json::to_value(SegmenterBackend::default()).unwrap();
        assert_eq!(json["kind"], "builtin-vesselness");
        let back: SegmenterBackend = serde_json::from_value(json).unwrap();
        assert_eq!(back, SegmenterBackend::default());
    }
}
