use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Lifting, stacked Fourier layers, projection.
    Fno,
    /// Plain spatial-convolution encoder/decoder used as a reference.
    BaselineCnn,
}

/// Hyperparameters of one network. Parameter shapes depend only on this.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub in_channels: usize,
    pub out_labels: usize,
    pub width: usize,
    pub n_layers: usize,
    pub k_max: [usize; 3],
    pub shared_weights: bool,
    pub residual: bool,
    pub deep_supervision: bool,
    pub learnable_resampling: bool,
    /// Auxiliary heads tap the output of every `ds_tap_stride`-th Fourier
    /// layer, excluding the last one (which feeds the main head).
    pub ds_tap_stride: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::fnoseg3d()
    }
}

impl ModelConfig {
    /// Full-size FNOSeg3D: width 12, 32 layers, `k_max = (15, 15, 10)`.
    pub fn fnoseg3d() -> Self {
        ModelConfig {
            architecture: Architecture::Fno,
            in_channels: 4,
            out_labels: 4,
            width: 12,
            n_layers: 32,
            k_max: [15, 15, 10],
            shared_weights: true,
            residual: true,
            deep_supervision: true,
            learnable_resampling: true,
            ds_tap_stride: 1,
            seed: 0,
        }
    }

    pub fn fno_shared() -> Self {
        ModelConfig {
            residual: false,
            deep_supervision: false,
            ..Self::fnoseg3d()
        }
    }

    pub fn fno_original() -> Self {
        ModelConfig {
            shared_weights: false,
            ..Self::fno_shared()
        }
    }

    pub fn baseline_cnn() -> Self {
        ModelConfig {
            architecture: Architecture::BaselineCnn,
            shared_weights: false,
            residual: false,
            deep_supervision: false,
            ..Self::fnoseg3d()
        }
    }

    /// Laptop-scale variant of the same architecture: width 8, 8 layers,
    /// `k_max = (7, 7, 7)`, one auxiliary head at the middle layer.
    pub fn desk(mut self) -> Self {
        self.width = 8;
        self.n_layers = 8;
        self.k_max = [7, 7, 7];
        self.ds_tap_stride = 4;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.width < 1 {
            return bad("width must be >= 1");
        }
        if self.n_layers < 1 && self.architecture == Architecture::Fno {
            return bad("n_layers must be >= 1");
        }
        if self.in_channels < 1 {
            return bad("in_channels must be >= 1");
        }
        if self.out_labels < 2 {
            return bad("out_labels must be >= 2");
        }
        if self.deep_supervision && self.ds_tap_stride < 1 {
            return bad("ds_tap_stride must be >= 1 when deep supervision is on");
        }
        Ok(())
    }

    /// Zero-based indices of Fourier layers feeding auxiliary heads.
    pub fn tap_layers(&self) -> Vec<usize> {
        if self.architecture != Architecture::Fno || !self.deep_supervision || self.ds_tap_stride == 0 {
            return Vec::new();
        }
        (0..self.n_layers.saturating_sub(1))
            .filter(|t| (t + 1) % self.ds_tap_stride == 0)
            .collect()
    }
}

/// Named model variants compared in the resolution experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Fnoseg3d,
    FnoShared,
    FnoOriginal,
    BaselineCnn,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Fnoseg3d,
        Variant::FnoShared,
        Variant::FnoOriginal,
        Variant::BaselineCnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fnoseg3d => "fnoseg3d",
            Variant::FnoShared => "fno_shared",
            Variant::FnoOriginal => "fno_original",
            Variant::BaselineCnn => "baseline_cnn",
        }
    }

    /// Full-size configuration.
    pub fn config(self) -> ModelConfig {
        match self {
            Variant::Fnoseg3d => ModelConfig::fnoseg3d(),
            Variant::FnoShared => ModelConfig::fno_shared(),
            Variant::FnoOriginal => ModelConfig::fno_original(),
            Variant::BaselineCnn => ModelConfig::baseline_cnn(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_sets_of_presets() {
        let a = ModelConfig::fnoseg3d();
        assert!(a.shared_weights && a.residual && a.deep_supervision && a.learnable_resampling);
        let b = ModelConfig::fno_shared();
        assert!(b.shared_weights && !b.residual && !b.deep_supervision && b.learnable_resampling);
        let c = ModelConfig::fno_original();
        assert!(!c.shared_weights && !c.residual && !c.deep_supervision && c.learnable_resampling);
        assert_eq!((a.width, a.n_layers, a.k_max), (12, 32, [15, 15, 10]));
    }

    #[test]
    fn tap_positions() {
        assert_eq!(ModelConfig::fnoseg3d().tap_layers().len(), 31);
        assert_eq!(ModelConfig::fnoseg3d().desk().tap_layers(), vec![3]);
        assert!(ModelConfig::fno_shared().tap_layers().is_empty());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("vnet".parse::<Variant>().is_err());
    }

    #[test]
    fn invalid_configs() {
        let mut c = ModelConfig::fnoseg3d();
        c.width = 0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::fnoseg3d();
        c.out_labels = 1;
        assert!(c.validate().is_err());
    }
}
