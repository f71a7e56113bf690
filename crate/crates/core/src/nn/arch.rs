use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// The four compared variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ModelKind {
    /// Motion-only LSTM predicting absolute positions.
    PNet,
    /// Motion-only LSTM predicting per-step deltas.
    PdNet,
    /// Motion plus one raster of the last observed step.
    SmNet,
    /// Motion plus one raster per observed step.
    TsmNet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::PNet, ModelKind::PdNet, ModelKind::SmNet, ModelKind::TsmNet];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::PNet => "P-Net",
            ModelKind::PdNet => "PD-Net",
            ModelKind::SmNet => "SM-Net",
            ModelKind::TsmNet => "TSM-Net",
        }
    }

    /// Short identifier used on the command line and in CSV reports.
    pub fn short(self) -> &'static str {
        match self {
            ModelKind::PNet => "p",
            ModelKind::PdNet => "pd",
            ModelKind::SmNet => "sm",
            ModelKind::TsmNet => "tsm",
        }
    }

    pub fn from_short(s: &str) -> Option<ModelKind> {
        Self::ALL
            .into_iter()
            .find(|k| k.short().eq_ignore_ascii_case(s) || k.name().eq_ignore_ascii_case(s))
    }

    pub fn predicts_deltas(self) -> bool {
        !matches!(self, ModelKind::PNet)
    }

    /// P-Net and PD-Net see positions in their motion input instead of maps.
    pub fn uses_positions(self) -> bool {
        matches!(self, ModelKind::PNet | ModelKind::PdNet)
    }

    pub fn uses_rasters(self) -> bool {
        !self.uses_positions()
    }

    pub fn motion_dim(self) -> usize {
        if self.uses_positions() {
            7
        } else {
            5
        }
    }

    /// Rasters consumed per sample.
    pub fn raster_count(self, t_obs: usize) -> usize {
        match self {
            ModelKind::PNet | ModelKind::PdNet => 0,
            ModelKind::SmNet => 1,
            ModelKind::TsmNet => t_obs,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Six 3x3 convolutions with padding 1, each followed by ReLU.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CnnConfig {
    pub image_size: usize,
    pub channels: Vec<usize>,
    pub strides: Vec<usize>,
}

pub const INPUT_CHANNELS: usize = 3;
pub const KERNEL: usize = 3;

pub(crate) fn conv_output_size(input: usize, stride: usize) -> usize {
    (input - 1) / stride + 1
}

impl CnnConfig {
    /// 3 -> 16 -> 16 -> 32 -> 32 -> 32 -> 32 channels, stride 2 until the
    /// map is 4x4 and stride 1 afterwards. `image_size / 4` must be a power
    /// of two no larger than 64.
    pub fn standard(image_size: usize) -> Result<Self> {
        let ratio = image_size / 4;
        if !image_size.is_multiple_of(4) || !ratio.is_power_of_two() || ratio > 64 {
            return Err(Error::InvalidConfig(format!(
                "image size {image_size} cannot be reduced to 4x4 by six stride-1/2 convolutions"
            )));
        }
        let halvings = ratio.trailing_zeros() as usize;
        let strides = (0..6).map(|i| if i < halvings { 2 } else { 1 }).collect();
        Ok(Self {
            image_size,
            channels: alloc::vec![16, 16, 32, 32, 32, 32],
            strides,
        })
    }

    pub fn layer_input_channels(&self, layer: usize) -> usize {
        if layer == 0 {
            INPUT_CHANNELS
        } else {
            self.channels[layer - 1]
        }
    }

    /// Spatial side length after every layer.
    pub fn spatial_sizes(&self) -> Vec<usize> {
        let mut s = self.image_size;
        self.strides
            .iter()
            .map(|&st| {
                s = conv_output_size(s, st);
                s
            })
            .collect()
    }

    pub fn final_spatial(&self) -> usize {
        self.spatial_sizes().last().copied().unwrap_or(self.image_size)
    }

    pub fn output_dim(&self) -> usize {
        let s = self.final_spatial();
        self.channels.last().copied().unwrap_or(INPUT_CHANNELS) * s * s
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArchConfig {
    pub kind: ModelKind,
    pub cnn: Option<CnnConfig>,
    pub motion_dim: usize,
    /// LSTM input size and hidden size.
    pub latent_dim: usize,
    pub head_hidden: usize,
    pub output_dim: usize,
    pub decoder_dropout: f64,
}

/// Layer widths along the forward path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimensionChain {
    pub cnn_output: usize,
    pub concat: usize,
    pub lstm_hidden: usize,
    pub head_hidden: usize,
    pub output: usize,
}

pub const HEAD_HIDDEN: usize = 258;
pub const DECODER_DROPOUT: f64 = 0.5;

impl ArchConfig {
    /// Published layout for `kind`: 517-wide latent for the map models and
    /// a 7-wide motion-only latent for the baselines.
    pub fn for_kind(kind: ModelKind, image_size: usize) -> Result<Self> {
        let cnn = if kind.uses_rasters() { Some(CnnConfig::standard(image_size)?) } else { None };
        let motion_dim = kind.motion_dim();
        let latent_dim = cnn.as_ref().map_or(0, |c| c.output_dim()) + motion_dim;
        let arch = Self {
            kind,
            cnn,
            motion_dim,
            latent_dim,
            head_hidden: HEAD_HIDDEN,
            output_dim: 2,
            decoder_dropout: DECODER_DROPOUT,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn tsm() -> Self {
        Self::for_kind(ModelKind::TsmNet, 256).expect("256 px is a valid image size")
    }

    /// Checks every width along the forward path.
    pub fn validate(&self) -> Result<DimensionChain> {
        let broken = |msg: alloc::string::String| Err(Error::DimensionChain(msg));
        if self.kind.uses_rasters() != self.cnn.is_some() {
            return broken(format!("{} {} a CNN branch", self.kind, if self.cnn.is_some() { "must not have" } else { "needs" }));
        }
        if self.motion_dim != self.kind.motion_dim() {
            return broken(format!("{} takes {} motion columns, configured {}", self.kind, self.kind.motion_dim(), self.motion_dim));
        }
        let cnn_output = match &self.cnn {
            Some(c) => {
                if c.channels.len() != 6 || c.strides.len() != 6 {
                    return broken(format!("CNN must have six layers, got {}", c.channels.len()));
                }
                if c.channels.iter().chain(&c.strides).any(|&v| v == 0) || c.image_size == 0 {
                    return broken("CNN widths and strides must be positive".into());
                }
                c.output_dim()
            }
            None => 0,
        };
        let concat = cnn_output + self.motion_dim;
        if concat != self.latent_dim {
            return broken(format!(
                "CNN output {cnn_output} + motion {} = {concat}, but LSTM width is {}",
                self.motion_dim, self.latent_dim
            ));
        }
        if self.head_hidden == 0 || self.output_dim != 2 {
            return broken(format!("head must map to 2 outputs through a non-empty hidden layer, got {} -> {}", self.head_hidden, self.output_dim));
        }
        if !(0.0..1.0).contains(&self.decoder_dropout) {
            return Err(Error::InvalidConfig(format!("decoder dropout must lie in [0, 1), got {}", self.decoder_dropout)));
        }
        Ok(DimensionChain {
            cnn_output,
            concat,
            lstm_hidden: self.latent_dim,
            head_hidden: self.head_hidden,
            output: self.output_dim,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_tsm_chain() {
        let chain = ArchConfig::tsm().validate().unwrap();
        assert_eq!(
            chain,
            DimensionChain { cnn_output: 512, concat: 517, lstm_hidden: 517, head_hidden: 258, output: 2 }
        );
    }

    #[test]
    fn reduced_rasters_keep_the_chain() {
        for size in [16, 32, 64, 128, 256] {
            let arch = ArchConfig::for_kind(ModelKind::TsmNet, size).unwrap();
            assert_eq!(arch.cnn.as_ref().unwrap().final_spatial(), 4);
            assert_eq!(arch.latent_dim, 517);
        }
        assert!(CnnConfig::standard(48).is_err());
        assert!(CnnConfig::standard(512).is_err());
    }

    #[test]
    fn sm_net_matches_tsm_width() {
        let sm = ArchConfig::for_kind(ModelKind::SmNet, 256).unwrap();
        assert_eq!(sm.validate().unwrap().concat, 512 + 5);
    }

    #[test]
    fn baselines_are_motion_only() {
        let pd = ArchConfig::for_kind(ModelKind::PdNet, 256).unwrap();
        assert!(pd.cnn.is_none());
        assert_eq!(pd.latent_dim, 7);
    }

    #[test]
    fn broken_chain_is_rejected() {
        let mut arch = ArchConfig::tsm();
        arch.latent_dim = 516;
        assert!(matches!(arch.validate(), Err(Error::DimensionChain(_))));
        let mut arch = ArchConfig::tsm();
        arch.cnn.as_mut().unwrap().channels[5] = 31;
        assert!(arch.validate().is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(ModelKind::from_short(k.short()), Some(k));
        }
        assert_eq!(ModelKind::from_short("TSM-Net"), Some(ModelKind::TsmNet));
    }
}
