use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadVariant {
    FullyConnected,
    BasicCnn,
    ContextCnn,
    Lstm,
}

impl HeadVariant {
    pub const ALL: [HeadVariant; 4] = [
        HeadVariant::FullyConnected,
        HeadVariant::BasicCnn,
        HeadVariant::ContextCnn,
        HeadVariant::Lstm,
    ];

    /// Short name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            HeadVariant::FullyConnected => "fc",
            HeadVariant::BasicCnn => "cnn",
            HeadVariant::ContextCnn => "ctx-cnn",
            HeadVariant::Lstm => "lstm",
        }
    }
}

impl std::str::FromStr for HeadVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HeadVariant::ALL
            .into_iter()
            .find(|v| v.cli_name() == s)
            .ok_or_else(|| Error::InvalidConfig {
                field: "variant",
                reason: format!("unknown head `{s}` (expected fc, cnn, ctx-cnn or lstm)"),
            })
    }
}

/// Architecture hyperparameters for a span-prediction head.
///
/// Fields unused by a variant are ignored by it but still part of the
/// config digest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub variant: HeadVariant,
    /// Embedding width `H`.
    pub hidden_size: usize,
    pub kernel_widths: Vec<usize>,
    pub filters_per_kernel: usize,
    pub lstm_hidden: usize,
    /// Output channels `C` of the context CNN.
    pub context_out_channels: usize,
    /// Width of the filter-generator convolution.
    pub generator_width: usize,
    /// Width of each generated filter.
    pub applied_width: usize,
    pub dropout_keep_prob: f64,
}

impl HeadConfig {
    pub const DEFAULT_HIDDEN: usize = 64;

    pub fn new(variant: HeadVariant, hidden_size: usize) -> Self {
        Self {
            variant,
            hidden_size,
            kernel_widths: vec![3, 5, 7],
            filters_per_kernel: 64,
            lstm_hidden: 256,
            context_out_channels: 16,
            generator_width: 5,
            applied_width: 5,
            dropout_keep_prob: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden_size", self.hidden_size),
            ("filters_per_kernel", self.filters_per_kernel),
            ("lstm_hidden", self.lstm_hidden),
            ("context_out_channels", self.context_out_channels),
            ("generator_width", self.generator_width),
            ("applied_width", self.applied_width),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig {
                    field,
                    reason: "must be >= 1".into(),
                });
            }
        }
        if self.variant == HeadVariant::BasicCnn {
            if self.kernel_widths.is_empty() {
                return Err(Error::InvalidConfig {
                    field: "kernel_widths",
                    reason: "must be non-empty".into(),
                });
            }
            if self.kernel_widths.contains(&0) {
                return Err(Error::InvalidConfig {
                    field: "kernel_widths",
                    reason: "every width must be >= 1".into(),
                });
            }
        }
        if !(self.dropout_keep_prob > 0.0 && self.dropout_keep_prob <= 1.0) {
            return Err(Error::InvalidConfig {
                field: "dropout_keep_prob",
                reason: format!("{} is outside (0, 1]", self.dropout_keep_prob),
            });
        }
        Ok(())
    }

    /// Number of generated-filter coefficients per sequence: `w_a * H * C`.
    pub fn generated_filter_len(&self) -> usize {
        self.applied_width * self.hidden_size * self.context_out_channels
    }

    /// Closed-form parameter count.
    ///
    /// * FC: `2H + 2`
    /// * basic CNN: `sum_w (w*H*F + F) + 2*F*|widths| + 2`
    /// * context CNN: `w_g*H*(w_a*H*C) + w_a*H*C + C + 2C + 2`
    /// * LSTM: `4*((H + D)*D + D) + 2D + 2`
    pub fn num_parameters(&self) -> usize {
        let h = self.hidden_size;
        match self.variant {
            HeadVariant::FullyConnected => 2 * h + 2,
            HeadVariant::BasicCnn => {
                let f = self.filters_per_kernel;
                let convs: usize = self.kernel_widths.iter().map(|w| w * h * f + f).sum();
                convs + 2 * f * self.kernel_widths.len() + 2
            }
            HeadVariant::ContextCnn => {
                let c = self.context_out_channels;
                let g = self.generated_filter_len();
                self.generator_width * h * g + g + c + 2 * c + 2
            }
            HeadVariant::Lstm => {
                let d = self.lstm_hidden;
                4 * ((h + d) * d + d) + 2 * d + 2
            }
        }
    }

    /// SHA-256 of the canonical JSON encoding; stored in checkpoints.
    pub fn digest(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("HeadConfig serializes");
        Sha256::digest(&bytes).into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sizes_rejected_with_field_name() {
        let mut c = HeadConfig::new(HeadVariant::ContextCnn, 16);
        c.context_out_channels = 0;
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("context_out_channels"));
    }

    #[test]
    fn cnn_requires_widths() {
        let mut c = HeadConfig::new(HeadVariant::BasicCnn, 16);
        c.kernel_widths.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn keep_prob_range() {
        let mut c = HeadConfig::new(HeadVariant::FullyConnected, 16);
        c.dropout_keep_prob = 0.0;
        assert!(c.validate().is_err());
        c.dropout_keep_prob = 1.0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn digest_tracks_config() {
        let a = HeadConfig::new(HeadVariant::Lstm, 16);
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.lstm_hidden = 8;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in HeadVariant::ALL {
            assert_eq!(v.cli_name().parse::<HeadVariant>().unwrap(), v);
        }
        assert!("gru".parse::<HeadVariant>().is_err());
    }
}
