use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

/// Which audio representation feeds the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `T × 64` log-Mel frames.
    Logmel,
    /// One 128-vector per second.
    Vggish,
    /// One 2048-vector per clip.
    Panns,
}

impl Variant {
    pub fn frame_dim(self) -> usize {
        match self {
            Variant::Logmel => 64,
            Variant::Vggish => 128,
            Variant::Panns => 2048,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Logmel => "logmel",
            Variant::Vggish => "vggish",
            Variant::Panns => "panns",
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
        match s {
            "logmel" => Ok(Variant::Logmel),
            "vggish" => Ok(Variant::Vggish),
            "panns" => Ok(Variant::Panns),
            _ => Err(Error::Config(format!("unknown variant `{s}` (logmel|vggish|panns)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionerConfig {
    pub variant: Variant,
    pub use_sve: bool,
    /// Cells in the first and second audio BiGRU (per direction).
    pub audio_hidden: [usize; 2],
    pub text_hidden: usize,
    pub embed_dim: usize,
    pub decoder_hidden: usize,
    pub dropout: f64,
    pub leaky_alpha: f64,
    pub gru_bias: bool,
    pub epochs: usize,
    pub batch: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Decoded captions stop at this many tokens, `<sos>` and `<eos>`
    /// included.
    pub max_len: usize,
    /// Stop once an epoch's training loss falls below this.
    pub target_loss: Option<f64>,
}

impl Default for CaptionerConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Panns,
            use_sve: true,
            audio_hidden: [32, 64],
            text_hidden: 128,
            embed_dim: 256,
            decoder_hidden: 128,
            dropout: 0.5,
            leaky_alpha: 0.3,
            gru_bias: true,
            epochs: 50,
            batch: 64,
            adam: AdamConfig::default(),
            seed: 0,
            max_len: 22,
            target_loss: None,
        }
    }
}

impl CaptionerConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = [
            self.audio_hidden[0],
            self.audio_hidden[1],
            self.text_hidden,
            self.embed_dim,
            self.decoder_hidden,
        ];
        if widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.batch < 2 {
            return Err(Error::Config("batch must be at least 2 for batch normalization".into()));
        }
        if self.max_len < 2 {
            return Err(Error::Config("max_len must leave room for <sos> and <eos>".into()));
        }
        Ok(())
    }

    /// Width of the fused encoder output.
    pub fn fused_width(&self) -> usize {
        2 * self.audio_hidden[1] + self.text_hidden
    }
}
