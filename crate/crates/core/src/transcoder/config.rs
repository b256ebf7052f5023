use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::nn::{conv_out_len, deconv_out_len};
use crate::{Error, Result};

/// One encoder convolution: `channels` kernels of `kernel × kernel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub const fn new(channels: usize, kernel: usize, stride: usize) -> Self {
        ConvSpec {
            channels,
            kernel,
            stride,
        }
    }
}

/// Network geometry. The frame decoder mirrors `conv` with deconvolutions
/// and ends in a single channel (the predicted newest frame).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscoderConfig {
    pub frame_size: usize,
    pub history: usize,
    pub action_count: usize,
    pub conv: Vec<ConvSpec>,
    /// Width of the encoder's fully connected layer, i.e. of `h_enc`.
    pub hidden: usize,
    /// Width of the action gate; must equal `hidden`.
    pub gate_width: usize,
    pub q_hidden: usize,
    pub head_hidden: usize,
    /// Insert a bias-free projection of `h_enc` before the element-wise product.
    pub gate_projection: bool,
}

impl TranscoderConfig {
    /// Atari geometry: 84×84 frames, four-frame history, the three-layer
    /// convolutional encoder of the standard DQN and a 512-wide code.
    pub fn atari(action_count: usize) -> Self {
        TranscoderConfig {
            frame_size: 84,
            history: 4,
            action_count,
            conv: vec![ConvSpec::new(32, 8, 4), ConvSpec::new(64, 4, 2), ConvSpec::new(64, 3, 1)],
            hidden: 512,
            gate_width: 512,
            q_hidden: 512,
            head_hidden: 512,
            gate_projection: false,
        }
    }

    /// Desk-scale geometry for the built-in 40×40 games.
    pub fn desk(action_count: usize) -> Self {
        TranscoderConfig {
            frame_size: 40,
            history: 4,
            action_count,
            conv: vec![ConvSpec::new(16, 4, 4), ConvSpec::new(32, 4, 2)],
            hidden: 128,
            gate_width: 128,
            q_hidden: 128,
            head_hidden: 64,
            gate_projection: false,
        }
    }

    /// Small geometry for gradient checks: 20×20 frames, two frames of history,
    /// two conv layers.
    pub fn tiny(action_count: usize) -> Self {
        TranscoderConfig {
            frame_size: 20,
            history: 2,
            action_count,
            conv: vec![ConvSpec::new(4, 4, 2), ConvSpec::new(6, 3, 2)],
            hidden: 16,
            gate_width: 16,
            q_hidden: 12,
            head_hidden: 8,
            gate_projection: false,
        }
    }

    /// Spatial side length after each encoder layer (index 0 is the input).
    pub fn encoder_sides(&self) -> Result<Vec<usize>> {
        let mut sides = vec![self.frame_size];
        for (i, c) in self.conv.iter().enumerate() {
            let prev = *sides.last().expect("non-empty");
            let next = conv_out_len(prev, c.kernel, c.stride).ok_or_else(|| {
                Error::config(
                    format!("model.conv[{i}]"),
                    format!("kernel {} stride {} does not fit side {prev}", c.kernel, c.stride),
                )
            })?;
            sides.push(next);
        }
        Ok(sides)
    }

    /// `(channels, side)` of the last encoder feature map.
    pub fn feature_map(&self) -> Result<(usize, usize)> {
        let sides = self.encoder_sides()?;
        let channels = self.conv.last().map_or(self.history, |c| c.channels);
        Ok((channels, *sides.last().expect("non-empty")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, detail: String| Err(Error::config(key, detail));
        if self.history < 1 {
            return bad("model.history", "must be at least 1".into());
        }
        if self.action_count < 2 {
            return bad("model.action_count", "must be at least 2".into());
        }
        if self.conv.is_empty() {
            return bad("model.conv", "at least one conv layer required".into());
        }
        if self.hidden == 0 || self.q_hidden == 0 || self.head_hidden == 0 {
            return bad("model.hidden", "layer widths must be positive".into());
        }
        if self.conv.iter().any(|c| c.channels == 0 || c.kernel == 0 || c.stride == 0) {
            return bad("model.conv", "channels, kernel and stride must be positive".into());
        }
        if self.hidden != self.gate_width {
            return bad(
                "model.gate_width",
                format!("must equal model.hidden ({} != {})", self.gate_width, self.hidden),
            );
        }
        let sides = self.encoder_sides()?;
        // Mirror the encoder; every intermediate side must be reproduced.
        let mut side = *sides.last().expect("non-empty");
        for (i, c) in self.conv.iter().enumerate().rev() {
            side = deconv_out_len(side, c.kernel, c.stride);
            if side != sides[i] {
                return bad(
                    "model.conv",
                    format!(
                        "decoder mirror of layer {i} yields side {side}, encoder had {}",
                        sides[i]
                    ),
                );
            }
        }
        Ok(())
    }
}
