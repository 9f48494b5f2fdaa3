//! The segmentation network: a bi-directional LSTM encoder, soft attention
//! pooling with a learned context vector, and a scalar regression head.
//!
//! ```text
//!   x_0 … x_{K-1}            (K frames, D features)
//!   →h_t = LSTM_fwd(x_t, →h_{t-1})       ←h_t = LSTM_bwd(x_t, ←h_{t+1})
//!   h_t  = [→h_t ; ←h_t]                 (2H)
//!   v_t  = tanh(W_att·h_t + b_att)       (A)
//!   β    = softmax_t(v_tᵀ·u)             (u: context vector)
//!   q    = Σ_t β_t·h_t
//!   η    = act(w_outᵀ·q + b_out)         act ∈ {identity, ReLU}
//! ```
//!
//! The ablation variant replaces attention with mean pooling
//! (`β_t = 1/K`) and carries no attention parameters.

mod checkpoint;
mod forward;
mod params;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use forward::{
    attention_forward, bilstm_forward, head_forward, lstm_step, model_forward, predict, ForwardTrace, GateTrace,
    LstmTrace,
};
pub use params::{count_params, init_params, LstmWeights, ModelParams, PARAM_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDims {
    /// Features per frame (D).
    pub input_dim: usize,
    /// LSTM units per direction (H).
    pub hidden_dim: usize,
    /// Width of the attention projection (A); 0 for mean pooling.
    pub attn_dim: usize,
    /// Frames per window (K).
    pub seq_len: usize,
}

impl ModelDims {
    /// Attention model with the default square projection `A = 2H`.
    pub fn new(input_dim: usize, hidden_dim: usize, seq_len: usize) -> Self {
        ModelDims {
            input_dim,
            hidden_dim,
            attn_dim: 2 * hidden_dim,
            seq_len,
        }
    }

    pub fn validate(&self, pooling: Pooling) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.seq_len == 0 {
            return Err(Error::invalid(
                "dims",
                format!("all dimensions must be positive: {self:?}"),
            ));
        }
        match pooling {
            Pooling::Attention if self.attn_dim == 0 => {
                Err(Error::invalid("attn_dim", "attention pooling needs attn_dim > 0"))
            }
            Pooling::Mean if self.attn_dim != 0 => Err(Error::invalid(
                "attn_dim",
                "mean pooling carries no attention parameters (attn_dim = 0)",
            )),
            _ => Ok(()),
        }
    }

    /// `2·(4H·(D+H) + 4H) + A·2H + A + A + 2H + 1`.
    pub fn param_count(&self) -> usize {
        let (d, h, a) = (self.input_dim, self.hidden_dim, self.attn_dim);
        2 * (4 * h * (d + h) + 4 * h) + a * 2 * h + a + a + 2 * h + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadActivation {
    /// Identity output; can reach the negative S2 target.
    #[default]
    Linear,
    /// Rectified output, as literally written for the regression head.
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Attention,
    /// Mean over time; the no-attention bi-LSTM ablation.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub head: HeadActivation,
    pub pooling: Pooling,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_parameter_counts() {
        // 2·(4·80·98 + 320) + 160·160 + 160 + 160 + 161
        assert_eq!(2 * (4 * 80 * 98 + 320) + 160 * 160 + 160 + 160 + 161, 89_441);
        assert_eq!(ModelDims::new(18, 80, 7).param_count(), 89_441);
        assert_eq!(ModelDims::new(18, 20, 7).param_count(), 7_961);
        assert_eq!(
            ModelDims {
                input_dim: 1,
                hidden_dim: 1,
                attn_dim: 2,
                seq_len: 1
            }
            .param_count(),
            35
        );
    }

    #[test]
    fn dims_validation() {
        assert!(ModelDims::new(18, 80, 7).validate(Pooling::Attention).is_ok());
        assert!(ModelDims::new(18, 80, 7).validate(Pooling::Mean).is_err());
        let mean = ModelDims {
            attn_dim: 0,
            ..ModelDims::new(18, 80, 7)
        };
        assert!(mean.validate(Pooling::Mean).is_ok());
        assert!(ModelDims::new(0, 80, 7).validate(Pooling::Attention).is_err());
    }
}
