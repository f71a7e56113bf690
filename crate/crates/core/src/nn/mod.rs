//! The CNN + motion MLP encoder, the shared-weight LSTM encoder-decoder and
//! the output head, for TSM-Net and the three baselines.

mod arch;
mod layers;
mod lstm;
mod model;
mod params;

pub use arch::{ArchConfig, CnnConfig, DimensionChain, ModelKind, DECODER_DROPOUT, HEAD_HIDDEN, INPUT_CHANNELS, KERNEL};
pub use layers::{conv_backward, conv_forward, dense_backward, dense_forward, relu_backward, relu_inplace};
pub use lstm::{decode_rollout, encode_sequence, lstm_cell_backward, lstm_cell_step, sample_initial_state, CellGrads, LstmState};
pub use model::{
    baseline_forward, cnn_forward, concat_latent, eval_initial_state, head_forward, image_tensor, motion_mlp_forward,
    tsmnet_forward, Batch, Mode, Model, OutputScale, EVAL_STATE_SEED,
};
pub use params::{init_params, ConvLayer, Dense, LstmWeights, ModelParams, Parameters};
