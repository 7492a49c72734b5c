//! Dual-channel LSTM forward and backward passes.

mod infer;
mod lstm;
mod model;

pub use infer::{infer, INFER_CHUNK};
pub use lstm::{
    lstm_cell_backward, lstm_cell_forward, lstm_layer_backward, lstm_layer_forward, GateCache, LayerCache,
    LayerOutput, LstmLayer, LstmParams, Sequence,
};
pub use model::{
    dc_backward, dc_forward, param_count, Architecture, Channel, ChannelSet, ChannelStack, DcInput, DcLstmModel,
    Dense, ForwardCache, ForwardOutput,
};
