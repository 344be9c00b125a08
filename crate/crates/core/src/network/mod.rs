//! The velocity model: frozen patch tokenizer, proprioceptive encoder,
//! proprio-conditioned attention over visual tokens, slip confidence and a
//! softplus velocity head.

mod checkpoint;
mod forward;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use forward::{
    attend, confidence, encode_proprio, forward, forward_with_tokens, select, select_by_score,
    selection_count, tokenize_image, Activations, ForwardTrace, VisualTokens,
};
pub use params::{ModelConfig, ModelParams, Tokenizer, Trainable, ALPHA_MAX};
