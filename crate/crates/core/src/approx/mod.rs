//! Dense feed-forward networks with exact reverse-mode gradients, used for actors,
//! critics and value functions.

mod adam;
mod mlp;

pub use adam::{clip_global_norm, Adam};
pub use mlp::{
    Activation, GradientRecord, InitScheme, Mlp, MlpDocument, Trace, CHECKPOINT_FORMAT_VERSION,
};
