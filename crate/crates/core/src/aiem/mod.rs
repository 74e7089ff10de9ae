//! Cross-attention between count features and segment representations,
//! the major and aux heads, and the training loss.

mod forward;
mod loss;
mod model;
mod params;

pub use forward::{aiem_forward, attention_mass, aux_forward, major_forward, row_softmax, AiemTrace, ClassifierTrace};
pub use loss::{aux_loss, cross_entropy, major_loss, total_loss, LossWeights, PredictionDistribution, PROB_EPS};
pub use model::{
    BatchItem, DropoutMasks, EncoderKind, ForwardTrace, ModelConfig, ModelInput, Representations, Standardizer,
    TraitModel,
};
pub use params::{AiemParams, Classifier, Dense, HeadParams, Params, TensorRef};
