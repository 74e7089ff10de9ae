//! Segment representation providers.
//!
//! Two implementations share one contract: a file-backed store of vectors
//! produced by any external encoder, and a small trainable mean-pooling
//! encoder that lets gradients flow end to end at desk scale.

mod store;
mod toy;

pub use store::EmbeddingStore;
pub use toy::{embed_toy, toy_backward, EncoderParams, Vocabulary, UNKNOWN_TOKEN};

use ndarray::Array2;

/// N segment vectors of dimension `d_r`, one per row.
pub type RepresentationMatrix = Array2<f64>;

/// Common surface of representation providers.
pub trait EmbeddingProvider {
    /// Representation width.
    fn dim(&self) -> usize;
    /// Whether gradients update the provider.
    fn trainable(&self) -> bool;
}

impl EmbeddingProvider for EmbeddingStore {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn trainable(&self) -> bool {
        false
    }
}

impl EmbeddingProvider for EncoderParams {
    fn dim(&self) -> usize {
        self.projection.nrows()
    }

    fn trainable(&self) -> bool {
        true
    }
}
