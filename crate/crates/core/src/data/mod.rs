//! Embedding tables, clip manifests, genre reduction and class-balanced sampling.

pub mod embeddings;
pub mod genre;
pub mod manifest;
pub mod sampling;

pub use embeddings::{
    load_embeddings, pool_frames, save_embeddings, EmbeddingFormat, EmbeddingRow, EmbeddingTable,
};
pub use genre::{reduce_genres, GenreMap, UNKNOWN_GENRE};
pub use manifest::{load_manifest, ClipRecord, LabelState, Manifest, Split};
pub use sampling::balanced_subsample;
