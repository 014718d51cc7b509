//! Label vocabularies and the target-vector tables used as training targets:
//! one-hot, loaded from file, fetched from an embeddings endpoint, compacted,
//! or synthesized with a two-level semantic structure.

mod fetch;
mod table;
mod vocabulary;

pub use fetch::{fetch_embeddings, fetch_table, render_prompt, EmbeddingEndpointConfig};
pub(crate) use table::orthonormal_rows;
pub use table::{
    compact, cosine_similarity, decode_nearest, load_embedding_table, one_hot_table,
    parse_embedding_file, read_embedding_file, synth_hierarchical_table, EncodingKind,
    EncodingTable,
};
pub use vocabulary::{LabelVocabulary, BIM_GENERIC_TYPES};
