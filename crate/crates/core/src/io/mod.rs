//! Corpus and model persistence: PGM images, TSV manifests, model files.

pub mod corpus;
pub mod manifest;
pub mod model_file;
pub mod pgm;

pub use corpus::{corpus_from_manifest, load_corpus, load_images, save_corpus, Corpus, LabeledImage, LoadMode};
pub use manifest::{Manifest, ManifestRow, MANIFEST_HEADER};
pub use model_file::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC};
pub use pgm::{encode_pgm, parse_pgm, read_pgm, write_pgm, GrayImage};
