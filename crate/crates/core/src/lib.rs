pub mod assets;
pub mod augmentation;
pub mod corpus;
pub mod dialogue;
pub mod emotion;
pub mod empathy;
pub mod eval;
pub mod lm;
pub mod pool_file;
pub mod protocols;
pub mod retrieval;
pub mod safety;
pub mod scoring;
pub mod text;
