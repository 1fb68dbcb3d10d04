//! Parsing, executing and weaving literate markdown documents.

pub mod chunk;
pub mod citations;
pub mod front_matter;
pub mod html;
pub mod kernel;
pub mod markdown;
pub mod render;
pub mod weave;
