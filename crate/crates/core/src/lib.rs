pub mod config;
pub mod decode;
pub mod dsp;
pub mod error;
pub mod features;
pub mod interpret;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod signal;
pub mod training;

pub use error::{Error, ErrorKind, Result};

// Guide chapters are compiled as doc-tests so their snippets stay current.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/signals.md")]
    mod signals {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/decoding.md")]
    mod decoding {}
    #[doc = include_str!("../../../book/src/interpretation.md")]
    mod interpretation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
