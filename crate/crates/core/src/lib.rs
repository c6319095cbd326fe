pub mod analysis;
pub mod assembly;
pub mod config;
pub mod error;
pub mod experiment;
pub mod linsolve;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod sparse;

pub use error::{Error, Result};

/// The guide in `book/`, compiled so its snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/getting-started.md")]
    mod getting_started {}
    #[doc = include_str!("../../../book/src/meshes.md")]
    mod meshes {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/stabilisation.md")]
    mod stabilisation {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
