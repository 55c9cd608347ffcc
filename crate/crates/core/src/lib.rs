pub mod archive;
pub mod error;
pub mod frontapprox;
pub mod generator;
pub mod harness;
pub mod indicators;
pub mod peaks;
pub mod profiles;
pub mod quadratic;
pub mod solvers;

pub use error::{Error, Result};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/problems.md")]
    pub mod problems {}
    #[doc = include_str!("../../../book/src/generator.md")]
    pub mod generator {}
    #[doc = include_str!("../../../book/src/indicators.md")]
    pub mod indicators {}
    #[doc = include_str!("../../../book/src/front-approximation.md")]
    pub mod front_approximation {}
    #[doc = include_str!("../../../book/src/harness.md")]
    pub mod harness {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    pub mod profiles {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
