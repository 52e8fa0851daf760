//! Sampling-rate schedulability of a wireless sensor node.
//!
//! [`analytical`] gives closed-form minimum sampling periods. [`wsan`] builds
//! a timed actor model of the node, which [`kernel`] explores exhaustively.
//! [`search`] sweeps both over a parameter grid.

pub mod analytical;
pub mod kernel;
pub mod params;
pub mod search;
pub mod wsan;

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/analytical.md")]
    pub mod analytical {}
    #[doc = include_str!("../../../book/src/actors.md")]
    pub mod actors {}
    #[doc = include_str!("../../../book/src/network.md")]
    pub mod network {}
    #[doc = include_str!("../../../book/src/traces.md")]
    pub mod traces {}
    #[doc = include_str!("../../../book/src/sweeps.md")]
    pub mod sweeps {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
