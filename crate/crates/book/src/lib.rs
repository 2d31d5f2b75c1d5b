//! Guide chapters compiled as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/certificates.md")]
pub mod certificates {}

#[doc = include_str!("../../../book/src/symmat.md")]
pub mod symmat {}

#[doc = include_str!("../../../book/src/circle.md")]
pub mod circle {}

#[doc = include_str!("../../../book/src/gowdy.md")]
pub mod gowdy {}

#[doc = include_str!("../../../book/src/tsym.md")]
pub mod tsym {}

#[doc = include_str!("../../../book/src/cmc.md")]
pub mod cmc {}

#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
