//! mdbook cannot run listings that need workspace crates, so each chapter is
//! pulled in here as module docs and `cargo test --doc` runs them.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/world.md")]
pub mod world {}
#[doc = include_str!("../../../book/src/gestures.md")]
pub mod gestures {}
#[doc = include_str!("../../../book/src/datasets.md")]
pub mod datasets {}
#[doc = include_str!("../../../book/src/intents.md")]
pub mod intents {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
