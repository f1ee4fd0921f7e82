//! Runs the code listings of the guide in `book/` as doc-tests.
//!
//! mdbook cannot test listings that depend on external crates, so each
//! chapter is included here as the docs of an empty module and `cargo test`
//! checks it like any other doc comment. One module per chapter keeps
//! failures traceable to their source file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/ingest.md")]
pub mod ingest {}

#[doc = include_str!("../../../book/src/fixations.md")]
pub mod fixations {}

#[doc = include_str!("../../../book/src/saliency.md")]
pub mod saliency {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/study.md")]
pub mod study {}

#[doc = include_str!("../../../book/src/simulator.md")]
pub mod simulator {}

#[doc = include_str!("../../../book/src/report.md")]
pub mod report {}
