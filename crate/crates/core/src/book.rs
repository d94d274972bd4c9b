//! The guide chapters, included as rustdoc so `cargo test --doc` compiles
//! and runs every code snippet in the book (mdbook itself cannot test
//! snippets against a crate, so the chapters double as doc-tests here).

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/finite-fields.md")]
pub mod finite_fields {}

#[doc = include_str!("../../../book/src/cyclotomic-valuations.md")]
pub mod cyclotomic_valuations {}

#[doc = include_str!("../../../book/src/modular-equation.md")]
pub mod modular_equation {}

#[doc = include_str!("../../../book/src/l-functions.md")]
pub mod l_functions {}

#[doc = include_str!("../../../book/src/first-vertex.md")]
pub mod first_vertex {}

#[doc = include_str!("../../../book/src/command-line.md")]
pub mod command_line {}
