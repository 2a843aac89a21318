pub mod artifacts;
pub mod assemble;
pub mod corpus;
pub mod filter;
pub mod model;
pub mod pipeline;
pub mod prompt;
pub mod rank;
pub mod report;
pub mod syntax;
pub mod templates;
pub mod validate;

mod language;

pub use language::Language;
