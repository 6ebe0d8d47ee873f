pub mod dsl;
pub mod enhance;
pub mod eval;
pub mod extract;
pub mod llm;
pub mod model;
pub mod prompt;
pub mod rules;
pub mod value;
