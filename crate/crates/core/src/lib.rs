//! Cross-language code clone detection between C and COBOL.
//!
//! Both languages are lowered into a shared tree IR ([`ir`]), linearised
//! into structure-based traversal sequences ([`sbt`]), embedded
//! ([`similarity`]) and scored by MAP@R ([`eval`]).

pub mod dataset;
pub mod eval;
pub mod frontend;
pub mod ir;
pub mod normalize;
pub mod sbt;
pub mod similarity;
