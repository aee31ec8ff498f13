//! Ground atoms, the rule language and its evaluator.

pub mod ast;
pub mod atom;
pub mod eval;
pub mod guidance;
pub mod parser;

pub use ast::{Aggregate, Atom, Bound, CmpOp, Comparison, Literal, Rule, RuleSet, Term, WeakConstraint};
pub use atom::{atom, FeatureSet, GroundAtom, Symbol, Value};
pub use eval::{entailed_actions, Derivation, Program};
pub use guidance::{pick, rollout_weights, Guidance, RolloutMode};
pub use parser::parse_rules;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuleError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsafe variable `{variable}` in `{statement}`")]
    Unsafe { variable: String, statement: String },
    #[error("body of `{statement}` has {len} literals, at most {max} allowed")]
    BodyTooLong { statement: String, len: usize, max: usize },
    #[error("recursive definition through predicate `{0}`")]
    Cycle(String),
    #[error("predicate `{0}` is neither derived nor a declared feature")]
    UndeclaredPredicate(String),
    #[error("weak constraint `{0}` depends on a predicate derived after the choice")]
    WeakConstraintScope(String),
    #[error("choice over {candidates} atoms exceeds the limit of {limit}")]
    ChoiceTooLarge { candidates: usize, limit: usize },
    #[error("weak constraint weight `{0}` is not an integer")]
    NonIntegerWeight(String),
}
