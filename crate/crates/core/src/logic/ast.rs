//! Syntax tree of the rule fragment: normal rules, choice aggregates and
//! weak constraints. `Display` prints the same grammar the parser reads.

use std::collections::BTreeMap;
use std::fmt;

use super::atom::{Symbol, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Symbol),
    Const(Value),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Symbol::new(name))
    }

    pub fn int(i: i64) -> Self {
        Term::Const(Value::Int(i))
    }

    pub fn as_var(&self) -> Option<&Symbol> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Self {
        Atom { pred: Symbol::new(pred), args }
    }

    pub fn vars(&self) -> impl Iterator<Item = &Symbol> {
        self.args.iter().filter_map(Term::as_var)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pred)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn holds(self, lhs: &Value, rhs: &Value) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
        }
    }

    /// The operator with its operands swapped: `a < b` iff `b > a`.
    pub fn flipped(self) -> Self {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// A comparison chain such as `V <= 50` or `70 <= V <= 80`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Comparison {
    pub terms: Vec<Term>,
    pub ops: Vec<CmpOp>,
}

impl Comparison {
    pub fn binary(lhs: Term, op: CmpOp, rhs: Term) -> Self {
        Comparison { terms: vec![lhs, rhs], ops: vec![op] }
    }

    pub fn vars(&self) -> impl Iterator<Item = &Symbol> {
        self.terms.iter().filter_map(Term::as_var)
    }

    /// Binary comparisons written constant-first are turned around so that
    /// `50 >= V` and `V <= 50` compare equal.
    pub fn canonical(&self) -> Comparison {
        if self.ops.len() == 1
            && matches!(self.terms[0], Term::Const(_))
            && matches!(self.terms[1], Term::Var(_))
        {
            return Comparison {
                terms: vec![self.terms[1].clone(), self.terms[0].clone()],
                ops: vec![self.ops[0].flipped()],
            };
        }
        self.clone()
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.terms[0])?;
        for (op, t) in self.ops.iter().zip(&self.terms[1..]) {
            write!(f, " {} {}", op.symbol(), t)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Pos(Atom),
    Neg(Atom),
    Cmp(Comparison),
}

impl Literal {
    pub fn canonical(&self) -> Literal {
        match self {
            Literal::Cmp(c) => Literal::Cmp(c.canonical()),
            other => other.clone(),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Pos(a) => write!(f, "{a}"),
            Literal::Neg(a) => write!(f, "not {a}"),
            Literal::Cmp(c) => write!(f, "{c}"),
        }
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, body: &[Literal]) -> fmt::Result {
    for (i, l) in body.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{l}")?;
    }
    Ok(())
}

/// `head :- body.`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            write_body(f, &self.body)?;
        }
        f.write_str(".")
    }
}

/// Cardinality bound of an aggregate: a literal integer or a named constant
/// such as `M` resolved at evaluation time.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Bound {
    Int(i64),
    Named(Symbol),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Int(i) => write!(f, "{i}"),
            Bound::Named(s) => write!(f, "{s}"),
        }
    }
}

/// One `head : condition` element of a choice aggregate.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChoiceElement {
    pub head: Atom,
    pub condition: Vec<Literal>,
}

impl ChoiceElement {
    pub fn as_rule(&self) -> Rule {
        Rule { head: self.head.clone(), body: self.condition.clone() }
    }
}

/// `l { h : body ; h : body } u.`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Aggregate {
    pub lower: Bound,
    pub upper: Bound,
    pub elements: Vec<ChoiceElement>,
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {{ ", self.lower)?;
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "{}", e.head)?;
            if !e.condition.is_empty() {
                f.write_str(" : ")?;
                write_body(f, &e.condition)?;
            }
        }
        write!(f, " }} {}.", self.upper)
    }
}

/// Weight of a weak constraint: a term, optionally negated (`-V`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Weight {
    pub negated: bool,
    pub term: Term,
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("-")?;
        }
        write!(f, "{}", self.term)
    }
}

/// `:~ body. [w@level, t1, t2, ...]`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeakConstraint {
    pub body: Vec<Literal>,
    pub weight: Weight,
    pub level: i64,
    pub terms: Vec<Term>,
}

impl fmt::Display for WeakConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(":~ ")?;
        write_body(f, &self.body)?;
        write!(f, ". [{}@{}", self.weight, self.level)?;
        for t in &self.terms {
            write!(f, ", {t}")?;
        }
        f.write_str("]")
    }
}

/// A parsed rule file: statements plus per-action coverage percentages.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub aggregates: Vec<Aggregate>,
    pub weak: Vec<WeakConstraint>,
    /// Action predicate name to coverage percentage in [0, 100].
    pub coverage: BTreeMap<String, f64>,
}

impl RuleSet {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.aggregates.is_empty() && self.weak.is_empty()
    }

    /// Normal rules plus aggregate elements plus weak constraints.
    pub fn clause_count(&self) -> usize {
        self.rules.len()
            + self.aggregates.iter().map(|a| a.elements.len()).sum::<usize>()
            + self.weak.len()
    }

    /// Every normal rule and aggregate element whose head has `pred`, as
    /// rules.
    pub fn definitions_of(&self, pred: &str) -> Vec<Rule> {
        let mut out: Vec<Rule> =
            self.rules.iter().filter(|r| r.head.pred.as_str() == pred).cloned().collect();
        for agg in &self.aggregates {
            for e in &agg.elements {
                if e.head.pred.as_str() == pred {
                    out.push(e.as_rule());
                }
            }
        }
        out
    }

    /// Head predicates in first-appearance order.
    pub fn head_predicates(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let heads = self
            .rules
            .iter()
            .map(|r| &r.head)
            .chain(self.aggregates.iter().flat_map(|a| a.elements.iter().map(|e| &e.head)));
        for h in heads {
            if !out.iter().any(|p| p == h.pred.as_str()) {
                out.push(h.pred.as_str().to_string());
            }
        }
        out
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.coverage.is_empty() {
            f.write_str("%cov:")?;
            for (k, v) in &self.coverage {
                write!(f, " {k}={v}")?;
            }
            f.write_str("\n")?;
        }
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        for a in &self.aggregates {
            writeln!(f, "{a}")?;
        }
        for w in &self.weak {
            writeln!(f, "{w}")?;
        }
        Ok(())
    }
}
