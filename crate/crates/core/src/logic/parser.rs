//! Parser for rule files.
//!
//! Statements end with `.`; a weak constraint continues with its
//! `[w@level, terms]` annotation. `%` starts a comment, except that a line
//! starting with `%cov:` carries `pred=percentage` coverage entries.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::{
    Aggregate, Atom, Bound, ChoiceElement, CmpOp, Comparison, Literal, Rule, RuleSet, Term,
    WeakConstraint, Weight,
};
use super::atom::{Symbol, Value};
use super::RuleError;

/// Longest body accepted for any statement.
pub const MAX_BODY_LEN: usize = 8;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    Not,
    LParen,
    RParen,
    Comma,
    Dot,
    If,
    Weak,
    Colon,
    Semi,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    At,
    Minus,
    Op(CmpOp),
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, RuleError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let push = |out: &mut Vec<Spanned>, tok| {
                out.push(Spanned { tok, line: lineno + 1, column })
            };
            if c == '%' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let tok = if word == "not" {
                    Tok::Not
                } else if c.is_ascii_uppercase() || c == '_' {
                    Tok::Var(word)
                } else {
                    Tok::Ident(word)
                };
                push(&mut out, tok);
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                let value = digits.parse::<i64>().map_err(|_| RuleError::Syntax {
                    line: lineno + 1,
                    column,
                    message: format!("integer `{digits}` out of range"),
                })?;
                push(&mut out, Tok::Int(value));
                continue;
            }
            let next = chars.get(i + 1).copied();
            let (tok, width) = match (c, next) {
                (':', Some('-')) => (Tok::If, 2),
                (':', Some('~')) => (Tok::Weak, 2),
                (':', _) => (Tok::Colon, 1),
                ('<', Some('=')) => (Tok::Op(CmpOp::Le), 2),
                ('>', Some('=')) => (Tok::Op(CmpOp::Ge), 2),
                ('=', Some('=')) => (Tok::Op(CmpOp::Eq), 2),
                ('!', Some('=')) => (Tok::Op(CmpOp::Ne), 2),
                ('<', _) => (Tok::Op(CmpOp::Lt), 1),
                ('>', _) => (Tok::Op(CmpOp::Gt), 1),
                ('=', _) => (Tok::Op(CmpOp::Eq), 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                (',', _) => (Tok::Comma, 1),
                ('.', _) => (Tok::Dot, 1),
                (';', _) => (Tok::Semi, 1),
                ('{', _) => (Tok::LBrace, 1),
                ('}', _) => (Tok::RBrace, 1),
                ('[', _) => (Tok::LBracket, 1),
                (']', _) => (Tok::RBracket, 1),
                ('@', _) => (Tok::At, 1),
                ('-', _) => (Tok::Minus, 1),
                _ => {
                    return Err(RuleError::Syntax {
                        line: lineno + 1,
                        column,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            push(&mut out, tok);
            i += width;
        }
    }
    Ok(out)
}

fn parse_coverage(text: &str) -> Result<BTreeMap<String, f64>, RuleError> {
    let mut cov = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let Some(rest) = line.trim_start().strip_prefix("%cov:") else { continue };
        for entry in rest.split_whitespace() {
            let bad = || RuleError::Syntax {
                line: lineno + 1,
                column: 1,
                message: format!("malformed coverage entry `{entry}`"),
            };
            let (k, v) = entry.split_once('=').ok_or_else(bad)?;
            let v: f64 = v.parse().map_err(|_| bad())?;
            if !(0.0..=100.0).contains(&v) {
                return Err(bad());
            }
            cov.insert(k.to_string(), v);
        }
    }
    Ok(cov)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn error(&self, message: impl Into<String>) -> RuleError {
        let (line, column) =
            self.toks.get(self.pos).map(|s| (s.line, s.column)).unwrap_or(self.end);
        RuleError::Syntax { line, column, message: message.into() }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), RuleError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn term(&mut self) -> Result<Term, RuleError> {
        match self.peek().cloned() {
            Some(Tok::Var(v)) => {
                self.pos += 1;
                Ok(Term::Var(Symbol::new(&v)))
            }
            Some(Tok::Int(i)) => {
                self.pos += 1;
                Ok(Term::Const(Value::Int(i)))
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                match self.next() {
                    Some(Tok::Int(i)) => Ok(Term::Const(Value::Int(-i))),
                    _ => {
                        self.pos -= 1;
                        Err(self.error("expected integer after `-`"))
                    }
                }
            }
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(Term::Const(Value::Sym(Symbol::new(&s))))
            }
            _ => Err(self.error("expected term")),
        }
    }

    fn atom(&mut self) -> Result<Atom, RuleError> {
        let name = match self.next() {
            Some(Tok::Ident(s)) => s,
            _ => {
                self.pos -= 1;
                return Err(self.error("expected predicate name"));
            }
        };
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            loop {
                args.push(self.term()?);
                match self.next() {
                    Some(Tok::Comma) => continue,
                    Some(Tok::RParen) => break,
                    _ => {
                        self.pos -= 1;
                        return Err(self.error("expected `,` or `)`"));
                    }
                }
            }
        }
        Ok(Atom { pred: Symbol::new(&name), args })
    }

    fn literal(&mut self) -> Result<Literal, RuleError> {
        match self.peek() {
            Some(Tok::Not) => {
                self.pos += 1;
                Ok(Literal::Neg(self.atom()?))
            }
            Some(Tok::Ident(_)) if !matches!(self.peek_at(1), Some(Tok::Op(_))) => {
                Ok(Literal::Pos(self.atom()?))
            }
            _ => {
                let first = self.term()?;
                let mut terms = vec![first];
                let mut ops = Vec::new();
                while let Some(Tok::Op(op)) = self.peek().cloned() {
                    self.pos += 1;
                    ops.push(op);
                    terms.push(self.term()?);
                }
                if ops.is_empty() {
                    return Err(self.error("expected comparison operator"));
                }
                Ok(Literal::Cmp(Comparison { terms, ops }))
            }
        }
    }

    fn body(&mut self, stop: &[Tok]) -> Result<Vec<Literal>, RuleError> {
        let mut lits = vec![self.literal()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            lits.push(self.literal()?);
        }
        match self.peek() {
            Some(t) if stop.contains(t) => Ok(lits),
            _ => Err(self.error("expected `,` or end of body")),
        }
    }

    fn bound(&mut self) -> Result<Bound, RuleError> {
        match self.next() {
            Some(Tok::Int(i)) => Ok(Bound::Int(i)),
            Some(Tok::Var(v)) | Some(Tok::Ident(v)) => Ok(Bound::Named(Symbol::new(&v))),
            _ => {
                self.pos -= 1;
                Err(self.error("expected aggregate bound"))
            }
        }
    }

    fn statement(&mut self, rs: &mut RuleSet) -> Result<(), RuleError> {
        let is_aggregate = matches!(
            (self.peek(), self.peek_at(1)),
            (Some(Tok::Int(_)) | Some(Tok::Var(_)) | Some(Tok::Ident(_)), Some(Tok::LBrace))
        );
        if self.peek() == Some(&Tok::Weak) {
            self.pos += 1;
            let body = self.body(&[Tok::Dot])?;
            self.expect(Tok::Dot, "`.`")?;
            self.expect(Tok::LBracket, "`[`")?;
            let negated = if self.peek() == Some(&Tok::Minus)
                && matches!(self.peek_at(1), Some(Tok::Var(_)))
            {
                self.pos += 1;
                true
            } else {
                false
            };
            let term = self.term()?;
            self.expect(Tok::At, "`@`")?;
            let level = match self.term()? {
                Term::Const(Value::Int(l)) => l,
                _ => return Err(self.error("priority level must be an integer")),
            };
            let mut terms = Vec::new();
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                terms.push(self.term()?);
            }
            self.expect(Tok::RBracket, "`]`")?;
            rs.weak.push(WeakConstraint { body, weight: Weight { negated, term }, level, terms });
        } else if is_aggregate {
            let lower = self.bound()?;
            self.expect(Tok::LBrace, "`{`")?;
            let mut elements = Vec::new();
            loop {
                let head = self.atom()?;
                let condition = if self.peek() == Some(&Tok::Colon) {
                    self.pos += 1;
                    self.body(&[Tok::Semi, Tok::RBrace])?
                } else {
                    Vec::new()
                };
                elements.push(ChoiceElement { head, condition });
                match self.next() {
                    Some(Tok::Semi) => continue,
                    Some(Tok::RBrace) => break,
                    _ => {
                        self.pos -= 1;
                        return Err(self.error("expected `;` or `}`"));
                    }
                }
            }
            let upper = self.bound()?;
            self.expect(Tok::Dot, "`.`")?;
            if let (Bound::Int(l), Bound::Int(u)) = (&lower, &upper) {
                if *l < 0 || l > u {
                    return Err(self.error("aggregate bounds must satisfy 0 <= l <= u"));
                }
            }
            rs.aggregates.push(Aggregate { lower, upper, elements });
        } else {
            let head = self.atom()?;
            let body = if self.peek() == Some(&Tok::If) {
                self.pos += 1;
                self.body(&[Tok::Dot])?
            } else {
                Vec::new()
            };
            self.expect(Tok::Dot, "`.`")?;
            rs.rules.push(Rule { head, body });
        }
        Ok(())
    }
}

/// Parses rule text into a `RuleSet`, rejecting unsafe statements and
/// bodies longer than [`MAX_BODY_LEN`].
pub fn parse_rules(text: &str) -> Result<RuleSet, RuleError> {
    let toks = lex(text)?;
    let end = (text.lines().count().max(1), text.lines().last().map_or(1, |l| l.len() + 1));
    let mut p = Parser { toks, pos: 0, end };
    let mut rs = RuleSet { coverage: parse_coverage(text)?, ..RuleSet::default() };
    while p.peek().is_some() {
        p.statement(&mut rs)?;
    }
    check_safety(&rs)?;
    Ok(rs)
}

fn positive_vars(body: &[Literal]) -> BTreeSet<Symbol> {
    body.iter()
        .filter_map(|l| match l {
            Literal::Pos(a) => Some(a.vars().cloned().collect::<Vec<_>>()),
            _ => None,
        })
        .flatten()
        .collect()
}

fn check_body<'a>(
    statement: String,
    body: &[Literal],
    extra: impl IntoIterator<Item = &'a Symbol>,
) -> Result<(), RuleError> {
    if body.len() > MAX_BODY_LEN {
        return Err(RuleError::BodyTooLong { statement, len: body.len(), max: MAX_BODY_LEN });
    }
    let bound = positive_vars(body);
    let mut needed: Vec<&Symbol> = extra.into_iter().collect();
    for l in body {
        match l {
            Literal::Neg(a) => needed.extend(a.vars()),
            Literal::Cmp(c) => needed.extend(c.vars()),
            Literal::Pos(_) => {}
        }
    }
    for v in needed {
        if !bound.contains(v) {
            return Err(RuleError::Unsafe { variable: v.to_string(), statement });
        }
    }
    Ok(())
}

/// Every variable of a head, negated literal, comparison, weight or weak
/// constraint term must occur in a positive body atom.
pub fn check_safety(rs: &RuleSet) -> Result<(), RuleError> {
    for r in &rs.rules {
        check_body(r.to_string(), &r.body, r.head.vars())?;
    }
    for a in &rs.aggregates {
        for e in &a.elements {
            check_body(a.to_string(), &e.condition, e.head.vars())?;
        }
    }
    for w in &rs.weak {
        let extra = w.weight.term.as_var().into_iter().chain(w.terms.iter().filter_map(Term::as_var));
        check_body(w.to_string(), &w.body, extra)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = include_str!("../../fixtures/rules/rocksample_good.lp");

    #[test]
    fn parses_single_rule() {
        let rs = parse_rules("sample(R) :- guess(R,V), V>60.").unwrap();
        assert_eq!(rs.rules.len(), 1);
        assert_eq!(rs.rules[0].head.to_string(), "sample(R)");
        assert_eq!(rs.rules[0].body.len(), 2);
    }

    #[test]
    fn empty_text_is_empty_ruleset() {
        let rs = parse_rules("").unwrap();
        assert!(rs.is_empty());
        assert!(rs.coverage.is_empty());
    }

    #[test]
    fn good_fixture_statement_count() {
        let rs = parse_rules(GOOD).unwrap();
        assert_eq!(rs.rules.len(), 9);
        assert_eq!(rs.aggregates.len(), 1);
        assert_eq!(rs.aggregates[0].elements.len(), 2);
        assert_eq!(rs.weak.len(), 2);
        assert_eq!(rs.clause_count(), 13);
        assert_eq!(rs.coverage["exit"], 84.0);
        assert_eq!(rs.coverage["east"], 57.0);
    }

    #[test]
    fn pretty_print_round_trips() {
        let rs = parse_rules(GOOD).unwrap();
        let again = parse_rules(&rs.to_string()).unwrap();
        assert_eq!(rs, again);
    }

    #[test]
    fn chained_and_negative_comparisons() {
        let rs = parse_rules("south :- target(R), delta_y(R,D), D == -2.\nexit :- dist(R,D), 5 <= D <= 8.").unwrap();
        match &rs.rules[0].body[2] {
            Literal::Cmp(c) => assert_eq!(c.terms[1], Term::int(-2)),
            other => panic!("unexpected {other:?}"),
        }
        match &rs.rules[1].body[1] {
            Literal::Cmp(c) => assert_eq!(c.ops, vec![CmpOp::Le, CmpOp::Le]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn weak_constraint_with_negated_weight() {
        let rs = parse_rules(":~ target(R), guess(R,V). [-V@2, R, V]").unwrap();
        let w = &rs.weak[0];
        assert!(w.weight.negated);
        assert_eq!(w.level, 2);
        assert_eq!(w.terms.len(), 2);
        assert_eq!(w.to_string(), ":~ target(R), guess(R,V). [-V@2, R, V]");
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_rules("north :- guess(R,V)\n  V <= 3.") {
            Err(RuleError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unsafe_variable_is_named() {
        match parse_rules("check(R) :- guess(S,V), V <= 50.") {
            Err(RuleError::Unsafe { variable, .. }) => assert_eq!(variable, "R"),
            other => panic!("unexpected {other:?}"),
        }
        match parse_rules("north :- not sampled(R).") {
            Err(RuleError::Unsafe { variable, .. }) => assert_eq!(variable, "R"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn long_body_is_rejected() {
        let text = "a :- b(X), c(X), d(X), e(X), f(X), g(X), h(X), i(X), j(X).";
        assert!(matches!(parse_rules(text), Err(RuleError::BodyTooLong { .. })));
    }
}
