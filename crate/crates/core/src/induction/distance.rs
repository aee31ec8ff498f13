//! Jaccard distance between rule bodies compared as sets of literals.

use std::collections::BTreeSet;

use crate::logic::{Comparison, Literal, Rule, RuleSet};

/// Canonical text of every body literal. Comparison chains are split into
/// binary comparisons and constants are moved to the right.
pub fn literal_set<'a>(rules: impl IntoIterator<Item = &'a Rule>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for r in rules {
        for l in &r.body {
            match l {
                Literal::Cmp(c) => {
                    for (i, op) in c.ops.iter().enumerate() {
                        let b = Comparison::binary(c.terms[i].clone(), *op, c.terms[i + 1].clone());
                        out.insert(b.canonical().to_string());
                    }
                }
                other => {
                    out.insert(other.canonical().to_string());
                }
            }
        }
    }
    out
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    1.0 - a.intersection(b).count() as f64 / union as f64
}

pub fn rule_distance(a: &Rule, b: &Rule) -> f64 {
    jaccard(&literal_set([a]), &literal_set([b]))
}

/// Distance between two definitions of one predicate, taking the union of
/// the literals of all their rules.
pub fn definition_distance(a: &[Rule], b: &[Rule]) -> f64 {
    jaccard(&literal_set(a), &literal_set(b))
}

/// Mean definition distance over the head predicates of either set. Weak
/// constraints are not compared.
pub fn ruleset_distance(a: &RuleSet, b: &RuleSet) -> f64 {
    let mut heads = a.head_predicates();
    for h in b.head_predicates() {
        if !heads.contains(&h) {
            heads.push(h);
        }
    }
    if heads.is_empty() {
        return 0.0;
    }
    let total: f64 = heads.iter().map(|h| definition_distance(&a.definitions_of(h), &b.definitions_of(h))).sum();
    total / heads.len() as f64
}
