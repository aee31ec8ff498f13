//! Ground atoms and feature sets.
//!
//! The text form `pred(arg1,arg2,...)` is shared by traces, rule files and
//! ILASP exports.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock};

use smallvec::SmallVec;

/// Interned name: predicates and symbolic constants.
#[derive(Clone)]
pub struct Symbol(Arc<str>);

fn interner() -> &'static Mutex<HashSet<Arc<str>>> {
    static TABLE: OnceLock<Mutex<HashSet<Arc<str>>>> = OnceLock::new();
    TABLE.get_or_init(|| Mutex::new(HashSet::new()))
}

impl Symbol {
    pub fn new(name: &str) -> Self {
        let mut table = interner().lock().expect("symbol table poisoned");
        if let Some(existing) = table.get(name) {
            return Symbol(existing.clone());
        }
        let arc: Arc<str> = Arc::from(name);
        table.insert(arc.clone());
        Symbol(arc)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl Eq for Symbol {}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash(state)
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.0.cmp(&other.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

/// Ground term. Integers order before symbols.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Sym(Symbol),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Sym(_) => None,
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => write!(f, "{s}"),
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Sym(Symbol::new(s))
    }
}

pub type Args = SmallVec<[Value; 3]>;

/// A variable-free atom. Ordering is predicate first, then arguments, which
/// is the lexicographic ground-term order used for every tie-break.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub pred: Symbol,
    pub args: Args,
}

impl GroundAtom {
    pub fn new(pred: Symbol, args: impl IntoIterator<Item = Value>) -> Self {
        GroundAtom { pred, args: args.into_iter().collect() }
    }

    pub fn constant(pred: &str) -> Self {
        GroundAtom { pred: Symbol::new(pred), args: Args::new() }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// Parses `pred` or `pred(a,b,...)` with integer or lowercase symbol
    /// arguments.
    pub fn parse(text: &str) -> Result<Self, AtomParseError> {
        let text = text.trim();
        let err = || AtomParseError(text.to_string());
        let (name, rest) = match text.find('(') {
            Some(i) => (&text[..i], Some(&text[i + 1..])),
            None => (text, None),
        };
        if !is_symbol(name) {
            return Err(err());
        }
        let mut args = Args::new();
        if let Some(rest) = rest {
            let inner = rest.strip_suffix(')').ok_or_else(err)?;
            for piece in inner.split(',') {
                let piece = piece.trim();
                if let Ok(i) = piece.parse::<i64>() {
                    args.push(Value::Int(i));
                } else if is_symbol(piece) {
                    args.push(Value::Sym(Symbol::new(piece)));
                } else {
                    return Err(err());
                }
            }
        }
        Ok(GroundAtom { pred: Symbol::new(name), args })
    }
}

fn is_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed ground atom `{0}`")]
pub struct AtomParseError(pub String);

impl fmt::Debug for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for GroundAtom {
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

/// Sorted, duplicate-free set of ground atoms.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct FeatureSet {
    atoms: Vec<GroundAtom>,
}

impl FeatureSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = GroundAtom>) -> Self {
        let mut atoms: Vec<GroundAtom> = atoms.into_iter().collect();
        atoms.sort();
        atoms.dedup();
        FeatureSet { atoms }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GroundAtom> {
        self.atoms.iter()
    }

    pub fn as_slice(&self) -> &[GroundAtom] {
        &self.atoms
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.binary_search(atom).is_ok()
    }

    pub fn insert(&mut self, atom: GroundAtom) -> bool {
        match self.atoms.binary_search(&atom) {
            Ok(_) => false,
            Err(i) => {
                self.atoms.insert(i, atom);
                true
            }
        }
    }

    pub fn remove_pred(&mut self, pred: &Symbol) {
        self.atoms.retain(|a| &a.pred != pred);
    }

    /// All atoms of one predicate, in sorted order.
    pub fn with_pred(&self, pred: &Symbol) -> &[GroundAtom] {
        let lo = self.atoms.partition_point(|a| a.pred < *pred);
        let hi = lo + self.atoms[lo..].partition_point(|a| a.pred == *pred);
        &self.atoms[lo..hi]
    }

    pub fn extend(&mut self, atoms: impl IntoIterator<Item = GroundAtom>) {
        self.atoms.extend(atoms);
        self.atoms.sort();
        self.atoms.dedup();
    }

    /// Parses the `{a,b(1,2),...}` form produced by `Display`.
    pub fn parse(text: &str) -> Result<Self, AtomParseError> {
        let t = text.trim();
        let inner = t
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| AtomParseError(t.to_string()))?;
        let mut atoms = Vec::new();
        let mut depth = 0usize;
        let mut start = 0usize;
        for (i, c) in inner.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                ',' if depth == 0 => {
                    atoms.push(GroundAtom::parse(&inner[start..i])?);
                    start = i + 1;
                }
                _ => {}
            }
        }
        if !inner[start..].trim().is_empty() {
            atoms.push(GroundAtom::parse(&inner[start..])?);
        }
        Ok(FeatureSet::from_atoms(atoms))
    }
}

impl<'a> IntoIterator for &'a FeatureSet {
    type Item = &'a GroundAtom;
    type IntoIter = std::slice::Iter<'a, GroundAtom>;
    fn into_iter(self) -> Self::IntoIter {
        self.atoms.iter()
    }
}

impl FromIterator<GroundAtom> for FeatureSet {
    fn from_iter<T: IntoIterator<Item = GroundAtom>>(iter: T) -> Self {
        FeatureSet::from_atoms(iter)
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

/// Shorthand for building atoms in code and tests: `atom("dist", [1, 2])`.
pub fn atom<V: Into<Value>>(pred: &str, args: impl IntoIterator<Item = V>) -> GroundAtom {
    GroundAtom::new(Symbol::new(pred), args.into_iter().map(Into::into))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_text_round_trip() {
        for text in ["north", "guess(1,50)", "ghost(north,3,100)", "delta_x(2,-1)"] {
            let a = GroundAtom::parse(text).unwrap();
            assert_eq!(a.to_string(), text);
        }
        assert!(GroundAtom::parse("Guess(1)").is_err());
        assert!(GroundAtom::parse("guess(1").is_err());
    }

    #[test]
    fn feature_set_is_sorted_and_deduplicated() {
        let fs = FeatureSet::from_atoms([
            atom("guess", [2, 50]),
            atom("dist", [1, 1]),
            atom("guess", [1, 50]),
            atom("dist", [1, 1]),
        ]);
        assert_eq!(fs.to_string(), "{dist(1,1),guess(1,50),guess(2,50)}");
        assert_eq!(fs.with_pred(&Symbol::new("guess")).len(), 2);
        assert!(fs.with_pred(&Symbol::new("wall")).is_empty());
        assert_eq!(FeatureSet::parse(&fs.to_string()).unwrap(), fs);
        assert_eq!(FeatureSet::parse("{}").unwrap(), FeatureSet::new());
    }

    #[test]
    fn integers_order_before_symbols() {
        assert!(Value::Int(100) < Value::from("a"));
        assert!(atom("check", [1]) < atom("check", [2]));
    }
}
