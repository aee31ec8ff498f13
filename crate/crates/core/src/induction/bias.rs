//! Mode bias: which heads, body atoms and integer thresholds a learned
//! rule may use.

use std::collections::BTreeMap;
use std::fmt::Write;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArgType {
    /// The single object variable shared by the head and body (rock, direction).
    Object(String),
    /// An integer compared against constants from the named grid.
    Int(String),
}

impl ArgType {
    pub fn name(&self) -> &str {
        match self {
            ArgType::Object(n) | ArgType::Int(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeDecl {
    pub pred: String,
    pub args: Vec<ArgType>,
}

impl ModeDecl {
    pub fn new(pred: &str, args: Vec<ArgType>) -> Self {
        ModeDecl { pred: pred.to_string(), args }
    }

    pub fn has_object(&self) -> bool {
        self.args.iter().any(|a| matches!(a, ArgType::Object(_)))
    }

    pub fn int_args(&self) -> usize {
        self.args.iter().filter(|a| matches!(a, ArgType::Int(_))).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeBias {
    pub head: ModeDecl,
    pub body: Vec<ModeDecl>,
    /// Threshold constants per integer type.
    pub grids: BTreeMap<String, Vec<i64>>,
    pub max_atoms: usize,
    pub max_int_atoms: usize,
    pub max_body_len: usize,
    pub max_weak_body_len: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("bias line {line}: {message}")]
pub struct BiasError {
    pub line: usize,
    pub message: String,
}

fn obj(t: &str) -> ArgType {
    ArgType::Object(t.to_string())
}

fn int(t: &str) -> ArgType {
    ArgType::Int(t.to_string())
}

impl ModeBias {
    fn with_defaults(head: ModeDecl, body: Vec<ModeDecl>, grids: BTreeMap<String, Vec<i64>>) -> Self {
        ModeBias { head, body, grids, max_atoms: 4, max_int_atoms: 2, max_body_len: 8, max_weak_body_len: 6 }
    }

    /// Rocksample features with `target` available; `head` takes the rock
    /// variable unless it is a move or `exit`.
    pub fn rocksample(head: &str) -> Self {
        let head_args = match head {
            "north" | "south" | "east" | "west" | "exit" => vec![],
            _ => vec![obj("rock")],
        };
        let body = vec![
            ModeDecl::new("target", vec![obj("rock")]),
            ModeDecl::new("sampled", vec![obj("rock")]),
            ModeDecl::new("guess", vec![obj("rock"), int("perc")]),
            ModeDecl::new("dist", vec![obj("rock"), int("steps")]),
            ModeDecl::new("delta_x", vec![obj("rock"), int("steps")]),
            ModeDecl::new("delta_y", vec![obj("rock"), int("steps")]),
            ModeDecl::new("num_sampled", vec![int("perc")]),
        ];
        let grids = BTreeMap::from([
            ("perc".to_string(), (0..=10).map(|i| i * 10).collect()),
            ("steps".to_string(), (-8..=8).collect()),
        ]);
        Self::with_defaults(ModeDecl::new(head, head_args), body, grids)
    }

    pub fn pocman() -> Self {
        let body = vec![
            ModeDecl::new("wall", vec![obj("dir")]),
            ModeDecl::new("ghost", vec![obj("dir"), int("steps"), int("perc")]),
            ModeDecl::new("food", vec![obj("dir"), int("steps"), int("perc")]),
        ];
        let grids = BTreeMap::from([
            ("perc".to_string(), (0..=10).map(|i| i * 10).collect()),
            ("steps".to_string(), (1..=8).collect()),
        ]);
        Self::with_defaults(ModeDecl::new("move", vec![obj("dir")]), body, grids)
    }

    /// The integer grid of `ty`; empty when undeclared.
    pub fn grid(&self, ty: &str) -> &[i64] {
        self.grids.get(ty).map_or(&[], Vec::as_slice)
    }

    /// Checks grids and limits; returns a description of the first problem.
    pub fn validate(&self) -> Result<(), String> {
        for d in self.body.iter().chain([&self.head]) {
            for a in &d.args {
                if let ArgType::Int(t) = a {
                    if self.grid(t).is_empty() {
                        return Err(format!("integer type `{t}` of {} has no constants", d.pred));
                    }
                }
            }
            if d.args.iter().filter(|a| matches!(a, ArgType::Object(_))).count() > 1 {
                return Err(format!("{} has more than one object argument", d.pred));
            }
        }
        if self.head.int_args() > 0 {
            return Err("head may not take integer arguments".into());
        }
        Ok(())
    }

    /// Mode declarations in ILASP syntax.
    pub fn to_ilasp(&self) -> String {
        let mut out = String::new();
        let decl = |d: &ModeDecl| {
            if d.args.is_empty() {
                return d.pred.clone();
            }
            let args: Vec<String> = d.args.iter().map(|a| format!("var({})", a.name())).collect();
            format!("{}({})", d.pred, args.join(","))
        };
        writeln!(out, "#modeh({}).", decl(&self.head)).unwrap();
        for d in &self.body {
            writeln!(out, "#modeb({}).", decl(d)).unwrap();
        }
        for (ty, values) in &self.grids {
            writeln!(out, "#modeb(var({ty}) <= const({ty})).").unwrap();
            writeln!(out, "#modeb(var({ty}) >= const({ty})).").unwrap();
            for v in values {
                writeln!(out, "#constant({ty},{v}).").unwrap();
            }
        }
        writeln!(out, "#maxv({}).", 1 + self.max_int_atoms * 2).unwrap();
        writeln!(out, "#max_atoms({}).", self.max_atoms).unwrap();
        writeln!(out, "#max_int_atoms({}).", self.max_int_atoms).unwrap();
        writeln!(out, "#max_body({}).", self.max_body_len).unwrap();
        writeln!(out, "#max_weak_body({}).", self.max_weak_body_len).unwrap();
        out
    }

    /// Reads the format written by [`ModeBias::to_ilasp`]. Lines it does
    /// not know (comments, comparison modes, `#maxv`) are skipped.
    pub fn parse(text: &str) -> Result<Self, BiasError> {
        let mut head = None;
        let mut body = Vec::new();
        let mut grids: BTreeMap<String, Vec<i64>> = BTreeMap::new();
        let mut limits = [4usize, 2, 8, 6];
        let keys = ["#max_atoms(", "#max_int_atoms(", "#max_body(", "#max_weak_body("];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |m: &str| BiasError { line: i + 1, message: format!("{m}: `{line}`") };
            let inner = |prefix: &str| line.strip_prefix(prefix).and_then(|r| r.strip_suffix(")."));
            if let Some(d) = inner("#modeh(") {
                head = Some(parse_decl(d).ok_or_else(|| err("bad head declaration"))?);
            } else if let Some(d) = inner("#modeb(") {
                if d.starts_with("var(") {
                    continue;
                }
                body.push(parse_decl(d).ok_or_else(|| err("bad body declaration"))?);
            } else if let Some(c) = inner("#constant(") {
                let (ty, v) = c.split_once(',').ok_or_else(|| err("bad constant"))?;
                let v: i64 = v.trim().parse().map_err(|_| err("bad constant value"))?;
                grids.entry(ty.trim().to_string()).or_default().push(v);
            } else if let Some(k) = keys.iter().position(|k| line.starts_with(k)) {
                let v = inner(keys[k]).and_then(|v| v.trim().parse().ok()).ok_or_else(|| err("bad limit"))?;
                limits[k] = v;
            }
        }
        let head = head.ok_or(BiasError { line: 0, message: "missing #modeh".into() })?;
        // Object types are the ones without constants.
        let retype = |d: ModeDecl| ModeDecl {
            args: d
                .args
                .into_iter()
                .map(|a| if grids.contains_key(a.name()) { int(a.name()) } else { obj(a.name()) })
                .collect(),
            ..d
        };
        let bias = ModeBias {
            head: retype(head),
            body: body.into_iter().map(retype).collect(),
            grids: grids.clone(),
            max_atoms: limits[0],
            max_int_atoms: limits[1],
            max_body_len: limits[2],
            max_weak_body_len: limits[3],
        };
        bias.validate().map_err(|m| BiasError { line: 0, message: m })?;
        Ok(bias)
    }
}

fn parse_decl(text: &str) -> Option<ModeDecl> {
    let (pred, rest) = match text.split_once('(') {
        Some((p, r)) => (p, Some(r.strip_suffix(')')?)),
        None => (text, None),
    };
    let mut args = Vec::new();
    if let Some(rest) = rest {
        for a in rest.split("),") {
            let name = a.trim().strip_prefix("var(")?.trim_end_matches(')');
            args.push(obj(name));
        }
    }
    Some(ModeDecl::new(pred.trim(), args))
}
