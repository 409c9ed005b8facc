//! DIMACS WCNF reading and writing.
//!
//! Output uses the classic header form `p wcnf <nvars> <nclauses> <top>` with
//! hard clauses weighted `top`. The reader also accepts the header-less form
//! where hard clauses start with `h`.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};

/// DIMACS literal: `v` or `-v` for variable `v >= 1`.
pub type Lit = i32;

#[derive(Clone, Debug, PartialEq)]
pub enum VarMeaning {
    /// `x_f <= tau_{f,index}` (`<` under right-open splits); `index` is 1-based.
    Threshold { feature: usize, index: usize, tau: f64 },
    /// Member `feature` (position `position` of one-hot group `group`) is hot.
    Category { feature: usize, group: usize, position: usize },
    /// Tree `tree` routes to leaf `leaf`.
    Leaf { tree: usize, leaf: usize },
    /// Pseudo-Boolean auxiliary.
    Aux,
}

impl fmt::Display for VarMeaning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarMeaning::Threshold { feature, index, tau } => write!(f, "t f={feature} m={index} tau={tau}"),
            VarMeaning::Category { feature, group, position } => {
                write!(f, "nu f={feature} group={group} j={position}")
            }
            VarMeaning::Leaf { tree, leaf } => write!(f, "z t={tree} l={leaf}"),
            VarMeaning::Aux => f.write_str("aux pb"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VarTable {
    meanings: Vec<VarMeaning>,
}

impl VarTable {
    pub fn fresh(&mut self, m: VarMeaning) -> Lit {
        self.meanings.push(m);
        self.meanings.len() as Lit
    }

    pub fn len(&self) -> usize {
        self.meanings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meanings.is_empty()
    }

    pub fn meaning(&self, var: Lit) -> &VarMeaning {
        &self.meanings[var.unsigned_abs() as usize - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Lit, &VarMeaning)> {
        self.meanings.iter().enumerate().map(|(i, m)| (i as Lit + 1, m))
    }
}

/// A weighted partial MaxSAT formula without variable semantics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Wcnf {
    pub n_vars: usize,
    pub hard: Vec<Vec<Lit>>,
    pub soft: Vec<(Vec<Lit>, u64)>,
    pub top: u64,
    pub comments: Vec<String>,
}

#[inline]
pub fn lit_value(assignment: &[bool], l: Lit) -> bool {
    let v = assignment[l.unsigned_abs() as usize - 1];
    if l > 0 {
        v
    } else {
        !v
    }
}

impl Wcnf {
    pub fn write_dimacs(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            let _ = writeln!(s, "c {c}");
        }
        let _ = writeln!(
            s,
            "p wcnf {} {} {}",
            self.n_vars,
            self.hard.len() + self.soft.len(),
            self.top
        );
        let mut clause = |w: u64, lits: &[Lit]| {
            let _ = write!(s, "{w}");
            for l in lits {
                let _ = write!(s, " {l}");
            }
            s.push_str(" 0\n");
        };
        for h in &self.hard {
            clause(self.top, h);
        }
        for (c, w) in &self.soft {
            clause(*w, c);
        }
        s
    }

    pub fn parse_dimacs(text: &str) -> Result<Wcnf> {
        let mut out = Wcnf::default();
        let mut header_top: Option<u64> = None;
        let mut declared: Option<(usize, usize)> = None;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('c') {
                out.comments.push(c.trim_start().to_string());
                continue;
            }
            let err = |m: &str| Error::Parse(format!("line {}: {m}", ln + 1));
            let mut tok = line.split_whitespace();
            if line.starts_with('p') {
                let parts: Vec<&str> = tok.collect();
                if parts.len() < 4 || parts[1] != "wcnf" {
                    return Err(err("expected `p wcnf <nvars> <nclauses> [top]`"));
                }
                let n: usize = parts[2].parse().map_err(|_| err("bad variable count"))?;
                let m: usize = parts[3].parse().map_err(|_| err("bad clause count"))?;
                declared = Some((n, m));
                out.n_vars = n;
                if let Some(t) = parts.get(4) {
                    header_top = Some(t.parse().map_err(|_| err("bad top weight"))?);
                }
                continue;
            }
            let first = tok.next().ok_or_else(|| err("empty clause line"))?;
            let weight = if first == "h" {
                None
            } else {
                Some(first.parse::<u64>().map_err(|_| err("bad weight"))?)
            };
            let mut lits = Vec::new();
            let mut closed = false;
            for t in tok {
                let l: Lit = t.parse().map_err(|_| err("bad literal"))?;
                if l == 0 {
                    closed = true;
                    break;
                }
                out.n_vars = out.n_vars.max(l.unsigned_abs() as usize);
                lits.push(l);
            }
            if !closed {
                return Err(err("clause not terminated by 0"));
            }
            match (weight, header_top) {
                (None, _) => out.hard.push(lits),
                (Some(w), Some(top)) if w >= top => out.hard.push(lits),
                (Some(w), _) => out.soft.push((lits, w)),
            }
        }
        if let Some((n, m)) = declared {
            if out.n_vars > n {
                return Err(Error::Parse(format!("literal beyond declared {n} variables")));
            }
            if out.hard.len() + out.soft.len() != m {
                return Err(Error::Parse(format!(
                    "header declares {m} clauses, found {}",
                    out.hard.len() + out.soft.len()
                )));
            }
        }
        let soft_sum: u64 = out.soft.iter().map(|s| s.1).sum();
        out.top = header_top.unwrap_or(soft_sum + 1);
        Ok(out)
    }

    /// Index of the first violated hard clause.
    pub fn first_violated_hard(&self, assignment: &[bool]) -> Option<usize> {
        self.hard
            .iter()
            .position(|c| !c.iter().any(|&l| lit_value(assignment, l)))
    }

    /// Sum of weights of violated soft clauses.
    pub fn cost(&self, assignment: &[bool]) -> u64 {
        self.soft
            .iter()
            .filter(|(c, _)| !c.iter().any(|&l| lit_value(assignment, l)))
            .map(|s| s.1)
            .sum()
    }
}

/// Reads a solver valuation from `v` lines: either literal lists
/// (`v 1 -2 3 ... 0`) or a single 0/1 string (`v 0101...`). Unmentioned
/// variables are false.
pub fn parse_assignment(text: &str, n_vars: usize) -> Result<Vec<bool>> {
    let mut a = vec![false; n_vars];
    let mut saw = false;
    for line in text.lines() {
        let Some(rest) = line.trim().strip_prefix('v') else {
            continue;
        };
        saw = true;
        let toks: Vec<&str> = rest.split_whitespace().collect();
        if toks.len() == 1 && toks[0].len() > 1 && toks[0].bytes().all(|b| b == b'0' || b == b'1') {
            for (i, b) in toks[0].bytes().enumerate().take(n_vars) {
                a[i] = b == b'1';
            }
            continue;
        }
        for t in toks {
            let l: i64 = t.parse().map_err(|_| Error::Parse(format!("bad literal `{t}` in v line")))?;
            if l == 0 {
                continue;
            }
            let v = l.unsigned_abs() as usize;
            if v > n_vars {
                return Err(Error::Parse(format!("variable {v} beyond {n_vars}")));
            }
            a[v - 1] = l > 0;
        }
    }
    if !saw {
        return Err(Error::Parse("no `v` line in solver output".into()));
    }
    Ok(a)
}
