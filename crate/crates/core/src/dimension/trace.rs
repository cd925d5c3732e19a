//! Trace trees and their dimension.

use crate::ast::ClauseId;
use crate::{Error, Result};
use std::collections::BTreeSet;
use std::fmt;

/// A derivation tree labelled with clause identifiers. Children follow the
/// order of the clause's body atoms.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceTree {
    pub root: ClauseId,
    pub children: Vec<TraceTree>,
}

impl TraceTree {
    pub fn new(root: ClauseId, children: Vec<TraceTree>) -> Self {
        TraceTree { root, children }
    }

    pub fn leaf(root: ClauseId) -> Self {
        TraceTree { root, children: Vec::new() }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TraceTree::size).sum::<usize>()
    }

    /// Height; a single node has height 1.
    pub fn height(&self) -> usize {
        1 + self.children.iter().map(TraceTree::height).max().unwrap_or(0)
    }

    pub fn clause_ids(&self) -> BTreeSet<ClauseId> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| {
            out.insert(t.root.clone());
        });
        out
    }

    pub fn visit(&self, f: &mut impl FnMut(&TraceTree)) {
        f(self);
        for c in &self.children {
            c.visit(f);
        }
    }

    /// Parses the functional notation `c3(c2(c1,c1),c1)`.
    pub fn parse(text: &str) -> Result<TraceTree> {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let t = parse_node(&chars, &mut pos)?;
        if pos != chars.len() {
            return Err(bad_term(&chars, pos));
        }
        Ok(t)
    }
}

fn bad_term(chars: &[char], pos: usize) -> Error {
    Error::Syntax { line: 1, col: pos + 1, msg: format!("malformed trace term '{}'", chars.iter().collect::<String>()) }
}

fn parse_node(chars: &[char], pos: &mut usize) -> Result<TraceTree> {
    let start = *pos;
    while *pos < chars.len() && !matches!(chars[*pos], '(' | ')' | ',') {
        *pos += 1;
    }
    if *pos == start {
        return Err(bad_term(chars, *pos));
    }
    let id: String = chars[start..*pos].iter().collect();
    let mut children = Vec::new();
    if chars.get(*pos) == Some(&'(') {
        *pos += 1;
        loop {
            children.push(parse_node(chars, pos)?);
            match chars.get(*pos) {
                Some(',') => *pos += 1,
                Some(')') => {
                    *pos += 1;
                    break;
                }
                _ => return Err(bad_term(chars, *pos)),
            }
        }
    }
    Ok(TraceTree::new(ClauseId::new(&id), children))
}

impl fmt::Display for TraceTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)?;
        if !self.children.is_empty() {
            write!(f, "(")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for TraceTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Tree dimension: 0 for a leaf; otherwise the largest child dimension if
/// exactly one child attains it, and one more than that if several do.
pub fn tree_dimension(t: &TraceTree) -> u32 {
    let dims: Vec<u32> = t.children.iter().map(tree_dimension).collect();
    let Some(&max) = dims.iter().max() else { return 0 };
    if dims.iter().filter(|&&d| d == max).count() > 1 {
        max + 1
    } else {
        max
    }
}
