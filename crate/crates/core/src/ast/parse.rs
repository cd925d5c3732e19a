//! Prolog-style concrete syntax.
//!
//! ```text
//! fib(A, B) :- A>=0, A=<1, B=A.
//! false :- A>5, fib(A,B), B<A.      % comments run to end of line
//! ```
//!
//! Predicate names of the form `p_e3` / `p_le3` denote the annotated
//! predicates `p(3)` / `p[3]`.

use super::{Annotation, Atom, Clause, ClauseId, Constraint, Head, LinExpr, PredId, Program, Rat, Var, FALSE_BASE};
use crate::Error;
use num_bigint::BigInt;
use num_traits::Zero;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(BigInt),
    LParen,
    RParen,
    Comma,
    Dot,
    Neck,
    Plus,
    Minus,
    Star,
    Eq,
    Le,
    Ge,
    Lt,
    Gt,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, Error> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut push = |tok: Tok, n: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned { tok, line: l0, col: c0 });
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            '+' => push(Tok::Plus, 1, &mut i, &mut col),
            '-' => push(Tok::Minus, 1, &mut i, &mut col),
            '*' => push(Tok::Star, 1, &mut i, &mut col),
            ':' if chars.get(i + 1) == Some(&'-') => push(Tok::Neck, 2, &mut i, &mut col),
            '=' if chars.get(i + 1) == Some(&'<') => push(Tok::Le, 2, &mut i, &mut col),
            '=' if matches!(chars.get(i + 1), Some('=') | Some(':') | Some('\\')) => return Err(unknown_op(&chars, i, l0, c0)),
            '=' => push(Tok::Eq, 1, &mut i, &mut col),
            '>' if chars.get(i + 1) == Some(&'=') => push(Tok::Ge, 2, &mut i, &mut col),
            '>' => push(Tok::Gt, 1, &mut i, &mut col),
            '<' if matches!(chars.get(i + 1), Some('=') | Some('>')) => return Err(unknown_op(&chars, i, l0, c0)),
            '<' => push(Tok::Lt, 1, &mut i, &mut col),
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                out.push(Spanned { tok: Tok::Int(s.parse().expect("digits")), line: l0, col: c0 });
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                let tok = if c.is_uppercase() || c == '_' { Tok::Var(s) } else { Tok::Ident(s) };
                out.push(Spanned { tok, line: l0, col: c0 });
            }
            _ => return Err(unknown_op(&chars, i, l0, c0)),
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

fn unknown_op(chars: &[char], i: usize, line: usize, col: usize) -> Error {
    let op: String =
        chars[i..].iter().take_while(|c| !c.is_alphanumeric() && !c.is_whitespace() && !matches!(c, '(' | ')' | ',' | '_')).collect();
    Error::UnknownOperator { line, col, op }
}

/// Splits `p_e3` / `p_le3` into base name and annotation.
pub fn parse_pred_name(name: &str) -> PredId {
    for (marker, make) in [("_le", Annotation::AtMost as fn(u32) -> Annotation), ("_e", Annotation::Exactly)] {
        if let Some(pos) = name.rfind(marker) {
            let digits = &name[pos + marker.len()..];
            if pos > 0 && !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
                if let Ok(d) = digits.parse::<u32>() {
                    return PredId::annotated(&name[..pos], make(d));
                }
            }
        }
    }
    PredId::new(name)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    anon: usize,
}

enum Literal {
    Atom(Atom),
    Constraint(Constraint),
    True,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, Error> {
        let t = &self.toks[self.pos];
        Err(Error::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), Error> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn program(&mut self) -> Result<Program, Error> {
        let mut clauses = Vec::new();
        while *self.peek() != Tok::Eof {
            let id = ClauseId::new(&format!("c{}", clauses.len() + 1));
            clauses.push(self.clause(id)?);
        }
        Ok(Program::new(clauses))
    }

    fn clause(&mut self, id: ClauseId) -> Result<Clause, Error> {
        let head = match self.peek().clone() {
            Tok::Ident(name) if name == FALSE_BASE => {
                self.next();
                Head::False
            }
            Tok::Ident(_) => Head::Atom(self.atom()?),
            other => return self.error(format!("expected clause head, found {}", describe(&other))),
        };
        let mut constraints = Vec::new();
        let mut body = Vec::new();
        if *self.peek() == Tok::Neck {
            self.next();
            loop {
                match self.literal()? {
                    Literal::Atom(a) => body.push(a),
                    Literal::Constraint(c) => constraints.push(c),
                    Literal::True => {}
                }
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Dot, "'.' at end of clause")?;
        Ok(Clause::new(id, head, constraints, body))
    }

    fn literal(&mut self) -> Result<Literal, Error> {
        match self.peek().clone() {
            Tok::Ident(name) if name == "true" => {
                self.next();
                Ok(Literal::True)
            }
            Tok::Ident(name) if name == FALSE_BASE => self.error("'false' may only appear as a clause head"),
            Tok::Ident(_) => Ok(Literal::Atom(self.atom()?)),
            _ => Ok(Literal::Constraint(self.constraint()?)),
        }
    }

    fn atom(&mut self) -> Result<Atom, Error> {
        let name = match self.next().tok {
            Tok::Ident(n) => n,
            _ => unreachable!("atom() called on non-identifier"),
        };
        let pred = parse_pred_name(&name);
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.next();
            if *self.peek() != Tok::RParen {
                loop {
                    args.push(self.expr()?);
                    if *self.peek() == Tok::Comma {
                        self.next();
                    } else {
                        break;
                    }
                }
            }
            self.expect(Tok::RParen, "')'")?;
        }
        Ok(Atom::new(pred, args))
    }

    fn constraint(&mut self) -> Result<Constraint, Error> {
        let lhs = self.expr()?;
        let op = self.peek().clone();
        let mk: fn(LinExpr, LinExpr) -> Constraint = match op {
            Tok::Eq => Constraint::eq,
            Tok::Ge => Constraint::ge,
            Tok::Gt => Constraint::gt,
            Tok::Le => |l, r| Constraint::ge(r, l),
            Tok::Lt => |l, r| Constraint::gt(r, l),
            other => return self.error(format!("expected comparison operator, found {}", describe(&other))),
        };
        self.next();
        let rhs = self.expr()?;
        Ok(mk(lhs, rhs))
    }

    fn expr(&mut self) -> Result<LinExpr, Error> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    acc = acc.add(&self.product()?);
                }
                Tok::Minus => {
                    self.next();
                    acc = acc.sub(&self.product()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<LinExpr, Error> {
        let mut acc = self.factor()?;
        while *self.peek() == Tok::Star {
            let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
            self.next();
            let rhs = self.factor()?;
            acc = if acc.is_constant() {
                rhs.scale(acc.constant_term())
            } else if rhs.is_constant() {
                acc.scale(rhs.constant_term())
            } else {
                return Err(Error::NonLinearTerm { line, col });
            };
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<LinExpr, Error> {
        match self.next().tok {
            Tok::Int(n) => Ok(LinExpr::constant(Rat::from_integer(n))),
            Tok::Var(name) if name == "_" => {
                self.anon += 1;
                Ok(LinExpr::var(Var::named(&format!("_#{}", self.anon))))
            }
            Tok::Var(name) => Ok(LinExpr::var(Var::named(&name))),
            Tok::Minus => Ok(self.factor()?.neg()),
            Tok::Plus => self.factor(),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            other => {
                self.pos = self.pos.saturating_sub(1);
                self.error(format!("expected a term, found {}", describe(&other)))
            }
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) | Tok::Var(s) => format!("'{s}'"),
        Tok::Int(n) => format!("'{n}'"),
        Tok::Eof => "end of input".to_string(),
        other => format!("{other:?}"),
    }
}

/// Parses program text. The result is not normalised; clause ids are
/// `c1, c2, ...` in textual order.
pub fn parse_program(text: &str) -> Result<Program, Error> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, anon: 0 };
    let prog = p.program()?;
    // zero-coefficient products like 0*X vanish, everything else is already linear
    debug_assert!(prog.clauses.iter().all(|c| c.constraints.iter().all(|k| !k.expr.coeffs().values().any(Zero::is_zero))));
    Ok(prog)
}
