//! Problem representation and the line-oriented model file format.
//!
//! ```text
//! # comment
//! var NAME (continuous|integer|binary) [LB, UB] obj COEF
//! con NAME: [LHS <=] EXPR (<=|>=|==) RHS
//! vlb YVAR >= COEF * XVAR + CONST
//! vub YVAR <= COEF * XVAR + CONST
//! minimize | maximize
//! ```
//!
//! Expressions are infix over `+ - * / ^` with `exp log sin cos abs sqrt
//! entropy signpower`, numbers, and `inf`; `^` is right-associative.

use crate::expr::{ExprGraph, NodeId, Op, Var, VarType};
use crate::INF;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub root: NodeId,
}

/// A variable-bound relation y ≥ a·x + d (lower) or y ≤ a·x + d (upper).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarBound {
    pub yvar: usize,
    pub xvar: usize,
    pub coef: f64,
    pub constant: f64,
    pub upper: bool,
}

#[derive(Debug, Default)]
pub struct Problem {
    pub graph: ExprGraph,
    pub vars: Vec<Var>,
    pub constraints: Vec<Constraint>,
    pub vbounds: Vec<VarBound>,
    pub sense: ObjSense,
}

impl Default for ObjSense {
    fn default() -> Self {
        ObjSense::Minimize
    }
}

#[derive(Debug, Error)]
#[error("line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl Problem {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn bounds(&self) -> Vec<crate::Interval> {
        self.vars.iter().map(|v| v.bounds()).collect()
    }
}

// ----------------------------------------------------------------------
// lexer
// ----------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Le,
    Ge,
    EqEq,
    Colon,
    LBracket,
    RBracket,
}

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Lexer {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
            line,
        }
    }

    fn col(&self) -> usize {
        if self.pos < self.chars.len() {
            self.chars[self.pos].0 + 1
        } else {
            self.src.len() + 1
        }
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col(),
            msg: msg.into(),
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn next_tok(&mut self) -> Result<Option<(Tok, usize)>, ParseError> {
        while matches!(self.peek_char(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
        let col = self.col();
        let c = match self.peek_char() {
            None => return Ok(None),
            Some('#') => return Ok(None),
            Some(c) => c,
        };
        let simple = |t: Tok| Ok(Some((t, col)));
        match c {
            '+' => {
                self.pos += 1;
                simple(Tok::Plus)
            }
            '-' => {
                self.pos += 1;
                simple(Tok::Minus)
            }
            '*' => {
                self.pos += 1;
                simple(Tok::Star)
            }
            '/' => {
                self.pos += 1;
                simple(Tok::Slash)
            }
            '^' => {
                self.pos += 1;
                simple(Tok::Caret)
            }
            '(' => {
                self.pos += 1;
                simple(Tok::LParen)
            }
            ')' => {
                self.pos += 1;
                simple(Tok::RParen)
            }
            ',' => {
                self.pos += 1;
                simple(Tok::Comma)
            }
            ':' => {
                self.pos += 1;
                simple(Tok::Colon)
            }
            '[' => {
                self.pos += 1;
                simple(Tok::LBracket)
            }
            ']' => {
                self.pos += 1;
                simple(Tok::RBracket)
            }
            '<' => {
                self.pos += 1;
                if self.peek_char() == Some('=') {
                    self.pos += 1;
                    simple(Tok::Le)
                } else {
                    Err(self.error("expected `<=`"))
                }
            }
            '>' => {
                self.pos += 1;
                if self.peek_char() == Some('=') {
                    self.pos += 1;
                    simple(Tok::Ge)
                } else {
                    Err(self.error("expected `>=`"))
                }
            }
            '=' => {
                self.pos += 1;
                if self.peek_char() == Some('=') {
                    self.pos += 1;
                    simple(Tok::EqEq)
                } else {
                    Err(self.error("expected `==`"))
                }
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while matches!(self.peek_char(), Some(c) if c.is_ascii_digit() || c == '.') {
                    self.pos += 1;
                }
                if matches!(self.peek_char(), Some('e') | Some('E')) {
                    let save = self.pos;
                    self.pos += 1;
                    if matches!(self.peek_char(), Some('+') | Some('-')) {
                        self.pos += 1;
                    }
                    if matches!(self.peek_char(), Some(c) if c.is_ascii_digit()) {
                        while matches!(self.peek_char(), Some(c) if c.is_ascii_digit()) {
                            self.pos += 1;
                        }
                    } else {
                        self.pos = save;
                    }
                }
                let text: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| self.error(format!("bad number `{}`", text)))?;
                Ok(Some((Tok::Num(v), col)))
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = self.pos;
                while matches!(self.peek_char(), Some(c) if c.is_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                let text: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
                Ok(Some((Tok::Ident(text), col)))
            }
            c => Err(self.error(format!("unexpected character `{}`", c))),
        }
    }
}

fn tokenize(src: &str, line: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut lx = Lexer::new(src, line);
    let mut out = Vec::new();
    while let Some(t) = lx.next_tok()? {
        out.push(t);
    }
    Ok(out)
}

// ----------------------------------------------------------------------
// expression parser (precedence climbing, ^ right-associative)
// ----------------------------------------------------------------------

struct ExprParser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    line: usize,
    end_col: usize,
    problem: &'a mut Problem,
}

impl<'a> ExprParser<'a> {
    fn error_at(&self, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            col,
            msg: msg.into(),
        }
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let col = self
            .toks
            .get(self.pos)
            .map(|&(_, c)| c)
            .unwrap_or(self.end_col);
        self.error_at(col, msg)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn advance(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        match self.advance() {
            Some(got) if got == t => Ok(()),
            got => Err(self.error_at(
                self.toks
                    .get(self.pos.saturating_sub(1))
                    .map(|&(_, c)| c)
                    .unwrap_or(self.end_col),
                format!("expected {:?}, found {:?}", t, got),
            )),
        }
    }

    fn parse_expr(&mut self) -> Result<NodeId, ParseError> {
        self.parse_additive()
    }

    fn parse_additive(&mut self) -> Result<NodeId, ParseError> {
        let mut terms: Vec<(f64, NodeId)> = Vec::new();
        let first = self.parse_multiplicative()?;
        terms.push((1.0, first));
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let t = self.parse_multiplicative()?;
                    terms.push((1.0, t));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let t = self.parse_multiplicative()?;
                    terms.push((-1.0, t));
                }
                _ => break,
            }
        }
        if terms.len() == 1 && terms[0].0 == 1.0 {
            return Ok(terms[0].1);
        }
        Ok(self.problem.graph.sum(0.0, terms))
    }

    fn parse_multiplicative(&mut self) -> Result<NodeId, ParseError> {
        let mut acc = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    acc = self.problem.graph.prod(1.0, vec![acc, rhs]);
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    let inv = self.problem.graph.pow(rhs, -1.0);
                    acc = self.problem.graph.prod(1.0, vec![acc, inv]);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn parse_unary(&mut self) -> Result<NodeId, ParseError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                let inner = self.parse_unary()?;
                Ok(self.problem.graph.sum(0.0, vec![(-1.0, inner)]))
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.parse_unary()
            }
            _ => self.parse_power(),
        }
    }

    fn parse_power(&mut self) -> Result<NodeId, ParseError> {
        let base = self.parse_atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            // right-associative: the exponent may itself contain ^
            let exp_node = match self.peek() {
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let e = self.parse_power_exponent()?;
                    Neg(e)
                }
                _ => Plain(self.parse_power_exponent()?),
            };
            let exponent = match exp_node {
                Plain(v) => v,
                Neg(v) => -v,
            };
            return Ok(self.problem.graph.pow(base, exponent));
        }
        Ok(base)
    }

    /// The exponent of `^` must be a numeric literal (possibly itself a
    /// `a^b` chain of literals, folded right-associatively).
    fn parse_power_exponent(&mut self) -> Result<f64, ParseError> {
        let v = match self.advance() {
            Some(Tok::Num(v)) => v,
            Some(Tok::LParen) => {
                let sign = if self.peek() == Some(&Tok::Minus) {
                    self.pos += 1;
                    -1.0
                } else {
                    1.0
                };
                let inner = match self.advance() {
                    Some(Tok::Num(v)) => v,
                    _ => return Err(self.error("expected a numeric exponent")),
                };
                self.expect(Tok::RParen)?;
                sign * inner
            }
            _ => return Err(self.error("expected a numeric exponent")),
        };
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let rhs = self.parse_power_exponent()?;
            return Ok(v.powf(rhs));
        }
        Ok(v)
    }

    fn parse_atom(&mut self) -> Result<NodeId, ParseError> {
        let col = self
            .toks
            .get(self.pos)
            .map(|&(_, c)| c)
            .unwrap_or(self.end_col);
        match self.advance() {
            Some(Tok::Num(v)) => Ok(self.problem.graph.val(v)),
            Some(Tok::LParen) => {
                let e = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "inf" => Ok(self.problem.graph.val(INF)),
                "min" | "max" => Err(self.error_at(
                    col,
                    format!(
                        "operator `{}` is not supported (removed from the expression system)",
                        name
                    ),
                )),
                "exp" | "log" | "sin" | "cos" | "abs" | "sqrt" | "entropy" => {
                    self.expect(Tok::LParen)?;
                    let arg = self.parse_expr()?;
                    self.expect(Tok::RParen)?;
                    let g = &mut self.problem.graph;
                    Ok(match name.as_str() {
                        "exp" => g.add(Op::Exp, vec![arg]),
                        "log" => g.add(Op::Log, vec![arg]),
                        "sin" => g.add(Op::Sin, vec![arg]),
                        "cos" => g.add(Op::Cos, vec![arg]),
                        "abs" => g.add(Op::Abs, vec![arg]),
                        "sqrt" => g.pow(arg, 0.5),
                        _ => g.add(Op::Entropy, vec![arg]),
                    })
                }
                "signpower" => {
                    self.expect(Tok::LParen)?;
                    let arg = self.parse_expr()?;
                    self.expect(Tok::Comma)?;
                    let sign = if self.peek() == Some(&Tok::Minus) {
                        self.pos += 1;
                        -1.0
                    } else {
                        1.0
                    };
                    let p = match self.advance() {
                        Some(Tok::Num(v)) => sign * v,
                        _ => return Err(self.error("expected a numeric exponent")),
                    };
                    self.expect(Tok::RParen)?;
                    Ok(self
                        .problem
                        .graph
                        .add(Op::SignPow { exponent: p }, vec![arg]))
                }
                _ => match self.problem.var_index(&name) {
                    Some(i) => Ok(self.problem.graph.var(i)),
                    None => Err(self.error_at(col, format!("undeclared variable `{}`", name))),
                },
            },
            got => Err(self.error_at(col, format!("expected an expression, found {:?}", got))),
        }
    }
}

enum SignedExponent {
    Plain(f64),
    Neg(f64),
}
use SignedExponent::{Neg, Plain};

// ----------------------------------------------------------------------
// model file parser
// ----------------------------------------------------------------------

pub fn parse_model(text: &str) -> Result<Problem, ParseError> {
    let mut problem = Problem::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let toks = tokenize(raw, line)?;
        if toks.is_empty() {
            continue;
        }
        let err = |col: usize, msg: String| ParseError { line, col, msg };
        let head = match &toks[0].0 {
            Tok::Ident(s) => s.clone(),
            _ => return Err(err(toks[0].1, "expected a directive".into())),
        };
        match head.as_str() {
            "var" => parse_var_line(&toks, raw, line, &mut problem)?,
            "con" => parse_con_line(&toks, raw, line, &mut problem)?,
            "vlb" => parse_vbound_line(&toks, raw, line, &mut problem, false)?,
            "vub" => parse_vbound_line(&toks, raw, line, &mut problem, true)?,
            "minimize" => problem.sense = ObjSense::Minimize,
            "maximize" => problem.sense = ObjSense::Maximize,
            other => {
                return Err(err(
                    toks[0].1,
                    format!("unknown directive `{}`", other),
                ))
            }
        }
    }
    Ok(problem)
}

fn signed_num(toks: &[(Tok, usize)], pos: &mut usize) -> Option<f64> {
    let mut sign = 1.0;
    let mut p = *pos;
    if matches!(toks.get(p), Some((Tok::Minus, _))) {
        sign = -1.0;
        p += 1;
    }
    match toks.get(p) {
        Some((Tok::Num(v), _)) => {
            *pos = p + 1;
            Some(sign * v)
        }
        Some((Tok::Ident(s), _)) if s == "inf" => {
            *pos = p + 1;
            Some(sign * INF)
        }
        _ => None,
    }
}

fn parse_var_line(
    toks: &[(Tok, usize)],
    raw: &str,
    line: usize,
    problem: &mut Problem,
) -> Result<(), ParseError> {
    let err = |col: usize, msg: String| ParseError { line, col, msg };
    let endc = raw.len() + 1;
    let colof = |i: usize| toks.get(i).map(|&(_, c)| c).unwrap_or(endc);
    let mut pos = 1;
    let name = match toks.get(pos) {
        Some((Tok::Ident(s), _)) => s.clone(),
        _ => return Err(err(colof(pos), "expected a variable name".into())),
    };
    if problem.var_index(&name).is_some() {
        return Err(err(colof(pos), format!("duplicate variable `{}`", name)));
    }
    pos += 1;
    let vartype = match toks.get(pos) {
        Some((Tok::Ident(s), _)) => match s.as_str() {
            "continuous" => VarType::Continuous,
            "integer" => VarType::Integer,
            "binary" => VarType::Binary,
            other => {
                return Err(err(
                    colof(pos),
                    format!("unknown variable type `{}`", other),
                ))
            }
        },
        _ => return Err(err(colof(pos), "expected a variable type".into())),
    };
    pos += 1;
    if !matches!(toks.get(pos), Some((Tok::LBracket, _))) {
        return Err(err(colof(pos), "expected `[LB, UB]`".into()));
    }
    pos += 1;
    let lb = signed_num(toks, &mut pos)
        .ok_or_else(|| err(colof(pos), "expected a lower bound".into()))?;
    if !matches!(toks.get(pos), Some((Tok::Comma, _))) {
        return Err(err(colof(pos), "expected `,`".into()));
    }
    pos += 1;
    let ub = signed_num(toks, &mut pos)
        .ok_or_else(|| err(colof(pos), "expected an upper bound".into()))?;
    if !matches!(toks.get(pos), Some((Tok::RBracket, _))) {
        return Err(err(colof(pos), "expected `]`".into()));
    }
    pos += 1;
    let mut obj = 0.0;
    if let Some((Tok::Ident(s), _)) = toks.get(pos) {
        if s == "obj" {
            pos += 1;
            obj = signed_num(toks, &mut pos)
                .ok_or_else(|| err(colof(pos), "expected an objective coefficient".into()))?;
        }
    }
    if pos != toks.len() {
        return Err(err(colof(pos), "trailing tokens on var line".into()));
    }
    let mut v = Var::continuous(&name, lb.max(-INF), ub.min(INF));
    v.vartype = vartype;
    if vartype == VarType::Binary {
        v.lb = v.lb.max(0.0);
        v.ub = v.ub.min(1.0);
    }
    v.obj = obj;
    if v.lb > v.ub {
        return Err(err(colof(1), format!("empty bounds on `{}`", name)));
    }
    problem.vars.push(v);
    Ok(())
}

fn parse_con_line(
    toks: &[(Tok, usize)],
    raw: &str,
    line: usize,
    problem: &mut Problem,
) -> Result<(), ParseError> {
    let err = |col: usize, msg: String| ParseError { line, col, msg };
    let endc = raw.len() + 1;
    let colof = |i: usize| toks.get(i).map(|&(_, c)| c).unwrap_or(endc);
    let name = match toks.get(1) {
        Some((Tok::Ident(s), _)) => s.clone(),
        _ => return Err(err(colof(1), "expected a constraint name".into())),
    };
    if problem.constraints.iter().any(|c| c.name == name) {
        return Err(err(colof(1), format!("duplicate constraint `{}`", name)));
    }
    if !matches!(toks.get(2), Some((Tok::Colon, _))) {
        return Err(err(colof(2), "expected `:`".into()));
    }
    let mut pos = 3;
    // optional numeric LHS followed by <=
    let mut lhs = -INF;
    {
        let mut probe = pos;
        if let Some(v) = signed_num(toks, &mut probe) {
            if matches!(toks.get(probe), Some((Tok::Le, _))) {
                lhs = v;
                pos = probe + 1;
            }
        }
    }
    // find the relational operator separating EXPR from RHS by scanning
    let rel_pos = (pos..toks.len())
        .find(|&i| matches!(toks[i].0, Tok::Le | Tok::Ge | Tok::EqEq))
        .ok_or_else(|| err(endc, "expected `<=`, `>=`, or `==`".into()))?;
    let rel = toks[rel_pos].0.clone();
    let expr_toks = &toks[pos..rel_pos];
    let mut ep = ExprParser {
        toks: expr_toks,
        pos: 0,
        line,
        end_col: colof(rel_pos),
        problem,
    };
    let root = ep.parse_expr()?;
    if ep.pos != expr_toks.len() {
        let col = expr_toks.get(ep.pos).map(|&(_, c)| c).unwrap_or(endc);
        return Err(err(col, "trailing tokens in constraint expression".into()));
    }
    let mut pos = rel_pos + 1;
    let side = signed_num(toks, &mut pos)
        .ok_or_else(|| err(colof(pos), "expected a numeric side".into()))?;
    if pos != toks.len() {
        return Err(err(colof(pos), "trailing tokens on con line".into()));
    }
    let (lhs, rhs) = match rel {
        Tok::Le => (lhs, side),
        Tok::Ge => {
            if lhs > -INF {
                return Err(err(colof(rel_pos), "ranged rows use `lhs <= expr <= rhs`".into()));
            }
            (side, INF)
        }
        Tok::EqEq => {
            if lhs > -INF {
                return Err(err(colof(rel_pos), "ranged rows use `lhs <= expr <= rhs`".into()));
            }
            (side, side)
        }
        _ => unreachable!(),
    };
    problem.constraints.push(Constraint {
        name,
        lhs: lhs.max(-INF),
        rhs: rhs.min(INF),
        root,
    });
    Ok(())
}

fn parse_vbound_line(
    toks: &[(Tok, usize)],
    raw: &str,
    line: usize,
    problem: &mut Problem,
    upper: bool,
) -> Result<(), ParseError> {
    let err = |col: usize, msg: String| ParseError { line, col, msg };
    let endc = raw.len() + 1;
    let colof = |i: usize| toks.get(i).map(|&(_, c)| c).unwrap_or(endc);
    let yvar = match toks.get(1) {
        Some((Tok::Ident(s), _)) => problem
            .var_index(s)
            .ok_or_else(|| err(colof(1), format!("undeclared variable `{}`", s)))?,
        _ => return Err(err(colof(1), "expected a variable name".into())),
    };
    let want = if upper { Tok::Le } else { Tok::Ge };
    if toks.get(2).map(|(t, _)| t) != Some(&want) {
        return Err(err(
            colof(2),
            format!("expected `{}`", if upper { "<=" } else { ">=" }),
        ));
    }
    let mut pos = 3;
    let coef = signed_num(toks, &mut pos)
        .ok_or_else(|| err(colof(pos), "expected a coefficient".into()))?;
    if !matches!(toks.get(pos), Some((Tok::Star, _))) {
        return Err(err(colof(pos), "expected `*`".into()));
    }
    pos += 1;
    let xvar = match toks.get(pos) {
        Some((Tok::Ident(s), _)) => problem
            .var_index(s)
            .ok_or_else(|| err(colof(pos), format!("undeclared variable `{}`", s)))?,
        _ => return Err(err(colof(pos), "expected a variable name".into())),
    };
    pos += 1;
    let mut constant = 0.0;
    match toks.get(pos) {
        Some((Tok::Plus, _)) => {
            pos += 1;
            constant = signed_num(toks, &mut pos)
                .ok_or_else(|| err(colof(pos), "expected a constant".into()))?;
        }
        Some((Tok::Minus, _)) => {
            pos += 1;
            constant = -signed_num(toks, &mut pos)
                .ok_or_else(|| err(colof(pos), "expected a constant".into()))?;
        }
        None => {}
        _ => return Err(err(colof(pos), "expected `+ CONST`".into())),
    }
    if pos != toks.len() {
        return Err(err(colof(pos), "trailing tokens on bound line".into()));
    }
    problem.vbounds.push(VarBound {
        yvar,
        xvar,
        coef,
        constant,
        upper,
    });
    Ok(())
}

// ----------------------------------------------------------------------
// printer
// ----------------------------------------------------------------------

fn fmt_num(v: f64) -> String {
    if v >= INF {
        "inf".into()
    } else if v <= -INF {
        "-inf".into()
    } else {
        format!("{}", v)
    }
}

/// Operator tiers for parenthesization: sum 1, prod 2, pow 3, atom 4.
fn tier(g: &ExprGraph, id: NodeId) -> u8 {
    match g.node(id).op {
        Op::Sum { .. } => 1,
        Op::Prod { .. } => 2,
        Op::Pow { .. } => 3,
        _ => 4,
    }
}

pub fn print_expr(g: &ExprGraph, vars: &[Var], id: NodeId) -> String {
    let mut s = String::new();
    write_expr(g, vars, id, &mut s);
    s
}

fn write_child(g: &ExprGraph, vars: &[Var], id: NodeId, min_tier: u8, out: &mut String) {
    if tier(g, id) < min_tier {
        out.push('(');
        write_expr(g, vars, id, out);
        out.push(')');
    } else {
        write_expr(g, vars, id, out);
    }
}

fn write_expr(g: &ExprGraph, vars: &[Var], id: NodeId, out: &mut String) {
    let node = g.node(id);
    match &node.op {
        Op::Val(v) => {
            if *v < 0.0 {
                let _ = write!(out, "({})", fmt_num(*v));
            } else {
                out.push_str(&fmt_num(*v));
            }
        }
        Op::Var(i) => out.push_str(&vars[*i].name),
        Op::Sum { constant, coefs } => {
            let mut first = true;
            if *constant != 0.0 {
                out.push_str(&fmt_num(*constant));
                first = false;
            }
            for (c, &ch) in coefs.iter().zip(&node.children) {
                if *c == 0.0 {
                    continue;
                }
                let mag = c.abs();
                if first {
                    if *c < 0.0 {
                        out.push('-');
                    }
                } else if *c < 0.0 {
                    out.push_str(" - ");
                } else {
                    out.push_str(" + ");
                }
                if mag != 1.0 {
                    let _ = write!(out, "{}*", fmt_num(mag));
                }
                write_child(g, vars, ch, 2, out);
                first = false;
            }
            if first {
                out.push('0');
            }
        }
        Op::Prod { coef } => {
            let mut first = true;
            if *coef != 1.0 {
                if *coef == -1.0 {
                    out.push('-');
                } else {
                    out.push_str(&fmt_num(*coef));
                    first = false;
                }
            }
            for &ch in &node.children {
                if !first {
                    out.push('*');
                }
                write_child(g, vars, ch, 3, out);
                first = false;
            }
        }
        Op::Pow { exponent } => {
            write_child(g, vars, node.children[0], 4, out);
            if *exponent < 0.0 || exponent.fract() != 0.0 {
                let _ = write!(out, "^({})", fmt_num(*exponent));
            } else {
                let _ = write!(out, "^{}", fmt_num(*exponent));
            }
        }
        Op::SignPow { exponent } => {
            out.push_str("signpower(");
            write_expr(g, vars, node.children[0], out);
            let _ = write!(out, ", {})", fmt_num(*exponent));
        }
        Op::Exp | Op::Log | Op::Sin | Op::Cos | Op::Abs | Op::Entropy => {
            let fname = match node.op {
                Op::Exp => "exp",
                Op::Log => "log",
                Op::Sin => "sin",
                Op::Cos => "cos",
                Op::Abs => "abs",
                _ => "entropy",
            };
            out.push_str(fname);
            out.push('(');
            write_expr(g, vars, node.children[0], out);
            out.push(')');
        }
    }
}

pub fn print_model(p: &Problem) -> String {
    let mut out = String::new();
    for v in &p.vars {
        let ty = match v.vartype {
            VarType::Continuous => "continuous",
            VarType::Integer => "integer",
            VarType::Binary => "binary",
        };
        let _ = write!(out, "var {} {} [{}, {}]", v.name, ty, fmt_num(v.lb), fmt_num(v.ub));
        if v.obj != 0.0 {
            let _ = write!(out, " obj {}", fmt_num(v.obj));
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "{}",
        if p.sense == ObjSense::Minimize {
            "minimize"
        } else {
            "maximize"
        }
    );
    for c in &p.constraints {
        let body = print_expr(&p.graph, &p.vars, c.root);
        if c.lhs <= -INF && c.rhs >= INF {
            let _ = writeln!(out, "con {}: {} <= inf", c.name, body);
        } else if c.lhs <= -INF {
            let _ = writeln!(out, "con {}: {} <= {}", c.name, body, fmt_num(c.rhs));
        } else if c.rhs >= INF {
            let _ = writeln!(out, "con {}: {} >= {}", c.name, body, fmt_num(c.lhs));
        } else if c.lhs == c.rhs {
            let _ = writeln!(out, "con {}: {} == {}", c.name, body, fmt_num(c.rhs));
        } else {
            let _ = writeln!(
                out,
                "con {}: {} <= {} <= {}",
                c.name,
                fmt_num(c.lhs),
                body,
                fmt_num(c.rhs)
            );
        }
    }
    for vb in &p.vbounds {
        let _ = writeln!(
            out,
            "{} {} {} {} * {} + {}",
            if vb.upper { "vub" } else { "vlb" },
            p.vars[vb.yvar].name,
            if vb.upper { "<=" } else { ">=" },
            fmt_num(vb.coef),
            p.vars[vb.xvar].name,
            fmt_num(vb.constant)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Problem {
        parse_model(text).unwrap()
    }

    #[test]
    fn simple_quadratic_constraint() {
        let p = parse(
            "var x continuous [-2, 2]\n\
             var y continuous [-2, 2]\n\
             con c: x^2 + y^2 <= 2\n\
             minimize\n",
        );
        assert_eq!(p.vars.len(), 2);
        assert_eq!(p.constraints.len(), 1);
        let c = &p.constraints[0];
        assert_eq!(c.rhs, 2.0);
        assert!(c.lhs <= -INF);
        let v = p.graph.eval(c.root, &[1.0, -1.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn precedence_and_right_assoc_pow() {
        let p = parse(
            "var x continuous [1, 2]\n\
             con a: 2*x^2^3 + 1 <= 100000\n\
             minimize\n",
        );
        // 2*x^(2^3) + 1 = 2 x^8 + 1
        let v = p.graph.eval(p.constraints[0].root, &[1.5]).unwrap();
        assert!((v - (2.0 * 1.5f64.powi(8) + 1.0)).abs() < 1e-9);
    }

    #[test]
    fn division_and_sqrt_and_functions() {
        let p = parse(
            "var x continuous [1, 4]\n\
             var y continuous [1, 4]\n\
             con c: sqrt(x) / y - exp(log(x)) + signpower(y, 3) >= 0\n\
             minimize\n",
        );
        let v = p.graph.eval(p.constraints[0].root, &[4.0, 2.0]).unwrap();
        assert!((v - (2.0 / 2.0 - 4.0 + 8.0)).abs() < 1e-9);
        assert_eq!(p.constraints[0].rhs, INF);
        assert_eq!(p.constraints[0].lhs, 0.0);
    }

    #[test]
    fn ranged_row_and_equality() {
        let p = parse(
            "var x continuous [0, 10]\n\
             con a: -1 <= x - 5 <= 1\n\
             con b: x == 3\n\
             minimize\n",
        );
        assert_eq!(p.constraints[0].lhs, -1.0);
        assert_eq!(p.constraints[0].rhs, 1.0);
        assert_eq!(p.constraints[1].lhs, 3.0);
        assert_eq!(p.constraints[1].rhs, 3.0);
    }

    #[test]
    fn min_rejected_with_pointer() {
        let e = parse_model(
            "var x continuous [0, 1]\nvar y continuous [0, 1]\ncon c: min(x, y) <= 1\n",
        )
        .unwrap_err();
        assert!(e.msg.contains("min"));
        assert!(e.msg.contains("not supported"));
        assert_eq!(e.line, 3);
    }

    #[test]
    fn undeclared_variable_positioned() {
        let e = parse_model("var x continuous [0, 1]\ncon c: x + z <= 1\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.msg.contains("undeclared"));
        assert!(e.col > 0);
    }

    #[test]
    fn vbound_lines() {
        let p = parse(
            "var y continuous [0, 10]\n\
             var b binary [0, 1]\n\
             vlb y >= 2.5 * b + 1\n\
             vub y <= 4 * b\n\
             minimize\n",
        );
        assert_eq!(
            p.vbounds[0],
            VarBound {
                yvar: 0,
                xvar: 1,
                coef: 2.5,
                constant: 1.0,
                upper: false
            }
        );
        assert_eq!(
            p.vbounds[1],
            VarBound {
                yvar: 0,
                xvar: 1,
                coef: 4.0,
                constant: 0.0,
                upper: true
            }
        );
    }

    #[test]
    fn objective_and_sense() {
        let p = parse(
            "var x continuous [0, 1] obj 2\n\
             var z continuous [-inf, inf] obj -1\n\
             maximize\n",
        );
        assert_eq!(p.vars[0].obj, 2.0);
        assert_eq!(p.vars[1].obj, -1.0);
        assert_eq!(p.vars[1].lb, -INF);
        assert_eq!(p.vars[1].ub, INF);
        assert_eq!(p.sense, ObjSense::Maximize);
    }

    #[test]
    fn comments_and_blank_lines() {
        let p = parse("# header\n\nvar x continuous [0, 1] # trailing\nminimize\n");
        assert_eq!(p.vars.len(), 1);
    }

    #[test]
    fn roundtrip_motivating_model() {
        let text = "var x continuous [-2, 2]\n\
                    var y continuous [-2, 2]\n\
                    var z continuous [-inf, inf] obj 1\n\
                    minimize\n\
                    con soc: x^2 + y^2 <= 2\n\
                    con e: exp(log(1000) + 1 + x*y) - z <= 0\n";
        let p1 = parse(text);
        let printed = print_model(&p1);
        let p2 = parse(&printed);
        assert_eq!(p1.vars.len(), p2.vars.len());
        assert_eq!(p1.constraints.len(), p2.constraints.len());
        for (a, b) in p1.constraints.iter().zip(&p2.constraints) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.lhs, b.lhs);
            assert_eq!(a.rhs, b.rhs);
            for pt in [[-1.0, 1.0, 0.0], [0.5, -0.25, 1.0], [2.0, 2.0, -3.0]] {
                let va = p1.graph.eval(a.root, &pt).unwrap();
                let vb = p2.graph.eval(b.root, &pt).unwrap();
                assert!((va - vb).abs() < 1e-9 * (1.0 + va.abs()));
            }
        }
        // structural identity: printing again is a fixed point
        assert_eq!(printed, print_model(&p2));
    }

    #[test]
    fn negative_exponent_roundtrip() {
        let p = parse("var x continuous [1, 2]\ncon c: x^(-2) + x^0.5 <= 3\nminimize\n");
        let printed = print_model(&p);
        let p2 = parse_model(&printed).unwrap();
        let v1 = p.graph.eval(p.constraints[0].root, &[1.5]).unwrap();
        let v2 = p2.graph.eval(p2.constraints[0].root, &[1.5]).unwrap();
        assert!((v1 - v2).abs() < 1e-12);
    }

    #[test]
    fn unary_minus_binds_into_sum() {
        let p = parse("var x continuous [0, 1]\ncon c: -x - -x <= 1\nminimize\n");
        let v = p.graph.eval(p.constraints[0].root, &[0.7]).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn bad_syntax_reports_position() {
        let e = parse_model("var x continuous [0, 1]\ncon c: x + <= 1\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_model("var x bogus [0, 1]\n").unwrap_err();
        assert!(e.msg.contains("type"));
        let e = parse_model("frobnicate\n").unwrap_err();
        assert!(e.msg.contains("directive"));
    }
}
