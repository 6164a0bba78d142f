//! First-order formulas and their text syntax.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! iff     := implies ( "<=>" implies )*
//! implies := or ( ("=>" | "<=") implies )?
//! or      := and ( "v" and )*
//! and     := unary ( "^" unary )*
//! unary   := "!" unary | "(" iff ")" | atom
//! atom    := name [ "(" term ( "," term )* ")" ]
//! ```
//!
//! Terms starting with an uppercase letter are variables; all other terms
//! are constants. The bare identifier `v` is always the disjunction operator.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn parse(token: &str) -> Term {
        if token.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
            Term::Var(token.to_string())
        } else {
            Term::Const(token.to_string())
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(s) | Term::Const(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: &[&str]) -> Atom {
        Atom {
            pred: pred.into(),
            args: args.iter().map(|a| Term::parse(a)).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
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

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(pred: &str, args: &[&str]) -> Formula {
        Formula::Atom(Atom::new(pred, args))
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// Distinct variables in order of first occurrence.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| {
            for t in &a.args {
                if let Term::Var(v) = t {
                    if !out.contains(v) {
                        out.push(v.clone());
                    }
                }
            }
        });
        out
    }

    /// Distinct constants mentioned anywhere in the formula.
    pub fn constants(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| {
            for t in &a.args {
                if let Term::Const(c) = t {
                    if !out.contains(c) {
                        out.push(c.clone());
                    }
                }
            }
        });
        out
    }

    pub fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::Not(x) => x.visit_atoms(f),
            Formula::And(xs) | Formula::Or(xs) => xs.iter().for_each(|x| x.visit_atoms(f)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
        }
    }

    pub fn parse(text: &str) -> Result<Formula, String> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let f = p.iff()?;
        if let Some(t) = p.peek() {
            return Err(format!("unexpected `{t}`"));
        }
        Ok(f)
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Iff(..) => 0,
            Formula::Implies(..) => 1,
            Formula::Or(_) => 2,
            Formula::And(_) => 3,
            Formula::Not(_) | Formula::Atom(_) => 4,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Formula, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(x) => {
                f.write_str("!")?;
                write_child(f, x, 4)
            }
            Formula::And(xs) | Formula::Or(xs) => {
                let (sep, prec) = if matches!(self, Formula::And(_)) {
                    (" ^ ", 4)
                } else {
                    (" v ", 3)
                };
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write_child(f, x, prec)?;
                }
                Ok(())
            }
            Formula::Implies(a, b) => {
                write_child(f, a, 2)?;
                f.write_str(" => ")?;
                write_child(f, b, 2)
            }
            Formula::Iff(a, b) => {
                write_child(f, a, 1)?;
                f.write_str(" <=> ")?;
                write_child(f, b, 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Not,
    And,
    Or,
    Implies,
    ImpliedBy,
    Iff,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Token::Ident(s) => s.as_str(),
            Token::LParen => "(",
            Token::RParen => ")",
            Token::Comma => ",",
            Token::Not => "!",
            Token::And => "^",
            Token::Or => "v",
            Token::Implies => "=>",
            Token::ImpliedBy => "<=",
            Token::Iff => "<=>",
        };
        f.write_str(s)
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            ',' => {
                out.push(Token::Comma);
                i += 1;
            }
            '!' => {
                out.push(Token::Not);
                i += 1;
            }
            '^' => {
                out.push(Token::And);
                i += 1;
            }
            '=' if chars.get(i + 1) == Some(&'>') => {
                out.push(Token::Implies);
                i += 2;
            }
            '<' if chars.get(i + 1) == Some(&'=') => {
                if chars.get(i + 2) == Some(&'>') {
                    out.push(Token::Iff);
                    i += 3;
                } else {
                    out.push(Token::ImpliedBy);
                    i += 2;
                }
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                if word == "v" {
                    out.push(Token::Or);
                } else {
                    out.push(Token::Ident(word));
                }
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, t: &Token) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn iff(&mut self) -> Result<Formula, String> {
        let mut lhs = self.implies()?;
        while self.eat(&Token::Iff) {
            let rhs = self.implies()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula, String> {
        let lhs = self.or()?;
        if self.eat(&Token::Implies) {
            let rhs = self.implies()?;
            Ok(Formula::implies(lhs, rhs))
        } else if self.eat(&Token::ImpliedBy) {
            let rhs = self.implies()?;
            Ok(Formula::implies(rhs, lhs))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<Formula, String> {
        let mut parts = vec![self.and()?];
        while self.eat(&Token::Or) {
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        })
    }

    fn and(&mut self) -> Result<Formula, String> {
        let mut parts = vec![self.unary()?];
        while self.eat(&Token::And) {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn unary(&mut self) -> Result<Formula, String> {
        match self.tokens.get(self.pos).cloned() {
            Some(Token::Not) => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let f = self.iff()?;
                if !self.eat(&Token::RParen) {
                    return Err("expected `)`".into());
                }
                Ok(f)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if !name.chars().next().is_some_and(|c| c.is_ascii_lowercase()) {
                    return Err(format!("predicate name `{name}` must start with a lowercase letter"));
                }
                let mut args = Vec::new();
                if self.eat(&Token::LParen) {
                    if !self.eat(&Token::RParen) {
                        loop {
                            match self.tokens.get(self.pos).cloned() {
                                Some(Token::Ident(t)) => {
                                    self.pos += 1;
                                    args.push(Term::parse(&t));
                                }
                                // a lone `v` inside an argument list is a constant
                                Some(Token::Or) => {
                                    self.pos += 1;
                                    args.push(Term::Const("v".into()));
                                }
                                other => {
                                    return Err(format!(
                                        "expected an argument, found {}",
                                        other.map_or("end of input".to_string(), |t| format!("`{t}`"))
                                    ))
                                }
                            }
                            if self.eat(&Token::RParen) {
                                break;
                            }
                            if !self.eat(&Token::Comma) {
                                return Err("expected `,` or `)`".into());
                            }
                        }
                    }
                }
                Ok(Formula::Atom(Atom { pred: name, args }))
            }
            Some(t) => Err(format!("unexpected `{t}`")),
            None => Err("unexpected end of formula".into()),
        }
    }
}
