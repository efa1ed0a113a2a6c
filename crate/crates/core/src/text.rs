//! Canonical text grammar shared by distribution and weight-scheme specs.
//!
//! ```text
//! term  := ident [ "(" [ arg { "," arg } ] ")" ]
//! arg   := ident "=" value | ident
//! value := number | "[" [ number { "," number } ] "]" | term
//! ```

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Value {
    Number(f64),
    List(Vec<f64>),
    Term(Term),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Arg {
    Pair(String, Value),
    Flag(String),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Term {
    pub name: String,
    pub args: Vec<Arg>,
}

impl Term {
    pub fn parse(input: &str) -> Result<Term> {
        let mut p = Parser { src: input, pos: 0 };
        let term = p.term()?;
        p.skip_ws();
        if p.pos != input.len() {
            return Err(p.error("trailing input"));
        }
        Ok(term)
    }

    pub fn flags(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|a| match a {
            Arg::Flag(f) => Some(f.as_str()),
            _ => None,
        })
    }

    pub fn value(&self, key: &str) -> Option<&Value> {
        self.args.iter().find_map(|a| match a {
            Arg::Pair(k, v) if k == key => Some(v),
            _ => None,
        })
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.value(key) {
            None => Ok(None),
            Some(Value::Number(x)) => Ok(Some(*x)),
            Some(_) => Err(self.err(&format!("`{key}` must be a number"))),
        }
    }

    pub fn require_number(&self, key: &str) -> Result<f64> {
        self.number(key)?
            .ok_or_else(|| self.err(&format!("missing `{key}`")))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        match self.value(key) {
            Some(Value::List(xs)) => Ok(xs.clone()),
            Some(Value::Number(x)) => Ok(vec![*x]),
            Some(_) => Err(self.err(&format!("`{key}` must be a list"))),
            None => Err(self.err(&format!("missing `{key}`"))),
        }
    }

    pub fn term(&self, key: &str) -> Result<&Term> {
        match self.value(key) {
            Some(Value::Term(t)) => Ok(t),
            Some(_) => Err(self.err(&format!("`{key}` must be a distribution"))),
            None => Err(self.err(&format!("missing `{key}`"))),
        }
    }

    /// Rejects any key or flag outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for a in &self.args {
            let k = match a {
                Arg::Pair(k, _) | Arg::Flag(k) => k,
            };
            if !allowed.contains(&k.as_str()) {
                return Err(self.err(&format!("unknown argument `{k}`")));
            }
        }
        Ok(())
    }

    pub fn err(&self, message: &str) -> Error {
        Error::InvalidSpec(format!("{}: {message}", self.name))
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> Error {
        Error::Parse {
            input: self.src.to_string(),
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos || !self.src.as_bytes()[start].is_ascii_alphabetic() {
            self.pos = start;
            return Err(self.error("expected identifier"));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E') {
                self.pos += 1;
            } else {
                break;
            }
        }
        let lit = &self.src[start..self.pos];
        lit.parse::<f64>().map_err(|_| {
            self.pos = start;
            self.error(&format!("invalid number `{lit}`"))
        })
    }

    fn term(&mut self) -> Result<Term> {
        let name = self.ident()?;
        let mut args = Vec::new();
        if self.eat('(') {
            if !self.eat(')') {
                loop {
                    args.push(self.arg()?);
                    if self.eat(')') {
                        break;
                    }
                    self.expect(',')?;
                }
            }
        }
        Ok(Term { name, args })
    }

    fn arg(&mut self) -> Result<Arg> {
        let key = self.ident()?;
        if self.eat('=') {
            Ok(Arg::Pair(key, self.value()?))
        } else {
            Ok(Arg::Flag(key))
        }
    }

    fn value(&mut self) -> Result<Value> {
        self.skip_ws();
        match self.peek() {
            Some('[') => {
                self.pos += 1;
                let mut xs = Vec::new();
                if !self.eat(']') {
                    loop {
                        xs.push(self.number()?);
                        if self.eat(']') {
                            break;
                        }
                        self.expect(',')?;
                    }
                }
                Ok(Value::List(xs))
            }
            Some(c) if c.is_ascii_alphabetic() => Ok(Value::Term(self.term()?)),
            Some(_) => Ok(Value::Number(self.number()?)),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

/// Formats a list of reals with shortest round-trip representations.
pub(crate) fn fmt_list(xs: &[f64]) -> String {
    let inner: Vec<String> = xs.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", inner.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_terms() {
        let t = Term::parse("conv(var_z=0.5, atom=atomic(nodes=[-1,1],probs=[0.5,0.5]))").unwrap();
        assert_eq!(t.name, "conv");
        assert_eq!(t.require_number("var_z").unwrap(), 0.5);
        let atom = t.term("atom").unwrap();
        assert_eq!(atom.list("nodes").unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn flags_and_bare_names() {
        let t = Term::parse("lognormal(sigma=1,std)").unwrap();
        assert_eq!(t.flags().collect::<Vec<_>>(), vec!["std"]);
        let t = Term::parse("chisq1c").unwrap();
        assert!(t.args.is_empty());
    }

    #[test]
    fn rejects_garbage() {
        assert!(Term::parse("gauss(mean=)").is_err());
        assert!(Term::parse("gauss(mean=1").is_err());
        assert!(Term::parse("gauss(mean=1) x").is_err());
        assert!(Term::parse("(1)").is_err());
    }
}
