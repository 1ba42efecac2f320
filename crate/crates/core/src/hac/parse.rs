use std::collections::HashSet;

use super::model::{HacModel, HacNode};
use crate::copula::{ArchimedeanGenerator, GeneratorFamily};
use crate::error::{Error, Result};

enum Raw {
    Leaf {
        index: usize,
        pos: usize,
    },
    Node {
        theta: Option<f64>,
        close: usize,
        children: Vec<Raw>,
    },
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

fn err<T>(pos: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        pos,
        msg: msg.into(),
    })
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn node(&mut self) -> Result<Raw> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                let open = self.pos;
                self.pos += 1;
                let mut children = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some(b')') => break,
                        None => return err(open, "unclosed parenthesis"),
                        _ => children.push(self.node()?),
                    }
                }
                let close = self.pos;
                self.pos += 1;
                if children.len() < 2 {
                    return err(open, "a group needs at least two members");
                }
                self.skip_ws();
                let theta = if self.peek() == Some(b'@') {
                    self.pos += 1;
                    self.skip_ws();
                    Some(self.number()?)
                } else {
                    None
                };
                Ok(Raw::Node {
                    theta,
                    close,
                    children,
                })
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii digits");
                match text.parse::<usize>() {
                    Ok(0) => err(start, "leaf indices start at 1"),
                    Ok(i) => Ok(Raw::Leaf {
                        index: i - 1,
                        pos: start,
                    }),
                    Err(_) => err(start, "leaf index out of range"),
                }
            }
            Some(c) => err(self.pos, format!("unexpected character `{}`", c as char)),
            None => err(self.pos, "unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, b'.' | b'e' | b'E' | b'+' | b'-'))
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .or_else(|_| err(start, format!("invalid parameter `{text}`")))
    }
}

fn check_leaves(raw: &Raw, seen: &mut HashSet<usize>) -> Result<()> {
    match raw {
        Raw::Leaf { index, pos } => {
            if !seen.insert(*index) {
                return err(*pos, format!("duplicate leaf {}", index + 1));
            }
            Ok(())
        }
        Raw::Node { children, .. } => children.iter().try_for_each(|c| check_leaves(c, seen)),
    }
}

fn build(raw: Raw, family: GeneratorFamily) -> Result<HacNode> {
    match raw {
        Raw::Leaf { index, .. } => Ok(HacNode::Leaf(index)),
        Raw::Node {
            theta,
            close,
            children,
        } => {
            let children = children
                .into_iter()
                .map(|c| build(c, family))
                .collect::<Result<_>>()?;
            let Some(theta) = theta else {
                return err(close + 1, "missing `@θ` after group");
            };
            let generator = ArchimedeanGenerator::new(family, theta)
                .or_else(|e| err(close + 1, e.to_string()))?;
            Ok(HacNode::Internal {
                generator,
                children,
            })
        }
    }
}

/// Parses the text form `((1 2)@3.31 3)@1.04` into a model of the given
/// family. Leaves are 1-based; every group carries its θ after `@`.
pub fn parse_structure(text: &str, family: GeneratorFamily) -> Result<HacModel> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
    };
    let raw = p.node()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return err(p.pos, "trailing input");
    }
    if matches!(raw, Raw::Leaf { .. }) {
        return err(0, "the structure must be a parenthesised group");
    }
    check_leaves(&raw, &mut HashSet::new())?;
    HacModel::new(build(raw, family)?)
}

/// Canonical text form: children ordered by smallest leaf, θ printed in the
/// shortest form that parses back to the same value.
pub fn format_structure(model: &HacModel) -> String {
    fn walk(n: &HacNode, out: &mut String) {
        match n {
            HacNode::Leaf(i) => out.push_str(&(i + 1).to_string()),
            HacNode::Internal {
                generator,
                children,
            } => {
                out.push('(');
                for (k, c) in children.iter().enumerate() {
                    if k > 0 {
                        out.push(' ');
                    }
                    walk(c, out);
                }
                out.push_str(&format!(")@{}", generator.theta));
            }
        }
    }
    let mut s = String::new();
    walk(model.root(), &mut s);
    s
}
