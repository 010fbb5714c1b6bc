use super::{Row, Tangle, TangleError};
use crate::loopspace::{Grade, Sign};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Int(usize),
    Sign(Sign),
    Punct(char),
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    end: (usize, usize),
}

fn lex(text: &str) -> Result<Lexer, TangleError> {
    let mut toks = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (l, k) = (line, col);
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            chars.next();
            col += 1;
        } else if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&d) = chars.peek() {
                if !d.is_ascii_digit() {
                    break;
                }
                s.push(d);
                chars.next();
                col += 1;
            }
            let v = s.parse().map_err(|_| TangleError::Syntax {
                line: l,
                col: k,
                msg: format!("integer {s} out of range"),
            })?;
            toks.push((Tok::Int(v), l, k));
        } else if c.is_ascii_alphabetic() {
            let mut s = String::new();
            while let Some(&d) = chars.peek() {
                if !d.is_ascii_alphanumeric() && d != '_' {
                    break;
                }
                s.push(d);
                chars.next();
                col += 1;
            }
            toks.push((Tok::Word(s), l, k));
        } else if c == '+' || c == '-' {
            chars.next();
            col += 1;
            let s = if c == '+' { Sign::Plus } else { Sign::Minus };
            toks.push((Tok::Sign(s), l, k));
        } else if "(),{}[];".contains(c) {
            chars.next();
            col += 1;
            toks.push((Tok::Punct(c), l, k));
        } else {
            return Err(TangleError::Syntax {
                line: l,
                col: k,
                msg: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(Lexer {
        toks,
        pos: 0,
        end: (line, col),
    })
}

impl Lexer {
    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.1, t.2))
            .unwrap_or(self.end)
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, TangleError> {
        let (line, col) = self.here();
        Err(TangleError::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn punct(&mut self, c: char) -> Result<(), TangleError> {
        match self.peek() {
            Some(Tok::Punct(p)) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            _ => self.fail(format!("expected '{c}'")),
        }
    }

    fn word(&mut self, w: &str) -> Result<(), TangleError> {
        match self.peek() {
            Some(Tok::Word(s)) if s == w => {
                self.pos += 1;
                Ok(())
            }
            _ => self.fail(format!("expected '{w}'")),
        }
    }

    fn int(&mut self) -> Result<usize, TangleError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => self.fail("expected an integer"),
        }
    }

    fn grade(&mut self) -> Result<Grade, TangleError> {
        self.punct('(')?;
        let n = self.int()?;
        self.punct(',')?;
        let sign = match self.peek() {
            Some(Tok::Sign(s)) => {
                let s = *s;
                self.pos += 1;
                s
            }
            _ => return self.fail("expected '+' or '-'"),
        };
        self.punct(')')?;
        Ok(Grade::new(n, sign))
    }

    fn row(&mut self) -> Result<Row, TangleError> {
        match self.peek() {
            Some(Tok::Word(w)) if w == "cup" => {
                self.pos += 1;
                Ok(Row::Cup(self.int()?))
            }
            Some(Tok::Word(w)) if w == "cap" => {
                self.pos += 1;
                Ok(Row::Cap(self.int()?))
            }
            Some(Tok::Word(w)) if w == "box" => {
                self.pos += 1;
                let input = self.int()?;
                self.word("at")?;
                let at = self.int()?;
                Ok(Row::Box { input, at })
            }
            _ => self.fail("expected 'cup', 'cap' or 'box'"),
        }
    }
}

/// Parse and validate a tangle. Rows may be empty, and a trailing `;` is accepted.
pub fn parse_tangle(text: &str) -> Result<Tangle, TangleError> {
    let mut lx = lex(text)?;
    lx.word("tangle")?;
    let boundary = lx.grade()?;
    let mut inputs = Vec::new();
    if matches!(lx.peek(), Some(Tok::Word(w)) if w == "inputs") {
        lx.pos += 1;
        lx.punct('[')?;
        inputs.push(lx.grade()?);
        while matches!(lx.peek(), Some(Tok::Punct(','))) {
            lx.pos += 1;
            inputs.push(lx.grade()?);
        }
        lx.punct(']')?;
    }
    lx.punct('{')?;
    let mut rows = Vec::new();
    loop {
        if matches!(lx.peek(), Some(Tok::Punct('}'))) {
            lx.pos += 1;
            break;
        }
        rows.push(lx.row()?);
        match lx.peek() {
            Some(Tok::Punct(';')) => {
                lx.pos += 1;
            }
            Some(Tok::Punct('}')) => {}
            _ => return lx.fail("expected ';' or '}'"),
        }
    }
    if lx.next().is_some() {
        lx.pos -= 1;
        return lx.fail("trailing input after '}'");
    }
    Tangle::new(boundary, inputs, rows)
}
