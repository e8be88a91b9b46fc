//! Position-tracking s-expression reader used by the PDDL parser.

use super::PddlError;

/// Line and column (both 1-based) of a token in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Sym(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Sym(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            SExpr::Sym(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Sym(..) => None,
        }
    }

    /// The leading symbol of a list, e.g. `and` in `(and ...)`.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(SExpr::as_sym)
    }
}

/// Reads exactly one top-level expression; anything but whitespace and
/// comments after it is an error. Symbols are lower-cased.
pub fn read_one(text: &str) -> Result<SExpr, PddlError> {
    let mut reader = Reader::new(text);
    reader.skip_trivia();
    let expr = match reader.peek() {
        None => return Err(reader.error("empty input")),
        Some(_) => reader.expr()?,
    };
    reader.skip_trivia();
    if reader.peek().is_some() {
        return Err(reader.error("unexpected text after the closing parenthesis"));
    }
    Ok(expr)
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader {
            chars: text.chars().peekable(),
            pos: Pos { line: 1, col: 1 },
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn error(&self, msg: &str) -> PddlError {
        PddlError::Syntax {
            line: self.pos.line,
            col: self.pos.col,
            msg: msg.to_string(),
        }
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn expr(&mut self) -> Result<SExpr, PddlError> {
        let start = self.pos;
        match self.peek() {
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => {
                            return Err(PddlError::Syntax {
                                line: start.line,
                                col: start.col,
                                msg: "unbalanced parentheses: list opened here is never closed"
                                    .into(),
                            })
                        }
                        Some(')') => {
                            self.bump();
                            return Ok(SExpr::List(items, start));
                        }
                        Some(_) => items.push(self.expr()?),
                    }
                }
            }
            Some(')') => Err(self.error("unbalanced parentheses: unexpected ')'")),
            Some(_) => {
                let mut sym = String::new();
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    sym.extend(c.to_lowercase());
                    self.bump();
                }
                Ok(SExpr::Sym(sym, start))
            }
            None => Err(self.error("unexpected end of input")),
        }
    }
}
