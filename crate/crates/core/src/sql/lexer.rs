use super::SqlError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Star,
    Plus,
    Minus,
    Slash,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Semi,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: usize,
}

impl Token {
    pub fn describe(&self) -> String {
        match &self.tok {
            Tok::Ident(s) => s.clone(),
            Tok::Number(s) => s.clone(),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Comma => ",".into(),
            Tok::Dot => ".".into(),
            Tok::Star => "*".into(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Slash => "/".into(),
            Tok::Eq => "=".into(),
            Tok::Ne => "!=".into(),
            Tok::Lt => "<".into(),
            Tok::Gt => ">".into(),
            Tok::Le => "<=".into(),
            Tok::Ge => ">=".into(),
            Tok::Semi => ";".into(),
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, SqlError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = |tok| Token { tok, pos };
        match c {
            '(' => out.push(single(Tok::LParen)),
            ')' => out.push(single(Tok::RParen)),
            ',' => out.push(single(Tok::Comma)),
            '*' => out.push(single(Tok::Star)),
            '+' => out.push(single(Tok::Plus)),
            '-' => out.push(single(Tok::Minus)),
            '/' => out.push(single(Tok::Slash)),
            ';' => out.push(single(Tok::Semi)),
            '=' => {
                // tolerate `==`
                if matches!(chars.get(i + 1), Some((_, '='))) {
                    i += 1;
                }
                out.push(single(Tok::Eq));
            }
            '!' => {
                // SPLASH renders `!=` as `! =`
                let mut j = i + 1;
                while matches!(chars.get(j), Some((_, w)) if w.is_whitespace()) {
                    j += 1;
                }
                if matches!(chars.get(j), Some((_, '='))) {
                    out.push(single(Tok::Ne));
                    i = j;
                } else {
                    return Err(SqlError::Syntax {
                        position: pos,
                        message: "expected '=' after '!'".into(),
                    });
                }
            }
            '<' => match chars.get(i + 1) {
                Some((_, '=')) => {
                    out.push(single(Tok::Le));
                    i += 1;
                }
                Some((_, '>')) => {
                    out.push(single(Tok::Ne));
                    i += 1;
                }
                _ => out.push(single(Tok::Lt)),
            },
            '>' => {
                if matches!(chars.get(i + 1), Some((_, '='))) {
                    out.push(single(Tok::Ge));
                    i += 1;
                } else {
                    out.push(single(Tok::Gt));
                }
            }
            '.' if !matches!(chars.get(i + 1), Some((_, d)) if d.is_ascii_digit()) => {
                out.push(single(Tok::Dot))
            }
            '\'' | '"' => {
                let quote = c;
                let mut j = i + 1;
                let mut s = String::new();
                loop {
                    match chars.get(j) {
                        None => {
                            return Err(SqlError::Syntax {
                                position: pos,
                                message: "unterminated string literal".into(),
                            })
                        }
                        Some((_, ch)) if *ch == quote => {
                            // doubled quote escapes itself
                            if matches!(chars.get(j + 1), Some((_, n)) if *n == quote) {
                                s.push(quote);
                                j += 2;
                                continue;
                            }
                            break;
                        }
                        Some((_, ch)) => {
                            s.push(*ch);
                            j += 1;
                        }
                    }
                }
                out.push(single(Tok::Str(s)));
                i = j;
            }
            '`' => {
                let mut j = i + 1;
                let mut s = String::new();
                while let Some((_, ch)) = chars.get(j) {
                    if *ch == '`' {
                        break;
                    }
                    s.push(*ch);
                    j += 1;
                }
                if j >= chars.len() {
                    return Err(SqlError::Syntax {
                        position: pos,
                        message: "unterminated quoted identifier".into(),
                    });
                }
                out.push(single(Tok::Ident(s)));
                i = j;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                let mut s = String::new();
                let mut seen_dot = false;
                while let Some((_, ch)) = chars.get(j) {
                    if ch.is_ascii_digit() {
                        s.push(*ch);
                    } else if *ch == '.' && !seen_dot {
                        seen_dot = true;
                        s.push('.');
                    } else {
                        break;
                    }
                    j += 1;
                }
                // identifiers may start with digits in some schemas (e.g. `2nd_col`)
                if matches!(chars.get(j), Some((_, ch)) if ch.is_alphabetic() || *ch == '_') && !seen_dot {
                    while let Some((_, ch)) = chars.get(j) {
                        if ch.is_alphanumeric() || *ch == '_' {
                            s.push(*ch);
                            j += 1;
                        } else {
                            break;
                        }
                    }
                    out.push(single(Tok::Ident(s)));
                } else {
                    out.push(single(Tok::Number(s)));
                }
                i = j - 1;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                let mut s = String::new();
                while let Some((_, ch)) = chars.get(j) {
                    if ch.is_alphanumeric() || *ch == '_' {
                        s.push(*ch);
                        j += 1;
                    } else {
                        break;
                    }
                }
                out.push(single(Tok::Ident(s)));
                i = j - 1;
            }
            other => {
                return Err(SqlError::Syntax {
                    position: pos,
                    message: format!("unexpected character '{other}'"),
                })
            }
        }
        i += 1;
    }
    Ok(out)
}
