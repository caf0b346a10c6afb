//! Lexer. Produces a flat token stream with positions for error reporting.

use crate::error::{ParseError, Pos};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    // keywords
    Class,
    Pub,
    Fn,
    Let,
    If,
    Else,
    For,
    While,
    In,
    Return,
    Throw,
    New,
    This,
    True,
    False,
    Null,
    Test,
    Import,
    Observe,
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Dot,
    DotDot,
    Assign,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    AndAnd,
    OrOr,
}

#[derive(Debug, Clone)]
pub struct Spanned {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn lex(file: &str, src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;
    let err = |line: u32, col: u32, message: String| ParseError::Syntax {
        file: file.to_string(),
        pos: Pos { line, col },
        message,
    };

    macro_rules! push {
        ($tok:expr, $line:expr, $col:expr) => {
            out.push(Spanned {
                tok: $tok,
                pos: Pos {
                    line: $line,
                    col: $col,
                },
            })
        };
    }

    while i < bytes.len() {
        let c = bytes[i];
        let (tl, tc) = (line, col);
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
            }
            ' ' | '\t' | '\r' => {
                col += 1;
                i += 1;
            }
            '/' if i + 1 < bytes.len() && bytes[i + 1] == '/' => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
            }
            '{' => {
                push!(Tok::LBrace, tl, tc);
                i += 1;
                col += 1;
            }
            '}' => {
                push!(Tok::RBrace, tl, tc);
                i += 1;
                col += 1;
            }
            '(' => {
                push!(Tok::LParen, tl, tc);
                i += 1;
                col += 1;
            }
            ')' => {
                push!(Tok::RParen, tl, tc);
                i += 1;
                col += 1;
            }
            ',' => {
                push!(Tok::Comma, tl, tc);
                i += 1;
                col += 1;
            }
            ';' => {
                push!(Tok::Semi, tl, tc);
                i += 1;
                col += 1;
            }
            ':' => {
                push!(Tok::Colon, tl, tc);
                i += 1;
                col += 1;
            }
            '.' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '.' {
                    push!(Tok::DotDot, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Dot, tl, tc);
                    i += 1;
                    col += 1;
                }
            }
            '=' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    push!(Tok::Eq, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Assign, tl, tc);
                    i += 1;
                    col += 1;
                }
            }
            '!' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    push!(Tok::Ne, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Bang, tl, tc);
                    i += 1;
                    col += 1;
                }
            }
            '<' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    push!(Tok::Le, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Lt, tl, tc);
                    i += 1;
                    col += 1;
                }
            }
            '>' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    push!(Tok::Ge, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Gt, tl, tc);
                    i += 1;
                    col += 1;
                }
            }
            '+' => {
                push!(Tok::Plus, tl, tc);
                i += 1;
                col += 1;
            }
            '-' => {
                push!(Tok::Minus, tl, tc);
                i += 1;
                col += 1;
            }
            '*' => {
                push!(Tok::Star, tl, tc);
                i += 1;
                col += 1;
            }
            '/' => {
                push!(Tok::Slash, tl, tc);
                i += 1;
                col += 1;
            }
            '%' => {
                push!(Tok::Percent, tl, tc);
                i += 1;
                col += 1;
            }
            '&' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '&' {
                    push!(Tok::AndAnd, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    return Err(err(tl, tc, "expected '&&'".to_string()));
                }
            }
            '|' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '|' {
                    push!(Tok::OrOr, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    return Err(err(tl, tc, "expected '||'".to_string()));
                }
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                col += 1;
                loop {
                    if i >= bytes.len() {
                        return Err(err(tl, tc, "unterminated string literal".to_string()));
                    }
                    match bytes[i] {
                        '"' => {
                            i += 1;
                            col += 1;
                            break;
                        }
                        '\\' => {
                            if i + 1 >= bytes.len() {
                                return Err(err(tl, tc, "unterminated escape".to_string()));
                            }
                            let e = bytes[i + 1];
                            s.push(match e {
                                'n' => '\n',
                                't' => '\t',
                                'r' => '\r',
                                '\\' => '\\',
                                '"' => '"',
                                '0' => '\0',
                                other => {
                                    return Err(err(
                                        line,
                                        col,
                                        format!("unknown escape '\\{other}'"),
                                    ))
                                }
                            });
                            i += 2;
                            col += 2;
                        }
                        '\n' => {
                            return Err(err(tl, tc, "newline inside string literal".to_string()))
                        }
                        other => {
                            s.push(other);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                push!(Tok::Str(s), tl, tc);
            }
            d if d.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                // a '.' starts a float only when followed by a digit ("0..n" is a range)
                let is_float = i + 1 < bytes.len() && bytes[i] == '.' && bytes[i + 1].is_ascii_digit();
                if is_float {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let text: String = bytes[start..i].iter().collect();
                    let v: f64 = text
                        .parse()
                        .map_err(|_| err(tl, tc, format!("bad float literal '{text}'")))?;
                    col += (i - start) as u32;
                    push!(Tok::Float(v), tl, tc);
                } else {
                    let text: String = bytes[start..i].iter().collect();
                    let v: i64 = text
                        .parse()
                        .map_err(|_| err(tl, tc, format!("integer literal out of range '{text}'")))?;
                    col += (i - start) as u32;
                    push!(Tok::Int(v), tl, tc);
                }
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                col += (i - start) as u32;
                let tok = match text.as_str() {
                    "class" => Tok::Class,
                    "pub" => Tok::Pub,
                    "fn" => Tok::Fn,
                    "let" => Tok::Let,
                    "if" => Tok::If,
                    "else" => Tok::Else,
                    "for" => Tok::For,
                    "while" => Tok::While,
                    "in" => Tok::In,
                    "return" => Tok::Return,
                    "throw" => Tok::Throw,
                    "new" => Tok::New,
                    "this" => Tok::This,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "null" => Tok::Null,
                    "test" => Tok::Test,
                    "import" => Tok::Import,
                    "observe" => Tok::Observe,
                    _ => Tok::Ident(text),
                };
                push!(tok, tl, tc);
            }
            other => {
                return Err(err(tl, tc, format!("unexpected character '{other}'")));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_is_not_a_float() {
        let toks = lex("t", "0..5").unwrap();
        assert_eq!(toks[0].tok, Tok::Int(0));
        assert_eq!(toks[1].tok, Tok::DotDot);
        assert_eq!(toks[2].tok, Tok::Int(5));
    }

    #[test]
    fn float_needs_digits_on_both_sides() {
        let toks = lex("t", "3.25").unwrap();
        assert_eq!(toks[0].tok, Tok::Float(3.25));
    }

    #[test]
    fn string_escapes_round_trip() {
        let toks = lex("t", r#""a\n\t\"\\b""#).unwrap();
        assert_eq!(toks[0].tok, Tok::Str("a\n\t\"\\b".to_string()));
    }

    #[test]
    fn comments_are_skipped() {
        let toks = lex("t", "let // trailing\nx").unwrap();
        assert_eq!(toks.len(), 2);
    }
}
