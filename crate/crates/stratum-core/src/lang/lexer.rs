//! Tokenizer for `.stratum` sources. Whitespace is insignificant and `#`
//! starts a comment running to end of line.

use super::ast::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Keywords and property keys both lex as identifiers; the parser decides.
    Ident(String),
    /// Numeric literal. `integral` is true when the literal has no fraction
    /// part, which integer-valued properties require.
    Number { value: f64, integral: bool },
    LBrace,
    RBrace,
    Colon,
    Arrow,
    At,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: u32,
    pub column: u32,
}

impl Token {
    pub fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.column, message)
    }
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = source.chars().peekable();
    let mut line: u32 = 1;
    let mut column: u32 = 1;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }

    loop {
        let (tl, tc) = (line, column);
        let c = match chars.peek().copied() {
            Some(c) => c,
            None => {
                tokens.push(Token {
                    kind: TokenKind::Eof,
                    line: tl,
                    column: tc,
                });
                return Ok(tokens);
            }
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '{' => {
                bump!();
                tokens.push(Token {
                    kind: TokenKind::LBrace,
                    line: tl,
                    column: tc,
                });
            }
            '}' => {
                bump!();
                tokens.push(Token {
                    kind: TokenKind::RBrace,
                    line: tl,
                    column: tc,
                });
            }
            ':' => {
                bump!();
                tokens.push(Token {
                    kind: TokenKind::Colon,
                    line: tl,
                    column: tc,
                });
            }
            '@' => {
                bump!();
                tokens.push(Token {
                    kind: TokenKind::At,
                    line: tl,
                    column: tc,
                });
            }
            '-' => {
                bump!();
                match chars.peek() {
                    Some('>') => {
                        bump!();
                        tokens.push(Token {
                            kind: TokenKind::Arrow,
                            line: tl,
                            column: tc,
                        });
                    }
                    Some(d) if d.is_ascii_digit() => {
                        let (value, integral) = lex_number(&mut chars, &mut line, &mut column, tl, tc)?;
                        tokens.push(Token {
                            kind: TokenKind::Number {
                                value: -value,
                                integral,
                            },
                            line: tl,
                            column: tc,
                        });
                    }
                    _ => {
                        return Err(ParseError::new(tl, tc, "expected '->' or a numeric literal after '-'"));
                    }
                }
            }
            c if c.is_ascii_digit() => {
                let (value, integral) = lex_number(&mut chars, &mut line, &mut column, tl, tc)?;
                tokens.push(Token {
                    kind: TokenKind::Number { value, integral },
                    line: tl,
                    column: tc,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(ident),
                    line: tl,
                    column: tc,
                });
            }
            other => {
                return Err(ParseError::new(tl, tc, format!("unexpected character '{other}'")));
            }
        }
    }

    fn lex_number(
        chars: &mut std::iter::Peekable<std::str::Chars<'_>>,
        line: &mut u32,
        column: &mut u32,
        tl: u32,
        tc: u32,
    ) -> Result<(f64, bool), ParseError> {
        let mut text = String::new();
        let mut integral = true;
        while let Some(&c) = chars.peek() {
            if c.is_ascii_digit() {
                text.push(c);
                chars.next();
                *column += 1;
            } else if c == '.' && integral {
                integral = false;
                text.push(c);
                chars.next();
                *column += 1;
                if !chars.peek().is_some_and(|d| d.is_ascii_digit()) {
                    return Err(ParseError::new(*line, *column, "expected digit after decimal point"));
                }
            } else {
                break;
            }
        }
        let value: f64 = text
            .parse()
            .map_err(|_| ParseError::new(tl, tc, format!("invalid numeric literal '{text}'")))?;
        Ok((value, integral))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn lexes_structure_tokens() {
        assert_eq!(
            kinds("pipeline p { }"),
            vec![
                TokenKind::Ident("pipeline".into()),
                TokenKind::Ident("p".into()),
                TokenKind::LBrace,
                TokenKind::RBrace,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn lexes_arrow_and_negative_number() {
        assert_eq!(
            kinds("a -> b -1 -2.5"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Arrow,
                TokenKind::Ident("b".into()),
                TokenKind::Number { value: -1.0, integral: true },
                TokenKind::Number { value: -2.5, integral: false },
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn comments_run_to_end_of_line() {
        assert_eq!(
            kinds("a # everything { here is ignored\nb"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Ident("b".into()),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn tracks_line_and_column() {
        let toks = tokenize("pipeline p {\n  cpu: -1\n}").unwrap();
        let neg = toks
            .iter()
            .find(|t| matches!(t.kind, TokenKind::Number { .. }))
            .unwrap();
        assert_eq!((neg.line, neg.column), (2, 8));
    }

    #[test]
    fn rejects_stray_characters() {
        let err = tokenize("pipeline p { % }").unwrap_err();
        assert_eq!((err.line, err.column), (1, 14));
    }

    #[test]
    fn rejects_trailing_decimal_point() {
        assert!(tokenize("cpu: 1.").is_err());
    }
}
