use super::Expr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown operator `{op}` at byte {pos}")]
    UnknownOperator { pos: usize, op: String },
    #[error("malformed variable token `{token}` at byte {pos}")]
    BadVariable { pos: usize, token: String },
    #[error("malformed number `{token}` at byte {pos}")]
    BadNumber { pos: usize, token: String },
    #[error("operator `{op}` at byte {pos} expects {expected} operand(s), got {got}")]
    Arity {
        pos: usize,
        op: String,
        expected: &'static str,
        got: usize,
    },
    #[error("exponent at byte {pos} must be an integer literal")]
    BadExponent { pos: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(text: &str) -> Vec<(usize, Token<'_>)> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((i, Token::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Token::Close));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'(' && bytes[i] != b')' {
                    i += 1;
                }
                out.push((start, Token::Atom(&text[start..i])));
            }
        }
    }
    out
}

/// Parses a prefix s-expression.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(text);
    let mut pos = 0;
    let e = parse_at(&tokens, &mut pos, text.len())?;
    if let Some((at, _)) = tokens.get(pos) {
        return Err(ParseError::Syntax {
            pos: *at,
            message: "trailing input after expression".into(),
        });
    }
    Ok(e)
}

fn parse_at(tokens: &[(usize, Token<'_>)], pos: &mut usize, end: usize) -> Result<Expr, ParseError> {
    let Some((at, tok)) = tokens.get(*pos) else {
        return Err(ParseError::Syntax {
            pos: end,
            message: "unexpected end of input".into(),
        });
    };
    let at = *at;
    *pos += 1;
    match tok {
        Token::Close => Err(ParseError::Syntax {
            pos: at,
            message: "unexpected `)`".into(),
        }),
        Token::Atom(a) => atom(a, at),
        Token::Open => {
            let (op_at, op) = match tokens.get(*pos) {
                Some((p, Token::Atom(a))) => (*p, *a),
                Some((p, _)) => {
                    return Err(ParseError::Syntax {
                        pos: *p,
                        message: "expected operator after `(`".into(),
                    })
                }
                None => {
                    return Err(ParseError::Syntax {
                        pos: end,
                        message: "unexpected end of input".into(),
                    })
                }
            };
            *pos += 1;
            if !matches!(op, "+" | "-" | "*" | "/" | "^" | "exp" | "log" | "sqrt") {
                return Err(ParseError::UnknownOperator {
                    pos: op_at,
                    op: op.to_string(),
                });
            }
            let mut args = Vec::new();
            let mut exponent_at = None;
            loop {
                match tokens.get(*pos) {
                    Some((_, Token::Close)) => {
                        *pos += 1;
                        break;
                    }
                    None => {
                        return Err(ParseError::Syntax {
                            pos: end,
                            message: format!("unclosed `(` opened at byte {at}"),
                        })
                    }
                    Some((p, _)) => {
                        if op == "^" && args.len() == 1 {
                            exponent_at = Some(*p);
                        }
                        args.push(parse_at(tokens, pos, end)?);
                    }
                }
            }
            build(op, op_at, args, exponent_at)
        }
    }
}

fn atom(a: &str, at: usize) -> Result<Expr, ParseError> {
    if let Some(rest) = a.strip_prefix('x') {
        if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ParseError::BadVariable {
                pos: at,
                token: a.to_string(),
            });
        }
        return rest.parse().map(Expr::Var).map_err(|_| ParseError::BadVariable {
            pos: at,
            token: a.to_string(),
        });
    }
    let numeric = a
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
    match a.parse::<f64>() {
        Ok(v) if numeric && v.is_finite() => Ok(Expr::Const(v)),
        _ if a.bytes().next().is_some_and(|b| b.is_ascii_alphabetic()) => Err(ParseError::BadVariable {
            pos: at,
            token: a.to_string(),
        }),
        _ => Err(ParseError::BadNumber {
            pos: at,
            token: a.to_string(),
        }),
    }
}

fn build(op: &str, at: usize, mut args: Vec<Expr>, exponent_at: Option<usize>) -> Result<Expr, ParseError> {
    let arity = |expected: &'static str, got: usize| ParseError::Arity {
        pos: at,
        op: op.to_string(),
        expected,
        got,
    };
    let n = args.len();
    match op {
        "+" | "*" => {
            if n == 0 {
                return Err(arity("at least 1", n));
            }
            Ok(if op == "+" {
                Expr::Sum(args)
            } else {
                Expr::Product(args)
            })
        }
        "-" | "/" | "^" => {
            if n != 2 {
                return Err(arity("2", n));
            }
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            Ok(match op {
                "-" => Expr::diff(a, b),
                "/" => Expr::quot(a, b),
                _ => {
                    let pos = exponent_at.unwrap_or(at);
                    let k = match b {
                        Expr::Const(c) if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 => c as i32,
                        _ => return Err(ParseError::BadExponent { pos }),
                    };
                    Expr::pow(a, k)
                }
            })
        }
        _ => {
            if n != 1 {
                return Err(arity("1", n));
            }
            let a = args.pop().unwrap();
            Ok(match op {
                "exp" => Expr::exp(a),
                "log" => Expr::log(a),
                _ => Expr::sqrt(a),
            })
        }
    }
}
