use super::{Op, Predicate, QueryError, QueryErrorKind, QueryExpr};
use crate::report::FeatureValue;
use crate::template::{normalize_candidate, Template};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    And,
    Or,
    Not,
    Op(Op),
    Str(String),
    Num(f64),
    Word(String),
}

fn err(kind: QueryErrorKind, offset: usize) -> QueryError {
    QueryError { kind, offset }
}

fn syntax(msg: impl Into<String>, offset: usize) -> QueryError {
    err(QueryErrorKind::Syntax(msg.into()), offset)
}

fn word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '/' | '.')
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let two = |a: char, b: char| c == a && chars.get(i + 1) == Some(&b);
        let (tok, len) = match c {
            _ if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            _ if two('!', '=') => (Tok::Op(Op::Ne), 2),
            _ if two('<', '=') => (Tok::Op(Op::Le), 2),
            _ if two('>', '=') => (Tok::Op(Op::Ge), 2),
            '=' => (Tok::Op(Op::Eq), 1),
            '≠' => (Tok::Op(Op::Ne), 1),
            '≤' => (Tok::Op(Op::Le), 1),
            '≥' => (Tok::Op(Op::Ge), 1),
            '<' => (Tok::Op(Op::Lt), 1),
            '>' => (Tok::Op(Op::Gt), 1),
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None => return Err(syntax("unterminated string", start)),
                        Some('"') => break,
                        Some('\\') => {
                            match chars.get(j + 1) {
                                Some(e @ ('"' | '\\')) => s.push(*e),
                                _ => return Err(syntax("invalid escape", j)),
                            }
                            j += 2;
                        }
                        Some(ch) => {
                            s.push(*ch);
                            j += 1;
                        }
                    }
                }
                (Tok::Str(s), j + 1 - i)
            }
            _ if word_char(c) => {
                let mut j = i;
                while j < chars.len() && word_char(chars[j]) {
                    j += 1;
                }
                let w: String = chars[i..j].iter().collect();
                let tok = match w.to_ascii_lowercase().as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    "is-null" => Tok::Op(Op::IsNull),
                    "not-null" => Tok::Op(Op::NotNull),
                    _ => match w.parse::<f64>() {
                        Ok(v) if c.is_ascii_digit() && v.is_finite() => Tok::Num(v),
                        _ => Tok::Word(w),
                    },
                };
                (tok, j - i)
            }
            other => return Err(syntax(format!("unexpected character {other:?}"), start)),
        };
        out.push((tok, start));
        i += len;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    t: &'a Template,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn or(&mut self) -> Result<QueryExpr, QueryError> {
        let mut left = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            left = QueryExpr::or(left, self.and()?);
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<QueryExpr, QueryError> {
        let mut left = self.not()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            left = QueryExpr::and(left, self.not()?);
        }
        Ok(left)
    }

    fn not(&mut self) -> Result<QueryExpr, QueryError> {
        if self.peek() == Some(&Tok::Not) {
            self.pos += 1;
            return Ok(QueryExpr::not(self.not()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<QueryExpr, QueryError> {
        let at = self.offset();
        match self.bump() {
            Some((Tok::LParen, _)) => {
                let inner = self.or()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    None => Err(err(QueryErrorKind::UnbalancedParen, at)),
                    Some(_) => Err(syntax("expected `)`", self.offset())),
                }
            }
            Some((Tok::RParen, o)) => Err(err(QueryErrorKind::UnbalancedParen, o)),
            Some((Tok::Str(s), o)) => self.bare_value(&s, o),
            Some((Tok::Word(w), o)) => {
                if let Some(Tok::Op(_)) = self.peek() {
                    self.predicate(&w, o)
                } else if self.t.feature_by_name(&w).is_some() {
                    Err(syntax(
                        format!("expected an operator after {w:?}"),
                        self.offset(),
                    ))
                } else {
                    self.bare_value(&w, o)
                }
            }
            Some((tok, o)) => Err(syntax(format!("unexpected {}", describe(&tok)), o)),
            None => Err(syntax("unexpected end of query", at)),
        }
    }

    fn bare_value(&self, raw: &str, at: usize) -> Result<QueryExpr, QueryError> {
        let v = normalize_candidate(raw);
        if v == "null" {
            return Err(err(QueryErrorKind::NullLiteral, at));
        }
        let owners: Vec<&str> = self
            .t
            .features()
            .filter(|(_, f)| f.candidates.contains_text(&v))
            .map(|(_, f)| f.name.as_str())
            .collect();
        match owners.as_slice() {
            [one] => Ok(QueryExpr::Pred(Predicate::new(
                *one,
                Op::Eq,
                Some(FeatureValue::Text(v)),
            ))),
            [] => Err(err(QueryErrorKind::UnknownValue(v), at)),
            many => Err(err(
                QueryErrorKind::AmbiguousValue {
                    value: v,
                    features: many.join(", "),
                },
                at,
            )),
        }
    }

    fn predicate(&mut self, feature: &str, at: usize) -> Result<QueryExpr, QueryError> {
        let (_, spec) = self
            .t
            .feature_by_name(feature)
            .ok_or_else(|| err(QueryErrorKind::UnknownFeature(feature.to_string()), at))?;
        let (op, op_at) = match self.bump() {
            Some((Tok::Op(op), o)) => (op, o),
            _ => unreachable!("caller checked for an operator"),
        };
        if matches!(op, Op::IsNull | Op::NotNull) {
            return Ok(QueryExpr::Pred(Predicate::new(feature, op, None)));
        }
        if op.is_ordering() && spec.candidates.is_enumerated() {
            return Err(err(
                QueryErrorKind::OrderingOnEnumerated {
                    feature: feature.to_string(),
                    op: op.as_str(),
                },
                op_at,
            ));
        }
        let lit_at = self.offset();
        let literal = match self.bump() {
            Some((Tok::Str(s), _)) => normalize_candidate(&s),
            Some((Tok::Word(w), _)) => w,
            Some((Tok::Num(n), _)) if spec.candidates.is_numeric() => {
                return Ok(QueryExpr::Pred(Predicate::new(
                    feature,
                    op,
                    Some(FeatureValue::Number(n)),
                )))
            }
            // Enumerated candidates may look numeric, e.g. Lung-RADS `2`.
            Some((Tok::Num(n), _)) => FeatureValue::Number(n).to_string(),
            Some((tok, o)) => {
                return Err(syntax(
                    format!("expected a value, found {}", describe(&tok)),
                    o,
                ))
            }
            None => return Err(syntax("expected a value", lit_at)),
        };
        if literal == "null" {
            return Err(err(QueryErrorKind::NullLiteral, lit_at));
        }
        if spec.candidates.is_numeric() {
            return Err(err(
                QueryErrorKind::ExpectedNumber {
                    feature: feature.to_string(),
                },
                lit_at,
            ));
        }
        if !spec.candidates.contains_text(&literal) {
            return Err(err(
                QueryErrorKind::NotACandidate {
                    feature: feature.to_string(),
                    value: literal,
                },
                lit_at,
            ));
        }
        Ok(QueryExpr::Pred(Predicate::new(
            feature,
            op,
            Some(FeatureValue::Text(literal)),
        )))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::And => "AND".into(),
        Tok::Or => "OR".into(),
        Tok::Not => "NOT".into(),
        Tok::Op(op) => format!("`{}`", op.as_str()),
        Tok::Str(s) => format!("{s:?}"),
        Tok::Num(n) => n.to_string(),
        Tok::Word(w) => format!("{w:?}"),
    }
}

/// Parses and validates `text` against the features of `t`.
pub fn parse_query(text: &str, t: &Template) -> Result<QueryExpr, QueryError> {
    let toks = lex(text)?;
    let end = text.chars().count();
    let mut p = Parser {
        toks,
        pos: 0,
        end,
        t,
    };
    if p.toks.is_empty() {
        return Err(syntax("empty query", 0));
    }
    let e = p.or()?;
    match p.bump() {
        None => Ok(e),
        Some((Tok::RParen, o)) => Err(err(QueryErrorKind::UnbalancedParen, o)),
        Some((tok, o)) => Err(syntax(format!("unexpected {}", describe(&tok)), o)),
    }
}
