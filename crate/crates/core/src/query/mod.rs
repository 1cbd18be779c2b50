//! Boolean feature queries over descriptors.
//!
//! ```text
//! query     = or ;
//! or        = and , { "OR" , and } ;
//! and       = not , { "AND" , not } ;
//! not       = "NOT" , not | atom ;
//! atom      = "(" , or , ")" | predicate | value ;
//! predicate = feature , op , literal | feature , ( "is-null" | "not-null" ) ;
//! op        = "=" | "!=" | "≠" | "<" | "<=" | "≤" | ">" | ">=" | "≥" ;
//! literal   = string | number ;
//! value     = string | word ;   (* equality against the one feature owning it *)
//! ```
//!
//! Keywords are case-insensitive. Strings use double quotes with `\"` and
//! `\\` escapes. Report-level features are evaluated on every descriptor of
//! their report. A predicate over a null value is false except `is-null`;
//! `NOT` negates the resulting boolean.

mod exec;
mod parse;
mod random;

use std::fmt;

use thiserror::Error;

use crate::report::FeatureValue;

pub use exec::{
    evaluate, execute, result_stats, Bucket, Distribution, Match, RetrievalResult, Span,
    DEFAULT_DISTRIBUTIONS,
};
pub use parse::parse_query;
pub use random::random_query;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    IsNull,
    NotNull,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::IsNull => "is-null",
            Op::NotNull => "not-null",
        }
    }

    pub fn is_ordering(self) -> bool {
        matches!(self, Op::Lt | Op::Le | Op::Gt | Op::Ge)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub feature: String,
    pub op: Op,
    /// `None` for `is-null` and `not-null`.
    pub literal: Option<FeatureValue>,
}

impl Predicate {
    pub fn new(feature: impl Into<String>, op: Op, literal: Option<FeatureValue>) -> Self {
        Predicate {
            feature: feature.into(),
            op,
            literal,
        }
    }

    /// Two-valued test of one value.
    pub fn test(&self, v: &FeatureValue) -> bool {
        match (self.op, &self.literal) {
            (Op::IsNull, _) => v.is_null(),
            (Op::NotNull, _) => !v.is_null(),
            _ if v.is_null() => false,
            (Op::Eq, Some(l)) => v.matches(l),
            (Op::Ne, Some(l)) => !v.matches(l),
            (op, Some(l)) => match (v.as_number(), l.as_number()) {
                (Some(x), Some(y)) => match op {
                    Op::Lt => x < y,
                    Op::Le => x <= y,
                    Op::Gt => x > y,
                    Op::Ge => x >= y,
                    _ => unreachable!("equality handled above"),
                },
                _ => false,
            },
            (_, None) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryExpr {
    And(Box<QueryExpr>, Box<QueryExpr>),
    Or(Box<QueryExpr>, Box<QueryExpr>),
    Not(Box<QueryExpr>),
    Pred(Predicate),
}

impl QueryExpr {
    pub fn and(a: QueryExpr, b: QueryExpr) -> QueryExpr {
        QueryExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: QueryExpr, b: QueryExpr) -> QueryExpr {
        QueryExpr::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: QueryExpr) -> QueryExpr {
        QueryExpr::Not(Box::new(a))
    }

    /// Predicates reachable without passing through `NOT`.
    pub fn positive_predicates(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a QueryExpr, out: &mut Vec<&'a Predicate>) {
            match e {
                QueryExpr::And(a, b) | QueryExpr::Or(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                QueryExpr::Not(_) => {}
                QueryExpr::Pred(p) => out.push(p),
            }
        }
        walk(self, &mut out);
        out
    }
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.literal {
            None => write!(f, "{} {}", self.feature, self.op.as_str()),
            Some(FeatureValue::Text(s)) => {
                write!(f, "{} {} {}", self.feature, self.op.as_str(), quote(s))
            }
            Some(v) => write!(f, "{} {} {}", self.feature, self.op.as_str(), v),
        }
    }
}

/// Fully parenthesized, so parsing the output gives back the same tree.
impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryExpr::And(a, b) => write!(f, "({a} AND {b})"),
            QueryExpr::Or(a, b) => write!(f, "({a} OR {b})"),
            QueryExpr::Not(a) => write!(f, "NOT {a}"),
            QueryExpr::Pred(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryErrorKind {
    #[error("unbalanced parenthesis")]
    UnbalancedParen,
    #[error("{0}")]
    Syntax(String),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("value {value:?} is a candidate of several features ({features}); name the feature")]
    AmbiguousValue { value: String, features: String },
    #[error("{0:?} is neither a feature nor a candidate value")]
    UnknownValue(String),
    #[error("operator {op} needs a numeric feature, {feature:?} is enumerated")]
    OrderingOnEnumerated { feature: String, op: &'static str },
    #[error("{value:?} is not a candidate of {feature:?}")]
    NotACandidate { feature: String, value: String },
    #[error("{feature:?} is numeric; compare it with a number")]
    ExpectedNumber { feature: String },
    #[error("use `is-null` or `not-null` to test for null")]
    NullLiteral,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct QueryError {
    pub kind: QueryErrorKind,
    /// Character offset into the query text.
    pub offset: usize,
}
