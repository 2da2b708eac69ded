//! Text front end for operator expressions and pipeline grammars.
//!
//! Expressions combine operators with `>>` (pipe), `&` (both) and `|`
//! (choice). `>>` binds tightest and `|` loosest, all three associate to
//! the left, and parentheses override:
//!
//! ```text
//! a >> b & c | d   ==   ((a >> b) & c) | d
//! ```
//!
//! `Name` refers to a registered operator in the planned state and
//! `Name(k=v, ...)` configures it. Literals are numbers, `true`, `false`,
//! `null` and double-quoted strings; an operator-valued hyperparameter is
//! written as an operator expression, as in `BoostedEnsemble(base_estimator=PrunedTree)`.
//! `#` starts a comment that runs to the end of the line.
//!
//! Grammar files hold rules `name := expr ;`. A lowercase-initial name that
//! is not a registered operator refers to a rule.

mod lexer;
mod print;

use indexmap::IndexMap;
use thiserror::Error;

use crate::ops::{both, choose, pipe, OpError, Operator, Registry};
use crate::schema::{Config, ConfigValue, Scalar};
use lexer::{lex, Tok, Token};

pub use print::pretty_print;

#[derive(Debug, Error)]
pub enum DslError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unknown operator `{name}` at line {line}, column {col}")]
    UnknownOperator {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("invalid hyperparameters: {0}")]
    ValidationFailed(#[from] OpError),
    #[error("rule body refers to undefined nonterminal `{0}`")]
    UndefinedNonterminal(String),
    #[error("grammar has no `{0}` rule")]
    MissingStart(String),
    #[error("rule `{0}` is defined twice")]
    DuplicateRule(String),
    #[error("`{0}` names both a rule and a registered operator")]
    AmbiguousName(String),
    #[error("operator graph is not series-parallel and has no expression form")]
    NotExpressible,
}

/// An argument value in a call.
#[derive(Clone, Debug, PartialEq)]
pub enum Arg {
    Literal(Scalar),
    Expr(ExprAst),
}

/// Syntax tree of an expression. Names are resolved after parsing, so `Ref`
/// covers both operators and nonterminals.
#[derive(Clone, Debug, PartialEq)]
pub enum ExprAst {
    Ref {
        name: String,
        line: usize,
        col: usize,
    },
    Call {
        name: String,
        args: Vec<(String, Arg)>,
        line: usize,
        col: usize,
    },
    Pipe(Box<ExprAst>, Box<ExprAst>),
    Both(Box<ExprAst>, Box<ExprAst>),
    Choose(Box<ExprAst>, Box<ExprAst>),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, token: &Token, message: impl Into<String>) -> DslError {
        DslError::Syntax {
            line: token.line,
            col: token.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, DslError> {
        let t = self.next();
        if t.tok == tok {
            Ok(t)
        } else {
            Err(self.error(&t, format!("expected {what}, found {}", t.tok)))
        }
    }

    fn choice(&mut self) -> Result<ExprAst, DslError> {
        let mut left = self.both()?;
        while self.peek().tok == Tok::Bar {
            self.next();
            left = ExprAst::Choose(Box::new(left), Box::new(self.both()?));
        }
        Ok(left)
    }

    fn both(&mut self) -> Result<ExprAst, DslError> {
        let mut left = self.pipe()?;
        while self.peek().tok == Tok::Amp {
            self.next();
            left = ExprAst::Both(Box::new(left), Box::new(self.pipe()?));
        }
        Ok(left)
    }

    fn pipe(&mut self) -> Result<ExprAst, DslError> {
        let mut left = self.atom()?;
        while self.peek().tok == Tok::Pipe {
            self.next();
            left = ExprAst::Pipe(Box::new(left), Box::new(self.atom()?));
        }
        Ok(left)
    }

    fn atom(&mut self) -> Result<ExprAst, DslError> {
        let t = self.next();
        match &t.tok {
            Tok::LParen => {
                let inner = self.choice()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let name = name.clone();
                if self.peek().tok != Tok::LParen {
                    return Ok(ExprAst::Ref {
                        name,
                        line: t.line,
                        col: t.col,
                    });
                }
                self.next();
                let mut args = Vec::new();
                if self.peek().tok != Tok::RParen {
                    loop {
                        let key = self.next();
                        let Tok::Ident(k) = &key.tok else {
                            return Err(self.error(
                                &key,
                                format!("expected a hyperparameter name, found {}", key.tok),
                            ));
                        };
                        if args.iter().any(|(existing, _)| existing == k) {
                            return Err(
                                self.error(&key, format!("hyperparameter `{k}` given twice"))
                            );
                        }
                        let k = k.clone();
                        self.expect(Tok::Eq, "`=`")?;
                        args.push((k, self.arg()?));
                        if self.peek().tok == Tok::Comma {
                            self.next();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(ExprAst::Call {
                    name,
                    args,
                    line: t.line,
                    col: t.col,
                })
            }
            other => Err(self.error(&t, format!("expected an operator, found {other}"))),
        }
    }

    fn arg(&mut self) -> Result<Arg, DslError> {
        let t = self.peek().clone();
        let literal = match &t.tok {
            Tok::Number(x) => Some(Scalar::Number(*x)),
            Tok::Str(s) => Some(Scalar::Str(s.clone())),
            Tok::Ident(w) if w == "true" => Some(Scalar::Bool(true)),
            Tok::Ident(w) if w == "false" => Some(Scalar::Bool(false)),
            Tok::Ident(w) if w == "null" => Some(Scalar::Null),
            _ => None,
        };
        match literal {
            Some(s) => {
                self.next();
                Ok(Arg::Literal(s))
            }
            None => Ok(Arg::Expr(self.choice()?)),
        }
    }
}

/// Parses an expression without resolving names.
pub fn parse_ast(text: &str) -> Result<ExprAst, DslError> {
    let mut parser = Parser {
        tokens: lex(text)?,
        pos: 0,
    };
    let ast = parser.choice()?;
    let end = parser.next();
    if end.tok != Tok::Eof {
        return Err(parser.error(&end, format!("unexpected {}", end.tok)));
    }
    Ok(ast)
}

fn lower_call(
    name: &str,
    args: Option<&[(String, Arg)]>,
    line: usize,
    col: usize,
    registry: &Registry,
) -> Result<Operator, DslError> {
    let op = registry
        .get(name)
        .ok_or_else(|| DslError::UnknownOperator {
            name: name.to_string(),
            line,
            col,
        })?;
    let Some(args) = args else {
        return Ok(op.clone());
    };
    let mut config = Config::new();
    for (k, v) in args {
        let value = match v {
            Arg::Literal(s) => ConfigValue::Scalar(s.clone()),
            Arg::Expr(e) => ConfigValue::Operator(Box::new(lower(e, registry)?)),
        };
        config.insert(k.clone(), value);
    }
    Ok(op.configure(&config)?)
}

/// Resolves every name through the registry.
pub fn lower(ast: &ExprAst, registry: &Registry) -> Result<Operator, DslError> {
    match ast {
        ExprAst::Ref { name, line, col } => lower_call(name, None, *line, *col, registry),
        ExprAst::Call {
            name,
            args,
            line,
            col,
        } => lower_call(name, Some(args), *line, *col, registry),
        ExprAst::Pipe(a, b) => Ok(pipe(&lower(a, registry)?, &lower(b, registry)?)),
        ExprAst::Both(a, b) => Ok(both(&lower(a, registry)?, &lower(b, registry)?)),
        ExprAst::Choose(a, b) => Ok(choose(vec![lower(a, registry)?, lower(b, registry)?])?),
    }
}

/// Parses an operator expression.
pub fn parse_expr(text: &str, registry: &Registry) -> Result<Operator, DslError> {
    lower(&parse_ast(text)?, registry)
}

/// A grammar rule body with operators resolved and rule references kept.
#[derive(Clone, Debug, PartialEq)]
pub enum GrammarExpr {
    Op(Operator),
    Nonterminal(String),
    Pipe(Box<GrammarExpr>, Box<GrammarExpr>),
    Both(Box<GrammarExpr>, Box<GrammarExpr>),
    /// Alternatives, flattened.
    Choose(Vec<GrammarExpr>),
}

impl GrammarExpr {
    pub fn contains_nonterminal(&self) -> bool {
        match self {
            GrammarExpr::Op(_) => false,
            GrammarExpr::Nonterminal(_) => true,
            GrammarExpr::Pipe(a, b) | GrammarExpr::Both(a, b) => {
                a.contains_nonterminal() || b.contains_nonterminal()
            }
            GrammarExpr::Choose(alts) => alts.iter().any(GrammarExpr::contains_nonterminal),
        }
    }

    fn nonterminals<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            GrammarExpr::Op(_) => {}
            GrammarExpr::Nonterminal(n) => out.push(n),
            GrammarExpr::Pipe(a, b) | GrammarExpr::Both(a, b) => {
                a.nonterminals(out);
                b.nonterminals(out);
            }
            GrammarExpr::Choose(alts) => alts.iter().for_each(|a| a.nonterminals(out)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrammarFile {
    pub rules: IndexMap<String, GrammarExpr>,
    pub start: String,
}

fn is_nonterminal_name(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_ascii_lowercase())
}

fn lower_grammar(ast: &ExprAst, registry: &Registry) -> Result<GrammarExpr, DslError> {
    Ok(match ast {
        ExprAst::Ref { name, .. } if !registry.contains(name) && is_nonterminal_name(name) => {
            GrammarExpr::Nonterminal(name.clone())
        }
        ExprAst::Ref { .. } | ExprAst::Call { .. } => GrammarExpr::Op(lower(ast, registry)?),
        ExprAst::Pipe(a, b) => GrammarExpr::Pipe(
            Box::new(lower_grammar(a, registry)?),
            Box::new(lower_grammar(b, registry)?),
        ),
        ExprAst::Both(a, b) => GrammarExpr::Both(
            Box::new(lower_grammar(a, registry)?),
            Box::new(lower_grammar(b, registry)?),
        ),
        ExprAst::Choose(a, b) => {
            let mut alts = Vec::new();
            for side in [a, b] {
                match lower_grammar(side, registry)? {
                    GrammarExpr::Choose(inner) => alts.extend(inner),
                    other => alts.push(other),
                }
            }
            GrammarExpr::Choose(alts)
        }
    })
}

/// Parses `name := expr ;` rules. The start rule is `start`.
pub fn parse_grammar(text: &str, registry: &Registry) -> Result<GrammarFile, DslError> {
    let mut parser = Parser {
        tokens: lex(text)?,
        pos: 0,
    };
    let mut rules = IndexMap::new();
    while parser.peek().tok != Tok::Eof {
        let head = parser.next();
        let Tok::Ident(name) = &head.tok else {
            return Err(parser.error(&head, format!("expected a rule name, found {}", head.tok)));
        };
        if !is_nonterminal_name(name) {
            return Err(parser.error(
                &head,
                format!("rule name `{name}` must start with a lowercase letter"),
            ));
        }
        if registry.contains(name) {
            return Err(DslError::AmbiguousName(name.clone()));
        }
        parser.expect(Tok::Define, "`:=`")?;
        let body = parser.choice()?;
        parser.expect(Tok::Semi, "`;`")?;
        if rules
            .insert(name.clone(), lower_grammar(&body, registry)?)
            .is_some()
        {
            return Err(DslError::DuplicateRule(name.clone()));
        }
    }
    let start = "start".to_string();
    if !rules.contains_key(&start) {
        return Err(DslError::MissingStart(start));
    }
    for body in rules.values() {
        let mut refs = Vec::new();
        body.nonterminals(&mut refs);
        if let Some(missing) = refs.into_iter().find(|r| !rules.contains_key(*r)) {
            return Err(DslError::UndefinedNonterminal(missing.to_string()));
        }
    }
    Ok(GrammarFile { rules, start })
}
