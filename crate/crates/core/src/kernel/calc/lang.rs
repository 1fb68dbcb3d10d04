//! The calc expression language.
//!
//! Statements are separated by newlines or `;`. A statement is either
//! `name = expr` or an expression; `#` starts a comment. Values are numbers,
//! strings and lists. Side effects (printing, figures, tables) go through an
//! [`Effects`] sink so the kernel can stream them in order.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Nil,
    Num(f64),
    Str(String),
    List(Vec<Value>),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Nil => "nil",
            Value::Num(_) => "number",
            Value::Str(_) => "string",
            Value::List(_) => "list",
        }
    }

    fn repr(&self) -> String {
        match self {
            Value::Str(s) => format!("{s:?}"),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nil => f.write_str("nil"),
            Value::Num(n) => f.write_str(&format_number(*n)),
            Value::Str(s) => f.write_str(s),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(&item.repr())?;
                }
                f.write_str("]")
            }
        }
    }
}

/// Integers print without a fraction; other values are rounded to 15
/// significant digits so `0.1 + 0.2` prints as `0.3`.
pub fn format_number(n: f64) -> String {
    if n.is_nan() {
        return "NaN".into();
    }
    if n.is_infinite() {
        return if n > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if n == n.trunc() && n.abs() < 1e15 {
        let int = n as i64;
        return int.to_string();
    }
    let rounded: f64 = format!("{n:.14e}").parse().unwrap_or(n);
    rounded.to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalcError {
    /// Line within the executed code, from 1.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for CalcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Error (line {}): {}", self.line, self.message)
    }
}

/// Receives side effects as they happen.
pub trait Effects {
    fn stdout(&mut self, text: String);
    fn message(&mut self, text: String);
    fn warning(&mut self, text: String);
    fn plot(&mut self, xs: Vec<f64>, ys: Vec<f64>) -> Result<(), String>;
    fn table(&mut self, header: Vec<String>, rows: Vec<Vec<String>>);
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    Op(char),
    Sep,
}

fn lex(code: &str) -> Result<Vec<(Tok, usize)>, CalcError> {
    let mut out = Vec::new();
    let chars: Vec<char> = code.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut depth = 0usize;
    let err = |line, message: String| CalcError { line, message };
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                if depth == 0 {
                    out.push((Tok::Sep, line));
                }
                line += 1;
                i += 1;
            }
            ';' => {
                out.push((Tok::Sep, line));
                i += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            c if c.is_whitespace() => i += 1,
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let n = text
                    .parse::<f64>()
                    .map_err(|_| err(line, format!("invalid number '{text}'")))?;
                out.push((Tok::Num(n), line));
            }
            '"' | '\'' => {
                let quote = c;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None | Some('\n') => return Err(err(line, "unterminated string".into())),
                        Some(&q) if q == quote => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some(&other) => s.push(other),
                                None => return Err(err(line, "unterminated string".into())),
                            }
                            i += 2;
                        }
                        Some(&other) => {
                            s.push(other);
                            i += 1;
                        }
                    }
                }
                out.push((Tok::Str(s), line));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.')
                {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), line));
            }
            '(' | '[' => {
                depth += 1;
                out.push((Tok::Op(c), line));
                i += 1;
            }
            ')' | ']' => {
                depth = depth.saturating_sub(1);
                out.push((Tok::Op(c), line));
                i += 1;
            }
            '+' | '-' | '*' | '/' | '%' | '^' | ',' | '=' => {
                out.push((Tok::Op(c), line));
                i += 1;
            }
            other => return Err(err(line, format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Num(f64),
    Str(String),
    Var(String),
    List(Vec<Expr>),
    Neg(Box<Expr>),
    Binary(char, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Stmt {
    Assign(String, Expr),
    Expr(Expr),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map_or(1, |(_, l)| *l)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, CalcError> {
        Err(CalcError {
            line: self.line(),
            message: message.into(),
        })
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn program(&mut self) -> Result<Vec<(Stmt, usize)>, CalcError> {
        let mut stmts = Vec::new();
        loop {
            while self.peek() == Some(&Tok::Sep) {
                self.pos += 1;
            }
            if self.peek().is_none() {
                return Ok(stmts);
            }
            let line = self.line();
            stmts.push((self.statement()?, line));
            match self.peek() {
                None | Some(Tok::Sep) => {}
                Some(tok) => return self.error(format!("unexpected {}", describe(tok))),
            }
        }
    }

    fn statement(&mut self) -> Result<Stmt, CalcError> {
        if let (Some(Tok::Ident(name)), Some((Tok::Op('='), _))) =
            (self.peek(), self.toks.get(self.pos + 1))
        {
            let name = name.clone();
            self.pos += 2;
            return Ok(Stmt::Assign(name, self.expr()?));
        }
        Ok(Stmt::Expr(self.expr()?))
    }

    fn expr(&mut self) -> Result<Expr, CalcError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op(c @ ('+' | '-'))) => *c,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, CalcError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op(c @ ('*' | '/' | '%'))) => *c,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, CalcError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.primary()?;
        if self.eat('^') {
            return Ok(Expr::Binary('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn list(&mut self, close: char) -> Result<Vec<Expr>, CalcError> {
        let mut items = Vec::new();
        if self.eat(close) {
            return Ok(items);
        }
        loop {
            items.push(self.expr()?);
            if self.eat(close) {
                return Ok(items);
            }
            if !self.eat(',') {
                return self.error(format!("expected ',' or '{close}'"));
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, CalcError> {
        let Some((tok, _)) = self.toks.get(self.pos).cloned() else {
            return self.error("unexpected end of input");
        };
        self.pos += 1;
        match tok {
            Tok::Num(n) => Ok(Expr::Num(n)),
            Tok::Str(s) => Ok(Expr::Str(s)),
            Tok::Ident(name) => {
                if self.eat('(') {
                    Ok(Expr::Call(name, self.list(')')?))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::Op('(') => {
                let inner = self.expr()?;
                if !self.eat(')') {
                    return self.error("expected ')'");
                }
                Ok(inner)
            }
            Tok::Op('[') => Ok(Expr::List(self.list(']')?)),
            other => {
                self.pos -= 1;
                self.error(format!("unexpected {}", describe(&other)))
            }
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(n) => format!("number {}", format_number(*n)),
        Tok::Str(_) => "string".into(),
        Tok::Ident(name) => format!("name '{name}'"),
        Tok::Op(c) => format!("'{c}'"),
        Tok::Sep => "end of statement".into(),
    }
}

fn parse_program(code: &str) -> Result<Vec<(Stmt, usize)>, CalcError> {
    Parser {
        toks: lex(code)?,
        pos: 0,
    }
    .program()
}

const MAX_SEQ: f64 = 1_000_000.0;

/// A variable table plus the evaluator.
#[derive(Debug, Default)]
pub struct Interpreter {
    vars: BTreeMap<String, Value>,
}

impl Interpreter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variables(&self) -> &BTreeMap<String, Value> {
        &self.vars
    }

    /// Runs a chunk. Returns the value of the final statement when it is an
    /// expression. Assignments made before an error are kept.
    pub fn run(&mut self, code: &str, fx: &mut dyn Effects) -> Result<Value, CalcError> {
        let program = parse_program(code)?;
        let mut last = Value::Nil;
        for (stmt, line) in program {
            let at = |message: String| CalcError { line, message };
            last = match stmt {
                Stmt::Assign(name, expr) => {
                    let value = self.eval(&expr, fx).map_err(at)?;
                    self.vars.insert(name, value);
                    Value::Nil
                }
                Stmt::Expr(expr) => self.eval(&expr, fx).map_err(at)?,
            };
        }
        Ok(last)
    }

    /// Evaluates a single expression.
    pub fn eval_expr(&mut self, code: &str, fx: &mut dyn Effects) -> Result<Value, CalcError> {
        let program = parse_program(code)?;
        match program.as_slice() {
            [(Stmt::Expr(expr), line)] => self.eval(expr, fx).map_err(|message| CalcError {
                line: *line,
                message,
            }),
            _ => Err(CalcError {
                line: 1,
                message: "expected a single expression".into(),
            }),
        }
    }

    fn eval(&mut self, expr: &Expr, fx: &mut dyn Effects) -> Result<Value, String> {
        match expr {
            Expr::Num(n) => Ok(Value::Num(*n)),
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Var(name) => self
                .vars
                .get(name)
                .cloned()
                .ok_or_else(|| format!("undefined variable '{name}'")),
            Expr::List(items) => Ok(Value::List(
                items
                    .iter()
                    .map(|e| self.eval(e, fx))
                    .collect::<Result<_, _>>()?,
            )),
            Expr::Neg(inner) => {
                let v = self.eval(inner, fx)?;
                binary('*', &Value::Num(-1.0), &v)
            }
            Expr::Binary(op, lhs, rhs) => {
                let l = self.eval(lhs, fx)?;
                let r = self.eval(rhs, fx)?;
                binary(*op, &l, &r)
            }
            Expr::Call(name, args) => {
                let args: Vec<Value> = args
                    .iter()
                    .map(|e| self.eval(e, fx))
                    .collect::<Result<_, _>>()?;
                call(name, args, fx)
            }
        }
    }
}

fn binary(op: char, l: &Value, r: &Value) -> Result<Value, String> {
    match (l, r) {
        (Value::Num(a), Value::Num(b)) => {
            let (a, b) = (*a, *b);
            let v = match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' | '%' if b == 0.0 => return Err("division by zero".into()),
                '/' => a / b,
                '%' => a.rem_euclid(b),
                '^' => a.powf(b),
                _ => unreachable!("parser only builds known operators"),
            };
            Ok(Value::Num(v))
        }
        (Value::Str(_), _) | (_, Value::Str(_)) if op == '+' => Ok(Value::Str(format!("{l}{r}"))),
        (Value::List(a), Value::List(b)) => {
            if a.len() != b.len() {
                return Err(format!("list lengths differ ({} and {})", a.len(), b.len()));
            }
            Ok(Value::List(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| binary(op, x, y))
                    .collect::<Result<_, _>>()?,
            ))
        }
        (Value::List(a), scalar @ Value::Num(_)) => Ok(Value::List(
            a.iter()
                .map(|x| binary(op, x, scalar))
                .collect::<Result<_, _>>()?,
        )),
        (scalar @ Value::Num(_), Value::List(b)) => Ok(Value::List(
            b.iter()
                .map(|y| binary(op, scalar, y))
                .collect::<Result<_, _>>()?,
        )),
        _ => Err(format!(
            "cannot apply '{op}' to {} and {}",
            l.type_name(),
            r.type_name()
        )),
    }
}

fn joined(args: &[Value]) -> String {
    args.iter()
        .map(Value::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn numbers(name: &str, args: &[Value]) -> Result<Vec<f64>, String> {
    let flat: Vec<&Value> = match args {
        [Value::List(items)] => items.iter().collect(),
        _ => args.iter().collect(),
    };
    flat.into_iter()
        .map(|v| match v {
            Value::Num(n) => Ok(*n),
            other => Err(format!(
                "{name}() expects numbers, got {}",
                other.type_name()
            )),
        })
        .collect()
}

fn one_number(name: &str, args: &[Value]) -> Result<f64, String> {
    match args {
        [Value::Num(n)] => Ok(*n),
        _ => Err(format!("{name}() expects one number")),
    }
}

fn cells(value: &Value) -> Vec<String> {
    match value {
        Value::List(items) => items.iter().map(Value::to_string).collect(),
        other => vec![other.to_string()],
    }
}

fn call(name: &str, args: Vec<Value>, fx: &mut dyn Effects) -> Result<Value, String> {
    match name {
        "print" => {
            fx.stdout(joined(&args));
            Ok(Value::Nil)
        }
        "message" => {
            fx.message(joined(&args));
            Ok(Value::Nil)
        }
        "warn" => {
            fx.warning(joined(&args));
            Ok(Value::Nil)
        }
        "error" => Err(joined(&args)),
        "str" => Ok(Value::Str(joined(&args))),
        "len" => match args.as_slice() {
            [Value::List(items)] => Ok(Value::Num(items.len() as f64)),
            [Value::Str(s)] => Ok(Value::Num(s.chars().count() as f64)),
            _ => Err("len() expects a list or string".into()),
        },
        "sum" => Ok(Value::Num(numbers(name, &args)?.iter().sum())),
        "mean" => {
            let xs = numbers(name, &args)?;
            if xs.is_empty() {
                return Err("mean() of no values".into());
            }
            Ok(Value::Num(xs.iter().sum::<f64>() / xs.len() as f64))
        }
        "min" | "max" => {
            let xs = numbers(name, &args)?;
            let pick = if name == "min" { f64::min } else { f64::max };
            xs.into_iter()
                .reduce(pick)
                .map(Value::Num)
                .ok_or_else(|| format!("{name}() of no values"))
        }
        "sqrt" => {
            let x = one_number(name, &args)?;
            if x < 0.0 {
                return Err("sqrt() of a negative number".into());
            }
            Ok(Value::Num(x.sqrt()))
        }
        "abs" => Ok(Value::Num(one_number(name, &args)?.abs())),
        "floor" => Ok(Value::Num(one_number(name, &args)?.floor())),
        "ceil" => Ok(Value::Num(one_number(name, &args)?.ceil())),
        "round" => match args.as_slice() {
            [Value::Num(x)] => Ok(Value::Num(x.round())),
            [Value::Num(x), Value::Num(digits)] => {
                let scale = 10f64.powi(*digits as i32);
                Ok(Value::Num((x * scale).round() / scale))
            }
            _ => Err("round() expects a number and optional digits".into()),
        },
        "seq" => match args.as_slice() {
            [Value::Num(a), Value::Num(b)] => {
                if (b - a).abs() > MAX_SEQ {
                    return Err("seq() range too long".into());
                }
                let step = if b >= a { 1.0 } else { -1.0 };
                let count = ((b - a) * step).floor() as usize + 1;
                Ok(Value::List(
                    (0..count)
                        .map(|i| Value::Num(a + step * i as f64))
                        .collect(),
                ))
            }
            _ => Err("seq() expects two numbers".into()),
        },
        "plot" => {
            let (xs, ys) = match args.as_slice() {
                [ys] => {
                    let ys = numbers(name, std::slice::from_ref(ys))?;
                    ((1..=ys.len()).map(|i| i as f64).collect(), ys)
                }
                [xs, ys] => (
                    numbers(name, std::slice::from_ref(xs))?,
                    numbers(name, std::slice::from_ref(ys))?,
                ),
                _ => return Err("plot() expects (ys) or (xs, ys)".into()),
            };
            if ys.is_empty() || xs.len() != ys.len() {
                return Err("plot() needs equally long, non-empty xs and ys".into());
            }
            fx.plot(xs, ys)?;
            Ok(Value::Nil)
        }
        "table" => {
            let Some((header, rows)) = args.split_first() else {
                return Err("table() expects a header list".into());
            };
            let header = cells(header);
            let rows: Vec<Vec<String>> = rows.iter().map(cells).collect();
            if let Some(bad) = rows.iter().find(|r| r.len() != header.len()) {
                return Err(format!(
                    "table() row has {} cells, header has {}",
                    bad.len(),
                    header.len()
                ));
            }
            fx.table(header, rows);
            Ok(Value::Nil)
        }
        _ => Err(format!("unknown function '{name}'")),
    }
}
