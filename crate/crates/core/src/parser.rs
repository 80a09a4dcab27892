//! Process-text parser.
//!
//! Grammar, loosest-binding first (all binary forms associate left):
//!
//! ```text
//! program  := def* expr? | expr            -- `main` must be defined if no
//! def      := NAME '=' expr                -- trailing expression is given
//! expr     := choice (('||' | '[|' syncs '|]') choice)*
//! choice   := seq (('[]' | '|~|') seq)*
//! seq      := prefix (';' prefix)*
//! prefix   := EVENT '->' prefix
//!           | CHAN '?' VAR '->' prefix | CHAN '??' VAR '->' prefix
//!           | CHAN '!' value '->' prefix
//!           | VAR ':=' value | VAR ':=s' value | VAR ':=r' value
//!           | 'mu' NAME '.' prefix
//!           | atom
//! atom     := 'STOP' | 'SKIP' | 'CHAOS' | NAME | '(' expr ')'
//! syncs    := (name (',' name)*)?          -- event or channel names
//! value    := NUMBER | name
//! ```
//!
//! `#` starts a comment running to end of line. Events may be written with
//! their dotted display names (`c.0`, `ch2.ch1`). Every name is resolved
//! against the universe during the parse; domain mismatches (a value a
//! channel cannot carry, a variable too narrow for an input) are rejected
//! here rather than surfacing as stuck processes later.

use std::collections::BTreeMap;

use crate::ast::{Expr, Proc, Program};
use crate::error::ParseError;
use crate::universe::{ChanRef, RefMask, Universe, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(i64),
    Arrow,    // ->
    Semi,     // ;
    IntCh,    // |~|
    ExtCh,    // []
    ParOp,    // ||
    SyncOpen, // [|
    SyncClose, // |]
    Query,    // ?
    DblQuery, // ??
    Bang,     // !
    Becomes,  // :=
    BecomesS, // :=s
    BecomesR, // :=r
    LParen,
    RParen,
    Dot,
    Comma,
    Eq,
    Eof,
}

impl Tok {
    fn show(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(n) => format!("`{n}`"),
            Tok::Arrow => "`->`".into(),
            Tok::Semi => "`;`".into(),
            Tok::IntCh => "`|~|`".into(),
            Tok::ExtCh => "`[]`".into(),
            Tok::ParOp => "`||`".into(),
            Tok::SyncOpen => "`[|`".into(),
            Tok::SyncClose => "`|]`".into(),
            Tok::Query => "`?`".into(),
            Tok::DblQuery => "`??`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Becomes => "`:=`".into(),
            Tok::BecomesS => "`:=s`".into(),
            Tok::BecomesR => "`:=r`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(src: &str) -> Result<Vec<Lexed>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let (mut line, mut col) = (1usize, 1usize);
    macro_rules! push {
        ($t:expr, $n:expr) => {{
            out.push(Lexed { tok: $t, line, col });
            i += $n;
            col += $n;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '-' if next == Some('>') => push!(Tok::Arrow, 2),
            '-' if next.is_some_and(|c| c.is_ascii_digit()) => {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let n: i64 = text
                    .parse()
                    .map_err(|_| ParseError::new(line, col, format!("number `{text}` out of range")))?;
                out.push(Lexed { tok: Tok::Num(n), line, col });
                col += i - start;
            }
            ';' => push!(Tok::Semi, 1),
            '(' => push!(Tok::LParen, 1),
            ')' => push!(Tok::RParen, 1),
            '.' => push!(Tok::Dot, 1),
            ',' => push!(Tok::Comma, 1),
            '=' => push!(Tok::Eq, 1),
            '!' => push!(Tok::Bang, 1),
            '?' if next == Some('?') => push!(Tok::DblQuery, 2),
            '?' => push!(Tok::Query, 1),
            '|' if next == Some('~') && chars.get(i + 2) == Some(&'|') => push!(Tok::IntCh, 3),
            '|' if next == Some('|') => push!(Tok::ParOp, 2),
            '|' if next == Some(']') => push!(Tok::SyncClose, 2),
            '[' if next == Some(']') => push!(Tok::ExtCh, 2),
            '[' if next == Some('|') => push!(Tok::SyncOpen, 2),
            ':' if next == Some('=') => {
                // `:=s` / `:=r` only when the letter does not begin an
                // identifier (`x :=skip` assigns the value `skip`).
                let tag = chars.get(i + 2).copied();
                let cont = chars.get(i + 3).copied().is_some_and(ident_char);
                match tag {
                    Some('s') if !cont => push!(Tok::BecomesS, 3),
                    Some('r') if !cont => push!(Tok::BecomesR, 3),
                    _ => push!(Tok::Becomes, 2),
                }
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let n: i64 = text
                    .parse()
                    .map_err(|_| ParseError::new(line, col, format!("number `{text}` out of range")))?;
                out.push(Lexed { tok: Tok::Num(n), line, col });
                col += i - start;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && ident_char(chars[i]) {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Lexed { tok: Tok::Ident(text), line, col });
                col += i - start;
            }
            other => {
                return Err(ParseError::new(line, col, format!("unexpected character `{other}`")));
            }
        }
    }
    out.push(Lexed { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser<'a> {
    u: &'a Universe,
    toks: Vec<Lexed>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }
    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }
    fn here(&self) -> (usize, usize) {
        let l = &self.toks[self.pos];
        (l.line, l.col)
    }
    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::new(line, col, msg)
    }
    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }
    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {}, found {}", t.show(), self.peek().show())))
        }
    }
    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.err(format!("expected {what}, found {}", other.show()))),
        }
    }

    // ---- name resolution ----

    fn lookup_var(&self, name: &str) -> Result<u8, ParseError> {
        self.u
            .var_index(name)
            .map(|v| v as u8)
            .ok_or_else(|| self.err(format!("unknown variable `{name}`")))
    }

    /// A value position: a number, a variable, or a mobile-channel name.
    fn value_expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Lit(Value::Int(n)))
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(v) = self.u.var_index(&name) {
                    Ok(Expr::Var(v as u8))
                } else if let Some(ChanRef::Mobile(m)) = self.u.channel(&name) {
                    Ok(Expr::Lit(Value::Chan(m)))
                } else {
                    Err(self.err(format!("`{name}` is neither a variable nor a mobile channel")))
                }
            }
            other => Err(self.err(format!("expected a value, found {}", other.show()))),
        }
    }

    /// Every value `expr` can produce, for domain checks.
    fn expr_range(&self, e: &Expr) -> Vec<Value> {
        match e {
            Expr::Lit(v) => vec![*v],
            Expr::Var(x) => self.u.var_domain(*x as usize).to_vec(),
        }
    }

    fn check_fits(&self, what: &str, values: &[Value], domain: &[Value], into: &str) -> Result<(), ParseError> {
        for v in values {
            if !domain.contains(v) {
                return Err(self.err(format!(
                    "{what} can be `{}`, which {into} cannot hold",
                    self.u.value_name(v)
                )));
            }
        }
        Ok(())
    }

    // ---- grammar ----

    fn parse_expr(&mut self) -> Result<Proc, ParseError> {
        let mut acc = self.parse_choice()?;
        loop {
            match self.peek() {
                Tok::ParOp => {
                    self.bump();
                    let rhs = self.parse_choice()?;
                    acc = Proc::Par(Box::new(acc), Box::new(rhs), None);
                }
                Tok::SyncOpen => {
                    self.bump();
                    let sync = self.parse_sync_set()?;
                    self.expect(Tok::SyncClose)?;
                    let rhs = self.parse_choice()?;
                    acc = Proc::Par(Box::new(acc), Box::new(rhs), Some(sync));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_sync_set(&mut self) -> Result<RefMask, ParseError> {
        let mut mask: RefMask = 0;
        if *self.peek() == Tok::SyncClose {
            return Ok(mask);
        }
        loop {
            let name = self.sync_name()?;
            mask |= self.resolve_sync_name(&name)?;
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                return Ok(mask);
            }
        }
    }

    /// One entry of a synchronization list, possibly dotted (`c.0`).
    fn sync_name(&mut self) -> Result<String, ParseError> {
        let base = self.ident("an event or channel name")?;
        if *self.peek() == Tok::Dot {
            self.bump();
            let suffix = match self.bump() {
                Tok::Ident(s) => s,
                Tok::Num(n) => n.to_string(),
                other => return Err(self.err(format!("expected a value after `.`, found {}", other.show()))),
            };
            Ok(format!("{base}.{suffix}"))
        } else {
            Ok(base)
        }
    }

    fn resolve_sync_name(&self, name: &str) -> Result<RefMask, ParseError> {
        if let Some(e) = self.u.event_id(name) {
            return Ok(self.u.event_bit(e));
        }
        if let Some(ch) = self.u.channel(name) {
            let mask = match ch {
                ChanRef::Mobile(m) => self.u.mobile_events(m),
                ChanRef::Static(_) => self
                    .u
                    .chan_domain(ch)
                    .iter()
                    .filter_map(|v| self.u.comm_event(ch, v))
                    .fold(0, |acc, e| acc | self.u.event_bit(e)),
            };
            return Ok(mask);
        }
        Err(self.err(format!("unknown event or channel `{name}`")))
    }

    fn parse_choice(&mut self) -> Result<Proc, ParseError> {
        let mut acc = self.parse_seq()?;
        loop {
            match self.peek() {
                Tok::ExtCh => {
                    self.bump();
                    let rhs = self.parse_seq()?;
                    acc = Proc::Ext(Box::new(acc), Box::new(rhs));
                }
                Tok::IntCh => {
                    self.bump();
                    let rhs = self.parse_seq()?;
                    acc = Proc::Int(Box::new(acc), Box::new(rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_seq(&mut self) -> Result<Proc, ParseError> {
        let mut acc = self.parse_prefix()?;
        while *self.peek() == Tok::Semi {
            self.bump();
            let rhs = self.parse_prefix()?;
            acc = Proc::Seq(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn parse_prefix(&mut self) -> Result<Proc, ParseError> {
        let (at_line, at_col) = self.here();
        if let Tok::Ident(name) = self.peek().clone() {
            if name == "mu" {
                self.bump();
                let binder = self.ident("a process name")?;
                self.expect(Tok::Dot)?;
                let body = self.parse_prefix()?;
                return Ok(Proc::Mu(binder, Box::new(body)));
            }
            match self.peek2().clone() {
                Tok::Arrow => {
                    self.bump();
                    self.bump();
                    let e = self.u.event_id(&name).ok_or_else(|| {
                        ParseError::new(at_line, at_col, format!("unknown event `{name}`"))
                    })?;
                    let k = self.parse_prefix()?;
                    return Ok(Proc::Event(e, Box::new(k)));
                }
                Tok::Dot => {
                    // A dotted event prefix: `c.0 -> P`.
                    self.bump();
                    self.bump();
                    let suffix = match self.bump() {
                        Tok::Ident(s) => s,
                        Tok::Num(n) => n.to_string(),
                        other => {
                            return Err(self.err(format!(
                                "expected a value after `.`, found {}",
                                other.show()
                            )))
                        }
                    };
                    let full = format!("{name}.{suffix}");
                    let e = self.u.event_id(&full).ok_or_else(|| {
                        ParseError::new(at_line, at_col, format!("unknown event `{full}`"))
                    })?;
                    self.expect(Tok::Arrow)?;
                    let k = self.parse_prefix()?;
                    return Ok(Proc::Event(e, Box::new(k)));
                }
                Tok::Query => {
                    self.bump();
                    self.bump();
                    return self.parse_input(&name, false);
                }
                Tok::DblQuery => {
                    self.bump();
                    self.bump();
                    return self.parse_input(&name, true);
                }
                Tok::Bang => {
                    self.bump();
                    self.bump();
                    return self.parse_output(&name);
                }
                Tok::Becomes => {
                    self.bump();
                    self.bump();
                    let x = self.lookup_var(&name)?;
                    let e = self.value_expr()?;
                    self.check_fits(
                        "the assigned value",
                        &self.expr_range(&e),
                        self.u.var_domain(x as usize),
                        &format!("`{name}`"),
                    )?;
                    return Ok(Proc::Assign(x, e));
                }
                Tok::BecomesS | Tok::BecomesR => {
                    let recv = *self.peek2() == Tok::BecomesR;
                    self.bump();
                    self.bump();
                    let x = self.lookup_var(&name)?;
                    let e = self.value_expr()?;
                    let range = self.expr_range(&e);
                    for v in &range {
                        if !matches!(v, Value::Chan(_)) {
                            return Err(self.err(format!(
                                "`{}` names no mobile channel",
                                self.u.value_name(v)
                            )));
                        }
                    }
                    self.check_fits(
                        "the recorded name",
                        &range,
                        self.u.var_domain(x as usize),
                        &format!("`{name}`"),
                    )?;
                    return Ok(if recv {
                        Proc::RecvAssign(x, e)
                    } else {
                        Proc::SendAssign(x, e)
                    });
                }
                _ => {}
            }
        }
        self.parse_atom()
    }

    fn lookup_chan(&self, name: &str) -> Result<ChanRef, ParseError> {
        self.u
            .channel(name)
            .ok_or_else(|| self.err(format!("unknown channel `{name}`")))
    }

    fn parse_input(&mut self, chan: &str, names: bool) -> Result<Proc, ParseError> {
        let ch = self.lookup_chan(chan)?;
        let var = self.ident("a variable")?;
        let x = self.lookup_var(&var)?;
        let carries_names = self.u.chan_domain(ch).iter().all(|v| matches!(v, Value::Chan(_)));
        if names && !carries_names {
            return Err(self.err(format!("`{chan}` carries values, not channel names; use `?`")));
        }
        if !names && carries_names {
            return Err(self.err(format!("`{chan}` carries channel names; use `??`")));
        }
        self.check_fits(
            &format!("`{chan}`"),
            self.u.chan_domain(ch),
            self.u.var_domain(x as usize),
            &format!("`{var}`"),
        )?;
        self.expect(Tok::Arrow)?;
        let k = self.parse_prefix()?;
        Ok(if names {
            Proc::ChanInput(ch, x, Box::new(k))
        } else {
            Proc::Input(ch, x, Box::new(k))
        })
    }

    fn parse_output(&mut self, chan: &str) -> Result<Proc, ParseError> {
        let ch = self.lookup_chan(chan)?;
        let e = self.value_expr()?;
        self.check_fits(
            "the sent value",
            &self.expr_range(&e),
            self.u.chan_domain(ch),
            &format!("`{chan}`"),
        )?;
        self.expect(Tok::Arrow)?;
        let k = self.parse_prefix()?;
        Ok(Proc::Output(ch, e, Box::new(k)))
    }

    fn parse_atom(&mut self) -> Result<Proc, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "STOP" => Ok(Proc::Stop),
                    "SKIP" => Ok(Proc::Skip),
                    "CHAOS" => Ok(Proc::Chaos),
                    _ => Ok(Proc::Ref(name)),
                }
            }
            other => Err(self.err(format!("expected a process, found {}", other.show()))),
        }
    }
}

/// Check that every `Ref` resolves to a definition or an enclosing `mu`.
fn check_refs(
    p: &Proc,
    defs: &BTreeMap<String, Proc>,
    bound: &mut Vec<String>,
) -> Result<(), ParseError> {
    match p {
        Proc::Stop | Proc::Skip | Proc::Chaos => Ok(()),
        Proc::Assign(..) | Proc::SendAssign(..) | Proc::RecvAssign(..) => Ok(()),
        Proc::Event(_, k) | Proc::Input(_, _, k) | Proc::ChanInput(_, _, k) | Proc::Output(_, _, k) => {
            check_refs(k, defs, bound)
        }
        Proc::Seq(a, b) | Proc::Int(a, b) | Proc::Ext(a, b) | Proc::Par(a, b, _) => {
            check_refs(a, defs, bound)?;
            check_refs(b, defs, bound)
        }
        Proc::Mu(n, k) => {
            bound.push(n.clone());
            let r = check_refs(k, defs, bound);
            bound.pop();
            r
        }
        Proc::Ref(n) => {
            if defs.contains_key(n) || bound.contains(n) {
                Ok(())
            } else {
                Err(ParseError::new(0, 0, format!("unknown process `{n}`")))
            }
        }
    }
}

/// Parse a source file against a universe.
pub fn parse_program(u: &Universe, src: &str) -> Result<Program, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { u, toks, pos: 0 };
    let mut defs = BTreeMap::new();
    while matches!(p.peek(), Tok::Ident(_)) && *p.peek2() == Tok::Eq {
        let name = p.ident("a definition name")?;
        if matches!(name.as_str(), "STOP" | "SKIP" | "CHAOS" | "mu" | "nil") {
            return Err(p.err(format!("`{name}` cannot be redefined")));
        }
        if defs.contains_key(&name) {
            return Err(p.err(format!("`{name}` is defined twice")));
        }
        p.expect(Tok::Eq)?;
        let body = p.parse_expr()?;
        defs.insert(name, body);
    }
    let main = if *p.peek() == Tok::Eof {
        if !defs.contains_key("main") {
            return Err(p.err("no trailing expression and no `main` definition"));
        }
        Proc::Ref("main".into())
    } else {
        let e = p.parse_expr()?;
        if *p.peek() != Tok::Eof {
            return Err(p.err(format!("trailing input: {}", p.peek().show())));
        }
        e
    };
    for body in defs.values() {
        check_refs(body, &defs, &mut Vec::new())?;
    }
    check_refs(&main, &defs, &mut Vec::new())?;
    Ok(Program { defs, main })
}
