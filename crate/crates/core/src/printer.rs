//! Render resolved process terms back to source form, with the minimum
//! parentheses the grammar needs.

use crate::ast::{Expr, Proc};
use crate::universe::{Universe, Value};

/// Binding strength, loosest first; mirrors the parser's levels.
fn level(p: &Proc) -> u8 {
    match p {
        Proc::Par(..) => 0,
        Proc::Ext(..) | Proc::Int(..) => 1,
        Proc::Seq(..) => 2,
        Proc::Event(..)
        | Proc::Input(..)
        | Proc::ChanInput(..)
        | Proc::Output(..)
        | Proc::Assign(..)
        | Proc::SendAssign(..)
        | Proc::RecvAssign(..)
        | Proc::Mu(..) => 3,
        Proc::Stop | Proc::Skip | Proc::Chaos | Proc::Ref(_) => 4,
    }
}

fn expr_text(u: &Universe, e: &Expr) -> String {
    match e {
        Expr::Lit(Value::Int(n)) => n.to_string(),
        Expr::Lit(v @ Value::Chan(_)) => u.value_name(v),
        Expr::Var(x) => u.var_name(*x as usize).to_string(),
    }
}

fn walk(u: &Universe, p: &Proc, min: u8, out: &mut String) {
    let mine = level(p);
    if mine < min {
        out.push('(');
        walk(u, p, 0, out);
        out.push(')');
        return;
    }
    match p {
        Proc::Stop => out.push_str("STOP"),
        Proc::Skip => out.push_str("SKIP"),
        Proc::Chaos => out.push_str("CHAOS"),
        Proc::Ref(n) => out.push_str(n),
        Proc::Event(e, k) => {
            out.push_str(u.event_name(*e));
            out.push_str(" -> ");
            walk(u, k, 3, out);
        }
        Proc::Input(ch, x, k) => {
            out.push_str(&format!("{} ? {} -> ", u.chan_name(*ch), u.var_name(*x as usize)));
            walk(u, k, 3, out);
        }
        Proc::ChanInput(ch, x, k) => {
            out.push_str(&format!("{} ?? {} -> ", u.chan_name(*ch), u.var_name(*x as usize)));
            walk(u, k, 3, out);
        }
        Proc::Output(ch, e, k) => {
            out.push_str(&format!("{} ! {} -> ", u.chan_name(*ch), expr_text(u, e)));
            walk(u, k, 3, out);
        }
        Proc::Assign(x, e) => {
            out.push_str(&format!("{} := {}", u.var_name(*x as usize), expr_text(u, e)));
        }
        Proc::SendAssign(x, e) => {
            out.push_str(&format!("{} :=s {}", u.var_name(*x as usize), expr_text(u, e)));
        }
        Proc::RecvAssign(x, e) => {
            out.push_str(&format!("{} :=r {}", u.var_name(*x as usize), expr_text(u, e)));
        }
        Proc::Mu(n, k) => {
            out.push_str(&format!("mu {n} . "));
            walk(u, k, 3, out);
        }
        Proc::Seq(a, b) => {
            walk(u, a, 3, out);
            out.push_str(" ; ");
            walk(u, b, 3, out);
        }
        Proc::Ext(a, b) => {
            walk(u, a, 2, out);
            out.push_str(" [] ");
            walk(u, b, 2, out);
        }
        Proc::Int(a, b) => {
            walk(u, a, 2, out);
            out.push_str(" |~| ");
            walk(u, b, 2, out);
        }
        Proc::Par(a, b, sync) => {
            walk(u, a, 1, out);
            match sync {
                None => out.push_str(" || "),
                Some(mask) => {
                    out.push_str(" [| ");
                    out.push_str(&u.ref_names(*mask).join(", "));
                    out.push_str(" |] ");
                }
            }
            walk(u, b, 1, out);
        }
    }
}

/// Source text for a term. Parsing it back yields the same term.
pub fn pretty(u: &Universe, p: &Proc) -> String {
    let mut out = String::new();
    walk(u, p, 0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use crate::universe::{parse_config, Universe};

    fn uni() -> Universe {
        let c = parse_config(
            r#"{
                "actions": ["a", "b"],
                "static": {"s": [0, 1]},
                "mobile": {"c": [0], "d": ["c"]},
                "owned": ["c", "d"],
                "variables": {
                    "x": {"init": 0, "domain": [0, 1]},
                    "k": {"init": "c", "domain": ["c"]}
                },
                "bound": 3
            }"#,
        )
        .unwrap();
        Universe::build(&c).unwrap()
    }

    #[test]
    fn round_trips() {
        let u = uni();
        for src in [
            "a -> SKIP",
            "(a -> SKIP ; b -> STOP [] SKIP) || STOP",
            "s ? x -> s ! x -> SKIP",
            "k :=s c ; c.0 -> SKIP",
            "d ?? k -> (a -> SKIP |~| SKIP)",
            "mu X . a -> X",
            "a -> SKIP [| a, c.0 |] SKIP",
            "(a -> SKIP [] b -> STOP) ; SKIP",
        ] {
            let p = parse_program(&u, src).unwrap();
            let text = pretty(&u, &p.main);
            let back = parse_program(&u, &text)
                .unwrap_or_else(|e| panic!("reparse of `{text}`: {e}"));
            assert_eq!(back.main, p.main, "via `{text}`");
        }
    }
}
