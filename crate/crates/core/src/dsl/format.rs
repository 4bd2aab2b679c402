use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{Constraint, NumExpr};
use crate::schema::DatasetSchema;

const ADDITIVE: u8 = 1;
const MULTIPLICATIVE: u8 = 2;
const POWER: u8 = 3;
const ATOM: u8 = 4;

fn precedence(e: &NumExpr) -> u8 {
    match e {
        NumExpr::Add(..) | NumExpr::Sub(..) => ADDITIVE,
        NumExpr::Mul(..) | NumExpr::Div(..) => MULTIPLICATIVE,
        NumExpr::Pow(..) => POWER,
        _ => ATOM,
    }
}

fn number(v: f64) -> String {
    if v.is_sign_negative() {
        format!("(-{})", -v)
    } else {
        format!("{v}")
    }
}

fn write_expr(e: &NumExpr, name: &dyn Fn(usize) -> String, out: &mut String) {
    let wrap = |child: &NumExpr, parens: bool, out: &mut String| {
        if parens {
            out.push('(');
            write_expr(child, name, out);
            out.push(')');
        } else {
            write_expr(child, name, out);
        }
    };
    let binary = |a: &NumExpr, b: &NumExpr, sym: &str, prec: u8, out: &mut String| {
        wrap(a, precedence(a) < prec, out);
        out.push_str(sym);
        wrap(b, precedence(b) <= prec, out);
    };
    let call = |f: &str, args: &[NumExpr], out: &mut String| {
        out.push_str(f);
        out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_expr(a, name, out);
        }
        out.push(')');
    };
    match e {
        NumExpr::Const(v) => out.push_str(&number(*v)),
        NumExpr::Feature(i) => out.push_str(&name(*i)),
        NumExpr::Add(a, b) => binary(a, b, " + ", ADDITIVE, out),
        NumExpr::Sub(a, b) => binary(a, b, " - ", ADDITIVE, out),
        NumExpr::Mul(a, b) => binary(a, b, " * ", MULTIPLICATIVE, out),
        NumExpr::Div(a, b) => binary(a, b, " / ", MULTIPLICATIVE, out),
        NumExpr::Pow(a, b) => {
            wrap(a, precedence(a) < ATOM, out);
            out.push_str(" ^ ");
            wrap(b, precedence(b) < ATOM, out);
        }
        NumExpr::Log(a) => call("log", core::slice::from_ref(a.as_ref()), out),
        NumExpr::Abs(a) => call("abs", core::slice::from_ref(a.as_ref()), out),
        NumExpr::Min(args) => call("min", args, out),
        NumExpr::Max(args) => call("max", args, out),
    }
}

fn write_constraint(c: &Constraint, name: &dyn Fn(usize) -> String, out: &mut String) {
    let joined = |cs: &[Constraint], sep: &str, needs_parens: fn(&Constraint) -> bool, out: &mut String| {
        for (i, child) in cs.iter().enumerate() {
            if i > 0 {
                out.push_str(sep);
            }
            if needs_parens(child) {
                out.push('(');
                write_constraint(child, name, out);
                out.push(')');
            } else {
                write_constraint(child, name, out);
            }
        }
    };
    match c {
        Constraint::Relation { op, left, right } => {
            write_expr(left, name, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_expr(right, name, out);
        }
        Constraint::Or(cs) => joined(cs, " or ", |c| matches!(c, Constraint::Or(_) | Constraint::Implies { .. }), out),
        Constraint::And(cs) => joined(cs, " and ", |c| !matches!(c, Constraint::Relation { .. }), out),
        Constraint::Implies { guard, body } => {
            out.push_str("if ");
            write_constraint(guard, name, out);
            out.push_str(" then ");
            joined(core::slice::from_ref(body.as_ref()), "", |c| matches!(c, Constraint::Implies { .. }), out);
        }
    }
}

fn positional(i: usize) -> String {
    format!("F{i}")
}

pub fn format_expr(e: &NumExpr) -> String {
    let mut out = String::new();
    write_expr(e, &positional, &mut out);
    out
}

/// Renders `c` in the textual grammar using positional `F<k>` names.
pub fn format_constraint(c: &Constraint) -> String {
    let mut out = String::new();
    write_constraint(c, &positional, &mut out);
    out
}

/// Renders `c` with the schema's declared column names.
pub fn format_constraint_named(c: &Constraint, schema: &DatasetSchema) -> String {
    let names: Vec<String> = schema.features.iter().map(|f| f.name.clone()).collect();
    let lookup = move |i: usize| names.get(i).cloned().unwrap_or_else(|| positional(i));
    let mut out = String::new();
    write_constraint(c, &lookup, &mut out);
    out
}
