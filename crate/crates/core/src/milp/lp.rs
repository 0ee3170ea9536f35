//! CPLEX-style LP text export.
//!
//! ```text
//! \ model <name>
//! Maximize
//!  obj: + 1 x
//! Subject To
//!  c1: + 1 x <= 1
//! Bounds
//!  0 <= x <= 1
//! Binaries
//!  x
//! End
//! ```
//!
//! Sections appear in that order, variables and rows in declaration order.
//! Constraint tags become row names through [`row_name`]. Numbers use the
//! shortest representation that round-trips, so output is byte-stable.

use std::collections::HashSet;
use std::fmt::Write;

use super::{MilpModel, ObjSense, Terms, VarKind};
use crate::{Error, Result};

const TERMS_PER_LINE: usize = 8;

const RESERVED: &[&str] = &[
    "st", "s.t.", "subject", "to", "bounds", "bound", "binary", "binaries", "bin", "general", "generals", "gen",
    "end", "free", "inf", "infinity", "max", "min", "maximize", "minimize", "maximum", "minimum",
];

/// Whether `name` can appear verbatim as an LP identifier.
pub fn is_lp_safe(name: &str) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else { return false };
    if name.len() > 255 || !(first.is_ascii_alphabetic() || first == '_') {
        return false;
    }
    if !chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']')) {
        return false;
    }
    // `e12` would read as an exponent
    let exp_like = matches!(first, 'e' | 'E') && name[1..].starts_with(|c: char| c.is_ascii_digit());
    !exp_like && !RESERVED.contains(&name.to_ascii_lowercase().as_str())
}

/// Row name for a constraint tag: `eq7:branch(9,10):P` becomes `eq7.branch_9_10.P`.
pub fn row_name(tag: &str) -> String {
    let mut out = String::with_capacity(tag.len());
    for c in tag.chars() {
        match c {
            ':' => out.push('.'),
            ')' => {}
            '(' | ',' => out.push('_'),
            c if c.is_ascii_alphanumeric() || c == '_' || c == '.' => out.push(c),
            _ => out.push('_'),
        }
    }
    if !out.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
        out.insert_str(0, "r_");
    }
    out
}

pub(crate) fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write_terms(out: &mut String, model: &MilpModel, terms: &Terms) {
    for (i, (v, c)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if *c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", fmt_num(c.abs()), model.variable(*v).name);
    }
}

pub fn write_lp(model: &MilpModel) -> Result<String> {
    if !model.is_frozen() {
        return Err(Error::NotFrozen);
    }
    for v in model.variables() {
        if !is_lp_safe(&v.name) {
            return Err(Error::Serialization(format!("variable name `{}` is not LP-safe", v.name)));
        }
    }
    let mut rows = Vec::with_capacity(model.constraints().len());
    let mut seen = HashSet::new();
    for c in model.constraints() {
        let name = row_name(&c.tag);
        if !seen.insert(name.clone()) {
            return Err(Error::Serialization(format!("row name `{name}` (tag `{}`) collides", c.tag)));
        }
        rows.push(name);
    }

    let mut out = String::new();
    let _ = writeln!(out, "\\ model {}", model.name());
    let obj = model.objective();
    out.push_str(match obj.sense {
        ObjSense::Maximize => "Maximize\n",
        ObjSense::Minimize => "Minimize\n",
    });
    let obj_name = row_name(&obj.tag);
    let _ = write!(out, " {obj_name}:");
    if obj.terms.is_empty() {
        match model.variables().first() {
            Some(v) => {
                let _ = write!(out, " + 0 {}", v.name);
            }
            None => out.push_str(" 0"),
        }
    } else {
        write_terms(&mut out, model, &obj.terms);
    }
    out.push('\n');

    out.push_str("Subject To\n");
    for (c, name) in model.constraints().iter().zip(&rows) {
        let _ = write!(out, " {name}:");
        if c.terms.is_empty() {
            // a row with no terms still needs a variable reference
            if let Some(v) = model.variables().first() {
                let _ = write!(out, " + 0 {}", v.name);
            }
        } else {
            write_terms(&mut out, model, &c.terms);
        }
        let _ = writeln!(out, " {} {}", c.sense.symbol(), fmt_num(c.rhs));
    }

    out.push_str("Bounds\n");
    for v in model.variables() {
        let (lo, up) = (v.lower, v.upper);
        let _ = match (lo.is_finite(), up.is_finite()) {
            _ if lo == up => writeln!(out, " {} = {}", v.name, fmt_num(lo)),
            (true, true) => writeln!(out, " {} <= {} <= {}", fmt_num(lo), v.name, fmt_num(up)),
            (true, false) => writeln!(out, " {} >= {}", v.name, fmt_num(lo)),
            (false, true) => writeln!(out, " -inf <= {} <= {}", v.name, fmt_num(up)),
            (false, false) => writeln!(out, " {} free", v.name),
        };
    }

    let binaries: Vec<&str> =
        model.variables().iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    Ok(out)
}
