//! Plain-text problem dump.
//!
//! The layout follows the CPLEX LP file sections with one extension block for
//! cones:
//!
//! ```text
//! \ comment lines start with a backslash
//! minimize
//!  obj: 2 v0 + 1 v1 + 0.5
//! subject to
//!  balance_0: 1 v0 - 1 v1 = -3
//!  funding_1: 1 v0 <= 4
//! bounds
//!  0 <= v0 <= 10
//!  v1 free
//! cones
//!  wasserstein_0: [ 1 v0 , 2 ] <= 1 v1
//! end
//! ```
//!
//! Rows are written as `terms sense rhs` with the expression constant moved to
//! the right-hand side. Variables are written as `v<index>`; a `\ v<index> name`
//! comment maps each one back to its name. Cone rows list every vector entry as
//! an affine expression. Numbers use Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::io::{self, Write};

use super::expr::LinExpr;
use super::problem::ConicProblem;

fn affine(expr: &LinExpr, with_constant: bool) -> String {
    let mut s = String::new();
    for (i, &(v, c)) in expr.terms().iter().enumerate() {
        if i == 0 {
            if c < 0.0 {
                s.push_str("- ");
            }
        } else {
            s.push_str(if c < 0.0 { " - " } else { " + " });
        }
        let _ = write!(s, "{} {}", c.abs(), v);
    }
    let k = expr.constant_term();
    if with_constant && (k != 0.0 || s.is_empty()) {
        if s.is_empty() {
            let _ = write!(s, "{k}");
        } else {
            let _ = write!(s, " {} {}", if k < 0.0 { "-" } else { "+" }, k.abs());
        }
    } else if s.is_empty() {
        s.push('0');
    }
    s
}

/// Writes `problem` in the text format described in the module docs.
pub fn write_problem<W: Write>(problem: &ConicProblem, mut out: W) -> io::Result<()> {
    for (i, v) in problem.variables().iter().enumerate() {
        writeln!(out, "\\ v{i} {}", v.name)?;
    }
    writeln!(out, "minimize")?;
    writeln!(out, " obj: {}", affine(problem.objective(), true))?;
    writeln!(out, "subject to")?;
    for c in problem.equalities() {
        writeln!(out, " {}: {} = {}", c.label, affine(&c.expr, false), -c.expr.constant_term())?;
    }
    for c in problem.inequalities() {
        writeln!(out, " {}: {} <= {}", c.label, affine(&c.expr, false), -c.expr.constant_term())?;
    }
    writeln!(out, "bounds")?;
    for (i, v) in problem.variables().iter().enumerate() {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => writeln!(out, " v{i} free")?,
            (true, false) => writeln!(out, " v{i} >= {}", v.lower)?,
            (false, true) => writeln!(out, " -inf <= v{i} <= {}", v.upper)?,
            (true, true) => writeln!(out, " {} <= v{i} <= {}", v.lower, v.upper)?,
        }
    }
    if problem.has_cones() {
        writeln!(out, "cones")?;
        for c in problem.socs() {
            let parts: Vec<String> = c.cone.iter().map(|e| affine(e, true)).collect();
            writeln!(out, " {}: [ {} ] <= {}", c.label, parts.join(" , "), affine(&c.bound, true))?;
        }
    }
    writeln!(out, "end")
}
