//! Deterministic CPLEX-LP-format text export. Rows appear in construction
//! order, free variables are declared explicitly, and long rows are wrapped
//! so no line exceeds 255 characters.

use crate::lp::{LpModel, Rel, Sense};
use crate::scalar::Scalar;

const MAX_LINE: usize = 255;

/// Replace characters LP readers reject with underscores, collapsing runs
/// and trimming the tail: `y(2,7)` becomes `y_2_7`.
pub fn sanitize_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut last_underscore = false;
    for ch in name.chars() {
        let ok = ch.is_ascii_alphanumeric() || ch == '_' || ch == '.';
        if ok {
            out.push(ch);
            last_underscore = ch == '_';
        } else if !last_underscore {
            out.push('_');
            last_underscore = true;
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

fn fmt_scalar<S: Scalar>(v: &S) -> String {
    if S::EXACT {
        // rationals render as n/d, which LP readers reject; go through f64
        format!("{}", v.to_f64())
    } else {
        format!("{v}")
    }
}

fn push_wrapped(out: &mut String, line: &mut String, piece: &str) {
    if line.len() + piece.len() > MAX_LINE {
        out.push_str(line);
        out.push('\n');
        line.clear();
        line.push(' ');
    }
    line.push_str(piece);
}

fn write_terms<S: Scalar>(out: &mut String, line: &mut String, terms: &[(usize, S)], model: &LpModel<S>) {
    let one = S::from_int(1);
    let minus_one = S::zero() - one.clone();
    for (k, (var, coeff)) in terms.iter().enumerate() {
        let name = sanitize_name(&model.vars()[*var].name);
        let piece = if k == 0 {
            if *coeff == one {
                format!(" {name}")
            } else if *coeff == minus_one {
                format!(" - {name}")
            } else if coeff.is_negative() {
                format!(" - {} {name}", fmt_scalar(&coeff.abs()))
            } else {
                format!(" {} {name}", fmt_scalar(coeff))
            }
        } else if *coeff == one {
            format!(" + {name}")
        } else if *coeff == minus_one {
            format!(" - {name}")
        } else if coeff.is_negative() {
            format!(" - {} {name}", fmt_scalar(&coeff.abs()))
        } else {
            format!(" + {} {name}", fmt_scalar(coeff))
        };
        push_wrapped(out, line, &piece);
    }
    if terms.is_empty() {
        push_wrapped(out, line, " 0");
    }
}

pub fn export_lp_file<S: Scalar>(model: &LpModel<S>) -> String {
    let mut out = String::new();
    out.push_str(match model.sense() {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    let mut line = String::from(" obj:");
    write_terms(&mut out, &mut line, model.objective(), model);
    out.push_str(&line);
    out.push('\n');

    out.push_str("Subject To\n");
    for row in model.rows() {
        let mut line = format!(" {}:", sanitize_name(&row.name));
        write_terms(&mut out, &mut line, &row.coeffs, model);
        let rel = match row.rel {
            Rel::Le => "<=",
            Rel::Ge => ">=",
            Rel::Eq => "=",
        };
        push_wrapped(&mut out, &mut line, &format!(" {rel} {}", fmt_scalar(&row.rhs)));
        out.push_str(&line);
        out.push('\n');
    }

    out.push_str("Bounds\n");
    for var in model.vars() {
        let name = sanitize_name(&var.name);
        match (&var.lower, &var.upper) {
            (None, None) => out.push_str(&format!(" {name} free\n")),
            (Some(lo), None) => {
                // zero lower bound is the LP-format default; keep it explicit
                out.push_str(&format!(" {name} >= {}\n", fmt_scalar(lo)));
            }
            (None, Some(up)) => {
                out.push_str(&format!(" -inf <= {name} <= {}\n", fmt_scalar(up)));
            }
            (Some(lo), Some(up)) => {
                out.push_str(&format!(" {} <= {name} <= {}\n", fmt_scalar(lo), fmt_scalar(up)));
            }
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{DagOptions, LayeredDag};
    use crate::games::WeightedVotingGame;
    use crate::lp::{build_p2, Sense, VarRole};

    #[test]
    fn sanitize_examples() {
        assert_eq!(sanitize_name("y(2,7)"), "y_2_7");
        assert_eq!(sanitize_name("x_1"), "x_1");
        assert_eq!(sanitize_name("a b(c)"), "a_b_c");
    }

    #[test]
    fn one_variable_model() {
        let mut model: LpModel<f64> = LpModel::new(Sense::Minimize);
        let x = model.add_var("x", Some(3.0), None, VarRole::Other);
        model.set_objective(vec![(x, 1.0)]);
        let text = export_lp_file(&model);
        assert!(text.contains("obj: x"));
        assert!(text.contains(" x >= 3"));
    }

    #[test]
    fn p2_export_is_deterministic() {
        let g = WeightedVotingGame::new(1, vec![1]).unwrap();
        let dag = LayeredDag::build(&g, &DagOptions::default()).unwrap();
        let a = export_lp_file(&build_p2::<f64>(&dag));
        let b = export_lp_file(&build_p2::<f64>(&dag));
        assert_eq!(a, b);
        assert!(a.contains("eps free"));
        assert!(a.contains("r_sum"));
    }

    #[test]
    fn lines_stay_under_limit() {
        let mut model: LpModel<f64> = LpModel::new(Sense::Minimize);
        let vars: Vec<usize> = (0..120)
            .map(|i| model.add_var(format!("var_number_{i}"), Some(0.0), None, VarRole::Other))
            .collect();
        let coeffs: Vec<(usize, f64)> = vars.iter().map(|&v| (v, 1.25)).collect();
        model.add_row("wide", coeffs.clone(), crate::lp::Rel::Le, 10.0);
        model.set_objective(coeffs);
        let text = export_lp_file(&model);
        assert!(text.lines().count() > 10, "wrapping should split the wide row");
        assert!(text.lines().all(|l| l.len() <= 255), "found an overlong line");
    }
}
