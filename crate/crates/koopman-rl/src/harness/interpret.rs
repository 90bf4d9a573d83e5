//! Symbolic value-function reports and expert sparsification.
//!
//! A linear-in-dictionary value function is printable as a signed monomial
//! expansion; zeroing hand-picked terms and re-evaluating the induced policy
//! quantifies how much performance each term pattern carries.

use crate::dictionaries::MonomialBasis;
use crate::error::{Error, Result};
use crate::numerics::Vector;

/// Variable names for a state dimension: x, y, z, w for up to four states,
/// x0, x1, ... beyond that.
pub fn state_variable_names(n: usize) -> Vec<String> {
    if n <= 4 {
        ["x", "y", "z", "w"][..n].iter().map(|s| s.to_string()).collect()
    } else {
        (0..n).map(|i| format!("x{i}")).collect()
    }
}

fn format_coefficient(c: f64) -> String {
    if (c - c.round()).abs() < 1e-9 && c.abs() < 1e15 {
        format!("{}", c.round() as i64)
    } else {
        format!("{c:.2}")
    }
}

/// Renders `V(x) = c0 + c1*term1 + ...` ordered by descending |coefficient|.
/// Zero coefficients are dropped; all-zero weights print `V(x) = 0`.
pub fn symbolic_value(w: &Vector, basis: &MonomialBasis) -> String {
    let vars = state_variable_names(basis.input_dim());
    let mut terms: Vec<(f64, String)> = (0..basis.dim())
        .filter(|&k| w[k] != 0.0)
        .map(|k| (w[k], basis.term_name(k, &vars)))
        .collect();
    terms.sort_by(|a, b| b.0.abs().partial_cmp(&a.0.abs()).unwrap());
    if terms.is_empty() {
        return "V(x) = 0".to_string();
    }
    let mut out = String::from("V(x) = ");
    for (i, (c, name)) in terms.iter().enumerate() {
        let mag = format_coefficient(c.abs());
        if i == 0 {
            if *c < 0.0 {
                out.push('-');
            }
        } else if *c < 0.0 {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        if name == "1" {
            out.push_str(&mag);
        } else if mag == "1" {
            out.push_str(name);
        } else {
            out.push_str(&mag);
            out.push('*');
            out.push_str(name);
        }
    }
    out
}

fn normalize_term(s: &str) -> String {
    s.replace([' ', '*'], "").to_ascii_lowercase()
}

/// Resolves a user-written term (e.g. `y^2`, `x*y`, `1`) to its dictionary
/// index.
pub fn term_index(basis: &MonomialBasis, term: &str) -> Result<usize> {
    let vars = state_variable_names(basis.input_dim());
    let wanted = normalize_term(term);
    for k in 0..basis.dim() {
        if normalize_term(&basis.term_name(k, &vars)) == wanted {
            return Ok(k);
        }
    }
    Err(Error::Config(format!(
        "unknown dictionary term '{term}' (variables {})",
        vars.join(", ")
    )))
}

/// Keeps only the listed terms' coefficients, zeroing the rest.
pub fn sparsify_keep(w: &Vector, basis: &MonomialBasis, keep: &[String]) -> Result<Vector> {
    let mut mask = vec![false; basis.dim()];
    for term in keep {
        mask[term_index(basis, term)?] = true;
    }
    let mut out = Vector::zeros(w.dim());
    for k in 0..w.dim() {
        if mask[k] {
            out[k] = w[k];
        }
    }
    Ok(out)
}

/// Zeroes the listed terms' coefficients, keeping the rest.
pub fn sparsify_zero(w: &Vector, basis: &MonomialBasis, zero: &[String]) -> Result<Vector> {
    let mut out = w.clone();
    for term in zero {
        out[term_index(basis, term)?] = 0.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_print_zero() {
        let basis = MonomialBasis::new(3, 2);
        assert_eq!(symbolic_value(&Vector::zeros(10), &basis), "V(x) = 0");
    }

    #[test]
    fn constant_only_prints_plain_value() {
        let basis = MonomialBasis::new(3, 2);
        let mut w = Vector::zeros(10);
        w[0] = 1.0;
        assert_eq!(symbolic_value(&w, &basis), "V(x) = 1");
    }

    #[test]
    fn expansion_is_ordered_by_magnitude_with_signs() {
        let basis = MonomialBasis::new(3, 2);
        let mut w = Vector::zeros(10);
        w[0] = -300.0; // 1
        let y2 = term_index(&basis, "y^2").unwrap();
        let z2 = term_index(&basis, "z^2").unwrap();
        let xy = term_index(&basis, "x*y").unwrap();
        w[y2] = 200.0;
        w[z2] = 150.0;
        w[xy] = -80.52;
        let s = symbolic_value(&w, &basis);
        assert_eq!(s, "V(x) = -300 + 200*y^2 + 150*z^2 - 80.52*x*y");
    }

    #[test]
    fn term_lookup_accepts_loose_spelling() {
        let basis = MonomialBasis::new(3, 2);
        assert_eq!(
            term_index(&basis, "Y^2").unwrap(),
            term_index(&basis, "y ^ 2").unwrap()
        );
        assert!(term_index(&basis, "q^3").is_err());
    }

    #[test]
    fn sparsify_keep_and_zero_are_complementary() {
        let basis = MonomialBasis::new(2, 2);
        let w = Vector::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let kept = sparsify_keep(&w, &basis, &["1".into(), "y^2".into()]).unwrap();
        assert_eq!(kept.as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0, 6.0]);
        let zeroed = sparsify_zero(&w, &basis, &["1".into(), "y^2".into()]).unwrap();
        assert_eq!(zeroed.as_slice(), &[0.0, 2.0, 3.0, 4.0, 5.0, 0.0]);
    }
}
