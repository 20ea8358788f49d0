use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Exponent vector of a multivariate monomial `x1^e1 * ... * xn^en`.
///
/// Ordering is graded lexicographic: total degree first, then the
/// exponent of `x1` descending, then `x2`, and so on. For two variables
/// the degree-2 block reads `x1^2, x1*x2, x2^2`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(Vec<u8>);

impl Monomial {
    pub fn one(n_vars: usize) -> Self {
        Monomial(vec![0; n_vars])
    }

    pub fn var(n_vars: usize, i: usize) -> Self {
        let mut e = vec![0; n_vars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn from_exponents(exps: &[u8]) -> Self {
        Monomial(exps.to_vec())
    }

    pub fn exponents(&self) -> &[u8] {
        &self.0
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `∂/∂x_i`, returning the multiplier and the reduced monomial.
    pub fn derivative(&self, i: usize) -> Option<(f64, Monomial)> {
        let e = self.0[i];
        if e == 0 {
            return None;
        }
        let mut out = self.0.clone();
        out[i] -= 1;
        Some((e as f64, Monomial(out)))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .fold(1.0, |acc, (&e, &xi)| acc * xi.powi(e as i32))
    }

    /// Whether every exponent is even, i.e. this is the square of another monomial.
    pub fn half(&self) -> Option<Monomial> {
        if self.0.iter().all(|e| e % 2 == 0) {
            Some(Monomial(self.0.iter().map(|e| e / 2).collect()))
        } else {
            None
        }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree() == 0 {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// All monomials in `n_vars` variables of total degree `<= max_degree`,
/// in graded lexicographic order.
pub fn monomials_up_to(n_vars: usize, max_degree: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in 0..=max_degree {
        out.extend(monomials_of_degree(n_vars, d));
    }
    out
}

/// Monomials of exactly total degree `degree`, `x1`-heavy first.
pub fn monomials_of_degree(n_vars: usize, degree: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    if n_vars == 0 {
        if degree == 0 {
            out.push(Monomial(Vec::new()));
        }
        return out;
    }
    let mut cur = vec![0u8; n_vars];
    fill(&mut cur, 0, degree, &mut out);
    out
}

fn fill(cur: &mut Vec<u8>, pos: usize, remaining: usize, out: &mut Vec<Monomial>) {
    let n = cur.len();
    if pos == n - 1 {
        cur[pos] = remaining as u8;
        out.push(Monomial(cur.clone()));
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e as u8;
        fill(cur, pos + 1, remaining - e, out);
    }
    cur[pos] = 0;
}

/// Number of monomials of total degree `<= d` in `n` variables: C(n+d, d).
pub fn count_up_to(n_vars: usize, max_degree: usize) -> usize {
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for k in 1..=max_degree as u128 {
        num *= n_vars as u128 + k;
        den *= k;
    }
    (num / den) as usize
}
