//! Exact construction of Hermite-Birkhoff quadrature tableaux.
//!
//! Row `l` of a tableau holds the weights of the generalised Hermite quadrature
//!
//! ```text
//! ∫_0^{c_l} g(τ) dτ ≈ Σ_d Σ_j B^{(d)}_{lj} g^{(d-1)}(c_j)
//! ```
//!
//! which, with `m` derivatives on `s` distinct nodes, has `m·s` free weights
//! and is made exact for every polynomial of degree below `m·s`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::TableauError;

pub type Rational = BigRational;

/// Largest supported `m·s`; beyond it the monomial systems get badly
/// conditioned once rounded to floating point.
pub const MAX_WEIGHTS: usize = 12;

/// A multiderivative tableau with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalTableau {
    pub name: String,
    pub nodes: Vec<Rational>,
    /// `coeffs[d-1][l][j]` holds `B^{(d)}_{lj}`.
    pub coeffs: Vec<Vec<Vec<Rational>>>,
    /// `weights[d-1][j]` holds `b^{(d)}_j`.
    pub weights: Vec<Vec<Rational>>,
    pub order: usize,
}

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// `k!/(k-e)! x^(k-e)`, the `e`-th derivative of `x^k` (zero for `e > k`).
fn monomial_derivative(k: usize, e: usize, x: &Rational) -> Rational {
    if e > k {
        return Rational::zero();
    }
    let falling = ((k - e + 1)..=k).fold(BigInt::one(), |acc, f| acc * BigInt::from(f));
    Rational::from_integer(falling) * pow(x, k - e)
}

fn pow(x: &Rational, n: usize) -> Rational {
    (0..n).fold(Rational::one(), |acc, _| acc * x)
}

/// `∫_0^upper τ^k dτ`
fn monomial_integral(k: usize, upper: &Rational) -> Rational {
    pow(upper, k + 1) / Rational::from_integer(BigInt::from(k + 1))
}

/// Solves for the quadrature weights with upper integration limit `upper`.
/// Returns `weights[d-1][j]`.
fn hermite_weights(
    nodes: &[Rational],
    m: usize,
    upper: &Rational,
) -> Result<Vec<Vec<Rational>>, TableauError> {
    let s = nodes.len();
    let n = m * s;
    // Unknown index u = (d-1)*s + j; equation k enforces exactness on τ^k.
    let mut a: Vec<Vec<Rational>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|u| monomial_derivative(k, u / s, &nodes[u % s]))
                .collect()
        })
        .collect();
    let mut rhs: Vec<Rational> = (0..n).map(|k| monomial_integral(k, upper)).collect();

    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or(TableauError::SingularSystem)?;
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        let inv = a[col][col].recip();
        let pivot_row = a[col].clone();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = &a[r][col] * &inv;
            for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= &factor * p;
            }
            let delta = &factor * &rhs[col];
            rhs[r] -= delta;
        }
    }
    let solution: Vec<Rational> = (0..n).map(|i| &rhs[i] / &a[i][i]).collect();
    Ok((0..m)
        .map(|d| solution[d * s..(d + 1) * s].to_vec())
        .collect())
}

/// Builds the `m`-derivative Hermite-Birkhoff tableau on `nodes`.
///
/// Nodes must be distinct, ascending and inside `[0, 1]`. The update weights
/// integrate up to 1; when the last node is 1 they coincide with the last row,
/// so the tableau is stiffly accurate.
pub fn hermite_birkhoff_tableau(
    nodes: &[Rational],
    m: usize,
) -> Result<RationalTableau, TableauError> {
    let s = nodes.len();
    if s == 0 || m == 0 {
        return Err(TableauError::InvalidNodes(
            "need at least one node and one derivative".into(),
        ));
    }
    if m * s > MAX_WEIGHTS {
        return Err(TableauError::Conditioning { weights: m * s });
    }
    let zero = Rational::zero();
    let one = Rational::one();
    if nodes.iter().any(|c| c < &zero || c > &one) {
        return Err(TableauError::InvalidNodes("nodes must lie in [0, 1]".into()));
    }
    for pair in nodes.windows(2) {
        if pair[0] == pair[1] {
            return Err(TableauError::SingularSystem);
        }
        if pair[0] > pair[1] {
            return Err(TableauError::InvalidNodes("nodes must be ascending".into()));
        }
    }

    let mut coeffs = vec![Vec::with_capacity(s); m];
    for c_l in nodes {
        let row = hermite_weights(nodes, m, c_l)?;
        for (d, w) in row.into_iter().enumerate() {
            coeffs[d].push(w);
        }
    }
    let weights = if nodes[s - 1] == one {
        coeffs.iter().map(|b| b[s - 1].clone()).collect()
    } else {
        hermite_weights(nodes, m, &one)?
    };

    Ok(RationalTableau {
        name: format!("HB-{}D-{}s", m, s),
        nodes: nodes.to_vec(),
        coeffs,
        weights,
        order: m * s,
    })
}

impl RationalTableau {
    pub fn stages(&self) -> usize {
        self.nodes.len()
    }

    pub fn derivatives(&self) -> usize {
        self.coeffs.len()
    }

    /// Quadrature residual of row weights `w[d-1][j]` on `τ^k` over `[0, upper]`.
    fn defect(&self, w: impl Fn(usize, usize) -> Rational, k: usize, upper: &Rational) -> Rational {
        let mut sum = Rational::zero();
        for d in 0..self.derivatives() {
            for (j, c_j) in self.nodes.iter().enumerate() {
                sum += w(d, j) * monomial_derivative(k, d, c_j);
            }
        }
        sum - monomial_integral(k, upper)
    }

    /// Whether every row and the update weights integrate `τ^k` exactly.
    pub fn is_exact_for_degree(&self, k: usize) -> bool {
        let rows_exact = (0..self.stages()).all(|l| {
            self.defect(|d, j| self.coeffs[d][l][j].clone(), k, &self.nodes[l])
                .is_zero()
        });
        rows_exact
            && self
                .defect(|d, j| self.weights[d][j].clone(), k, &Rational::one())
                .is_zero()
    }

    /// Largest `K` such that every degree below `K` is integrated exactly.
    pub fn exactness_degree(&self) -> usize {
        (0..=4 * MAX_WEIGHTS)
            .find(|&k| !self.is_exact_for_degree(k))
            .unwrap_or(4 * MAX_WEIGHTS + 1)
    }

    pub fn stiffly_accurate(&self) -> bool {
        let s = self.stages();
        self.coeffs
            .iter()
            .zip(&self.weights)
            .all(|(b_mat, b)| &b_mat[s - 1] == b)
    }

    /// Largest absolute coefficient, used only for diagnostics.
    pub fn max_abs_coeff(&self) -> Rational {
        self.coeffs
            .iter()
            .flatten()
            .flatten()
            .map(|x| x.abs())
            .fold(Rational::zero(), |a, b| if b > a { b } else { a })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        rational(n, d)
    }

    #[test]
    fn two_point_three_derivative_weights() {
        let t = hermite_birkhoff_tableau(&[r(0, 1), r(1, 1)], 3).unwrap();
        assert_eq!(t.order, 6);
        assert_eq!(t.coeffs[0][1], vec![r(1, 2), r(1, 2)]);
        assert_eq!(t.coeffs[1][1], vec![r(1, 10), r(-1, 10)]);
        assert_eq!(t.coeffs[2][1], vec![r(1, 120), r(1, 120)]);
        for d in 0..3 {
            assert!(t.coeffs[d][0].iter().all(Zero::is_zero));
        }
        assert!(t.stiffly_accurate());
    }

    #[test]
    fn single_node_is_implicit_euler() {
        let t = hermite_birkhoff_tableau(&[r(1, 1)], 1).unwrap();
        assert_eq!(t.coeffs[0][0], vec![r(1, 1)]);
        assert_eq!(t.weights[0], vec![r(1, 1)]);
        assert_eq!(t.exactness_degree(), 1);
    }

    #[test]
    fn interior_last_node_gets_separate_update_weights() {
        // Two-point Gauss-Legendre nodes are irrational; use a rational pair.
        let t = hermite_birkhoff_tableau(&[r(1, 4), r(3, 4)], 1).unwrap();
        assert!(!t.stiffly_accurate());
        assert_eq!(t.weights[0], vec![r(1, 2), r(1, 2)]);
        assert_eq!(t.exactness_degree(), 2);
    }

    #[test]
    fn rejects_bad_node_sets() {
        assert!(matches!(
            hermite_birkhoff_tableau(&[r(0, 1), r(0, 1)], 2),
            Err(TableauError::SingularSystem)
        ));
        assert!(matches!(
            hermite_birkhoff_tableau(&[r(0, 1), r(1, 3), r(2, 3), r(1, 1)], 4),
            Err(TableauError::Conditioning { weights: 16 })
        ));
        assert!(matches!(
            hermite_birkhoff_tableau(&[r(1, 1), r(0, 1)], 1),
            Err(TableauError::InvalidNodes(_))
        ));
        assert!(matches!(
            hermite_birkhoff_tableau(&[r(0, 1), r(3, 2)], 1),
            Err(TableauError::InvalidNodes(_))
        ));
    }
}
