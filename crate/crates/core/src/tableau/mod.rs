//! Multiderivative Runge-Kutta tableaux.
//!
//! A tableau with `s` stages and `m` derivatives carries one `s×s` coefficient
//! matrix `B^{(d)}` and one update weight vector `b^{(d)}` per derivative
//! order `d = 1..=m`. Derivative orders are 1-based throughout the crate so
//! that `d` lines up with the tower index `F_d`.

mod json;
mod rational;

pub use json::{RationalDocument, TableauDocument};
pub use rational::{hermite_birkhoff_tableau, rational, Rational, RationalTableau, MAX_WEIGHTS};

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TableauError {
    #[error("quadrature system is singular (nodes must be distinct)")]
    SingularSystem,
    #[error("m·s = {weights} exceeds the conditioning limit of {MAX_WEIGHTS}")]
    Conditioning { weights: usize },
    #[error("unknown tableau `{0}`")]
    UnknownTableau(String),
    #[error("invalid nodes: {0}")]
    InvalidNodes(String),
    #[error("malformed tableau document: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Names of the built-in schemes.
pub const BUILTIN_NAMES: [&str; 3] = ["HB-I2DRK6-3s", "HB-I2DRK8-4s", "HB-I3DRK6-2s"];

/// Immutable tableau instantiated in the scalar type `T`.
#[derive(Clone, Debug)]
pub struct MdTableau<T> {
    name: String,
    nodes: Vec<T>,
    coeffs: Vec<Vec<Vec<T>>>,
    weights: Vec<Vec<T>>,
    order: usize,
    exact: Option<RationalTableau>,
}

fn round<T: Scalar>(x: &Rational) -> T {
    T::lit(x.to_f64().expect("rational converts to f64"))
}

impl<T: Scalar> MdTableau<T> {
    /// Rounds an exact tableau into `T`, keeping the rational mirror.
    pub fn from_rational(exact: RationalTableau) -> Self {
        let coeffs = exact
            .coeffs
            .iter()
            .map(|b| b.iter().map(|row| row.iter().map(round).collect()).collect())
            .collect();
        let weights = exact
            .weights
            .iter()
            .map(|b| b.iter().map(round).collect())
            .collect();
        Self {
            name: exact.name.clone(),
            nodes: exact.nodes.iter().map(round).collect(),
            coeffs,
            weights,
            order: exact.order,
            exact: Some(exact),
        }
    }

    /// Assembles a tableau from floating-point parts.
    ///
    /// `coeffs[d-1][l][j]` is `B^{(d)}_{lj}` and `weights[d-1][j]` is `b^{(d)}_j`.
    /// The abscissae are taken from the row sums of `B^{(1)}`.
    pub fn from_parts(
        name: impl Into<String>,
        coeffs: Vec<Vec<Vec<T>>>,
        weights: Vec<Vec<T>>,
        order: usize,
    ) -> Result<Self, TableauError> {
        let m = coeffs.len();
        if m == 0 || weights.len() != m {
            return Err(TableauError::Malformed(
                "need one matrix and one weight vector per derivative".into(),
            ));
        }
        let s = coeffs[0].len();
        let square = coeffs
            .iter()
            .all(|b| b.len() == s && b.iter().all(|row| row.len() == s));
        if s == 0 || !square || weights.iter().any(|b| b.len() != s) {
            return Err(TableauError::Malformed("inconsistent stage count".into()));
        }
        let nodes: Vec<T> = coeffs[0].iter().map(|row| row.iter().copied().sum()).collect();
        if nodes.windows(2).any(|p| p[0] >= p[1]) {
            return Err(TableauError::InvalidNodes(
                "abscissae must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            nodes,
            coeffs,
            weights,
            order,
            exact: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Stage count `s`.
    pub fn stages(&self) -> usize {
        self.nodes.len()
    }

    /// Derivative count `m`.
    pub fn derivatives(&self) -> usize {
        self.coeffs.len()
    }

    /// Declared classical order `q`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Abscissae `c_l`.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// `B^{(d)}_{lj}` for `d ≥ 1`.
    #[inline]
    pub fn coeff(&self, d: usize, l: usize, j: usize) -> T {
        self.coeffs[d - 1][l][j]
    }

    /// Row `l` of `B^{(d)}`.
    #[inline]
    pub fn row(&self, d: usize, l: usize) -> &[T] {
        &self.coeffs[d - 1][l]
    }

    /// `b^{(d)}` for `d ≥ 1`.
    #[inline]
    pub fn weights(&self, d: usize) -> &[T] {
        &self.weights[d - 1]
    }

    pub fn exact(&self) -> Option<&RationalTableau> {
        self.exact.as_ref()
    }

    /// `b^{(d)} = B^{(d)}_{s,·}` for every `d`.
    pub fn stiffly_accurate(&self) -> bool {
        if let Some(exact) = &self.exact {
            return exact.stiffly_accurate();
        }
        let s = self.stages();
        self.coeffs
            .iter()
            .zip(&self.weights)
            .all(|(b_mat, b)| b_mat[s - 1] == *b)
    }

    /// Whether row `l` is identically zero in every derivative.
    pub fn row_is_zero(&self, l: usize) -> bool {
        self.coeffs
            .iter()
            .all(|b| b[l].iter().all(|x| x.is_zero()))
    }

    /// `max_l |c_l - Σ_j B^{(1)}_{lj}|`
    pub fn row_sum_defect(&self) -> T {
        self.coeffs[0]
            .iter()
            .zip(&self.nodes)
            .map(|(row, &c)| (c - row.iter().copied().sum::<T>()).abs())
            .fold(T::zero(), T::max)
    }
}

/// Instantiates one of the built-in schemes.
///
/// * `HB-I2DRK6-3s`: two derivatives on `{0, 1/2, 1}`, order 6.
/// * `HB-I2DRK8-4s`: two derivatives on `{0, 1/3, 2/3, 1}`, order 8.
/// * `HB-I3DRK6-2s`: three derivatives on `{0, 1}`, order 6.
pub fn builtin<T: Scalar>(name: &str) -> Result<MdTableau<T>, TableauError> {
    let (nodes, m) = match name {
        "HB-I2DRK6-3s" => (vec![rational(0, 1), rational(1, 2), rational(1, 1)], 2),
        "HB-I2DRK8-4s" => (
            vec![rational(0, 1), rational(1, 3), rational(2, 3), rational(1, 1)],
            2,
        ),
        "HB-I3DRK6-2s" => (vec![rational(0, 1), rational(1, 1)], 3),
        other => return Err(TableauError::UnknownTableau(other.to_string())),
    };
    let mut exact = hermite_birkhoff_tableau(&nodes, m)?;
    exact.name = name.to_string();
    Ok(MdTableau::from_rational(exact))
}

/// Largest `K` such that every row quadrature (and the update quadrature)
/// integrates all monomials of degree below `K` to within `1e-12`.
///
/// Works on the rounded coefficients, so it also validates imported tableaux.
pub fn verify_quadrature_order<T: Scalar>(t: &MdTableau<T>) -> usize {
    let tol = 1e-12_f64.max(64.0 * T::epsilon().as_f64());
    let nodes: Vec<f64> = t.nodes.iter().map(|c| c.as_f64()).collect();
    let m = t.derivatives();
    let s = t.stages();

    // k!/(k-e)! x^(k-e)
    let deriv = |k: usize, e: usize, x: f64| -> f64 {
        if e > k {
            return 0.0;
        }
        let falling: f64 = ((k - e + 1)..=k).map(|f| f as f64).product();
        falling * x.powi((k - e) as i32)
    };
    let defect = |w: &dyn Fn(usize, usize) -> f64, k: usize, upper: f64| -> f64 {
        let mut sum = 0.0;
        for d in 0..m {
            for (j, &c_j) in nodes.iter().enumerate() {
                sum += w(d, j) * deriv(k, d, c_j);
            }
        }
        (sum - upper.powi(k as i32 + 1) / (k + 1) as f64).abs()
    };
    let exact_at = |k: usize| -> bool {
        let rows = (0..s).all(|l| {
            defect(&|d, j| t.coeffs[d][l][j].as_f64(), k, nodes[l]) <= tol
        });
        rows && defect(&|d, j| t.weights[d][j].as_f64(), k, 1.0) <= tol
    };
    (0..64).find(|&k| !exact_at(k)).unwrap_or(64)
}
