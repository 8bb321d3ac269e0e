//! Thomas elimination for tridiagonal systems.

use crate::error::{Error, Result};

/// Pivots smaller than this in magnitude are treated as singular.
pub const PIVOT_EPS: f64 = 1e-30;

/// `A x = rhs` with `A` given by its three diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    /// Sub-diagonal, length `n - 1`.
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    /// Super-diagonal, length `n - 1`.
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let sys = Self {
            lower,
            diag,
            upper,
            rhs,
        };
        sys.check_shape()?;
        Ok(sys)
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.diag.len();
        if n == 0 {
            return Err(Error::Shape("empty system".into()));
        }
        if self.lower.len() != n - 1 || self.upper.len() != n - 1 || self.rhs.len() != n {
            return Err(Error::Shape(format!(
                "n = {n}: lower {}, upper {}, rhs {}",
                self.lower.len(),
                self.upper.len(),
                self.rhs.len()
            )));
        }
        Ok(())
    }

    /// Whether every row satisfies `|d_i| >= |l_i| + |u_i|`, and whether
    /// the inequality is strict in every row.
    pub fn diagonal_dominance(&self) -> Dominance {
        let n = self.diag.len();
        let mut strict = true;
        for i in 0..n {
            let off = if i > 0 { self.lower[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.upper[i].abs() } else { 0.0 };
            let d = self.diag[i].abs();
            if d < off {
                return Dominance::None;
            }
            if d == off {
                strict = false;
            }
        }
        if strict {
            Dominance::Strict
        } else {
            Dominance::Weak
        }
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.upper[i] * x[i + 1];
                }
                y
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    Strict,
    Weak,
    None,
}

pub fn solve_tridiagonal(sys: &TridiagonalSystem) -> Result<Vec<f64>> {
    sys.check_shape()?;
    let n = sys.len();
    let mut scratch = vec![0.0; n];
    let mut x = vec![0.0; n];
    solve_into(
        &sys.lower,
        &sys.diag,
        &sys.upper,
        &sys.rhs,
        &mut scratch,
        &mut x,
    )?;
    Ok(x)
}

/// Allocation-free Thomas sweep. `scratch` and `out` must have length `n`;
/// lengths of the diagonals are the caller's responsibility.
pub fn solve_into(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    debug_assert!(rhs.len() == n && scratch.len() == n && out.len() == n);
    debug_assert!(lower.len() + 1 == n && upper.len() + 1 == n);

    // scratch holds the modified super-diagonal, out the modified rhs
    let mut pivot = diag[0];
    if pivot.abs() < PIVOT_EPS || !pivot.is_finite() {
        return Err(Error::SingularPivot { index: 0, pivot });
    }
    out[0] = rhs[0] / pivot;
    for i in 1..n {
        scratch[i - 1] = upper[i - 1] / pivot;
        pivot = diag[i] - lower[i - 1] * scratch[i - 1];
        if pivot.abs() < PIVOT_EPS || !pivot.is_finite() {
            return Err(Error::SingularPivot { index: i, pivot });
        }
        out[i] = (rhs[i] - lower[i - 1] * out[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        out[i] -= scratch[i] * out[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity() {
        let sys = TridiagonalSystem::new(
            vec![0.0; 2],
            vec![1.0; 3],
            vec![0.0; 2],
            vec![3.0, -1.0, 4.0],
        )
        .unwrap();
        assert_eq!(solve_tridiagonal(&sys).unwrap(), vec![3.0, -1.0, 4.0]);
        assert_eq!(sys.diagonal_dominance(), Dominance::Strict);
    }

    #[test]
    fn two_by_two() {
        let sys =
            TridiagonalSystem::new(vec![-1.0], vec![2.0, 2.0], vec![-1.0], vec![1.0, 1.0]).unwrap();
        let x = solve_tridiagonal(&sys).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_row() {
        let sys = TridiagonalSystem::new(vec![], vec![4.0], vec![], vec![2.0]).unwrap();
        assert_eq!(solve_tridiagonal(&sys).unwrap(), vec![0.5]);
    }

    #[test]
    fn zero_pivot_reports_row() {
        let sys = TridiagonalSystem::new(
            vec![1.0, 1.0],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        assert_eq!(
            solve_tridiagonal(&sys),
            Err(Error::SingularPivot {
                index: 1,
                pivot: 0.0
            })
        );
        let sys = TridiagonalSystem::new(vec![], vec![0.0], vec![], vec![1.0]).unwrap();
        assert!(matches!(
            solve_tridiagonal(&sys),
            Err(Error::SingularPivot { index: 0, .. })
        ));
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            TridiagonalSystem::new(vec![1.0], vec![1.0; 3], vec![1.0; 2], vec![0.0; 3]),
            Err(Error::Shape(_))
        ));
        assert!(TridiagonalSystem::new(vec![], vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn weak_dominance_flag() {
        let sys = TridiagonalSystem::new(
            vec![-1.0, -1.0],
            vec![1.0, 2.0, 1.0],
            vec![-1.0, -1.0],
            vec![0.0; 3],
        )
        .unwrap();
        assert_eq!(sys.diagonal_dominance(), Dominance::Weak);
    }

    fn dominant_system() -> impl Strategy<Value = TridiagonalSystem> {
        (1usize..40).prop_flat_map(|n| {
            let off = n.saturating_sub(1);
            (
                prop::collection::vec(-1.0f64..1.0, off),
                prop::collection::vec(-1.0f64..1.0, off),
                prop::collection::vec(0.1f64..2.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
                prop::bool::ANY,
            )
                .prop_map(move |(lower, upper, margin, rhs, negate)| {
                    let diag = (0..n)
                        .map(|i| {
                            let off = if i > 0 { lower[i - 1].abs() } else { 0.0 }
                                + if i + 1 < n { upper[i].abs() } else { 0.0 };
                            let d = off + margin[i];
                            if negate {
                                -d
                            } else {
                                d
                            }
                        })
                        .collect();
                    TridiagonalSystem {
                        lower,
                        diag,
                        upper,
                        rhs,
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn residual_is_tiny_for_dominant_systems(sys in dominant_system()) {
            let x = solve_tridiagonal(&sys).unwrap();
            let ax = sys.apply(&x);
            let res = ax.iter().zip(&sys.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = sys.rhs.iter().map(|b| b.abs()).fold(0.0, f64::max);
            prop_assert!(res <= 1e-12 * scale.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn solve_is_deterministic(sys in dominant_system()) {
            let a = solve_tridiagonal(&sys).unwrap();
            let b = solve_tridiagonal(&sys.clone()).unwrap();
            prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
