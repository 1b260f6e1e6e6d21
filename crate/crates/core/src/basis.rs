//! Standardized functions for the expansion `f(x) = Σ c_j φ_j(x)`.
//!
//! Two families are supported: piecewise-linear hat functions over a knot
//! sequence, and Chebyshev polynomials of the first kind.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chebyshev polynomial `T_j(x)` via the three-term recurrence.
pub fn eval_chebyshev(j: usize, x: f64) -> f64 {
    match j {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 2..=j {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Hat function `Λ_j(x)` over `knots`.
///
/// Support intervals are half-open on the right, except that the last
/// function also takes the value 1 at the final knot so that the family is
/// a partition of unity on the closed knot range.
pub fn eval_triangular(j: usize, x: f64, knots: &[f64]) -> Result<f64> {
    validate_knots(knots)?;
    if j >= knots.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: knots.len(),
        });
    }
    Ok(hat(j, x, knots))
}

// Assumes validated knots and j < knots.len().
fn hat(j: usize, x: f64, knots: &[f64]) -> f64 {
    let m = knots.len();
    if j > 0 && x >= knots[j - 1] && x < knots[j] {
        return (x - knots[j - 1]) / (knots[j] - knots[j - 1]);
    }
    if j + 1 < m && x >= knots[j] && x < knots[j + 1] {
        return (knots[j + 1] - x) / (knots[j + 1] - knots[j]);
    }
    if j + 1 == m && x == knots[j] {
        return 1.0;
    }
    0.0
}

fn validate_knots(knots: &[f64]) -> Result<()> {
    let ok = knots.len() >= 2 && knots.iter().all(|k| k.is_finite()) && knots.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidKnots(knots.to_vec()))
    }
}

/// `m` equally spaced knots from `x_min` to `x_max`, both inclusive.
pub fn uniform_knots(x_min: f64, x_max: f64, m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 knots, got {m}")));
    }
    if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "empty knot range [{x_min}, {x_max}]"
        )));
    }
    let step = (x_max - x_min) / (m - 1) as f64;
    let mut knots: Vec<f64> = (0..m).map(|i| x_min + step * i as f64).collect();
    knots[m - 1] = x_max;
    Ok(knots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Triangular,
    Chebyshev,
}

/// A family of `m` basis functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasisSet {
    Triangular {
        knots: Vec<f64>,
    },
    /// `domain`, when set, affinely maps `[lo, hi]` onto `[-1, 1]` before
    /// evaluating `T_j`. By default polynomials are evaluated at raw `x`.
    Chebyshev {
        m: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<(f64, f64)>,
    },
}

impl BasisSet {
    pub fn triangular(knots: Vec<f64>) -> Result<Self> {
        validate_knots(&knots)?;
        Ok(BasisSet::Triangular { knots })
    }

    pub fn triangular_uniform(x_min: f64, x_max: f64, m: usize) -> Result<Self> {
        Ok(BasisSet::Triangular {
            knots: uniform_knots(x_min, x_max, m)?,
        })
    }

    pub fn chebyshev(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("Chebyshev basis needs m >= 1".into()));
        }
        Ok(BasisSet::Chebyshev { m, domain: None })
    }

    pub fn chebyshev_remapped(m: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "empty Chebyshev domain [{lo}, {hi}]"
            )));
        }
        let mut basis = Self::chebyshev(m)?;
        if let BasisSet::Chebyshev { domain, .. } = &mut basis {
            *domain = Some((lo, hi));
        }
        Ok(basis)
    }

    pub fn kind(&self) -> BasisKind {
        match self {
            BasisSet::Triangular { .. } => BasisKind::Triangular,
            BasisSet::Chebyshev { .. } => BasisKind::Chebyshev,
        }
    }

    /// Number of functions `m`.
    pub fn len(&self) -> usize {
        match self {
            BasisSet::Triangular { knots } => knots.len(),
            BasisSet::Chebyshev { m, .. } => *m,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn knots(&self) -> Option<&[f64]> {
        match self {
            BasisSet::Triangular { knots } => Some(knots),
            BasisSet::Chebyshev { .. } => None,
        }
    }

    pub fn eval(&self, j: usize, x: f64) -> Result<f64> {
        if j >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.len(),
            });
        }
        Ok(self.eval_unchecked(j, x))
    }

    pub(crate) fn eval_unchecked(&self, j: usize, x: f64) -> f64 {
        match self {
            BasisSet::Triangular { knots } => hat(j, x, knots),
            BasisSet::Chebyshev { domain, .. } => eval_chebyshev(j, remap(*domain, x)),
        }
    }

    /// All `m` function values at `x`, written into `out`.
    pub fn eval_all(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        match self {
            BasisSet::Triangular { knots } => {
                out.fill(0.0);
                let m = knots.len();
                if x < knots[0] || x > knots[m - 1] {
                    return;
                }
                if x == knots[m - 1] {
                    out[m - 1] = 1.0;
                    return;
                }
                // interval [k_i, k_{i+1}) containing x
                let i = knots.partition_point(|&k| k <= x) - 1;
                out[i] = hat(i, x, knots);
                out[i + 1] = hat(i + 1, x, knots);
            }
            BasisSet::Chebyshev { domain, .. } => {
                let x = remap(*domain, x);
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = match j {
                        0 => 1.0,
                        1 => x,
                        _ => 0.0,
                    };
                }
                for j in 2..out.len() {
                    out[j] = 2.0 * x * out[j - 1] - out[j - 2];
                }
            }
        }
    }
}

fn remap(domain: Option<(f64, f64)>, x: f64) -> f64 {
    match domain {
        Some((lo, hi)) => (2.0 * x - lo - hi) / (hi - lo),
        None => x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chebyshev_low_orders() {
        assert_eq!(eval_chebyshev(0, 0.7), 1.0);
        assert_eq!(eval_chebyshev(1, 0.7), 0.7);
        assert!((eval_chebyshev(2, 0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangular_examples() {
        let knots = [0.0, 0.5, 1.0];
        assert_eq!(eval_triangular(1, 0.5, &knots).unwrap(), 1.0);
        assert_eq!(eval_triangular(0, 0.5, &knots).unwrap(), 0.0);
        assert!((eval_triangular(1, 0.25, &knots).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(eval_triangular(2, 1.0, &knots).unwrap(), 1.0);
        assert_eq!(eval_triangular(0, 0.0, &knots).unwrap(), 1.0);
    }

    #[test]
    fn triangular_rejects_bad_knots() {
        assert!(matches!(
            eval_triangular(0, 0.1, &[0.0, 0.0, 1.0]),
            Err(Error::InvalidKnots(_))
        ));
        assert!(BasisSet::triangular(vec![1.0, 0.5]).is_err());
        assert!(BasisSet::triangular(vec![0.0]).is_err());
    }

    #[test]
    fn dispatch() {
        let cheb = BasisSet::chebyshev(3).unwrap();
        assert_eq!(cheb.eval(0, 0.2).unwrap(), 1.0);
        assert!(matches!(
            cheb.eval(3, 0.2),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
        let tri = BasisSet::triangular(vec![0.0, 1.0]).unwrap();
        assert_eq!(tri.eval(0, 0.0).unwrap(), 1.0);
        assert_eq!(tri.eval(1, 1.0).unwrap(), 1.0);
        assert_eq!(tri.eval(1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn knots() {
        assert_eq!(uniform_knots(0.0, 1.0, 2).unwrap(), vec![0.0, 1.0]);
        assert_eq!(uniform_knots(0.0, 1.0, 3).unwrap(), vec![0.0, 0.5, 1.0]);
        let k = uniform_knots(0.0, 100.0, 9).unwrap();
        let expected: Vec<f64> = (0..9).map(|i| 12.5 * i as f64).collect();
        assert_eq!(k, expected);
        assert!(uniform_knots(0.0, 1.0, 1).is_err());
        assert!(uniform_knots(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn remapped_chebyshev_hits_interval_ends() {
        let b = BasisSet::chebyshev_remapped(4, 0.0, 1.0).unwrap();
        assert!((b.eval(3, 0.0).unwrap() + 1.0).abs() < 1e-15);
        assert!((b.eval(3, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    fn knot_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, 1..12).prop_map(|gaps| {
            let mut acc = -0.3;
            let mut knots = vec![acc];
            for g in gaps {
                acc += g;
                knots.push(acc);
            }
            knots
        })
    }

    proptest! {
        #[test]
        fn partition_of_unity(knots in knot_vec(), t in 0.0f64..=1.0) {
            let lo = knots[0];
            let hi = *knots.last().unwrap();
            let x = lo + t * (hi - lo);
            let basis = BasisSet::triangular(knots.clone()).unwrap();
            let sum: f64 = (0..basis.len()).map(|j| basis.eval(j, x).unwrap()).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);

            let mut all = vec![0.0; basis.len()];
            basis.eval_all(x, &mut all);
            for j in 0..basis.len() {
                prop_assert_eq!(all[j], basis.eval(j, x).unwrap());
            }
        }

        #[test]
        fn compact_support(knots in knot_vec(), x in -1.0f64..12.0) {
            let m = knots.len();
            for j in 0..m {
                let v = eval_triangular(j, x, &knots).unwrap();
                let left = if j == 0 { knots[0] } else { knots[j - 1] };
                let right = if j + 1 == m { knots[m - 1] } else { knots[j + 1] };
                if x < left || x > right {
                    prop_assert_eq!(v, 0.0);
                }
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn chebyshev_bounded(j in 0usize..=20, x in -1.0f64..=1.0) {
            prop_assert!(eval_chebyshev(j, x).abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn chebyshev_cosine_identity(j in 0usize..=10, theta in 0.0f64..std::f64::consts::PI) {
            let lhs = eval_chebyshev(j, theta.cos());
            prop_assert!((lhs - (j as f64 * theta).cos()).abs() <= 1e-9);
        }
    }
}
