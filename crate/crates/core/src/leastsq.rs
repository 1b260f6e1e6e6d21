//! Normal equations of the linear least-squares problem and their classical
//! solution.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::error::{Error, Result};

/// Condition number above which the pseudoinverse path is taken.
pub const COND_LIMIT: f64 = 1e12;

/// Min-max normalization record `(y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub y_min: f64,
    pub y_max: f64,
}

impl Normalization {
    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.y_min) / (self.y_max - self.y_min)
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        self.y_min + (self.y_max - self.y_min) * y
    }
}

/// Ordered sample pairs. `ys` are normalized when `norm` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    xs: Vec<f64>,
    ys: Vec<f64>,
    norm: Option<Normalization>,
}

impl Dataset {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        Self::with_norm(xs, ys, None)
    }

    pub fn with_norm(xs: Vec<f64>, ys: Vec<f64>, norm: Option<Normalization>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::InvalidArgument("dataset must be nonempty".into()));
        }
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        if !xs.iter().chain(&ys).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "dataset contains non-finite values".into(),
            ));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "abscissae must be strictly increasing".into(),
            ));
        }
        if norm.is_some() && !ys.iter().all(|y| (0.0..=1.0).contains(y)) {
            return Err(Error::InvalidArgument(
                "normalized ordinates must lie in [0, 1]".into(),
            ));
        }
        Ok(Dataset { xs, ys, norm })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn norm(&self) -> Option<Normalization> {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }
}

/// `W_jk = Σ φ_j(x_i) φ_k(x_i)`, `b_j = Σ y_i φ_j(x_i)`.
#[derive(Debug, Clone)]
pub struct NormalSystem {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub basis: BasisSet,
    /// Carried through to fits built from this system.
    pub norm: Option<Normalization>,
    /// `Σ y_i²`, so that the residual sum of squares is `Z(c) + y_sq_sum`.
    pub y_sq_sum: f64,
}

impl NormalSystem {
    /// System from explicit `W` and `b`. `W` must be square and symmetric.
    pub fn from_parts(w: DMatrix<f64>, b: DVector<f64>, basis: BasisSet) -> Result<Self> {
        let m = basis.len();
        if w.nrows() != m || w.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: w.nrows(),
            });
        }
        if b.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: b.len(),
            });
        }
        let scale = w.amax().max(f64::MIN_POSITIVE);
        if (&w - w.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidArgument("W must be symmetric".into()));
        }
        Ok(NormalSystem {
            w,
            b,
            basis,
            norm: None,
            y_sq_sum: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    pub basis: BasisSet,
    pub norm: Option<Normalization>,
}

impl FitResult {
    /// Expansion value `Σ c_j φ_j(x)` in the space the fit was trained in.
    pub fn eval_normalized(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(j, c)| c * self.basis.eval_unchecked(j, x))
            .sum()
    }
}

/// Assemble the normal system for `data` in `basis`.
pub fn assemble(data: &Dataset, basis: &BasisSet) -> NormalSystem {
    let m = basis.len();
    let mut w = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    let mut phi = vec![0.0; m];
    let mut y_sq_sum = 0.0;
    for (x, y) in data.iter() {
        basis.eval_all(x, &mut phi);
        for j in 0..m {
            if phi[j] == 0.0 {
                continue;
            }
            b[j] += y * phi[j];
            for k in j..m {
                w[(j, k)] += phi[j] * phi[k];
            }
        }
        y_sq_sum += y * y;
    }
    w.fill_lower_triangle_with_upper_triangle();
    NormalSystem {
        w,
        b,
        basis: basis.clone(),
        norm: data.norm(),
        y_sq_sum,
    }
}

/// Minimizer of `Z(c) = cᵀWc − 2cᵀb`.
///
/// Uses an LU solve when `W` is well conditioned and falls back to the
/// minimum-norm SVD solution otherwise.
pub fn solve_classical(sys: &NormalSystem) -> Result<FitResult> {
    let finite = sys.w.iter().chain(sys.b.iter()).all(|v| v.is_finite());
    if !finite {
        return Err(Error::SingularSystem);
    }
    let svd = sys.w.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let well_conditioned = s_min > 0.0 && s_max / s_min <= COND_LIMIT;

    let lu_solution = if well_conditioned {
        sys.w.clone().lu().solve(&sys.b)
    } else {
        None
    };
    let c = match lu_solution {
        Some(c) => c,
        None => {
            let eps = f64::EPSILON * s_max * sys.dim() as f64;
            svd.solve(&sys.b, eps).map_err(|_| Error::SingularSystem)?
        }
    };
    if !c.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(FitResult {
        coefficients: c.iter().copied().collect(),
        basis: sys.basis.clone(),
        norm: sys.norm,
    })
}

/// `Z(c) = cᵀWc − 2cᵀb`.
pub fn objective(sys: &NormalSystem, c: &[f64]) -> Result<f64> {
    if c.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: c.len(),
        });
    }
    let c = DVector::from_column_slice(c);
    Ok((c.transpose() * &sys.w * &c)[0] - 2.0 * c.dot(&sys.b))
}

/// Fit value at `x`, denormalized when the fit carries a normalization record.
pub fn predict(fit: &FitResult, x: f64) -> f64 {
    let v = fit.eval_normalized(x);
    match fit.norm {
        Some(n) => n.denormalize(v),
        None => v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn system(w: &[f64], b: &[f64]) -> NormalSystem {
        let m = b.len();
        NormalSystem::from_parts(
            DMatrix::from_row_slice(m, m, w),
            DVector::from_column_slice(b),
            BasisSet::chebyshev(m).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn assemble_two_point_triangular() {
        let data = Dataset::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let basis = BasisSet::triangular(vec![0.0, 1.0]).unwrap();
        let sys = assemble(&data, &basis);
        assert_eq!(sys.w, DMatrix::identity(2, 2));
        assert_eq!(sys.b, DVector::from_column_slice(&[1.0, 1.0]));
    }

    #[test]
    fn assemble_constant_chebyshev() {
        let data = Dataset::new(vec![0.0, 0.3, 0.9], vec![0.5, -1.0, 2.0]).unwrap();
        let sys = assemble(&data, &BasisSet::chebyshev(1).unwrap());
        assert_eq!(sys.w[(0, 0)], 3.0);
        assert!((sys.b[0] - 1.5).abs() < 1e-15);
        assert!((sys.y_sq_sum - 5.25).abs() < 1e-15);
    }

    #[test]
    fn classical_solutions() {
        let fit = solve_classical(&system(&[1.0, 0.0, 0.0, 1.0], &[0.3, 0.7])).unwrap();
        assert_eq!(fit.coefficients, vec![0.3, 0.7]);

        let fit = solve_classical(&system(&[2.0, 0.0, 0.0, 0.0], &[2.0, 0.0])).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(fit.coefficients[1].abs() < 1e-12);
    }

    #[test]
    fn non_finite_system_is_singular() {
        let mut sys = system(&[1.0, 0.0, 0.0, 1.0], &[0.3, 0.7]);
        sys.b[0] = f64::NAN;
        assert!(matches!(solve_classical(&sys), Err(Error::SingularSystem)));
    }

    #[test]
    fn objective_values() {
        let sys = system(&[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]);
        assert_eq!(objective(&sys, &[0.0, 0.0]).unwrap(), 0.0);
        let sys = system(&[1.0, 0.0, 0.0, 1.0], &[1.0, 1.0]);
        assert_eq!(objective(&sys, &[1.0, 1.0]).unwrap(), -2.0);
        assert!(matches!(
            objective(&sys, &[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn predict_plain_and_denormalized() {
        let fit = FitResult {
            coefficients: vec![1.0, 0.0, 0.0],
            basis: BasisSet::chebyshev(3).unwrap(),
            norm: None,
        };
        assert_eq!(predict(&fit, 0.37), 1.0);
        let fit = FitResult {
            coefficients: vec![0.0, 1.0],
            basis: BasisSet::triangular(vec![0.0, 1.0]).unwrap(),
            norm: None,
        };
        assert_eq!(predict(&fit, 1.0), 1.0);
        let fit = FitResult {
            norm: Some(Normalization {
                y_min: 2.0,
                y_max: 6.0,
            }),
            ..fit
        };
        assert_eq!(predict(&fit, 1.0), 6.0);
        assert_eq!(predict(&fit, 0.5), 4.0);
    }

    fn random_system(rng: &mut ChaCha8Rng, n: usize, basis: BasisSet) -> NormalSystem {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        assemble(&Dataset::new(xs, ys).unwrap(), &basis)
    }

    #[test]
    fn optimality_and_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for basis in [
            BasisSet::triangular_uniform(0.0, 1.0, 5).unwrap(),
            BasisSet::chebyshev(4).unwrap(),
        ] {
            let sys = random_system(&mut rng, 40, basis);
            let fit = solve_classical(&sys).unwrap();
            let c = DVector::from_column_slice(&fit.coefficients);
            let grad = 2.0 * (&sys.w * &c - &sys.b);
            assert!(grad.norm() <= 1e-8 * sys.b.norm().max(1.0));

            let z_star = objective(&sys, &fit.coefficients).unwrap();
            for _ in 0..100 {
                let v: Vec<f64> = (0..sys.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                let shifted: Vec<f64> = fit
                    .coefficients
                    .iter()
                    .zip(&v)
                    .map(|(c, v)| c + 1e-3 * v / norm)
                    .collect();
                assert!(z_star <= objective(&sys, &shifted).unwrap());
            }
            // random cloud of perturbations around the optimum
            for _ in 0..1000 {
                let c: Vec<f64> = fit
                    .coefficients
                    .iter()
                    .map(|c| c + rng.random_range(-0.5..0.5))
                    .collect();
                assert!(z_star <= objective(&sys, &c).unwrap());
            }
        }
    }

    #[test]
    fn knots_at_data_interpolate_exactly() {
        let xs: Vec<f64> = (0..12).map(|i| (i as f64).powf(1.3)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 0.7).sin()).collect();
        let data = Dataset::new(xs.clone(), ys).unwrap();
        let basis = BasisSet::triangular(xs).unwrap();
        let fit = solve_classical(&assemble(&data, &basis)).unwrap();
        let sse: f64 = data.iter().map(|(x, y)| (predict(&fit, x) - y).powi(2)).sum();
        assert!((sse / data.len() as f64).sqrt() <= 1e-10);
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![], vec![]).is_err());
        assert!(Dataset::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Dataset::new(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        let norm = Some(Normalization {
            y_min: 0.0,
            y_max: 2.0,
        });
        assert!(Dataset::with_norm(vec![0.0, 1.0], vec![0.0, 1.5], norm).is_err());
    }
}
