//! Noisy sample datasets, min-max normalization, and comparison metrics.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leastsq::{Dataset, FitResult, Normalization};

/// Default noise standard deviation of the sample generators.
pub const DEFAULT_SIGMA: f64 = 0.03;

/// Default `δ` in [`ape`].
pub const DEFAULT_DELTA: f64 = 1e-12;

/// Identifier of the noise generator recorded in dataset metadata.
pub const NOISE_GENERATOR: &str = "ChaCha8Rng(seed_from_u64) + rand_distr::Normal (ziggurat)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// `x/2 + 1`
    Linear,
    /// `3x²/4`
    Quadratic,
    /// `3x³/4 + x/4`
    Cubic,
    /// `sin(2πx)·cos(2πx)`
    Trigonometric,
    /// `Σ a_k x^k`, coefficients in ascending order.
    CustomPolynomial(Vec<f64>),
}

impl GeneratorKind {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            GeneratorKind::Linear => x / 2.0 + 1.0,
            GeneratorKind::Quadratic => 0.75 * x * x,
            GeneratorKind::Cubic => 0.75 * x.powi(3) + 0.25 * x,
            GeneratorKind::Trigonometric => (2.0 * PI * x).sin() * (2.0 * PI * x).cos(),
            GeneratorKind::CustomPolynomial(a) => a.iter().rev().fold(0.0, |acc, c| acc * x + c),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::Linear => "linear",
            GeneratorKind::Quadratic => "quadratic",
            GeneratorKind::Cubic => "cubic",
            GeneratorKind::Trigonometric => "trigonometric",
            GeneratorKind::CustomPolynomial(_) => "custom_polynomial",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(GeneratorKind::Linear),
            "quadratic" => Ok(GeneratorKind::Quadratic),
            "cubic" => Ok(GeneratorKind::Cubic),
            "trigonometric" | "trig" => Ok(GeneratorKind::Trigonometric),
            other => Err(Error::InvalidArgument(format!("unknown data kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, seed: u64) -> Self {
        GeneratorSpec {
            kind,
            n,
            noise_sigma: DEFAULT_SIGMA,
            seed,
        }
    }
}

/// Samples at `x_i = i/(n−1)` with i.i.d. normal noise.
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    if spec.n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples, got {}",
            spec.n
        )));
    }
    if !(spec.noise_sigma >= 0.0) || !spec.noise_sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be non-negative, got {}",
            spec.noise_sigma
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let last = (spec.n - 1) as f64;
    let xs: Vec<f64> = (0..spec.n).map(|i| i as f64 / last).collect();
    let ys = xs
        .iter()
        .map(|&x| spec.kind.eval(x) + noise.sample(&mut rng))
        .collect();
    Dataset::new(xs, ys)
}

/// Map ordinates onto `[0, 1]` and record `(y_min, y_max)`.
pub fn minmax_normalize(data: &Dataset) -> Result<Dataset> {
    let ys = data.ys();
    let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if y_max == y_min {
        return Err(Error::DegenerateRange(y_min));
    }
    let norm = Normalization { y_min, y_max };
    let scaled = ys.iter().map(|&y| norm.normalize(y).clamp(0.0, 1.0)).collect();
    Dataset::with_norm(data.xs().to_vec(), scaled, Some(norm))
}

/// Absolute percentage error of `b` relative to `a`.
pub fn ape(a: f64, b: f64, delta: f64) -> f64 {
    (a - b).abs() / a.abs().max(delta) * 100.0
}

/// Root mean squared error of `fit` on `data`.
///
/// When `data` is normalized the comparison happens in normalized units,
/// otherwise against denormalized predictions.
pub fn rmse(fit: &FitResult, data: &Dataset) -> f64 {
    mse(fit, data).sqrt()
}

pub fn mse(fit: &FitResult, data: &Dataset) -> f64 {
    let normalized = data.norm().is_some();
    let sum: f64 = data
        .iter()
        .map(|(x, y)| {
            let f = if normalized {
                fit.eval_normalized(x)
            } else {
                crate::leastsq::predict(fit, x)
            };
            (y - f).powi(2)
        })
        .sum();
    sum / data.len() as f64
}

/// Sidecar metadata written next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub kind: GeneratorKind,
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub y_min: Option<f64>,
    pub y_max: Option<f64>,
    pub generator: String,
}

impl DatasetMeta {
    pub fn new(spec: &GeneratorSpec, data: &Dataset) -> Self {
        DatasetMeta {
            kind: spec.kind.clone(),
            n: spec.n,
            sigma: spec.noise_sigma,
            seed: spec.seed,
            y_min: data.norm().map(|n| n.y_min),
            y_max: data.norm().map(|n| n.y_max),
            generator: NOISE_GENERATOR.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Point {
    x: f64,
    y: f64,
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("CSV: {e}"))
}

/// `x,y` CSV with one row per point, shortest round-trip digits.
pub fn to_csv(data: &Dataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (x, y) in data.iter() {
        w.serialize(Point { x, y }).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
}

pub fn from_csv(text: &str, norm: Option<Normalization>) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_error)?;
    if header.iter().collect::<Vec<_>>() != ["x", "y"] {
        return Err(Error::InvalidArgument(format!(
            "expected header 'x,y', found '{}'",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in r.deserialize() {
        let p: Point = row.map_err(csv_error)?;
        xs.push(p.x);
        ys.push(p.y);
    }
    Dataset::with_norm(xs, ys, norm)
}

pub fn write_dataset(dir: &Path, stem: &str, data: &Dataset, meta: &DatasetMeta) -> Result<()> {
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&csv, to_csv(data)).map_err(|e| Error::io(&csv, e))?;
    let json = dir.join(format!("{stem}.meta.json"));
    fs::write(&json, serde_json::to_string_pretty(meta)?).map_err(|e| Error::io(&json, e))?;
    Ok(())
}

/// Reads `path` and, if present, the `.meta.json` sidecar next to it.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sidecar = path.with_extension("meta.json");
    let norm = if sidecar.exists() {
        let raw = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: DatasetMeta = serde_json::from_str(&raw)?;
        match (meta.y_min, meta.y_max) {
            (Some(y_min), Some(y_max)) => Some(Normalization { y_min, y_max }),
            _ => None,
        }
    } else {
        None
    };
    from_csv(&text, norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSet;
    use crate::leastsq::{assemble, solve_classical};
    use rand::Rng;

    fn noiseless(kind: GeneratorKind, n: usize) -> Dataset {
        generate(&GeneratorSpec {
            kind,
            n,
            noise_sigma: 0.0,
            seed: 0,
        })
        .unwrap()
    }

    #[test]
    fn generator_formulas() {
        let lin = noiseless(GeneratorKind::Linear, 2);
        assert_eq!(lin.xs(), &[0.0, 1.0]);
        assert_eq!(lin.ys(), &[1.0, 1.5]);

        let trig = noiseless(GeneratorKind::Trigonometric, 5);
        assert_eq!(trig.xs()[1], 0.25);
        assert!(trig.ys()[1].abs() < 1e-15);

        let custom = noiseless(GeneratorKind::CustomPolynomial(vec![1.0 / 3.0, -0.25]), 3);
        assert!((custom.ys()[2] - (1.0 / 3.0 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn generate_validates() {
        let mut spec = GeneratorSpec::new(GeneratorKind::Cubic, 1, 0);
        assert!(generate(&spec).is_err());
        spec.n = 4;
        spec.noise_sigma = -1.0;
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let spec = GeneratorSpec::new(GeneratorKind::Cubic, 64, 11);
        assert_eq!(
            to_csv(&generate(&spec).unwrap()),
            to_csv(&generate(&spec).unwrap())
        );

        let mut seen = std::collections::HashSet::new();
        for seed in 0..100 {
            let data = generate(&GeneratorSpec::new(GeneratorKind::Cubic, 64, seed)).unwrap();
            assert!(seen.insert(to_csv(&data)), "seed {seed} collided");
        }
    }

    #[test]
    fn normalize_examples() {
        let data = Dataset::new(vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        let norm = minmax_normalize(&data).unwrap();
        assert_eq!(norm.ys(), &[0.0, 1.0]);
        assert_eq!(
            norm.norm(),
            Some(Normalization {
                y_min: 1.0,
                y_max: 3.0
            })
        );

        let unit = Dataset::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.25, 1.0]).unwrap();
        assert_eq!(minmax_normalize(&unit).unwrap().ys(), unit.ys());

        let flat = Dataset::new(vec![0.0, 1.0], vec![2.0, 2.0]).unwrap();
        assert!(matches!(minmax_normalize(&flat), Err(Error::DegenerateRange(_))));
    }

    #[test]
    fn normalized_range_attained() {
        let data = generate(&GeneratorSpec::new(GeneratorKind::Trigonometric, 64, 5)).unwrap();
        let norm = minmax_normalize(&data).unwrap();
        let lo = norm.ys().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = norm.ys().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn ape_values() {
        assert!((ape(0.010664, 0.010742, DEFAULT_DELTA) - 0.7314).abs() < 1e-3);
        assert_eq!(ape(0.4, 0.4, DEFAULT_DELTA), 0.0);
        assert!((ape(0.0, 1e-15, 1e-12) - 0.1).abs() < 1e-12);
        for (a, b) in [(0.3, 0.1), (-2.0, 5.0), (1e-3, 0.0)] {
            assert!((ape(a, b, DEFAULT_DELTA) - ape(a, 2.0 * a - b, DEFAULT_DELTA)).abs() < 1e-9);
        }
    }

    #[test]
    fn rmse_and_mse() {
        let data = Dataset::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 6.0]).unwrap();
        let mean = 3.0;
        let fit = FitResult {
            coefficients: vec![mean],
            basis: BasisSet::chebyshev(1).unwrap(),
            norm: None,
        };
        let pop_std = ((4.0 + 1.0 + 9.0) / 3.0f64).sqrt();
        assert!((rmse(&fit, &data) - pop_std).abs() < 1e-12);
        assert!((mse(&fit, &data) - rmse(&fit, &data).powi(2)).abs() < 1e-12);

        let exact = solve_classical(&assemble(
            &noiseless(GeneratorKind::Linear, 16),
            &BasisSet::triangular_uniform(0.0, 1.0, 2).unwrap(),
        ))
        .unwrap();
        assert!(rmse(&exact, &noiseless(GeneratorKind::Linear, 16)) <= 1e-10);
    }

    #[test]
    fn classical_fit_has_smallest_rmse() {
        let data =
            minmax_normalize(&generate(&GeneratorSpec::new(GeneratorKind::Cubic, 64, 9)).unwrap()).unwrap();
        let basis = BasisSet::triangular_uniform(0.0, 1.0, 4).unwrap();
        let best = solve_classical(&assemble(&data, &basis)).unwrap();
        let best_rmse = rmse(&best, &data);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let other = FitResult {
                coefficients: (0..4).map(|_| rng.random_range(-1.0..2.0)).collect(),
                ..best.clone()
            };
            assert!(best_rmse <= rmse(&other, &data));
        }
    }

    #[test]
    fn csv_round_trip() {
        let data = minmax_normalize(&generate(&GeneratorSpec::new(GeneratorKind::Quadratic, 9, 2)).unwrap())
            .unwrap();
        let back = from_csv(&to_csv(&data), data.norm()).unwrap();
        assert_eq!(back, data);
        assert!(from_csv("a,b\n1,2\n", None).is_err());
        assert!(from_csv("x,y\n1,zz\n", None).is_err());
    }
}
