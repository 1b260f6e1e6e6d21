//! Binary fixed-point encoding of coefficients and the QUBO form of the
//! least-squares objective.
//!
//! Each coefficient uses `d` two's-complement digits with the binary point
//! after digit `p`: `c_j = Σ_r ψ_{j·d+r} σ_r 2^{r−p}` where `σ_r = −1` for
//! the most significant digit and `+1` otherwise. Bits are laid out
//! coefficient-major, least significant digit first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leastsq::{NormalSystem, Normalization};

/// Magnitude below which a matrix entry counts as zero for structure
/// queries.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointFormat {
    digits: u32,
    point: u32,
}

impl FixedPointFormat {
    pub fn new(digits: u32, point: u32) -> Result<Self> {
        if digits == 0 || digits > 52 {
            return Err(Error::InvalidArgument(format!(
                "digit count must be in 1..=52, got {digits}"
            )));
        }
        if point >= digits {
            return Err(Error::InvalidArgument(format!(
                "fixed-point position {point} must be below digit count {digits}"
            )));
        }
        Ok(FixedPointFormat { digits, point })
    }

    /// `d`
    pub fn digits(&self) -> u32 {
        self.digits
    }

    /// `p`
    pub fn point(&self) -> u32 {
        self.point
    }

    pub fn sign(&self, r: u32) -> f64 {
        if r + 1 == self.digits {
            -1.0
        } else {
            1.0
        }
    }

    /// Signed place value `σ_r 2^{r−p}` of digit `r`.
    pub fn weight(&self, r: u32) -> f64 {
        self.sign(r) * 2f64.powi(r as i32 - self.point as i32)
    }

    /// Quantization step `2^{−p}`.
    pub fn step(&self) -> f64 {
        2f64.powi(-(self.point as i32))
    }

    pub fn min_value(&self) -> f64 {
        -(2f64.powi(self.digits as i32 - 1)) * self.step()
    }

    pub fn max_value(&self) -> f64 {
        (2f64.powi(self.digits as i32 - 1) - 1.0) * self.step()
    }

    /// Nearest representable value, ties toward −∞. Errors outside the range.
    pub fn quantize(&self, c: f64) -> Result<f64> {
        Ok(self.to_integer(c)? as f64 * self.step())
    }

    fn to_integer(&self, c: f64) -> Result<i64> {
        let (lo, hi) = (self.min_value(), self.max_value());
        if !(lo..=hi).contains(&c) {
            return Err(Error::OutOfRange { value: c, lo, hi });
        }
        Ok((c / self.step() - 0.5).ceil() as i64)
    }
}

/// Bit vector `ψ` of length `m·d` for the coefficients `c`.
pub fn encode_coefficients(c: &[f64], fmt: FixedPointFormat) -> Result<Vec<u8>> {
    let d = fmt.digits() as usize;
    let mut bits = Vec::with_capacity(c.len() * d);
    for &value in c {
        let k = fmt.to_integer(value)?;
        let pattern = (k as u64) & ((1u64 << d) - 1);
        bits.extend((0..d).map(|r| ((pattern >> r) & 1) as u8));
    }
    Ok(bits)
}

/// Coefficients from a bit vector laid out as in [`encode_coefficients`].
pub fn decode_bits(bits: &[u8], fmt: FixedPointFormat, m: usize) -> Result<Vec<f64>> {
    let d = fmt.digits() as usize;
    if bits.len() != m * d {
        return Err(Error::DimensionMismatch {
            expected: m * d,
            got: bits.len(),
        });
    }
    Ok(bits
        .chunks(d)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .filter(|(_, &b)| b != 0)
                .map(|(r, _)| fmt.weight(r as u32))
                .sum()
        })
        .collect())
}

/// How the bits of a QUBO map back onto coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitLayout {
    pub m: usize,
    pub fmt: FixedPointFormat,
}

/// Dense `N × N` QUBO matrix with optional decoding metadata.
///
/// Energies are `ψᵀQψ` over the full matrix, so symmetric and
/// upper-triangular storage describe the same problem.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    n: usize,
    q: Vec<f64>,
    layout: Option<BitLayout>,
    norm: Option<Normalization>,
}

impl QuboProblem {
    /// Problem from a row-major `n × n` matrix without decoding metadata.
    pub fn from_dense(n: usize, q: Vec<f64>) -> Result<Self> {
        if q.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: q.len(),
            });
        }
        if !q.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("QUBO entries must be finite".into()));
        }
        Ok(QuboProblem {
            n,
            q,
            layout: None,
            norm: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Self::from_dense(n, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.q[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn layout(&self) -> Option<BitLayout> {
        self.layout
    }

    pub fn norm(&self) -> Option<Normalization> {
        self.norm
    }

    pub fn with_layout(mut self, layout: BitLayout, norm: Option<Normalization>) -> Result<Self> {
        let expected = layout.m * layout.fmt.digits() as usize;
        if expected != self.n {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.n,
            });
        }
        self.layout = Some(layout);
        self.norm = norm;
        Ok(self)
    }

    /// `ψᵀQψ`.
    pub fn energy(&self, bits: &[u8]) -> f64 {
        debug_assert_eq!(bits.len(), self.n);
        let ones: Vec<usize> = (0..self.n).filter(|&i| bits[i] != 0).collect();
        let mut e = 0.0;
        for &i in &ones {
            let row = self.row(i);
            for &j in &ones {
                e += row[j];
            }
        }
        e
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.q.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_upper_triangular(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == 0.0))
    }

    /// Symmetric part `(Q + Qᵀ)/2`, row-major.
    pub fn symmetric_part(&self) -> Vec<f64> {
        let n = self.n;
        let mut s = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                s[i * n + j] = 0.5 * (self.get(i, j) + self.get(j, i));
            }
        }
        s
    }

    /// Decode bits into coefficients using the attached layout.
    pub fn decode(&self, bits: &[u8]) -> Result<Vec<f64>> {
        let layout = self
            .layout
            .ok_or_else(|| Error::InvalidArgument("QUBO has no coefficient layout to decode with".into()))?;
        decode_bits(bits, layout.fmt, layout.m)
    }

    /// Largest `|⌊μ/d⌋ − ⌊ν/d⌋|` over entries with `|Q_μν| > ZERO_TOL`.
    pub fn block_bandwidth(&self) -> Option<usize> {
        let d = self.layout?.fmt.digits() as usize;
        let mut width = 0;
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(i, j).abs() > ZERO_TOL {
                    width = width.max((i / d).abs_diff(j / d));
                }
            }
        }
        Some(width)
    }

    pub fn to_json(&self) -> QuboJson {
        let upper = upper_triangularize(self);
        let mut entries = Vec::new();
        for i in 0..upper.n {
            for j in i..upper.n {
                let v = upper.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        QuboJson {
            n: self.n,
            entries,
            meta: QuboMeta {
                m: self.layout.map(|l| l.m),
                d: self.layout.map(|l| l.fmt.digits()),
                p: self.layout.map(|l| l.fmt.point()),
                y_min: self.norm.map(|n| n.y_min),
                y_max: self.norm.map(|n| n.y_max),
            },
        }
    }

    pub fn from_json(json: &QuboJson) -> Result<Self> {
        let n = json.n;
        let mut q = vec![0.0; n * n];
        for &(i, j, v) in &json.entries {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i}, {j}) outside {n}x{n} matrix"
                )));
            }
            q[i * n + j] += v;
        }
        let problem = Self::from_dense(n, q)?;
        let meta = &json.meta;
        match (meta.m, meta.d, meta.p) {
            (Some(m), Some(d), Some(p)) => {
                let norm = match (meta.y_min, meta.y_max) {
                    (Some(y_min), Some(y_max)) => Some(Normalization { y_min, y_max }),
                    _ => None,
                };
                problem.with_layout(
                    BitLayout {
                        m,
                        fmt: FixedPointFormat::new(d, p)?,
                    },
                    norm,
                )
            }
            _ => Ok(problem),
        }
    }
}

/// Wire form of a QUBO: upper-triangular nonzeros plus decoding metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboJson {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub meta: QuboMeta,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuboMeta {
    pub m: Option<usize>,
    pub d: Option<u32>,
    pub p: Option<u32>,
    pub y_min: Option<f64>,
    pub y_max: Option<f64>,
}

/// QUBO whose energy equals `Z(decode(ψ))` for every bit vector `ψ`.
pub fn build_qubo(sys: &NormalSystem, fmt: FixedPointFormat) -> QuboProblem {
    let m = sys.dim();
    let d = fmt.digits() as usize;
    let n = m * d;
    let weights: Vec<f64> = (0..d as u32).map(|r| fmt.weight(r)).collect();
    let mut q = vec![0.0; n * n];
    for mu in 0..n {
        let (jm, rm) = (mu / d, mu % d);
        for nu in 0..n {
            let (jn, rn) = (nu / d, nu % d);
            q[mu * n + nu] = weights[rm] * weights[rn] * sys.w[(jm, jn)];
        }
        q[mu * n + mu] -= 2.0 * weights[rm] * sys.b[jm];
    }
    QuboProblem {
        n,
        q,
        layout: Some(BitLayout { m, fmt }),
        norm: sys.norm,
    }
}

/// Fold the lower triangle onto the upper one.
pub fn upper_triangularize(q: &QuboProblem) -> QuboProblem {
    let n = q.n;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        out[i * n + i] = q.get(i, i);
        for j in i + 1..n {
            out[i * n + j] = q.get(i, j) + q.get(j, i);
        }
    }
    QuboProblem { q: out, ..q.clone() }
}

/// Spin-glass form `Σ_{i<j} J_ij s_i s_j + Σ h_i s_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    pub n: usize,
    /// Row-major, strictly upper triangular.
    pub couplings: Vec<f64>,
    pub fields: Vec<f64>,
    pub offset: f64,
}

impl IsingProblem {
    /// Energy without the offset, for spins in {−1, +1}.
    pub fn energy(&self, spins: &[i8]) -> f64 {
        let n = self.n;
        let mut e = 0.0;
        for i in 0..n {
            let si = spins[i] as f64;
            e += self.fields[i] * si;
            for j in i + 1..n {
                e += self.couplings[i * n + j] * si * spins[j] as f64;
            }
        }
        e
    }
}

/// Ising problem with `Z_Ising(s) + offset == ψᵀQψ` under `s = 2ψ − 1`.
pub fn to_ising(q: &QuboProblem) -> IsingProblem {
    let upper = if q.is_upper_triangular() {
        q.clone()
    } else {
        upper_triangularize(q)
    };
    let n = upper.n;
    let mut couplings = vec![0.0; n * n];
    let mut fields = vec![0.0; n];
    let mut offset = 0.0;
    for i in 0..n {
        let diag = upper.get(i, i);
        fields[i] += diag / 2.0;
        offset += diag / 2.0;
        for j in i + 1..n {
            let r = upper.get(i, j);
            couplings[i * n + j] = r / 4.0;
            fields[i] += r / 4.0;
            fields[j] += r / 4.0;
            offset += r / 4.0;
        }
    }
    IsingProblem {
        n,
        couplings,
        fields,
        offset,
    }
}

/// Fraction of nonzero strictly-upper entries of the upper-triangular form.
pub fn density(q: &QuboProblem) -> f64 {
    let n = q.n;
    if n < 2 {
        return 0.0;
    }
    let upper = upper_triangularize(q);
    let nonzero = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| upper.get(i, j).abs() > ZERO_TOL)
        .count();
    nonzero as f64 / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSet;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fmt(d: u32, p: u32) -> FixedPointFormat {
        FixedPointFormat::new(d, p).unwrap()
    }

    #[test]
    fn format_validation() {
        assert!(FixedPointFormat::new(0, 0).is_err());
        assert!(FixedPointFormat::new(4, 4).is_err());
        let f = fmt(10, 8);
        assert_eq!(f.min_value(), -2.0);
        assert_eq!(f.max_value(), 511.0 / 256.0);
        assert_eq!(f.sign(9), -1.0);
        assert_eq!(f.sign(8), 1.0);
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode_coefficients(&[-7.0], fmt(4, 0)).unwrap(), vec![1, 0, 0, 1]);
        assert_eq!(encode_coefficients(&[0.0], fmt(6, 3)).unwrap(), vec![0; 6]);
        assert_eq!(encode_coefficients(&[0.5], fmt(3, 2)).unwrap(), vec![0, 1, 0]);
    }

    #[test]
    fn encode_rounds_ties_down() {
        let f = fmt(4, 0);
        assert_eq!(f.quantize(2.5).unwrap(), 2.0);
        assert_eq!(f.quantize(-2.5).unwrap(), -3.0);
        assert_eq!(f.quantize(2.6).unwrap(), 3.0);
    }

    #[test]
    fn encode_out_of_range() {
        assert!(matches!(
            encode_coefficients(&[8.0], fmt(4, 0)),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            encode_coefficients(&[-8.5], fmt(4, 0)),
            Err(Error::OutOfRange { .. })
        ));
        assert!(encode_coefficients(&[7.0, -8.0], fmt(4, 0)).is_ok());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_bits(&[1, 1, 1, 1], fmt(4, 0), 1).unwrap(), vec![-1.0]);
        assert_eq!(decode_bits(&[0; 8], fmt(4, 1), 2).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            decode_bits(&[0; 7], fmt(4, 1), 2),
            Err(Error::DimensionMismatch { expected: 8, got: 7 })
        ));
    }

    #[test]
    fn single_sign_bit_qubo() {
        let sys = NormalSystem::from_parts(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 0.5),
            BasisSet::chebyshev(1).unwrap(),
        )
        .unwrap();
        let q = build_qubo(&sys, fmt(1, 0));
        assert_eq!(q.as_slice(), &[2.0]);
        assert_eq!(q.energy(&[1]), 2.0);
    }

    #[test]
    fn zero_rhs_gives_zero_at_origin() {
        let sys = NormalSystem::from_parts(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            BasisSet::chebyshev(2).unwrap(),
        )
        .unwrap();
        let q = build_qubo(&sys, fmt(3, 1));
        assert_eq!(q.energy(&[0; 6]), 0.0);
        for mu in 0..6 {
            let w = fmt(3, 1).weight((mu % 3) as u32);
            assert_eq!(q.get(mu, mu), w * w);
        }
    }

    #[test]
    fn triangularize_examples() {
        let q = QuboProblem::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let u = upper_triangularize(&q);
        assert_eq!(u.as_slice(), &[1.0, 4.0, 0.0, 1.0]);
        let diag = QuboProblem::from_rows(&[vec![3.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert_eq!(upper_triangularize(&diag), diag);
    }

    #[test]
    fn ising_examples() {
        let q = QuboProblem::from_rows(&[vec![1.0]]).unwrap();
        let ising = to_ising(&q);
        assert_eq!(ising.fields, vec![0.5]);
        assert_eq!(ising.offset, 0.5);
        assert_eq!(ising.energy(&[1]) + ising.offset, 1.0);
        assert_eq!(ising.energy(&[-1]) + ising.offset, 0.0);

        let zero = QuboProblem::from_dense(3, vec![0.0; 9]).unwrap();
        let ising = to_ising(&zero);
        assert!(ising.fields.iter().chain(&ising.couplings).all(|&v| v == 0.0));
        assert_eq!(ising.offset, 0.0);
    }

    #[test]
    fn ising_exhaustive_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10;
        let q =
            QuboProblem::from_dense(n, (0..n * n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let ising = to_ising(&q);
        let mut worst: f64 = 0.0;
        for code in 0u32..1 << n {
            let bits: Vec<u8> = (0..n).map(|i| ((code >> i) & 1) as u8).collect();
            let spins: Vec<i8> = bits.iter().map(|&b| 2 * b as i8 - 1).collect();
            worst = worst.max((ising.energy(&spins) + ising.offset - q.energy(&bits)).abs());
        }
        assert!(worst <= 1e-9, "max deviation {worst}");
    }

    #[test]
    fn density_examples() {
        let diag = QuboProblem::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(density(&diag), 0.0);
        let full = QuboProblem::from_dense(4, vec![1.0; 16]).unwrap();
        assert_eq!(density(&full), 1.0);
        let single = QuboProblem::from_dense(1, vec![5.0]).unwrap();
        assert_eq!(density(&single), 0.0);
    }

    #[test]
    fn json_round_trip_preserves_energy_and_meta() {
        let sys = NormalSystem::from_parts(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            DVector::from_column_slice(&[0.3, -0.2]),
            BasisSet::chebyshev(2).unwrap(),
        )
        .unwrap();
        let q = build_qubo(&sys, fmt(3, 2));
        let json = serde_json::to_string(&q.to_json()).unwrap();
        let back = QuboProblem::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.layout(), q.layout());
        assert!(back.is_upper_triangular());
        let bits = [1, 0, 1, 1, 1, 0];
        assert!((back.energy(&bits) - q.energy(&bits)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(d in 1u32..=12, p_frac in 0.0f64..1.0, ks in prop::collection::vec(any::<i64>(), 1..5)) {
            let p = ((d as f64) * p_frac) as u32;
            let f = fmt(d, p.min(d - 1));
            let half = 1i64 << (d - 1);
            let values: Vec<f64> = ks.iter().map(|k| (k.rem_euclid(2 * half) - half) as f64 * f.step()).collect();
            let bits = encode_coefficients(&values, f).unwrap();
            prop_assert_eq!(decode_bits(&bits, f, values.len()).unwrap(), values);
        }

        #[test]
        fn triangularized_energy_unchanged(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 8;
            let q = QuboProblem::from_dense(n, (0..n * n).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
            let u = upper_triangularize(&q);
            for _ in 0..100 {
                let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
                prop_assert!((u.energy(&bits) - q.energy(&bits)).abs() <= 1e-12);
            }
        }
    }
}
