//! Design matrices, sparse ground truths and noisy observations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Maximum deviation of a column norm from one accepted by [`DesignMatrix::new`].
pub const COLUMN_NORM_TOL: f64 = 1e-10;

/// Magic bytes of the binary matrix format.
pub const BINARY_MAGIC: &[u8; 5] = b"VLAS1";

const OPNORM_DEFAULT_TOL: f64 = 1e-12;
const OPNORM_MAX_ITER: usize = 200_000;

/// An `n x p` design with unit-norm columns.
///
/// Entries are held in a column-major [`DMatrix`], so every column is a
/// contiguous slice. Coherence and operator norm are computed lazily and cached.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
    coherence_cache: OnceLock<f64>,
    opnorm_cache: OnceLock<(f64, f64)>,
    regenerated_columns: usize,
}

impl DesignMatrix {
    /// Wraps a matrix whose columns already have unit Euclidean norm.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (n, p) = entries.shape();
        if n < 1 || p < 2 {
            return Err(Error::InvalidInput(format!(
                "design must have n >= 1 and p >= 2, got {n}x{p}"
            )));
        }
        for (j, col) in entries.column_iter().enumerate() {
            let norm = col.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > COLUMN_NORM_TOL {
                return Err(Error::InvalidInput(format!(
                    "column {j} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self::from_parts(entries, 0))
    }

    /// Divides each column by its norm. Fails on an all-zero column.
    pub fn from_unnormalized(mut entries: DMatrix<f64>) -> Result<Self> {
        for (j, mut col) in entries.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::InvalidInput(format!("column {j} has zero norm")));
            }
            col /= norm;
        }
        Self::new(entries)
    }

    /// Builds from row-major data (one row per observation).
    pub fn from_row_major(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for {n}x{p}, got {}",
                n * p,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, p, data))
    }

    fn from_parts(entries: DMatrix<f64>, regenerated_columns: usize) -> Self {
        Self {
            entries,
            coherence_cache: OnceLock::new(),
            opnorm_cache: OnceLock::new(),
            regenerated_columns,
        }
    }

    /// I.i.d. standard Gaussian entries with every column scaled to unit norm.
    pub fn gaussian(n: usize, p: usize, seed: u64) -> Result<Self> {
        if n < 1 || p < 2 {
            return Err(Error::InvalidInput(format!(
                "design must have n >= 1 and p >= 2, got {n}x{p}"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let mut entries = DMatrix::<f64>::zeros(n, p);
        let mut regenerated = 0;
        for j in 0..p {
            loop {
                let mut col = entries.column_mut(j);
                for v in col.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                    break;
                }
                regenerated += 1;
                log::warn!("gaussian design: column {j} had zero norm, regenerating");
            }
        }
        Ok(Self::from_parts(entries, regenerated))
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn p(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Number of zero-norm columns redrawn by [`DesignMatrix::gaussian`].
    pub fn regenerated_columns(&self) -> usize {
        self.regenerated_columns
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.entries.as_slice()[j * n..(j + 1) * n]
    }

    /// Columns `cols` as a dense `n x |cols|` matrix.
    pub fn submatrix(&self, cols: &[usize]) -> DMatrix<f64> {
        self.entries.select_columns(cols)
    }

    /// `X b` for a dense coefficient vector.
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(beta.len(), self.p());
        let mut out = vec![0.0; self.n()];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                axpy(b, self.column(j), &mut out);
            }
        }
        out
    }

    /// `X^t r`.
    pub fn tr_mul_vec(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.n());
        (0..self.p()).map(|j| dot(self.column(j), r)).collect()
    }

    /// Mutual coherence `max_{i != j} |<X_i, X_j>|`.
    pub fn coherence(&self) -> f64 {
        *self.coherence_cache.get_or_init(|| {
            let gram = self.entries.tr_mul(&self.entries);
            let p = self.p();
            let mut mu = 0.0f64;
            for j in 0..p {
                for i in (j + 1)..p {
                    mu = mu.max(gram[(i, j)].abs());
                }
            }
            mu
        })
    }

    /// Cached coherence, if it has been computed.
    pub fn cached_coherence(&self) -> Option<f64> {
        self.coherence_cache.get().copied()
    }

    /// Largest singular value, to relative accuracy `tol`.
    ///
    /// Power iteration on the smaller of `X X^t` and `X^t X`, started from a
    /// fixed vector; stops once the eigen-residual `||A v - rho v||` drops below
    /// `tol * rho`.
    pub fn operator_norm(&self, tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tol must be positive, got {tol}"
            )));
        }
        if let Some(&(cached_tol, value)) = self.opnorm_cache.get() {
            if cached_tol <= tol {
                return Ok(value);
            }
        }
        let gram = if self.n() <= self.p() {
            &self.entries * self.entries.transpose()
        } else {
            self.entries.tr_mul(&self.entries)
        };
        let dim = gram.nrows();
        let mut v = DVector::from_fn(dim, |i, _| 1.0 + ((i as f64) * 0.754_877_666_2).fract());
        v.normalize_mut();
        for _ in 0..OPNORM_MAX_ITER {
            let av = &gram * &v;
            let rho = v.dot(&av);
            let resid = (&av - &v * rho).norm();
            if resid <= tol * rho.abs() {
                let value = rho.max(0.0).sqrt();
                let _ = self.opnorm_cache.set((tol, value));
                return Ok(value);
            }
            let norm = av.norm();
            if norm == 0.0 {
                return Err(Error::NoConvergence {
                    what: "operator norm power iteration (zero iterate)",
                    iterations: 0,
                });
            }
            v = av / norm;
        }
        Err(Error::NoConvergence {
            what: "operator norm power iteration",
            iterations: OPNORM_MAX_ITER,
        })
    }

    /// Operator norm at the default tolerance (1e-12).
    pub fn opnorm(&self) -> Result<f64> {
        self.operator_norm(OPNORM_DEFAULT_TOL)
    }

    /// Cached operator norm, if it has been computed.
    pub fn cached_opnorm(&self) -> Option<f64> {
        self.opnorm_cache.get().map(|&(_, v)| v)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(writer);
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.p())
                .map(|j| format!("{:?}", self.entries[(i, j)]))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (n, p, data) = read_csv_rows(reader)?;
        Self::from_row_major(n, p, &data)
    }

    /// Binary layout: `VLAS1`, rows and cols as little-endian `u64`, then the
    /// entries row-major as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(BINARY_MAGIC)?;
        writer.write_all(&(self.n() as u64).to_le_bytes())?;
        writer.write_all(&(self.p() as u64).to_le_bytes())?;
        for i in 0..self.n() {
            for j in 0..self.p() {
                writer.write_all(&self.entries[(i, j)].to_le_bytes())?;
            }
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut reader: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        reader.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("missing VLAS1 magic bytes".into()));
        }
        let mut word = [0u8; 8];
        reader.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        reader.read_exact(&mut word)?;
        let p = u64::from_le_bytes(word) as usize;
        let total = n
            .checked_mul(p)
            .ok_or_else(|| Error::Format("matrix dimensions overflow".into()))?;
        let mut data = Vec::with_capacity(total);
        for _ in 0..total {
            reader.read_exact(&mut word)?;
            data.push(f64::from_le_bytes(word));
        }
        Self::from_row_major(n, p, &data)
    }

    /// Loads a design from a binary (detected by magic bytes) or CSV file.
    /// With `normalize`, columns are rescaled to unit norm instead of rejected.
    pub fn load(path: &Path, normalize: bool) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        let (n, p, data) = if bytes.starts_with(BINARY_MAGIC) {
            let m = Self::read_binary_raw(&bytes)?;
            (m.0, m.1, m.2)
        } else {
            read_csv_rows(bytes.as_slice())?
        };
        let entries = DMatrix::from_row_slice(n, p, &data);
        if normalize {
            Self::from_unnormalized(entries)
        } else {
            Self::new(entries)
        }
    }

    fn read_binary_raw(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
        if bytes.len() < 21 {
            return Err(Error::Format("truncated binary matrix".into()));
        }
        let n = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
        let p = u64::from_le_bytes(bytes[13..21].try_into().unwrap()) as usize;
        let body = &bytes[21..];
        if Some(body.len()) != n.checked_mul(p).and_then(|np| np.checked_mul(8)) {
            return Err(Error::Format(format!(
                "binary body has {} bytes, expected {n}x{p} f64 values",
                body.len()
            )));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((n, p, data))
    }

    /// Saves as binary when the extension is `.bin`, CSV otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        if path.extension().is_some_and(|e| e == "bin") {
            self.write_binary(file)
        } else {
            self.write_csv(file)
        }
    }
}

fn read_csv_rows<R: Read>(reader: R) -> Result<(usize, usize, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut n = 0;
    let mut p = None;
    for record in r.records() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match p {
            None => p = Some(record.len()),
            Some(p) if p != record.len() => {
                return Err(Error::Format(format!(
                    "row {n} has {} fields, expected {p}",
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            data.push(
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("row {n}: bad number {field:?}: {e}")))?,
            );
        }
        n += 1;
    }
    Ok((n, p.unwrap_or(0), data))
}

/// Reads a vector stored as one value per line (or a single CSV row).
pub fn read_vector_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let (_, _, data) = read_csv_rows(reader)?;
    Ok(data)
}

/// Sparse coefficient vector of the generative model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Support `T`, sorted ascending.
    pub support: Vec<usize>,
    /// Sign of each realized coefficient on `support`.
    pub signs: Vec<i8>,
    /// Dense coefficients, zero off the support.
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
    /// Coefficients redrawn because they came out exactly zero.
    #[serde(default)]
    pub resampled_zeros: usize,
}

impl GroundTruth {
    /// Random support of size `s`; each coefficient is `B * (+-1) + N(0, 1)`.
    pub fn generate(p: usize, s: usize, magnitude: f64, sigma: f64, seed: u64) -> Result<Self> {
        if s > p {
            return Err(Error::InvalidInput(format!(
                "sparsity s = {s} exceeds p = {p}"
            )));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let mut support = sample(&mut rng, p, s).into_vec();
        support.sort_unstable();
        let mut beta = vec![0.0; p];
        let mut signs = Vec::with_capacity(s);
        let mut resampled = 0;
        for &j in &support {
            let value = loop {
                let delta = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let g: f64 = rng.sample(StandardNormal);
                let v = magnitude * delta + g;
                if v != 0.0 {
                    break v;
                }
                resampled += 1;
                log::warn!("ground truth: coefficient {j} realized as exactly zero, resampling");
            };
            beta[j] = value;
            signs.push(if value > 0.0 { 1 } else { -1 });
        }
        Ok(Self {
            support,
            signs,
            beta,
            sigma,
            seed,
            resampled_zeros: resampled,
        })
    }

    /// Builds a ground truth from explicit dense coefficients.
    pub fn from_beta(beta: Vec<f64>, sigma: f64) -> Self {
        let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        let signs = support
            .iter()
            .map(|&j| if beta[j] > 0.0 { 1 } else { -1 })
            .collect();
        Self {
            support,
            signs,
            beta,
            sigma,
            seed: 0,
            resampled_zeros: 0,
        }
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn signs_f64(&self) -> Vec<f64> {
        self.signs.iter().map(|&s| s as f64).collect()
    }

    /// `min_{j in T} |beta_j|`, infinite for an empty support.
    pub fn min_abs(&self) -> f64 {
        self.support
            .iter()
            .map(|&j| self.beta[j].abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn l1_norm(&self) -> f64 {
        self.beta.iter().map(|b| b.abs()).sum()
    }
}

/// Noisy response `y = X beta + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: Vec<f64>,
    /// The realized noise `z = sigma * w`, kept for oracle computations.
    pub noise: Vec<f64>,
    pub seed: u64,
}

impl Observation {
    /// Draws `w` i.i.d. standard normal and returns `y = X beta + sigma w`.
    pub fn generate(x: &DesignMatrix, truth: &GroundTruth, seed: u64) -> Result<Self> {
        if truth.beta.len() != x.p() {
            return Err(Error::DimensionMismatch(format!(
                "beta has length {}, design has p = {}",
                truth.beta.len(),
                x.p()
            )));
        }
        let mut rng = rng_from_seed(seed);
        let noise: Vec<f64> = (0..x.n())
            .map(|_| truth.sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut y = x.mul_vec(&truth.beta);
        for (yi, zi) in y.iter_mut().zip(&noise) {
            *yi += zi;
        }
        Ok(Self { y, noise, seed })
    }

    /// Wraps a response read from disk; the noise is unknown and left empty.
    pub fn from_response(y: Vec<f64>) -> Self {
        Self {
            y,
            noise: Vec::new(),
            seed: 0,
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), self)?;
        Ok(())
    }

    /// Reads an observation from JSON, or a bare response vector from CSV.
    pub fn load(path: &Path) -> Result<Self> {
        let file = BufReader::new(File::open(path)?);
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_reader(file)?)
        } else {
            Ok(Self::from_response(read_vector_csv(file)?))
        }
    }
}

pub fn gen_gaussian_design(n: usize, p: usize, seed: u64) -> Result<DesignMatrix> {
    DesignMatrix::gaussian(n, p, seed)
}

pub fn gen_ground_truth(
    p: usize,
    s: usize,
    magnitude: f64,
    sigma: f64,
    seed: u64,
) -> Result<GroundTruth> {
    GroundTruth::generate(p, s, magnitude, sigma, seed)
}

pub fn observe(x: &DesignMatrix, truth: &GroundTruth, seed: u64) -> Result<Observation> {
    Observation::generate(x, truth, seed)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
