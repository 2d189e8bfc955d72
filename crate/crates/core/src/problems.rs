//! Problem instances on `St(d, r)` with quadratic local losses.
//!
//! Every local loss has the form `f_i(x) = ½⟨x, H_i x⟩ − ⟨q_i, x⟩`. Sparse PCA
//! and coordinate-independent sparse estimation use `H_i = −A_iᵀA_i`, `q_i = 0`,
//! i.e. `f_i(x) = −½ tr(xᵀA_iᵀA_i x)`; only the regularizer differs. The
//! Gram matrices are cached so that a gradient costs `O(d²r)`.
//!
//! The global smooth part is `f(x) = (1/n) Σ f_i(x)`; the regularizer is
//! added by the metrics, not here.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regularizer::{RegularizerKind, RegularizerSpec};
use crate::stiefel::{tangent_component, AmbientMatrix, StiefelPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// Sparse PCA: entrywise `ℓ1`.
    Spca,
    /// Coordinate-independent sparse estimation: row-wise `ℓ2,1`.
    Cise,
    /// Convex quadratic losses; the Euclidean reference problem.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentKind {
    /// `σ_j = ξ^j`
    Geometric,
    /// `σ_j = ξ^{j/2}`
    HalfGeometric,
}

/// Recipe for a synthetic data matrix with a prescribed spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralRecipe {
    pub m: usize,
    pub d: usize,
    pub xi: f64,
    pub exponent_kind: ExponentKind,
    pub seed: u64,
}

impl SpectralRecipe {
    /// Target singular values `σ_0 ≥ … ≥ σ_{d−1}`.
    pub fn singular_values(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| match self.exponent_kind {
                ExponentKind::Geometric => self.xi.powi(j as i32),
                ExponentKind::HalfGeometric => self.xi.powf(j as f64 / 2.0),
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m < self.d {
            return Err(Error::InvalidConfig(format!(
                "spectral recipe needs m >= d >= 1 (m={}, d={})",
                self.m, self.d
            )));
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(Error::InvalidConfig(format!("xi must lie in (0, 1], got {}", self.xi)));
        }
        Ok(())
    }
}

/// Fills an `rows×cols` matrix with i.i.d. standard normals, row by row.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

const MAX_RESAMPLES: u64 = 16;

/// `A = U Σ̃ Vᵀ` where `B = U Σ Vᵀ` is the thin SVD of a Gaussian `m×d` draw.
pub fn synthesize(recipe: &SpectralRecipe) -> Result<DMatrix<f64>> {
    recipe.validate()?;
    let target = recipe.singular_values();
    let mut last_sigma = 0.0;
    for attempt in 0..MAX_RESAMPLES {
        let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed.wrapping_add(attempt));
        let b = gaussian_matrix(recipe.m, recipe.d, &mut rng);
        let svd = b.svd(true, true);
        let s = &svd.singular_values;
        let smax = s.max();
        let smin = s.min();
        last_sigma = smin;
        if !(smin > 1e-10 * smax) {
            continue;
        }
        // nalgebra does not promise sorted singular values; sort so that the
        // largest target value pairs with the largest direction.
        let mut order: Vec<usize> = (0..recipe.d).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        let u = svd.u.expect("svd computed with u");
        let v_t = svd.v_t.expect("svd computed with v_t");
        let mut us = DMatrix::zeros(recipe.m, recipe.d);
        let mut vt = DMatrix::zeros(recipe.d, recipe.d);
        for (rank, &k) in order.iter().enumerate() {
            us.set_column(rank, &(u.column(k) * target[rank]));
            vt.set_row(rank, &v_t.row(k));
        }
        return Ok(us * vt);
    }
    Err(Error::DegenerateSample { sigma_min: last_sigma })
}

/// Contiguous row blocks of `m/n` rows each.
pub fn partition(a: &DMatrix<f64>, n: usize) -> Result<Vec<DMatrix<f64>>> {
    let m = a.nrows();
    if n == 0 || m % n != 0 {
        return Err(Error::IndivisibleRows { rows: m, nodes: n });
    }
    let rows = m / n;
    Ok((0..n).map(|i| a.rows(i * rows, rows).into_owned()).collect())
}

/// Immutable problem description shared by all nodes.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    kind: ProblemKind,
    reg: RegularizerSpec,
    d: usize,
    r: usize,
    hessians: Vec<DMatrix<f64>>,
    linear: Option<Vec<AmbientMatrix>>,
    rows: Vec<usize>,
}

impl ProblemInstance {
    /// Builds `f_i = −½ tr(xᵀA_iᵀA_i x)` from per-node data blocks.
    pub fn from_blocks(kind: ProblemKind, blocks: &[DMatrix<f64>], r: usize, reg: RegularizerSpec) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::InvalidConfig("need at least one data block".into()));
        };
        let d = first.ncols();
        if r == 0 || r > d {
            return Err(Error::InvalidConfig(format!("need 0 < r <= d (d={d}, r={r})")));
        }
        if let Some(bad) = blocks.iter().find(|b| b.ncols() != d) {
            return Err(Error::DimensionMismatch {
                expected: format!("{d} columns"),
                got: format!("{} columns", bad.ncols()),
            });
        }
        let hessians = blocks.iter().map(|a| -(a.transpose() * a)).collect();
        Ok(Self {
            kind,
            reg,
            d,
            r,
            hessians,
            linear: None,
            rows: blocks.iter().map(|b| b.nrows()).collect(),
        })
    }

    /// Synthesizes `A`, splits it over `n` nodes and attaches the problem's
    /// regularizer (`ℓ1` for SPCA, `ℓ2,1` for CISE).
    pub fn synthetic(kind: ProblemKind, recipe: &SpectralRecipe, n: usize, r: usize, lambda: f64) -> Result<Self> {
        let reg = match kind {
            ProblemKind::Spca => RegularizerSpec::l1(lambda)?,
            ProblemKind::Cise => RegularizerSpec::l21(lambda)?,
            ProblemKind::Quadratic => {
                return Err(Error::InvalidConfig("quadratic instances are not data-driven".into()));
            }
        };
        let a = synthesize(recipe)?;
        let blocks = partition(&a, n)?;
        Self::from_blocks(kind, &blocks, r, reg)
    }

    /// Random strongly convex quadratics `½⟨x, H_i x⟩ − ⟨q_i, x⟩` with
    /// `H_i = C_iᵀC_i/d + 0.1·I`.
    pub fn random_quadratic(n: usize, d: usize, r: usize, reg: RegularizerSpec, seed: u64) -> Result<Self> {
        if n == 0 || d == 0 || r == 0 {
            return Err(Error::InvalidConfig("quadratic instance needs n, d, r >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hessians = Vec::with_capacity(n);
        let mut linear = Vec::with_capacity(n);
        for _ in 0..n {
            let c = gaussian_matrix(d, d, &mut rng);
            hessians.push(c.transpose() * c / d as f64 + DMatrix::identity(d, d) * 0.1);
            linear.push(gaussian_matrix(d, r, &mut rng));
        }
        Ok(Self {
            kind: ProblemKind::Quadratic,
            reg,
            d,
            r,
            hessians,
            linear: Some(linear),
            rows: vec![0; n],
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn regularizer(&self) -> &RegularizerSpec {
        &self.reg
    }

    pub fn with_regularizer(mut self, reg: RegularizerSpec) -> Self {
        self.reg = reg;
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d, self.r)
    }

    pub fn node_count(&self) -> usize {
        self.hessians.len()
    }

    /// Rows held by each node (zero for the quadratic reference problem).
    pub fn rows_per_node(&self) -> &[usize] {
        &self.rows
    }

    /// `H_i`; equals `−A_iᵀA_i` for data-driven problems.
    pub fn local_hessian(&self, i: usize) -> &DMatrix<f64> {
        &self.hessians[i]
    }

    /// `(1/n) Σ H_i`.
    pub fn mean_hessian(&self) -> DMatrix<f64> {
        let n = self.node_count() as f64;
        self.hessians.iter().fold(DMatrix::zeros(self.d, self.d), |acc, h| acc + h) / n
    }

    pub fn local_euclidean_gradient(&self, i: usize, x: &AmbientMatrix) -> AmbientMatrix {
        let g = &self.hessians[i] * x;
        match &self.linear {
            Some(q) => g - &q[i],
            None => g,
        }
    }

    pub fn local_objective(&self, i: usize, x: &AmbientMatrix) -> f64 {
        let quad = 0.5 * x.dot(&(&self.hessians[i] * x));
        match &self.linear {
            Some(q) => quad - q[i].dot(x),
            None => quad,
        }
    }

    /// `(1/n) Σ f_i(x)`; excludes the regularizer.
    pub fn global_smooth_objective(&self, x: &AmbientMatrix) -> f64 {
        let n = self.node_count() as f64;
        (0..self.node_count()).map(|i| self.local_objective(i, x)).sum::<f64>() / n
    }

    /// `∇f(x) = (1/n) Σ ∇f_i(x)`.
    pub fn global_gradient(&self, x: &AmbientMatrix) -> AmbientMatrix {
        let n = self.node_count() as f64;
        let sum = (0..self.node_count()).fold(DMatrix::zeros(self.d, self.r), |acc, i| {
            acc + self.local_euclidean_gradient(i, x)
        });
        sum / n
    }

    /// `grad f_i(x) = P_T_x(∇f_i(x))`.
    pub fn local_riemannian_gradient(&self, i: usize, x: &StiefelPoint) -> AmbientMatrix {
        tangent_component(x, &self.local_euclidean_gradient(i, x.as_matrix()))
    }

    /// Composite objective `(1/n) Σ f_i(x) + r(x)`.
    pub fn objective(&self, x: &AmbientMatrix) -> f64 {
        self.global_smooth_objective(x) + self.reg.value(x)
    }

    /// `‖H_i‖₂`, the Lipschitz constant of `∇f_i`.
    pub fn gradient_lipschitz(&self, i: usize) -> f64 {
        self.hessians[i]
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

impl RegularizerKind {
    /// Problem family that conventionally pairs with this regularizer.
    pub fn problem_kind(self) -> ProblemKind {
        match self {
            RegularizerKind::L21 => ProblemKind::Cise,
            _ => ProblemKind::Spca,
        }
    }
}

const MAGIC: &[u8; 4] = b"MXA1";

/// Writes `MXA1`, `u64` rows, `u64` cols, then row-major little-endian `f64`s.
pub fn write_matrix(path: impl AsRef<Path>, a: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(a.nrows() as u64).to_le_bytes())?;
    out.write_all(&(a.ncols() as u64).to_le_bytes())?;
    for row in a.row_iter() {
        for v in row.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(|e| bad(format!("missing header: {e}")))?;
    if &magic != MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word).map_err(|e| bad(format!("missing row count: {e}")))?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word).map_err(|e| bad(format!("missing column count: {e}")))?;
    let cols = u64::from_le_bytes(word) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| bad(format!("{rows}x{cols} overflows")))?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(bad(format!("expected {} payload bytes, found {}", count * 8, bytes.len())));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Reads a CSV matrix whose first record is `rows,cols` followed by `rows`
/// records of `cols` values each.
pub fn read_csv_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut records = reader.records();
    let header = records.next().ok_or_else(|| bad("empty file".into()))??;
    if header.len() != 2 {
        return Err(bad("header must be `rows,cols`".into()));
    }
    let parse_dim = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("bad dimension `{s}`: {e}")));
    let rows = parse_dim(&header[0])?;
    let cols = parse_dim(&header[1])?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for record in records {
        let record = record?;
        if record.len() != cols {
            return Err(bad(format!("row {seen} has {} values, expected {cols}", record.len())));
        }
        for field in record.iter() {
            data.push(field.parse::<f64>().map_err(|e| bad(format!("bad value `{field}`: {e}")))?);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(bad(format!("expected {rows} rows, found {seen}")));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn geometric_spectrum() {
        let recipe = SpectralRecipe {
            m: 20,
            d: 10,
            xi: 0.8,
            exponent_kind: ExponentKind::Geometric,
            seed: 1,
        };
        let s = recipe.singular_values();
        assert_eq!(s[0], 1.0);
        assert!((s[1] - 0.8).abs() < 1e-15);
        assert!((s[9] - 0.134217728).abs() < 1e-15);
        let half = SpectralRecipe {
            exponent_kind: ExponentKind::HalfGeometric,
            ..recipe
        };
        assert!((half.singular_values()[1] - 0.894427190999916).abs() < 1e-14);
    }

    #[test]
    fn recipe_validation() {
        let recipe = SpectralRecipe {
            m: 3,
            d: 5,
            xi: 0.8,
            exponent_kind: ExponentKind::Geometric,
            seed: 0,
        };
        assert!(synthesize(&recipe).is_err());
        assert!(synthesize(&SpectralRecipe { m: 10, xi: 0.0, ..recipe }).is_err());
    }

    #[test]
    fn partition_shapes() {
        let a = DMatrix::from_fn(8, 3, |i, j| (i * 3 + j) as f64);
        let parts = partition(&a, 4).unwrap();
        assert_eq!(parts.len(), 4);
        assert_eq!(parts[1], a.rows(2, 2).into_owned());
        assert_eq!(partition(&a, 1).unwrap()[0], a);
        assert!(matches!(partition(&a, 3), Err(Error::IndivisibleRows { rows: 8, nodes: 3 })));
    }

    #[test]
    fn zero_data_or_zero_point_gives_zero() {
        let blocks = vec![DMatrix::zeros(4, 3), dmatrix![1.0, 2.0, 0.0; 0.0, 1.0, 1.0]];
        let inst = ProblemInstance::from_blocks(ProblemKind::Spca, &blocks, 2, RegularizerSpec::zero()).unwrap();
        let x = DMatrix::from_element(3, 2, 0.3);
        assert_eq!(inst.local_euclidean_gradient(0, &x), DMatrix::zeros(3, 2));
        assert_eq!(inst.local_objective(0, &x), 0.0);
        assert_eq!(inst.local_euclidean_gradient(1, &DMatrix::zeros(3, 2)), DMatrix::zeros(3, 2));
        assert_eq!(inst.global_smooth_objective(&DMatrix::zeros(3, 2)), 0.0);
    }

    #[test]
    fn spca_objective_is_negative_trace() {
        let a = dmatrix![1.0, 0.0; 0.0, 2.0; 1.0, 1.0];
        let inst = ProblemInstance::from_blocks(ProblemKind::Spca, &[a.clone()], 1, RegularizerSpec::zero()).unwrap();
        let x = dmatrix![1.0; 0.0];
        let expected = -0.5 * (x.transpose() * a.transpose() * &a * &x)[(0, 0)];
        assert!((inst.local_objective(0, &x) - expected).abs() < 1e-15);
    }

    #[test]
    fn mismatched_blocks_rejected() {
        let blocks = vec![DMatrix::zeros(2, 3), DMatrix::zeros(2, 4)];
        assert!(ProblemInstance::from_blocks(ProblemKind::Spca, &blocks, 2, RegularizerSpec::zero()).is_err());
        assert!(ProblemInstance::from_blocks(ProblemKind::Spca, &[], 2, RegularizerSpec::zero()).is_err());
    }

    #[test]
    fn mxa1_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        std::fs::write(&p, b"MXA2aaaaaaaabbbbbbbb").unwrap();
        assert!(matches!(read_matrix(&p), Err(Error::Format { .. })));
        let mut bytes = b"MXA1".to_vec();
        bytes.extend(2u64.to_le_bytes());
        bytes.extend(2u64.to_le_bytes());
        bytes.extend(1.0f64.to_le_bytes());
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_matrix(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn csv_import() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "2,3\n1,2,3\n4, 5, 6.5\n").unwrap();
        let a = read_csv_matrix(&p).unwrap();
        assert_eq!(a, dmatrix![1.0, 2.0, 3.0; 4.0, 5.0, 6.5]);
        std::fs::write(&p, "3,3\n1,2,3\n").unwrap();
        assert!(read_csv_matrix(&p).is_err());
        std::fs::write(&p, "1,3\n1,2\n").unwrap();
        assert!(read_csv_matrix(&p).is_err());
    }
}
