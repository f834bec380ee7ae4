//! The su(N) basis in the fundamental representation.
//!
//! Generators are normalized as `Tr(T_a T_b) = δ_ab / 2` and ordered as a
//! generalized Gell-Mann basis:
//!
//! 1. symmetric off-diagonal generators for each pair `j < k` (lexicographic),
//!    with entries `1/2` at `(j,k)` and `(k,j)`;
//! 2. antisymmetric off-diagonal generators for the same pairs, with `-i/2`
//!    at `(j,k)` and `i/2` at `(k,j)`;
//! 3. the `N-1` Cartan generators
//!    `H_i = Diag(1,…,1,-i,0,…,0) / sqrt(2 i (i+1))` with `-i` in slot `i+1`.
//!
//! The Cartan block is therefore a suffix of the generator list. For `N = 2`
//! this reproduces `σ_a / 2`. All indices in this API are zero-based, so
//! `cartan()[0]` is `H_1`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Resource guard on the number of levels.
pub const MAX_LEVEL: usize = 12;

/// Structure constants below this magnitude are stored as exact zeros.
const STRUCTURE_ZERO: f64 = 1e-13;

const ELEMENT_TOL: f64 = 1e-10;
const GROUP_TOL: f64 = 1e-10;

/// Rank-3 real tensors `f_abc` and `d_abc`, stored densely.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    dim: usize,
    f: Vec<f64>,
    d: Vec<f64>,
}

impl StructureConstants {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn idx(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.dim + b) * self.dim + c
    }

    #[inline]
    pub fn f(&self, a: usize, b: usize, c: usize) -> f64 {
        self.f[self.idx(a, b, c)]
    }

    #[inline]
    pub fn d(&self, a: usize, b: usize, c: usize) -> f64 {
        self.d[self.idx(a, b, c)]
    }
}

#[derive(Debug, Clone)]
pub struct LieBasis {
    n_level: usize,
    generators: Vec<CMatrix>,
    // nonzero entries (row, col, value) of each generator
    sparse: Vec<Vec<(usize, usize, Complex64)>>,
    constants: StructureConstants,
}

impl LieBasis {
    pub fn n_level(&self) -> usize {
        self.n_level
    }

    /// Number of generators, `N² - 1`.
    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.generators
    }

    pub fn generator(&self, a: usize) -> &CMatrix {
        &self.generators[a]
    }

    /// Position of `H_1` in the generator list.
    pub fn cartan_offset(&self) -> usize {
        self.n_level * (self.n_level - 1)
    }

    /// The Cartan generators `H_1 … H_{N-1}`.
    pub fn cartan(&self) -> &[CMatrix] {
        &self.generators[self.cartan_offset()..]
    }

    pub fn constants(&self) -> &StructureConstants {
        &self.constants
    }

    /// `Tr(X T_c)` for every generator, using the sparsity of the basis.
    pub fn traces_with(&self, x: &CMatrix) -> Vec<Complex64> {
        self.sparse
            .iter()
            .map(|entries| {
                entries
                    .iter()
                    .map(|&(r, c, v)| x[(c, r)] * v)
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// Components `(X, T_a) = 2 Re Tr(X T_a)`.
    pub fn components(&self, x: &CMatrix) -> Vec<f64> {
        self.traces_with(x)
            .into_iter()
            .map(|t| 2.0 * t.re)
            .collect()
    }

    /// `Σ_a c_a T_a`.
    pub fn compose(&self, components: &[f64]) -> CMatrix {
        let n = self.n_level;
        let mut out = CMatrix::zeros(n, n);
        for (entries, &c) in self.sparse.iter().zip(components) {
            for &(r, col, v) in entries {
                out[(r, col)] += v * c;
            }
        }
        out
    }

    /// Test hook: rescales `H_{index+1}` and recomputes the structure
    /// constants, producing a deliberately broken basis.
    #[doc(hidden)]
    pub fn with_scaled_cartan(mut self, index: usize, factor: f64) -> Self {
        let a = self.cartan_offset() + index;
        self.generators[a] *= Complex64::new(factor, 0.0);
        self.sparse = self.generators.iter().map(sparse_entries).collect();
        self.constants = structure_constants(&self);
        self
    }
}

/// `H_i` (one-based `i`) for `n_level` levels.
pub fn cartan_generator(n_level: usize, i: usize) -> CMatrix {
    assert!(i >= 1 && i < n_level, "Cartan index out of range");
    let scale = 1.0 / ((2 * i * (i + 1)) as f64).sqrt();
    let mut h = CMatrix::zeros(n_level, n_level);
    for k in 0..i {
        h[(k, k)] = Complex64::new(scale, 0.0);
    }
    h[(i, i)] = Complex64::new(-(i as f64) * scale, 0.0);
    h
}

pub fn build_basis(n_level: usize) -> Result<LieBasis> {
    if !(2..=MAX_LEVEL).contains(&n_level) {
        return Err(Error::Config(format!(
            "n_level must lie in 2..={MAX_LEVEL}, got {n_level}"
        )));
    }
    let n = n_level;
    let half = Complex64::new(0.5, 0.0);
    let mut generators = Vec::with_capacity(n * n - 1);
    for j in 0..n {
        for k in (j + 1)..n {
            let mut t = CMatrix::zeros(n, n);
            t[(j, k)] = half;
            t[(k, j)] = half;
            generators.push(t);
        }
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let mut t = CMatrix::zeros(n, n);
            t[(j, k)] = Complex64::new(0.0, -0.5);
            t[(k, j)] = Complex64::new(0.0, 0.5);
            generators.push(t);
        }
    }
    for i in 1..n {
        generators.push(cartan_generator(n, i));
    }
    let sparse = generators.iter().map(sparse_entries).collect();
    let mut basis = LieBasis {
        n_level,
        generators,
        sparse,
        constants: StructureConstants {
            dim: 0,
            f: Vec::new(),
            d: Vec::new(),
        },
    };
    basis.constants = structure_constants(&basis);
    Ok(basis)
}

fn sparse_entries(m: &CMatrix) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            if v != Complex64::new(0.0, 0.0) {
                out.push((r, c, v));
            }
        }
    }
    out
}

/// `f_abc = -2i Tr([T_a,T_b] T_c)` and `d_abc = 2 Tr({T_a,T_b} T_c)`,
/// evaluated from traces of the stored generators.
pub fn structure_constants(basis: &LieBasis) -> StructureConstants {
    let dim = basis.dim();
    let mut f = vec![0.0; dim * dim * dim];
    let mut d = vec![0.0; dim * dim * dim];
    let round = |x: f64| if x.abs() < STRUCTURE_ZERO { 0.0 } else { x };
    for a in 0..dim {
        for b in 0..dim {
            let ab = basis.generator(a) * basis.generator(b);
            let ba = basis.generator(b) * basis.generator(a);
            let comm = basis.traces_with(&(&ab - &ba));
            let anti = basis.traces_with(&(&ab + &ba));
            for c in 0..dim {
                let i = (a * dim + b) * dim + c;
                f[i] = round((Complex64::new(0.0, -2.0) * comm[c]).re);
                d[i] = round(2.0 * anti[c].re);
            }
        }
    }
    StructureConstants { dim, f, d }
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `2 Tr(A B)` with no real part taken; the complex form of the inner product.
pub fn inner_complex(a: &CMatrix, b: &CMatrix) -> Complex64 {
    trace_product(a, b) * 2.0
}

/// `(A, B) = 2 Re Tr(A B)` on raw matrices.
pub fn inner_matrices(a: &CMatrix, b: &CMatrix) -> f64 {
    2.0 * trace_product(a, b).re
}

pub fn commutator_matrix(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator_matrix(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// Frobenius norm of the anti-Hermitian part, `‖(A - A†)/2‖_F`.
pub fn hermitian_residual(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm() * 0.5
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.trace()
}

/// `(‖U†U - I‖_F, |det U - 1|)`.
pub fn special_unitary_residual(u: &CMatrix) -> (f64, f64) {
    let n = u.nrows();
    let gram = u.adjoint() * u - CMatrix::identity(n, n);
    let det = u.determinant();
    (gram.norm(), (det - Complex64::new(1.0, 0.0)).norm())
}

/// Projects a matrix onto su(N): Hermitian part with the trace removed.
pub fn project_algebra(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = h.trace() / (n as f64);
    for i in 0..n {
        h[(i, i)] -= tr;
    }
    h
}

/// A traceless Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    matrix: CMatrix,
}

impl AlgebraElement {
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Shape("algebra element must be square".into()));
        }
        let herm = hermitian_residual(&matrix);
        let tr = matrix.trace().norm();
        if herm > ELEMENT_TOL || tr > ELEMENT_TOL {
            return Err(Error::Validation(format!(
                "not a traceless Hermitian matrix (anti-Hermitian part {herm:.3e}, |trace| {tr:.3e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn from_components(basis: &LieBasis, components: &[f64]) -> Result<Self> {
        if components.len() != basis.dim() {
            return Err(Error::Shape(format!(
                "expected {} components, got {}",
                basis.dim(),
                components.len()
            )));
        }
        Ok(Self {
            matrix: basis.compose(components),
        })
    }

    pub fn zero(n_level: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(n_level, n_level),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn n_level(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn components(&self, basis: &LieBasis) -> Result<Vec<f64>> {
        if basis.n_level() != self.n_level() {
            return Err(Error::Shape(format!(
                "element has N = {}, basis has N = {}",
                self.n_level(),
                basis.n_level()
            )));
        }
        Ok(basis.components(&self.matrix))
    }

    /// `U a U†`.
    pub fn conjugate(&self, u: &GroupElement) -> Self {
        Self {
            matrix: u.matrix() * &self.matrix * u.matrix().adjoint(),
        }
    }
}

/// A special unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    matrix: CMatrix,
}

impl GroupElement {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, GROUP_TOL)
    }

    pub fn with_tolerance(matrix: CMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Shape("group element must be square".into()));
        }
        let (unitarity, det) = special_unitary_residual(&matrix);
        if unitarity > tol || det > tol {
            return Err(Error::Validation(format!(
                "not special unitary (|U^dag U - I| = {unitarity:.3e}, |det U - 1| = {det:.3e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity(n_level: usize) -> Self {
        Self {
            matrix: CMatrix::identity(n_level, n_level),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn n_level(&self) -> usize {
        self.matrix.nrows()
    }
}

fn check_same(a: &AlgebraElement, b: &AlgebraElement) -> Result<()> {
    if a.n_level() != b.n_level() {
        return Err(Error::Shape(format!(
            "elements have N = {} and N = {}",
            a.n_level(),
            b.n_level()
        )));
    }
    Ok(())
}

/// `(a, b) = 2 Re Tr(a b)`.
pub fn inner(a: &AlgebraElement, b: &AlgebraElement) -> Result<f64> {
    check_same(a, b)?;
    Ok(inner_matrices(&a.matrix, &b.matrix))
}

/// Returns the Hermitian `c` with `[a, b] = i c`.
pub fn commutator(a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
    check_same(a, b)?;
    let c = commutator_matrix(&a.matrix, &b.matrix) * Complex64::new(0.0, -1.0);
    Ok(AlgebraElement { matrix: c })
}

/// `{a, b}`, Hermitian but in general not traceless.
pub fn anticommutator(a: &AlgebraElement, b: &AlgebraElement) -> Result<CMatrix> {
    check_same(a, b)?;
    Ok(anticommutator_matrix(&a.matrix, &b.matrix))
}
