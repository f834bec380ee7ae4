//! Seeded random draws: Haar unitaries, spectra, and band-limited smooth
//! fields `U(x) = exp(i Σ_a c_a(x) T_a)`.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fields::{GridSpec, SiteField, UnitaryField};
use crate::liealg::{CMatrix, LieBasis};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Haar-distributed element of SU(N): QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal absorbed, then the determinant divided out.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> CMatrix {
    let z = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(normal(rng), normal(rng)) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    let det = q.determinant();
    let root = Complex64::from_polar(1.0, -det.arg() / n as f64);
    q * root
}

/// `exp(i X)` for Hermitian `X`, through its eigendecomposition.
pub fn expi_hermitian(x: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(x.clone());
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|&l| Complex64::from_polar(1.0, l)),
    );
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&phases) * v.adjoint()
}

/// Random spectrum with `zeros` leading zero entries and strictly increasing,
/// well separated positive entries summing to one.
pub fn random_spectrum(n: usize, zeros: usize, rng: &mut impl Rng) -> Vec<f64> {
    assert!(zeros < n);
    let k = n - zeros;
    // gaps bounded below keep the positive part non-degenerate
    let mut acc = 0.0;
    let mut pos = Vec::with_capacity(k);
    for _ in 0..k {
        acc += 0.05 + rng.random::<f64>();
        pos.push(acc);
    }
    let total: f64 = pos.iter().sum();
    let mut out = vec![0.0; zeros];
    out.extend(pos.into_iter().map(|v| v / total));
    out
}

/// Low-order Fourier content of a smooth random field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandLimit {
    /// Highest wavenumber per axis (inclusive).
    pub max_mode: usize,
    /// Standard deviation of each Fourier coefficient.
    pub amplitude: f64,
}

impl Default for BandLimit {
    fn default() -> Self {
        Self {
            max_mode: 2,
            amplitude: 0.3,
        }
    }
}

/// A smooth real function on the grid's domain, periodic with the grid's
/// period along each axis.
#[derive(Debug, Clone)]
struct Series {
    // (kx, ky, cos coefficient, sin coefficient)
    terms: Vec<(f64, f64, f64, f64)>,
}

impl Series {
    fn draw(spec: &GridSpec, band: BandLimit, rng: &mut impl Rng) -> Self {
        let period: Vec<f64> = spec
            .extents()
            .iter()
            .zip(spec.spacing())
            .map(|(&n, &h)| n as f64 * h)
            .collect();
        let ky_max = if spec.ndim() == 2 { band.max_mode } else { 0 };
        let mut terms = Vec::new();
        for kx in 0..=band.max_mode {
            for ky in 0..=ky_max {
                let wx = 2.0 * std::f64::consts::PI * kx as f64 / period[0];
                let wy = if spec.ndim() == 2 {
                    2.0 * std::f64::consts::PI * ky as f64 / period[1]
                } else {
                    0.0
                };
                let a = band.amplitude * normal(rng);
                let b = band.amplitude * normal(rng);
                terms.push((wx, wy, a, b));
            }
        }
        Self { terms }
    }

    fn eval(&self, x: [f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|&(wx, wy, a, b)| {
                let arg = wx * x[0] + wy * x[1];
                a * arg.cos() + b * arg.sin()
            })
            .sum()
    }
}

/// Coefficient functions `c_a(x)` for every generator of a basis.
#[derive(Debug, Clone)]
pub struct AlgebraSeries {
    series: Vec<Series>,
}

impl AlgebraSeries {
    pub fn draw(basis: &LieBasis, spec: &GridSpec, band: BandLimit, rng: &mut impl Rng) -> Self {
        Self {
            series: (0..basis.dim())
                .map(|_| Series::draw(spec, band, rng))
                .collect(),
        }
    }

    pub fn components(&self, x: [f64; 2]) -> Vec<f64> {
        self.series.iter().map(|s| s.eval(x)).collect()
    }

    /// `Σ_a c_a(x) T_a` on every site of `spec`.
    pub fn algebra_field(&self, basis: &LieBasis, spec: &GridSpec) -> SiteField<CMatrix> {
        SiteField::from_fn(spec.clone(), |_, x| basis.compose(&self.components(x)))
    }

    /// `exp(i Σ_a c_a(x) T_a)` on every site of `spec`.
    pub fn unitary_field(&self, basis: &LieBasis, spec: &GridSpec) -> UnitaryField {
        let field = SiteField::from_fn(spec.clone(), |_, x| {
            expi_hermitian(&basis.compose(&self.components(x)))
        });
        UnitaryField::new(basis.n_level(), field).expect("exponential of su(N) is special unitary")
    }
}

/// Band-limited random unitary field drawn from `seed`.
pub fn band_limited_unitary(
    basis: &LieBasis,
    spec: &GridSpec,
    band: BandLimit,
    seed: u64,
) -> UnitaryField {
    let mut rng = seeded(seed);
    AlgebraSeries::draw(basis, spec, band, &mut rng).unitary_field(basis, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Boundary;
    use crate::liealg::{build_basis, special_unitary_residual};

    #[test]
    fn haar_unitaries_are_special() {
        let mut rng = seeded(5);
        for n in 2..=8 {
            let u = haar_unitary(n, &mut rng);
            let (a, d) = special_unitary_residual(&u);
            assert!(a < 1e-12 && d < 1e-12, "N={n}: {a} {d}");
        }
    }

    #[test]
    fn exponential_of_generator_matches_closed_form() {
        // exp(i t σ_3 / 2) = Diag(e^{it/2}, e^{-it/2})
        let basis = build_basis(2).unwrap();
        let t = 0.7;
        let u = expi_hermitian(&(basis.generator(2) * Complex64::new(t, 0.0)));
        assert!((u[(0, 0)] - Complex64::from_polar(1.0, t / 2.0)).norm() < 1e-14);
        assert!((u[(1, 1)] - Complex64::from_polar(1.0, -t / 2.0)).norm() < 1e-14);
        assert!(u[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn spectra_are_valid() {
        let mut rng = seeded(1);
        for n in 2..=8 {
            for zeros in 0..n {
                let a = random_spectrum(n, zeros, &mut rng);
                assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(a[..zeros].iter().all(|&v| v == 0.0));
                assert!(a[zeros..].windows(2).all(|w| w[1] > w[0]));
            }
        }
    }

    #[test]
    fn band_limited_fields_are_reproducible() {
        let basis = build_basis(3).unwrap();
        let spec = GridSpec::square(8, 2.0 * std::f64::consts::PI, Boundary::Periodic).unwrap();
        let a = band_limited_unitary(&basis, &spec, BandLimit::default(), 7);
        let b = band_limited_unitary(&basis, &spec, BandLimit::default(), 7);
        assert_eq!(a, b);
        let c = band_limited_unitary(&basis, &spec, BandLimit::default(), 8);
        assert_ne!(a, c);
    }
}
