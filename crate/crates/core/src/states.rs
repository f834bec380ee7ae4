//! Density matrices in spectral, Bloch-vector and Cartan-local-basis form.
//!
//! A state is `ρ = U ρ_d U†` with `ρ_d = Diag(a^1, …, a^N)`. Writing
//! `n_i = U H_i U†`, the same state is
//! `ρ = (I + sqrt(2N(N-1)) Σ_i u^i n_i) / N`, where the coefficients `u^i`
//! depend on the spectrum alone (see [`cartan_coefficients`]).

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::liealg::{inner_matrices, CMatrix, GroupElement, LieBasis};

/// Spectrum entries at or below this value count as zero.
pub const ZERO_TOL: f64 = 1e-14;
/// Nonzero entries closer than this are degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Tolerance on `Σ a^n = 1`.
pub const SUM_TOL: f64 = 1e-12;
/// Lower bound on the smallest eigenvalue of an assembled state.
pub const PSD_TOL: f64 = -1e-10;

/// Eigenvalues of a density matrix.
///
/// [`Spectrum::new`] sorts into canonical order (zeros first, then strictly
/// increasing positives) and records where each entry came from;
/// [`Spectrum::ordered`] keeps the caller's order, which the Cartan
/// coefficients are sensitive to.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    permutation: Vec<usize>,
    zeros: usize,
}

impl Spectrum {
    pub fn new(values: &[f64]) -> Result<Self> {
        let zeros = validate(values)?;
        let mut permutation: Vec<usize> = (0..values.len()).collect();
        permutation.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let values = permutation.iter().map(|&i| values[i]).collect();
        Ok(Self {
            values,
            permutation,
            zeros,
        })
    }

    pub fn ordered(values: &[f64]) -> Result<Self> {
        let zeros = validate(values)?;
        Ok(Self {
            values: values.to_vec(),
            permutation: (0..values.len()).collect(),
            zeros,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_level(&self) -> usize {
        self.values.len()
    }

    /// `permutation()[k]` is the caller's index of stored entry `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Number of zero eigenvalues (`m - 1` in the canonical labelling).
    pub fn zero_count(&self) -> usize {
        self.zeros
    }

    pub fn is_pure(&self) -> bool {
        self.zeros + 1 == self.values.len()
    }

    pub fn is_canonical(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn diagonal(&self) -> CMatrix {
        let n = self.values.len();
        CMatrix::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new(self.values[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

fn validate(values: &[f64]) -> Result<usize> {
    let n = values.len();
    if !(2..=crate::liealg::MAX_LEVEL).contains(&n) {
        return Err(Error::Config(format!("spectrum length {n} out of range")));
    }
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0 && **v <= 1.0))
    {
        return Err(Error::Validation(format!(
            "spectrum entry {i} = {v} is outside [0, 1]"
        )));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::Validation(format!("spectrum sums to {sum}, not 1")));
    }
    let nonzero: Vec<usize> = (0..n).filter(|&i| values[i] > ZERO_TOL).collect();
    for (k, &i) in nonzero.iter().enumerate() {
        for &j in &nonzero[k + 1..] {
            if (values[i] - values[j]).abs() <= DEGENERACY_TOL {
                return Err(Error::DegenerateSpectrum {
                    first: i,
                    second: j,
                    value: values[i],
                });
            }
        }
    }
    Ok(n - nonzero.len())
}

/// `u^i = sqrt(N/(N-1)) / sqrt(i(i+1)) · (Σ_{k≤i} a^k - i a^{i+1})`, in the
/// spectrum's stored order.
pub fn cartan_coefficients(spectrum: &Spectrum) -> Vec<f64> {
    let a = spectrum.values();
    let n = a.len() as f64;
    let pre = (n / (n - 1.0)).sqrt();
    let mut partial = 0.0;
    (1..a.len())
        .map(|i| {
            partial += a[i - 1];
            let fi = i as f64;
            pre / (fi * (fi + 1.0)).sqrt() * (partial - fi * a[i])
        })
        .collect()
}

/// `ρ_d = I/N + sqrt(2(N-1)/N) Σ_i u^i H_i`.
pub fn diagonal_from_cartan(basis: &LieBasis, u: &[f64]) -> CMatrix {
    let n = basis.n_level();
    let nf = n as f64;
    let scale = (2.0 * (nf - 1.0) / nf).sqrt();
    let mut rho = CMatrix::identity(n, n) * Complex64::new(1.0 / nf, 0.0);
    for (h, &ui) in basis.cartan().iter().zip(u) {
        rho += h * Complex64::new(scale * ui, 0.0);
    }
    rho
}

/// `ρ_n`: the pure-state projector onto level `n` (zero-based).
pub fn level_projector(n_level: usize, level: usize) -> CMatrix {
    let mut p = CMatrix::zeros(n_level, n_level);
    p[(level, level)] = Complex64::new(1.0, 0.0);
    p
}

#[derive(Debug, Clone)]
pub struct DensityState {
    spectrum: Spectrum,
    gauge: GroupElement,
    rho: CMatrix,
    bloch: Vec<f64>,
    cartan_u: Vec<f64>,
}

impl DensityState {
    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn gauge(&self) -> &GroupElement {
        &self.gauge
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn bloch(&self) -> &[f64] {
        &self.bloch
    }

    pub fn cartan_u(&self) -> &[f64] {
        &self.cartan_u
    }

    pub fn n_level(&self) -> usize {
        self.spectrum.n_level()
    }

    /// `(v, v) = Σ_a (v^a)²`.
    pub fn bloch_norm_sq(&self) -> f64 {
        self.bloch.iter().map(|v| v * v).sum()
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.rho.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `n_i = U H_i U†`.
    pub fn local_bases(&self, basis: &LieBasis) -> Vec<CMatrix> {
        let u = self.gauge.matrix();
        basis.cartan().iter().map(|h| u * h * u.adjoint()).collect()
    }

    /// `(I + sqrt(2N(N-1)) Σ u^i n_i) / N`.
    pub fn cartan_form(&self, basis: &LieBasis) -> CMatrix {
        let n = self.n_level();
        let nf = n as f64;
        let scale = (2.0 * nf * (nf - 1.0)).sqrt();
        let mut out = CMatrix::identity(n, n);
        for (ni, &ui) in self.local_bases(basis).iter().zip(&self.cartan_u) {
            out += ni * Complex64::new(scale * ui, 0.0);
        }
        out * Complex64::new(1.0 / nf, 0.0)
    }
}

/// `ρ = U Diag(a) U†` with its Bloch vector and Cartan coefficients.
pub fn assemble(
    basis: &LieBasis,
    spectrum: &Spectrum,
    u_gauge: &GroupElement,
) -> Result<DensityState> {
    let n = basis.n_level();
    if spectrum.n_level() != n || u_gauge.n_level() != n {
        return Err(Error::Shape(format!(
            "basis N = {n}, spectrum N = {}, gauge N = {}",
            spectrum.n_level(),
            u_gauge.n_level()
        )));
    }
    let u = u_gauge.matrix();
    let rho = u * spectrum.diagonal() * u.adjoint();
    let mut state = DensityState {
        spectrum: spectrum.clone(),
        gauge: u_gauge.clone(),
        rho,
        bloch: Vec::new(),
        cartan_u: cartan_coefficients(spectrum),
    };
    let min_ev = state.eigenvalues()[0];
    if min_ev < PSD_TOL {
        return Err(Error::Validation(format!(
            "assembled state has eigenvalue {min_ev:.3e} below {PSD_TOL}"
        )));
    }
    state.bloch = bloch_vector(basis, &state);
    Ok(state)
}

/// `v^a = sqrt(N / (2(N-1))) (ρ, T_a)`.
pub fn bloch_vector(basis: &LieBasis, state: &DensityState) -> Vec<f64> {
    let nf = basis.n_level() as f64;
    let scale = (nf / (2.0 * (nf - 1.0))).sqrt();
    basis
        .components(state.rho())
        .into_iter()
        .map(|c| scale * c)
        .collect()
}

/// `(I + sqrt(2N(N-1)) v^a T_a) / N`.
pub fn rho_from_bloch(basis: &LieBasis, bloch: &[f64]) -> CMatrix {
    let n = basis.n_level();
    let nf = n as f64;
    let scale = (2.0 * nf * (nf - 1.0)).sqrt();
    let v = basis.compose(bloch);
    (CMatrix::identity(n, n) + v * Complex64::new(scale, 0.0)) * Complex64::new(1.0 / nf, 0.0)
}

/// `(ρ, X)` helper shared with the Berry module.
pub fn expectation(rho: &CMatrix, x: &CMatrix) -> f64 {
    inner_matrices(rho, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::build_basis;
    use crate::random::{haar_unitary, random_spectrum, seeded};
    use proptest::prelude::*;
    use rand::Rng;

    fn diag_entries(m: &CMatrix) -> Vec<f64> {
        (0..m.nrows()).map(|i| m[(i, i)].re).collect()
    }

    #[test]
    fn su2_pure_state_coefficients() {
        let u = cartan_coefficients(&Spectrum::ordered(&[0.0, 1.0]).unwrap());
        assert!((u[0] + 1.0).abs() < 1e-15);
        let u = cartan_coefficients(&Spectrum::ordered(&[1.0, 0.0]).unwrap());
        assert!((u[0] - 1.0).abs() < 1e-15);
        // canonicalization sends (1, 0) to (0, 1)
        let s = Spectrum::new(&[1.0, 0.0]).unwrap();
        assert_eq!(s.values(), &[0.0, 1.0]);
        assert_eq!(s.permutation(), &[1, 0]);
    }

    #[test]
    fn su3_coefficients_against_reconstruction() {
        let basis = build_basis(3).unwrap();
        let s = Spectrum::new(&[0.0, 0.3, 0.7]).unwrap();
        let u = cartan_coefficients(&s);
        // oracle: reconstruct Diag(a) from u^i H_i; the frozen values follow
        let rec = diagonal_from_cartan(&basis, &u);
        for (got, want) in diag_entries(&rec).iter().zip([0.0, 0.3, 0.7]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((u[0] + 0.259_807_621_135_331_6).abs() < 1e-12);
        assert!((u[1] + 0.55).abs() < 1e-12);
    }

    #[test]
    fn pure_top_level_reconstructs() {
        for n in 2..=8 {
            let basis = build_basis(n).unwrap();
            let mut a = vec![0.0; n];
            a[n - 1] = 1.0;
            let rec =
                diagonal_from_cartan(&basis, &cartan_coefficients(&Spectrum::new(&a).unwrap()));
            assert!((rec - level_projector(n, n - 1)).norm() < 1e-14);
        }
    }

    #[test]
    fn invalid_spectra() {
        assert!(matches!(
            Spectrum::new(&[0.5, 0.5]),
            Err(Error::DegenerateSpectrum { .. })
        ));
        assert!(matches!(
            Spectrum::new(&[1.0 / 3.0; 3]),
            Err(Error::DegenerateSpectrum { .. })
        ));
        assert!(Spectrum::new(&[0.32, 0.33, 0.35]).is_ok());
        assert!(Spectrum::new(&[0.0, 0.0, 1.0]).is_ok());
        assert!(matches!(
            Spectrum::new(&[0.2, 0.7]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            Spectrum::new(&[-0.1, 1.1]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn assemble_identity_gauge() {
        let basis = build_basis(2).unwrap();
        let s = Spectrum::new(&[0.0, 1.0]).unwrap();
        let st = assemble(&basis, &s, &GroupElement::identity(2)).unwrap();
        assert!((st.rho() - level_projector(2, 1)).norm() < 1e-15);
        assert_eq!(st.spectrum().zero_count(), 1);
    }

    #[test]
    fn assemble_rotated_su2() {
        // U = exp(-i (π/2) σ_2 / 2): oracle is direct conjugation of Diag(0,1)
        let basis = build_basis(2).unwrap();
        let c = std::f64::consts::FRAC_PI_4.cos();
        let u = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(c, 0.),
                Complex64::new(-c, 0.),
                Complex64::new(c, 0.),
                Complex64::new(c, 0.),
            ],
        );
        let st = assemble(
            &basis,
            &Spectrum::new(&[0.0, 1.0]).unwrap(),
            &GroupElement::new(u).unwrap(),
        )
        .unwrap();
        // ρ = (I - σ_1)/2 for this U; Bloch vector (-1, 0, 0)
        let expect = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.5, 0.),
                Complex64::new(-0.5, 0.),
                Complex64::new(-0.5, 0.),
                Complex64::new(0.5, 0.),
            ],
        );
        assert!((st.rho() - expect).norm() < 1e-15);
        let v = st.bloch();
        assert!((v[0] + 1.0).abs() < 1e-15 && v[1].abs() < 1e-15 && v[2].abs() < 1e-15);

        // with a = (1, 0) the same U gives (I + σ_1)/2 and v = (1, 0, 0)
        let st = assemble(&basis, &Spectrum::ordered(&[1.0, 0.0]).unwrap(), st.gauge()).unwrap();
        assert!((st.bloch()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn assembled_eigenvalues_match_spectrum() {
        let basis = build_basis(4).unwrap();
        let mut rng = seeded(42);
        let u = GroupElement::new(haar_unitary(4, &mut rng)).unwrap();
        let st = assemble(&basis, &Spectrum::new(&[0.1, 0.2, 0.3, 0.4]).unwrap(), &u).unwrap();
        for (got, want) in st.eigenvalues().iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((got - want).abs() < 1e-13);
        }
        assert!((st.cartan_form(&basis) - st.rho()).norm() < 1e-11);
    }

    #[test]
    fn non_unitary_gauge_is_rejected() {
        let mut u = CMatrix::identity(2, 2);
        u[(0, 1)] = Complex64::new(1e-6, 0.0);
        assert!(GroupElement::new(u).is_err());
    }

    #[test]
    fn bloch_examples() {
        let basis = build_basis(2).unwrap();
        let mut rng = seeded(9);
        let u = GroupElement::new(haar_unitary(2, &mut rng)).unwrap();
        let st = assemble(&basis, &Spectrum::new(&[0.25, 0.75]).unwrap(), &u).unwrap();
        // purity oracle: (v,v) = (N Tr ρ² - 1) / (N - 1) = 2·0.625 - 1
        assert!((st.purity() - 0.625).abs() < 1e-14);
        assert!((st.bloch_norm_sq() - 0.25).abs() < 1e-14);
        assert!((rho_from_bloch(&basis, st.bloch()) - st.rho()).norm() < 1e-11);

        for n in 2..=6 {
            let basis = build_basis(n).unwrap();
            let u = GroupElement::new(haar_unitary(n, &mut rng)).unwrap();
            let mut a = vec![0.0; n];
            a[rng.random_range(0..n)] = 1.0;
            let st = assemble(&basis, &Spectrum::ordered(&a).unwrap(), &u).unwrap();
            assert!((st.bloch_norm_sq() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn maximally_mixed_has_zero_bloch_vector() {
        let basis = build_basis(3).unwrap();
        let rho = CMatrix::identity(3, 3) * Complex64::new(1.0 / 3.0, 0.0);
        assert!(basis.components(&rho).iter().all(|c| c.abs() < 1e-16));
    }

    #[test]
    fn projector_recursion_and_first_projector() {
        for n in 2..=7 {
            let basis = build_basis(n).unwrap();
            let h = basis.cartan();
            // ρ_1 = I/N + Σ_k sqrt(2/(k(k+1))) H_k
            let mut rho1 = CMatrix::identity(n, n) * Complex64::new(1.0 / n as f64, 0.0);
            for k in 1..n {
                rho1 += &h[k - 1] * Complex64::new((2.0 / (k * (k + 1)) as f64).sqrt(), 0.0);
            }
            assert!((rho1 - level_projector(n, 0)).norm() < 1e-14);
            // ρ_{m+1} - ρ_m = sqrt(2(m-1)/m) H_{m-1} - sqrt(2(m+1)/m) H_m, one-based m
            for m in 1..n {
                let fm = m as f64;
                let mut rhs = &h[m - 1] * Complex64::new(-(2.0 * (fm + 1.0) / fm).sqrt(), 0.0);
                if m > 1 {
                    rhs += &h[m - 2] * Complex64::new((2.0 * (fm - 1.0) / fm).sqrt(), 0.0);
                }
                let lhs = level_projector(n, m) - level_projector(n, m - 1);
                assert!((lhs - rhs).norm() < 1e-14, "N={n} m={m}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cartan_round_trip(seed in any::<u64>(), n in 2usize..=8, zeros_frac in 0.0f64..1.0) {
            let mut rng = seeded(seed);
            let zeros = ((n - 1) as f64 * zeros_frac) as usize;
            let a = random_spectrum(n, zeros, &mut rng);
            let basis = build_basis(n).unwrap();
            let s = Spectrum::new(&a).unwrap();
            let rec = diagonal_from_cartan(&basis, &cartan_coefficients(&s));
            let mut got = diag_entries(&rec);
            got.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(&a) {
                prop_assert!((g - w).abs() < 1e-12);
            }
            let off: f64 = (0..n).flat_map(|r| (0..n).map(move |c| (r, c)))
                .filter(|(r, c)| r != c).map(|(r, c)| rec[(r, c)].norm()).sum();
            prop_assert!(off == 0.0);
        }

        #[test]
        fn gauge_covariance_and_purity(seed in any::<u64>(), n in 2usize..=5) {
            let mut rng = seeded(seed);
            let basis = build_basis(n).unwrap();
            let a = random_spectrum(n, rng.random_range(0..n), &mut rng);
            let s = Spectrum::new(&a).unwrap();
            let u1 = GroupElement::new(haar_unitary(n, &mut rng)).unwrap();
            let u2 = GroupElement::new(haar_unitary(n, &mut rng)).unwrap();
            let s1 = assemble(&basis, &s, &u1).unwrap();
            let s2 = assemble(&basis, &s, &u2).unwrap();
            prop_assert_eq!(s1.cartan_u(), s2.cartan_u());
            let p = s1.purity();
            let nf = n as f64;
            prop_assert!(p >= 1.0 / nf - 1e-12 && p <= 1.0 + 1e-12);
            prop_assert!((s1.bloch_norm_sq() - (nf * p - 1.0) / (nf - 1.0)).abs() < 1e-11);
            prop_assert!((s1.bloch_norm_sq() < 1.0 - 1e-9) != s.is_pure());
            prop_assert!((s1.cartan_form(&basis) - s1.rho()).norm() < 1e-11);
        }
    }
}
