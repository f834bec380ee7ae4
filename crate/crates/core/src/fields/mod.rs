//! Grid containers, the finite-difference stencil, and deterministic reductions.
//!
//! Sites of a 2D grid are stored row-major in `(ix, iy)`: the flat index is
//! `ix * ny + iy`, so `iy` varies fastest. Coordinates are centered on the
//! origin, `x = (ix - (nx - 1)/2) * hx`, and are dimensionless.

mod export;
mod io;

pub use export::{export_scalar_map, ScalarMapExport};
pub use io::{
    load_field, load_field_str, save_field, to_json_string, write_json_pretty, FieldData,
    FieldFile, FieldKind,
};

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Site};
use crate::liealg::{special_unitary_residual, CMatrix};

/// Per-site special-unitarity tolerance for unitary fields.
pub const UNITARY_TOL: f64 = 1e-8;
/// Per-site unit-norm tolerance for magnetization fields.
pub const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Clamped,
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamped" => Ok(Boundary::Clamped),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::Config(format!("unknown boundary '{other}'"))),
        }
    }
}

/// Shape, spacing and boundary policy of a rectangular 1D or 2D grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    extents: Vec<usize>,
    spacing: Vec<f64>,
    boundary: Boundary,
}

impl GridSpec {
    pub fn new(extents: &[usize], spacing: &[f64], boundary: Boundary) -> Result<Self> {
        if extents.is_empty() || extents.len() > 2 {
            return Err(Error::UnsupportedDimension {
                expected: 2,
                found: extents.len(),
            });
        }
        if spacing.len() != extents.len() {
            return Err(Error::Shape(format!(
                "{} extents but {} spacings",
                extents.len(),
                spacing.len()
            )));
        }
        if let Some(n) = extents.iter().find(|&&n| n < 3) {
            return Err(Error::Config(format!("grid extents must be >= 3, got {n}")));
        }
        if let Some(h) = spacing.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::Config(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        Ok(Self {
            extents: extents.to_vec(),
            spacing: spacing.to_vec(),
            boundary,
        })
    }

    pub fn line(n: usize, h: f64, boundary: Boundary) -> Result<Self> {
        Self::new(&[n], &[h], boundary)
    }

    /// An `n × n` grid covering `[-extent/2, extent/2]²` with spacing `extent / n`.
    pub fn square(n: usize, extent: f64, boundary: Boundary) -> Result<Self> {
        let h = extent / n as f64;
        Self::new(&[n, n], &[h, h], boundary)
    }

    pub fn ndim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Area (2D) or length (1D) element of one cell.
    pub fn cell_measure(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn require_2d(&self) -> Result<()> {
        if self.ndim() != 2 {
            return Err(Error::UnsupportedDimension {
                expected: 2,
                found: self.ndim(),
            });
        }
        Ok(())
    }

    pub fn site(&self, index: usize) -> Site {
        if self.ndim() == 1 {
            Site {
                coords: [index, 0],
                ndim: 1,
            }
        } else {
            let ny = self.extents[1];
            Site {
                coords: [index / ny, index % ny],
                ndim: 2,
            }
        }
    }

    pub fn index(&self, coords: [usize; 2]) -> usize {
        if self.ndim() == 1 {
            coords[0]
        } else {
            coords[0] * self.extents[1] + coords[1]
        }
    }

    /// Centered coordinates of a site; the second entry is 0 on 1D grids.
    pub fn coordinates(&self, index: usize) -> [f64; 2] {
        let site = self.site(index);
        let mut out = [0.0; 2];
        for (axis, slot) in out.iter_mut().enumerate().take(self.ndim()) {
            let n = self.extents[axis] as f64;
            *slot = (site.coords[axis] as f64 - 0.5 * (n - 1.0)) * self.spacing[axis];
        }
        out
    }

    /// Neighbor at `offset` steps along `axis`, wrapping on periodic grids.
    pub fn neighbor(&self, index: usize, axis: usize, offset: isize) -> Option<usize> {
        let site = self.site(index);
        let n = self.extents[axis] as isize;
        let mut pos = site.coords[axis] as isize + offset;
        match self.boundary {
            Boundary::Periodic => pos = pos.rem_euclid(n),
            Boundary::Clamped => {
                if pos < 0 || pos >= n {
                    return None;
                }
            }
        }
        let mut coords = site.coords;
        coords[axis] = pos as usize;
        Some(self.index(coords))
    }

    /// The same domain at half the spacing.
    pub fn refined(&self) -> Self {
        Self {
            extents: self.extents.iter().map(|n| 2 * n).collect(),
            spacing: self.spacing.iter().map(|h| 0.5 * h).collect(),
            boundary: self.boundary,
        }
    }

    /// Sites on the outer ring of a 2D grid.
    pub fn boundary_ring(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let s = self.site(i);
                (0..self.ndim()).any(|a| s.coords[a] == 0 || s.coords[a] + 1 == self.extents[a])
            })
            .collect()
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.ndim() {
            return Err(Error::Config(format!(
                "axis {axis} out of range for a {}D grid",
                self.ndim()
            )));
        }
        Ok(())
    }
}

/// Values that the stencil can combine linearly.
pub trait LinearValue: Clone + Send + Sync {
    fn combine(terms: &[(f64, &Self)]) -> Self;
}

impl LinearValue for f64 {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        terms.iter().map(|(c, v)| c * **v).sum()
    }
}

impl LinearValue for Complex64 {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        terms.iter().map(|(c, v)| **v * *c).sum()
    }
}

impl LinearValue for Vector3<f64> {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        terms
            .iter()
            .fold(Vector3::zeros(), |acc, (c, v)| acc + **v * *c)
    }
}

impl LinearValue for CMatrix {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        let (r, c) = terms[0].1.shape();
        let mut out = CMatrix::zeros(r, c);
        for (coef, v) in terms {
            out.zip_apply(*v, |o, x| *o += x * *coef);
        }
        out
    }
}

/// Per-site data on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteField<T> {
    spec: GridSpec,
    data: Vec<T>,
}

pub type ScalarMap = SiteField<f64>;
pub type VectorField3 = SiteField<Vector3<f64>>;

impl<T> SiteField<T> {
    pub fn from_vec(spec: GridSpec, data: Vec<T>) -> Result<Self> {
        if data.len() != spec.len() {
            return Err(Error::Shape(format!(
                "grid has {} sites but {} values were given",
                spec.len(),
                data.len()
            )));
        }
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, index: usize) -> &T {
        &self.data[index]
    }
}

impl<T: Send + Sync> SiteField<T> {
    /// Builds a field from site index and centered coordinates, in parallel.
    pub fn from_fn<F>(spec: GridSpec, f: F) -> Self
    where
        F: Fn(usize, [f64; 2]) -> T + Sync + Send,
    {
        let data = (0..spec.len())
            .into_par_iter()
            .map(|i| f(i, spec.coordinates(i)))
            .collect();
        Self { spec, data }
    }

    pub fn map<U: Send, F>(&self, f: F) -> SiteField<U>
    where
        F: Fn(&T) -> U + Sync + Send,
    {
        SiteField {
            spec: self.spec.clone(),
            data: self.data.par_iter().map(f).collect(),
        }
    }

    pub fn map_indexed<U: Send, F>(&self, f: F) -> SiteField<U>
    where
        F: Fn(usize, &T) -> U + Sync + Send,
    {
        SiteField {
            spec: self.spec.clone(),
            data: self
                .data
                .par_iter()
                .enumerate()
                .map(|(i, v)| f(i, v))
                .collect(),
        }
    }
}

/// Derivative along `axis`: central differences in the interior; on clamped
/// boundaries the one-sided second-order stencil, on periodic ones wraparound.
pub fn partial<T: LinearValue>(field: &SiteField<T>, axis: usize) -> Result<SiteField<T>> {
    let spec = field.spec();
    spec.check_axis(axis)?;
    let h = spec.spacing()[axis];
    let c = 0.5 / h;
    let data = (0..spec.len())
        .into_par_iter()
        .map(|i| stencil_at(field, i, axis, c))
        .collect();
    Ok(SiteField {
        spec: spec.clone(),
        data,
    })
}

fn stencil_at<T: LinearValue>(field: &SiteField<T>, i: usize, axis: usize, c: f64) -> T {
    let spec = field.spec();
    let d = &field.data;
    match (spec.neighbor(i, axis, -1), spec.neighbor(i, axis, 1)) {
        (Some(m), Some(p)) => T::combine(&[(c, &d[p]), (-c, &d[m])]),
        (None, Some(p)) => {
            let p2 = spec.neighbor(i, axis, 2).expect("extent >= 3");
            // differences first so constants give an exact zero
            let (d1, d2) = (
                T::combine(&[(1.0, &d[p]), (-1.0, &d[i])]),
                T::combine(&[(1.0, &d[p2]), (-1.0, &d[i])]),
            );
            T::combine(&[(4.0 * c, &d1), (-c, &d2)])
        }
        (Some(m), None) => {
            let m2 = spec.neighbor(i, axis, -2).expect("extent >= 3");
            let (d1, d2) = (
                T::combine(&[(1.0, &d[i]), (-1.0, &d[m])]),
                T::combine(&[(1.0, &d[i]), (-1.0, &d[m2])]),
            );
            T::combine(&[(4.0 * c, &d1), (-c, &d2)])
        }
        (None, None) => unreachable!("extent >= 3"),
    }
}

/// Sites whose stencil along `axis` reads from `index`'s position, i.e. the
/// neighbors the derivative at `index` depends on (including itself).
pub fn stencil_support(spec: &GridSpec, index: usize, axis: usize) -> Vec<usize> {
    match (
        spec.neighbor(index, axis, -1),
        spec.neighbor(index, axis, 1),
    ) {
        (Some(m), Some(p)) => vec![m, p],
        (None, Some(p)) => vec![index, p, spec.neighbor(index, axis, 2).unwrap()],
        (Some(m), None) => vec![index, m, spec.neighbor(index, axis, -2).unwrap()],
        (None, None) => vec![index],
    }
}

/// Propagates an exclusion mask through one derivative: a site stays valid
/// only if every value its stencils read along all axes is valid.
pub fn propagate_mask(spec: &GridSpec, valid: &[bool]) -> Vec<bool> {
    (0..spec.len())
        .map(|i| {
            valid[i]
                && (0..spec.ndim())
                    .all(|axis| stencil_support(spec, i, axis).iter().all(|&j| valid[j]))
        })
        .collect()
}

/// Compensated (Neumaier) summation in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Maximum in row-major order; NaN-free inputs assumed.
pub fn max_of<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().fold(0.0f64, f64::max)
}

/// A field of special unitary matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryField {
    n_level: usize,
    field: SiteField<CMatrix>,
}

impl UnitaryField {
    /// Validates every site against the special-unitarity tolerance.
    pub fn new(n_level: usize, field: SiteField<CMatrix>) -> Result<Self> {
        let spec = field.spec().clone();
        let bad = field
            .data()
            .par_iter()
            .enumerate()
            .map(|(i, u)| {
                if u.shape() != (n_level, n_level) {
                    return Some((i, f64::INFINITY, f64::INFINITY));
                }
                let (unitarity, det) = special_unitary_residual(u);
                (unitarity > UNITARY_TOL || det > UNITARY_TOL || unitarity.is_nan() || det.is_nan())
                    .then_some((i, unitarity, det))
            })
            .find_first(Option::is_some)
            .flatten();
        if let Some((i, unitarity, det)) = bad {
            return Err(Error::NonUnitary {
                site: spec.site(i),
                unitarity,
                det,
            });
        }
        Ok(Self { n_level, field })
    }

    pub fn identity(n_level: usize, spec: GridSpec) -> Self {
        let field = SiteField::from_fn(spec, |_, _| CMatrix::identity(n_level, n_level));
        Self { n_level, field }
    }

    pub fn n_level(&self) -> usize {
        self.n_level
    }

    pub fn spec(&self) -> &GridSpec {
        self.field.spec()
    }

    pub fn field(&self) -> &SiteField<CMatrix> {
        &self.field
    }

    pub fn get(&self, index: usize) -> &CMatrix {
        self.field.get(index)
    }

    /// `V U(x)` for a constant matrix `V`.
    pub fn left_multiply(&self, v: &CMatrix) -> Result<Self> {
        Self::new(self.n_level, self.field.map(|u| v * u))
    }

    /// `‖U(x + h e_axis) - U(x)‖_F` for every forward link.
    pub fn link_distances(&self, axis: usize) -> Vec<Option<f64>> {
        let spec = self.spec();
        (0..spec.len())
            .into_par_iter()
            .map(|i| {
                spec.neighbor(i, axis, 1)
                    .map(|j| (self.field.get(j) - self.field.get(i)).norm())
            })
            .collect()
    }
}

/// Checks that every site of a vector field is a unit vector.
pub fn validate_unit_field(m: &VectorField3) -> Result<()> {
    if let Some((i, dev)) = m
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.norm() - 1.0))
        .find(|(_, dev)| dev.abs() > UNIT_NORM_TOL || dev.is_nan())
    {
        return Err(Error::NonUnitVector {
            site: m.spec().site(i),
            deviation: dev,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(&[2], &[1.0], Boundary::Clamped).is_err());
        assert!(GridSpec::new(&[4, 4], &[1.0, -1.0], Boundary::Clamped).is_err());
        assert!(matches!(
            GridSpec::new(&[4, 4, 4], &[1.0; 3], Boundary::Clamped),
            Err(Error::UnsupportedDimension { .. })
        ));
        let g = GridSpec::new(&[4, 5], &[0.5, 0.25], Boundary::Periodic).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g.site(7).coords, [1, 2]);
        assert_eq!(g.neighbor(g.index([3, 4]), 1, 1), Some(g.index([3, 0])));
        assert_eq!(g.coordinates(0), [-0.75, -0.5]);
    }

    #[test]
    fn constant_field_has_zero_derivative() {
        for b in [Boundary::Clamped, Boundary::Periodic] {
            let g = GridSpec::new(&[6, 7], &[0.3, 0.2], b).unwrap();
            let f = ScalarMap::from_fn(g, |_, _| 2.5);
            for axis in 0..2 {
                assert!(partial(&f, axis).unwrap().data().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn affine_data_is_differentiated_exactly_on_clamped_grids() {
        let g = GridSpec::line(9, 0.25, Boundary::Clamped).unwrap();
        let f = ScalarMap::from_fn(g, |_, x| x[0]);
        let d = partial(&f, 0).unwrap();
        assert!(d.data().iter().all(|v| (v - 1.0).abs() < 1e-13));

        let g = GridSpec::new(&[5, 6], &[0.1, 0.3], Boundary::Clamped).unwrap();
        let f = ScalarMap::from_fn(g, |_, x| 3.0 * x[0] - 2.0 * x[1] + 1.0);
        let dx = partial(&f, 0).unwrap();
        let dy = partial(&f, 1).unwrap();
        assert!(dx.data().iter().all(|v| (v - 3.0).abs() < 1e-12));
        assert!(dy.data().iter().all(|v| (v + 2.0).abs() < 1e-12));
    }

    fn sine_error(n: usize, boundary: Boundary) -> f64 {
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let g = GridSpec::line(n, h, boundary).unwrap();
        let f = ScalarMap::from_fn(g.clone(), |_, x| x[0].sin());
        let d = partial(&f, 0).unwrap();
        (0..g.len())
            .map(|i| (d.data()[i] - g.coordinates(i)[0].cos()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn second_order_convergence() {
        for b in [Boundary::Clamped, Boundary::Periodic] {
            let ratio = sine_error(64, b) / sine_error(128, b);
            assert!((ratio - 4.0).abs() < 0.2, "{b:?}: {ratio}");
        }
    }

    #[test]
    fn periodic_harmonic_error_is_uniform() {
        let n = 64;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let g = GridSpec::line(n, h, Boundary::Periodic).unwrap();
        let f = ScalarMap::from_fn(g.clone(), |_, x| x[0].sin());
        let d = partial(&f, 0).unwrap();
        // central difference of sin is cos · sin(h)/h exactly
        let factor = h.sin() / h;
        for i in 0..n {
            let exact = g.coordinates(i)[0].cos();
            assert!((d.data()[i] - factor * exact).abs() < 1e-13);
        }
    }

    #[test]
    fn bad_axis_is_an_error() {
        let g = GridSpec::line(5, 1.0, Boundary::Clamped).unwrap();
        let f = ScalarMap::from_fn(g, |_, _| 0.0);
        assert!(matches!(partial(&f, 1), Err(Error::Config(_))));
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let vals = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(vals), 2.0);
    }

    #[test]
    fn mask_propagation() {
        let g = GridSpec::new(&[5, 5], &[1.0, 1.0], Boundary::Clamped).unwrap();
        let mut valid = vec![true; 25];
        valid[g.index([2, 2])] = false;
        let out = propagate_mask(&g, &valid);
        assert!(!out[g.index([1, 2])]);
        assert!(!out[g.index([2, 3])]);
        assert!(out[g.index([1, 1])]);
    }

    proptest! {
        #[test]
        fn derivative_is_linear(
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            fs in proptest::collection::vec(-1.0f64..1.0, 30),
            gs in proptest::collection::vec(-1.0f64..1.0, 30),
            periodic in any::<bool>(),
        ) {
            let boundary = if periodic { Boundary::Periodic } else { Boundary::Clamped };
            let spec = GridSpec::new(&[5, 6], &[0.2, 0.7], boundary).unwrap();
            let f = ScalarMap::from_vec(spec.clone(), fs).unwrap();
            let g = ScalarMap::from_vec(spec.clone(), gs).unwrap();
            let combo = ScalarMap::from_vec(
                spec,
                f.data().iter().zip(g.data()).map(|(x, y)| a * x + b * y).collect(),
            ).unwrap();
            for axis in 0..2 {
                let lhs = partial(&combo, axis).unwrap();
                let df = partial(&f, axis).unwrap();
                let dg = partial(&g, axis).unwrap();
                for i in 0..lhs.len() {
                    let rhs = a * df.data()[i] + b * dg.data()[i];
                    prop_assert!((lhs.data()[i] - rhs).abs() < 1e-12);
                }
            }
        }
    }
}
