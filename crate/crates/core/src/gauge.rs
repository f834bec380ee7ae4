//! Flat connections `K_μ = (1/ig) ∂_μU U†`, Cartan local bases
//! `n_i = U H_i U†`, Wu-Yang potentials `a^i_μ = (K_μ, n_i)` and the Abelian
//! field strengths built from them.
//!
//! Derivatives all go through [`crate::fields::partial`], so quantities that
//! are algebraically related in the continuum stay related to rounding error
//! whenever they share a stencil.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{max_of, partial, propagate_mask, GridSpec, ScalarMap, SiteField, UnitaryField};
use crate::liealg::{
    commutator_matrix, hermitian_residual, inner_complex, inner_matrices, project_algebra, trace, CMatrix,
    LieBasis,
};

/// Tolerance for Hermitian/traceless entries of an [`AlgebraField`].
pub const ALGEBRA_TOL: f64 = 1e-9;

/// What to do when a link of the unitary field jumps by more than the
/// smoothness bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothnessPolicy {
    /// Fail with [`Error::Smoothness`] citing the first offending link.
    Reject,
    /// Drop every site whose stencil reads across an offending link.
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaugeParams {
    pub g: f64,
    /// Largest accepted `‖U(x+h) - U(x)‖_F` between neighbors.
    pub smoothness_bound: f64,
    pub policy: SmoothnessPolicy,
}

impl Default for GaugeParams {
    fn default() -> Self {
        Self {
            g: 1.0,
            smoothness_bound: 0.5,
            policy: SmoothnessPolicy::Reject,
        }
    }
}

impl GaugeParams {
    pub fn new(g: f64) -> Result<Self> {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::Config(format!("coupling g must be positive, got {g}")));
        }
        Ok(Self { g, ..Self::default() })
    }

    pub fn with_policy(mut self, policy: SmoothnessPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_smoothness_bound(mut self, bound: f64) -> Self {
        self.smoothness_bound = bound;
        self
    }

    fn ig(&self) -> Complex64 {
        Complex64::new(0.0, self.g)
    }
}

/// A Lie-algebra valued one-form: one traceless Hermitian matrix per site and
/// axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraField {
    n_level: usize,
    axes: Vec<SiteField<CMatrix>>,
}

impl AlgebraField {
    pub fn new(n_level: usize, axes: Vec<SiteField<CMatrix>>) -> Result<Self> {
        let spec = axes
            .first()
            .ok_or_else(|| Error::Shape("algebra field needs at least one axis".into()))?
            .spec()
            .clone();
        if axes.len() != spec.ndim() || axes.iter().any(|f| f.spec() != &spec) {
            return Err(Error::Shape("algebra field axes disagree with the grid".into()));
        }
        for (mu, field) in axes.iter().enumerate() {
            for (i, x) in field.data().iter().enumerate() {
                let bad = x.shape() != (n_level, n_level)
                    || hermitian_residual(x) > ALGEBRA_TOL
                    || trace(x).norm() > ALGEBRA_TOL;
                if bad {
                    return Err(Error::Validation(format!(
                        "axis {mu} entry at site {} is not traceless Hermitian",
                        spec.site(i)
                    )));
                }
            }
        }
        Ok(Self { n_level, axes })
    }

    pub fn zero(n_level: usize, spec: &GridSpec) -> Self {
        let axes = (0..spec.ndim())
            .map(|_| SiteField::from_fn(spec.clone(), |_, _| CMatrix::zeros(n_level, n_level)))
            .collect();
        Self { n_level, axes }
    }

    pub fn n_level(&self) -> usize {
        self.n_level
    }

    pub fn spec(&self) -> &GridSpec {
        self.axes[0].spec()
    }

    pub fn axis(&self, mu: usize) -> &SiteField<CMatrix> {
        &self.axes[mu]
    }

    pub fn axes(&self) -> &[SiteField<CMatrix>] {
        &self.axes
    }
}

/// Discrete flat connection and what was discarded to make it su(N)-valued.
#[derive(Debug, Clone)]
pub struct FlatConnection {
    pub field: AlgebraField,
    /// Max `‖(K - K†)/2‖_F` before projection.
    pub antihermitian_residual: f64,
    /// Max `|Tr K|` before projection.
    pub trace_residual: f64,
    /// Sites where `K` is trustworthy; `K` is zero elsewhere.
    pub valid: Vec<bool>,
}

impl FlatConnection {
    pub fn excluded_sites(&self) -> Vec<usize> {
        excluded(&self.valid)
    }
}

fn excluded(valid: &[bool]) -> Vec<usize> {
    valid.iter().enumerate().filter(|(_, v)| !**v).map(|(i, _)| i).collect()
}

fn check_shape(basis: &LieBasis, u: &UnitaryField) -> Result<()> {
    if basis.n_level() != u.n_level() {
        return Err(Error::Shape(format!(
            "basis N = {} but field N = {}",
            basis.n_level(),
            u.n_level()
        )));
    }
    Ok(())
}

/// Sites whose first derivatives can be trusted: outside `excluded` and not
/// reading across any link longer than the smoothness bound.
pub fn smoothness_mask(u: &UnitaryField, params: &GaugeParams, excluded: &[usize]) -> Result<Vec<bool>> {
    let spec = u.spec();
    let mut ok = vec![true; spec.len()];
    for &i in excluded {
        ok[i] = false;
    }
    for axis in 0..spec.ndim() {
        for (i, d) in u.link_distances(axis).into_iter().enumerate() {
            let Some(d) = d else { continue };
            if d > params.smoothness_bound || d.is_nan() {
                if params.policy == SmoothnessPolicy::Reject {
                    return Err(Error::Smoothness {
                        site: spec.site(i),
                        axis,
                        distance: d,
                        bound: params.smoothness_bound,
                    });
                }
                ok[i] = false;
                ok[spec.neighbor(i, axis, 1).expect("forward link")] = false;
            }
        }
    }
    Ok(propagate_mask(spec, &ok))
}

/// `K_μ = (1/ig) ∂_μU U†`, projected onto su(N).
pub fn flat_connection(u: &UnitaryField, params: &GaugeParams) -> Result<FlatConnection> {
    flat_connection_excluding(u, params, &[])
}

/// As [`flat_connection`], additionally dropping the listed sites (for
/// example Dirac-string sites of a texture) and everything their stencils
/// touch.
pub fn flat_connection_excluding(
    u: &UnitaryField,
    params: &GaugeParams,
    excluded: &[usize],
) -> Result<FlatConnection> {
    let valid = smoothness_mask(u, params, excluded)?;
    let spec = u.spec();
    let n = u.n_level();
    let inv_ig = params.ig().inv();
    let mut axes = Vec::with_capacity(spec.ndim());
    let mut anti = 0.0f64;
    let mut tr = 0.0f64;
    for axis in 0..spec.ndim() {
        let du = partial(u.field(), axis)?;
        let per_site: Vec<(CMatrix, f64, f64)> = (0..spec.len())
            .into_par_iter()
            .map(|i| {
                if !valid[i] {
                    return (CMatrix::zeros(n, n), 0.0, 0.0);
                }
                let raw = du.get(i) * u.get(i).adjoint() * inv_ig;
                let a = hermitian_residual(&raw);
                let t = trace(&raw).norm();
                (project_algebra(&raw), a, t)
            })
            .collect();
        anti = anti.max(max_of(per_site.iter().map(|p| p.1)));
        tr = tr.max(max_of(per_site.iter().map(|p| p.2)));
        axes.push(SiteField::from_vec(spec.clone(), per_site.into_iter().map(|p| p.0).collect())?);
    }
    Ok(FlatConnection {
        field: AlgebraField { n_level: n, axes },
        antihermitian_residual: anti,
        trace_residual: tr,
        valid,
    })
}

/// `n_i = U H_i U†` for `i = 1..N-1`.
pub fn local_bases(basis: &LieBasis, u: &UnitaryField) -> Result<Vec<SiteField<CMatrix>>> {
    check_shape(basis, u)?;
    Ok(basis
        .cartan()
        .iter()
        .map(|h| u.field().map(|m| m * h * m.adjoint()))
        .collect())
}

/// Per-site scalar maps indexed `[i][μ]`, NaN at excluded sites.
#[derive(Debug, Clone)]
pub struct WuYangPotentials {
    pub maps: Vec<Vec<ScalarMap>>,
    pub valid: Vec<bool>,
}

impl WuYangPotentials {
    pub fn get(&self, i: usize, mu: usize) -> &ScalarMap {
        &self.maps[i][mu]
    }
}

/// `a^i_μ = (K_μ, n_i)` from a precomputed connection and bases.
pub fn project_potentials(k: &FlatConnection, bases: &[SiteField<CMatrix>]) -> WuYangPotentials {
    let maps = bases
        .iter()
        .map(|n_i| {
            k.field
                .axes()
                .iter()
                .map(|k_mu| {
                    k_mu.map_indexed(|s, km| {
                        if k.valid[s] {
                            inner_matrices(km, n_i.get(s))
                        } else {
                            f64::NAN
                        }
                    })
                })
                .collect()
        })
        .collect();
    WuYangPotentials {
        maps,
        valid: k.valid.clone(),
    }
}

/// `a^i_μ = (1/ig)(∂_μU U†, n_i)`.
pub fn wu_yang_potentials(basis: &LieBasis, u: &UnitaryField, params: &GaugeParams) -> Result<WuYangPotentials> {
    wu_yang_potentials_excluding(basis, u, params, &[])
}

pub fn wu_yang_potentials_excluding(
    basis: &LieBasis,
    u: &UnitaryField,
    params: &GaugeParams,
    excluded: &[usize],
) -> Result<WuYangPotentials> {
    let bases = local_bases(basis, u)?;
    let k = flat_connection_excluding(u, params, excluded)?;
    Ok(project_potentials(&k, &bases))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurvatureMethod {
    /// `∂_1 a^i_2 - ∂_2 a^i_1`.
    Curl,
    /// `(1/ig)(n_i, [∂_1 n_k, ∂_2 n_k])`, summed over `k`.
    Bases,
}

impl std::str::FromStr for CurvatureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curl" => Ok(Self::Curl),
            "bases" => Ok(Self::Bases),
            other => Err(Error::Config(format!("unknown curvature method '{other}'"))),
        }
    }
}

/// `K^i_{12}` per site, one map per Cartan index, NaN at excluded sites.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub maps: Vec<ScalarMap>,
    pub valid: Vec<bool>,
}

fn mask_map(map: ScalarMap, valid: &[bool]) -> ScalarMap {
    map.map_indexed(|i, v| if valid[i] { *v } else { f64::NAN })
}

/// Zero wherever the mask is off so NaNs do not leak into stencils.
fn zero_masked(map: &ScalarMap, valid: &[bool]) -> ScalarMap {
    map.map_indexed(|i, v| if valid[i] { *v } else { 0.0 })
}

/// `(1/ig) Σ_k (n_i, [X_k, Y_k])` per site.
fn commutator_term(n_i: &SiteField<CMatrix>, x: &[SiteField<CMatrix>], y: &[SiteField<CMatrix>], g: f64) -> ScalarMap {
    let inv_ig = Complex64::new(0.0, g).inv();
    n_i.map_indexed(|s, n| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (xk, yk) in x.iter().zip(y) {
            acc += inner_complex(n, &commutator_matrix(xk.get(s), yk.get(s)));
        }
        (acc * inv_ig).re
    })
}

pub fn wu_yang_curvature(
    basis: &LieBasis,
    u: &UnitaryField,
    params: &GaugeParams,
    method: CurvatureMethod,
) -> Result<Curvature> {
    wu_yang_curvature_excluding(basis, u, params, method, &[])
}

pub fn wu_yang_curvature_excluding(
    basis: &LieBasis,
    u: &UnitaryField,
    params: &GaugeParams,
    method: CurvatureMethod,
    excluded: &[usize],
) -> Result<Curvature> {
    let spec = u.spec();
    if spec.ndim() != 2 {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            found: spec.ndim(),
        });
    }
    match method {
        CurvatureMethod::Curl => {
            let pots = wu_yang_potentials_excluding(basis, u, params, excluded)?;
            let valid = propagate_mask(spec, &pots.valid);
            let maps = pots
                .maps
                .iter()
                .map(|a| {
                    let d1a2 = partial(&zero_masked(&a[1], &pots.valid), 0)?;
                    let d2a1 = partial(&zero_masked(&a[0], &pots.valid), 1)?;
                    let curl = d1a2.map_indexed(|s, v| v - d2a1.get(s));
                    Ok(mask_map(curl, &valid))
                })
                .collect::<Result<_>>()?;
            Ok(Curvature { maps, valid })
        }
        CurvatureMethod::Bases => {
            let valid = smoothness_mask(u, params, excluded)?;
            let bases = local_bases(basis, u)?;
            let d1: Vec<_> = bases.iter().map(|n| partial(n, 0)).collect::<Result<_>>()?;
            let d2: Vec<_> = bases.iter().map(|n| partial(n, 1)).collect::<Result<_>>()?;
            let maps = bases
                .iter()
                .map(|n_i| mask_map(commutator_term(n_i, &d1, &d2, params.g), &valid))
                .collect();
            Ok(Curvature { maps, valid })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorForm {
    /// `(F_12, n_i) - (1/ig)(n_i, [D_1 n_k, D_2 n_k])`.
    Covariant,
    /// `∂_1 A^i_2 - ∂_2 A^i_1 - (1/ig)(n_i, [∂_1 n_k, ∂_2 n_k])`.
    Reduced,
}

/// Gauge-invariant Abelian field strength `f^i_12` of a potential `A`
/// relative to the local bases of `U`.
pub fn thooft_tensor(
    basis: &LieBasis,
    a: &AlgebraField,
    u: &UnitaryField,
    params: &GaugeParams,
    form: TensorForm,
) -> Result<Curvature> {
    check_shape(basis, u)?;
    let spec = u.spec();
    if spec.ndim() != 2 {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            found: spec.ndim(),
        });
    }
    if a.spec() != spec || a.n_level() != u.n_level() {
        return Err(Error::Shape("potential and unitary field disagree in grid or N".into()));
    }
    let valid = smoothness_mask(u, params, &[])?;
    let bases = local_bases(basis, u)?;
    let ig = params.ig();
    let d1: Vec<_> = bases.iter().map(|n| partial(n, 0)).collect::<Result<_>>()?;
    let d2: Vec<_> = bases.iter().map(|n| partial(n, 1)).collect::<Result<_>>()?;
    let (a1, a2) = (a.axis(0), a.axis(1));

    let maps = match form {
        TensorForm::Covariant => {
            let da2 = partial(a2, 0)?;
            let da1 = partial(a1, 1)?;
            let f12 = da2.map_indexed(|s, x| x - da1.get(s) - commutator_matrix(a1.get(s), a2.get(s)) * ig);
            let cov = |dn: &[SiteField<CMatrix>], am: &SiteField<CMatrix>| -> Vec<SiteField<CMatrix>> {
                dn.iter()
                    .zip(&bases)
                    .map(|(d, n)| d.map_indexed(|s, x| x - commutator_matrix(am.get(s), n.get(s)) * ig))
                    .collect()
            };
            let (dd1, dd2) = (cov(&d1, a1), cov(&d2, a2));
            bases
                .iter()
                .map(|n_i| {
                    let t = commutator_term(n_i, &dd1, &dd2, params.g);
                    mask_map(n_i.map_indexed(|s, n| inner_matrices(f12.get(s), n) - t.get(s)), &valid)
                })
                .collect()
        }
        TensorForm::Reduced => bases
            .iter()
            .map(|n_i| {
                let proj = |am: &SiteField<CMatrix>| am.map_indexed(|s, x| inner_matrices(x, n_i.get(s)));
                let d1a2 = partial(&proj(a2), 0)?;
                let d2a1 = partial(&proj(a1), 1)?;
                let t = commutator_term(n_i, &d1, &d2, params.g);
                Ok(mask_map(d1a2.map_indexed(|s, v| v - d2a1.get(s) - t.get(s)), &valid))
            })
            .collect::<Result<_>>()?,
    };
    Ok(Curvature { maps, valid })
}

#[derive(Debug, Clone, Serialize)]
pub struct ParallelTransportReport {
    /// Max over sites, axes and Cartan indices of `‖∂_μn_i - ig[K_μ, n_i]‖_F`.
    pub max_residual: f64,
    pub per_axis: Vec<f64>,
    pub sites_checked: usize,
}

pub fn check_parallel_transport(basis: &LieBasis, u: &UnitaryField, params: &GaugeParams) -> Result<ParallelTransportReport> {
    check_parallel_transport_excluding(basis, u, params, &[])
}

pub fn check_parallel_transport_excluding(
    basis: &LieBasis,
    u: &UnitaryField,
    params: &GaugeParams,
    excluded: &[usize],
) -> Result<ParallelTransportReport> {
    let bases = local_bases(basis, u)?;
    let k = flat_connection_excluding(u, params, excluded)?;
    let ig = params.ig();
    let mut per_axis = Vec::new();
    for (mu, k_mu) in k.field.axes().iter().enumerate() {
        let mut worst = 0.0f64;
        for n_i in &bases {
            let dn = partial(n_i, mu)?;
            let r = dn.map_indexed(|s, d| {
                if k.valid[s] {
                    (d - commutator_matrix(k_mu.get(s), n_i.get(s)) * ig).norm()
                } else {
                    0.0
                }
            });
            worst = worst.max(max_of(r.data().iter().copied()));
        }
        per_axis.push(worst);
    }
    Ok(ParallelTransportReport {
        max_residual: max_of(per_axis.iter().copied()),
        per_axis,
        sites_checked: k.valid.iter().filter(|v| **v).count(),
    })
}

/// How `a^i_μ` responds to `U → U exp(i Σ_j χ_j H_j)`.
#[derive(Debug, Clone, Serialize)]
pub struct TorusRephasing {
    /// Max `|a'^i_μ - a^i_μ|`.
    pub max_change: f64,
    /// Max `|a'^i_μ - a^i_μ - ∂_μχ_i / g|`.
    pub max_change_minus_gradient: f64,
}

/// Measures the response of the Wu-Yang potentials to a local Cartan
/// rephasing given by one scalar map `χ_i` per Cartan generator.
pub fn measure_torus_rephasing(
    basis: &LieBasis,
    u: &UnitaryField,
    chi: &[ScalarMap],
    params: &GaugeParams,
) -> Result<TorusRephasing> {
    check_shape(basis, u)?;
    if chi.len() != basis.cartan().len() || chi.iter().any(|c| c.spec() != u.spec()) {
        return Err(Error::Shape("one phase map per Cartan generator is required".into()));
    }
    let rotated = u.field().map_indexed(|s, m| {
        let mut x = CMatrix::zeros(u.n_level(), u.n_level());
        for (h, c) in basis.cartan().iter().zip(chi) {
            x += h * Complex64::new(*c.get(s), 0.0);
        }
        m * crate::random::expi_hermitian(&x)
    });
    let rotated = UnitaryField::new(u.n_level(), rotated)?;
    let before = wu_yang_potentials(basis, u, params)?;
    let after = wu_yang_potentials(basis, &rotated, params)?;
    let (mut change, mut rest) = (0.0f64, 0.0f64);
    for (i, c) in chi.iter().enumerate() {
        for mu in 0..u.spec().ndim() {
            let dchi = partial(c, mu)?;
            for s in 0..u.spec().len() {
                let d = after.get(i, mu).get(s) - before.get(i, mu).get(s);
                change = change.max(d.abs());
                rest = rest.max((d - dchi.get(s) / params.g).abs());
            }
        }
    }
    Ok(TorusRephasing {
        max_change: change,
        max_change_minus_gradient: rest,
    })
}

/// `log2(coarse / fine)`: the observed order of a quantity that should
/// vanish as `h^p` when the grid is halved.
pub fn convergence_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Max-norm of a set of maps, ignoring NaN (excluded) sites.
pub fn max_abs(maps: &[ScalarMap]) -> f64 {
    maps.iter()
        .flat_map(|m| m.data().iter())
        .filter(|v| !v.is_nan())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Max-norm of the site-wise difference of two map sets.
pub fn max_abs_difference(a: &[ScalarMap], b: &[ScalarMap]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.data().iter().zip(y.data()))
        .map(|(x, y)| (x - y).abs())
        .filter(|v| !v.is_nan())
        .fold(0.0f64, f64::max)
}
