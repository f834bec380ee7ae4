//! Berry connections of adiabatically transported eigenstates.
//!
//! With `U(x)` diagonalizing the instantaneous density matrix, level `n`
//! carries `𝒜_{μn} = -i(U†∂_μU)_nn`. Writing `∂_μU = ig K_μ U` this is
//! `g (U†K_μU)_nn`, which is how the connections are evaluated: from the same
//! projected `K_μ` as the Wu-Yang potentials, so the two stay related to
//! rounding error.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{max_of, partial, propagate_mask, Boundary, GridSpec, ScalarMap, SiteField, UnitaryField};
use crate::gauge::{flat_connection_excluding, project_potentials, local_bases, GaugeParams};
use crate::liealg::{CMatrix, LieBasis};
use crate::states::{cartan_coefficients, Spectrum};
use crate::texture::GaugeExtraction;

/// Imaginary parts of connections above this are an error.
pub const IMAG_TOL: f64 = 1e-8;
/// Adjacent-step overlaps below this break adiabatic transport.
pub const ADIABATIC_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinSource {
    /// `½(1 - cosθ) ∂_μφ` with a branch-unwrapped difference of `φ`.
    Analytic,
    /// `Im log⟨ψ(x)|ψ(x+h)⟩ / h` over forward links.
    Overlap,
    /// `g (U†K_μU)_nn` from the projected flat connection.
    Gauge,
}

impl std::str::FromStr for SpinSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "overlap" => Ok(Self::Overlap),
            "gauge" => Ok(Self::Gauge),
            other => Err(Error::Config(format!("unknown Berry source '{other}'"))),
        }
    }
}

/// Spin-up and spin-down connections per axis; NaN at excluded sites.
#[derive(Debug, Clone)]
pub struct SpinBerry {
    pub up: Vec<ScalarMap>,
    pub down: Vec<ScalarMap>,
    pub valid: Vec<bool>,
}

fn wrap(d: f64) -> f64 {
    let r = d.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Derivative of an angle with every stencil difference taken on the
/// nearest branch.
pub fn phase_partial(phi: &ScalarMap, axis: usize) -> Result<ScalarMap> {
    let spec = phi.spec();
    if axis >= spec.ndim() {
        return partial(phi, axis);
    }
    let c = 0.5 / spec.spacing()[axis];
    let f = |j: usize, i: usize| wrap(phi.get(j) - phi.get(i));
    Ok(phi.map_indexed(|i, _| match (spec.neighbor(i, axis, -1), spec.neighbor(i, axis, 1)) {
        (Some(m), Some(p)) => c * (f(p, i) + f(i, m)),
        (None, Some(p)) => {
            let p2 = spec.neighbor(i, axis, 2).expect("extent >= 3");
            c * (4.0 * f(p, i) - (f(p2, p) + f(p, i)))
        }
        (Some(m), None) => {
            let m2 = spec.neighbor(i, axis, -2).expect("extent >= 3");
            c * (4.0 * f(i, m) - (f(i, m) + f(m, m2)))
        }
        (None, None) => unreachable!("extent >= 3"),
    }))
}

fn spinor_overlap(a: &CMatrix, b: &CMatrix, col: usize) -> Complex64 {
    (0..a.nrows()).map(|r| a[(r, col)].conj() * b[(r, col)]).sum()
}

/// SU(2) texture connections `𝒜_{μ↑}`, `𝒜_{μ↓} = -𝒜_{μ↑}`.
pub fn spin_berry(gauge: &GaugeExtraction, source: SpinSource, params: &GaugeParams) -> Result<SpinBerry> {
    let u = &gauge.unitary;
    if u.n_level() != 2 {
        return Err(Error::Shape(format!("spin connections need N = 2, got {}", u.n_level())));
    }
    let spec = u.spec();
    let nan_outside = |map: ScalarMap, valid: &[bool]| map.map_indexed(|i, v| if valid[i] { *v } else { f64::NAN });
    let (up, valid): (Vec<ScalarMap>, Vec<bool>) = match source {
        SpinSource::Gauge => {
            let conn = berry_connections_excluding(u, params, &gauge.singular)?;
            let up = conn.maps[0].clone();
            (up, conn.valid)
        }
        SpinSource::Analytic => {
            let mut ok = vec![true; spec.len()];
            for &i in &gauge.singular {
                ok[i] = false;
            }
            let valid = propagate_mask(spec, &ok);
            let up = (0..spec.ndim())
                .map(|mu| {
                    let dphi = phase_partial(&gauge.phi, mu)?;
                    let a = gauge.theta.map_indexed(|i, t| 0.5 * (1.0 - t.cos()) * dphi.get(i));
                    Ok(nan_outside(a, &valid))
                })
                .collect::<Result<_>>()?;
            (up, valid)
        }
        SpinSource::Overlap => {
            let mut valid = vec![true; spec.len()];
            for &i in &gauge.singular {
                valid[i] = false;
            }
            let up = (0..spec.ndim())
                .map(|mu| {
                    let h = spec.spacing()[mu];
                    let a = u.field().map_indexed(|i, _| {
                        let (from, to) = match spec.neighbor(i, mu, 1) {
                            Some(j) => (i, j),
                            None => (spec.neighbor(i, mu, -1).expect("extent >= 3"), i),
                        };
                        spinor_overlap(u.get(from), u.get(to), 0).arg() / h
                    });
                    a
                })
                .collect::<Vec<_>>();
            // a link touching a singular site is as undefined as the site
            for mu in 0..spec.ndim() {
                for i in 0..spec.len() {
                    if gauge.singular.contains(&i) {
                        continue;
                    }
                    let other = spec.neighbor(i, mu, 1).or_else(|| spec.neighbor(i, mu, -1));
                    if other.is_some_and(|j| gauge.singular.contains(&j)) {
                        valid[i] = false;
                    }
                }
            }
            (up.into_iter().map(|a| nan_outside(a, &valid)).collect(), valid)
        }
    };
    let down = up.iter().map(|a| a.map(|v| -v)).collect();
    Ok(SpinBerry { up, down, valid })
}

/// Per-level connections `𝒜_{μn}` indexed `[n][μ]`, NaN at excluded sites.
#[derive(Debug, Clone)]
pub struct BerryConnections {
    pub maps: Vec<Vec<ScalarMap>>,
    pub valid: Vec<bool>,
    /// Max `|Im (U†K_μU)_nn|` before it is discarded.
    pub max_imag: f64,
    /// Max `|Σ_n 𝒜_{μn}|`.
    pub sum_residual: f64,
    /// Max imaginary part of the unprojected `-i(U†∂_μU)_nn`.
    pub raw_imag: f64,
    /// Max `|Σ_n -i(U†∂_μU)_nn|` without projection; vanishes as `h²`.
    pub raw_sum_residual: f64,
}

pub fn berry_connections(u: &UnitaryField, params: &GaugeParams) -> Result<BerryConnections> {
    berry_connections_excluding(u, params, &[])
}

pub fn berry_connections_excluding(
    u: &UnitaryField,
    params: &GaugeParams,
    excluded: &[usize],
) -> Result<BerryConnections> {
    let k = flat_connection_excluding(u, params, excluded)?;
    let spec = u.spec();
    let n = u.n_level();
    let mut maps = vec![Vec::with_capacity(spec.ndim()); n];
    let (mut max_imag, mut sum_residual, mut raw_imag, mut raw_sum) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let minus_i = Complex64::new(0.0, -1.0);
    for (mu, k_mu) in k.field.axes().iter().enumerate() {
        let du = partial(u.field(), mu)?;
        let diag: SiteField<(Vec<f64>, f64, f64, f64)> = k_mu.map_indexed(|s, km| {
            if !k.valid[s] {
                return (vec![f64::NAN; n], 0.0, 0.0, 0.0);
            }
            let us = u.get(s);
            let rot = us.adjoint() * km * us;
            let raw = us.adjoint() * du.get(s) * minus_i;
            let vals: Vec<Complex64> = (0..n).map(|j| rot[(j, j)] * params.g).collect();
            let imag = vals.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
            let raw_im = (0..n).map(|j| raw[(j, j)].im.abs()).fold(0.0, f64::max);
            let raw_tr = raw.trace().re.abs();
            (vals.iter().map(|v| v.re).collect(), imag, raw_im, raw_tr)
        });
        for (s, d) in diag.data().iter().enumerate() {
            if d.1 > IMAG_TOL {
                return Err(Error::NonRealConnection {
                    site: spec.site(s),
                    imag: d.1,
                });
            }
        }
        max_imag = max_imag.max(max_of(diag.data().iter().map(|d| d.1)));
        raw_imag = raw_imag.max(max_of(diag.data().iter().map(|d| d.2)));
        raw_sum = raw_sum.max(max_of(diag.data().iter().map(|d| d.3)));
        sum_residual = sum_residual.max(max_of(
            diag.data().iter().filter(|d| !d.0[0].is_nan()).map(|d| d.0.iter().sum::<f64>().abs()),
        ));
        for (level, out) in maps.iter_mut().enumerate() {
            out.push(diag.map(|d| d.0[level]));
        }
    }
    Ok(BerryConnections {
        maps,
        valid: k.valid,
        max_imag,
        sum_residual,
        raw_imag,
        raw_sum_residual: raw_sum,
    })
}

/// Both sides of `Σ_n a^n 𝒜_{μn} = (g/2) sqrt(2(N-1)/N) Σ_i u^i a^i_μ`.
#[derive(Debug, Clone)]
pub struct WeightedAverage {
    pub lhs: Vec<ScalarMap>,
    pub rhs: Vec<ScalarMap>,
    pub max_residual: f64,
    pub valid: Vec<bool>,
}

impl WeightedAverage {
    pub fn residual_maps(&self) -> Vec<ScalarMap> {
        self.lhs
            .iter()
            .zip(&self.rhs)
            .map(|(l, r)| l.map_indexed(|i, v| v - r.get(i)))
            .collect()
    }
}

/// The spectrum is taken in its stored order: entry `n` weights level `n`.
pub fn weighted_average(
    basis: &LieBasis,
    u: &UnitaryField,
    spectrum: &Spectrum,
    params: &GaugeParams,
) -> Result<WeightedAverage> {
    weighted_average_excluding(basis, u, spectrum, params, &[])
}

pub fn weighted_average_excluding(
    basis: &LieBasis,
    u: &UnitaryField,
    spectrum: &Spectrum,
    params: &GaugeParams,
    excluded: &[usize],
) -> Result<WeightedAverage> {
    let n = u.n_level();
    if spectrum.n_level() != n || basis.n_level() != n {
        return Err(Error::Shape(format!(
            "field N = {n}, spectrum N = {}, basis N = {}",
            spectrum.n_level(),
            basis.n_level()
        )));
    }
    let conn = berry_connections_excluding(u, params, excluded)?;
    let k = flat_connection_excluding(u, params, excluded)?;
    let pots = project_potentials(&k, &local_bases(basis, u)?);
    let a = spectrum.values();
    let cu = cartan_coefficients(spectrum);
    let nf = n as f64;
    let pre = 0.5 * params.g * (2.0 * (nf - 1.0) / nf).sqrt();
    let ndim = u.spec().ndim();
    let mut lhs = Vec::with_capacity(ndim);
    let mut rhs = Vec::with_capacity(ndim);
    let mut worst = 0.0f64;
    for mu in 0..ndim {
        let l = conn.maps[0][mu].map_indexed(|s, _| (0..n).map(|j| a[j] * conn.maps[j][mu].get(s)).sum::<f64>());
        let r = l.map_indexed(|s, _| pre * (0..n - 1).map(|i| cu[i] * pots.get(i, mu).get(s)).sum::<f64>());
        worst = worst.max(
            l.data()
                .iter()
                .zip(r.data())
                .map(|(x, y)| (x - y).abs())
                .filter(|d| !d.is_nan())
                .fold(0.0, f64::max),
        );
        lhs.push(l);
        rhs.push(r);
    }
    Ok(WeightedAverage {
        lhs,
        rhs,
        max_residual: worst,
        valid: conn.valid,
    })
}

/// `arg Π_k ⟨ψ_k|ψ_{k+1}⟩` around a closed path of normalized states, in
/// `[0, 2π)`.
pub fn loop_phase_states(states: &[Vec<Complex64>]) -> Result<f64> {
    let len = states.len();
    if len < 2 {
        return Err(Error::Config("a loop needs at least two states".into()));
    }
    let mut total = 0.0;
    for k in 0..len {
        let next = (k + 1) % len;
        let ov: Complex64 = states[k].iter().zip(&states[next]).map(|(a, b)| a.conj() * b).sum();
        if ov.norm() < ADIABATIC_OVERLAP {
            return Err(Error::Adiabaticity {
                step: k,
                next,
                overlap: ov.norm(),
            });
        }
        total += ov.arg();
    }
    Ok(total.rem_euclid(2.0 * PI))
}

/// Loop phase of eigenvector `level` (a column of `U`) around a 1D periodic
/// path.
pub fn loop_phase(u: &UnitaryField, level: usize) -> Result<f64> {
    let spec = u.spec();
    if spec.ndim() != 1 || spec.boundary() != Boundary::Periodic {
        return Err(Error::Config("loop phases need a 1D periodic path".into()));
    }
    if level >= u.n_level() {
        return Err(Error::Config(format!("level {level} out of range for N = {}", u.n_level())));
    }
    let states: Vec<Vec<Complex64>> = u
        .field()
        .data()
        .iter()
        .map(|m| (0..m.nrows()).map(|r| m[(r, level)]).collect())
        .collect();
    loop_phase_states(&states)
}

/// Closed path on the Bloch sphere at polar angle `theta`, traversed once in
/// `steps` steps, as a periodic 1D field of rotations.
pub fn latitude_loop(theta: f64, steps: usize) -> Result<UnitaryField> {
    let h = 2.0 * PI / steps as f64;
    let spec = GridSpec::line(steps, h, Boundary::Periodic)?;
    let field = SiteField::from_fn(spec, |i, _| crate::texture::rotation(theta, i as f64 * h));
    UnitaryField::new(2, field)
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopPhase {
    pub level: usize,
    pub phase: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedSummary {
    pub spectrum: Vec<f64>,
    pub max_residual: f64,
}

/// Summary of a Berry analysis, serialized into reports.
#[derive(Debug, Clone, Serialize)]
pub struct BerryReport {
    pub n_level: usize,
    pub g: f64,
    pub max_imag: f64,
    pub sum_residual: f64,
    pub raw_imag: f64,
    pub raw_sum_residual: f64,
    pub excluded_sites: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted: Option<WeightedSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub loop_phases: Vec<LoopPhase>,
}

impl BerryReport {
    pub fn new(u: &UnitaryField, params: &GaugeParams, conn: &BerryConnections) -> Self {
        Self {
            n_level: u.n_level(),
            g: params.g,
            max_imag: conn.max_imag,
            sum_residual: conn.sum_residual,
            raw_imag: conn.raw_imag,
            raw_sum_residual: conn.raw_sum_residual,
            excluded_sites: conn.valid.iter().filter(|v| !**v).count(),
            weighted: None,
            loop_phases: Vec::new(),
        }
    }
}
