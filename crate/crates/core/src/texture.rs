//! SU(2) magnetization textures: skyrmion ansätze, the local gauge
//! transformation rotating `ẑ` into `m`, spin coherent states and the
//! topological/monopole charges.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{
    compensated_sum, partial, validate_unit_field, Boundary, GridSpec, ScalarMap, SiteField, UnitaryField, VectorField3,
};
use crate::gauge::{wu_yang_curvature_excluding, wu_yang_potentials_excluding, CurvatureMethod, GaugeParams, SmoothnessPolicy};
use crate::liealg::{build_basis, CMatrix};

/// `1 + m_z` at or below this marks a south-pole (`θ = π`) site.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Boundary ring uniformity required for quantized charges.
pub const COMPACTIFICATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// `m = +ẑ` at the core, `-ẑ` outside.
    CoreUp,
    /// `m = -ẑ` at the core, `+ẑ` outside.
    CoreDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `θ = π max(0, 1 - r/R)`.
    Linear,
    /// Domain-wall profile `2 atan(exp((R/2 - r)/(R/4)))`, rescaled to run
    /// from `π` at the core to `0` at `r = R`.
    Arctan,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "arctan" => Ok(Self::Arctan),
            other => Err(Error::Config(format!("unknown profile '{other}'"))),
        }
    }
}

impl std::str::FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "core_up" => Ok(Self::CoreUp),
            "core_down" => Ok(Self::CoreDown),
            other => Err(Error::Config(format!("unknown polarity '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextureParams {
    pub winding: i32,
    pub helicity: f64,
    pub polarity: Polarity,
    pub radius: f64,
    pub profile: Profile,
    pub q_e: f64,
    pub grid: GridSpec,
}

impl TextureParams {
    /// Core-down skyrmion of the given winding on an `n × n` clamped grid of
    /// side `extent`, with radius `0.45 · extent`.
    pub fn skyrmion(winding: i32, n: usize, extent: f64, profile: Profile) -> Result<Self> {
        Ok(Self {
            winding,
            helicity: 0.0,
            polarity: Polarity::CoreDown,
            radius: 0.45 * extent,
            profile,
            q_e: 1.0,
            grid: GridSpec::square(n, extent, Boundary::Clamped)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.require_2d()?;
        if self.winding == 0 {
            return Err(Error::Config("winding must be nonzero".into()));
        }
        if !(self.q_e.is_finite() && self.q_e > 0.0) {
            return Err(Error::Config(format!("q_e must be positive, got {}", self.q_e)));
        }
        let half = self
            .grid
            .extents()
            .iter()
            .zip(self.grid.spacing())
            .map(|(&n, &h)| 0.5 * n as f64 * h)
            .fold(f64::INFINITY, f64::min);
        if !(self.radius > 0.0 && self.radius < half) {
            return Err(Error::Config(format!(
                "radius {} must lie in (0, {half}) for this grid",
                self.radius
            )));
        }
        if !self.helicity.is_finite() {
            return Err(Error::Config("helicity must be finite".into()));
        }
        Ok(())
    }

    /// Polar angle of `m` at distance `r` from the core.
    pub fn theta(&self, r: f64) -> f64 {
        let rr = self.radius;
        let down = match self.profile {
            Profile::Linear => PI * (1.0 - r / rr).max(0.0),
            Profile::Arctan => {
                if r >= rr {
                    0.0
                } else {
                    let wall = |x: f64| 2.0 * ((rr / 2.0 - x) / (rr / 4.0)).exp().atan();
                    PI * (wall(r) - wall(rr)) / (wall(0.0) - wall(rr))
                }
            }
        };
        match self.polarity {
            Polarity::CoreDown => down,
            Polarity::CoreUp => PI - down,
        }
    }
}

/// `m = (sinθ cosΦ, sinθ sinΦ, cosθ)` with `Φ = w atan2(y, x) + γ`.
pub fn generate_texture(params: &TextureParams) -> Result<VectorField3> {
    params.validate()?;
    Ok(SiteField::from_fn(params.grid.clone(), |_, x| {
        let theta = params.theta(x[0].hypot(x[1]));
        let phi = params.winding as f64 * x[1].atan2(x[0]) + params.helicity;
        Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
    }))
}

/// Spherical angles of a unit field, `θ = acos m_z` and `φ = atan2(m_y, m_x)`.
pub fn angles(m: &VectorField3) -> (ScalarMap, ScalarMap) {
    (
        m.map(|v| v.z.clamp(-1.0, 1.0).acos()),
        m.map(|v| v.y.atan2(v.x)),
    )
}

pub fn singular_sites(m: &VectorField3) -> Vec<usize> {
    m.data()
        .iter()
        .enumerate()
        .filter(|(_, v)| 1.0 + v.z <= SINGULAR_TOL)
        .map(|(i, _)| i)
        .collect()
}

/// `U = [[c, -e^{-iφ}s], [e^{iφ}s, c]]` with `c = cos(θ/2)`, `s = sin(θ/2)`.
pub fn rotation(theta: f64, phi: f64) -> CMatrix {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, 0.0),
            -Complex64::from_polar(s, -phi),
            Complex64::from_polar(s, phi),
            Complex64::new(c, 0.0),
        ],
    )
}

#[derive(Debug, Clone)]
pub struct GaugeExtraction {
    pub unitary: UnitaryField,
    pub theta: ScalarMap,
    pub phi: ScalarMap,
    /// `θ = π` sites where `φ` (and hence `U`) is not determined by `m`.
    pub singular: Vec<usize>,
}

/// The SU(2) field rotating `ẑ` into `m` at every site.
pub fn extract_gauge(m: &VectorField3) -> Result<GaugeExtraction> {
    validate_unit_field(m)?;
    let (theta, phi) = angles(m);
    let field = theta.map_indexed(|i, &t| {
        let v = m.get(i);
        // at the north pole U is exactly the identity
        if v.z >= 1.0 {
            CMatrix::identity(2, 2)
        } else {
            rotation(t, *phi.get(i))
        }
    });
    Ok(GaugeExtraction {
        unitary: UnitaryField::new(2, field)?,
        theta,
        phi,
        singular: singular_sites(m),
    })
}

/// Spin coherent states `|↑⟩ = (c, e^{iφ}s)`, `|↓⟩ = (-e^{-iφ}s, c)`: the
/// columns of [`rotation`].
#[derive(Debug, Clone)]
pub struct EigenFrame {
    pub up: Vec<[Complex64; 2]>,
    pub down: Vec<[Complex64; 2]>,
    pub singular: Vec<usize>,
}

pub fn eigen_frame(m: &VectorField3) -> Result<EigenFrame> {
    let g = extract_gauge(m)?;
    let cols = |k: usize| -> Vec<[Complex64; 2]> {
        g.unitary.field().data().iter().map(|u| [u[(0, k)], u[(1, k)]]).collect()
    };
    Ok(EigenFrame {
        up: cols(0),
        down: cols(1),
        singular: g.singular,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeMethod {
    /// Central-difference triple product `m · (∂_1 m × ∂_2 m)`.
    FiniteDifference,
    /// Signed spherical areas of two triangles per plaquette.
    SolidAngle,
}

impl ChargeMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FiniteDifference => "finite_difference",
            Self::SolidAngle => "solid_angle",
        }
    }
}

impl std::str::FromStr for ChargeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finite_difference" => Ok(Self::FiniteDifference),
            "solid_angle" => Ok(Self::SolidAngle),
            other => Err(Error::Config(format!("unknown charge method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Charges {
    pub method: ChargeMethod,
    pub q_e: f64,
    /// Skyrmion number `S`.
    pub s: f64,
    /// Monopole charge `G = 4πS / q_e`.
    pub g: f64,
    /// `∫ m · (∂_1 m × ∂_2 m)`, the common integrand of `S` and `G`.
    pub total: f64,
    /// Emergent field density `K³_12`; integrates (times `q_e`) to `total`.
    pub density: ScalarMap,
    pub warnings: Vec<String>,
}

/// Signed solid angle of the spherical triangle `(a, b, c)`.
pub fn solid_angle(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let num = a.dot(&b.cross(c));
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

/// Largest deviation of the boundary ring from its first site, or `None` on
/// fully periodic grids, which are closed surfaces already.
pub fn boundary_deviation(m: &VectorField3) -> Option<f64> {
    let spec = m.spec();
    if spec.boundary() == Boundary::Periodic {
        return None;
    }
    let ring = spec.boundary_ring();
    let first = m.get(ring[0]);
    Some(ring.iter().map(|&i| (m.get(i) - first).norm()).fold(0.0, f64::max))
}

pub fn topological_charges(m: &VectorField3, q_e: f64, method: ChargeMethod) -> Result<Charges> {
    let spec = m.spec().clone();
    spec.require_2d()?;
    validate_unit_field(m)?;
    if !(q_e.is_finite() && q_e > 0.0) {
        return Err(Error::Config(format!("q_e must be positive, got {q_e}")));
    }
    let area = spec.cell_measure();
    let mut warnings = Vec::new();
    if let Some(dev) = boundary_deviation(m) {
        if dev > COMPACTIFICATION_TOL {
            warnings.push(format!(
                "boundary ring is not uniform (deviation {dev:.3e}); the charge need not be an integer"
            ));
        }
    }

    let (density, total) = match method {
        ChargeMethod::FiniteDifference => {
            let d1 = partial(m, 0)?;
            let d2 = partial(m, 1)?;
            let triple = m.map_indexed(|i, v| v.dot(&d1.get(i).cross(d2.get(i))));
            let total = compensated_sum(triple.data().iter().map(|t| t * area));
            (triple.map(|t| t / q_e), total)
        }
        ChargeMethod::SolidAngle => {
            let (nx, ny) = (spec.extents()[0], spec.extents()[1]);
            let omega = SiteField::from_fn(spec.clone(), |i, _| {
                let s = spec.site(i).coords;
                let corner = |dx: isize, dy: isize| {
                    let j = if dx == 0 { Some(i) } else { spec.neighbor(i, 0, dx) };
                    j.and_then(|j| if dy == 0 { Some(j) } else { spec.neighbor(j, 1, dy) })
                };
                // clamped grids have no plaquette to the right of / above the last row
                if spec.boundary() == Boundary::Clamped && (s[0] + 1 == nx || s[1] + 1 == ny) {
                    return 0.0;
                }
                match (corner(1, 0), corner(1, 1), corner(0, 1)) {
                    (Some(b), Some(c), Some(d)) => {
                        let (a, b, c, d) = (m.get(i), m.get(b), m.get(c), m.get(d));
                        solid_angle(a, b, c) + solid_angle(a, c, d)
                    }
                    _ => 0.0,
                }
            });
            let total = compensated_sum(omega.data().iter().copied());
            (omega.map(|o| o / (area * q_e)), total)
        }
    };
    let s = total / (4.0 * PI);
    Ok(Charges {
        method,
        q_e,
        s,
        g: total / q_e,
        total,
        density,
        warnings,
    })
}

/// Wu-Yang potential `a³_μ`, curvature `K³_12` and charges of a texture.
#[derive(Debug, Clone)]
pub struct EmergentFieldMap {
    pub potentials: Vec<ScalarMap>,
    pub curvature: ScalarMap,
    pub s: f64,
    pub g_charge: f64,
    pub q_e: f64,
    pub g: f64,
    /// Sites left out of the potential maps (Dirac string and its stencil).
    pub excluded: Vec<usize>,
}

/// Builds the emergent field of a texture with coupling `g = q_e`, masking
/// the Dirac string instead of differentiating across it.
pub fn emergent_field_map(m: &VectorField3, q_e: f64, method: ChargeMethod) -> Result<EmergentFieldMap> {
    let gauge = extract_gauge(m)?;
    let basis = build_basis(2)?;
    let params = GaugeParams::new(q_e)?.with_policy(SmoothnessPolicy::Exclude);
    let pots = wu_yang_potentials_excluding(&basis, &gauge.unitary, &params, &gauge.singular)?;
    let curv = wu_yang_curvature_excluding(&basis, &gauge.unitary, &params, CurvatureMethod::Curl, &gauge.singular)?;
    let charges = topological_charges(m, q_e, method)?;
    let excluded = pots.valid.iter().enumerate().filter(|(_, v)| !**v).map(|(i, _)| i).collect();
    Ok(EmergentFieldMap {
        potentials: pots.maps.into_iter().next().expect("one Cartan index for N = 2"),
        curvature: curv.maps.into_iter().next().expect("one Cartan index for N = 2"),
        s: charges.s,
        g_charge: charges.g,
        q_e,
        g: params.g,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::local_bases;

    fn uniform(n: usize, v: Vector3<f64>) -> VectorField3 {
        SiteField::from_fn(GridSpec::square(n, 2.0, Boundary::Clamped).unwrap(), move |_, _| v)
    }

    #[test]
    fn profile_endpoints() {
        let p = TextureParams::skyrmion(1, 33, 2.0, Profile::Linear).unwrap();
        let m = generate_texture(&p).unwrap();
        let center = m.get(p.grid.index([16, 16]));
        assert!((center - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
        for &i in &p.grid.boundary_ring() {
            assert!((m.get(i) - Vector3::z()).norm() < 1e-9);
        }
        for profile in [Profile::Linear, Profile::Arctan] {
            let p = TextureParams { profile, ..p.clone() };
            assert!((p.theta(0.0) - PI).abs() < 1e-15);
            assert_eq!(p.theta(p.radius), 0.0);
            assert_eq!(p.theta(1.5 * p.radius), 0.0);
        }
    }

    #[test]
    fn invalid_params() {
        let mut p = TextureParams::skyrmion(1, 16, 2.0, Profile::Linear).unwrap();
        p.radius = 1.0;
        assert!(generate_texture(&p).is_err());
        p.radius = 0.5;
        p.winding = 0;
        assert!(generate_texture(&p).is_err());
    }

    #[test]
    fn uniform_field_has_zero_charge() {
        let m = uniform(16, Vector3::z());
        for method in [ChargeMethod::FiniteDifference, ChargeMethod::SolidAngle] {
            let c = topological_charges(&m, 1.0, method).unwrap();
            assert_eq!((c.s, c.g), (0.0, 0.0));
            assert!(c.warnings.is_empty());
        }
        assert!(extract_gauge(&m).unwrap().singular.is_empty());
    }

    #[test]
    fn skyrmion_sign_convention() {
        for profile in [Profile::Linear, Profile::Arctan] {
            for w in [-2, -1, 1, 2] {
                let p = TextureParams::skyrmion(w, 64, 2.0, profile).unwrap();
                let m = generate_texture(&p).unwrap();
                let c = topological_charges(&m, 1.0, ChargeMethod::SolidAngle).unwrap();
                assert!((c.s + w as f64).abs() < 1e-9, "{profile:?} w={w}: {}", c.s);
                let up = TextureParams {
                    polarity: Polarity::CoreUp,
                    ..p
                };
                let c = topological_charges(&generate_texture(&up).unwrap(), 1.0, ChargeMethod::SolidAngle).unwrap();
                assert!((c.s - w as f64).abs() < 1e-9, "core up {profile:?} w={w}: {}", c.s);
            }
        }
    }

    #[test]
    fn reflection_negates_charge() {
        let p = TextureParams::skyrmion(1, 48, 2.0, Profile::Arctan).unwrap();
        let m = generate_texture(&p).unwrap();
        let r = m.map(|v| Vector3::new(v.x, -v.y, v.z));
        for method in [ChargeMethod::FiniteDifference, ChargeMethod::SolidAngle] {
            let a = topological_charges(&m, 1.0, method).unwrap().s;
            let b = topological_charges(&r, 1.0, method).unwrap().s;
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn charge_outputs_are_consistent() {
        let p = TextureParams::skyrmion(1, 48, 2.0, Profile::Linear).unwrap();
        let m = generate_texture(&p).unwrap();
        for q_e in [0.5, 1.0, 2.0] {
            let c = topological_charges(&m, q_e, ChargeMethod::SolidAngle).unwrap();
            assert!((c.s - q_e * c.g / (4.0 * PI)).abs() < 1e-14);
            let integrated = compensated_sum(c.density.data().iter().map(|d| d * p.grid.cell_measure()));
            assert!((integrated * q_e - c.total).abs() < 1e-12);
        }
    }

    #[test]
    fn non_compact_boundary_warns() {
        let spec = GridSpec::square(16, 2.0, Boundary::Clamped).unwrap();
        let m = SiteField::from_fn(spec, |_, x| {
            let t = 0.3 * x[0];
            Vector3::new(t.sin(), 0.0, t.cos())
        });
        let c = topological_charges(&m, 1.0, ChargeMethod::SolidAngle).unwrap();
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn gauge_of_x_direction() {
        let m = uniform(4, Vector3::x());
        let g = extract_gauge(&m).unwrap();
        let basis = build_basis(2).unwrap();
        let u = g.unitary.get(0);
        let rotated = u * basis.generator(2) * u.adjoint();
        assert!((rotated - basis.generator(0)).norm() < 1e-15);
    }

    #[test]
    fn bases_reproduce_magnetization() {
        let p = TextureParams::skyrmion(2, 40, 2.0, Profile::Arctan).unwrap();
        let m = generate_texture(&p).unwrap();
        let g = extract_gauge(&m).unwrap();
        let basis = build_basis(2).unwrap();
        let n3 = &local_bases(&basis, &g.unitary).unwrap()[0];
        for i in 0..m.len() {
            if g.singular.contains(&i) {
                continue;
            }
            let c = basis.components(n3.get(i));
            assert!((Vector3::new(c[0], c[1], c[2]) - m.get(i)).norm() < 1e-10);
        }
    }

    #[test]
    fn south_pole_sites_are_flagged() {
        let m = uniform(4, -Vector3::z());
        assert_eq!(extract_gauge(&m).unwrap().singular.len(), 16);
    }

    #[test]
    fn eigen_frame_examples() {
        let f = eigen_frame(&uniform(4, Vector3::z())).unwrap();
        assert_eq!(f.up[0], [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert_eq!(f.down[0], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        let f = eigen_frame(&uniform(4, Vector3::x())).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((f.up[0][0] - r).norm() < 1e-15 && (f.up[0][1] - r).norm() < 1e-15);

        let p = TextureParams::skyrmion(1, 24, 2.0, Profile::Linear).unwrap();
        let m = generate_texture(&p).unwrap();
        let f = eigen_frame(&m).unwrap();
        for i in 0..m.len() {
            let (u, d, v) = (f.up[i], f.down[i], m.get(i));
            let overlap = u[0].conj() * d[0] + u[1].conj() * d[1];
            assert!(overlap.norm() < 1e-12);
            // (m·σ)|↑⟩ = |↑⟩
            let msig = [
                [Complex64::new(v.z, 0.0), Complex64::new(v.x, -v.y)],
                [Complex64::new(v.x, v.y), Complex64::new(-v.z, 0.0)],
            ];
            for r in 0..2 {
                let got = msig[r][0] * u[0] + msig[r][1] * u[1];
                if !f.singular.contains(&i) {
                    assert!((got - u[r]).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn emergent_map_matches_closed_form() {
        // a³_μ = (1/q_e)(1 - cosθ)∂_μφ; the error is O((h/r)²) so sites near the core are skipped
        let q_e = 2.0;
        let errs: Vec<f64> = [64, 128]
            .iter()
            .map(|&n| {
                let p = TextureParams::skyrmion(1, n, 2.0, Profile::Arctan).unwrap();
                let m = generate_texture(&p).unwrap();
                let e = emergent_field_map(&m, q_e, ChargeMethod::SolidAngle).unwrap();
                assert!(!e.excluded.is_empty());
                let mut worst = 0.0f64;
                for i in 0..m.len() {
                    if e.excluded.contains(&i) {
                        assert!(e.potentials[0].get(i).is_nan());
                        continue;
                    }
                    let x = p.grid.coordinates(i);
                    let r2 = x[0] * x[0] + x[1] * x[1];
                    if r2 < 0.25 * 0.25 {
                        continue;
                    }
                    let theta = p.theta(r2.sqrt());
                    let dphi = [-x[1] / r2, x[0] / r2];
                    for mu in 0..2 {
                        let want = (1.0 - theta.cos()) * dphi[mu] / q_e;
                        worst = worst.max((e.potentials[mu].get(i) - want).abs());
                    }
                }
                worst
            })
            .collect();
        assert!(errs[0] < 0.05 && errs[0] / errs[1] > 3.5, "{errs:?}");
    }
}
