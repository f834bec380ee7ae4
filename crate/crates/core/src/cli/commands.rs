use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    emit, read_input, sha256_hex, AnalyzeArgs, BerryArgs, GenerateArgs, GenerateKind, MethodArg, OutputFormat, Report,
    SourceArg, TOOL, VERSION,
};
use crate::berry::{
    berry_connections_excluding, loop_phase, spin_berry, weighted_average_excluding, BerryReport, LoopPhase,
    SpinSource, WeightedSummary,
};
use crate::error::{Error, Result};
use crate::fields::{
    compensated_sum, export_scalar_map, load_field_str, save_field, Boundary, FieldData, GridSpec, ScalarMap,
    UnitaryField, VectorField3,
};
use crate::gauge::{
    check_parallel_transport_excluding, flat_connection_excluding, local_bases, max_abs, project_potentials,
    wu_yang_curvature_excluding, CurvatureMethod, GaugeParams, SmoothnessPolicy,
};
use crate::liealg::build_basis;
use crate::random::{band_limited_unitary, BandLimit};
use crate::states::Spectrum;
use crate::texture::{
    extract_gauge, generate_texture, topological_charges, ChargeMethod, Polarity, Profile, TextureParams,
};

#[derive(Serialize)]
struct FieldMeta<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a GenerateArgs,
}

pub(super) fn generate(args: &GenerateArgs) -> Result<()> {
    let field = match args.kind {
        GenerateKind::Skyrmion => {
            let [nx, ny] = args.grid.unwrap_or([128, 128]);
            let extent = args.extent.unwrap_or(2.0);
            let boundary = args.boundary.map(Boundary::from).unwrap_or(Boundary::Clamped);
            let grid = GridSpec::new(&[nx, ny], &[extent / nx as f64, extent / ny as f64], boundary)?;
            let params = TextureParams {
                winding: args.winding,
                helicity: args.helicity,
                polarity: match args.polarity {
                    super::PolarityArg::CoreDown => Polarity::CoreDown,
                    super::PolarityArg::CoreUp => Polarity::CoreUp,
                },
                radius: args.radius.unwrap_or(0.45 * extent),
                profile: match args.profile {
                    super::ProfileArg::Linear => Profile::Linear,
                    super::ProfileArg::Arctan => Profile::Arctan,
                },
                q_e: 1.0,
                grid,
            };
            FieldData::Magnetization(generate_texture(&params)?)
        }
        GenerateKind::Unitary => {
            let [nx, ny] = args.grid.unwrap_or([64, 64]);
            let extent = args.extent.unwrap_or(2.0 * PI);
            let boundary = args.boundary.map(Boundary::from).unwrap_or(Boundary::Periodic);
            let grid = GridSpec::new(&[nx, ny], &[extent / nx as f64, extent / ny as f64], boundary)?;
            let basis = build_basis(args.n)?;
            if !(args.amplitude.is_finite() && args.amplitude >= 0.0) {
                return Err(Error::Config(format!("amplitude must be non-negative, got {}", args.amplitude)));
            }
            let band = BandLimit {
                max_mode: args.max_mode,
                amplitude: args.amplitude,
            };
            FieldData::Unitary(band_limited_unitary(&basis, &grid, band, args.seed))
        }
        GenerateKind::Loop => {
            let steps = args.steps;
            if steps < 3 {
                return Err(Error::Config("a loop needs at least 3 steps".into()));
            }
            FieldData::Unitary(crate::berry::latitude_loop(args.theta, steps)?)
        }
    };
    let meta = serde_json::to_value(FieldMeta {
        tool: TOOL,
        version: VERSION,
        config: args,
    })?;
    save_field(&field, Some(meta), &args.out)?;
    let bytes = std::fs::read(&args.out)?;
    let dims: Vec<String> = field.spec().extents().iter().map(|e| e.to_string()).collect();
    println!(
        "{} {} sha256={} {}",
        field.kind().as_str(),
        dims.join("x"),
        sha256_hex(&bytes),
        args.out.display()
    );
    Ok(())
}

fn gauge_params(g: f64, strict: bool) -> Result<GaugeParams> {
    let policy = if strict {
        SmoothnessPolicy::Reject
    } else {
        SmoothnessPolicy::Exclude
    };
    Ok(GaugeParams::new(g)?.with_policy(policy))
}

fn parse_spectrum(values: &Option<Vec<f64>>) -> Result<Option<Spectrum>> {
    values.as_ref().map(|v| Spectrum::ordered(v)).transpose()
}

fn site_list(spec: &GridSpec, sites: &[usize]) -> Vec<Vec<usize>> {
    sites.iter().map(|&i| spec.site(i).coords[..spec.ndim()].to_vec()).collect()
}

fn nan_max_abs(maps: &[ScalarMap]) -> f64 {
    max_abs(maps)
}

/// Writes CSV (and for `ppm`, pixmap + sidecar) files next to the report.
fn export_maps(format: OutputFormat, out: Option<&Path>, maps: &[(String, ScalarMap)]) -> Result<Vec<PathBuf>> {
    if format == OutputFormat::Json {
        return Ok(Vec::new());
    }
    let out = out.ok_or_else(|| Error::Config("csv/ppm output needs --out to place the map files".into()))?;
    let stem = out.with_extension("");
    let mut written = Vec::new();
    for (name, map) in maps {
        if map.spec().ndim() != 2 {
            continue;
        }
        let csv = PathBuf::from(format!("{}_{name}.csv", stem.display()));
        let img = (format == OutputFormat::Ppm).then(|| PathBuf::from(format!("{}_{name}.ppm", stem.display())));
        let e = export_scalar_map(map, &csv, img.as_deref())?;
        written.push(e.csv);
        written.extend(e.image);
        written.extend(e.sidecar);
    }
    Ok(written)
}

fn paths(p: &[PathBuf]) -> Vec<String> {
    p.iter().map(|x| x.display().to_string()).collect()
}

#[derive(Serialize)]
struct GridRecord {
    dims: Vec<usize>,
    spacing: Vec<f64>,
    boundary: Boundary,
}

impl GridRecord {
    fn of(spec: &GridSpec) -> Self {
        Self {
            dims: spec.extents().to_vec(),
            spacing: spec.spacing().to_vec(),
            boundary: spec.boundary(),
        }
    }
}

#[derive(Serialize)]
struct ChargeRecord {
    method: ChargeMethod,
    q_e: f64,
    s: f64,
    g: f64,
    total: f64,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct PotentialRecord {
    g: f64,
    policy: SmoothnessPolicy,
    excluded_sites: usize,
    antihermitian_residual: f64,
    trace_residual: f64,
    max_abs_potential: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    curvature_method: Option<CurvatureMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curvature_flux: Option<Vec<f64>>,
    parallel_transport_residual: f64,
}

#[derive(Serialize)]
struct SpinRecord {
    source: SpinSource,
    /// Max `|a³_μ - (2/q_e)𝒜_{μ↑}|` over valid sites.
    potential_relation_up: f64,
    /// Max `|a³_μ + (2/q_e)𝒜_{μ↓}|` over valid sites.
    potential_relation_down: f64,
    max_abs_connection: f64,
}

#[derive(Serialize)]
struct BerrySection {
    #[serde(flatten)]
    report: BerryReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    spin: Option<SpinRecord>,
}

#[derive(Serialize)]
struct AnalyzeResult {
    kind: &'static str,
    grid: GridRecord,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    charges: Vec<ChargeRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    singular_sites: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wu_yang: Option<PotentialRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    berry: Option<BerrySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scalar: Option<ScalarSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    maps: Vec<String>,
}

#[derive(Serialize)]
struct ScalarSummary {
    min: f64,
    max: f64,
    integral: f64,
}

/// Requested charge methods in order, without repeats; solid angle by default.
fn charge_methods(methods: &[MethodArg]) -> Vec<ChargeMethod> {
    let mut out = Vec::new();
    for m in methods {
        let c = match m {
            MethodArg::FiniteDifference => ChargeMethod::FiniteDifference,
            MethodArg::SolidAngle => ChargeMethod::SolidAngle,
            _ => continue,
        };
        if !out.contains(&c) {
            out.push(c);
        }
    }
    if out.is_empty() {
        out.push(ChargeMethod::SolidAngle);
    }
    out
}

fn curvature_method(methods: &[MethodArg]) -> CurvatureMethod {
    match methods.iter().rev().find(|m| matches!(m, MethodArg::Curl | MethodArg::Bases)) {
        Some(MethodArg::Bases) => CurvatureMethod::Bases,
        _ => CurvatureMethod::Curl,
    }
}

/// Wu-Yang potentials, curvature and transport residual of a unitary field.
struct GaugeAnalysis {
    record: PotentialRecord,
    maps: Vec<(String, ScalarMap)>,
    potentials: Vec<Vec<ScalarMap>>,
}

fn analyze_gauge(u: &UnitaryField, params: &GaugeParams, method: CurvatureMethod, excluded: &[usize]) -> Result<GaugeAnalysis> {
    let basis = build_basis(u.n_level())?;
    let k = flat_connection_excluding(u, params, excluded)?;
    let pots = project_potentials(&k, &local_bases(&basis, u)?);
    let spec = u.spec();
    let mut maps = Vec::new();
    for (i, per_axis) in pots.maps.iter().enumerate() {
        for (mu, m) in per_axis.iter().enumerate() {
            maps.push((format!("a{}_{}", i + 1, mu + 1), m.clone()));
        }
    }
    let (curvature_method, curvature_flux) = if spec.ndim() == 2 {
        let c = wu_yang_curvature_excluding(&basis, u, params, method, excluded)?;
        let area = spec.cell_measure();
        let flux = c
            .maps
            .iter()
            .map(|m| compensated_sum(m.data().iter().filter(|v| !v.is_nan()).map(|v| v * area)))
            .collect();
        for (i, m) in c.maps.into_iter().enumerate() {
            maps.push((format!("k{}", i + 1), m));
        }
        (Some(method), Some(flux))
    } else {
        (None, None)
    };
    let pt = check_parallel_transport_excluding(&basis, u, params, excluded)?;
    Ok(GaugeAnalysis {
        record: PotentialRecord {
            g: params.g,
            policy: params.policy,
            excluded_sites: k.excluded_sites().len(),
            antihermitian_residual: k.antihermitian_residual,
            trace_residual: k.trace_residual,
            max_abs_potential: nan_max_abs(&pots.maps.concat()),
            curvature_method,
            curvature_flux,
            parallel_transport_residual: pt.max_residual,
        },
        maps,
        potentials: pots.maps,
    })
}

/// Berry section of a report; shared by `analyze --berry` and `berry`.
fn berry_section(
    u: &UnitaryField,
    params: &GaugeParams,
    excluded: &[usize],
    spectrum: Option<&Spectrum>,
    maps: &mut Vec<(String, ScalarMap)>,
) -> Result<BerryReport> {
    let conn = berry_connections_excluding(u, params, excluded)?;
    let mut report = BerryReport::new(u, params, &conn);
    for (n, per_axis) in conn.maps.iter().enumerate() {
        for (mu, m) in per_axis.iter().enumerate() {
            maps.push((format!("berry{}_{}", n + 1, mu + 1), m.clone()));
        }
    }
    if let Some(s) = spectrum {
        let basis = build_basis(u.n_level())?;
        let w = weighted_average_excluding(&basis, u, s, params, excluded)?;
        for (mu, r) in w.residual_maps().into_iter().enumerate() {
            maps.push((format!("weighted_residual_{}", mu + 1), r));
        }
        report.weighted = Some(WeightedSummary {
            spectrum: s.values().to_vec(),
            max_residual: w.max_residual,
        });
    }
    if u.spec().ndim() == 1 && u.spec().boundary() == Boundary::Periodic {
        report.loop_phases = (0..u.n_level())
            .map(|level| Ok(LoopPhase { level, phase: loop_phase(u, level)? }))
            .collect::<Result<_>>()?;
    }
    Ok(report)
}

fn spin_record(
    m: &VectorField3,
    source: SpinSource,
    params: &GaugeParams,
    potentials: &[ScalarMap],
    maps: &mut Vec<(String, ScalarMap)>,
) -> Result<SpinRecord> {
    let gauge = extract_gauge(m)?;
    let spin = spin_berry(&gauge, source, params)?;
    let q = params.g;
    let (mut up, mut down) = (0.0f64, 0.0f64);
    for (mu, a3) in potentials.iter().enumerate() {
        let r = a3.map_indexed(|s, a| a - 2.0 / q * spin.up[mu].get(s));
        for (s, a) in a3.data().iter().enumerate() {
            let d = (a + 2.0 / q * spin.down[mu].get(s)).abs();
            if !d.is_nan() {
                down = down.max(d);
            }
        }
        up = up.max(max_abs(std::slice::from_ref(&r)));
        maps.push((format!("spin_up_{}", mu + 1), spin.up[mu].clone()));
        maps.push((format!("potential_relation_{}", mu + 1), r));
    }
    Ok(SpinRecord {
        source,
        potential_relation_up: up,
        potential_relation_down: down,
        max_abs_connection: max_abs(&spin.up),
    })
}

fn source(s: SourceArg) -> SpinSource {
    match s {
        SourceArg::Analytic => SpinSource::Analytic,
        SourceArg::Overlap => SpinSource::Overlap,
        SourceArg::Gauge => SpinSource::Gauge,
    }
}

pub(super) fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let spectrum = parse_spectrum(&args.spectrum)?;
    let (text, input) = read_input(&args.input)?;
    let field = load_field_str(&text)?;
    let grid = GridRecord::of(field.spec());
    let mut maps: Vec<(String, ScalarMap)> = Vec::new();
    let mut result = AnalyzeResult {
        kind: field.kind().as_str(),
        grid,
        charges: Vec::new(),
        singular_sites: None,
        wu_yang: None,
        berry: None,
        scalar: None,
        maps: Vec::new(),
    };
    match field {
        FieldData::Magnetization(m) => {
            for method in charge_methods(&args.method) {
                let c = topological_charges(&m, args.qe, method)?;
                maps.push((format!("density_{}", method.as_str()), c.density));
                result.charges.push(ChargeRecord {
                    method: c.method,
                    q_e: c.q_e,
                    s: c.s,
                    g: c.g,
                    total: c.total,
                    warnings: c.warnings,
                });
            }
            let gauge = extract_gauge(&m)?;
            result.singular_sites = Some(site_list(m.spec(), &gauge.singular));
            let params = gauge_params(args.qe, args.strict)?;
            let ga = analyze_gauge(&gauge.unitary, &params, curvature_method(&args.method), &gauge.singular)?;
            maps.extend(ga.maps);
            result.wu_yang = Some(ga.record);
            if args.berry {
                let spectrum = match spectrum {
                    Some(s) => s,
                    None => Spectrum::ordered(&[0.0, 1.0])?,
                };
                let report = berry_section(&gauge.unitary, &params, &gauge.singular, Some(&spectrum), &mut maps)?;
                let spin = spin_record(&m, SpinSource::Gauge, &params, &ga.potentials[0], &mut maps)?;
                result.berry = Some(BerrySection {
                    report,
                    spin: Some(spin),
                });
            }
        }
        FieldData::Unitary(u) => {
            let params = gauge_params(args.g, args.strict)?;
            let ga = analyze_gauge(&u, &params, curvature_method(&args.method), &[])?;
            maps.extend(ga.maps);
            result.wu_yang = Some(ga.record);
            if args.berry {
                let report = berry_section(&u, &params, &[], spectrum.as_ref(), &mut maps)?;
                result.berry = Some(BerrySection { report, spin: None });
            }
        }
        FieldData::ScalarMap(s) => {
            let area = s.spec().cell_measure();
            result.scalar = Some(ScalarSummary {
                min: s.data().iter().copied().fold(f64::INFINITY, f64::min),
                max: s.data().iter().copied().fold(f64::NEG_INFINITY, f64::max),
                integral: compensated_sum(s.data().iter().map(|v| v * area)),
            });
            maps.push(("value".into(), s));
        }
    }
    result.maps = paths(&export_maps(args.format, args.out.as_deref(), &maps)?);
    emit(&Report::new("analyze", args, vec![input], result), args.out.as_deref())
}

#[derive(Serialize)]
struct BerryResult {
    kind: &'static str,
    grid: GridRecord,
    #[serde(flatten)]
    section: BerrySection,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    maps: Vec<String>,
}

pub(super) fn berry(args: &BerryArgs) -> Result<()> {
    let spectrum = parse_spectrum(&args.spectrum)?;
    let (text, input) = read_input(&args.input)?;
    let field = load_field_str(&text)?;
    let grid = GridRecord::of(field.spec());
    let kind = field.kind().as_str();
    let mut maps = Vec::new();
    let section = match field {
        FieldData::Magnetization(m) => {
            let gauge = extract_gauge(&m)?;
            let params = gauge_params(args.qe, args.strict)?;
            let report = berry_section(&gauge.unitary, &params, &gauge.singular, spectrum.as_ref(), &mut maps)?;
            let basis = build_basis(2)?;
            let k = flat_connection_excluding(&gauge.unitary, &params, &gauge.singular)?;
            let pots = project_potentials(&k, &local_bases(&basis, &gauge.unitary)?);
            let spin = spin_record(&m, source(args.source), &params, &pots.maps[0], &mut maps)?;
            BerrySection {
                report,
                spin: Some(spin),
            }
        }
        FieldData::Unitary(u) => {
            let params = gauge_params(args.g, args.strict)?;
            let mut report = berry_section(&u, &params, &[], spectrum.as_ref(), &mut maps)?;
            if let Some(level) = args.level {
                report.loop_phases.retain(|p| p.level == level);
                if report.loop_phases.is_empty() {
                    return Err(Error::Config(format!(
                        "level {level} needs a 1D periodic input with N > {level}"
                    )));
                }
            }
            BerrySection { report, spin: None }
        }
        FieldData::ScalarMap(_) => {
            return Err(Error::KindMismatch {
                expected: "magnetization or unitary".into(),
                found: kind.into(),
            })
        }
    };
    let written = export_maps(args.format, args.out.as_deref(), &maps)?;
    let result = BerryResult {
        kind,
        grid,
        section,
        maps: paths(&written),
    };
    emit(&Report::new("berry", args, vec![input], result), args.out.as_deref())
}
