use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ScalarMap;
use crate::error::Result;
use crate::fields::io::write_json_pretty;

/// Colormap metadata written next to a heatmap.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarMapExport {
    pub csv: PathBuf,
    pub image: Option<PathBuf>,
    pub sidecar: Option<PathBuf>,
    pub min: f64,
    pub max: f64,
}

#[derive(Serialize)]
struct Sidecar {
    colormap: &'static str,
    width: usize,
    height: usize,
    min: f64,
    max: f64,
}

/// Writes a 2D map as CSV (`ix,iy,x,y,value`, row-major) and optionally as a
/// plain-text P3 pixmap with a blue-white-red colormap over `[min, max]`.
/// The pixmap's sidecar JSON sits next to it with a `.json` extension.
pub fn export_scalar_map(
    map: &ScalarMap,
    csv_path: impl AsRef<Path>,
    image_path: Option<&Path>,
) -> Result<ScalarMapExport> {
    let spec = map.spec();
    spec.require_2d()?;

    let mut csv = String::from("ix,iy,x,y,value\n");
    for (i, v) in map.data().iter().enumerate() {
        let s = spec.site(i);
        let x = spec.coordinates(i);
        writeln!(
            csv,
            "{},{},{:.16e},{:.16e},{:.16e}",
            s.coords[0], s.coords[1], x[0], x[1], v
        )
        .expect("writing to a String");
    }
    fs::write(csv_path.as_ref(), csv)?;

    let (min, max) = map
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });

    let mut out = ScalarMapExport {
        csv: csv_path.as_ref().to_path_buf(),
        image: None,
        sidecar: None,
        min,
        max,
    };

    if let Some(image) = image_path {
        let (nx, ny) = (spec.extents()[0], spec.extents()[1]);
        let mut ppm = format!("P3\n{nx} {ny}\n255\n");
        for iy in (0..ny).rev() {
            let row: Vec<String> = (0..nx)
                .map(|ix| {
                    let [r, g, b] = colormap(map.data()[spec.index([ix, iy])], min, max);
                    format!("{r} {g} {b}")
                })
                .collect();
            ppm.push_str(&row.join(" "));
            ppm.push('\n');
        }
        fs::write(image, ppm)?;
        let sidecar = image.with_extension("json");
        let meta = Sidecar {
            colormap: "blue-white-red",
            width: nx,
            height: ny,
            min,
            max,
        };
        fs::write(&sidecar, write_json_pretty(&meta)?)?;
        out.image = Some(image.to_path_buf());
        out.sidecar = Some(sidecar);
    }
    Ok(out)
}

fn colormap(v: f64, min: f64, max: f64) -> [u8; 3] {
    let t = if max > min {
        ((v - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let level = |x: f64| (255.0 * x).round() as u8;
    if t < 0.5 {
        let w = 2.0 * t;
        [level(w), level(w), 255]
    } else {
        let w = 2.0 - 2.0 * t;
        [255, level(w), level(w)]
    }
}
