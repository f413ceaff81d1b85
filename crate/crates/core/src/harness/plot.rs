//! Deterministic PNG rendering of bundle tables. Images carry no text; axes
//! and scales are listed in `plots.json` next to them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde_json::json;

use super::bundle::{ArtifactBundle, PlotSpec};
use super::table::Table;
use super::HarnessError;

const WIDTH: u32 = 640;
const HEIGHT: u32 = 480;
const MARGIN: u32 = 40;
const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([0, 0, 0]);
const MISSING: Rgb<u8> = Rgb([128, 128, 128]);

const PALETTE: [[u8; 3]; 8] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [23, 190, 207],
];

// viridis anchors at 0, 0.25, 0.5, 0.75, 1
const COLORMAP: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn colormap(u: f64) -> Rgb<u8> {
    let u = u.clamp(0.0, 1.0) * (COLORMAP.len() - 1) as f64;
    let i = (u.floor() as usize).min(COLORMAP.len() - 2);
    let f = u - i as f64;
    let c = |k: usize| (COLORMAP[i][k] * (1.0 - f) + COLORMAP[i + 1][k] * f).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

fn column(table: &Table, name: &str) -> Result<Vec<f64>, HarnessError> {
    table.column(name).ok_or_else(|| HarnessError::Format(format!("table {} has no column {name}", table.name)))
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        None
    } else if lo == hi {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

/// Sorted distinct values, compared bitwise.
fn distinct(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Heat map of `value` over the distinct `x` (columns) and `y` (rows, first
/// value at the bottom). Returns the image and the value range used.
pub fn render_heatmap(x: &[f64], y: &[f64], value: &[f64]) -> Result<(RgbImage, (f64, f64)), HarnessError> {
    let xs = distinct(x);
    let ys = distinct(y);
    if xs.is_empty() || ys.is_empty() {
        return Err(HarnessError::Format("heat map grid is empty".into()));
    }
    let range = finite_range(value.iter().copied()).ok_or_else(|| HarnessError::Format("heat map has no finite values".into()))?;
    let mut grid = vec![f64::NAN; xs.len() * ys.len()];
    for ((&a, &b), &v) in x.iter().zip(y).zip(value) {
        if let (Ok(i), Ok(j)) = (xs.binary_search_by(|p| p.total_cmp(&a)), ys.binary_search_by(|p| p.total_cmp(&b))) {
            grid[j * xs.len() + i] = v;
        }
    }
    let cell_w = (WIDTH / xs.len() as u32).max(1);
    let cell_h = (HEIGHT / ys.len() as u32).max(1);
    let (w, h) = (cell_w * xs.len() as u32, cell_h * ys.len() as u32);
    let mut img = RgbImage::from_pixel(w, h, MISSING);
    for (j, row) in grid.chunks(xs.len()).enumerate() {
        for (i, &v) in row.iter().enumerate() {
            let color = if v.is_finite() { colormap((v - range.0) / (range.1 - range.0)) } else { MISSING };
            let top = h - (j as u32 + 1) * cell_h;
            for py in top..top + cell_h {
                for px in i as u32 * cell_w..(i as u32 + 1) * cell_w {
                    img.put_pixel(px, py, color);
                }
            }
        }
    }
    Ok((img, range))
}

fn draw_line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Line plot of `y` against `x`, one series per distinct `group` value (in
/// ascending order). Non-finite points break the line.
pub fn render_lines(x: &[f64], y: &[f64], group: Option<&[f64]>) -> Result<(RgbImage, [f64; 4]), HarnessError> {
    let xr = finite_range(x.iter().copied()).ok_or_else(|| HarnessError::Format("line plot has no finite x".into()))?;
    let yr = finite_range(y.iter().copied()).ok_or_else(|| HarnessError::Format("line plot has no finite y".into()))?;
    let mut series: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for (k, (&a, &b)) in x.iter().zip(y).enumerate() {
        let g = group.map_or(0.0, |g| g[k]);
        series.entry(g.to_bits() ^ (1 << 63)).or_default().push((a, b));
    }
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, BACKGROUND);
    let (pw, ph) = ((WIDTH - 2 * MARGIN) as f64, (HEIGHT - 2 * MARGIN) as f64);
    let to_px = |a: f64, b: f64| {
        let px = MARGIN as f64 + (a - xr.0) / (xr.1 - xr.0) * pw;
        let py = (HEIGHT - MARGIN) as f64 - (b - yr.0) / (yr.1 - yr.0) * ph;
        (px.round() as i64, py.round() as i64)
    };
    let (left, bottom) = (MARGIN as i64, (HEIGHT - MARGIN) as i64);
    draw_line(&mut img, (left, bottom), ((WIDTH - MARGIN) as i64, bottom), AXIS);
    draw_line(&mut img, (left, bottom), (left, MARGIN as i64), AXIS);
    for (s, mut points) in series.into_values().enumerate() {
        points.sort_by(|p, q| p.0.total_cmp(&q.0));
        let color = Rgb(PALETTE[s % PALETTE.len()]);
        let mut prev: Option<(i64, i64)> = None;
        for (a, b) in points {
            if !(a.is_finite() && b.is_finite()) {
                prev = None;
                continue;
            }
            let p = to_px(a, b);
            draw_line(&mut img, prev.unwrap_or(p), p, color);
            prev = Some(p);
        }
    }
    Ok((img, [xr.0, xr.1, yr.0, yr.1]))
}

fn save(img: &RgbImage, path: &Path) -> Result<(), HarnessError> {
    img.save(path).map_err(|e| match e {
        image::ImageError::IoError(source) => HarnessError::io(path, source),
        other => HarnessError::Format(other.to_string()),
    })
}

/// Renders every plot listed in a bundle directory into PNG files beside the
/// tables and returns their paths.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let bundle = ArtifactBundle::load(dir)?;
    if bundle.plots.is_empty() {
        return Err(HarnessError::Format(format!("{} lists no plots", dir.display())));
    }
    let mut written = Vec::new();
    let mut index = Vec::new();
    for (n, spec) in bundle.plots.iter().enumerate() {
        let table = bundle
            .table(spec.table())
            .ok_or_else(|| HarnessError::Format(format!("plot refers to missing table {}", spec.table())))?;
        match spec {
            PlotSpec::Heatmap { x, y, value, facet, .. } => {
                let (xs, ys, vs) = (column(table, x)?, column(table, y)?, column(table, value)?);
                let facets = match facet {
                    Some(f) => column(table, f)?,
                    None => vec![0.0; xs.len()],
                };
                for f in distinct(&facets) {
                    let keep: Vec<usize> = (0..xs.len()).filter(|&k| facets[k] == f).collect();
                    let pick = |v: &[f64]| keep.iter().map(|&k| v[k]).collect::<Vec<_>>();
                    let (img, range) = render_heatmap(&pick(&xs), &pick(&ys), &pick(&vs))?;
                    let file = match facet {
                        Some(name) => format!("{}_{n}_{name}_{f}.png", table.name),
                        None => format!("{}_{n}.png", table.name),
                    };
                    save(&img, &dir.join(&file))?;
                    index.push(json!({"file": file, "kind": "heatmap", "x": x, "y": y, "value": value,
                                      "facet": facet.as_ref().map(|name| json!({name: f})), "value_range": [range.0, range.1]}));
                    written.push(dir.join(file));
                }
            }
            PlotSpec::Lines { x, y, group, .. } => {
                let (xs, ys) = (column(table, x)?, column(table, y)?);
                let gs = group.as_ref().map(|g| column(table, g)).transpose()?;
                let (img, bounds) = render_lines(&xs, &ys, gs.as_deref())?;
                let file = format!("{}_{n}.png", table.name);
                save(&img, &dir.join(&file))?;
                index.push(json!({"file": file, "kind": "lines", "x": x, "y": y, "group": group,
                                  "groups": gs.as_deref().map(distinct), "bounds": bounds}));
                written.push(dir.join(file));
            }
        }
    }
    let path = dir.join("plots.json");
    let text = serde_json::to_string_pretty(&index).map_err(|e| HarnessError::Format(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(written)
}
