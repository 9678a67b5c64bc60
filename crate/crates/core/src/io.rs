//! ASCII point-cloud files: `.xyz` (one `x y z` triple per line) and a
//! minimal ASCII PLY with three float vertex properties.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    Ply,
}

impl CloudFormat {
    /// Chooses by extension; anything other than `.ply` is read as xyz.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => Self::Ply,
            _ => Self::Xyz,
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            Self::Xyz => "xyz",
            Self::Ply => "ply",
        }
    }
}

/// Coordinates are written with 9 significant digits.
fn write_point(out: &mut String, p: &Point3) {
    let _ = writeln!(out, "{:.8e} {:.8e} {:.8e}", p[0], p[1], p[2]);
}

pub fn serialize(points: &[Point3], format: CloudFormat) -> String {
    let mut out = String::with_capacity(points.len() * 48 + 96);
    if format == CloudFormat::Ply {
        let _ = write!(
            out,
            "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
            points.len()
        );
    }
    for p in points {
        write_point(&mut out, p);
    }
    out
}

fn parse_point(line: &str) -> std::result::Result<Point3, String> {
    let mut fields = line.split_whitespace();
    let mut p: Point3 = [0.0; 3];
    for v in &mut p {
        let field = fields.next().ok_or_else(|| format!("expected 3 coordinates in `{line}`"))?;
        *v = field.parse().map_err(|_| format!("bad coordinate `{field}`"))?;
        if !v.is_finite() {
            return Err(format!("non-finite coordinate `{field}`"));
        }
    }
    Ok(p)
}

fn parse_xyz(text: &str) -> std::result::Result<Vec<Point3>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| parse_point(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

fn parse_ply(text: &str) -> std::result::Result<Vec<Point3>, String> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
        return Err("missing `ply` magic line".into());
    }
    let mut count = None;
    let mut properties = Vec::new();
    let mut in_vertex = false;
    loop {
        let (i, line) = lines.next().ok_or("header has no end_header")?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => return Err(format!("unsupported PLY format `{other}`")),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| format!("line {}: bad vertex count", i + 1))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", _, name] if in_vertex => properties.push(name.to_string()),
            ["property", ..] => {}
            ["end_header"] => break,
            _ => return Err(format!("line {}: unexpected header line `{line}`", i + 1)),
        }
    }
    let count = count.ok_or("header declares no vertex element")?;
    let position = |axis: &str| {
        properties
            .iter()
            .position(|p| p == axis)
            .ok_or_else(|| format!("vertex element lacks property `{axis}`"))
    };
    let axes = [position("x")?, position("y")?, position("z")?];
    let mut points = Vec::with_capacity(count);
    for (i, line) in lines.take(count) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < properties.len() {
            return Err(format!("line {}: expected {} values", i + 1, properties.len()));
        }
        let mut p: Point3 = [0.0; 3];
        for (v, &a) in p.iter_mut().zip(&axes) {
            *v = fields[a].parse().map_err(|_| format!("line {}: bad coordinate `{}`", i + 1, fields[a]))?;
            if !v.is_finite() {
                return Err(format!("line {}: non-finite coordinate", i + 1));
            }
        }
        points.push(p);
    }
    if points.len() != count {
        return Err(format!("header declares {count} vertices, found {}", points.len()));
    }
    Ok(points)
}

pub fn parse(text: &str, format: CloudFormat) -> std::result::Result<Vec<Point3>, String> {
    match format {
        CloudFormat::Xyz => parse_xyz(text),
        CloudFormat::Ply => parse_ply(text),
    }
}

/// Reads a cloud, choosing the format by extension.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<Vec<Point3>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, CloudFormat::from_path(path)).map_err(|message| Error::Parse { path: path.into(), message })
}

/// Writes a cloud, choosing the format by extension.
pub fn write_cloud(path: impl AsRef<Path>, points: &[Point3]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, serialize(points, CloudFormat::from_path(path))).map_err(|e| Error::io(path, e))
}
