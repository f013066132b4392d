//! Trace CSV, reference CSV and `key = value` rig files.
//!
//! Rig file keys, one per line, `#` starts a comment:
//!
//! | key | unit |
//! |-----|------|
//! | `alpha_deg` | degrees |
//! | `plane_distance`, `circle_radius`, `sensor_sigma`, `beam_diameter`, `step`, `borderline_width` | mm |
//! | `sensor_count`, `seed` | integer |
//! | `noise_sigma`, `ambient` | ADC counts |
//! | `diffuse_level`, `kappa` | relative |
//! | `r_dark`, `r_fixed` | ohms |
//! | `v_supply` | volts |

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::swipe::{References, RigSettings};
use super::{OpticsError, Result, SensorFrame, ADC_MAX};

fn header(first: &str, count: usize) -> String {
    let mut h = first.to_string();
    for k in 0..count {
        let _ = write!(h, ",s{k}");
    }
    h
}

fn push_row(out: &mut String, label: &str, values: &[u16]) {
    out.push_str(label);
    for v in values {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
}

/// `frame_index,s0..s{n-1}` header, then one integer row per frame.
pub fn format_trace(frames: &[SensorFrame]) -> String {
    let count = frames.first().map_or(16, |f| f.values.len());
    let mut out = header("frame_index", count);
    out.push('\n');
    for f in frames {
        push_row(&mut out, &f.index.to_string(), &f.values);
    }
    out
}

fn parse_error(line: usize, message: impl Into<String>) -> OpticsError {
    OpticsError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_rows(text: &str, first: &str) -> Result<Vec<(String, Vec<u16>)>> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| parse_error(1, "missing header"))?;
    let cols: Vec<&str> = head.trim_end_matches('\r').split(',').collect();
    let count = cols.len().saturating_sub(1);
    if cols[0] != first || count == 0 || cols[1..].iter().enumerate().any(|(k, c)| *c != format!("s{k}")) {
        return Err(parse_error(1, format!("expected header {first},s0..s<n>, got {head:?}")));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != count + 1 {
            return Err(parse_error(
                line_no,
                format!("expected {} columns, got {}", count + 1, fields.len()),
            ));
        }
        let values = fields[1..]
            .iter()
            .map(|f| match f.trim().parse::<u16>() {
                Ok(v) if v <= ADC_MAX => Ok(v),
                _ => Err(parse_error(line_no, format!("invalid 12-bit value {f:?}"))),
            })
            .collect::<Result<Vec<u16>>>()?;
        rows.push((fields[0].trim().to_string(), values));
    }
    Ok(rows)
}

pub fn parse_trace(text: &str) -> Result<Vec<SensorFrame>> {
    parse_rows(text, "frame_index")?
        .into_iter()
        .enumerate()
        .map(|(k, (label, values))| {
            let index = label
                .parse()
                .map_err(|_| parse_error(k + 2, format!("invalid frame index {label:?}")))?;
            Ok(SensorFrame { index, values })
        })
        .collect()
}

fn io_error(path: &Path, source: std::io::Error) -> OpticsError {
    OpticsError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_trace(frames: &[SensorFrame], path: &Path) -> Result<()> {
    fs::write(path, format_trace(frames)).map_err(|e| io_error(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<SensorFrame>> {
    parse_trace(&fs::read_to_string(path).map_err(|e| io_error(path, e))?)
}

/// `label,s0..` header; row `A` is the ambient frame, rows `0..` the states.
pub fn format_references(refs: &References) -> String {
    let mut out = header("label", refs.ambient.values.len());
    out.push('\n');
    push_row(&mut out, "A", &refs.ambient.values);
    for (k, f) in refs.states.iter().enumerate() {
        push_row(&mut out, &k.to_string(), &f.values);
    }
    out
}

pub fn parse_references(text: &str) -> Result<References> {
    let rows = parse_rows(text, "label")?;
    let mut iter = rows.into_iter();
    let (label, values) = iter.next().ok_or_else(|| parse_error(2, "missing ambient row"))?;
    if label != "A" {
        return Err(parse_error(2, format!("first row must be labelled A, got {label:?}")));
    }
    let ambient = SensorFrame { index: 0, values };
    let states = iter
        .enumerate()
        .map(|(k, (label, values))| {
            if label != k.to_string() {
                return Err(parse_error(k + 3, format!("expected state label {k}, got {label:?}")));
            }
            Ok(SensorFrame { index: k, values })
        })
        .collect::<Result<Vec<_>>>()?;
    if states.len() < 2 {
        return Err(parse_error(2, "at least two reference states are required"));
    }
    Ok(References { ambient, states })
}

impl RigSettings {
    /// Applies `key = value` lines on top of `self`.
    pub fn apply_kv(mut self, text: &str) -> Result<Self> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_error(line_no, format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let real = || {
                value
                    .parse::<f64>()
                    .map_err(|_| parse_error(line_no, format!("{key}: invalid number {value:?}")))
            };
            let int = || {
                value
                    .parse::<u64>()
                    .map_err(|_| parse_error(line_no, format!("{key}: invalid integer {value:?}")))
            };
            match key {
                "alpha_deg" => self.geometry.alpha = real()?.to_radians(),
                "plane_distance" => self.geometry.plane_distance = real()?,
                "circle_radius" => self.geometry.circle_radius = real()?,
                "sensor_count" => self.geometry.sensor_count = int()? as usize,
                "sensor_sigma" => self.sensor_sigma = real()?,
                "beam_diameter" => self.beam.diameter = real()?,
                "step" => self.step = real()?,
                "noise_sigma" => self.noise_sigma = real()?,
                "ambient" => self.ambient = real()?,
                "borderline_width" => self.borderline_width = real()?,
                "diffuse_level" => self.diffuse_level = real()?,
                "seed" => self.seed = int()?,
                "r_dark" => self.model.r_dark = real()?,
                "kappa" => self.model.kappa = real()?,
                "r_fixed" => self.model.r_fixed = real()?,
                "v_supply" => self.model.v_supply = real()?,
                other => return Err(parse_error(line_no, format!("unknown key {other:?}"))),
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        Self::default().apply_kv(text)
    }

    pub fn to_kv(&self) -> String {
        let g = &self.geometry;
        let m = &self.model;
        format!(
            "alpha_deg = {}\nplane_distance = {}\ncircle_radius = {}\nsensor_count = {}\nsensor_sigma = {}\n\
             beam_diameter = {}\nstep = {}\nnoise_sigma = {}\nambient = {}\nborderline_width = {}\n\
             diffuse_level = {}\nseed = {}\nr_dark = {}\nkappa = {}\nr_fixed = {}\nv_supply = {}\n",
            g.alpha.to_degrees(),
            g.plane_distance,
            g.circle_radius,
            g.sensor_count,
            self.sensor_sigma,
            self.beam.diameter,
            self.step,
            self.noise_sigma,
            self.ambient,
            self.borderline_width,
            self.diffuse_level,
            self.seed,
            m.r_dark,
            m.kappa,
            m.r_fixed,
            m.v_supply,
        )
    }
}
