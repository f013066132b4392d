//! `buildmap`, `encode`, `simulate` and `decode`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anisotag_core::codec::{encode, format_bits, pad_payload, CodecConfig, NonlinearMap};
use anisotag_core::detector::{segment_and_decode, DetectionReport, ReferenceSet};
use anisotag_core::gcode::{angle_estimate, parse_gcode, write_gcode, GcodeProgram, Line, TagLayout};
use anisotag_core::geometry::MicrostructureAngle;
use anisotag_core::optics::{
    beam_fractions, format_references, parse_references, read_trace, reference_frames, simulate_swipe_with,
    swipe_positions, write_trace, References, ResponseCache, SensorFrame, SwipeScenario,
};
use serde::{Deserialize, Serialize};

use crate::{short_hash, HarnessError, Result, Settings};

pub const LAYOUT_SCHEMA: &str = "anisotag.layout.v1";
pub const REPORT_SCHEMA: &str = "anisotag.report.v1";

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn format_error(path: &Path, message: impl Into<String>) -> HarnessError {
    HarnessError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// The cached map at `path` when given, else a fresh build. A cached map
/// must have been built for the configured geometry.
pub fn load_or_build_map(settings: &Settings, path: Option<&Path>) -> Result<NonlinearMap> {
    match path {
        Some(p) => {
            let map = NonlinearMap::load(p)?;
            if *map.geometry() != settings.rig.geometry {
                return Err(HarnessError::Usage(format!(
                    "{} was built for a different detection geometry",
                    p.display()
                )));
            }
            Ok(map)
        }
        None => Ok(NonlinearMap::build(&settings.rig.geometry)?),
    }
}

/// Builds the map for the configured geometry and caches it at `out`.
pub fn cmd_buildmap(settings: &Settings, out: &Path) -> Result<String> {
    let map = NonlinearMap::build(&settings.rig.geometry)?;
    map.save(out)?;
    Ok(map.content_hash())
}

/// Layout description written next to every emitted program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSidecar {
    pub schema: String,
    pub map_hash: String,
    pub codec: CodecConfig,
    pub states: Vec<u32>,
    pub angles_deg: Vec<f64>,
    pub gcode_sha256: String,
    pub layout: TagLayout,
}

impl LayoutSidecar {
    pub fn load(path: &Path) -> Result<Self> {
        let sidecar: Self = serde_json::from_str(&read_file(path)?).map_err(|e| format_error(path, e.to_string()))?;
        if sidecar.schema != LAYOUT_SCHEMA {
            return Err(format_error(path, format!("unsupported schema {:?}", sidecar.schema)));
        }
        Ok(sidecar)
    }
}

/// `tag.gcode` → `tag.layout.json`.
pub fn sidecar_path(gcode: &Path) -> PathBuf {
    gcode.with_extension("layout.json")
}

#[derive(Debug, Clone)]
pub struct EncodeOutcome {
    pub gcode_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub sidecar: LayoutSidecar,
}

/// Pads `payload` to the tag capacity and writes the program and sidecar.
pub fn cmd_encode(settings: &Settings, map: &NonlinearMap, payload: &[bool], out: &Path) -> Result<EncodeOutcome> {
    let bits = pad_payload(payload, &settings.codec)?;
    let codes = encode(&bits, &settings.codec, map)?;
    let layout = TagLayout::from_codes(settings.tag_width, settings.tag_height, &codes);
    let text = write_gcode(&layout, &settings.profile, out)?;
    let sidecar = LayoutSidecar {
        schema: LAYOUT_SCHEMA.into(),
        map_hash: map.content_hash(),
        codec: settings.codec,
        states: codes.iter().map(|c| c.value).collect(),
        angles_deg: codes.iter().map(|c| c.angle.delta().to_degrees()).collect(),
        gcode_sha256: short_hash(text.as_bytes()),
        layout,
    };
    let sidecar_path = sidecar_path(out);
    let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    json.push('\n');
    write_file(&sidecar_path, json.as_bytes())?;
    Ok(EncodeOutcome {
        gcode_path: out.to_path_buf(),
        sidecar_path,
        sidecar,
    })
}

/// Reads the tag frame from the `layout ...` header comment of an emitted
/// program and the region angles from its toolpath.
pub fn layout_from_program(program: &GcodeProgram) -> std::result::Result<TagLayout, String> {
    let header = program
        .lines
        .iter()
        .find_map(|l| match l {
            Line::Comment(c) if c.trim_start().starts_with("layout ") => Some(c.trim().to_string()),
            _ => None,
        })
        .ok_or("no layout header comment")?;
    let field = |key: &str| {
        header
            .split_whitespace()
            .find_map(|w| w.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
            .ok_or(format!("layout header lacks {key}"))
    };
    let number = |s: &str| s.parse::<f64>().map_err(|_| format!("invalid number {s:?} in layout header"));
    let regions: usize = field("regions")?
        .parse()
        .map_err(|_| "invalid region count in layout header".to_string())?;
    let (ox, oy) = field("origin")?.split_once(',').ok_or("invalid origin in layout header")?;
    let placeholder = vec![MicrostructureAngle::from_delta(0.0); regions];
    let mut layout = TagLayout::uniform(number(field("width")?)?, number(field("height")?)?, &placeholder)
        .with_origin(number(ox)?, number(oy)?);
    let angles = angle_estimate(program, &layout).map_err(|e| e.to_string())?;
    for (region, a) in layout.regions.iter_mut().zip(angles) {
        region.angle = MicrostructureAngle::from_delta(a);
    }
    Ok(layout)
}

pub enum SimulationInput<'a> {
    Layout(&'a Path),
    Gcode(&'a Path),
}

impl SimulationInput<'_> {
    pub fn load(&self) -> Result<TagLayout> {
        match self {
            Self::Layout(p) => Ok(LayoutSidecar::load(p)?.layout),
            Self::Gcode(p) => {
                let program = parse_gcode(&read_file(p)?)?;
                layout_from_program(&program).map_err(|m| format_error(p, m))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub layout: TagLayout,
    pub frames: Vec<SensorFrame>,
    pub references: References,
}

/// Simulates a swipe over the input tag and writes the trace, plus the
/// reference frames when `refs_out` is given. Logs frame count and, per
/// region, how many frames it dominates and its peak beam share.
pub fn cmd_simulate(
    settings: &Settings,
    map: &NonlinearMap,
    input: SimulationInput<'_>,
    out: &Path,
    refs_out: Option<&Path>,
    log: &mut dyn Write,
) -> Result<SimulationOutcome> {
    let layout = input.load()?;
    let rig = settings.rig;
    let mut cache = ResponseCache::new(rig.ring());
    let scenario = SwipeScenario::new(layout.clone(), rig);
    let frames = simulate_swipe_with(&scenario, &mut cache)?;
    write_trace(&frames, out)?;
    let references = reference_frames(&rig, map, settings.codec.bits_per_region, &mut cache)?;
    if let Some(p) = refs_out {
        write_file(p, format_references(&references).as_bytes())?;
    }

    let mut dominant = vec![0usize; layout.regions.len()];
    let mut peak = vec![0.0f64; layout.regions.len()];
    for x in swipe_positions(layout.width, rig.step) {
        let fr = beam_fractions(&layout, &rig.beam, rig.borderline_width, x);
        let mut best = 0;
        for (i, &f) in fr.regions.iter().enumerate() {
            peak[i] = peak[i].max(f);
            if f > fr.regions[best] {
                best = i;
            }
        }
        dominant[best] += 1;
    }
    let _ = writeln!(log, "frames {}", frames.len());
    for (i, (d, p)) in dominant.iter().zip(&peak).enumerate() {
        let _ = writeln!(log, "region {i} dominant_frames {d} peak_share {p:.4}");
    }
    Ok(SimulationOutcome {
        layout,
        frames,
        references,
    })
}

/// Decodes a trace against stored references, or against references
/// computed from the settings when none are given. `truth` is padded to
/// the tag capacity.
pub fn cmd_decode(
    settings: &Settings,
    map: &NonlinearMap,
    trace_path: &Path,
    refs_path: Option<&Path>,
    truth: Option<&[bool]>,
    out: &mut dyn Write,
) -> Result<DetectionReport> {
    let trace = read_trace(trace_path)?;
    let references = match refs_path {
        Some(p) => parse_references(&read_file(p)?)?,
        None => {
            let mut cache = ResponseCache::new(settings.rig.ring());
            reference_frames(&settings.rig, map, settings.codec.bits_per_region, &mut cache)?
        }
    };
    let refs = ReferenceSet::from_references(&references)?;
    let truth = truth.map(|t| pad_payload(t, &settings.codec)).transpose()?;
    let cfg = settings.detector();
    let report = segment_and_decode(&trace, &refs, &cfg, truth.as_deref())?;
    let states: Vec<String> = report.region_states.iter().map(u32::to_string).collect();
    let _ = writeln!(out, "frames {}", trace.len());
    let _ = writeln!(out, "regions {} expected {}", report.region_states.len(), cfg.expected_regions);
    let _ = writeln!(out, "states {}", states.join(" "));
    if report.detection_success {
        let _ = writeln!(out, "detection success");
        let _ = writeln!(out, "bits {}", format_bits(&report.bits));
    } else {
        let _ = writeln!(out, "detection failure");
    }
    if let Some(ber) = report.ber {
        let _ = writeln!(out, "ber {ber:.4}");
    }
    Ok(report)
}

/// Header and one row describing a decode, for machine consumption.
pub fn report_csv(settings: &Settings, report: &DetectionReport) -> String {
    let ber = report.ber.map(|b| format!("{b:.6}")).unwrap_or_default();
    format!(
        "# schema={REPORT_SCHEMA}\nconfig_hash,detection_success,regions_found,states,bits,ber\n{},{},{},{},{},{}\n",
        settings.digest(),
        report.detection_success,
        report.region_states.len(),
        report.region_states.iter().map(u32::to_string).collect::<Vec<_>>().join(" "),
        format_bits(&report.bits),
        ber
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use anisotag_core::gcode::emit_gcode;

    #[test]
    fn sidecar_name_replaces_extension() {
        assert_eq!(sidecar_path(Path::new("out/tag.gcode")), PathBuf::from("out/tag.layout.json"));
    }

    #[test]
    fn program_header_recovers_layout() {
        let angles: Vec<_> = [20.0, 75.0, 140.0].iter().map(|&d| MicrostructureAngle::from_degrees(d)).collect();
        let layout = TagLayout::uniform(30.0, 20.0, &angles).with_origin(4.0, 6.0);
        let program = emit_gcode(&layout, &Default::default()).unwrap();
        let back = layout_from_program(&program).unwrap();
        assert_eq!((back.width, back.height, back.origin), (30.0, 20.0, (4.0, 6.0)));
        for (a, b) in back.regions.iter().zip(&layout.regions) {
            assert!((a.angle.delta() - b.angle.delta()).abs() < 0.05f64.to_radians());
        }
        assert!(layout_from_program(&parse_gcode("G0 X1\n").unwrap()).is_err());
    }
}
