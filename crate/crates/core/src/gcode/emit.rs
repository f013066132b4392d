//! Deterministic program emission.

use std::fs;
use std::path::Path;

use super::infill::{infill_segments, region_toolpath};
use super::program::{Decimal, GcodeProgram, Line, Motion, MoveKind};
use super::{extrusion_length, GcodeError, PrinterProfile, Result, TagLayout};
use crate::geometry::Point2;

/// Decimals for coordinates, feed rate and header values.
pub const COORD_DECIMALS: usize = 5;

/// Decimals for `E`. Five places would round a move's filament length by
/// up to 5e-6 mm; seven keep every move within 1e-6 mm of the formula.
pub const E_DECIMALS: usize = 7;

pub fn render_number(value: f64) -> String {
    Decimal::from_f64(value, COORD_DECIMALS).to_string()
}

fn num(value: f64) -> Decimal {
    Decimal::from_f64(value, COORD_DECIMALS)
}

fn comment(text: String) -> Line {
    Line::Comment(format!(" {text}"))
}

/// Builds the program for `layout`.
///
/// Each region is one chain: a `G0` travel to its first point at
/// `z_print`, then `G1` moves along the serpentine toolpath, each with the
/// filament length of the move between the rounded end points.
pub fn emit_gcode(layout: &TagLayout, profile: &PrinterProfile) -> Result<GcodeProgram> {
    let regions = infill_segments(layout, profile)?;
    let (ox, oy) = layout.origin;
    let p = profile;
    let mut lines = vec![
        comment("anisotag SCS tag program".into()),
        comment(format!(
            "profile filament_diameter={} nozzle_diameter={} linewidth={} layer_height={} z_print={} feed_rate={} extrusion_factor={}",
            render_number(p.filament_diameter),
            render_number(p.nozzle_diameter),
            render_number(p.linewidth),
            render_number(p.layer_height),
            render_number(p.z_print),
            render_number(p.feed_rate),
            render_number(p.extrusion_factor),
        )),
        comment(format!(
            "layout hash={} regions={} width={} height={} origin={},{}",
            layout.content_hash(),
            layout.regions.len(),
            render_number(layout.width),
            render_number(layout.height),
            render_number(ox),
            render_number(oy),
        )),
        comment("units mm, absolute XYZ, relative E (one E value per G1 move)".into()),
        Line::Opaque("G21".into()),
        Line::Opaque("G90".into()),
        Line::Opaque("M83".into()),
    ];

    for (i, (region, segments)) in layout.regions.iter().zip(&regions).enumerate() {
        lines.push(comment(format!(
            "region {i} u0={} u1={} delta_deg={}",
            render_number(region.u0),
            render_number(region.u1),
            render_number(region.angle.delta().to_degrees()),
        )));
        let path = region_toolpath(region, layout.height, segments);
        let placed: Vec<(Decimal, Decimal)> = path.iter().map(|q| (num(q.u + ox), num(q.v + oy))).collect();
        let (sx, sy) = placed[0];
        lines.push(Line::Move(Motion {
            kind: MoveKind::Travel,
            fields: vec![('X', sx), ('Y', sy), ('Z', num(p.z_print)), ('F', num(p.feed_rate))],
            comment: None,
        }));
        let mut prev = placed[0];
        for &(x, y) in &placed[1..] {
            if (x, y) == prev {
                continue;
            }
            let a = Point2::new(prev.0.to_f64(), prev.1.to_f64());
            let b = Point2::new(x.to_f64(), y.to_f64());
            let e = extrusion_length(a.distance(b), p);
            lines.push(Line::Move(Motion {
                kind: MoveKind::Linear,
                fields: vec![('X', x), ('Y', y), ('F', num(p.feed_rate)), ('E', Decimal::from_f64(e, E_DECIMALS))],
                comment: None,
            }));
            prev = (x, y);
        }
    }
    lines.push(comment("end of tag program".into()));
    Ok(GcodeProgram { lines })
}

/// Emits and writes the program, returning the rendered text.
pub fn write_gcode(layout: &TagLayout, profile: &PrinterProfile, path: &Path) -> Result<String> {
    let text = emit_gcode(layout, profile)?.render();
    fs::write(path, &text).map_err(|source| GcodeError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text)
}
