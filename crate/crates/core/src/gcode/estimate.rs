//! Recovering region axis angles from a toolpath.

use std::f64::consts::PI;

use super::program::{ExtrusionMode, GcodeProgram};
use super::{GcodeError, Result, TagLayout};

/// Width of one direction bin, radians.
const BIN_WIDTH: f64 = PI / 720.0;
const BINS: usize = 720;

struct Stroke {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Stroke {
    fn length(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }

    fn direction(&self) -> f64 {
        (self.y1 - self.y0).atan2(self.x1 - self.x0).rem_euclid(PI)
    }
}

fn extruding_strokes(program: &GcodeProgram) -> Vec<Stroke> {
    let mode = program.extrusion_mode();
    let (mut x, mut y, mut e_pos) = (0.0, 0.0, 0.0);
    let mut out = Vec::new();
    for m in program.motions() {
        let nx = m.x().unwrap_or(x);
        let ny = m.y().unwrap_or(y);
        let extrudes = match (m.e(), mode) {
            (Some(e), ExtrusionMode::Relative) => e > 0.0,
            (Some(e), ExtrusionMode::Absolute) => {
                let fed = e > e_pos;
                e_pos = e;
                fed
            }
            (None, _) => false,
        };
        if extrudes && (nx != x || ny != y) {
            out.push(Stroke { x0: x, y0: y, x1: nx, y1: ny });
        }
        x = nx;
        y = ny;
    }
    out
}

/// Axis angle in `[0, pi)` of every layout region, from the extruding moves
/// whose midpoints fall inside it.
///
/// Directions are binned with length weights; the heaviest three-bin window
/// wins and its longest stroke gives the angle, so short joining moves along
/// the region boundary cannot outvote the infill.
pub fn angle_estimate(program: &GcodeProgram, layout: &TagLayout) -> Result<Vec<f64>> {
    let (ox, oy) = layout.origin;
    let mut per_region: Vec<Vec<Stroke>> = (0..layout.regions.len()).map(|_| Vec::new()).collect();
    for s in extruding_strokes(program) {
        let mid_x = 0.5 * (s.x0 + s.x1) - ox;
        let mid_y = 0.5 * (s.y0 + s.y1) - oy;
        if mid_y < -1e-6 || mid_y > layout.height + 1e-6 {
            continue;
        }
        if let Some(r) = layout.region_at(mid_x) {
            per_region[r].push(s);
        }
    }

    per_region
        .iter()
        .enumerate()
        .map(|(region, strokes)| {
            if strokes.is_empty() {
                return Err(GcodeError::AmbiguousRegion { region });
            }
            let bin_of = |a: f64| ((a / BIN_WIDTH) as usize).min(BINS - 1);
            let mut hist = vec![0.0; BINS];
            for s in strokes {
                hist[bin_of(s.direction())] += s.length();
            }
            let window = |b: usize| hist[(b + BINS - 1) % BINS] + hist[b] + hist[(b + 1) % BINS];
            let best = (0..BINS).fold(0, |best, b| if window(b) > window(best) { b } else { best });
            let near = |a: f64| {
                let d = bin_of(a) as isize - best as isize;
                d.rem_euclid(BINS as isize) <= 1 || d.rem_euclid(BINS as isize) == BINS as isize - 1
            };
            let longest = strokes
                .iter()
                .filter(|s| near(s.direction()))
                .fold(None::<&Stroke>, |acc, s| match acc {
                    Some(a) if a.length() >= s.length() => Some(a),
                    _ => Some(s),
                })
                .expect("winning window holds at least one stroke");
            let a = longest.direction();
            Ok(if a >= PI { 0.0 } else { a })
        })
        .collect()
}
