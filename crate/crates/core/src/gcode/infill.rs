//! Parallel-line infill of rectangular regions.

use serde::{Deserialize, Serialize};

use super::{GcodeError, LayoutRegion, PrinterProfile, Result, TagLayout};
use crate::geometry::Point2;

/// Clipped lines shorter than this are dropped, millimeters.
const MIN_SEGMENT: f64 = 1e-6;

/// Straight bead in tag coordinates (`u = x`, `v = y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Point2,
    pub end: Point2,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    u0: f64,
    u1: f64,
    height: f64,
}

impl Rect {
    fn of(region: &LayoutRegion, height: f64) -> Self {
        Self {
            u0: region.u0,
            u1: region.u1,
            height,
        }
    }

    fn perimeter(&self) -> f64 {
        2.0 * (self.u1 - self.u0 + self.height)
    }

    /// Counter-clockwise arc-length coordinate of a boundary point, starting
    /// at the lower-left corner.
    fn arc_coord(&self, p: Point2) -> f64 {
        let w = self.u1 - self.u0;
        let h = self.height;
        let edges = [
            (p.v.abs(), (p.u - self.u0).clamp(0.0, w)),
            ((p.u - self.u1).abs(), w + p.v.clamp(0.0, h)),
            ((p.v - h).abs(), w + h + (self.u1 - p.u).clamp(0.0, w)),
            ((p.u - self.u0).abs(), 2.0 * w + h + (h - p.v).clamp(0.0, h)),
        ];
        edges
            .iter()
            .fold((f64::INFINITY, 0.0), |best, &(dist, s)| if dist < best.0 { (dist, s) } else { best })
            .1
    }

    fn corners(&self) -> [(f64, Point2); 4] {
        let w = self.u1 - self.u0;
        let h = self.height;
        [
            (0.0, Point2::new(self.u0, 0.0)),
            (w, Point2::new(self.u1, 0.0)),
            (w + h, Point2::new(self.u1, h)),
            (2.0 * w + h, Point2::new(self.u0, h)),
        ]
    }

    /// Corners passed when walking the boundary the short way from `a` to `b`.
    fn corners_between(&self, a: Point2, b: Point2) -> Vec<Point2> {
        let p = self.perimeter();
        let sa = self.arc_coord(a);
        let sb = self.arc_coord(b);
        let forward = (sb - sa).rem_euclid(p);
        let eps = 1e-9;
        let mut out: Vec<(f64, Point2)> = Vec::new();
        if forward <= p - forward {
            for (s, c) in self.corners() {
                let k = (s - sa).rem_euclid(p);
                if k > eps && k < forward - eps {
                    out.push((k, c));
                }
            }
        } else {
            let backward = p - forward;
            for (s, c) in self.corners() {
                let k = (sa - s).rem_euclid(p);
                if k > eps && k < backward - eps {
                    out.push((k, c));
                }
            }
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0));
        out.into_iter().map(|(_, c)| c).collect()
    }

    /// Parameter interval of the line `s * n + t * d` inside the rectangle.
    fn clip(&self, s: f64, n: (f64, f64), d: (f64, f64)) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (base, dir, min, max) in [
            (s * n.0, d.0, self.u0, self.u1),
            (s * n.1, d.1, 0.0, self.height),
        ] {
            if dir.abs() < 1e-15 {
                if base < min - 1e-12 || base > max + 1e-12 {
                    return None;
                }
            } else {
                let t0 = (min - base) / dir;
                let t1 = (max - base) / dir;
                lo = lo.max(t0.min(t1));
                hi = hi.min(t0.max(t1));
            }
        }
        (hi - lo > MIN_SEGMENT).then_some((lo, hi))
    }
}

fn region_lines(region: &LayoutRegion, height: f64, w: f64) -> Vec<Segment> {
    let rect = Rect::of(region, height);
    let delta = region.angle.delta();
    let d = (delta.cos(), delta.sin());
    let n = (-delta.sin(), delta.cos());
    let projections = [(rect.u0, 0.0), (rect.u1, 0.0), (rect.u0, height), (rect.u1, height)]
        .map(|(x, y)| x * n.0 + y * n.1);
    let smin = projections.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = projections.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let s = smin + w / 2.0 + k as f64 * w;
        if s >= smax - 1e-9 {
            break;
        }
        if let Some((t0, t1)) = rect.clip(s, n, d) {
            let a = Point2::new(s * n.0 + t0 * d.0, s * n.1 + t0 * d.1);
            let b = Point2::new(s * n.0 + t1 * d.0, s * n.1 + t1 * d.1);
            let seg = if out.len() % 2 == 0 {
                Segment { start: a, end: b }
            } else {
                Segment { start: b, end: a }
            };
            out.push(seg);
        }
        k += 1;
    }
    out
}

/// Serpentine-ordered infill lines for every region, spaced one linewidth
/// apart along the line normal and starting half a linewidth inside.
pub fn infill_segments(layout: &TagLayout, profile: &PrinterProfile) -> Result<Vec<Vec<Segment>>> {
    profile.validate()?;
    layout.validate(profile.linewidth)?;
    layout
        .regions
        .iter()
        .enumerate()
        .map(|(i, region)| {
            let lines = region_lines(region, layout.height, profile.linewidth);
            if region.width() < profile.linewidth || lines.is_empty() {
                Err(GcodeError::EmptyRegion {
                    region: i,
                    linewidth: profile.linewidth,
                })
            } else {
                Ok(lines)
            }
        })
        .collect()
}

/// Continuous toolpath through a region's lines: consecutive line ends are
/// joined along the region boundary.
pub(crate) fn region_toolpath(region: &LayoutRegion, height: f64, lines: &[Segment]) -> Vec<Point2> {
    let rect = Rect::of(region, height);
    let mut path = Vec::with_capacity(lines.len() * 3);
    for (k, seg) in lines.iter().enumerate() {
        if k > 0 {
            let prev = lines[k - 1].end;
            path.extend(rect.corners_between(prev, seg.start));
        }
        path.push(seg.start);
        path.push(seg.end);
    }
    path
}
