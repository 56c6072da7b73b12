//! Zero-level curves of real fields on planar boxes and their SVG rendering.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::coupling::C64;
use crate::error::{Error, Result};
use crate::spectral::{eval_eigenfunction, BoxDomain, Mode};

pub const MIN_RESOLUTION: usize = 8;

/// Real values on the cell-centered grid `(i + ½) h` of a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `values[j * nx + i]` at `(xs[i], ys[j])`.
    pub values: Vec<f64>,
}

impl FieldGrid {
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.width / self.nx as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.height / self.ny as f64
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// `x,y,value` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,value\n");
        for j in 0..self.ny {
            for i in 0..self.nx {
                let _ = writeln!(out, "{},{},{}", fmt_sig(self.x(i)), fmt_sig(self.y(j)), fmt_sig(self.at(i, j)));
            }
        }
        out
    }
}

/// Which plane of the box is drawn: the first two free axes, with every other
/// axis fixed at the given coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub axes: [usize; 2],
    /// `(axis, coordinate)` for every remaining axis.
    pub fixed: Vec<(usize, f64)>,
}

impl Slice {
    pub fn plane(domain: &BoxDomain) -> Result<Self> {
        if domain.dim() != 2 {
            return Err(Error::InvalidArgument(format!(
                "a {}-dimensional box needs an explicit slice",
                domain.dim()
            )));
        }
        Ok(Self { axes: [0, 1], fixed: Vec::new() })
    }
}

/// Samples `Re Σ c_k u_k` on a `resolution × resolution` grid of the slice.
pub fn sample_field(
    domain: &BoxDomain,
    modes: &[Mode],
    coeffs: &[C64],
    slice: &Slice,
    resolution: usize,
) -> Result<FieldGrid> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!("resolution must be at least {MIN_RESOLUTION}")));
    }
    if modes.len() != coeffs.len() {
        return Err(Error::DimensionMismatch { expected: modes.len(), got: coeffs.len() });
    }
    let dim = domain.dim();
    let mut covered = vec![false; dim];
    for &a in slice.axes.iter().chain(slice.fixed.iter().map(|(a, _)| a)) {
        if a >= dim || covered[a] {
            return Err(Error::InvalidArgument("slice axes must cover each axis once".into()));
        }
        covered[a] = true;
    }
    if covered.iter().any(|c| !c) || slice.axes[0] == slice.axes[1] {
        return Err(Error::InvalidArgument("slice axes must cover each axis once".into()));
    }
    let lengths = domain.lengths();
    let (w, h) = (lengths[slice.axes[0]], lengths[slice.axes[1]]);
    let mut grid = FieldGrid { width: w, height: h, nx: resolution, ny: resolution, values: Vec::new() };
    let mut point = vec![0.0; dim];
    for &(a, v) in &slice.fixed {
        point[a] = v;
    }
    let mut values = Vec::with_capacity(resolution * resolution);
    for j in 0..resolution {
        for i in 0..resolution {
            point[slice.axes[0]] = grid.x(i);
            point[slice.axes[1]] = grid.y(j);
            let mut v = 0.0;
            for (m, c) in modes.iter().zip(coeffs) {
                v += c.re * eval_eigenfunction(m, domain, &point)?;
            }
            values.push(v);
        }
    }
    grid.values = values;
    Ok(grid)
}

pub type Point = [f64; 2];

/// Crossing on the segment from `p` (value `a`) to `q` (value `b`).
fn crossing(p: Point, q: Point, a: f64, b: f64) -> Point {
    let t = if a == b { 0.5 } else { a / (a - b) };
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Marching squares on the zero level. Values below `1e-12 · max|v|` are
/// snapped to zero and zero counts as positive.
pub fn zero_segments(grid: &FieldGrid) -> Vec<[Point; 2]> {
    let max = grid.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Vec::new();
    }
    let snap = |v: f64| if v.abs() < 1e-12 * max { 0.0 } else { v };
    let mut segments = Vec::new();
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            // corners counter-clockwise from bottom-left
            let p = [
                [grid.x(i), grid.y(j)],
                [grid.x(i + 1), grid.y(j)],
                [grid.x(i + 1), grid.y(j + 1)],
                [grid.x(i), grid.y(j + 1)],
            ];
            let v = [
                snap(grid.at(i, j)),
                snap(grid.at(i + 1, j)),
                snap(grid.at(i + 1, j + 1)),
                snap(grid.at(i, j + 1)),
            ];
            let neg: Vec<bool> = v.iter().map(|&x| x < 0.0).collect();
            let edges: Vec<usize> = (0..4).filter(|&e| neg[e] != neg[(e + 1) % 4]).collect();
            let point_on = |e: usize| crossing(p[e], p[(e + 1) % 4], v[e], v[(e + 1) % 4]);
            let mut push = |a: Point, b: Point| {
                // a zero corner touched by two crossings gives a point, not a segment
                if key(a) != key(b) {
                    segments.push([a, b]);
                }
            };
            match edges.len() {
                2 => push(point_on(edges[0]), point_on(edges[1])),
                4 => {
                    // saddle: the center value decides which corners connect
                    let center = 0.25 * v.iter().sum::<f64>();
                    let pairs = if (center < 0.0) == neg[0] { [(0, 1), (2, 3)] } else { [(3, 0), (1, 2)] };
                    for (a, b) in pairs {
                        push(point_on(a), point_on(b));
                    }
                }
                _ => {}
            }
        }
    }
    segments
}

fn key(p: Point) -> (i64, i64) {
    ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64)
}

/// Joins segments sharing endpoints into polylines; closed loops repeat their
/// first point at the end.
pub fn chain_segments(segments: &[[Point; 2]]) -> Vec<Vec<Point>> {
    let mut ends: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (s, seg) in segments.iter().enumerate() {
        for p in seg {
            ends.entry(key(*p)).or_default().push(s);
        }
    }
    let mut used = vec![false; segments.len()];
    let extend = |line: &mut Vec<Point>, used: &mut Vec<bool>| loop {
        let tail = *line.last().expect("non-empty");
        let Some(&next) = ends[&key(tail)].iter().find(|&&s| !used[s]) else {
            break;
        };
        used[next] = true;
        let [a, b] = segments[next];
        line.push(if key(a) == key(tail) { b } else { a });
    };
    // start from open ends so open curves come out whole
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by_key(|&s| {
        let open = segments[s].iter().any(|p| ends[&key(*p)].len() == 1);
        (!open, s)
    });
    let mut lines = Vec::new();
    for s in order {
        if used[s] {
            continue;
        }
        used[s] = true;
        let [a, b] = segments[s];
        let (a, b) = if ends[&key(b)].len() == 1 { (b, a) } else { (a, b) };
        let mut line = vec![a, b];
        extend(&mut line, &mut used);
        line.reverse();
        extend(&mut line, &mut used);
        lines.push(line);
    }
    lines
}

/// Formats with nine significant digits, without exponent or trailing zeros.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (8 - mag).max(0) as usize;
    let scale = 10f64.powi(mag - 8);
    let rounded = if mag > 8 { (v / scale).round() * scale } else { v };
    let mut s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// SVG picture of the nodal polylines, `y` pointing up.
pub fn render_svg(grid: &FieldGrid, lines: &[Vec<Point>], pixels: f64) -> String {
    let scale = pixels / grid.width.max(grid.height);
    let (w, h) = (grid.width * scale, grid.height * scale);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        fmt_sig(w),
        fmt_sig(h),
        fmt_sig(w),
        fmt_sig(h)
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="none" stroke="black" stroke-width="1"/>"#,
        fmt_sig(w),
        fmt_sig(h)
    );
    for line in lines {
        let pts: Vec<String> = line
            .iter()
            .map(|p| format!("{},{}", fmt_sig(p[0] * scale), fmt_sig(h - p[1] * scale)))
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="red" stroke-width="1.5"/>"#, pts.join(" "));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(3.14159265358979), "3.14159265");
        assert_eq!(fmt_sig(-0.000123456789012), "-0.000123456789");
        assert_eq!(fmt_sig(123456789012.0), "123456789000");
    }

    #[test]
    fn chains_a_square_loop() {
        let p = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let segs = vec![[p[0], p[1]], [p[2], p[3]], [p[1], p[2]], [p[3], p[0]]];
        let lines = chain_segments(&segs);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].len(), 5);
        assert_eq!(lines[0].first(), lines[0].last());
    }
}
