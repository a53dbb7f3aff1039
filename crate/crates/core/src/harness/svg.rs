//! Standalone SVG emitters for trajectories, space-time diagrams and heatmaps.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use crate::geometry::{square_perimeter_point, DomainKind, Point};
use crate::obsdomain::{Mode, MovingDomainSpec};
use crate::wave1d::Window1D;

const SIZE: f64 = 480.0;
const PAD: f64 = 40.0;

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Canvas {
    w: f64,
    h: f64,
    body: String,
}

impl Canvas {
    fn new(w: f64, h: f64, title: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, "<title>{}</title>", escape(title));
        let _ = writeln!(
            body,
            "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>"
        );
        Canvas { w, h, body }
    }

    fn push(&mut self, el: impl AsRef<str>) {
        self.body.push_str(el.as_ref());
        self.body.push('\n');
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
        self.push(format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\"/>",
            d.join(" ")
        ));
    }

    fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
            self.body,
            w = self.w,
            h = self.h
        )
    }
}

/// Shaded window region in the (t, x) plane (t across, x up) with ray paths.
pub fn spacetime_1d(
    window: &Window1D,
    t_max: f64,
    rays: &[Vec<(f64, f64)>],
    segments: &[[(f64, f64); 2]],
    title: &str,
) -> String {
    let (w, h) = (SIZE * 1.5, SIZE);
    let sx = (w - 2.0 * PAD) / t_max.max(1e-9);
    let sy = h - 2.0 * PAD;
    let map = |t: f64, x: f64| (PAD + t * sx, h - PAD - x * sy);
    let mut c = Canvas::new(w, h, title);
    // window outline through its kinks
    let mut ts = vec![0.0];
    ts.extend(window.kinks(0.0, t_max));
    ts.push(t_max);
    let n_fill = 400;
    for i in 0..=n_fill {
        ts.push(t_max * i as f64 / n_fill as f64);
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut poly: Vec<(f64, f64)> = ts
        .iter()
        .map(|t| map(*t, window.bounds(*t).1.min(1.0)))
        .collect();
    poly.extend(
        ts.iter()
            .rev()
            .map(|t| map(*t, window.bounds(*t).0.max(0.0))),
    );
    let d: Vec<String> = poly.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
    c.push(format!(
        "<polygon points=\"{}\" fill=\"#9ecae1\" stroke=\"#3182bd\" stroke-width=\"1\"/>",
        d.join(" ")
    ));
    for s in segments {
        let (a, b) = (map(s[0].0, s[0].1), map(s[1].0, s[1].1));
        c.polyline(&[a, b], "#e6550d", 1.5);
    }
    for r in rays {
        let pts: Vec<(f64, f64)> = r.iter().map(|(t, x)| map(*t, *x)).collect();
        c.polyline(&pts, "#222222", 1.2);
    }
    let (x0, y0) = map(0.0, 0.0);
    let (x1, y1) = map(t_max, 1.0);
    c.push(format!(
        "<rect x=\"{x0:.3}\" y=\"{y1:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"none\" stroke=\"black\"/>",
        x1 - x0,
        y0 - y1
    ));
    c.push(format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">t</text>",
        x1 - 6.0,
        y0 + 16.0
    ));
    c.push(format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">x</text>",
        x0 - 16.0,
        y1 + 6.0
    ));
    c.finish()
}

fn disk_map(p: (f64, f64)) -> (f64, f64) {
    let s = (SIZE - 2.0 * PAD) / 2.2;
    (SIZE / 2.0 + p.0 * s, SIZE / 2.0 - p.1 * s)
}

fn square_map(p: (f64, f64)) -> (f64, f64) {
    let s = (SIZE - 2.0 * PAD) / 1.2;
    (PAD + (p.0 + 0.1) * s, SIZE - PAD - (p.1 + 0.1) * s)
}

fn sphere_map(lon: f64, lat: f64) -> (f64, f64) {
    let w = 2.0 * SIZE - 2.0 * PAD;
    let h = SIZE - 2.0 * PAD;
    (PAD + (lon + PI) / TAU * w, PAD + (PI / 2.0 - lat) / PI * h)
}

fn disk_window(c: &mut Canvas, spec: &MovingDomainSpec, t: f64, opacity: f64) {
    let th0 = spec.window_angle(t);
    let a = spec.a.min(TAU);
    let arc_pts = |r: f64, n: usize| -> Vec<(f64, f64)> {
        (0..=n)
            .map(|i| {
                let th = th0 + a * i as f64 / n as f64;
                disk_map((r * th.cos(), r * th.sin()))
            })
            .collect()
    };
    let n = ((a / TAU) * 180.0).ceil().max(8.0) as usize;
    if spec.mode == Mode::Boundary {
        c.polyline(&arc_pts(1.0, n), "#e6550d", 4.0);
        return;
    }
    let inner = 1.0 - spec.eps.unwrap_or(0.0);
    let mut pts = arc_pts(1.0, n);
    pts.extend(arc_pts(inner, n).into_iter().rev());
    let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
    c.push(format!(
        "<polygon points=\"{}\" fill=\"#fdae6b\" fill-opacity=\"{opacity:.3}\" stroke=\"#e6550d\"/>",
        d.join(" ")
    ));
}

fn square_window(c: &mut Canvas, spec: &MovingDomainSpec, t: f64, opacity: f64) {
    if spec.mode == Mode::Boundary {
        let d0 = spec.window_angle(t);
        let n = 64;
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let q = square_perimeter_point(d0 + 2.0 * spec.a * i as f64 / n as f64);
                square_map((q.x, q.y))
            })
            .collect();
        c.polyline(&pts, "#e6550d", 4.0);
        return;
    }
    let ctr = spec.square_center(t);
    let lo = ((ctr.x - spec.a).max(0.0), (ctr.y - spec.a).max(0.0));
    let hi = ((ctr.x + spec.a).min(1.0), (ctr.y + spec.a).min(1.0));
    let (x0, y0) = square_map(lo);
    let (x1, y1) = square_map(hi);
    c.push(format!(
        "<rect x=\"{x0:.3}\" y=\"{y1:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"#fdae6b\" fill-opacity=\"{opacity:.3}\" stroke=\"#e6550d\"/>",
        x1 - x0,
        y0 - y1
    ));
}

fn sphere_window(c: &mut Canvas, spec: &MovingDomainSpec, t: f64, opacity: f64) {
    let eps = spec.eps.unwrap_or(0.0);
    let start = crate::geometry::wrap_pi(spec.window_angle(t));
    let a = spec.a.min(TAU);
    // split at the ±π seam
    let mut pieces = vec![(start, (start + a).min(PI))];
    if start + a > PI {
        pieces.push((-PI, start + a - TAU));
    }
    for (l0, l1) in pieces {
        let (x0, y0) = sphere_map(l0, eps);
        let (x1, y1) = sphere_map(l1, -eps);
        c.push(format!(
            "<rect x=\"{x0:.3}\" y=\"{y0:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"#fdae6b\" fill-opacity=\"{opacity:.3}\" stroke=\"#e6550d\"/>",
            (x1 - x0).max(0.0),
            (y1 - y0).max(0.0)
        ));
    }
}

/// Domain outline, region snapshots at `times`, and the ray path.
pub fn trajectory(
    kind: DomainKind,
    spec: Option<&MovingDomainSpec>,
    times: &[f64],
    path: &[(f64, Point)],
    title: &str,
) -> String {
    let n = times.len().max(1) as f64;
    match kind {
        DomainKind::Interval01 => {
            let window = match spec {
                Some(s) => Window1D::Moving(s.clone()),
                None => Window1D::empty(),
            };
            let t_max = path.last().map(|p| p.0).unwrap_or(1.0).max(1e-9);
            let ray: Vec<(f64, f64)> = path
                .iter()
                .filter_map(|(t, p)| p.as_line().map(|x| (*t, x)))
                .collect();
            spacetime_1d(&window, t_max, &[ray], &[], title)
        }
        DomainKind::UnitDisk => {
            let mut c = Canvas::new(SIZE, SIZE, title);
            let (cx, cy) = disk_map((0.0, 0.0));
            let r = disk_map((1.0, 0.0)).0 - cx;
            c.push(format!("<circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"{r:.3}\" fill=\"none\" stroke=\"black\"/>"));
            if let Some(s) = spec {
                for (i, t) in times.iter().enumerate() {
                    disk_window(&mut c, s, *t, 0.25 + 0.5 * (i as f64 + 1.0) / n);
                }
            }
            let pts: Vec<(f64, f64)> = path
                .iter()
                .filter_map(|(_, p)| p.as_plane())
                .map(|q| disk_map((q.x, q.y)))
                .collect();
            c.polyline(&pts, "#222222", 1.0);
            c.finish()
        }
        DomainKind::UnitSquare => {
            let mut c = Canvas::new(SIZE, SIZE, title);
            let (x0, y0) = square_map((0.0, 0.0));
            let (x1, y1) = square_map((1.0, 1.0));
            c.push(format!(
                "<rect x=\"{x0:.3}\" y=\"{y1:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"none\" stroke=\"black\"/>",
                x1 - x0,
                y0 - y1
            ));
            if let Some(s) = spec {
                for (i, t) in times.iter().enumerate() {
                    square_window(&mut c, s, *t, 0.25 + 0.5 * (i as f64 + 1.0) / n);
                }
            }
            let pts: Vec<(f64, f64)> = path
                .iter()
                .filter_map(|(_, p)| p.as_plane())
                .map(|q| square_map((q.x, q.y)))
                .collect();
            c.polyline(&pts, "#222222", 1.0);
            c.finish()
        }
        DomainKind::UnitSphere => {
            let mut c = Canvas::new(2.0 * SIZE, SIZE, title);
            let (x0, y0) = sphere_map(-PI, PI / 2.0);
            let (x1, y1) = sphere_map(PI, -PI / 2.0);
            c.push(format!(
                "<rect x=\"{x0:.3}\" y=\"{y0:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"none\" stroke=\"black\"/>",
                x1 - x0,
                y1 - y0
            ));
            let (ex0, ey) = sphere_map(-PI, 0.0);
            let (ex1, _) = sphere_map(PI, 0.0);
            c.push(format!(
                "<line x1=\"{ex0:.3}\" y1=\"{ey:.3}\" x2=\"{ex1:.3}\" y2=\"{ey:.3}\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>"
            ));
            if let Some(s) = spec {
                for (i, t) in times.iter().enumerate() {
                    sphere_window(&mut c, s, *t, 0.25 + 0.5 * (i as f64 + 1.0) / n);
                }
            }
            // break the path where the longitude wraps
            let mut run: Vec<(f64, f64)> = Vec::new();
            let mut last_lon: Option<f64> = None;
            for (_, p) in path {
                if let Some(v) = p.as_sphere() {
                    let (lon, lat) = v.lon_lat();
                    if let Some(l) = last_lon {
                        if (lon - l).abs() > PI {
                            c.polyline(&run, "#222222", 1.0);
                            run.clear();
                        }
                    }
                    run.push(sphere_map(lon, lat));
                    last_lon = Some(lon);
                }
            }
            c.polyline(&run, "#222222", 1.0);
            c.finish()
        }
    }
}

/// Grey-scale |∂_t u|² over (t, x) with the window silhouette on top.
pub fn heatmap(grid: &[Vec<f64>], t_max: f64, window: &Window1D, title: &str) -> String {
    let (w, h) = (SIZE * 1.5, SIZE);
    let nt = grid.len().max(1);
    let nx = grid.first().map(|r| r.len()).unwrap_or(0).max(1);
    let peak = grid.iter().flatten().cloned().fold(0.0f64, f64::max);
    let cw = (w - 2.0 * PAD) / nt as f64;
    let ch = (h - 2.0 * PAD) / nx as f64;
    let mut c = Canvas::new(w, h, title);
    for (i, row) in grid.iter().enumerate() {
        for (j, val) in row.iter().enumerate() {
            let g = if peak > 0.0 {
                255.0 * (1.0 - (val / peak).sqrt())
            } else {
                255.0
            };
            let g = g.round().clamp(0.0, 255.0) as u8;
            let x = PAD + i as f64 * cw;
            let y = h - PAD - (j as f64 + 1.0) * ch;
            c.push(format!(
                "<rect x=\"{x:.3}\" y=\"{y:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"rgb({g},{g},{g})\"/>",
                cw + 0.05,
                ch + 0.05
            ));
        }
    }
    let n = 400;
    let map = |t: f64, x: f64| {
        (
            PAD + t / t_max * (w - 2.0 * PAD),
            h - PAD - x * (h - 2.0 * PAD),
        )
    };
    let ts: Vec<f64> = (0..=n).map(|i| t_max * i as f64 / n as f64).collect();
    let lo: Vec<(f64, f64)> = ts
        .iter()
        .map(|t| map(*t, window.bounds(*t).0.max(0.0)))
        .collect();
    let hi: Vec<(f64, f64)> = ts
        .iter()
        .map(|t| map(*t, window.bounds(*t).1.min(1.0)))
        .collect();
    c.polyline(&lo, "#e6550d", 1.5);
    c.polyline(&hi, "#e6550d", 1.5);
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rayflow::disk_polygon_ray;

    fn parses(s: &str) {
        roxmltree::Document::parse(s).expect("well-formed svg");
    }

    #[test]
    fn empty_trace_gives_outline() {
        for kind in [
            DomainKind::UnitDisk,
            DomainKind::UnitSquare,
            DomainKind::UnitSphere,
            DomainKind::Interval01,
        ] {
            let s = trajectory(kind, None, &[], &[], "empty <trace> & co");
            parses(&s);
        }
    }

    #[test]
    fn hexagon_closes() {
        let ray = disk_polygon_ray(6, 0.0, 0.0, false);
        let path: Vec<(f64, Point)> = (0..=60)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, Point::Plane(ray.position(t)))
            })
            .collect();
        let spec = MovingDomainSpec::disk(1.0, PI / 2.0, 0.1);
        let s = trajectory(
            DomainKind::UnitDisk,
            Some(&spec),
            &[0.0, 1.0],
            &path,
            "hexagon",
        );
        parses(&s);
        assert!(s.contains("<polyline"));
    }

    #[test]
    fn spacetime_and_heatmap_parse() {
        let w = Window1D::Moving(MovingDomainSpec::interval(0.5, 0.25, 0.0));
        let s = spacetime_1d(
            &w,
            4.0,
            &[vec![(0.0, 0.2), (0.8, 1.0), (2.0, 0.0)]],
            &[],
            "zigzag",
        );
        parses(&s);
        let s = heatmap(&[vec![0.0, 1.0], vec![2.0, 0.5]], 1.0, &w, "heat");
        parses(&s);
    }
}
