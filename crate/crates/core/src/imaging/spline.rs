use super::{count_distinct, ImagingError, Point, Polyline, Result};

/// Connect `control_points` into a closed, smooth boundary.
///
/// Each coordinate is interpolated with a cyclic monotone cubic Hermite
/// spline over a uniform parameter (Fritsch–Butland tangents), so every
/// segment stays inside the bounding box of its two end points and eyelid
/// curves never ring. The result has `control_points.len() * samples_per_segment`
/// vertices and passes through every control point.
pub fn interpolate_boundary(control_points: &[Point], samples_per_segment: usize) -> Result<Polyline> {
    if samples_per_segment == 0 {
        return Err(ImagingError::Parameter(
            "samples_per_segment must be positive".into(),
        ));
    }
    if control_points.iter().any(|p| !p.is_finite()) {
        return Err(ImagingError::NonFinite);
    }
    let distinct = count_distinct(control_points);
    if distinct < 3 {
        return Err(ImagingError::DegenerateRegion { distinct });
    }

    let n = control_points.len();
    let xs: Vec<f64> = control_points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = control_points.iter().map(|p| p.y).collect();
    let mx = cyclic_tangents(&xs);
    let my = cyclic_tangents(&ys);

    let mut out = Vec::with_capacity(n * samples_per_segment);
    for k in 0..n {
        let next = (k + 1) % n;
        out.push(control_points[k]);
        for j in 1..samples_per_segment {
            let t = j as f64 / samples_per_segment as f64;
            out.push(Point::new(
                hermite(xs[k], xs[next], mx[k], mx[next], t),
                hermite(ys[k], ys[next], my[k], my[next], t),
            ));
        }
    }
    Polyline::closed(out)
}

fn cyclic_tangents(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|k| {
            let prev = values[(k + n - 1) % n];
            let next = values[(k + 1) % n];
            let d_in = values[k] - prev;
            let d_out = next - values[k];
            if d_in * d_out <= 0.0 {
                0.0
            } else {
                2.0 * d_in * d_out / (d_in + d_out)
            }
        })
        .collect()
}

fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1
}
