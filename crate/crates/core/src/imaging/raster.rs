use super::{ImagingError, Mask, Polyline, Result};

/// Mark every pixel whose centre lies inside `boundary` (even-odd rule).
///
/// Scanline fill: each row's centre line is intersected with every edge using
/// a half-open vertical test, and pixel centres in `[x_2k, x_2k+1)` are set.
/// That is exactly the set the crossing-number test accepts.
pub fn rasterize_interior(boundary: &Polyline, width: usize, height: usize) -> Result<Mask> {
    if !boundary.is_closed() {
        return Err(ImagingError::OpenPolyline);
    }
    if width == 0 || height == 0 {
        return Err(ImagingError::EmptyImage { width, height });
    }
    let pts = boundary.points();
    let n = pts.len();
    let mut mask = Mask::empty(width, height);

    let (min_y, max_y) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    let first_row = (min_y - 0.5).floor().max(0.0) as usize;
    let last_row = ((max_y - 0.5).ceil().max(-1.0) + 1.0).min(height as f64) as usize;

    let mut crossings = Vec::with_capacity(n);
    for row in first_row..last_row {
        let py = row as f64 + 0.5;
        crossings.clear();
        for i in 0..n {
            let a = pts[i];
            let b = pts[(i + n - 1) % n];
            if (a.y > py) != (b.y > py) {
                crossings.push((b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x);
            }
        }
        crossings.sort_by(f64::total_cmp);
        for span in crossings.chunks_exact(2) {
            let (lo, hi) = (span[0], span[1]);
            if hi <= 0.0 {
                continue;
            }
            let mut col = (lo - 0.5).floor().max(0.0) as usize;
            while col < width {
                let px = col as f64 + 0.5;
                if px >= hi {
                    break;
                }
                if px >= lo {
                    mask.set(col, row, true);
                }
                col += 1;
            }
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::super::Point;
    use super::*;

    fn poly(raw: &[(f64, f64)]) -> Polyline {
        Polyline::closed(raw.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn rectangle_marks_sixteen_pixels() {
        let m = rasterize_interior(&poly(&[(2.0, 2.0), (6.0, 2.0), (6.0, 6.0), (2.0, 6.0)]), 10, 10).unwrap();
        assert_eq!(m.count(), 16);
        for (x, y) in m.iter_set() {
            assert!((2..=5).contains(&x) && (2..=5).contains(&y));
        }
    }

    #[test]
    fn covering_polygon_marks_everything() {
        let m = rasterize_interior(&poly(&[(-1.0, -1.0), (20.0, -1.0), (20.0, 20.0), (-1.0, 20.0)]), 12, 7).unwrap();
        assert_eq!(m.count(), 12 * 7);
    }

    #[test]
    fn triangle_outside_is_clipped() {
        let m = rasterize_interior(&poly(&[(-30.0, -30.0), (-10.0, -30.0), (-20.0, -5.0)]), 10, 10).unwrap();
        assert!(m.is_empty());
        let m = rasterize_interior(&poly(&[(30.0, 30.0), (50.0, 30.0), (40.0, 55.0)]), 10, 10).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn open_polyline_rejected() {
        let open = Polyline::new(vec![Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(0.0, 4.0)], false).unwrap();
        assert!(matches!(rasterize_interior(&open, 8, 8), Err(ImagingError::OpenPolyline)));
    }

    #[test]
    fn self_intersecting_bowtie_uses_even_odd() {
        // a pentagram's centre is crossed twice and so is outside
        let star: Vec<(f64, f64)> = (0..5)
            .map(|k| {
                let a = -std::f64::consts::FRAC_PI_2 + k as f64 * 4.0 * std::f64::consts::PI / 5.0;
                (16.0 + 15.0 * a.cos(), 16.0 + 15.0 * a.sin())
            })
            .collect();
        let m = rasterize_interior(&poly(&star), 32, 32).unwrap();
        assert!(!m.get(15, 16));
        assert!(m.get(16, 5));
    }
}
