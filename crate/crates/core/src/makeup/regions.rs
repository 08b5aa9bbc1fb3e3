use super::{Component, Geometry, MakeupError, TestCaseId, TestCaseLayout};
use crate::imaging::{interpolate_boundary, rasterize_interior, Mask, Point};
use crate::landmarks::{FaceRegion, LandmarkSet};

const RIGHT_UPPER_LID: [usize; 4] = [36, 37, 38, 39];
const LEFT_UPPER_LID: [usize; 4] = [42, 43, 44, 45];
const RIGHT_BROW_INNER_TO_OUTER: [usize; 5] = [21, 20, 19, 18, 17];
const LEFT_BROW_OUTER_TO_INNER: [usize; 5] = [26, 25, 24, 23, 22];
// (jaw point, nose wing) per cheek
const RIGHT_CHEEK: (usize, usize) = (2, 31);
const LEFT_CHEEK: (usize, usize) = (14, 35);
const BLUSH_CONTROL_POINTS: usize = 8;

fn fill(points: &[Point], geometry: &Geometry, width: usize, height: usize) -> Result<Mask, MakeupError> {
    let boundary = interpolate_boundary(points, geometry.samples_per_segment)?;
    Ok(rasterize_interior(&boundary, width, height)?)
}

fn pick(landmarks: &LandmarkSet, indices: &[usize]) -> Vec<Point> {
    indices.iter().map(|&i| landmarks.point(i)).collect()
}

/// Region of one component, both sides of the face combined.
///
/// An empty result is reported as [`MakeupError::DegenerateRegion`].
pub fn component_mask(
    component: Component,
    landmarks: &LandmarkSet,
    geometry: &Geometry,
    width: usize,
    height: usize,
) -> Result<Mask, MakeupError> {
    let iod = landmarks.interocular_distance();
    let degenerate = |_| MakeupError::DegenerateRegion(component);
    let mask = match component {
        Component::Eyeliner => {
            let lift = geometry.eyeliner_extrusion * iod;
            let mut mask = Mask::empty(width, height);
            for lid in [RIGHT_UPPER_LID, LEFT_UPPER_LID] {
                let line = pick(landmarks, &lid);
                let mut strip = line.clone();
                strip.extend(line.iter().rev().map(|p| Point::new(p.x, p.y - lift)));
                mask = mask.union(&fill(&strip, geometry, width, height).map_err(degenerate)?);
            }
            mask
        }
        Component::Eyeshadow => {
            let right: Vec<usize> = RIGHT_UPPER_LID.into_iter().chain(RIGHT_BROW_INNER_TO_OUTER).collect();
            let left: Vec<usize> = LEFT_UPPER_LID.into_iter().chain(LEFT_BROW_OUTER_TO_INNER).collect();
            let r = fill(&pick(landmarks, &right), geometry, width, height).map_err(degenerate)?;
            let l = fill(&pick(landmarks, &left), geometry, width, height).map_err(degenerate)?;
            r.union(&l)
        }
        Component::Blush => {
            let rx = geometry.blush_radius * iod;
            let ry = rx * geometry.blush_aspect;
            let mut mask = Mask::empty(width, height);
            for (jaw, wing) in [RIGHT_CHEEK, LEFT_CHEEK] {
                let c = landmarks.point(jaw).midpoint(landmarks.point(wing));
                let ring: Vec<Point> = (0..BLUSH_CONTROL_POINTS)
                    .map(|k| {
                        let a = k as f64 * std::f64::consts::TAU / BLUSH_CONTROL_POINTS as f64;
                        Point::new(c.x + rx * a.cos(), c.y + ry * a.sin())
                    })
                    .collect();
                mask = mask.union(&fill(&ring, geometry, width, height).map_err(degenerate)?);
            }
            mask
        }
        Component::Lipstick => {
            let outer = fill(&landmarks.region(FaceRegion::OuterLip), geometry, width, height).map_err(degenerate)?;
            // a closed mouth may collapse the inner contour; then nothing is cut out
            let inner = fill(&landmarks.region(FaceRegion::InnerLip), geometry, width, height)
                .unwrap_or_else(|_| Mask::empty(width, height));
            outer.subtract(&inner)
        }
    };
    if mask.is_empty() {
        return Err(MakeupError::DegenerateRegion(component));
    }
    Ok(mask)
}

/// Union of every component mask a test case paints, each dilated by
/// `dilation` pixels. Degenerate components contribute nothing.
pub fn test_case_mask(
    tc: TestCaseId,
    layout: TestCaseLayout,
    landmarks: &LandmarkSet,
    geometry: &Geometry,
    width: usize,
    height: usize,
    dilation: usize,
) -> Mask {
    tc.components(layout)
        .iter()
        .filter_map(|&c| component_mask(c, landmarks, geometry, width, height).ok())
        .fold(Mask::empty(width, height), |acc, m| acc.union(&m.dilate(dilation)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::makeup::StyleConfig;
    use crate::synthetic::template_landmarks;

    #[test]
    fn regions_are_disjoint_where_expected() {
        let style = StyleConfig::builtin();
        let lm = template_landmarks(16.0, 8.0, 224.0);
        let g = &style.geometry;
        let masks: Vec<Mask> = Component::ORDER
            .iter()
            .map(|&c| component_mask(c, &lm, g, 256, 256).unwrap())
            .collect();
        for m in &masks {
            assert!(m.count() > 20);
        }
        let eyes = masks[0].union(&masks[1]);
        assert!(!eyes.intersects(&masks[3]), "eyes overlap lips");
        assert!(!masks[2].intersects(&masks[3]), "blush overlaps lips");
        assert!(!eyes.intersects(&masks[2]), "eyes overlap blush");
    }

    #[test]
    fn lipstick_excludes_mouth_opening() {
        let style = StyleConfig::builtin();
        let lm = template_landmarks(0.0, 0.0, 256.0);
        let lips = component_mask(Component::Lipstick, &lm, &style.geometry, 256, 256).unwrap();
        let mouth_centre = lm.point(66).midpoint(lm.point(62));
        assert!(!lips.get(mouth_centre.x as usize, mouth_centre.y as usize));
        let upper_lip = lm.point(51).midpoint(lm.point(62));
        assert!(lips.get(upper_lip.x as usize, upper_lip.y as usize));
    }

    #[test]
    fn eyeliner_sits_above_the_lid() {
        let style = StyleConfig::builtin();
        let lm = template_landmarks(0.0, 0.0, 256.0);
        let liner = component_mask(Component::Eyeliner, &lm, &style.geometry, 256, 256).unwrap();
        let lid_top = lm.point(37).y.min(lm.point(38).y);
        let lift = style.geometry.eyeliner_extrusion * lm.interocular_distance();
        for (_, y) in liner.iter_set() {
            let cy = y as f64 + 0.5;
            assert!(cy >= lid_top - lift - 1.0 && cy <= lm.point(36).y.max(lm.point(39).y) + 1.0);
        }
    }

    #[test]
    fn region_off_frame_is_degenerate() {
        let style = StyleConfig::builtin();
        let lm = template_landmarks(0.0, 0.0, 256.0);
        // the lips sit well below row 100
        assert!(matches!(
            component_mask(Component::Lipstick, &lm, &style.geometry, 256, 100),
            Err(MakeupError::DegenerateRegion(Component::Lipstick))
        ));
    }
}
