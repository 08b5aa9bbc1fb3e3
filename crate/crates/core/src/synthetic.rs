//! Synthetic faces with exact landmarks, for harness self-tests and demos.
//!
//! Faces are flat-shaded cartoons: a skin ellipse, brows, eyes and lips drawn
//! from a fixed 68-point template, plus mild seeded noise so blurs have
//! texture to work on. They are not meant to fool a real detector.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{interpolate_boundary, rasterize_interior, Image, Mask, Point, Polyline, Rgb};
use crate::landmarks::{FaceRegion, LandmarkSet, LandmarkSource};

/// Frontal, left-right symmetric 68-point template in a unit box.
pub fn template_unit() -> Vec<Point> {
    let mut pts = vec![Point::new(0.0, 0.0); 68];
    // jaw: lower half ellipse from the subject's right temple to the left
    for (i, p) in pts.iter_mut().enumerate().take(17) {
        let theta = std::f64::consts::PI * (1.0 - i as f64 / 16.0);
        *p = Point::new(0.5 + 0.42 * theta.cos(), 0.34 + 0.62 * theta.sin());
    }
    let mirror = |p: Point| Point::new(1.0 - p.x, p.y);
    for k in 0..5 {
        let t = k as f64 / 4.0;
        pts[17 + k] = Point::new(0.16 + 0.27 * t, 0.245 - 0.04 * (std::f64::consts::PI * (0.1 + 0.8 * t)).sin());
    }
    for k in 0..5 {
        pts[22 + k] = mirror(pts[21 - k]);
    }
    for (k, y) in [0.34, 0.42, 0.50, 0.58].into_iter().enumerate() {
        pts[27 + k] = Point::new(0.5, y);
    }
    let nostrils = [(0.41, 0.63), (0.45, 0.645), (0.5, 0.655), (0.55, 0.645), (0.59, 0.63)];
    for (k, (x, y)) in nostrils.into_iter().enumerate() {
        pts[31 + k] = Point::new(x, y);
    }
    let right_eye = [(0.225, 0.36), (0.275, 0.335), (0.325, 0.335), (0.375, 0.36), (0.325, 0.382), (0.275, 0.382)];
    for (k, (x, y)) in right_eye.into_iter().enumerate() {
        pts[36 + k] = Point::new(x, y);
    }
    // left eye mirrors the right one with the iBUG ordering (inner corner first)
    for (k, src) in [39, 38, 37, 36, 41, 40].into_iter().enumerate() {
        pts[42 + k] = mirror(pts[src]);
    }
    let outer_lip = [
        (0.36, 0.77), (0.41, 0.74), (0.46, 0.725), (0.5, 0.732), (0.54, 0.725), (0.59, 0.74),
        (0.64, 0.77), (0.59, 0.82), (0.545, 0.84), (0.5, 0.845), (0.455, 0.84), (0.41, 0.82),
    ];
    for (k, (x, y)) in outer_lip.into_iter().enumerate() {
        pts[48 + k] = Point::new(x, y);
    }
    let inner_lip = [
        (0.38, 0.77), (0.44, 0.762), (0.5, 0.765), (0.56, 0.762),
        (0.62, 0.77), (0.56, 0.786), (0.5, 0.79), (0.44, 0.786),
    ];
    for (k, (x, y)) in inner_lip.into_iter().enumerate() {
        pts[60 + k] = Point::new(x, y);
    }
    pts
}

/// Template scaled to a `size`-pixel face box whose corner is at `(x0, y0)`.
pub fn template_landmarks(x0: f64, y0: f64, size: f64) -> LandmarkSet {
    let points = template_unit()
        .into_iter()
        .map(|p| Point::new(x0 + p.x * size, y0 + p.y * size))
        .collect();
    let extent = (x0.max(y0) + size).ceil().max(1.0) as usize;
    LandmarkSet::new(points, LandmarkSource::InMemory, extent, extent).expect("template is valid")
}

/// Skin colours spanning the three tone categories.
pub const SKIN_TONES: [Rgb; 5] = [
    Rgb::new(232, 200, 180),
    Rgb::new(205, 165, 140),
    Rgb::new(176, 132, 102),
    Rgb::new(140, 98, 72),
    Rgb::new(98, 66, 48),
];

/// A deterministic synthetic face of `size`×`size` pixels.
pub fn synthetic_face(seed: u64, size: usize) -> (Image, LandmarkSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let skin = SKIN_TONES[rng.random_range(0..SKIN_TONES.len())];
    let background = Rgb::new(rng.random_range(20..90), rng.random_range(60..140), rng.random_range(90..200));
    let face_size = s * rng.random_range(0.74..0.8);
    let x0 = (s - face_size) / 2.0 + rng.random_range(-2.0..2.0);
    let y0 = s * 0.04 + rng.random_range(-2.0..2.0);
    let landmarks = template_landmarks(x0, y0, face_size);
    let pts = landmarks.points();

    let mut img = Image::filled(size, size, background).expect("positive size");
    let fill = |img: &mut Image, mask: &Mask, color: Rgb| {
        for (x, y) in mask.iter_set() {
            img.set(x, y, color);
        }
    };
    let region = |points: Vec<Point>| -> Mask {
        let boundary = interpolate_boundary(&points, 4).expect("template region");
        rasterize_interior(&boundary, size, size).expect("closed boundary")
    };

    let head: Vec<Point> = (0..32)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 32.0;
            Point::new(x0 + face_size * (0.5 + 0.43 * a.cos()), y0 + face_size * (0.5 + 0.48 * a.sin()))
        })
        .collect();
    fill(&mut img, &region(head), skin);

    let brow_color = Rgb::new(skin.0[0] / 3, skin.0[1] / 3, skin.0[2] / 3);
    let thickness = face_size * 0.025;
    for brow in [FaceRegion::RightEyebrow, FaceRegion::LeftEyebrow] {
        let line = landmarks.region(brow);
        let mut strip: Vec<Point> = line.iter().map(|p| Point::new(p.x, p.y - thickness)).collect();
        strip.extend(line.iter().rev().map(|p| Point::new(p.x, p.y + thickness)));
        fill(&mut img, &strip_mask(&strip, size), brow_color);
    }

    for (eye, center) in [
        (FaceRegion::RightEye, landmarks.right_eye_center()),
        (FaceRegion::LeftEye, landmarks.left_eye_center()),
    ] {
        fill(&mut img, &region(landmarks.region(eye)), Rgb::new(240, 238, 235));
        let r = face_size * 0.018;
        let iris: Vec<Point> = (0..8)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 8.0;
                Point::new(center.x + r * a.cos(), center.y + r * a.sin())
            })
            .collect();
        fill(&mut img, &region(iris), Rgb::new(50, 35, 30));
    }

    let nostril = Rgb::new(skin.0[0] / 4 * 3, skin.0[1] / 4 * 3, skin.0[2] / 4 * 3);
    fill(&mut img, &strip_mask(&pts[31..=35], size), nostril);

    let lips = region(landmarks.region(FaceRegion::OuterLip));
    let mouth = region(landmarks.region(FaceRegion::InnerLip));
    let lip_color = Rgb::new(
        (u16::from(skin.0[0]) * 9 / 10) as u8,
        (u16::from(skin.0[1]) * 6 / 10) as u8,
        (u16::from(skin.0[2]) * 6 / 10) as u8,
    );
    fill(&mut img, &lips.subtract(&mouth), lip_color);
    fill(&mut img, &mouth, Rgb::new(70, 30, 35));

    let mut bytes = img.into_bytes();
    for v in &mut bytes {
        let noise: i16 = rng.random_range(-5..=5);
        *v = (i16::from(*v) + noise).clamp(0, 255) as u8;
    }
    (Image::new(size, size, bytes).expect("same shape"), landmarks)
}

fn strip_mask(points: &[Point], size: usize) -> Mask {
    match Polyline::closed(points.to_vec()) {
        Ok(p) => rasterize_interior(&p, size, size).expect("closed"),
        Err(_) => Mask::empty(size, size),
    }
}
