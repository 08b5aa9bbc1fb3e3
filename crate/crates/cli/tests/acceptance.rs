//! Acceptance suite: one PASS/FAIL line per criterion, each with a pinned
//! tolerance and a runtime limit. Exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use facemt_core::dataset::{balance_by_gender, split, Gender, Label, Manifest, SampleRecord, SplitRatio};
use facemt_core::imaging::{kernel_radius, rasterize_interior, Point, Polyline, Rgb};
use facemt_core::makeup::{apply_component, apply_test_case, test_case_mask, Component, StyleConfig, TestCaseId};
use facemt_core::metrics::{bias_factor, f1_score, Favored};
use facemt_core::synthetic::synthetic_face;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FACEMT: &str = env!("CARGO_BIN_EXE_facemt");

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn criterion(name: &str, limit: Duration, body: fn() -> Outcome) -> bool {
    let start = Instant::now();
    let result = std::panic::catch_unwind(body).unwrap_or_else(|_| Err("panicked".into()));
    let elapsed = start.elapsed();
    let (ok, detail) = match result {
        Ok(d) if elapsed <= limit => (true, d),
        Ok(d) => (false, format!("{d}; too slow")),
        Err(d) => (false, d),
    };
    println!(
        "{} {name} ({:.2}s, limit {}s): {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// (precision, recall, published F1) for sixteen published rows.
const F1_CELLS: [(f64, f64, f64); 16] = [
    (83.71, 90.16, 86.82),
    (88.59, 92.2, 90.36),
    (93.62, 28.3, 43.46),
    (95.61, 44.22, 60.47),
    (94.11, 6.5, 12.16),
    (97.96, 24.34, 38.99),
    (96.25, 7.81, 14.45),
    (98.58, 28.1, 43.73),
    (92.11, 21.51, 34.88),
    (95.6, 50.71, 66.27),
    (82.21, 86.21, 84.16),
    (87.94, 90.67, 89.28),
    (80.83, 85.18, 82.95),
    (87.84, 89.84, 88.83),
    (94.23, 10.15, 18.33),
    (97.57, 33.36, 49.72),
];
const F1_TOLERANCE: f64 = 0.02;

fn metric_arithmetic() -> Outcome {
    let mut worst = 0.0f64;
    for (p, r, want) in F1_CELLS {
        let got = f1_score(p, r).ok_or("undefined F1")?;
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= F1_TOLERANCE, || format!("P={p} R={r}: F1 {got:.4} vs {want}"))?;
    }
    Ok(format!("16/16 F1 cells within ±{F1_TOLERANCE} (worst {worst:.4})"))
}

fn bias_arithmetic() -> Outcome {
    let cases = [(83.35, 87.44, "4.09"), (83.02, 87.08, "4.06"), (83.22, 87.22, "4.00"), (86.36, 90.1, "3.74")];
    for (m, f, want) in cases {
        let b = bias_factor(m, f);
        let got = format!("{:.2}", b.bias_factor);
        ensure(got == want, || format!("({m}, {f}) -> {got}, expected {want}"))?;
        ensure(b.favored_gender == Favored::Female, || format!("({m}, {f}) favoured {:?}", b.favored_gender))?;
    }
    Ok("4/4 bias factors exact to 2 decimals, all favour female".into())
}

fn pnpoly(poly: &[(f64, f64)], px: f64, py: f64) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn raster_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pixels = 0usize;
    for case in 0..1000 {
        let w = rng.random_range(1..=32usize);
        let h = rng.random_range(1..=32usize);
        let n = rng.random_range(3..=8usize);
        let poly: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(-2.0..w as f64 + 2.0), rng.random_range(-2.0..h as f64 + 2.0)))
            .collect();
        let pts = poly.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let mask = rasterize_interior(&Polyline::closed(pts).map_err(|e| e.to_string())?, w, h).map_err(|e| e.to_string())?;
        for y in 0..h {
            for x in 0..w {
                pixels += 1;
                let want = pnpoly(&poly, x as f64 + 0.5, y as f64 + 0.5);
                ensure(mask.get(x, y) == want, || format!("polygon {case}: pixel ({x},{y}) disagrees"))?;
            }
        }
    }
    Ok(format!("1000 polygons, {pixels} pixels, 100% agreement"))
}

fn makeup_locality() -> Outcome {
    let style = StyleConfig::builtin();
    let radius = kernel_radius(style.geometry.blur_sigma);
    let mut checked = 0;
    for seed in 0..10 {
        let (img, lm) = synthetic_face(seed, 128);
        for tc in TestCaseId::ALL {
            let out = apply_test_case(&img, &lm, tc, &style).map_err(|e| format!("face {seed} {tc}: {e}"))?;
            let allowed = test_case_mask(tc, style.layout, &lm, &style.geometry, 128, 128, radius);
            let diff = img.diff_pixels(&out.image);
            ensure(!diff.is_empty(), || format!("face {seed} {tc}: nothing changed"))?;
            if let Some(&(x, y)) = diff.iter().find(|&&(x, y)| !allowed.get(x, y)) {
                return Err(format!("face {seed} {tc}: pixel ({x},{y}) changed outside the dilated mask"));
            }
            checked += 1;
        }
        for c in Component::ORDER {
            let same = apply_component(&img, &lm, c, Rgb::new(255, 0, 0), 0.0, style.geometry.blur_sigma, &style.geometry)
                .map_err(|e| e.to_string())?;
            ensure(same == img, || format!("face {seed}: alpha 0 {c} altered pixels"))?;
        }
    }
    Ok(format!("{checked} face x test-case runs local; 40 alpha-0 runs bit-identical"))
}

fn run_binary(manifest: &Path, endpoint: &str, out: &Path) -> Result<i32, String> {
    let o = Command::new(FACEMT)
        .args(["run", "--manifest"])
        .arg(manifest)
        .args(["--endpoint", endpoint, "--out"])
        .arg(out)
        .env_remove("FACEMT_STYLE")
        .output()
        .map_err(|e| e.to_string())?;
    o.status.code().ok_or_else(|| "killed by signal".into())
}

fn read_report(dir: &Path) -> Result<(String, serde_json::Value), String> {
    let text = std::fs::read_to_string(dir.join("report.json")).map_err(|e| e.to_string())?;
    let v = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok((text, v))
}

fn mt_end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let synth = Command::new(FACEMT)
        .args(["synth", "--count", "10", "--size", "128", "--out"])
        .arg(&data)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(synth.status.success(), || "synth failed".into())?;
    let manifest = data.join("manifest.csv");

    let code = run_binary(&manifest, "stub:constant:0.9", &tmp.path().join("c1"))?;
    ensure(code == 0, || format!("constant stub exited {code}"))?;
    run_binary(&manifest, "stub:constant:0.9", &tmp.path().join("c2"))?;
    let (c1, report) = read_report(&tmp.path().join("c1"))?;
    let (c2, _) = read_report(&tmp.path().join("c2"))?;
    ensure(c1 == c2, || "constant-stub reports differ between runs".into())?;
    let relations = report["relations"].as_array().ok_or("no relations")?;
    ensure(relations.len() == 3 && relations.iter().all(|r| r["verdict"] == "satisfied"), || {
        "constant stub: not every relation satisfied".into()
    })?;

    let code = run_binary(&manifest, "stub:pixel-sensitive", &tmp.path().join("p1"))?;
    ensure(code == 1, || format!("pixel-sensitive stub exited {code}"))?;
    run_binary(&manifest, "stub:pixel-sensitive", &tmp.path().join("p2"))?;
    let (p1, report) = read_report(&tmp.path().join("p1"))?;
    let (p2, _) = read_report(&tmp.path().join("p2"))?;
    ensure(p1 == p2, || "pixel-sensitive reports differ between runs".into())?;
    let relations = report["relations"].as_array().ok_or("no relations")?;
    ensure(relations.len() == 3 && relations.iter().all(|r| r["verdict"] == "violated"), || {
        "pixel-sensitive stub: not every relation violated".into()
    })?;
    let mut rates = 0;
    for tc in relations.iter().flat_map(|r| r["test_cases"].as_array().into_iter().flatten()) {
        for g in tc["per_gender"].as_array().ok_or("no per-gender rows")? {
            ensure(g["changed_images"].as_u64() > Some(0), || format!("{}: no changed images", tc["test_case"]))?;
            ensure(g["flip_rate_changed"].as_f64() == Some(1.0), || {
                format!("{} {}: flip rate among changed images {}", tc["test_case"], g["gender"], g["flip_rate_changed"])
            })?;
            rates += 1;
        }
    }
    Ok(format!("constant: exit 0, 3/3 satisfied; pixel-sensitive: exit 1, 3/3 violated, {rates}/14 flip rates = 1.0; reports byte-identical across reruns"))
}

fn dataset_protocol() -> Outcome {
    let mut records = Vec::new();
    for g in Gender::ALL {
        for l in Label::ALL {
            for i in 0..1375 {
                records.push(SampleRecord::new(format!("{g}/{l}/{i:05}.png"), l, g));
            }
        }
    }
    let manifest = Manifest::new(records, "synthetic 5500").map_err(|e| e.to_string())?;
    let balanced = balance_by_gender(&manifest, 42).map_err(|e| e.to_string())?;
    let set = split(&balanced, &SplitRatio::default(), 42).map_err(|e| e.to_string())?;
    ensure(set.is_disjoint(), || "splits overlap".into())?;
    let total = set.train.len() + set.validation.len() + set.test.len();
    ensure(total == balanced.len(), || format!("splits hold {total} of {}", balanced.len()))?;
    for g in Gender::ALL {
        for l in Label::ALL {
            let n = balanced.counts()[&(g, l)] as f64;
            let (tr, va, te) = (set.train.counts()[&(g, l)], set.validation.counts()[&(g, l)], set.test.counts()[&(g, l)]);
            let exact_test = n * 2.0 / 5.0;
            let exact_val = (n - te as f64) * 0.10;
            ensure((te as f64 - exact_test).abs() <= 1.0, || format!("{g}/{l}: test {te} vs {exact_test}"))?;
            ensure((va as f64 - exact_val).abs() <= 1.0, || format!("{g}/{l}: validation {va} vs {exact_val}"))?;
            ensure(tr + va + te == n as usize, || format!("{g}/{l}: counts do not add up"))?;
        }
    }
    for part in [&set.train, &set.validation, &set.test] {
        for l in Label::ALL {
            let c = part.counts();
            ensure(c[&(Gender::Male, l)] == c[&(Gender::Female, l)], || format!("unequal genders in {}", part.provenance))?;
        }
    }
    Ok(format!(
        "train {} / validation {} / test {} (ideal 2970/330/2200, each stratum within ±1); genders equal in every split",
        set.train.len(),
        set.validation.len(),
        set.test.len()
    ))
}

fn main() {
    let criteria: [Criterion; 6] = [
        ("metric arithmetic: F1 from published precision/recall", 1, metric_arithmetic),
        ("bias factor: published accuracy pairs", 1, bias_arithmetic),
        ("rasterization oracle: scanline vs point-in-polygon", 10, raster_oracle),
        ("makeup locality: diffs inside dilated masks, alpha 0 identity", 30, makeup_locality),
        ("metamorphic end-to-end with stub classifiers", 60, mt_end_to_end),
        ("dataset protocol: balance + 3:2 split + 10% validation", 5, dataset_protocol),
    ];
    let mut failed = 0;
    for (name, secs, body) in criteria {
        if !criterion(name, Duration::from_secs(secs), body) {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
