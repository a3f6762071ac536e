//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line and then
//! asserts. Run with `cargo test -p asplund --test acceptance -- --nocapture`
//! to see the report.

use asplund::matching::{extract_matches, regional_minima};
use asplund::metrics::{
    color_region_distance, gray_region_bounds, gray_region_distance, pixel_color_bounds, pixel_color_distance,
    tolerance_region_distance,
};
use asplund::synth::{add_noise, apply_drift, global_relight, Axis, BrickLayout, DiscLayout, DriftSpec, NoiseSpec};
use asplund::{distance_map, distance_map_tol, DistanceMap, GrayScale, Image, MapEngine, MatchParams, Probe, Region, Tolerance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id}: {name} -- {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn s() -> GrayScale {
    GrayScale::default()
}

/// Base values for which every LIP multiple by [0.2, 5] stays inside the
/// clamp interval [1, 255].
const CLAMP_FREE: std::ops::Range<f64> = 5.0..170.0;

#[test]
fn c1_lip_algebra() {
    let scale = s();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 10_000;
    // Transmittance lives in (0, 1]: compared with absolute error there, and
    // with relative error on grey values.
    let (mut hom_t, mut pow_t, mut hom_v, mut pow_v, mut assoc, mut dbl) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let a = rng.random_range(0.0..255.999);
        let b = rng.random_range(0.0..255.999);
        let lambda = rng.random_range(0.0..4.0);
        let kappa = rng.random_range(0.0..4.0);

        let t = |v| scale.transmittance(v).unwrap();
        let sum = scale.add(a, b).unwrap();
        assert!(scale.contains(sum));
        hom_t = hom_t.max((t(sum) - t(a) * t(b)).abs());
        hom_v = hom_v.max(rel_err(sum, scale.from_transmittance(t(a) * t(b))));

        let prod = scale.mul(lambda, a).unwrap();
        assert!(scale.contains(prod));
        pow_t = pow_t.max((t(prod) - t(a).powf(lambda)).abs());
        pow_v = pow_v.max(rel_err(prod, scale.from_transmittance(t(a).powf(lambda))));

        let nested = scale.mul(lambda, scale.mul(kappa, a).unwrap()).unwrap();
        let direct = scale.mul(lambda * kappa, a).unwrap();
        assert!(scale.contains(nested));
        assert!(scale.contains(direct));
        assoc = assoc.max(rel_err(nested, direct));

        dbl = dbl.max(rel_err(scale.add(a, a).unwrap(), scale.mul(2.0, a).unwrap()));
    }
    let pass = hom_t <= 1e-12 && pow_t <= 1e-12 && hom_v <= 1e-9 && pow_v <= 1e-9 && assoc <= 1e-9 && dbl <= 1e-9;
    report(
        1,
        "LIP algebra",
        pass,
        format!(
            "{n} cases each; transmittance abs err: homomorphism {hom_t:.1e}, power law {pow_t:.1e}; value rel err: homomorphism {hom_v:.1e}, power law {pow_v:.1e}, associativity {assoc:.1e}, doubling {dbl:.1e}"
        ),
    );
}

/// `inf { k : k (x) probe >= value }` found by bisection on the definition,
/// without the closed-form ratio.
fn lambda_by_bisection(probe: &[f64], value: &[f64], scale: &GrayScale) -> f64 {
    let holds = |k: f64| {
        probe
            .iter()
            .zip(value)
            .all(|(&t, &f)| scale.mul(k, t).unwrap() >= f)
    };
    let (mut lo, mut hi) = (0.0, 64.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[test]
fn c2_metric_properties() {
    let scale = s();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 1_000;
    let mut worst = 0.0f64;
    let mut negative = 0;
    let mut bisection = 0.0f64;
    let relit = |img: &Image, k: f64| global_relight(img, k).unwrap();
    for i in 0..n {
        let (w, h) = (rng.random_range(1..6), rng.random_range(1..6));
        let region = Region::Full;
        let alpha = rng.random_range(0.2..5.0);
        let beta = rng.random_range(0.2..5.0);

        // Grey-scale region distance.
        let f = Image::from_fn(w, h, 1, scale, |_, _, _| rng.random_range(CLAMP_FREE)).unwrap();
        let g = Image::from_fn(w, h, 1, scale, |_, _, _| rng.random_range(CLAMP_FREE)).unwrap();
        let d = gray_region_distance(&f, &g, &region).unwrap();
        negative += (d < 0.0) as usize;
        worst = worst.max((gray_region_distance(&g, &f, &region).unwrap() - d).abs());
        worst = worst.max(gray_region_distance(&relit(&g, alpha), &g, &region).unwrap().abs());
        worst = worst.max((gray_region_distance(&relit(&f, alpha), &relit(&g, beta), &region).unwrap() - d).abs());

        // Pixel colour distance.
        let c1: Vec<f64> = (0..3).map(|_| rng.random_range(CLAMP_FREE)).collect();
        let c2: Vec<f64> = (0..3).map(|_| rng.random_range(CLAMP_FREE)).collect();
        let scaled = |c: &[f64], k: f64| c.iter().map(|&v| scale.mul(k, v).unwrap()).collect::<Vec<_>>();
        let d = pixel_color_distance(&c1, &c2, &scale).unwrap();
        negative += (d < 0.0) as usize;
        worst = worst.max((pixel_color_distance(&c2, &c1, &scale).unwrap() - d).abs());
        worst = worst.max(pixel_color_distance(&c1, &scaled(&c1, alpha), &scale).unwrap().abs());
        worst = worst.max((pixel_color_distance(&scaled(&c1, alpha), &scaled(&c2, beta), &scale).unwrap() - d).abs());

        // Global region colour distance.
        let cf = Image::from_fn(w, h, 3, scale, |_, _, _| rng.random_range(CLAMP_FREE)).unwrap();
        let cg = Image::from_fn(w, h, 3, scale, |_, _, _| rng.random_range(CLAMP_FREE)).unwrap();
        let d = color_region_distance(&cf, &cg, &region).unwrap().distance();
        negative += (d < 0.0) as usize;
        worst = worst.max((color_region_distance(&cg, &cf, &region).unwrap().distance() - d).abs());
        worst = worst.max(color_region_distance(&cf, &relit(&cf, alpha), &region).unwrap().distance().abs());
        let dd = color_region_distance(&relit(&cf, alpha), &relit(&cg, beta), &region).unwrap().distance();
        worst = worst.max((dd - d).abs());

        // Closed-form upper bound against the definition, on a subsample.
        if i % 10 == 0 {
            let closed = pixel_color_bounds(&c1, &c2, &scale).unwrap().lambda;
            bisection = bisection.max(rel_err(closed, lambda_by_bisection(&c1, &c2, &scale)));
            let gb = gray_region_bounds(&f, &g, &region).unwrap().lambda;
            bisection = bisection.max(rel_err(gb, lambda_by_bisection(g.data(), f.data(), &scale)));
        }
    }
    let pass = negative == 0 && worst <= 1e-9 && bisection <= 1e-9;
    report(
        2,
        "metric properties (grey region, pixel colour, colour region)",
        pass,
        format!(
            "{n} instances; negative distances {negative}; max deviation {worst:.1e}; closed form vs bisection {bisection:.1e}"
        ),
    );
}

fn brute_force_tolerance(probe: &Image, value: &Image, k: usize) -> f64 {
    let n = probe.pixel_count();
    let points: Vec<(usize, usize)> = (0..n).map(|i| (i % probe.width(), i / probe.width())).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize > k {
            continue;
        }
        let kept: Vec<(usize, usize)> = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| points[i]).collect();
        let d = color_region_distance(probe, value, &Region::Points(kept)).unwrap().distance();
        best = best.min(d);
    }
    best
}

#[test]
fn c3_tolerance_oracle() {
    let scale = s();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 500;
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < n {
        let size = rng.random_range(1..=10);
        let channels = if rng.random_bool(0.5) { 1 } else { 3 };
        let k = rng.random_range(0..=3usize);
        if k >= size {
            continue;
        }
        // p chosen so that floor((1 - p) * size) == k.
        let p = 1.0 - (k as f64 + 0.5) / size as f64;
        let tol = Tolerance::new(p).unwrap();
        assert_eq!(tol.max_discard(size), k);
        let probe = Image::from_fn(size, 1, channels, scale, |_, _, _| rng.random_range(1.0..255.0)).unwrap();
        let value = Image::from_fn(size, 1, channels, scale, |_, _, _| rng.random_range(1.0..255.0)).unwrap();
        let got = tolerance_region_distance(&probe, &value, &Region::Full, tol).unwrap();
        let want = brute_force_tolerance(&probe, &value, k);
        worst = worst.max((got.distance() - want).abs());
        // The reported discard set must realize the reported distance.
        let kept: Vec<(usize, usize)> = (0..size).filter(|i| !got.discarded.contains(i)).map(|i| (i, 0)).collect();
        let realized = color_region_distance(&probe, &value, &Region::Points(kept)).unwrap();
        assert_eq!(realized, got.bounds);
        assert!(got.discarded.len() <= k);
        checked += 1;
    }
    report(
        3,
        "tolerance split search equals brute-force subset minimum",
        worst <= 1e-12,
        format!("{n} instances (#region <= 10, L in {{1, 3}}, K <= 3); max |diff| {worst:.1e}"),
    );
}

#[test]
fn c4_outlier_rejection() {
    let scale = s();
    // A 10-point colour signal close to a homothetic copy of the probe (the
    // scalar creeps from 1.2 to 1.47), except for two outliers: one darker
    // spike, one brighter dip.
    let probe_vals: Vec<[f64; 3]> = (0..10)
        .map(|i| {
            let t = i as f64;
            [60.0 + 6.0 * t, 90.0 - 3.0 * t, 40.0 + 2.0 * (t - 4.5).powi(2)]
        })
        .collect();
    let mut value_vals: Vec<[f64; 3]> = probe_vals
        .iter()
        .enumerate()
        .map(|(i, c)| c.map(|v| scale.mul(1.2 + 0.03 * i as f64, v).unwrap()))
        .collect();
    value_vals[3] = [200.0, 190.0, 185.0];
    value_vals[7] = [20.0, 15.0, 18.0];
    let flat = |v: &[[f64; 3]]| v.iter().flatten().copied().collect::<Vec<_>>();
    let probe = Image::new(10, 1, 3, flat(&probe_vals), scale).unwrap();
    let value = Image::new(10, 1, 3, flat(&value_vals), scale).unwrap();

    let plain = color_region_distance(&probe, &value, &Region::Full).unwrap();
    let tol = tolerance_region_distance(&probe, &value, &Region::Full, Tolerance::new(0.8).unwrap()).unwrap();
    let pass = tol.discarded == vec![3, 7] && tol.distance() < plain.distance() && tol.distance() > 0.0;
    report(
        4,
        "outlier rejection (10 points, two outliers, p = 80%)",
        pass,
        format!(
            "d = {:.6} (mu {:.6}, lambda {:.6}); d_tol = {:.6} (mu' {:.6}, lambda' {:.6}); discarded {:?}",
            plain.distance(),
            plain.mu,
            plain.lambda,
            tol.distance(),
            tol.bounds.mu,
            tol.bounds.lambda,
            tol.discarded
        ),
    );
}

/// Double-loop reference map: ratio extrema over every template sample.
fn reference_map(image: &Image, probe: &Image) -> Vec<f64> {
    let scale = image.scale();
    let (ax, ay) = ((probe.width() - 1) / 2, (probe.height() - 1) / 2);
    let mut out = vec![f64::INFINITY; image.pixel_count()];
    for y in ay..ay + image.height() - probe.height() + 1 {
        for x in ax..ax + image.width() - probe.width() + 1 {
            let (mut mu, mut lambda) = (f64::INFINITY, f64::NEG_INFINITY);
            for ty in 0..probe.height() {
                for tx in 0..probe.width() {
                    for c in 0..image.channels() {
                        let r = scale.ratio(image.get(x - ax + tx, y - ay + ty, c), probe.get(tx, ty, c));
                        mu = mu.min(r);
                        lambda = lambda.max(r);
                    }
                }
            }
            out[y * image.width() + x] = (lambda / mu).ln();
        }
    }
    out
}

#[test]
fn c5_map_oracle() {
    let scale = s();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cases = 20;
    let mut worst = 0.0f64;
    let mut geometry_ok = true;
    for _ in 0..cases {
        let (w, h) = (rng.random_range(5..=32), rng.random_range(5..=32));
        let (tw, th) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let ch = if rng.random_bool(0.5) { 1 } else { 3 };
        let image = Image::from_fn(w, h, ch, scale, |_, _, _| rng.random_range(0.0..256.0)).unwrap();
        let template = Image::from_fn(tw, th, ch, scale, |_, _, _| rng.random_range(0.0..256.0)).unwrap();
        let map = distance_map(&image, &Probe::new(template.clone())).unwrap();
        let reference = reference_map(&image, &template);
        for (a, b) in map.values().iter().zip(&reference) {
            if a.is_finite() != b.is_finite() {
                geometry_ok = false;
            } else if a.is_finite() {
                worst = worst.max((a - b).abs());
            }
        }
        geometry_ok &= map.valid_count() == (w - tw + 1) * (h - th + 1);
    }
    report(
        5,
        "distance map equals double-loop reference",
        geometry_ok && worst <= 1e-12,
        format!("{cases} cases up to 32x32 / 5x5; valid geometry exact: {geometry_ok}; max |diff| {worst:.1e}"),
    );
}

fn truth_set(points: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
    points.iter().copied().collect()
}

#[test]
fn c6_relit_discs() {
    let scale = s();
    let scene = DiscLayout { seed: 5, ..Default::default() }.generate(scale).unwrap();
    let probe = scene.probe();
    let dark = global_relight(&scene.image, 3.0).unwrap();
    let bright_map = distance_map(&scene.image, &probe).unwrap();
    let dark_map = distance_map(&dark, &probe).unwrap();
    let max_diff = bright_map
        .values()
        .iter()
        .zip(dark_map.values())
        .filter(|(a, _)| a.is_finite())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let params = MatchParams { score_max: 0.05, ..Default::default() };
    let found = extract_matches(&dark_map, probe.shape(), params).unwrap();
    let found_set: BTreeSet<_> = found.matches.iter().map(|m| (m.x, m.y)).collect();
    let truth = truth_set(&scene.truth);
    let false_pos = found_set.difference(&truth).count();
    let missed = truth.difference(&found_set).count();
    let pass = missed == 0 && false_pos == 0 && max_diff <= 1e-6;
    report(
        6,
        "relit discs: bright probe on dark (alpha = 3) discs",
        pass,
        format!(
            "{} discs + {} distractors; recovered {}/{}, false positives {false_pos}; max |dark - bright| map diff {max_diff:.1e}",
            scene.truth.len(),
            DiscLayout::default().distractors,
            truth.len() - missed,
            truth.len()
        ),
    );
}

#[test]
fn c7_noisy_drifting_bricks() {
    let scale = s();
    let seeds = 100;
    let h = 0.1;
    let tolerance = Tolerance::new(0.98).unwrap();
    let drift = DriftSpec { axis: Axis::Vertical, alpha_start: 1.0, alpha_end: 2.0 };
    let mut plain_failed = 0;
    let mut recovered = 0;
    let mut worst_tol_score = 0.0f64;
    for seed in 0..seeds {
        let scene = BrickLayout { seed, ..Default::default() }.generate(scale).unwrap();
        let probe = scene.probe();
        let lit = apply_drift(&scene.image, drift).unwrap();
        let noisy = add_noise(&lit, NoiseSpec { variance: 2.6, density: 0.01, seed: 10_000 + seed }).unwrap();

        let plain = distance_map(&noisy, &probe).unwrap();
        let plain_worst = scene.truth.iter().map(|&(x, y)| plain.get(x, y)).fold(0.0, f64::max);
        plain_failed += (plain_worst > 0.2) as usize;

        let tol = distance_map_tol(&noisy, &probe, tolerance).unwrap();
        let mask = regional_minima(&tol, h).unwrap();
        if scene.truth.iter().all(|&(x, y)| mask.get(x, y)) {
            recovered += 1;
        }
        worst_tol_score = scene
            .truth
            .iter()
            .map(|&(x, y)| tol.get(x, y))
            .fold(worst_tol_score, f64::max);
    }
    let pass = plain_failed >= 95 && recovered >= 95;
    report(
        7,
        "drifting bricks: drift 1 -> 2 + 1% noise, p = 98%",
        pass,
        format!(
            "{seeds} seeds; plain map self-match score > 0.2 in {plain_failed}; all bricks recovered as {h}-minima in {recovered}; worst tolerant truth score {worst_tol_score:.3}"
        ),
    );
}

/// Regional minima by definition: flood each plateau and compare it with its
/// outer neighbours.
fn brute_force_minima(map: &DistanceMap) -> Vec<bool> {
    let (w, h) = (map.width(), map.height());
    let mut out = vec![false; w * h];
    for start in 0..w * h {
        if !map.is_valid_index(start) {
            continue;
        }
        let level = map.values()[start];
        let mut comp = vec![start];
        let mut inside = vec![false; w * h];
        inside[start] = true;
        let mut i = 0;
        while i < comp.len() {
            let p = comp[i];
            let (x, y) = ((p % w) as i64, (p / w) as i64);
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if !inside[q] && map.values()[q] == level {
                    inside[q] = true;
                    comp.push(q);
                }
            }
            i += 1;
        }
        let mut has_lower = false;
        for &p in &comp {
            let (x, y) = ((p % w) as i64, (p / w) as i64);
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let v = map.values()[ny as usize * w + nx as usize];
                if v.is_finite() && !inside[ny as usize * w + nx as usize] {
                    has_lower |= v < level;
                }
            }
        }
        // Every outer neighbour is strictly higher (equal ones joined the
        // plateau); a plateau walled in by invalid pixels also qualifies.
        out[start] = !has_lower;
    }
    out
}

#[test]
fn c8_regional_minima_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let maps = 100;
    let mut mismatches = 0;
    let mut total_minima = 0;
    for _ in 0..maps {
        // Few levels so that plateaus are common; a random border is invalid.
        let levels = rng.random_range(2..6);
        let values: Vec<f64> = (0..256)
            .map(|i| {
                let (x, y) = (i % 16, i / 16);
                if x == 0 && rng.random_bool(0.5) || y == 15 && rng.random_bool(0.3) {
                    f64::INFINITY
                } else {
                    rng.random_range(0..levels) as f64 * 0.25
                }
            })
            .collect();
        let map = DistanceMap::new(16, 16, values).unwrap();
        let mask = regional_minima(&map, 0.0).unwrap();
        let oracle = brute_force_minima(&map);
        mismatches += mask.bits().iter().zip(&oracle).filter(|(a, b)| a != b).count();
        total_minima += mask.count();
    }
    report(
        8,
        "regional minima (h = 0) equal brute-force plateau analysis",
        mismatches == 0,
        format!("{maps} random 16x16 maps, {total_minima} minimum pixels, {mismatches} mismatching pixels"),
    );
}

#[test]
fn c9_thread_determinism() {
    let scale = s();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let image = Image::from_fn(64, 48, 3, scale, |_, _, _| rng.random_range(0.0..256.0)).unwrap();
    let probe = Probe::new(image.crop(20, 10, 9, 7).unwrap());
    let tol = Tolerance::new(0.9).unwrap();
    let run = |threads| {
        let engine = MapEngine::with_threads(threads);
        (
            engine.distance_map(&image, &probe).unwrap(),
            engine.distance_map_tol(&image, &probe, tol).unwrap(),
        )
    };
    let bits = |m: &DistanceMap| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let (p1, t1) = run(1);
    let mut identical = true;
    for threads in [4, 8] {
        let (p, t) = run(threads);
        identical &= bits(&p) == bits(&p1) && bits(&t) == bits(&t1);
    }
    let (p, _) = run(1);
    identical &= bits(&p) == bits(&p1);
    report(
        9,
        "bitwise-identical maps across thread counts",
        identical,
        "threads {1, 4, 8}, plain and tolerant maps, 64x48x3 image, 9x7 probe".to_string(),
    );
}
