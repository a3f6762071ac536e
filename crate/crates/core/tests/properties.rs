use asplund::io::{load_image, save_image};
use asplund::matching::{extract_matches, regional_minima};
use asplund::metrics::{color_region_distance, d1_region, dinf_region, tolerance_region_distance};
use asplund::synth::{add_noise, apply_drift, global_relight, Axis, DriftSpec, NoiseSpec};
use asplund::{distance_map, DistanceMap, GrayScale, Image, MatchParams, Probe, ProbeShape, Rect, Region, Tolerance};
use proptest::prelude::*;

fn scale() -> GrayScale {
    GrayScale::default()
}

fn grey() -> impl Strategy<Value = f64> {
    0.0..255.999
}

/// Images with 1 or 3 channels whose values stay clear of the clamp even
/// after relighting by a factor in [0.5, 2].
fn image_pair() -> impl Strategy<Value = (Image, Image)> {
    (1usize..7, 1usize..7, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(|(w, h, ch)| {
        let n = w * h * ch;
        (
            prop::collection::vec(20.0..120.0f64, n),
            prop::collection::vec(20.0..120.0f64, n),
        )
            .prop_map(move |(a, b)| {
                (
                    Image::new(w, h, ch, a, scale()).unwrap(),
                    Image::new(w, h, ch, b, scale()).unwrap(),
                )
            })
    })
}

fn small_map() -> impl Strategy<Value = DistanceMap> {
    (2usize..10, 2usize..10).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop_oneof![4 => (0u8..6).prop_map(|v| v as f64 * 0.5), 1 => Just(f64::INFINITY)], w * h)
            .prop_map(move |v| DistanceMap::new(w, h, v).unwrap())
    })
}

/// 4-connected components of the valid pixels set in `bits`.
fn components(map: &DistanceMap, bits: &[bool]) -> Vec<Vec<usize>> {
    let (w, h) = (map.width(), map.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if seen[start] || !bits[start] || !map.is_valid_index(start) {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (x, y) = (i % w, i / w);
            let mut next = Vec::with_capacity(4);
            if x > 0 { next.push(i - 1); }
            if x + 1 < w { next.push(i + 1); }
            if y > 0 { next.push(i - w); }
            if y + 1 < h { next.push(i + w); }
            for j in next {
                if !seen[j] && bits[j] && map.is_valid_index(j) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        out.push(comp);
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn lip_operations_stay_in_range(a in grey(), b in grey(), l in 0.0..50.0f64) {
        let s = scale().add(a, b).unwrap();
        prop_assert!((0.0..256.0).contains(&s) && s >= a.max(b) - 1e-9);
        let m = scale().mul(l, a).unwrap();
        prop_assert!((0.0..256.0).contains(&m));
    }

    #[test]
    fn lip_mul_composes(a in 1.0..250.0f64, l in 0.1..4.0f64, k in 0.1..4.0f64) {
        let twice = scale().mul(l, scale().mul(k, a).unwrap()).unwrap();
        let once = scale().mul(l * k, a).unwrap();
        prop_assert!(close(twice, once), "{twice} vs {once}");
    }

    #[test]
    fn distance_is_symmetric_and_lighting_invariant((f, g) in image_pair(), alpha in 0.5..2.0f64) {
        let d = color_region_distance(&g, &f, &Region::Full).unwrap().distance();
        let back = color_region_distance(&f, &g, &Region::Full).unwrap().distance();
        prop_assert!(d >= 0.0 && close(d, back));
        let lit = global_relight(&f, alpha).unwrap();
        let d_lit = color_region_distance(&g, &lit, &Region::Full).unwrap().distance();
        prop_assert!((d - d_lit).abs() < 1e-6, "{d} vs {d_lit}");
    }

    #[test]
    fn larger_regions_give_larger_distances((f, g) in image_pair(), x in 0usize..7, y in 0usize..7) {
        let (x, y) = (x % f.width(), y % f.height());
        let rect = Rect::new(x, y, f.width() - x, f.height() - y).unwrap();
        let inner = color_region_distance(&g, &f, &Region::Rect(rect)).unwrap().distance();
        let single = color_region_distance(&g, &f, &Region::Points(vec![(x, y)])).unwrap().distance();
        let full = color_region_distance(&g, &f, &Region::Full).unwrap().distance();
        prop_assert!(single <= inner && inner <= full);
    }

    #[test]
    fn pixel_aggregates_are_bounded((f, g) in image_pair()) {
        let d1 = d1_region(&g, &f, &Region::Full).unwrap();
        let dinf = dinf_region(&g, &f, &Region::Full).unwrap();
        let global = color_region_distance(&g, &f, &Region::Full).unwrap().distance();
        prop_assert!(d1 <= dinf + 1e-12 && dinf <= global + 1e-12);
    }

    #[test]
    fn tolerance_never_increases_the_distance((f, g) in image_pair(), p in 0.5..1.0f64) {
        let full = Region::Full;
        let plain = color_region_distance(&g, &f, &full).unwrap();
        let one = tolerance_region_distance(&g, &f, &full, Tolerance::NONE).unwrap();
        prop_assert_eq!(one.bounds, plain);
        prop_assert!(one.discarded.is_empty());
        let loose = tolerance_region_distance(&g, &f, &full, Tolerance::new(p).unwrap()).unwrap();
        let looser = tolerance_region_distance(&g, &f, &full, Tolerance::new(p * 0.8).unwrap()).unwrap();
        prop_assert!(looser.distance() <= loose.distance() && loose.distance() <= plain.distance());
        prop_assert!(loose.discarded.len() <= Tolerance::new(p).unwrap().max_discard(f.pixel_count()));
    }

    #[test]
    fn h_minima_shrink_as_depth_grows(map in small_map(), h1 in 0.0..1.5f64, dh in 0.0..1.5f64) {
        let shallow = regional_minima(&map, h1).unwrap();
        let deep = regional_minima(&map, h1 + dh).unwrap();
        // Each connected deep minimum holds at least one shallow-minimum pixel.
        for component in components(&map, deep.bits()) {
            prop_assert!(component.iter().any(|&i| shallow.bits()[i]));
        }
        if map.valid_count() > 0 {
            prop_assert!(deep.count() > 0);
        }
    }

    #[test]
    fn extraction_is_deterministic_and_sorted(map in small_map(), h in 0.0..1.0f64, sep in 0usize..3) {
        let shape = ProbeShape { width: 3, height: 3, anchor: (1, 1) };
        let params = MatchParams { h, score_max: 2.0, min_separation: sep };
        let a = extract_matches(&map, shape, params).unwrap();
        let b = extract_matches(&map, shape, params).unwrap();
        prop_assert_eq!(&a, &b);
        for pair in a.matches.windows(2) {
            prop_assert!(pair[0].score <= pair[1].score);
        }
        for m in &a.matches {
            prop_assert!(m.score <= 2.0 && map.get(m.x, m.y) == m.score);
        }
        let text = a.to_text();
        prop_assert_eq!(text.parse::<asplund::MatchSet>().unwrap().to_text(), text);
    }

    #[test]
    fn eight_bit_images_round_trip(w in 1usize..9, h in 1usize..9, colour in any::<bool>(), seed in any::<u64>()) {
        let ch = if colour { 3 } else { 1 };
        let img = Image::from_fn(w, h, ch, scale(), |x, y, c| {
            ((seed >> ((x + 3 * y + c) % 56)) as u8) as f64
        }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for ext in [if colour { "ppm" } else { "pgm" }, "png"] {
            let path = dir.path().join(format!("img.{ext}"));
            save_image(&img, &path).unwrap();
            prop_assert_eq!(&load_image(&path, scale()).unwrap(), &img);
        }
    }

    #[test]
    fn noise_only_touches_selected_pixels(seed in any::<u64>(), density in 0.0..0.5f64) {
        let img = Image::from_fn(9, 7, 3, scale(), |x, y, c| (x * 20 + y * 9 + c * 5) as f64).unwrap();
        let spec = NoiseSpec { variance: 0.05, density, seed };
        let noisy = add_noise(&img, spec).unwrap();
        let changed = (0..img.pixel_count()).filter(|&i| img.pixel_at(i) != noisy.pixel_at(i)).count();
        prop_assert!(changed <= spec.affected(img.pixel_count()));
    }

    #[test]
    fn lighting_commutes_with_channel_extraction(alpha in 0.2..4.0f64, a in 0.5..2.0f64, b in 0.5..2.0f64, c in 0usize..3) {
        let img = Image::from_fn(6, 5, 3, scale(), |x, y, c| (x * 30 + y * 17 + c * 40) as f64 % 255.0).unwrap();
        let relit = global_relight(&img, alpha).unwrap();
        prop_assert_eq!(relit.channel(c).unwrap(), global_relight(&img.channel(c).unwrap(), alpha).unwrap());
        let drift = DriftSpec { axis: Axis::Horizontal, alpha_start: a, alpha_end: b };
        let drifted = apply_drift(&img, drift).unwrap();
        prop_assert_eq!(drifted.channel(c).unwrap(), apply_drift(&img.channel(c).unwrap(), drift).unwrap());
    }
}

#[test]
fn self_probe_scores_zero_in_the_map() {
    let img = Image::from_fn(14, 11, 3, scale(), |x, y, c| ((x * 13 + y * 29 + c * 71) % 240 + 5) as f64).unwrap();
    let probe = Probe::new(img.crop(4, 3, 5, 4).unwrap());
    let map = distance_map(&img, &probe).unwrap();
    assert_eq!(map.get(6, 4), 0.0);
}
