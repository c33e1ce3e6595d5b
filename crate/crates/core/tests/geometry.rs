mod common;

use common::median::brute_force_median;
use common::reference_blend::reference_blend;
use ned_core::geometry::*;
use ned_core::inference::geometric_median_trace;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, ch: usize) -> Raster {
    Raster::from_fn(w, h, ch, |_, _, _| rng.random_range(0.0..1.0)).unwrap()
}

fn max_diff(a: &Raster, b: &Raster) -> f32 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

fn residual(t: &SimilarityTransform2D, src: &[[f64; 2]], dst: &[[f64; 2]]) -> f64 {
    src.iter()
        .zip(dst)
        .map(|(&p, q)| {
            let r = t.apply(p);
            (r[0] - q[0]).powi(2) + (r[1] - q[1]).powi(2)
        })
        .sum()
}

#[test]
fn procrustes_beats_random_search_on_noisy_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let src: Vec<[f64; 2]> = (0..68).map(|_| [rng.random_range(0.0..256.0), rng.random_range(0.0..256.0)]).collect();
    let truth = SimilarityTransform2D::new(1.3, 0.4, -12.0, 30.0).unwrap();
    let dst: Vec<[f64; 2]> = src
        .iter()
        .map(|&p| {
            let q = truth.apply(p);
            [q[0] + rng.random_range(-2.0..2.0), q[1] + rng.random_range(-2.0..2.0)]
        })
        .collect();
    let fit = estimate_similarity_points(&src, &dst).unwrap();
    let best = residual(&fit, &src, &dst);
    for i in 0..10_000 {
        let scale = if i % 2 == 0 { 1e-3 } else { 1e-6 };
        let candidate = SimilarityTransform2D {
            scale: fit.scale * (1.0 + scale * rng.random_range(-1.0..1.0)),
            rotation: fit.rotation + scale * rng.random_range(-1.0..1.0),
            tx: fit.tx + 100.0 * scale * rng.random_range(-1.0..1.0),
            ty: fit.ty + 100.0 * scale * rng.random_range(-1.0..1.0),
        };
        assert!(residual(&candidate, &src, &dst) >= best * (1.0 - 1e-12), "perturbation {i} improves the fit");
    }
}

#[test]
fn reflected_targets_still_give_a_rotation() {
    let src = [[0.0, 0.0], [4.0, 0.0], [0.0, 2.0], [3.0, 3.0]];
    let dst: Vec<[f64; 2]> = src.iter().map(|p| [-p[0], p[1]]).collect();
    let t = estimate_similarity_points(&src, &dst).unwrap();
    assert!(t.determinant() > 0.0);
}

#[test]
fn warp_round_trip_on_smooth_image() {
    let img = Raster::from_fn(96, 96, 3, |x, y, c| {
        let (x, y) = (x as f32 / 96.0, y as f32 / 96.0);
        0.5 + 0.4 * (3.0 * x + 2.0 * y + c as f32).sin() * (2.0 * y).cos()
    })
    .unwrap();
    let spin = SimilarityTransform2D::new(1.1, 0.2, 0.0, 0.0).unwrap();
    let c = spin.apply([48.0, 48.0]);
    let t = SimilarityTransform2D::new(1.1, 0.2, 50.0 - c[0], 45.0 - c[1]).unwrap();
    let there = warp(&img, &t, 96, 96).unwrap();
    let back = warp(&there, &t.inverse(), 96, 96).unwrap();
    let mut worst = 0.0f32;
    for y in 20..76 {
        for x in 20..76 {
            for c in 0..3 {
                worst = worst.max((back.get(x, y, c) - img.get(x, y, c)).abs());
            }
        }
    }
    assert!(worst < 2.0 / 255.0, "round trip error {worst}");
}

#[test]
fn blend_matches_direct_two_dimensional_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (w, h) in [(32, 32), (37, 21), (16, 45), (64, 48)] {
        let fg = random_image(&mut rng, w, h, 3);
        let bg = random_image(&mut rng, w, h, 3);
        let mask = random_image(&mut rng, w, h, 1);
        for levels in 1..=max_levels(w, h).min(5) {
            let ours = multiband_blend(&fg, &bg, &mask, levels).unwrap();
            let theirs = reference_blend(&fg, &bg, &mask, levels);
            let d = max_diff(&ours, &theirs);
            assert!(d < 1e-5, "{w}x{h}, {levels} levels: {d}");
        }
    }
}

#[test]
fn erosion_then_blur_pulls_the_half_level_inward() {
    let size = 81;
    let c = 40.0;
    let mask = Raster::from_fn(size, size, 1, |x, y, _| {
        let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
        if d <= 30.0 {
            1.0
        } else {
            0.0
        }
    })
    .unwrap();
    let soft = erode_soft(&mask, DEFAULT_ERODE_RADIUS).unwrap();
    let support = soft.data().iter().filter(|&&v| v >= 0.5).count() as f64;
    let radius = (support / std::f64::consts::PI).sqrt();
    assert!((radius - 22.0).abs() < 1.5, "half-level radius {radius}");
    assert!(soft.data().iter().all(|&v| (0.0..=1.0 + 1e-6).contains(&v)));
    assert!(soft.get(40, 40, 0) > 0.999);
    assert!(soft.get(40, 4, 0) < 1e-3);
}

#[test]
fn weiszfeld_agrees_with_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let k = rng.random_range(3..=7);
        let pts: Vec<[f64; 2]> = (0..k).map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect();
        let trace = geometric_median_trace(&pts.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap();
        let oracle = brute_force_median(&pts);
        for d in 0..2 {
            assert!((trace.point[d] - oracle[d]).abs() < 1e-2, "{pts:?}: {:?} vs {oracle:?}", trace.point);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_collapse_restores_image(w in 2usize..40, h in 2usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = random_image(&mut rng, w, h, 3);
        for levels in 1..=max_levels(w, h) {
            let p = build_pyramids(&img, levels).unwrap();
            prop_assert!(max_diff(&collapse(&p.laplacian).unwrap(), &img) < 1e-5);
        }
    }

    #[test]
    fn blending_an_image_with_itself_is_the_image(w in 4usize..40, h in 4usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = random_image(&mut rng, w, h, 3);
        let mask = random_image(&mut rng, w, h, 1);
        let out = multiband_blend(&img, &img, &mask, default_levels(w, h)).unwrap();
        prop_assert!(max_diff(&out, &img) < 1e-5);
    }

    #[test]
    fn similarity_recovered_from_clean_points(
        s in 0.1f64..10.0,
        theta in -3.1f64..3.1,
        tx in -100.0f64..100.0,
        ty in -100.0f64..100.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = SimilarityTransform2D::new(s, theta, tx, ty).unwrap();
        let src: Vec<[f64; 2]> = (0..12).map(|_| [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)]).collect();
        let dst: Vec<[f64; 2]> = src.iter().map(|&p| truth.apply(p)).collect();
        let t = estimate_similarity_points(&src, &dst).unwrap();
        prop_assert!((t.scale - s).abs() < 1e-8);
        prop_assert!((t.rotation - theta).abs() < 1e-8);
        prop_assert!((t.tx - tx).abs() < 1e-8 && (t.ty - ty).abs() < 1e-8);
        prop_assert!(t.determinant() > 0.0);
    }

    #[test]
    fn weiszfeld_objective_never_increases(pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..8)) {
        let pts: Vec<Vec<f64>> = pts.into_iter().map(|(x, y)| vec![x, y]).collect();
        let trace = geometric_median_trace(&pts).unwrap();
        prop_assert!(trace.objective.windows(2).all(|w| w[1] <= w[0]));
    }
}
