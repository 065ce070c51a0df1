use dpmean::bounds::add_remove_minmax_leading;
use dpmean::geometry::{
    ball_polygon, covers_sensitivity, normalize_dataset, normalized_sensitivity, SensitivitySegment, Transform2x2,
};
use dpmean::harness::estimate_mse;
use dpmean::{derive_stream, BoundedDataset, Mechanism, PrivacyBudget};

/// Entries uniform on [-3, 3]; near-singular draws (|det| < 1e-3) are
/// rejected and redrawn.
fn random_transforms(count: usize, seed: u64) -> Vec<Transform2x2> {
    let mut c = derive_stream(seed, 0).cursor();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut e = [0.0; 4];
        for v in &mut e {
            *v = -3.0 + 6.0 * c.uniform_open();
        }
        if (e[0] * e[3] - e[1] * e[2]).abs() < 1e-3 {
            continue;
        }
        out.push(Transform2x2::new(e[0], e[1], e[2], e[3]).unwrap());
    }
    out
}

#[test]
fn no_random_transform_beats_the_parallelogram() {
    let seg = SensitivitySegment::unit();
    let best = normalized_sensitivity(&Transform2x2::TRANSFORMED, &seg).unwrap();
    assert_eq!(best, 1.0);
    let mut smallest = f64::INFINITY;
    for t in random_transforms(10_000, 31) {
        let r = normalized_sensitivity(&t, &seg).unwrap();
        smallest = smallest.min(r);
        let poly = ball_polygon(&t, r * t.det().abs().sqrt()).unwrap();
        assert!(covers_sensitivity(&poly, &seg), "{t:?}");
        assert!(poly.area() >= 2.0 * (1.0 - 1e-9), "{t:?} area {}", poly.area());
    }
    assert!(smallest >= 1.0 - 1e-12, "smallest normalized radius {smallest}");
}

#[test]
fn shrunk_balls_stop_covering() {
    let seg = SensitivitySegment::unit();
    for t in random_transforms(1000, 32) {
        let r = dpmean::geometry::l1_sensitivity_under(&t, &seg).unwrap();
        assert!(covers_sensitivity(&ball_polygon(&t, r).unwrap(), &seg));
        assert!(!covers_sensitivity(&ball_polygon(&t, r * 0.99).unwrap(), &seg), "{t:?}");
    }
}

fn spread(n: usize, lo: f64, hi: f64) -> BoundedDataset {
    let vals = (0..n).map(|i| lo + (hi - lo) * ((i * 37) % n) as f64 / (n - 1) as f64).collect();
    BoundedDataset::new(vals, lo, hi).unwrap()
}

#[test]
fn mse_scales_with_squared_width() {
    let eps = PrivacyBudget::new(0.4).unwrap();
    for (lo, hi) in [(2.0, 4.0), (-7.5, -1.0), (-3.0, 10.0)] {
        let d = spread(200, lo, hi);
        let unit = normalize_dataset(&d);
        let w2 = (hi - lo) * (hi - lo);
        for mech in [Mechanism::Shifted, Mechanism::Transformed] {
            let raw = estimate_mse(&d, mech, eps, 2000, 9).unwrap();
            let scaled = estimate_mse(&unit, mech, eps, 2000, 9).unwrap();
            let rel = (raw.mse - w2 * scaled.mse).abs() / raw.mse;
            assert!(rel < 1e-9, "{mech} on [{lo}, {hi}]: {} vs {}", raw.mse, w2 * scaled.mse);
        }
    }
    assert_eq!(add_remove_minmax_leading(0.5, 2.0, 4.0).unwrap(), 32.0);
    assert_eq!(add_remove_minmax_leading(0.5, 2.0, 4.0).unwrap(), 4.0 * add_remove_minmax_leading(0.5, 0.0, 1.0).unwrap());
}
