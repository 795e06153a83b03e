use geoproxy_web::{align_clouds, render_village, score_text};

#[test]
fn village_render_has_tile_geometry() {
    let v = render_village(0.7, 0.3, 2, 2011, 0.0).unwrap();
    assert_eq!(v.tile_side, 224);
    assert_eq!(v.tile_rgba.len(), 224 * 224 * 4);
    assert_eq!(v.scene_rgba.len(), v.scene_side * v.scene_side * 4);
    assert!(v.used_scenes >= 1 && v.used_scenes <= v.scenes);
    assert!(v.gap_fraction < 0.05);
    assert_eq!(render_village(0.7, 0.3, 2, 2011, 0.0).unwrap(), v);
}

#[test]
fn denser_village_renders_differently() {
    let low = render_village(0.0, 0.5, 4, 2001, 0.0).unwrap();
    let high = render_village(1.0, 0.5, 4, 2001, 0.0).unwrap();
    assert_ne!(low.tile_rgba, high.tile_rgba);
}

#[test]
fn bad_scores_are_rejected() {
    assert!(render_village(1.5, 0.0, 0, 2011, 0.0).is_err());
    assert!(align_clouds(0.0, -1.0, 100, 0).is_err());
}

#[test]
fn linear_ot_matches_target_moments() {
    let a = align_clouds(1.5, 1.8, 500, 3).unwrap();
    assert_eq!(a.source.len(), 1000);
    assert!(a.linear_ot_moment_error < 1e-9, "{}", a.linear_ot_moment_error);
    // Per-axis matching reproduces the marginals but not the correlation.
    let mean = |xy: &[f64], axis: usize| xy.iter().skip(axis).step_by(2).sum::<f64>() / 500.0;
    for axis in 0..2 {
        assert!((mean(&a.histogram, axis) - mean(&a.target, axis)).abs() < 0.1);
    }
    assert!(a.histogram_moment_error > a.linear_ot_moment_error);
}

#[test]
fn scoring_text() {
    assert_eq!(score_text("1 2 3", "1,2,3").unwrap(), "R² = 1.0000 over 3 observations");
    assert!(score_text("1 2", "1 2 3").is_err());
    assert!(score_text("a", "1").is_err());
    assert_eq!(score_text("1 2", "5 5").unwrap(), "not evaluated: truth is constant");
}
