use geoproxy::compositing::{build_composite, recursive_mosaic, CompositeConfig};
use geoproxy::raster::{AcquisitionDate, AoiFootprint, LatLon, RasterGrid, Scene, MS_BANDS, MS_PIXEL_M, TILE_PX};
use geoproxy::synth::{render_scenes, World, WorldSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frame() -> LatLon {
    LatLon::new(22.5, 78.0)
}

fn random_scene(rng: &mut ChaCha8Rng, side: usize, usable_rate: f64) -> Scene {
    let origin = (-(side as f64) * MS_PIXEL_M / 2.0, side as f64 * MS_PIXEL_M / 2.0);
    let mut ms = RasterGrid::new(side, side, &MS_BANDS, MS_PIXEL_M, origin).unwrap();
    let mut pan = RasterGrid::new(2 * side, 2 * side, &["pan"], MS_PIXEL_M / 2.0, origin).unwrap();
    let n = side * side;
    for b in 0..4 {
        for v in ms.band_mut(b) {
            *v = rng.random_range(0.0..0.8);
        }
    }
    for v in pan.band_mut(0) {
        *v = rng.random_range(0.0..0.8);
    }
    pan.valid_mask_mut().fill(true);
    let qa: Vec<bool> = (0..n).map(|_| !rng.random_bool(usable_rate)).collect();
    ms.valid_mask_mut().fill(true);
    Scene::new(ms, pan, qa, AcquisitionDate { year: 2001, day_of_year: 100 }, 1, frame()).unwrap()
}

fn aoi(side_px: usize) -> AoiFootprint {
    AoiFootprint {
        village_id: "v".into(),
        centroid: frame(),
        side: side_px as f64 * MS_PIXEL_M,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fully_usable_first_scene_fills_everything(seed in 0u64..10_000, extra in 0usize..4, side in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scenes = vec![random_scene(&mut rng, side, 1.0)];
        scenes.extend((0..extra).map(|_| random_scene(&mut rng, side, 0.5)));
        let ranked: Vec<&Scene> = scenes.iter().collect();
        let m = recursive_mosaic(&ranked, &aoi(side)).unwrap();
        prop_assert!(m.fill.iter().all(|f| *f == Some(0)));
        prop_assert_eq!(m.ms.band(2), scenes[0].ms.band(2));
        prop_assert_eq!(m.pan.band(0), scenes[0].pan.band(0));
    }

    #[test]
    fn fill_rank_is_first_usable_scene(seed in 0u64..10_000, n in 1usize..6, rate in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenes: Vec<Scene> = (0..n).map(|_| random_scene(&mut rng, 6, rate)).collect();
        let ranked: Vec<&Scene> = scenes.iter().collect();
        let m = recursive_mosaic(&ranked, &aoi(6)).unwrap();
        for (i, f) in m.fill.iter().enumerate() {
            let first = scenes.iter().position(|s| s.is_usable(i));
            prop_assert_eq!(f.map(usize::from), first);
            prop_assert_eq!(m.ms.valid_mask()[i], first.is_some());
        }
    }

    #[test]
    fn reversing_rank_changes_only_contested_pixels(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenes = [random_scene(&mut rng, 5, 0.6), random_scene(&mut rng, 5, 0.6)];
        let fwd = recursive_mosaic(&[&scenes[0], &scenes[1]], &aoi(5)).unwrap();
        let rev = recursive_mosaic(&[&scenes[1], &scenes[0]], &aoi(5)).unwrap();
        for i in 0..25 {
            let (a, b) = (scenes[0].is_usable(i), scenes[1].is_usable(i));
            if a != b {
                prop_assert_eq!(fwd.ms.get(0, i % 5, i / 5), rev.ms.get(0, i % 5, i / 5));
            }
            prop_assert_eq!(fwd.fill[i].is_some(), a || b);
        }
    }
}

#[test]
fn rendered_village_composites_to_a_full_tile() {
    let spec = WorldSpec {
        n_states: 1,
        n_districts: 1,
        n_tehsils: 1,
        n_villages: 3,
        scenes_per_year: 3,
        ..WorldSpec::default()
    };
    let world = World::generate(&spec).unwrap();
    for year in [2001, 2011] {
        let scenes = render_scenes(&world, 1, year).unwrap();
        let aoi = world.villages[1].footprint();
        let tile = build_composite(&aoi, year, &scenes, &[], &CompositeConfig::default()).unwrap();
        assert_eq!((tile.grid.width(), tile.grid.height()), (TILE_PX, TILE_PX));
        assert_eq!(tile.grid.band_names(), ["red", "green", "blue"]);
        assert!(tile.gap_fraction < 0.5, "{}", tile.gap_fraction);
        assert!(tile.sources.iter().all(|d| d.year == year));
        let again = build_composite(&aoi, year, &scenes, &[], &CompositeConfig::default()).unwrap();
        assert_eq!(again, tile);
    }
}

#[test]
fn strict_cloud_threshold_can_only_drop_scenes() {
    let spec = WorldSpec {
        n_states: 1,
        n_districts: 1,
        n_tehsils: 1,
        n_villages: 2,
        scenes_per_year: 4,
        cloud_rate: 0.8,
        ..WorldSpec::default()
    };
    let world = World::generate(&spec).unwrap();
    let scenes = render_scenes(&world, 0, 2011).unwrap();
    let aoi = world.villages[0].footprint();
    let loose = build_composite(&aoi, 2011, &scenes, &[], &CompositeConfig { cloud_threshold: 1.0 }).unwrap();
    let strict = build_composite(&aoi, 2011, &scenes, &[], &CompositeConfig { cloud_threshold: 0.0 }).unwrap();
    assert!(strict.sources.len() <= loose.sources.len());
    assert!(strict.sources.iter().all(|d| loose.sources.contains(d)));
}
