use argrid_core::spatial::{
    distance, distance_matrix, haversine_km, CatchmentMatrix, DecayMatrix, DistanceMetric, FacilitySite, GeoPoint,
    Location,
};
use proptest::prelude::*;

mod support;

// reference values from a standalone haversine on a 6371.0088 km sphere
#[test]
fn haversine_reference_distances() {
    let duomo = GeoPoint::new(45.4642, 9.19);
    let linate = GeoPoint::new(45.4451, 9.2767);
    let rome = GeoPoint::new(41.9028, 12.4964);
    assert!(support::close(haversine_km(duomo, linate), 7.088291227325015, 1e-12));
    assert!(support::close(haversine_km(duomo, rome), 476.885343057346, 1e-12));
    assert_eq!(haversine_km(rome, rome), 0.0);
}

#[test]
fn decay_matches_brute_force() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let inst = support::random_instance(&mut rng, 20, 5);
    let dist = distance_matrix(&inst.grid, &inst.sites, DistanceMetric::ProjectedEuclidean).unwrap();
    let gamma = rng.random_range(-3.0..-0.5);
    let d = DecayMatrix::from_distances(&dist, gamma, DistanceMetric::ProjectedEuclidean, 0.001).unwrap();
    for (l, cell) in inst.grid.cells().iter().enumerate() {
        for (k, site) in inst.sites.iter().enumerate() {
            let dx = cell.centroid.planar.x_km - site.location.planar.x_km;
            let dy = cell.centroid.planar.y_km - site.location.planar.y_km;
            let r = (dx * dx + dy * dy).sqrt();
            let want = if r < 0.001 { 1.0 } else { r.powf(gamma) };
            assert!(support::close(d.get(l, k), want, 1e-12));
        }
    }
}

fn point() -> impl Strategy<Value = Location> {
    (-50.0f64..50.0, -50.0f64..50.0).prop_map(|(x, y)| Location::planar(x, y))
}

proptest! {
    #[test]
    fn euclidean_is_a_metric(a in point(), b in point(), c in point()) {
        let m = DistanceMetric::ProjectedEuclidean;
        let ab = distance(&a, &b, m).unwrap();
        let ba = distance(&b, &a, m).unwrap();
        let bc = distance(&b, &c, m).unwrap();
        let ac = distance(&a, &c, m).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn haversine_is_symmetric(lat1 in -80.0f64..80.0, lon1 in -180.0f64..180.0, lat2 in -80.0f64..80.0, lon2 in -180.0f64..180.0) {
        let a = GeoPoint::new(lat1, lon1);
        let b = GeoPoint::new(lat2, lon2);
        prop_assert!((haversine_km(a, b) - haversine_km(b, a)).abs() < 1e-9);
    }

    #[test]
    fn catchment_is_binary_and_monotone(
        ds in proptest::collection::vec(0.0f64..20.0, 1..40),
        t1 in 0.1f64..10.0,
        extra in 0.0f64..10.0,
    ) {
        let dist = ndarray::Array2::from_shape_vec((ds.len(), 1), ds).unwrap();
        let m = DistanceMetric::ProjectedEuclidean;
        let c1 = CatchmentMatrix::from_distances(&dist, t1, m).unwrap();
        let c2 = CatchmentMatrix::from_distances(&dist, t1 + extra, m).unwrap();
        for ((&inside1, &inside2), &d) in c1.entries().iter().zip(c2.entries()).zip(dist.iter()) {
            prop_assert_eq!(inside1, d <= t1);
            prop_assert!(!inside1 || inside2);
        }
    }

    #[test]
    fn decay_strictly_decreasing_beyond_epsilon(
        mut ds in proptest::collection::vec(0.002f64..50.0, 2..30),
        gamma in -4.0f64..-0.1,
    ) {
        ds.sort_by(f64::total_cmp);
        ds.dedup();
        let dist = ndarray::Array2::from_shape_vec((1, ds.len()), ds).unwrap();
        let d = DecayMatrix::from_distances(&dist, gamma, DistanceMetric::ProjectedEuclidean, 0.001).unwrap();
        let w: Vec<f64> = d.entries().iter().copied().collect();
        for pair in w.windows(2) {
            prop_assert!(pair[1] < pair[0]);
        }
        let flat = DecayMatrix::from_distances(&dist, 0.0, DistanceMetric::ProjectedEuclidean, 0.001).unwrap();
        prop_assert!(flat.entries().iter().all(|&x| x == 1.0));
    }
}

#[test]
fn site_order_fixes_column_order() {
    let inst = support::random_instance(&mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3), 50, 6);
    let reversed: Vec<FacilitySite> = inst.sites.iter().rev().cloned().collect();
    let m = DistanceMetric::ProjectedEuclidean;
    let a = distance_matrix(&inst.grid, &inst.sites, m).unwrap();
    let b = distance_matrix(&inst.grid, &reversed, m).unwrap();
    let k = inst.sites.len();
    for j in 0..k {
        assert_eq!(a.column(j), b.column(k - 1 - j));
    }
}
