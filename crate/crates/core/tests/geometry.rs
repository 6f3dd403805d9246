use pigano_core::data::{generate, GenConfig, Problem};
use pigano_core::geometry::{sample_interior, Domain, PlateDomain, PolygonDomain, Region, Variation};
use pigano_core::stochastic::stream_rng;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_polygons_are_valid(seed in any::<u64>()) {
        let poly = PolygonDomain::sample(&mut stream_rng(seed, 0)).unwrap();
        prop_assert!(poly.signed_area() > 0.0);
        prop_assert!(poly.contains(poly.centroid()));
        prop_assert_eq!(poly.vertices().len(), 5);
        prop_assert!(PolygonDomain::new(poly.vertices().to_vec()).is_ok());
    }

    #[test]
    fn interior_points_lie_inside(seed in any::<u64>(), plate in any::<bool>()) {
        let mut rng = stream_rng(seed, 1);
        let domain = if plate {
            Domain::Plate(PlateDomain::sample(Variation::High, &mut rng).unwrap())
        } else {
            Domain::Polygon(PolygonDomain::sample(&mut rng).unwrap())
        };
        let pts = sample_interior(&domain, 50, &mut rng).unwrap();
        for p in pts {
            prop_assert!(domain.contains(p));
            prop_assert!(domain.boundary_distance(p) > 0.0);
        }
    }

    #[test]
    fn boundary_points_are_on_the_boundary(seed in any::<u64>(), plate in any::<bool>()) {
        let mut rng = stream_rng(seed, 2);
        let (domain, counts) = if plate {
            (Domain::Plate(PlateDomain::sample(Variation::Low, &mut rng).unwrap()), vec![20, 10, 10, 40])
        } else {
            (Domain::Polygon(PolygonDomain::sample(&mut rng).unwrap()), vec![60])
        };
        let groups = domain.sample_boundary(&counts, &mut rng).unwrap();
        prop_assert_eq!(groups.len(), domain.group_names().len());
        for g in &groups {
            for p in &g.points {
                prop_assert!(domain.boundary_distance(*p) < 1e-9);
                prop_assert!(!domain.contains(*p));
            }
        }
    }

    #[test]
    fn nearest_boundary_point_realises_the_distance(seed in any::<u64>(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let poly = PolygonDomain::sample(&mut stream_rng(seed, 3)).unwrap();
        let p = pigano_core::geometry::Point::new(x, y);
        let q = poly.nearest_boundary_point(p);
        prop_assert!((p.dist(q) - poly.boundary_distance(p)).abs() < 1e-12);
        prop_assert!(poly.boundary_distance(q) < 1e-12);
    }

    #[test]
    fn plate_holes_stay_inside(seed in any::<u64>(), high in any::<bool>()) {
        let v = if high { Variation::High } else { Variation::Low };
        let plate = PlateDomain::sample(v, &mut stream_rng(seed, 4)).unwrap();
        for h in &plate.holes {
            prop_assert!(h.center.x.abs() + h.radius <= plate.half_width);
            prop_assert!(h.center.y.abs() + h.radius <= plate.half_width);
        }
    }
}

#[test]
fn generated_datasets_validate_and_repeat() {
    for problem in [Problem::Darcy, Problem::Plate] {
        let mut cfg = GenConfig::new(problem, 6, 11);
        cfg.eval_points = 20;
        cfg.wos.walks = 50;
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        for s in &a {
            s.validate().unwrap();
        }
    }
}
