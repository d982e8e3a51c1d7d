use lgplan_core::geometry::{Footprint, Pose, Workspace};
use lgplan_core::patterns::{
    prior_density, sample_prior, truncated_noise, Anchor, Family, PatternDb, SamplingContext,
    NOISE_TRUNCATION,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ws() -> Workspace {
    Workspace::new(0.0, 1.0, 0.0, 0.8).unwrap()
}

proptest! {
    /// Every draw, at every step of a sequence, has positive density under
    /// the context it was drawn from.
    #[test]
    fn draws_have_positive_density(seed in any::<u64>(), pick in 0usize..12, total in 1usize..6) {
        let ws = ws();
        let db = PatternDb::builtin(&ws);
        let prior = &db.priors()[pick % db.priors().len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ctx = SamplingContext::new(prior, ws, total);
        if prior.family.is_spatial() {
            let sq = Footprint::square(0.1).unwrap();
            ctx = ctx.with_anchor(Anchor::new(Pose::planar(0.5, 0.4, 0.3), &sq));
        }
        for _ in 0..total {
            match sample_prior(&ctx, &mut rng) {
                Ok(p) => {
                    prop_assert!(prior_density(&ctx, &p) > 0.0, "{:?} {:?}", prior.family, p);
                    ctx.sampled.push(p);
                }
                // degenerate p0 == p1 or a region clipped away
                Err(_) => break,
            }
        }
        prop_assert_eq!(prior_density(&ctx, &Pose::planar(0.5, 0.4, 0.0)) == 0.0, ctx.k() >= total);
    }

    #[test]
    fn noise_is_truncated(seed in any::<u64>(), sigma in 1e-4f64..0.1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            prop_assert!(truncated_noise(&mut rng, sigma).norm() <= NOISE_TRUNCATION * sigma);
        }
    }
}

#[test]
fn db_json_round_trip_and_overrides() {
    let ws = ws();
    let db = PatternDb::builtin(&ws);
    assert_eq!(PatternDb::from_json(&db.to_json(), &ws).unwrap(), db);
    let tweaked = PatternDb::from_json(r#"[{"name": "line", "sigma": 0.02}]"#, &ws).unwrap();
    assert_eq!(tweaked.get("line").unwrap().sigma, 0.02);
    assert!(PatternDb::from_json(r#"[{"name": "line", "sigmaa": 0.02}]"#, &ws).is_err());
    assert!(PatternDb::from_json(r#"[{"name": "line", "sigma": -1}]"#, &ws).is_err());
}

#[test]
fn builtin_covers_every_family() {
    let db = PatternDb::builtin(&ws());
    for f in Family::builtin() {
        assert!(db.get(&f.name()).is_some(), "{}", f.name());
    }
    let d = ws().diagonal();
    let line = db.get("line").unwrap();
    assert!((line.delta - 0.25 * d).abs() < 1e-12);
    assert!((line.sigma - 0.01 * d).abs() < 1e-12);
}
