//! World-level properties: labeler round trip, prior statistics and the
//! entangler's ground-truth directions.

use tunalab::faceworld::*;
use tunalab::ndmath::{cosine, linalg::least_squares, RngState};

#[test]
fn oracle_recovers_rendered_attributes() {
    let cfg = WorldConfig::default();
    let ds = sample_world(1000, &mut RngState::new(11), &cfg).unwrap();
    let mut worst = [0.0f32; NUM_ATTRIBUTES];
    for rec in &ds.records {
        let got = oracle_label(&rec.image);
        assert_eq!(got.glasses, rec.attrs.glasses, "{:?} vs {:?}", got, rec.attrs);
        assert_eq!(got.beard, rec.attrs.beard, "{:?} vs {:?}", got, rec.attrs);
        for a in [Attribute::Smile, Attribute::HairLength, Attribute::FaceWidth] {
            let e = (got.get(a) - rec.attrs.get(a)).abs();
            worst[a.index()] = worst[a.index()].max(e);
        }
        assert!(is_face(&rec.image));
    }
    println!("worst numeric error: {worst:?}");
    assert!(worst.iter().all(|&e| e <= 0.1), "{worst:?}");
}

#[test]
fn extreme_nuisance_and_attributes_round_trip() {
    let mut worst = 0.0f32;
    for &g in &[-1.0, 1.0] {
        for &b in &[-1.0, 1.0] {
            for &s in &[-1.0, 0.0, 1.0] {
                for &h in &[0.0, 1.0] {
                    for &w in &[0.5, 1.0] {
                        for n in [[-9.0, -9.0], [9.0, 9.0], [-9.0, 9.0], [0.0, 0.0]] {
                            let y = AttributeVector::new(g, b, s, h, w).unwrap();
                            let got = oracle_label(&render(&y, &n).unwrap());
                            assert_eq!((got.glasses, got.beard), (g, b), "{y:?} {n:?}");
                            for a in [Attribute::Smile, Attribute::HairLength, Attribute::FaceWidth] {
                                worst = worst.max((got.get(a) - y.get(a)).abs());
                            }
                        }
                    }
                }
            }
        }
    }
    assert!(worst <= 0.1, "{worst}");
}

#[test]
fn labels_ignore_background_gray() {
    let mut rng = RngState::new(12);
    let cfg = WorldConfig::default();
    for _ in 0..100 {
        let y = sample_attributes(&cfg, &mut rng);
        let mut n = rng.normal_vec(cfg.nuisance_dim());
        let a = oracle_label(&render(&y, &n).unwrap());
        n[0] = -n[0] + 0.7;
        let b = oracle_label(&render(&y, &n).unwrap());
        assert_eq!((a.glasses, a.beard), (b.glasses, b.beard));
        for attr in [Attribute::Smile, Attribute::HairLength, Attribute::FaceWidth] {
            assert!((a.get(attr) - b.get(attr)).abs() < 1e-3, "{attr}");
        }
    }
}

#[test]
fn glasses_frequency_matches_prior() {
    let mut rng = RngState::new(13);
    let cfg = WorldConfig::default();
    let n = 20000;
    let on = (0..n)
        .filter(|_| sample_attributes(&cfg, &mut rng).glasses > 0.0)
        .count();
    assert!((on as f32 / n as f32 - 0.5).abs() <= 0.02);
}

fn beard_width_correlation(rho: f32, seed: u64) -> f64 {
    let mut rng = RngState::new(seed);
    let cfg = WorldConfig {
        rho,
        ..WorldConfig::default()
    };
    let pairs: Vec<(f64, f64)> = (0..20000)
        .map(|_| {
            let y = sample_attributes(&cfg, &mut rng);
            (y.beard as f64, y.face_width as f64)
        })
        .collect();
    let n = pairs.len() as f64;
    let (ma, mb) = pairs.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        sab += (a - ma) * (b - mb);
        saa += (a - ma) * (a - ma);
        sbb += (b - mb) * (b - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[test]
fn prior_correlation_follows_rho() {
    assert!(beard_width_correlation(0.0, 14).abs() <= 0.05);
    assert!(beard_width_correlation(0.3, 15) > 0.15);
}

#[test]
fn beard_rate_matches_prior() {
    let mut rng = RngState::new(16);
    let cfg = WorldConfig::default();
    let on = (0..20000)
        .filter(|_| sample_attributes(&cfg, &mut rng).beard > 0.0)
        .count();
    assert!((on as f32 / 20000.0 - PRIOR_BEARD_RATE).abs() <= 0.02);
}

#[test]
fn regression_recovers_true_directions() {
    let cfg = WorldConfig::default();
    let ent = Entangler::new(cfg).unwrap();
    let mut rng = RngState::new(17);
    let mut zs = Vec::new();
    let mut ys: Vec<Vec<f32>> = vec![Vec::new(); NUM_ATTRIBUTES];
    for _ in 0..5000 {
        let y = sample_attributes(&cfg, &mut rng);
        let n = rng.normal_vec(cfg.nuisance_dim());
        zs.push(ent.entangle(&y, &n).unwrap());
        for (j, v) in y.standardized().iter().enumerate() {
            ys[j].push(*v);
        }
    }
    for a in Attribute::ALL {
        let (coef, _) = least_squares(&zs, &ys[a.index()]).unwrap();
        let coef: Vec<f32> = coef.iter().map(|&c| c as f32).collect();
        let c = cosine(&coef, &ent.true_direction(a));
        assert!(c >= 0.99, "{a}: {c}");
    }
}

#[test]
fn identical_seed_identical_world() {
    let cfg = WorldConfig::default();
    let a = sample_world(50, &mut RngState::new(18), &cfg).unwrap();
    let b = sample_world(50, &mut RngState::new(18), &cfg).unwrap();
    assert_eq!(a.records, b.records);
}

#[test]
fn feature_map_spread() {
    // every feature varies across the world on a comparable scale
    let cfg = WorldConfig::default();
    let ds = sample_world(2000, &mut RngState::new(19), &cfg).unwrap();
    let fm = FeatureMap::new();
    let feats: Vec<[f32; NUM_FEATURES]> = ds.records.iter().map(|r| fm.features(&r.image)).collect();
    let mut sds = Vec::new();
    for k in 0..NUM_FEATURES {
        let m = feats.iter().map(|f| f[k]).sum::<f32>() / feats.len() as f32;
        let v = feats.iter().map(|f| (f[k] - m).powi(2)).sum::<f32>() / feats.len() as f32;
        sds.push(v.sqrt());
    }
    println!("feature sds: {sds:?}");
    assert!(sds.iter().all(|&s| (0.5..2.0).contains(&s)), "{sds:?}");
}
