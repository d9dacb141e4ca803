use vqe_core::degrade::{run_recipe, sample_recipe, DegradationProfile};
use vqe_core::lut::apply_lut;
use vqe_core::media::{Clip, Frame};
use vqe_core::rng::SeededRng;
use vqe_demo::*;

fn card(w: usize, h: usize) -> Vec<u8> {
    (0..w * h)
        .flat_map(|i| {
            let (x, y) = (i % w, i / w);
            [(x * 255 / w) as u8, (y * 255 / h) as u8, ((x + y) * 7 % 256) as u8, 255]
        })
        .collect()
}

#[test]
fn rgba_round_trip_is_exact() {
    let rgba = card(13, 7);
    let frame = rgba_to_frame(&rgba, 13, 7).unwrap();
    assert_eq!(frame_to_rgba(&frame), rgba);
    assert!(rgba_to_frame(&rgba, 12, 7).is_err());
}

#[test]
fn degrade_preview_matches_library_path() {
    let rgba = card(24, 16);
    let a = degrade_rgba(&rgba, 24, 16, 7, "default").unwrap();
    assert_eq!(a, degrade_rgba(&rgba, 24, 16, 7, "default").unwrap());
    assert_ne!(a, degrade_rgba(&rgba, 24, 16, 8, "default").unwrap());

    let mut rng = SeededRng::new(7);
    let recipe = sample_recipe(&mut rng, &DegradationProfile::default()).unwrap();
    assert_eq!(recipe, degrade_recipe(7, "default").unwrap());
    let clip = Clip::new("c", 30.0, vec![rgba_to_frame(&rgba, 24, 16).unwrap()]).unwrap();
    let expected = frame_to_rgba(&run_recipe(&clip, &recipe).unwrap().frames()[0]);
    assert_eq!(a, expected);
    assert!(degrade_rgba(&rgba, 24, 16, 7, "harsh").is_err());
}

#[test]
fn identity_weight_leaves_pixels_alone() {
    let rgba = card(20, 10);
    assert_eq!(fuse_rgba(&rgba, 20, 10, &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap(), rgba);
    // Weights are normalized, so scaling them changes nothing.
    let w = [0.2, 0.6, 0.0, 0.4, 0.0];
    let w10: Vec<f64> = w.iter().map(|v| v * 10.0).collect();
    assert_eq!(fuse_rgba(&rgba, 20, 10, &w).unwrap(), fuse_rgba(&rgba, 20, 10, &w10).unwrap());
    assert!(fuse_rgba(&rgba, 20, 10, &[0.0; 5]).is_err());
    assert!(fuse_rgba(&rgba, 20, 10, &[1.0, -0.5, 0.0, 0.0, 0.0]).is_err());
    assert!(fuse_rgba(&rgba, 20, 10, &[1.0; 4]).is_err());
}

#[test]
fn fused_look_is_the_weighted_average_of_looks() {
    let rgba = card(16, 12);
    let frame = rgba_to_frame(&rgba, 16, 12).unwrap();
    let bank = demo_bank();
    let w = [0.1, 0.3, 0.2, 0.25, 0.15];
    let got = rgba_to_frame(&fuse_rgba(&rgba, 16, 12, &w).unwrap(), 16, 12).unwrap();
    // Trilinear interpolation is linear in the lattice, so the fused look equals
    // the blend of each look's output.
    let outs: Vec<Frame> = bank.luts().iter().map(|l| apply_lut(l, &frame)).collect();
    for (i, g) in got.data().iter().enumerate() {
        let expect: f64 = outs.iter().zip(&w).map(|(o, wi)| wi * o.data()[i]).sum();
        assert!((g - expect).abs() <= 0.5 / 255.0 + 1e-9, "sample {i}: {g} vs {expect}");
    }
}

#[test]
fn bt_fit_two_items_gives_log_three() {
    let out = bt_fit_counts(r#"[{"a":"p","b":"q","wins_ab":3,"wins_ba":1,"ties":0}]"#).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let score = |m: &str| {
        v["entries"].as_array().unwrap().iter().find(|e| e["method"] == m).unwrap()["bt_score"].as_f64().unwrap()
    };
    assert!((score("p") - score("q") - 3f64.ln()).abs() < 1e-9);
    let ll: Vec<f64> = v["log_likelihood"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(ll.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(bt_fit_counts("not json").is_err());
    assert!(bt_fit_counts(r#"[{"a":"p","b":"q","wins_ab":3,"wins_ba":0,"ties":0}]"#).is_err());
    assert_eq!(look_names(), LOOKS.join(","));
}
