use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stbn::apps::{
    accumulate, alpha_composite, alpha_reference, dither_frames, dither_kbit, free_flight, gray_ramp, rmse,
    stochastic_alpha, Accumulation, FrameStack, VolumeScene,
};
use stbn::noise_zoo::independent_2d_stack;
use stbn::{finalize, generate, Finalize, MaskSpec, NoiseCube, Provenance};

fn rank_mask_2d(seed: u64) -> Vec<f64> {
    let spec = MaskSpec::isotropic(vec![64, 64], 1.9).unwrap().with_seed(seed);
    finalize(&generate(&spec).unwrap(), Finalize::Float).unwrap().unit_values()
}

#[test]
fn half_gray_one_bit() {
    let noise = rank_mask_2d(2);
    let out = dither_kbit(&vec![0.5; 4096], &noise, 1).unwrap();
    let ones = out.iter().filter(|&&v| v == 1.0).count() as f64 / 4096.0;
    assert!((ones - 0.5).abs() <= 1.0 / 4096.0, "{ones}");
}

#[test]
fn alpha_count_over_slice() {
    let noise = rank_mask_2d(3);
    for a in [0.1, 0.5, 0.9, 0.33] {
        let kept = noise.iter().filter(|&&n| stochastic_alpha(a, n)).count();
        let exact = a * 4096.0;
        assert!(kept == exact.floor() as usize || kept == exact.ceil() as usize);
    }
}

#[test]
fn free_flight_follows_beer_lambert() {
    let density = 3.0;
    let scene = VolumeScene::homogeneous(density);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 100_000;
    let mut d: Vec<f64> = (0..draws)
        .map(|_| {
            free_flight(&scene, [0.5, 0.5, 0.0], [0.0, 0.0, 1.0], 0.0, 1.0, 1024, rng.random::<f64>())
                .map_or(f64::INFINITY, |c| c.t)
        })
        .collect();
    d.sort_by(f64::total_cmp);
    let cdf = |x: f64| 1.0 - (-density * x).exp();
    let ks = d
        .iter()
        .enumerate()
        .take_while(|(_, x)| x.is_finite())
        .map(|(i, &x)| (cdf(x) - i as f64 / draws as f64).abs().max((cdf(x) - (i + 1) as f64 / draws as f64).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "{ks}");
}

#[test]
fn single_frames_match_and_accumulation_improves() {
    let spec = MaskSpec::spatiotemporal(64, 64, 16).unwrap().with_seed(12);
    let blue = NoiseCube::from_ranks(&generate(&spec).unwrap(), Provenance::Stbn);
    let blue2d = NoiseCube::new(vec![64, 64, 1], rank_mask_2d(12), Provenance::Blue2dStack).unwrap();
    let ramp = gray_ramp(64, 64);

    let single_b = rmse(&dither_kbit(&ramp, blue.frame(13), 1).unwrap(), &ramp);
    let single_2d = rmse(&dither_kbit(&ramp, blue2d.frame(0), 1).unwrap(), &ramp);
    assert!((single_b / single_2d - 1.0).abs() < 0.05, "{single_b} vs {single_2d}");

    let stack = independent_2d_stack(64, 64, 16, 12).unwrap();
    for mode in [Accumulation::MonteCarlo, Accumulation::default()] {
        let run = |cube: &NoiseCube| {
            let frames = dither_frames(&ramp, cube, 1, 16).unwrap();
            accumulate(&FrameStack::new(64, 64, 1, frames, ramp.clone(), mode).unwrap()).rmse
        };
        let (b, s) = (run(&blue), run(&stack));
        assert!(b[3] < s[3] && b[15] < s[15], "{mode:?}: {} {} / {} {}", b[3], s[3], b[15], s[15]);
    }

    let (fg, bg, a) = (vec![0.8; 4096], vec![0.1; 4096], vec![0.9; 4096]);
    let truth = alpha_reference(&fg, &bg, &a);
    let frame13 = |cube: &NoiseCube, t: usize| rmse(&alpha_composite(&fg, &bg, &a, cube.frame(t)).unwrap(), &truth);
    assert!((frame13(&blue, 13) / frame13(&blue2d, 0) - 1.0).abs() < 0.05);
}
