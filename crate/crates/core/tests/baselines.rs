use num_complex::Complex64;
use pams_core::baselines::{self, BaselineKind};
use pams_core::harness::{search_rng, stream};
use pams_core::model::{
    derive_wavelengths, sample_topology, ActivationPattern, Point3, SystemParams, Topology,
};
use pams_core::oracle;
use pams_core::schemes::{
    Access, ActivationLevel, ActivationSet, Evaluator, OuterSearch, SchemeConfig,
};

const TDMA_PD: SchemeConfig = SchemeConfig::new(Access::Tdma, ActivationLevel::PartialDynamic);

#[test]
fn restricted_baselines_never_beat_the_optimum() {
    let p = SystemParams::standard();
    for seed in 0..4 {
        let t = sample_topology(&p, 6, 2, &mut stream(seed, 0)).unwrap();
        let ev = Evaluator::new(&t, &p).unwrap();
        let (_, best) = oracle::exhaustive_outer_with(&ev, TDMA_PD).unwrap();
        for kind in [
            BaselineKind::FullPa,
            BaselineKind::FixedTdma,
            BaselineKind::FullOffload,
            BaselineKind::FullLocal,
        ] {
            let run = baselines::optimize_baseline(
                &ev,
                kind,
                &OuterSearch::Exhaustive,
                &mut search_rng(0),
            )
            .unwrap();
            assert!(run.outcome.objective_bits <= best, "{kind} seed {seed}");
        }
    }
}

#[test]
fn fixed_slots_never_beat_flexible_slots() {
    let p = SystemParams::standard();
    let t = sample_topology(&p, 6, 3, &mut stream(9, 0)).unwrap();
    let ev = Evaluator::new(&t, &p).unwrap();
    for mask in [1u64, 7, 21, 63] {
        let set = ActivationSet::partial(
            ActivationPattern::from_mask(6, mask),
            ActivationPattern::from_mask(6, 64 - mask),
        );
        let fixed = baselines::fixed_tdma(&t, &p, &set).unwrap();
        assert!(fixed.objective_bits <= baselines::flexible_objective(&ev, &set).unwrap());
        assert_eq!(fixed.t0_s, 0.25);
    }
}

#[test]
fn single_antenna_full_pa_is_optimal() {
    let p = SystemParams::standard();
    let t = sample_topology(&p, 1, 3, &mut stream(4, 0)).unwrap();
    let (_, best) = oracle::exhaustive_outer(&t, &p, TDMA_PD).unwrap();
    assert_eq!(baselines::full_pa(&t, &p).unwrap().objective_bits, best);
}

#[test]
fn single_element_array_sits_at_the_feed() {
    let p = SystemParams::standard();
    let devices = vec![Point3::new(5.0, 3.0, 0.0), Point3::new(20.0, 8.0, 0.0)];
    let t = Topology::new(vec![15.0], p.height_m, devices.clone()).unwrap();
    let at_feed = Topology::new(vec![0.0], p.height_m, devices).unwrap();
    assert_eq!(
        baselines::conventional_array(&t, &p)
            .unwrap()
            .objective_bits,
        baselines::full_pa(&at_feed, &p).unwrap().objective_bits
    );
}

#[test]
fn array_gain_matches_explicit_sum() {
    let p = SystemParams::standard();
    let device = Point3::new(0.0, 30.0, 0.0);
    let xs = (0..16).map(f64::from).collect();
    let t = Topology::new(xs, p.height_m, vec![device]).unwrap();
    let array = baselines::conventional_topology(&t, &p).unwrap();
    let wl = derive_wavelengths(&p);
    let c = 299_792_458.0;
    let eta = c / (4.0 * std::f64::consts::PI * p.carrier_hz);
    let lambda = c / p.carrier_hz;
    let lambda_g = lambda / p.refractive_index;
    let sum: Complex64 = (0..16)
        .map(|n| {
            let x = n as f64 * lambda / 2.0;
            let r = ((device.x - x).powi(2) + device.y.powi(2) + p.height_m.powi(2)).sqrt();
            let phase = -2.0 * std::f64::consts::PI * (r / lambda + x / lambda_g);
            Complex64::from_polar(eta / r, phase)
        })
        .sum();
    let ev = Evaluator::new(&array, &p).unwrap();
    let g = ev.table().gain(&ActivationPattern::ones(16), 0).unwrap();
    assert!(((g - sum.norm_sqr()) / g).abs() < 1e-9);
    assert!((wl.lambda_m - lambda).abs() < 1e-15);
    // sixteen near-equal amplitudes at the far device add far below 16^2
    let single = (eta / (30f64.powi(2) + 9.0).sqrt()).powi(2);
    assert!(g < 256.0 * single);
}
