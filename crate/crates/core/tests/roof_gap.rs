use std::sync::Arc;

use markov_thermo::fuchsian::{
    build_coding, companion_group, default_group, difference_bound, CodingLetter, Functional, Representation,
    RepresentationKind, RoofPotential,
};
use markov_thermo::thermo::critical_exponent;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sym2_roof(group: markov_thermo::fuchsian::GroupPresentation) -> RoofPotential {
    let coding = Arc::new(build_coding(&group).unwrap());
    let rep = Representation::new(RepresentationKind::SymPower(3), coding).unwrap();
    RoofPotential::new(rep, Functional::from_alpha(&[1.0, 1.0])).unwrap()
}

#[test]
fn hitchin_gap_is_one_quarter() {
    let tau = sym2_roof(default_group());
    let spec = tau.representation().coding().shift_spec();
    let report = critical_exponent(&tau, &spec, 100_000, (1e-6, 100.0), None).unwrap();
    let d = report.d_f.value().unwrap();
    assert!((d - 0.25).abs() < 0.05 * 0.25, "d = {d}");
    assert!(report.diverges_at_d);
}

/// Random admissible word of the given length; parabolic powers are
/// log-uniform up to `max_power`.
fn random_word(rng: &mut ChaCha8Rng, tau: &RoofPotential, len: usize, max_power: u64) -> Vec<CodingLetter> {
    let coding = tau.representation().coding();
    let mut w: Vec<CodingLetter> = Vec::with_capacity(len);
    while w.len() < len {
        let generator = rng.gen_range(0..coding.presentation().rank());
        let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
        let power = if coding.is_parabolic(&CodingLetter { generator, power: 1 }) {
            let n = (rng.gen_range(0.0..(max_power as f64).ln())).exp().round().max(1.0) as i64;
            sign * n
        } else {
            sign
        };
        let c = CodingLetter { generator, power };
        if w.last().map_or(true, |b| coding.allowed(b, &c)) {
            w.push(c);
        }
    }
    w
}

#[test]
fn companion_roofs_stay_close() {
    let rho = sym2_roof(default_group());
    let eta = sym2_roof(companion_group());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut fit = 0.0f64;
    let mut all = Vec::new();
    for _ in 0..1000 {
        let w = random_word(&mut rng, &rho, 24, 10_000);
        let b = difference_bound(&rho, &eta, &w);
        let small = w[0].power.abs() <= 10;
        if small {
            fit = fit.max(b);
        }
        all.push((w[0].power.abs(), b));
    }
    // The constant is fitted on first letters with small powers and must
    // hold for every sample, including powers up to 10^4.
    let worst = all.iter().map(|x| x.1).fold(0.0, f64::max);
    assert!(fit.is_finite() && fit > 0.0);
    assert!(worst <= fit + 1e-9, "fitted {fit}, worst {worst}");
    assert!(all.iter().any(|x| x.0 > 1000));
}
