use std::sync::LazyLock;

use proptest::prelude::*;

use spectral_heat::basis::build_basis;
use spectral_heat::kernel::{HeatKernelEvaluator, MultiplierSpec};
use spectral_heat::DomainSpec;

static INTERVAL: LazyLock<HeatKernelEvaluator> = LazyLock::new(|| {
    let spec = DomainSpec::interval(0.7, -0.3).unwrap();
    HeatKernelEvaluator::new(build_basis(&spec, 80).unwrap()).unwrap()
});

static BALL: LazyLock<HeatKernelEvaluator> = LazyLock::new(|| {
    let spec = DomainSpec::ball(2, 0.5).unwrap();
    HeatKernelEvaluator::new(build_basis(&spec, 20).unwrap()).unwrap()
});

fn disc_point() -> impl Strategy<Value = Vec<f64>> {
    (0.0..0.95f64, 0.0..std::f64::consts::TAU).prop_map(|(r, a)| vec![r * a.cos(), r * a.sin()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interval_kernel_is_symmetric_and_positive(x in -0.99..0.99f64, y in -0.99..0.99f64, t in 0.05..3.0f64) {
        let ev = &*INTERVAL;
        let a = ev.heat_kernel(t, &[x], &[y]).unwrap();
        let b = ev.heat_kernel(t, &[y], &[x]).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-13 * a.magnitude.max(1.0));
        prop_assert!(a.value + a.tail_bound > 0.0);
    }

    #[test]
    fn heat_multiplier_matches_heat_kernel(x in -0.95..0.95f64, y in -0.95..0.95f64, t in 0.05..2.0f64) {
        let ev = &*INTERVAL;
        let h = ev.heat_kernel(t, &[x], &[y]).unwrap();
        let m = ev.multiplier_kernel(&MultiplierSpec::HeatExp, t.sqrt(), &[x], &[y]).unwrap();
        prop_assert!((h.value - m.value).abs() <= 1e-9, "{} vs {}", h.value, m.value);
    }

    #[test]
    fn ball_kernel_decreases_on_the_diagonal_in_time(x in disc_point(), t in 0.2..2.0f64) {
        let ev = &*BALL;
        let a = ev.heat_kernel(t, &x, &x).unwrap().value;
        let b = ev.heat_kernel(1.5 * t, &x, &x).unwrap().value;
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn ball_mass_is_one(x in disc_point(), t in 0.2..5.0f64) {
        let m = BALL.mass_check(t, &x).unwrap();
        prop_assert!((m - 1.0).abs() <= 1e-10);
    }
}
