use renyi_web::{cmi_series, delta_series, pure_state_series};

#[test]
fn page_calls_every_export() {
    let html = include_str!("../www/index.html");
    for name in ["delta_curves", "pure_state_curves", "cmi_curves"] {
        assert!(html.contains(name), "{name} is not wired into the page");
    }
}

#[test]
fn series_are_reproducible_from_the_seed() {
    let grid = [0.5, 1.5, 2.5];
    assert_eq!(delta_series(7, 3, 3, &grid).unwrap(), delta_series(7, 3, 3, &grid).unwrap());
    assert_eq!(cmi_series(7, 2, &grid).unwrap(), cmi_series(7, 2, &grid).unwrap());
    assert_ne!(cmi_series(7, 2, &grid).unwrap(), cmi_series(8, 2, &grid).unwrap());
}

#[test]
fn entanglement_grows_with_theta() {
    let mut last = -1.0;
    for k in 1..=10 {
        let theta = std::f64::consts::FRAC_PI_4 * k as f64 / 10.0;
        let h = pure_state_series(theta, &[0.7]).unwrap()[0];
        assert!(h > last);
        last = h;
    }
}
