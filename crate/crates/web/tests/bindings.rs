use piezo_web::{classify_line, energy_history, parse_params, transfer_magnitudes, ENERGY_SAMPLES};

const GOLDEN: [f64; 7] = [1.0; 7];

fn ratio_half() -> [f64; 7] {
    let mut p = GOLDEN;
    p[3] = 0.5f64.sqrt();
    p
}

#[test]
fn classify_matches_cli_line() {
    assert_eq!(
        classify_line(&ratio_half()).unwrap(),
        "EXPONENTIALLY_STABLE p=1 q=2 gap=1.1107 Tmin=5.657"
    );
    assert!(classify_line(&GOLDEN).unwrap().starts_with("STRONGLY_STABLE_NOT_EXP"));
}

#[test]
fn bad_parameter_arrays() {
    assert!(parse_params(&[1.0; 6]).unwrap_err().contains("7"));
    let mut p = GOLDEN;
    p[4] = 0.0;
    assert!(classify_line(&p).unwrap_err().contains("mu"));
}

#[test]
fn transfer_curves() {
    let g = transfer_magnitudes(&GOLDEN, 1.0, 50.0, 101, false).unwrap();
    assert_eq!(g.len(), 101);
    assert!(g.iter().all(|x| x.is_finite() && *x > 0.0));
    // symmetric in Im s
    assert!((g[0] - g[100]).abs() < 1e-12 * g[0]);
    let gd = transfer_magnitudes(&GOLDEN, 0.05, 50.0, 101, true).unwrap();
    assert!(gd.iter().all(|x| *x <= 1.0 + 1e-12));
    assert!(transfer_magnitudes(&GOLDEN, 1.0, 50.0, 1, false).is_err());
}

#[test]
fn energy_decays_in_closed_loop_only() {
    let closed = energy_history(&ratio_half(), "closed", 0.5, 10.0, 64).unwrap();
    assert_eq!(closed.len(), ENERGY_SAMPLES + 1);
    assert!(closed[ENERGY_SAMPLES] < 0.2 * closed[0]);
    let open = energy_history(&ratio_half(), "open", 0.5, 10.0, 64).unwrap();
    assert!((open[ENERGY_SAMPLES] - open[0]).abs() < 1e-2 * open[0]);
    assert!(energy_history(&GOLDEN, "sideways", 0.5, 1.0, 64).is_err());
}
