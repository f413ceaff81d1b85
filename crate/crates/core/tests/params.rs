use std::f64::consts::PI;

use nemsim::params::{coupling_rate, reference_device, table1, transmon_coupling, DerivedRates, DeviceFile, Transduction};
use proptest::prelude::*;

const HBAR: f64 = 1.054_571_817e-34;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn table1_reproduces_the_published_estimates() {
    // (ω/2π GHz, ΔV, λ/2π MHz, J/2π MHz) as printed, to one decimal
    let published = [(2.5, 10.0, 1.2, 0.7), (2.5, 20.0, 2.3, 2.7), (3.5, 10.0, 1.2, 0.6), (3.5, 20.0, 2.5, 2.3)];
    let rows = table1().unwrap();
    assert_eq!(rows.len(), 4);
    for (row, (f, v, lambda, j)) in rows.iter().zip(published) {
        assert_eq!((row.omega_over_2pi_ghz, row.dv_v), (f, v));
        // one printed decimal on values near 1 MHz leaves roughly 10 % slack
        assert!(rel(row.lambda_over_2pi_mhz, lambda) < 0.10, "λ {} vs {lambda}", row.lambda_over_2pi_mhz);
        assert!(rel(row.j_over_2pi_mhz, j) < 0.10, "J {} vs {j}", row.j_over_2pi_mhz);
    }
}

#[test]
fn first_row_by_hand() {
    // 2.5 GHz beam, 0.7 µm long, 10 V, evaluated straight from SI inputs
    let m = 0.52 * 2700.0 * 45e-9 * 50e-9 * 0.7e-6;
    let w = 2.0 * PI * 2.5e9;
    let x = (HBAR / (2.0 * m * w)).sqrt();
    let j = 6e-11 / 20e-9 * 100.0 * x * x / HBAR;
    let lambda = w * (6e-11 * 20e-18 * 100.0 / (m * w * w * 20e-9 * 50e-15)).sqrt();
    let dev = reference_device(2.5e9, 0.7e-6, 10.0);
    assert!(rel(coupling_rate(&dev, &dev, Transduction::CapacitanceGradient).unwrap(), j) < 1e-12);
    assert!(rel(transmon_coupling(&dev).unwrap(), lambda) < 1e-12);
    let rates = DerivedRates::from_device(&dev, Transduction::CapacitanceGradient).unwrap();
    assert!(rel(rates.rabi_time, PI / (2.0 * lambda)) < 1e-12);
    // λ/2π ≥ 1 MHz keeps the Rabi transfer under 250 ns
    assert!(rates.rabi_time < 250e-9);
}

#[test]
fn device_file_round_trip() {
    let text = r#"
[resonator]
length_m = 0.7e-6
width_m = 45e-9
thickness_m = 50e-9
density_kg_m3 = 2700.0
frequency_hz = 2.5e9
[coupling]
gap_m = 20e-9
voltage_v = 10.0
capacitance_f = 20e-18
capacitance_gradient_f_per_m = 6e-11
[transmon]
shunt_capacitance_f = 50e-15
"#;
    match DeviceFile::parse(text) {
        Ok(file) => assert_eq!(file.to_params().unwrap(), reference_device(2.5e9, 0.7e-6, 10.0)),
        Err(e) => panic!("device file rejected: {e}"),
    }
}

proptest! {
    #[test]
    fn voltage_scaling(v in 0.5f64..50.0, s in 0.1f64..10.0, len in 0.3e-6f64..2e-6) {
        let a = reference_device(3e9, len, v);
        let b = reference_device(3e9, len, v * s);
        let ja = coupling_rate(&a, &a, Transduction::CapacitanceGradient).unwrap();
        let jb = coupling_rate(&b, &b, Transduction::CapacitanceGradient).unwrap();
        prop_assert!(rel(jb, ja * s * s) < 1e-12);
        prop_assert!(rel(transmon_coupling(&b).unwrap(), transmon_coupling(&a).unwrap() * s) < 1e-12);
    }

    #[test]
    fn hopping_falls_with_mass_and_frequency(v in 1.0f64..30.0, len in 0.3e-6f64..2e-6, k in 1.01f64..3.0) {
        let base = reference_device(3e9, len, v);
        let j = |d: &nemsim::params::DeviceParams| coupling_rate(d, d, Transduction::CapacitanceGradient).unwrap();
        // x_zpf² ∝ 1/(mω), so J ∝ 1/(L ω)
        prop_assert!(rel(j(&reference_device(3e9, len * k, v)), j(&base) / k) < 1e-12);
        prop_assert!(rel(j(&reference_device(3e9 * k, len, v)), j(&base) / k) < 1e-12);
    }
}
