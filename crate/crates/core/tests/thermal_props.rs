use std::path::PathBuf;

use mima_core::params_file::load_plant_params;
use mima_core::thermal::{
    electrical_power, rise_time_fixed_supply, step, step_with_power, thermistor_read, FaultKind, PlantParams,
    PlantState, SensorFault, MAX_SUPPLY_VOLTAGE, ZONES,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn calibrated() -> PlantParams {
    load_plant_params(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../plant.default.params")).unwrap()
}

fn ambient_losses(s: &PlantState, p: &PlantParams) -> f64 {
    let a = s.ambient_temp;
    let coil: f64 = s.zone_coil_temp.iter().map(|t| p.coil_loss_conductance * (t - a)).sum();
    let pad: f64 = s.zone_pad_temp.iter().map(|t| p.loss_to_ambient_conductance * (t - a)).sum();
    coil + pad + p.skin_to_ambient_conductance * (s.skin_temp - a)
}

fn temps() -> impl Strategy<Value = PlantState> {
    (
        proptest::array::uniform3(0.0f64..80.0),
        proptest::array::uniform3(0.0f64..80.0),
        0.0f64..60.0,
        -10.0f64..40.0,
    )
        .prop_map(|(coil, pad, skin, ambient)| PlantState {
            time: 0.0,
            zone_coil_temp: coil,
            zone_pad_temp: pad,
            skin_temp: skin,
            ambient_temp: ambient,
        })
}

proptest! {
    #[test]
    fn every_step_balances_energy(s in temps(), power in proptest::array::uniform3(0.0f64..7.0), dt in 0.01f64..0.5) {
        let p = calibrated();
        let next = step_with_power(&s, &p, power, dt).unwrap();
        let expected = dt * (power.iter().sum::<f64>() - ambient_losses(&s, &p));
        let got = next.stored_energy(&p) - s.stored_energy(&p);
        prop_assert!((got - expected).abs() <= 1e-9 * (1.0 + expected.abs()), "{got} vs {expected}");
    }

    #[test]
    fn stored_heat_never_exceeds_input(duty in proptest::array::uniform3(0.0f64..=1.0), ambient in 0.0f64..40.0, steps in 1usize..2000) {
        let p = PlantParams { ambient, ..calibrated() };
        let mut s = PlantState::at_ambient(ambient);
        let mut input = 0.0;
        for _ in 0..steps {
            for d in duty {
                input += electrical_power(d, MAX_SUPPLY_VOLTAGE, p.coil_resistance).unwrap() * 0.1;
            }
            s = step(&s, &p, duty, MAX_SUPPLY_VOLTAGE, 0.1).unwrap();
        }
        prop_assert!(s.stored_energy(&p) <= input + 1e-9);
        prop_assert!(s.stored_energy(&p) >= -1e-9);
    }

    #[test]
    fn unpowered_plant_only_cools(s in temps()) {
        let p = calibrated();
        let hot = PlantState {
            zone_coil_temp: s.zone_coil_temp.map(|t| t.max(s.ambient_temp) + 1.0),
            zone_pad_temp: s.zone_pad_temp.map(|t| t.max(s.ambient_temp) + 1.0),
            skin_temp: s.skin_temp.max(s.ambient_temp) + 1.0,
            ..s
        };
        let mut prev = hot;
        for _ in 0..200 {
            let next = step_with_power(&prev, &p, [0.0; ZONES], 0.1).unwrap();
            prop_assert!(next.stored_energy(&p) < prev.stored_energy(&p));
            prop_assert!(next.max_node_temp() <= prev.max_node_temp() + 1e-12);
            prev = next;
        }
    }

    #[test]
    fn same_inputs_same_trajectory(s in temps(), duty in proptest::array::uniform3(0.0f64..=1.0), seed in any::<u64>()) {
        let p = calibrated();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = s;
            let mut readings = Vec::new();
            for _ in 0..100 {
                x = step(&x, &p, duty, 4.0, 0.1).unwrap();
                readings.push(thermistor_read(&x, &p, 1, &SensorFault::NONE, &mut rng).to_bits());
            }
            (x, readings)
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn full_power_heats_monotonically() {
    let p = calibrated();
    let mut s = PlantState::at_ambient(p.ambient);
    for _ in 0..3000 {
        let next = step(&s, &p, [1.0; ZONES], MAX_SUPPLY_VOLTAGE, 0.1).unwrap();
        for z in 0..ZONES {
            assert!(next.zone_coil_temp[z] >= s.zone_coil_temp[z]);
            assert!(next.zone_pad_temp[z] >= s.zone_pad_temp[z]);
        }
        assert!(next.skin_temp >= s.skin_temp);
        s = next;
    }
}

#[test]
fn step_size_does_not_move_the_curve() {
    let p = calibrated();
    let at_90 = |dt: f64| {
        let mut s = PlantState::at_ambient(p.ambient);
        let n = (90.0 / dt).round() as usize;
        for _ in 0..n {
            s = step(&s, &p, [1.0; ZONES], MAX_SUPPLY_VOLTAGE, dt).unwrap();
        }
        s.max_coil_temp()
    };
    let fine = at_90(0.01);
    for dt in [0.05, 0.1, 0.5] {
        assert!((at_90(dt) - fine).abs() < 0.5, "dt {dt}: {} vs {fine}", at_90(dt));
    }
}

#[test]
fn unpowered_plant_returns_to_ambient() {
    let p = calibrated();
    let mut s = PlantState::uniform(55.0, p.ambient);
    for _ in 0..50_000 {
        s = step_with_power(&s, &p, [0.0; ZONES], 0.1).unwrap();
    }
    assert!((s.max_node_temp() - p.ambient).abs() < 0.1, "{s:?}");
}

#[test]
fn fixed_supply_step_rise_is_about_ninety_seconds() {
    let t = rise_time_fixed_supply(&calibrated(), 30.0, 55.0, MAX_SUPPLY_VOLTAGE, 0.1, 1000.0)
        .unwrap()
        .expect("reaches 55 °C");
    assert!((81.0..=99.0).contains(&t), "{t}");
}

#[test]
fn zero_power_from_ambient_stays_put() {
    let p = calibrated();
    let s0 = PlantState::at_ambient(p.ambient);
    let mut s = s0;
    for _ in 0..1000 {
        s = step(&s, &p, [0.0; ZONES], MAX_SUPPLY_VOLTAGE, 0.1).unwrap();
    }
    assert_eq!(s.zone_coil_temp, s0.zone_coil_temp);
    assert_eq!(s.skin_temp, s0.skin_temp);
}

#[test]
fn open_circuit_reads_the_sentinel_only_once_active() {
    let p = calibrated();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fault = SensorFault::new(FaultKind::OpenCircuit, 2, 5.0).unwrap();
    let mut s = PlantState::at_ambient(p.ambient);
    assert!(thermistor_read(&s, &p, 2, &fault, &mut rng) > 0.0);
    s.time = 5.0;
    assert_eq!(thermistor_read(&s, &p, 2, &fault, &mut rng), -273.0);
    assert!(thermistor_read(&s, &p, 1, &fault, &mut rng) > 0.0);
}
