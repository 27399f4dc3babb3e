use std::path::PathBuf;

use mima_core::battery::BatteryParams;
use mima_core::firmware::AnomalyCode;
use mima_core::harness::{run, summarize, unexpected_anomalies, Action, Scenario, ScenarioError, Trace, TraceRow};
use mima_core::params_file::load_plant_params;
use mima_core::thermal::PlantParams;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn params() -> PlantParams {
    load_plant_params(root().join("plant.default.params")).unwrap()
}

fn committed() -> Vec<(String, Scenario)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(root().join("scenarios"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let sc = Scenario::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (p.file_stem().unwrap().to_string_lossy().into_owned(), sc)
        })
        .collect()
}

fn simulate(sc: &Scenario, seed: u64) -> Trace {
    run(sc, &params(), &BatteryParams::default(), seed).unwrap()
}

#[test]
fn committed_scenarios_parse_and_are_named_after_their_file() {
    let all = committed();
    assert!(all.len() >= 10);
    for (stem, sc) in &all {
        assert_eq!(&sc.name, stem);
        sc.validate().unwrap();
    }
}

#[test]
fn committed_scenarios_raise_exactly_what_they_expect() {
    for (name, sc) in committed() {
        let trace = simulate(&sc, 7);
        assert_eq!(trace.rows.len() as u64, sc.tick_count(), "{name}");
        let unexpected = unexpected_anomalies(&trace, &sc.expect);
        assert!(unexpected.is_empty(), "{name}: {unexpected:?}");
        let seen: Vec<AnomalyCode> = trace.anomalies().map(|(_, c)| c).collect();
        for want in &sc.expect {
            assert!(seen.contains(want), "{name}: {want:?} never raised");
        }
    }
}

#[test]
fn replay_is_bit_identical() {
    let sc = Scenario::load(root().join("scenarios/sigma_fault.scn")).unwrap();
    assert_eq!(simulate(&sc, 11).to_csv(), simulate(&sc, 11).to_csv());
    assert_ne!(simulate(&sc, 11).to_csv(), simulate(&sc, 12).to_csv());
}

#[test]
fn empty_scenario_is_flat_and_disconnected() {
    let sc = Scenario {
        duration: 30.0,
        ..Scenario::default()
    };
    let trace = simulate(&sc, 1);
    assert_eq!(trace.rows.len(), 60);
    assert_eq!(trace.rows[0].time, 0.0);
    assert_eq!(trace.rows.last().unwrap().time, 29.5);
    for r in &trace.rows {
        assert_eq!(r.mode, "Disconnected");
        assert_eq!(r.duty_bits, 0);
        assert_eq!(r.power_w, 0.0);
        assert!(r.coils().iter().all(|&c| (c - 30.0).abs() < 1e-9));
        assert!(r.anomalies.is_empty());
    }
    let s = summarize(&trace);
    assert_eq!(s.rise_time_s, None);
    assert_eq!(s.ripple_sd, None);
}

#[test]
fn flat_battery_never_powers_the_coils() {
    let sc = Scenario::parse(
        "name = flat\nduration = 20\nsoc = 0\n\
         at=0 link up\nat=0 send auth\nat=0 send start\nat=5 send start\n",
    )
    .unwrap();
    let trace = simulate(&sc, 3);
    assert!(trace.rows.iter().all(|r| r.power_w == 0.0 && r.duty_bits == 0));
    assert!(trace.rows.iter().all(|r| r.mode == "BatteryLow" || r.mode == "Disconnected"));
}

#[test]
fn csv_round_trip_is_stable() {
    let sc = Scenario::load(root().join("scenarios/open_circuit.scn")).unwrap();
    let trace = simulate(&sc, 5);
    let csv = trace.to_csv();
    let header = String::from_utf8_lossy(&csv).lines().next().unwrap().to_string();
    assert_eq!(
        header,
        "time,coil_0,coil_1,coil_2,reading_0,reading_1,reading_2,skin,duty_bits,power_w,soc,voltage,mode,anomalies"
    );
    let back = Trace::read_csv(csv.as_slice()).unwrap();
    assert_eq!(back.rows.len(), trace.rows.len());
    assert_eq!(back.to_csv(), csv);
    assert_eq!(summarize(&back).anomalies.len(), summarize(&trace).anomalies.len());
}

fn heating_row(time: f64, coil: f64, duty_bits: u8) -> TraceRow {
    TraceRow {
        time,
        coil_0: coil,
        coil_1: coil,
        coil_2: coil,
        reading_0: coil,
        reading_1: coil,
        reading_2: coil,
        skin: coil - 10.0,
        duty_bits,
        power_w: 0.0,
        soc: 1.0,
        voltage: 4.2,
        mode: "Heating".into(),
        anomalies: String::new(),
    }
}

#[test]
fn constant_hold_has_zero_ripple() {
    let rows = (0..600).map(|i| heating_row(i as f64 * 0.5, 52.0, if i < 10 { 7 } else { 0 })).collect();
    let s = summarize(&Trace { rows });
    assert_eq!(s.ripple_sd, Some(0.0));
    assert_eq!(s.settled_coil, Some(52.0));
    assert_eq!(s.skin_offset, Some(10.0));
}

#[test]
fn bad_scenarios_are_rejected() {
    let cases = [
        "duration = 0\n",
        "duration = 10\nat=5 link up\nat=4 link down\n",
        "duration = 10\nat=11 link up\n",
        "duration = 10\nat=1 inject stuck zone=3 value=40\n",
        "duration = 10\nat=1 send level extreme\n",
        "duration = 10\nat=1 send raw A5 0\n",
        "duration = 10\nsoc = 1.5\n",
        "duration = 10\nat=1 bench_drive 2\n",
        "duration = 10\nat=1 teleport\n",
    ];
    for text in cases {
        let sc = format!("name = bad\n{text}");
        assert!(Scenario::parse(&sc).is_err(), "accepted:\n{sc}");
    }
    assert!(matches!(
        Scenario::parse("name = x\nduration = 10\nat=1 inject drift zone=0\n"),
        Err(ScenarioError::Parse { line: 3, .. })
    ));
}

#[test]
fn raw_bytes_reach_the_device_verbatim() {
    let sc = Scenario::parse("name = raw\nduration = 2\nat=0 link up\nat=0 send raw A5 00 08 9C 07\n").unwrap();
    assert_eq!(sc.events[1].action, Action::Send(vec![0xA5, 0x00, 0x08, 0x9C, 0x07]));
    simulate(&sc, 1);
}
