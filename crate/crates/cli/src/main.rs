use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mima_bridge::BridgeConfig;
use mima_core::battery::BatteryParams;
use mima_core::calibrate::{calibrate, CalibrationError, CalibrationTargets};
use mima_core::firmware::AnomalyCode;
use mima_core::harness::{self, Scenario, Summary, Trace};
use mima_core::params_file::{format_plant_params, load_plant_params};
use mima_core::thermal::PlantParams;

#[derive(Parser)]
#[command(name = "mima", version, about = "Heating pad digital twin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace as CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "plant.default.params")]
        params: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also print the summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Report headline statistics of a trace.
    Summarize {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        json: bool,
        /// Anomaly names that do not count as failures, comma separated.
        #[arg(long, value_delimiter = ',')]
        expect: Vec<String>,
    },
    /// Fit plant parameters to heating targets.
    Calibrate {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Parameters to start from; fields not fitted are kept.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Host one live device for an app.
    Bridge {
        #[arg(long, default_value = "127.0.0.1:7420")]
        listen: String,
        #[arg(long, default_value = "plant.default.params")]
        params: PathBuf,
        #[arg(long)]
        secret: String,
        #[arg(long, default_value_t = 1.0)]
        time_scale: f64,
        /// Fault script replayed against the live device.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn print_summary(s: &Summary, json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(s)?);
        return Ok(());
    }
    let opt = |v: Option<f64>, unit: &str| v.map_or("n/a".to_string(), |v| format!("{v:.2} {unit}"));
    println!("rise_time      {}", opt(s.rise_time_s, "s"));
    println!("coil_rise      {}", opt(s.coil_rise_time_s, "s"));
    println!("ripple_sd      {}", opt(s.ripple_sd, "°C"));
    println!("max_coil       {:.2} °C", s.max_coil);
    println!("settled_coil   {}", opt(s.settled_coil, "°C"));
    println!("settled_skin   {}", opt(s.settled_skin, "°C"));
    println!("skin_offset    {}", opt(s.skin_offset, "°C"));
    println!("runtime_empty  {}", opt(s.runtime_to_empty_s, "s"));
    println!("battery_life   {}", opt(s.battery_life_s, "s"));
    for a in &s.anomalies {
        println!("anomaly        {:>9.1} s  {}", a.time, a.code);
    }
    Ok(())
}

fn report_unexpected(trace: &Trace, expect: &[AnomalyCode]) -> ExitCode {
    let unexpected = harness::unexpected_anomalies(trace, expect);
    for a in &unexpected {
        eprintln!("unexpected anomaly {} at {:.1} s", a.code, a.time);
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            scenario,
            params,
            seed,
            out,
            json,
        } => {
            let sc = Scenario::load(&scenario)?;
            let p = load_plant_params(&params)?;
            let trace = harness::run(&sc, &p, &BatteryParams::default(), seed)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut w = BufWriter::new(file);
            trace.write_csv(&mut w)?;
            w.flush()?;
            if json {
                print_summary(&harness::summarize(&trace), true)?;
            }
            Ok(report_unexpected(&trace, &sc.expect))
        }
        Command::Summarize { trace, json, expect } => {
            let file = File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let t = Trace::read_csv(BufReader::new(file))?;
            anyhow::ensure!(!t.rows.is_empty(), "trace {} has no rows", trace.display());
            let expect = expect
                .iter()
                .map(|n| AnomalyCode::from_name(n.trim()).with_context(|| format!("unknown anomaly `{n}`")))
                .collect::<Result<Vec<_>>>()?;
            print_summary(&harness::summarize(&t), json)?;
            Ok(report_unexpected(&t, &expect))
        }
        Command::Calibrate { targets, out, base } => {
            let t = CalibrationTargets::load(&targets)?;
            let base = match base {
                Some(b) => load_plant_params(b)?,
                None => PlantParams::default(),
            };
            match calibrate(&t, &base, &BatteryParams::default()) {
                Ok(c) => {
                    let header = format!(
                        "calibrated: rise {:.2} s, coil-skin offset {:.2} °C, full-power runtime {:.0} s",
                        c.rise_s, c.offset_c, c.full_power_runtime_s
                    );
                    std::fs::write(&out, format_plant_params(&c.params, &header))
                        .with_context(|| format!("writing {}", out.display()))?;
                    println!("{header}");
                    Ok(ExitCode::SUCCESS)
                }
                Err(e @ CalibrationError::NotConverged { .. }) => {
                    eprintln!("{e}");
                    Ok(ExitCode::from(2))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Bridge {
            listen,
            params,
            secret,
            time_scale,
            scenario,
            seed,
        } => {
            let overlay = scenario.map(Scenario::load).transpose()?;
            let config = BridgeConfig::new(listen, load_plant_params(&params)?, secret)
                .with_time_scale(time_scale)
                .with_overlay(overlay)
                .with_seed(seed);
            config.validate()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(mima_bridge::serve(config))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
