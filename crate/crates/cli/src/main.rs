//! Command-line front end: single-point key rates, scans and state checks.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twistkey::channel::{build_gamma, ChannelParams};
use twistkey::keyrate::{format_float, write_csv, write_json, OutputFormat};
use twistkey::states::{model_states, tetrahedron_check, validate_priors, ModelParams};
use twistkey::{keyrate_point, scan, Error, KeyRateOptions, KeyRateResult, Result, ScanConfig, SolverOptions};

#[derive(Parser, Debug)]
#[command(name = "twistkey", version, about = "MDI-QKD key rates with mixed signal states and optimized twisting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Key rate at a single parameter point
    Keyrate(PointArgs),
    /// Evaluate a parameter grid from a JSON config
    Scan {
        #[arg(long)]
        config: PathBuf,
        /// Output file; defaults to the config's `output`, then stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Twisted against naive rate at a single point
    Compare(PointArgs),
    /// Tetrahedron diagnostics and γ̂ condition numbers for a config's states
    CheckStates {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Debug)]
struct PointArgs {
    /// Modulation offset δ in radians
    #[arg(long, allow_negative_numbers = true)]
    delta: f64,
    /// Depolarizing probability p
    #[arg(long)]
    depol: f64,
    /// Overall detection efficiency
    #[arg(long)]
    eta: f64,
    /// Dark-count probability per detector per pulse
    #[arg(long)]
    dark: f64,
    /// Alice–Charlie distance in km
    #[arg(long)]
    distance: f64,
    /// Divisor in the transmittance exponent
    #[arg(long, default_value_t = ChannelParams::DEFAULT_ATTEN_DIVISOR)]
    divisor: f64,
    /// Fiber loss in dB/km
    #[arg(long, default_value_t = ChannelParams::DEFAULT_ATTEN_DB_PER_KM)]
    atten: f64,
    /// Error-correction efficiency
    #[arg(long, default_value_t = 1.0)]
    f: f64,
    /// Signal priors for both parties, in canonical order
    #[arg(long, value_delimiter = ',')]
    priors: Option<Vec<f64>>,
    #[arg(long)]
    json: bool,
}

impl PointArgs {
    fn evaluate(&self) -> Result<KeyRateResult> {
        let priors = match &self.priors {
            Some(p) => {
                let p: [f64; 4] = p.as_slice().try_into().map_err(|_| Error::Config("--priors takes four values".into()))?;
                validate_priors(&p).map_err(|e| Error::Config(e.to_string()))?;
                p
            }
            None => twistkey::states::UNIFORM_PRIORS,
        };
        let params = ModelParams::new(self.delta, self.depol).map_err(|e| Error::Config(e.to_string()))?;
        let channel = ChannelParams {
            eta: self.eta,
            p_dark: self.dark,
            distance_km: self.distance,
            atten_db_per_km: self.atten,
            atten_divisor: self.divisor,
        };
        channel.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.f.is_finite() && self.f >= 0.0) {
            return Err(Error::Config(format!("--f {} must be nonnegative", self.f)));
        }
        let ensemble = model_states(params, priors)?;
        keyrate_point(&ensemble, &ensemble, &channel, &KeyRateOptions::with_f(self.f))
    }
}

fn print_keyrate(out: &mut impl Write, r: &KeyRateResult) -> io::Result<()> {
    let d = &r.diagnostics;
    writeln!(out, "p_det00        {}", format_float(r.p_det00))?;
    writeln!(out, "e_Z            {}", format_float(r.e_z))?;
    writeln!(out, "e_minus        {}", format_float(r.e_minus))?;
    writeln!(out, "e_plus         {}", format_float(r.e_plus))?;
    writeln!(out, "rate_twisted   {}", format_float(r.rate_twisted))?;
    writeln!(out, "rate_naive     {}", format_float(r.rate_naive))?;
    writeln!(out, "pct_gain       {}", format_float(r.pct_gain))?;
    writeln!(out, "gamma_cond     {}", format_float(d.gamma_condition))?;
    writeln!(out, "clipped_mass   {}", format_float(d.clipped_mass))?;
    writeln!(out, "solver         {} / {} ({} + {} iterations)", d.status_minus, d.status_plus, d.iterations_minus, d.iterations_plus)?;
    if d.eve_warning {
        writeln!(out, "warning        reconstruction clipped negative eigenvalue mass")?;
    }
    Ok(())
}

fn print_compare(out: &mut impl Write, r: &KeyRateResult) -> io::Result<()> {
    writeln!(out, "{:<10} {:>20} {:>20} {:>20}", "", "e_minus", "e_plus", "rate")?;
    writeln!(out, "{:<10} {:>20} {:>20} {:>20}", "naive", format_float(r.naive_e_minus), format_float(r.naive_e_plus), format_float(r.rate_naive))?;
    writeln!(out, "{:<10} {:>20} {:>20} {:>20}", "twisted", format_float(r.e_minus), format_float(r.e_plus), format_float(r.rate_twisted))?;
    writeln!(out, "pct_gain {}", format_float(r.pct_gain))
}

fn run_scan(config: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let config = ScanConfig::load(&config)?;
    let rows = scan(&config, &SolverOptions::default())?;
    let failed = rows.iter().filter(|r| r.result().is_none()).count();
    let target = out.or_else(|| config.output.clone());
    let writer: Box<dyn Write> = match &target {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    match config.format {
        OutputFormat::Csv => write_csv(&rows, writer)?,
        OutputFormat::Json => write_json(&rows, writer)?,
    }
    if failed > 0 {
        eprintln!("{failed} of {} points failed; see the status column", rows.len());
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct StateReport {
    delta: f64,
    depol: f64,
    alice: twistkey::states::TetrahedronReport,
    bob: twistkey::states::TetrahedronReport,
    gamma_condition: f64,
}

fn check_states(config: PathBuf, json: bool) -> Result<bool> {
    let config = ScanConfig::load(&config)?;
    let mut reports = Vec::new();
    for (delta, depol) in config.models() {
        let (alice, bob) = config.ensembles(delta, depol)?;
        reports.push(StateReport {
            delta,
            depol,
            alice: tetrahedron_check(&alice),
            bob: tetrahedron_check(&bob),
            gamma_condition: build_gamma(&alice, &bob).condition(),
        });
    }
    let mut out = io::stdout().lock();
    if json {
        serde_json::to_writer_pretty(&mut out, &reports)?;
        writeln!(out)?;
    } else {
        for r in &reports {
            for (who, t) in [("alice", &r.alice), ("bob", &r.bob)] {
                writeln!(
                    out,
                    "delta={} depol={} {who}: det={} cond={} {}",
                    format_float(r.delta),
                    format_float(r.depol),
                    format_float(t.determinant),
                    format_float(t.condition),
                    if t.pass { "ok" } else { "COPLANAR" }
                )?;
            }
            writeln!(out, "delta={} depol={} gamma_cond={}", format_float(r.delta), format_float(r.depol), format_float(r.gamma_condition))?;
        }
    }
    Ok(reports.iter().all(|r| r.alice.pass && r.bob.pass))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Keyrate(args) => {
            let r = args.evaluate()?;
            if args.json {
                serde_json::to_writer_pretty(&mut out, &r)?;
                writeln!(out)?;
            } else {
                print_keyrate(&mut out, &r)?;
            }
        }
        Command::Compare(args) => {
            let r = args.evaluate()?;
            if args.json {
                let summary = serde_json::json!({
                    "rate_naive": r.rate_naive,
                    "rate_twisted": r.rate_twisted,
                    "pct_gain": r.pct_gain,
                    "naive": { "e_minus": r.naive_e_minus, "e_plus": r.naive_e_plus },
                    "twisted": { "e_minus": r.e_minus, "e_plus": r.e_plus },
                });
                serde_json::to_writer_pretty(&mut out, &summary)?;
                writeln!(out)?;
            } else {
                print_compare(&mut out, &r)?;
            }
        }
        Command::Scan { config, out: path } => {
            drop(out);
            run_scan(config, path)?;
        }
        Command::CheckStates { config, json } => {
            drop(out);
            if !check_states(config, json)? {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error [{}]: {err}", err.code());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
