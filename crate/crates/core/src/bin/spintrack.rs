use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spintrack::harness::{
    fit_fixed_exponent, fit_power_law, read_results_csv, run_sweep, waveform_error_after, DurationPolicy,
    ProtocolSelection, SweepAxis, SweepConfig, KAPPA_DISPLAY_UNIT, VERSION,
};
use spintrack::protocol::{run_protocol, KPolicy, PhaseRule, Protocol, ProtocolConfig};
use spintrack::{SensorParams, SignalModel};

#[derive(Parser)]
#[command(name = "spintrack", version = VERSION, about = "Simulate Bayesian tracking of a drifting qubit frequency")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and dump truth and estimates as CSV.
    Waveform {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "tracking")]
        protocol: ProtocolArg,
    },
    /// Error against kappa.
    SweepKappa {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: SweepArgs,
        /// Comma-separated kappa values, MHz Hz^1/2.
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,1,2,5,10")]
        kappa_list: Vec<f64>,
    },
    /// Error against overhead time.
    SweepOverhead {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: SweepArgs,
        /// Comma-separated overheads, us.
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,300")]
        toh_list: Vec<f64>,
    },
    /// Error against read-out fidelity of outcome 0.
    SweepFidelity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,0.88,0.75")]
        xi0_list: Vec<f64>,
    },
    /// Power-law fit of a kappa sweep results file.
    Fit {
        /// Results CSV written by `sweep-kappa`.
        input: PathBuf,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Tracking,
    NonTracking,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseRuleArg {
    SameIndex,
    SameIndexNegated,
    Discriminating,
    MaxSharpness,
}

#[derive(Args)]
struct Common {
    /// Fluctuation level, MHz Hz^1/2.
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Overhead per Ramsey experiment, us.
    #[arg(long, default_value_t = 0.01)]
    toh: f64,
    #[arg(long, default_value_t = 1.0)]
    xi0: f64,
    #[arg(long, default_value_t = 1.0)]
    xi1: f64,
    /// Dephasing time, us (`inf` disables decoherence).
    #[arg(long, default_value_t = 100.0)]
    t2star: f64,
    /// Shortest sensing time, ns.
    #[arg(long, default_value_t = 20.0)]
    tau0: f64,
    /// Largest sensing index. Sweeps scan K when omitted.
    #[arg(long = "K")]
    k: Option<u32>,
    #[arg(long = "G", default_value_t = 5)]
    g: u32,
    #[arg(long = "F", default_value_t = 3)]
    f: u32,
    #[arg(long, default_value_t = 0.15)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "discriminating")]
    phase_rule: PhaseRuleArg,
    /// Simulated time per trajectory, ms. Sweeps pick it from the overhead
    /// when omitted.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metadata and resolved configuration as JSON.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 100)]
    trajectories: usize,
    #[arg(long, value_enum, default_value = "both")]
    protocols: ProtocolArg,
    /// Smallest K tried when scanning.
    #[arg(long, default_value_t = 3)]
    k_min: u32,
    /// Largest K tried when scanning.
    #[arg(long, default_value_t = 12)]
    k_max: u32,
    /// Pilot trajectories per scanned K.
    #[arg(long, default_value_t = 8)]
    pilots: usize,
}

impl Common {
    fn params(&self) -> SensorParams {
        SensorParams {
            tau0: self.tau0 / 1e9,
            max_k: self.k.unwrap_or(7),
            t2_star: self.t2star / 1e6,
            xi0: self.xi0,
            xi1: self.xi1,
            overhead: self.toh / 1e6,
        }
    }

    fn protocol(&self, k_policy: KPolicy) -> ProtocolConfig {
        let phase_rule = match self.phase_rule {
            PhaseRuleArg::SameIndex => PhaseRule::SameIndex,
            PhaseRuleArg::SameIndexNegated => PhaseRule::SameIndexNegated,
            PhaseRuleArg::Discriminating => PhaseRule::Discriminating,
            PhaseRuleArg::MaxSharpness => PhaseRule::MaxSharpness,
        };
        ProtocolConfig {
            g: self.g,
            f: self.f,
            alpha: self.alpha,
            phase_rule,
            k_policy,
            duration: self.duration.map_or(5e-3, |ms| ms / 1e3),
            ..ProtocolConfig::default()
        }
    }

    fn signal(&self) -> spintrack::Result<SignalModel> {
        SignalModel::new(self.kappa * KAPPA_DISPLAY_UNIT, self.tau0 / 1e9)
    }
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(p) = path {
        let mut f = BufWriter::new(File::create(p)?);
        serde_json::to_writer_pretty(&mut f, value)?;
        writeln!(f)?;
    }
    Ok(())
}

fn waveform(common: &Common, protocol: ProtocolArg) -> Result<(), Box<dyn std::error::Error>> {
    let protocol = match protocol {
        ProtocolArg::Tracking => Protocol::Tracking,
        ProtocolArg::NonTracking => Protocol::NonTracking,
        ProtocolArg::Both => return Err("waveform runs a single protocol".into()),
    };
    let params = common.params();
    let cfg = common.protocol(KPolicy::Fixed(params.max_k));
    let model = common.signal()?;
    let rec = run_protocol(protocol, &model, &params, &cfg, common.seed)?;
    rec.write_csv(output(&common.out)?)?;
    let eps = waveform_error_after(&rec, rec.burn_in)?;
    eprintln!("{protocol}: {} estimates, eps = {:.6} MHz", rec.rows.len(), eps / 1e6);

    #[derive(Serialize)]
    struct Echo<'a> {
        version: &'a str,
        protocol: Protocol,
        seed: u64,
        params: SensorParams,
        config: ProtocolConfig,
        signal: SignalModel,
        eps_hz: f64,
        ramseys: u64,
    }
    write_json(
        &common.json_out,
        &Echo {
            version: VERSION,
            protocol,
            seed: common.seed,
            params,
            config: cfg,
            signal: model.with_seed(common.seed),
            eps_hz: eps,
            ramseys: rec.ramseys,
        },
    )
}

fn sweep(
    common: &Common,
    args: &SweepArgs,
    axis: SweepAxis,
    values: Vec<f64>,
) -> Result<(), Box<dyn std::error::Error>> {
    let k_policy = match common.k {
        Some(k) => KPolicy::Fixed(k),
        None => KPolicy::Scan {
            min: args.k_min,
            max: args.k_max,
            pilot_trajectories: args.pilots,
        },
    };
    let protocols = match args.protocols {
        ProtocolArg::Tracking => ProtocolSelection::Tracking,
        ProtocolArg::NonTracking => ProtocolSelection::NonTracking,
        ProtocolArg::Both => ProtocolSelection::Both,
    };
    let params = common.params();
    let cfg = SweepConfig {
        axis,
        values,
        trajectories: args.trajectories,
        protocols,
        base_seed: common.seed,
        params,
        protocol: common.protocol(k_policy),
        signal: common.signal()?,
        duration: match common.duration {
            Some(ms) => DurationPolicy::Fixed(ms / 1e3),
            None => DurationPolicy::default(),
        },
    };
    let result = run_sweep(&cfg)?;
    result.write_csv(output(&common.out)?)?;
    for e in &result.etas {
        eprintln!(
            "{} = {}: eta = {:.3} +- {:.3}",
            axis.name(),
            axis.display(e.axis_value),
            e.eta,
            e.eta_err
        );
    }
    for f in &result.fits {
        eprintln!(
            "{}: exponent {:.3} +- {:.3}, c(2/3) = {:.3} +- {:.3} (SI)",
            f.protocol, f.free.exponent, f.free.exponent_err, f.two_thirds.c, f.two_thirds.c_err
        );
    }
    if let Some(p) = &common.json_out {
        let mut f = BufWriter::new(File::create(p)?);
        f.write_all(result.metadata_json()?.as_bytes())?;
        writeln!(f)?;
    }
    Ok(())
}

fn fit(input: &PathBuf, json_out: &Option<PathBuf>) -> Result<(), Box<dyn std::error::Error>> {
    let rows = read_results_csv(File::open(input)?)?;
    let mut protocols: Vec<&str> = Vec::new();
    for r in &rows {
        if !protocols.contains(&r.protocol.as_str()) {
            protocols.push(&r.protocol);
        }
    }

    #[derive(Serialize)]
    struct FitOut {
        protocol: String,
        exponent: f64,
        exponent_err: f64,
        c_free_si: f64,
        c_two_thirds_si: f64,
        c_two_thirds_err_si: f64,
    }
    let mut out = Vec::new();
    for p in protocols {
        if rows.iter().any(|r| r.protocol == p && r.axis_name != "kappa") {
            return Err("fit needs a kappa sweep".into());
        }
        // back to SI: Hz against Hz^{3/2}
        let pts: Vec<_> = rows
            .iter()
            .filter(|r| r.protocol == p)
            .map(|r| {
                (
                    r.axis_value * KAPPA_DISPLAY_UNIT,
                    r.eps_mhz * 1e6,
                    r.eps_stderr_mhz * 1e6,
                )
            })
            .collect();
        let free = fit_power_law(&pts)?;
        let fixed = fit_fixed_exponent(&pts, 2.0 / 3.0)?;
        println!(
            "{p}: exponent {:.4} +- {:.4}; eps = {:.4} +- {:.4} kappa^(2/3) (SI)",
            free.exponent, free.exponent_err, fixed.c, fixed.c_err
        );
        out.push(FitOut {
            protocol: p.to_string(),
            exponent: free.exponent,
            exponent_err: free.exponent_err,
            c_free_si: free.c,
            c_two_thirds_si: fixed.c,
            c_two_thirds_err_si: fixed.c_err,
        });
    }
    write_json(json_out, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Waveform { common, protocol } => waveform(common, *protocol),
        Command::SweepKappa {
            common,
            sweep: s,
            kappa_list,
        } => sweep(
            common,
            s,
            SweepAxis::Kappa,
            kappa_list.iter().map(|k| k * KAPPA_DISPLAY_UNIT).collect(),
        ),
        Command::SweepOverhead {
            common,
            sweep: s,
            toh_list,
        } => sweep(
            common,
            s,
            SweepAxis::Overhead,
            toh_list.iter().map(|t| t / 1e6).collect(),
        ),
        Command::SweepFidelity {
            common,
            sweep: s,
            xi0_list,
        } => sweep(common, s, SweepAxis::Fidelity, xi0_list.clone()),
        Command::Fit { input, json_out } => fit(input, json_out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
