use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ofdmrx::bench::{bench, Corpus, MIN_CORPUS, RUNS};
use ofdmrx::compare::run_compare;
use ofdmrx::config::{ConfigError, RunConfig};
use ofdmrx::dump::{to_file, write_metrics, write_points, write_sweep};
use ofdmrx::iq::{read_iq, write_iq};
use ofdmrx::run::{clean_stream, run_rx, run_trials, transmit, trial_seed};
use ofdmrx::sweep::{curve, inversions, required_snr, sweep};
use ofdmrx_core::channel::apply_profile;
use ofdmrx_core::frame::{Format, GuardInterval};
use ofdmrx_core::golden::Fault;

const USAGE: u8 = 1;
const FAILURE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "ofdmrx", version, about = "Fixed-point 802.11a/g/n receiver: simulate, receive, verify, benchmark")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Every configuration field; command-line values win over the file.
#[derive(Debug, Args)]
struct Overrides {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    format: Option<Format>,
    #[arg(long, global = true)]
    gi: Option<GuardInterval>,
    #[arg(long, global = true)]
    mcs: Option<u8>,
    #[arg(long, global = true)]
    nsym: Option<usize>,
    #[arg(long, global = true)]
    smoothing_recommended: Option<bool>,
    #[arg(long, global = true)]
    lead: Option<usize>,
    #[arg(long, global = true)]
    tail: Option<usize>,
    /// SNR in dB, or inf
    #[arg(long, global = true)]
    snr: Option<f64>,
    #[arg(long, global = true)]
    cfo: Option<f64>,
    #[arg(long, global = true)]
    sfo: Option<f64>,
    /// Channel tap DELAY,RE,IM; repeat for several taps
    #[arg(long = "tap", global = true, value_parser = parse_tap)]
    taps: Vec<(usize, f64, f64)>,
    #[arg(long, global = true)]
    legacy_smoothing: Option<bool>,
    #[arg(long, global = true)]
    tracking: Option<bool>,
    #[arg(long, global = true)]
    timing_fallback: Option<bool>,
    #[arg(long, global = true)]
    genie_timing: Option<bool>,
    #[arg(long, global = true)]
    points_csv: Option<PathBuf>,
    #[arg(long, global = true)]
    metrics_csv: Option<PathBuf>,
}

fn parse_tap(s: &str) -> Result<(usize, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [d, re, im] = parts[..] else {
        return Err(format!("expected DELAY,RE,IM, got {s:?}"));
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok((d.trim().parse().map_err(|e| format!("{d:?}: {e}"))?, num(re)?, num(im)?))
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        set! {
            seed => c.seed,
            trials => c.trials,
            format => c.packet.format,
            gi => c.packet.gi,
            mcs => c.packet.mcs,
            nsym => c.packet.nof_ofdm_sym,
            smoothing_recommended => c.packet.smoothing_recommended,
            lead => c.packet.lead,
            tail => c.packet.tail,
            snr => c.channel.snr_db,
            cfo => c.channel.cfo_hz,
            sfo => c.channel.sfo_ppm,
            legacy_smoothing => c.rx.legacy_smoothing,
            tracking => c.rx.tracking,
            timing_fallback => c.rx.timing_fallback,
            genie_timing => c.rx.genie_timing,
        }
        if let Some(p) = &self.points_csv {
            c.output.points_csv = Some(p.clone());
        }
        if let Some(p) = &self.metrics_csv {
            c.output.metrics_csv = Some(p.clone());
        }
        if !self.taps.is_empty() {
            c.channel.taps = self.taps.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FaultArg {
    Derotation,
    Fft,
    ChannelEstimate,
    Equalizer,
}

impl From<FaultArg> for Fault {
    fn from(f: FaultArg) -> Self {
        match f {
            FaultArg::Derotation => Fault::Derotation,
            FaultArg::Fft => Fault::Fft,
            FaultArg::ChannelEstimate => Fault::ChannelEstimate,
            FaultArg::Equalizer => Fault::Equalizer,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the clean packet of trial 0, padded with lead and tail, as I/Q
    Tx {
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the configured channel to an I/Q file
    Channel {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Receive an I/Q file holding trial 0, or simulate `trials` packets
    Rx {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// SER/EVM waterfall over MCS and SNR
    Sweep {
        /// Comma-separated MCS list
        #[arg(long = "mcs-list", value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7")]
        mcs_list: Vec<u8>,
        /// Comma-separated SNR list in dB
        #[arg(long = "snr-list", allow_negative_numbers = true, value_delimiter = ',', default_value = "0,3,6,9,12,15,18,21,24,27,30")]
        snr_list: Vec<f64>,
        /// SER target for the required-SNR summary
        #[arg(long, default_value_t = 0.08)]
        target: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-threaded throughput of the receive chain
    Bench {
        /// Corpus size in samples
        #[arg(long, default_value_t = MIN_CORPUS)]
        samples: usize,
        #[arg(long, default_value_t = RUNS)]
        runs: usize,
        /// Also time a corpus twice as large
        #[arg(long)]
        doubling: bool,
        /// Fail below this rate
        #[arg(long, default_value_t = 17.8)]
        min_msps: f64,
    },
    /// Fixed-point chain against the golden model on random packets
    Compare {
        /// Inject a rounding fault into the golden model
        #[arg(long, value_enum)]
        fault: Option<FaultArg>,
    },
}

fn fail<E: std::fmt::Display>(code: u8) -> impl FnOnce(E) -> ExitCode {
    move |e| {
        eprintln!("error: {e}");
        ExitCode::from(code)
    }
}

fn config_source(o: &Overrides) -> String {
    o.config.as_deref().map_or("defaults".into(), |p: &Path| p.display().to_string())
}

fn execute(cli: Cli) -> Result<(), ExitCode> {
    let cfg = cli.overrides.resolve().map_err(fail(USAGE))?;
    match cli.command {
        Command::Tx { out } => {
            let tx = transmit(&cfg, 0).map_err(fail(USAGE))?;
            let stream = clean_stream(&cfg, &tx);
            write_iq(&out, &stream).map_err(fail(USAGE))?;
            println!("wrote {} samples to {} (packet at {})", stream.len(), out.display(), cfg.packet.lead);
        }
        Command::Channel { input, out } => {
            let stream = read_iq(&input).map_err(fail(USAGE))?;
            let stream = apply_profile(&stream, &cfg.profile(trial_seed(cfg.seed, 0))).map_err(fail(USAGE))?;
            write_iq(&out, &stream).map_err(fail(USAGE))?;
            println!("wrote {} samples to {}", stream.len(), out.display());
        }
        Command::Rx { input } => {
            let (points, report) = match input {
                Some(p) => {
                    let stream = read_iq(&p).map_err(fail(USAGE))?;
                    let (points, report) = run_rx(&cfg, &stream).map_err(fail(FAILURE))?;
                    (Some(points), report)
                }
                None => (None, run_trials(&cfg).map_err(fail(USAGE))?),
            };
            println!("config           {}", config_source(&cli.overrides));
            println!("{report}");
            if let (Some(path), Some(points)) = (&cfg.output.points_csv, &points) {
                to_file(path, |w| write_points(w, points)).map_err(fail(USAGE))?;
            }
            if let Some(path) = &cfg.output.metrics_csv {
                to_file(path, |w| write_metrics(w, &report, &cfg.to_toml())).map_err(fail(USAGE))?;
            }
        }
        Command::Sweep { mcs_list, snr_list, target, out } => {
            let cells = sweep(&cfg, &mcs_list, &snr_list).map_err(fail(USAGE))?;
            match &out {
                Some(path) => to_file(path, |w| write_sweep(w, &cells, cfg.seed)),
                None => write_sweep(std::io::stdout().lock(), &cells, cfg.seed),
            }
            .map_err(fail(USAGE))?;
            for &m in &mcs_list {
                let c = curve(&cells, m);
                let req = required_snr(&c, target).map_or("not reached".into(), |s| format!("at {s:.2} dB"));
                eprintln!("mcs {m} ({}): ser<={target} {req}, {} inversions", c[0].modulation, inversions(&c));
            }
        }
        Command::Bench { samples, runs, doubling, min_msps } => {
            let total = if doubling { 2 * samples } else { samples };
            let corpus = Corpus::generate(total, cfg.seed).map_err(fail(USAGE))?;
            let report = bench(&corpus, samples, runs.max(1));
            println!("{report}");
            if report.throughput_msps < min_msps {
                eprintln!("throughput {:.2} Msps below {min_msps}", report.throughput_msps);
                return Err(ExitCode::from(FAILURE));
            }
        }
        Command::Compare { fault } => {
            let report = run_compare(cfg.seed, cfg.trials, fault.map(Fault::from)).map_err(fail(USAGE))?;
            println!("{report}");
            if report.finding.is_some() {
                return Err(ExitCode::from(FAILURE));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
