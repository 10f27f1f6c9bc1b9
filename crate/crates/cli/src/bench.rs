//! `bench`: one histogram per access path.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use relaysim::relay::AccessPath;
use relaysim::timing::{run_benchmark, BenchmarkSpec, DEFAULT_BIN_COUNT, DEFAULT_BIN_WIDTH_MS, DEFAULT_REPETITIONS};

use crate::config::ScenarioConfig;
use crate::output::write_files;
use crate::{resolve_seed, Failure};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathChoice {
    External,
    Internal,
    Wifi,
    Internet,
    All,
}

impl PathChoice {
    fn paths(self) -> Vec<AccessPath> {
        match self {
            Self::External => vec![AccessPath::DirectExternal],
            Self::Internal => vec![AccessPath::DirectInternal],
            Self::Wifi => vec![AccessPath::RelayWifi],
            Self::Internet => vec![AccessPath::RelayInternet],
            Self::All => AccessPath::ALL.to_vec(),
        }
    }
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = PathChoice::All)]
    path: PathChoice,
    #[arg(long, default_value_t = DEFAULT_REPETITIONS, value_parser = clap::value_parser!(u32).range(1..))]
    reps: u32,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH_MS)]
    bin_width: f64,
    #[arg(long, default_value_t = DEFAULT_BIN_COUNT)]
    bins: usize,
    /// Print a bar chart of each histogram.
    #[arg(long)]
    ascii: bool,
    /// Directory for the `bench-<path>.csv` files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

const CHART_WIDTH: usize = 60;

pub fn bench(args: &BenchArgs) -> Result<bool, Failure> {
    let (config, se) = ScenarioConfig::load(args.config.as_deref())?;
    // layout errors are usage errors, caught before any run
    relaysim::timing::Histogram::new(args.bin_width, args.bins).map_err(|e| Failure::Usage(e.to_string()))?;
    let seed = resolve_seed(args.seed, config.seed);
    let out = args.out.clone().or(config.out.clone());

    let mut files = Vec::new();
    let mut ok = true;
    for path in args.path.paths() {
        let spec = BenchmarkSpec {
            repetitions: args.reps,
            params: config.latency(),
            se: se.clone(),
            ..BenchmarkSpec::new(path, seed)
        };
        let run = match run_benchmark(&spec) {
            Ok(run) => run,
            Err(err) => {
                eprintln!("error: {err}");
                ok = false;
                continue;
            }
        };
        let histogram = run.histogram(args.bin_width, args.bins).map_err(|e| Failure::Usage(e.to_string()))?;
        let s = run.summary();
        let mut line = String::new();
        let _ = write!(
            line,
            "path={} reps={} seed={seed} c_apdu={}B r_apdu={}B min_ms={:.3} median_ms={:.3} mean_ms={:.3} max_ms={:.3} \
             above_1000ms={:.4} overflow={}",
            path.short_name(),
            s.count,
            run.command_len,
            run.response_len,
            s.min_ms,
            s.median_ms,
            s.mean_ms,
            s.max_ms,
            s.share_above_1000_ms,
            histogram.overflow(),
        );
        println!("{line}");
        println!("median_ms > 1000: {}", s.median_ms > 1000.0);
        if args.ascii {
            print!("{}", histogram.ascii_chart(CHART_WIDTH));
        }
        files.push((format!("bench-{}.csv", path.short_name()), histogram.to_csv()));
    }
    if let Some(dir) = out {
        let named: Vec<(&str, String)> = files.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
        write_files(&dir, &named)?;
    }
    Ok(ok)
}
