//! Command/response delay benchmark over the four access paths, binned into
//! fixed-width histograms whose last bin collects everything at or above the
//! overflow threshold.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::aid::Aid;
use crate::apdu::{CommandApdu, ResponseApdu};
use crate::card::{CardInterface, DirectCard};
use crate::relay::{
    AccessPath, CardEmulator, InProcessLink, LatencyModel, LatencyParams, RelayApp, RelayAppConfig,
};
use crate::se::{ChannelOrigin, SeConfig, SecureElement};

pub const DEFAULT_BIN_WIDTH_MS: f64 = 50.0;
pub const DEFAULT_BIN_COUNT: usize = 160;
pub const DEFAULT_REPETITIONS: u32 = 5000;
pub const CSV_HEADER: [&str; 3] = ["bin_start_ms", "bin_end_ms", "count"];
const OVERFLOW_LABEL: &str = "overflow";

#[derive(Debug, Error)]
pub enum TimingError {
    #[error("bin width must be a positive finite number of milliseconds")]
    BadBinWidth,
    #[error("at least two bins are needed (one regular bin plus overflow)")]
    TooFewBins,
    #[error("repetitions must be positive")]
    NoRepetitions,
    #[error("path {path} unavailable: {detail}")]
    PathUnavailable { path: AccessPath, detail: String },
    #[error("invalid histogram CSV: {0}")]
    Csv(String),
}

impl From<csv::Error> for TimingError {
    fn from(err: csv::Error) -> Self {
        Self::Csv(err.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    bin_width_ms: f64,
    counts: Vec<u64>,
    total: u64,
}

impl Default for Histogram {
    fn default() -> Self {
        Self::new(DEFAULT_BIN_WIDTH_MS, DEFAULT_BIN_COUNT).expect("default layout is valid")
    }
}

impl Histogram {
    pub fn new(bin_width_ms: f64, bin_count: usize) -> Result<Self, TimingError> {
        if !(bin_width_ms.is_finite() && bin_width_ms > 0.0) {
            return Err(TimingError::BadBinWidth);
        }
        if bin_count < 2 {
            return Err(TimingError::TooFewBins);
        }
        Ok(Self { bin_width_ms, counts: vec![0; bin_count], total: 0 })
    }

    pub fn bin_width_ms(&self) -> f64 {
        self.bin_width_ms
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    /// Lower edge of the overflow bin.
    pub fn overflow_threshold_ms(&self) -> f64 {
        self.bin_start(self.counts.len() - 1)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn overflow(&self) -> u64 {
        self.counts[self.counts.len() - 1]
    }

    fn bin_start(&self, index: usize) -> f64 {
        index as f64 * self.bin_width_ms
    }

    /// `floor(d / width)` below the threshold, the overflow bin otherwise.
    /// Negative delays count as zero.
    pub fn bin_index(&self, delay_ms: f64) -> usize {
        let last = self.counts.len() - 1;
        let d = delay_ms.max(0.0);
        if d >= self.overflow_threshold_ms() || d.is_nan() {
            return last;
        }
        let mut index = ((d / self.bin_width_ms).floor() as usize).min(last);
        // guard against rounding at exact bin edges
        if index > 0 && self.bin_start(index) > d {
            index -= 1;
        } else if index < last && self.bin_start(index + 1) <= d {
            index += 1;
        }
        index
    }

    pub fn record(&mut self, delay_ms: f64) {
        let index = self.bin_index(delay_ms);
        self.counts[index] += 1;
        self.total += 1;
    }

    pub fn from_samples(bin_width_ms: f64, bin_count: usize, samples: &[f64]) -> Result<Self, TimingError> {
        let mut h = Self::new(bin_width_ms, bin_count)?;
        samples.iter().for_each(|&d| h.record(d));
        Ok(h)
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(CSV_HEADER).expect("in-memory write");
        let last = self.counts.len() - 1;
        for (i, count) in self.counts.iter().enumerate() {
            let start = self.bin_start(i).to_string();
            let end = if i == last { OVERFLOW_LABEL.to_owned() } else { self.bin_start(i + 1).to_string() };
            writer.write_record([start, end, count.to_string()]).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, TimingError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        if reader.headers()?.iter().ne(CSV_HEADER) {
            return Err(TimingError::Csv("unexpected header".into()));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != 3 {
                return Err(TimingError::Csv(format!("row has {} fields", record.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| TimingError::Csv(format!("'{s}': {e}")));
            let count = record[2].parse::<u64>().map_err(|e| TimingError::Csv(format!("count: {e}")))?;
            rows.push((num(&record[0])?, record[1].to_owned(), count));
        }
        let Some((_, last_end, _)) = rows.last() else {
            return Err(TimingError::Csv("no rows".into()));
        };
        if last_end != OVERFLOW_LABEL {
            return Err(TimingError::Csv("final row is not the overflow bin".into()));
        }
        if rows.len() < 2 {
            return Err(TimingError::TooFewBins);
        }
        let width = rows[0].1.parse::<f64>().map_err(|e| TimingError::Csv(e.to_string()))? - rows[0].0;
        let mut h = Self::new(width, rows.len())?;
        for (i, (start, end, count)) in rows.iter().enumerate() {
            if *start != h.bin_start(i) {
                return Err(TimingError::Csv(format!("row {} starts at {start}", i + 1)));
            }
            if i + 1 < rows.len() && end.parse::<f64>().ok() != Some(h.bin_start(i + 1)) {
                return Err(TimingError::Csv(format!("row {} ends at {end}", i + 1)));
            }
            h.counts[i] = *count;
            h.total += count;
        }
        Ok(h)
    }

    /// Horizontal bars over the populated range of bins, longest bar `width`
    /// characters.
    pub fn ascii_chart(&self, width: usize) -> String {
        let mut out = String::new();
        let populated: Vec<usize> = (0..self.counts.len()).filter(|&i| self.counts[i] > 0).collect();
        let (Some(&first), Some(&last)) = (populated.first(), populated.last()) else {
            return "(no samples)\n".to_owned();
        };
        let peak = *self.counts.iter().max().unwrap_or(&1);
        let overflow_bin = self.counts.len() - 1;
        for i in first..=last {
            let label = if i == overflow_bin {
                format!(">= {}", self.bin_start(i))
            } else {
                format!("{}-{}", self.bin_start(i), self.bin_start(i + 1))
            };
            let bar = (self.counts[i] as f64 / peak as f64 * width as f64).round() as usize;
            let _ = writeln!(out, "{label:>14} ms |{} {}", "#".repeat(bar), self.counts[i]);
        }
        out
    }
}

/// Summary statistics of a sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub min_ms: f64,
    pub max_ms: f64,
    pub mean_ms: f64,
    pub median_ms: f64,
    /// Share of samples strictly above one second.
    pub share_above_1000_ms: f64,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        Some(Self {
            count: samples.len(),
            min_ms: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_ms: samples.iter().sum::<f64>() / n,
            median_ms: median(samples)?,
            share_above_1000_ms: samples.iter().filter(|&&d| d > 1000.0).count() as f64 / n,
        })
    }
}

pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 0 { (sorted[mid - 1] + sorted[mid]) / 2.0 } else { sorted[mid] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub path: AccessPath,
    pub command: CommandApdu,
    pub repetitions: u32,
    pub seed: u64,
    pub params: LatencyParams,
    pub se: SeConfig,
}

impl BenchmarkSpec {
    /// SELECT of the card manager, repeated the default number of times.
    pub fn new(path: AccessPath, seed: u64) -> Self {
        Self {
            path,
            command: CommandApdu::new(0x00, 0xA4, 0x04, 0x00).with_data(Aid::card_manager().as_bytes()),
            repetitions: DEFAULT_REPETITIONS,
            seed,
            params: LatencyParams::default(),
            se: SeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub samples: Vec<f64>,
    pub command_len: usize,
    pub response_len: usize,
}

impl BenchmarkRun {
    pub fn histogram(&self, bin_width_ms: f64, bin_count: usize) -> Result<Histogram, TimingError> {
        Histogram::from_samples(bin_width_ms, bin_count, &self.samples)
    }

    pub fn summary(&self) -> Summary {
        Summary::of(&self.samples).expect("runs have at least one sample")
    }
}

/// Runs `spec.repetitions` command/response cycles over the path and returns
/// the reader-side delay of each.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkRun, TimingError> {
    if spec.repetitions == 0 {
        return Err(TimingError::NoRepetitions);
    }
    let unavailable = |detail: String| TimingError::PathUnavailable { path: spec.path, detail };
    let model = LatencyModel::with_params(spec.path, spec.params.clone()).map_err(|e| unavailable(e.to_string()))?;
    let raw = spec.command.to_bytes().map_err(|e| unavailable(e.to_string()))?;
    let mut se = SecureElement::new(spec.se.clone()).map_err(|e| unavailable(e.to_string()))?;

    let mut card: Box<dyn CardInterface + '_> = match spec.path {
        AccessPath::DirectExternal => Box::new(DirectCard::with_model(&mut se, ChannelOrigin::Contactless, model, spec.seed)),
        AccessPath::DirectInternal => Box::new(DirectCard::with_model(&mut se, ChannelOrigin::Internal, model, spec.seed)),
        AccessPath::RelayWifi | AccessPath::RelayInternet => {
            let relay_se = SecureElement::new(spec.se.clone()).map_err(|e| unavailable(e.to_string()))?;
            let app = RelayApp::new(relay_se, RelayAppConfig::default());
            let mut emulator = CardEmulator::new(InProcessLink::new(app), model, spec.seed);
            emulator.activate().map_err(|e| unavailable(e.to_string()))?;
            Box::new(emulator)
        }
    };

    let mut samples = Vec::with_capacity(spec.repetitions as usize);
    let mut response_len = 0;
    for i in 0..spec.repetitions {
        let exchange = card.transceive(&raw).map_err(|e| unavailable(e.to_string()))?;
        if i == 0 {
            let response = ResponseApdu::parse(&exchange.response).map_err(|e| unavailable(e.to_string()))?;
            if !response.sw.is_success() {
                return Err(unavailable(format!("benchmark command answered {}", response.sw)));
            }
            response_len = exchange.response.len();
        }
        samples.push(exchange.elapsed_ms);
    }
    Ok(BenchmarkRun { samples, command_len: raw.len(), response_len })
}
