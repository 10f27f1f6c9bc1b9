//! Round-trip delay models for the four measured access paths.
//!
//! Parameters are fitted to the published ranges and peaks, not to raw
//! measurements. Each sample draws from its own ChaCha stream selected by the
//! sample index, so sample `i` of `RelayWifi` reuses the base draw of sample `i`
//! of `DirectInternal` under the same seed.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessPath {
    /// External reader talking to the secure element over its contactless interface.
    DirectExternal,
    /// On-phone app talking to the secure element over the internal interface.
    DirectInternal,
    /// Internal access relayed over a local wireless network.
    RelayWifi,
    /// Internal access relayed over a cellular internet connection.
    RelayInternet,
}

impl AccessPath {
    pub const ALL: [AccessPath; 4] =
        [Self::DirectExternal, Self::DirectInternal, Self::RelayWifi, Self::RelayInternet];

    /// Short name used by the CLI and in file names.
    pub fn short_name(self) -> &'static str {
        match self {
            Self::DirectExternal => "external",
            Self::DirectInternal => "internal",
            Self::RelayWifi => "wifi",
            Self::RelayInternet => "internet",
        }
    }
}

impl fmt::Display for AccessPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unknown access path '{0}' (expected external, internal, wifi or internet)")]
pub struct UnknownPath(pub String);

impl FromStr for AccessPath {
    type Err = UnknownPath;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "external" | "direct-external" => Ok(Self::DirectExternal),
            "internal" | "direct-internal" => Ok(Self::DirectInternal),
            "wifi" | "relay-wifi" => Ok(Self::RelayWifi),
            "internet" | "relay-internet" => Ok(Self::RelayInternet),
            _ => Err(UnknownPath(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("invalid latency parameter: {0}")]
pub struct LatencyError(pub String);

/// All values in milliseconds unless named otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyParams {
    pub external_mean_ms: f64,
    pub external_sd_ms: f64,
    pub internal_min_ms: f64,
    pub internal_max_ms: f64,
    /// Bounds of the delay the wifi relay adds on top of internal access.
    pub wifi_min_ms: f64,
    pub wifi_max_ms: f64,
    /// Lower bound of every delay the internet relay adds.
    pub internet_floor_ms: f64,
    /// Mode of the light lognormal component, measured above the floor.
    pub internet_mode_ms: f64,
    pub internet_sigma: f64,
    /// Probability of drawing from the heavy component.
    pub internet_heavy_weight: f64,
    /// Lower bound of the heavy component's added delay.
    pub internet_heavy_min_ms: f64,
    /// Median of the heavy lognormal, measured above `internet_heavy_min_ms`.
    pub internet_heavy_median_ms: f64,
    pub internet_heavy_sigma: f64,
}

impl Default for LatencyParams {
    fn default() -> Self {
        Self {
            external_mean_ms: 30.0,
            external_sd_ms: 3.0,
            internal_min_ms: 50.0,
            internal_max_ms: 80.0,
            wifi_min_ms: 100.0,
            wifi_max_ms: 210.0,
            internet_floor_ms: 150.0,
            internet_mode_ms: 150.0,
            internet_sigma: 0.5,
            internet_heavy_weight: 0.55,
            internet_heavy_min_ms: 1000.0,
            internet_heavy_median_ms: 400.0,
            internet_heavy_sigma: 0.8,
        }
    }
}

impl LatencyParams {
    pub fn validate(&self) -> Result<(), LatencyError> {
        let fields = [
            ("external_mean_ms", self.external_mean_ms),
            ("external_sd_ms", self.external_sd_ms),
            ("internal_min_ms", self.internal_min_ms),
            ("internal_max_ms", self.internal_max_ms),
            ("wifi_min_ms", self.wifi_min_ms),
            ("wifi_max_ms", self.wifi_max_ms),
            ("internet_floor_ms", self.internet_floor_ms),
            ("internet_mode_ms", self.internet_mode_ms),
            ("internet_heavy_min_ms", self.internet_heavy_min_ms),
            ("internet_heavy_median_ms", self.internet_heavy_median_ms),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(LatencyError(format!("{name} must be a finite non-negative number")));
            }
        }
        if self.internal_min_ms > self.internal_max_ms {
            return Err(LatencyError("internal_min_ms exceeds internal_max_ms".into()));
        }
        if self.wifi_min_ms > self.wifi_max_ms {
            return Err(LatencyError("wifi_min_ms exceeds wifi_max_ms".into()));
        }
        for (name, sigma) in
            [("internet_sigma", self.internet_sigma), ("internet_heavy_sigma", self.internet_heavy_sigma)]
        {
            if !sigma.is_finite() || sigma <= 0.0 {
                return Err(LatencyError(format!("{name} must be positive")));
            }
        }
        if self.internet_mode_ms <= 0.0 || self.internet_heavy_median_ms <= 0.0 {
            return Err(LatencyError("lognormal location parameters must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.internet_heavy_weight) {
            return Err(LatencyError("internet_heavy_weight must lie in [0, 1]".into()));
        }
        if self.internet_heavy_min_ms < self.internet_floor_ms {
            return Err(LatencyError("internet_heavy_min_ms is below internet_floor_ms".into()));
        }
        Ok(())
    }
}

/// One round-trip delay split into the direct-access part and the part the
/// relay adds on top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelaySample {
    pub base_ms: f64,
    pub added_ms: f64,
}

impl DelaySample {
    pub fn total_ms(&self) -> f64 {
        self.base_ms + self.added_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LatencyModel {
    /// Constant delay; `Fixed(0.0)` is the degenerate zero-delay model.
    Fixed(f64),
    Path { path: AccessPath, params: LatencyParams },
}

impl LatencyModel {
    pub fn zero() -> Self {
        Self::Fixed(0.0)
    }

    pub fn for_path(path: AccessPath) -> Self {
        Self::Path { path, params: LatencyParams::default() }
    }

    pub fn with_params(path: AccessPath, params: LatencyParams) -> Result<Self, LatencyError> {
        params.validate()?;
        Ok(Self::Path { path, params })
    }

    pub fn path(&self) -> Option<AccessPath> {
        match self {
            Self::Fixed(_) => None,
            Self::Path { path, .. } => Some(*path),
        }
    }

    /// Sample `index` of the sequence seeded by `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> DelaySample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        self.draw(&mut rng)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> DelaySample {
        let (path, p) = match self {
            Self::Fixed(ms) => return DelaySample { base_ms: ms.max(0.0), added_ms: 0.0 },
            Self::Path { path, params } => (*path, params),
        };
        if path == AccessPath::DirectExternal {
            let normal = Normal::new(p.external_mean_ms, p.external_sd_ms).expect("validated sd");
            return DelaySample { base_ms: normal.sample(rng).max(0.0), added_ms: 0.0 };
        }
        let base_ms = uniform(rng, p.internal_min_ms, p.internal_max_ms);
        let added_ms = match path {
            AccessPath::DirectInternal | AccessPath::DirectExternal => 0.0,
            AccessPath::RelayWifi => uniform(rng, p.wifi_min_ms, p.wifi_max_ms),
            AccessPath::RelayInternet => {
                if rng.random::<f64>() < p.internet_heavy_weight {
                    let mu = p.internet_heavy_median_ms.ln();
                    let heavy = LogNormal::new(mu, p.internet_heavy_sigma).expect("validated sigma");
                    p.internet_heavy_min_ms + heavy.sample(rng)
                } else {
                    // mode of LogNormal(mu, s) is exp(mu - s^2)
                    let s = p.internet_sigma;
                    let light = LogNormal::new(p.internet_mode_ms.ln() + s * s, s)
                        .expect("validated sigma");
                    p.internet_floor_ms + light.sample(rng)
                }
            }
        };
        DelaySample { base_ms, added_ms }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi { lo } else { rng.random_range(lo..=hi) }
}

/// Free-function form of [`LatencyModel::sample`] returning the total delay.
pub fn sample_delay(model: &LatencyModel, seed: u64, index: u64) -> f64 {
    model.sample(seed, index).total_ms()
}

/// Walks the sample sequence of one model and seed.
#[derive(Debug, Clone)]
pub struct DelaySampler {
    model: LatencyModel,
    seed: u64,
    next: u64,
}

impl DelaySampler {
    pub fn new(model: LatencyModel, seed: u64) -> Self {
        Self { model, seed, next: 0 }
    }

    pub fn model(&self) -> &LatencyModel {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_sample(&mut self) -> DelaySample {
        let sample = self.model.sample(self.seed, self.next);
        self.next += 1;
        sample
    }
}
