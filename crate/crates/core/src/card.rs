//! Reader-side view of a card: anything that answers raw C-APDUs.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::relay::latency::{DelaySample, DelaySampler, LatencyModel};
use crate::relay::AccessPath;
use crate::se::{ChannelOrigin, SecureElement};

/// One command/response cycle as seen by the reader.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub response: Vec<u8>,
    /// Reader-side round trip.
    pub elapsed_ms: f64,
    /// Part of `elapsed_ms` injected by a relay; zero on direct paths.
    pub relay_ms: f64,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CardError {
    /// The card left the field or its link broke.
    #[error("card removed: {0}")]
    Removed(String),
}

pub trait CardInterface {
    fn transceive(&mut self, command: &[u8]) -> Result<Exchange, CardError>;
}

/// How delays turn into elapsed time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TimingMode {
    /// Elapsed time is the sampled delay; no sleeping, fully reproducible.
    #[default]
    Simulated,
    /// Sleeps for the sampled delay and reports measured wall-clock time,
    /// which includes local compute.
    Realtime,
}

impl TimingMode {
    /// Runs `work`, then accounts for `delay` according to the mode.
    pub(crate) fn apply<T>(self, delay: DelaySample, work: impl FnOnce() -> T) -> (T, f64) {
        match self {
            Self::Simulated => (work(), delay.total_ms()),
            Self::Realtime => {
                let start = Instant::now();
                let out = work();
                std::thread::sleep(Duration::from_secs_f64(delay.total_ms() / 1000.0));
                (out, start.elapsed().as_secs_f64() * 1000.0)
            }
        }
    }
}

/// A secure element reached without any relay, over either interface.
pub struct DirectCard<'a> {
    se: &'a mut SecureElement,
    origin: ChannelOrigin,
    sampler: DelaySampler,
    timing: TimingMode,
}

impl<'a> DirectCard<'a> {
    /// Uses the latency model matching the interface.
    pub fn new(se: &'a mut SecureElement, origin: ChannelOrigin, seed: u64) -> Self {
        let path = match origin {
            ChannelOrigin::Internal => AccessPath::DirectInternal,
            ChannelOrigin::Contactless => AccessPath::DirectExternal,
        };
        Self::with_model(se, origin, LatencyModel::for_path(path), seed)
    }

    pub fn with_model(
        se: &'a mut SecureElement,
        origin: ChannelOrigin,
        model: LatencyModel,
        seed: u64,
    ) -> Self {
        Self { se, origin, sampler: DelaySampler::new(model, seed), timing: TimingMode::Simulated }
    }

    pub fn timing(mut self, timing: TimingMode) -> Self {
        self.timing = timing;
        self
    }

    pub fn origin(&self) -> ChannelOrigin {
        self.origin
    }

    pub fn se(&mut self) -> &mut SecureElement {
        self.se
    }
}

impl CardInterface for DirectCard<'_> {
    fn transceive(&mut self, command: &[u8]) -> Result<Exchange, CardError> {
        let delay = self.sampler.next_sample();
        let (se, origin) = (&mut *self.se, self.origin);
        let (response, elapsed_ms) = self.timing.apply(delay, || se.transmit(origin, command));
        Ok(Exchange { response, elapsed_ms, relay_ms: 0.0 })
    }
}
