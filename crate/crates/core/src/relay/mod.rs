//! Relay channel: wire frames, latency injection and the two relay endpoints.

pub mod emulator;
pub mod frame;
pub mod latency;
pub mod relay_app;
pub mod transport;

pub use emulator::{CardEmulator, Injected, RelayError};
pub use frame::{ErrorReason, FrameError, FrameKind, WireFrame};
pub use latency::{sample_delay, AccessPath, DelaySample, DelaySampler, LatencyModel, LatencyParams};
pub use relay_app::{RelayApp, RelayAppConfig, SeHost, SessionState};
pub use transport::{
    serve_connection, FrameHandler, FrameTransport, InProcessLink, ServeOutcome, StreamTransport,
    TransportError,
};
