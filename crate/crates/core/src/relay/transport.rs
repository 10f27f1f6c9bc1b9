//! Frame transports and the serving loop shared by all frame endpoints.

use std::io::{Read, Write};

use thiserror::Error;

use super::frame::{FrameError, FrameKind, WireFrame};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("peer closed the connection")]
    Closed,
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Request/response link: every frame sent gets exactly one frame back.
pub trait FrameTransport {
    fn exchange(&mut self, frame: &WireFrame) -> Result<WireFrame, TransportError>;
}

impl<T: FrameTransport + ?Sized> FrameTransport for Box<T> {
    fn exchange(&mut self, frame: &WireFrame) -> Result<WireFrame, TransportError> {
        (**self).exchange(frame)
    }
}

/// Server side of a frame link.
pub trait FrameHandler {
    fn handle(&mut self, frame: &WireFrame) -> WireFrame;
    /// The link dropped without a `SessionClose`.
    fn transport_lost(&mut self);
    /// The session on this connection is over; the connection should close.
    fn session_ended(&self) -> bool;
}

/// Frames over any byte stream, e.g. a `TcpStream`.
pub struct StreamTransport<S> {
    stream: S,
}

impl<S: Read + Write> StreamTransport<S> {
    pub fn new(stream: S) -> Self {
        Self { stream }
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}

impl<S: Read + Write> FrameTransport for StreamTransport<S> {
    fn exchange(&mut self, frame: &WireFrame) -> Result<WireFrame, TransportError> {
        frame.write_to(&mut self.stream)?;
        WireFrame::read_from(&mut self.stream)?.ok_or(TransportError::Closed)
    }
}

/// In-process pipe to a handler. Frames still pass through their byte
/// encoding so both transports exercise the same wire format.
pub struct InProcessLink<H> {
    handler: H,
    severed: bool,
}

impl<H: FrameHandler> InProcessLink<H> {
    pub fn new(handler: H) -> Self {
        Self { handler, severed: false }
    }

    /// Drops the link abruptly; the handler sees a transport loss.
    pub fn sever(&mut self) {
        if !self.severed {
            self.severed = true;
            self.handler.transport_lost();
        }
    }

    pub fn handler(&self) -> &H {
        &self.handler
    }

    pub fn handler_mut(&mut self) -> &mut H {
        &mut self.handler
    }

    pub fn into_handler(self) -> H {
        self.handler
    }
}

impl<H: FrameHandler> FrameTransport for InProcessLink<H> {
    fn exchange(&mut self, frame: &WireFrame) -> Result<WireFrame, TransportError> {
        if self.severed {
            return Err(TransportError::Closed);
        }
        let (request, _) = WireFrame::decode(&frame.encode()?)?;
        let reply = self.handler.handle(&request);
        let (reply, _) = WireFrame::decode(&reply.encode()?)?;
        Ok(reply)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServeOutcome {
    /// The session ran to its end and the reply was delivered.
    Completed,
    /// The peer went away first; the handler was told.
    Disconnected,
}

/// Serves one session over `stream`, replying to each frame in order.
pub fn serve_connection<H: FrameHandler, S: Read + Write>(
    handler: &mut H,
    stream: &mut S,
) -> Result<ServeOutcome, FrameError> {
    loop {
        let frame = match WireFrame::read_from(stream) {
            Ok(Some(frame)) => frame,
            Ok(None) => {
                handler.transport_lost();
                return Ok(ServeOutcome::Disconnected);
            }
            Err(err) => {
                handler.transport_lost();
                return Err(err);
            }
        };
        let reply = handler.handle(&frame);
        if let Err(err) = reply.write_to(stream) {
            handler.transport_lost();
            return Err(err);
        }
        if handler.session_ended() {
            return Ok(ServeOutcome::Completed);
        }
    }
}

/// Reply for frames a server never expects to receive.
pub(crate) fn unexpected(frame: &WireFrame) -> WireFrame {
    let what = match frame.kind {
        FrameKind::RApdu => "unexpected RApdu frame",
        FrameKind::Error => "unexpected Error frame",
        _ => "unexpected frame",
    };
    WireFrame::error(super::frame::ErrorReason::Protocol, what)
}
