//! Message transports between the gNB and an xApp.
//!
//! Every transport carries encoded lines. Sending never waits for a reply and
//! polling never blocks: whatever has arrived is returned, in order.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::thread::{self, JoinHandle};

use super::a1::A1Policy;
use super::xapp::XappAgent;
use crate::error::{Error, Result};

/// One side of an E2 link.
pub trait E2Endpoint {
    /// Queues an encoded message for the peer.
    fn send(&mut self, line: &str) -> Result<()>;
    /// Returns every message received since the last poll.
    fn poll(&mut self) -> Result<Vec<String>>;
}

fn disconnected() -> Error {
    Error::Io(std::io::Error::new(
        std::io::ErrorKind::BrokenPipe,
        "E2 peer disconnected",
    ))
}

/// In-memory, ordered, lossless channel end.
#[derive(Debug)]
pub struct ChannelEndpoint {
    tx: Sender<String>,
    rx: Receiver<String>,
}

pub fn channel_pair() -> (ChannelEndpoint, ChannelEndpoint) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    (
        ChannelEndpoint { tx: a_tx, rx: a_rx },
        ChannelEndpoint { tx: b_tx, rx: b_rx },
    )
}

impl ChannelEndpoint {
    /// Blocks for the next line; `None` once the peer is gone.
    pub fn recv(&self) -> Option<String> {
        self.rx.recv().ok()
    }
}

impl E2Endpoint for ChannelEndpoint {
    fn send(&mut self, line: &str) -> Result<()> {
        self.tx.send(line.to_owned()).map_err(|_| disconnected())
    }

    fn poll(&mut self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        loop {
            match self.rx.try_recv() {
                Ok(line) => out.push(line),
                Err(TryRecvError::Empty | TryRecvError::Disconnected) => return Ok(out),
            }
        }
    }
}

/// Runs an xApp on its own thread behind a channel. Returns the gNB-side
/// endpoint; the thread ends when that endpoint is dropped.
pub fn spawn_channel_xapp(policy: A1Policy) -> (ChannelEndpoint, JoinHandle<Result<XappAgent>>) {
    let (gnb, xapp) = channel_pair();
    let handle = thread::spawn(move || {
        let mut agent = XappAgent::new(policy);
        let tx = xapp.tx.clone();
        agent.serve(
            || xapp.recv().map(Ok),
            |line| tx.send(line.to_owned()).map_err(|_| disconnected()),
        )?;
        Ok(agent)
    });
    (gnb, handle)
}

/// gNB side of a TCP link. A reader thread moves incoming lines into a
/// queue so that [`poll`](E2Endpoint::poll) never blocks.
#[derive(Debug)]
pub struct TcpEndpoint {
    stream: TcpStream,
    rx: Receiver<std::io::Result<String>>,
}

impl TcpEndpoint {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        Self::from_stream(stream)
    }

    pub fn from_stream(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { stream, rx })
    }
}

impl E2Endpoint for TcpEndpoint {
    fn send(&mut self, line: &str) -> Result<()> {
        self.stream.write_all(line.as_bytes())?;
        Ok(())
    }

    fn poll(&mut self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        loop {
            match self.rx.try_recv() {
                Ok(line) => out.push(line?),
                Err(TryRecvError::Empty | TryRecvError::Disconnected) => return Ok(out),
            }
        }
    }
}

impl Drop for TcpEndpoint {
    fn drop(&mut self) {
        let _ = self.stream.shutdown(std::net::Shutdown::Both);
    }
}

/// Accepts one gNB connection and serves it until the gNB disconnects.
pub fn serve_xapp(listener: &TcpListener, policy: A1Policy) -> Result<XappAgent> {
    let (stream, _) = listener.accept()?;
    serve_stream(stream, policy)
}

/// Serves one gNB connection with a fresh agent until it closes.
pub fn serve_stream(stream: TcpStream, policy: A1Policy) -> Result<XappAgent> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut lines = BufReader::new(stream).lines();
    let mut agent = XappAgent::new(policy);
    agent.serve(
        || lines.next(),
        |line| writer.write_all(line.as_bytes()).map_err(Error::from),
    )?;
    Ok(agent)
}
