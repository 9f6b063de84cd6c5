//! Request/reply channels to a worker.

use std::io::{self, BufReader, ErrorKind};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::{Duration, Instant};

use super::wire::{self, decode_payload, encode_frame, WireMessage};
use super::worker::{serve_worker, WorkerState};

pub trait Transport: Send {
    /// Send one request and wait for the reply carrying the same task id.
    /// Replies to earlier, abandoned requests are discarded.
    fn call(&mut self, msg: &WireMessage, timeout: Duration) -> Result<WireMessage, String>;

    fn endpoint(&self) -> String;
}

/// Misbehaviour injected into an in-process worker, for failure tests.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Fault {
    /// Exit without replying on the n-th query task (1-based).
    pub die_on_task: Option<usize>,
    /// Sleep this long before every query reply.
    pub delay: Option<Duration>,
}

fn is_query(msg: &WireMessage) -> bool {
    matches!(msg, WireMessage::RangeTask { .. } | WireMessage::KnnSampleTask { .. })
}

pub struct InProcessTransport {
    name: String,
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

/// Start a worker on its own thread, reachable through framed in-memory queues.
pub fn spawn_in_process(name: impl Into<String>, fault: Fault) -> InProcessTransport {
    let (req_tx, req_rx) = mpsc::channel::<Vec<u8>>();
    let (rep_tx, rep_rx) = mpsc::channel::<Vec<u8>>();
    thread::spawn(move || {
        let mut state = WorkerState::new();
        let mut queries = 0usize;
        while let Ok(bytes) = req_rx.recv() {
            let reply = match wire::read_frame(&mut &bytes[..]) {
                Ok(Some(payload)) => match decode_payload(&payload) {
                    Ok(msg) => {
                        if is_query(&msg) {
                            queries += 1;
                            if fault.die_on_task == Some(queries) {
                                return;
                            }
                            if let Some(d) = fault.delay {
                                thread::sleep(d);
                            }
                        }
                        let (reply, stop) = state.handle(msg);
                        if stop {
                            let _ = rep_tx.send(encode_frame(&reply));
                            return;
                        }
                        reply
                    }
                    Err(e) => e.into_reply(),
                },
                Ok(None) => continue,
                Err(e) => WireMessage::error(0, wire::codes::PARSE, e.to_string()),
            };
            if rep_tx.send(encode_frame(&reply)).is_err() {
                return;
            }
        }
    });
    InProcessTransport {
        name: name.into(),
        tx: req_tx,
        rx: rep_rx,
    }
}

impl InProcessTransport {
    /// Push raw bytes at the worker, bypassing message encoding.
    pub fn send_raw(&mut self, bytes: Vec<u8>, timeout: Duration) -> Result<WireMessage, String> {
        self.tx.send(bytes).map_err(|_| "worker has exited".to_string())?;
        let frame = self.rx.recv_timeout(timeout).map_err(|e| e.to_string())?;
        parse_reply(&frame)
    }
}

fn parse_reply(frame: &[u8]) -> Result<WireMessage, String> {
    let payload = wire::read_frame(&mut &frame[..])
        .map_err(|e| e.to_string())?
        .ok_or("empty reply frame")?;
    decode_payload(&payload).map_err(|e| format!("undecodable reply: {}", e.text))
}

impl Transport for InProcessTransport {
    fn call(&mut self, msg: &WireMessage, timeout: Duration) -> Result<WireMessage, String> {
        let deadline = Instant::now() + timeout;
        self.tx
            .send(encode_frame(msg))
            .map_err(|_| "worker has exited".to_string())?;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.rx.recv_timeout(left) {
                Ok(frame) => {
                    let reply = parse_reply(&frame)?;
                    if reply.task_id() == msg.task_id() {
                        return Ok(reply);
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Err(format!("no reply within {timeout:?}")),
                Err(RecvTimeoutError::Disconnected) => return Err("connection lost".into()),
            }
        }
    }

    fn endpoint(&self) -> String {
        format!("inproc:{}", self.name)
    }
}

pub struct TcpTransport {
    addr: SocketAddr,
    writer: TcpStream,
    reader: BufReader<TcpStream>,
    /// Set after a timeout leaves a partially read frame on the stream.
    broken: bool,
}

impl TcpTransport {
    pub fn connect(addr: impl ToSocketAddrs, timeout: Duration) -> io::Result<Self> {
        let addr = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(ErrorKind::InvalidInput, "address resolves to nothing"))?;
        let stream = TcpStream::connect_timeout(&addr, timeout)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            addr,
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            broken: false,
        })
    }
}

impl Transport for TcpTransport {
    fn call(&mut self, msg: &WireMessage, timeout: Duration) -> Result<WireMessage, String> {
        if self.broken {
            return Err("connection unusable after an earlier timeout".into());
        }
        let deadline = Instant::now() + timeout;
        wire::write_frame(&mut self.writer, msg).map_err(|e| format!("send failed: {e}"))?;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                self.broken = true;
                return Err(format!("no reply within {timeout:?}"));
            }
            self.reader.get_ref().set_read_timeout(Some(left)).map_err(|e| e.to_string())?;
            match wire::read_frame(&mut self.reader) {
                Ok(Some(payload)) => {
                    let reply = decode_payload(&payload).map_err(|e| format!("undecodable reply: {}", e.text))?;
                    if reply.task_id() == msg.task_id() {
                        return Ok(reply);
                    }
                }
                Ok(None) => return Err("connection closed by worker".into()),
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                    self.broken = true;
                    return Err(format!("no reply within {timeout:?}"));
                }
                Err(e) => return Err(format!("receive failed: {e}")),
            }
        }
    }

    fn endpoint(&self) -> String {
        self.addr.to_string()
    }
}

/// Bind an ephemeral local port and serve a worker on a background thread.
pub fn spawn_tcp_worker() -> io::Result<SocketAddr> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    thread::spawn(move || serve_worker(listener));
    Ok(addr)
}
