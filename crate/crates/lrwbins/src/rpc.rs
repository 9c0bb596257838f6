//! Minimal RPC for second-stage inference: length-prefixed binary frames
//! over a stream socket, one request per round-trip.
//!
//! The server applies a configurable latency injection before each response
//! so benchmark ratios between the stages can be dialed in with one knob.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crate::config_table::FirstStageTable;
use crate::error::{Error, Result};
use crate::gbdt::{predict_gbdt, GbdtModel};
use crate::rng::SplitMix64;

pub const WIRE_MAGIC: u32 = 0x4C52_5043; // "LRPC"
const MAX_FRAME_BYTES: u32 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct WireRequest {
    pub id: u64,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireStatus {
    Ok = 0,
    SchemaMismatch = 1,
    ServerError = 2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireResponse {
    pub id: u64,
    pub status: WireStatus,
    pub probability: f64,
}

pub fn encode_request(req: &WireRequest) -> Vec<u8> {
    let mut buf = Vec::with_capacity(4 + 8 + 2 + 8 * req.features.len());
    buf.extend_from_slice(&WIRE_MAGIC.to_le_bytes());
    buf.extend_from_slice(&req.id.to_le_bytes());
    buf.extend_from_slice(&(req.features.len() as u16).to_le_bytes());
    for &f in &req.features {
        buf.extend_from_slice(&f.to_le_bytes());
    }
    buf
}

pub fn decode_request(buf: &[u8]) -> Result<WireRequest> {
    let bad = || Error::SchemaMismatch("malformed request frame".into());
    if buf.len() < 14 {
        return Err(bad());
    }
    let magic = u32::from_le_bytes(buf[0..4].try_into().unwrap());
    if magic != WIRE_MAGIC {
        return Err(bad());
    }
    let id = u64::from_le_bytes(buf[4..12].try_into().unwrap());
    let count = u16::from_le_bytes(buf[12..14].try_into().unwrap()) as usize;
    if buf.len() != 14 + 8 * count {
        return Err(bad());
    }
    let features = buf[14..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(WireRequest { id, features })
}

pub fn encode_response(resp: &WireResponse) -> Vec<u8> {
    let mut buf = Vec::with_capacity(17);
    buf.extend_from_slice(&resp.id.to_le_bytes());
    buf.push(resp.status as u8);
    buf.extend_from_slice(&resp.probability.to_le_bytes());
    buf
}

pub fn decode_response(buf: &[u8]) -> Result<WireResponse> {
    if buf.len() != 17 {
        return Err(Error::SchemaMismatch("malformed response frame".into()));
    }
    let id = u64::from_le_bytes(buf[0..8].try_into().unwrap());
    let status = match buf[8] {
        0 => WireStatus::Ok,
        1 => WireStatus::SchemaMismatch,
        2 => WireStatus::ServerError,
        _ => return Err(Error::SchemaMismatch("unknown status byte".into())),
    };
    let probability = f64::from_le_bytes(buf[9..17].try_into().unwrap());
    Ok(WireResponse {
        id,
        status,
        probability,
    })
}

fn io_to_rpc(e: std::io::Error) -> Error {
    match e.kind() {
        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => Error::Timeout,
        std::io::ErrorKind::UnexpectedEof
        | std::io::ErrorKind::ConnectionReset
        | std::io::ErrorKind::ConnectionAborted
        | std::io::ErrorKind::BrokenPipe => Error::Disconnected,
        _ => Error::Io(e),
    }
}

fn write_frame(stream: &mut TcpStream, payload: &[u8]) -> Result<()> {
    let len = (payload.len() as u32).to_le_bytes();
    stream.write_all(&len).map_err(io_to_rpc)?;
    stream.write_all(payload).map_err(io_to_rpc)?;
    Ok(())
}

fn read_frame(stream: &mut TcpStream) -> Result<Vec<u8>> {
    let mut len = [0u8; 4];
    match stream.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) => return Err(io_to_rpc(e)),
    }
    let len = u32::from_le_bytes(len);
    if len > MAX_FRAME_BYTES {
        return Err(Error::SchemaMismatch(format!("frame of {len} bytes")));
    }
    let mut payload = vec![0u8; len as usize];
    stream.read_exact(&mut payload).map_err(io_to_rpc)?;
    Ok(payload)
}

/// Fixed delay plus uniform jitter applied server-side before each response.
#[derive(Debug, Clone, Copy, Default)]
pub struct LatencyInjector {
    pub delay: Duration,
    pub jitter: Duration,
}

impl LatencyInjector {
    pub fn fixed(delay: Duration) -> Self {
        Self {
            delay,
            jitter: Duration::ZERO,
        }
    }

    fn sample(&self, rng: &mut SplitMix64) -> Duration {
        if self.jitter.is_zero() {
            self.delay
        } else {
            self.delay + Duration::from_secs_f64(self.jitter.as_secs_f64() * rng.next_f64())
        }
    }
}

/// Handle to a running server. Dropping it (or calling [`shutdown`]) stops
/// the accept loop and lets worker threads drain.
///
/// [`shutdown`]: ServerHandle::shutdown
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    requests: Arc<AtomicU64>,
    accept_thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Requests answered since startup (any status).
    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.accept_thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

fn handle_connection(
    mut stream: TcpStream,
    model: &GbdtModel,
    injector: LatencyInjector,
    stop: &AtomicBool,
    requests: &AtomicU64,
    mut rng: SplitMix64,
) {
    let _ = stream.set_read_timeout(Some(Duration::from_millis(50)));
    let _ = stream.set_nodelay(true);
    loop {
        if stop.load(Ordering::SeqCst) {
            return;
        }
        let payload = match read_frame(&mut stream) {
            Ok(p) => p,
            Err(Error::Timeout) => continue, // idle; re-check the stop flag
            Err(_) => return,
        };
        requests.fetch_add(1, Ordering::SeqCst);
        let response = match decode_request(&payload) {
            Ok(req) => match predict_gbdt(model, &req.features) {
                Ok(p) => WireResponse {
                    id: req.id,
                    status: WireStatus::Ok,
                    probability: p,
                },
                Err(Error::SchemaMismatch(_)) => WireResponse {
                    id: req.id,
                    status: WireStatus::SchemaMismatch,
                    probability: f64::NAN,
                },
                Err(_) => WireResponse {
                    id: req.id,
                    status: WireStatus::ServerError,
                    probability: f64::NAN,
                },
            },
            Err(_) => WireResponse {
                id: 0,
                status: WireStatus::ServerError,
                probability: f64::NAN,
            },
        };
        let pause = injector.sample(&mut rng);
        if !pause.is_zero() {
            std::thread::sleep(pause);
        }
        if write_frame(&mut stream, &encode_response(&response)).is_err() {
            return;
        }
    }
}

/// Serve a GBDT model on a stream socket. Accepts concurrent connections,
/// one thread per connection.
pub fn serve(model: GbdtModel, bind: &str, injector: LatencyInjector) -> Result<ServerHandle> {
    let listener =
        TcpListener::bind(bind).map_err(|e| Error::BindFailed(format!("{bind}: {e}")))?;
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;

    let stop = Arc::new(AtomicBool::new(false));
    let requests = Arc::new(AtomicU64::new(0));
    let model = Arc::new(model);

    let accept_stop = Arc::clone(&stop);
    let accept_requests = Arc::clone(&requests);
    let accept_thread = std::thread::spawn(move || {
        let mut workers: Vec<JoinHandle<()>> = Vec::new();
        let mut conn_seq = 0u64;
        loop {
            if accept_stop.load(Ordering::SeqCst) {
                break;
            }
            match listener.accept() {
                Ok((stream, _)) => {
                    let _ = stream.set_nonblocking(false);
                    conn_seq += 1;
                    let model = Arc::clone(&model);
                    let stop = Arc::clone(&accept_stop);
                    let requests = Arc::clone(&accept_requests);
                    let rng = SplitMix64::new(conn_seq);
                    workers.push(std::thread::spawn(move || {
                        handle_connection(stream, &model, injector, &stop, &requests, rng);
                    }));
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    std::thread::sleep(Duration::from_millis(2));
                }
                Err(_) => break,
            }
        }
        for w in workers {
            let _ = w.join();
        }
    });

    Ok(ServerHandle {
        addr,
        stop,
        requests,
        accept_thread: Some(accept_thread),
    })
}

/// Single-connection client; not safe for concurrent callers — open one
/// client per worker.
pub struct RpcClient {
    stream: TcpStream,
    next_id: u64,
    sent: u64,
}

impl RpcClient {
    pub fn connect(addr: &str, timeout: Duration) -> Result<Self> {
        let stream = TcpStream::connect(addr).map_err(io_to_rpc)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        Ok(Self {
            stream,
            next_id: 1,
            sent: 0,
        })
    }

    pub fn set_timeout(&mut self, timeout: Duration) -> Result<()> {
        self.stream.set_read_timeout(Some(timeout))?;
        Ok(())
    }

    pub fn sent_requests(&self) -> u64 {
        self.sent
    }

    /// One request/response round-trip. Ids are strictly increasing per
    /// connection and the response id must match.
    pub fn remote_predict(&mut self, row: &[f64]) -> Result<f64> {
        let id = self.next_id;
        self.next_id += 1;
        self.sent += 1;
        let req = WireRequest {
            id,
            features: row.to_vec(),
        };
        write_frame(&mut self.stream, &encode_request(&req))?;
        let resp = decode_response(&read_frame(&mut self.stream)?)?;
        if resp.id != id {
            return Err(Error::Disconnected);
        }
        match resp.status {
            WireStatus::Ok => Ok(resp.probability),
            WireStatus::SchemaMismatch => Err(Error::SchemaMismatch(
                "server rejected the feature vector".into(),
            )),
            WireStatus::ServerError => {
                Err(Error::InvalidParameter("server reported an error".into()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    First,
    Second,
}

/// Route one row: first-stage hit answers locally with no network traffic,
/// a miss falls back to the RPC model.
pub fn multistage_predict(
    first: &FirstStageTable,
    client: &mut RpcClient,
    row: &[f64],
) -> Result<(f64, Stage)> {
    match first.predict(row) {
        Some(p) => Ok((p, Stage::First)),
        None => Ok((client.remote_predict(row)?, Stage::Second)),
    }
}
