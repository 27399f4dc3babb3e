//! Hosts one simulated device in wall-clock time and exposes its frame
//! stream to a single app client.
//!
//! One TCP port serves two bindings carrying identical frame bytes:
//! a raw byte stream, and a WebSocket at `/device` with one frame per
//! binary message. A connection whose first byte is `G` is taken to be a
//! WebSocket upgrade request.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use log::{info, warn};
use mima_core::battery::BatteryParams;
use mima_core::firmware::{FirmwareConfig, FirmwareMode, NackReason};
use mima_core::harness::{self, Action, Rig, Scenario, PLANT_DT, TICK_DT};
use mima_core::protocol::{self, Message, MAX_SECRET_LEN};
use mima_core::thermal::{PlantError, PlantParams};
use thiserror::Error;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio::task::JoinHandle;
use tokio::time::Instant;
use tokio_tungstenite::tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tokio_tungstenite::tungstenite::http::StatusCode;
use tokio_tungstenite::tungstenite::Message as WsMessage;

pub const DEVICE_PATH: &str = "/device";

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("invalid bridge config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("simulation task ended unexpectedly")]
    Stopped,
}

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub listen: String,
    pub params: PlantParams,
    pub cell: BatteryParams,
    pub secret: String,
    /// Simulated seconds per wall-clock second.
    pub time_scale: f64,
    /// Fault script replayed on the simulation clock. Link events are
    /// ignored: the link is the client connection.
    pub overlay: Option<Scenario>,
    pub seed: u64,
    pub initial_soc: f64,
    pub ambient: f64,
}

impl BridgeConfig {
    pub fn new(listen: impl Into<String>, params: PlantParams, secret: impl Into<String>) -> Self {
        Self {
            listen: listen.into(),
            ambient: params.ambient,
            params,
            cell: BatteryParams::default(),
            secret: secret.into(),
            time_scale: 1.0,
            overlay: None,
            seed: 0,
            initial_soc: 1.0,
        }
    }

    pub fn with_time_scale(mut self, time_scale: f64) -> Self {
        self.time_scale = time_scale;
        self
    }

    pub fn with_overlay(mut self, overlay: Option<Scenario>) -> Self {
        if let Some(sc) = &overlay {
            self.ambient = sc.ambient;
            self.initial_soc = sc.initial_soc;
        }
        self.overlay = overlay;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), BridgeError> {
        if !(self.time_scale >= 1.0 && self.time_scale.is_finite()) {
            return Err(BridgeError::Config(format!("time scale must be >= 1, got {}", self.time_scale)));
        }
        if self.secret.is_empty() || self.secret.len() > MAX_SECRET_LEN {
            return Err(BridgeError::Config(format!("secret must be 1..={MAX_SECRET_LEN} bytes")));
        }
        self.params.validate().map_err(|e| BridgeError::Config(e.to_string()))?;
        Ok(())
    }

    fn tick_period(&self) -> Duration {
        Duration::from_secs_f64(TICK_DT / self.time_scale)
    }
}

/// Published after every simulated tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickInfo {
    pub sim_time: f64,
    pub at: Instant,
    pub link_up: bool,
    pub mode: FirmwareMode,
    pub duty_bits: u8,
    pub power_w: f64,
    pub max_coil: f64,
}

enum ClientEvent {
    Attached { id: u64, tx: mpsc::UnboundedSender<Vec<u8>> },
    Bytes { id: u64, bytes: Vec<u8> },
    Detached { id: u64 },
}

pub struct BridgeHandle {
    local_addr: SocketAddr,
    ticks: broadcast::Sender<TickInfo>,
    sim: JoinHandle<Result<(), BridgeError>>,
    accept: JoinHandle<()>,
}

impl BridgeHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn subscribe(&self) -> broadcast::Receiver<TickInfo> {
        self.ticks.subscribe()
    }

    /// Resolves only if the simulation stops.
    pub async fn join(mut self) -> Result<(), BridgeError> {
        let res = (&mut self.sim).await;
        self.accept.abort();
        res.map_err(|_| BridgeError::Stopped)?
    }
}

impl Drop for BridgeHandle {
    fn drop(&mut self) {
        self.sim.abort();
        self.accept.abort();
    }
}

/// Bind, spawn the simulation and accept loop, and return immediately.
pub async fn start(config: BridgeConfig) -> Result<BridgeHandle, BridgeError> {
    config.validate()?;
    let listener = TcpListener::bind(&config.listen).await?;
    let local_addr = listener.local_addr()?;
    let rig = Rig::new(
        config.params,
        config.cell,
        FirmwareConfig::new(config.secret.as_bytes()),
        config.initial_soc,
        config.ambient,
        config.seed,
    )
    .map_err(BridgeError::Config)?;
    let (events_tx, events_rx) = mpsc::unbounded_channel();
    let (ticks, _) = broadcast::channel(1024);
    let sim = tokio::spawn(simulate(rig, config.clone(), events_rx, ticks.clone()));
    let accept = tokio::spawn(accept_loop(listener, events_tx));
    info!("bridge listening on {local_addr} (ws://{local_addr}{DEVICE_PATH})");
    Ok(BridgeHandle {
        local_addr,
        ticks,
        sim,
        accept,
    })
}

pub async fn serve(config: BridgeConfig) -> Result<(), BridgeError> {
    start(config).await?.join().await
}

async fn simulate(
    mut rig: Rig,
    config: BridgeConfig,
    mut events: mpsc::UnboundedReceiver<ClientEvent>,
    ticks: broadcast::Sender<TickInfo>,
) -> Result<(), BridgeError> {
    let period = config.tick_period();
    let overlay: Vec<(u64, Action)> = config
        .overlay
        .iter()
        .flat_map(|sc| sc.events.iter())
        .filter(|e| !matches!(e.action, Action::Link(_)))
        .map(|e| (((e.at / PLANT_DT) - 1e-9).ceil().max(0.0) as u64, e.action.clone()))
        .collect();
    let mut next_event = 0;
    let mut client: Option<(u64, mpsc::UnboundedSender<Vec<u8>>)> = None;
    let start = Instant::now();
    let mut k: u32 = 0;
    loop {
        // deadlines from the start time, so sleep jitter does not accumulate
        tokio::time::sleep_until(start + period * k).await;
        k += 1;
        while let Ok(ev) = events.try_recv() {
            match ev {
                ClientEvent::Attached { id, tx } => client = Some((id, tx)),
                ClientEvent::Bytes { id, bytes } => {
                    if client.as_ref().is_some_and(|(c, _)| *c == id) {
                        rig.send(&bytes);
                    }
                }
                ClientEvent::Detached { id } => {
                    if client.as_ref().is_some_and(|(c, _)| *c == id) {
                        client = None;
                    }
                }
            }
        }
        rig.set_link(client.is_some());
        let rec = rig.tick_with(|rig, sub| {
            while let Some((at, action)) = overlay.get(next_event) {
                if *at > sub {
                    break;
                }
                harness::apply(rig, action);
                next_event += 1;
            }
        })?;
        if let Some((_, tx)) = &client {
            for m in &rec.replies {
                let frame = protocol::encode(m).expect("firmware emits encodable messages");
                let _ = tx.send(frame);
            }
        }
        let _ = ticks.send(TickInfo {
            sim_time: rec.time,
            at: Instant::now(),
            link_up: rig.link_up(),
            mode: rec.mode,
            duty_bits: rec.duty_bits,
            power_w: rec.power_w,
            max_coil: rec.coil.iter().copied().fold(f64::MIN, f64::max),
        });
    }
}

async fn accept_loop(listener: TcpListener, events: mpsc::UnboundedSender<ClientEvent>) {
    let busy = Arc::new(AtomicBool::new(false));
    let next_id = AtomicU64::new(1);
    loop {
        let (stream, peer) = match listener.accept().await {
            Ok(c) => c,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let id = next_id.fetch_add(1, Ordering::Relaxed);
        let events = events.clone();
        let busy = busy.clone();
        tokio::spawn(async move {
            if let Err(e) = handle_connection(stream, peer, id, events, busy).await {
                warn!("client {peer}: {e}");
            }
        });
    }
}

fn busy_frame() -> Vec<u8> {
    protocol::encode(&Message::Nack {
        reason: NackReason::Busy.code(),
    })
    .expect("nack encodes")
}

/// Releases the single-client slot and tells the simulation on drop.
struct Claim {
    id: u64,
    busy: Arc<AtomicBool>,
    events: mpsc::UnboundedSender<ClientEvent>,
}

impl Drop for Claim {
    fn drop(&mut self) {
        let _ = self.events.send(ClientEvent::Detached { id: self.id });
        self.busy.store(false, Ordering::SeqCst);
    }
}

async fn handle_connection(
    stream: TcpStream,
    peer: SocketAddr,
    id: u64,
    events: mpsc::UnboundedSender<ClientEvent>,
    busy: Arc<AtomicBool>,
) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    stream.set_nodelay(true)?;
    let mut first = [0u8; 1];
    if stream.peek(&mut first).await? == 0 {
        return Ok(());
    }
    let claimed = busy
        .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
        .is_ok();
    let claim = claimed.then(|| Claim {
        id,
        busy: busy.clone(),
        events: events.clone(),
    });
    if first[0] == b'G' {
        serve_ws(stream, peer, id, events, claim).await
    } else {
        serve_raw(stream, peer, id, events, claim).await
    }
}

async fn serve_raw(
    mut stream: TcpStream,
    peer: SocketAddr,
    id: u64,
    events: mpsc::UnboundedSender<ClientEvent>,
    claim: Option<Claim>,
) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let Some(_claim) = claim else {
        info!("refusing second client {peer}");
        stream.write_all(&busy_frame()).await?;
        stream.shutdown().await?;
        return Ok(());
    };
    info!("client {peer} attached (stream)");
    let (tx, mut rx) = mpsc::unbounded_channel::<Vec<u8>>();
    events.send(ClientEvent::Attached { id, tx })?;
    let (mut rd, mut wr) = stream.into_split();
    let writer = tokio::spawn(async move {
        while let Some(frame) = rx.recv().await {
            if wr.write_all(&frame).await.is_err() {
                break;
            }
        }
    });
    let mut buf = vec![0u8; 4096];
    loop {
        let n = rd.read(&mut buf).await.unwrap_or(0);
        if n == 0 {
            break;
        }
        events.send(ClientEvent::Bytes {
            id,
            bytes: buf[..n].to_vec(),
        })?;
    }
    writer.abort();
    info!("client {peer} detached");
    Ok(())
}

async fn serve_ws(
    stream: TcpStream,
    peer: SocketAddr,
    id: u64,
    events: mpsc::UnboundedSender<ClientEvent>,
    claim: Option<Claim>,
) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let check_path = |req: &Request, resp: Response| -> Result<Response, ErrorResponse> {
        if req.uri().path() == DEVICE_PATH {
            Ok(resp)
        } else {
            let mut err = ErrorResponse::new(Some(format!("no endpoint at {}", req.uri().path())));
            *err.status_mut() = StatusCode::NOT_FOUND;
            Err(err)
        }
    };
    let ws = tokio_tungstenite::accept_hdr_async(stream, check_path).await?;
    let (mut sink, mut source) = ws.split();
    let Some(_claim) = claim else {
        info!("refusing second client {peer}");
        sink.send(WsMessage::Binary(busy_frame())).await?;
        sink.close().await?;
        return Ok(());
    };
    info!("client {peer} attached ({DEVICE_PATH})");
    let (tx, mut rx) = mpsc::unbounded_channel::<Vec<u8>>();
    events.send(ClientEvent::Attached { id, tx })?;
    let writer = tokio::spawn(async move {
        while let Some(frame) = rx.recv().await {
            if sink.send(WsMessage::Binary(frame)).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    while let Some(msg) = source.next().await {
        match msg {
            Ok(WsMessage::Binary(bytes)) => events.send(ClientEvent::Bytes { id, bytes })?,
            Ok(WsMessage::Close(_)) | Err(_) => break,
            Ok(_) => {}
        }
    }
    writer.abort();
    info!("client {peer} detached");
    Ok(())
}
