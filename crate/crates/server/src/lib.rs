//! Network front end for the simulation.
//!
//! One listening port carries both transports: newline-delimited JSON frames
//! over plain TCP, and the same frames as WebSocket text messages. A
//! connection is classified by peeking at its first bytes.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use ladderfire::gcs::protocol::{Envelope, Message, Receiver};
use ladderfire::runlog::{link, LogRecord};
use ladderfire::runner::Sim;
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message as WsMessage;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {reason}")]
    Bind { addr: String, reason: String },
    #[error("mission task failed: {0}")]
    Task(String),
}

/// How fast sim time runs against the wall clock.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pacing {
    /// Sim seconds per wall second; 1.0 is real time.
    Paced(f64),
    Unpaced,
}

const PEEK_TIMEOUT: Duration = Duration::from_millis(200);
const BROADCAST_DEPTH: usize = 4096;

/// Counters shared by every session.
#[derive(Debug, Default)]
pub struct SessionStats {
    pub malformed: AtomicU64,
    pub accepted: AtomicU64,
    pub connections: AtomicU64,
}

/// A running simulation service.
pub struct Server {
    pub addr: SocketAddr,
    pub stats: Arc<SessionStats>,
    mission: JoinHandle<Result<Sim, ServerError>>,
    acceptor: JoinHandle<()>,
}

impl Server {
    /// Bind `addr` and start the mission loop.
    pub async fn start(addr: &str, sim: Sim, pacing: Pacing) -> Result<Server, ServerError> {
        let listener = bind(addr).await?;
        let addr = listener.local_addr().map_err(|e| ServerError::Bind { addr: addr.to_string(), reason: e.to_string() })?;
        let stats = Arc::new(SessionStats::default());
        let (out_tx, _) = broadcast::channel::<Arc<str>>(BROADCAST_DEPTH);
        let (in_tx, in_rx) = mpsc::unbounded_channel::<Message>();
        // the mission owns the only sender; sessions close when it is taken
        let out_slot = Arc::new(Mutex::new(Some(out_tx)));

        let mission_out = out_slot.clone();
        let mission = tokio::task::spawn_blocking(move || Ok(mission_loop(sim, pacing, in_rx, &mission_out)));

        let acceptor = {
            let stats = stats.clone();
            tokio::spawn(async move {
                loop {
                    let Ok((stream, peer)) = listener.accept().await else { continue };
                    let _ = stream.set_nodelay(true);
                    let Some(rx) = out_slot.lock().expect("slot lock").as_ref().map(|tx| tx.subscribe()) else {
                        log::info!("mission over, refusing {peer}");
                        continue;
                    };
                    stats.connections.fetch_add(1, Ordering::Relaxed);
                    log::info!("console connected from {peer}");
                    let session = LiveSession { inbound: in_tx.clone(), stats: stats.clone() };
                    tokio::spawn(async move {
                        if let Err(e) = run_connection(stream, session, rx).await {
                            log::info!("session {peer} closed: {e}");
                        }
                    });
                }
            })
        };
        Ok(Server { addr, stats, mission, acceptor })
    }

    pub fn malformed_frames(&self) -> u64 {
        self.stats.malformed.load(Ordering::Relaxed)
    }

    /// Wait for the mission to end, then stop accepting connections.
    pub async fn finish(self) -> Result<Sim, ServerError> {
        let sim = self.mission.await.map_err(|e| ServerError::Task(e.to_string()))?;
        self.acceptor.abort();
        sim
    }
}

async fn bind(addr: &str) -> Result<TcpListener, ServerError> {
    TcpListener::bind(addr).await.map_err(|e| ServerError::Bind { addr: addr.to_string(), reason: e.to_string() })
}

fn mission_loop(
    mut sim: Sim,
    pacing: Pacing,
    mut inbound: mpsc::UnboundedReceiver<Message>,
    out: &Mutex<Option<broadcast::Sender<Arc<str>>>>,
) -> Sim {
    let tx = out.lock().expect("slot lock").clone().expect("sender present until the mission ends");
    let dt = sim.world.cfg.dt;
    let start = Instant::now();
    let t0 = sim.now();
    while sim.finished.is_none() {
        while let Ok(msg) = inbound.try_recv() {
            sim.send_console(&msg);
        }
        sim.step();
        for env in sim.console_out.drain(..) {
            // no subscribers is fine
            let _ = tx.send(env.to_line().into());
        }
        if let Pacing::Paced(rate) = pacing {
            let due = start + Duration::from_secs_f64((sim.now() - t0 + dt) / rate);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
    }
    drop(tx);
    out.lock().expect("slot lock").take();
    sim
}

/// Per-connection handling of inbound frames for a live mission.
#[derive(Clone)]
struct LiveSession {
    inbound: mpsc::UnboundedSender<Message>,
    stats: Arc<SessionStats>,
}

impl LiveSession {
    fn on_line(&self, rx: &mut Receiver, line: &str) {
        let line = line.trim();
        if line.is_empty() {
            return;
        }
        let before = rx.malformed;
        match rx.accept_line(line) {
            Some((_, msg)) => {
                self.stats.accepted.fetch_add(1, Ordering::Relaxed);
                let _ = self.inbound.send(msg);
            }
            None => {
                if rx.malformed > before {
                    self.stats.malformed.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
    }
}

/// Does the connection open with an HTTP upgrade request?
async fn is_websocket(stream: &TcpStream) -> bool {
    let mut buf = [0u8; 4];
    let deadline = Instant::now() + PEEK_TIMEOUT;
    loop {
        let remaining = deadline.saturating_duration_since(Instant::now());
        match tokio::time::timeout(remaining, stream.peek(&mut buf)).await {
            Ok(Ok(n)) if n >= 4 => return &buf == b"GET ",
            Ok(Ok(0)) | Ok(Err(_)) | Err(_) => return false,
            Ok(Ok(_)) => tokio::time::sleep(Duration::from_millis(5)).await,
        }
    }
}

async fn run_connection(
    stream: TcpStream,
    session: LiveSession,
    mut out: broadcast::Receiver<Arc<str>>,
) -> Result<(), String> {
    let mut rx = Receiver::default();
    if is_websocket(&stream).await {
        let ws = tokio_tungstenite::accept_async(stream).await.map_err(|e| e.to_string())?;
        let (mut sink, mut source) = ws.split();
        loop {
            tokio::select! {
                frame = source.next() => match frame {
                    Some(Ok(WsMessage::Text(text))) => {
                        for line in text.as_str().lines() {
                            session.on_line(&mut rx, line);
                        }
                    }
                    Some(Ok(WsMessage::Close(_))) | None => return Ok(()),
                    Some(Ok(_)) => {}
                    Some(Err(e)) => return Err(e.to_string()),
                },
                line = out.recv() => match line {
                    Ok(line) => sink.send(WsMessage::text(line.to_string())).await.map_err(|e| e.to_string())?,
                    Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("slow console skipped {n} frames"),
                    Err(broadcast::error::RecvError::Closed) => {
                        let _ = sink.send(WsMessage::Close(None)).await;
                        return Ok(());
                    }
                },
            }
        }
    } else {
        let (read, mut write) = stream.into_split();
        let mut lines = BufReader::new(read).lines();
        loop {
            tokio::select! {
                line = lines.next_line() => match line {
                    Ok(Some(line)) => session.on_line(&mut rx, &line),
                    Ok(None) => return Ok(()),
                    // invalid UTF-8 and the like: count it and keep the session
                    Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                        session.stats.malformed.fetch_add(1, Ordering::Relaxed);
                    }
                    Err(e) => return Err(e.to_string()),
                },
                line = out.recv() => match line {
                    Ok(line) => write.write_all(format!("{line}\n").as_bytes()).await.map_err(|e| e.to_string())?,
                    Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("slow console skipped {n} frames"),
                    Err(broadcast::error::RecvError::Closed) => return Ok(()),
                },
            }
        }
    }
}

/// Logged GCS-to-console envelopes with their sim times, in log order.
pub fn console_stream(records: &[LogRecord]) -> Vec<(f64, Envelope)> {
    records
        .iter()
        .filter_map(|r| match r {
            LogRecord::Msg { t, link: l, env } if l == link::GCS_TO_CONSOLE => Some((*t, env.clone())),
            _ => None,
        })
        .collect()
}

/// Re-serves a logged console stream; every connection gets the full replay.
pub struct ReplayServer {
    pub addr: SocketAddr,
    acceptor: JoinHandle<()>,
}

impl ReplayServer {
    pub async fn start(addr: &str, records: &[LogRecord], pacing: Pacing) -> Result<ReplayServer, ServerError> {
        let listener = bind(addr).await?;
        let addr = listener.local_addr().map_err(|e| ServerError::Bind { addr: addr.to_string(), reason: e.to_string() })?;
        let stream: Arc<[(f64, Arc<str>)]> =
            console_stream(records).into_iter().map(|(t, e)| (t, Arc::from(e.to_line()))).collect();
        let acceptor = tokio::spawn(async move {
            loop {
                let Ok((conn, peer)) = listener.accept().await else { continue };
                let _ = conn.set_nodelay(true);
                let stream = stream.clone();
                tokio::spawn(async move {
                    if let Err(e) = replay_connection(conn, stream, pacing).await {
                        log::info!("replay to {peer} ended: {e}");
                    }
                });
            }
        });
        Ok(ReplayServer { addr, acceptor })
    }

    pub fn stop(self) {
        self.acceptor.abort();
    }
}

async fn replay_connection(conn: TcpStream, stream: Arc<[(f64, Arc<str>)]>, pacing: Pacing) -> Result<(), String> {
    let t0 = stream.first().map(|(t, _)| *t).unwrap_or(0.0);
    let start = tokio::time::Instant::now();
    let wait = |t: f64| async move {
        if let Pacing::Paced(rate) = pacing {
            tokio::time::sleep_until(start + Duration::from_secs_f64((t - t0).max(0.0) / rate)).await;
        }
    };
    if is_websocket(&conn).await {
        let mut ws = tokio_tungstenite::accept_async(conn).await.map_err(|e| e.to_string())?;
        for (t, line) in stream.iter() {
            wait(*t).await;
            ws.send(WsMessage::text(line.to_string())).await.map_err(|e| e.to_string())?;
        }
        ws.close(None).await.map_err(|e| e.to_string())
    } else {
        let mut conn = conn;
        for (t, line) in stream.iter() {
            wait(*t).await;
            conn.write_all(format!("{line}\n").as_bytes()).await.map_err(|e| e.to_string())?;
        }
        conn.shutdown().await.map_err(|e| e.to_string())
    }
}
