//! Runs one [`Node`] state machine over real sockets.
//!
//! A single actor task owns the node. Connection tasks feed it frames and
//! carry its outgoing payloads. Inbound connections are labelled `conn:N`;
//! outbound connections are opened on first use from the directory and
//! labelled with the endpoint id they were opened for, so replies a node
//! addresses to `server:B` travel back over the link it opened to B.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use relaymesh_core::addr::EndpointId;
use relaymesh_core::node::{Effect, LogEvent, Node};
use relaymesh_core::wire::{Frame, FrameDecoder, Payload};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};

pub const CONNECT_TIMEOUT: Duration = Duration::from_secs(5);

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Where log lines go. Daemons print them; tests collect them.
pub type LogSink = Arc<dyn Fn(&str) + Send + Sync>;

pub fn stdout_sink() -> LogSink {
    Arc::new(|line| println!("{line}"))
}

/// Outgoing payloads for one connection.
pub type Outbox = mpsc::UnboundedSender<Payload>;

type Query = Box<dyn FnOnce(&dyn std::any::Any) + Send>;

enum Event {
    Opened { label: EndpointId, generation: u64, outbox: Outbox },
    Frame { label: EndpointId, frame: Frame },
    Closed { label: EndpointId, generation: u64 },
    Query(Query),
}

/// A cloneable way into a running host.
#[derive(Clone)]
pub struct HostHandle {
    events: mpsc::UnboundedSender<Event>,
    counter: Arc<AtomicU64>,
}

impl HostHandle {
    /// A fresh `conn:N` label and the generation that goes with it.
    pub fn inbound_label(&self) -> (EndpointId, u64) {
        let n = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
        (EndpointId::new(format!("conn:{n}")), n)
    }

    fn generation(&self) -> u64 {
        self.counter.fetch_add(1, Ordering::Relaxed) + 1
    }

    pub fn opened(&self, label: EndpointId, generation: u64, outbox: Outbox) {
        let _ = self.events.send(Event::Opened { label, generation, outbox });
    }

    pub fn frame(&self, label: EndpointId, frame: Frame) {
        let _ = self.events.send(Event::Frame { label, frame });
    }

    pub fn closed(&self, label: EndpointId, generation: u64) {
        let _ = self.events.send(Event::Closed { label, generation });
    }

    /// Runs `f` against the node inside the actor and returns its result.
    /// `None` if the host has stopped or the node is not an `N`.
    pub async fn inspect<N, R, F>(&self, f: F) -> Option<R>
    where
        N: 'static,
        R: Send + 'static,
        F: FnOnce(&N) -> R + Send + 'static,
    {
        let (tx, rx) = oneshot::channel();
        let query = move |any: &dyn std::any::Any| {
            if let Some(node) = any.downcast_ref::<N>() {
                let _ = tx.send(f(node));
            }
        };
        self.events.send(Event::Query(Box::new(query))).ok()?;
        rx.await.ok()
    }
}

pub struct Host<N: Node> {
    node: N,
    directory: BTreeMap<EndpointId, String>,
    conns: HashMap<EndpointId, (u64, Outbox)>,
    events: mpsc::UnboundedReceiver<Event>,
    handle: HostHandle,
    log: LogSink,
}

impl<N: Node + 'static> Host<N> {
    /// `directory` maps endpoint ids this node sends to onto `host:port`.
    pub fn new(node: N, directory: BTreeMap<EndpointId, String>) -> Self {
        let (tx, rx) = mpsc::unbounded_channel();
        Host {
            node,
            directory,
            conns: HashMap::new(),
            events: rx,
            handle: HostHandle {
                events: tx,
                counter: Arc::new(AtomicU64::new(0)),
            },
            log: stdout_sink(),
        }
    }

    pub fn with_log(mut self, log: LogSink) -> Self {
        self.log = log;
        self
    }

    pub fn handle(&self) -> HostHandle {
        self.handle.clone()
    }

    fn log_event(&self, ev: &LogEvent) {
        (self.log)(&ev.render(now_ms()));
    }

    /// Processes events forever. The host holds a handle of its own for the
    /// connections it opens, so the event channel never closes; abort the
    /// task to stop it.
    pub async fn run(mut self) {
        while let Some(ev) = self.events.recv().await {
            match ev {
                Event::Opened { label, generation, outbox } => {
                    self.conns.insert(label, (generation, outbox));
                }
                Event::Frame { label, frame } => {
                    let fx = self.node.handle(&label, &frame, now_ms());
                    self.apply(fx).await;
                }
                Event::Closed { label, generation } => {
                    if self.conns.get(&label).is_some_and(|(g, _)| *g == generation) {
                        self.conns.remove(&label);
                        let fx = self.node.disconnected(&label, now_ms());
                        self.apply(fx).await;
                    }
                }
                Event::Query(f) => f(&self.node as &dyn std::any::Any),
            }
        }
    }

    async fn apply(&mut self, effects: Vec<Effect>) {
        for effect in effects {
            match effect {
                Effect::Log(ev) => self.log_event(&ev),
                Effect::Send { to, payload } => self.send(to, payload).await,
            }
        }
    }

    async fn send(&mut self, to: EndpointId, payload: Payload) {
        if let Some((_, outbox)) = self.conns.get(&to) {
            if outbox.send(payload.clone()).is_ok() {
                return;
            }
            self.conns.remove(&to);
        }
        let Some(addr) = self.directory.get(&to).cloned() else {
            self.log_event(&LogEvent::new("drop", self.node.id(), format!("no_route to={to}")));
            return;
        };
        let stream = match tokio::time::timeout(CONNECT_TIMEOUT, TcpStream::connect(&addr)).await {
            Ok(Ok(s)) => s,
            Ok(Err(e)) => {
                self.log_event(&LogEvent::new("drop", self.node.id(), format!("connect_failed to={to} {e}")));
                return;
            }
            Err(_) => {
                self.log_event(&LogEvent::new("drop", self.node.id(), format!("connect_timeout to={to}")));
                return;
            }
        };
        let generation = self.handle.generation();
        let outbox = spawn_tcp(stream, to.clone(), generation, self.handle.clone(), self.log.clone(), false);
        let _ = outbox.send(payload);
        self.conns.insert(to, (generation, outbox));
    }
}

/// Accepts connections forever, labelling each `conn:N`.
pub async fn serve_tcp(listener: TcpListener, handle: HostHandle, log: LogSink) {
    loop {
        match listener.accept().await {
            Ok((stream, _)) => {
                let (label, generation) = handle.inbound_label();
                spawn_tcp(stream, label, generation, handle.clone(), log.clone(), true);
            }
            Err(e) => {
                log(&LogEvent::new("accept_error", "listener", e.to_string()).render(now_ms()));
                tokio::time::sleep(Duration::from_millis(100)).await;
            }
        }
    }
}

/// Starts the reader and writer tasks for one stream. With `announce`, the
/// actor hears about the connection before any of its frames.
fn spawn_tcp(
    stream: TcpStream,
    label: EndpointId,
    generation: u64,
    handle: HostHandle,
    log: LogSink,
    announce: bool,
) -> Outbox {
    let _ = stream.set_nodelay(true);
    let (mut rd, mut wr) = stream.into_split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Payload>();
    if announce {
        handle.opened(label.clone(), generation, tx.clone());
    }

    tokio::spawn(async move {
        while let Some(p) = rx.recv().await {
            let Ok(bytes) = p.to_frame().and_then(|f| f.encode()) else {
                continue;
            };
            if wr.write_all(&bytes).await.is_err() {
                break;
            }
        }
        let _ = wr.shutdown().await;
    });

    tokio::spawn(async move {
        let mut dec = FrameDecoder::new();
        let mut buf = vec![0u8; 16 * 1024];
        'read: loop {
            let n = match rd.read(&mut buf).await {
                Ok(0) | Err(_) => break,
                Ok(n) => n,
            };
            dec.push(&buf[..n]);
            loop {
                match dec.next_frame() {
                    Ok(Some(frame)) => handle.frame(label.clone(), frame),
                    Ok(None) => break,
                    Err(e) => {
                        // The stream cannot be resynchronised after a bad header.
                        log(&LogEvent::new("drop", &label, format!("framing_error {e}")).render(now_ms()));
                        break 'read;
                    }
                }
            }
        }
        handle.closed(label, generation);
    });
    tx
}
