//! Session coordinator for distributed aggregation over TCP.
//!
//! Machines send only their selected index sets. A session is opened for
//! `k` machines and a rule; once the `k`-th report lands the aggregate is
//! computed exactly once and served to every poller. Sessions that do not
//! fill up before their deadline expire without aggregating.
//!
//! Wire format: one JSON object per line, tagged by `type`.
//!
//! ```text
//! → {"type":"open","k":3,"d":4,"rule":"adages"}
//! ← {"type":"ack","session_id":"…","received":0,"expected":3}
//! → {"type":"report","session_id":"…","machine_id":0,"d":4,"selected":[0,1]}
//! ← {"type":"ack",…} or {"type":"result",…}
//! → {"type":"poll","session_id":"…"}
//! ```

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::aggregation::{aggregate, AggregationRule};
use crate::selection::SelectionSet;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_CAPACITY: usize = 1024;
pub const BIND_ENV: &str = "ADAGES_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:7878";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownSession,
    Duplicate,
    DimensionMismatch,
    TimedOut,
    Capacity,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{code:?}: {message}")]
pub struct ServiceError {
    pub code: ErrorCode,
    pub message: String,
}

impl ServiceError {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ServiceError {
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMessage {
    pub session_id: String,
    pub machine_id: usize,
    pub d: usize,
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultMessage {
    pub session_id: String,
    pub rule: AggregationRule,
    pub threshold_used: usize,
    pub c0: usize,
    pub selected: Vec<usize>,
    /// Sizes in machine-id order.
    pub machine_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Open {
        k: usize,
        d: usize,
        rule: AggregationRule,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_secs: Option<u64>,
    },
    Report(ReportMessage),
    Poll {
        session_id: String,
    },
    Ack {
        session_id: String,
        received: usize,
        expected: usize,
    },
    Result(ResultMessage),
    Error {
        code: ErrorCode,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session_id: Option<String>,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct CoordinatorConfig {
    pub timeout: Duration,
    /// Maximum number of live sessions.
    pub capacity: usize,
}

impl Default for CoordinatorConfig {
    fn default() -> Self {
        CoordinatorConfig {
            timeout: DEFAULT_TIMEOUT,
            capacity: DEFAULT_CAPACITY,
        }
    }
}

#[derive(Debug)]
struct Session {
    expected_k: usize,
    d: usize,
    rule: AggregationRule,
    received: BTreeMap<usize, SelectionSet>,
    deadline: Instant,
    result: Option<ResultMessage>,
}

impl Session {
    fn expired(&self, now: Instant) -> bool {
        self.result.is_none() && now >= self.deadline
    }

    /// Completed or expired sessions are dropped one timeout after their
    /// deadline so pollers still get an answer for a while.
    fn stale(&self, now: Instant, grace: Duration) -> bool {
        now >= self.deadline + grace
    }
}

/// Outcome of an accepted report or a poll.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Progress {
    Pending { received: usize, expected: usize },
    Done(ResultMessage),
}

/// Thread-safe session table. The outer lock guards only the map; each
/// session has its own lock, held while its reports are validated and, for
/// the last one, while the aggregate is computed.
#[derive(Debug, Default)]
pub struct Coordinator {
    config: CoordinatorConfig,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl Coordinator {
    pub fn new(config: CoordinatorConfig) -> Self {
        Coordinator {
            config,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn open_session(&self, expected_k: usize, d: usize, rule: AggregationRule) -> Result<String, ServiceError> {
        self.open_session_with_timeout(expected_k, d, rule, self.config.timeout)
    }

    pub fn open_session_with_timeout(
        &self,
        expected_k: usize,
        d: usize,
        rule: AggregationRule,
        timeout: Duration,
    ) -> Result<String, ServiceError> {
        if expected_k == 0 {
            return Err(ServiceError::new(ErrorCode::Invalid, "expected_k must be at least 1"));
        }
        if d == 0 {
            return Err(ServiceError::new(ErrorCode::Invalid, "dimension must be at least 1"));
        }
        if let AggregationRule::FixedThreshold(c) = rule {
            if c == 0 || c > expected_k {
                return Err(ServiceError::new(
                    ErrorCode::Invalid,
                    format!("threshold {c} outside [1, {expected_k}]"),
                ));
            }
        }
        let now = Instant::now();
        let mut sessions = lock(&self.sessions);
        sessions.retain(|_, s| !lock(s).stale(now, self.config.timeout));
        let live = sessions.values().filter(|s| lock(s).result.is_none()).count();
        if live >= self.config.capacity {
            return Err(ServiceError::new(
                ErrorCode::Capacity,
                format!("{live} sessions already open"),
            ));
        }
        let id = Uuid::new_v4().to_string();
        sessions.insert(
            id.clone(),
            Arc::new(Mutex::new(Session {
                expected_k,
                d,
                rule,
                received: BTreeMap::new(),
                deadline: now + timeout,
                result: None,
            })),
        );
        Ok(id)
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        lock(&self.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::new(ErrorCode::UnknownSession, format!("no session {id}")))
    }

    pub fn submit_report(&self, report: &ReportMessage) -> Result<Progress, ServiceError> {
        let handle = self.session(&report.session_id)?;
        let mut session = lock(&handle);
        if report.d != session.d {
            return Err(ServiceError::new(
                ErrorCode::DimensionMismatch,
                format!("session has d={}, report has d={}", session.d, report.d),
            ));
        }
        let set = SelectionSet::new(report.d, report.selected.iter().copied())
            .map_err(|e| ServiceError::new(ErrorCode::Invalid, e.to_string()))?;
        if let Some(previous) = session.received.get(&report.machine_id) {
            if *previous != set {
                return Err(ServiceError::new(
                    ErrorCode::Duplicate,
                    format!("machine {} already reported a different set", report.machine_id),
                ));
            }
            // identical retry: answer as for the original report
            return Ok(progress(&session));
        }
        if session.expired(Instant::now()) {
            return Err(ServiceError::new(
                ErrorCode::TimedOut,
                "session expired before all reports arrived",
            ));
        }
        if session.result.is_some() || report.machine_id >= session.expected_k {
            return Err(ServiceError::new(
                ErrorCode::Invalid,
                format!("machine id {} outside [0, {})", report.machine_id, session.expected_k),
            ));
        }
        session.received.insert(report.machine_id, set);
        if session.received.len() == session.expected_k {
            let sets: Vec<SelectionSet> = session.received.values().cloned().collect();
            let outcome =
                aggregate(&sets, session.rule).map_err(|e| ServiceError::new(ErrorCode::Invalid, e.to_string()))?;
            session.result = Some(ResultMessage {
                session_id: report.session_id.clone(),
                rule: session.rule,
                threshold_used: outcome.threshold_used,
                c0: outcome.c0,
                selected: outcome.selected.members().to_vec(),
                machine_sizes: sets.iter().map(SelectionSet::size).collect(),
            });
        }
        Ok(progress(&session))
    }

    pub fn poll(&self, session_id: &str) -> Result<Progress, ServiceError> {
        let handle = self.session(session_id)?;
        let session = lock(&handle);
        if session.expired(Instant::now()) {
            return Err(ServiceError::new(
                ErrorCode::TimedOut,
                format!(
                    "session expired with {} of {} reports",
                    session.received.len(),
                    session.expected_k
                ),
            ));
        }
        Ok(progress(&session))
    }

    /// Dispatches one decoded request.
    pub fn handle(&self, message: Message) -> Message {
        let session_hint = match &message {
            Message::Report(r) => Some(r.session_id.clone()),
            Message::Poll { session_id } => Some(session_id.clone()),
            _ => None,
        };
        let reply = match message {
            Message::Open {
                k,
                d,
                rule,
                timeout_secs,
            } => {
                let timeout = timeout_secs.map(Duration::from_secs).unwrap_or(self.config.timeout);
                self.open_session_with_timeout(k, d, rule, timeout)
                    .map(|id| Message::Ack {
                        session_id: id,
                        received: 0,
                        expected: k,
                    })
            }
            Message::Report(report) => self
                .submit_report(&report)
                .map(|p| progress_message(&report.session_id, p)),
            Message::Poll { session_id } => self.poll(&session_id).map(|p| progress_message(&session_id, p)),
            _ => Err(ServiceError::new(
                ErrorCode::Invalid,
                "only open, report and poll are accepted",
            )),
        };
        reply.unwrap_or_else(|e| Message::Error {
            code: e.code,
            message: e.message,
            session_id: session_hint,
        })
    }

    /// Decodes one request line and encodes the reply.
    pub fn handle_line(&self, line: &str) -> String {
        let reply = match serde_json::from_str::<Message>(line) {
            Ok(message) => self.handle(message),
            Err(e) => Message::Error {
                code: ErrorCode::Invalid,
                message: format!("malformed message: {e}"),
                session_id: None,
            },
        };
        serde_json::to_string(&reply).expect("messages serialize")
    }
}

fn progress(session: &Session) -> Progress {
    match &session.result {
        Some(result) => Progress::Done(result.clone()),
        None => Progress::Pending {
            received: session.received.len(),
            expected: session.expected_k,
        },
    }
}

fn progress_message(session_id: &str, progress: Progress) -> Message {
    match progress {
        Progress::Done(result) => Message::Result(result),
        Progress::Pending { received, expected } => Message::Ack {
            session_id: session_id.to_string(),
            received,
            expected,
        },
    }
}

fn serve_connection(stream: TcpStream, coordinator: &Coordinator) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut reply = coordinator.handle_line(&line);
        reply.push('\n');
        writer.write_all(reply.as_bytes())?;
    }
    Ok(())
}

/// A listening coordinator running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
    pub coordinator: Arc<Coordinator>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_and_join();
        }
    }
}

fn accept_loop(listener: TcpListener, coordinator: Arc<Coordinator>, stop: Arc<AtomicBool>) {
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let coordinator = Arc::clone(&coordinator);
        thread::spawn(move || {
            let _ = serve_connection(stream, &coordinator);
        });
    }
}

/// Binds and serves on a background thread (one thread per connection).
pub fn spawn_server<A: ToSocketAddrs>(addr: A, config: CoordinatorConfig) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let coordinator = Arc::new(Coordinator::new(config));
    let stop = Arc::new(AtomicBool::new(false));
    let thread = {
        let coordinator = Arc::clone(&coordinator);
        let stop = Arc::clone(&stop);
        thread::spawn(move || accept_loop(listener, coordinator, stop))
    };
    Ok(ServerHandle {
        addr,
        stop,
        thread: Some(thread),
        coordinator,
    })
}

/// Binds and serves on the calling thread until the process exits.
pub fn serve<A: ToSocketAddrs>(addr: A, config: CoordinatorConfig) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr)?;
    accept_loop(
        listener,
        Arc::new(Coordinator::new(config)),
        Arc::new(AtomicBool::new(false)),
    );
    Ok(())
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("server closed the connection")]
    Closed,
    #[error("server error {0}")]
    Server(ServiceError),
    #[error("unexpected reply: {0:?}")]
    Unexpected(Box<Message>),
    #[error("no result after {0:?}")]
    Wait(Duration),
}

/// Blocking line-oriented client.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        Ok(Client {
            writer: stream.try_clone()?,
            reader: BufReader::new(stream),
        })
    }

    /// Sends a message and returns the raw reply, errors included.
    pub fn request(&mut self, message: &Message) -> Result<Message, ClientError> {
        let mut line = serde_json::to_string(message)?;
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(ClientError::Closed);
        }
        Ok(serde_json::from_str(&reply)?)
    }

    fn checked(&mut self, message: &Message) -> Result<Message, ClientError> {
        match self.request(message)? {
            Message::Error { code, message, .. } => Err(ClientError::Server(ServiceError { code, message })),
            other => Ok(other),
        }
    }

    pub fn open(&mut self, k: usize, d: usize, rule: AggregationRule) -> Result<String, ClientError> {
        match self.checked(&Message::Open {
            k,
            d,
            rule,
            timeout_secs: None,
        })? {
            Message::Ack { session_id, .. } => Ok(session_id),
            other => Err(ClientError::Unexpected(Box::new(other))),
        }
    }

    pub fn report(&mut self, session_id: &str, machine_id: usize, set: &SelectionSet) -> Result<Message, ClientError> {
        self.checked(&Message::Report(ReportMessage {
            session_id: session_id.to_string(),
            machine_id,
            d: set.dimension(),
            selected: set.members().to_vec(),
        }))
    }

    pub fn poll(&mut self, session_id: &str) -> Result<Message, ClientError> {
        self.checked(&Message::Poll {
            session_id: session_id.to_string(),
        })
    }

    /// Polls until the result is available or `limit` elapses.
    pub fn wait_result(&mut self, session_id: &str, limit: Duration) -> Result<ResultMessage, ClientError> {
        let start = Instant::now();
        loop {
            match self.poll(session_id)? {
                Message::Result(result) => return Ok(result),
                Message::Ack { .. } if start.elapsed() < limit => thread::sleep(Duration::from_millis(5)),
                Message::Ack { .. } => return Err(ClientError::Wait(limit)),
                other => return Err(ClientError::Unexpected(Box::new(other))),
            }
        }
    }
}
