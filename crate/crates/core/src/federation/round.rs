//! One selection round: clients report once, the server waits for all of
//! them, ranks, and broadcasts the ranking (or an abort) back.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{read_frame, write_frame, Message, Party, ProtocolMessage};
use super::runlog::RunLog;
use crate::client::ClientReport;
use crate::error::{Error, Result};
use crate::pareto::FeatureRanking;
use crate::server::{self, AggregationMode};

/// Extra time a client waits for the server's answer beyond the round timeout.
const REPLY_GRACE: Duration = Duration::from_secs(5);
const ACCEPT_POLL: Duration = Duration::from_millis(2);

/// Server-side knobs for a round.
#[derive(Debug, Clone)]
pub struct RoundSettings {
    pub num_clients: u32,
    pub timeout: Duration,
    pub aggregation: AggregationMode,
    pub log: RunLog,
}

/// What the server ends up with after a successful round.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerOutcome {
    pub ranking: FeatureRanking,
    /// Accepted reports, ascending by client id.
    pub reports: Vec<ClientReport>,
}

trait ReplyChannel: Send {
    fn deliver(&mut self, msg: &ProtocolMessage) -> Result<()>;
}

impl ReplyChannel for Sender<ProtocolMessage> {
    fn deliver(&mut self, msg: &ProtocolMessage) -> Result<()> {
        self.send(msg.clone())
            .map_err(|_| Error::Protocol("client channel closed".into()))
    }
}

impl ReplyChannel for TcpStream {
    fn deliver(&mut self, msg: &ProtocolMessage) -> Result<()> {
        write_frame(self, msg)
    }
}

enum Incoming {
    Message(ProtocolMessage, Option<Box<dyn ReplyChannel>>),
    Malformed(String),
}

/// Collects exactly one report per client id, then ranks and broadcasts.
fn serve(
    incoming: Receiver<Incoming>,
    mut replies: BTreeMap<u32, Box<dyn ReplyChannel>>,
    settings: &RoundSettings,
) -> Result<ServerOutcome> {
    let log = &settings.log;
    let m = settings.num_clients;
    log.record("round_started", None, None);
    let deadline = Instant::now() + settings.timeout;
    let mut reports: BTreeMap<u32, ClientReport> = BTreeMap::new();
    let mut stray_replies: Vec<Box<dyn ReplyChannel>> = Vec::new();

    let collected: Result<()> = loop {
        if reports.len() == m as usize {
            break Ok(());
        }
        let remaining = deadline.saturating_duration_since(Instant::now());
        let missing = || (0..m).filter(|id| !reports.contains_key(id)).collect::<Vec<_>>();
        match incoming.recv_timeout(remaining) {
            Ok(Incoming::Malformed(reason)) => break Err(Error::Protocol(reason)),
            Ok(Incoming::Message(msg, reply)) => {
                let id = match msg.sender {
                    Party::Client(id) => id,
                    Party::Server => break Err(Error::Protocol("server message sent to server".into())),
                };
                if let Some(reply) = reply {
                    if replies.contains_key(&id) {
                        stray_replies.push(reply);
                    } else {
                        replies.insert(id, reply);
                    }
                }
                if let Err(e) = msg.validate() {
                    break Err(e);
                }
                if id >= m {
                    break Err(Error::Protocol(format!("unknown client id {id}")));
                }
                match msg.message {
                    Message::Report(report) => {
                        if reports.contains_key(&id) {
                            break Err(Error::DuplicateClient(id));
                        }
                        log.record("report_received", Some(id), None);
                        reports.insert(id, report);
                    }
                    Message::Abort(reason) => {
                        break Err(Error::Aborted(format!("client {id}: {reason}")))
                    }
                    Message::Ranking(_) => {
                        break Err(Error::Protocol(format!("client {id} sent a ranking")))
                    }
                }
            }
            Err(RecvTimeoutError::Timeout) => break Err(Error::Timeout { missing: missing() }),
            Err(RecvTimeoutError::Disconnected) => {
                break Err(Error::Aborted(format!(
                    "all clients disconnected before reporting; missing {:?}",
                    missing()
                )))
            }
        }
    };

    let result = collected.and_then(|()| {
        let reports: Vec<ClientReport> = reports.into_values().collect();
        let ranking = server::global_ranking(&reports, settings.aggregation)?;
        log.record("ranked", None, None);
        Ok(ServerOutcome { ranking, reports })
    });

    match &result {
        Ok(outcome) => {
            let msg = ProtocolMessage::ranking(outcome.ranking.clone());
            for (id, reply) in replies.iter_mut() {
                if reply.deliver(&msg).is_ok() {
                    log.record("ranking_sent", Some(*id), None);
                }
            }
        }
        Err(e) => {
            let reason = e.to_string();
            log.record("abort", None, Some(&reason));
            let msg = ProtocolMessage::abort(Party::Server, reason);
            for reply in replies.values_mut().chain(stray_replies.iter_mut()) {
                let _ = reply.deliver(&msg);
            }
        }
    }
    result
}

/// Work a client performs to produce its report.
pub type ReportTask = Box<dyn FnOnce() -> Result<ClientReport> + Send>;

/// One participant of a round.
pub struct ClientTask {
    pub client_id: u32,
    pub compute: ReportTask,
}

impl ClientTask {
    pub fn new(client_id: u32, compute: impl FnOnce() -> Result<ClientReport> + Send + 'static) -> Self {
        ClientTask {
            client_id,
            compute: Box::new(compute),
        }
    }
}

/// Result of a whole round as seen by every party.
#[derive(Debug)]
pub struct RoundOutcome {
    pub server: Result<ServerOutcome>,
    /// What each client received, ascending by client id.
    pub clients: Vec<(u32, Result<FeatureRanking>)>,
}

impl RoundOutcome {
    /// The server's ranking, provided every client received that same ranking.
    pub fn into_result(self) -> Result<ServerOutcome> {
        let outcome = self.server?;
        for (id, got) in self.clients {
            match got {
                Ok(r) if r == outcome.ranking => {}
                Ok(_) => {
                    return Err(Error::Protocol(format!("client {id} received a different ranking")))
                }
                Err(e) => return Err(Error::Protocol(format!("client {id} failed: {e}"))),
            }
        }
        Ok(outcome)
    }
}

fn client_message(id: u32, compute: ReportTask) -> ProtocolMessage {
    match compute() {
        Ok(report) => ProtocolMessage::report(report),
        Err(e) => ProtocolMessage::abort(Party::Client(id), e.to_string()),
    }
}

fn client_verdict(reply: Result<ProtocolMessage>) -> Result<FeatureRanking> {
    match reply?.message {
        Message::Ranking(r) => Ok(r),
        Message::Abort(reason) => Err(Error::Aborted(reason)),
        Message::Report(_) => Err(Error::Protocol("server sent a report".into())),
    }
}

/// Runs a round over in-process channels, one thread per client.
pub fn run_in_process(settings: &RoundSettings, clients: Vec<ClientTask>) -> RoundOutcome {
    let (to_server, incoming) = mpsc::channel::<Incoming>();
    let mut replies: BTreeMap<u32, Box<dyn ReplyChannel>> = BTreeMap::new();
    let mut handles = Vec::new();
    let wait = settings.timeout + REPLY_GRACE;
    for task in clients {
        let (reply_tx, reply_rx) = mpsc::channel::<ProtocolMessage>();
        if !replies.contains_key(&task.client_id) {
            replies.insert(task.client_id, Box::new(reply_tx));
        }
        let tx = to_server.clone();
        let id = task.client_id;
        handles.push((
            id,
            thread::spawn(move || {
                let msg = client_message(id, task.compute);
                // the server may already have aborted and gone away
                let _ = tx.send(Incoming::Message(msg, None));
                client_verdict(reply_rx.recv_timeout(wait).map_err(|_| Error::Timeout {
                    missing: vec![id],
                }))
            }),
        ));
    }
    drop(to_server);
    let server = serve(incoming, replies, settings);
    RoundOutcome {
        server,
        clients: join_clients(handles),
    }
}

fn join_clients(
    handles: Vec<(u32, thread::JoinHandle<Result<FeatureRanking>>)>,
) -> Vec<(u32, Result<FeatureRanking>)> {
    let mut out: Vec<(u32, Result<FeatureRanking>)> = handles
        .into_iter()
        .map(|(id, h)| {
            let r = h
                .join()
                .unwrap_or_else(|_| Err(Error::Aborted(format!("client {id} panicked"))));
            (id, r)
        })
        .collect();
    out.sort_by_key(|(id, _)| *id);
    out
}

/// Serves one round on `listener`: accepts connections until every client
/// has reported or the timeout expires.
pub fn serve_tcp(listener: TcpListener, settings: &RoundSettings) -> Result<ServerOutcome> {
    listener.set_nonblocking(true)?;
    let (tx, incoming) = mpsc::channel::<Incoming>();
    let stop = Arc::new(AtomicBool::new(false));
    let deadline = Instant::now() + settings.timeout;
    let acceptor = {
        let stop = Arc::clone(&stop);
        thread::spawn(move || {
            while !stop.load(Ordering::Relaxed) && Instant::now() < deadline {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let tx = tx.clone();
                        thread::spawn(move || read_connection(stream, deadline, tx));
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
                    Err(e) => {
                        let _ = tx.send(Incoming::Malformed(format!("accept failed: {e}")));
                        return;
                    }
                }
            }
        })
    };
    let result = serve(incoming, BTreeMap::new(), settings);
    stop.store(true, Ordering::Relaxed);
    let _ = acceptor.join();
    result
}

fn read_connection(stream: TcpStream, deadline: Instant, tx: Sender<Incoming>) {
    let setup = || -> Result<TcpStream> {
        stream.set_nonblocking(false)?;
        let remaining = deadline.saturating_duration_since(Instant::now());
        stream.set_read_timeout(Some(remaining.max(Duration::from_millis(1))))?;
        Ok(stream)
    };
    let event = match setup() {
        Ok(mut stream) => match read_frame(&mut stream) {
            Ok(msg) => Incoming::Message(msg, Some(Box::new(stream))),
            Err(Error::Stream(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                // a silent connection is treated like a missing client
                return;
            }
            Err(e) => Incoming::Malformed(format!("bad frame from peer: {e}")),
        },
        Err(e) => Incoming::Malformed(format!("connection setup failed: {e}")),
    };
    let _ = tx.send(event);
}

/// Client side of a TCP round: sends one message and waits for the answer.
pub fn submit_tcp(addr: SocketAddr, msg: &ProtocolMessage, wait: Duration) -> Result<FeatureRanking> {
    let mut stream = TcpStream::connect_timeout(&addr, wait)?;
    stream.set_read_timeout(Some(wait))?;
    write_frame(&mut stream, msg)?;
    client_verdict(read_frame(&mut stream))
}

/// Runs a round over loopback TCP: binds `addr` (port 0 picks a free port),
/// serves, and connects one client thread per task.
pub fn run_tcp(addr: &str, settings: &RoundSettings, clients: Vec<ClientTask>) -> Result<RoundOutcome> {
    let bind = addr
        .to_socket_addrs()
        .map_err(|e| Error::InvalidArgument(format!("bad address {addr:?}: {e}")))?
        .next()
        .ok_or_else(|| Error::InvalidArgument(format!("address {addr:?} did not resolve")))?;
    let listener = TcpListener::bind(bind)?;
    let local = listener.local_addr()?;
    let wait = settings.timeout + REPLY_GRACE;
    let handles: Vec<_> = clients
        .into_iter()
        .map(|task| {
            let id = task.client_id;
            (
                id,
                thread::spawn(move || submit_tcp(local, &client_message(id, task.compute), wait)),
            )
        })
        .collect();
    let server = serve_tcp(listener, settings);
    Ok(RoundOutcome {
        server,
        clients: join_clients(handles),
    })
}
