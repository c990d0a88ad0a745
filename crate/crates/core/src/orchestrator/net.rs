//! TCP runner: every database is an addressable endpoint with its own
//! listener, and the leader talks to each database over one connection.
//!
//! Senders write their frames and half-close. A database reads every
//! incoming connection to the end, and once its randomness is complete and
//! the leader's queries have arrived it writes its answers back on the
//! leader's connection.

use std::collections::BTreeMap;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{IpAddr, Ipv4Addr, Shutdown, SocketAddr, TcpListener, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use crate::client::{AnswerMsg, DatabaseNode};
use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::leader::QueryMsg;
use crate::model::Endpoint;

use super::session::{Prepared, SessionTranscript};
use super::wire::{read_frame, write_frame, Envelope, Message};

pub const LOOPBACK: IpAddr = IpAddr::V4(Ipv4Addr::LOCALHOST);
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(20);

struct Link {
    session_id: u64,
    field: PrimeField,
    timeout: Duration,
}

impl Link {
    fn connect(&self, addr: SocketAddr) -> Result<TcpStream> {
        let s = TcpStream::connect_timeout(&addr, self.timeout)
            .map_err(|e| Error::Transport(format!("connect {addr}: {e}")))?;
        s.set_read_timeout(Some(self.timeout))?;
        s.set_write_timeout(Some(self.timeout))?;
        s.set_nodelay(true)?;
        Ok(s)
    }

    fn send_all(&self, stream: &TcpStream, msgs: impl IntoIterator<Item = Message>) -> Result<()> {
        let mut w = BufWriter::new(stream);
        for message in msgs {
            write_frame(
                &mut w,
                &Envelope {
                    session_id: self.session_id,
                    message,
                },
            )?;
        }
        w.flush()?;
        drop(w);
        stream.shutdown(Shutdown::Write)?;
        Ok(())
    }

    fn read_all(&self, stream: &TcpStream) -> Result<Vec<Message>> {
        let mut r = BufReader::new(stream);
        let mut out = Vec::new();
        while let Some(env) = read_frame(&mut r, self.field)? {
            if env.session_id != self.session_id {
                return Err(Error::ProtocolViolation(format!(
                    "frame for session {} on session {}",
                    env.session_id, self.session_id
                )));
            }
            out.push(env.message);
        }
        Ok(out)
    }
}

/// What a database saw and said.
struct Served {
    received: Vec<Message>,
    answers: Vec<AnswerMsg>,
}

fn serve(mut node: DatabaseNode, listener: TcpListener, addrs: &BTreeMap<Endpoint, SocketAddr>, link: &Link) -> Result<Served> {
    let me = node.endpoint();
    let outgoing = node.outgoing_randomness();
    thread::scope(|scope| {
        let sender = scope.spawn(move || -> Result<()> {
            let mut by_dest: BTreeMap<Endpoint, Vec<Message>> = BTreeMap::new();
            for m in outgoing {
                by_dest.entry(m.dest).or_default().push(Message::Randomness(m));
            }
            for (dest, msgs) in by_dest {
                let addr = addrs
                    .get(&dest)
                    .ok_or_else(|| Error::ProtocolViolation(format!("{me} sends to unknown endpoint {dest}")))?;
                link.send_all(&link.connect(*addr)?, msgs)?;
            }
            Ok(())
        });

        let mut received = Vec::new();
        let mut query_conn: Option<(TcpStream, Vec<QueryMsg>)> = None;
        let deadline = Instant::now() + link.timeout;
        listener.set_nonblocking(true)?;
        while !(node.randomness_complete() && query_conn.is_some()) {
            let stream = match listener.accept() {
                Ok((s, _)) => s,
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    if Instant::now() > deadline {
                        return Err(Error::Transport(format!("{me} timed out waiting for peers")));
                    }
                    thread::sleep(Duration::from_millis(1));
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            stream.set_nonblocking(false)?;
            stream.set_read_timeout(Some(link.timeout))?;
            stream.set_write_timeout(Some(link.timeout))?;
            let msgs = link.read_all(&stream)?;
            let mut queries = Vec::new();
            for m in msgs {
                match &m {
                    Message::Randomness(r) => node.receive_randomness(r)?,
                    Message::Query(q) => queries.push(q.clone()),
                    Message::Answer(_) => {
                        return Err(Error::ProtocolViolation(format!("{me} received an answer")));
                    }
                }
                received.push(m);
            }
            if !queries.is_empty() {
                if query_conn.is_some() {
                    return Err(Error::ProtocolViolation(format!("{me} received a second query round")));
                }
                query_conn = Some((stream, queries));
            }
        }
        let (stream, queries) = query_conn.expect("loop exits with queries");
        let answers = node.answer(&queries)?;
        link.send_all(&stream, answers.iter().cloned().map(Message::Answer))?;
        sender
            .join()
            .map_err(|_| Error::Transport(format!("{me} sender panicked")))??;
        Ok(Served { received, answers })
    })
}

fn joined<T>(r: thread::Result<Result<T>>) -> Result<T> {
    r.map_err(|_| Error::Transport("endpoint thread panicked".into()))?
}

fn query_database(addr: SocketAddr, queries: Vec<QueryMsg>, link: &Link) -> Result<Vec<AnswerMsg>> {
    let stream = link.connect(addr)?;
    link.send_all(&stream, queries.into_iter().map(Message::Query))?;
    link.read_all(&stream)?
        .into_iter()
        .map(|m| match m {
            Message::Answer(a) => Ok(a),
            other => Err(Error::ProtocolViolation(format!(
                "leader received a {:?} message",
                other.phase()
            ))),
        })
        .collect()
}

/// Runs a session over TCP on `ip`. The returned log lists what every
/// endpoint received, grouped by phase.
pub fn run_networked(prep: &Prepared, ip: IpAddr, timeout: Duration) -> Result<SessionTranscript> {
    let link = Link {
        session_id: prep.session_id,
        field: prep.field,
        timeout,
    };
    let nodes = prep.database_nodes()?;
    let mut listeners = Vec::with_capacity(nodes.len());
    let mut addrs = BTreeMap::new();
    for n in &nodes {
        let l = TcpListener::bind((ip, 0)).map_err(|e| Error::Transport(format!("bind {ip}: {e}")))?;
        addrs.insert(n.endpoint(), l.local_addr()?);
        listeners.push(l);
    }
    let mut batches: BTreeMap<Endpoint, Vec<QueryMsg>> = BTreeMap::new();
    for q in prep.query_messages() {
        batches.entry(q.dest).or_default().push(q);
    }

    let (served, answers) = thread::scope(|scope| {
        let servers: Vec<_> = nodes
            .into_iter()
            .zip(listeners)
            .map(|(node, listener)| {
                let (addrs, link) = (&addrs, &link);
                scope.spawn(move || serve(node, listener, addrs, link))
            })
            .collect();
        let fetchers: Vec<_> = batches
            .into_iter()
            .map(|(dest, qs)| {
                let (addr, link) = (addrs[&dest], &link);
                scope.spawn(move || query_database(addr, qs, link))
            })
            .collect();
        let served = servers.into_iter().map(|h| joined(h.join())).collect::<Vec<_>>();
        let answers = fetchers.into_iter().map(|h| joined(h.join())).collect::<Vec<_>>();
        (served, answers)
    });
    let served = served.into_iter().collect::<Result<Vec<Served>>>()?;
    let answers: Vec<AnswerMsg> = answers.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();

    let sent: usize = served.iter().map(|s| s.answers.len()).sum();
    if sent != answers.len() {
        return Err(Error::Transport(format!("{sent} answers sent, {} received", answers.len())));
    }
    let mut randomness = Vec::new();
    let mut queries = Vec::new();
    for s in served {
        for m in s.received {
            match m {
                Message::Query(_) => queries.push(m),
                _ => randomness.push(m),
            }
        }
    }
    let result = prep.decode(&answers)?;
    let log = randomness
        .into_iter()
        .chain(queries)
        .chain(answers.into_iter().map(Message::Answer))
        .map(|m| prep.envelope(m))
        .collect();
    Ok(prep.transcript(log, result))
}
