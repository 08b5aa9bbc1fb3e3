//! Line-protocol transport: one long-lived child process, one JSON document
//! per line on its stdin/stdout. Responses are routed back to callers by id,
//! so any number of requests may be outstanding.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use super::protocol::{parse_incoming, Hello, Incoming, Request, Response, PROTOCOL_VERSION};
use super::{ClassifyError, Classifier, Query};

type Pending = Arc<Mutex<HashMap<u64, mpsc::Sender<Response>>>>;

struct Session {
    child: Mutex<Child>,
    stdin: Mutex<ChildStdin>,
    pending: Pending,
    alive: Arc<AtomicBool>,
}

impl Drop for Session {
    fn drop(&mut self) {
        if let Ok(mut child) = self.child.lock() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Session {
    fn spawn(argv: &[String], timeout: Duration) -> Result<Session, ClassifyError> {
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ClassifyError::Transport(format!("cannot start `{}`: {e}", argv[0])))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let stderr = child.stderr.take().expect("piped stderr");

        let program = argv[0].clone();
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                log::debug!("[{program}] {line}");
            }
        });

        let pending: Pending = Arc::default();
        let alive = Arc::new(AtomicBool::new(true));
        let (hello_tx, hello_rx) = mpsc::channel::<Result<Hello, String>>();
        {
            let pending = pending.clone();
            let alive = alive.clone();
            thread::spawn(move || {
                let mut hello_tx = Some(hello_tx);
                for line in BufReader::new(stdout).lines() {
                    let Ok(line) = line else { break };
                    if line.trim().is_empty() {
                        continue;
                    }
                    match parse_incoming(&line) {
                        Ok(Incoming::Hello(h)) => {
                            if let Some(tx) = hello_tx.take() {
                                let _ = tx.send(Ok(h));
                            }
                        }
                        Ok(Incoming::Response(r)) => {
                            if let Some(tx) = hello_tx.take() {
                                let _ = tx.send(Err(format!("expected hello, got `{line}`")));
                            }
                            if let Some(tx) = pending.lock().expect("pending lock").remove(&r.id) {
                                let _ = tx.send(r);
                            } else {
                                log::warn!("response for unknown or expired id {}", r.id);
                            }
                        }
                        Err(e) => {
                            if let Some(tx) = hello_tx.take() {
                                let _ = tx.send(Err(e));
                            } else {
                                log::warn!("ignoring unparseable line from classifier: {e}");
                            }
                        }
                    }
                }
                alive.store(false, Ordering::SeqCst);
                // Dropping the senders wakes every waiter with a disconnect.
                pending.lock().expect("pending lock").clear();
            });
        }

        let hello = Hello::current().to_line();
        writeln!(stdin, "{hello}")
            .and_then(|_| stdin.flush())
            .map_err(|e| ClassifyError::Transport(format!("cannot send hello: {e}")))?;
        let session = Session {
            child: Mutex::new(child),
            stdin: Mutex::new(stdin),
            pending,
            alive,
        };
        match hello_rx.recv_timeout(timeout) {
            Ok(Ok(h)) if h.hello == PROTOCOL_VERSION => Ok(session),
            Ok(Ok(h)) => Err(ClassifyError::Transport(format!(
                "classifier speaks `{}`, expected `{PROTOCOL_VERSION}`",
                h.hello
            ))),
            Ok(Err(e)) => Err(ClassifyError::Transport(format!("bad hello: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(ClassifyError::Transport(format!("no hello within {timeout:?}"))),
            Err(RecvTimeoutError::Disconnected) => {
                Err(ClassifyError::Transport("classifier exited before sending hello".into()))
            }
        }
    }

    fn is_alive(&self) -> bool {
        self.alive.load(Ordering::SeqCst)
    }
}

/// Classifier reached through a child process speaking the line protocol.
pub struct SubprocessClassifier {
    argv: Vec<String>,
    timeout: Duration,
    session: Mutex<Option<Arc<Session>>>,
    next_id: AtomicU64,
}

impl SubprocessClassifier {
    pub fn new(argv: Vec<String>, timeout: Duration) -> Result<Self, String> {
        if argv.is_empty() {
            return Err("empty classifier command".into());
        }
        Ok(SubprocessClassifier {
            argv,
            timeout,
            session: Mutex::new(None),
            next_id: AtomicU64::new(1),
        })
    }

    /// Current session, spawning (or respawning) the child if needed.
    fn session(&self) -> Result<Arc<Session>, ClassifyError> {
        let mut guard = self.session.lock().expect("session lock");
        if let Some(s) = guard.as_ref().filter(|s| s.is_alive()) {
            return Ok(s.clone());
        }
        if guard.is_some() {
            log::warn!("classifier process exited; restarting `{}`", self.argv.join(" "));
        }
        let s = Arc::new(Session::spawn(&self.argv, self.timeout)?);
        *guard = Some(s.clone());
        Ok(s)
    }
}

impl Classifier for SubprocessClassifier {
    fn describe(&self) -> String {
        format!("cmd:{} (timeout {:?})", self.argv.join(" "), self.timeout)
    }

    fn handshake(&self) -> Result<(), ClassifyError> {
        self.session().map(|_| ())
    }

    fn classify(&self, query: &Query) -> Result<f64, ClassifyError> {
        let payload = query.payload()?;
        let session = self.session()?;
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = mpsc::channel();
        session.pending.lock().expect("pending lock").insert(id, tx);
        let line = Request { id, image: payload }.to_line();
        let sent = {
            let mut stdin = session.stdin.lock().expect("stdin lock");
            writeln!(stdin, "{line}").and_then(|_| stdin.flush())
        };
        if let Err(e) = sent {
            session.pending.lock().expect("pending lock").remove(&id);
            return Err(ClassifyError::Transport(format!("write failed: {e}")));
        }
        match rx.recv_timeout(self.timeout) {
            Ok(resp) => resp.outcome().map_err(ClassifyError::Rejected),
            Err(RecvTimeoutError::Timeout) => {
                session.pending.lock().expect("pending lock").remove(&id);
                Err(ClassifyError::Timeout(self.timeout))
            }
            Err(RecvTimeoutError::Disconnected) => {
                Err(ClassifyError::Transport("classifier process exited".into()))
            }
        }
    }
}
