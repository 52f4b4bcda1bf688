use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::{Backend, BackendError, Handshake, MmaReply, MmaRequest, PROTOCOL_VERSION};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

struct Harness {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Harness {
    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Harness in a child process (`sh -c <command>`) speaking the line protocol.
pub struct ExecBackend {
    command: String,
    timeout: Duration,
    info: Handshake,
    child: Option<Harness>,
}

impl ExecBackend {
    pub fn spawn(command: &str) -> Result<Self, BackendError> {
        Self::with_timeout(command, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(command: &str, timeout: Duration) -> Result<Self, BackendError> {
        let (child, info) = start(command, timeout)?;
        Ok(ExecBackend {
            command: command.to_string(),
            timeout,
            info,
            child: Some(child),
        })
    }

    fn attempt(&mut self, req: &MmaRequest) -> Result<String, BackendError> {
        if self.child.is_none() {
            let (child, info) = start(&self.command, self.timeout)?;
            if info != self.info {
                child.kill();
                return Err(BackendError::Transport("harness changed its handshake".into()));
            }
            self.child = Some(child);
        }
        let ch = self.child.as_mut().expect("child started above");
        let sent = writeln!(ch.stdin, "{}", req.to_line()).and_then(|_| ch.stdin.flush());
        if let Err(e) = sent {
            self.drop_child();
            return Err(BackendError::Transport(format!("write failed: {e}")));
        }
        let line = match ch.lines.recv_timeout(self.timeout) {
            Ok(line) => line,
            Err(RecvTimeoutError::Timeout) => {
                self.drop_child();
                return Err(BackendError::Timeout(self.timeout));
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.drop_child();
                return Err(BackendError::Transport("harness closed its output".into()));
            }
        };
        let reply = match MmaReply::parse(&line) {
            Ok(r) if r.id == req.id => r,
            Ok(r) => {
                self.drop_child();
                return Err(BackendError::Transport(format!(
                    "reply id {} for request {}",
                    r.id, req.id
                )));
            }
            Err(e) => {
                self.drop_child();
                return Err(BackendError::Transport(format!("malformed reply: {e}")));
            }
        };
        reply.result.map_err(|e| BackendError::from_wire(&e))
    }

    fn drop_child(&mut self) {
        if let Some(ch) = self.child.take() {
            ch.kill();
        }
    }
}

impl Backend for ExecBackend {
    fn info(&self) -> &Handshake {
        &self.info
    }

    /// One retry, on a fresh child, after a transport failure.
    fn evaluate(&mut self, req: &MmaRequest) -> Result<String, BackendError> {
        match self.attempt(req) {
            Err(BackendError::Transport(_)) => self.attempt(req),
            other => other,
        }
    }
}

impl Drop for ExecBackend {
    fn drop(&mut self) {
        self.drop_child();
    }
}

fn start(command: &str, timeout: Duration) -> Result<(Harness, Handshake), BackendError> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| BackendError::Transport(format!("cannot start `{command}`: {e}")))?;
    let stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    let ch = Harness {
        child,
        stdin,
        lines: rx,
    };
    let first = match ch.lines.recv_timeout(timeout) {
        Ok(l) => l,
        Err(RecvTimeoutError::Timeout) => {
            ch.kill();
            return Err(BackendError::Timeout(timeout));
        }
        Err(RecvTimeoutError::Disconnected) => {
            ch.kill();
            return Err(BackendError::Transport(format!("`{command}` exited before its handshake")));
        }
    };
    match Handshake::parse(&first) {
        Ok(h) if h.proto == PROTOCOL_VERSION => Ok((ch, h)),
        Ok(h) => {
            ch.kill();
            Err(BackendError::Unsupported(format!("protocol version {}", h.proto)))
        }
        Err(e) => {
            ch.kill();
            Err(BackendError::Transport(format!("bad handshake `{first}`: {e}")))
        }
    }
}
