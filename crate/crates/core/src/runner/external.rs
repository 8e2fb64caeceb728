//! External runners: one child process per request, spoken to over
//! protocol v1 on its standard streams.

use std::io::{BufReader, Read};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{read_message, write_message, Message, TrainRequest, TrainResponse, TrainStatus, PROTOCOL_VERSION};

const STDERR_TAIL: usize = 4096;
const EXIT_GRACE: Duration = Duration::from_secs(2);

/// Limits applied to each child.
#[derive(Debug, Clone, PartialEq)]
pub struct Limits {
    pub timeout: Duration,
    /// Address-space cap in bytes, applied with `RLIMIT_AS`.
    pub memory_bytes: Option<u64>,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(3600),
            memory_bytes: None,
        }
    }
}

#[derive(Debug)]
pub(crate) enum SessionError {
    Timeout,
    /// The child closed its output or sent something unreadable.
    Broken(String),
}

pub(crate) struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    incoming: Receiver<Result<Message, String>>,
    stderr: Arc<Mutex<Vec<u8>>>,
    stderr_reader: Option<thread::JoinHandle<()>>,
    deadline: Instant,
    killed: bool,
}

/// How a session ended.
pub(crate) struct Ended {
    pub status: Option<ExitStatus>,
    pub stderr: String,
    /// The harness had to kill the child.
    pub killed: bool,
}

impl Session {
    pub(crate) fn spawn(command: &[String], limits: &Limits) -> Result<Self, String> {
        let (program, args) = command.split_first().ok_or("empty launch command")?;
        let mut cmd = Command::new(program);
        cmd.args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        let memory = limits.memory_bytes;
        // SAFETY: only async-signal-safe libc calls run between fork and exec.
        unsafe {
            cmd.pre_exec(move || {
                // own process group, so a timeout kill reaches grandchildren too
                if libc::setpgid(0, 0) != 0 {
                    return Err(std::io::Error::last_os_error());
                }
                if let Some(bytes) = memory {
                    let lim = libc::rlimit {
                        rlim_cur: bytes as libc::rlim_t,
                        rlim_max: bytes as libc::rlim_t,
                    };
                    if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
                        return Err(std::io::Error::last_os_error());
                    }
                }
                Ok(())
            });
        }
        let mut child = cmd.spawn().map_err(|e| format!("cannot launch `{program}`: {e}"))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let mut stderr_pipe = child.stderr.take().expect("piped stderr");
        let stdin = child.stdin.take();

        let (tx, incoming) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                match read_message(&mut reader) {
                    Ok(Some(m)) => {
                        if tx.send(Ok(m)).is_err() {
                            break;
                        }
                    }
                    Ok(None) => break,
                    Err(e) => {
                        let _ = tx.send(Err(e.to_string()));
                        break;
                    }
                }
            }
        });
        let stderr = Arc::new(Mutex::new(Vec::new()));
        let sink = Arc::clone(&stderr);
        let stderr_reader = thread::spawn(move || {
            let mut chunk = [0u8; 4096];
            while let Ok(n) = stderr_pipe.read(&mut chunk) {
                if n == 0 {
                    break;
                }
                let mut buf = sink.lock().expect("stderr buffer");
                buf.extend_from_slice(&chunk[..n]);
                if buf.len() > 2 * STDERR_TAIL {
                    let cut = buf.len() - STDERR_TAIL;
                    buf.drain(..cut);
                }
            }
        });

        Ok(Self {
            child,
            stdin,
            incoming,
            stderr,
            stderr_reader: Some(stderr_reader),
            deadline: Instant::now() + limits.timeout,
            killed: false,
        })
    }

    pub(crate) fn send(&mut self, message: &Message) -> Result<(), SessionError> {
        let stdin = self.stdin.as_mut().ok_or(SessionError::Broken("stdin closed".into()))?;
        write_message(stdin, message).map_err(|e| SessionError::Broken(format!("write failed: {e}")))
    }

    pub(crate) fn recv(&mut self) -> Result<Message, SessionError> {
        let wait = self.deadline.saturating_duration_since(Instant::now());
        match self.incoming.recv_timeout(wait) {
            Ok(Ok(m)) => Ok(m),
            Ok(Err(e)) => Err(SessionError::Broken(e)),
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                Err(SessionError::Timeout)
            }
            Err(RecvTimeoutError::Disconnected) => Err(SessionError::Broken("runner closed its output".into())),
        }
    }

    fn kill(&mut self) {
        if !self.killed {
            self.killed = true;
            // SAFETY: plain syscall on the child's process group id.
            unsafe {
                libc::kill(-(self.child.id() as libc::pid_t), libc::SIGKILL);
            }
        }
    }

    /// Closes stdin, waits briefly for a clean exit, then kills.
    pub(crate) fn finish(mut self) -> Ended {
        self.stdin.take();
        let until = Instant::now() + EXIT_GRACE;
        let status = loop {
            match self.child.try_wait() {
                Ok(Some(s)) => break Some(s),
                Ok(None) if Instant::now() < until && !self.killed => thread::sleep(Duration::from_millis(5)),
                _ => {
                    self.kill();
                    break self.child.wait().ok();
                }
            }
        };
        // leftovers in the group would keep stderr open
        // SAFETY: as in `kill`; the group may already be empty.
        unsafe {
            libc::kill(-(self.child.id() as libc::pid_t), libc::SIGKILL);
        }
        if let Some(h) = self.stderr_reader.take() {
            let _ = h.join();
        }
        let stderr = String::from_utf8_lossy(&self.stderr.lock().expect("stderr buffer")).into_owned();
        Ended {
            status,
            stderr,
            killed: self.killed,
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if self.child.try_wait().ok().flatten().is_none() {
            self.kill();
            let _ = self.child.wait();
        }
    }
}

const OOM_MARKERS: [&str; 5] = [
    "out of memory",
    "memoryerror",
    "cannot allocate memory",
    "memory allocation",
    "bad_alloc",
];

/// Best-effort classification of a child that produced no usable result.
pub(crate) fn classify_exit(ended: &Ended, limits: &Limits) -> TrainStatus {
    let lower = ended.stderr.to_lowercase();
    if OOM_MARKERS.iter().any(|m| lower.contains(m)) {
        return TrainStatus::Oom;
    }
    match ended.status.and_then(|s| s.signal()) {
        // a SIGKILL we did not send is most likely the kernel OOM killer
        Some(libc::SIGKILL) if !ended.killed => TrainStatus::Oom,
        Some(libc::SIGSEGV) | Some(libc::SIGABRT) if limits.memory_bytes.is_some() => TrainStatus::Oom,
        _ => TrainStatus::Crash,
    }
}

pub(crate) fn tail(s: &str) -> String {
    let s = s.trim();
    let start = s.len().saturating_sub(400);
    let start = (start..s.len()).find(|&i| s.is_char_boundary(i)).unwrap_or(s.len());
    s[start..].to_string()
}

/// Exchanges `hello` for `hello_ack` and returns the runner's name.
pub(crate) fn handshake(session: &mut Session) -> Result<String, String> {
    session
        .send(&Message::Hello {
            protocol: PROTOCOL_VERSION,
            name: "commbench".into(),
        })
        .map_err(describe)?;
    match session.recv().map_err(describe)? {
        Message::HelloAck { protocol, name } if protocol == PROTOCOL_VERSION => Ok(name),
        Message::HelloAck { protocol, .. } => Err(format!("runner speaks protocol {protocol}")),
        Message::Error { message } => Err(format!("runner refused handshake: {message}")),
        other => Err(format!("expected hello_ack, got {}", other.kind())),
    }
}

pub(crate) fn describe(e: SessionError) -> String {
    match e {
        SessionError::Timeout => "timed out".into(),
        SessionError::Broken(m) => m,
    }
}

/// Full request cycle against a fresh child. Never panics on runner
/// misbehaviour; every failure maps onto a non-ok status.
pub fn run_external(command: &[String], req: &TrainRequest, limits: &Limits) -> TrainResponse {
    let started = Instant::now();
    let mut session = match Session::spawn(command, limits) {
        Ok(s) => s,
        Err(e) => return TrainResponse::failed(TrainStatus::Crash, e),
    };
    let outcome = handshake(&mut session)
        .map_err(|m| (None, m))
        .and_then(|_| session.send(&Message::Train(req.clone())).map_err(|e| (Some(e), String::new())))
        .and_then(|_| session.recv().map_err(|e| (Some(e), String::new())));
    let timed_out = session.killed;
    let ended = session.finish();
    let elapsed = started.elapsed().as_secs_f64();

    if timed_out {
        let mut r = TrainResponse::failed(TrainStatus::Timeout, format!("no result within {:?}", limits.timeout));
        r.wall_time = elapsed;
        return r;
    }
    let mut response = match outcome {
        Ok(Message::Result(mut r)) => {
            if r.status != TrainStatus::Ok {
                r.partition = None;
            }
            r
        }
        Ok(Message::Error { message }) => TrainResponse::failed(TrainStatus::Crash, message),
        Ok(other) => TrainResponse::failed(TrainStatus::Crash, format!("expected result, got {}", other.kind())),
        Err((err, handshake_msg)) => {
            let why = match err {
                Some(e) => describe(e),
                None => handshake_msg,
            };
            let class = classify_exit(&ended, limits);
            let detail = match (ended.status, tail(&ended.stderr)) {
                (Some(s), t) if t.is_empty() => format!("{why} ({s})"),
                (Some(s), t) => format!("{why} ({s}): {t}"),
                (None, t) => format!("{why}: {t}"),
            };
            TrainResponse::failed(class, detail)
        }
    };
    if response.wall_time <= 0.0 {
        response.wall_time = elapsed;
    }
    response
}
