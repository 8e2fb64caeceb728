//! Serves a builtin baseline over protocol v1, optionally misbehaving on
//! purpose so the conformance checks and failure policy can be exercised.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use super::builtin::Builtin;
use super::protocol::{read_message, write_message, Message, TrainResponse, TrainStatus, PROTOCOL_VERSION};
use crate::graph::{load_dataset, BundleFormat, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Exit abnormally when asked to train.
    Crash,
    /// Report running out of memory and exit abnormally.
    Oom,
    /// Never answer a train request.
    Hang,
    /// Answer with a partition one entry short.
    WrongLength,
    /// Mix wall-clock time into the seed.
    Nondeterministic,
    /// Answer a train request with bytes that are not a frame.
    Garbage,
    /// Drop unknown parameters instead of rejecting them.
    AcceptBadParams,
    /// Close the stream without acknowledging `hello`.
    NoHandshake,
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "crash" => Fault::Crash,
            "oom" => Fault::Oom,
            "hang" => Fault::Hang,
            "wrong-length" => Fault::WrongLength,
            "nondeterministic" => Fault::Nondeterministic,
            "garbage" => Fault::Garbage,
            "accept-bad-params" => Fault::AcceptBadParams,
            "no-handshake" => Fault::NoHandshake,
            other => return Err(format!("unknown fault `{other}`")),
        })
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("injected crash")]
    InjectedCrash,
    #[error("memory allocation failed (injected)")]
    InjectedOom,
}

/// Message loop: `hello`, then any number of `train` requests until the
/// input closes.
pub fn serve_builtin<R: BufRead, W: Write>(
    builtin: Builtin,
    fault: Option<Fault>,
    mut input: R,
    mut output: W,
) -> Result<(), ServeError> {
    match read_message(&mut input)? {
        Some(Message::Hello { protocol, .. }) if protocol == PROTOCOL_VERSION => {}
        Some(Message::Hello { protocol, .. }) => {
            let message = format!("unsupported protocol {protocol}");
            write_message(&mut output, &Message::Error { message: message.clone() })?;
            return Err(ServeError::Protocol(message));
        }
        Some(other) => return Err(ServeError::Protocol(format!("expected hello, got {}", other.kind()))),
        None => return Ok(()),
    }
    if fault == Some(Fault::NoHandshake) {
        return Ok(());
    }
    write_message(
        &mut output,
        &Message::HelloAck {
            protocol: PROTOCOL_VERSION,
            name: builtin.name().to_string(),
        },
    )?;

    let mut graphs: HashMap<String, Graph> = HashMap::new();
    while let Some(message) = read_message(&mut input)? {
        let Message::Train(mut req) = message else {
            write_message(
                &mut output,
                &Message::Error {
                    message: format!("unexpected {} message", message.kind()),
                },
            )?;
            continue;
        };
        match fault {
            Some(Fault::Crash) => return Err(ServeError::InjectedCrash),
            Some(Fault::Oom) => return Err(ServeError::InjectedOom),
            Some(Fault::Hang) => loop {
                std::thread::sleep(Duration::from_secs(3600));
            },
            Some(Fault::Garbage) => {
                output.write_all(b"this is not a frame\n")?;
                output.flush()?;
                return Ok(());
            }
            Some(Fault::Nondeterministic) => {
                let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
                req.seed ^= nanos;
            }
            Some(Fault::AcceptBadParams) => {
                let space = builtin.search_space();
                req.params.retain(|k, _| space.get(k).is_some());
            }
            _ => {}
        }
        if !graphs.contains_key(&req.dataset_path) {
            match load_dataset(&req.dataset_path, BundleFormat::EdgeListBundle) {
                Ok(g) => {
                    graphs.insert(req.dataset_path.clone(), g);
                }
                Err(e) => {
                    let r = TrainResponse::failed(TrainStatus::Crash, e.to_string());
                    write_message(&mut output, &Message::Result(r))?;
                    continue;
                }
            }
        }
        let graph = &graphs[&req.dataset_path];
        let started = std::time::Instant::now();
        let reply = match builtin.train(graph, &req) {
            Ok((mut partition, epochs)) => {
                if fault == Some(Fault::WrongLength) {
                    partition.pop();
                }
                Message::Result(TrainResponse::ok(partition, epochs, started.elapsed().as_secs_f64()))
            }
            Err(message) => Message::Error { message },
        };
        write_message(&mut output, &reply)?;
    }
    Ok(())
}
