use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread::{self, JoinHandle};

use log::{debug, info, warn};

use super::wire::{code, read_frame, write_frame, FrameError, Message, VERSION};
use super::{InProcessSession, SamplerSession};
use crate::error::{Error, Result};
use crate::pbit::{Activation, UpdateOrder};

#[derive(Clone, Copy, Debug, Default)]
pub struct ServerOptions {
    pub activation: Activation,
    pub order: UpdateOrder,
}

/// Accepts connections forever, one thread and one session per connection.
pub fn serve(listener: TcpListener, options: ServerOptions) -> Result<()> {
    info!("sampler listening on {}", listener.local_addr()?);
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            if let Err(e) = handle_connection(stream, options) {
                debug!("session {peer:?} ended: {e}");
            }
        });
    }
    Ok(())
}

/// Binds `addr` and serves on a background thread; returns the bound address.
pub fn spawn_server(addr: &str, options: ServerOptions) -> Result<(SocketAddr, JoinHandle<Result<()>>)> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    let handle = thread::spawn(move || serve(listener, options));
    Ok((local, handle))
}

fn handle_connection(stream: TcpStream, options: ServerOptions) -> Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    let writer = BufWriter::new(stream);
    run_session(reader, writer, options)
}

/// Services one session until BYE, EOF or an unrecoverable framing error.
pub(crate) fn run_session<R: Read, W: Write>(mut r: R, mut w: W, options: ServerOptions) -> Result<()> {
    let mut session = InProcessSession::with_options(options.activation, options.order);
    let reply = |w: &mut W, msg: Message| write_frame(w, &msg.to_frame());
    let error = |w: &mut W, code: u16, text: String| reply(w, Message::Error { code, text });
    loop {
        let frame = match read_frame(&mut r) {
            Ok(f) => f,
            Err(FrameError::Closed) => return Ok(()),
            Err(FrameError::BadMagic(m)) => {
                error(&mut w, code::MALFORMED, format!("bad magic {m:?}"))?;
                return Err(Error::Transport("bad magic, closing session".into()));
            }
            Err(FrameError::TooLarge(len)) => {
                error(&mut w, code::MALFORMED, format!("payload of {len} bytes refused"))?;
                return Err(Error::Transport("oversized frame, closing session".into()));
            }
            Err(FrameError::Truncated) => return Err(Error::Transport("truncated frame".into())),
            Err(FrameError::Io(e)) => return Err(e.into()),
        };
        if frame.version != VERSION {
            error(
                &mut w,
                code::VERSION,
                format!("unsupported protocol version {}", frame.version),
            )?;
            continue;
        }
        let msg = match Message::from_frame(&frame) {
            Ok(m) => m,
            Err(Error::Protocol { code, msg }) => {
                error(&mut w, code, msg)?;
                continue;
            }
            Err(e) => {
                error(&mut w, code::MALFORMED, e.to_string())?;
                continue;
            }
        };
        let outcome = match msg {
            Message::Hello { .. } => Ok(Message::Hello { version: VERSION }),
            Message::SetTopology { rows, cols, half } => session
                .set_topology((rows as usize, cols as usize, half as usize))
                .map(|_| Message::TopologyAck),
            Message::SetWeights(s) => session.set_weights(&s).map(|_| Message::WeightsAck),
            Message::Run(req) => session.run(req).map(|batch| Message::Samples {
                n_bits: batch.n_bits,
                rows: batch.rows,
            }),
            Message::Bye => {
                session.close()?;
                reply(&mut w, Message::Bye)?;
                return Ok(());
            }
            other => Err(Error::Protocol {
                code: code::ORDERING,
                msg: format!("unexpected client message {:?}", other.to_frame().msg_type),
            }),
        };
        match outcome {
            Ok(m) => reply(&mut w, m)?,
            Err(Error::Protocol { code, msg }) => error(&mut w, code, msg)?,
            Err(e) => error(&mut w, code::INTERNAL, e.to_string())?,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::wire::{Frame, MsgType, RunRequest};
    use crate::pbit::Synapses;

    fn exchange(frames: &[Vec<u8>]) -> Vec<Message> {
        let input: Vec<u8> = frames.concat();
        let mut out = Vec::new();
        let _ = run_session(&input[..], &mut out, ServerOptions::default());
        let mut replies = Vec::new();
        let mut rd = &out[..];
        while let Ok(f) = read_frame(&mut rd) {
            replies.push(Message::from_frame(&f).unwrap());
        }
        replies
    }

    fn bytes(m: Message) -> Vec<u8> {
        m.to_frame().to_bytes()
    }

    #[test]
    fn hello_and_ordering() {
        let run = Message::Run(RunRequest {
            n_samples: 1,
            sweeps_per_sample: 1,
            burn_in: 0,
            seed: 0,
        });
        let replies = exchange(&[bytes(Message::Hello { version: 1 }), bytes(run.clone()), bytes(Message::Bye)]);
        assert_eq!(replies[0], Message::Hello { version: 1 });
        assert!(matches!(replies[1], Message::Error { code: code::ORDERING, .. }));
        assert_eq!(replies[2], Message::Bye);

        let replies = exchange(&[bytes(Message::SetWeights(Synapses::new(9))), bytes(run)]);
        assert_eq!(replies[0], Message::WeightsAck);
        assert!(matches!(&replies[1], Message::Samples { n_bits: 9, rows } if rows.len() == 1));
    }

    #[test]
    fn survives_unknown_type_and_bad_version() {
        let unknown = Frame {
            version: 1,
            msg_type: 99,
            payload: vec![1, 2, 3],
        };
        let old = Frame {
            version: 7,
            msg_type: MsgType::Hello as u8,
            payload: vec![1, 0],
        };
        let replies = exchange(&[unknown.to_bytes(), old.to_bytes(), bytes(Message::Hello { version: 1 })]);
        assert!(matches!(replies[0], Message::Error { code: code::UNKNOWN_TYPE, .. }));
        assert!(matches!(replies[1], Message::Error { code: code::VERSION, .. }));
        assert_eq!(replies[2], Message::Hello { version: 1 });
    }

    #[test]
    fn bad_magic_closes_with_error() {
        let mut junk = bytes(Message::Hello { version: 1 });
        junk[..4].copy_from_slice(b"JUNK");
        let replies = exchange(&[junk, bytes(Message::Hello { version: 1 })]);
        assert_eq!(replies.len(), 1);
        assert!(matches!(replies[0], Message::Error { code: code::MALFORMED, .. }));
    }

    #[test]
    fn truncated_frame_ends_quietly() {
        let full = bytes(Message::Hello { version: 1 });
        let replies = exchange(&[full[..7].to_vec()]);
        assert!(replies.is_empty());
    }
}
