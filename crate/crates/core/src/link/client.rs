use std::io::{BufReader, BufWriter};
use std::net::TcpStream;

use super::wire::{read_frame, write_frame, FrameError, Message, RunRequest, VERSION};
use super::SamplerSession;
use crate::error::{Error, Result};
use crate::pbit::{SampleBatch, Synapses};

/// Client side of the framed sampler protocol.
pub struct RemoteSession {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    endpoint: String,
}

impl RemoteSession {
    /// Connects to `host:port` and performs the HELLO exchange.
    pub fn connect(endpoint: &str) -> Result<Self> {
        let stream = TcpStream::connect(endpoint)
            .map_err(|e| Error::Transport(format!("cannot reach {endpoint}: {e}")))?;
        stream.set_nodelay(true)?;
        let mut session = RemoteSession {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            endpoint: endpoint.to_string(),
        };
        match session.call(Message::Hello { version: VERSION })? {
            Message::Hello { version: VERSION } => Ok(session),
            Message::Hello { version } => Err(Error::Protocol {
                code: super::wire::code::VERSION,
                msg: format!("server speaks version {version}"),
            }),
            other => Err(unexpected(&other)),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn call(&mut self, msg: Message) -> Result<Message> {
        write_frame(&mut self.writer, &msg.to_frame())
            .map_err(|e| Error::Transport(format!("send to {} failed: {e}", self.endpoint)))?;
        let frame = read_frame(&mut self.reader).map_err(|e| {
            Error::Transport(match e {
                FrameError::Closed => format!("{} closed the connection", self.endpoint),
                FrameError::Io(e) => format!("receive from {} failed: {e}", self.endpoint),
                other => format!("bad reply from {}: {other:?}", self.endpoint),
            })
        })?;
        match Message::from_frame(&frame)? {
            Message::Error { code, text } => Err(Error::Protocol { code, msg: text }),
            reply => Ok(reply),
        }
    }
}

fn unexpected(msg: &Message) -> Error {
    Error::Protocol {
        code: super::wire::code::ORDERING,
        msg: format!("unexpected reply of type {}", msg.to_frame().msg_type),
    }
}

impl SamplerSession for RemoteSession {
    fn set_topology(&mut self, (rows, cols, half): (usize, usize, usize)) -> Result<()> {
        match self.call(Message::SetTopology {
            rows: rows as u32,
            cols: cols as u32,
            half: half as u32,
        })? {
            Message::TopologyAck => Ok(()),
            other => Err(unexpected(&other)),
        }
    }

    fn set_weights(&mut self, synapses: &Synapses) -> Result<()> {
        match self.call(Message::SetWeights(synapses.clone()))? {
            Message::WeightsAck => Ok(()),
            other => Err(unexpected(&other)),
        }
    }

    fn run(&mut self, request: RunRequest) -> Result<SampleBatch> {
        match self.call(Message::Run(request))? {
            Message::Samples { n_bits, rows } => Ok(SampleBatch {
                n_bits,
                rows,
                seed: request.seed,
                sweeps_per_sample: request.sweeps_per_sample as usize,
                burn_in_sweeps: request.burn_in as usize,
            }),
            other => Err(unexpected(&other)),
        }
    }

    fn close(&mut self) -> Result<()> {
        match self.call(Message::Bye)? {
            Message::Bye => Ok(()),
            other => Err(unexpected(&other)),
        }
    }
}
