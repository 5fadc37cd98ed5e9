//! Framed byte protocol between a trainer and a remote sampler.
//!
//! Every frame is `magic "PBIT" | version u16 | msg_type u8 | payload_len u32 |
//! payload`, all integers little-endian.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::fixed::FixedPoint;
use crate::pbit::{SampleBatch, Spin, Synapses};

pub const MAGIC: &[u8; 4] = b"PBIT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 11;
/// Frames larger than this are refused before any allocation.
pub const MAX_PAYLOAD: u32 = 64 << 20;

/// Error codes carried in ERROR frames.
pub mod code {
    pub const MALFORMED: u16 = 1;
    pub const UNKNOWN_TYPE: u16 = 2;
    pub const ORDERING: u16 = 3;
    pub const INVALID: u16 = 4;
    pub const VERSION: u16 = 5;
    pub const INTERNAL: u16 = 6;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    SetTopology = 2,
    SetWeights = 3,
    Run = 4,
    Samples = 5,
    Error = 6,
    Bye = 7,
}

impl TryFrom<u8> for MsgType {
    type Error = u8;

    fn try_from(value: u8) -> std::result::Result<Self, u8> {
        Ok(match value {
            1 => MsgType::Hello,
            2 => MsgType::SetTopology,
            3 => MsgType::SetWeights,
            4 => MsgType::Run,
            5 => MsgType::Samples,
            6 => MsgType::Error,
            7 => MsgType::Bye,
            other => return Err(other),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub version: u16,
    pub msg_type: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Self {
        Frame {
            version: VERSION,
            msg_type: msg_type as u8,
            payload,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.push(self.msg_type);
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }
}

#[derive(Debug)]
pub enum FrameError {
    /// Stream ended cleanly between frames.
    Closed,
    BadMagic([u8; 4]),
    Truncated,
    TooLarge(u32),
    Io(io::Error),
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> io::Result<()> {
    w.write_all(&frame.to_bytes())?;
    w.flush()
}

pub fn read_frame<R: Read>(r: &mut R) -> std::result::Result<Frame, FrameError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match r.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Err(FrameError::Closed),
            Ok(0) => return Err(FrameError::Truncated),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(FrameError::Io(e)),
        }
    }
    let magic: [u8; 4] = header[..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(FrameError::BadMagic(magic));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    let msg_type = header[6];
    let len = u32::from_le_bytes(header[7..11].try_into().unwrap());
    if len > MAX_PAYLOAD {
        return Err(FrameError::TooLarge(len));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FrameError::Truncated,
        _ => FrameError::Io(e),
    })?;
    Ok(Frame {
        version,
        msg_type,
        payload,
    })
}

/// Parameters of one sampling request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunRequest {
    pub n_samples: u32,
    pub sweeps_per_sample: u32,
    pub burn_in: u32,
    pub seed: u64,
}

/// Decoded message bodies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Hello { version: u16 },
    SetTopology { rows: u32, cols: u32, half: u32 },
    /// Sent by the server with no body to acknowledge SET_TOPOLOGY.
    TopologyAck,
    SetWeights(Synapses),
    WeightsAck,
    Run(RunRequest),
    Samples { n_bits: usize, rows: Vec<Vec<Spin>> },
    Error { code: u16, text: String },
    Bye,
}

impl Message {
    pub fn to_frame(&self) -> Frame {
        match self {
            Message::Hello { version } => Frame::new(MsgType::Hello, version.to_le_bytes().to_vec()),
            Message::SetTopology { rows, cols, half } => {
                let mut p = Vec::with_capacity(12);
                for x in [rows, cols, half] {
                    p.extend_from_slice(&x.to_le_bytes());
                }
                Frame::new(MsgType::SetTopology, p)
            }
            Message::TopologyAck => Frame::new(MsgType::SetTopology, Vec::new()),
            Message::SetWeights(s) => Frame::new(MsgType::SetWeights, encode_weights(s)),
            Message::WeightsAck => Frame::new(MsgType::SetWeights, Vec::new()),
            Message::Run(req) => {
                let mut p = Vec::with_capacity(20);
                p.extend_from_slice(&req.n_samples.to_le_bytes());
                p.extend_from_slice(&req.sweeps_per_sample.to_le_bytes());
                p.extend_from_slice(&req.burn_in.to_le_bytes());
                p.extend_from_slice(&req.seed.to_le_bytes());
                Frame::new(MsgType::Run, p)
            }
            Message::Samples { n_bits, rows } => Frame::new(MsgType::Samples, encode_rows(*n_bits, rows)),
            Message::Error { code, text } => {
                let mut p = code.to_le_bytes().to_vec();
                p.extend_from_slice(text.as_bytes());
                Frame::new(MsgType::Error, p)
            }
            Message::Bye => Frame::new(MsgType::Bye, Vec::new()),
        }
    }

    /// Decodes a frame body. Empty SET_TOPOLOGY / SET_WEIGHTS bodies are acks.
    pub fn from_frame(frame: &Frame) -> Result<Self> {
        let ty = MsgType::try_from(frame.msg_type).map_err(|t| Error::Protocol {
            code: code::UNKNOWN_TYPE,
            msg: format!("unknown message type {t}"),
        })?;
        let p = &frame.payload;
        let mut rd = Cursor::new(p);
        let msg = match ty {
            MsgType::Hello => Message::Hello { version: rd.u16()? },
            MsgType::SetTopology if p.is_empty() => Message::TopologyAck,
            MsgType::SetTopology => Message::SetTopology {
                rows: rd.u32()?,
                cols: rd.u32()?,
                half: rd.u32()?,
            },
            MsgType::SetWeights if p.is_empty() => Message::WeightsAck,
            MsgType::SetWeights => return Ok(Message::SetWeights(decode_weights(p)?)),
            MsgType::Run => Message::Run(RunRequest {
                n_samples: rd.u32()?,
                sweeps_per_sample: rd.u32()?,
                burn_in: rd.u32()?,
                seed: rd.u64()?,
            }),
            MsgType::Samples => {
                let (n_bits, rows) = decode_rows(p)?;
                return Ok(Message::Samples { n_bits, rows });
            }
            MsgType::Error => {
                let code = rd.u16()?;
                let text = String::from_utf8_lossy(rd.rest()).into_owned();
                return Ok(Message::Error { code, text });
            }
            MsgType::Bye => Message::Bye,
        };
        rd.finish()?;
        Ok(msg)
    }
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::Protocol {
        code: code::MALFORMED,
        msg: msg.into(),
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(malformed(format!(
                "payload truncated: need {n} bytes at offset {}, have {}",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn i16(&mut self) -> Result<i16> {
        Ok(i16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(malformed(format!(
                "{} trailing payload bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// `n: u32, n_couplers: u32`, then `n` raw biases as `i16`, then
/// `(i: u32, j: u32, raw: i16)` per coupler sorted by `(i, j)` with `i < j`.
pub fn encode_weights(s: &Synapses) -> Vec<u8> {
    let n_couplers = s.coupler_count();
    let mut out = Vec::with_capacity(8 + 2 * s.len() + 10 * n_couplers);
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(&(n_couplers as u32).to_le_bytes());
    for b in s.biases() {
        out.extend_from_slice(&b.raw().to_le_bytes());
    }
    for (i, j, w) in s.couplers() {
        out.extend_from_slice(&(i as u32).to_le_bytes());
        out.extend_from_slice(&(j as u32).to_le_bytes());
        out.extend_from_slice(&w.raw().to_le_bytes());
    }
    out
}

pub fn decode_weights(bytes: &[u8]) -> Result<Synapses> {
    let mut rd = Cursor::new(bytes);
    let n = rd.u32()? as usize;
    let n_couplers = rd.u32()? as usize;
    let expected = 8u64 + 2 * n as u64 + 10 * n_couplers as u64;
    if expected != bytes.len() as u64 {
        return Err(malformed(format!(
            "weights payload is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let raw = |r: i16| FixedPoint::from_raw(r).map_err(|e| malformed(e.to_string()));
    let mut s = Synapses::new(n);
    for i in 0..n {
        s.set_bias(i, raw(rd.i16()?)?)?;
    }
    let mut last = None;
    for _ in 0..n_couplers {
        let (i, j) = (rd.u32()? as usize, rd.u32()? as usize);
        let w = raw(rd.i16()?)?;
        if i >= j || j >= n {
            return Err(malformed(format!("bad coupler ({i},{j}) for {n} p-bits")));
        }
        if last.is_some_and(|prev| prev >= (i, j)) {
            return Err(malformed(format!("coupler ({i},{j}) out of order")));
        }
        if w.is_zero() {
            return Err(malformed(format!("zero coupler ({i},{j}) listed")));
        }
        last = Some((i, j));
        s.set_coupler(i, j, w)?;
    }
    Ok(s)
}

pub fn row_bytes(n_bits: usize) -> usize {
    n_bits.div_ceil(8)
}

fn encode_rows(n_bits: usize, rows: &[Vec<Spin>]) -> Vec<u8> {
    let stride = row_bytes(n_bits);
    let mut out = Vec::with_capacity(8 + stride * rows.len());
    out.extend_from_slice(&(n_bits as u32).to_le_bytes());
    out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    for row in rows {
        let mut packed = vec![0u8; stride];
        for (k, &m) in row.iter().enumerate() {
            if m > 0 {
                packed[k / 8] |= 1 << (k % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    out
}

fn decode_rows(bytes: &[u8]) -> Result<(usize, Vec<Vec<Spin>>)> {
    let mut rd = Cursor::new(bytes);
    let n_bits = rd.u32()? as usize;
    let n_rows = rd.u32()? as usize;
    let stride = row_bytes(n_bits);
    if 8 + stride as u64 * n_rows as u64 != bytes.len() as u64 {
        return Err(malformed(format!(
            "samples payload is {} bytes, header implies {} rows of {stride}",
            bytes.len(),
            n_rows
        )));
    }
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let packed = rd.take(stride)?;
        rows.push(
            (0..n_bits)
                .map(|k| if packed[k / 8] >> (k % 8) & 1 == 1 { 1 } else { -1 })
                .collect(),
        );
    }
    Ok((n_bits, rows))
}

/// `n_bits: u32, n_rows: u32`, then each row bit-packed LSB-first
/// (`+1 -> 1`, `-1 -> 0`) and padded to a byte boundary.
pub fn encode_samples(batch: &SampleBatch) -> Vec<u8> {
    encode_rows(batch.n_bits, &batch.rows)
}

/// Inverse of [`encode_samples`]; run metadata is not on the wire.
pub fn decode_samples(bytes: &[u8]) -> Result<(usize, Vec<Vec<Spin>>)> {
    decode_rows(bytes)
}
