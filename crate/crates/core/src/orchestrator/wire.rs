//! Length-prefixed text frames.
//!
//! A frame is a 4-byte big-endian length followed by a UTF-8 JSON object
//! `{type, session_id, phase, origin, dest, partition, target, values}`.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::client::AnswerMsg;
use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};
use crate::leader::QueryMsg;
use crate::model::{Endpoint, PartyId};
use crate::randomness::{RandomnessKind, RandomnessShareMsg};

pub const MAX_FRAME: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Randomness,
    Query,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Message {
    Randomness(RandomnessShareMsg),
    Query(QueryMsg),
    Answer(AnswerMsg),
}

impl Message {
    pub fn phase(&self) -> Phase {
        match self {
            Message::Randomness(_) => Phase::Randomness,
            Message::Query(_) => Phase::Query,
            Message::Answer(_) => Phase::Answer,
        }
    }

    pub fn origin(&self) -> Endpoint {
        match self {
            Message::Randomness(m) => m.origin,
            Message::Query(m) => m.origin,
            Message::Answer(m) => m.origin,
        }
    }

    pub fn dest(&self) -> Endpoint {
        match self {
            Message::Randomness(m) => m.dest,
            Message::Query(m) => m.dest,
            Message::Answer(m) => m.dest,
        }
    }
}

/// A message tagged with its session.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Envelope {
    pub session_id: u64,
    pub message: Message,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameType {
    Local,
    Share,
    Global,
    Query,
    Answer,
}

/// The JSON body of a frame, also the unit of a transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    #[serde(rename = "type")]
    pub kind: FrameType,
    pub session_id: u64,
    pub phase: Phase,
    pub origin: [u32; 2],
    pub dest: [u32; 2],
    pub partition: Option<u32>,
    pub target: Option<u32>,
    pub values: Vec<u64>,
}

fn ep(e: Endpoint) -> [u32; 2] {
    [e.party.0, e.database]
}

fn unep(a: [u32; 2]) -> Endpoint {
    Endpoint::new(PartyId(a[0]), a[1])
}

fn raw(values: &[FieldElement]) -> Vec<u64> {
    values.iter().map(|v| v.value()).collect()
}

impl Frame {
    pub fn from_envelope(env: &Envelope) -> Self {
        let m = &env.message;
        let (kind, partition, target, values) = match m {
            Message::Randomness(r) => {
                let kind = match r.kind {
                    RandomnessKind::Local => FrameType::Local,
                    RandomnessKind::Share => FrameType::Share,
                    RandomnessKind::Global => FrameType::Global,
                };
                (kind, None, r.rank, raw(&r.values))
            }
            Message::Query(q) => (FrameType::Query, Some(q.partition), None, raw(&q.vector)),
            Message::Answer(a) => (FrameType::Answer, Some(a.partition), None, vec![a.value.value()]),
        };
        Self {
            kind,
            session_id: env.session_id,
            phase: m.phase(),
            origin: ep(m.origin()),
            dest: ep(m.dest()),
            partition,
            target,
            values,
        }
    }

    /// Checks the frame against `field` and rebuilds the message.
    pub fn into_envelope(self, field: PrimeField) -> Result<Envelope> {
        let bad = |what: &str| Err(Error::Decode(format!("{what} in {:?} frame", self.kind)));
        let values = self
            .values
            .iter()
            .map(|&v| {
                if v < field.modulus() {
                    Ok(field.element(v))
                } else {
                    Err(Error::Decode(format!("value {v} outside [0, {}]", field.modulus() - 1)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let expected_phase = match self.kind {
            FrameType::Local | FrameType::Share | FrameType::Global => Phase::Randomness,
            FrameType::Query => Phase::Query,
            FrameType::Answer => Phase::Answer,
        };
        if self.phase != expected_phase {
            return bad("phase mismatch");
        }
        let (origin, dest) = (unep(self.origin), unep(self.dest));
        let message = match self.kind {
            FrameType::Local | FrameType::Share | FrameType::Global => {
                if self.partition.is_some() {
                    return bad("partition set");
                }
                let kind = match self.kind {
                    FrameType::Local => RandomnessKind::Local,
                    FrameType::Share => RandomnessKind::Share,
                    _ => RandomnessKind::Global,
                };
                if (kind == RandomnessKind::Share) != self.target.is_some() {
                    return bad("rank presence");
                }
                if kind != RandomnessKind::Local && values.len() != 1 {
                    return bad("expected exactly one value");
                }
                Message::Randomness(RandomnessShareMsg {
                    kind,
                    origin,
                    dest,
                    rank: self.target,
                    values,
                })
            }
            FrameType::Query | FrameType::Answer => {
                let Some(partition) = self.partition else {
                    return bad("missing partition");
                };
                if self.target.is_some() {
                    return bad("target set");
                }
                if self.kind == FrameType::Query {
                    Message::Query(QueryMsg {
                        origin,
                        dest,
                        partition,
                        vector: values,
                    })
                } else {
                    if values.len() != 1 {
                        return bad("expected exactly one value");
                    }
                    Message::Answer(AnswerMsg {
                        origin,
                        dest,
                        partition,
                        value: values[0],
                    })
                }
            }
        };
        Ok(Envelope {
            session_id: self.session_id,
            message,
        })
    }
}

/// Length prefix plus JSON body.
pub fn encode_msg(env: &Envelope) -> Vec<u8> {
    let body = serde_json::to_vec(&Frame::from_envelope(env)).expect("frame serializes");
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

fn check_len(len: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::Decode("empty frame".into()));
    }
    if len > MAX_FRAME {
        return Err(Error::Decode(format!("frame of {len} bytes exceeds {MAX_FRAME}")));
    }
    Ok(())
}

fn decode_body(body: &[u8], field: PrimeField) -> Result<Envelope> {
    let frame: Frame = serde_json::from_slice(body).map_err(|e| Error::Decode(e.to_string()))?;
    frame.into_envelope(field)
}

/// Decodes exactly one frame.
pub fn decode_msg(bytes: &[u8], field: PrimeField) -> Result<Envelope> {
    if bytes.len() < 4 {
        return Err(Error::Decode("truncated length prefix".into()));
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    check_len(len)?;
    let body = &bytes[4..];
    if body.len() != len {
        return Err(Error::Decode(format!("frame declares {len} bytes, carries {}", body.len())));
    }
    decode_body(body, field)
}

pub fn write_frame<W: Write>(w: &mut W, env: &Envelope) -> Result<()> {
    w.write_all(&encode_msg(env))?;
    Ok(())
}

/// Reads the next frame, or `None` at a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R, field: PrimeField) -> Result<Option<Envelope>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(Error::Decode("truncated length prefix".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    check_len(len)?;
    let mut body = vec![0; len];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Decode("truncated frame".into()),
        _ => e.into(),
    })?;
    decode_body(&body, field).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f5() -> PrimeField {
        PrimeField::new(5).unwrap()
    }

    fn query(values: &[u64]) -> Envelope {
        Envelope {
            session_id: 42,
            message: Message::Query(QueryMsg {
                origin: Endpoint::party_itself(PartyId(4)),
                dest: Endpoint::new(PartyId(3), 2),
                partition: 1,
                vector: values.iter().map(|&v| f5().element(v)).collect(),
            }),
        }
    }

    #[test]
    fn query_frame_layout() {
        let bytes = encode_msg(&query(&[0, 4, 2, 3, 1]));
        let frame: Frame = serde_json::from_slice(&bytes[4..]).unwrap();
        assert_eq!(frame.values.len(), 5);
        assert!(frame.values.iter().all(|&v| v <= 4));
        assert_eq!(frame.origin, [4, 0]);
        assert_eq!(frame.target, None);
        assert_eq!(u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize, bytes.len() - 4);
    }

    #[test]
    fn rejects_malformed_frames() {
        let f = f5();
        assert!(matches!(decode_msg(&[0, 0, 0, 0], f), Err(Error::Decode(_))));
        assert!(matches!(decode_msg(&[0, 0], f), Err(Error::Decode(_))));
        assert!(matches!(decode_msg(&[0, 0x20, 0, 0, b'{'], f), Err(Error::Decode(_))));
        let good = encode_msg(&query(&[1, 2, 3, 4, 0]));
        assert!(decode_msg(&good[..good.len() - 1], f).is_err());
        let mut r = &good[..good.len() - 1];
        assert!(matches!(read_frame(&mut r, f), Err(Error::Decode(_))));

        let body = String::from_utf8(good[4..].to_vec()).unwrap();
        let reframe = |s: String| {
            let mut out = (s.len() as u32).to_be_bytes().to_vec();
            out.extend(s.into_bytes());
            out
        };
        for broken in [
            body.replace("\"query\",", "\"gossip\","),
            body.replace("\"values\"", "\"extra\":1,\"values\""),
            body.replace("[1,2,3,4,0]", "[1,2,3,4,5]"),
            body.replace("\"phase\":\"query\"", "\"phase\":\"answer\""),
            body.replace("\"target\":null", "\"target\":3"),
        ] {
            assert_ne!(broken, body);
            assert!(matches!(decode_msg(&reframe(broken), f), Err(Error::Decode(_))));
        }
        assert!(decode_msg(&good, PrimeField::new(3).unwrap()).is_err());
    }

    #[test]
    fn stream_reading() {
        let a = query(&[1, 1, 1, 1, 1]);
        let b = query(&[2, 2, 2, 2, 2]);
        let mut buf = Vec::new();
        write_frame(&mut buf, &a).unwrap();
        write_frame(&mut buf, &b).unwrap();
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r, f5()).unwrap(), Some(a));
        assert_eq!(read_frame(&mut r, f5()).unwrap(), Some(b));
        assert_eq!(read_frame(&mut r, f5()).unwrap(), None);
    }

    fn endpoint() -> impl Strategy<Value = Endpoint> {
        (1u32..6, 0u32..7).prop_map(|(p, d)| Endpoint::new(PartyId(p), d))
    }

    fn message() -> impl Strategy<Value = Message> {
        let f = f5();
        let el = move || (0u64..5).prop_map(move |v| f.element(v));
        prop_oneof![
            (endpoint(), endpoint(), 1u32..4, prop::collection::vec(el(), 0..8))
                .prop_map(|(o, d, p, v)| Message::Query(QueryMsg { origin: o, dest: d, partition: p, vector: v })),
            (endpoint(), endpoint(), 1u32..4, el())
                .prop_map(|(o, d, p, v)| Message::Answer(AnswerMsg { origin: o, dest: d, partition: p, value: v })),
            (endpoint(), endpoint(), prop::collection::vec(el(), 0..4)).prop_map(|(o, d, v)| {
                Message::Randomness(RandomnessShareMsg { kind: RandomnessKind::Local, origin: o, dest: d, rank: None, values: v })
            }),
            (endpoint(), endpoint(), 1u32..9, el()).prop_map(|(o, d, k, v)| {
                Message::Randomness(RandomnessShareMsg { kind: RandomnessKind::Share, origin: o, dest: d, rank: Some(k), values: vec![v] })
            }),
            (endpoint(), endpoint(), el()).prop_map(|(o, d, v)| {
                Message::Randomness(RandomnessShareMsg { kind: RandomnessKind::Global, origin: o, dest: d, rank: None, values: vec![v] })
            }),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(session_id in any::<u64>(), message in message()) {
            let env = Envelope { session_id, message };
            prop_assert_eq!(decode_msg(&encode_msg(&env), f5()).unwrap(), env);
        }
    }
}
