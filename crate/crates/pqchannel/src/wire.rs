//! Length-prefixed framing: `len: u32 BE ‖ type: u8 ‖ payload`, where `len`
//! counts the type byte and the payload.

use std::io::{Read, Write};

use crate::error::{ChannelError, Result};

pub const MAX_FRAME: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MsgType {
    ClientHello,
    ServerKemPub,
    ClientKemCt,
    Confirm,
    EncPassword,
    AuthResult,
    Redirect,
    Error,
}

impl MsgType {
    pub fn code(self) -> u8 {
        match self {
            MsgType::ClientHello => 0x01,
            MsgType::ServerKemPub => 0x02,
            MsgType::ClientKemCt => 0x03,
            MsgType::Confirm => 0x04,
            MsgType::EncPassword => 0x10,
            MsgType::AuthResult => 0x11,
            MsgType::Redirect => 0x12,
            MsgType::Error => 0x7f,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0x01 => MsgType::ClientHello,
            0x02 => MsgType::ServerKemPub,
            0x03 => MsgType::ClientKemCt,
            0x04 => MsgType::Confirm,
            0x10 => MsgType::EncPassword,
            0x11 => MsgType::AuthResult,
            0x12 => MsgType::Redirect,
            0x7f => MsgType::Error,
            other => return Err(ChannelError::Malformed(format!("unknown message type {other:#04x}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: MsgType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: MsgType, payload: impl Into<Vec<u8>>) -> Self {
        Self {
            kind,
            payload: payload.into(),
        }
    }

    pub fn error(message: &str) -> Self {
        Self::new(MsgType::Error, message.as_bytes())
    }

    pub fn encode(&self) -> Vec<u8> {
        let len = self.payload.len() + 1;
        let mut out = Vec::with_capacity(4 + len);
        out.extend_from_slice(&(len as u32).to_be_bytes());
        out.push(self.kind.code());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 5 {
            return Err(ChannelError::Malformed("frame shorter than its header".into()));
        }
        let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
        if len > MAX_FRAME {
            return Err(ChannelError::FrameTooLarge(len));
        }
        if len + 4 != bytes.len() || len == 0 {
            return Err(ChannelError::Malformed(format!(
                "length prefix {len} does not match {} body bytes",
                bytes.len() - 4
            )));
        }
        Ok(Self::new(MsgType::from_code(bytes[4])?, &bytes[5..]))
    }

    /// Turns an `Error` frame into `ChannelError::Peer` and checks the type.
    pub fn expect(self, kind: MsgType) -> Result<Vec<u8>> {
        if self.kind == kind {
            Ok(self.payload)
        } else if self.kind == MsgType::Error {
            Err(ChannelError::Peer(String::from_utf8_lossy(&self.payload).into_owned()))
        } else {
            Err(ChannelError::UnexpectedMessage {
                expected: kind,
                found: self.kind,
            })
        }
    }
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<()> {
    if frame.payload.len() + 1 > MAX_FRAME {
        return Err(ChannelError::FrameTooLarge(frame.payload.len() + 1));
    }
    w.write_all(&frame.encode())?;
    w.flush()?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Frame> {
    let mut header = [0u8; 4];
    r.read_exact(&mut header)?;
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME {
        return Err(ChannelError::FrameTooLarge(len));
    }
    if len == 0 {
        return Err(ChannelError::Malformed("empty frame".into()));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(Frame::new(MsgType::from_code(body[0])?, &body[1..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_roundtrip() {
        for code in 0..=255u8 {
            if let Ok(kind) = MsgType::from_code(code) {
                assert_eq!(kind.code(), code);
            }
        }
        assert!(MsgType::from_code(0x05).is_err());
    }

    #[test]
    fn frame_layout() {
        let f = Frame::new(MsgType::Confirm, vec![0xaa, 0xbb]);
        assert_eq!(f.encode(), vec![0, 0, 0, 3, 0x04, 0xaa, 0xbb]);
        assert_eq!(Frame::decode(&f.encode()).unwrap(), f);
    }

    #[test]
    fn stream_roundtrip_and_limits() {
        let mut buf = Vec::new();
        write_frame(&mut buf, &Frame::new(MsgType::ClientHello, vec![1; 32])).unwrap();
        write_frame(&mut buf, &Frame::error("nope")).unwrap();
        let mut cursor = std::io::Cursor::new(buf);
        assert_eq!(read_frame(&mut cursor).unwrap().payload, vec![1; 32]);
        let err = read_frame(&mut cursor)
            .unwrap()
            .expect(MsgType::AuthResult)
            .unwrap_err();
        assert!(matches!(err, ChannelError::Peer(m) if m == "nope"));

        let huge = ((MAX_FRAME + 1) as u32).to_be_bytes();
        assert!(matches!(
            read_frame(&mut std::io::Cursor::new(huge)),
            Err(ChannelError::FrameTooLarge(_))
        ));
        assert!(Frame::decode(&[0, 0, 0, 2, 1]).is_err());
    }
}
