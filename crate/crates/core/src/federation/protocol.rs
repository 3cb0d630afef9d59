//! Wire messages and TCP framing (4-byte big-endian length, then JSON).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::client::ClientReport;
use crate::error::{Error, Result};
use crate::pareto::FeatureRanking;
use crate::SCHEMA_VERSION;

/// Frames above this size are rejected before allocation.
pub const MAX_FRAME_BYTES: u32 = 256 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Server,
    Client(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Message {
    Report(ClientReport),
    Ranking(FeatureRanking),
    Abort(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolMessage {
    pub schema_version: u32,
    pub sender: Party,
    pub message: Message,
}

impl ProtocolMessage {
    pub fn report(report: ClientReport) -> Self {
        ProtocolMessage {
            schema_version: SCHEMA_VERSION,
            sender: Party::Client(report.client_id),
            message: Message::Report(report),
        }
    }

    pub fn ranking(ranking: FeatureRanking) -> Self {
        ProtocolMessage {
            schema_version: SCHEMA_VERSION,
            sender: Party::Server,
            message: Message::Ranking(ranking),
        }
    }

    pub fn abort(sender: Party, reason: impl Into<String>) -> Self {
        ProtocolMessage {
            schema_version: SCHEMA_VERSION,
            sender,
            message: Message::Abort(reason.into()),
        }
    }

    /// Checks the schema version and that reports only come from clients
    /// (with a matching id) and rankings only from the server.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Protocol(format!(
                "schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match (&self.sender, &self.message) {
            (Party::Client(id), Message::Report(r)) if r.client_id == *id => Ok(()),
            (Party::Client(id), Message::Report(r)) => Err(Error::Protocol(format!(
                "client {id} sent a report labelled client {}",
                r.client_id
            ))),
            (Party::Server, Message::Report(_)) => {
                Err(Error::Protocol("reports must flow client to server".into()))
            }
            (Party::Client(id), Message::Ranking(_)) => Err(Error::Protocol(format!(
                "client {id} sent a ranking; rankings flow server to client"
            ))),
            _ => Ok(()),
        }
    }
}

pub fn write_frame(w: &mut impl Write, msg: &ProtocolMessage) -> Result<()> {
    let body = serde_json::to_vec(msg)?;
    let len = u32::try_from(body.len())
        .ok()
        .filter(|&n| n <= MAX_FRAME_BYTES)
        .ok_or_else(|| Error::Protocol(format!("frame of {} bytes is too large", body.len())))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

pub fn read_frame(r: &mut impl Read) -> Result<ProtocolMessage> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_BYTES {
        return Err(Error::Protocol(format!("frame of {len} bytes is too large")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    let msg: ProtocolMessage = serde_json::from_slice(&body)?;
    msg.validate()?;
    Ok(msg)
}
