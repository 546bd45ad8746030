use crate::sim::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    Rreq,
    Rrep,
    Rerr,
}

/// AODV control message. RERR carries its unreachable list in
/// `unreachable`; `origin`/`destination` are unused for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPacket {
    pub kind: ControlKind,
    pub origin: NodeId,
    pub destination: NodeId,
    pub rreq_id: u64,
    pub origin_seq: u64,
    pub dest_seq: u64,
    pub hop_count: u32,
    pub unreachable: Vec<(NodeId, u64)>,
}

impl ControlPacket {
    pub fn rreq(
        origin: NodeId,
        destination: NodeId,
        rreq_id: u64,
        origin_seq: u64,
        dest_seq: u64,
    ) -> Self {
        ControlPacket {
            kind: ControlKind::Rreq,
            origin,
            destination,
            rreq_id,
            origin_seq,
            dest_seq,
            hop_count: 0,
            unreachable: Vec::new(),
        }
    }

    pub fn rrep(origin: NodeId, destination: NodeId, dest_seq: u64, hop_count: u32) -> Self {
        ControlPacket {
            kind: ControlKind::Rrep,
            origin,
            destination,
            rreq_id: 0,
            origin_seq: 0,
            dest_seq,
            hop_count,
            unreachable: Vec::new(),
        }
    }

    pub fn rerr(unreachable: Vec<(NodeId, u64)>) -> Self {
        ControlPacket {
            kind: ControlKind::Rerr,
            origin: 0,
            destination: 0,
            rreq_id: 0,
            origin_seq: 0,
            dest_seq: 0,
            hop_count: 0,
            unreachable,
        }
    }

    /// Wire size in bytes, using the RFC 3561 message layouts.
    pub fn wire_size(&self) -> u32 {
        match self.kind {
            ControlKind::Rreq => super::RREQ_BYTES,
            ControlKind::Rrep => super::RREP_BYTES,
            ControlKind::Rerr => rerr_bytes(self.unreachable.len()),
        }
    }
}

pub fn rerr_bytes(destinations: usize) -> u32 {
    super::RERR_BASE_BYTES + super::RERR_PER_DEST_BYTES * destinations.saturating_sub(1) as u32
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub src: NodeId,
    pub dst: NodeId,
    pub seq: u64,
    pub size: u32,
    pub created: SimTime,
    /// Every node the packet has visited, source first.
    pub trace: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Packet {
    Control(ControlPacket),
    Data(DataPacket),
}
