//! AODV routing: route discovery (RREQ flood, RREP unicast), route selection
//! and RERR-based maintenance, plus data forwarding over established routes.

mod log;
mod node;
mod packet;
mod table;

pub use log::{LogKind, LogRecord, NodeLog};
pub use node::{Action, AodvNode, AodvParams};
pub use packet::{rerr_bytes, ControlKind, ControlPacket, DataPacket, Packet};
pub use table::{prefers, select_route, RouteEntry, RouteState, RoutingTable};

pub const RREQ_BYTES: u32 = 24;
pub const RREP_BYTES: u32 = 20;
pub const RERR_BASE_BYTES: u32 = 12;
pub const RERR_PER_DEST_BYTES: u32 = 8;
