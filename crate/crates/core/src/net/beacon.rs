//! UDP presence beacons: workers announce themselves with single-datagram
//! HELLO messages; an offloader can collect them into a registry instead of
//! reading a static file.

use std::net::UdpSocket;
use std::time::{Duration, Instant};

use indexmap::IndexMap;

use crate::net::frame::Message;
use crate::net::registry::{NodeAddress, Registry, RegistryEntry};
use crate::net::NetError;

pub const DEFAULT_BEACON_PORT: u16 = 47474;

/// Sends one HELLO datagram to `target` (a broadcast or unicast address).
pub fn send_beacon(target: &str, hello: &Message) -> Result<(), NetError> {
    debug_assert!(matches!(hello, Message::Hello { .. }));
    let body = serde_json::to_vec(hello).map_err(|e| NetError::MalformedBody(e.to_string()))?;
    let socket = UdpSocket::bind("0.0.0.0:0")?;
    socket.set_broadcast(true)?;
    socket.send_to(&body, target)?;
    Ok(())
}

/// Listens for HELLO beacons on `port` for the given window and merges them
/// into a registry. Duplicate node ids keep the most recent beacon. Entries
/// point at the sender's IP with the advertised service port.
pub fn discover_beacons(port: u16, window: Duration) -> Result<Registry, NetError> {
    let socket = UdpSocket::bind(("0.0.0.0", port))?;
    let deadline = Instant::now() + window;
    let mut buf = [0u8; 64 * 1024];
    let mut entries: IndexMap<crate::domain::NodeId, RegistryEntry> = IndexMap::new();
    loop {
        let remaining = deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            break;
        }
        socket.set_read_timeout(Some(remaining))?;
        let (len, from) = match socket.recv_from(&mut buf) {
            Ok(x) => x,
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                break
            }
            Err(e) => return Err(e.into()),
        };
        // Datagrams that are not HELLO messages are ignored, not fatal.
        if let Ok(Message::Hello { node_id, class, port }) = serde_json::from_slice(&buf[..len]) {
            let entry = RegistryEntry {
                node_id: node_id.clone(),
                address: NodeAddress::Socket(format!("{}:{}", from.ip(), port)),
                class,
                link: None,
                profile: None,
            };
            entries.insert(node_id, entry);
        }
    }
    Ok(Registry { entries })
}
