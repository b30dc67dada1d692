//! RLC unacknowledged mode as a byte stream: packets are cut into segments
//! to fill transport blocks and reassembled at the receiver. Nothing is
//! retransmitted at this layer.

use std::collections::{BTreeMap, VecDeque};

/// Piece of one packet carried in a transport block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub packet_id: u64,
    pub bytes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Queued {
    id: u64,
    size: u32,
    remaining: u32,
}

/// Transmit-side queue.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RlcTxQueue {
    packets: VecDeque<Queued>,
    queued_bytes: u64,
}

impl RlcTxQueue {
    pub fn enqueue(&mut self, packet_id: u64, size: u32) {
        if size == 0 {
            return;
        }
        self.packets.push_back(Queued {
            id: packet_id,
            size,
            remaining: size,
        });
        self.queued_bytes += u64::from(size);
    }

    pub fn queued_bytes(&self) -> u64 {
        self.queued_bytes
    }

    pub fn queued_packets(&self) -> usize {
        self.packets.len()
    }

    /// Fill up to `tbs_bytes` with the head of the queue.
    pub fn dequeue(&mut self, tbs_bytes: u32) -> Vec<Segment> {
        let mut room = tbs_bytes;
        let mut out = Vec::new();
        while room > 0 {
            let Some(head) = self.packets.front_mut() else {
                break;
            };
            let take = head.remaining.min(room);
            out.push(Segment {
                packet_id: head.id,
                bytes: take,
            });
            head.remaining -= take;
            room -= take;
            self.queued_bytes -= u64::from(take);
            if head.remaining == 0 {
                self.packets.pop_front();
            }
        }
        out
    }

    /// Size of a packet still (partly) in the queue.
    pub fn packet_size(&self, packet_id: u64) -> Option<u32> {
        self.packets
            .iter()
            .find(|p| p.id == packet_id)
            .map(|p| p.size)
    }
}

/// A packet whose bytes all arrived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletedPacket {
    pub packet_id: u64,
    pub size: u32,
}

/// Receive-side reassembly. Segments may arrive in any order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RlcRxReassembly {
    partial: BTreeMap<u64, (u32, u32)>,
}

impl RlcRxReassembly {
    /// Deliver segments; `size_of` gives the full size of a packet. Returns
    /// packets completed by these segments.
    pub fn receive(
        &mut self,
        segments: &[Segment],
        mut size_of: impl FnMut(u64) -> u32,
    ) -> Vec<CompletedPacket> {
        let mut done = Vec::new();
        for seg in segments {
            let entry = self
                .partial
                .entry(seg.packet_id)
                .or_insert_with(|| (0, size_of(seg.packet_id)));
            entry.0 += seg.bytes;
            if entry.0 >= entry.1 {
                let size = entry.1;
                self.partial.remove(&seg.packet_id);
                done.push(CompletedPacket {
                    packet_id: seg.packet_id,
                    size,
                });
            }
        }
        done
    }

    pub fn incomplete_packets(&self) -> usize {
        self.partial.len()
    }
}
