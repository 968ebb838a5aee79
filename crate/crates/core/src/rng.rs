//! Master-seed splitting into named, independent streams. The split uses a
//! fixed FNV-1a hash of the stream name so adding draws to one component
//! never shifts another component's stream.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::agent::AgentRngs;

#[derive(Debug, Clone, Copy)]
pub struct RngStreams {
    master: u64,
}

impl RngStreams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn stream(&self, name: &str) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(fnv1a(self.master, name))
    }

    pub fn agent_rngs(&self) -> AgentRngs {
        AgentRngs {
            noise: self.stream("agent-noise"),
            reward: self.stream("env-reward"),
            init: self.stream("env-init"),
            walk: self.stream("walk"),
        }
    }
}

fn fnv1a(master: u64, name: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in master.to_le_bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    for byte in name.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
