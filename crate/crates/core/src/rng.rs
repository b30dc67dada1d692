//! Namespaced deterministic random streams.
//!
//! Every consumer of randomness asks for a stream identified by
//! `(run, purpose, a, b)`. Streams are independent ChaCha generators whose
//! seeds are derived by hashing that tuple, so the draws seen by one consumer
//! never depend on how many draws another consumer made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a random stream is used for. Part of the stream seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Purpose {
    ChannelParams,
    ChannelMatrix,
    Decode,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::ChannelParams => 0x6368_616e_7061_7261,
            Purpose::ChannelMatrix => 0x6368_616e_6d61_7478,
            Purpose::Decode => 0x7068_7964_6563_6f64,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed factory for one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    run: u64,
}

impl RngStreams {
    pub fn new(run: u64) -> Self {
        Self { run }
    }

    pub fn run(&self) -> u64 {
        self.run
    }

    pub fn stream(&self, purpose: Purpose, a: u64, b: u64) -> SimRng {
        let mut h = splitmix64(self.run ^ 0x5DEE_CE66_D1CE_4E5B);
        for word in [purpose.tag(), a, b] {
            h = splitmix64(h ^ word);
        }
        let mut seed = [0u8; 32];
        for (i, chunk) in seed.chunks_mut(8).enumerate() {
            h = splitmix64(h.wrapping_add(i as u64));
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
