//! Reproducible random-number streams.
//!
//! Every random quantity in the library is drawn from a [`Stream`], a
//! ChaCha8 generator keyed by `(seed, stream id)`. ChaCha exposes 2^64
//! independent streams per key, so the stream id is the only thing that
//! separates, say, the holding times of replica 7 from the decorations of
//! site -3.
//!
//! Stream ids are partitioned by domain: the top byte holds a
//! [`Domain`] tag and the low 56 bits the index inside that domain. Site
//! indices are zigzag-encoded so that negative sites get their own ids.
//!
//! Nested namespaces (a fresh environment per replica, say) get their own
//! key via [`child_seed`], a SplitMix64 mix of the parent seed, the domain
//! and the index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const INDEX_BITS: u32 = 56;
const INDEX_MASK: u64 = (1 << INDEX_BITS) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Domain {
    Replica = 1,
    Site = 2,
    Calibration = 3,
    Environment = 4,
    Bootstrap = 5,
    Tree = 6,
    Probe = 7,
}

/// Stream for walk replica `replica_id` under `seed`.
pub fn derive_stream(seed: u64, replica_id: u64) -> Stream {
    stream(seed, Domain::Replica, replica_id)
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(domain, index));
    rng
}

/// Stream for the parameters of site `site` in the environment keyed by `seed`.
pub fn site_stream(seed: u64, site: i64) -> Stream {
    stream(seed, Domain::Site, zigzag(site))
}

pub fn stream_id(domain: Domain, index: u64) -> u64 {
    ((domain as u64) << INDEX_BITS) | (index & INDEX_MASK)
}

/// Seed for a nested namespace; distinct `(seed, domain, index)` triples map
/// to distinct keys with overwhelming probability.
pub fn child_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ stream_id(domain, index)).wrapping_add(index))
}

pub fn zigzag(x: i64) -> u64 {
    ((x << 1) ^ (x >> 63)) as u64
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
