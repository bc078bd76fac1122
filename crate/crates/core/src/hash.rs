//! 64-bit FNV-1a content hashing.
//!
//! Snippet identities, blob file names, and the reference backend's
//! pseudo-IPC perturbation all key off this hash, so the exact constants
//! matter: offset basis `0xcbf29ce484222325`, prime `0x100000001b3`.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// FNV-1a rendered as 16 lowercase hex digits; used as blob names and snippet ids.
pub fn fnv1a64_hex(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a64(bytes))
}

/// Hash of the whitespace-normalized form of a source text: runs of
/// whitespace collapse to a single space and leading/trailing whitespace
/// is dropped, so formatting-only edits hash identically.
pub fn normalized_hash(text: &str) -> u64 {
    let mut normalized = String::with_capacity(text.len());
    for token in text.split_whitespace() {
        if !normalized.is_empty() {
            normalized.push(' ');
        }
        normalized.push_str(token);
    }
    fnv1a64(normalized.as_bytes())
}

/// Mix a base seed with a stream index into an independent 64-bit seed
/// (splitmix64 finalizer). Every seeded component derives its generator
/// through this so replays are exact.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
