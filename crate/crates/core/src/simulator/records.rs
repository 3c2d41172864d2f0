//! 100-byte records with 10-byte printable keys.
//!
//! Layout: bytes `0..10` key, `10..30` the record's index in its batch as
//! zero-padded decimal, `30..98` filler, `98..100` `"\r\n"`.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

pub const RECORD_LEN: usize = 100;
pub const KEY_LEN: usize = 10;
const INDEX_LEN: usize = 20;
const FEW_DISTINCT: usize = 10;

/// Printable ASCII `'!'..='~'`.
const ALPHABET_START: u8 = b'!';
const ALPHABET: u64 = 94;

pub type Record = [u8; RECORD_LEN];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyDistribution {
    #[default]
    UniformPrintable,
    Sorted,
    ReverseSorted,
    /// Exactly `min(count, 10)` distinct keys.
    FewDistinct,
}

impl std::str::FromStr for KeyDistribution {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "uniform" | "uniformprintable" => Ok(Self::UniformPrintable),
            "sorted" => Ok(Self::Sorted),
            "reverse" | "reversesorted" => Ok(Self::ReverseSorted),
            "fewdistinct" => Ok(Self::FewDistinct),
            _ => Err(format!(
                "unknown key distribution `{s}` (expected uniform, sorted, reverse-sorted or few-distinct)"
            )),
        }
    }
}

/// What to generate: `count` records with keys drawn from `key_distribution`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordBatch {
    pub count: u64,
    pub key_distribution: KeyDistribution,
    pub seed: u64,
}

impl RecordBatch {
    pub fn generate(&self) -> Vec<Record> {
        generate_records(self.count, self.key_distribution, self.seed)
    }
}

fn random_key<R: Rng>(rng: &mut R) -> [u8; KEY_LEN] {
    let mut key = [0u8; KEY_LEN];
    for b in &mut key {
        *b = ALPHABET_START + rng.gen_range(0..ALPHABET as u8);
    }
    key
}

/// Base-94 big-endian digits of `v`, so byte order matches numeric order.
fn ordinal_key(mut v: u64) -> [u8; KEY_LEN] {
    let mut key = [ALPHABET_START; KEY_LEN];
    for b in key.iter_mut().rev() {
        *b = ALPHABET_START + (v % ALPHABET) as u8;
        v /= ALPHABET;
    }
    key
}

fn build(index: u64, key: [u8; KEY_LEN]) -> Record {
    let mut r = [b'.'; RECORD_LEN];
    r[..KEY_LEN].copy_from_slice(&key);
    let digits = format!("{index:0width$}", width = INDEX_LEN);
    r[KEY_LEN..KEY_LEN + INDEX_LEN].copy_from_slice(digits.as_bytes());
    r[RECORD_LEN - 2..].copy_from_slice(b"\r\n");
    r
}

/// Deterministic for a fixed `(count, distribution, seed)`.
pub fn generate_records(count: u64, distribution: KeyDistribution, seed: u64) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match distribution {
        KeyDistribution::UniformPrintable => (0..count).map(|i| build(i, random_key(&mut rng))).collect(),
        KeyDistribution::Sorted => (0..count).map(|i| build(i, ordinal_key(i))).collect(),
        KeyDistribution::ReverseSorted => (0..count).map(|i| build(i, ordinal_key(count - 1 - i))).collect(),
        KeyDistribution::FewDistinct => {
            let m = (count as usize).min(FEW_DISTINCT);
            let mut keys: Vec<[u8; KEY_LEN]> = Vec::with_capacity(m);
            while keys.len() < m {
                let k = random_key(&mut rng);
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
            let mut slots: Vec<usize> = (0..count as usize).map(|i| i % m.max(1)).collect();
            slots.shuffle(&mut rng);
            slots
                .into_iter()
                .enumerate()
                .map(|(i, s)| build(i as u64, keys[s]))
                .collect()
        }
    }
}

/// Index stored in the record's filler, if intact.
pub fn record_index(r: &Record) -> Option<u64> {
    std::str::from_utf8(&r[KEY_LEN..KEY_LEN + INDEX_LEN]).ok()?.parse().ok()
}

pub fn write_records<W: Write>(mut out: W, records: &[Record]) -> std::io::Result<()> {
    for r in records {
        out.write_all(r)?;
    }
    out.flush()
}

pub fn read_records<R: Read>(mut input: R) -> Result<Vec<Record>, SimError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % RECORD_LEN != 0 {
        return Err(SimError::TruncatedRecords(bytes.len() as u64));
    }
    Ok(bytes
        .chunks_exact(RECORD_LEN)
        .map(|c| c.try_into().expect("exact chunk"))
        .collect())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-independent 64-bit multiset hash: the wrapping sum of a mixed hash
/// of every record.
pub fn digest<'a, I>(records: I) -> u64
where
    I: IntoIterator<Item = &'a Record>,
{
    records
        .into_iter()
        .fold(0u64, |acc, r| acc.wrapping_add(splitmix(fnv1a(r))))
}
