use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::MAX_CODE_LEN;

const TABLE: &str = include_str!("../../data/reliability_5g.txt");
const TABLE_SHA256: &str = "16b201807fd46372f056aaea4fea053ece44d45c1924378a86c6e7a834cc1cae";

static SEQUENCE: OnceLock<Result<Vec<usize>, String>> = OnceLock::new();

/// The 5G NR polar reliability sequence for length 1024, least reliable
/// bit channel first.
pub fn reliability_sequence() -> Result<&'static [usize]> {
    SEQUENCE
        .get_or_init(|| parse(TABLE))
        .as_ref()
        .map(Vec::as_slice)
        .map_err(|e| Error::ReliabilityTable(e.clone()))
}

fn parse(text: &str) -> Result<Vec<usize>, String> {
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    if hex != TABLE_SHA256 {
        return Err(format!("checksum {hex} does not match"));
    }
    let seq = text
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = vec![false; MAX_CODE_LEN];
    if seq.len() != MAX_CODE_LEN {
        return Err(format!("{} entries", seq.len()));
    }
    for &q in &seq {
        if q >= MAX_CODE_LEN || std::mem::replace(&mut seen[q], true) {
            return Err(format!("entry {q} repeated or out of range"));
        }
    }
    Ok(seq)
}
