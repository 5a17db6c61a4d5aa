//! Retransmission-request construction and its bit-exact wire encoding.
//!
//! A request partitions the unreliable bit positions into contiguous blocks.
//! Describing one block costs two index fields of `ceil(log2 L)` bits each
//! (start and length); retransmitting it costs one bit per covered position.
//! The builder starts from the single block spanning the whole unreliable
//! set and recursively splits at the widest run of reliable bits whenever
//! the split lowers the total cost.

use crate::detect::UnreliableSet;
use crate::error::{Error, Result};

/// Width in bits of one index field for packets of `packet_len` bits.
pub fn index_field_width(packet_len: usize) -> u32 {
    debug_assert!(packet_len >= 2);
    usize::BITS - (packet_len - 1).leading_zeros()
}

/// One contiguous retransmission block, 1-based and inclusive of its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    start: usize,
    length: usize,
}

impl Block {
    pub fn new(start: usize, length: usize) -> Result<Self> {
        if start < 1 || length < 1 {
            return Err(Error::InvalidInput(format!(
                "block start and length must be >= 1, got ({start}, {length})"
            )));
        }
        Ok(Self { start, length })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Last covered position, inclusive.
    pub fn end(&self) -> usize {
        self.start + self.length - 1
    }

    pub fn covers(&self, pos: usize) -> bool {
        pos >= self.start && pos <= self.end()
    }
}

/// An ordered, nonoverlapping list of retransmission blocks for a packet of
/// `packet_len` bits. This is the feedback-channel payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRequest {
    blocks: Vec<Block>,
    packet_len: usize,
}

impl BlockRequest {
    /// Validates ordering, nonoverlap, and range.
    pub fn new(blocks: Vec<Block>, packet_len: usize) -> Result<Self> {
        if packet_len < 2 {
            return Err(Error::InvalidInput(format!(
                "packet length must be >= 2, got {packet_len}"
            )));
        }
        let mut prev_end = 0usize;
        for b in &blocks {
            if b.start() <= prev_end {
                return Err(Error::InvalidInput(
                    "blocks must be sorted by start and nonoverlapping".into(),
                ));
            }
            if b.end() > packet_len {
                return Err(Error::InvalidInput(format!(
                    "block ({}, {}) exceeds packet length {}",
                    b.start(),
                    b.length(),
                    packet_len
                )));
            }
            prev_end = b.end();
        }
        Ok(Self { blocks, packet_len })
    }

    /// The request asking for nothing.
    pub fn empty(packet_len: usize) -> Result<Self> {
        Self::new(Vec::new(), packet_len)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn packet_len(&self) -> usize {
        self.packet_len
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Descriptor bits: two index fields per block.
    pub fn overhead_bits(&self) -> u64 {
        2 * u64::from(index_field_width(self.packet_len)) * self.blocks.len() as u64
    }

    /// Bits that will be retransmitted.
    pub fn payload_bits(&self) -> u64 {
        self.blocks.iter().map(|b| b.length() as u64).sum()
    }

    /// Total accounted feedback cost: descriptor plus payload bits per
    /// block. The wire-format block-count header is not accounted here.
    pub fn total_cost_bits(&self) -> u64 {
        self.overhead_bits() + self.payload_bits()
    }

    pub fn covers(&self, pos: usize) -> bool {
        self.blocks.iter().any(|b| b.covers(pos))
    }
}

/// Cost in bits of retransmitting the single block spanning positions
/// `m..=n`: two index fields plus the covered bits.
pub fn block_cost(m: usize, n: usize, packet_len: usize) -> Result<u64> {
    if packet_len < 2 {
        return Err(Error::InvalidInput(format!(
            "packet length must be >= 2, got {packet_len}"
        )));
    }
    if m < 1 || m > n {
        return Err(Error::InvalidInput(format!(
            "need 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    if n > packet_len {
        return Err(Error::InvalidInput(format!(
            "block end {n} exceeds packet length {packet_len}"
        )));
    }
    Ok(2 * u64::from(index_field_width(packet_len)) + (n - m + 1) as u64)
}

/// Finds the split point inside `[m, n]`: the consecutive pair `(n', m')` of
/// unreliable indices with the most reliable bits between them. Ties break
/// toward the smallest `n'`. Returns `None` when fewer than two unreliable
/// indices fall inside the range.
pub fn best_split(
    set: &UnreliableSet,
    m: usize,
    n: usize,
) -> Result<Option<(usize, usize)>> {
    if !set.contains(m) || !set.contains(n) {
        return Err(Error::InvalidInput(format!(
            "split endpoints ({m}, {n}) must both be unreliable indices"
        )));
    }
    let inside: Vec<usize> = set
        .indices()
        .iter()
        .copied()
        .filter(|&i| i >= m && i <= n)
        .collect();
    Ok(widest_gap(&inside))
}

/// The consecutive pair `(n', m')` with the largest gap `m' - n' - 1`;
/// ties break toward the smallest `n'`.
fn widest_gap(indices: &[usize]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, usize)> = None; // (gap, n', m')
    for w in indices.windows(2) {
        let gap = w[1] - w[0] - 1;
        if best.is_none_or(|(best_gap, _, _)| gap > best_gap) {
            best = Some((gap, w[0], w[1]));
        }
    }
    best.map(|(_, np, mp)| (np, mp))
}

/// Builds the minimum-cost request for an unreliable set by the recursive
/// split: starting from the block `[min A, max A]`, each block is split at
/// its widest reliable gap whenever the two-block cost undercuts the
/// one-block cost, and the recursion continues into both halves until no
/// block improves.
pub fn build_request(set: &UnreliableSet, packet_len: usize) -> Result<BlockRequest> {
    if packet_len < 2 {
        return Err(Error::InvalidInput(format!(
            "packet length must be >= 2, got {packet_len}"
        )));
    }
    if set.is_empty() {
        return BlockRequest::empty(packet_len);
    }
    let indices = set.indices();
    if *indices.last().expect("nonempty") > packet_len {
        return Err(Error::InvalidInput(format!(
            "unreliable index exceeds packet length {packet_len}"
        )));
    }

    let mut blocks = Vec::new();
    split_into(indices, packet_len, &mut blocks)?;
    BlockRequest::new(blocks, packet_len)
}

fn split_into(indices: &[usize], packet_len: usize, out: &mut Vec<Block>) -> Result<()> {
    let m = indices[0];
    let n = *indices.last().expect("nonempty slice");
    if let Some((np, mp)) = widest_gap(indices) {
        let unsplit = block_cost(m, n, packet_len)?;
        let two_blocks = block_cost(m, np, packet_len)? + block_cost(mp, n, packet_len)?;
        if two_blocks < unsplit {
            let cut = indices.partition_point(|&i| i <= np);
            split_into(&indices[..cut], packet_len, out)?;
            split_into(&indices[cut..], packet_len, out)?;
            return Ok(());
        }
    }
    out.push(Block::new(m, n - m + 1)?);
    Ok(())
}

/// Encodes a request for the feedback channel, most-significant bit first:
/// a `ceil(log2 L)`-bit block count, then per block a field holding
/// `start - 1` and a field holding `length - 1`.
pub fn encode_request(req: &BlockRequest) -> Result<Vec<u8>> {
    let width = index_field_width(req.packet_len());
    if req.blocks().len() >= req.packet_len() {
        return Err(Error::EncodingOverflow(format!(
            "{} blocks do not fit the count field for packet length {}",
            req.blocks().len(),
            req.packet_len()
        )));
    }
    let mut bits = Vec::with_capacity((1 + 2 * req.blocks().len()) * width as usize);
    push_field(&mut bits, req.blocks().len() as u64, width);
    for b in req.blocks() {
        push_field(&mut bits, (b.start() - 1) as u64, width);
        push_field(&mut bits, (b.length() - 1) as u64, width);
    }
    Ok(bits)
}

/// Decodes a feedback bitstring produced by [`encode_request`] with the same
/// packet length. Rejects truncated or oversized strings and any block list
/// that is out of range, unsorted, or overlapping.
pub fn decode_request(bits: &[u8], packet_len: usize) -> Result<BlockRequest> {
    if packet_len < 2 {
        return Err(Error::InvalidInput(format!(
            "packet length must be >= 2, got {packet_len}"
        )));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::MalformedRequest("bitstring values must be 0 or 1".into()));
    }
    let width = index_field_width(packet_len) as usize;
    if bits.len() < width {
        return Err(Error::MalformedRequest(format!(
            "bitstring shorter than the {width}-bit count header"
        )));
    }
    let count = read_field(&bits[..width]) as usize;
    let expected = width + 2 * width * count;
    if bits.len() != expected {
        return Err(Error::MalformedRequest(format!(
            "bitstring length {} does not match {} blocks (expected {expected})",
            bits.len(),
            count
        )));
    }
    let mut blocks = Vec::with_capacity(count);
    for i in 0..count {
        let at = width + 2 * width * i;
        let start = read_field(&bits[at..at + width]) as usize + 1;
        let length = read_field(&bits[at + width..at + 2 * width]) as usize + 1;
        blocks.push(Block::new(start, length)?);
    }
    BlockRequest::new(blocks, packet_len)
        .map_err(|e| Error::MalformedRequest(e.to_string()))
}

fn push_field(bits: &mut Vec<u8>, value: u64, width: u32) {
    for k in (0..width).rev() {
        bits.push(((value >> k) & 1) as u8);
    }
}

fn read_field(bits: &[u8]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
}
