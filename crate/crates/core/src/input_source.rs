//! Sources of DMA input bytes and the shadow RAM that keeps injected bytes
//! stable across repeated reads.
//!
//! Providers hand out one byte per (channel, offset) request. The shadow is
//! byte-granular because firmware mixes read widths freely (endianness
//! conversion reads a word buffer byte-wise); each byte address is pulled
//! from the provider at most once per channel lifetime.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("input stream exhausted")]
pub struct Exhausted;

/// Behavioral interface of a DMA input byte source.
pub trait InputProvider {
    fn next_byte(&mut self, channel_key: u32, offset: u32) -> Result<u8, Exhausted>;
}

/// Fills every buffer with zeros. Deterministic baseline used for accuracy
/// testing, where meaningful input data is irrelevant.
#[derive(Debug, Default, Clone, Copy)]
pub struct ZeroProvider;

impl InputProvider for ZeroProvider {
    fn next_byte(&mut self, _channel_key: u32, _offset: u32) -> Result<u8, Exhausted> {
        Ok(0x00)
    }
}

/// What a finite stream does once its bytes run out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exhaustion {
    #[default]
    ZeroPad,
    Halt,
}

/// Serves a finite byte sequence in order of first-request arrival across
/// all channels, the way a fuzzer pipe is consumed.
#[derive(Debug, Clone)]
pub struct StreamProvider {
    bytes: Vec<u8>,
    pos: usize,
    exhaustion: Exhaustion,
}

impl StreamProvider {
    pub fn new(bytes: Vec<u8>, exhaustion: Exhaustion) -> Self {
        StreamProvider {
            bytes,
            pos: 0,
            exhaustion,
        }
    }
}

impl InputProvider for StreamProvider {
    fn next_byte(&mut self, _channel_key: u32, _offset: u32) -> Result<u8, Exhausted> {
        match self.bytes.get(self.pos) {
            Some(&b) => {
                self.pos += 1;
                Ok(b)
            }
            None => match self.exhaustion {
                Exhaustion::ZeroPad => Ok(0x00),
                Exhaustion::Halt => Err(Exhausted),
            },
        }
    }
}

/// Sparse byte store populated lazily on first injection.
///
/// Entries are write-once for the owning channel's lifetime; only explicit
/// firmware writes overwrite them (and those also terminate the channel).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShadowRam {
    bytes: BTreeMap<u32, u8>,
}

impl ShadowRam {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, addr: u32) -> Option<u8> {
        self.bytes.get(&addr).copied()
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u8)> + '_ {
        self.bytes.iter().map(|(&a, &b)| (a, b))
    }

    /// Stores the low `width` bytes of `value` little-endian at `addr`,
    /// overwriting any injected bytes. Used for firmware writes.
    pub fn overwrite(&mut self, addr: u32, width: u8, value: u32) {
        for i in 0..u32::from(width) {
            let byte = (value >> (8 * i)) as u8;
            self.bytes.insert(addr.wrapping_add(i), byte);
        }
    }

    /// Serves a read of `width` bytes at `addr`: shadowed bytes come back
    /// as-is, missing ones are pulled from the provider (offset is relative
    /// to `base`) and stored.
    pub fn read_through(
        &mut self,
        provider: &mut dyn InputProvider,
        addr: u32,
        width: u8,
        channel_key: u32,
        base: u32,
    ) -> Result<Vec<u8>, Exhausted> {
        let mut out = Vec::with_capacity(width as usize);
        for i in 0..u32::from(width) {
            let a = addr.wrapping_add(i);
            let byte = match self.bytes.get(&a) {
                Some(&b) => b,
                None => {
                    let b = provider.next_byte(channel_key, a.wrapping_sub(base))?;
                    self.bytes.insert(a, b);
                    b
                }
            };
            out.push(byte);
        }
        Ok(out)
    }
}
