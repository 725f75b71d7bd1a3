//! Test-side oracles, independent of the engine's implementation path.
#![allow(dead_code)] // not every test target uses every oracle

use std::collections::BTreeMap;

use dmascope::{AccessKind, AddressClass, MemoryAccessEvent, MemoryMapProfile};

/// Literal re-execution of the buffer size inference rule over a whole read
/// sequence, from scratch.
pub fn size_inference_oracle(base: u32, reads: &[(u32, u8)]) -> u64 {
    let mut perceived: u64 = 0;
    for &(addr, width) in reads {
        let span_size = 2 * u64::from(width);
        let span_base = u64::from(base) + perceived;
        let a = u64::from(addr);
        if span_base <= a && a < span_base + span_size {
            perceived = (a - u64::from(base)) + u64::from(width);
        }
    }
    perceived
}

/// Brute-force stream-configuration scanner: re-derives the MMIO shadow
/// from the raw event list and enumerates every maximal run of consecutive
/// pointer-holding words (length >= 2, at least one RAM pointer).
///
/// Groups are returned as ordered (register, value) lists keyed by their
/// lowest register address.
pub fn brute_force_scan(
    profile: &MemoryMapProfile,
    events: &[MemoryAccessEvent],
) -> BTreeMap<u32, Vec<(u32, u32)>> {
    // word -> (value, eligible)
    let mut shadow: BTreeMap<u32, (u32, bool)> = BTreeMap::new();
    for ev in events {
        if ev.kind != AccessKind::Write || profile.classify(ev.addr) != AddressClass::Mmio {
            continue;
        }
        let word = ev.addr & !3;
        let eligible = ev.width == 4 && ev.addr % 4 == 0 && profile.is_pointer_like(ev.value);
        shadow.insert(word, (ev.value, eligible));
    }

    let mut groups = BTreeMap::new();
    let words: Vec<u32> = shadow
        .iter()
        .filter(|(_, (_, e))| *e)
        .map(|(&w, _)| w)
        .collect();
    let mut i = 0;
    while i < words.len() {
        let mut j = i;
        while j + 1 < words.len() && words[j + 1] == words[j] + 4 {
            j += 1;
        }
        if j > i {
            let members: Vec<(u32, u32)> =
                words[i..=j].iter().map(|&w| (w, shadow[&w].0)).collect();
            let has_ram = members
                .iter()
                .any(|&(_, v)| profile.classify(v) == AddressClass::Ram);
            if has_ram {
                groups.insert(words[i], members);
            }
        }
        i = j + 1;
    }
    groups
}
