//! End-to-end acceptance suite. Each test covers one criterion and prints
//! a pass line; a failed assertion is the fail line.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use dmascope::channel_tracker::{ChannelTracker, LifecycleState, TerminationReason};
use dmascope::engine::Engine;
use dmascope::input_source::ZeroProvider;
use dmascope::memory_map::{profile_by_name, AddressClass};
use dmascope::scenario::{builtin_scenario, builtin_scenarios, run_scenario};
use dmascope::stream_detector::{StreamConfiguration, StreamPointer};
use dmascope::trace::{parse_trace, write_trace};
use dmascope::{MemoryAccessEvent, ShadowRam};

use common::{brute_force_scan, size_inference_oracle};

fn zero_engine(profile: &str) -> Engine {
    Engine::new(profile_by_name(profile).unwrap(), Box::new(ZeroProvider))
}

fn pair_config(key: u32, src: u32, dest: u32, at: u64) -> StreamConfiguration {
    let profile = profile_by_name("stm32f103").unwrap();
    StreamConfiguration {
        stream_key: key,
        pointers: vec![
            StreamPointer {
                register: key,
                value: src,
                class: profile.classify(src),
            },
            StreamPointer {
                register: key + 4,
                value: dest,
                class: profile.classify(dest),
            },
        ],
        detected_at: at,
    }
}

/// Criterion 1: incremental size inference equals a from-scratch
/// re-execution of the inference rule, over >= 10,000 random read
/// sequences. Exact equality, under 10 s.
#[test]
fn criterion_1_size_inference_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x11CE);
    let profile = profile_by_name("stm32f103").unwrap();
    for case in 0..10_000u32 {
        let base = 0x2000_0000 + 4 * rng.gen_range(0..0x1000u32);
        let mut tracker = ChannelTracker::new(profile.clone());
        tracker.on_stream_config(&pair_config(0x4002_0008, 0x4001_3804, base, 1));
        let mut provider = ZeroProvider;
        let mut reads: Vec<(u32, u8)> = Vec::new();
        let n = rng.gen_range(1..30);
        for i in 0..n {
            let width = *[1u8, 2, 4].choose(&mut rng).unwrap();
            // Mix of in-span, in-buffer and past-span reads.
            let addr = base + rng.gen_range(0..40u32);
            reads.push((addr, width));
            tracker
                .on_ram_access(
                    MemoryAccessEvent::read(2 + i as u64, addr, width),
                    &mut provider,
                )
                .unwrap();
            let incremental = tracker
                .snapshot()
                .pop()
                .unwrap()
                .dest_ptrs
                .first()
                .map_or(0, |t| t.perceived_size);
            let expected = size_inference_oracle(base, &reads);
            assert_eq!(
                incremental, expected,
                "case {case}: base {base:#x}, reads {reads:x?}"
            );
        }
    }
    assert!(
        started.elapsed() < Duration::from_secs(10),
        "took {:?}",
        started.elapsed()
    );
    println!("criterion 1 (size-inference oracle equivalence, 10000 sequences): PASS");
}

/// Criterion 2: isolated, unaligned, narrow-width and non-adjacent
/// pointer-like MMIO writes never produce a configuration, over >= 10,000
/// events, cross-checked with the brute-force shadow scanner.
#[test]
fn criterion_2_detector_filter_soundness_zero_fp() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0FF);
    let profile = profile_by_name("stm32f103").unwrap();
    let mut engine = zero_engine("stm32f103");
    let mut eligible: BTreeSet<u32> = BTreeSet::new();
    let mut events = Vec::new();

    let pointer_value = |rng: &mut ChaCha8Rng| -> u32 {
        match rng.gen_range(0..3) {
            0 => 0x2000_0000 + rng.gen_range(0..0x5000),
            1 => 0x0800_0000 + rng.gen_range(0..0x20000),
            _ => 0x4000_0000 + rng.gen_range(0..0x100_0000),
        }
    };

    for i in 0..10_000u64 {
        let seq = i + 1;
        let ev = match rng.gen_range(0..4) {
            // Isolated / non-adjacent pointer-like word write.
            0 | 1 => {
                let word = loop {
                    let w = 0x4000_0000 + 4 * rng.gen_range(0..1_000_000u32);
                    if !eligible.contains(&w)
                        && !eligible.contains(&(w - 4))
                        && !eligible.contains(&(w + 4))
                    {
                        break w;
                    }
                };
                eligible.insert(word);
                MemoryAccessEvent::write(seq, word, 4, pointer_value(&mut rng))
            }
            // Unaligned pointer-like write.
            2 => {
                let word = 0x4000_0000 + 4 * rng.gen_range(0..1_000_000u32);
                eligible.remove(&word);
                let addr = word + rng.gen_range(1..4u32);
                MemoryAccessEvent::write(seq, addr, 4, pointer_value(&mut rng))
            }
            // Narrow-width write.
            _ => {
                let word = 0x4000_0000 + 4 * rng.gen_range(0..1_000_000u32);
                eligible.remove(&word);
                let width = *[1u8, 2].choose(&mut rng).unwrap();
                let value = rng.gen_range(0..1u32 << (8 * u32::from(width)));
                MemoryAccessEvent::write(seq, word, width, value)
            }
        };
        events.push(ev);
        let outcome = engine.process_event(ev).unwrap();
        assert!(
            outcome.config.is_none(),
            "seq {seq}: unexpected configuration {:?}",
            outcome.config
        );
    }
    assert_eq!(engine.configs_detected(), 0);
    assert!(brute_force_scan(&profile, &events).is_empty());
    println!("criterion 2 (detector filter soundness, 0 FP over 10000 events): PASS");
}

/// Criterion 3: every randomly placed valid pair/triple is detected, the
/// full group exactly once, cross-checked with the brute-force scanner.
#[test]
fn criterion_3_detector_completeness_on_valid_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x90D);
    let profile = profile_by_name("stm32f103").unwrap();

    // Non-adjacent group bases, 32 bytes apart.
    let mut groups: Vec<Vec<(u32, u32)>> = Vec::new();
    for g in 0..4_000u32 {
        let base = 0x4000_0000 + g * 32;
        let len = if rng.gen_bool(0.3) { 3 } else { 2 };
        let ram_slot = rng.gen_range(0..len);
        let members: Vec<(u32, u32)> = (0..len)
            .map(|i| {
                let value = if i == ram_slot {
                    0x2000_0000 + rng.gen_range(0..0x5000)
                } else {
                    match rng.gen_range(0..3) {
                        0 => 0x2000_0000 + rng.gen_range(0..0x5000),
                        1 => 0x0800_0000 + rng.gen_range(0..0x20000),
                        _ => 0x4001_0000 + rng.gen_range(0..0x1000),
                    }
                };
                (base + 4 * i, value)
            })
            .collect();
        groups.push(members);
    }

    // Random write order within each group, groups interleaved at random.
    let mut writes: Vec<(usize, u32, u32)> = Vec::new();
    for (gi, members) in groups.iter().enumerate() {
        let mut order: Vec<(u32, u32)> = members.clone();
        order.shuffle(&mut rng);
        writes.extend(order.into_iter().map(|(a, v)| (gi, a, v)));
    }
    writes.shuffle(&mut rng);

    let mut engine = zero_engine("stm32f103");
    let mut events = Vec::new();
    let mut emissions: Vec<StreamConfiguration> = Vec::new();
    for (seq, &(_, addr, value)) in writes.iter().enumerate() {
        let ev = MemoryAccessEvent::write(seq as u64 + 1, addr, 4, value);
        events.push(ev);
        if let Some(cfg) = engine.process_event(ev).unwrap().config {
            emissions.push(cfg);
        }
    }

    // Every emission is a contiguous sub-run of exactly one placed group.
    let by_base: BTreeMap<u32, &Vec<(u32, u32)>> =
        groups.iter().map(|g| (g[0].0 & !31, g)).collect();
    for cfg in &emissions {
        let group = by_base
            .get(&(cfg.stream_key & !31))
            .unwrap_or_else(|| panic!("emission at {:#x} matches no group", cfg.stream_key));
        for p in &cfg.pointers {
            assert!(
                group.contains(&(p.register, p.value)),
                "emission member {:#x} not in placed group",
                p.register
            );
        }
    }

    // The complete group is emitted exactly once per group.
    for members in &groups {
        let full: Vec<(u32, u32)> = members.clone();
        let count = emissions
            .iter()
            .filter(|cfg| {
                cfg.pointers
                    .iter()
                    .map(|p| (p.register, p.value))
                    .collect::<Vec<_>>()
                    == full
            })
            .count();
        assert_eq!(count, 1, "group at {:#x}", members[0].0);
    }

    // Scanner agreement on the final state.
    let scanned = brute_force_scan(&profile, &events);
    assert_eq!(scanned.len(), groups.len());
    for members in &groups {
        assert_eq!(scanned.get(&members[0].0), Some(members));
    }
    println!("criterion 3 (detector completeness, 4000 random groups): PASS");
}

/// Criterion 4: every builtin scenario passes its expectations, both
/// in-process and through the CLI (`simulate` exits 0), in under 5 s.
#[test]
fn criterion_4_builtin_scenario_suite() {
    let started = Instant::now();
    for s in builtin_scenarios() {
        let mut engine = zero_engine(&s.profile);
        let report = run_scenario(&s, &mut engine).unwrap();
        assert!(report.passed, "{}: {:#?}", s.name, report.expectations);
    }
    assert!(started.elapsed() < Duration::from_secs(5));

    let dir = tempfile::tempdir().unwrap();
    for s in builtin_scenarios() {
        let report = dir.path().join(format!("{}.json", s.name));
        let status = Command::new(env!("CARGO_BIN_EXE_dmascope"))
            .args(["simulate", &s.name, "--report"])
            .arg(&report)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "simulate {}", s.name);
    }
    println!(
        "criterion 4 (builtin scenario suite, {} scenarios): PASS",
        builtin_scenarios().len()
    );
}

/// Criterion 5: lifecycle invariants over randomized event interleavings:
/// at most one live channel per stream, no injection after termination,
/// injected data persists after a firmware-write termination.
#[test]
fn criterion_5_lifecycle_invariants() {
    let keys = [0x4002_0008u32, 0x4002_0018, 0x4002_0070];
    let bases = [0x2000_0100u32, 0x2000_0200, 0x2000_0300];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);

    for _case in 0..2_000 {
        let mut engine = zero_engine("stm32f103");
        // (stream_key, created_at) -> shadow at firmware-write termination
        let mut frozen: BTreeMap<(u32, u64), ShadowRam> = BTreeMap::new();
        let n = rng.gen_range(1..40);
        for seq in 1..=n {
            let ev = match rng.gen_range(0..5) {
                0 => {
                    // Configure a pair; detector state makes this either a
                    // fresh emission or nothing, both fine.
                    let key = *keys.choose(&mut rng).unwrap();
                    let dest = *bases.choose(&mut rng).unwrap();
                    let half = rng.gen_bool(0.5);
                    MemoryAccessEvent::write(seq, if half { key } else { key + 4 }, 4, if half {
                        0x4001_3804
                    } else {
                        dest
                    })
                }
                1..=3 => {
                    let base = *bases.choose(&mut rng).unwrap();
                    let width = *[1u8, 2, 4].choose(&mut rng).unwrap();
                    MemoryAccessEvent::read(seq, base + rng.gen_range(0..16u32), width)
                }
                _ => {
                    let base = *bases.choose(&mut rng).unwrap();
                    MemoryAccessEvent::write(seq, base + rng.gen_range(0..16u32), 4, rng.gen())
                }
            };
            let outcome = engine.process_event(ev).unwrap();
            let snapshot = engine.snapshot();

            // One live channel per stream key, at every point.
            let mut live_keys = BTreeSet::new();
            for ch in snapshot.iter().filter(|c| !matches!(c.state, LifecycleState::Terminated(_))) {
                assert!(
                    live_keys.insert(ch.stream_key),
                    "two live channels on {:#x}",
                    ch.stream_key
                );
            }

            // An injection must come from a currently live channel.
            if let Some(inj) = &outcome.injection {
                assert!(live_keys.contains(&inj.channel));
            }

            // Freeze shadows at firmware-write termination.
            for ch in &snapshot {
                if ch.state == LifecycleState::Terminated(TerminationReason::FirmwareWrite) {
                    frozen
                        .entry((ch.stream_key, ch.created_at))
                        .or_insert_with(|| ch.shadow.clone());
                }
            }
        }
        engine.finish();

        // Frozen shadows are untouched by anything that happened later.
        for ch in engine.snapshot() {
            if let Some(saved) = frozen.get(&(ch.stream_key, ch.created_at)) {
                assert_eq!(&ch.shadow, saved, "shadow changed after termination");
            }
        }
    }
    println!("criterion 5 (lifecycle invariants, 2000 random interleavings): PASS");
}

/// Criterion 6: endianness byte-swap case: first read at base+1 width 1,
/// perceived size 2 after two reads, both bytes injected.
#[test]
fn criterion_6_endianness_case() {
    let s = builtin_scenario("endianness_byte_swap").unwrap();
    let mut engine = zero_engine(&s.profile);
    let report = run_scenario(&s, &mut engine).unwrap();
    assert!(report.passed, "{:#?}", report.expectations);
    let ch = &report.channel_report.channels[0];
    assert_eq!(ch.perceived_size, 2);
    assert_eq!(ch.injections, 2);
    assert_eq!(ch.bytes_injected, 2);
    println!("criterion 6 (endianness byte-swap case): PASS");
}

/// Criterion 7: export -> replay produces a channel report byte-identical
/// to simulate, for every builtin scenario.
#[test]
fn criterion_7_round_trip_determinism() {
    for s in builtin_scenarios() {
        let mut sim_engine = zero_engine(&s.profile);
        let sim = run_scenario(&s, &mut sim_engine).unwrap();

        // Export and replay through the trace format.
        let text = write_trace(&s.events());
        let events = parse_trace(&text).unwrap();
        assert_eq!(events.len(), s.events().len());
        let mut replay_engine = zero_engine(&s.profile);
        for ev in events {
            replay_engine.process_event(ev).unwrap();
        }
        replay_engine.finish();

        assert_eq!(
            replay_engine.report().to_json(),
            sim.channel_report.to_json(),
            "round-trip mismatch for {}",
            s.name
        );
    }
    println!("criterion 7 (export/replay round-trip, all builtins): PASS");
}

/// Criterion 8: replaying a 1,000,000-event synthetic trace (parse plus
/// engine) finishes in under 5 seconds.
#[test]
fn criterion_8_throughput_one_million_events() {
    let mut events = Vec::with_capacity(1_000_000);
    let mut seq = 0u64;
    for block in 0..1_000u32 {
        let dest = 0x2100_0000 + block * 0x1000;
        seq += 1;
        events.push(MemoryAccessEvent::write(seq, 0x4002_0008, 4, 0x4001_3804));
        seq += 1;
        events.push(MemoryAccessEvent::write(seq, 0x4002_000C, 4, dest));
        for i in 0..998u32 {
            seq += 1;
            events.push(MemoryAccessEvent::read(seq, dest + 4 * i, 4));
        }
    }
    assert_eq!(events.len(), 1_000_000);
    let text = write_trace(&events);

    let started = Instant::now();
    let parsed = parse_trace(&text).unwrap();
    let mut engine = zero_engine("generic-armv7m-512mb");
    for ev in parsed {
        engine.process_event(ev).unwrap();
    }
    engine.finish();
    let report = engine.report();
    let elapsed = started.elapsed();

    assert_eq!(report.session.events, 1_000_000);
    assert_eq!(report.session.configs_detected, 1_000);
    assert_eq!(report.session.injections, 998_000);
    assert!(
        elapsed < Duration::from_secs(5),
        "1M-event replay took {elapsed:?}"
    );
    println!("criterion 8 (1M-event replay in {elapsed:?} < 5s): PASS");
}

/// Classification totality spot-check used by the oracle suites: random
/// 32-bit values always land in exactly one class.
#[test]
fn classification_totality_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for p in dmascope::memory_map::builtin_profiles() {
        for _ in 0..100_000 {
            let v: u32 = rng.gen();
            let class = p.classify(v);
            assert_eq!(p.is_pointer_like(v), class != AddressClass::Other);
        }
    }
}
