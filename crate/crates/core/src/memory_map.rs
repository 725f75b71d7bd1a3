//! MCU memory-map profiles and address classification.
//!
//! A profile names the MMIO, RAM and Flash ranges of one MCU family.
//! Classification is total: every 32-bit value maps to exactly one
//! [`AddressClass`]. Profiles are immutable after construction and freely
//! shareable across threads.

use std::fmt;

use serde::Deserialize;
use thiserror::Error;

use crate::serde_hex;

/// Inclusive address range, data-sheet style.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddressRange {
    pub start: u32,
    pub end: u32,
}

impl AddressRange {
    pub fn new(start: u32, end: u32) -> Result<Self, ProfileError> {
        if start > end {
            return Err(ProfileError::InvalidRange { start, end });
        }
        Ok(AddressRange { start, end })
    }

    pub fn contains(&self, value: u32) -> bool {
        self.start <= value && value <= self.end
    }

    pub fn overlaps(&self, other: &AddressRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn len_bytes(&self) -> u64 {
        u64::from(self.end) - u64::from(self.start) + 1
    }
}

impl fmt::Display for AddressRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}-{:#x}", self.start, self.end)
    }
}

/// Where a 32-bit value lands in the profile's address space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AddressClass {
    Mmio,
    Ram,
    Flash,
    Other,
}

impl fmt::Display for AddressClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AddressClass::Mmio => "mmio",
            AddressClass::Ram => "ram",
            AddressClass::Flash => "flash",
            AddressClass::Other => "other",
        };
        f.write_str(s)
    }
}

/// Named memory-map layout for an MCU family.
///
/// MMIO is a single range; RAM and Flash may have several (MIPS-based parts
/// alias the same physical RAM at multiple segments). All ranges within one
/// profile are pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryMapProfile {
    pub name: String,
    pub mmio: AddressRange,
    pub ram: Vec<AddressRange>,
    pub flash: Vec<AddressRange>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("invalid range: start {start:#x} is above end {end:#x}")]
    InvalidRange { start: u32, end: u32 },
    #[error("profile parse error: {0}")]
    Parse(String),
    #[error("field {field}: {message}")]
    Field { field: &'static str, message: String },
    #[error("{a_kind} range {a} overlaps {b_kind} range {b}")]
    Overlap {
        a_kind: &'static str,
        a: AddressRange,
        b_kind: &'static str,
        b: AddressRange,
    },
    #[error("unknown profile {0:?}")]
    Unknown(String),
}

impl MemoryMapProfile {
    pub fn new(
        name: impl Into<String>,
        mmio: AddressRange,
        ram: Vec<AddressRange>,
        flash: Vec<AddressRange>,
    ) -> Result<Self, ProfileError> {
        let profile = MemoryMapProfile {
            name: name.into(),
            mmio,
            ram,
            flash,
        };
        profile.check_disjoint()?;
        Ok(profile)
    }

    fn check_disjoint(&self) -> Result<(), ProfileError> {
        let mut labelled: Vec<(&'static str, AddressRange)> = vec![("mmio", self.mmio)];
        labelled.extend(self.ram.iter().map(|r| ("ram", *r)));
        labelled.extend(self.flash.iter().map(|r| ("flash", *r)));
        for (i, (a_kind, a)) in labelled.iter().enumerate() {
            for (b_kind, b) in &labelled[i + 1..] {
                if a.overlaps(b) {
                    return Err(ProfileError::Overlap {
                        a_kind,
                        a: *a,
                        b_kind,
                        b: *b,
                    });
                }
            }
        }
        Ok(())
    }

    /// Total classification of any 32-bit value under this profile.
    pub fn classify(&self, value: u32) -> AddressClass {
        if self.mmio.contains(value) {
            AddressClass::Mmio
        } else if self.ram.iter().any(|r| r.contains(value)) {
            AddressClass::Ram
        } else if self.flash.iter().any(|r| r.contains(value)) {
            AddressClass::Flash
        } else {
            AddressClass::Other
        }
    }

    /// True iff the value lands in any mapped region (MMIO, RAM or Flash).
    pub fn is_pointer_like(&self, value: u32) -> bool {
        self.classify(value) != AddressClass::Other
    }

    /// Parses the profile file format:
    ///
    /// ```text
    /// name = "stm32f103"
    /// mmio = "0x40000000-0x5fffffff"
    /// ram = ["0x20000000-0x20004fff"]
    /// flash = ["0x08000000-0x0801ffff"]
    /// ```
    pub fn load(source: &str) -> Result<Self, ProfileError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            name: String,
            mmio: String,
            ram: Vec<String>,
            flash: Vec<String>,
        }
        let raw: Raw = toml::from_str(source).map_err(|e| ProfileError::Parse(e.to_string()))?;
        let mmio = parse_range("mmio", &raw.mmio)?;
        let ram = raw
            .ram
            .iter()
            .map(|s| parse_range("ram", s))
            .collect::<Result<Vec<_>, _>>()?;
        let flash = raw
            .flash
            .iter()
            .map(|s| parse_range("flash", s))
            .collect::<Result<Vec<_>, _>>()?;
        MemoryMapProfile::new(raw.name, mmio, ram, flash)
    }
}

fn parse_range(field: &'static str, s: &str) -> Result<AddressRange, ProfileError> {
    let (start, end) = s.split_once('-').ok_or_else(|| ProfileError::Field {
        field,
        message: format!("expected \"0xSTART-0xEND\", got {s:?}"),
    })?;
    // 64-bit addresses are rejected here: parse_u32 fails on anything wider.
    let start = serde_hex::parse_u32(start.trim())
        .map_err(|message| ProfileError::Field { field, message })?;
    let end =
        serde_hex::parse_u32(end.trim()).map_err(|message| ProfileError::Field { field, message })?;
    AddressRange::new(start, end)
}

fn range(start: u32, end: u32) -> AddressRange {
    AddressRange { start, end }
}

/// Built-in profiles, resolvable by name.
pub fn builtin_profiles() -> Vec<MemoryMapProfile> {
    vec![
        // STM32F103: the data-sheet ranges for a small Cortex-M3 part.
        MemoryMapProfile::new(
            "stm32f103",
            range(0x4000_0000, 0x5FFF_FFFF),
            vec![range(0x2000_0000, 0x2000_4FFF)],
            vec![range(0x0800_0000, 0x0801_FFFF)],
        )
        .expect("builtin stm32f103"),
        // PIC32MZ-style MIPS part. DMA pointers use physical addresses, so
        // physical RAM starts at 0x0 and small integers are valid RAM
        // pointers. kseg0/kseg1 aliases of RAM and Flash are listed too;
        // peripherals are accessed through kseg1.
        MemoryMapProfile::new(
            "pic32",
            range(0xBF80_0000, 0xBF8F_FFFF),
            vec![
                range(0x0000_0000, 0x0007_FFFF),
                range(0x8000_0000, 0x8007_FFFF),
                range(0xA000_0000, 0xA007_FFFF),
            ],
            vec![
                range(0x1D00_0000, 0x1D1F_FFFF),
                range(0x9D00_0000, 0x9D1F_FFFF),
            ],
        )
        .expect("builtin pic32"),
        // Fallback when no data-sheet is available: the full 512MB
        // architectural Code and SRAM regions of ARMv7-M.
        MemoryMapProfile::new(
            "generic-armv7m-512mb",
            range(0x4000_0000, 0x5FFF_FFFF),
            vec![range(0x2000_0000, 0x3FFF_FFFF)],
            vec![range(0x0000_0000, 0x1FFF_FFFF)],
        )
        .expect("builtin generic-armv7m-512mb"),
        // GD32VF103: RISC-V part with the same bus layout idea.
        MemoryMapProfile::new(
            "gd32vf103-riscv",
            range(0x4000_0000, 0x5003_FFFF),
            vec![range(0x2000_0000, 0x2001_7FFF)],
            vec![range(0x0800_0000, 0x0801_FFFF)],
        )
        .expect("builtin gd32vf103-riscv"),
    ]
}

pub fn profile_by_name(name: &str) -> Result<MemoryMapProfile, ProfileError> {
    builtin_profiles()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| ProfileError::Unknown(name.to_string()))
}
