//! Binary mask container.
//!
//! All fields are little-endian.
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `STBN` |
//! | 4 | 1 | version, currently 1 |
//! | 5 | 1 | payload kind: 0 `f32`, 1 `u8`, 2 `u16`, 3 `u32` ranks |
//! | 6 | 1 | bit depth of `u8`/`u16` payloads, 0 otherwise |
//! | 7 | 1 | flags: bit 0 strict `rank / N` values, bit 1 untruncated energy |
//! | 8 | 8 | seed `u64` |
//! | 16 | 8 | initial density `f64` |
//! | 24 | 1 | dimension count `D` |
//! | 25 | 1 | axis group count `G` |
//! | 26 | 4·D | extents `u32` |
//!
//! Then `G` group records: axis count `k: u8`, `k` pairs of (axis `u8`,
//! toroidal `u8`), sigma `f64`. Then the payload byte length `u64` and
//! the payload, one element per pixel in linear order (axis 0 fastest).

use std::fs;
use std::path::Path;

use stbn::{AxisGroup, Mask, MaskPayload, MaskSpec, RankMask};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"STBN";
pub const VERSION: u8 = 1;

const FLAG_STRICT: u8 = 1;
const FLAG_EXACT_ENERGY: u8 = 2;
const MAX_DIMS: usize = 8;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported container version {0}, expected {VERSION}")]
    VersionMismatch(u8),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: {expected} bytes declared, {found} present")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("invalid payload: {0}")]
    InvalidPayload(#[from] stbn::Error),
}

impl ContainerError {
    /// Stable identifier for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            ContainerError::Io(_) => "io",
            ContainerError::BadMagic => "bad_magic",
            ContainerError::VersionMismatch(_) => "version_mismatch",
            ContainerError::MalformedHeader(_) => "malformed_header",
            ContainerError::TruncatedPayload { .. } => "truncated_payload",
            ContainerError::InvalidPayload(_) => "invalid_payload",
        }
    }
}

type Result<T> = std::result::Result<T, ContainerError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    /// Values were finalized as `rank / N`.
    pub strict: bool,
    /// Generated without stencil truncation.
    pub exact_energy: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Contents {
    Mask(Mask),
    Ranks(RankMask),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub contents: Contents,
    pub flags: Flags,
}

impl Container {
    pub fn mask(mask: Mask, flags: Flags) -> Self {
        Self {
            contents: Contents::Mask(mask),
            flags,
        }
    }

    pub fn ranks(ranks: RankMask, flags: Flags) -> Self {
        Self {
            contents: Contents::Ranks(ranks),
            flags,
        }
    }

    pub fn spec(&self) -> &MaskSpec {
        match &self.contents {
            Contents::Mask(m) => m.spec(),
            Contents::Ranks(r) => r.spec(),
        }
    }
}

/// Bytes before the payload for `spec`.
pub fn header_len(spec: &MaskSpec) -> usize {
    26 + 4 * spec.dims()
        + spec
            .groups()
            .iter()
            .map(|g| 1 + 2 * g.axes().len() + 8)
            .sum::<usize>()
        + 8
}

pub fn encode(container: &Container) -> Vec<u8> {
    let spec = container.spec();
    let (kind, depth, payload): (u8, u8, Vec<u8>) = match &container.contents {
        Contents::Mask(m) => match m.payload() {
            MaskPayload::Float(v) => (0, 0, v.iter().flat_map(|x| x.to_le_bytes()).collect()),
            MaskPayload::Bits { depth, values } if *depth <= 8 => {
                (1, *depth as u8, values.iter().map(|&x| x as u8).collect())
            }
            MaskPayload::Bits { depth, values } => {
                (2, *depth as u8, values.iter().flat_map(|x| x.to_le_bytes()).collect())
            }
        },
        Contents::Ranks(r) => (3, 0, r.ranks().iter().flat_map(|x| x.to_le_bytes()).collect()),
    };
    let flags = (container.flags.strict as u8 * FLAG_STRICT)
        | (container.flags.exact_energy as u8 * FLAG_EXACT_ENERGY);
    let mut out = Vec::with_capacity(header_len(spec) + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[VERSION, kind, depth, flags]);
    out.extend_from_slice(&spec.seed().to_le_bytes());
    out.extend_from_slice(&spec.initial_density().to_le_bytes());
    out.push(spec.dims() as u8);
    out.push(spec.groups().len() as u8);
    for &s in spec.sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for g in spec.groups() {
        out.push(g.axes().len() as u8);
        for (&a, &t) in g.axes().iter().zip(g.toroidal()) {
            out.extend_from_slice(&[a as u8, t as u8]);
        }
        out.extend_from_slice(&g.sigma().to_le_bytes());
    }
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                ContainerError::MalformedHeader(format!("header ends before {what} at byte {}", self.pos))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

fn malformed(msg: impl Into<String>) -> ContainerError {
    ContainerError::MalformedHeader(msg.into())
}

/// Validates magic, version and every length before reading the payload.
pub fn decode(bytes: &[u8]) -> Result<Container> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(ContainerError::VersionMismatch(version));
    }
    let kind = r.u8("payload kind")?;
    let depth = r.u8("bit depth")?;
    let flag_bits = r.u8("flags")?;
    if flag_bits & !(FLAG_STRICT | FLAG_EXACT_ENERGY) != 0 {
        return Err(malformed(format!("unknown flag bits {flag_bits:#04x}")));
    }
    let element = match (kind, depth) {
        (0, 0) | (3, 0) => 4,
        (1, 1..=8) => 1,
        (2, 1..=16) => 2,
        (0..=3, d) => return Err(malformed(format!("bit depth {d} invalid for payload kind {kind}"))),
        (k, _) => return Err(malformed(format!("unknown payload kind {k}"))),
    };
    let seed = u64::from_le_bytes(r.array("seed")?);
    let density = f64::from_le_bytes(r.array("density")?);
    let dims = r.u8("dimension count")? as usize;
    let group_count = r.u8("group count")? as usize;
    if dims == 0 || dims > MAX_DIMS {
        return Err(malformed(format!("{dims} dimensions, expected 1..={MAX_DIMS}")));
    }
    if group_count == 0 || group_count > dims {
        return Err(malformed(format!("{group_count} groups for {dims} dimensions")));
    }
    let mut sizes = Vec::with_capacity(dims);
    for _ in 0..dims {
        sizes.push(u32::from_le_bytes(r.array("extent")?) as usize);
    }
    let mut groups = Vec::with_capacity(group_count);
    for _ in 0..group_count {
        let k = r.u8("group axis count")? as usize;
        if k == 0 || k > dims {
            return Err(malformed(format!("group with {k} axes")));
        }
        let mut axes = Vec::with_capacity(k);
        let mut wrap = Vec::with_capacity(k);
        for _ in 0..k {
            let [a, t] = r.array::<2>("group axis")?;
            if t > 1 {
                return Err(malformed(format!("toroidal flag {t}")));
            }
            axes.push(a as usize);
            wrap.push(t == 1);
        }
        let sigma = f64::from_le_bytes(r.array("sigma")?);
        groups.push(AxisGroup::with_toroidal(axes, sigma, wrap));
    }
    let declared = u64::from_le_bytes(r.array("payload length")?);
    let pixels = sizes
        .iter()
        .try_fold(1u64, |acc, &s| acc.checked_mul(s as u64))
        .ok_or_else(|| malformed("extent product overflows"))?;
    let expected = pixels
        .checked_mul(element as u64)
        .ok_or_else(|| malformed("payload size overflows"))?;
    if declared != expected {
        return Err(malformed(format!(
            "payload length {declared}, extents imply {expected}"
        )));
    }
    let present = (bytes.len() - r.pos) as u64;
    if present < declared {
        return Err(ContainerError::TruncatedPayload {
            expected: declared,
            found: present,
        });
    }
    if present > declared {
        return Err(malformed(format!("{} trailing bytes", present - declared)));
    }
    let spec = MaskSpec::new(sizes, groups)
        .map_err(|e| malformed(e.to_string()))?
        .with_seed(seed)
        .with_initial_density(density)
        .map_err(|e| malformed(e.to_string()))?;
    let body = &bytes[r.pos..];
    let flags = Flags {
        strict: flag_bits & FLAG_STRICT != 0,
        exact_energy: flag_bits & FLAG_EXACT_ENERGY != 0,
    };
    let contents = match kind {
        0 => {
            let v = body
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
                .collect();
            Contents::Mask(Mask::new(spec, MaskPayload::Float(v))?)
        }
        1 => Contents::Mask(Mask::new(
            spec,
            MaskPayload::Bits {
                depth: depth as u32,
                values: body.iter().map(|&b| b as u16).collect(),
            },
        )?),
        2 => Contents::Mask(Mask::new(
            spec,
            MaskPayload::Bits {
                depth: depth as u32,
                values: body
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]))
                    .collect(),
            },
        )?),
        _ => Contents::Ranks(RankMask::new(
            spec,
            body.chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().expect("chunk of 4")))
                .collect(),
        )?),
    };
    Ok(Container { contents, flags })
}

pub fn write_file(path: &Path, container: &Container) -> Result<()> {
    fs::write(path, encode(container))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Container> {
    decode(&fs::read(path)?)
}
