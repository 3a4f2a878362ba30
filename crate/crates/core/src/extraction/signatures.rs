//! Magic-signature scanning over raw images.

use serde::{Deserialize, Serialize};

/// Container or object format recognized by the carver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Gzip,
    Xz,
    Lzma,
    Squashfs,
    Cramfs,
    Jffs2,
    Cpio,
    Tar,
    Elf,
    Uimage,
    Unknown,
}

impl RegionKind {
    /// Filesystem formats whose presence classifies an image as
    /// Linux-based.
    pub fn is_filesystem(&self) -> bool {
        matches!(
            self,
            RegionKind::Squashfs
                | RegionKind::Cramfs
                | RegionKind::Jffs2
                | RegionKind::Cpio
                | RegionKind::Tar
        )
    }
}

/// A carved byte range inside an image. `offset + length` never exceeds
/// the image size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarvedRegion {
    pub offset: usize,
    pub length: usize,
    pub kind: RegionKind,
}

fn le32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

fn le64(bytes: &[u8], at: usize) -> Option<u64> {
    bytes
        .get(at..at + 8)
        .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
}

/// Exact byte length of a gzip stream, measured by a dry-run decode.
/// The deflate payload self-terminates, so "extend to the next magic"
/// would truncate streams whose stored blocks contain magic-like bytes.
fn gzip_stream_len(rest: &[u8]) -> Option<usize> {
    use std::io::Read;
    let mut decoder = flate2::bufread::GzDecoder::new(std::io::Cursor::new(rest));
    let mut sink = [0u8; 8192];
    loop {
        match decoder.read(&mut sink) {
            Ok(0) => break,
            Ok(_) => {}
            Err(_) => return None,
        }
    }
    let consumed = decoder.into_inner().position() as usize;
    (consumed > 10).then_some(consumed)
}

/// A match candidate: kind plus parsed length when the header
/// self-describes it.
fn probe(bytes: &[u8], at: usize) -> Option<(RegionKind, Option<usize>)> {
    let rest = &bytes[at..];
    match rest {
        [0x1f, 0x8b, 0x08, ..] => Some((RegionKind::Gzip, gzip_stream_len(rest))),
        [0xfd, b'7', b'z', b'X', b'Z', 0x00, ..] => Some((RegionKind::Xz, None)),
        [0x5d, 0x00, 0x00, ..] if rest.len() >= 13 => {
            // Raw LZMA has a weak magic; sanity-check the uncompressed
            // size field (all-ones means "unknown").
            let size = le64(bytes, at + 5)?;
            (size == u64::MAX || size < 1 << 30).then_some((RegionKind::Lzma, None))
        }
        [b'h', b's', b'q', b's', ..] => {
            let len = le64(bytes, at + 40)
                .filter(|&used| used > 0)
                .map(|used| used as usize);
            Some((RegionKind::Squashfs, len))
        }
        [0x45, 0x3d, 0xcd, 0x28, ..] => {
            let ok = rest.len() >= 32 && &rest[16..32] == b"Compressed ROMFS";
            let len = le32(bytes, at + 4).map(|s| s as usize);
            ok.then_some((RegionKind::Cramfs, len))
        }
        [0x85, 0x19, t0, t1, ..] => {
            // JFFS2 node: magic 0x1985 plus a known node type.
            let node_type = u16::from_le_bytes([*t0, *t1]);
            matches!(node_type, 0xe001 | 0xe002 | 0x2003 | 0x2004 | 0x2006)
                .then_some((RegionKind::Jffs2, None))
        }
        [b'0', b'7', b'0', b'7', b'0', b'1' | b'2' | b'7', ..] => {
            Some((RegionKind::Cpio, cpio_scan_length(rest)))
        }
        [0x7f, b'E', b'L', b'F', ..] => Some((RegionKind::Elf, elf_length(rest))),
        [0x27, 0x05, 0x19, 0x56, ..] if rest.len() >= 64 => {
            // uImage: 64-byte header, big-endian data size at offset 12.
            let size = u32::from_be_bytes(rest[12..16].try_into().unwrap()) as usize;
            Some((RegionKind::Uimage, Some(64 + size)))
        }
        _ => None, // tar is matched from the header start separately
    }
}

/// Valid tar header at `at`: "ustar" magic at +257 plus a checksum match.
fn tar_header_at(bytes: &[u8], at: usize) -> bool {
    let Some(header) = bytes.get(at..at + 512) else {
        return false;
    };
    if &header[257..262] != b"ustar" {
        return false;
    }
    let stored = parse_octal(&header[148..156]);
    let mut sum: u64 = 0;
    for (i, &b) in header.iter().enumerate() {
        sum += if (148..156).contains(&i) { 0x20 } else { b as u64 };
    }
    stored == Some(sum)
}

fn parse_octal(field: &[u8]) -> Option<u64> {
    let mut value = 0u64;
    let mut seen = false;
    for &b in field {
        match b {
            b'0'..=b'7' => {
                value = value.checked_mul(8)?.checked_add((b - b'0') as u64)?;
                seen = true;
            }
            b' ' | 0 => {
                if seen {
                    break;
                }
            }
            _ => return None,
        }
    }
    seen.then_some(value)
}

/// Walk tar headers from `at` to the end-of-archive marker; returns the
/// total archive length.
fn tar_scan_length(bytes: &[u8], at: usize) -> Option<usize> {
    let mut pos = at;
    loop {
        let header = bytes.get(pos..pos + 512)?;
        if header.iter().all(|&b| b == 0) {
            // First zero block; archive ends after the second.
            let end = (pos + 1024).min(bytes.len());
            return Some(end - at);
        }
        if !tar_header_at(bytes, pos) {
            return Some(pos - at);
        }
        let size = parse_octal(&header[124..136])? as usize;
        pos += 512 + size.div_ceil(512) * 512;
        if pos > bytes.len() {
            return None; // truncated; let the extractor report it
        }
    }
}

/// Walk newc cpio members to the trailer; returns total length.
fn cpio_scan_length(region: &[u8]) -> Option<usize> {
    let mut pos = 0usize;
    loop {
        let header = region.get(pos..pos + 110)?;
        if &header[..6] != b"070701" && &header[..6] != b"070702" {
            return None;
        }
        let field = |i: usize| -> Option<usize> {
            let s = std::str::from_utf8(&header[6 + i * 8..6 + (i + 1) * 8]).ok()?;
            usize::from_str_radix(s, 16).ok()
        };
        let filesize = field(6)?;
        let namesize = field(11)?;
        let name_start = pos + 110;
        let name = region.get(name_start..name_start + namesize)?;
        let data_start = (name_start + namesize).div_ceil(4) * 4;
        let end = (data_start + filesize).div_ceil(4) * 4;
        if name.starts_with(b"TRAILER!!!") {
            return Some(data_start.min(region.len()));
        }
        if end > region.len() {
            return None;
        }
        pos = end;
    }
}

/// Length of an ELF object from its section-header table, when sane.
fn elf_length(rest: &[u8]) -> Option<usize> {
    let is_64 = *rest.get(4)? == 2;
    let le = *rest.get(5)? == 1;
    let read32 = |at: usize| -> Option<u64> {
        let b: [u8; 4] = rest.get(at..at + 4)?.try_into().ok()?;
        Some(if le { u32::from_le_bytes(b) } else { u32::from_be_bytes(b) } as u64)
    };
    let read64 = |at: usize| -> Option<u64> {
        let b: [u8; 8] = rest.get(at..at + 8)?.try_into().ok()?;
        Some(if le { u64::from_le_bytes(b) } else { u64::from_be_bytes(b) })
    };
    let read16 = |at: usize| -> Option<u64> {
        let b: [u8; 2] = rest.get(at..at + 2)?.try_into().ok()?;
        Some(if le { u16::from_le_bytes(b) } else { u16::from_be_bytes(b) } as u64)
    };
    let (shoff, shentsize, shnum) = if is_64 {
        (read64(40)?, read16(58)?, read16(60)?)
    } else {
        (read32(32)?, read16(46)?, read16(48)?)
    };
    if shoff == 0 || shnum == 0 {
        return None;
    }
    let end = shoff.checked_add(shentsize.checked_mul(shnum)?)?;
    (end as usize <= rest.len()).then_some(end as usize)
}

/// Scan an image for embedded formats.
///
/// Every region starts where its format is recognized (for tar, the
/// 512-byte header whose magic sits at offset 257). Self-describing
/// headers supply the length; otherwise a region extends to the next
/// region or the end of the image. Regions come back sorted by offset.
pub fn scan_signatures(bytes: &[u8]) -> Vec<CarvedRegion> {
    let mut found: Vec<(usize, RegionKind, Option<usize>)> = Vec::new();
    // Member-structured archives repeat their magic per member; suppress
    // same-kind hits inside a span that already validated end to end.
    let mut cpio_until = 0usize;
    let mut tar_until = 0usize;
    let mut at = 0usize;
    while at < bytes.len() {
        if let Some((kind, len)) = probe(bytes, at) {
            if kind != RegionKind::Cpio || at >= cpio_until {
                if kind == RegionKind::Cpio {
                    if let Some(l) = len {
                        cpio_until = at + l;
                    }
                }
                found.push((at, kind, len));
            }
        }
        if at >= tar_until && tar_header_at(bytes, at) {
            let len = tar_scan_length(bytes, at);
            if let Some(l) = len {
                tar_until = at + l;
            }
            found.push((at, RegionKind::Tar, len));
        }
        at += 1;
    }

    found.sort_by_key(|&(offset, kind, _)| (offset, kind as u8));
    found.dedup_by_key(|&mut (offset, kind, _)| (offset, kind));

    let image_len = bytes.len();
    let offsets: Vec<usize> = found.iter().map(|f| f.0).collect();
    found
        .iter()
        .enumerate()
        .map(|(i, &(offset, kind, parsed_len))| {
            let next = offsets
                .get(i + 1..)
                .and_then(|rest| rest.iter().find(|&&o| o > offset))
                .copied()
                .unwrap_or(image_len);
            let fallback = next - offset;
            let length = parsed_len
                .map(|l| l.min(image_len - offset))
                .filter(|&l| l > 0)
                .unwrap_or(fallback)
                .max(1)
                .min(image_len - offset);
            CarvedRegion {
                offset,
                length,
                kind,
            }
        })
        .collect()
}
