//! SquashFS v4 reader, zlib compressor only.
//!
//! Reads the superblock, metadata tables (inodes, directories,
//! fragments), and data blocks, and walks the directory tree from the
//! root inode. Vendor dialects, other compressors, and other versions are
//! refused as unsupported variants; identification of such regions still
//! succeeds at the signature level.

use std::collections::HashMap;
use std::io::Read;

use flate2::read::ZlibDecoder;

use super::{classify_object, ExtractedObject, ExtractionError, ExtractionOutput};

const MAGIC: &[u8; 4] = b"hsqs";
const SUPERBLOCK_LEN: usize = 96;
const METADATA_SIZE: usize = 8192;
const COMPRESSOR_ZLIB: u16 = 1;
const NO_FRAGMENT: u32 = 0xFFFF_FFFF;
const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone)]
struct Superblock {
    inode_count: u32,
    block_size: u32,
    frag_count: u32,
    compressor: u16,
    ver_major: u16,
    ver_minor: u16,
    root_inode: u64,
    bytes_used: u64,
    inode_table: u64,
    dir_table: u64,
    frag_table: u64,
}

fn le16(b: &[u8], at: usize) -> Result<u16, ExtractionError> {
    b.get(at..at + 2)
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
        .ok_or_else(|| ExtractionError::TruncatedImage(format!("read of u16 at {at} past end")))
}

fn le32(b: &[u8], at: usize) -> Result<u32, ExtractionError> {
    b.get(at..at + 4)
        .map(|s| u32::from_le_bytes(s.try_into().unwrap()))
        .ok_or_else(|| ExtractionError::TruncatedImage(format!("read of u32 at {at} past end")))
}

fn le64(b: &[u8], at: usize) -> Result<u64, ExtractionError> {
    b.get(at..at + 8)
        .map(|s| u64::from_le_bytes(s.try_into().unwrap()))
        .ok_or_else(|| ExtractionError::TruncatedImage(format!("read of u64 at {at} past end")))
}

fn parse_superblock(bytes: &[u8]) -> Result<Superblock, ExtractionError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ExtractionError::MalformedArchive(
            "missing squashfs magic".into(),
        ));
    }
    if bytes.len() < SUPERBLOCK_LEN {
        return Err(ExtractionError::TruncatedImage(format!(
            "superblock needs {SUPERBLOCK_LEN} bytes, region has {}",
            bytes.len()
        )));
    }
    let sb = Superblock {
        inode_count: le32(bytes, 4)?,
        block_size: le32(bytes, 12)?,
        frag_count: le32(bytes, 16)?,
        compressor: le16(bytes, 20)?,
        ver_major: le16(bytes, 28)?,
        ver_minor: le16(bytes, 30)?,
        root_inode: le64(bytes, 32)?,
        bytes_used: le64(bytes, 40)?,
        inode_table: le64(bytes, 64)?,
        dir_table: le64(bytes, 72)?,
        frag_table: le64(bytes, 80)?,
    };
    if (sb.ver_major, sb.ver_minor) != (4, 0) {
        return Err(ExtractionError::UnsupportedVariant(format!(
            "squashfs v{}.{} (only v4.0 is supported)",
            sb.ver_major, sb.ver_minor
        )));
    }
    if sb.compressor != COMPRESSOR_ZLIB {
        return Err(ExtractionError::UnsupportedVariant(format!(
            "squashfs compressor id {} (only zlib is supported)",
            sb.compressor
        )));
    }
    let block_log = le16(bytes, 22)?;
    if sb.block_size == 0
        || sb.block_size > 1 << 20
        || u32::checked_shl(1, block_log as u32) != Some(sb.block_size)
    {
        return Err(ExtractionError::MalformedArchive(format!(
            "inconsistent block size {} / log {}",
            sb.block_size, block_log
        )));
    }
    if sb.bytes_used as usize > bytes.len() {
        return Err(ExtractionError::TruncatedImage(format!(
            "superblock claims {} bytes, region has {}",
            sb.bytes_used,
            bytes.len()
        )));
    }
    Ok(sb)
}

fn inflate(data: &[u8], max_out: usize) -> Result<Vec<u8>, ExtractionError> {
    let mut out = Vec::new();
    let mut decoder = ZlibDecoder::new(data).take(max_out as u64 + 1);
    decoder
        .read_to_end(&mut out)
        .map_err(|e| ExtractionError::MalformedArchive(format!("zlib stream: {e}")))?;
    if out.len() > max_out {
        return Err(ExtractionError::MalformedArchive(
            "decompressed block exceeds its format bound".into(),
        ));
    }
    Ok(out)
}

/// On-demand reader for one metadata table (inodes, directories, or
/// fragment descriptors). Blocks are addressed by their byte offset
/// relative to the table start and cached once decompressed.
struct MetaReader<'a> {
    image: &'a [u8],
    table_base: u64,
    cache: HashMap<u64, (Vec<u8>, u64)>,
}

impl<'a> MetaReader<'a> {
    fn new(image: &'a [u8], table_base: u64) -> Self {
        MetaReader {
            image,
            table_base,
            cache: HashMap::new(),
        }
    }

    /// Decompressed contents of the metadata block at `block_off`, plus
    /// the offset of the following block.
    fn block(&mut self, block_off: u64) -> Result<(&[u8], u64), ExtractionError> {
        if !self.cache.contains_key(&block_off) {
            let at = (self.table_base + block_off) as usize;
            let header = le16(self.image, at)?;
            let on_disk = (header & 0x7fff) as usize;
            let stored_uncompressed = header & 0x8000 != 0;
            let data = self
                .image
                .get(at + 2..at + 2 + on_disk)
                .ok_or_else(|| {
                    ExtractionError::TruncatedImage(format!(
                        "metadata block at {at} overruns the region"
                    ))
                })?;
            let plain = if stored_uncompressed {
                data.to_vec()
            } else {
                inflate(data, METADATA_SIZE)?
            };
            let next = block_off + 2 + on_disk as u64;
            self.cache.insert(block_off, (plain, next));
        }
        let (plain, next) = &self.cache[&block_off];
        Ok((plain.as_slice(), *next))
    }

    /// Read `len` bytes starting at (`block_off`, `offset`), continuing
    /// into following metadata blocks as needed.
    fn read(&mut self, block_off: u64, offset: usize, len: usize) -> Result<Vec<u8>, ExtractionError> {
        let mut out = Vec::with_capacity(len);
        let mut block = block_off;
        let mut pos = offset;
        while out.len() < len {
            let (plain, next) = self.block(block)?;
            if pos >= plain.len() {
                return Err(ExtractionError::MalformedArchive(format!(
                    "metadata offset {pos} outside block of {} bytes",
                    plain.len()
                )));
            }
            let take = (len - out.len()).min(plain.len() - pos);
            out.extend_from_slice(&plain[pos..pos + take]);
            pos = 0;
            block = next;
        }
        Ok(out)
    }
}

struct DirLocation {
    start_block: u32,
    block_offset: u16,
    listing_len: usize,
}

struct FileLocation {
    blocks_start: u64,
    file_size: u64,
    fragment: u32,
    fragment_offset: u32,
    block_sizes: Vec<u32>,
}

enum Inode {
    Dir(DirLocation),
    File(FileLocation),
    Symlink,
    Other(u16),
}

fn read_inode(
    inodes: &mut MetaReader<'_>,
    inode_ref: u64,
    block_size: u32,
) -> Result<Inode, ExtractionError> {
    let block_off = inode_ref >> 16;
    let offset = (inode_ref & 0xffff) as usize;
    let header = inodes.read(block_off, offset, 16)?;
    let inode_type = u16::from_le_bytes([header[0], header[1]]);

    match inode_type {
        1 => {
            let body = inodes.read(block_off, offset + 16, 16)?;
            Ok(Inode::Dir(DirLocation {
                start_block: le32(&body, 0)?,
                listing_len: (le16(&body, 8)? as usize).saturating_sub(3),
                block_offset: le16(&body, 10)?,
            }))
        }
        8 => {
            let body = inodes.read(block_off, offset + 16, 24)?;
            Ok(Inode::Dir(DirLocation {
                listing_len: (le32(&body, 4)? as usize).saturating_sub(3),
                start_block: le32(&body, 8)?,
                block_offset: le16(&body, 18)?,
            }))
        }
        2 => {
            let body = inodes.read(block_off, offset + 16, 16)?;
            let fragment = le32(&body, 4)?;
            let file_size = le32(&body, 12)? as u64;
            let n_blocks = data_block_count(file_size, fragment, block_size);
            let sizes = inodes.read(block_off, offset + 32, n_blocks * 4)?;
            Ok(Inode::File(FileLocation {
                blocks_start: le32(&body, 0)? as u64,
                fragment,
                fragment_offset: le32(&body, 8)?,
                file_size,
                block_sizes: (0..n_blocks).map(|i| le32(&sizes, i * 4)).collect::<Result<_, _>>()?,
            }))
        }
        9 => {
            let body = inodes.read(block_off, offset + 16, 40)?;
            let file_size = le64(&body, 8)?;
            let fragment = le32(&body, 28)?;
            let n_blocks = data_block_count(file_size, fragment, block_size);
            let sizes = inodes.read(block_off, offset + 56, n_blocks * 4)?;
            Ok(Inode::File(FileLocation {
                blocks_start: le64(&body, 0)?,
                file_size,
                fragment,
                fragment_offset: le32(&body, 32)?,
                block_sizes: (0..n_blocks).map(|i| le32(&sizes, i * 4)).collect::<Result<_, _>>()?,
            }))
        }
        3 | 10 => Ok(Inode::Symlink),
        other => Ok(Inode::Other(other)),
    }
}

fn data_block_count(file_size: u64, fragment: u32, block_size: u32) -> usize {
    let bs = block_size as u64;
    if fragment == NO_FRAGMENT {
        file_size.div_ceil(bs) as usize
    } else {
        (file_size / bs) as usize
    }
}

struct FragmentEntry {
    start: u64,
    size: u32,
}

/// The fragment lookup table: a u64 pointer array at `frag_table`
/// addresses metadata blocks of 512 16-byte descriptors each.
fn fragment_entry(
    image: &[u8],
    sb: &Superblock,
    index: u32,
) -> Result<FragmentEntry, ExtractionError> {
    if index >= sb.frag_count {
        return Err(ExtractionError::MalformedArchive(format!(
            "fragment index {index} out of range ({} fragments)",
            sb.frag_count
        )));
    }
    let pointer_at = sb.frag_table + (index as u64 / 512) * 8;
    let block_at = le64(image, pointer_at as usize)?;
    let mut reader = MetaReader::new(image, block_at);
    let entry = reader.read(0, (index as usize % 512) * 16, 16)?;
    Ok(FragmentEntry {
        start: le64(&entry, 0)?,
        size: le32(&entry, 8)?,
    })
}

fn read_data_block(
    image: &[u8],
    at: u64,
    size_word: u32,
    max_out: usize,
) -> Result<Vec<u8>, ExtractionError> {
    let on_disk = (size_word & 0x00ff_ffff) as usize;
    let stored_uncompressed = size_word & 0x0100_0000 != 0;
    if on_disk == 0 {
        return Ok(vec![0u8; max_out]); // sparse block
    }
    let data = image.get(at as usize..at as usize + on_disk).ok_or_else(|| {
        ExtractionError::TruncatedImage(format!("data block at {at} overruns the region"))
    })?;
    if stored_uncompressed {
        Ok(data.to_vec())
    } else {
        inflate(data, max_out)
    }
}

fn read_file(
    image: &[u8],
    sb: &Superblock,
    loc: &FileLocation,
) -> Result<Vec<u8>, ExtractionError> {
    let bs = sb.block_size as usize;
    let mut out = Vec::with_capacity(loc.file_size as usize);
    let mut at = loc.blocks_start;
    for (i, &word) in loc.block_sizes.iter().enumerate() {
        let remaining = loc.file_size as usize - out.len();
        let expect = if i + 1 == loc.block_sizes.len() && loc.fragment == NO_FRAGMENT {
            remaining.min(bs)
        } else {
            bs
        };
        let mut block = read_data_block(image, at, word, bs)?;
        block.truncate(expect);
        if block.len() < expect {
            return Err(ExtractionError::MalformedArchive(format!(
                "data block {i} shorter than expected ({} < {expect})",
                block.len()
            )));
        }
        out.extend_from_slice(&block);
        at += (word & 0x00ff_ffff) as u64;
    }
    if loc.fragment != NO_FRAGMENT {
        let tail = loc.file_size as usize - out.len();
        let entry = fragment_entry(image, sb, loc.fragment)?;
        let frag = read_data_block(image, entry.start, entry.size, bs)?;
        let start = loc.fragment_offset as usize;
        let slice = frag.get(start..start + tail).ok_or_else(|| {
            ExtractionError::MalformedArchive(format!(
                "fragment slice {start}+{tail} outside {} decompressed bytes",
                frag.len()
            ))
        })?;
        out.extend_from_slice(slice);
    }
    if out.len() != loc.file_size as usize {
        return Err(ExtractionError::MalformedArchive(format!(
            "file reassembled to {} of {} bytes",
            out.len(),
            loc.file_size
        )));
    }
    Ok(out)
}

struct DirEntry {
    name: String,
    inode_ref: u64,
    entry_type: u16,
}

fn read_directory(
    dirs: &mut MetaReader<'_>,
    loc: &DirLocation,
) -> Result<Vec<DirEntry>, ExtractionError> {
    let listing = dirs.read(loc.start_block as u64, loc.block_offset as usize, loc.listing_len)?;
    let mut entries = Vec::new();
    let mut pos = 0usize;
    while pos + 12 <= listing.len() {
        let count = le32(&listing, pos)? as usize + 1;
        let inode_block = le32(&listing, pos + 4)?;
        pos += 12;
        for _ in 0..count {
            if pos + 8 > listing.len() {
                return Err(ExtractionError::MalformedArchive(
                    "directory entry header overruns listing".into(),
                ));
            }
            let offset = le16(&listing, pos)?;
            let entry_type = le16(&listing, pos + 4)?;
            let name_size = le16(&listing, pos + 6)? as usize + 1;
            pos += 8;
            let raw = listing.get(pos..pos + name_size).ok_or_else(|| {
                ExtractionError::MalformedArchive("directory name overruns listing".into())
            })?;
            pos += name_size;
            let name = String::from_utf8_lossy(raw).into_owned();
            if name.contains('/') || name == ".." || name == "." {
                return Err(ExtractionError::MalformedArchive(format!(
                    "illegal directory entry name {name:?}"
                )));
            }
            entries.push(DirEntry {
                name,
                inode_ref: ((inode_block as u64) << 16) | offset as u64,
                entry_type,
            });
        }
    }
    Ok(entries)
}

struct Walker<'a, 'b> {
    image: &'a [u8],
    sb: &'a Superblock,
    inodes: &'b mut MetaReader<'a>,
    dirs: &'b mut MetaReader<'a>,
    out: &'b mut ExtractionOutput,
}

impl Walker<'_, '_> {
    fn walk(&mut self, dir: &DirLocation, prefix: &str, depth: usize) -> Result<(), ExtractionError> {
        if depth > MAX_DEPTH {
            return Err(ExtractionError::MalformedArchive(
                "directory tree deeper than the format allows".into(),
            ));
        }
        for entry in read_directory(self.dirs, dir)? {
            let path = if prefix.is_empty() {
                entry.name.clone()
            } else {
                format!("{prefix}/{}", entry.name)
            };
            match read_inode(self.inodes, entry.inode_ref, self.sb.block_size)? {
                Inode::Dir(sub) => self.walk(&sub, &path, depth + 1)?,
                Inode::File(loc) => {
                    let data = read_file(self.image, self.sb, &loc)?;
                    self.out.objects.push(ExtractedObject {
                        kind: classify_object(&data),
                        path,
                        bytes: data,
                    });
                }
                Inode::Symlink => self.out.warnings.push(format!("skipped symlink {path:?}")),
                Inode::Other(t) => self
                    .out
                    .warnings
                    .push(format!("skipped special inode type {t} at {path:?}")),
            }
            let _ = entry.entry_type; // inode headers are authoritative
        }
        Ok(())
    }
}

/// Extract every regular file from a zlib-compressed SquashFS v4 region.
pub fn extract_squashfs(bytes: &[u8]) -> Result<ExtractionOutput, ExtractionError> {
    let sb = parse_superblock(bytes)?;
    let mut inodes = MetaReader::new(bytes, sb.inode_table);
    let mut dirs = MetaReader::new(bytes, sb.dir_table);
    let mut out = ExtractionOutput::default();

    let root = match read_inode(&mut inodes, sb.root_inode, sb.block_size)? {
        Inode::Dir(loc) => loc,
        _ => {
            return Err(ExtractionError::MalformedArchive(
                "root inode is not a directory".into(),
            ))
        }
    };
    Walker {
        image: bytes,
        sb: &sb,
        inodes: &mut inodes,
        dirs: &mut dirs,
        out: &mut out,
    }
    .walk(&root, "", 0)?;
    let _ = sb.inode_count;
    Ok(out)
}
