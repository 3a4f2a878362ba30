//! SquashFS v4 (zlib) image writer for fixtures.
//!
//! Small images only: each metadata table must fit in one 8 KiB chunk,
//! which keeps every inode/directory reference at block offset zero and
//! makes the layout single-pass. Metadata and data blocks are zlib
//! compressed; all-zero data blocks are stored sparse; file tails go to
//! a fragment block unless `use_fragments` is off.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::Write;

use super::archives::Tree;

const METADATA_SIZE: usize = 8192;

#[derive(Debug)]
enum Node {
    Dir(BTreeMap<String, Node>),
    File(Vec<u8>),
}

fn build_tree(tree: &Tree) -> BTreeMap<String, Node> {
    let mut root = BTreeMap::new();
    for (path, data) in tree {
        let mut cursor = &mut root;
        let parts: Vec<&str> = path.split('/').collect();
        for part in &parts[..parts.len() - 1] {
            let entry = cursor
                .entry(part.to_string())
                .or_insert_with(|| Node::Dir(BTreeMap::new()));
            match entry {
                Node::Dir(children) => cursor = children,
                Node::File(_) => panic!("path {path} crosses a file"),
            }
        }
        cursor.insert(parts[parts.len() - 1].to_string(), Node::File(data.clone()));
    }
    root
}

fn zlib(data: &[u8]) -> Vec<u8> {
    let mut enc = flate2::write::ZlibEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(data).unwrap();
    enc.finish().unwrap()
}

struct InodePlan {
    number: u32,
    raw_offset: u16,
    raw_size: usize,
    is_dir: bool,
}

struct Layout {
    /// Post-order: children before parents, root last. Key is the node's
    /// full path ("" for root).
    inodes: BTreeMap<String, InodePlan>,
    order: Vec<String>,
}

fn plan_inodes(root: &BTreeMap<String, Node>, block_size: u32, use_fragments: bool) -> Layout {
    let mut layout = Layout {
        inodes: BTreeMap::new(),
        order: Vec::new(),
    };
    fn walk(
        children: &BTreeMap<String, Node>,
        path: &str,
        layout: &mut Layout,
        block_size: u32,
        use_fragments: bool,
    ) {
        for (name, node) in children {
            let child_path = if path.is_empty() {
                name.clone()
            } else {
                format!("{path}/{name}")
            };
            match node {
                Node::Dir(sub) => walk(sub, &child_path, layout, block_size, use_fragments),
                Node::File(data) => {
                    let n_blocks = data_block_count(data.len(), block_size, use_fragments);
                    layout.order.push(child_path.clone());
                    layout.inodes.insert(
                        child_path,
                        InodePlan {
                            number: 0,
                            raw_offset: 0,
                            raw_size: 32 + 4 * n_blocks,
                            is_dir: false,
                        },
                    );
                }
            }
        }
        // The directory itself follows its children (post-order).
        layout.order.push(path.to_string());
        layout.inodes.insert(
            path.to_string(),
            InodePlan {
                number: 0,
                raw_offset: 0,
                raw_size: 32,
                is_dir: true,
            },
        );
    }
    walk(root, "", &mut layout, block_size, use_fragments);

    let mut offset = 0usize;
    for (i, path) in layout.order.iter().enumerate() {
        let plan = layout.inodes.get_mut(path).unwrap();
        plan.number = i as u32 + 1;
        plan.raw_offset = u16::try_from(offset).expect("inode stream fits one chunk");
        offset += plan.raw_size;
    }
    assert!(offset <= METADATA_SIZE, "inode table must fit one metadata chunk");
    layout
}

fn data_block_count(len: usize, block_size: u32, use_fragments: bool) -> usize {
    let bs = block_size as usize;
    if use_fragments {
        len / bs
    } else {
        len.div_ceil(bs)
    }
}

struct FileData {
    blocks_start: u32,
    sizes: Vec<u32>,
    fragment: u32,
    fragment_offset: u32,
    len: u32,
}

/// One metadata chunk: 2-byte header plus (compressed) payload.
fn metadata_chunk(raw: &[u8]) -> Vec<u8> {
    assert!(raw.len() <= METADATA_SIZE);
    let compressed = zlib(raw);
    let mut out = Vec::new();
    if compressed.len() < raw.len() {
        out.extend_from_slice(&(compressed.len() as u16).to_le_bytes());
        out.extend_from_slice(&compressed);
    } else {
        out.extend_from_slice(&(raw.len() as u16 | 0x8000).to_le_bytes());
        out.extend_from_slice(raw);
    }
    out
}

/// Build a complete image. Files with all-zero blocks exercise sparse
/// storage; tails exercise fragments when enabled.
pub fn build_squashfs(tree: &Tree, block_size: u32, use_fragments: bool) -> Vec<u8> {
    assert!(block_size.is_power_of_two() && block_size >= 4096);
    let root = build_tree(tree);
    let layout = plan_inodes(&root, block_size, use_fragments);

    let mut image = vec![0u8; 96]; // superblock placeholder

    // Data blocks.
    let bs = block_size as usize;
    let mut files: BTreeMap<String, FileData> = BTreeMap::new();
    let mut fragment_buf: Vec<u8> = Vec::new();
    let mut pending_tails: Vec<(String, u32)> = Vec::new(); // path, offset in fragment
    let mut fragment_entries: Vec<(u64, u32)> = Vec::new();

    for (path, plan) in &layout.inodes {
        if plan.is_dir {
            continue;
        }
        let data = match lookup(&root, path) {
            Node::File(data) => data,
            Node::Dir(_) => unreachable!(),
        };
        let n_blocks = data_block_count(data.len(), block_size, use_fragments);
        let blocks_start = image.len() as u32;
        let mut sizes = Vec::new();
        for i in 0..n_blocks {
            let chunk = &data[i * bs..((i + 1) * bs).min(data.len())];
            if chunk.iter().all(|&b| b == 0) && chunk.len() == bs {
                sizes.push(0); // sparse
                continue;
            }
            let compressed = zlib(chunk);
            if compressed.len() < chunk.len() {
                sizes.push(compressed.len() as u32);
                image.extend_from_slice(&compressed);
            } else {
                sizes.push(chunk.len() as u32 | 0x0100_0000);
                image.extend_from_slice(chunk);
            }
        }
        let (fragment, fragment_offset) = if use_fragments && data.len() % bs != 0 {
            let tail = &data[n_blocks * bs..];
            if fragment_buf.len() + tail.len() > bs {
                flush_fragment(&mut image, &mut fragment_buf, &mut fragment_entries);
            }
            let offset = fragment_buf.len() as u32;
            fragment_buf.extend_from_slice(tail);
            pending_tails.push((path.clone(), fragment_entries.len() as u32));
            (u32::MAX - 1, offset) // fragment index patched after flush
        } else {
            (u32::MAX, 0)
        };
        files.insert(
            path.clone(),
            FileData {
                blocks_start,
                sizes,
                fragment,
                fragment_offset,
                len: data.len() as u32,
            },
        );
    }
    if !fragment_buf.is_empty() {
        flush_fragment(&mut image, &mut fragment_buf, &mut fragment_entries);
    }
    for (path, frag_idx) in pending_tails {
        files.get_mut(&path).unwrap().fragment = frag_idx;
    }

    // Directory listings (single directory-table chunk).
    let mut dir_stream: Vec<u8> = Vec::new();
    let mut listings: BTreeMap<String, (u16, u16)> = BTreeMap::new(); // path -> (offset, len)
    fn collect_dirs<'a>(
        children: &'a BTreeMap<String, Node>,
        path: &str,
        out: &mut Vec<(String, &'a BTreeMap<String, Node>)>,
    ) {
        for (name, node) in children {
            if let Node::Dir(sub) = node {
                let child_path = if path.is_empty() {
                    name.clone()
                } else {
                    format!("{path}/{name}")
                };
                collect_dirs(sub, &child_path, out);
                out.push((child_path, sub));
            }
        }
    }
    let mut dirs: Vec<(String, &BTreeMap<String, Node>)> = Vec::new();
    collect_dirs(&root, "", &mut dirs);
    dirs.push((String::new(), &root));

    for (dir_path, children) in &dirs {
        let offset = dir_stream.len() as u16;
        if !children.is_empty() {
            let first_child = child_path(dir_path, children.keys().next().unwrap());
            let base = layout.inodes[&first_child].number;
            dir_stream.extend_from_slice(&(children.len() as u32 - 1).to_le_bytes());
            dir_stream.extend_from_slice(&0u32.to_le_bytes()); // inode chunk offset
            dir_stream.extend_from_slice(&base.to_le_bytes());
            for (name, node) in children.iter() {
                let child = child_path(dir_path, name);
                let plan = &layout.inodes[&child];
                dir_stream.extend_from_slice(&plan.raw_offset.to_le_bytes());
                let delta = (plan.number as i32 - base as i32) as i16;
                dir_stream.extend_from_slice(&delta.to_le_bytes());
                let kind: u16 = if matches!(node, Node::Dir(_)) { 1 } else { 2 };
                dir_stream.extend_from_slice(&kind.to_le_bytes());
                dir_stream.extend_from_slice(&(name.len() as u16 - 1).to_le_bytes());
                dir_stream.extend_from_slice(name.as_bytes());
            }
        }
        let len = dir_stream.len() as u16 - offset;
        listings.insert(dir_path.clone(), (offset, len));
    }
    assert!(dir_stream.len() <= METADATA_SIZE, "directory table must fit one chunk");

    // Inode stream, in planned order.
    let mut inode_stream: Vec<u8> = Vec::new();
    for path in &layout.order {
        let plan = &layout.inodes[path];
        assert_eq!(inode_stream.len(), plan.raw_offset as usize);
        if plan.is_dir {
            let (offset, len) = listings[path];
            let parent = if path.is_empty() {
                layout.inodes.len() as u32 + 1
            } else {
                let parent_path = match path.rfind('/') {
                    Some(i) => &path[..i],
                    None => "",
                };
                layout.inodes[parent_path].number
            };
            push_inode_header(&mut inode_stream, 1, 0o755, plan.number);
            inode_stream.extend_from_slice(&0u32.to_le_bytes()); // start_block
            inode_stream.extend_from_slice(&2u32.to_le_bytes()); // nlink
            inode_stream.extend_from_slice(&(len + 3).to_le_bytes());
            inode_stream.extend_from_slice(&offset.to_le_bytes());
            inode_stream.extend_from_slice(&parent.to_le_bytes());
        } else {
            let file = &files[path];
            push_inode_header(&mut inode_stream, 2, 0o644, plan.number);
            inode_stream.extend_from_slice(&file.blocks_start.to_le_bytes());
            inode_stream.extend_from_slice(&file.fragment.to_le_bytes());
            inode_stream.extend_from_slice(&file.fragment_offset.to_le_bytes());
            inode_stream.extend_from_slice(&file.len.to_le_bytes());
            for s in &file.sizes {
                inode_stream.extend_from_slice(&s.to_le_bytes());
            }
        }
    }

    let inode_table = image.len() as u64;
    image.extend_from_slice(&metadata_chunk(&inode_stream));
    let dir_table = image.len() as u64;
    image.extend_from_slice(&metadata_chunk(&dir_stream));

    // Fragment table: descriptor chunk plus pointer array.
    let frag_table = if fragment_entries.is_empty() {
        image.len() as u64
    } else {
        let mut frag_stream = Vec::new();
        for (start, size) in &fragment_entries {
            frag_stream.extend_from_slice(&start.to_le_bytes());
            frag_stream.extend_from_slice(&size.to_le_bytes());
            frag_stream.extend_from_slice(&0u32.to_le_bytes());
        }
        let chunk_at = image.len() as u64;
        image.extend_from_slice(&metadata_chunk(&frag_stream));
        let pointer_at = image.len() as u64;
        image.extend_from_slice(&chunk_at.to_le_bytes());
        pointer_at
    };

    // ID table: one root id.
    let id_chunk_at = image.len() as u64;
    image.extend_from_slice(&metadata_chunk(&0u32.to_le_bytes()));
    let id_table = image.len() as u64;
    image.extend_from_slice(&id_chunk_at.to_le_bytes());

    let bytes_used = image.len() as u64;
    while !image.len().is_multiple_of(4096) {
        image.push(0);
    }

    // Superblock.
    let root_plan = &layout.inodes[""];
    let sb = &mut image[..96];
    sb[0..4].copy_from_slice(b"hsqs");
    sb[4..8].copy_from_slice(&(layout.inodes.len() as u32).to_le_bytes());
    sb[8..12].copy_from_slice(&0u32.to_le_bytes()); // mod_time
    sb[12..16].copy_from_slice(&block_size.to_le_bytes());
    sb[16..20].copy_from_slice(&(fragment_entries.len() as u32).to_le_bytes());
    sb[20..22].copy_from_slice(&1u16.to_le_bytes()); // zlib
    sb[22..24].copy_from_slice(&(block_size.trailing_zeros() as u16).to_le_bytes());
    sb[24..26].copy_from_slice(&0u16.to_le_bytes()); // flags
    sb[26..28].copy_from_slice(&1u16.to_le_bytes()); // id_count
    sb[28..30].copy_from_slice(&4u16.to_le_bytes());
    sb[30..32].copy_from_slice(&0u16.to_le_bytes());
    let root_ref = root_plan.raw_offset as u64;
    sb[32..40].copy_from_slice(&root_ref.to_le_bytes());
    sb[40..48].copy_from_slice(&bytes_used.to_le_bytes());
    sb[48..56].copy_from_slice(&id_table.to_le_bytes());
    sb[56..64].copy_from_slice(&u64::MAX.to_le_bytes()); // xattr
    sb[64..72].copy_from_slice(&inode_table.to_le_bytes());
    sb[72..80].copy_from_slice(&dir_table.to_le_bytes());
    sb[80..88].copy_from_slice(&frag_table.to_le_bytes());
    sb[88..96].copy_from_slice(&u64::MAX.to_le_bytes()); // export
    image
}

fn child_path(dir: &str, name: &str) -> String {
    if dir.is_empty() {
        name.to_string()
    } else {
        format!("{dir}/{name}")
    }
}

fn lookup<'a>(root: &'a BTreeMap<String, Node>, path: &str) -> &'a Node {
    let mut parts = path.split('/');
    let first = parts.next().unwrap();
    let mut node = root.get(first).unwrap();
    for part in parts {
        match node {
            Node::Dir(children) => node = children.get(part).unwrap(),
            Node::File(_) => panic!("not a dir"),
        }
    }
    node
}

fn push_inode_header(stream: &mut Vec<u8>, kind: u16, perm: u16, number: u32) {
    stream.extend_from_slice(&kind.to_le_bytes());
    stream.extend_from_slice(&perm.to_le_bytes());
    stream.extend_from_slice(&0u16.to_le_bytes()); // uid idx
    stream.extend_from_slice(&0u16.to_le_bytes()); // gid idx
    stream.extend_from_slice(&0u32.to_le_bytes()); // mtime
    stream.extend_from_slice(&number.to_le_bytes());
}

fn flush_fragment(image: &mut Vec<u8>, buf: &mut Vec<u8>, entries: &mut Vec<(u64, u32)>) {
    if buf.is_empty() {
        return;
    }
    let start = image.len() as u64;
    let compressed = zlib(buf);
    let size = if compressed.len() < buf.len() {
        image.extend_from_slice(&compressed);
        compressed.len() as u32
    } else {
        image.extend_from_slice(buf);
        buf.len() as u32 | 0x0100_0000
    };
    entries.push((start, size));
    buf.clear();
}
