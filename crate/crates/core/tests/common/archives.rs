//! Reference archive writers for round-trip fixtures. TAR goes through
//! GNU tar; CPIO is a from-the-format-spec newc writer independent of
//! the reader under test.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::process::Command;

/// A file tree: path -> contents. Directories are implicit.
pub type Tree = BTreeMap<String, Vec<u8>>;

fn implied_dirs(tree: &Tree) -> Vec<String> {
    let mut dirs = std::collections::BTreeSet::new();
    for path in tree.keys() {
        let mut at = String::new();
        for part in path.split('/').rev().skip(1).collect::<Vec<_>>().into_iter().rev() {
            if !at.is_empty() {
                at.push('/');
            }
            at.push_str(part);
            dirs.insert(at.clone());
        }
    }
    dirs.into_iter().collect()
}

/// newc cpio archive of the tree, per the SVR4 format description.
pub fn pack_cpio(tree: &Tree) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ino = 1u32;
    let mut member = |name: &str, mode: u32, data: &[u8], out: &mut Vec<u8>| {
        out.extend_from_slice(b"070701");
        let fields = [
            ino,
            mode,
            0,
            0,
            1,
            0,
            data.len() as u32,
            3,
            1,
            0,
            0,
            name.len() as u32 + 1,
            0,
        ];
        for f in fields {
            out.extend_from_slice(format!("{f:08x}").as_bytes());
        }
        ino += 1;
        out.extend_from_slice(name.as_bytes());
        out.push(0);
        while !out.len().is_multiple_of(4) {
            out.push(0);
        }
        out.extend_from_slice(data);
        while !out.len().is_multiple_of(4) {
            out.push(0);
        }
    };
    for dir in implied_dirs(tree) {
        member(&dir, 0o040755, &[], &mut out);
    }
    for (path, data) in tree {
        member(path, 0o100644, data, &mut out);
    }
    member("TRAILER!!!", 0, &[], &mut out);
    // GNU cpio pads archives to a 512-byte boundary.
    while out.len() % 512 != 0 {
        out.push(0);
    }
    out
}

/// ustar archive of the tree via the system GNU tar.
pub fn pack_tar(tree: &Tree) -> Vec<u8> {
    let dir = tempfile::tempdir().expect("tempdir");
    for (path, data) in tree {
        let full = dir.path().join(path);
        std::fs::create_dir_all(full.parent().unwrap()).unwrap();
        std::fs::write(full, data).unwrap();
    }
    let out_path = dir.path().join("__fixture.tar");
    // Sort for determinism; ustar format exercises the prefix field.
    let status = Command::new("tar")
        .args([
            "--format=ustar",
            "--sort=name",
            "--owner=0",
            "--group=0",
            "--mtime=@0",
            "-cf",
        ])
        .arg(&out_path)
        .arg("-C")
        .arg(dir.path())
        .args(tree.keys())
        .status()
        .expect("system tar must be runnable");
    assert!(status.success(), "tar exited with {status}");
    std::fs::read(out_path).unwrap()
}

/// Single-member gzip wrapping (via the same flate2 the crate links, but
/// through the compression side, which the reader never touches).
pub fn gzip(data: &[u8]) -> Vec<u8> {
    use std::io::Write;
    let mut encoder =
        flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    encoder.write_all(data).unwrap();
    encoder.finish().unwrap()
}
