//! newc (SVR4) cpio reader.

use super::{classify_object, ExtractedObject, ExtractionError, ExtractionOutput};

const HEADER_LEN: usize = 110;

struct Member {
    mode: u32,
    filesize: usize,
    name: String,
    data_start: usize,
}

fn parse_header(bytes: &[u8], pos: usize) -> Result<Member, ExtractionError> {
    let header = bytes.get(pos..pos + HEADER_LEN).ok_or_else(|| {
        ExtractionError::TruncatedImage(format!("cpio header at {pos} past end of region"))
    })?;
    match &header[..6] {
        b"070701" | b"070702" => {}
        b"070707" => {
            return Err(ExtractionError::UnsupportedVariant(
                "odc cpio archives are not supported (newc only)".into(),
            ))
        }
        other => {
            return Err(ExtractionError::MalformedArchive(format!(
                "bad cpio magic {:?} at {pos}",
                String::from_utf8_lossy(other)
            )))
        }
    }
    let field = |i: usize| -> Result<u32, ExtractionError> {
        let raw = &header[6 + i * 8..6 + (i + 1) * 8];
        let s = std::str::from_utf8(raw)
            .map_err(|_| ExtractionError::MalformedArchive("non-ASCII cpio field".into()))?;
        u32::from_str_radix(s, 16)
            .map_err(|_| ExtractionError::MalformedArchive(format!("bad hex field {s:?}")))
    };
    let mode = field(1)?;
    let filesize = field(6)? as usize;
    let namesize = field(11)? as usize;

    let name_start = pos + HEADER_LEN;
    let name_raw = bytes.get(name_start..name_start + namesize).ok_or_else(|| {
        ExtractionError::TruncatedImage("cpio name field past end of region".into())
    })?;
    let name = String::from_utf8_lossy(name_raw.split(|&b| b == 0).next().unwrap_or(&[]))
        .into_owned();
    let data_start = (name_start + namesize).div_ceil(4) * 4;
    Ok(Member {
        mode,
        filesize,
        name,
        data_start,
    })
}

fn normalize_path(raw: &str) -> Option<String> {
    let trimmed = raw.trim_start_matches("./").trim_start_matches('/');
    if trimmed.is_empty() {
        return None;
    }
    if trimmed.split('/').any(|c| c == ".." || c.is_empty()) {
        return None;
    }
    Some(trimmed.to_string())
}

/// Extract every regular file from a newc cpio archive. Directories are
/// implicit in paths; symlinks and special files are skipped with a
/// warning.
pub fn extract_cpio(bytes: &[u8]) -> Result<ExtractionOutput, ExtractionError> {
    let mut out = ExtractionOutput::default();
    let mut pos = 0usize;
    loop {
        let member = parse_header(bytes, pos)?;
        if member.name == "TRAILER!!!" {
            return Ok(out);
        }
        let data_end = member.data_start + member.filesize;
        if data_end > bytes.len() {
            return Err(ExtractionError::TruncatedImage(format!(
                "cpio member {:?} claims {} bytes past end of region",
                member.name, member.filesize
            )));
        }
        match member.mode & 0o170000 {
            0o100000 => match normalize_path(&member.name) {
                Some(path) => {
                    let data = bytes[member.data_start..data_end].to_vec();
                    out.objects.push(ExtractedObject {
                        kind: classify_object(&data),
                        path,
                        bytes: data,
                    });
                }
                None => out
                    .warnings
                    .push(format!("skipped unsafe cpio path {:?}", member.name)),
            },
            0o040000 => {} // directory, implicit
            0o120000 => out
                .warnings
                .push(format!("skipped symlink {:?}", member.name)),
            other => out.warnings.push(format!(
                "skipped special cpio entry {:?} (mode {other:o})",
                member.name
            )),
        }
        pos = data_end.div_ceil(4) * 4;
    }
}
