//! ustar tar reader (with GNU long-name records).

use super::{classify_object, ExtractedObject, ExtractionError, ExtractionOutput};

const BLOCK: usize = 512;

fn parse_octal(field: &[u8]) -> Result<u64, ExtractionError> {
    let mut value = 0u64;
    let mut seen = false;
    for &b in field {
        match b {
            b'0'..=b'7' => {
                value = value * 8 + (b - b'0') as u64;
                seen = true;
            }
            b' ' | 0 => {
                if seen {
                    break;
                }
            }
            _ => {
                return Err(ExtractionError::MalformedArchive(format!(
                    "bad octal field {:?}",
                    String::from_utf8_lossy(field)
                )))
            }
        }
    }
    if !seen {
        return Err(ExtractionError::MalformedArchive("empty octal field".into()));
    }
    Ok(value)
}

fn checksum_ok(header: &[u8]) -> Result<bool, ExtractionError> {
    let stored = parse_octal(&header[148..156])?;
    let sum: u64 = header
        .iter()
        .enumerate()
        .map(|(i, &b)| if (148..156).contains(&i) { 0x20 } else { b as u64 })
        .sum();
    Ok(stored == sum)
}

fn field_str(field: &[u8]) -> String {
    let end = field.iter().position(|&b| b == 0).unwrap_or(field.len());
    String::from_utf8_lossy(&field[..end]).into_owned()
}

fn normalize_path(raw: &str) -> Option<String> {
    let trimmed = raw
        .trim_start_matches("./")
        .trim_start_matches('/')
        .trim_end_matches('/');
    if trimmed.is_empty() || trimmed.split('/').any(|c| c == ".." || c.is_empty()) {
        return None;
    }
    Some(trimmed.to_string())
}

/// Extract every regular file from a ustar archive, preserving nested
/// directory paths. Symlinks and special entries are skipped with a
/// warning; PAX metadata records are ignored.
pub fn extract_tar(bytes: &[u8]) -> Result<ExtractionOutput, ExtractionError> {
    let mut out = ExtractionOutput::default();
    let mut pos = 0usize;
    let mut pending_long_name: Option<String> = None;

    loop {
        let Some(header) = bytes.get(pos..pos + BLOCK) else {
            // A reference archiver always terminates with zero blocks, but
            // carved regions may cut them off; treat EOF as end of archive.
            return Ok(out);
        };
        if header.iter().all(|&b| b == 0) {
            return Ok(out);
        }
        if &header[257..262] != b"ustar" {
            return Err(ExtractionError::MalformedArchive(format!(
                "missing ustar magic at {pos}"
            )));
        }
        if !checksum_ok(header)? {
            return Err(ExtractionError::MalformedArchive(format!(
                "header checksum mismatch at {pos}"
            )));
        }

        let size = parse_octal(&header[124..136])? as usize;
        let typeflag = header[156];
        let data_start = pos + BLOCK;
        let data_end = data_start + size;
        if data_end > bytes.len() {
            return Err(ExtractionError::TruncatedImage(format!(
                "tar member at {pos} claims {size} bytes past end of region"
            )));
        }
        let data = &bytes[data_start..data_end];

        let name = pending_long_name.take().unwrap_or_else(|| {
            let prefix = field_str(&header[345..500]);
            let base = field_str(&header[..100]);
            if prefix.is_empty() {
                base
            } else {
                format!("{prefix}/{base}")
            }
        });

        match typeflag {
            b'0' | 0 => match normalize_path(&name) {
                Some(path) => out.objects.push(ExtractedObject {
                    kind: classify_object(data),
                    path,
                    bytes: data.to_vec(),
                }),
                None => out.warnings.push(format!("skipped unsafe tar path {name:?}")),
            },
            b'5' => {} // directory, implicit
            b'2' | b'1' => out.warnings.push(format!("skipped link {name:?}")),
            b'L' => {
                // GNU long name: applies to the next member.
                pending_long_name = Some(field_str(data));
            }
            b'x' | b'g' | b'K' => {} // PAX / long-link metadata
            other => out.warnings.push(format!(
                "skipped tar entry {name:?} (type {:?})",
                other as char
            )),
        }
        pos = data_end.div_ceil(BLOCK) * BLOCK;
    }
}
