//! Synthetic detection corpus: three fixture TPCs, three versions each,
//! combined into twenty firmware images with known ground truth.
//!
//! Feature strings are mutually dissimilar random words so edit
//! similarity cannot cross-match them; function bodies avoid
//! rodata-addressed constants so ACFG attributes agree between the
//! ELF-context and monolithic extraction paths.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use firmsca_core::binfeat::{features_from_elf, parse_elf};
use firmsca_core::extraction::FirmwareImage;
use firmsca_core::tpcdb::{lex_source_features, TpcDatabase, TpcRecord, VersionSignature};

use super::archives::{gzip, pack_cpio, pack_tar, Tree};
use super::asm;
use super::elf::ElfBuilder;
use super::squash::build_squashfs;

pub const TPCS: [&str; 3] = ["netknot", "cryptwall", "jsonlace"];
pub const VERSIONS: [[&str; 3]; 3] = [
    ["1.0.0", "1.1.0", "2.0.0"],
    ["0.9.8", "0.9.8b", "1.0.1"],
    ["0.5", "0.6", "1.0"],
];

const N_COMMON_STRINGS: usize = 24;
const N_PAIR_STRINGS: usize = 4;
const N_UNIQUE_STRINGS: usize = 10;
const N_COMMON_FUNCTIONS: usize = 10;
const N_UNIQUE_FUNCTIONS: usize = 3;

/// How much of a planted TPC version an image actually carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Completeness {
    Full,
    /// Fraction of strings/functions kept; above the ratio threshold.
    Partial(f64),
    /// Below the TPC-level threshold: an engineered miss.
    Sparse,
    /// Sharing features mostly present, unique features mostly absent:
    /// detected at TPC level with version UNKNOWN.
    VersionBlind,
}

#[derive(Debug, Clone)]
pub struct Plant {
    pub tpc: usize,
    pub version: usize,
    pub completeness: Completeness,
}

pub struct Corpus {
    pub db: TpcDatabase,
    /// `(image, ground truth, expected-to-detect)` triples.
    pub images: Vec<CorpusImage>,
}

pub struct CorpusImage {
    pub image: FirmwareImage,
    pub truth: BTreeSet<(String, String)>,
    pub plants: Vec<Plant>,
}

struct VersionMaterial {
    strings: Vec<String>,
    /// `(name, c_params)` pairs; the feature form is `name(params)`.
    functions: Vec<(String, String)>,
    /// Function bodies keyed by name (instruction words).
    bodies: BTreeMap<String, Vec<u32>>,
}

fn random_word(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let len = rng.gen_range(min..=max);
    (0..len)
        .map(|_| char::from(b'a' + rng.gen_range(0..26u8)))
        .collect()
}

fn unique_word(rng: &mut ChaCha8Rng, seen: &mut BTreeSet<String>, min: usize, max: usize) -> String {
    loop {
        let w = random_word(rng, min, max);
        if seen.insert(w.clone()) {
            return w;
        }
    }
}

/// Multi-word feature string, e.g. `"netknot core buffer vq 1.0.0"`.
fn feature_string(rng: &mut ChaCha8Rng, seen: &mut BTreeSet<String>) -> String {
    let words: Vec<String> = (0..rng.gen_range(2..4))
        .map(|_| unique_word(rng, seen, 5, 9))
        .collect();
    words.join(" ")
}

/// Diamond count per TPC. A chain of D branch diamonds recovers as
/// 2*D + 1 basic blocks, so these tiers keep every TPC's functions
/// outside the other TPCs' 2x block-count bands: cross-TPC CFG
/// candidates prune to nothing and the CFG channel cannot cross-match.
const DIAMOND_TIERS: [std::ops::RangeInclusive<usize>; 3] = [2..=2, 6..=7, 16..=19];

fn filler(rng: &mut ChaCha8Rng, n: usize) -> Vec<u32> {
    (0..n)
        .map(|_| match rng.gen_range(0..4u8) {
            0 => asm::addi(rng.gen_range(5..15), rng.gen_range(5..15), rng.gen_range(-512..512)),
            1 => asm::xori(rng.gen_range(5..15), rng.gen_range(5..15), rng.gen_range(0..1024)),
            2 => asm::add(rng.gen_range(5..15), rng.gen_range(5..15), rng.gen_range(5..15)),
            _ => asm::sw(rng.gen_range(5..15), 2, rng.gen_range(0..24) * 4),
        })
        .collect()
}

/// A chain of branch diamonds with attribute-rich filler. The block
/// count is structural (2*diamonds + 1); instruction mix, immediates,
/// and stack offsets vary per function.
fn function_body(rng: &mut ChaCha8Rng, tier: usize) -> Vec<u32> {
    let diamonds = rng.gen_range(DIAMOND_TIERS[tier].clone());
    let mut words = Vec::new();
    for _ in 0..diamonds {
        let lead = rng.gen_range(1..6);
        words.extend(filler(rng, lead));
        let arm = rng.gen_range(1..4);
        words.push(asm::beq(rng.gen_range(5..15), 0, (arm as i32 + 1) * 4));
        words.extend(filler(rng, arm));
    }
    let tail = rng.gen_range(1..6);
    words.extend(filler(rng, tail));
    words.push(asm::RET);
    words
}

fn material(rng: &mut ChaCha8Rng, seen: &mut BTreeSet<String>, tier: usize) -> [VersionMaterial; 3] {
    let common_strings: Vec<String> = (0..N_COMMON_STRINGS).map(|_| feature_string(rng, seen)).collect();
    let pair01: Vec<String> = (0..N_PAIR_STRINGS).map(|_| feature_string(rng, seen)).collect();
    let pair12: Vec<String> = (0..N_PAIR_STRINGS).map(|_| feature_string(rng, seen)).collect();
    let uniques: Vec<Vec<String>> = (0..3)
        .map(|_| (0..N_UNIQUE_STRINGS).map(|_| feature_string(rng, seen)).collect())
        .collect();

    let common_functions: Vec<(String, String)> = (0..N_COMMON_FUNCTIONS)
        .map(|_| (unique_word(rng, seen, 8, 14), pick_params(rng)))
        .collect();
    let unique_functions: Vec<Vec<(String, String)>> = (0..3)
        .map(|_| {
            (0..N_UNIQUE_FUNCTIONS)
                .map(|_| (unique_word(rng, seen, 8, 14), pick_params(rng)))
                .collect()
        })
        .collect();

    let common_bodies: BTreeMap<String, Vec<u32>> = common_functions
        .iter()
        .map(|(name, _)| (name.clone(), function_body(rng, tier)))
        .collect();

    std::array::from_fn(|v| {
        let mut strings = common_strings.clone();
        if v <= 1 {
            strings.extend(pair01.iter().cloned());
        }
        if v >= 1 {
            strings.extend(pair12.iter().cloned());
        }
        strings.extend(uniques[v].iter().cloned());

        let mut functions = common_functions.clone();
        functions.extend(unique_functions[v].iter().cloned());

        let mut bodies = common_bodies.clone();
        for (name, _) in &unique_functions[v] {
            bodies.insert(name.clone(), function_body(rng, tier));
        }
        VersionMaterial {
            strings,
            functions,
            bodies,
        }
    })
}

fn pick_params(rng: &mut ChaCha8Rng) -> String {
    const CHOICES: [&str; 5] = ["int a", "const char *s", "void", "int a, int b", "unsigned long n"];
    CHOICES[rng.gen_range(0..CHOICES.len())].to_string()
}

/// C source for one version, fed through the real lexer when building
/// the database.
fn render_source(mat: &VersionMaterial) -> String {
    let mut src = String::from("#include <stddef.h>\n\n");
    src.push_str("static const char *feature_table[] = {\n");
    for s in &mat.strings {
        src.push_str(&format!("    \"{s}\",\n"));
    }
    src.push_str("    NULL,\n};\n\n");
    for (name, params) in &mat.functions {
        src.push_str(&format!(
            "int {name}({params}) {{\n    return feature_table[0] != NULL;\n}}\n\n"
        ));
    }
    src
}

/// ELF carrying a subset of the version's material.
fn render_elf(
    mat: &VersionMaterial,
    keep_strings: &[String],
    keep_functions: &[(String, String)],
) -> Vec<u8> {
    let mut text = Vec::new();
    let mut builder = ElfBuilder::riscv32();
    let mut offsets = Vec::new();
    // Dispatcher first: calls every kept function, so entry discovery
    // works on the same bytes in monolithic form.
    let dispatcher_len = keep_functions.len() + 1;
    let mut at = dispatcher_len as u32 * 4;
    for (name, _) in keep_functions {
        offsets.push((name.clone(), at));
        at += mat.bodies[name].len() as u32 * 4;
    }
    for (i, (_, off)) in offsets.iter().enumerate() {
        let delta = *off as i32 - (i as i32 * 4);
        text.extend_from_slice(&asm::jal(1, delta).to_le_bytes());
    }
    text.extend_from_slice(&asm::RET.to_le_bytes());
    for (name, _) in keep_functions {
        text.extend_from_slice(&asm::words_to_bytes(&mat.bodies[name]));
    }
    let strings: Vec<&str> = keep_strings.iter().map(|s| s.as_str()).collect();
    builder.add_rodata_strings(&strings);
    let mut builder = builder.text(text).func("entry", 0);
    for (name, off) in &offsets {
        builder = builder.func(name, *off);
    }
    builder.build()
}

fn selection<T: Clone>(rng: &mut ChaCha8Rng, items: &[T], fraction: f64) -> Vec<T> {
    let keep = ((items.len() as f64) * fraction).ceil() as usize;
    let mut indexes: Vec<usize> = (0..items.len()).collect();
    indexes.shuffle(rng);
    indexes.truncate(keep.min(items.len()));
    indexes.sort_unstable();
    indexes.into_iter().map(|i| items[i].clone()).collect()
}

fn plant_elf(rng: &mut ChaCha8Rng, mat: &VersionMaterial, completeness: Completeness) -> Vec<u8> {
    let (string_frac, fn_frac) = match completeness {
        Completeness::Full => (1.0, 1.0),
        Completeness::Partial(f) => (f, f),
        Completeness::Sparse => (0.40, 0.40),
        Completeness::VersionBlind => (0.0, 0.0), // handled below
    };
    match completeness {
        Completeness::VersionBlind => {
            // Nearly all common material, almost none of the unique.
            let common: Vec<String> = mat.strings[..N_COMMON_STRINGS].to_vec();
            let uniques: Vec<String> = mat.strings[mat.strings.len() - N_UNIQUE_STRINGS..].to_vec();
            let mut keep_strings = common;
            keep_strings.extend(selection(rng, &uniques, 0.2));
            let keep_functions: Vec<(String, String)> =
                mat.functions[..N_COMMON_FUNCTIONS].to_vec();
            render_elf(mat, &keep_strings, &keep_functions)
        }
        _ => {
            let keep_strings = selection(rng, &mat.strings, string_frac);
            let keep_functions = selection(rng, &mat.functions, fn_frac);
            render_elf(mat, &keep_strings, &keep_functions)
        }
    }
}

fn noise_file(rng: &mut ChaCha8Rng, seen: &mut BTreeSet<String>) -> Vec<u8> {
    let mut out = String::new();
    for _ in 0..rng.gen_range(5..15) {
        out.push_str(&feature_string(rng, seen));
        out.push('\n');
    }
    out.into_bytes()
}

/// Deterministic build of the whole corpus.
pub fn build_corpus() -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_CAFE);
    let mut seen = BTreeSet::new();

    let materials: Vec<[VersionMaterial; 3]> =
        (0..3).map(|t| material(&mut rng, &mut seen, t)).collect();

    // Database: lex the rendered sources, extract ACFGs from the full
    // fixture ELFs.
    let mut db = TpcDatabase::new();
    for (t, tpc) in TPCS.iter().enumerate() {
        let mut record = TpcRecord::new(*tpc);
        record.license = Some(if t == 0 { "GPL-2.0-only" } else { "MIT" }.to_string());
        for (v, version) in VERSIONS[t].iter().enumerate() {
            let mat = &materials[t][v];
            let source = render_source(mat);
            let lexed = lex_source_features(&source);
            let mut sig = VersionSignature::new(*version);
            sig.strings = lexed.strings;
            sig.functions = lexed.functions;
            let elf_bytes = render_elf(mat, &mat.strings, &mat.functions);
            let elf = parse_elf(&elf_bytes).expect("fixture ELF parses");
            let features = features_from_elf(&elf_bytes, &elf, 4);
            sig.acfgs = features
                .acfgs
                .into_iter()
                .filter(|a| a.function_id != "entry")
                .collect();
            record.versions.push(sig);
        }
        db.upsert_tpc(record).unwrap();
    }

    // Twenty images cycling containers and completeness.
    let mut plans: Vec<Vec<Plant>> = Vec::new();
    let mut combo = 0usize;
    for i in 0..20 {
        let completeness = match i {
            7 => Completeness::Sparse,
            11 | 15 => Completeness::VersionBlind,
            _ if i % 3 == 1 => Completeness::Partial(0.7),
            _ => Completeness::Full,
        };
        let mut plants = vec![Plant {
            tpc: combo % 3,
            version: (combo / 3) % 3,
            completeness,
        }];
        combo += 1;
        let second_ok = !matches!(
            completeness,
            Completeness::Sparse | Completeness::VersionBlind
        );
        if second_ok {
            let second = Plant {
                tpc: (combo + 1) % 3,
                version: (combo / 2) % 3,
                completeness: Completeness::Full,
            };
            if second.tpc != plants[0].tpc {
                plants.push(second);
            }
            combo += 1;
        }
        plans.push(plants);
    }

    let mut images = Vec::new();
    for (i, plants) in plans.iter().enumerate() {
        let mut tree: Tree = BTreeMap::new();
        for (k, plant) in plants.iter().enumerate() {
            let mat = &materials[plant.tpc][plant.version];
            let elf = plant_elf(&mut rng, mat, plant.completeness);
            tree.insert(format!("bin/{}{k}", TPCS[plant.tpc]), elf);
        }
        tree.insert("etc/notes.cfg".into(), noise_file(&mut rng, &mut seen));

        let monolithic = i == 13 || i == 19;
        let bytes = if monolithic {
            let plant = &plants[0];
            let mat = &materials[plant.tpc][plant.version];
            monolithic_blob(mat)
        } else {
            match i % 4 {
                0 => build_squashfs(&tree, 4096, true),
                1 => pack_cpio(&tree),
                2 => pack_tar(&tree),
                _ => gzip(&pack_cpio(&tree)),
            }
        };

        let plants = if monolithic { vec![plants[0].clone()] } else { plants.clone() };
        let truth: BTreeSet<(String, String)> = plants
            .iter()
            .map(|p| (TPCS[p.tpc].to_string(), VERSIONS[p.tpc][p.version].to_string()))
            .collect();
        images.push(CorpusImage {
            image: FirmwareImage {
                id: format!("fw-{i:02}"),
                name: format!("fw-{i:02}.bin"),
                bytes,
                metadata: None,
            },
            truth,
            plants,
        });
    }

    Corpus { db, images }
}

/// Flat code blob plus string table, padded with filler code so at
/// least three quarters of the words decode.
fn monolithic_blob(mat: &VersionMaterial) -> Vec<u8> {
    let mut words = Vec::new();
    let mut offsets = Vec::new();
    let dispatcher_len = mat.bodies.len() + 1;
    let mut at = dispatcher_len as u32 * 4;
    for (name, body) in &mat.bodies {
        offsets.push((name.clone(), at));
        at += body.len() as u32 * 4;
    }
    for (i, (_, off)) in offsets.iter().enumerate() {
        words.push(asm::jal(1, *off as i32 - (i as i32 * 4)));
    }
    words.push(asm::RET);
    for body in mat.bodies.values() {
        words.extend_from_slice(body);
    }
    let mut bytes = asm::words_to_bytes(&words);
    let mut string_bytes = Vec::new();
    for s in &mat.strings {
        string_bytes.extend_from_slice(s.as_bytes());
        string_bytes.push(0);
    }
    // Keep the decode-probe ratio comfortably above the 0.70 default.
    let code_words = bytes.len() / 4;
    let string_words = string_bytes.len().div_ceil(4);
    let needed = ((string_words * 3).saturating_sub(code_words)).max(16);
    for _ in 0..needed {
        bytes.extend_from_slice(&asm::NOP.to_le_bytes());
    }
    bytes.extend_from_slice(&string_bytes);
    bytes
}
