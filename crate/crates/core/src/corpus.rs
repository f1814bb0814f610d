//! Parsers for the text input formats: recipe corpora, compound
//! fingerprints, association tables, and category labels.
//!
//! All formats are TSV: `\t` separators, `\n` line endings, UTF-8, no
//! header. Recipe files hold one recipe per line as tab-separated
//! ingredient names; ingredients repeated within one recipe count once.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// Width of a CACTVS-style binary substructure fingerprint.
pub const FINGERPRINT_BITS: usize = 881;

/// Fixed-length binary fingerprint of a chemical compound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fingerprint {
    bits: Vec<u8>,
}

impl Fingerprint {
    pub fn zeros() -> Self {
        Fingerprint {
            bits: vec![0; FINGERPRINT_BITS],
        }
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.len() != FINGERPRINT_BITS {
            return Err(Error::invalid(format!(
                "fingerprint must have {FINGERPRINT_BITS} bits, got {}",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid("fingerprint bits must be 0 or 1"));
        }
        Ok(Fingerprint { bits })
    }

    pub fn get(&self, d: usize) -> u8 {
        self.bits[d]
    }

    pub fn set(&mut self, d: usize) {
        self.bits[d] = 1;
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Bitwise OR, in place.
    pub fn or_with(&mut self, other: &Fingerprint) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = String::with_capacity(FINGERPRINT_BITS);
        for &b in &self.bits {
            s.push(if b == 1 { '1' } else { '0' });
        }
        s
    }
}

/// Dense ingredient vocabulary plus per-ingredient and pairwise recipe
/// counts, as produced by one scan over a recipe corpus.
#[derive(Clone, Debug)]
pub struct CorpusStats {
    pub n_recipes: u64,
    /// Recipes that were empty lines, skipped.
    pub skipped_empty: usize,
    names: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    pair_counts: BTreeMap<(usize, usize), u64>,
}

impl CorpusStats {
    pub fn n_ingredients(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn pair_count(&self, a: usize, b: usize) -> u64 {
        if a == b {
            return 0;
        }
        let key = (a.min(b), a.max(b));
        self.pair_counts.get(&key).copied().unwrap_or(0)
    }

    /// Upper-triangular pair counts in sorted id order.
    pub fn iter_pairs(&self) -> impl Iterator<Item = ((usize, usize), u64)> + '_ {
        self.pair_counts.iter().map(|(&k, &v)| (k, v))
    }

    /// Parses recipe text. `origin` names the source in error messages.
    pub fn parse_str(text: &str, origin: &str) -> Result<CorpusStats> {
        let mut stats = CorpusStats {
            n_recipes: 0,
            skipped_empty: 0,
            names: Vec::new(),
            index: HashMap::new(),
            counts: Vec::new(),
            pair_counts: BTreeMap::new(),
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.is_empty() {
                stats.skipped_empty += 1;
                continue;
            }
            let mut recipe: Vec<usize> = Vec::new();
            for token in line.split('\t') {
                if token.is_empty() {
                    return Err(Error::Parse {
                        path: origin.into(),
                        line: lineno + 1,
                        reason: "empty ingredient name".into(),
                    });
                }
                let id = match stats.index.get(token) {
                    Some(&id) => id,
                    None => {
                        let id = stats.names.len();
                        stats.names.push(token.to_string());
                        stats.index.insert(token.to_string(), id);
                        stats.counts.push(0);
                        id
                    }
                };
                if !recipe.contains(&id) {
                    recipe.push(id);
                }
            }
            stats.n_recipes += 1;
            recipe.sort_unstable();
            for (pos, &a) in recipe.iter().enumerate() {
                stats.counts[a] += 1;
                for &b in &recipe[pos + 1..] {
                    *stats.pair_counts.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
        if stats.n_recipes == 0 {
            return Err(Error::invalid(format!("empty recipe corpus: {origin}")));
        }
        Ok(stats)
    }

    #[cfg(test)]
    pub(crate) fn empty_for_tests() -> CorpusStats {
        CorpusStats {
            n_recipes: 0,
            skipped_empty: 0,
            names: Vec::new(),
            index: HashMap::new(),
            counts: Vec::new(),
            pair_counts: BTreeMap::new(),
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses a recipe corpus file.
pub fn parse_recipe_corpus(path: &Path) -> Result<CorpusStats> {
    CorpusStats::parse_str(&read_to_string(path)?, &path.display().to_string())
}

fn split_two_fields<'a>(line: &'a str, path: &Path, lineno: usize) -> Result<(&'a str, &'a str)> {
    let mut it = line.split('\t');
    let a = it.next().unwrap_or("");
    let b = it.next().unwrap_or("");
    if a.is_empty() || b.is_empty() || it.next().is_some() {
        return Err(Error::Parse {
            path: path.into(),
            line: lineno,
            reason: "expected exactly two tab-separated fields".into(),
        });
    }
    Ok((a, b))
}

/// Parses an association table (`ingredient TAB compound`).
///
/// Rows are returned in file order; deduplication happens during graph
/// construction so the duplicate tally can be reported there.
pub fn parse_associations(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let (ing, comp) = split_two_fields(line, path, lineno + 1)?;
        rows.push((ing.to_string(), comp.to_string()));
    }
    Ok(rows)
}

/// Parses a fingerprint file (`compound TAB 881-character 0/1 string`).
pub fn parse_fingerprints(path: &Path) -> Result<BTreeMap<String, Fingerprint>> {
    let text = read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let (name, bits_str) = split_two_fields(line, path, lineno + 1)?;
        if bits_str.len() != FINGERPRINT_BITS {
            return Err(Error::Parse {
                path: path.into(),
                line: lineno + 1,
                reason: format!(
                    "fingerprint for `{name}` has {} characters, expected {FINGERPRINT_BITS}",
                    bits_str.len()
                ),
            });
        }
        let mut bits = Vec::with_capacity(FINGERPRINT_BITS);
        for ch in bits_str.chars() {
            match ch {
                '0' => bits.push(0),
                '1' => bits.push(1),
                other => {
                    return Err(Error::Parse {
                        path: path.into(),
                        line: lineno + 1,
                        reason: format!("invalid fingerprint character `{other}`"),
                    });
                }
            }
        }
        if map.insert(name.to_string(), Fingerprint::from_bits(bits)?).is_some() {
            return Err(Error::Parse {
                path: path.into(),
                line: lineno + 1,
                reason: format!("duplicate fingerprint for `{name}`"),
            });
        }
    }
    Ok(map)
}

/// Parses a category file (`ingredient TAB category`).
pub fn parse_categories(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let (ing, cat) = split_two_fields(line, path, lineno + 1)?;
        if map.insert(ing.to_string(), cat.to_string()).is_some() {
            return Err(Error::Parse {
                path: path.into(),
                line: lineno + 1,
                reason: format!("duplicate category row for `{ing}`"),
            });
        }
    }
    Ok(map)
}

/// Renders a fingerprint map back to file format (used by the generator).
pub fn fingerprints_to_tsv(map: &BTreeMap<String, Fingerprint>) -> String {
    let mut out = String::new();
    for (name, fp) in map {
        let _ = writeln!(out, "{name}\t{}", fp.to_line());
    }
    out
}
