//! Offline Brand Knowledge Base: load, validate, and query brand entries,
//! plus the label-grounding step used to build retriever training data.

use crate::embed::Vector;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const BKB_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: embedding dimension {got} does not match declared {expected}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: duplicate brand id '{id}'")]
    DuplicateBrandId { line: usize, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One logo variant of a brand. Each variant is indexed separately by the
/// retriever.
#[derive(Debug, Clone, PartialEq)]
pub struct LogoVariant {
    pub variant_index: u32,
    pub embedding: Vector,
}

/// A BKB entry: display name, known aliases, legitimate registrable
/// domains, and zero or more logo-variant embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Brand {
    pub id: String,
    pub name: String,
    pub aliases: Vec<String>,
    pub domains: Vec<String>,
    pub logo_variants: Vec<LogoVariant>,
}

/// Validated brand collection with derived lookup indexes. Immutable after
/// load; safe for unlimited concurrent readers.
#[derive(Debug, Clone)]
pub struct BrandKnowledgeBase {
    dimension: usize,
    brands: Vec<Brand>,
    domain_index: HashMap<String, Vec<usize>>,
    name_index: HashMap<String, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundingResult {
    Matched(String),
    NoMatch,
    Ambiguous(usize),
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderRecord {
    dimension: usize,
    format_version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct LogoVariantRecord {
    variant_index: u32,
    embedding: Vec<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BrandRecord {
    id: String,
    name: String,
    aliases: Vec<String>,
    domains: Vec<String>,
    logo_variants: Vec<LogoVariantRecord>,
}

/// Label normalization used for name/alias matching during grounding:
/// trim surrounding whitespace and punctuation, collapse internal
/// whitespace runs, lowercase.
pub fn normalize_label(label: &str) -> String {
    let trimmed = label.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    trimmed
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn validate_domain(domain: &str, line: usize) -> Result<String, KbError> {
    if domain.is_empty() {
        return Err(KbError::Parse {
            line,
            msg: "empty domain".into(),
        });
    }
    if domain.contains("://") || domain.contains('/') || domain.chars().any(char::is_whitespace) {
        return Err(KbError::Parse {
            line,
            msg: format!("domain '{domain}' must be a bare host (no scheme or path)"),
        });
    }
    Ok(domain.to_lowercase())
}

impl BrandKnowledgeBase {
    pub fn new(dimension: usize, brands: Vec<Brand>) -> Result<Self, KbError> {
        Self::from_brands(dimension, brands.into_iter().map(|b| (0, b)))
    }

    fn from_brands(
        dimension: usize,
        numbered: impl Iterator<Item = (usize, Brand)>,
    ) -> Result<Self, KbError> {
        if dimension == 0 {
            return Err(KbError::Parse {
                line: 1,
                msg: "dimension must be positive".into(),
            });
        }
        let mut brands = Vec::new();
        let mut seen_ids: HashMap<String, usize> = HashMap::new();
        for (line, mut brand) in numbered {
            if brand.id.is_empty() {
                return Err(KbError::Parse {
                    line,
                    msg: "empty brand id".into(),
                });
            }
            if brand.name.is_empty() {
                return Err(KbError::Parse {
                    line,
                    msg: format!("brand '{}' has empty name", brand.id),
                });
            }
            if seen_ids.insert(brand.id.clone(), line).is_some() {
                return Err(KbError::DuplicateBrandId {
                    line,
                    id: brand.id,
                });
            }
            if brand.aliases.iter().any(String::is_empty) {
                return Err(KbError::Parse {
                    line,
                    msg: format!("brand '{}' has an empty alias", brand.id),
                });
            }
            brand.domains = brand
                .domains
                .iter()
                .map(|d| validate_domain(d, line))
                .collect::<Result<_, _>>()?;
            let mut seen_variants = BTreeSet::new();
            for variant in &brand.logo_variants {
                if !seen_variants.insert(variant.variant_index) {
                    return Err(KbError::Parse {
                        line,
                        msg: format!(
                            "brand '{}' repeats logo variant_index {}",
                            brand.id, variant.variant_index
                        ),
                    });
                }
                if variant.embedding.dim() != dimension {
                    return Err(KbError::DimensionMismatch {
                        line,
                        expected: dimension,
                        got: variant.embedding.dim(),
                    });
                }
            }
            brands.push(brand);
        }

        let (domain_index, name_index) = Self::build_indexes(&brands);
        Ok(BrandKnowledgeBase {
            dimension,
            brands,
            domain_index,
            name_index,
        })
    }

    fn build_indexes(
        brands: &[Brand],
    ) -> (HashMap<String, Vec<usize>>, HashMap<String, Vec<usize>>) {
        let mut domain_index: HashMap<String, Vec<usize>> = HashMap::new();
        let mut name_index: HashMap<String, Vec<usize>> = HashMap::new();
        for (pos, brand) in brands.iter().enumerate() {
            for domain in &brand.domains {
                let slot = domain_index.entry(domain.clone()).or_default();
                if !slot.contains(&pos) {
                    slot.push(pos);
                }
            }
            for key in std::iter::once(&brand.name).chain(&brand.aliases) {
                let normalized = normalize_label(key);
                if normalized.is_empty() {
                    continue;
                }
                let slot = name_index.entry(normalized).or_default();
                if !slot.contains(&pos) {
                    slot.push(pos);
                }
            }
        }
        (domain_index, name_index)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn brands(&self) -> &[Brand] {
        &self.brands
    }

    pub fn brand_by_id(&self, id: &str) -> Option<&Brand> {
        self.brands.iter().find(|b| b.id == id)
    }

    /// All brands whose normalized name or alias equals the normalized label.
    pub fn lookup_brands_by_name(&self, label: &str) -> Vec<&str> {
        match self.name_index.get(&normalize_label(label)) {
            Some(positions) => positions
                .iter()
                .map(|&pos| self.brands[pos].id.as_str())
                .collect(),
            None => Vec::new(),
        }
    }

    /// Grounding keeps a label only when it matches exactly one brand.
    pub fn ground_label(&self, label: &str) -> GroundingResult {
        let matches = self.lookup_brands_by_name(label);
        match matches.len() {
            0 => GroundingResult::NoMatch,
            1 => GroundingResult::Matched(matches[0].to_string()),
            n => GroundingResult::Ambiguous(n),
        }
    }

    pub fn brands_by_domain(&self, domain: &str) -> Vec<&Brand> {
        match self.domain_index.get(domain) {
            Some(positions) => positions.iter().map(|&pos| &self.brands[pos]).collect(),
            None => Vec::new(),
        }
    }

    /// Union of every brand's legitimate domains, lowercase.
    pub fn all_known_domains(&self) -> BTreeSet<String> {
        self.brands
            .iter()
            .flat_map(|b| b.domains.iter().cloned())
            .collect()
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, KbError> {
        let reader = BufReader::new(reader);
        let mut lines = reader.lines().enumerate();
        let (_, header_line) = lines.next().ok_or(KbError::Parse {
            line: 1,
            msg: "missing header record".into(),
        })?;
        let header: HeaderRecord =
            serde_json::from_str(&header_line?).map_err(|e| KbError::Parse {
                line: 1,
                msg: format!("bad header record: {e}"),
            })?;
        if header.format_version != BKB_FORMAT_VERSION {
            return Err(KbError::Parse {
                line: 1,
                msg: format!("unsupported format_version {}", header.format_version),
            });
        }

        let mut numbered = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let text = line?;
            if text.trim().is_empty() {
                continue;
            }
            let record: BrandRecord =
                serde_json::from_str(&text).map_err(|e| KbError::Parse {
                    line: line_no,
                    msg: format!("malformed brand record: {e}"),
                })?;
            let logo_variants = record
                .logo_variants
                .into_iter()
                .map(|v| {
                    Vector::from_f32(&v.embedding)
                        .map(|embedding| LogoVariant {
                            variant_index: v.variant_index,
                            embedding,
                        })
                        .map_err(|e| KbError::Parse {
                            line: line_no,
                            msg: format!("bad embedding: {e}"),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            numbered.push((
                line_no,
                Brand {
                    id: record.id,
                    name: record.name,
                    aliases: record.aliases,
                    domains: record.domains,
                    logo_variants,
                },
            ));
        }
        Self::from_brands(header.dimension, numbered.into_iter())
    }

    pub fn to_writer<W: Write>(&self, mut writer: W) -> Result<(), KbError> {
        let header = HeaderRecord {
            dimension: self.dimension,
            format_version: BKB_FORMAT_VERSION,
        };
        serde_json::to_writer(&mut writer, &header).map_err(io_from_json)?;
        writer.write_all(b"\n")?;
        for brand in &self.brands {
            let record = BrandRecord {
                id: brand.id.clone(),
                name: brand.name.clone(),
                aliases: brand.aliases.clone(),
                domains: brand.domains.clone(),
                logo_variants: brand
                    .logo_variants
                    .iter()
                    .map(|v| LogoVariantRecord {
                        variant_index: v.variant_index,
                        embedding: v.embedding.to_f32(),
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut writer, &record).map_err(io_from_json)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn io_from_json(e: serde_json::Error) -> KbError {
    KbError::Io(std::io::Error::new(std::io::ErrorKind::Other, e))
}

/// Load and validate a BKB from its JSON Lines file.
pub fn load_bkb(path: &Path) -> Result<BrandKnowledgeBase, KbError> {
    BrandKnowledgeBase::from_reader(File::open(path)?)
}

pub fn save_bkb(bkb: &BrandKnowledgeBase, path: &Path) -> Result<(), KbError> {
    let mut writer = BufWriter::new(File::create(path)?);
    bkb.to_writer(&mut writer)?;
    writer.flush()?;
    Ok(())
}
