//! Circular byte genomes and their mutation operators.
//!
//! A genome is a ring of 8-bit sites. Offspring are produced by point
//! mutation followed by segment duplication/deletion; both operators take an
//! explicit random stream so results depend only on the stream state.

use std::fmt;
use std::io::{self, Read, Write};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

/// Number of distinct symbols a site can hold.
pub const ALPHABET_SIZE: usize = 256;

#[derive(Debug, Error)]
pub enum GenomeError {
    #[error("genome length {length} outside [{min}, {max}]")]
    LengthOutOfBounds { length: usize, min: usize, max: usize },
    #[error("invalid mutation parameters: {0}")]
    InvalidParams(String),
    #[error("corrupt genome data at byte offset {offset}: {reason}")]
    Corrupt { offset: u64, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A circular string of sites in `[0, 255]`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Genome {
    sites: Vec<u8>,
}

impl fmt::Debug for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Genome(len={})", self.sites.len())
    }
}

impl Genome {
    /// Wraps raw sites. No length bounds are enforced here so that short
    /// hand-built genomes can be decoded; mutation keeps lengths in bounds.
    pub fn from_sites(sites: Vec<u8>) -> Self {
        Genome { sites }
    }

    pub fn sites(&self) -> &[u8] {
        &self.sites
    }

    pub fn into_sites(self) -> Vec<u8> {
        self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Site at `index` modulo the genome length.
    pub fn site(&self, index: usize) -> u8 {
        self.sites[index % self.sites.len()]
    }

    /// Duplicates the circular segment `[start, start + len)` and inserts the
    /// copy right after it. Returns `false` (leaving the genome untouched) if
    /// the result would exceed `max_len` or the segment is longer than the
    /// genome.
    pub fn duplicate_segment(&mut self, start: usize, len: usize, max_len: usize) -> bool {
        let n = self.sites.len();
        if n == 0 || len > n || n + len > max_len {
            return false;
        }
        let start = start % n;
        let copy: Vec<u8> = (0..len).map(|i| self.sites[(start + i) % n]).collect();
        let insert_at = (start + len) % n;
        // insert_at == 0 with a wrapped segment appends after the last site,
        // which is the same ring position.
        let insert_at = if insert_at == 0 { n } else { insert_at };
        self.sites.splice(insert_at..insert_at, copy);
        true
    }

    /// Removes the circular segment `[start, start + len)`. Returns `false`
    /// if the result would be shorter than `min_len`.
    pub fn delete_segment(&mut self, start: usize, len: usize, min_len: usize) -> bool {
        let n = self.sites.len();
        if n == 0 || len > n || n - len < min_len {
            return false;
        }
        let start = start % n;
        let end = start + len;
        if end <= n {
            self.sites.drain(start..end);
        } else {
            let head = end - n;
            self.sites.truncate(start);
            self.sites.drain(..head);
        }
        true
    }

    /// Lowercase hex, two characters per site.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.sites.len() * 2);
        for b in &self.sites {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }

    pub fn from_hex(text: &str) -> Result<Self, GenomeError> {
        let text = text.trim();
        let bytes = text.as_bytes();
        if !bytes.len().is_multiple_of(2) {
            return Err(GenomeError::Corrupt {
                offset: bytes.len() as u64,
                reason: "odd number of hex digits".into(),
            });
        }
        let digit = |offset: usize| -> Result<u8, GenomeError> {
            (bytes[offset] as char)
                .to_digit(16)
                .map(|d| d as u8)
                .ok_or_else(|| GenomeError::Corrupt {
                    offset: offset as u64,
                    reason: format!("invalid hex digit {:?}", bytes[offset] as char),
                })
        };
        let mut sites = Vec::with_capacity(bytes.len() / 2);
        for i in (0..bytes.len()).step_by(2) {
            sites.push(digit(i)? << 4 | digit(i + 1)?);
        }
        Ok(Genome { sites })
    }

    /// Binary record: 8-byte little-endian site count, then the raw sites.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.sites.len() as u64).to_le_bytes())?;
        w.write_all(&self.sites)
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, GenomeError> {
        let mut header = [0u8; 8];
        read_exact_at(&mut r, &mut header, 0)?;
        let len = u64::from_le_bytes(header);
        if len > MAX_PLAUSIBLE_SITES {
            return Err(GenomeError::Corrupt {
                offset: 0,
                reason: format!("implausible site count {len}"),
            });
        }
        let mut sites = vec![0u8; len as usize];
        read_exact_at(&mut r, &mut sites, 8)?;
        Ok(Genome { sites })
    }
}

const MAX_PLAUSIBLE_SITES: u64 = 1 << 32;

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], base: u64) -> Result<(), GenomeError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(GenomeError::Corrupt {
                    offset: base + filled as u64,
                    reason: format!("unexpected end of data, expected {} more bytes", buf.len() - filled),
                })
            }
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// Writes one hex genome per line.
pub fn write_population<W: Write>(mut w: W, genomes: &[Genome]) -> io::Result<()> {
    for g in genomes {
        writeln!(w, "{}", g.to_hex())?;
    }
    Ok(())
}

/// Reads a hex population file. Error offsets are absolute within `text`.
pub fn read_population(text: &str) -> Result<Vec<Genome>, GenomeError> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        if !body.trim().is_empty() && !body.starts_with('#') {
            let lead = (body.len() - body.trim_start().len()) as u64;
            let g = Genome::from_hex(body).map_err(|e| match e {
                GenomeError::Corrupt { offset: o, reason } => GenomeError::Corrupt {
                    offset: offset + lead + o,
                    reason,
                },
                other => other,
            })?;
            out.push(g);
        }
        offset += line.len() as u64;
    }
    Ok(out)
}

/// Parameters of the three mutation operators and the genome size bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct MutationParams {
    pub point_rate: f64,
    pub copy_delete_rate: f64,
    pub segment_min: usize,
    pub segment_max: usize,
    pub size_min: usize,
    pub size_max: usize,
}

impl Default for MutationParams {
    fn default() -> Self {
        MutationParams {
            point_rate: 0.005,
            copy_delete_rate: 0.000_02,
            segment_min: 128,
            segment_max: 512,
            size_min: 2_000,
            size_max: 20_000,
        }
    }
}

impl MutationParams {
    /// Both rates zero; handy for selection-only experiments.
    pub fn none() -> Self {
        MutationParams {
            point_rate: 0.0,
            copy_delete_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GenomeError> {
        for (name, rate) in [("point_rate", self.point_rate), ("copy_delete_rate", self.copy_delete_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(GenomeError::InvalidParams(format!("{name} = {rate} not in [0, 1]")));
            }
        }
        if self.segment_min == 0 || self.segment_min > self.segment_max {
            return Err(GenomeError::InvalidParams(format!(
                "segment range [{}, {}] is empty",
                self.segment_min, self.segment_max
            )));
        }
        if self.size_min > self.size_max {
            return Err(GenomeError::InvalidParams(format!(
                "size range [{}, {}] is empty",
                self.size_min, self.size_max
            )));
        }
        Ok(())
    }
}

/// A genome of `length` uniformly random sites.
pub fn new_random_genome<R: Rng + ?Sized>(
    length: usize,
    params: &MutationParams,
    rng: &mut R,
) -> Result<Genome, GenomeError> {
    if length < params.size_min || length > params.size_max {
        return Err(GenomeError::LengthOutOfBounds {
            length,
            min: params.size_min,
            max: params.size_max,
        });
    }
    let mut sites = vec![0u8; length];
    rng.fill(&mut sites[..]);
    Ok(Genome { sites })
}

/// Replaces each site with a fresh uniform symbol with probability
/// `point_rate`. The redraw may return the old symbol.
pub fn point_mutate<R: Rng + ?Sized>(g: &Genome, params: &MutationParams, rng: &mut R) -> Genome {
    let mut out = g.clone();
    if params.point_rate > 0.0 {
        for site in out.sites.iter_mut() {
            if rng.random_bool(params.point_rate) {
                *site = rng.random();
            }
        }
    }
    out
}

/// Segment duplication and deletion.
///
/// Copy and delete event counts are independent `Binomial(len, rate)` draws.
/// All copies are applied first, then all deletions; each event picks a
/// uniform length in `[segment_min, segment_max]` and a uniform circular
/// start on the current genome. Events that would leave the size bounds are
/// skipped.
pub fn copy_delete_mutate<R: Rng + ?Sized>(g: &Genome, params: &MutationParams, rng: &mut R) -> Genome {
    let mut out = g.clone();
    if params.copy_delete_rate <= 0.0 || g.is_empty() {
        return out;
    }
    let n = g.len() as u64;
    let copies = Binomial::new(n, params.copy_delete_rate)
        .expect("validated rate")
        .sample(rng);
    let deletes = Binomial::new(n, params.copy_delete_rate)
        .expect("validated rate")
        .sample(rng);
    for _ in 0..copies {
        let len = rng.random_range(params.segment_min..=params.segment_max);
        let start = rng.random_range(0..out.len());
        out.duplicate_segment(start, len, params.size_max);
    }
    for _ in 0..deletes {
        let len = rng.random_range(params.segment_min..=params.segment_max);
        let start = rng.random_range(0..out.len());
        out.delete_segment(start, len, params.size_min);
    }
    out
}

/// Offspring operator: point mutation, then copy/delete.
pub fn mutate<R: Rng + ?Sized>(g: &Genome, params: &MutationParams, rng: &mut R) -> Genome {
    let pointed = point_mutate(g, params, rng);
    copy_delete_mutate(&pointed, params, rng)
}
