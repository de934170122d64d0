//! Text formats: circuit files (TOML), sample files and CSV tables.
//!
//! Complex matrices are stored row-major as `"re,im"` strings. Floats are
//! written with Rust's shortest round-trip formatting, so a write/read cycle
//! reproduces every entry bit for bit.

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GbsError, Result};
use crate::gaussian::{CircuitSpec, SqueezerSpec};
use crate::linalg::CMatrix;
use crate::samplers::{ModelTag, SampleSet};
use crate::threshold::ClickPattern;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezerEntry {
    pub r: f64,
    pub phase: f64,
    pub modes: [usize; 2],
}

/// Serialized form of a [`CircuitSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFile {
    pub modes: usize,
    pub detector_efficiency: f64,
    pub dark_count_prob: f64,
    pub transmission: Vec<f64>,
    pub unitary: Vec<String>,
    #[serde(default)]
    pub squeezers: Vec<SqueezerEntry>,
}

pub fn format_complex(z: Complex64) -> String {
    format!("{:?},{:?}", z.re, z.im)
}

pub fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected \"re,im\", got {s:?}"))?;
    let re: f64 = re.trim().parse().map_err(|e| format!("bad real part {re:?}: {e}"))?;
    let im: f64 = im.trim().parse().map_err(|e| format!("bad imaginary part {im:?}: {e}"))?;
    Ok(Complex64::new(re, im))
}

pub fn matrix_to_strings(u: &CMatrix) -> Vec<String> {
    let mut out = Vec::with_capacity(u.len());
    for i in 0..u.nrows() {
        for j in 0..u.ncols() {
            out.push(format_complex(u[(i, j)]));
        }
    }
    out
}

pub fn matrix_from_strings(entries: &[String], m: usize) -> Result<CMatrix> {
    if entries.len() != m * m {
        return Err(GbsError::Config(format!("unitary: expected {} entries for {m} modes, got {}", m * m, entries.len())));
    }
    let vals = entries
        .iter()
        .enumerate()
        .map(|(k, s)| parse_complex(s).map_err(|e| GbsError::Config(format!("unitary[{k}]: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(CMatrix::from_row_slice(m, m, &vals))
}

impl CircuitFile {
    pub fn from_circuit(c: &CircuitSpec) -> Self {
        CircuitFile {
            modes: c.mode_count,
            detector_efficiency: c.detector_efficiency,
            dark_count_prob: c.dark_count_prob,
            transmission: c.transmission.clone(),
            unitary: matrix_to_strings(&c.unitary),
            squeezers: c
                .squeezers
                .iter()
                .map(|s| SqueezerEntry { r: s.r, phase: s.phase, modes: [s.modes.0, s.modes.1] })
                .collect(),
        }
    }

    pub fn to_circuit(&self) -> Result<CircuitSpec> {
        let c = CircuitSpec {
            mode_count: self.modes,
            unitary: matrix_from_strings(&self.unitary, self.modes)?,
            transmission: self.transmission.clone(),
            detector_efficiency: self.detector_efficiency,
            dark_count_prob: self.dark_count_prob,
            squeezers: self.squeezers.iter().map(|s| SqueezerSpec::new(s.r, s.phase, (s.modes[0], s.modes[1]))).collect(),
        };
        c.validate()?;
        Ok(c)
    }
}

pub fn circuit_to_toml(c: &CircuitSpec) -> String {
    toml::to_string(&CircuitFile::from_circuit(c)).expect("circuit file serializes")
}

pub fn circuit_from_toml(text: &str) -> Result<CircuitSpec> {
    let file: CircuitFile = toml::from_str(text).map_err(|e| GbsError::Config(e.to_string()))?;
    file.to_circuit()
}

/// First 16 hex digits of SHA-256 over `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Stable fingerprint of a circuit's canonical serialization.
pub fn circuit_fingerprint(c: &CircuitSpec) -> String {
    short_hash(circuit_to_toml(c).as_bytes())
}

pub fn write_samples<W: Write>(set: &SampleSet, mut w: W) -> Result<()> {
    writeln!(w, "# fingerprint: {}", set.fingerprint)?;
    writeln!(w, "# model: {}", set.model)?;
    writeln!(w, "# modes: {}", set.mode_count)?;
    writeln!(w, "# seed: {}", set.seed)?;
    match set.phase_index {
        Some(i) => writeln!(w, "# phase_index: {i}")?,
        None => writeln!(w, "# phase_index: none")?,
    }
    for p in &set.patterns {
        writeln!(w, "{p}")?;
    }
    Ok(())
}

pub fn samples_to_string(set: &SampleSet) -> String {
    let mut buf = Vec::new();
    write_samples(set, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_samples<R: BufRead>(r: R) -> Result<SampleSet> {
    let mut fingerprint = None;
    let mut model = None;
    let mut modes: Option<usize> = None;
    let mut seed = None;
    let mut phase_index: Option<Option<usize>> = None;
    let mut patterns = Vec::new();
    let ferr = |line: usize, message: String| GbsError::Format { line, message };

    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if let Some(header) = line.strip_prefix('#') {
            if !patterns.is_empty() {
                return Err(ferr(lineno, "header line after sample rows".into()));
            }
            let (key, value) = header
                .split_once(':')
                .ok_or_else(|| ferr(lineno, format!("header must be '# key: value', got {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "fingerprint" => fingerprint = Some(value.to_string()),
                "model" => model = Some(value.parse::<ModelTag>().map_err(|e| ferr(lineno, e))?),
                "modes" => modes = Some(value.parse().map_err(|e| ferr(lineno, format!("bad mode count: {e}")))?),
                "seed" => seed = Some(value.parse().map_err(|e| ferr(lineno, format!("bad seed: {e}")))?),
                "phase_index" => {
                    phase_index = Some(if value == "none" {
                        None
                    } else {
                        Some(value.parse().map_err(|e| ferr(lineno, format!("bad phase index: {e}")))?)
                    })
                }
                other => return Err(ferr(lineno, format!("unknown header key {other:?}"))),
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let m = modes.ok_or_else(|| ferr(lineno, "sample row before '# modes' header".into()))?;
        let p: ClickPattern = line.parse().map_err(|e| ferr(lineno, e))?;
        if p.len() != m {
            return Err(ferr(lineno, format!("row has {} modes, header says {m}", p.len())));
        }
        patterns.push(p);
    }
    let missing = |k: &str| ferr(0, format!("missing header '{k}'"));
    Ok(SampleSet {
        fingerprint: fingerprint.ok_or_else(|| missing("fingerprint"))?,
        model: model.ok_or_else(|| missing("model"))?,
        mode_count: modes.ok_or_else(|| missing("modes"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        phase_index: phase_index.ok_or_else(|| missing("phase_index"))?,
        patterns,
    })
}

pub fn save_samples(set: &SampleSet, path: &Path) -> Result<()> {
    std::fs::write(path, samples_to_string(set))?;
    Ok(())
}

pub fn load_samples(path: &Path) -> Result<SampleSet> {
    let f = std::fs::File::open(path)?;
    read_samples(std::io::BufReader::new(f))
}

/// Serializes rows as CSV with a header taken from the row type.
pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| GbsError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| GbsError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}
