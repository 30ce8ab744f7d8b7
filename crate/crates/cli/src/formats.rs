//! On-disk formats: coefficient and field-sample text files, spectrum
//! files, the per-order binary block format, and the cache manifest.
//!
//! Everything written here is byte-deterministic for a given input —
//! fixed float formatting, no timestamps, stable ordering — so repeated
//! runs can be compared with `cmp`.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use demask_core::harmonics::{FieldSamples, HarmonicCoeffs, SphereGrid};
use demask_core::linalg::Matrix;
use demask_core::operator::MaskOperatorBlock;

use crate::config::CliError;

/// 17-significant-digit float rendering used by all text formats.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a coefficient table: header `# L=<int>`, then `<l> <m> <re>
/// <im>` lines for the stored orders `m >= 0`.
pub fn write_coeffs(path: &Path, coeffs: &HarmonicCoeffs) -> Result<(), CliError> {
    let mut text = format!("# L={}\n", coeffs.l_max());
    for l in 0..=coeffs.l_max() {
        for m in 0..=l {
            let c = coeffs.get(l, m);
            text.push_str(&format!(
                "{l} {m} {} {}\n",
                fmt_f64(c.re),
                fmt_f64(c.im)
            ));
        }
    }
    fs::write(path, text).map_err(|e| CliError::io(&path.display().to_string(), e))
}

/// Writes field samples: header `# ntheta=<int> nphi=<int>`, then one
/// value per line in row-major (theta, phi) order.
pub fn write_field(path: &Path, samples: &FieldSamples) -> Result<(), CliError> {
    let mut text = format!(
        "# ntheta={} nphi={}\n",
        samples.n_theta(),
        samples.n_phi()
    );
    for t in 0..samples.n_theta() {
        for p in 0..samples.n_phi() {
            text.push_str(&fmt_f64(samples.value(t, p)));
            text.push('\n');
        }
    }
    fs::write(path, text).map_err(|e| CliError::io(&path.display().to_string(), e))
}

/// Writes a per-latitude profile CSV: `z,<columns...>` with one row per
/// grid latitude. `columns` supplies (header, per-row values).
pub fn write_profile_csv(
    path: &Path,
    grid: &SphereGrid,
    columns: &[(&str, Vec<f64>)],
) -> Result<(), CliError> {
    let mut text = String::from("z");
    for (name, values) in columns {
        assert_eq!(values.len(), grid.n_theta(), "profile column length");
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    for t in 0..grid.n_theta() {
        text.push_str(&fmt_f64(grid.node(t)));
        for (_, values) in columns {
            text.push(',');
            text.push_str(&fmt_f64(values[t]));
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::io(&path.display().to_string(), e))
}

/// Reads a spectrum file of `<ell> <C_ell>` lines; requires exactly the
/// degrees `0..=l_max`, each once, in any order.
pub fn read_spectrum(path: &Path, l_max: usize) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(&path.display().to_string(), e))?;
    let mut values = vec![None; l_max + 1];
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(l_str), Some(c_str), None) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(CliError::Config(format!(
                "{}:{}: expected '<ell> <C_ell>', got '{line}'",
                path.display(),
                number + 1
            )));
        };
        let l: usize = l_str.parse().map_err(|e| {
            CliError::Config(format!("{}:{}: bad degree: {e}", path.display(), number + 1))
        })?;
        let c: f64 = c_str.parse().map_err(|e| {
            CliError::Config(format!("{}:{}: bad value: {e}", path.display(), number + 1))
        })?;
        if l > l_max {
            continue; // extra degrees beyond the run's bound are ignored
        }
        if values[l].replace(c).is_some() {
            return Err(CliError::Config(format!(
                "{}: degree {l} appears twice",
                path.display()
            )));
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(l, v)| {
            v.ok_or_else(|| {
                CliError::Config(format!("{}: degree {l} is missing", path.display()))
            })
        })
        .collect()
}

const BLOCK_MAGIC_FIELDS: usize = 3;

/// Writes one operator block: three little-endian `u64` header words
/// `(m, L, J)` followed by the row-major `f64` entries.
pub fn write_block(path: &Path, block: &MaskOperatorBlock) -> Result<(), CliError> {
    let mut bytes =
        Vec::with_capacity(8 * (BLOCK_MAGIC_FIELDS + block.rows() * block.cols()));
    for header in [block.m() as u64, block.l_max() as u64, block.j_max() as u64] {
        bytes.extend_from_slice(&header.to_le_bytes());
    }
    for &v in block.matrix().as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| CliError::io(&path.display().to_string(), e))
}

/// Reads one operator block written by [`write_block`].
pub fn read_block(path: &Path) -> Result<MaskOperatorBlock, CliError> {
    let mut file =
        fs::File::open(path).map_err(|e| CliError::io(&path.display().to_string(), e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| CliError::io(&path.display().to_string(), e))?;
    let fail = |msg: &str| CliError::Io(format!("{}: {msg}", path.display()));
    if bytes.len() < 8 * BLOCK_MAGIC_FIELDS || bytes.len() % 8 != 0 {
        return Err(fail("truncated block file"));
    }
    let word = |i: usize| {
        u64::from_le_bytes(bytes[8 * i..8 * (i + 1)].try_into().expect("8 bytes"))
    };
    let (m, l_max, j_max) = (word(0) as usize, word(1) as usize, word(2) as usize);
    if m > l_max || l_max > j_max {
        return Err(fail("inconsistent block header"));
    }
    let rows = j_max - m + 1;
    let cols = l_max - m + 1;
    let expected = 8 * (BLOCK_MAGIC_FIELDS + rows * cols);
    if bytes.len() != expected {
        return Err(fail("block size does not match its header"));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for i in BLOCK_MAGIC_FIELDS..(BLOCK_MAGIC_FIELDS + rows * cols) {
        values.push(f64::from_bits(word(i)));
    }
    MaskOperatorBlock::from_parts(m, l_max, j_max, Matrix::from_vec(rows, cols, values))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Hex SHA-256 of the mask coefficients' little-endian byte image; ties a
/// block cache to the exact mask it was built from.
pub fn mask_digest(w: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for &v in w {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// The manifest content an operator cache must match to be reused.
pub fn manifest_content(
    l_max: usize,
    k_deg: usize,
    j_max: usize,
    mask_a_deg: f64,
    mask_b_deg: f64,
    digest: &str,
) -> String {
    format!(
        "format=1\nL={l_max}\nK={k_deg}\nJ={j_max}\nmask_a_deg={mask_a_deg:.12}\n\
         mask_b_deg={mask_b_deg:.12}\nmask_sha256={digest}\n"
    )
}

/// Creates `dir` (and parents) if needed.
pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(&dir.display().to_string(), e))
}

/// Writes `content` to `path`, creating the parent directory if needed.
pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, content).map_err(|e| CliError::io(&path.display().to_string(), e))
}

/// Prints to stdout, treating a broken pipe as success so `demask ... |
/// head` is not an error.
pub fn emit(line: &str) {
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use demask_core::mask::MaskCoeffs;
    use demask_core::operator::build_axial_block;

    fn temp_dir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("demask-fmt-{tag}-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn block_files_round_trip() {
        let dir = temp_dir("block");
        let mask = MaskCoeffs::from_coefficients(vec![(4.0 * std::f64::consts::PI).sqrt(), 0.0, 0.25, 0.0, -0.125]);
        let block = build_axial_block(1, &mask, 5, 9).unwrap();
        let path = dir.join("block.bin");
        write_block(&path, &block).unwrap();
        let back = read_block(&path).unwrap();
        assert_eq!(back.m(), block.m());
        assert_eq!(back.l_max(), block.l_max());
        assert_eq!(back.j_max(), block.j_max());
        assert_eq!(back.matrix().as_slice(), block.matrix().as_slice());
        // Corrupt the length: reading must fail, not panic.
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        fs::write(&path, &bytes).unwrap();
        assert!(read_block(&path).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn spectrum_files_are_validated() {
        let dir = temp_dir("spectrum");
        let path = dir.join("spec.txt");
        fs::write(&path, "0 0.0\n2 0.5\n1 1.0\n3 0.25\n").unwrap();
        assert_eq!(
            read_spectrum(&path, 3).unwrap(),
            vec![0.0, 1.0, 0.5, 0.25]
        );
        // Extra high degrees are ignored; missing ones are errors.
        assert!(read_spectrum(&path, 2).is_ok());
        assert!(read_spectrum(&path, 4).is_err());
        fs::write(&path, "0 0.0\n0 1.0\n").unwrap();
        assert!(read_spectrum(&path, 0).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = mask_digest(&[1.0, 2.0, 3.0]);
        let b = mask_digest(&[1.0, 2.0, 3.0]);
        let c = mask_digest(&[1.0, 2.0, 3.0 + 1e-15]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }
}
