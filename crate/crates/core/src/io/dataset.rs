//! Binary dataset persistence.
//!
//! Layout: magic `FDDCSI01`, then little-endian u32 version, Na, Nc and
//! sample count, then per sample a 32-bit float path gain followed by
//! `Na * Nc` (re, im) float pairs, antenna-major with the carrier index
//! fastest. Samples are stored and generated in single precision, so a
//! write/read cycle is bit-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::channel::ChannelSample;
use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

pub const DATASET_MAGIC: &[u8; 8] = b"FDDCSI01";
pub const DATASET_VERSION: u32 = 1;

pub fn write_dataset(path: &Path, samples: &[&ChannelSample]) -> Result<()> {
    let (na, nc) = match samples.first() {
        Some(s) => (s.matrix.rows(), s.matrix.cols()),
        None => (0, 0),
    };
    if samples
        .iter()
        .any(|s| s.matrix.rows() != na || s.matrix.cols() != nc)
    {
        return Err(Error::Data("mixed sample dimensions in dataset".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&(na as u32).to_le_bytes())?;
    w.write_all(&(nc as u32).to_le_bytes())?;
    w.write_all(&(samples.len() as u32).to_le_bytes())?;
    for s in samples {
        w.write_all(&(s.path_gain_db as f32).to_le_bytes())?;
        for z in s.matrix.data() {
            w.write_all(&(z.re as f32).to_le_bytes())?;
            w.write_all(&(z.im as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a dataset file, tagging each sample with `scenario_tag` and its
/// index as the location id.
pub fn read_dataset(path: &Path, scenario_tag: &str) -> Result<Vec<ChannelSample>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Corruption("file shorter than dataset header".into()))?;
    if &magic != DATASET_MAGIC {
        return Err(Error::Format(format!(
            "bad dataset magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = read_u32(&mut r)?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unknown dataset version {version}")));
    }
    let na = read_u32(&mut r)? as usize;
    let nc = read_u32(&mut r)? as usize;
    let count = read_u32(&mut r)? as usize;
    let mut samples = Vec::with_capacity(count);
    for idx in 0..count {
        let pg = read_f32(&mut r)? as f64;
        let mut data = Vec::with_capacity(na * nc);
        for _ in 0..na * nc {
            let re = read_f32(&mut r)? as f64;
            let im = read_f32(&mut r)? as f64;
            data.push(Complex64::new(re, im));
        }
        samples.push(ChannelSample {
            matrix: ComplexMatrix::from_vec(na, nc, data)?,
            path_gain_db: pg,
            scenario_tag: scenario_tag.to_string(),
            location_id: idx as u64,
        });
    }
    // Trailing bytes mean the header lied about the count.
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Corruption("trailing bytes after last sample".into()));
    }
    Ok(samples)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Corruption("truncated dataset file".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32(r: &mut impl Read) -> Result<f32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Corruption("truncated dataset file".into()))?;
    Ok(f32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_dataset, ScenarioConfig};

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("fddcsi-ds-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn empty_dataset_is_header_only() {
        let path = tmpdir().join("empty.bin");
        write_dataset(&path, &[]).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 24);
        let back = read_dataset(&path, "t:ul").unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn single_2x2_sample_size() {
        let mut c = ScenarioConfig::desk_default();
        c.n_antennas_y = 2;
        c.n_antennas_z = 1;
        c.n_carriers = 2;
        let data = generate_dataset(&c, 3, (0.4, 0.3, 0.3)).unwrap();
        let path = tmpdir().join("one.bin");
        write_dataset(&path, &[&data.train[0].ul]).unwrap();
        // 24-byte header + 4-byte path gain + 2*2 complex entries * 8 bytes.
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 24 + 4 + 32);
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let mut c = ScenarioConfig::desk_default();
        c.n_antennas_y = 2;
        c.n_antennas_z = 2;
        c.n_carriers = 8;
        let data = generate_dataset(&c, 5, (0.6, 0.2, 0.2)).unwrap();
        let samples: Vec<&ChannelSample> = data.train.iter().map(|p| &p.ul).collect();
        let path = tmpdir().join("rt.bin");
        write_dataset(&path, &samples).unwrap();
        let back = read_dataset(&path, &samples[0].scenario_tag).unwrap();
        assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(&back) {
            assert_eq!(a.matrix, b.matrix);
            assert_eq!(a.path_gain_db as f32, b.path_gain_db as f32);
        }
        // Write the read-back samples again: files must match byte for byte.
        let path2 = tmpdir().join("rt2.bin");
        let refs: Vec<&ChannelSample> = back.iter().collect();
        write_dataset(&path2, &refs).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn bad_magic_and_truncation() {
        let path = tmpdir().join("bad.bin");
        std::fs::write(&path, b"NOTMAGIC\x01\x00\x00\x00").unwrap();
        assert!(matches!(
            read_dataset(&path, "t"),
            Err(Error::Format(_))
        ));
        let path2 = tmpdir().join("trunc.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(DATASET_MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 10]); // not enough for one sample
        std::fs::write(&path2, bytes).unwrap();
        assert!(matches!(
            read_dataset(&path2, "t"),
            Err(Error::Corruption(_))
        ));
    }
}
