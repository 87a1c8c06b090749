//! The MTHF v1 field file: one line of JSON header, a newline, then the
//! samples as little-endian `f64`, row-major over the axes, component
//! innermost. Complex payloads (`"real": false`) store spectral coefficients
//! with real and imaginary parts interleaved.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GridField, PeriodicDomain, SpectralField};
use crate::error::{PolyhamError, Result};

pub const MAGIC: &str = "MTHF";
pub const VERSION: u32 = 1;

/// Phase-space layout tag `{"n": n, "p": p}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutTag {
    pub n: usize,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub magic: String,
    pub version: u32,
    pub p: usize,
    pub m: usize,
    pub periods: Vec<f64>,
    pub resolution: Vec<usize>,
    pub real: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Grid(GridField),
    Spectral(SpectralField),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MthfFile {
    pub layout: Option<LayoutTag>,
    pub payload: Payload,
}

impl MthfFile {
    pub fn grid(field: GridField, layout: Option<LayoutTag>) -> Self {
        MthfFile {
            layout,
            payload: Payload::Grid(field),
        }
    }

    pub fn into_grid(self) -> Result<GridField> {
        match self.payload {
            Payload::Grid(g) => Ok(g),
            Payload::Spectral(_) => Err(PolyhamError::Format(
                "expected a real grid field, found spectral coefficients".into(),
            )),
        }
    }

    fn header(&self) -> Header {
        let (domain, m, real) = match &self.payload {
            Payload::Grid(g) => (g.domain(), g.m(), true),
            Payload::Spectral(s) => (s.domain(), s.m(), false),
        };
        Header {
            magic: MAGIC.into(),
            version: VERSION,
            p: domain.p(),
            m,
            periods: domain.periods().to_vec(),
            resolution: domain.resolution().to_vec(),
            real,
            layout: self.layout,
        }
    }
}

pub fn write<W: Write>(mut w: W, file: &MthfFile) -> Result<()> {
    serde_json::to_writer(&mut w, &file.header())?;
    w.write_all(b"\n")?;
    match &file.payload {
        Payload::Grid(g) => {
            for v in g.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Payload::Spectral(s) => {
            for c in s.coeffs() {
                w.write_all(&c.re.to_le_bytes())?;
                w.write_all(&c.im.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read<R: Read>(r: R) -> Result<MthfFile> {
    let mut r = BufReader::new(r);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.pop() != Some(b'\n') {
        return Err(PolyhamError::Format("missing header terminator".into()));
    }
    let header: Header = serde_json::from_slice(&line)?;
    if header.magic != MAGIC || header.version != VERSION {
        return Err(PolyhamError::Format(format!(
            "unsupported magic/version {}/{}",
            header.magic, header.version
        )));
    }
    if header.p != header.periods.len() {
        return Err(PolyhamError::Format("p disagrees with periods".into()));
    }
    if let Some(tag) = header.layout {
        if tag.p != header.p || tag.n * (tag.p + 1) != header.m {
            return Err(PolyhamError::Format(format!(
                "layout {{n: {}, p: {}}} inconsistent with m = {}",
                tag.n, tag.p, header.m
            )));
        }
    }
    let domain = PeriodicDomain::new(header.periods, header.resolution)?;

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let scalars = domain.num_points() * header.m * if header.real { 1 } else { 2 };
    if bytes.len() != scalars * 8 {
        return Err(PolyhamError::Format(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            scalars * 8
        )));
    }
    let floats: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();

    let payload = if header.real {
        Payload::Grid(GridField::new(domain, header.m, floats)?)
    } else {
        let coeffs = floats
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        Payload::Spectral(SpectralField::new(domain, header.m, coeffs, false)?)
    };
    Ok(MthfFile {
        layout: header.layout,
        payload,
    })
}

pub fn save(path: impl AsRef<Path>, file: &MthfFile) -> Result<()> {
    write(BufWriter::new(File::create(path)?), file)
}

pub fn load(path: impl AsRef<Path>) -> Result<MthfFile> {
    read(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{dft, random};

    fn bytes_of(file: &MthfFile) -> Vec<u8> {
        let mut buf = Vec::new();
        write(&mut buf, file).unwrap();
        buf
    }

    #[test]
    fn grid_round_trip_is_bit_exact() {
        let d = PeriodicDomain::new(vec![0.1 + 0.2, std::f64::consts::PI], vec![6, 4]).unwrap();
        let u = random::band_limited(&d, 3, 2, false, &mut random::substream(1, 1));
        let file = MthfFile::grid(u, Some(LayoutTag { n: 1, p: 2 }));
        let buf = bytes_of(&file);
        let back = read(&buf[..]).unwrap();
        assert_eq!(back, file);
        assert_eq!(bytes_of(&back), buf);
    }

    #[test]
    fn spectral_round_trip() {
        let d = PeriodicDomain::uniform(vec![1.0], 8).unwrap();
        let u = random::band_limited(&d, 2, 3, false, &mut random::substream(1, 2));
        let s = dft(&u);
        let file = MthfFile {
            layout: None,
            payload: Payload::Spectral(s.clone()),
        };
        let back = read(&bytes_of(&file)[..]).unwrap();
        match back.payload {
            Payload::Spectral(b) => assert_eq!(b.coeffs(), s.coeffs()),
            _ => panic!("wrong payload"),
        }
    }

    #[test]
    fn header_is_single_json_line() {
        let d = PeriodicDomain::uniform(vec![2.0], 4).unwrap();
        let buf = bytes_of(&MthfFile::grid(GridField::zeros(d, 1), None));
        let nl = buf.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&buf[..nl]).unwrap();
        assert_eq!(header["magic"], "MTHF");
        assert_eq!(header["version"], 1);
        assert_eq!(header["real"], true);
        assert_eq!(buf.len() - nl - 1, 4 * 8);
    }

    #[test]
    fn rejects_corrupt_files() {
        let d = PeriodicDomain::uniform(vec![2.0], 4).unwrap();
        let mut buf = bytes_of(&MthfFile::grid(GridField::zeros(d.clone(), 1), None));
        buf.pop();
        assert!(matches!(read(&buf[..]), Err(PolyhamError::Format(_))));

        let bad_layout = MthfFile::grid(GridField::zeros(d, 3), Some(LayoutTag { n: 1, p: 1 }));
        assert!(read(&bytes_of(&bad_layout)[..]).is_err());
        assert!(read(&b"{\"magic\":\"NOPE\"}\n"[..]).is_err());
    }
}
