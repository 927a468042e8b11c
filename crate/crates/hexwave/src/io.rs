//! HNY1 binary field dumps, CSV tables and small text sidecars.
//!
//! HNY1 layout, all integers little endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `HNY1` |
//! | 4 | version `u32 = 1` |
//! | 1 | kind `u8`: 0 Maxwell triple, 1 envelope spinor, 2 scalar |
//! | 4 | `nx: u32` |
//! | 4 | `ny: u32` |
//! | 1 | `ncomp: u8` (3, 2 or 1 to match the kind) |
//! | `16·nx·ny·ncomp` | `f64` pairs `(re, im)`, component after component, each row-major `[ix * ny + iy]` |

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::envelope::{EnvelopeField, TransportObservables};
use crate::error::{Error, Result};
use crate::lattice::Vec2;
use crate::maxwell_te::{MaxwellState, MaxwellTrajectory};
use crate::modes::{Continuation, StationaryMode};

pub const MAGIC: [u8; 4] = *b"HNY1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpKind {
    Maxwell = 0,
    Spinor = 1,
    Scalar = 2,
}

impl DumpKind {
    pub fn components(self) -> usize {
        match self {
            DumpKind::Maxwell => 3,
            DumpKind::Spinor => 2,
            DumpKind::Scalar => 1,
        }
    }

    fn from_u8(b: u8) -> Result<Self> {
        match b {
            0 => Ok(DumpKind::Maxwell),
            1 => Ok(DumpKind::Spinor),
            2 => Ok(DumpKind::Scalar),
            _ => Err(Error::Format(format!("unknown dump kind {b}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub kind: DumpKind,
    pub nx: u32,
    pub ny: u32,
    pub data: Vec<Vec<C64>>,
}

impl FieldDump {
    pub fn new(kind: DumpKind, nx: usize, ny: usize, data: Vec<Vec<C64>>) -> Result<Self> {
        let (nx32, ny32) = (
            u32::try_from(nx).map_err(|_| Error::InvalidInput(format!("nx = {nx} does not fit in u32")))?,
            u32::try_from(ny).map_err(|_| Error::InvalidInput(format!("ny = {ny} does not fit in u32")))?,
        );
        if data.len() != kind.components() {
            return Err(Error::InvalidInput(format!(
                "{kind:?} dump needs {} components, got {}",
                kind.components(),
                data.len()
            )));
        }
        if let Some(c) = data.iter().find(|c| c.len() != nx * ny) {
            return Err(Error::InvalidInput(format!("component has {} values, expected {nx}×{ny}", c.len())));
        }
        Ok(Self {
            kind,
            nx: nx32,
            ny: ny32,
            data,
        })
    }

    pub fn scalar(nx: usize, ny: usize, values: &[f64]) -> Result<Self> {
        Self::new(DumpKind::Scalar, nx, ny, vec![values.iter().map(|&v| C64::new(v, 0.0)).collect()])
    }

    pub fn from_envelope(field: &EnvelopeField) -> Self {
        let g = &field.grid;
        Self::new(DumpKind::Spinor, g.n1, g.n2, vec![field.alpha1.clone(), field.alpha2.clone()])
            .expect("envelope components match the grid")
    }

    pub fn from_mode(mode: &StationaryMode) -> Self {
        let g = &mode.grid;
        Self::new(DumpKind::Spinor, g.n1, g.n2, vec![mode.chi1.clone(), mode.chi2.clone()])
            .expect("mode components match the grid")
    }

    /// Physical field `Ψ(x, t)` at the supercell nodes.
    pub fn from_maxwell(state: &MaxwellState) -> Self {
        let n = state.cell.len();
        let mut data = vec![Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for idx in 0..n {
            let v = state.physical(idx);
            for (c, d) in data.iter_mut().enumerate() {
                d.push(v[c]);
            }
        }
        Self::new(DumpKind::Maxwell, state.cell.n1, state.cell.n2, data).expect("state matches its supercell")
    }

    pub fn len(&self) -> usize {
        self.nx as usize * self.ny as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let mut head = Vec::with_capacity(HEADER_LEN);
        head.extend_from_slice(&MAGIC);
        head.extend_from_slice(&VERSION.to_le_bytes());
        head.push(self.kind as u8);
        head.extend_from_slice(&self.nx.to_le_bytes());
        head.extend_from_slice(&self.ny.to_le_bytes());
        head.push(self.data.len() as u8);
        w.write_all(&head)?;
        let mut buf = Vec::with_capacity(16 * self.len());
        for comp in &self.data {
            buf.clear();
            for z in comp {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut head = [0u8; HEADER_LEN];
        r.read_exact(&mut head)
            .map_err(|e| Error::Format(format!("truncated HNY1 header: {e}")))?;
        if head[0..4] != MAGIC {
            return Err(Error::Format("bad magic, expected HNY1".into()));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!("unsupported HNY1 version {version}")));
        }
        let kind = DumpKind::from_u8(head[8])?;
        let nx = u32::from_le_bytes(head[9..13].try_into().expect("4 bytes")) as usize;
        let ny = u32::from_le_bytes(head[13..17].try_into().expect("4 bytes")) as usize;
        let ncomp = head[17] as usize;
        if ncomp != kind.components() {
            return Err(Error::Format(format!("{kind:?} dump declares {ncomp} components")));
        }
        let count = nx
            .checked_mul(ny)
            .and_then(|n| n.checked_mul(ncomp))
            .ok_or_else(|| Error::Format("dump dimensions overflow".into()))?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != 16 * count {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected {}",
                payload.len(),
                16 * count
            )));
        }
        let n = nx * ny;
        let data = (0..ncomp)
            .map(|c| {
                payload[16 * c * n..16 * (c + 1) * n]
                    .chunks_exact(16)
                    .map(|b| {
                        C64::new(
                            f64::from_le_bytes(b[0..8].try_into().expect("8 bytes")),
                            f64::from_le_bytes(b[8..16].try_into().expect("8 bytes")),
                        )
                    })
                    .collect()
            })
            .collect();
        Self::new(kind, nx, ny, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }
}

/// Writes a header line and one comma-separated row per entry. Floats use
/// the shortest representation that round-trips.
pub fn write_csv(w: &mut impl Write, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(&mut w, header, rows)?;
    w.flush()?;
    Ok(())
}

/// Header and numeric rows of a CSV written by [`write_csv`].
pub fn read_csv(r: impl Read) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = BufReader::new(r).lines();
    let header: Vec<String> = match lines.next() {
        Some(l) => l?.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(Error::Format("empty CSV".into())),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("row {}: {e}", i + 2)))?;
        if row.len() != header.len() {
            return Err(Error::Format(format!("row {} has {} fields", i + 2, row.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub const BANDS_HEADER: [&str; 4] = ["kx", "ky", "band_index", "omega"];
pub const GAP_HEADER: [&str; 2] = ["delta", "gap"];
pub const OBSERVABLES_HEADER: [&str; 5] = ["T", "norm", "cx", "cy", "edge_fraction"];
pub const CENTROID_HEADER: [&str; 4] = ["t", "cx", "cy", "edge_fraction"];
pub const POWER_HEADER: [&str; 4] = ["mu", "power", "asymmetry", "residual"];

/// `(k, band index, ω)` rows.
pub fn band_rows(bands: &[(Vec2, usize, f64)]) -> Vec<Vec<f64>> {
    bands.iter().map(|(k, b, w)| vec![k.x, k.y, *b as f64, *w]).collect()
}

pub fn gap_rows(sweep: &[(f64, f64)]) -> Vec<Vec<f64>> {
    sweep.iter().map(|(d, g)| vec![*d, *g]).collect()
}

pub fn observable_rows(obs: &[TransportObservables]) -> Vec<Vec<f64>> {
    obs.iter()
        .map(|o| vec![o.time, o.norm, o.energy_center[0], o.energy_center[1], o.edge_fraction])
        .collect()
}

pub fn centroid_rows(traj: &MaxwellTrajectory) -> Vec<Vec<f64>> {
    traj.centroid_rows().iter().map(|r| r.to_vec()).collect()
}

pub fn power_rows(c: &Continuation) -> Vec<Vec<f64>> {
    c.modes
        .iter()
        .map(|m| vec![m.mu, m.power(), m.asymmetry(), m.residual_norm])
        .collect()
}

/// `key = value` sidecar for a stored mode.
pub fn mode_sidecar(mode: &StationaryMode) -> String {
    format!(
        "kind = {:?}\nmu = {}\np1 = {}\np2 = {}\nresidual = {:e}\npower = {}\nasymmetry = {}\n",
        mode.kind,
        mode.mu,
        mode.p1,
        mode.p2,
        mode.residual_norm,
        mode.power(),
        mode.asymmetry()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_dump() -> FieldDump {
        let v: Vec<C64> = (0..12).map(|i| C64::new(i as f64 * 0.1 - 0.3, (i as f64).sin())).collect();
        let w: Vec<C64> = v.iter().map(|z| z.conj() * 2.0).collect();
        FieldDump::new(DumpKind::Spinor, 3, 4, vec![v, w]).unwrap()
    }

    #[test]
    fn header_layout() {
        let d = sample_dump();
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"HNY1");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(buf[8], 1);
        assert_eq!(u32::from_le_bytes(buf[9..13].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[13..17].try_into().unwrap()), 4);
        assert_eq!(buf[17], 2);
        assert_eq!(buf.len(), 18 + 3 * 4 * 2 * 16);
        let re = f64::from_le_bytes(buf[18..26].try_into().unwrap());
        assert_eq!(re, d.data[0][0].re);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let d = sample_dump();
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        let back = FieldDump::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, d);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn corrupt_dumps_are_rejected() {
        let d = sample_dump();
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(FieldDump::read_from(&mut bad.as_slice()), Err(Error::Format(_))));
        let short = &buf[..buf.len() - 1];
        assert!(matches!(FieldDump::read_from(&mut &short[..]), Err(Error::Format(_))));
        let mut wrong = buf.clone();
        wrong[17] = 3;
        assert!(matches!(FieldDump::read_from(&mut wrong.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![vec![0.1, 1.0 / 3.0, 2.0, -1e-300], vec![1.0, 2.0, 3.0, f64::MAX]];
        let mut buf = Vec::new();
        write_csv(&mut buf, &BANDS_HEADER, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("kx,ky,band_index,omega\n"));
        assert!(text.contains(",2,"));
        let (h, back) = read_csv(buf.as_slice()).unwrap();
        assert_eq!(h, BANDS_HEADER);
        assert_eq!(back, rows);
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let mut buf = Vec::new();
        assert!(write_csv(&mut buf, &GAP_HEADER, &[vec![1.0]]).is_err());
    }
}
