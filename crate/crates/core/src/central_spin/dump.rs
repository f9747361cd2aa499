//! Binary state dumps.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic   4 bytes  "ESEC"
//! version u32      1
//! n_spins u32
//! count   u32      number of sectors that follow
//! per sector, ordered by (magnons, memory):
//!   memory  u8     0 = up, 1 = down
//!   magnons u32
//!   len     u64    C(n_spins, magnons)
//!   len x (re f64, im f64)
//! ```

use std::io::{Read, Write};

use nalgebra::DVector;

use super::state::{SectorKey, SectorState};
use super::{CentralSpinError, Memory, HARD_MAX_SPINS};
use crate::maxent::C64;

pub const DUMP_MAGIC: &[u8; 4] = b"ESEC";
pub const DUMP_VERSION: u32 = 1;

fn io(e: std::io::Error) -> CentralSpinError {
    CentralSpinError::Dump(e.to_string())
}

pub fn write_dump<W: Write>(mut out: W, state: &SectorState) -> Result<(), CentralSpinError> {
    let sectors: Vec<_> = state.sectors().collect();
    out.write_all(DUMP_MAGIC).map_err(io)?;
    out.write_all(&DUMP_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(state.n_spins() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&(sectors.len() as u32).to_le_bytes()).map_err(io)?;
    for (key, v) in sectors {
        let mem: u8 = match key.memory {
            Memory::Up => 0,
            Memory::Down => 1,
        };
        out.write_all(&[mem]).map_err(io)?;
        out.write_all(&(key.magnons as u32).to_le_bytes()).map_err(io)?;
        out.write_all(&(v.len() as u64).to_le_bytes()).map_err(io)?;
        for a in v.iter() {
            out.write_all(&a.re.to_le_bytes()).map_err(io)?;
            out.write_all(&a.im.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N], CentralSpinError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(io)?;
    Ok(buf)
}

pub fn read_dump<R: Read>(mut input: R) -> Result<SectorState, CentralSpinError> {
    let magic: [u8; 4] = read_array(&mut input)?;
    if &magic != DUMP_MAGIC {
        return Err(CentralSpinError::Dump("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut input)?);
    if version != DUMP_VERSION {
        return Err(CentralSpinError::Dump(format!("unsupported version {version}")));
    }
    let n_spins = u32::from_le_bytes(read_array(&mut input)?) as usize;
    if n_spins == 0 || n_spins > HARD_MAX_SPINS {
        return Err(CentralSpinError::Dump(format!("unsupported spin count {n_spins}")));
    }
    let count = u32::from_le_bytes(read_array(&mut input)?);
    let mut state = SectorState::zero(n_spins);
    for _ in 0..count {
        let [mem] = read_array::<_, 1>(&mut input)?;
        let memory = match mem {
            0 => Memory::Up,
            1 => Memory::Down,
            other => return Err(CentralSpinError::Dump(format!("bad memory tag {other}"))),
        };
        let magnons = u32::from_le_bytes(read_array(&mut input)?) as usize;
        let len = u64::from_le_bytes(read_array(&mut input)?) as usize;
        if magnons > n_spins || len != super::binomial(n_spins, magnons) {
            return Err(CentralSpinError::Dump(format!(
                "sector ({magnons} magnons) has length {len}"
            )));
        }
        let mut v = DVector::zeros(len);
        for a in v.iter_mut() {
            let re = f64::from_le_bytes(read_array(&mut input)?);
            let im = f64::from_le_bytes(read_array(&mut input)?);
            *a = C64::new(re, im);
        }
        state.set_sector(SectorKey::new(memory, magnons), v)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_layout() {
        let mut s = SectorState::product(3, Memory::Down, 0b001).unwrap();
        s.set_sector(
            SectorKey::new(Memory::Up, 2),
            DVector::from_vec(vec![C64::new(0.1, -0.2), C64::new(0.0, 0.5), C64::new(1.0, 0.0)]),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dump(&mut buf, &s).unwrap();
        assert_eq!(&buf[..4], b"ESEC");
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        // First sector is (1 magnon, down).
        assert_eq!(buf[16], 1);
        assert_eq!(buf.len(), 16 + 2 * 13 + 16 * (3 + 3));
        assert_eq!(read_dump(&buf[..]).unwrap(), s);
        assert!(read_dump(&buf[..10]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_dump(&bad[..]).is_err());
    }
}
