//! Binary Green table files.
//!
//! Layout, all integers and floats little-endian:
//! 8-byte magic `LERWGRN1`, `u64` site count `n`, `n` sites as three `i64`
//! coordinates each, then the `n x n` table as `f64` in row-major order.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::domain::FiniteDomain;
use super::green::GreenTable;
use super::OracleError;
use crate::lattice::LatticePoint;

pub const GREEN_TABLE_MAGIC: [u8; 8] = *b"LERWGRN1";

pub fn write_green_table<W: Write>(table: &GreenTable, mut out: W) -> Result<(), OracleError> {
    let n = table.len();
    out.write_all(&GREEN_TABLE_MAGIC)?;
    out.write_all(&(n as u64).to_le_bytes())?;
    for p in table.domain().sites() {
        for c in p.to_array() {
            out.write_all(&c.to_le_bytes())?;
        }
    }
    for i in 0..n {
        for j in 0..n {
            out.write_all(&table.get_index(i, j).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_green_table<R: Read>(mut input: R) -> Result<GreenTable, OracleError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if magic != GREEN_TABLE_MAGIC {
        return Err(OracleError::Format("bad magic".into()));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    let mut sites = Vec::with_capacity(n);
    for _ in 0..n {
        let mut c = [0i64; 3];
        for v in &mut c {
            input.read_exact(&mut word)?;
            *v = i64::from_le_bytes(word);
        }
        sites.push(LatticePoint::new(c[0], c[1], c[2]));
    }
    let domain = FiniteDomain::from_sites(sites)?;
    let mut values = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            input.read_exact(&mut word)?;
            values[(i, j)] = f64::from_le_bytes(word);
        }
    }
    Ok(GreenTable::from_parts(domain, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_oracle::Oracle;
    use crate::lattice::Ball;

    #[test]
    fn round_trip() {
        let d = FiniteDomain::from_ball(&Ball::centered(2.0).unwrap());
        let g = Oracle::default().green_matrix(&d).unwrap();
        let mut buf = Vec::new();
        write_green_table(&g, &mut buf).unwrap();
        assert_eq!(&buf[..8], b"LERWGRN1");
        assert_eq!(buf.len(), 16 + 27 * 24 + 27 * 27 * 8);
        let back = read_green_table(buf.as_slice()).unwrap();
        assert_eq!(back.domain().sites(), d.sites());
        assert_eq!(back.values(), g.values());
        buf[0] = b'X';
        assert!(read_green_table(buf.as_slice()).is_err());
    }
}
