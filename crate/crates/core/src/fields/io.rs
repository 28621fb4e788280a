//! CSV and binary serialization of fields.
//!
//! Binary layout, all little endian: `u32 nx, u32 ny, f64 x_min, x_max,
//! y_min, y_max`, then `nx * ny` values of `f64` in row-major order.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{Boundary, FieldError, Grid, ScalarField, VectorField};

const HEADER_LEN: usize = 8 + 4 * 8;

impl ScalarField {
    /// Writes `x,y,value` rows; floats use the shortest round-trip form.
    pub fn write_csv(&self, path: &Path) -> Result<(), FieldError> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "x,y,value")?;
        for k in 0..self.grid.len() {
            let c = self.grid.center_of(k);
            writeln!(w, "{:?},{:?},{:?}", c[0], c[1], self.data[k])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.len());
        out.extend_from_slice(&(g.nx as u32).to_le_bytes());
        out.extend_from_slice(&(g.ny as u32).to_le_bytes());
        for v in [g.x_min, g.x_max, g.y_min, g.y_max] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the binary dump. The boundary mode is not stored and must be
    /// supplied by the caller.
    pub fn from_bytes(bytes: &[u8], boundary: Boundary) -> Result<Self, FieldError> {
        if bytes.len() < HEADER_LEN {
            return Err(FieldError::Format(format!("{} bytes is shorter than the header", bytes.len())));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let (nx, ny) = (u32_at(0), u32_at(4));
        let grid = Grid::new(nx, ny, [f64_at(8), f64_at(16)], [f64_at(24), f64_at(32)], boundary)?;
        let expected = HEADER_LEN + 8 * grid.len();
        if bytes.len() != expected {
            return Err(FieldError::Format(format!(
                "expected {expected} bytes for {nx} x {ny}, got {}",
                bytes.len()
            )));
        }
        let data = (0..grid.len()).map(|k| f64_at(HEADER_LEN + 8 * k)).collect();
        Ok(ScalarField { grid, data })
    }

    pub fn write_binary(&self, path: &Path) -> Result<(), FieldError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_binary(path: &Path, boundary: Boundary) -> Result<Self, FieldError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes, boundary)
    }
}

impl VectorField {
    /// Writes `x,y,vx,vy` rows.
    pub fn write_csv(&self, path: &Path) -> Result<(), FieldError> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "x,y,vx,vy")?;
        for k in 0..self.grid.len() {
            let c = self.grid.center_of(k);
            writeln!(w, "{:?},{:?},{:?},{:?}", c[0], c[1], self.x[k], self.y[k])?;
        }
        w.flush()?;
        Ok(())
    }
}
