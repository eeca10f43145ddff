//! Truncated half-plane grid `[-Lx, Lx] x [0, Ly]`, scalar fields with a
//! boundary trace, norms and snapshot I/O.
//!
//! Field storage is `(ny, nx)`: row `j = 0` is the slip line `y = 0`.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"MFLB";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 4 + 4 + 8 + 4;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("snapshot format error: {0}")]
    Format(String),
    #[error("non-finite value at node (i = {i}, j = {j})")]
    NonFinite { i: usize, j: usize },
    #[error("snapshot I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlaneGrid {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
}

impl HalfPlaneGrid {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self, GridError> {
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(GridError::Invalid(format!("extents Lx = {lx}, Ly = {ly} must be positive")));
        }
        if nx < 3 || ny < 3 {
            return Err(GridError::Invalid(format!("need at least 3 nodes per axis, got {nx} x {ny}")));
        }
        Ok(Self { lx, ly, nx, ny })
    }

    /// Lx = 100, Ly = 50, 801 x 201 nodes (dx = dy = 0.25).
    pub fn desk_default() -> Self {
        Self {
            lx: 100.0,
            ly: 50.0,
            nx: 801,
            ny: 201,
        }
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.lx / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.lx + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    /// Trapezoid weight of node `i` along `x`.
    pub fn x_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.nx {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }

    /// Same grid with both spacings halved.
    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * self.nx - 1,
            ny: 2 * self.ny - 1,
            ..*self
        }
    }

    fn same_as(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.lx.to_bits() == other.lx.to_bits()
            && self.ly.to_bits() == other.ly.to_bits()
    }

    pub fn ensure_same(&self, other: &Self) -> Result<(), GridError> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(GridError::Dimension(format!(
                "grid {}x{} on [{}, {}] vs {}x{} on [{}, {}]",
                self.nx, self.ny, self.lx, self.ly, other.nx, other.ny, other.lx, other.ly
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: HalfPlaneGrid,
    values: Array2<f64>,
    time: f64,
}

impl ScalarField {
    pub fn zeros(grid: HalfPlaneGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: HalfPlaneGrid, value: f64) -> Self {
        Self {
            grid,
            values: Array2::from_elem((grid.ny, grid.nx), value),
            time: 0.0,
        }
    }

    pub fn from_fn(grid: HalfPlaneGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.ny, grid.nx), |(j, i)| f(grid.x(i), grid.y(j)));
        Self {
            grid,
            values,
            time: 0.0,
        }
    }

    /// Wraps an `(ny, nx)` array; rejects wrong shapes and non-finite entries.
    pub fn from_array(grid: HalfPlaneGrid, values: Array2<f64>) -> Result<Self, GridError> {
        if values.dim() != (grid.ny, grid.nx) {
            return Err(GridError::Dimension(format!(
                "array shape {:?} does not match grid ({}, {})",
                values.dim(),
                grid.ny,
                grid.nx
            )));
        }
        let field = Self {
            grid,
            values,
            time: 0.0,
        };
        field.check_finite()?;
        Ok(field)
    }

    pub fn grid(&self) -> &HalfPlaneGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Value at column `i` (x) and row `j` (y).
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[[j, i]]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    /// First non-finite node in row-major order.
    pub fn check_finite(&self) -> Result<(), GridError> {
        for ((j, i), v) in self.values.indexed_iter() {
            if !v.is_finite() {
                return Err(GridError::NonFinite { i, j });
            }
        }
        Ok(())
    }

    /// Writes `x,y,value` rows with a header.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), GridError> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(out, "x,y,value")?;
        for j in 0..self.grid.ny {
            let y = self.grid.y(j);
            for i in 0..self.grid.nx {
                writeln!(out, "{},{},{}", self.grid.x(i), y, self.values[[j, i]])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    grid: HalfPlaneGrid,
    values: Array1<f64>,
}

impl BoundaryTrace {
    pub fn from_fn(grid: HalfPlaneGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: Array1::from_shape_fn(grid.nx, |i| f(grid.x(i))),
        }
    }

    pub fn from_vec(grid: HalfPlaneGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.nx {
            return Err(GridError::Dimension(format!(
                "trace length {} does not match nx = {}",
                values.len(),
                grid.nx
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { i, j: 0 });
        }
        Ok(Self {
            grid,
            values: Array1::from(values),
        })
    }

    pub fn grid(&self) -> &HalfPlaneGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("trace storage is contiguous")
    }
}

pub fn trace(f: &ScalarField) -> BoundaryTrace {
    BoundaryTrace {
        grid: f.grid,
        values: f.values.row(0).to_owned(),
    }
}

pub fn sup_norm(f: &ScalarField) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn trace_sup_norm(t: &BoundaryTrace) -> f64 {
    t.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Trapezoid rule for `int |t(x)| dx`.
pub fn l1_trace_norm(t: &BoundaryTrace) -> f64 {
    t.values
        .iter()
        .enumerate()
        .map(|(i, v)| t.grid.x_weight(i) * v.abs())
        .sum()
}

pub fn sup_diff(f: &ScalarField, g: &ScalarField) -> Result<f64, GridError> {
    f.grid.ensure_same(&g.grid)?;
    Ok(f
        .values
        .iter()
        .zip(g.values.iter())
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

pub fn trace_sup_diff(a: &BoundaryTrace, b: &BoundaryTrace) -> Result<f64, GridError> {
    a.grid.ensure_same(&b.grid)?;
    Ok(a.values
        .iter()
        .zip(b.values.iter())
        .fold(0.0, |m, (u, v)| m.max((u - v).abs())))
}

/// Serializes a field; the trailing block repeats row 0 as the stored trace.
pub fn encode_snapshot(f: &ScalarField) -> Vec<u8> {
    let g = f.grid;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * g.nx * (g.ny + 1));
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&g.lx.to_le_bytes());
    buf.extend_from_slice(&g.ly.to_le_bytes());
    buf.extend_from_slice(&(g.nx as u32).to_le_bytes());
    buf.extend_from_slice(&(g.ny as u32).to_le_bytes());
    buf.extend_from_slice(&f.time.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for v in f.values.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in f.values.row(0) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N], GridError> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| GridError::Format(format!("truncated while reading {what}")))?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice has length N"))
    }

    fn u32(&mut self, what: &str) -> Result<u32, GridError> {
        Ok(u32::from_le_bytes(self.take::<4>(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64, GridError> {
        Ok(f64::from_le_bytes(self.take::<8>(what)?))
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<ScalarField, GridError> {
    let mut c = Cursor { bytes, pos: 0 };
    if &c.take::<4>("magic")? != SNAPSHOT_MAGIC {
        return Err(GridError::Format("bad magic bytes".into()));
    }
    let version = c.u32("version")?;
    if version != SNAPSHOT_VERSION {
        return Err(GridError::Format(format!("unsupported version {version}")));
    }
    let lx = c.f64("Lx")?;
    let ly = c.f64("Ly")?;
    let nx = c.u32("nx")? as usize;
    let ny = c.u32("ny")? as usize;
    let time = c.f64("time")?;
    let _reserved = c.u32("reserved")?;
    let grid = HalfPlaneGrid::new(lx, ly, nx, ny).map_err(|e| GridError::Format(format!("header: {e}")))?;
    let expected = HEADER_LEN + 8 * nx * (ny + 1);
    if bytes.len() != expected {
        return Err(GridError::Format(format!(
            "payload has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let mut values = Array2::zeros((ny, nx));
    for v in values.iter_mut() {
        *v = c.f64("payload")?;
    }
    for i in 0..nx {
        let t = c.f64("trace block")?;
        if t.to_bits() != values[[0, i]].to_bits() {
            return Err(GridError::Format(format!("trace block disagrees with row 0 at i = {i}")));
        }
    }
    let field = ScalarField::from_array(grid, values).map_err(|e| GridError::Format(e.to_string()))?;
    Ok(field.with_time(time))
}

pub fn write_snapshot(f: &ScalarField, path: impl AsRef<Path>) -> Result<(), GridError> {
    fs::write(path, encode_snapshot(f))?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<ScalarField, GridError> {
    decode_snapshot(&fs::read(path)?)
}

/// Reads a snapshot and checks that it lives on `expected`.
pub fn read_snapshot_on(path: impl AsRef<Path>, expected: &HalfPlaneGrid) -> Result<ScalarField, GridError> {
    let f = read_snapshot(path)?;
    expected.ensure_same(f.grid())?;
    Ok(f)
}
