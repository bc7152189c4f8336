//! From genome to body: samples CPPNs over a voxel lattice.
//!
//! A morphology network is evaluated once per lattice cell at normalized
//! coordinates; positive presence output makes a cell solid, and positive
//! material output makes a solid cell muscle rather than passive tissue.
//! Disconnected bodies are repaired by keeping the largest face-connected
//! component. A controller network is then sampled over the finished body
//! to give each muscle cell a phase offset and the whole robot one shared
//! oscillation frequency (the per-cell values averaged into a scalar).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};

use crate::cppn::{Coords, CppnGenome, GenomeKind, InvalidGenome};
use crate::math;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Lower end of the controller frequency range, hertz.
pub const FREQ_MIN: f64 = 0.5;
/// Upper end of the controller frequency range, hertz.
pub const FREQ_MAX: f64 = 4.0;

/// What occupies one lattice cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Material {
    Empty,
    Passive,
    Muscle,
}

impl Material {
    pub fn is_present(self) -> bool {
        self != Material::Empty
    }

    fn as_byte(self) -> u8 {
        match self {
            Material::Empty => 0,
            Material::Passive => 1,
            Material::Muscle => 2,
        }
    }
}

/// Dense voxel lattice. Cells are stored x-fastest: index
/// `x + nx * (y + ny * z)`, which is also the order of the text export
/// within each z layer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct VoxelGrid {
    resolution: (usize, usize, usize),
    cells: Vec<Material>,
}

impl VoxelGrid {
    /// A grid filled with one material.
    pub fn filled(resolution: (usize, usize, usize), fill: Material) -> Self {
        let (nx, ny, nz) = resolution;
        assert!(nx > 0 && ny > 0 && nz > 0, "resolution axes must be positive");
        VoxelGrid { resolution, cells: vec![fill; nx * ny * nz] }
    }

    /// Wraps an existing cell buffer; `cells.len()` must equal the cell
    /// count of `resolution`.
    pub fn from_cells(resolution: (usize, usize, usize), cells: Vec<Material>) -> Self {
        let (nx, ny, nz) = resolution;
        assert!(nx > 0 && ny > 0 && nz > 0, "resolution axes must be positive");
        assert_eq!(cells.len(), nx * ny * nz, "cell buffer does not match resolution");
        VoxelGrid { resolution, cells }
    }

    pub fn resolution(&self) -> (usize, usize, usize) {
        self.resolution
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Material] {
        &self.cells
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        let (nx, ny, _) = self.resolution;
        x + nx * (y + ny * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> Material {
        self.cells[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, m: Material) {
        let i = self.index(x, y, z);
        self.cells[i] = m;
    }

    /// Number of non-empty cells.
    pub fn present_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_present()).count()
    }

    /// Text export: `nx ny nz` header, then one `./P/M` character per
    /// cell, written as z-major layers (a blank line between layers, rows
    /// along x).
    pub fn to_text(&self) -> String {
        let (nx, ny, nz) = self.resolution;
        let mut out = String::new();
        out.push_str(&alloc::format!("{nx} {ny} {nz}\n"));
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    out.push(match self.get(x, y, z) {
                        Material::Empty => '.',
                        Material::Passive => 'P',
                        Material::Muscle => 'M',
                    });
                }
                out.push('\n');
            }
            if z + 1 < nz {
                out.push('\n');
            }
        }
        out
    }

    /// Parses the [`to_text`] format. Blank lines are ignored.
    ///
    /// [`to_text`]: VoxelGrid::to_text
    pub fn from_text(text: &str) -> Result<Self, GridParseError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(GridParseError::MissingHeader)?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| GridParseError::BadHeader))
            .collect::<Result<_, _>>()?;
        let [nx, ny, nz] = dims[..] else {
            return Err(GridParseError::BadHeader);
        };
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(GridParseError::BadHeader);
        }
        let mut grid = VoxelGrid::filled((nx, ny, nz), Material::Empty);
        for z in 0..nz {
            for y in 0..ny {
                let line = lines.next().ok_or(GridParseError::TooFewRows)?;
                let chars: Vec<char> = line.trim().chars().collect();
                if chars.len() != nx {
                    return Err(GridParseError::BadRowLength { z, y });
                }
                for (x, c) in chars.iter().enumerate() {
                    let m = match c {
                        '.' => Material::Empty,
                        'P' => Material::Passive,
                        'M' => Material::Muscle,
                        _ => return Err(GridParseError::BadCell { z, y, x }),
                    };
                    grid.set(x, y, z, m);
                }
            }
        }
        Ok(grid)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GridParseError {
    MissingHeader,
    BadHeader,
    TooFewRows,
    BadRowLength { z: usize, y: usize },
    BadCell { z: usize, y: usize, x: usize },
}

impl fmt::Display for GridParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridParseError::MissingHeader => f.write_str("missing header line"),
            GridParseError::BadHeader => f.write_str("header is not three positive integers"),
            GridParseError::TooFewRows => f.write_str("fewer rows than the header promises"),
            GridParseError::BadRowLength { z, y } => {
                write!(f, "row y={y} of layer z={z} has the wrong length")
            }
            GridParseError::BadCell { z, y, x } => {
                write!(f, "unrecognized cell character at x={x} y={y} z={z}")
            }
        }
    }
}

impl core::error::Error for GridParseError {}

/// Open-loop controller for one body: a phase per muscle cell and one
/// shared oscillator frequency.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ControllerMap {
    /// Per-cell phase in `[-pi, pi]`, indexed like the grid's cells.
    /// `Some` exactly where the grid has muscle.
    pub phases: Vec<Option<f64>>,
    /// Shared clock frequency in `[FREQ_MIN, FREQ_MAX]` hertz.
    pub global_frequency: f64,
}

impl ControllerMap {
    pub fn phase(&self, cell_index: usize) -> Option<f64> {
        self.phases[cell_index]
    }
}

/// Content digest identifying a body plan: equal grids, equal ids.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MorphologyId([u8; 16]);

impl MorphologyId {
    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        MorphologyId(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(32);
        for b in self.0 {
            s.push_str(&alloc::format!("{b:02x}"));
        }
        s
    }

    pub fn from_hex(hex: &str) -> Option<Self> {
        if hex.len() != 32 {
            return None;
        }
        let mut bytes = [0u8; 16];
        for (i, chunk) in hex.as_bytes().chunks(2).enumerate() {
            let s = core::str::from_utf8(chunk).ok()?;
            bytes[i] = u8::from_str_radix(s, 16).ok()?;
        }
        Some(MorphologyId(bytes))
    }
}

impl fmt::Display for MorphologyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for MorphologyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MorphologyId({})", self.to_hex())
    }
}

#[cfg(feature = "serde")]
impl Serialize for MorphologyId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

#[cfg(feature = "serde")]
impl<'de> Deserialize<'de> for MorphologyId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        MorphologyId::from_hex(&s)
            .ok_or_else(|| serde::de::Error::custom("expected 32 hex characters"))
    }
}

/// Things that can go wrong when expressing a genome.
#[derive(Clone, Debug, PartialEq)]
pub enum ExpressError {
    /// Genome kind does not fit the operation (morphology vs controller).
    WrongGenomeKind,
    Invalid(InvalidGenome),
}

impl fmt::Display for ExpressError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpressError::WrongGenomeKind => f.write_str("genome kind does not fit this operation"),
            ExpressError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ExpressError {}

impl From<InvalidGenome> for ExpressError {
    fn from(e: InvalidGenome) -> Self {
        ExpressError::Invalid(e)
    }
}

/// Normalized coordinates of a lattice cell: each axis mapped linearly to
/// `[-1, 1]` (a single-cell axis maps to 0), `r` the Euclidean norm.
fn cell_coords(x: usize, y: usize, z: usize, res: (usize, usize, usize)) -> Coords {
    fn norm(i: usize, n: usize) -> f64 {
        if n <= 1 {
            0.0
        } else {
            2.0 * (i as f64) / ((n - 1) as f64) - 1.0
        }
    }
    let cx = norm(x, res.0);
    let cy = norm(y, res.1);
    let cz = norm(z, res.2);
    Coords { x: cx, y: cy, z: cz, r: math::sqrt(cx * cx + cy * cy + cz * cz) }
}

/// Samples a morphology genome over the lattice and repairs connectivity.
///
/// A cell is present iff the squashed presence output is `> 0`, muscle iff
/// the material output is also `> 0`. Of the face-connected (6-neighbor)
/// components of present cells, only the largest survives; ties go to the
/// component whose first cell has the lowest linear index. An all-empty
/// result is legal.
pub fn express_morphology(
    genome: &CppnGenome,
    resolution: (usize, usize, usize),
) -> Result<VoxelGrid, ExpressError> {
    if genome.kind != GenomeKind::Morphology {
        return Err(ExpressError::WrongGenomeKind);
    }
    let program = genome.compile()?;
    let (nx, ny, nz) = resolution;
    let mut grid = VoxelGrid::filled(resolution, Material::Empty);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let out = program.eval(cell_coords(x, y, z, resolution));
                let material = if out[0] > 0.0 {
                    if out[1] > 0.0 {
                        Material::Muscle
                    } else {
                        Material::Passive
                    }
                } else {
                    Material::Empty
                };
                grid.set(x, y, z, material);
            }
        }
    }
    retain_largest_component(&mut grid);
    Ok(grid)
}

/// In-place repair: keep only the largest face-connected component of
/// present cells (ties by lowest first-cell index), empty the rest.
fn retain_largest_component(grid: &mut VoxelGrid) {
    let (nx, ny, nz) = grid.resolution;
    let total = grid.cell_count();
    let mut component = vec![usize::MAX; total];
    let mut sizes: Vec<usize> = Vec::new();

    for start in 0..total {
        if !grid.cells[start].is_present() || component[start] != usize::MAX {
            continue;
        }
        let label = sizes.len();
        let mut queue = vec![start];
        component[start] = label;
        let mut size = 0usize;
        while let Some(i) = queue.pop() {
            size += 1;
            let x = i % nx;
            let y = (i / nx) % ny;
            let z = i / (nx * ny);
            let mut push = |xx: usize, yy: usize, zz: usize| {
                let j = grid.index(xx, yy, zz);
                if grid.cells[j].is_present() && component[j] == usize::MAX {
                    component[j] = label;
                    queue.push(j);
                }
            };
            if x > 0 {
                push(x - 1, y, z);
            }
            if x + 1 < nx {
                push(x + 1, y, z);
            }
            if y > 0 {
                push(x, y - 1, z);
            }
            if y + 1 < ny {
                push(x, y + 1, z);
            }
            if z > 0 {
                push(x, y, z - 1);
            }
            if z + 1 < nz {
                push(x, y, z + 1);
            }
        }
        sizes.push(size);
    }

    if sizes.len() <= 1 {
        return;
    }
    // Components are labeled in scan order, so on equal sizes the earlier
    // label (lowest first-cell index) wins the strict comparison.
    let mut keep = 0;
    for (label, &size) in sizes.iter().enumerate() {
        if size > sizes[keep] {
            keep = label;
        }
    }
    for i in 0..total {
        if grid.cells[i].is_present() && component[i] != keep {
            grid.cells[i] = Material::Empty;
        }
    }
}

/// Samples a controller genome over a finished body.
///
/// Muscle cells get `phase = pi * phase_output`. Every present cell
/// proposes a frequency, the phase-space output mapped affinely from
/// `(-1, 1)` onto `[FREQ_MIN, FREQ_MAX]`; the controller's single
/// global frequency is their arithmetic mean. An empty body yields no
/// phases and `FREQ_MIN`.
pub fn express_controller(
    genome: &CppnGenome,
    grid: &VoxelGrid,
) -> Result<ControllerMap, ExpressError> {
    if genome.kind != GenomeKind::Controller {
        return Err(ExpressError::WrongGenomeKind);
    }
    let program = genome.compile()?;
    let (nx, ny, nz) = grid.resolution;
    let mut phases = vec![None; grid.cell_count()];
    let mut freq_sum = 0.0;
    let mut present = 0usize;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = grid.index(x, y, z);
                let material = grid.cells[i];
                if !material.is_present() {
                    continue;
                }
                let out = program.eval(cell_coords(x, y, z, grid.resolution));
                if material == Material::Muscle {
                    phases[i] = Some(core::f64::consts::PI * out[0]);
                }
                freq_sum += map_frequency(out[1]);
                present += 1;
            }
        }
    }
    let global_frequency = if present == 0 {
        FREQ_MIN
    } else {
        freq_sum / present as f64
    };
    Ok(ControllerMap { phases, global_frequency })
}

/// Affine map from the squashed output range `(-1, 1)` onto
/// `[FREQ_MIN, FREQ_MAX]`.
fn map_frequency(v: f64) -> f64 {
    FREQ_MIN + (v + 1.0) / 2.0 * (FREQ_MAX - FREQ_MIN)
}

/// Returned when two grids of different resolutions are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResolutionMismatch {
    pub a: (usize, usize, usize),
    pub b: (usize, usize, usize),
}

impl fmt::Display for ResolutionMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "resolution mismatch: {}x{}x{} vs {}x{}x{}",
            self.a.0, self.a.1, self.a.2, self.b.0, self.b.1, self.b.2
        )
    }
}

impl core::error::Error for ResolutionMismatch {}

/// Fraction of lattice positions whose material differs, in `[0, 1]`.
/// Any change counts equally (empty↔passive↔muscle).
pub fn morphological_distance(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64, ResolutionMismatch> {
    if a.resolution != b.resolution {
        return Err(ResolutionMismatch { a: a.resolution, b: b.resolution });
    }
    let differing = a
        .cells
        .iter()
        .zip(&b.cells)
        .filter(|(ca, cb)| ca != cb)
        .count();
    Ok(differing as f64 / a.cell_count() as f64)
}

/// Digest of (resolution, cells); truncated SHA-256.
pub fn morphology_id(grid: &VoxelGrid) -> MorphologyId {
    let mut hasher = Sha256::new();
    let (nx, ny, nz) = grid.resolution;
    hasher.update((nx as u64).to_le_bytes());
    hasher.update((ny as u64).to_le_bytes());
    hasher.update((nz as u64).to_le_bytes());
    let bytes: Vec<u8> = grid.cells.iter().map(|c| c.as_byte()).collect();
    hasher.update(&bytes);
    let full = hasher.finalize();
    let mut id = [0u8; 16];
    id.copy_from_slice(&full[..16]);
    MorphologyId(id)
}
