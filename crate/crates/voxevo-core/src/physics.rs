//! Mass-spring simulation of voxel soft bodies.
//!
//! A body plan becomes a corner lattice: every non-empty voxel contributes
//! its 8 corners as shared point masses, 12 edge springs, 12 face-diagonal
//! shear springs, and 4 body diagonals. Muscle voxels rhythmically rescale
//! the rest lengths of the springs they own (`1 + A sin(2 pi f t + phase)`,
//! shared springs take the mean over their owners), which together with
//! ground friction produces locomotion. Integration is semi-implicit Euler
//! at a fixed timestep; a stability gate on `dt` rejects configurations
//! that would blow up instead of running them.
//!
//! Fitness is the horizontal displacement of the center of mass between
//! the end of a settling phase and the end of the run, measured in voxel
//! edge lengths.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::phenotype::{ControllerMap, Material, VoxelGrid};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Below this tangential speed a ground-contact node is a static-friction
/// candidate, m/s.
const STICK_SPEED: f64 = 1e-4;

/// Any node coordinate beyond `DIVERGENCE_FACTOR * voxel_edge` (or
/// non-finite) marks the run as diverged.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// How often (in steps) the divergence scan runs.
const DIVERGENCE_CHECK_EVERY: u64 = 64;

/// Physical and numerical parameters of one simulation.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SimConfig {
    /// Voxel edge length, meters.
    pub voxel_edge: f64,
    /// Mass of one voxel, kg.
    pub voxel_mass: f64,
    /// Edge-spring stiffness, N/m.
    pub stiffness_axial: f64,
    /// Face- and body-diagonal stiffness, N/m.
    pub stiffness_shear: f64,
    /// Damping ratio applied per spring (and to ground contact).
    pub damping_ratio: f64,
    /// Downward gravitational acceleration, m/s².
    pub gravity: f64,
    pub friction_static: f64,
    pub friction_kinetic: f64,
    /// One-sided ground spring stiffness, N/m.
    pub ground_penalty_stiffness: f64,
    /// Integration timestep, seconds. Must pass the stability gate
    /// `dt < 2 / sqrt(max stiffness / min node mass)`.
    pub timestep: f64,
    /// Actuation cycles simulated after settling.
    pub cycles: u32,
    /// Linear strain amplitude of muscle actuation.
    pub amplitude: f64,
    /// Actuation-free time before measurement starts, seconds.
    pub settle_time: f64,
}

impl SimConfig {
    /// Parameters scaled to a given voxel size and mass. Stiffness follows
    /// the softness rule "a single voxel compresses about 5% under 10x its
    /// own weight" (four parallel edge springs), shear at half axial,
    /// ground at four times axial, and the timestep at 15% of the
    /// stability limit for a worst-case (single-voxel) node mass.
    pub fn for_scale(voxel_edge: f64, voxel_mass: f64, gravity: f64) -> Self {
        let stiffness_axial = 10.0 * voxel_mass * gravity / (4.0 * 0.05 * voxel_edge);
        let ground = 4.0 * stiffness_axial;
        let min_node_mass = voxel_mass / 8.0;
        let omega_max = math::sqrt(ground / min_node_mass);
        SimConfig {
            voxel_edge,
            voxel_mass,
            stiffness_axial,
            stiffness_shear: stiffness_axial / 2.0,
            damping_ratio: 0.1,
            gravity,
            friction_static: 1.0,
            friction_kinetic: 0.8,
            ground_penalty_stiffness: ground,
            timestep: 0.3 / omega_max,
            cycles: 20,
            amplitude: 0.14,
            settle_time: 0.5,
        }
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            timestep: 1e-4,
            ..SimConfig::for_scale(0.01, 0.001, 9.81)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum SpringKind {
    Axial,
    Shear,
    VolumetricDiagonal,
}

/// One spring between two lattice nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Spring {
    pub a: u32,
    pub b: u32,
    pub rest: f64,
    pub stiffness: f64,
    pub kind: SpringKind,
    /// Indices into [`SimModel::voxels`] of the voxels this spring belongs
    /// to (1 for body diagonals, up to 2 for face diagonals, up to 4 for
    /// edges).
    pub owners: Vec<u32>,
}

/// A voxel that made it into the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelVoxel {
    /// Cell index in the source grid.
    pub cell: u32,
    pub material: Material,
    /// Actuation phase, radians; `None` until a controller is applied or
    /// for passive voxels.
    pub phase: Option<f64>,
}

/// Geometry, masses, and spring network of one body, ready to simulate.
#[derive(Clone, Debug, PartialEq)]
pub struct SimModel {
    /// Node positions, meters. The body rests with its lowest nodes at
    /// ground height zero.
    pub positions: Vec<[f64; 3]>,
    /// Per-node mass, kg: total body mass spread equally over all nodes.
    pub masses: Vec<f64>,
    pub springs: Vec<Spring>,
    pub voxels: Vec<ModelVoxel>,
}

/// Outcome of one fitness evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FitnessResult {
    /// Horizontal center-of-mass displacement in voxel edge lengths.
    pub distance_voxels: f64,
    /// Simulated seconds.
    pub sim_time: f64,
    pub diverged: bool,
}

impl FitnessResult {
    fn zero() -> Self {
        FitnessResult { distance_voxels: 0.0, sim_time: 0.0, diverged: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    /// The grid has no present voxels; callers score this as fitness 0.
    EmptyBody,
    /// The configured timestep fails the stability gate.
    TimestepUnstable { timestep: f64, limit: f64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::EmptyBody => f.write_str("body has no voxels"),
            SimError::TimestepUnstable { timestep, limit } => {
                write!(f, "timestep {timestep} exceeds stability limit {limit}")
            }
        }
    }
}

impl core::error::Error for SimError {}

/// Rest-length scale of a muscle voxel at time `t`:
/// `1 + amplitude * sin(2 pi frequency t + phase)`.
pub fn actuation_scale(t: f64, phase: f64, frequency: f64, amplitude: f64) -> f64 {
    debug_assert!((0.0..0.5).contains(&amplitude));
    1.0 + amplitude * math::sin(2.0 * core::f64::consts::PI * frequency * t + phase)
}

/// Corner offsets indexed `dx + 2 dy + 4 dz`.
const CORNERS: [(usize, usize, usize); 8] = [
    (0, 0, 0),
    (1, 0, 0),
    (0, 1, 0),
    (1, 1, 0),
    (0, 0, 1),
    (1, 0, 1),
    (0, 1, 1),
    (1, 1, 1),
];

/// The 12 cube edges as corner-index pairs.
const EDGE_PAIRS: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// The 12 face diagonals (two per face).
const FACE_DIAGONAL_PAIRS: [(usize, usize); 12] = [
    (0, 3),
    (1, 2),
    (4, 7),
    (5, 6),
    (0, 5),
    (1, 4),
    (2, 7),
    (3, 6),
    (0, 6),
    (2, 4),
    (1, 7),
    (3, 5),
];

/// The 4 body diagonals.
const BODY_DIAGONAL_PAIRS: [(usize, usize); 4] = [(0, 7), (1, 6), (2, 5), (3, 4)];

fn timestep_gate(config: &SimConfig, min_node_mass: f64) -> Result<(), SimError> {
    let max_k = config
        .stiffness_axial
        .max(config.stiffness_shear)
        .max(config.ground_penalty_stiffness);
    let limit = 2.0 / math::sqrt(max_k / min_node_mass);
    if config.timestep >= limit {
        return Err(SimError::TimestepUnstable { timestep: config.timestep, limit });
    }
    Ok(())
}

/// Builds the corner-lattice model for a body.
///
/// Nodes are the distinct corner points of present voxels; springs are
/// deduplicated between neighbors, accumulating every owning voxel. The
/// body is translated so its lowest nodes start at ground height zero.
/// Voxel phases start unset; see [`apply_controller`].
pub fn build_model(grid: &VoxelGrid, config: &SimConfig) -> Result<SimModel, SimError> {
    let (nx, ny, nz) = grid.resolution();
    let present = grid.present_count();
    if present == 0 {
        return Err(SimError::EmptyBody);
    }

    // Dense corner slot map: (nx+1)(ny+1)(nz+1) possible corner points.
    let cnx = nx + 1;
    let cny = ny + 1;
    let corner_slot = |x: usize, y: usize, z: usize| x + cnx * (y + cny * z);
    let mut node_of_corner: Vec<u32> = vec![u32::MAX; cnx * cny * (nz + 1)];
    let mut corner_points: Vec<(usize, usize, usize)> = Vec::new();

    let mut voxels: Vec<ModelVoxel> = Vec::new();
    let mut voxel_corner_nodes: Vec<[u32; 8]> = Vec::new();

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let material = grid.get(x, y, z);
                if !material.is_present() {
                    continue;
                }
                let mut nodes8 = [0u32; 8];
                for (ci, (dx, dy, dz)) in CORNERS.iter().enumerate() {
                    let (cx, cy, cz) = (x + dx, y + dy, z + dz);
                    let slot = corner_slot(cx, cy, cz);
                    if node_of_corner[slot] == u32::MAX {
                        node_of_corner[slot] = corner_points.len() as u32;
                        corner_points.push((cx, cy, cz));
                    }
                    nodes8[ci] = node_of_corner[slot];
                }
                voxels.push(ModelVoxel {
                    cell: grid.index(x, y, z) as u32,
                    material,
                    phase: None,
                });
                voxel_corner_nodes.push(nodes8);
            }
        }
    }

    let node_count = corner_points.len();
    let edge = config.voxel_edge;
    let min_z = corner_points.iter().map(|c| c.2).min().unwrap_or(0);
    let positions: Vec<[f64; 3]> = corner_points
        .iter()
        .map(|&(cx, cy, cz)| {
            [cx as f64 * edge, cy as f64 * edge, (cz - min_z) as f64 * edge]
        })
        .collect();

    let total_mass = config.voxel_mass * present as f64;
    let node_mass = total_mass / node_count as f64;
    let masses = vec![node_mass; node_count];

    let mut springs: Vec<Spring> = Vec::new();
    let mut spring_of_pair: alloc::collections::BTreeMap<(u32, u32), usize> =
        alloc::collections::BTreeMap::new();
    let sqrt2 = math::sqrt(2.0);
    let sqrt3 = math::sqrt(3.0);

    for (vi, nodes8) in voxel_corner_nodes.iter().enumerate() {
        let groups: [(&[(usize, usize)], f64, f64, SpringKind); 3] = [
            (&EDGE_PAIRS, edge, config.stiffness_axial, SpringKind::Axial),
            (&FACE_DIAGONAL_PAIRS, edge * sqrt2, config.stiffness_shear, SpringKind::Shear),
            (
                &BODY_DIAGONAL_PAIRS,
                edge * sqrt3,
                config.stiffness_shear,
                SpringKind::VolumetricDiagonal,
            ),
        ];
        for (pairs, rest, stiffness, kind) in groups {
            for &(ca, cb) in pairs {
                let (a, b) = (nodes8[ca], nodes8[cb]);
                let key = (a.min(b), a.max(b));
                match spring_of_pair.get(&key) {
                    Some(&si) => springs[si].owners.push(vi as u32),
                    None => {
                        spring_of_pair.insert(key, springs.len());
                        springs.push(Spring {
                            a: key.0,
                            b: key.1,
                            rest,
                            stiffness,
                            kind,
                            owners: vec![vi as u32],
                        });
                    }
                }
            }
        }
    }

    timestep_gate(config, node_mass)?;

    Ok(SimModel { positions, masses, springs, voxels })
}

/// Copies per-cell phases from a controller onto the model's voxels.
/// Muscle voxels with no phase in the map (which expression never
/// produces) actuate at phase zero.
pub fn apply_controller(model: &mut SimModel, controller: &ControllerMap) {
    for v in &mut model.voxels {
        if v.material == Material::Muscle {
            v.phase = Some(controller.phase(v.cell as usize).unwrap_or(0.0));
        }
    }
}

/// Instantaneous energy decomposition of a running simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    /// Sum of node kinetic energies, joules.
    pub kinetic: f64,
    /// Spring strain energy plus ground penalty compression, joules.
    pub elastic: f64,
    /// Gravitational potential relative to ground height zero, joules.
    pub potential: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.kinetic + self.elastic + self.potential
    }
}

/// Node state and spring tables of one running simulation.
pub struct Simulation {
    config: SimConfig,
    // Node state.
    pos: Vec<[f64; 3]>,
    vel: Vec<[f64; 3]>,
    force: Vec<[f64; 3]>,
    mass: Vec<f64>,
    inv_mass: Vec<f64>,
    // Spring tables, struct-of-arrays.
    sa: Vec<u32>,
    sb: Vec<u32>,
    k: Vec<f64>,
    damp: Vec<f64>,
    rest0: Vec<f64>,
    /// Coefficients of `sin(omega t)` / `cos(omega t)` in each spring's
    /// rest length, folding amplitude, owner phases, and the shared-spring
    /// mean into two numbers.
    rest_sin: Vec<f64>,
    rest_cos: Vec<f64>,
    ground_damp: Vec<f64>,
    omega: f64,
    // Schedule.
    step_index: u64,
    settle_steps: u64,
    total_steps: u64,
    diverged: bool,
    com_start: Option<[f64; 3]>,
    total_mass: f64,
}

impl Simulation {
    /// Expresses nothing: builds the model from an already-expressed body
    /// and controller and prepares the schedule.
    pub fn new(
        grid: &VoxelGrid,
        controller: &ControllerMap,
        config: &SimConfig,
    ) -> Result<Self, SimError> {
        let mut model = build_model(grid, config)?;
        apply_controller(&mut model, controller);
        Self::from_model(model, controller.global_frequency, config)
    }

    /// Runs the stability gate and lowers a model into simulation state.
    /// `frequency` is the shared actuation clock in hertz.
    pub fn from_model(model: SimModel, frequency: f64, config: &SimConfig) -> Result<Self, SimError> {
        let min_mass = model.masses.iter().copied().fold(f64::INFINITY, f64::min);
        timestep_gate(config, min_mass)?;

        let n = model.positions.len();
        let ns = model.springs.len();
        let mut sa = Vec::with_capacity(ns);
        let mut sb = Vec::with_capacity(ns);
        let mut k = Vec::with_capacity(ns);
        let mut damp = Vec::with_capacity(ns);
        let mut rest0 = Vec::with_capacity(ns);
        let mut rest_sin = Vec::with_capacity(ns);
        let mut rest_cos = Vec::with_capacity(ns);
        for s in &model.springs {
            sa.push(s.a);
            sb.push(s.b);
            k.push(s.stiffness);
            let (ma, mb) = (model.masses[s.a as usize], model.masses[s.b as usize]);
            let reduced = ma * mb / (ma + mb);
            damp.push(2.0 * config.damping_ratio * math::sqrt(s.stiffness * reduced));
            rest0.push(s.rest);
            let mut cos_sum = 0.0;
            let mut sin_sum = 0.0;
            for &vi in &s.owners {
                let v = &model.voxels[vi as usize];
                if v.material == Material::Muscle {
                    let phase = v.phase.unwrap_or(0.0);
                    cos_sum += math::cos(phase);
                    sin_sum += math::sin(phase);
                }
            }
            let scale = if s.owners.is_empty() {
                0.0
            } else {
                config.amplitude / s.owners.len() as f64
            };
            rest_sin.push(s.rest * scale * cos_sum);
            rest_cos.push(s.rest * scale * sin_sum);
        }

        let ground_damp = model
            .masses
            .iter()
            .map(|&m| {
                2.0 * config.damping_ratio * math::sqrt(config.ground_penalty_stiffness * m)
            })
            .collect();

        let dt = config.timestep;
        let settle_steps = (config.settle_time / dt).round() as u64;
        let act_seconds = config.cycles as f64 / frequency;
        let act_steps = (act_seconds / dt).round() as u64;
        let total_mass: f64 = model.masses.iter().sum();

        Ok(Simulation {
            config: config.clone(),
            pos: model.positions,
            vel: vec![[0.0; 3]; n],
            force: vec![[0.0; 3]; n],
            inv_mass: model.masses.iter().map(|&m| 1.0 / m).collect(),
            mass: model.masses,
            sa,
            sb,
            k,
            damp,
            rest0,
            rest_sin,
            rest_cos,
            ground_damp,
            omega: 2.0 * core::f64::consts::PI * frequency,
            step_index: 0,
            settle_steps,
            total_steps: settle_steps + act_steps,
            diverged: false,
            com_start: None,
            total_mass,
        })
    }

    pub fn node_count(&self) -> usize {
        self.pos.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.pos
    }

    pub fn velocities(&self) -> &[[f64; 3]] {
        &self.vel
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.config.timestep
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    /// Mass-weighted center of mass (uniform masses make this the node
    /// mean, but the weights are honored regardless).
    pub fn com(&self) -> [f64; 3] {
        let mut acc = [0.0f64; 3];
        for (p, &m) in self.pos.iter().zip(&self.mass) {
            acc[0] += p[0] * m;
            acc[1] += p[1] * m;
            acc[2] += p[2] * m;
        }
        [acc[0] / self.total_mass, acc[1] / self.total_mass, acc[2] / self.total_mass]
    }

    /// Advances one timestep.
    pub fn step(&mut self) {
        let dt = self.config.timestep;
        let t = self.step_index as f64 * dt;
        // Actuation clock starts after the settle phase.
        let (sin_wt, cos_wt) = if t >= self.config.settle_time {
            let tau = t - self.config.settle_time;
            (math::sin(self.omega * tau), math::cos(self.omega * tau))
        } else {
            (0.0, 0.0)
        };

        let g = self.config.gravity;
        for (f, &m) in self.force.iter_mut().zip(&self.mass) {
            *f = [0.0, 0.0, -m * g];
        }

        for i in 0..self.sa.len() {
            let a = self.sa[i] as usize;
            let b = self.sb[i] as usize;
            let pa = self.pos[a];
            let pb = self.pos[b];
            let dx = pb[0] - pa[0];
            let dy = pb[1] - pa[1];
            let dz = pb[2] - pa[2];
            let dist = math::sqrt(dx * dx + dy * dy + dz * dz);
            if dist < 1e-12 {
                continue;
            }
            let inv = 1.0 / dist;
            let (ux, uy, uz) = (dx * inv, dy * inv, dz * inv);
            let rest = self.rest0[i] + self.rest_sin[i] * sin_wt + self.rest_cos[i] * cos_wt;
            let va = self.vel[a];
            let vb = self.vel[b];
            let rel_v = (vb[0] - va[0]) * ux + (vb[1] - va[1]) * uy + (vb[2] - va[2]) * uz;
            let magnitude = self.k[i] * (dist - rest) + self.damp[i] * rel_v;
            let (fx, fy, fz) = (ux * magnitude, uy * magnitude, uz * magnitude);
            self.force[a][0] += fx;
            self.force[a][1] += fy;
            self.force[a][2] += fz;
            self.force[b][0] -= fx;
            self.force[b][1] -= fy;
            self.force[b][2] -= fz;
        }

        // Ground contact: one-sided penalty spring with vertical damping,
        // plus Coulomb friction on contact nodes.
        let kg = self.config.ground_penalty_stiffness;
        let mu_s = self.config.friction_static;
        let mu_k = self.config.friction_kinetic;
        for i in 0..self.pos.len() {
            let z = self.pos[i][2];
            if z >= 0.0 {
                continue;
            }
            let vz = self.vel[i][2];
            let normal = (-kg * z - self.ground_damp[i] * vz).max(0.0);
            self.force[i][2] += normal;

            let vx = self.vel[i][0];
            let vy = self.vel[i][1];
            let speed = math::sqrt(vx * vx + vy * vy);
            let m_dt = self.mass[i] / dt;
            if speed < STICK_SPEED {
                // Force that would freeze the node this step.
                let hx = -m_dt * vx - self.force[i][0];
                let hy = -m_dt * vy - self.force[i][1];
                let need = math::sqrt(hx * hx + hy * hy);
                if need <= mu_s * normal {
                    self.force[i][0] += hx;
                    self.force[i][1] += hy;
                } else if speed > 0.0 {
                    let f = (mu_k * normal).min(m_dt * speed);
                    self.force[i][0] -= f * vx / speed;
                    self.force[i][1] -= f * vy / speed;
                }
            } else {
                let f = (mu_k * normal).min(m_dt * speed);
                self.force[i][0] -= f * vx / speed;
                self.force[i][1] -= f * vy / speed;
            }
        }

        for i in 0..self.pos.len() {
            let im = self.inv_mass[i] * dt;
            self.vel[i][0] += self.force[i][0] * im;
            self.vel[i][1] += self.force[i][1] * im;
            self.vel[i][2] += self.force[i][2] * im;
            self.pos[i][0] += self.vel[i][0] * dt;
            self.pos[i][1] += self.vel[i][1] * dt;
            self.pos[i][2] += self.vel[i][2] * dt;
        }

        self.step_index += 1;
        if self.step_index % DIVERGENCE_CHECK_EVERY == 0 || self.step_index == self.total_steps {
            self.check_divergence();
        }
    }

    fn check_divergence(&mut self) {
        let bound = DIVERGENCE_FACTOR * self.config.voxel_edge;
        for p in &self.pos {
            for c in p {
                if !c.is_finite() || c.abs() > bound {
                    self.diverged = true;
                    return;
                }
            }
        }
    }

    /// Runs to completion and reports fitness. The starting center of mass
    /// is recorded when the settle phase ends.
    pub fn run(&mut self) -> FitnessResult {
        self.run_traced(0, |_| {})
    }

    /// Like [`run`], emitting a trace frame every `every` steps (0 means
    /// never; the initial state and the final state are always included
    /// when tracing is on).
    ///
    /// [`run`]: Simulation::run
    pub fn run_traced(&mut self, every: u64, mut sink: impl FnMut(TraceFrame<'_>)) -> FitnessResult {
        if every > 0 {
            self.emit(&mut sink);
        }
        if self.step_index >= self.settle_steps && self.com_start.is_none() {
            self.com_start = Some(self.com());
        }
        while self.step_index < self.total_steps && !self.diverged {
            self.step();
            if self.step_index == self.settle_steps && self.com_start.is_none() {
                self.com_start = Some(self.com());
            }
            if every > 0 && (self.step_index % every == 0 || self.step_index == self.total_steps) {
                self.emit(&mut sink);
            }
        }
        let sim_time = self.time();
        if self.diverged {
            return FitnessResult { distance_voxels: 0.0, sim_time, diverged: true };
        }
        let start = self.com_start.expect("settle boundary was reached");
        let end = self.com();
        let dx = end[0] - start[0];
        let dy = end[1] - start[1];
        FitnessResult {
            distance_voxels: math::sqrt(dx * dx + dy * dy) / self.config.voxel_edge,
            sim_time,
            diverged: false,
        }
    }

    fn emit(&self, sink: &mut impl FnMut(TraceFrame<'_>)) {
        sink(TraceFrame {
            frame: self.step_index,
            time: self.time(),
            com: self.com(),
            positions: &self.pos,
        });
    }

    /// Instantaneous energies at the current state, including time-varying
    /// actuated rest lengths.
    pub fn energy_audit(&self) -> EnergyBreakdown {
        let mut kinetic = 0.0;
        for (v, &m) in self.vel.iter().zip(&self.mass) {
            kinetic += 0.5 * m * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        }
        let t = self.time();
        let (sin_wt, cos_wt) = if t >= self.config.settle_time {
            let tau = t - self.config.settle_time;
            (math::sin(self.omega * tau), math::cos(self.omega * tau))
        } else {
            (0.0, 0.0)
        };
        let mut elastic = 0.0;
        for i in 0..self.sa.len() {
            let pa = self.pos[self.sa[i] as usize];
            let pb = self.pos[self.sb[i] as usize];
            let dx = pb[0] - pa[0];
            let dy = pb[1] - pa[1];
            let dz = pb[2] - pa[2];
            let dist = math::sqrt(dx * dx + dy * dy + dz * dz);
            let rest = self.rest0[i] + self.rest_sin[i] * sin_wt + self.rest_cos[i] * cos_wt;
            let stretch = dist - rest;
            elastic += 0.5 * self.k[i] * stretch * stretch;
        }
        let kg = self.config.ground_penalty_stiffness;
        let mut potential = 0.0;
        for (p, &m) in self.pos.iter().zip(&self.mass) {
            potential += m * self.config.gravity * p[2];
            if p[2] < 0.0 {
                elastic += 0.5 * kg * p[2] * p[2];
            }
        }
        EnergyBreakdown { kinetic, elastic, potential }
    }
}

/// One row of a trajectory trace.
pub struct TraceFrame<'a> {
    pub frame: u64,
    pub time: f64,
    pub com: [f64; 3],
    pub positions: &'a [[f64; 3]],
}

/// Full fitness evaluation of a body/controller pair. An empty body scores
/// zero without error; config problems (timestep gate) are errors.
pub fn simulate(
    grid: &VoxelGrid,
    controller: &ControllerMap,
    config: &SimConfig,
) -> Result<FitnessResult, SimError> {
    match Simulation::new(grid, controller, config) {
        Ok(mut sim) => Ok(sim.run()),
        Err(SimError::EmptyBody) => Ok(FitnessResult::zero()),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_grid(res: (usize, usize, usize), material: Material) -> VoxelGrid {
        VoxelGrid::filled(res, material)
    }

    fn uniform_controller(grid: &VoxelGrid, phase: f64, frequency: f64) -> ControllerMap {
        let phases = grid
            .cells()
            .iter()
            .map(|c| (*c == Material::Muscle).then_some(phase))
            .collect();
        ControllerMap { phases, global_frequency: frequency }
    }

    #[test]
    fn single_voxel_model_counts() {
        let grid = full_grid((1, 1, 1), Material::Muscle);
        let model = build_model(&grid, &SimConfig::default()).unwrap();
        assert_eq!(model.positions.len(), 8);
        assert_eq!(model.springs.len(), 28);
        let axial = model.springs.iter().filter(|s| s.kind == SpringKind::Axial).count();
        let shear = model.springs.iter().filter(|s| s.kind == SpringKind::Shear).count();
        let body = model
            .springs
            .iter()
            .filter(|s| s.kind == SpringKind::VolumetricDiagonal)
            .count();
        assert_eq!((axial, shear, body), (12, 12, 4));
        let m: f64 = model.masses.iter().sum();
        assert!((m - 0.001).abs() < 1e-15);
    }

    #[test]
    fn two_voxel_bar_shares_a_face() {
        let grid = full_grid((1, 1, 2), Material::Passive);
        let model = build_model(&grid, &SimConfig::default()).unwrap();
        assert_eq!(model.positions.len(), 12);
        // 2 * 28 springs minus 4 shared edges and 2 shared face diagonals.
        assert_eq!(model.springs.len(), 50);
        let shared_edges = model
            .springs
            .iter()
            .filter(|s| s.kind == SpringKind::Axial && s.owners.len() == 2)
            .count();
        assert_eq!(shared_edges, 4);
    }

    #[test]
    fn actuation_scale_peaks_at_one_plus_amplitude() {
        // sin = 1 at t = quarter period, phase 0.
        let f = 1.0;
        let peak = actuation_scale(0.25, 0.0, f, 0.14);
        assert!((peak - 1.14).abs() < 1e-12);
        let vol = peak * peak * peak;
        assert!((vol - 1.481).abs() < 0.001);
        assert_eq!(actuation_scale(0.5, 0.0, f, 0.14), 1.0 + 0.14 * (core::f64::consts::PI).sin());
        // sin() of pi is ~1.2e-16, not exactly zero; at t=0 it is exact.
        assert_eq!(actuation_scale(0.0, 0.0, f, 0.14), 1.0);
    }

    #[test]
    fn shared_spring_uses_mean_of_owner_scales() {
        // 1x1x2 bar, bottom voxel muscle (phase 0), top passive. The four
        // shared edge springs aggregate half the amplitude.
        let mut grid = full_grid((1, 1, 2), Material::Passive);
        grid.set(0, 0, 0, Material::Muscle);
        let ctrl = uniform_controller(&grid, 0.0, 2.0);
        let cfg = SimConfig::default();
        let sim = Simulation::new(&grid, &ctrl, &cfg).unwrap();
        // Muscle-only springs carry full amplitude, shared ones half,
        // passive-only ones none.
        let full = cfg.amplitude;
        let mut seen_half = 0;
        let mut seen_full = 0;
        let mut seen_zero = 0;
        for i in 0..sim.sa.len() {
            let coeff = sim.rest_sin[i] / sim.rest0[i];
            if (coeff - full).abs() < 1e-12 {
                seen_full += 1;
            } else if (coeff - full / 2.0).abs() < 1e-12 {
                seen_half += 1;
            } else if coeff.abs() < 1e-12 {
                seen_zero += 1;
            } else {
                panic!("unexpected actuation coefficient {coeff}");
            }
        }
        // 4 shared edges + 2 shared face diagonals; 28 - 6 springs per
        // voxel are exclusive.
        assert_eq!(seen_half, 6);
        assert_eq!(seen_full, 22);
        assert_eq!(seen_zero, 22);
        // Mean rule at peak: 1 + A/2 = 1.07 for the shared springs.
        let scale: f64 = 1.0 + 0.14 / 2.0;
        assert!((scale - 1.07).abs() < 1e-12);
    }

    #[test]
    fn timestep_gate_rejects_unstable_config() {
        let grid = full_grid((1, 1, 1), Material::Passive);
        let mut cfg = SimConfig::default();
        cfg.timestep = 1.0;
        match build_model(&grid, &cfg) {
            Err(SimError::TimestepUnstable { .. }) => {}
            other => panic!("expected timestep error, got {other:?}"),
        }
    }

    #[test]
    fn empty_grid_scores_zero_without_error() {
        let grid = full_grid((3, 3, 3), Material::Empty);
        let ctrl = uniform_controller(&grid, 0.0, 1.0);
        let result = simulate(&grid, &ctrl, &SimConfig::default()).unwrap();
        assert_eq!(result.distance_voxels, 0.0);
        assert!(!result.diverged);
        assert_eq!(result.sim_time, 0.0);
    }

    #[test]
    fn resting_body_reaches_equilibrium() {
        let grid = full_grid((2, 2, 2), Material::Passive);
        let ctrl = uniform_controller(&grid, 0.0, 2.0);
        let mut cfg = SimConfig::default();
        cfg.cycles = 1;
        let mut sim = Simulation::new(&grid, &ctrl, &cfg).unwrap();
        for _ in 0..sim.settle_steps {
            sim.step();
        }
        let audit = sim.energy_audit();
        assert!(audit.kinetic < 1e-6, "kinetic energy {} not settled", audit.kinetic);
    }

    #[test]
    fn simulate_twice_is_bit_identical() {
        let mut grid = full_grid((2, 2, 1), Material::Muscle);
        grid.set(0, 0, 0, Material::Passive);
        let ctrl = uniform_controller(&grid, 0.7, 2.5);
        let mut cfg = SimConfig::default();
        cfg.cycles = 3;
        let a = simulate(&grid, &ctrl, &cfg).unwrap();
        let b = simulate(&grid, &ctrl, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.distance_voxels.to_bits() == b.distance_voxels.to_bits());
    }

    #[test]
    fn distant_initial_position_flags_divergence() {
        let grid = full_grid((1, 1, 1), Material::Passive);
        let cfg = SimConfig::default();
        let mut model = build_model(&grid, &cfg).unwrap();
        for p in &mut model.positions {
            p[0] += 2e6 * cfg.voxel_edge;
        }
        let mut sim = Simulation::from_model(model, 1.0, &cfg).unwrap();
        let result = sim.run();
        assert!(result.diverged);
        assert_eq!(result.distance_voxels, 0.0);
    }
}
