//! Compositional pattern-producing networks.
//!
//! A CPPN is a small feed-forward graph that maps a voxel's geometric
//! coordinates `(x, y, z, r)` plus a constant bias to a pair of output
//! values. Morphology networks emit `(presence, material)`, controller
//! networks `(phase, frequency)`. Hidden and output nodes each apply one
//! activation function drawn from a fixed palette of eight; raw output
//! values are squashed through `tanh` so downstream code always sees
//! values in `(-1, 1)`.
//!
//! Mutation applies exactly one operator per call: weight perturbation,
//! activation swap, or addition/removal of an edge or hidden node. All
//! randomness flows through a caller-supplied [`rand::Rng`], so seeded
//! streams replay exactly.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::math;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Edge weights are clamped to `[-WEIGHT_LIMIT, WEIGHT_LIMIT]`.
pub const WEIGHT_LIMIT: f64 = 3.0;

/// Standard deviation of the Gaussian used by weight perturbation.
const PERTURB_SIGMA: f64 = 0.5;

/// Newly created edges draw their weight uniformly from this half-open range.
const NEW_EDGE_WEIGHT: core::ops::Range<f64> = -1.0..1.0;

/// How many times an inapplicable operator draw is retried before falling
/// back to weight perturbation.
const OP_RESAMPLE_LIMIT: u32 = 10;

/// The eight activation functions available to hidden and output nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum ActivationKind {
    Sigmoid,
    Sine,
    Abs,
    NegAbs,
    Square,
    NegSquare,
    Sqrt,
    NegSqrt,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 8] = [
        ActivationKind::Sigmoid,
        ActivationKind::Sine,
        ActivationKind::Abs,
        ActivationKind::NegAbs,
        ActivationKind::Square,
        ActivationKind::NegSquare,
        ActivationKind::Sqrt,
        ActivationKind::NegSqrt,
    ];

    /// Applies the activation to a summed node input.
    ///
    /// `Sqrt` and `NegSqrt` use the sign-preserving extension
    /// `sign(u) * sqrt(|u|)` so they are total over the reals.
    pub fn apply(self, u: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => 1.0 / (1.0 + math::exp(-u)),
            ActivationKind::Sine => math::sin(u),
            ActivationKind::Abs => u.abs(),
            ActivationKind::NegAbs => -u.abs(),
            ActivationKind::Square => u * u,
            ActivationKind::NegSquare => -(u * u),
            ActivationKind::Sqrt => signed_sqrt(u),
            ActivationKind::NegSqrt => -signed_sqrt(u),
        }
    }
}

fn signed_sqrt(u: f64) -> f64 {
    if u >= 0.0 {
        math::sqrt(u)
    } else {
        -math::sqrt(-u)
    }
}

fn random_activation(rng: &mut impl Rng) -> ActivationKind {
    ActivationKind::ALL[rng.gen_range(0..ActivationKind::ALL.len())]
}

/// Which coordinate an input node reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum InputLabel {
    X,
    Y,
    Z,
    R,
    Bias,
}

impl InputLabel {
    pub const ALL: [InputLabel; 5] = [
        InputLabel::X,
        InputLabel::Y,
        InputLabel::Z,
        InputLabel::R,
        InputLabel::Bias,
    ];

    fn pick(self, c: Coords) -> f64 {
        match self {
            InputLabel::X => c.x,
            InputLabel::Y => c.y,
            InputLabel::Z => c.z,
            InputLabel::R => c.r,
            InputLabel::Bias => 1.0,
        }
    }
}

impl fmt::Display for InputLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InputLabel::X => "x",
            InputLabel::Y => "y",
            InputLabel::Z => "z",
            InputLabel::R => "r",
            InputLabel::Bias => "bias",
        };
        f.write_str(s)
    }
}

/// Role tag of an output node. Morphology genomes carry `Presence` and
/// `Material`; controller genomes carry `Phase` and `Frequency`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum OutputLabel {
    Presence,
    Material,
    Phase,
    Frequency,
}

/// What a genome encodes: a body plan or its controller.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum GenomeKind {
    Morphology,
    Controller,
}

impl GenomeKind {
    /// The two output labels a genome of this kind must expose, in the
    /// order `evaluate` reports them.
    pub fn output_labels(self) -> [OutputLabel; 2] {
        match self {
            GenomeKind::Morphology => [OutputLabel::Presence, OutputLabel::Material],
            GenomeKind::Controller => [OutputLabel::Phase, OutputLabel::Frequency],
        }
    }
}

/// Node payload; the variant fixes which fields exist, so an input can
/// never carry an activation and an output always has one.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum NodeKind {
    Input(InputLabel),
    Hidden(ActivationKind),
    Output(OutputLabel, ActivationKind),
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CppnNode {
    pub id: u32,
    pub kind: NodeKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CppnEdge {
    pub source: u32,
    pub target: u32,
    pub weight: f64,
}

/// Coordinates handed to [`CppnGenome::evaluate`]. `r` is supplied by the
/// caller rather than derived, so lattice code controls its definition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coords {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub r: f64,
}

/// A structural problem found by [`CppnGenome::validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DuplicateNodeId(u32),
    MissingInput(InputLabel),
    /// The set of output nodes does not match the genome kind's two
    /// required labels exactly once each.
    OutputSetMismatch,
    EdgeEndpointMissing { source: u32, target: u32 },
    EdgeTargetsInput { source: u32, target: u32 },
    EdgeLeavesOutput { source: u32, target: u32 },
    WeightOutOfRange { source: u32, target: u32, weight: f64 },
    Cycle,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNodeId(id) => write!(f, "duplicate node id {id}"),
            Violation::MissingInput(l) => write!(f, "missing input {l}"),
            Violation::OutputSetMismatch => write!(f, "output nodes do not match genome kind"),
            Violation::EdgeEndpointMissing { source, target } => {
                write!(f, "edge {source}->{target} references a missing node")
            }
            Violation::EdgeTargetsInput { source, target } => {
                write!(f, "edge {source}->{target} targets an input node")
            }
            Violation::EdgeLeavesOutput { source, target } => {
                write!(f, "edge {source}->{target} leaves an output node")
            }
            Violation::WeightOutOfRange { source, target, weight } => {
                write!(f, "edge {source}->{target} weight {weight} out of range")
            }
            Violation::Cycle => f.write_str("cycle"),
        }
    }
}

/// Error returned when an operation refuses to run on a broken genome.
#[derive(Clone, Debug, PartialEq)]
pub struct InvalidGenome(pub Vec<Violation>);

impl fmt::Display for InvalidGenome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid genome: ")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl core::error::Error for InvalidGenome {}

/// The mutation operators. One is applied per [`CppnGenome::mutate`] call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum MutationOp {
    PerturbWeight,
    ChangeActivation,
    AddEdge,
    RemoveEdge,
    AddNode,
    RemoveNode,
}

/// Draw weights for the operators, scanned cumulatively over a single
/// uniform sample.
const OP_WEIGHTS: [(MutationOp, f64); 6] = [
    (MutationOp::PerturbWeight, 0.40),
    (MutationOp::ChangeActivation, 0.15),
    (MutationOp::AddEdge, 0.15),
    (MutationOp::RemoveEdge, 0.10),
    (MutationOp::AddNode, 0.10),
    (MutationOp::RemoveNode, 0.10),
];

fn draw_op(rng: &mut impl Rng) -> MutationOp {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (op, w) in OP_WEIGHTS {
        acc += w;
        if u < acc {
            return op;
        }
    }
    MutationOp::RemoveNode
}

/// A feed-forward network genome: nodes, weighted edges, and a tag saying
/// whether it encodes a morphology or a controller.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CppnGenome {
    pub kind: GenomeKind,
    pub nodes: Vec<CppnNode>,
    pub edges: Vec<CppnEdge>,
    /// Next fresh node id. Ids of deleted nodes are never reused.
    next_id: u32,
}

impl CppnGenome {
    /// Builds a genome from parts. `next_id` starts past the largest id
    /// present. No validation happens here; call [`validate`].
    ///
    /// [`validate`]: CppnGenome::validate
    pub fn new(kind: GenomeKind, nodes: Vec<CppnNode>, edges: Vec<CppnEdge>) -> Self {
        let next_id = nodes.iter().map(|n| n.id + 1).max().unwrap_or(0);
        CppnGenome { kind, nodes, edges, next_id }
    }

    /// Smallest useful random genome: the five inputs, the two outputs for
    /// `kind` with random activations, and one random-weight edge from a
    /// random input to each output.
    pub fn random_minimal(kind: GenomeKind, rng: &mut impl Rng) -> Self {
        let mut nodes = Vec::with_capacity(7);
        for (i, label) in InputLabel::ALL.iter().enumerate() {
            nodes.push(CppnNode { id: i as u32, kind: NodeKind::Input(*label) });
        }
        for (i, label) in kind.output_labels().iter().enumerate() {
            nodes.push(CppnNode {
                id: (InputLabel::ALL.len() + i) as u32,
                kind: NodeKind::Output(*label, random_activation(rng)),
            });
        }
        let mut edges = Vec::with_capacity(2);
        for i in 0..2 {
            let source = rng.gen_range(0..InputLabel::ALL.len() as u32);
            let target = (InputLabel::ALL.len() + i) as u32;
            let weight = rng.gen_range(NEW_EDGE_WEIGHT);
            edges.push(CppnEdge { source, target, weight });
        }
        CppnGenome { kind, nodes, edges, next_id: 7 }
    }

    /// Checks the structural invariants: unique ids, all five inputs, the
    /// right two outputs, edges between existing nodes flowing
    /// input/hidden → hidden/output, weights finite and in bounds, and no
    /// cycles.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut violations = Vec::new();
        let mut ids = BTreeSet::new();
        for node in &self.nodes {
            if !ids.insert(node.id) {
                violations.push(Violation::DuplicateNodeId(node.id));
            }
        }
        for label in InputLabel::ALL {
            let present = self
                .nodes
                .iter()
                .any(|n| matches!(n.kind, NodeKind::Input(l) if l == label));
            if !present {
                violations.push(Violation::MissingInput(label));
            }
        }
        let mut out_labels: Vec<OutputLabel> = self
            .nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Output(l, _) => Some(l),
                _ => None,
            })
            .collect();
        out_labels.sort();
        let mut want = self.kind.output_labels();
        want.sort();
        if out_labels != want {
            violations.push(Violation::OutputSetMismatch);
        }
        let by_id: BTreeMap<u32, &CppnNode> = self.nodes.iter().map(|n| (n.id, n)).collect();
        for e in &self.edges {
            let (src, tgt) = (by_id.get(&e.source), by_id.get(&e.target));
            match (src, tgt) {
                (Some(s), Some(t)) => {
                    if matches!(s.kind, NodeKind::Output(..)) {
                        violations.push(Violation::EdgeLeavesOutput {
                            source: e.source,
                            target: e.target,
                        });
                    }
                    if matches!(t.kind, NodeKind::Input(_)) {
                        violations.push(Violation::EdgeTargetsInput {
                            source: e.source,
                            target: e.target,
                        });
                    }
                }
                _ => violations.push(Violation::EdgeEndpointMissing {
                    source: e.source,
                    target: e.target,
                }),
            }
            if !e.weight.is_finite() || e.weight.abs() > WEIGHT_LIMIT {
                violations.push(Violation::WeightOutOfRange {
                    source: e.source,
                    target: e.target,
                    weight: e.weight,
                });
            }
        }
        if violations.is_empty() && self.topo_order().is_none() {
            violations.push(Violation::Cycle);
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// Kahn's algorithm over node-list order; `None` if the edges contain
    /// a cycle. Indices returned are positions in `self.nodes`.
    fn topo_order(&self) -> Option<Vec<usize>> {
        let index: BTreeMap<u32, usize> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let n = self.nodes.len();
        let mut in_degree = vec![0usize; n];
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in &self.edges {
            let (s, t) = (*index.get(&e.source)?, *index.get(&e.target)?);
            in_degree[t] += 1;
            adjacency[s].push(t);
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| in_degree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        let mut head = 0;
        while head < queue.len() {
            let i = queue[head];
            head += 1;
            order.push(i);
            for &t in &adjacency[i] {
                in_degree[t] -= 1;
                if in_degree[t] == 0 {
                    queue.push(t);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Validates, then builds a reusable evaluator. Compile once when
    /// sampling the same genome at many coordinates.
    pub fn compile(&self) -> Result<CompiledCppn, InvalidGenome> {
        self.validate().map_err(InvalidGenome)?;
        let index: BTreeMap<u32, usize> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let order = self.topo_order().expect("validated genome is acyclic");
        let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            incoming[index[&e.target]].push((index[&e.source], e.weight));
        }
        let outputs = self.kind.output_labels().map(|label| {
            self.nodes
                .iter()
                .position(|n| matches!(n.kind, NodeKind::Output(l, _) if l == label))
                .expect("validated genome has both outputs")
        });
        let kinds = self.nodes.iter().map(|n| n.kind).collect();
        Ok(CompiledCppn { kinds, order, incoming, outputs })
    }

    /// Evaluates the network at one coordinate. Outputs are squashed
    /// through `tanh`, so both lie in `(-1, 1)`; order is
    /// `[presence, material]` or `[phase, frequency]` by genome kind.
    pub fn evaluate(&self, coords: Coords) -> Result<[f64; 2], InvalidGenome> {
        Ok(self.compile()?.eval(coords))
    }

    /// Like [`evaluate`] but without the final `tanh`, exposing the output
    /// nodes' own activation values.
    ///
    /// [`evaluate`]: CppnGenome::evaluate
    pub fn evaluate_raw(&self, coords: Coords) -> Result<[f64; 2], InvalidGenome> {
        Ok(self.compile()?.eval_raw(coords))
    }

    /// Returns a copy mutated by exactly one operator. The receiver is
    /// untouched. Operator draw: perturb-weight 0.40, change-activation
    /// 0.15, add-edge 0.15, remove-edge 0.10, add-node 0.10, remove-node
    /// 0.10; an inapplicable draw is resampled up to ten times, then the
    /// call falls back to perturb-weight.
    pub fn mutate(&self, rng: &mut impl Rng) -> CppnGenome {
        let mut resamples = 0;
        let op = loop {
            let candidate = draw_op(rng);
            if self.op_applicable(candidate, rng) {
                break candidate;
            }
            resamples += 1;
            if resamples > OP_RESAMPLE_LIMIT {
                break self.fallback_op();
            }
        };
        let mut next = self.clone();
        next.apply_op(op, rng);
        next
    }

    /// Perturb-weight, unless there is no edge to perturb, in which case
    /// add-edge (a genome never runs out of both at once: no edges means
    /// free input→output pairs).
    fn fallback_op(&self) -> MutationOp {
        if self.edges.is_empty() {
            MutationOp::AddEdge
        } else {
            MutationOp::PerturbWeight
        }
    }

    fn op_applicable(&self, op: MutationOp, rng: &mut impl Rng) -> bool {
        let _ = rng;
        match op {
            MutationOp::PerturbWeight | MutationOp::RemoveEdge | MutationOp::AddNode => {
                !self.edges.is_empty()
            }
            MutationOp::ChangeActivation => true,
            MutationOp::AddEdge => !self.edge_candidates().is_empty(),
            MutationOp::RemoveNode => self.hidden_ids().next().is_some(),
        }
    }

    fn hidden_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes.iter().filter_map(|n| match n.kind {
            NodeKind::Hidden(_) => Some(n.id),
            _ => None,
        })
    }

    /// All (source, target) pairs an add-edge draw may pick from: not
    /// already an edge, not out of an output or into an input, and not
    /// closing a cycle. Ordered by node-list position for determinism.
    fn edge_candidates(&self) -> Vec<(u32, u32)> {
        let existing: BTreeSet<(u32, u32)> =
            self.edges.iter().map(|e| (e.source, e.target)).collect();
        let mut forward: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for e in &self.edges {
            forward.entry(e.source).or_default().push(e.target);
        }
        let mut out = Vec::new();
        for s in &self.nodes {
            if matches!(s.kind, NodeKind::Output(..)) {
                continue;
            }
            for t in &self.nodes {
                if matches!(t.kind, NodeKind::Input(_)) || t.id == s.id {
                    continue;
                }
                if existing.contains(&(s.id, t.id)) {
                    continue;
                }
                if reaches(&forward, t.id, s.id) {
                    continue;
                }
                out.push((s.id, t.id));
            }
        }
        out
    }

    fn apply_op(&mut self, op: MutationOp, rng: &mut impl Rng) {
        match op {
            MutationOp::PerturbWeight => {
                let i = rng.gen_range(0..self.edges.len());
                let normal = Normal::new(0.0, PERTURB_SIGMA).expect("sigma is positive");
                let w = self.edges[i].weight + normal.sample(rng);
                self.edges[i].weight = w.clamp(-WEIGHT_LIMIT, WEIGHT_LIMIT);
            }
            MutationOp::ChangeActivation => {
                let candidates: Vec<usize> = self
                    .nodes
                    .iter()
                    .enumerate()
                    .filter(|(_, n)| !matches!(n.kind, NodeKind::Input(_)))
                    .map(|(i, _)| i)
                    .collect();
                let i = candidates[rng.gen_range(0..candidates.len())];
                let current = match self.nodes[i].kind {
                    NodeKind::Hidden(a) | NodeKind::Output(_, a) => a,
                    NodeKind::Input(_) => unreachable!("inputs were filtered out"),
                };
                let others: Vec<ActivationKind> = ActivationKind::ALL
                    .into_iter()
                    .filter(|&a| a != current)
                    .collect();
                let next = others[rng.gen_range(0..others.len())];
                self.nodes[i].kind = match self.nodes[i].kind {
                    NodeKind::Hidden(_) => NodeKind::Hidden(next),
                    NodeKind::Output(l, _) => NodeKind::Output(l, next),
                    NodeKind::Input(_) => unreachable!("inputs were filtered out"),
                };
            }
            MutationOp::AddEdge => {
                let candidates = self.edge_candidates();
                let (source, target) = candidates[rng.gen_range(0..candidates.len())];
                let weight = rng.gen_range(NEW_EDGE_WEIGHT);
                self.edges.push(CppnEdge { source, target, weight });
            }
            MutationOp::RemoveEdge => {
                let i = rng.gen_range(0..self.edges.len());
                self.edges.remove(i);
            }
            MutationOp::AddNode => {
                let i = rng.gen_range(0..self.edges.len());
                let activation = random_activation(rng);
                let CppnEdge { source, target, weight } = self.edges.remove(i);
                let h = self.next_id;
                self.next_id += 1;
                self.nodes.push(CppnNode { id: h, kind: NodeKind::Hidden(activation) });
                self.edges.push(CppnEdge { source, target: h, weight: 1.0 });
                self.edges.push(CppnEdge { source: h, target, weight });
            }
            MutationOp::RemoveNode => {
                let hidden: Vec<u32> = self.hidden_ids().collect();
                let id = hidden[rng.gen_range(0..hidden.len())];
                self.nodes.retain(|n| n.id != id);
                self.edges.retain(|e| e.source != id && e.target != id);
            }
        }
    }
}

/// Is `to` reachable from `from` along `forward` edges?
fn reaches(forward: &BTreeMap<u32, Vec<u32>>, from: u32, to: u32) -> bool {
    if from == to {
        return true;
    }
    let mut stack = vec![from];
    let mut seen = BTreeSet::new();
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            continue;
        }
        if let Some(nexts) = forward.get(&id) {
            for &n in nexts {
                if n == to {
                    return true;
                }
                stack.push(n);
            }
        }
    }
    false
}

/// A validated genome lowered to flat arrays for repeated evaluation.
///
/// Node values are computed in topological order; each non-input node sums
/// `weight * value(source)` over its incoming edges in genome edge-list
/// order, then applies its activation.
pub struct CompiledCppn {
    kinds: Vec<NodeKind>,
    order: Vec<usize>,
    incoming: Vec<Vec<(usize, f64)>>,
    outputs: [usize; 2],
}

impl CompiledCppn {
    /// Output values squashed through `tanh`.
    pub fn eval(&self, coords: Coords) -> [f64; 2] {
        let raw = self.eval_raw(coords);
        [math::tanh(raw[0]), math::tanh(raw[1])]
    }

    /// Output nodes' activation values without the final squash.
    pub fn eval_raw(&self, coords: Coords) -> [f64; 2] {
        let mut values = vec![0.0f64; self.kinds.len()];
        for &i in &self.order {
            values[i] = match self.kinds[i] {
                NodeKind::Input(label) => label.pick(coords),
                NodeKind::Hidden(act) | NodeKind::Output(_, act) => {
                    let mut sum = 0.0;
                    for &(src, w) in &self.incoming[i] {
                        sum += w * values[src];
                    }
                    act.apply(sum)
                }
            };
        }
        [values[self.outputs[0]], values[self.outputs[1]]]
    }
}
