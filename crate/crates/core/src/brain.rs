//! Markov Brains built from deterministic lookup-table gates.
//!
//! The brain has eight binary nodes: two sensors, four hidden nodes and two
//! motors. Gates are decoded from the genome; each reads up to four nodes and
//! writes up to four non-sensor nodes. Because the whole state fits in a
//! byte, a decoded brain is compiled into a 256-entry transition table.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::Genome;

pub const NODE_COUNT: usize = 8;
pub const WALL_SENSOR: usize = 0;
pub const ANIMAT_SENSOR: usize = 1;
pub const LEFT_MOTOR: usize = 6;
pub const RIGHT_MOTOR: usize = 7;
/// Nodes gates may write: hidden nodes and motors.
pub const WRITABLE: std::ops::Range<usize> = 2..8;

/// Two-byte marker that starts every gate in the genome.
pub const START_CODON: [u8; 2] = [42, 213];

pub const MAX_GATE_ARITY: usize = 4;

const SENSOR_MASK: u8 = 0b0000_0011;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GateError {
    #[error("gate needs 1..=4 inputs, got {0}")]
    InputArity(usize),
    #[error("gate needs 1..=4 outputs, got {0}")]
    OutputArity(usize),
    #[error("input node {0} out of range")]
    InputNode(u8),
    #[error("output node {0} is not writable")]
    OutputNode(u8),
    #[error("table has {got} rows, expected {expected}")]
    TableRows { got: usize, expected: usize },
    #[error("table row {row} = {value:#b} has bits beyond {outputs} outputs")]
    TableValue { row: usize, value: u8, outputs: usize },
}

/// Binary state of all eight nodes; bit `i` holds node `i`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Debug)]
pub struct BrainState(u8);

impl BrainState {
    pub const fn from_bits(bits: u8) -> Self {
        BrainState(bits)
    }

    pub const fn bits(self) -> u8 {
        self.0
    }

    pub fn node(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with_node(self, i: usize, on: bool) -> Self {
        if on {
            BrainState(self.0 | 1 << i)
        } else {
            BrainState(self.0 & !(1 << i))
        }
    }

    /// Overwrites both sensor bits.
    pub fn with_sensors(self, wall: bool, animat: bool) -> Self {
        BrainState(self.0 & !SENSOR_MASK | wall as u8 | (animat as u8) << 1)
    }

    pub fn motors(self) -> Motors {
        Motors {
            left: self.node(LEFT_MOTOR),
            right: self.node(RIGHT_MOTOR),
        }
    }
}

/// Motor tuple `(m_l, m_r)`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Debug)]
pub struct Motors {
    pub left: bool,
    pub right: bool,
}

impl Motors {
    pub const STAY: Motors = Motors { left: false, right: false };
    pub const LEFT: Motors = Motors { left: true, right: false };
    pub const RIGHT: Motors = Motors { left: false, right: true };
    pub const FORWARD: Motors = Motors { left: true, right: true };

    pub fn new(left: bool, right: bool) -> Self {
        Motors { left, right }
    }
}

/// A deterministic Hidden Markov Gate.
///
/// `table[row]` holds the output pattern for input row `row`; bit `k` of the
/// pattern is written to `outputs[k]`. The first input is the least
/// significant bit of the row index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicGate {
    inputs: Vec<u8>,
    outputs: Vec<u8>,
    table: Vec<u8>,
}

impl DeterministicGate {
    pub fn new(inputs: Vec<u8>, outputs: Vec<u8>, table: Vec<u8>) -> Result<Self, GateError> {
        let gate = DeterministicGate { inputs, outputs, table };
        gate.validate()?;
        Ok(gate)
    }

    fn validate(&self) -> Result<(), GateError> {
        if !(1..=MAX_GATE_ARITY).contains(&self.inputs.len()) {
            return Err(GateError::InputArity(self.inputs.len()));
        }
        if !(1..=MAX_GATE_ARITY).contains(&self.outputs.len()) {
            return Err(GateError::OutputArity(self.outputs.len()));
        }
        if let Some(&n) = self.inputs.iter().find(|&&n| n as usize >= NODE_COUNT) {
            return Err(GateError::InputNode(n));
        }
        if let Some(&n) = self.outputs.iter().find(|&&n| !WRITABLE.contains(&(n as usize))) {
            return Err(GateError::OutputNode(n));
        }
        let expected = 1 << self.inputs.len();
        if self.table.len() != expected {
            return Err(GateError::TableRows { got: self.table.len(), expected });
        }
        let limit = 1u16 << self.outputs.len();
        if let Some((row, &value)) = self.table.iter().enumerate().find(|(_, &v)| v as u16 >= limit) {
            return Err(GateError::TableValue { row, value, outputs: self.outputs.len() });
        }
        Ok(())
    }

    pub fn inputs(&self) -> &[u8] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[u8] {
        &self.outputs
    }

    pub fn table(&self) -> &[u8] {
        &self.table
    }

    /// Row index selected by `state`.
    pub fn row_index(&self, state: BrainState) -> usize {
        self.inputs
            .iter()
            .enumerate()
            .fold(0, |row, (k, &node)| row | (state.node(node as usize) as usize) << k)
    }

    /// Node mask this gate switches on for `state`.
    pub fn fire(&self, state: BrainState) -> u8 {
        let pattern = self.table[self.row_index(state)];
        self.outputs
            .iter()
            .enumerate()
            .filter(|(k, _)| pattern >> k & 1 == 1)
            .fold(0, |mask, (_, &node)| mask | 1 << node)
    }
}

/// Scans the circular genome for start codons and decodes one gate per hit.
///
/// Layout after the codon: `n_in = 1 + b % 4`, `n_out = 1 + b % 4`, then
/// `n_in` input ids (`b % 8`), `n_out` output ids (`2 + b % 6`) and
/// `2^n_in` table bytes whose low `n_out` bits form one row. Reads wrap.
pub fn decode_gates(g: &Genome) -> Vec<DeterministicGate> {
    let n = g.len();
    if n < 2 {
        return Vec::new();
    }
    let sites = g.sites();
    let mut gates = Vec::new();
    for i in 0..n {
        if sites[i] != START_CODON[0] || sites[(i + 1) % n] != START_CODON[1] {
            continue;
        }
        let mut pos = i + 2;
        let mut next = || {
            let b = sites[pos % n];
            pos += 1;
            b
        };
        let n_in = 1 + (next() % 4) as usize;
        let n_out = 1 + (next() % 4) as usize;
        let inputs: Vec<u8> = (0..n_in).map(|_| next() % 8).collect();
        let outputs: Vec<u8> = (0..n_out).map(|_| 2 + next() % 6).collect();
        let row_mask = ((1u16 << n_out) - 1) as u8;
        let table: Vec<u8> = (0..1usize << n_in).map(|_| next() & row_mask).collect();
        gates.push(DeterministicGate { inputs, outputs, table });
    }
    gates
}

/// One synchronous update. Every gate reads the state at `t`; writes are
/// OR-ed into a zeroed next state. Sensor bits of the result are zero.
pub fn brain_step(state: BrainState, gates: &[DeterministicGate]) -> BrainState {
    let next = gates.iter().fold(0u8, |acc, gate| acc | gate.fire(state));
    BrainState(next & !SENSOR_MASK)
}

/// Anything that maps a brain state at `t` to the state at `t + 1`.
pub trait Controller: Sync {
    fn update(&self, state: BrainState) -> BrainState;
}

impl Controller for [DeterministicGate] {
    fn update(&self, state: BrainState) -> BrainState {
        brain_step(state, self)
    }
}

impl<F> Controller for F
where
    F: Fn(BrainState) -> BrainState + Sync,
{
    fn update(&self, state: BrainState) -> BrainState {
        self(state)
    }
}

/// A decoded brain with its precomputed transition table.
#[derive(Clone, Debug)]
pub struct MarkovBrain {
    gates: Vec<DeterministicGate>,
    table: [BrainState; 256],
}

impl MarkovBrain {
    pub fn new(gates: Vec<DeterministicGate>) -> Self {
        let mut table = [BrainState::default(); 256];
        for (bits, slot) in table.iter_mut().enumerate() {
            *slot = brain_step(BrainState(bits as u8), &gates);
        }
        MarkovBrain { gates, table }
    }

    pub fn from_genome(g: &Genome) -> Self {
        Self::new(decode_gates(g))
    }

    pub fn gates(&self) -> &[DeterministicGate] {
        &self.gates
    }

    pub fn step(&self, state: BrainState) -> BrainState {
        self.table[state.0 as usize]
    }

    pub fn connectivity(&self) -> ConnectivityMatrix {
        effective_connectivity(&self.gates)
    }
}

impl Controller for MarkovBrain {
    fn update(&self, state: BrainState) -> BrainState {
        self.step(state)
    }
}

/// `adj[i][j]` is set iff some gate reads node `i` and writes node `j`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Debug)]
pub struct ConnectivityMatrix {
    adj: [[bool; NODE_COUNT]; NODE_COUNT],
}

impl ConnectivityMatrix {
    /// Builds a matrix from raw adjacency. Edges into the sensors are dropped.
    pub fn from_adjacency(mut adj: [[bool; NODE_COUNT]; NODE_COUNT]) -> Self {
        for row in adj.iter_mut() {
            row[WALL_SENSOR] = false;
            row[ANIMAT_SENSOR] = false;
        }
        ConnectivityMatrix { adj }
    }

    pub fn edge(&self, from: usize, to: usize) -> bool {
        self.adj[from][to]
    }

    pub fn adjacency(&self) -> &[[bool; NODE_COUNT]; NODE_COUNT] {
        &self.adj
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().flatten().filter(|&&e| e).count()
    }

    /// Edge list, row-major.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..NODE_COUNT).flat_map(move |i| (0..NODE_COUNT).filter(move |&j| self.adj[i][j]).map(move |j| (i, j)))
    }
}

pub fn effective_connectivity(gates: &[DeterministicGate]) -> ConnectivityMatrix {
    let mut adj = [[false; NODE_COUNT]; NODE_COUNT];
    for gate in gates {
        for &i in gate.inputs() {
            for &j in gate.outputs() {
                adj[i as usize][j as usize] = true;
            }
        }
    }
    ConnectivityMatrix { adj }
}

/// Writes gates as JSON lines: `{"inputs":[..],"outputs":[..],"table":[..]}`.
pub fn write_gates_jsonl<W: Write>(mut w: W, gates: &[DeterministicGate]) -> io::Result<()> {
    for gate in gates {
        serde_json::to_writer(&mut w, gate)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum GateDumpError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: GateError },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn read_gates_jsonl<R: BufRead>(r: R) -> Result<Vec<DeterministicGate>, GateDumpError> {
    let mut gates = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let gate: DeterministicGate =
            serde_json::from_str(&line).map_err(|source| GateDumpError::Json { line: idx + 1, source })?;
        gate.validate().map_err(|source| GateDumpError::Invalid { line: idx + 1, source })?;
        gates.push(gate);
    }
    Ok(gates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_gate() -> DeterministicGate {
        DeterministicGate::new(vec![3], vec![6], vec![0, 1]).unwrap()
    }

    #[test]
    fn no_start_codon_no_gates() {
        let g = Genome::from_sites((0..200u32).map(|i| (i % 40) as u8).collect());
        assert!(decode_gates(&g).is_empty());
        assert!(decode_gates(&Genome::from_sites(vec![42])).is_empty());
    }

    #[test]
    fn decodes_documented_example() {
        let g = Genome::from_sites(vec![42, 213, 0, 0, 3, 4, 0, 1]);
        assert_eq!(decode_gates(&g), vec![example_gate()]);
    }

    #[test]
    fn duplicated_coding_region_gives_two_gates() {
        let unit = [42u8, 213, 0, 0, 3, 4, 0, 1];
        let g = Genome::from_sites(unit.iter().chain(&unit).copied().collect());
        let gates = decode_gates(&g);
        assert_eq!(gates.len(), 2);
        assert_eq!(gates[0], gates[1]);
        assert_eq!(gates[0], example_gate());
    }

    #[test]
    fn decoding_wraps_around_the_ring() {
        // body wraps to the front
        let g = Genome::from_sites(vec![0, 0, 3, 4, 0, 1, 9, 9, 42, 213]);
        assert_eq!(decode_gates(&g), vec![example_gate()]);
        // codon itself split across the end
        let g = Genome::from_sites(vec![213, 0, 0, 3, 4, 0, 1, 42]);
        assert_eq!(decode_gates(&g), vec![example_gate()]);
    }

    #[test]
    fn decoded_fields_follow_layout() {
        // n_in = 1 + 7 % 4 = 4, n_out = 1 + 5 % 4 = 2
        let mut sites = vec![42, 213, 7, 5, 8, 9, 10, 255, 0, 11];
        sites.extend((0..16u8).map(|r| r | 0xf0));
        let gates = decode_gates(&Genome::from_sites(sites));
        assert_eq!(gates.len(), 1);
        let gate = &gates[0];
        assert_eq!(gate.inputs(), &[0, 1, 2, 7]);
        assert_eq!(gate.outputs(), &[2, 7]);
        assert_eq!(gate.table().len(), 16);
        assert!(gate.table().iter().enumerate().all(|(r, &v)| v == (r as u8 & 0b11)));
    }

    #[test]
    fn empty_brain_clears_writable_nodes() {
        for bits in 0..=255u8 {
            let next = brain_step(BrainState::from_bits(bits), &[]);
            assert_eq!(next.bits(), 0);
        }
    }

    #[test]
    fn example_gate_copies_node_three_to_left_motor() {
        let gates = [example_gate()];
        let on = brain_step(BrainState::default().with_node(3, true), &gates);
        assert!(on.node(LEFT_MOTOR));
        let off = brain_step(BrainState::default(), &gates);
        assert!(!off.node(LEFT_MOTOR));
    }

    #[test]
    fn multiple_writers_are_or_combined() {
        let zero = DeterministicGate::new(vec![0], vec![7], vec![0, 0]).unwrap();
        let one = DeterministicGate::new(vec![0], vec![7], vec![1, 1]).unwrap();
        let next = brain_step(BrainState::default(), &[zero.clone(), one.clone()]);
        assert!(next.node(RIGHT_MOTOR));
        let next = brain_step(BrainState::default(), &[one, zero]);
        assert!(next.node(RIGHT_MOTOR));
    }

    #[test]
    fn input_order_is_little_endian() {
        let gate = DeterministicGate::new(vec![0, 4], vec![5], vec![0, 0, 0, 0]).unwrap();
        assert_eq!(gate.row_index(BrainState::from_bits(0b0000_0001)), 1);
        assert_eq!(gate.row_index(BrainState::from_bits(0b0001_0000)), 2);
        assert_eq!(gate.row_index(BrainState::from_bits(0b0001_0001)), 3);
    }

    #[test]
    fn sensors_are_zeroed_in_result() {
        let gate = DeterministicGate::new(vec![0], vec![2], vec![1, 1]).unwrap();
        let next = brain_step(BrainState::from_bits(0b11), &[gate]);
        assert_eq!(next.bits() & 0b11, 0);
        assert!(next.node(2));
    }

    #[test]
    fn gate_validation() {
        assert_eq!(DeterministicGate::new(vec![], vec![2], vec![0]), Err(GateError::InputArity(0)));
        assert_eq!(DeterministicGate::new(vec![0], vec![1], vec![0, 0]), Err(GateError::OutputNode(1)));
        assert_eq!(DeterministicGate::new(vec![9], vec![2], vec![0, 0]), Err(GateError::InputNode(9)));
        assert!(matches!(
            DeterministicGate::new(vec![0, 1], vec![2], vec![0, 0]),
            Err(GateError::TableRows { got: 2, expected: 4 })
        ));
        assert!(matches!(
            DeterministicGate::new(vec![0], vec![2], vec![0, 2]),
            Err(GateError::TableValue { row: 1, .. })
        ));
    }

    #[test]
    fn empty_connectivity() {
        assert_eq!(effective_connectivity(&[]).edge_count(), 0);
    }

    #[test]
    fn connectivity_of_single_gate() {
        let gate = DeterministicGate::new(vec![0, 3], vec![6], vec![0, 1, 1, 0]).unwrap();
        let cm = effective_connectivity(&[gate]);
        assert_eq!(cm.edges().collect::<Vec<_>>(), vec![(0, 6), (3, 6)]);
    }

    #[test]
    fn from_adjacency_drops_sensor_in_edges() {
        let cm = ConnectivityMatrix::from_adjacency([[true; NODE_COUNT]; NODE_COUNT]);
        for i in 0..NODE_COUNT {
            assert!(!cm.edge(i, WALL_SENSOR) && !cm.edge(i, ANIMAT_SENSOR));
        }
        assert_eq!(cm.edge_count(), 48);
    }

    #[test]
    fn jsonl_round_trip() {
        let gates = vec![
            example_gate(),
            DeterministicGate::new(vec![0, 1, 2], vec![5, 7], vec![0, 1, 2, 3, 3, 2, 1, 0]).unwrap(),
        ];
        let mut buf = Vec::new();
        write_gates_jsonl(&mut buf, &gates).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), r#"{"inputs":[3],"outputs":[6],"table":[0,1]}"#);
        assert_eq!(read_gates_jsonl(&buf[..]).unwrap(), gates);
        let bad = b"{\"inputs\":[3],\"outputs\":[0],\"table\":[0,1]}\n";
        assert!(matches!(read_gates_jsonl(&bad[..]), Err(GateDumpError::Invalid { line: 1, .. })));
    }
}
