//! The two-room grid world: geometry, sensing, movement and event detection.
//!
//! Animats live on a grid of wall, open and gate cells. Open cells belong to
//! room A or room B; gate cells belong to neither. A swarm advances in
//! lock-step: everyone senses, every brain updates, every action is applied,
//! then collisions (shared cells) and gate crossings are detected. Animats
//! never block each other.
//!
//! Map text format: `#` wall, `.` open cell of room A, `,` open cell of room
//! B, `G` gate, `S`/`s` start position in room A/B. Line `y`, column `x`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::brain::{BrainState, Controller, Motors};

pub const DEFAULT_WIDTH: usize = 32;
pub const DEFAULT_HEIGHT: usize = 32;
/// Required number of start positions in every map.
pub const START_POSITIONS: usize = 72;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Room {
    A,
    B,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum CellKind {
    Wall,
    Open(Room),
    Gate,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Heading {
    Up,
    Right,
    Down,
    Left,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::Up, Heading::Right, Heading::Down, Heading::Left];

    pub fn turn_left(self) -> Heading {
        match self {
            Heading::Up => Heading::Left,
            Heading::Left => Heading::Down,
            Heading::Down => Heading::Right,
            Heading::Right => Heading::Up,
        }
    }

    pub fn turn_right(self) -> Heading {
        match self {
            Heading::Up => Heading::Right,
            Heading::Right => Heading::Down,
            Heading::Down => Heading::Left,
            Heading::Left => Heading::Up,
        }
    }

    /// `(dx, dy)`; `y` grows downwards.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Heading::Up => (0, -1),
            Heading::Right => (1, 0),
            Heading::Down => (0, 1),
            Heading::Left => (-1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Heading::Up => "up",
            Heading::Right => "right",
            Heading::Down => "down",
            Heading::Left => "left",
        }
    }

    pub fn from_name(name: &str) -> Option<Heading> {
        Heading::ALL.into_iter().find(|h| h.name() == name)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Pose {
    pub x: usize,
    pub y: usize,
    pub heading: Heading,
}

impl Pose {
    pub fn new(x: usize, y: usize, heading: Heading) -> Self {
        Pose { x, y, heading }
    }
}

/// Sensor readings for one animat: cell directly ahead.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Debug)]
pub struct Sensors {
    pub wall: bool,
    pub animat: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub struct MapError {
    /// 1-based `(line, column)` of the first offending cell, if any.
    pub position: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for MapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some((line, col)) => write!(f, "line {line}, column {col}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl MapError {
    fn at(x: usize, y: usize, message: impl Into<String>) -> Self {
        MapError { position: Some((y + 1, x + 1)), message: message.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorldError {
    #[error("swarm exceeds start positions: {requested} > {available}")]
    SwarmTooLarge { requested: usize, available: usize },
    #[error("pose ({x}, {y}) is not inside a room")]
    InvalidPose { x: usize, y: usize },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Environment {
    width: usize,
    height: usize,
    cells: Vec<CellKind>,
    starts: Vec<(usize, usize)>,
}

impl Environment {
    /// 32x32 room pair: border walls, a two-row dividing wall across the
    /// middle with a 2x2 gate at its centre, and 36 start positions per room
    /// laid out mirror-symmetrically.
    pub fn default_layout() -> Self {
        let (w, h) = (DEFAULT_WIDTH, DEFAULT_HEIGHT);
        let mut cells = vec![CellKind::Wall; w * h];
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                cells[y * w + x] = match y {
                    1..=14 => CellKind::Open(Room::A),
                    15 | 16 if x == 15 || x == 16 => CellKind::Gate,
                    15 | 16 => CellKind::Wall,
                    _ => CellKind::Open(Room::B),
                };
            }
        }
        let mut starts = Vec::with_capacity(START_POSITIONS);
        for row in [3, 7, 11] {
            for x in (4..=26).step_by(2) {
                starts.push((x, row));
            }
        }
        let mirrored: Vec<_> = starts.iter().map(|&(x, y)| (x, h - 1 - y)).collect();
        starts.extend(mirrored);
        starts.sort_by_key(|&(x, y)| (y, x));
        let env = Environment { width: w, height: h, cells, starts };
        debug_assert!(env.validate().is_ok());
        env
    }

    /// Parses the text map format described at module level.
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
        let lines: Vec<&str> = {
            let mut l = lines;
            while l.last().is_some_and(|s| s.is_empty()) {
                l.pop();
            }
            l
        };
        if lines.is_empty() {
            return Err(MapError { position: None, message: "empty map".into() });
        }
        let width = lines[0].chars().count();
        let height = lines.len();
        let mut cells = Vec::with_capacity(width * height);
        let mut starts = Vec::new();
        for (y, line) in lines.iter().enumerate() {
            let len = line.chars().count();
            if len != width {
                return Err(MapError::at(len.min(width), y, format!("map is not rectangular: expected {width} columns, found {len}")));
            }
            for (x, ch) in line.chars().enumerate() {
                let cell = match ch {
                    '#' => CellKind::Wall,
                    '.' => CellKind::Open(Room::A),
                    ',' => CellKind::Open(Room::B),
                    'G' => CellKind::Gate,
                    'S' => {
                        starts.push((x, y));
                        CellKind::Open(Room::A)
                    }
                    's' => {
                        starts.push((x, y));
                        CellKind::Open(Room::B)
                    }
                    other => return Err(MapError::at(x, y, format!("unlabeled cell {other:?}"))),
                };
                cells.push(cell);
            }
        }
        let env = Environment { width, height, cells, starts };
        env.validate()?;
        Ok(env)
    }

    fn validate(&self) -> Result<(), MapError> {
        let (w, h) = (self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
                if border && self.cell(x, y) != CellKind::Wall {
                    return Err(MapError::at(x, y, "outer border must be wall"));
                }
            }
        }
        if self.starts.len() != START_POSITIONS {
            let position = self.starts.get(START_POSITIONS).map(|&(x, y)| (y + 1, x + 1));
            return Err(MapError {
                position,
                message: format!("expected {START_POSITIONS} start positions, found {}", self.starts.len()),
            });
        }
        for y in 0..h {
            for x in 0..w {
                if let CellKind::Open(room) = self.cell(x, y) {
                    let touches_other = self
                        .neighbours(x, y)
                        .any(|(nx, ny)| matches!(self.cell(nx, ny), CellKind::Open(r) if r != room));
                    if touches_other {
                        return Err(MapError::at(x, y, "rooms connected without gate"));
                    }
                }
            }
        }
        for room in [Room::A, Room::B] {
            let members: Vec<(usize, usize)> = self.cells_where(|c| c == CellKind::Open(room)).collect();
            let Some(&seed) = members.first() else {
                return Err(MapError { position: None, message: format!("room {room:?} has no cells") });
            };
            let reached = self.flood(seed, |c| c == CellKind::Open(room));
            if let Some(&(x, y)) = members.iter().find(|&&(x, y)| !reached[y * w + x]) {
                return Err(MapError::at(x, y, format!("room {room:?} is not connected")));
            }
        }
        let seed = self.cells_where(|c| c == CellKind::Open(Room::A)).next().expect("room A checked");
        let reached = self.flood(seed, |c| c != CellKind::Wall);
        if let Some((x, y)) = self.cells_where(|c| c == CellKind::Open(Room::B)).find(|&(x, y)| !reached[y * w + x]) {
            return Err(MapError::at(x, y, "rooms are not connected through a gate"));
        }
        if let Some((x, y)) = self.cells_where(|c| c == CellKind::Gate).find(|&(x, y)| !reached[y * w + x]) {
            return Err(MapError::at(x, y, "gate cell not reachable from the rooms"));
        }
        Ok(())
    }

    fn cells_where<'a>(&'a self, pred: impl Fn(CellKind) -> bool + 'a) -> impl Iterator<Item = (usize, usize)> + 'a {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| (x, y))).filter(move |&(x, y)| pred(self.cell(x, y)))
    }

    fn neighbours(&self, x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        Heading::ALL.into_iter().filter_map(move |h| self.step_from(x, y, h))
    }

    fn flood(&self, seed: (usize, usize), pass: impl Fn(CellKind) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.cells.len()];
        let mut stack = vec![seed];
        seen[seed.1 * self.width + seed.0] = true;
        while let Some((x, y)) = stack.pop() {
            for (nx, ny) in self.neighbours(x, y) {
                let idx = ny * self.width + nx;
                if !seen[idx] && pass(self.cells[idx]) {
                    seen[idx] = true;
                    stack.push((nx, ny));
                }
            }
        }
        seen
    }

    /// Cell one step from `(x, y)` in direction `h`, if on the grid.
    pub fn step_from(&self, x: usize, y: usize, h: Heading) -> Option<(usize, usize)> {
        let (dx, dy) = h.delta();
        let nx = x.checked_add_signed(dx)?;
        let ny = y.checked_add_signed(dy)?;
        (nx < self.width && ny < self.height).then_some((nx, ny))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell(&self, x: usize, y: usize) -> CellKind {
        self.cells[y * self.width + x]
    }

    pub fn is_wall(&self, x: usize, y: usize) -> bool {
        self.cell(x, y) == CellKind::Wall
    }

    pub fn room(&self, x: usize, y: usize) -> Option<Room> {
        match self.cell(x, y) {
            CellKind::Open(r) => Some(r),
            _ => None,
        }
    }

    pub fn starts(&self) -> &[(usize, usize)] {
        &self.starts
    }

    pub(crate) fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Text map that [`Environment::parse`] reads back to an equal value.
    pub fn to_map_string(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let start = self.starts.contains(&(x, y));
                out.push(match (self.cell(x, y), start) {
                    (CellKind::Wall, _) => '#',
                    (CellKind::Gate, _) => 'G',
                    (CellKind::Open(Room::A), false) => '.',
                    (CellKind::Open(Room::B), false) => ',',
                    (CellKind::Open(Room::A), true) => 'S',
                    (CellKind::Open(Room::B), true) => 's',
                });
            }
            out.push('\n');
        }
        out
    }

    /// Stable 64-bit FNV-1a hash of the map text.
    pub fn fingerprint(&self) -> u64 {
        self.to_map_string().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }

    /// Whether `(x, y)` ahead of `pose` is a wall (off-grid counts as wall).
    fn ahead(&self, pose: Pose) -> Option<(usize, usize)> {
        self.step_from(pose.x, pose.y, pose.heading)
    }
}

impl Default for Environment {
    fn default() -> Self {
        Self::default_layout()
    }
}

pub fn default_environment() -> Environment {
    Environment::default_layout()
}

pub fn load_environment(text_map: &str) -> Result<Environment, MapError> {
    Environment::parse(text_map)
}

/// What animat `a` senses in the cell directly ahead, given every pose.
pub fn sense(env: &Environment, poses: &[Pose], a: usize) -> Sensors {
    match env.ahead(poses[a]) {
        None => Sensors { wall: true, animat: false },
        Some((x, y)) if env.is_wall(x, y) => Sensors { wall: true, animat: false },
        Some((x, y)) => Sensors {
            wall: false,
            animat: poses.iter().enumerate().any(|(i, p)| i != a && p.x == x && p.y == y),
        },
    }
}

/// Applies a motor tuple. `(1,0)` turns left, `(0,1)` turns right, `(1,1)`
/// moves one cell forward unless that cell is a wall.
pub fn apply_action(env: &Environment, pose: Pose, m: Motors) -> Pose {
    match (m.left, m.right) {
        (false, false) => pose,
        (true, false) => Pose { heading: pose.heading.turn_left(), ..pose },
        (false, true) => Pose { heading: pose.heading.turn_right(), ..pose },
        (true, true) => match env.ahead(pose) {
            Some((x, y)) if !env.is_wall(x, y) => Pose { x, y, ..pose },
            _ => pose,
        },
    }
}

/// Per-animat outcome of the most recent step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepEvents {
    pub motors: Vec<Motors>,
    pub collided: Vec<bool>,
    pub crossed: Vec<bool>,
}

/// Poses and brain states of a clone swarm during one trial.
///
/// Sensor readings are kept for the current poses, so after each step
/// `sensors()` holds what every animat sees at its new position and will act
/// on next.
#[derive(Clone, Debug)]
pub struct TrialState {
    poses: Vec<Pose>,
    brains: Vec<BrainState>,
    last_room: Vec<Room>,
    sensors: Vec<Sensors>,
    occupancy: Vec<u16>,
    events: StepEvents,
    steps_taken: usize,
}

impl TrialState {
    /// Starts a trial from explicit poses. Every pose must be inside a room.
    pub fn new(env: &Environment, poses: Vec<Pose>) -> Result<Self, WorldError> {
        let mut last_room = Vec::with_capacity(poses.len());
        let mut occupancy = vec![0u16; env.width * env.height];
        for p in &poses {
            if p.x >= env.width || p.y >= env.height {
                return Err(WorldError::InvalidPose { x: p.x, y: p.y });
            }
            let room = env.room(p.x, p.y).ok_or(WorldError::InvalidPose { x: p.x, y: p.y })?;
            last_room.push(room);
            occupancy[env.index(p.x, p.y)] += 1;
        }
        let n = poses.len();
        let mut state = TrialState {
            brains: vec![BrainState::default(); n],
            sensors: vec![Sensors::default(); n],
            events: StepEvents {
                motors: vec![Motors::STAY; n],
                collided: vec![false; n],
                crossed: vec![false; n],
            },
            poses,
            last_room,
            occupancy,
            steps_taken: 0,
        };
        state.refresh_sensors(env);
        Ok(state)
    }

    /// Places `n` animats on a random subset of the start positions (a
    /// shuffled order, first `n` taken), each facing a random direction.
    pub fn place<R: Rng + ?Sized>(env: &Environment, n: usize, rng: &mut R) -> Result<Self, WorldError> {
        let available = env.starts.len();
        if n > available {
            return Err(WorldError::SwarmTooLarge { requested: n, available });
        }
        let mut order: Vec<usize> = (0..available).collect();
        order.shuffle(rng);
        let poses = order[..n]
            .iter()
            .map(|&i| {
                let (x, y) = env.starts[i];
                Pose::new(x, y, Heading::ALL[rng.random_range(0..4)])
            })
            .collect();
        Self::new(env, poses)
    }

    fn refresh_sensors(&mut self, env: &Environment) {
        for (pose, s) in self.poses.iter().zip(self.sensors.iter_mut()) {
            *s = match env.ahead(*pose) {
                Some((x, y)) if !env.is_wall(x, y) => Sensors {
                    wall: false,
                    animat: self.occupancy[env.index(x, y)] > 0,
                },
                _ => Sensors { wall: true, animat: false },
            };
        }
    }

    /// Advances the swarm one time step and returns the step's events.
    pub fn step<C: Controller + ?Sized>(&mut self, env: &Environment, brain: &C) -> &StepEvents {
        let n = self.poses.len();
        for i in 0..n {
            let s = self.sensors[i];
            let next = brain.update(self.brains[i].with_sensors(s.wall, s.animat));
            self.brains[i] = next;
            self.events.motors[i] = next.motors();
        }
        for i in 0..n {
            let old = self.poses[i];
            let new = apply_action(env, old, self.events.motors[i]);
            if (new.x, new.y) != (old.x, old.y) {
                self.occupancy[env.index(old.x, old.y)] -= 1;
                self.occupancy[env.index(new.x, new.y)] += 1;
            }
            self.poses[i] = new;
        }
        for i in 0..n {
            let p = self.poses[i];
            self.events.collided[i] = self.occupancy[env.index(p.x, p.y)] > 1;
            self.events.crossed[i] = match env.room(p.x, p.y) {
                Some(room) if room != self.last_room[i] => {
                    self.last_room[i] = room;
                    true
                }
                _ => false,
            };
        }
        self.refresh_sensors(env);
        self.steps_taken += 1;
        &self.events
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn brains(&self) -> &[BrainState] {
        &self.brains
    }

    pub fn sensors(&self) -> &[Sensors] {
        &self.sensors
    }

    pub fn last_rooms(&self) -> &[Room] {
        &self.last_room
    }

    pub fn events(&self) -> &StepEvents {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Number of animats in cell `(x, y)` right now.
    pub fn count_at(&self, env: &Environment, x: usize, y: usize) -> u16 {
        self.occupancy[env.index(x, y)]
    }
}

/// Free-function form of [`TrialState::step`].
pub fn step_swarm<'s, C: Controller + ?Sized>(env: &Environment, state: &'s mut TrialState, brain: &C) -> &'s StepEvents {
    state.step(env, brain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brain::{BrainState, MarkovBrain, LEFT_MOTOR, RIGHT_MOTOR};
    use crate::seed;

    fn env() -> Environment {
        Environment::default_layout()
    }

    fn forward(_: BrainState) -> BrainState {
        BrainState::default().with_node(LEFT_MOTOR, true).with_node(RIGHT_MOTOR, true)
    }

    #[test]
    fn default_layout_invariants() {
        let e = env();
        assert_eq!((e.width(), e.height()), (32, 32));
        assert_eq!(e.starts().len(), 72);
        let in_a = e.starts().iter().filter(|&&(x, y)| e.room(x, y) == Some(Room::A)).count();
        assert_eq!(in_a, 36);
        let mut uniq = e.starts().to_vec();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 72);
        assert!(e.validate().is_ok());
    }

    #[test]
    fn room_a_flood_never_enters_b_without_gate() {
        let e = env();
        let seed = e.cells_where(|c| c == CellKind::Open(Room::A)).next().unwrap();
        let reached = e.flood(seed, |c| c == CellKind::Open(Room::A));
        let total_a = e.cells_where(|c| c == CellKind::Open(Room::A)).count();
        assert_eq!(reached.iter().filter(|&&r| r).count(), total_a);
        let any_b = e.cells_where(|c| c == CellKind::Open(Room::B)).any(|(x, y)| reached[e.index(x, y)]);
        assert!(!any_b);
    }

    #[test]
    fn map_round_trip() {
        let e = env();
        assert_eq!(Environment::parse(&e.to_map_string()).unwrap(), e);
    }

    #[test]
    fn wrong_start_count_is_rejected() {
        let text = env().to_map_string().replacen('S', ".", 1);
        let err = Environment::parse(&text).unwrap_err();
        assert!(err.message.contains("expected 72 start positions"), "{err}");
    }

    #[test]
    fn removing_the_gate_is_rejected() {
        let text = env().to_map_string().replace('G', ".");
        let err = Environment::parse(&text).unwrap_err();
        assert_eq!(err.message, "rooms connected without gate");
        // first A cell (row-major) touching B: row 16 (line 17), column 16
        assert_eq!(err.position, Some((17, 16)));
    }

    #[test]
    fn walling_the_gate_is_rejected() {
        let text = env().to_map_string().replace('G', "#");
        let err = Environment::parse(&text).unwrap_err();
        assert_eq!(err.message, "rooms are not connected through a gate");
    }

    #[test]
    fn non_rectangular_and_unknown_cells() {
        let mut text = env().to_map_string();
        text.insert(40, '#');
        let err = Environment::parse(&text).unwrap_err();
        assert_eq!(err.position.unwrap().0, 2);
        let text = env().to_map_string().replacen('.', "?", 1);
        let err = Environment::parse(&text).unwrap_err();
        assert!(err.message.contains("unlabeled cell"));
        assert_eq!(err.position, Some((2, 2)));
    }

    #[test]
    fn open_border_is_rejected() {
        let mut text = env().to_map_string().into_bytes();
        text[5] = b'.';
        let err = Environment::parse(std::str::from_utf8(&text).unwrap()).unwrap_err();
        assert_eq!(err.position, Some((1, 6)));
    }

    #[test]
    fn sensing_cases() {
        let e = env();
        let poses = [Pose::new(5, 1, Heading::Up)];
        assert_eq!(sense(&e, &poses, 0), Sensors { wall: true, animat: false });
        let poses = [Pose::new(5, 5, Heading::Right), Pose::new(6, 5, Heading::Left)];
        assert_eq!(sense(&e, &poses, 0), Sensors { wall: false, animat: true });
        assert_eq!(sense(&e, &poses, 1), Sensors { wall: false, animat: true });
        let poses = [Pose::new(5, 5, Heading::Down)];
        assert_eq!(sense(&e, &poses, 0), Sensors::default());
    }

    #[test]
    fn actions() {
        let e = env();
        let p = Pose::new(5, 5, Heading::Up);
        assert_eq!(apply_action(&e, p, Motors::LEFT), Pose::new(5, 5, Heading::Left));
        assert_eq!(apply_action(&e, p, Motors::RIGHT), Pose::new(5, 5, Heading::Right));
        assert_eq!(apply_action(&e, p, Motors::STAY), p);
        assert_eq!(apply_action(&e, p, Motors::FORWARD), Pose::new(5, 4, Heading::Up));
        let blocked = Pose::new(5, 1, Heading::Up);
        assert_eq!(apply_action(&e, blocked, Motors::FORWARD), blocked);
        let mut q = p;
        for _ in 0..4 {
            q = apply_action(&e, q, Motors::RIGHT);
        }
        assert_eq!(q, p);
    }

    #[test]
    fn single_animat_never_collides() {
        let e = env();
        let mut rng = seed::stream(1, &[]);
        let mut st = TrialState::place(&e, 1, &mut rng).unwrap();
        for _ in 0..200 {
            assert!(!st.step(&e, &forward).collided[0]);
        }
    }

    #[test]
    fn co_located_animats_both_collide() {
        let e = env();
        let poses = vec![Pose::new(5, 5, Heading::Right), Pose::new(7, 5, Heading::Left)];
        let mut st = TrialState::new(&e, poses).unwrap();
        let ev = st.step(&e, &forward).clone();
        assert_eq!(st.poses()[0], Pose::new(6, 5, Heading::Right));
        assert_eq!(st.poses()[1], Pose::new(6, 5, Heading::Left));
        assert_eq!(ev.collided, vec![true, true]);
    }

    #[test]
    fn gate_passage_fires_once_on_entering_room_b() {
        let e = env();
        // column 15 is a gate column; start just above the dividing wall
        let mut st = TrialState::new(&e, vec![Pose::new(15, 14, Heading::Down)]).unwrap();
        let mut fired = Vec::new();
        for t in 0..3 {
            if st.step(&e, &forward).crossed[0] {
                fired.push(t);
            }
        }
        // t0 -> gate (15,15), t1 -> gate (15,16), t2 -> B (15,17)
        assert_eq!(st.poses()[0], Pose::new(15, 17, Heading::Down));
        assert_eq!(fired, vec![2]);
    }

    #[test]
    fn turning_back_inside_the_gate_does_not_fire() {
        let e = env();
        let mut st = TrialState::new(&e, vec![Pose::new(15, 14, Heading::Down)]).unwrap();
        for m in [Motors::FORWARD, Motors::LEFT, Motors::LEFT, Motors::FORWARD] {
            let ctl = move |_: BrainState| {
                BrainState::default().with_node(LEFT_MOTOR, m.left).with_node(RIGHT_MOTOR, m.right)
            };
            assert!(!st.step(&e, &ctl).crossed[0]);
        }
        assert_eq!(st.poses()[0], Pose::new(15, 14, Heading::Up));
    }

    #[test]
    fn placement_is_distinct_and_validated() {
        let e = env();
        let mut rng = seed::stream(3, &[]);
        let st = TrialState::place(&e, 72, &mut rng).unwrap();
        let mut cells: Vec<_> = st.poses().iter().map(|p| (p.x, p.y)).collect();
        cells.sort();
        let mut starts = e.starts().to_vec();
        starts.sort();
        assert_eq!(cells, starts);
        assert_eq!(
            TrialState::place(&e, 73, &mut rng).unwrap_err(),
            WorldError::SwarmTooLarge { requested: 73, available: 72 }
        );
        assert!(TrialState::new(&e, vec![Pose::new(0, 0, Heading::Up)]).is_err());
        assert!(TrialState::new(&e, vec![Pose::new(15, 15, Heading::Up)]).is_err());
    }

    #[test]
    fn fast_sensing_matches_reference() {
        let e = env();
        let mut rng = seed::stream(8, &[]);
        let g = crate::genome::new_random_genome(5000, &Default::default(), &mut rng).unwrap();
        let mut sites = g.into_sites();
        // plant a few gates so the swarm moves around
        for k in 0..8 {
            sites[k * 300] = 42;
            sites[k * 300 + 1] = 213;
        }
        let brain = MarkovBrain::from_genome(&crate::genome::Genome::from_sites(sites));
        let mut st = TrialState::place(&e, 36, &mut rng).unwrap();
        for _ in 0..100 {
            st.step(&e, &brain);
            for a in 0..st.len() {
                assert_eq!(st.sensors()[a], sense(&e, st.poses(), a));
            }
        }
    }
}
