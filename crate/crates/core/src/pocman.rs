//! Pocman: a partially observable maze with food pellets and chasing
//! ghosts.
//!
//! Cells are indexed `y * width + x` with `y = 0` the top row. Actions are
//! `move(north)`, `move(east)`, `move(south)`, `move(west)`.

use rand::Rng;
use smallvec::SmallVec;

use crate::features::{discretize_count, Domain, FeatureLift};
use crate::logic::{atom, FeatureSet, GroundAtom, Value};
use crate::pomdp::{GenerativeModel, ParticleBelief, StepOutcome};

pub const NORTH: usize = 0;
pub const EAST: usize = 1;
pub const SOUTH: usize = 2;
pub const WEST: usize = 3;
pub const DIRECTIONS: [&str; 4] = ["north", "east", "south", "west"];

pub const MAX_GHOSTS: usize = 8;
pub const MAX_CELLS: usize = 384;
/// Distances for which ghost and food features are emitted.
pub const FEATURE_DISTANCES: std::ops::RangeInclusive<u32> = 1..=8;

pub const MICRO_MAZE: &str = include_str!("../fixtures/mazes/micro.txt");
pub const FULL_MAZE: &str = include_str!("../fixtures/mazes/full.txt");

/// Observation bits: see ghost N/E/S/W, wall N/E/S/W, hear ghost, smell food.
pub mod obs {
    pub const SEE: u16 = 0;
    pub const WALL: u16 = 4;
    pub const HEAR: u16 = 1 << 8;
    pub const SMELL: u16 = 1 << 9;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MazeError {
    #[error("maze is empty")]
    Empty,
    #[error("row {0} has a different width")]
    Ragged(usize),
    #[error("unexpected character `{0}`")]
    Char(char),
    #[error("maze needs exactly one agent spawn `P`, found {0}")]
    Spawn(usize),
    #[error("maze has {0} cells, at most {MAX_CELLS} supported")]
    TooLarge(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Maze {
    pub width: usize,
    pub height: usize,
    walls: Vec<bool>,
    pub agent_spawn: u16,
    pub ghost_spawns: Vec<u16>,
}

impl Maze {
    /// Parses `#` wall, `.` floor, `P` agent spawn, `G` ghost spawn.
    pub fn parse(text: &str) -> Result<Maze, MazeError> {
        let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        let width = rows.first().ok_or(MazeError::Empty)?.len();
        let mut walls = Vec::new();
        let mut spawns = Vec::new();
        let mut ghosts = Vec::new();
        for (y, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(MazeError::Ragged(y));
            }
            for (x, c) in row.chars().enumerate() {
                let cell = (y * width + x) as u16;
                match c {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    'P' => {
                        walls.push(false);
                        spawns.push(cell);
                    }
                    'G' => {
                        walls.push(false);
                        ghosts.push(cell);
                    }
                    other => return Err(MazeError::Char(other)),
                }
            }
        }
        if walls.len() > MAX_CELLS {
            return Err(MazeError::TooLarge(walls.len()));
        }
        if spawns.len() != 1 {
            return Err(MazeError::Spawn(spawns.len()));
        }
        Ok(Maze { width, height: rows.len(), walls, agent_spawn: spawns[0], ghost_spawns: ghosts })
    }

    pub fn micro() -> Maze {
        Maze::parse(MICRO_MAZE).expect("micro maze fixture")
    }

    pub fn full() -> Maze {
        Maze::parse(FULL_MAZE).expect("full maze fixture")
    }

    pub fn cells(&self) -> usize {
        self.walls.len()
    }

    pub fn is_wall(&self, cell: u16) -> bool {
        self.walls[cell as usize]
    }

    pub fn xy(&self, cell: u16) -> (i32, i32) {
        ((cell as usize % self.width) as i32, (cell as usize / self.width) as i32)
    }

    /// Neighbouring floor cell in direction `dir`; `None` for walls and the
    /// outside.
    pub fn neighbor(&self, cell: u16, dir: usize) -> Option<u16> {
        let (x, y) = self.xy(cell);
        let (nx, ny) = match dir {
            NORTH => (x, y - 1),
            EAST => (x + 1, y),
            SOUTH => (x, y + 1),
            _ => (x - 1, y),
        };
        if nx < 0 || ny < 0 || nx >= self.width as i32 || ny >= self.height as i32 {
            return None;
        }
        let n = (ny as usize * self.width + nx as usize) as u16;
        (!self.is_wall(n)).then_some(n)
    }

    pub fn manhattan(&self, a: u16, b: u16) -> u32 {
        let (ax, ay) = self.xy(a);
        let (bx, by) = self.xy(b);
        (ax - bx).unsigned_abs() + (ay - by).unsigned_abs()
    }

    pub fn floor_cells(&self) -> impl Iterator<Item = u16> + '_ {
        (0..self.cells() as u16).filter(|&c| !self.is_wall(c))
    }
}

/// Directions whose cone contains `cell` as seen from `from`. A cell is
/// north when it is strictly above and no further sideways than up; cells
/// on a diagonal belong to both neighbouring cones.
pub fn cone_mask(maze: &Maze, from: u16, cell: u16) -> u8 {
    let (fx, fy) = maze.xy(from);
    let (cx, cy) = maze.xy(cell);
    let up = fy - cy;
    let dx = cx - fx;
    let mut m = 0u8;
    if up > 0 && dx.abs() <= up {
        m |= 1 << NORTH;
    }
    if up < 0 && dx.abs() <= -up {
        m |= 1 << SOUTH;
    }
    if dx > 0 && up.abs() <= dx {
        m |= 1 << EAST;
    }
    if dx < 0 && up.abs() <= -dx {
        m |= 1 << WEST;
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct PocConfig {
    pub maze: Maze,
    pub ghosts: usize,
    pub food_prob: f64,
    pub chase_prob: f64,
    /// Ghosts chase only within this Manhattan distance.
    pub chase_distance: u32,
    pub discount: f64,
    pub reward_food: f64,
    pub reward_clear: f64,
    /// Paid once for a step that hits a wall or ends in a collision.
    pub reward_penalty: f64,
    pub reward_step: f64,
}

impl PocConfig {
    pub fn new(maze: Maze, ghosts: usize) -> Self {
        PocConfig {
            maze,
            ghosts,
            food_prob: 0.5,
            chase_prob: 0.75,
            chase_distance: 2,
            discount: 0.95,
            reward_food: 1.0,
            reward_clear: 1000.0,
            reward_penalty: -100.0,
            reward_step: -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PocState {
    pub agent: u16,
    pub ghosts: [u16; MAX_GHOSTS],
    pub food: [u64; MAX_CELLS / 64],
    pub food_count: u16,
    /// Direction of the last successful move, or `u8::MAX`.
    pub last_dir: u8,
    pub last_obs: u16,
}

impl PocState {
    pub fn has_food(&self, cell: u16) -> bool {
        self.food[cell as usize / 64] >> (cell % 64) & 1 == 1
    }

    fn set_food(&mut self, cell: u16, on: bool) {
        let bit = 1u64 << (cell % 64);
        let word = &mut self.food[cell as usize / 64];
        if on && *word & bit == 0 {
            *word |= bit;
            self.food_count += 1;
        } else if !on && *word & bit != 0 {
            *word &= !bit;
            self.food_count -= 1;
        }
    }
}

#[derive(Clone, Debug)]
pub struct Pocman {
    pub config: PocConfig,
    atoms: Vec<GroundAtom>,
    /// Ghost start cells, cycling through the maze spawns.
    spawns: Vec<u16>,
}

impl Pocman {
    pub fn new(config: PocConfig) -> Result<Pocman, MazeError> {
        if config.ghosts > MAX_GHOSTS {
            return Err(MazeError::Parameter(format!("at most {MAX_GHOSTS} ghosts")));
        }
        if config.ghosts > 0 && config.maze.ghost_spawns.is_empty() {
            return Err(MazeError::Parameter("maze has no ghost spawn".into()));
        }
        for (name, p) in [("food_prob", config.food_prob), ("chase_prob", config.chase_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(MazeError::Parameter(format!("{name} must be in [0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&config.discount) {
            return Err(MazeError::Parameter("discount must be in [0, 1)".into()));
        }
        let atoms = DIRECTIONS.iter().map(|d| atom("move", [*d])).collect();
        let spawns =
            (0..config.ghosts).map(|i| config.maze.ghost_spawns[i % config.maze.ghost_spawns.len()]).collect();
        Ok(Pocman { config, atoms, spawns })
    }

    pub fn maze(&self) -> &Maze {
        &self.config.maze
    }

    pub fn ghosts<'a>(&self, s: &'a PocState) -> &'a [u16] {
        &s.ghosts[..self.config.ghosts]
    }

    /// The deterministic 10-bit observation of `s`.
    pub fn observe(&self, s: &PocState) -> u16 {
        let maze = self.maze();
        let ghosts = self.ghosts(s);
        let mut o = 0u16;
        for dir in 0..4 {
            let mut cell = s.agent;
            while let Some(next) = maze.neighbor(cell, dir) {
                if ghosts.contains(&next) {
                    o |= 1 << (obs::SEE + dir as u16);
                    break;
                }
                cell = next;
            }
            if maze.neighbor(s.agent, dir).is_none() {
                o |= 1 << (obs::WALL + dir as u16);
            }
        }
        if ghosts.iter().any(|&g| maze.manhattan(g, s.agent) <= 2) {
            o |= obs::HEAR;
        }
        let smell = s.has_food(s.agent) || (0..4).any(|d| maze.neighbor(s.agent, d).is_some_and(|c| s.has_food(c)));
        if smell {
            o |= obs::SMELL;
        }
        o
    }

    fn start_state(&self) -> PocState {
        let mut ghosts = [0u16; MAX_GHOSTS];
        ghosts[..self.spawns.len()].copy_from_slice(&self.spawns);
        PocState {
            agent: self.maze().agent_spawn,
            ghosts,
            food: [0; MAX_CELLS / 64],
            food_count: 0,
            last_dir: u8::MAX,
            last_obs: 0,
        }
    }

    fn with_random_food<R: Rng + ?Sized>(&self, mut s: PocState, rng: &mut R) -> PocState {
        s.food = [0; MAX_CELLS / 64];
        s.food_count = 0;
        let cells: Vec<u16> = self.maze().floor_cells().collect();
        for c in cells {
            if rng.random::<f64>() < self.config.food_prob {
                s.set_food(c, true);
            }
        }
        s.last_obs = self.observe(&s);
        s
    }

    pub fn init<R: Rng + ?Sized>(&self, particles: usize, rng: &mut R) -> (PocState, ParticleBelief<PocState>) {
        let truth = self.sample_initial_state(rng);
        let belief = ParticleBelief::from_prior(self, &truth, particles, rng);
        (truth, belief)
    }

    fn move_ghost<R: Rng + ?Sized>(&self, ghost: u16, agent: u16, rng: &mut R) -> u16 {
        let maze = self.maze();
        let legal: SmallVec<[u16; 4]> = (0..4).filter_map(|d| maze.neighbor(ghost, d)).collect();
        if legal.is_empty() {
            return ghost;
        }
        let u = rng.random::<f64>();
        if maze.manhattan(ghost, agent) <= self.config.chase_distance && u < self.config.chase_prob {
            return *legal.iter().min_by_key(|&&c| maze.manhattan(c, agent)).unwrap();
        }
        legal[rng.random_range(0..legal.len())]
    }

    fn food_bound(&self, s: &PocState) -> f64 {
        let g = self.config.discount;
        let mut sum = 0.0;
        let mut far = 0u32;
        for c in self.maze().floor_cells() {
            if s.has_food(c) {
                let d = self.maze().manhattan(s.agent, c);
                sum += g.powi(1 + d as i32) * self.config.reward_food;
                far = far.max(d);
            }
        }
        sum + g.powi(1 + far as i32) * self.config.reward_clear
    }
}

impl GenerativeModel for Pocman {
    type State = PocState;
    type Observation = u16;

    fn num_actions(&self) -> usize {
        4
    }

    fn action_atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    fn discount(&self) -> f64 {
        self.config.discount
    }

    fn max_reward(&self) -> f64 {
        self.config.reward_clear
    }

    fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> PocState {
        self.with_random_food(self.start_state(), rng)
    }

    fn sample_belief_particle<R: Rng + ?Sized>(&self, truth: &PocState, rng: &mut R) -> PocState {
        let mut p = self.with_random_food(*truth, rng);
        p.last_obs = truth.last_obs;
        p
    }

    fn step<R: Rng + ?Sized>(&self, s: &mut PocState, action: usize, rng: &mut R) -> StepOutcome<u16> {
        let maze = self.maze();
        let mut reward = self.config.reward_step;
        let mut penalty = false;
        let old_agent = s.agent;
        match maze.neighbor(s.agent, action) {
            Some(c) => {
                s.agent = c;
                s.last_dir = action as u8;
            }
            None => penalty = true,
        }
        let mut dead = false;
        for i in 0..self.config.ghosts {
            let old = s.ghosts[i];
            let new = self.move_ghost(old, old_agent, rng);
            s.ghosts[i] = new;
            if new == s.agent || (new == old_agent && old == s.agent) {
                dead = true;
            }
        }
        let mut terminal = false;
        if dead {
            penalty = true;
            terminal = true;
        } else if s.has_food(s.agent) {
            s.set_food(s.agent, false);
            reward += self.config.reward_food;
            if s.food_count == 0 {
                reward += self.config.reward_clear;
                terminal = true;
            }
        }
        if penalty {
            reward += self.config.reward_penalty;
        }
        let o = self.observe(s);
        s.last_obs = o;
        StepOutcome { observation: o, reward, terminal }
    }

    fn observation_possible(&self, s: &PocState, _action: usize, o: &u16) -> bool {
        self.observe(s) == *o
    }

    /// Moves one ghost to a random neighbouring floor cell. Every other
    /// call instead redraws the food of one cell next to the agent, so that
    /// a wrong smell bit can be repaired too.
    fn perturb<R: Rng + ?Sized>(&self, s: &mut PocState, rng: &mut R) {
        let maze = self.maze();
        if self.config.ghosts == 0 || rng.random_bool(0.5) {
            let near: SmallVec<[u16; 4]> = (0..4).filter_map(|d| maze.neighbor(s.agent, d)).collect();
            if !near.is_empty() {
                let c = near[rng.random_range(0..near.len())];
                s.set_food(c, rng.random::<f64>() < self.config.food_prob);
            }
            return;
        }
        let i = rng.random_range(0..self.config.ghosts);
        let legal: SmallVec<[u16; 4]> = (0..4).filter_map(|d| maze.neighbor(s.ghosts[i], d)).collect();
        if !legal.is_empty() {
            s.ghosts[i] = legal[rng.random_range(0..legal.len())];
        }
    }
}

const FEATURES: &[&str] = &["ghost", "food", "wall"];

impl FeatureLift for Pocman {
    /// `ghost(C,D,V)` and `food(C,D,V)` atoms relative to the root position.
    type Frozen = Vec<GroundAtom>;

    fn freeze(&self, particles: &[PocState]) -> Vec<GroundAtom> {
        let maze = self.maze();
        let root = particles[0].agent;
        let max_d = *FEATURE_DISTANCES.end();
        // Floor cells near the root, nearest first, with their cones.
        let mut near: Vec<(u32, u16, u8)> = maze
            .floor_cells()
            .filter_map(|c| {
                let d = maze.manhattan(root, c);
                let m = cone_mask(maze, root, c);
                (d <= max_d && m != 0).then_some((d, c, m))
            })
            .collect();
        near.sort();
        // hist[kind][dir][d]: particles whose nearest object in the cone is at d.
        let mut hist = [[[0usize; 9]; 4]; 2];
        for p in particles {
            let mut ghost_best = [u32::MAX; 4];
            for &g in self.ghosts(p) {
                let m = cone_mask(maze, root, g);
                let d = maze.manhattan(root, g);
                for dir in 0..4 {
                    if m >> dir & 1 == 1 {
                        ghost_best[dir] = ghost_best[dir].min(d);
                    }
                }
            }
            let mut food_best = [u32::MAX; 4];
            let mut open = 4;
            for &(d, c, m) in &near {
                if open == 0 {
                    break;
                }
                if p.has_food(c) {
                    for dir in 0..4 {
                        if m >> dir & 1 == 1 && food_best[dir] == u32::MAX {
                            food_best[dir] = d;
                            open -= 1;
                        }
                    }
                }
            }
            for dir in 0..4 {
                for (kind, best) in [ghost_best[dir], food_best[dir]].into_iter().enumerate() {
                    if best <= max_d {
                        hist[kind][dir][best as usize] += 1;
                    }
                }
            }
        }
        let n = particles.len();
        let mut atoms = Vec::with_capacity(2 * 4 * 8);
        for (kind, name) in ["ghost", "food"].into_iter().enumerate() {
            for dir in 0..4 {
                let mut cum = hist[kind][dir][0];
                for d in FEATURE_DISTANCES {
                    cum += hist[kind][dir][d as usize];
                    let args: [Value; 3] = [DIRECTIONS[dir].into(), (d as i64).into(), discretize_count(cum, n, 10).into()];
                    atoms.push(atom(name, args));
                }
            }
        }
        atoms
    }

    fn lift(&self, frozen: &Vec<GroundAtom>, s: &PocState) -> FeatureSet {
        let mut atoms = frozen.clone();
        for dir in 0..4 {
            if self.maze().neighbor(s.agent, dir).is_none() {
                atoms.push(atom("wall", [DIRECTIONS[dir]]));
            }
        }
        FeatureSet::from_atoms(atoms)
    }

    fn observable_key(&self, s: &PocState) -> u64 {
        s.agent as u64
    }

    fn feature_predicates(&self) -> &'static [&'static str] {
        FEATURES
    }
}

impl Domain for Pocman {
    fn name(&self) -> String {
        format!("pocman({}x{},{})", self.maze().width, self.maze().height, self.config.ghosts)
    }

    /// Open directions without a visible ghost, avoiding turning back;
    /// relaxed step by step when nothing qualifies.
    fn preferred_actions(&self, s: &PocState) -> SmallVec<[usize; 8]> {
        let open = |d: usize| self.maze().neighbor(s.agent, d).is_some();
        let seen = |d: usize| s.last_obs >> (obs::SEE + d as u16) & 1 == 1;
        let back = |d: usize| s.last_dir != u8::MAX && d == (s.last_dir as usize + 2) % 4;
        let tiers: [&dyn Fn(usize) -> bool; 3] =
            [&|d| open(d) && !seen(d) && !back(d), &|d| open(d) && !seen(d), &|d| open(d)];
        for tier in tiers {
            let v: SmallVec<[usize; 8]> = (0..4).filter(|&d| tier(d)).collect();
            if !v.is_empty() {
                return v;
            }
        }
        (0..4).collect()
    }

    fn default_action(&self) -> usize {
        NORTH
    }

    /// Discounted food rewards at their Manhattan distances plus the clear
    /// reward at the farthest one.
    fn hindsight_bound(&self, s: &PocState) -> f64 {
        self.food_bound(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Symbol;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::VecDeque;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn micro(ghosts: usize) -> Pocman {
        Pocman::new(PocConfig::new(Maze::micro(), ghosts)).unwrap()
    }

    fn cell(m: &Maze, x: usize, y: usize) -> u16 {
        (y * m.width + x) as u16
    }

    fn empty_state(p: &Pocman, agent: u16, ghosts: &[u16]) -> PocState {
        let mut s = p.start_state();
        s.agent = agent;
        s.ghosts[..ghosts.len()].copy_from_slice(ghosts);
        s
    }

    fn connected(m: &Maze) -> bool {
        let mut seen = vec![false; m.cells()];
        let mut q = VecDeque::from([m.agent_spawn]);
        seen[m.agent_spawn as usize] = true;
        while let Some(c) = q.pop_front() {
            for d in 0..4 {
                if let Some(n) = m.neighbor(c, d) {
                    if !seen[n as usize] {
                        seen[n as usize] = true;
                        q.push_back(n);
                    }
                }
            }
        }
        m.floor_cells().all(|c| seen[c as usize])
    }

    #[test]
    fn maze_fixtures_are_connected() {
        let micro = Maze::micro();
        assert_eq!((micro.width, micro.height, micro.ghost_spawns.len()), (10, 10, 2));
        assert!(connected(&micro));
        let full = Maze::full();
        assert_eq!((full.width, full.height, full.ghost_spawns.len()), (17, 19, 4));
        assert!(connected(&full));
    }

    #[test]
    fn food_probability_extremes() {
        let mut cfg = PocConfig::new(Maze::micro(), 2);
        cfg.food_prob = 0.0;
        let p = Pocman::new(cfg.clone()).unwrap();
        assert_eq!(p.sample_initial_state(&mut rng(1)).food_count, 0);
        cfg.food_prob = 1.0;
        let p = Pocman::new(cfg).unwrap();
        let s = p.sample_initial_state(&mut rng(1));
        assert_eq!(s.food_count as usize, p.maze().floor_cells().count());
        assert!(p.maze().floor_cells().all(|c| s.has_food(c)));
    }

    #[test]
    fn ghosts_start_on_spawns() {
        let p = micro(2);
        let s = p.sample_initial_state(&mut rng(0));
        assert_eq!(p.ghosts(&s), p.maze().ghost_spawns.as_slice());
    }

    #[test]
    fn reward_composition() {
        let p = micro(0);
        let m = p.maze();
        // Agent at the spawn (4,8); north of it is a wall.
        let mut s = empty_state(&p, m.agent_spawn, &[]);
        let out = p.step(&mut s, NORTH, &mut rng(0));
        assert_eq!((out.reward, out.terminal), (-101.0, false));
        assert_eq!(s.agent, m.agent_spawn);

        let mut s = empty_state(&p, m.agent_spawn, &[]);
        s.set_food(cell(m, 5, 8), true);
        s.set_food(cell(m, 6, 8), true);
        let out = p.step(&mut s, EAST, &mut rng(0));
        assert_eq!((out.reward, out.terminal), (0.0, false));
        let out = p.step(&mut s, EAST, &mut rng(0));
        assert_eq!((out.reward, out.terminal), (1000.0, true));
    }

    #[test]
    fn collision_on_swap_is_fatal() {
        let mut cfg = PocConfig::new(Maze::micro(), 1);
        cfg.chase_prob = 1.0;
        let p = Pocman::new(cfg).unwrap();
        let m = p.maze();
        let mut s = empty_state(&p, cell(m, 0, 9), &[cell(m, 1, 9)]);
        let out = p.step(&mut s, EAST, &mut rng(0));
        assert!(out.terminal);
        assert_eq!(out.reward, -101.0);
    }

    #[test]
    fn observation_bits() {
        let p = micro(1);
        let m = p.maze();
        let far = empty_state(&p, cell(m, 0, 0), &[cell(m, 9, 9)]);
        let o = p.observe(&far);
        assert_eq!(o & 0b1111, 0);
        assert_eq!(o & obs::HEAR, 0);
        // Corner: walls north and west only.
        assert_eq!(o >> obs::WALL & 0b1111, (1 << NORTH) | (1 << WEST));
        // Ghost further along the top row, nothing in between.
        let row = empty_state(&p, cell(m, 0, 0), &[cell(m, 7, 0)]);
        assert_eq!(p.observe(&row) & 0b1111, 1 << EAST);
        // A wall blocks the line of sight.
        let blocked = empty_state(&p, cell(m, 2, 2), &[cell(m, 2, 0)]);
        assert_eq!(p.observe(&blocked) & 0b1111, 0);
        assert_ne!(p.observe(&blocked) & obs::HEAR, 0);
    }

    #[test]
    fn ghost_due_north_features() {
        let p = micro(1);
        let m = p.maze();
        let agent = cell(m, 0, 9);
        let s = empty_state(&p, agent, &[cell(m, 0, 6)]);
        let fs = p.lift(&p.freeze(&[s; 5]), &s);
        for d in 1..=8i64 {
            let v = if d >= 3 { 100 } else { 0 };
            assert!(fs.contains(&atom("ghost", [Value::from("north"), d.into(), v.into()])), "d={d}");
            assert!(fs.contains(&atom("ghost", [Value::from("east"), d.into(), 0i64.into()])));
        }
        assert!(fs.contains(&atom("wall", ["south"])));
        assert!(fs.contains(&atom("wall", ["west"])));
        assert_eq!(fs.with_pred(&Symbol::new("wall")).len(), 2);
    }

    #[test]
    fn hindsight_bound_examples() {
        let p = micro(0);
        let m = p.maze();
        let mut s = empty_state(&p, m.agent_spawn, &[]);
        assert!((p.hindsight_bound(&s) - 0.95 * 1000.0).abs() < 1e-9);
        s.set_food(cell(m, 7, 8), true);
        let expect = 0.95f64.powi(4) * 1.0 + 0.95f64.powi(4) * 1000.0;
        assert!((p.hindsight_bound(&s) - expect).abs() < 1e-9);
        assert!((expect - 815.0).abs() < 0.5);
    }

    #[test]
    fn preferred_avoids_walls_and_reversal() {
        let p = micro(0);
        let m = p.maze();
        let mut s = empty_state(&p, m.agent_spawn, &[]);
        s.last_dir = EAST as u8;
        assert_eq!(p.preferred_actions(&s).as_slice(), &[EAST, SOUTH]);
    }

    proptest! {
        #[test]
        fn ghosts_stay_on_floor_and_food_shrinks(seed in 0u64..500, actions in prop::collection::vec(0usize..4, 1..80)) {
            let mut cfg = PocConfig::new(Maze::micro(), 2);
            cfg.chase_distance = 4;
            let p = Pocman::new(cfg).unwrap();
            let mut r = rng(seed);
            let mut s = p.sample_initial_state(&mut r);
            for a in actions {
                let before = s.food_count;
                let out = p.step(&mut s, a, &mut r);
                prop_assert!(!p.maze().is_wall(s.agent));
                for &g in p.ghosts(&s) {
                    prop_assert!(!p.maze().is_wall(g));
                }
                prop_assert!(s.food_count <= before);
                prop_assert!((-101.0..=1000.0).contains(&out.reward));
                prop_assert_eq!(out.observation, p.observe(&s));
                if out.terminal {
                    break;
                }
                prop_assert!(s.food_count > 0 || before == 0);
            }
        }

        #[test]
        fn cone_values_grow_with_distance(seed in 0u64..200) {
            let p = micro(2);
            let mut r = rng(seed);
            let particles: Vec<PocState> = (0..50).map(|_| {
                let mut s = p.sample_initial_state(&mut r);
                for _ in 0..5 { p.perturb(&mut s, &mut r); }
                s
            }).collect();
            let frozen = p.freeze(&particles);
            for w in frozen.windows(2) {
                if w[0].args[0] == w[1].args[0] && w[0].pred == w[1].pred {
                    prop_assert!(w[0].args[2] <= w[1].args[2]);
                }
            }
        }
    }
}
