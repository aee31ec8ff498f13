//! Rocksample on an N×N grid with M rocks.
//!
//! Coordinates are zero-based with `y` growing northwards. Actions are
//! `north, south, east, west, sample, check(1..=M)`; moving east from the
//! last column exits the grid.

use std::collections::BTreeMap;

use rand::Rng;
use smallvec::SmallVec;

use crate::features::{discretize_count, Domain, FeatureLift};
use crate::logic::{atom, FeatureSet, GroundAtom};
use crate::pomdp::{GenerativeModel, ParticleBelief, StepOutcome};

pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;
pub const SAMPLE: usize = 4;
pub const FIRST_CHECK: usize = 5;

pub const MAX_ROCKS: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct RockConfig {
    pub size: usize,
    pub rocks: usize,
    /// Distance at which sensor efficiency halves.
    pub half_efficiency: f64,
    pub discount: f64,
    pub reward_good: f64,
    pub reward_bad: f64,
    pub reward_exit: f64,
    /// Fixed layout instead of micro-grid placement: start and rock cells.
    pub layout: Option<((u8, u8), Vec<(u8, u8)>)>,
}

impl RockConfig {
    pub fn new(size: usize, rocks: usize) -> Self {
        RockConfig {
            size,
            rocks,
            half_efficiency: 20.0,
            discount: 0.95,
            reward_good: 10.0,
            reward_bad: -10.0,
            reward_exit: 10.0,
            layout: None,
        }
    }

    /// The 2×2 leading example: agent in the bottom-left corner, rock 1
    /// straight north of it and rock 2 diagonally north-east.
    pub fn leading_example() -> Self {
        RockConfig { layout: Some(((0, 0), vec![(0, 1), (1, 1)])), ..RockConfig::new(2, 2) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("grid size must be at least 2, got {0}")]
    Size(usize),
    #[error("rock count must be in 1..={MAX_ROCKS}, got {0}")]
    Rocks(usize),
    #[error("{rocks} rocks need a {cols}x{rows} micro-grid, larger than the {size}x{size} grid")]
    MicroGrid { rocks: usize, cols: usize, rows: usize, size: usize },
    #[error("layout cell ({0},{1}) is outside the grid")]
    Layout(u8, u8),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RockObs {
    None,
    Good,
    Bad,
}

/// Hidden and observable state. `evidence` and `measured` summarise the
/// check observations received so far and drive the hand-coded policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RockState {
    pub x: u8,
    pub y: u8,
    pub valuable: u32,
    pub sampled: u32,
    pub measured: [u8; MAX_ROCKS],
    pub evidence: [i8; MAX_ROCKS],
}

impl RockState {
    pub fn is_valuable(&self, rock: usize) -> bool {
        self.valuable >> rock & 1 == 1
    }

    pub fn is_sampled(&self, rock: usize) -> bool {
        self.sampled >> rock & 1 == 1
    }
}

#[derive(Clone, Debug)]
pub struct RockSample {
    pub config: RockConfig,
    pub start: (u8, u8),
    pub rocks: Vec<(u8, u8)>,
    atoms: Vec<GroundAtom>,
}

/// Micro-grid shape for `m` rocks: `cols = ceil(sqrt m)`, `rows = ceil(m / cols)`.
pub fn micro_grid(m: usize) -> (usize, usize) {
    let mut cols = (m as f64).sqrt().floor() as usize;
    while cols * cols < m {
        cols += 1;
    }
    (cols, m.div_ceil(cols))
}

impl RockSample {
    /// Builds the model, placing rocks one per micro-grid cell with `rng`
    /// unless the config carries a fixed layout.
    pub fn new<R: Rng + ?Sized>(config: RockConfig, rng: &mut R) -> Result<Self, ConfigError> {
        let n = config.size;
        if n < 2 || n > 200 {
            return Err(ConfigError::Size(n));
        }
        if config.rocks == 0 || config.rocks > MAX_ROCKS {
            return Err(ConfigError::Rocks(config.rocks));
        }
        if !(config.half_efficiency > 0.0) {
            return Err(ConfigError::Parameter("half_efficiency must be positive".into()));
        }
        if !(0.0..1.0).contains(&config.discount) {
            return Err(ConfigError::Parameter("discount must be in [0, 1)".into()));
        }
        let (start, rocks) = match &config.layout {
            Some((start, rocks)) => {
                if rocks.len() != config.rocks {
                    return Err(ConfigError::Rocks(rocks.len()));
                }
                for &(x, y) in std::iter::once(start).chain(rocks) {
                    if x as usize >= n || y as usize >= n {
                        return Err(ConfigError::Layout(x, y));
                    }
                }
                (*start, rocks.clone())
            }
            None => {
                let m = config.rocks;
                let (cols, rows) = micro_grid(m);
                if cols > n || rows > n {
                    return Err(ConfigError::MicroGrid { rocks: m, cols, rows, size: n });
                }
                let rocks = (0..m)
                    .map(|i| {
                        let (c, r) = (i % cols, i / cols);
                        let (x0, x1) = (c * n / cols, (c + 1) * n / cols);
                        let (y0, y1) = (r * n / rows, (r + 1) * n / rows);
                        (rng.random_range(x0..x1) as u8, rng.random_range(y0..y1) as u8)
                    })
                    .collect();
                ((0, (n / 2) as u8), rocks)
            }
        };
        let mut atoms: Vec<GroundAtom> =
            ["north", "south", "east", "west", "sample"].iter().map(|s| GroundAtom::constant(s)).collect();
        atoms.extend((1..=config.rocks as i64).map(|i| atom("check", [i])));
        Ok(RockSample { config, start, rocks, atoms })
    }

    pub fn size(&self) -> usize {
        self.config.size
    }

    pub fn num_rocks(&self) -> usize {
        self.rocks.len()
    }

    pub fn rock_at(&self, x: u8, y: u8) -> Option<usize> {
        self.rocks.iter().position(|&p| p == (x, y))
    }

    pub fn distance(&self, s: &RockState, rock: usize) -> u32 {
        let (rx, ry) = self.rocks[rock];
        (s.x as i32 - rx as i32).unsigned_abs() + (s.y as i32 - ry as i32).unsigned_abs()
    }

    /// Probability that a check at Manhattan distance `d` reports the true
    /// value: `(1 + 2^(-d/d0)) / 2`.
    pub fn sensor_accuracy(&self, d: u32) -> f64 {
        (1.0 + (-(d as f64) / self.config.half_efficiency).exp2()) / 2.0
    }

    /// State at the start position with the given rock values.
    pub fn state_with_values(&self, valuable: u32) -> RockState {
        RockState {
            x: self.start.0,
            y: self.start.1,
            valuable,
            sampled: 0,
            measured: [0; MAX_ROCKS],
            evidence: [0; MAX_ROCKS],
        }
    }

    fn random_values<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let mask = if self.num_rocks() == 32 { u32::MAX } else { (1u32 << self.num_rocks()) - 1 };
        rng.random::<u32>() & mask
    }

    fn move_step(&self, s: &mut RockState, action: usize) -> bool {
        let n = self.size() as u8;
        match action {
            NORTH if s.y + 1 < n => s.y += 1,
            SOUTH if s.y > 0 => s.y -= 1,
            EAST if s.x + 1 == n => return true,
            EAST => s.x += 1,
            WEST if s.x > 0 => s.x -= 1,
            _ => {}
        }
        false
    }

    /// Start state and prior belief of `particles` particles.
    pub fn init<R: Rng + ?Sized>(&self, particles: usize, rng: &mut R) -> (RockState, ParticleBelief<RockState>) {
        let truth = self.sample_initial_state(rng);
        let belief = ParticleBelief::from_prior(self, &truth, particles, rng);
        (truth, belief)
    }
}

impl GenerativeModel for RockSample {
    type State = RockState;
    type Observation = RockObs;

    fn num_actions(&self) -> usize {
        FIRST_CHECK + self.num_rocks()
    }

    fn action_atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    fn executed_atom(&self, s: &RockState, action: usize) -> GroundAtom {
        match action {
            EAST if s.x as usize + 1 == self.size() => GroundAtom::constant("exit"),
            SAMPLE => match self.rock_at(s.x, s.y) {
                Some(r) => atom("sample", [r as i64 + 1]),
                None => GroundAtom::constant("sample"),
            },
            a => self.atoms[a].clone(),
        }
    }

    fn discount(&self) -> f64 {
        self.config.discount
    }

    fn max_reward(&self) -> f64 {
        self.config.reward_good.max(self.config.reward_exit)
    }

    fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> RockState {
        self.state_with_values(self.random_values(rng))
    }

    fn sample_belief_particle<R: Rng + ?Sized>(&self, truth: &RockState, rng: &mut R) -> RockState {
        RockState { valuable: self.random_values(rng), ..*truth }
    }

    fn step<R: Rng + ?Sized>(&self, s: &mut RockState, action: usize, rng: &mut R) -> StepOutcome<RockObs> {
        let mut out = StepOutcome { observation: RockObs::None, reward: 0.0, terminal: false };
        match action {
            NORTH | SOUTH | EAST | WEST => {
                if self.move_step(s, action) {
                    out.reward = self.config.reward_exit;
                    out.terminal = true;
                }
            }
            SAMPLE => match self.rock_at(s.x, s.y) {
                Some(r) if !s.is_sampled(r) => {
                    out.reward = if s.is_valuable(r) { self.config.reward_good } else { self.config.reward_bad };
                    s.sampled |= 1 << r;
                }
                _ => {}
            },
            a => {
                let r = a - FIRST_CHECK;
                let correct = rng.random::<f64>() < self.sensor_accuracy(self.distance(s, r));
                let good = s.is_valuable(r) == correct;
                out.observation = if good { RockObs::Good } else { RockObs::Bad };
                s.measured[r] = s.measured[r].saturating_add(1);
                s.evidence[r] = s.evidence[r].saturating_add(if good { 1 } else { -1 });
            }
        }
        out
    }

    fn observation_possible(&self, s: &RockState, action: usize, obs: &RockObs) -> bool {
        if action < FIRST_CHECK {
            return *obs == RockObs::None;
        }
        let r = action - FIRST_CHECK;
        match obs {
            RockObs::None => false,
            _ if self.distance(s, r) > 0 => true,
            RockObs::Good => s.is_valuable(r),
            RockObs::Bad => !s.is_valuable(r),
        }
    }

    fn perturb<R: Rng + ?Sized>(&self, s: &mut RockState, rng: &mut R) {
        let r = rng.random_range(0..self.num_rocks());
        s.valuable ^= 1 << r;
    }
}

const FEATURES: &[&str] = &["guess", "dist", "delta_x", "delta_y", "sampled", "num_sampled"];

impl FeatureLift for RockSample {
    /// `guess(R,V)` atoms, one per rock.
    type Frozen = Vec<GroundAtom>;

    fn freeze(&self, particles: &[RockState]) -> Vec<GroundAtom> {
        let n = particles.len();
        (0..self.num_rocks())
            .map(|r| {
                let hits = particles.iter().filter(|p| p.is_valuable(r)).count();
                atom("guess", [r as i64 + 1, discretize_count(hits, n, 1)])
            })
            .collect()
    }

    fn lift(&self, frozen: &Vec<GroundAtom>, s: &RockState) -> FeatureSet {
        let m = self.num_rocks();
        let mut atoms = Vec::with_capacity(frozen.len() + 4 * m + 1);
        atoms.extend(frozen.iter().cloned());
        for (r, &(rx, ry)) in self.rocks.iter().enumerate() {
            let id = r as i64 + 1;
            atoms.push(atom("dist", [id, self.distance(s, r) as i64]));
            atoms.push(atom("delta_x", [id, rx as i64 - s.x as i64]));
            atoms.push(atom("delta_y", [id, ry as i64 - s.y as i64]));
            if s.is_sampled(r) {
                atoms.push(atom("sampled", [id]));
            }
        }
        let done = s.sampled.count_ones() as usize;
        atoms.push(atom("num_sampled", [discretize_count(done, m, 1)]));
        FeatureSet::from_atoms(atoms)
    }

    fn observable_key(&self, s: &RockState) -> u64 {
        (s.x as u64) << 48 | (s.y as u64) << 32 | s.sampled as u64
    }

    fn feature_predicates(&self) -> &'static [&'static str] {
        FEATURES
    }
}

impl Domain for RockSample {
    fn name(&self) -> String {
        format!("rocksample({},{})", self.size(), self.num_rocks())
    }

    /// Sample a rock believed good; check rocks with little or ambiguous
    /// evidence; head for rocks believed good; otherwise go east.
    fn preferred_actions(&self, s: &RockState) -> SmallVec<[usize; 8]> {
        let mut out = SmallVec::new();
        if let Some(r) = self.rock_at(s.x, s.y) {
            if !s.is_sampled(r) && s.evidence[r] > 0 {
                out.push(SAMPLE);
                return out;
            }
        }
        let mut moves = [false; 4];
        for r in 0..self.num_rocks() {
            if s.is_sampled(r) {
                continue;
            }
            if s.measured[r] < 5 && s.evidence[r].abs() < 2 && out.len() < 4 {
                out.push(FIRST_CHECK + r);
            }
            if s.evidence[r] > 0 {
                let (rx, ry) = self.rocks[r];
                moves[NORTH] |= ry > s.y;
                moves[SOUTH] |= ry < s.y;
                moves[EAST] |= rx > s.x;
                moves[WEST] |= rx < s.x;
            }
        }
        out.extend((0..4).filter(|&a| moves[a]));
        if out.is_empty() {
            out.push(EAST);
        }
        out
    }

    fn default_action(&self) -> usize {
        EAST
    }

    /// Nearest-neighbour tour over valuable unsampled rocks, sampling each
    /// on arrival, then the shortest exit.
    fn hindsight_bound(&self, s: &RockState) -> f64 {
        let g = self.discount();
        let mut pos = (s.x as i32, s.y as i32);
        let mut t = 0i32;
        let mut value = 0.0;
        let mut left: SmallVec<[usize; 16]> =
            (0..self.num_rocks()).filter(|&r| s.is_valuable(r) && !s.is_sampled(r)).collect();
        while !left.is_empty() {
            let (k, d) = left
                .iter()
                .enumerate()
                .map(|(k, &r)| {
                    let (rx, ry) = self.rocks[r];
                    (k, (rx as i32 - pos.0).abs() + (ry as i32 - pos.1).abs())
                })
                .min_by_key(|&(k, d)| (d, k))
                .unwrap();
            let r = left.remove(k);
            t += d;
            value += g.powi(t) * self.config.reward_good;
            t += 1;
            pos = (self.rocks[r].0 as i32, self.rocks[r].1 as i32);
        }
        t += self.size() as i32 - 1 - pos.0;
        value + g.powi(t) * self.config.reward_exit
    }

    fn rule_constants(&self) -> BTreeMap<String, i64> {
        BTreeMap::from([("M".to_string(), self.num_rocks() as i64)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Symbol;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn leading() -> RockSample {
        RockSample::new(RockConfig::leading_example(), &mut rng(0)).unwrap()
    }

    #[test]
    fn micro_grid_places_one_rock_per_quadrant() {
        for seed in 0..50 {
            let rs = RockSample::new(RockConfig::new(12, 4), &mut rng(seed)).unwrap();
            let mut quads: Vec<(u8, u8)> = rs.rocks.iter().map(|&(x, y)| (x / 6, y / 6)).collect();
            quads.sort();
            assert_eq!(quads, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        }
        assert_eq!(micro_grid(4), (2, 2));
        assert_eq!(micro_grid(8), (3, 3));
        assert_eq!(micro_grid(5), (3, 2));
        assert!(matches!(
            RockSample::new(RockConfig::new(2, 9), &mut rng(0)),
            Err(ConfigError::MicroGrid { .. })
        ));
    }

    #[test]
    fn prior_is_balanced() {
        let rs = RockSample::new(RockConfig::new(12, 4), &mut rng(1)).unwrap();
        let (_, belief) = rs.init(1024, &mut rng(2));
        for r in 0..4 {
            let f = belief.fraction(|p| p.is_valuable(r));
            assert!((f - 0.5).abs() <= 0.05, "rock {r}: {f}");
        }
    }

    #[test]
    fn leading_example_features() {
        let rs = leading();
        let s = rs.state_with_values(0b01);
        let particles: Vec<RockState> = (0..100).map(|i| rs.state_with_values(if i < 50 { 1 } else { 2 })).collect();
        let fs = rs.lift(&rs.freeze(&particles), &s);
        assert_eq!(
            fs,
            FeatureSet::parse(
                "{guess(1,50),guess(2,50),dist(1,1),dist(2,2),delta_x(1,0),delta_x(2,1),\
                 delta_y(1,1),delta_y(2,1),num_sampled(0)}"
            )
            .unwrap()
        );
    }

    #[test]
    fn agreeing_particles_give_certain_guess() {
        let rs = RockSample::new(RockConfig::new(12, 4), &mut rng(0)).unwrap();
        let p = vec![rs.state_with_values(0b0001); 10];
        let frozen = rs.freeze(&p);
        assert_eq!(frozen[0], atom("guess", [1, 100]));
        assert_eq!(frozen[1], atom("guess", [2, 0]));
    }

    #[test]
    fn one_of_four_sampled_is_25_percent() {
        let rs = RockSample::new(RockConfig::new(12, 4), &mut rng(0)).unwrap();
        let mut s = rs.state_with_values(0);
        s.sampled = 0b0100;
        let fs = rs.lift(&rs.freeze(&[s]), &s);
        assert_eq!(fs.with_pred(&Symbol::new("num_sampled")), &[atom("num_sampled", [25])]);
        assert_eq!(fs.with_pred(&Symbol::new("sampled")), &[atom("sampled", [3])]);
    }

    #[test]
    fn sampling_and_exit_rewards() {
        let rs = leading();
        let mut s = rs.state_with_values(0b11);
        let r = &mut rng(0);
        assert_eq!(rs.step(&mut s, SAMPLE, r).reward, 0.0);
        assert_eq!(rs.step(&mut s, NORTH, r).reward, 0.0);
        let out = rs.step(&mut s, SAMPLE, r);
        assert_eq!((out.reward, out.terminal), (10.0, false));
        assert!(s.is_sampled(0));
        assert_eq!(rs.step(&mut s, SAMPLE, r).reward, 0.0);
        assert_eq!(rs.step(&mut s, EAST, r).terminal, false);
        assert_eq!(rs.executed_atom(&s, EAST), GroundAtom::constant("exit"));
        let out = rs.step(&mut s, EAST, r);
        assert_eq!((out.reward, out.terminal), (10.0, true));
    }

    #[test]
    fn check_at_distance_zero_is_exact() {
        let rs = leading();
        assert_eq!(rs.sensor_accuracy(0), 1.0);
        let mut r = rng(5);
        for values in [0b00u32, 0b01] {
            let mut s = rs.state_with_values(values);
            s.y = 1;
            for _ in 0..200 {
                let o = rs.step(&mut s, FIRST_CHECK, &mut r).observation;
                assert_eq!(o == RockObs::Good, values & 1 == 1);
            }
        }
    }

    #[test]
    fn check_frequency_matches_sensor_model() {
        let rs = RockSample::new(RockConfig::new(12, 4), &mut rng(3)).unwrap();
        let mut s = rs.state_with_values(0b1111);
        let d = rs.distance(&s, 0);
        let mut r = rng(9);
        let n = 40_000;
        let good = (0..n).filter(|_| rs.step(&mut s, FIRST_CHECK, &mut r).observation == RockObs::Good).count();
        let expect = rs.sensor_accuracy(d);
        assert!((good as f64 / n as f64 - expect).abs() < 0.01);
    }

    #[test]
    fn hindsight_with_nothing_valuable_is_exit_only() {
        let rs = RockSample::new(RockConfig::new(12, 4), &mut rng(0)).unwrap();
        let s = rs.state_with_values(0);
        assert!((rs.hindsight_bound(&s) - 0.95f64.powi(11) * 10.0).abs() < 1e-12);
    }

    #[test]
    fn preferred_actions_sample_good_rock() {
        let rs = leading();
        let mut s = rs.state_with_values(0b01);
        s.y = 1;
        s.evidence[0] = 2;
        assert_eq!(rs.preferred_actions(&s).as_slice(), &[SAMPLE]);
        let fresh = rs.state_with_values(0);
        assert_eq!(rs.preferred_actions(&fresh).as_slice(), &[FIRST_CHECK, FIRST_CHECK + 1]);
    }

    proptest! {
        #[test]
        fn moves_stay_on_grid(seed in 0u64..1000, actions in prop::collection::vec(0usize..9, 1..60)) {
            let rs = RockSample::new(RockConfig::new(7, 4), &mut rng(seed)).unwrap();
            let mut s = rs.sample_initial_state(&mut rng(seed));
            let mut r = rng(seed + 1);
            for a in actions {
                let before = s.sampled;
                let out = rs.step(&mut s, a, &mut r);
                prop_assert!([-10.0, 0.0, 10.0].contains(&out.reward));
                prop_assert!((s.x as usize) < 7 && (s.y as usize) < 7);
                prop_assert_eq!(s.sampled & before, before);
                if out.terminal {
                    prop_assert!(a == EAST && s.x == 6);
                    break;
                }
            }
        }

        #[test]
        fn sensor_accuracy_is_monotone(d in 0u32..200) {
            let rs = leading();
            prop_assert!(rs.sensor_accuracy(d) >= rs.sensor_accuracy(d + 1));
            prop_assert!(rs.sensor_accuracy(d) > 0.5);
        }
    }
}
