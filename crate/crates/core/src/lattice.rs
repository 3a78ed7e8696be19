//! Aggregation models on the square lattice Z² with killing, reflecting,
//! and killing-passing-reflecting boundary conditions.
//!
//! All models emit mass or particles from the origin. Internal DLA walks a
//! particle uniformly over the four neighbors until it reaches an
//! unoccupied non-killing site, where it settles; a particle arriving at a
//! killing site is removed and a fresh one is emitted. The rotor-router is
//! the deterministic analogue: each site cycles its outgoing direction in
//! the fixed order N→E→S→W. The divisible sandpile topples excess mass
//! above 1 equally to the four neighbors.
//!
//! Reproducibility: stochastic runs use a ChaCha8 generator with one
//! substream per emitted particle, so a particle's trajectory depends only
//! on (seed, emission index); rotor and sandpile runs consume no
//! randomness. Serialized outputs are byte-identical across reruns.

use crate::error::{Error, Result};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

pub type Site = (i64, i64);

/// The two killed-angle geometries exercised by the simulations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleSides {
    /// Half-plane, b = 1/2: walk on {x ≥ 0}, killing on {(0, y): y ≠ 0}.
    Half,
    /// Quarter-plane, b = 1/4: walk on {x ≥ 0, y ≥ 0}, killed on exit.
    Quarter,
}

impl AngleSides {
    pub fn b(&self) -> f64 {
        match self {
            AngleSides::Half => 0.5,
            AngleSides::Quarter => 0.25,
        }
    }
}

/// Lattice boundary rule. The origin is always exempt (it is the source).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition {
    None,
    /// Killing at {(x, 0): x ≤ −1}.
    KillNegAxis,
    /// Killing on the sides of an angle with vertex at the origin.
    ///
    /// Half-plane: killing sites are the vertical axis minus the origin,
    /// plus everything left of it. Quarter-plane: a particle is killed when
    /// it steps out of {x ≥ 0, y ≥ 0}; the boundary rays themselves are
    /// ordinary sites (killing on the rays would seal the source corner
    /// completely, since all four origin neighbors would kill).
    KillAngleSides(AngleSides),
    /// Reflecting above the positive half-axis, killing below (the
    /// killing-passing-reflecting rule at p = 0).
    KillReflect,
    /// Killing-passing-reflecting on the positive half-axis: steps from
    /// (x, 1) down to (x, 0), x ≥ 1 are cancelled; steps from (x, −1) up to
    /// (x, 0) pass with probability p and kill otherwise.
    Kpr(f64),
}

impl BoundaryCondition {
    /// Sites where arrival kills a particle. The reflect/pass rules of
    /// `KillReflect`/`Kpr` act on crossings, not sites, so they have no
    /// killing sites.
    pub fn is_killing(&self, x: i64, y: i64) -> bool {
        match self {
            BoundaryCondition::None | BoundaryCondition::KillReflect | BoundaryCondition::Kpr(_) => {
                false
            }
            BoundaryCondition::KillNegAxis => y == 0 && x <= -1,
            BoundaryCondition::KillAngleSides(AngleSides::Half) => {
                x < 0 || (x == 0 && y != 0)
            }
            BoundaryCondition::KillAngleSides(AngleSides::Quarter) => x < 0 || y < 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let BoundaryCondition::Kpr(p) = self {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::param("p", format!("need 0 ≤ p ≤ 1, got {p}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::None => write!(f, "none"),
            BoundaryCondition::KillNegAxis => write!(f, "kill_neg_axis"),
            BoundaryCondition::KillAngleSides(AngleSides::Half) => {
                write!(f, "kill_angle_sides(0.5)")
            }
            BoundaryCondition::KillAngleSides(AngleSides::Quarter) => {
                write!(f, "kill_angle_sides(0.25)")
            }
            BoundaryCondition::KillReflect => write!(f, "kill_reflect"),
            BoundaryCondition::Kpr(p) => write!(f, "kpr({p})"),
        }
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(BoundaryCondition::None),
            "kill_neg_axis" => Ok(BoundaryCondition::KillNegAxis),
            "kill_angle_sides(0.5)" => Ok(BoundaryCondition::KillAngleSides(AngleSides::Half)),
            "kill_angle_sides(0.25)" => {
                Ok(BoundaryCondition::KillAngleSides(AngleSides::Quarter))
            }
            "kill_reflect" => Ok(BoundaryCondition::KillReflect),
            _ => {
                if let Some(inner) = s.strip_prefix("kpr(").and_then(|t| t.strip_suffix(')')) {
                    let p: f64 = inner
                        .parse()
                        .map_err(|_| Error::MalformedCluster(format!("bad kpr p: {inner}")))?;
                    let bc = BoundaryCondition::Kpr(p);
                    bc.validate()?;
                    Ok(bc)
                } else {
                    Err(Error::MalformedCluster(format!("unknown boundary condition: {s}")))
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Idla,
    RotorRouter,
    DivisibleSandpile,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Idla => write!(f, "idla"),
            ModelKind::RotorRouter => write!(f, "rotor_router"),
            ModelKind::DivisibleSandpile => write!(f, "divisible_sandpile"),
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idla" => Ok(ModelKind::Idla),
            "rotor_router" => Ok(ModelKind::RotorRouter),
            "divisible_sandpile" => Ok(ModelKind::DivisibleSandpile),
            _ => Err(Error::MalformedCluster(format!("unknown model: {s}"))),
        }
    }
}

/// Which site a passing particle lands on under the KPR rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PassVariant {
    /// Land on the axis site (x, 0) and continue as an ordinary walker.
    #[default]
    LandOnAxis,
    /// Skip the axis entirely and land at (x, 1).
    SkipAxis,
}

/// Initial rotor directions for the rotor-router model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RotorInit {
    #[default]
    AllNorth,
    /// North above the horizontal axis, South below, East on it; the
    /// closest a rotor field can come to y ↔ −y mirror symmetry.
    MirrorAxis,
}

impl fmt::Display for RotorInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RotorInit::AllNorth => write!(f, "all_north"),
            RotorInit::MirrorAxis => write!(f, "mirror_axis"),
        }
    }
}

/// Tunables shared by the walk-based models.
#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    /// Cap on total steps (moves, cancelled moves and kills all count).
    pub step_cap: u64,
    pub pass_variant: PassVariant,
    /// Whether particles may settle on the positive half-axis under
    /// `KillReflect`/`Kpr`.
    pub settle_on_axis: bool,
    pub rotor_init: RotorInit,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            step_cap: crate::defaults::STEP_CAP,
            pass_variant: PassVariant::default(),
            settle_on_axis: true,
            rotor_init: RotorInit::default(),
        }
    }
}

/// A finished (or truncated) aggregation cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeCluster {
    pub model: ModelKind,
    pub bc: BoundaryCondition,
    pub seed: u64,
    /// Total particles produced, killed ones included.
    pub emitted: u64,
    /// True when the run hit its step cap before settling everything.
    pub truncated: bool,
    sites: Vec<Site>,
}

impl LatticeCluster {
    pub fn n(&self) -> usize {
        self.sites.len()
    }

    /// Occupied sites in settlement order.
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site_set(&self) -> HashSet<Site> {
        self.sites.iter().copied().collect()
    }

    /// 4-connectivity of the occupied set (all growth models produce
    /// connected clusters containing the origin).
    pub fn is_connected(&self) -> bool {
        connected_components(&self.sites) == 1
    }
}

pub fn connected_components(sites: &[Site]) -> usize {
    if sites.is_empty() {
        return 0;
    }
    let set: HashSet<Site> = sites.iter().copied().collect();
    let mut seen: HashSet<Site> = HashSet::with_capacity(set.len());
    let mut components = 0;
    for &start in sites {
        if seen.contains(&start) {
            continue;
        }
        components += 1;
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some((x, y)) = queue.pop_front() {
            for next in [(x, y + 1), (x + 1, y), (x, y - 1), (x - 1, y)] {
                if set.contains(&next) && seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
    }
    components
}

// ---------------------------------------------------------------------------
// Occupancy / rotor grid with growth.
// ---------------------------------------------------------------------------

struct Grid {
    half: i64,
    side: i64,
    occupied: Vec<bool>,
    rotors: Vec<u8>,
}

impl Grid {
    fn new(half: i64, with_rotors: bool) -> Grid {
        let side = 2 * half + 1;
        Grid {
            half,
            side,
            occupied: vec![false; (side * side) as usize],
            rotors: if with_rotors { vec![u8::MAX; (side * side) as usize] } else { Vec::new() },
        }
    }

    #[inline]
    fn index(&self, x: i64, y: i64) -> usize {
        ((y + self.half) * self.side + (x + self.half)) as usize
    }

    #[inline]
    fn in_bounds(&self, x: i64, y: i64) -> bool {
        x.abs() < self.half && y.abs() < self.half
    }

    #[inline]
    fn is_occupied(&self, x: i64, y: i64) -> bool {
        self.in_bounds(x, y) && self.occupied[self.index(x, y)]
    }

    fn occupy(&mut self, x: i64, y: i64) {
        if !self.in_bounds(x, y) || x.abs() >= self.half - 2 || y.abs() >= self.half - 2 {
            self.grow((x.abs().max(y.abs()) + 8).max(self.half * 2));
        }
        let i = self.index(x, y);
        self.occupied[i] = true;
    }

    fn grow(&mut self, new_half: i64) {
        let mut next = Grid::new(new_half, !self.rotors.is_empty());
        for y in -self.half..=self.half {
            for x in -self.half..=self.half {
                let old = self.index(x, y);
                let new = next.index(x, y);
                next.occupied[new] = self.occupied[old];
                if !self.rotors.is_empty() {
                    next.rotors[new] = self.rotors[old];
                }
            }
        }
        *self = next;
    }

    /// Turn the rotor at (x, y) one step N→E→S→W and return the new
    /// direction (0 N, 1 E, 2 S, 3 W).
    fn turn_rotor(&mut self, x: i64, y: i64, init: RotorInit) -> u8 {
        if !self.in_bounds(x, y) {
            self.grow((x.abs().max(y.abs()) + 8).max(self.half * 2));
        }
        let i = self.index(x, y);
        let current = if self.rotors[i] == u8::MAX {
            match init {
                RotorInit::AllNorth => 0,
                RotorInit::MirrorAxis => match y.cmp(&0) {
                    std::cmp::Ordering::Greater => 0,
                    std::cmp::Ordering::Less => 2,
                    std::cmp::Ordering::Equal => 1,
                },
            }
        } else {
            self.rotors[i]
        };
        let next = (current + 1) % 4;
        self.rotors[i] = next;
        next
    }
}

#[inline]
fn step_dir(x: i64, y: i64, dir: u8) -> Site {
    match dir {
        0 => (x, y + 1),
        1 => (x + 1, y),
        2 => (x, y - 1),
        _ => (x - 1, y),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum StepOutcome {
    Move(Site),
    Stay,
    Kill,
}

/// Apply the boundary rule to an attempted step. `pass_coin` is consulted
/// only for a KPR crossing from below with 0 < p < 1.
#[inline]
fn apply_step(
    bc: &BoundaryCondition,
    from: Site,
    dir: u8,
    opts: &SimOptions,
    pass_coin: &mut dyn FnMut() -> bool,
) -> StepOutcome {
    let (fx, fy) = from;
    let to = step_dir(fx, fy, dir);
    match bc {
        BoundaryCondition::KillReflect | BoundaryCondition::Kpr(_) => {
            let p = match bc {
                BoundaryCondition::Kpr(p) => *p,
                _ => 0.0,
            };
            if to.1 == 0 && to.0 >= 1 {
                if fy == 1 {
                    // coming from above: reflected, step cancelled
                    return StepOutcome::Stay;
                }
                if fy == -1 {
                    // coming from below: pass with probability p
                    let passes = if p <= 0.0 {
                        false
                    } else if p >= 1.0 {
                        true
                    } else {
                        pass_coin()
                    };
                    if !passes {
                        return StepOutcome::Kill;
                    }
                    return match opts.pass_variant {
                        PassVariant::LandOnAxis => StepOutcome::Move(to),
                        PassVariant::SkipAxis => StepOutcome::Move((to.0, 1)),
                    };
                }
            }
            StepOutcome::Move(to)
        }
        _ => {
            if bc.is_killing(to.0, to.1) {
                StepOutcome::Kill
            } else {
                StepOutcome::Move(to)
            }
        }
    }
}

/// May a particle settle at this site?
#[inline]
fn can_settle(bc: &BoundaryCondition, site: Site, opts: &SimOptions) -> bool {
    match bc {
        BoundaryCondition::KillReflect | BoundaryCondition::Kpr(_) => {
            opts.settle_on_axis || !(site.1 == 0 && site.0 >= 1)
        }
        _ => true,
    }
}

/// Per-particle random source: a ChaCha8 substream indexed by emission
/// number, with 2-bit direction draws batched 16 per block.
struct WalkRng {
    rng: ChaCha8Rng,
    bits: u32,
    remaining: u32,
}

impl WalkRng {
    fn new(seed: u64, particle: u64) -> WalkRng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(particle);
        WalkRng { rng, bits: 0, remaining: 0 }
    }

    #[inline]
    fn direction(&mut self) -> u8 {
        if self.remaining == 0 {
            self.bits = self.rng.next_u32();
            self.remaining = 16;
        }
        let d = (self.bits & 3) as u8;
        self.bits >>= 2;
        self.remaining -= 1;
        d
    }

    #[inline]
    fn coin(&mut self, p: f64) -> bool {
        (self.rng.next_u32() as f64) < p * 4294967296.0
    }
}

fn grid_half_for(n: usize) -> i64 {
    ((1.8 * (n.max(16) as f64).sqrt()) as i64 + 48).max(64)
}

/// Internal DLA with default options.
pub fn run_idla(n: usize, bc: BoundaryCondition, seed: u64) -> Result<LatticeCluster> {
    run_idla_with(n, bc, seed, &SimOptions::default())
}

/// Internal DLA: random walkers from the origin, settling at the first
/// unoccupied non-killing site. `emitted` counts every emission, killed
/// walkers included.
pub fn run_idla_with(
    n: usize,
    bc: BoundaryCondition,
    seed: u64,
    opts: &SimOptions,
) -> Result<LatticeCluster> {
    if n < 1 {
        return Err(Error::param("N", "need at least one particle"));
    }
    bc.validate()?;
    let mut grid = Grid::new(grid_half_for(n), false);
    let mut sites: Vec<Site> = Vec::with_capacity(n);
    let mut emitted: u64 = 0;
    let mut steps: u64 = 0;

    while sites.len() < n {
        let mut rng = WalkRng::new(seed, emitted);
        emitted += 1;
        let mut pos: Site = (0, 0);
        if !grid.is_occupied(0, 0) {
            grid.occupy(0, 0);
            sites.push(pos);
            continue;
        }
        loop {
            if steps >= opts.step_cap {
                return Err(Error::StepCapExceeded {
                    cap: opts.step_cap,
                    settled: sites.len(),
                    partial: Box::new(LatticeCluster {
                        model: ModelKind::Idla,
                        bc,
                        seed,
                        emitted,
                        truncated: true,
                        sites,
                    }),
                });
            }
            steps += 1;
            let dir = rng.direction();
            let p_for_coin = match bc {
                BoundaryCondition::Kpr(p) => p,
                _ => 0.0,
            };
            match apply_step(&bc, pos, dir, opts, &mut || rng.coin(p_for_coin)) {
                StepOutcome::Kill => break,
                StepOutcome::Stay => {}
                StepOutcome::Move(next) => {
                    if !grid.is_occupied(next.0, next.1) && can_settle(&bc, next, opts) {
                        grid.occupy(next.0, next.1);
                        sites.push(next);
                        break;
                    }
                    pos = next;
                }
            }
        }
    }
    Ok(LatticeCluster { model: ModelKind::Idla, bc, seed, emitted, truncated: false, sites })
}

/// Killing-passing-reflecting run: internal DLA under [`BoundaryCondition::Kpr`].
pub fn run_kpr(n: usize, p: f64, seed: u64) -> Result<LatticeCluster> {
    run_idla(n, BoundaryCondition::Kpr(p), seed)
}

/// Rotor-router aggregation with default options (rotors start North).
pub fn run_rotor_router(n: usize, bc: BoundaryCondition, init: RotorInit) -> Result<LatticeCluster> {
    let opts = SimOptions { rotor_init: init, ..SimOptions::default() };
    run_rotor_router_with(n, bc, &opts)
}

/// Rotor-router aggregation: deterministic given the rotor initialization.
/// A particle at an occupied site turns the site's rotor (N→E→S→W) and
/// moves in the new direction; killing and settlement as in internal DLA.
///
/// `Kpr(p)` with 0 < p < 1 is rejected: the rotor model is deterministic.
pub fn run_rotor_router_with(
    n: usize,
    bc: BoundaryCondition,
    opts: &SimOptions,
) -> Result<LatticeCluster> {
    if n < 1 {
        return Err(Error::param("N", "need at least one particle"));
    }
    bc.validate()?;
    if let BoundaryCondition::Kpr(p) = bc {
        if p > 0.0 && p < 1.0 {
            return Err(Error::param(
                "bc",
                "rotor-router is deterministic; kpr needs p = 0 or p = 1",
            ));
        }
    }
    let mut grid = Grid::new(grid_half_for(n), true);
    let mut sites: Vec<Site> = Vec::with_capacity(n);
    let mut emitted: u64 = 0;
    let mut steps: u64 = 0;

    while sites.len() < n {
        emitted += 1;
        let mut pos: Site = (0, 0);
        if !grid.is_occupied(0, 0) {
            grid.occupy(0, 0);
            sites.push(pos);
            continue;
        }
        loop {
            if steps >= opts.step_cap {
                return Err(Error::StepCapExceeded {
                    cap: opts.step_cap,
                    settled: sites.len(),
                    partial: Box::new(LatticeCluster {
                        model: ModelKind::RotorRouter,
                        bc,
                        seed: 0,
                        emitted,
                        truncated: true,
                        sites,
                    }),
                });
            }
            steps += 1;
            let dir = grid.turn_rotor(pos.0, pos.1, opts.rotor_init);
            match apply_step(&bc, pos, dir, opts, &mut || false) {
                StepOutcome::Kill => break,
                StepOutcome::Stay => {}
                StepOutcome::Move(next) => {
                    if !grid.is_occupied(next.0, next.1) && can_settle(&bc, next, opts) {
                        grid.occupy(next.0, next.1);
                        sites.push(next);
                        break;
                    }
                    pos = next;
                }
            }
        }
    }
    Ok(LatticeCluster {
        model: ModelKind::RotorRouter,
        bc,
        seed: 0,
        emitted,
        truncated: false,
        sites,
    })
}

// ---------------------------------------------------------------------------
// Divisible sandpile.
// ---------------------------------------------------------------------------

/// Mass field of a divisible-sandpile relaxation.
#[derive(Clone, Debug)]
pub struct SandpileState {
    mass: HashMap<Site, f64>,
    pub total_injected: f64,
    /// Mass deleted at killing sites (or by the kill share of a pass rule).
    pub absorbed: f64,
    pub topples: u64,
    pub eps_topple: f64,
    pub bc: BoundaryCondition,
}

impl SandpileState {
    pub fn mass_at(&self, site: Site) -> f64 {
        self.mass.get(&site).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.values().sum()
    }

    /// Sites with mass ≥ 1 − ε, sorted by (y, x) for stable output.
    pub fn occupied(&self) -> Vec<Site> {
        let mut sites: Vec<Site> = self
            .mass
            .iter()
            .filter(|&(_, &m)| m >= 1.0 - self.eps_topple)
            .map(|(&s, _)| s)
            .collect();
        sites.sort_by_key(|&(x, y)| (y, x));
        sites
    }

    /// View the occupied region as a cluster artifact.
    pub fn to_cluster(&self) -> LatticeCluster {
        let sites = self.occupied();
        LatticeCluster {
            model: ModelKind::DivisibleSandpile,
            bc: self.bc,
            seed: 0,
            emitted: sites.len() as u64,
            truncated: false,
            sites,
        }
    }
}

/// Relax `total_mass` injected at the origin: sites with excess mass above
/// 1 topple it equally to the four neighbors until every excess is below
/// `eps_topple`. Mass arriving at a killing site is deleted; under
/// `KillReflect`/`Kpr(p)` the quarter crossing the axis from above returns
/// to the toppling site and the quarter from below is split p : 1−p
/// between delivery and deletion.
pub fn run_divisible_sandpile(
    total_mass: f64,
    bc: BoundaryCondition,
    eps_topple: f64,
) -> Result<SandpileState> {
    run_divisible_sandpile_with(total_mass, bc, eps_topple, crate::defaults::TOPPLE_CAP)
}

pub fn run_divisible_sandpile_with(
    total_mass: f64,
    bc: BoundaryCondition,
    eps_topple: f64,
    topple_cap: u64,
) -> Result<SandpileState> {
    if !(total_mass > 0.0) {
        return Err(Error::param("total_mass", "need positive mass"));
    }
    if !(eps_topple > 0.0) {
        return Err(Error::param("eps_topple", "need positive threshold"));
    }
    bc.validate()?;
    let mut state = SandpileState {
        mass: HashMap::new(),
        total_injected: total_mass,
        absorbed: 0.0,
        topples: 0,
        eps_topple,
        bc,
    };
    state.mass.insert((0, 0), total_mass);
    let mut queue: VecDeque<Site> = VecDeque::new();
    let mut queued: HashSet<Site> = HashSet::new();
    if total_mass - 1.0 >= eps_topple {
        queue.push_back((0, 0));
        queued.insert((0, 0));
    }

    while let Some(site) = queue.pop_front() {
        queued.remove(&site);
        let m = state.mass_at(site);
        let excess = m - 1.0;
        if excess < eps_topple {
            continue;
        }
        if state.topples >= topple_cap {
            return Err(Error::NoConvergence {
                what: "sandpile relaxation (topple cap)",
                achieved: excess,
                wanted: eps_topple,
            });
        }
        state.topples += 1;
        state.mass.insert(site, 1.0);
        let share = excess / 4.0;
        let mut returned = 0.0;
        for dir in 0..4u8 {
            let to = step_dir(site.0, site.1, dir);
            let crossing_axis = matches!(bc, BoundaryCondition::KillReflect | BoundaryCondition::Kpr(_))
                && to.1 == 0
                && to.0 >= 1
                && site.1 != 0;
            if crossing_axis {
                let p = match bc {
                    BoundaryCondition::Kpr(p) => p,
                    _ => 0.0,
                };
                if site.1 == 1 {
                    // from above: reflected back
                    returned += share;
                    continue;
                }
                // from below: p passes, 1−p deleted
                state.absorbed += (1.0 - p) * share;
                if p > 0.0 {
                    deliver(&mut state, &mut queue, &mut queued, to, p * share);
                }
                continue;
            }
            if bc.is_killing(to.0, to.1) {
                state.absorbed += share;
                continue;
            }
            deliver(&mut state, &mut queue, &mut queued, to, share);
        }
        if returned > 0.0 {
            deliver(&mut state, &mut queue, &mut queued, site, returned);
        }
    }
    Ok(state)
}

fn deliver(
    state: &mut SandpileState,
    queue: &mut VecDeque<Site>,
    queued: &mut HashSet<Site>,
    site: Site,
    amount: f64,
) {
    let m = state.mass.entry(site).or_insert(0.0);
    *m += amount;
    if *m - 1.0 >= state.eps_topple && queued.insert(site) {
        queue.push_back(site);
    }
}

/// Seed-averaged cluster: sites occupied in at least half of the runs.
/// Smooths per-seed boundary fluctuations before shape comparison.
pub fn majority_cluster(runs: &[LatticeCluster]) -> Result<LatticeCluster> {
    if runs.is_empty() {
        return Err(Error::param("runs", "need at least one cluster"));
    }
    let mut counts: HashMap<Site, u32> = HashMap::new();
    for run in runs {
        for &s in run.sites() {
            *counts.entry(s).or_insert(0) += 1;
        }
    }
    let quorum = runs.len().div_ceil(2) as u32;
    let mut sites: Vec<Site> = counts
        .into_iter()
        .filter(|&(_, c)| c >= quorum)
        .map(|(s, _)| s)
        .collect();
    sites.sort_unstable();
    let emitted = runs.iter().map(|r| r.emitted).sum::<u64>() / runs.len() as u64;
    Ok(LatticeCluster {
        model: runs[0].model,
        bc: runs[0].bc,
        seed: runs[0].seed,
        emitted,
        truncated: false,
        sites,
    })
}

// ---------------------------------------------------------------------------
// Emission-count scaling (Beurling exponent).
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, serde::Serialize)]
pub struct BeurlingPoint {
    pub n: u64,
    pub mean_emitted: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct BeurlingFit {
    /// Least-squares slope of log(mean emitted) against log N.
    pub slope: f64,
    pub slope_stderr: f64,
    /// slope ± 2·stderr.
    pub ci: (f64, f64),
    pub points: Vec<BeurlingPoint>,
}

/// Fit the emission-count scaling exponent: run `seeds_per_n` independent
/// runs at each N, regress log(mean emitted) on log N. Runs are
/// parallelized; seeds are derived deterministically from `base_seed`.
pub fn beurling_fit(
    model: ModelKind,
    bc: BoundaryCondition,
    ns: &[usize],
    seeds_per_n: u32,
    base_seed: u64,
    opts: &SimOptions,
) -> Result<BeurlingFit> {
    let mut distinct: Vec<usize> = ns.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::param("Ns", "need at least 3 distinct N values"));
    }
    if seeds_per_n < 3 && model == ModelKind::Idla {
        return Err(Error::param("seeds", "need at least 3 seeds per N"));
    }
    use rayon::prelude::*;
    let mut jobs: Vec<(usize, u64)> = Vec::new();
    for (i, &n) in distinct.iter().enumerate() {
        let reps = if model == ModelKind::Idla { seeds_per_n } else { 1 };
        for s in 0..reps {
            jobs.push((n, base_seed + (i as u64) * 1_000_003 + s as u64));
        }
    }
    let emitted: Result<Vec<(usize, u64)>> = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let cluster = match model {
                ModelKind::Idla => run_idla_with(n, bc, seed, opts)?,
                ModelKind::RotorRouter => run_rotor_router_with(n, bc, opts)?,
                ModelKind::DivisibleSandpile => {
                    return Err(Error::param("model", "beurling fit needs a particle model"))
                }
            };
            Ok((n, cluster.emitted))
        })
        .collect();
    let emitted = emitted?;

    let mut points = Vec::with_capacity(distinct.len());
    for &n in &distinct {
        let vals: Vec<f64> =
            emitted.iter().filter(|&&(m, _)| m == n).map(|&(_, e)| e as f64).collect();
        let k = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / k;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        points.push(BeurlingPoint { n: n as u64, mean_emitted: mean, stderr: (var / k).sqrt() });
    }

    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_emitted.ln()).collect();
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_stderr = if xs.len() > 2 {
        (ss_res / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(BeurlingFit {
        slope,
        slope_stderr,
        ci: (slope - 2.0 * slope_stderr, slope + 2.0 * slope_stderr),
        points,
    })
}

// ---------------------------------------------------------------------------
// Serialization: header JSON line + "x y" pairs; PBM raster.
// ---------------------------------------------------------------------------

/// Write the compact text format: one JSON header line
/// `{"N":…,"bc":…,"emitted":…,"model":…,"seed":…}` (a `"truncated":true`
/// key appears only on step-capped partial output), then one `x y` line per
/// site in settlement order.
pub fn write_cluster<W: Write>(cluster: &LatticeCluster, mut out: W) -> std::io::Result<()> {
    let mut header = serde_json::json!({
        "model": cluster.model.to_string(),
        "bc": cluster.bc.to_string(),
        "N": cluster.n(),
        "emitted": cluster.emitted,
        "seed": cluster.seed,
    });
    if cluster.truncated {
        header["truncated"] = serde_json::Value::Bool(true);
    }
    writeln!(out, "{header}")?;
    for &(x, y) in &cluster.sites {
        writeln!(out, "{x} {y}")?;
    }
    Ok(())
}

/// Parse the text format written by [`write_cluster`].
pub fn read_cluster<R: BufRead>(mut input: R) -> Result<LatticeCluster> {
    let mut header_line = String::new();
    input.read_line(&mut header_line)?;
    let header: serde_json::Value = serde_json::from_str(header_line.trim())
        .map_err(|e| Error::MalformedCluster(format!("bad header: {e}")))?;
    let get_str = |k: &str| -> Result<&str> {
        header[k]
            .as_str()
            .ok_or_else(|| Error::MalformedCluster(format!("missing key {k}")))
    };
    let model: ModelKind = get_str("model")?.parse()?;
    let bc: BoundaryCondition = get_str("bc")?.parse()?;
    let n = header["N"]
        .as_u64()
        .ok_or_else(|| Error::MalformedCluster("missing N".into()))? as usize;
    let emitted = header["emitted"]
        .as_u64()
        .ok_or_else(|| Error::MalformedCluster("missing emitted".into()))?;
    let seed = header["seed"].as_u64().unwrap_or(0);
    let truncated = header["truncated"].as_bool().unwrap_or(false);
    let mut sites = Vec::with_capacity(n);
    for line in input.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let mut parts = t.split_whitespace();
        let x: i64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedCluster(format!("bad site line: {t}")))?;
        let y: i64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedCluster(format!("bad site line: {t}")))?;
        sites.push((x, y));
    }
    if sites.len() != n {
        return Err(Error::MalformedCluster(format!(
            "header claims {n} sites, file has {}",
            sites.len()
        )));
    }
    Ok(LatticeCluster { model, bc, seed, emitted, truncated, sites })
}

/// Render the occupied set as a plain PBM (P1) bitmap over its bounding
/// box, top row = max y.
pub fn write_pbm<W: Write>(cluster: &LatticeCluster, mut out: W) -> std::io::Result<()> {
    let set = cluster.site_set();
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
    for &(x, y) in &cluster.sites {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if cluster.sites.is_empty() {
        return writeln!(out, "P1\n0 0");
    }
    let w = xmax - xmin + 1;
    let h = ymax - ymin + 1;
    writeln!(out, "P1")?;
    writeln!(out, "{w} {h}")?;
    for y in (ymin..=ymax).rev() {
        let mut row = String::with_capacity(2 * w as usize);
        for x in xmin..=xmax {
            row.push(if set.contains(&(x, y)) { '1' } else { '0' });
            if x < xmax {
                row.push(' ');
            }
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idla_single_particle() {
        for bc in [
            BoundaryCondition::None,
            BoundaryCondition::KillNegAxis,
            BoundaryCondition::KillAngleSides(AngleSides::Quarter),
            BoundaryCondition::Kpr(0.5),
        ] {
            let c = run_idla(1, bc, 42).unwrap();
            assert_eq!(c.sites(), &[(0, 0)]);
            assert_eq!(c.emitted, 1);
        }
    }

    #[test]
    fn idla_second_particle_is_neighbor() {
        for seed in 0..20 {
            let c = run_idla(2, BoundaryCondition::None, seed).unwrap();
            assert_eq!(c.n(), 2);
            assert_eq!(c.sites()[0], (0, 0));
            let (x, y) = c.sites()[1];
            assert_eq!(x.abs() + y.abs(), 1, "second site {:?}", c.sites()[1]);
            assert_eq!(c.emitted, 2);
        }
    }

    #[test]
    fn idla_emitted_equals_n_without_killing() {
        let c = run_idla(500, BoundaryCondition::None, 7).unwrap();
        assert_eq!(c.emitted, 500);
        let c = run_kpr(300, 1.0, 7).unwrap();
        assert_eq!(c.emitted, 300, "p = 1 never kills");
    }

    #[test]
    fn clusters_avoid_killing_sites_and_stay_connected() {
        for bc in [
            BoundaryCondition::KillNegAxis,
            BoundaryCondition::KillAngleSides(AngleSides::Half),
            BoundaryCondition::KillAngleSides(AngleSides::Quarter),
        ] {
            let c = run_idla(400, bc, 3).unwrap();
            assert_eq!(c.n(), 400);
            assert!(c.emitted >= 400);
            assert!(c.sites().iter().all(|&(x, y)| !bc.is_killing(x, y)), "{bc}");
            assert!(c.is_connected(), "{bc}");
            assert_eq!(c.sites()[0], (0, 0));
        }
    }

    #[test]
    fn angle_half_cluster_stays_right_of_axis() {
        let c = run_idla(300, BoundaryCondition::KillAngleSides(AngleSides::Half), 11).unwrap();
        assert!(c.sites().iter().all(|&(x, y)| x >= 1 || (x, y) == (0, 0)));
    }

    #[test]
    fn quarter_plane_literal_ray_killing_would_be_degenerate() {
        // all four origin neighbors would kill; the exit-kill rule keeps
        // the rays ordinary so growth can escape the corner
        let bc = BoundaryCondition::KillAngleSides(AngleSides::Quarter);
        assert!(!bc.is_killing(1, 0));
        assert!(!bc.is_killing(0, 1));
        assert!(bc.is_killing(-1, 0));
        assert!(bc.is_killing(0, -1));
        let c = run_idla(200, bc, 5).unwrap();
        assert_eq!(c.n(), 200);
        assert!(c.sites().iter().all(|&(x, y)| x >= 0 && y >= 0));
    }

    #[test]
    fn idla_step_cap_returns_partial() {
        let opts = SimOptions { step_cap: 50, ..SimOptions::default() };
        match run_idla_with(500, BoundaryCondition::None, 1, &opts) {
            Err(Error::StepCapExceeded { partial, .. }) => {
                assert!(partial.truncated);
                assert!(partial.n() < 500);
                assert!(partial.n() >= 1);
            }
            other => panic!("expected step cap error, got {other:?}"),
        }
    }

    #[test]
    fn rotor_five_particles_fill_plus_shape() {
        let c = run_rotor_router(5, BoundaryCondition::None, RotorInit::AllNorth).unwrap();
        // hand simulation: settle order origin, E, S, W, N
        assert_eq!(c.sites(), &[(0, 0), (1, 0), (0, -1), (-1, 0), (0, 1)]);
        assert_eq!(c.emitted, 5);
    }

    #[test]
    fn rotor_is_deterministic() {
        let a = run_rotor_router(600, BoundaryCondition::KillNegAxis, RotorInit::AllNorth).unwrap();
        let b = run_rotor_router(600, BoundaryCondition::KillNegAxis, RotorInit::AllNorth).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_cluster(&a, &mut buf_a).unwrap();
        write_cluster(&b, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn rotor_rejects_random_kpr() {
        assert!(run_rotor_router(10, BoundaryCondition::Kpr(0.5), RotorInit::AllNorth).is_err());
        assert!(run_rotor_router(10, BoundaryCondition::Kpr(0.0), RotorInit::AllNorth).is_ok());
    }

    #[test]
    fn idla_runs_are_reproducible() {
        let a = run_idla(300, BoundaryCondition::KillNegAxis, 99).unwrap();
        let b = run_idla(300, BoundaryCondition::KillNegAxis, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kpr_at_zero_matches_kill_reflect_run() {
        let a = run_idla(1000, BoundaryCondition::Kpr(0.0), 17).unwrap();
        let b = run_idla(1000, BoundaryCondition::KillReflect, 17).unwrap();
        assert_eq!(a.sites(), b.sites());
        assert_eq!(a.emitted, b.emitted);
    }

    #[test]
    fn kpr_reflection_blocks_downward_crossing() {
        // with p = 0, nothing can reach y < 0 through the axis right of the
        // origin; the only route below is around the origin column
        let c = run_idla(800, BoundaryCondition::Kpr(0.0), 23).unwrap();
        let set = c.site_set();
        for &(x, y) in &set {
            assert!(!(y == 0 && x >= 1) || set.contains(&(x, y)), "axis sites are allowed");
        }
    }

    #[test]
    fn kpr_pass_variants_differ() {
        let land = SimOptions { pass_variant: PassVariant::LandOnAxis, ..SimOptions::default() };
        let skip = SimOptions { pass_variant: PassVariant::SkipAxis, ..SimOptions::default() };
        let a = run_idla_with(2000, BoundaryCondition::Kpr(0.7), 5, &land).unwrap();
        let b = run_idla_with(2000, BoundaryCondition::Kpr(0.7), 5, &skip).unwrap();
        assert_ne!(a.sites(), b.sites());
    }

    #[test]
    fn sandpile_mass_one_is_single_site() {
        let s = run_divisible_sandpile(1.0, BoundaryCondition::None, 1e-8).unwrap();
        assert_eq!(s.occupied(), vec![(0, 0)]);
        assert_eq!(s.topples, 0);
        assert!((s.mass_at((0, 0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sandpile_mass_five_matches_bruteforce_oracle() {
        // independent oracle: array relaxation on a small grid
        let oracle = {
            let r = 6usize;
            let side = 2 * r + 1;
            let mut grid = vec![0.0f64; side * side];
            grid[r * side + r] = 5.0;
            loop {
                let mut moved = false;
                for i in 0..side * side {
                    if grid[i] > 1.0 + 1e-12 {
                        let excess = grid[i] - 1.0;
                        grid[i] = 1.0;
                        let (y, x) = (i / side, i % side);
                        for (nx, ny) in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
                            grid[ny * side + nx] += excess / 4.0;
                        }
                        moved = true;
                    }
                }
                if !moved {
                    break;
                }
            }
            let mut occ: Vec<(i64, i64)> = Vec::new();
            for y in 0..side {
                for x in 0..side {
                    if grid[y * side + x] >= 1.0 - 1e-9 {
                        occ.push((x as i64 - r as i64, y as i64 - r as i64));
                    }
                }
            }
            occ.sort_by_key(|&(x, y)| (y, x));
            occ
        };
        let s = run_divisible_sandpile(5.0, BoundaryCondition::None, 1e-9).unwrap();
        assert_eq!(s.occupied(), oracle);
        // frozen: mass 5 relaxes to the plus shape in one topple
        assert_eq!(oracle, vec![(0, -1), (-1, 0), (0, 0), (1, 0), (0, 1)]);
    }

    #[test]
    fn sandpile_conserves_mass_and_is_symmetric() {
        let s = run_divisible_sandpile(40.0, BoundaryCondition::KillNegAxis, 1e-8).unwrap();
        let balance = s.total_mass() + s.absorbed - s.total_injected;
        assert!(balance.abs() < 1e-9, "mass balance {balance}");
        assert!(s.absorbed > 0.0);
        // rules are symmetric across the horizontal axis
        let sites: Vec<Site> = s.mass.keys().copied().collect();
        for (x, y) in sites {
            let up = s.mass_at((x, y));
            let down = s.mass_at((x, -y));
            assert!((up - down).abs() <= 4.0 * s.eps_topple, "({x},{y}): {up} vs {down}");
        }
    }

    #[test]
    fn sandpile_determinism() {
        let a = run_divisible_sandpile(25.0, BoundaryCondition::KillReflect, 1e-8).unwrap();
        let b = run_divisible_sandpile(25.0, BoundaryCondition::KillReflect, 1e-8).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        write_cluster(&a.to_cluster(), &mut ba).unwrap();
        write_cluster(&b.to_cluster(), &mut bb).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn idla_law_symmetry_under_mirror() {
        // KillNegAxis statistics are symmetric in law under y → −y: over
        // seeds, above- and below-axis occupation match within noise
        let mut above = 0i64;
        let mut below = 0i64;
        for seed in 0..8 {
            let c = run_idla(800, BoundaryCondition::KillNegAxis, 1000 + seed).unwrap();
            above += c.sites().iter().filter(|&&(_, y)| y > 0).count() as i64;
            below += c.sites().iter().filter(|&&(_, y)| y < 0).count() as i64;
        }
        let total = (above + below) as f64;
        let imbalance = (above - below).abs() as f64 / total;
        assert!(imbalance < 0.05, "imbalance {imbalance}");
    }

    #[test]
    fn rotor_near_symmetry_with_mirror_init() {
        // exact sitewise mirror symmetry is impossible for any 4-cycle
        // rotor order (conjugating N→E→S→W by y ↦ −y gives a different
        // cycle), so assert near-symmetry of the cluster instead
        let c = run_rotor_router(4000, BoundaryCondition::KillNegAxis, RotorInit::MirrorAxis)
            .unwrap();
        let set = c.site_set();
        let asym = set.iter().filter(|&&(x, y)| !set.contains(&(x, -y))).count();
        let frac = asym as f64 / set.len() as f64;
        assert!(frac < 0.05, "mirror asymmetry {frac}");
    }

    #[test]
    fn beurling_fit_none_has_slope_one() {
        let fit = beurling_fit(
            ModelKind::Idla,
            BoundaryCondition::None,
            &[100, 200, 400],
            3,
            1,
            &SimOptions::default(),
        )
        .unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12, "slope {}", fit.slope);
        assert!(fit.slope_stderr < 1e-12);
    }

    #[test]
    fn beurling_fit_requires_three_ns() {
        assert!(beurling_fit(
            ModelKind::Idla,
            BoundaryCondition::None,
            &[100, 200],
            3,
            1,
            &SimOptions::default(),
        )
        .is_err());
    }

    #[test]
    fn cluster_roundtrip_through_text_format() {
        let c = run_idla(120, BoundaryCondition::Kpr(0.5), 8).unwrap();
        let mut buf = Vec::new();
        write_cluster(&c, &mut buf).unwrap();
        let parsed = read_cluster(&buf[..]).unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn malformed_cluster_files_error() {
        assert!(read_cluster(&b"not json\n1 2\n"[..]).is_err());
        assert!(read_cluster(
            &br#"{"model":"idla","bc":"none","N":3,"emitted":3,"seed":0}
0 0
"#[..]
        )
        .is_err());
    }

    #[test]
    fn pbm_renders_bounding_box() {
        let c = run_rotor_router(5, BoundaryCondition::None, RotorInit::AllNorth).unwrap();
        let mut buf = Vec::new();
        write_pbm(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "P1");
        assert_eq!(lines.next().unwrap(), "3 3");
        assert_eq!(lines.next().unwrap(), "0 1 0");
        assert_eq!(lines.next().unwrap(), "1 1 1");
        assert_eq!(lines.next().unwrap(), "0 1 0");
    }
}
