//! Eigenvalue continuation across a coupling grid, reality certification,
//! threshold bisection and truncation-convergence tables.
//!
//! Spectra at different grid points are computed in parallel; matching is a
//! sequential pass outward from the grid point closest to `eps = 0`, so every
//! result is a pure function of the model and the configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::closed_forms::{TwoLevelDetuned, TwoLevelGainCoupling};
use crate::error::{Error, Result};
use crate::hamiltonians::{build_h2, build_h3, ModelH2, ModelH3, TruncatedHamiltonian};
use crate::linalg::{EigenSolution, ResidualOracle, Spectrum};

pub const DEFAULT_REALITY_TOL: f64 = 1e-8;
pub const DEFAULT_MATCH_TOL: f64 = 0.5;
pub const DEFAULT_MAX_STEP: f64 = 0.05;

/// Sub-steps inserted per grid interval near a reality flip.
pub const REFINE_FACTOR: usize = 10;
/// Grid intervals refined on each side of a flip.
pub const REFINE_HALF_WIDTH: usize = 5;

const RESIDUAL_MEMORY_BUDGET: usize = 256 << 20;
const MAX_BRUTE_FORCE_CLUSTER: usize = 4;

/// Level identifier assigned at `eps = 0`: `n` for 1D models, `(n1, n2)` for `H2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Level(usize),
    Modes(usize, usize),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Level(n) => write!(f, "{n}"),
            Label::Modes(a, b) => write!(f, "({a},{b})"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse level label {s:?}"));
        let s = s.trim();
        if let Some(inner) = s.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
            let (a, b) = inner.split_once(',').ok_or_else(bad)?;
            Ok(Label::Modes(
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ))
        } else {
            s.parse().map(Label::Level).map_err(|_| bad())
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Basis size of a truncated model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Truncation {
    Single(usize),
    Product(usize, usize),
    /// Models that are already finite.
    Fixed,
}

impl Truncation {
    pub fn doubled(self) -> Self {
        match self {
            Truncation::Single(n) => Truncation::Single(2 * n),
            Truncation::Product(a, b) => Truncation::Product(2 * a, 2 * b),
            Truncation::Fixed => Truncation::Fixed,
        }
    }

    pub fn dimension(self) -> Option<usize> {
        match self {
            Truncation::Single(n) => Some(n),
            Truncation::Product(a, b) => Some(a * b),
            Truncation::Fixed => None,
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::Single(n) => write!(f, "{n}"),
            Truncation::Product(a, b) => write!(f, "{a}x{b}"),
            Truncation::Fixed => write!(f, "fixed"),
        }
    }
}

impl FromStr for Truncation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse truncation {s:?} (expected N, N1xN2 or fixed)"));
        let s = s.trim();
        let positive = |t: &str| match t.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(bad()),
        };
        if s == "fixed" {
            Ok(Truncation::Fixed)
        } else if let Some((a, b)) = s.split_once('x') {
            Ok(Truncation::Product(positive(a)?, positive(b)?))
        } else {
            Ok(Truncation::Single(positive(s)?))
        }
    }
}

impl Serialize for Truncation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A family `eps -> H(eps)` that can be truncated and diagonalised.
pub trait SpectralModel: Sync {
    fn name(&self) -> String;

    fn default_truncation(&self) -> Truncation;

    fn check_eps(&self, eps: f64) -> Result<()>;

    fn assemble(&self, eps: f64, truncation: Truncation) -> Result<TruncatedHamiltonian>;

    /// Unperturbed levels of the truncated model in ascending order.
    fn reference_levels(&self, truncation: Truncation) -> Result<Vec<(Label, f64)>>;
}

fn finite_eps(eps: f64) -> Result<()> {
    if eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps must be finite, got {eps}")))
    }
}

fn sort_levels(mut levels: Vec<(Label, f64)>) -> Vec<(Label, f64)> {
    levels.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    levels
}

impl SpectralModel for ModelH2 {
    fn name(&self) -> String {
        format!("H2(omega1={}, omega2={}, r={}, s={})", self.omega1, self.omega2, self.r, self.s)
    }

    fn default_truncation(&self) -> Truncation {
        Truncation::Product(32, 32)
    }

    fn check_eps(&self, eps: f64) -> Result<()> {
        finite_eps(eps)
    }

    fn assemble(&self, eps: f64, truncation: Truncation) -> Result<TruncatedHamiltonian> {
        match truncation {
            Truncation::Product(a, b) => build_h2(self, eps, a, b),
            t => Err(Error::InvalidParameter(format!("H2 needs an N1xN2 truncation, got {t}"))),
        }
    }

    fn reference_levels(&self, truncation: Truncation) -> Result<Vec<(Label, f64)>> {
        let Truncation::Product(n1, n2) = truncation else {
            return Err(Error::InvalidParameter(format!("H2 needs an N1xN2 truncation, got {truncation}")));
        };
        Ok(sort_levels(
            (0..n1)
                .flat_map(|a| (0..n2).map(move |b| (Label::Modes(a, b), self.unperturbed_level(a, b))))
                .collect(),
        ))
    }
}

impl SpectralModel for ModelH3 {
    fn name(&self) -> String {
        "H3".into()
    }

    fn default_truncation(&self) -> Truncation {
        Truncation::Single(128)
    }

    fn check_eps(&self, eps: f64) -> Result<()> {
        if eps.abs() < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("H3 requires -1 < eps < 1, got {eps}")))
        }
    }

    fn assemble(&self, eps: f64, truncation: Truncation) -> Result<TruncatedHamiltonian> {
        match truncation {
            Truncation::Single(n) => build_h3(eps, n, self.quad_order),
            t => Err(Error::InvalidParameter(format!("H3 needs a single basis size, got {t}"))),
        }
    }

    fn reference_levels(&self, truncation: Truncation) -> Result<Vec<(Label, f64)>> {
        match truncation {
            Truncation::Single(n) => Ok((0..n).map(|k| (Label::Level(k), (2 * k + 1) as f64)).collect()),
            t => Err(Error::InvalidParameter(format!("H3 needs a single basis size, got {t}"))),
        }
    }
}

/// `eps -> [[e1, i eps], [i eps, e2]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainCouplingFamily {
    pub e1: f64,
    pub e2: f64,
}

impl SpectralModel for GainCouplingFamily {
    fn name(&self) -> String {
        format!("gain-coupling(e1={}, e2={})", self.e1, self.e2)
    }

    fn default_truncation(&self) -> Truncation {
        Truncation::Fixed
    }

    fn check_eps(&self, eps: f64) -> Result<()> {
        finite_eps(eps)
    }

    fn assemble(&self, eps: f64, _: Truncation) -> Result<TruncatedHamiltonian> {
        Ok(TruncatedHamiltonian::gain_coupling(&TwoLevelGainCoupling::new(self.e1, self.e2, eps)?))
    }

    fn reference_levels(&self, _: Truncation) -> Result<Vec<(Label, f64)>> {
        let (lo, hi) = (self.e1.min(self.e2), self.e1.max(self.e2));
        Ok(vec![(Label::Level(0), lo), (Label::Level(1), hi)])
    }
}

/// `eps -> [[e + i eps, b], [b, e - i eps]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetunedFamily {
    pub e: f64,
    pub b: f64,
}

impl SpectralModel for DetunedFamily {
    fn name(&self) -> String {
        format!("detuned(e={}, b={})", self.e, self.b)
    }

    fn default_truncation(&self) -> Truncation {
        Truncation::Fixed
    }

    fn check_eps(&self, eps: f64) -> Result<()> {
        finite_eps(eps)
    }

    fn assemble(&self, eps: f64, _: Truncation) -> Result<TruncatedHamiltonian> {
        Ok(TruncatedHamiltonian::detuned(&TwoLevelDetuned::new(self.e, self.b, eps)?))
    }

    fn reference_levels(&self, _: Truncation) -> Result<Vec<(Label, f64)>> {
        let b = self.b.abs();
        Ok(vec![(Label::Level(0), self.e - b), (Label::Level(1), self.e + b)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanConfig {
    pub eps_grid: Vec<f64>,
    pub truncation: Truncation,
    /// Comparison truncation for certification; `None` doubles `truncation`.
    pub refined_truncation: Option<Truncation>,
    /// A value counts as real when `|Im| <= reality_tol (1 + |lambda|)`.
    pub reality_tol: f64,
    /// Largest allowed move of a certified eigenvalue between truncations.
    pub doubling_tol: f64,
    /// Largest eigenvalue jump between neighbouring grid points.
    pub match_tol: f64,
    pub track_count: usize,
    pub refine_flips: bool,
    /// Continuation step used by certification and threshold searches.
    pub max_step: f64,
}

impl ScanConfig {
    pub fn new(eps_grid: Vec<f64>, truncation: Truncation, track_count: usize) -> Self {
        Self {
            eps_grid,
            truncation,
            refined_truncation: None,
            reality_tol: DEFAULT_REALITY_TOL,
            doubling_tol: 10.0 * DEFAULT_REALITY_TOL,
            match_tol: DEFAULT_MATCH_TOL,
            track_count,
            refine_flips: true,
            max_step: DEFAULT_MAX_STEP,
        }
    }

    pub fn refined(&self) -> Truncation {
        self.refined_truncation.unwrap_or_else(|| self.truncation.doubled())
    }

    pub fn is_real(&self, z: Complex64) -> bool {
        z.im.abs() <= self.reality_tol * (1.0 + z.norm())
    }

    fn check_tolerances(&self) -> Result<()> {
        for (name, v) in [
            ("reality_tol", self.reality_tol),
            ("doubling_tol", self.doubling_tol),
            ("match_tol", self.match_tol),
            ("max_step", self.max_step),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.track_count == 0 {
            return Err(Error::InvalidParameter("track_count must be >= 1".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check_tolerances()?;
        check_grid(&self.eps_grid)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("eps grid is empty".into()));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps grid contains {x}")));
    }
    let up = grid.windows(2).all(|w| w[0] < w[1]);
    let down = grid.windows(2).all(|w| w[0] > w[1]);
    if up || down {
        Ok(())
    } else {
        Err(Error::InvalidParameter("eps grid must be strictly monotone".into()))
    }
}

fn decimal_places(v: f64) -> Option<i32> {
    (0..=12).find(|&d| {
        let s = v * 10f64.powi(d);
        (s - s.round()).abs() <= 1e-9 * s.abs().max(1.0)
    })
}

/// `start, start + step, ...` through `stop`, inclusive when `stop` lies within
/// half a step of a grid point. Points are rounded to the decimal precision of
/// the inputs so that `0:0.5:0.05` yields `0.15` rather than `0.15000000000000002`.
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step == 0.0 {
        return Err(Error::InvalidParameter(format!("invalid grid {start}:{stop}:{step}")));
    }
    let span = (stop - start) / step;
    if span < -0.5 {
        return Err(Error::InvalidParameter(format!(
            "grid {start}:{stop}:{step} runs away from its endpoint"
        )));
    }
    let count = (span + 0.5).floor().max(0.0) as usize + 1;
    let scale = match (decimal_places(start), decimal_places(step)) {
        (Some(a), Some(b)) => Some(10f64.powi(a.max(b))),
        _ => None,
    };
    Ok((0..count)
        .map(|k| {
            let x = start + k as f64 * step;
            match scale {
                Some(s) => (x * s).round() / s,
                None => x,
            }
        })
        .collect())
}

/// `0 = t_0, ..., t_m = to` in `ceil(|to| / max_step)` equal steps.
fn continuation_grid(to: f64, max_step: f64) -> Vec<f64> {
    let steps = (to.abs() / max_step).ceil() as usize;
    (0..=steps).map(|k| if k == steps { to } else { to * k as f64 / steps as f64 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub eps: f64,
    pub value: Complex64,
    pub residual: f64,
    pub real: bool,
}

/// One eigenvalue followed across the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub label: Label,
    pub unperturbed: f64,
    /// Another unperturbed level coincides with this one.
    pub degenerate: bool,
    pub truncation: Truncation,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn reality_flags(&self) -> Vec<bool> {
        self.points.iter().map(|p| p.real).collect()
    }

    pub fn value_at(&self, eps: f64) -> Option<Complex64> {
        self.points.iter().find(|p| p.eps == eps).map(|p| p.value)
    }
}

/// Whole-spectrum diagnostics at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSample {
    pub eps: f64,
    pub conjugation_defect: f64,
    pub matrix_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanOutcome {
    /// The grid actually used, including points added by flip refinement.
    pub grid: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    pub samples: Vec<GridSample>,
}

struct GridSolve {
    eigenvalues: Vec<Complex64>,
    norm: f64,
    defect: f64,
    oracle: Option<ResidualOracle>,
}

fn solve_point<M: SpectralModel + ?Sized>(model: &M, eps: f64, t: Truncation, keep: bool) -> Result<GridSolve> {
    let h = model.assemble(eps, t).map_err(|e| e.at_point(eps, t))?;
    let sol = EigenSolution::new(&h.spectral_matrix()).map_err(|e| e.at_point(eps, t))?;
    Ok(GridSolve {
        defect: sol.spectrum.conjugation_defect(),
        norm: sol.matrix_norm(),
        eigenvalues: sol.spectrum.eigenvalues,
        oracle: keep.then_some(sol.oracle),
    })
}

/// Solves in grid order; the reported error is the first failing point.
fn solve_grid<M: SpectralModel + ?Sized>(model: &M, grid: &[f64], t: Truncation, keep: bool) -> Result<Vec<GridSolve>> {
    let results: Vec<Result<GridSolve>> = grid.par_iter().map(|&eps| solve_point(model, eps, t, keep)).collect();
    results.into_iter().collect()
}

fn keep_oracles(t: Truncation, points: usize) -> bool {
    let n = t.dimension().unwrap_or(2);
    n.saturating_mul(n).saturating_mul(16).saturating_mul(points) <= RESIDUAL_MEMORY_BUDGET
}

struct TrackedLevel {
    label: Label,
    unperturbed: f64,
    degenerate: bool,
    /// Index into the eigenvalue list of each grid point.
    picks: Vec<usize>,
}

struct Tracking {
    grid: Vec<f64>,
    solves: Vec<GridSolve>,
    levels: Vec<TrackedLevel>,
    truncation: Truncation,
}

impl Tracking {
    fn value(&self, level: usize, point: usize) -> Complex64 {
        self.solves[point].eigenvalues[self.levels[level].picks[point]]
    }

    fn level(&self, label: Label) -> Option<usize> {
        self.levels.iter().position(|l| l.label == label)
    }
}

fn anchor_labels(
    refs: &[(Label, f64)],
    eigenvalues: &[Complex64],
    count: usize,
    match_tol: f64,
) -> Result<Vec<TrackedLevel>> {
    if count > eigenvalues.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot track {count} levels in a {}-dimensional truncation",
            eigenvalues.len()
        )));
    }
    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (eigenvalues[a], eigenvalues[b]);
        x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)).then(a.cmp(&b))
    });
    let mut used = vec![false; refs.len()];
    let mut levels = Vec::with_capacity(count);
    for &idx in order.iter().take(count) {
        let z = eigenvalues[idx];
        let best = refs
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, r)| (i, (z - Complex64::new(r.1, 0.0)).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let Some((i, dist)) = best else {
            return Err(Error::InvalidParameter("fewer reference levels than tracked levels".into()));
        };
        if dist > match_tol {
            return Err(Error::LabelMismatch {
                computed: z.re,
                expected: refs[i].1,
                distance: dist,
            });
        }
        used[i] = true;
        let value = refs[i].1;
        let tol = 1e-12 * value.abs().max(1.0);
        let degenerate = refs
            .iter()
            .enumerate()
            .any(|(j, r)| j != i && (r.1 - value).abs() <= tol);
        levels.push(TrackedLevel {
            label: refs[i].0,
            unperturbed: value,
            degenerate,
            picks: vec![idx],
        });
    }
    Ok(levels)
}

fn nearest_order(from: Complex64, cands: &[Complex64], excluded: &[bool]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cands.len()).filter(|&j| !excluded[j]).collect();
    idx.sort_by(|&a, &b| (cands[a] - from).norm().total_cmp(&(cands[b] - from).norm()).then(a.cmp(&b)));
    idx
}

/// Minimal total distance injective assignment of `members` into `cands`.
fn best_assignment(prev: &[Complex64], members: &[usize], pool: &[usize], cands: &[Complex64]) -> Vec<usize> {
    fn dfs(
        depth: usize,
        prev: &[Complex64],
        members: &[usize],
        pool: &[usize],
        cands: &[Complex64],
        taken: &mut Vec<bool>,
        current: &mut Vec<usize>,
        cost: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if cost >= best.0 {
            return;
        }
        if depth == members.len() {
            *best = (cost, current.clone());
            return;
        }
        for (p, &j) in pool.iter().enumerate() {
            if taken[p] {
                continue;
            }
            taken[p] = true;
            current.push(j);
            let d = (cands[j] - prev[members[depth]]).norm();
            dfs(depth + 1, prev, members, pool, cands, taken, current, cost + d, best);
            current.pop();
            taken[p] = false;
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    dfs(0, prev, members, pool, cands, &mut vec![false; pool.len()], &mut Vec::new(), 0.0, &mut best);
    best.1
}

/// Continue each of `prev` to an eigenvalue in `cands`: nearest neighbours, with
/// collisions resolved by optimal assignment within each colliding cluster.
fn assign(prev: &[Complex64], cands: &[Complex64]) -> Vec<usize> {
    let none = vec![false; cands.len()];
    let nearest: Vec<usize> = prev.iter().map(|&p| nearest_order(p, cands, &none)[0]).collect();
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (t, &j) in nearest.iter().enumerate() {
        clusters.entry(j).or_default().push(t);
    }
    let mut out = nearest.clone();
    let mut claimed = vec![false; cands.len()];
    for (&j, members) in &clusters {
        if members.len() == 1 {
            claimed[j] = true;
        }
    }
    let mut colliding: Vec<&Vec<usize>> = clusters.values().filter(|m| m.len() > 1).collect();
    colliding.sort_by_key(|m| m[0]);
    for members in colliding {
        let m = members.len();
        if m <= MAX_BRUTE_FORCE_CLUSTER {
            let mut pool: Vec<usize> = members
                .iter()
                .flat_map(|&t| nearest_order(prev[t], cands, &claimed).into_iter().take(m))
                .collect();
            pool.sort_unstable();
            pool.dedup();
            let picks = best_assignment(prev, members, &pool, cands);
            for (&t, &j) in members.iter().zip(&picks) {
                out[t] = j;
                claimed[j] = true;
            }
        } else {
            let mut pairs: Vec<(f64, usize, usize)> = members
                .iter()
                .flat_map(|&t| {
                    (0..cands.len())
                        .filter(|&j| !claimed[j])
                        .map(move |j| ((cands[j] - prev[t]).norm(), t, j))
                })
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut done = vec![false; prev.len()];
            for (_, t, j) in pairs {
                if !done[t] && !claimed[j] {
                    out[t] = j;
                    done[t] = true;
                    claimed[j] = true;
                }
            }
        }
    }
    out
}

fn track_solves(
    refs: &[(Label, f64)],
    grid: &[f64],
    solves: &[GridSolve],
    count: usize,
    match_tol: f64,
    t: Truncation,
) -> Result<Vec<TrackedLevel>> {
    let anchor = (0..grid.len())
        .min_by(|&a, &b| grid[a].abs().total_cmp(&grid[b].abs()).then(a.cmp(&b)))
        .unwrap_or(0);
    let mut levels = anchor_labels(refs, &solves[anchor].eigenvalues, count, match_tol)?;
    let mut picks: Vec<Vec<Option<usize>>> = levels
        .iter()
        .map(|l| {
            let mut v = vec![None; grid.len()];
            v[anchor] = Some(l.picks[0]);
            v
        })
        .collect();
    let order: Vec<(usize, usize)> = (anchor + 1..grid.len())
        .map(|i| (i - 1, i))
        .chain((0..anchor).rev().map(|i| (i + 1, i)))
        .collect();
    for (from, to) in order {
        let prev: Vec<Complex64> = picks
            .iter()
            .map(|p| solves[from].eigenvalues[p[from].expect("continued in order")])
            .collect();
        let cands = &solves[to].eigenvalues;
        let chosen = assign(&prev, cands);
        for (k, &j) in chosen.iter().enumerate() {
            let jump = (cands[j] - prev[k]).norm();
            if !(jump <= match_tol) {
                return Err(Error::MatchingAmbiguity {
                    eps: grid[to],
                    truncation: t.to_string(),
                    jump,
                    match_tol,
                });
            }
            picks[k][to] = Some(j);
        }
    }
    for (level, p) in levels.iter_mut().zip(picks) {
        level.picks = p.into_iter().map(|j| j.expect("every point visited")).collect();
    }
    Ok(levels)
}

fn run_tracking<M: SpectralModel + ?Sized>(
    model: &M,
    grid: Vec<f64>,
    t: Truncation,
    count: usize,
    match_tol: f64,
    keep: bool,
) -> Result<Tracking> {
    for &eps in &grid {
        model.check_eps(eps)?;
    }
    let refs = model.reference_levels(t)?;
    let solves = solve_grid(model, &grid, t, keep)?;
    let levels = track_solves(&refs, &grid, &solves, count, match_tol, t)?;
    Ok(Tracking {
        grid,
        solves,
        levels,
        truncation: t,
    })
}

/// Grid with `REFINE_FACTOR` sub-steps in every interval within
/// `REFINE_HALF_WIDTH` intervals of a reality flip.
fn refine_grid(grid: &[f64], flips: &[usize]) -> Vec<f64> {
    let mut refine = vec![false; grid.len().saturating_sub(1)];
    for &i in flips {
        let lo = i.saturating_sub(REFINE_HALF_WIDTH);
        let hi = (i + REFINE_HALF_WIDTH).min(refine.len().saturating_sub(1));
        for r in &mut refine[lo..=hi] {
            *r = true;
        }
    }
    let mut out = Vec::with_capacity(grid.len());
    for (i, &x) in grid.iter().enumerate() {
        out.push(x);
        if i < refine.len() && refine[i] {
            let y = grid[i + 1];
            // one more decimal than the coarse points, when they have a short expansion
            let scale = match (decimal_places(x), decimal_places(y)) {
                (Some(a), Some(b)) => Some(10f64.powi(a.max(b) + 1)),
                _ => None,
            };
            for k in 1..REFINE_FACTOR {
                let z = x + (y - x) * k as f64 / REFINE_FACTOR as f64;
                out.push(scale.map_or(z, |s| (z * s).round() / s));
            }
        }
    }
    out
}

/// Follow the `track_count` lowest levels across `cfg.eps_grid`.
pub fn scan<M: SpectralModel + ?Sized>(model: &M, cfg: &ScanConfig) -> Result<ScanOutcome> {
    cfg.validate()?;
    for &eps in &cfg.eps_grid {
        model.check_eps(eps)?;
    }
    let t = cfg.truncation;
    let keep = keep_oracles(t, cfg.eps_grid.len() * if cfg.refine_flips { 4 } else { 1 });
    let mut tracking = run_tracking(model, cfg.eps_grid.clone(), t, cfg.track_count, cfg.match_tol, keep)?;

    if cfg.refine_flips && tracking.grid.len() > 1 {
        let flips: Vec<usize> = (0..tracking.grid.len() - 1)
            .filter(|&i| {
                (0..tracking.levels.len())
                    .any(|l| cfg.is_real(tracking.value(l, i)) != cfg.is_real(tracking.value(l, i + 1)))
            })
            .collect();
        if !flips.is_empty() {
            let grid = refine_grid(&tracking.grid, &flips);
            let mut old: BTreeMap<u64, GridSolve> = tracking
                .grid
                .iter()
                .map(|x| x.to_bits())
                .zip(std::mem::take(&mut tracking.solves))
                .collect();
            let fresh: Vec<f64> = grid.iter().copied().filter(|x| !old.contains_key(&x.to_bits())).collect();
            let keep = keep_oracles(t, grid.len());
            let mut new: BTreeMap<u64, GridSolve> = fresh
                .iter()
                .map(|x| x.to_bits())
                .zip(solve_grid(model, &fresh, t, keep)?)
                .collect();
            let solves: Vec<GridSolve> = grid
                .iter()
                .map(|x| {
                    let key = x.to_bits();
                    old.remove(&key).or_else(|| new.remove(&key)).expect("every point solved")
                })
                .collect();
            let refs = model.reference_levels(t)?;
            let levels = track_solves(&refs, &grid, &solves, cfg.track_count, cfg.match_tol, t)?;
            tracking = Tracking {
                grid,
                solves,
                levels,
                truncation: t,
            };
        }
    }
    finish_scan(model, tracking, cfg)
}

fn finish_scan<M: SpectralModel + ?Sized>(model: &M, tracking: Tracking, cfg: &ScanConfig) -> Result<ScanOutcome> {
    let t = tracking.truncation;
    let residuals: Vec<Result<Vec<f64>>> = (0..tracking.grid.len())
        .into_par_iter()
        .map(|i| {
            let eps = tracking.grid[i];
            let rebuilt;
            let oracle = match &tracking.solves[i].oracle {
                Some(o) => o,
                None => {
                    let h = model.assemble(eps, t).map_err(|e| e.at_point(eps, t))?;
                    rebuilt = ResidualOracle::new(&h.spectral_matrix()).map_err(|e| e.at_point(eps, t))?;
                    &rebuilt
                }
            };
            Ok((0..tracking.levels.len())
                .map(|l| oracle.residual(tracking.value(l, i)))
                .collect())
        })
        .collect();
    let residuals: Vec<Vec<f64>> = residuals.into_iter().collect::<Result<_>>()?;

    let trajectories = tracking
        .levels
        .iter()
        .enumerate()
        .map(|(l, level)| Trajectory {
            label: level.label,
            unperturbed: level.unperturbed,
            degenerate: level.degenerate,
            truncation: t,
            points: (0..tracking.grid.len())
                .map(|i| {
                    let value = tracking.value(l, i);
                    TrajectoryPoint {
                        eps: tracking.grid[i],
                        value,
                        residual: residuals[i][l],
                        real: cfg.is_real(value),
                    }
                })
                .collect(),
        })
        .collect();
    let samples = tracking
        .grid
        .iter()
        .zip(&tracking.solves)
        .map(|(&eps, s)| GridSample {
            eps,
            conjugation_defect: s.defect,
            matrix_norm: s.norm,
        })
        .collect();
    Ok(ScanOutcome {
        grid: tracking.grid,
        trajectories,
        samples,
    })
}

/// Full spectrum of the truncated model at one coupling, with residuals.
pub fn spectrum_at<M: SpectralModel + ?Sized>(model: &M, eps: f64, t: Truncation) -> Result<Spectrum> {
    model.check_eps(eps)?;
    let h = model.assemble(eps, t)?;
    Ok(EigenSolution::new(&h.spectral_matrix()).map_err(|e| e.at_point(eps, t))?.with_residuals())
}

/// Evidence for the reality of one perturbed level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealityCertificate {
    pub label: Label,
    pub eps: f64,
    pub value: Complex64,
    pub residual: f64,
    /// `reality_tol (1 + |value|)`.
    pub imag_tol: f64,
    pub real: bool,
    pub truncation: Truncation,
    pub refined_truncation: Truncation,
    pub refined_value: Complex64,
    pub shift: f64,
    pub doubling_tol: f64,
    pub truncation_converged: bool,
    /// `real && truncation_converged`.
    pub certified: bool,
}

/// Continue the `cfg.track_count` lowest levels from `0` to `eps` at both the
/// base and the refined truncation and test each for reality.
pub fn certify_levels<M: SpectralModel + ?Sized>(model: &M, eps: f64, cfg: &ScanConfig) -> Result<Vec<RealityCertificate>> {
    cfg.check_tolerances()?;
    model.check_eps(eps)?;
    let grid = continuation_grid(eps, cfg.max_step);
    let last = grid.len() - 1;
    let (t, tr) = (cfg.truncation, cfg.refined());
    let base = run_tracking(model, grid.clone(), t, cfg.track_count, cfg.match_tol, false)?;
    let fine = run_tracking(model, grid, tr, cfg.track_count, cfg.match_tol, false)?;
    let h = model.assemble(eps, t)?;
    let oracle = ResidualOracle::new(&h.spectral_matrix()).map_err(|e| e.at_point(eps, t))?;
    Ok(base
        .levels
        .iter()
        .enumerate()
        .map(|(l, level)| {
            let value = base.value(l, last);
            let refined_value = fine
                .level(level.label)
                .map(|k| fine.value(k, last))
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            let shift = (refined_value - value).norm();
            let real = cfg.is_real(value);
            let truncation_converged = shift <= cfg.doubling_tol;
            RealityCertificate {
                label: level.label,
                eps,
                value,
                residual: oracle.residual(value),
                imag_tol: cfg.reality_tol * (1.0 + value.norm()),
                real,
                truncation: t,
                refined_truncation: tr,
                refined_value,
                shift: if shift.is_nan() { f64::INFINITY } else { shift },
                doubling_tol: cfg.doubling_tol,
                truncation_converged,
                certified: real && truncation_converged,
            }
        })
        .collect())
}

fn rank_of<M: SpectralModel + ?Sized>(model: &M, t: Truncation, label: Label) -> Result<usize> {
    model
        .reference_levels(t)?
        .iter()
        .position(|r| r.0 == label)
        .ok_or_else(|| Error::InvalidParameter(format!("level {label} is not in the {t} truncation")))
}

/// Certificate for one level; a truncation that moves the level by more than
/// `cfg.doubling_tol` is an error rather than a negative answer.
pub fn certify_reality<M: SpectralModel + ?Sized>(
    model: &M,
    label: Label,
    eps: f64,
    cfg: &ScanConfig,
) -> Result<RealityCertificate> {
    let rank = rank_of(model, cfg.truncation, label)?;
    let mut local = cfg.clone();
    local.track_count = cfg.track_count.max(rank + 1);
    let cert = certify_levels(model, eps, &local)?
        .into_iter()
        .find(|c| c.label == label)
        .ok_or_else(|| Error::InvalidParameter(format!("level {label} was not tracked")))?;
    if !cert.truncation_converged {
        return Err(Error::TruncationNotConverged {
            eps,
            label: label.to_string(),
            truncation: cert.truncation.to_string(),
            refined: cert.refined_truncation.to_string(),
            shift: cert.shift,
            tol: cert.doubling_tol,
        });
    }
    Ok(cert)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdOptions {
    /// Repeat the bisection at `cfg.refined()` and report the shift.
    pub check_refined: bool,
    /// Error when the refined threshold moves by more than this.
    pub max_refined_shift: Option<f64>,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            check_refined: false,
            max_refined_shift: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinedThreshold {
    pub truncation: Truncation,
    pub eps_star: f64,
    pub shift: f64,
}

/// Location of the coupling where a real pair coalesces and complexifies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub pair: (Label, Label),
    pub eps_star: f64,
    /// Half-width of the final bracket.
    pub uncertainty: f64,
    /// Sign of the coupling branch, `+1` or `-1`.
    pub side: i8,
    /// Distance between the two real eigenvalues at the real end of the final bracket.
    pub min_gap: f64,
    /// Largest `|Im|` of the pair at the complex end of the final bracket.
    pub max_imag: f64,
    pub bisection_steps: usize,
    pub truncation: Truncation,
    pub refined: Option<RefinedThreshold>,
}

struct Bisection {
    eps_star: f64,
    half_width: f64,
    min_gap: f64,
    max_imag: f64,
    steps: usize,
}

fn pair_near(eigenvalues: &[Complex64], centre: Complex64) -> (Complex64, Complex64) {
    let none = vec![false; eigenvalues.len()];
    let idx = nearest_order(centre, eigenvalues, &none);
    (eigenvalues[idx[0]], eigenvalues[idx[1]])
}

fn pair_at_end<M: SpectralModel + ?Sized>(
    model: &M,
    pair: (Label, Label),
    to: f64,
    t: Truncation,
    cfg: &ScanConfig,
) -> Result<(Complex64, Complex64)> {
    let count = cfg
        .track_count
        .max(rank_of(model, t, pair.0)? + 1)
        .max(rank_of(model, t, pair.1)? + 1);
    let tracking = run_tracking(model, continuation_grid(to, cfg.max_step), t, count, cfg.match_tol, false)?;
    let last = tracking.grid.len() - 1;
    let a = tracking.level(pair.0).expect("tracked by rank");
    let b = tracking.level(pair.1).expect("tracked by rank");
    Ok((tracking.value(a, last), tracking.value(b, last)))
}

fn bisect<M: SpectralModel + ?Sized>(
    model: &M,
    pair: (Label, Label),
    bracket: (f64, f64),
    tol: f64,
    t: Truncation,
    cfg: &ScanConfig,
) -> Result<Bisection> {
    let both_real = |p: (Complex64, Complex64)| cfg.is_real(p.0) && cfg.is_real(p.1);
    let (mut a, mut b) = bracket;
    let pa = pair_at_end(model, pair, a, t, cfg)?;
    let pb = pair_at_end(model, pair, b, t, cfg)?;
    match (both_real(pa), both_real(pb)) {
        (true, false) => {}
        (true, true) => return Err(Error::InvalidBracket { lo: a, hi: b, status: "real" }),
        (false, false) => return Err(Error::InvalidBracket { lo: a, hi: b, status: "complex" }),
        (false, true) => {
            return Err(Error::InvalidBracket {
                lo: a,
                hi: b,
                status: "reversed (complex at lo, real at hi)",
            })
        }
    }
    let mean = |p: (Complex64, Complex64)| (p.0 + p.1) * 0.5;
    let (mut ca, mut cb) = (mean(pa), mean(pb));
    let mut gap = (pa.0 - pa.1).norm();
    let mut imag = pb.0.im.abs().max(pb.1.im.abs());
    let mut steps = 0;
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let centre = ca + (cb - ca) * 0.5;
        let sol = solve_point(model, m, t, false)?;
        let p = pair_near(&sol.eigenvalues, centre);
        if both_real(p) {
            a = m;
            ca = mean(p);
            gap = (p.0 - p.1).norm();
        } else {
            b = m;
            cb = mean(p);
            imag = p.0.im.abs().max(p.1.im.abs());
        }
        steps += 1;
    }
    Ok(Bisection {
        eps_star: 0.5 * (a + b),
        half_width: 0.5 * (b - a).abs(),
        min_gap: gap,
        max_imag: imag,
        steps,
    })
}

/// Bisect on "the pair is real" between `bracket.0` (real) and `bracket.1`
/// (complex) until the bracket is at most `tol` wide.
pub fn locate_threshold<M: SpectralModel + ?Sized>(
    model: &M,
    pair: (Label, Label),
    bracket: (f64, f64),
    tol: f64,
    cfg: &ScanConfig,
    opts: ThresholdOptions,
) -> Result<ThresholdReport> {
    cfg.check_tolerances()?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold tolerance must be > 0, got {tol}")));
    }
    if pair.0 == pair.1 {
        return Err(Error::InvalidParameter(format!("pair needs two distinct levels, got {}", pair.0)));
    }
    for eps in [bracket.0, bracket.1] {
        model.check_eps(eps)?;
    }
    if bracket.0 == bracket.1 {
        return Err(Error::InvalidParameter("bracket endpoints coincide".into()));
    }
    let t = cfg.truncation;
    let found = bisect(model, pair, bracket, tol, t, cfg)?;
    let refined = if opts.check_refined {
        let tr = cfg.refined();
        let r = bisect(model, pair, bracket, tol, tr, cfg)?;
        let shift = (r.eps_star - found.eps_star).abs();
        if let Some(max) = opts.max_refined_shift {
            if shift > max {
                return Err(Error::TruncationNotConverged {
                    eps: found.eps_star,
                    label: format!("pair {}/{}", pair.0, pair.1),
                    truncation: t.to_string(),
                    refined: tr.to_string(),
                    shift,
                    tol: max,
                });
            }
        }
        Some(RefinedThreshold {
            truncation: tr,
            eps_star: r.eps_star,
            shift,
        })
    } else {
        None
    };
    Ok(ThresholdReport {
        pair,
        eps_star: found.eps_star,
        uncertainty: found.half_width,
        side: if found.eps_star < 0.0 { -1 } else { 1 },
        min_gap: found.min_gap,
        max_imag: found.max_imag,
        bisection_steps: found.steps,
        truncation: t,
        refined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub label: Label,
    /// One value per truncation.
    pub values: Vec<Complex64>,
    /// `|values[j + 1] - values[j]|`.
    pub differences: Vec<f64>,
    /// Differences never increase.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub eps: f64,
    pub sizes: Vec<Truncation>,
    pub rows: Vec<ConvergenceRow>,
}

/// The `k` lowest levels at `eps` for each truncation in `sizes`.
pub fn truncation_convergence<M: SpectralModel + ?Sized>(
    model: &M,
    eps: f64,
    sizes: &[Truncation],
    k: usize,
    cfg: &ScanConfig,
) -> Result<ConvergenceTable> {
    cfg.check_tolerances()?;
    model.check_eps(eps)?;
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("no truncation sizes given".into()));
    }
    let dims: Vec<usize> = sizes.iter().map(|t| t.dimension().unwrap_or(2)).collect();
    if dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("truncation sizes must increase".into()));
    }
    let runs: Vec<Tracking> = sizes
        .iter()
        .map(|&t| run_tracking(model, continuation_grid(eps, cfg.max_step), t, k, cfg.match_tol, false))
        .collect::<Result<_>>()?;
    let rows = runs[0]
        .levels
        .iter()
        .map(|level| {
            let values = runs
                .iter()
                .map(|run| {
                    let l = run.level(level.label).ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "level {} not among the {k} lowest at {}",
                            level.label, run.truncation
                        ))
                    })?;
                    Ok(run.value(l, run.grid.len() - 1))
                })
                .collect::<Result<Vec<_>>>()?;
            let differences: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
            let monotone = differences.windows(2).all(|d| d[1] <= d[0]);
            Ok(ConvergenceRow {
                label: level.label,
                values,
                differences,
                monotone,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ConvergenceTable {
        eps,
        sizes: sizes.to_vec(),
        rows,
    })
}
