//! Greedy mixture reduction with an optional adaptive stopping rule.
//!
//! Both reducers repeatedly replace the pair of components whose
//! moment-matched merge loses the least, measured by the upper bound
//!
//! ```text
//! B(i,j) = w_i·KL(ν_i ‖ ν̂_ij) + w_j·KL(ν_j ‖ ν̂_ij)
//! ```
//!
//! where ν̂_ij is the barycenter of the pair. Runnalls' reduction stops at a
//! fixed component budget. The adaptive variant instead tracks the running
//! relative loss
//!
//! ```text
//! L̃ = (Σ committed B) / (wᵀ1 · c),    c = barycenter_cost of the input,
//! ```
//!
//! and stops at the first merge that would push L̃ past a threshold α. Since
//! each merge preserves the mixture's first two moments, the barycenter never
//! moves along the descent and the bounds telescope: a full descent to a
//! single component accumulates exactly wᵀ1·c, so L̃ runs from 0 to 1 and α
//! is a dimensionless "fraction of the total collapse cost" knob. α = 1
//! therefore commits every merge (single-hypothesis collapse) and α = 0
//! commits none unless some merge is exactly free. An optional floor forces
//! merging to continue while the component count still exceeds it, so the
//! output size never exceeds the floor regardless of α.
//!
//! Merge selection keeps the upper-triangular pair-cost table alive across
//! merges: a merge tombstones two rows and computes fresh costs only against
//! the new barycenter component, with a per-row running minimum so that each
//! iteration's argmin is O(n). Exact cost ties resolve to the smallest index
//! pair.

use crate::error::{Error, Result};
use crate::gaussian::{kl_divergence, moment_match_iter, Gaussian};
use crate::mixture::GaussianMixture;

// ============================================================================
// Public types
// ============================================================================

/// The mixture-size control at the middle of a [`ReductionPipeline`].
#[derive(Clone, Debug, PartialEq)]
pub enum Reducer {
    /// Keep the `n` largest-weight components; no merging.
    Capping(usize),
    /// Greedy merging down to exactly `n` components.
    Runnalls(usize),
    /// Greedy merging until the relative loss would exceed `alpha`
    /// (committing unconditionally while the count exceeds `floor`).
    Adaptive { alpha: f64, floor: Option<usize> },
}

/// Standard prune, then reduce, then normalized-weight prune.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionPipeline {
    sp_threshold: Option<f64>,
    reducer: Reducer,
    nwp_threshold: Option<f64>,
}

/// One committed merge: the component count before the merge, the merged
/// pair as positions in the mixture at that point, the merge cost B, and the
/// relative loss L̃ after committing.
///
/// To replay a record, remove positions `pair.1` and `pair.0` from the
/// current component list and append the pair's moment-matched barycenter at
/// the end (see [`ReductionTrace::replay`]).
#[derive(Clone, Debug)]
pub struct MergeRecord {
    pub order_before: usize,
    pub pair: (usize, usize),
    pub cost: f64,
    pub cumulative_loss: f64,
}

/// The full audit trail of a reduction: the input's barycenter cost c (the
/// L̃ normalizer; `None` for capping, which merges nothing) and every
/// committed merge in order.
#[derive(Clone, Debug)]
pub struct ReductionTrace {
    pub barycenter_cost: Option<f64>,
    pub merges: Vec<MergeRecord>,
}

impl ReductionTrace {
    fn empty(barycenter_cost: Option<f64>) -> Self {
        ReductionTrace { barycenter_cost, merges: Vec::new() }
    }

    /// Reconstructs the mixture after each recorded merge, starting from
    /// `start` (which must be the mixture the reducer actually saw, i.e.
    /// with exact-zero-weight components already dropped). Returns one
    /// mixture per merge; weights are carried unnormalized exactly as the
    /// reduction engine holds them internally.
    pub fn replay(&self, start: &GaussianMixture) -> Result<Vec<GaussianMixture>> {
        let mut weights = start.weights().to_vec();
        let mut comps = start.components().to_vec();
        let mut out = Vec::with_capacity(self.merges.len());
        for rec in &self.merges {
            let (i, j) = rec.pair;
            if !(i < j && j < comps.len() && rec.order_before == comps.len()) {
                return Err(Error::InvalidParameter(format!(
                    "merge record ({i},{j}) at order {} does not fit a {}-component mixture",
                    rec.order_before,
                    comps.len()
                )));
            }
            let merged = merge_pair(weights[i], &comps[i], weights[j], &comps[j])?;
            let w = weights[i] + weights[j];
            // Remove the higher position first so the lower stays valid.
            weights.remove(j);
            comps.remove(j);
            weights.remove(i);
            comps.remove(i);
            weights.push(w);
            comps.push(merged);
            out.push(GaussianMixture::new(weights.clone(), comps.clone())?);
        }
        Ok(out)
    }
}

// ============================================================================
// Pairwise merge primitives
// ============================================================================

/// Moment-matched barycenter of a two-component sub-mixture. Shares the
/// arithmetic path of [`crate::gaussian::moment_match`] so that reduction
/// internals agree bit for bit with the public merge operations.
fn merge_pair(wi: f64, gi: &Gaussian, wj: f64, gj: &Gaussian) -> Result<Gaussian> {
    moment_match_iter([(wi, gi), (wj, gj)].into_iter())
}

fn pair_cost_of(wi: f64, gi: &Gaussian, wj: f64, gj: &Gaussian) -> Result<f64> {
    let merged = merge_pair(wi, gi, wj, gj)?;
    let mut cost = 0.0;
    if wi > 0.0 {
        cost += wi * kl_divergence(gi, &merged)?;
    }
    if wj > 0.0 {
        cost += wj * kl_divergence(gj, &merged)?;
    }
    Ok(cost)
}

// ============================================================================
// Greedy engine
// ============================================================================

/// Slab-based merge engine. Components live in a grow-only slab with
/// tombstones; `costs[i][j - i - 1]` holds the merge cost of slab pair
/// (i, j) for j > i, and `row_min[i]` caches the cheapest live partner of
/// row i. Merged barycenters are appended to the slab, so live slab order is
/// always ascending and coincides with the positional order of the current
/// mixture; lexicographic tie-breaking over slab pairs is therefore
/// lexicographic over positions as well.
struct Engine {
    weights: Vec<f64>,
    comps: Vec<Gaussian>,
    alive: Vec<bool>,
    alive_count: usize,
    costs: Vec<Vec<f64>>,
    row_min: Vec<(f64, usize)>,
}

const NO_PARTNER: usize = usize::MAX;

impl Engine {
    fn new(weights: Vec<f64>, comps: Vec<Gaussian>) -> Result<Engine> {
        let n = comps.len();
        assert!(n >= 1 && weights.len() == n, "engine inputs come pre-validated");
        let mut costs = Vec::with_capacity(2 * n);
        let mut row_min = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n - i - 1);
            let mut best = (f64::INFINITY, NO_PARTNER);
            for j in (i + 1)..n {
                let c = pair_cost_of(weights[i], &comps[i], weights[j], &comps[j])?;
                if c < best.0 {
                    best = (c, j);
                }
                row.push(c);
            }
            costs.push(row);
            row_min.push(best);
        }
        Ok(Engine {
            weights,
            comps,
            alive: vec![true; n],
            alive_count: n,
            costs,
            row_min,
        })
    }

    /// Cheapest live pair as slab indices, smallest pair on exact ties.
    fn find_min(&self) -> (usize, usize, f64) {
        let mut best = (f64::INFINITY, NO_PARTNER, NO_PARTNER);
        for i in 0..self.row_min.len() {
            if !self.alive[i] {
                continue;
            }
            let (c, j) = self.row_min[i];
            if j != NO_PARTNER && c < best.0 {
                best = (c, i, j);
            }
        }
        assert!(best.1 != NO_PARTNER, "find_min requires at least two live components");
        (best.1, best.2, best.0)
    }

    /// Positions of slab indices `i < j` within the live (positional) order.
    fn positions(&self, i: usize, j: usize) -> (usize, usize) {
        let mut pi = 0;
        let mut pj = 0;
        for (s, &a) in self.alive.iter().enumerate() {
            if a {
                if s < i {
                    pi += 1;
                }
                if s < j {
                    pj += 1;
                } else {
                    break;
                }
            }
        }
        (pi, pj)
    }

    fn rescan_row(&mut self, i: usize) {
        let mut best = (f64::INFINITY, NO_PARTNER);
        for (k, &c) in self.costs[i].iter().enumerate() {
            let j = i + 1 + k;
            if self.alive[j] && c < best.0 {
                best = (c, j);
            }
        }
        self.row_min[i] = best;
    }

    /// Merges slab pair (i, j): tombstones both, appends the barycenter,
    /// and refreshes the cost table against the new component only.
    fn merge(&mut self, i: usize, j: usize) -> Result<()> {
        debug_assert!(i < j && self.alive[i] && self.alive[j]);
        let merged = merge_pair(self.weights[i], &self.comps[i], self.weights[j], &self.comps[j])?;
        let w = self.weights[i] + self.weights[j];
        self.alive[i] = false;
        self.alive[j] = false;
        self.alive_count -= 1;

        // Rows that pointed at a dead component need a fresh minimum.
        for r in 0..self.row_min.len() {
            if self.alive[r] {
                let p = self.row_min[r].1;
                if p == i || p == j {
                    self.rescan_row(r);
                }
            }
        }

        let s = self.comps.len();
        self.weights.push(w);
        self.comps.push(merged);
        self.alive.push(true);
        for r in 0..s {
            if self.alive[r] {
                let c = pair_cost_of(self.weights[r], &self.comps[r], w, &self.comps[s])?;
                if c < self.row_min[r].0 {
                    self.row_min[r] = (c, s);
                }
                self.costs[r].push(c);
            } else {
                self.costs[r].push(f64::INFINITY);
            }
        }
        self.costs.push(Vec::new());
        self.row_min.push((f64::INFINITY, NO_PARTNER));
        Ok(())
    }

    fn into_mixture(self) -> Result<GaussianMixture> {
        let mut weights = Vec::with_capacity(self.alive_count);
        let mut comps = Vec::with_capacity(self.alive_count);
        for ((&a, w), c) in self.alive.iter().zip(self.weights).zip(self.comps) {
            if a {
                weights.push(w);
                comps.push(c);
            }
        }
        let mut out = GaussianMixture::new(weights, comps)?;
        out.normalize();
        Ok(out)
    }
}

/// Drops exact-zero-weight components so the engine never manufactures
/// zero-weight barycenters; trace positions refer to this cleaned mixture.
fn live_parts(p: &GaussianMixture) -> (Vec<f64>, Vec<Gaussian>) {
    let mut weights = Vec::with_capacity(p.len());
    let mut comps = Vec::with_capacity(p.len());
    for (w, g) in p.weights().iter().zip(p.components()) {
        if *w > 0.0 {
            weights.push(*w);
            comps.push(g.clone());
        }
    }
    (weights, comps)
}

fn cleaned(p: &GaussianMixture) -> Result<GaussianMixture> {
    let (weights, comps) = live_parts(p);
    GaussianMixture::new(weights, comps)
}

// ============================================================================
// Reduction drivers
// ============================================================================

/// Greedy reduction to exactly `min(n_b, n)` components. The trace holds
/// every merge with its cost and running relative loss.
pub fn runnalls_reduce(
    p: &GaussianMixture,
    n_b: usize,
) -> Result<(GaussianMixture, ReductionTrace)> {
    if n_b < 1 {
        return Err(Error::InvalidParameter("reduction target must be >= 1".into()));
    }
    let work = cleaned(p)?;
    let c = work.barycenter_cost()?;
    let denom = work.total_weight() * c;
    if work.len() <= n_b {
        let mut out = work;
        out.normalize();
        return Ok((out, ReductionTrace::empty(Some(c))));
    }
    let (weights, comps) = (work.weights().to_vec(), work.components().to_vec());
    let mut engine = Engine::new(weights, comps)?;
    let mut merges = Vec::with_capacity(engine.alive_count - n_b);
    let mut cum = 0.0;
    while engine.alive_count > n_b {
        let (si, sj, cost) = engine.find_min();
        let pair = engine.positions(si, sj);
        cum += cost;
        merges.push(MergeRecord {
            order_before: engine.alive_count,
            pair,
            cost,
            cumulative_loss: if c > 0.0 { cum / denom } else { 0.0 },
        });
        engine.merge(si, sj)?;
    }
    Ok((engine.into_mixture()?, ReductionTrace { barycenter_cost: Some(c), merges }))
}

/// Greedy reduction that stops at the first merge whose committed relative
/// loss would exceed `alpha` (or at a single component). While the count
/// exceeds `floor`, merges commit regardless of the loss, so the output
/// never has more than `floor` components. `alpha >= 1` always collapses to
/// a single component: a full descent accumulates the whole collapse cost
/// exactly, so the final L̃ equals 1 only up to rounding.
pub fn adaptive_reduce(
    p: &GaussianMixture,
    alpha: f64,
    floor: Option<usize>,
) -> Result<(GaussianMixture, ReductionTrace)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "adaptive loss threshold must be in [0,1], got {alpha}"
        )));
    }
    if floor == Some(0) {
        return Err(Error::InvalidParameter("adaptive floor must be >= 1".into()));
    }
    let work = cleaned(p)?;
    let c = work.barycenter_cost()?;
    let denom = work.total_weight() * c;
    let (weights, comps) = (work.weights().to_vec(), work.components().to_vec());
    let mut engine = Engine::new(weights, comps)?;
    let mut merges = Vec::new();
    let mut cum = 0.0;

    if c == 0.0 {
        // All components identical: every merge is free, so collapse to the
        // floor (or to one component) with zero loss contributions.
        let target = floor.unwrap_or(1);
        while engine.alive_count > target {
            let (si, sj, cost) = engine.find_min();
            let pair = engine.positions(si, sj);
            merges.push(MergeRecord {
                order_before: engine.alive_count,
                pair,
                cost,
                cumulative_loss: 0.0,
            });
            engine.merge(si, sj)?;
        }
        return Ok((engine.into_mixture()?, ReductionTrace { barycenter_cost: Some(c), merges }));
    }

    while engine.alive_count > 1 {
        let (si, sj, cost) = engine.find_min();
        let tentative = (cum + cost) / denom;
        let forced = floor.is_some_and(|f| engine.alive_count > f);
        if !(tentative <= alpha || alpha >= 1.0 || forced) {
            break;
        }
        let pair = engine.positions(si, sj);
        cum += cost;
        merges.push(MergeRecord {
            order_before: engine.alive_count,
            pair,
            cost,
            cumulative_loss: tentative,
        });
        engine.merge(si, sj)?;
    }
    Ok((engine.into_mixture()?, ReductionTrace { barycenter_cost: Some(c), merges }))
}

// ============================================================================
// Pipelines
// ============================================================================

impl Reducer {
    fn validate(&self) -> Result<()> {
        match *self {
            Reducer::Capping(n) | Reducer::Runnalls(n) if n < 1 => {
                Err(Error::InvalidParameter("reduction target must be >= 1".into()))
            }
            Reducer::Adaptive { alpha, .. } if !(0.0..=1.0).contains(&alpha) => {
                Err(Error::InvalidParameter(format!(
                    "adaptive loss threshold must be in [0,1], got {alpha}"
                )))
            }
            Reducer::Adaptive { floor: Some(0), .. } => {
                Err(Error::InvalidParameter("adaptive floor must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Runs just the reduction stage. Capping produces an empty trace.
    pub fn reduce(&self, p: &GaussianMixture) -> Result<(GaussianMixture, ReductionTrace)> {
        match *self {
            Reducer::Capping(n) => Ok((p.cap(n)?, ReductionTrace::empty(None))),
            Reducer::Runnalls(n) => runnalls_reduce(p, n),
            Reducer::Adaptive { alpha, floor } => adaptive_reduce(p, alpha, floor),
        }
    }
}

impl ReductionPipeline {
    /// Builds and validates a pipeline. Thresholds of `None` disable the
    /// corresponding pruning stage.
    pub fn new(
        sp_threshold: Option<f64>,
        reducer: Reducer,
        nwp_threshold: Option<f64>,
    ) -> Result<Self> {
        if let Some(g) = sp_threshold {
            if !(0.0..1.0).contains(&g) {
                return Err(Error::InvalidParameter(format!(
                    "standard pruning threshold must be in [0,1), got {g}"
                )));
            }
        }
        if let Some(g) = nwp_threshold {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "normalized-weight pruning threshold must be finite and >= 0, got {g}"
                )));
            }
        }
        reducer.validate()?;
        Ok(ReductionPipeline { sp_threshold, reducer, nwp_threshold })
    }

    pub fn sp_threshold(&self) -> Option<f64> {
        self.sp_threshold
    }

    pub fn reducer(&self) -> &Reducer {
        &self.reducer
    }

    pub fn nwp_threshold(&self) -> Option<f64> {
        self.nwp_threshold
    }

    /// Standard prune, reduce, normalized-weight prune, in that fixed order;
    /// the output is normalized. The trace comes from the reduction stage
    /// and its merge positions refer to the post-SP mixture.
    pub fn apply(&self, p: &GaussianMixture) -> Result<(GaussianMixture, ReductionTrace)> {
        let stage = match self.sp_threshold {
            Some(g) => p.standard_prune(g)?,
            None => p.clone(),
        };
        let (reduced, trace) = self.reducer.reduce(&stage)?;
        let mut out = match self.nwp_threshold {
            Some(g) => reduced.nw_prune(g)?,
            None => reduced,
        };
        out.normalize();
        Ok((out, trace))
    }
}

// ============================================================================
// Tests
// ============================================================================
