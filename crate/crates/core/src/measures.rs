//! Finitely supported probability measures and the distances between them.
//!
//! Three notions of closeness are provided, matching the three convergence
//! modes for measures: total variation ([`tv_distance`]), gaps over a family
//! of test sets ([`setwise_gap`]) and Wasserstein-1 ([`wasserstein1`]), which
//! stands in for weak convergence on bounded supports.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atoms closer than this (in the declared metric) are the same atom.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

/// Input weight sums may be off by this much before being renormalised.
const WEIGHT_SUM_INPUT_TOL: f64 = 1e-9;

/// Metric on the points carried by a [`FiniteMeasure`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricSupport {
    /// Real line with `|a - b|`.
    Euclidean1d,
    /// `R^dim` with the Euclidean norm.
    EuclideanNd { dim: usize },
    /// Real line split into containers by `cuts`. Points in the same container
    /// are `|a - b|` apart, points in different containers `|a - b| + 1`.
    ///
    /// Container `i` is `[cuts[i-1], cuts[i])`, with container 0 unbounded
    /// below and the last one unbounded above.
    Container { cuts: Vec<f64> },
}

impl MetricSupport {
    pub fn container(cuts: Vec<f64>) -> Result<Self> {
        if cuts.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("container cut points must be finite".into()));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "container cut points must be strictly increasing".into(),
            ));
        }
        Ok(MetricSupport::Container { cuts })
    }

    /// Dimension of the points this metric accepts.
    pub fn dim(&self) -> usize {
        match self {
            MetricSupport::Euclidean1d | MetricSupport::Container { .. } => 1,
            MetricSupport::EuclideanNd { dim } => *dim,
        }
    }

    /// Index of the container holding `x` (0 for metrics without containers).
    pub fn container_index(&self, x: f64) -> usize {
        match self {
            MetricSupport::Container { cuts } => cuts.partition_point(|c| *c <= x),
            _ => 0,
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            MetricSupport::Euclidean1d => (a[0] - b[0]).abs(),
            MetricSupport::EuclideanNd { .. } => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            MetricSupport::Container { .. } => {
                let d = (a[0] - b[0]).abs();
                if self.container_index(a[0]) == self.container_index(b[0]) {
                    d
                } else {
                    d + 1.0
                }
            }
        }
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, metric expects {}",
                p.len(),
                self.dim()
            )));
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMeasure("atom coordinates must be finite".into()));
        }
        Ok(())
    }
}

/// A probability measure with finitely many atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMeasure {
    metric: MetricSupport,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl FiniteMeasure {
    /// Builds a measure, merging atoms closer than [`ATOM_MERGE_TOL`].
    ///
    /// Zero-weight atoms are kept (they matter for nothing but make supports
    /// line up with kernel rows). The weights are renormalised to sum to one
    /// after checking they already do to within `1e-9`.
    pub fn new(metric: MetricSupport, atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("a probability measure needs at least one atom".into()));
        }
        for a in &atoms {
            metric.check_point(a)?;
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weight {w} is not a nonnegative number")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_INPUT_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }

        let refs: Vec<&[f64]> = atoms.iter().map(Vec::as_slice).collect();
        let groups = cluster_points(&refs, ATOM_MERGE_TOL, |a, b| metric.distance(a, b));
        let mut merged_atoms = Vec::with_capacity(groups.len());
        let mut merged_weights = Vec::with_capacity(groups.len());
        for g in &groups {
            merged_atoms.push(atoms[g[0]].clone());
            merged_weights.push(g.iter().map(|&i| weights[i]).sum::<f64>() / total);
        }
        Ok(FiniteMeasure {
            metric,
            atoms: merged_atoms,
            weights: merged_weights,
        })
    }

    pub fn dirac(metric: MetricSupport, atom: Vec<f64>) -> Result<Self> {
        Self::new(metric, vec![atom], vec![1.0])
    }

    /// Equal weights on the given atoms.
    pub fn uniform(metric: MetricSupport, atoms: Vec<Vec<f64>>) -> Result<Self> {
        let n = atoms.len().max(1);
        let w = vec![1.0 / n as f64; atoms.len()];
        Self::new(metric, atoms, w)
    }

    pub fn metric(&self) -> &MetricSupport {
        &self.metric
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Mass of the atoms satisfying `pred`.
    pub fn mass_where(&self, mut pred: impl FnMut(&[f64]) -> bool) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .filter(|(a, _)| pred(a))
            .map(|(_, w)| *w)
            .sum()
    }

    /// Largest distance between two atoms.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.atoms.iter().enumerate() {
            for b in &self.atoms[i + 1..] {
                d = d.max(self.metric.distance(a, b));
            }
        }
        d
    }
}

/// Union atoms with the weights of two measures on them.
type Aligned = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

/// Aligns the supports of `p` and `q`: returns the union of atoms and the
/// weight each measure puts on every union atom.
fn aligned(p: &FiniteMeasure, q: &FiniteMeasure) -> Result<Aligned> {
    if p.metric != q.metric {
        return Err(Error::MetricMismatch);
    }
    let refs: Vec<&[f64]> = p
        .atoms
        .iter()
        .chain(&q.atoms)
        .map(Vec::as_slice)
        .collect();
    let groups = cluster_points(&refs, ATOM_MERGE_TOL, |a, b| p.metric.distance(a, b));
    let np = p.atoms.len();
    let mut atoms = Vec::with_capacity(groups.len());
    let mut wp = vec![0.0; groups.len()];
    let mut wq = vec![0.0; groups.len()];
    for (k, g) in groups.iter().enumerate() {
        atoms.push(refs[g[0]].to_vec());
        for &i in g {
            if i < np {
                wp[k] += p.weights[i];
            } else {
                wq[k] += q.weights[i - np];
            }
        }
    }
    Ok((atoms, wp, wq))
}

/// Total variation distance `sup_S |p(S) - q(S)|`, i.e. half the L1 distance
/// between the weight vectors over the union of atoms.
pub fn tv_distance(p: &FiniteMeasure, q: &FiniteMeasure) -> Result<f64> {
    let (_, wp, wq) = aligned(p, q)?;
    let l1: f64 = wp.iter().zip(&wq).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * l1).min(1.0))
}

/// A measurable test set, given as a predicate over points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TestSet {
    /// `{x : lo < x[coord] < hi}`; either end may be closed or absent.
    Interval {
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
        #[serde(default)]
        lo_closed: bool,
        #[serde(default)]
        hi_closed: bool,
        #[serde(default)]
        coord: usize,
    },
    /// `{x : x[coord] >= threshold}` (or `<` when `at_least` is false).
    HalfSpace {
        coord: usize,
        threshold: f64,
        #[serde(default = "default_true")]
        at_least: bool,
    },
    /// A finite set of points, matched within the atom merge tolerance.
    Points { points: Vec<Vec<f64>> },
    Complement { set: Box<TestSet> },
}

fn default_true() -> bool {
    true
}

impl TestSet {
    pub fn open_interval(lo: f64, hi: f64) -> Self {
        TestSet::Interval {
            lo: Some(lo),
            hi: Some(hi),
            lo_closed: false,
            hi_closed: false,
            coord: 0,
        }
    }

    pub fn singleton(point: Vec<f64>) -> Self {
        TestSet::Points { points: vec![point] }
    }

    pub fn complement(self) -> Self {
        TestSet::Complement { set: Box::new(self) }
    }

    pub fn contains(&self, metric: &MetricSupport, x: &[f64]) -> bool {
        match self {
            TestSet::Interval {
                lo,
                hi,
                lo_closed,
                hi_closed,
                coord,
            } => {
                let v = x.get(*coord).copied().unwrap_or(f64::NAN);
                let above = match lo {
                    None => true,
                    Some(l) if *lo_closed => v >= *l,
                    Some(l) => v > *l,
                };
                let below = match hi {
                    None => true,
                    Some(h) if *hi_closed => v <= *h,
                    Some(h) => v < *h,
                };
                above && below
            }
            TestSet::HalfSpace {
                coord,
                threshold,
                at_least,
            } => {
                let v = x.get(*coord).copied().unwrap_or(f64::NAN);
                if *at_least {
                    v >= *threshold
                } else {
                    v < *threshold
                }
            }
            TestSet::Points { points } => points
                .iter()
                .any(|p| p.len() == x.len() && metric.distance(p, x) < ATOM_MERGE_TOL),
            TestSet::Complement { set } => !set.contains(metric, x),
        }
    }
}

/// Result of [`setwise_gap`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetwiseGap {
    pub gap: f64,
    /// Set when the test family was empty and the gap is vacuously zero.
    pub empty_family: bool,
}

/// `max_S |p(S) - q(S)|` over the supplied test sets.
pub fn setwise_gap(p: &FiniteMeasure, q: &FiniteMeasure, sets: &[TestSet]) -> Result<SetwiseGap> {
    if p.metric != q.metric {
        return Err(Error::MetricMismatch);
    }
    if sets.is_empty() {
        return Ok(SetwiseGap {
            gap: 0.0,
            empty_family: true,
        });
    }
    let metric = &p.metric;
    let gap = sets
        .iter()
        .map(|s| {
            let ps = p.mass_where(|x| s.contains(metric, x));
            let qs = q.mass_where(|x| s.contains(metric, x));
            (ps - qs).abs()
        })
        .fold(0.0, f64::max);
    Ok(SetwiseGap {
        gap,
        empty_family: false,
    })
}

/// `sup |p(I) - q(I)|` over every interval `I` of the real line (one
/// dimensional metrics only).
///
/// An interval picks out a contiguous run of the sorted union of atoms, so the
/// supremum is the spread of the running sum of `p - q`.
pub fn interval_family_gap(p: &FiniteMeasure, q: &FiniteMeasure) -> Result<f64> {
    if p.metric.dim() != 1 {
        return Err(Error::InvalidArgument(
            "the all-intervals family needs a one-dimensional support".into(),
        ));
    }
    let (atoms, wp, wq) = aligned(p, q)?;
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&i, &j| atoms[i][0].total_cmp(&atoms[j][0]));
    let (mut run, mut lo, mut hi) = (0.0f64, 0.0f64, 0.0f64);
    for i in order {
        run += wp[i] - wq[i];
        lo = lo.min(run);
        hi = hi.max(run);
    }
    Ok(hi - lo)
}

/// Wasserstein-1 distance with the declared metric as ground cost, solved
/// exactly as a transportation problem.
pub fn wasserstein1(p: &FiniteMeasure, q: &FiniteMeasure) -> Result<f64> {
    if p.metric != q.metric {
        return Err(Error::MetricMismatch);
    }
    let cost: Vec<Vec<f64>> = p
        .atoms
        .iter()
        .map(|a| q.atoms.iter().map(|b| p.metric.distance(a, b)).collect())
        .collect();
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidMeasure("ground distances must be finite".into()));
    }
    Ok(transport_cost(&p.weights, &q.weights, &cost))
}

/// Minimum-cost transportation between `supply` and `demand` (equal totals).
///
/// Successive shortest paths with Johnson potentials on the dense bipartite
/// residual graph. Forward arcs are uncapacitated; reverse arcs carry the
/// current flow.
pub(crate) fn transport_cost(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    const EPS: f64 = 1e-15;
    let (n, m) = (supply.len(), demand.len());
    let mut rem_s = supply.to_vec();
    let mut rem_d = demand.to_vec();
    let mut flow = vec![vec![0.0f64; m]; n];
    let mut pot_l = vec![0.0f64; n];
    let mut pot_r = vec![0.0f64; m];
    // each augmentation exhausts a supply, a demand or a reverse arc
    let max_rounds = 4 * (n + m) * (n + m) + 16;

    for _ in 0..max_rounds {
        if rem_s.iter().sum::<f64>() <= 1e-14 || rem_d.iter().sum::<f64>() <= 1e-14 {
            break;
        }
        let mut dist_l: Vec<f64> = rem_s
            .iter()
            .map(|&s| if s > EPS { 0.0 } else { f64::INFINITY })
            .collect();
        let mut dist_r = vec![f64::INFINITY; m];
        let mut prev_r = vec![usize::MAX; m];
        let mut prev_l = vec![usize::MAX; n];
        let mut done_l = vec![false; n];
        let mut done_r = vec![false; m];
        let mut target = None;

        loop {
            let mut best = f64::INFINITY;
            let mut pick: Option<(bool, usize)> = None;
            for i in 0..n {
                if !done_l[i] && dist_l[i] < best {
                    best = dist_l[i];
                    pick = Some((true, i));
                }
            }
            for j in 0..m {
                if !done_r[j] && dist_r[j] < best {
                    best = dist_r[j];
                    pick = Some((false, j));
                }
            }
            let Some((left, k)) = pick else { break };
            if left {
                done_l[k] = true;
                for j in 0..m {
                    if done_r[j] {
                        continue;
                    }
                    let rc = (cost[k][j] + pot_l[k] - pot_r[j]).max(0.0);
                    if dist_l[k] + rc < dist_r[j] {
                        dist_r[j] = dist_l[k] + rc;
                        prev_r[j] = k;
                    }
                }
            } else {
                done_r[k] = true;
                if rem_d[k] > EPS {
                    target = Some(k);
                    break;
                }
                for i in 0..n {
                    if done_l[i] || flow[i][k] <= EPS {
                        continue;
                    }
                    let rc = (-cost[i][k] + pot_r[k] - pot_l[i]).max(0.0);
                    if dist_r[k] + rc < dist_l[i] {
                        dist_l[i] = dist_r[k] + rc;
                        prev_l[i] = k;
                    }
                }
            }
        }

        let Some(t) = target else { break };
        let reach = dist_r[t];
        for i in 0..n {
            pot_l[i] += dist_l[i].min(reach);
        }
        for j in 0..m {
            pot_r[j] += dist_r[j].min(reach);
        }

        // walk back to a source, collecting the bottleneck
        let mut bottleneck = rem_d[t];
        let mut j = t;
        let source = loop {
            let i = prev_r[j];
            match prev_l[i] {
                usize::MAX => break i,
                back => {
                    bottleneck = bottleneck.min(flow[i][back]);
                    j = back;
                }
            }
        };
        bottleneck = bottleneck.min(rem_s[source]);

        let mut j = t;
        loop {
            let i = prev_r[j];
            flow[i][j] += bottleneck;
            match prev_l[i] {
                usize::MAX => break,
                back => {
                    flow[i][back] -= bottleneck;
                    j = back;
                }
            }
        }
        rem_s[source] -= bottleneck;
        rem_d[t] -= bottleneck;
    }

    flow.iter()
        .zip(cost)
        .map(|(f, c)| f.iter().zip(c).map(|(a, b)| a.max(0.0) * b).sum::<f64>())
        .sum()
}

/// Groups points that lie within `tol` of each other.
///
/// Returns one group per distinct point, each listing member indices in
/// increasing order; groups are ordered by their first member. Candidates are
/// found by a sweep along a fixed projection, so the cost stays near
/// `n log n` for well separated points.
pub(crate) fn cluster_points(
    points: &[&[f64]],
    tol: f64,
    dist: impl Fn(&[f64], &[f64]) -> f64,
) -> Vec<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let dim = points.iter().map(|p| p.len()).max().unwrap_or(0);
    let dir: Vec<f64> = (0..dim).map(|i| 1.0 / ((i + 2) as f64).sqrt()).collect();
    let l1: f64 = dir.iter().sum();
    // |dir . (a - b)| <= |dir|_1 * |a - b|_inf <= |dir|_1 * |a - b|_2;
    // the +1 absorbs the container metric's jump.
    let window = tol * l1.max(1.0) * 2.0;
    let proj: Vec<f64> = points
        .iter()
        .map(|p| p.iter().zip(&dir).map(|(a, b)| a * b).sum())
        .collect();
    // exact duplicates join their first occurrence up front, so repeated
    // points cannot make the sweep quadratic
    let mut parent: Vec<usize> = (0..n).collect();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(n);
    for (i, p) in points.iter().enumerate() {
        let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
        parent[i] = *seen.entry(key).or_insert(i);
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| parent[i] == i).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));

    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if proj[j] - proj[i] > window {
                break;
            }
            if dist(points[i], points[j]) < tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    // the smaller index stays the representative
                    let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                    parent[hi] = lo;
                }
            }
        }
    }

    let mut slot = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}
