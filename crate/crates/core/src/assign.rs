//! Injective point association between consecutive clouds and the 3D scene
//! flow derived from it.
//!
//! The assignment problem is
//!
//! ```text
//! minimize  sum_ij A_ij C_ij
//! s.t.      sum_j A_ij  = 1  for every source row i
//!           sum_i A_ij <= 1  for every target column j
//! ```
//!
//! with `C` the Euclidean distance matrix. It is solved with a forward
//! auction and epsilon-scaling. Rectangular problems are squared up with
//! zero-cost dummy rows so that the symmetric auction applies in every
//! scaling phase.

use std::collections::{BTreeSet, HashMap, VecDeque};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// Total slack of the scene flow assignment, in meters.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Dense row-major `rows x cols` cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(rows * cols, data.len()));
        }
        if data.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument(
                "costs must be finite and nonnegative".into(),
            ));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged cost rows".into()));
        }
        CostMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Euclidean distance matrix between two clouds.
pub fn edm(a: &PointCloud, b: &PointCloud) -> Result<CostMatrix> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut data = Vec::with_capacity(a.len() * b.len());
    for p in &a.points {
        data.extend(b.points.iter().map(|q| (p - q).norm()));
    }
    Ok(CostMatrix {
        rows: a.len(),
        cols: b.len(),
        data,
    })
}

/// Per-row column choice. Columns are used at most once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub matches: Vec<Option<usize>>,
}

impl Assignment {
    pub fn total_cost(&self, c: &CostMatrix) -> f64 {
        self.matches
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.map(|j| c.get(i, j)))
            .sum()
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.matches.iter().flatten().all(|j| seen.insert(*j))
    }
}

/// Running minimum and runner-up of `cost + price` over offered columns.
struct TopTwo {
    best: usize,
    first: f64,
    second: f64,
}

impl TopTwo {
    fn new() -> Self {
        TopTwo {
            best: usize::MAX,
            first: f64::INFINITY,
            second: f64::INFINITY,
        }
    }

    #[inline]
    fn offer(&mut self, j: usize, v: f64) {
        if v < self.first {
            self.second = self.first;
            self.first = v;
            self.best = j;
        } else if v < self.second {
            self.second = v;
        }
    }

    fn result(&self) -> (usize, f64, f64) {
        (self.best, self.first, self.second)
    }
}

/// Cost oracle for the auction. Rows are bidders, columns are objects.
trait BidCosts {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn max_cost(&self) -> f64;
    /// Column minimizing `cost + price`, that minimum, and the runner-up
    /// value (`+inf` when there is only one column).
    fn best_two(&self, row: usize, prices: &[f64]) -> (usize, f64, f64);
    /// Called after `prices[col]` was raised from `old`.
    fn price_raised(&mut self, _col: usize, _old: f64, _prices: &[f64]) {}
}

impl BidCosts for CostMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn max_cost(&self) -> f64 {
        self.max()
    }

    fn best_two(&self, row: usize, prices: &[f64]) -> (usize, f64, f64) {
        let mut top = TopTwo::new();
        for (j, (c, p)) in self.row(row).iter().zip(prices).enumerate() {
            top.offer(j, c + p);
        }
        top.result()
    }
}

/// Columns of a contiguous range ordered by price, for bidders whose cost is
/// the same on every column of the range. Prices are never negative, so the
/// bit patterns order like the values.
struct PriceIndex {
    offset: usize,
    order: BTreeSet<(u64, u32)>,
}

impl PriceIndex {
    /// Columns `offset..offset + len`, all priced zero.
    fn new(offset: usize, len: usize) -> Self {
        PriceIndex {
            offset,
            order: (0..len as u32).map(|k| (0f64.to_bits(), k)).collect(),
        }
    }

    fn contains(&self, col: usize) -> bool {
        col >= self.offset && col - self.offset < self.order.len()
    }

    fn raise(&mut self, col: usize, old: f64, new: f64) {
        let k = (col - self.offset) as u32;
        self.order.remove(&(old.to_bits(), k));
        self.order.insert((new.to_bits(), k));
    }

    /// Offers the two cheapest columns at `cost + price`.
    fn offer_cheapest(&self, cost: f64, top: &mut TopTwo) {
        for &(bits, k) in self.order.iter().take(2) {
            top.offer(self.offset + k as usize, cost + f64::from_bits(bits));
        }
    }
}

/// Pads a rectangular problem to square with zero-cost dummy rows.
struct SquaredUp<'a, C: BidCosts> {
    inner: &'a mut C,
    all: PriceIndex,
}

impl<'a, C: BidCosts> SquaredUp<'a, C> {
    fn new(inner: &'a mut C) -> Self {
        let cols = inner.cols();
        SquaredUp {
            inner,
            all: PriceIndex::new(0, cols),
        }
    }

    fn real_rows(&self) -> usize {
        self.inner.rows()
    }
}

impl<C: BidCosts> BidCosts for SquaredUp<'_, C> {
    fn rows(&self) -> usize {
        self.inner.cols()
    }

    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn max_cost(&self) -> f64 {
        self.inner.max_cost()
    }

    fn best_two(&self, row: usize, prices: &[f64]) -> (usize, f64, f64) {
        if row < self.real_rows() {
            return self.inner.best_two(row, prices);
        }
        let mut top = TopTwo::new();
        self.all.offer_cheapest(0.0, &mut top);
        top.result()
    }

    fn price_raised(&mut self, col: usize, old: f64, prices: &[f64]) {
        self.all.raise(col, old, prices[col]);
        self.inner.price_raised(col, old, prices);
    }
}

/// One epsilon phase of the Gauss-Seidel forward auction on a square problem.
fn auction_phase<C: BidCosts>(
    costs: &mut C,
    prices: &mut [f64],
    owner: &mut [Option<usize>],
    assigned: &mut [Option<usize>],
    eps: f64,
) {
    let n = costs.rows();
    owner.iter_mut().for_each(|o| *o = None);
    assigned.iter_mut().for_each(|a| *a = None);
    let mut queue: VecDeque<usize> = (0..n).collect();
    while let Some(i) = queue.pop_front() {
        let (j, w1, w2) = costs.best_two(i, prices);
        let raise = if w2.is_finite() { w2 - w1 + eps } else { eps };
        let old = prices[j];
        prices[j] += raise;
        costs.price_raised(j, old, prices);
        if let Some(prev) = owner[j].replace(i) {
            assigned[prev] = None;
            queue.push_back(prev);
        }
        assigned[i] = Some(j);
    }
}

fn run_auction<C: BidCosts>(costs: &mut C, final_eps: f64) -> Vec<usize> {
    let n = costs.rows();
    debug_assert_eq!(n, costs.cols());
    let mut prices = vec![0.0; n];
    let mut owner = vec![None; n];
    let mut assigned = vec![None; n];
    let max_cost = costs.max_cost();
    let mut eps = if max_cost > 0.0 { max_cost / 4.0 } else { final_eps / 2.0 };
    loop {
        auction_phase(costs, &mut prices, &mut owner, &mut assigned, eps);
        if eps < final_eps {
            break;
        }
        eps /= 4.0;
    }
    assigned.into_iter().map(|a| a.expect("auction leaves no bidder unassigned")).collect()
}

fn solve_rect<C: BidCosts>(costs: &mut C, final_eps: f64) -> Result<Assignment> {
    let (rows, cols) = (costs.rows(), costs.cols());
    if rows > cols {
        return Err(Error::InfeasibleShape { rows, cols });
    }
    if rows == 0 {
        return Ok(Assignment {
            matches: Vec::new(),
        });
    }
    let cols_of_rows = if rows == cols {
        run_auction(costs, final_eps)
    } else {
        run_auction(&mut SquaredUp::new(costs), final_eps)
    };
    Ok(Assignment {
        matches: cols_of_rows.into_iter().take(rows).map(Some).collect(),
    })
}

/// Injective assignment of rows to columns whose total cost is within
/// `rows * eps` of the optimum. `eps` is the final scaling phase slack.
/// Requires `rows <= cols`.
pub fn solve_assignment(c: &CostMatrix, eps: f64) -> Result<Assignment> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    solve_rect(&mut c.clone(), eps)
}

/// Distance oracle over a kd-tree of the target cloud, with `virtual_cols`
/// extra columns at a flat cost appended after the real ones. Every node
/// keeps the minimum price of its points, so a subtree is skipped once its
/// box distance plus that price cannot beat the runner-up. Bids are exact.
struct KdCosts<'a> {
    src: &'a [Point3],
    dst: &'a [Point3],
    /// Target indices, grouped so every node owns a contiguous range.
    order: Vec<u32>,
    nodes: Vec<KdNode>,
    /// Leaf owning each target point.
    leaf_of: Vec<u32>,
    virtual_cols: PriceIndex,
    virtual_cost: f64,
    scale: f64,
}

#[derive(Debug, Clone)]
struct KdNode {
    lo: Vector3<f64>,
    hi: Vector3<f64>,
    start: u32,
    end: u32,
    /// Children, or `u32::MAX` for leaves.
    left: u32,
    right: u32,
    parent: u32,
    min_price: f64,
}

const LEAF_SIZE: usize = 8;

impl<'a> KdCosts<'a> {
    fn new(src: &'a [Point3], dst: &'a [Point3], virtual_cols: usize, virtual_cost: f64) -> Self {
        let mut tree = KdCosts {
            src,
            dst,
            order: (0..dst.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * dst.len() / LEAF_SIZE + 1),
            leaf_of: vec![0; dst.len()],
            virtual_cols: PriceIndex::new(dst.len(), virtual_cols),
            virtual_cost,
            scale: 0.0,
        };
        tree.build(0, dst.len(), u32::MAX);
        let (lo, hi) = src.iter().chain(dst).fold(
            (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(&p.coords), hi.sup(&p.coords)),
        );
        // the match gate bounds every useful bid, so scaling starts there
        // rather than at the cloud diameter
        tree.scale = (hi - lo).norm().min(virtual_cost);
        tree
    }

    fn build(&mut self, start: usize, end: usize, parent: u32) -> u32 {
        let (lo, hi) = self.order[start..end].iter().fold(
            (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), &j| {
                let p = &self.dst[j as usize].coords;
                (lo.inf(p), hi.sup(p))
            },
        );
        let id = self.nodes.len() as u32;
        self.nodes.push(KdNode {
            lo,
            hi,
            start: start as u32,
            end: end as u32,
            left: u32::MAX,
            right: u32::MAX,
            parent,
            min_price: 0.0,
        });
        if end - start <= LEAF_SIZE {
            for &j in &self.order[start..end] {
                self.leaf_of[j as usize] = id;
            }
            return id;
        }
        let axis = (hi - lo).imax();
        let mid = (start + end) / 2;
        let dst = self.dst;
        self.order[start..end].select_nth_unstable_by(mid - start, |a, b| {
            dst[*a as usize][axis].total_cmp(&dst[*b as usize][axis])
        });
        let left = self.build(start, mid, id);
        let right = self.build(mid, end, id);
        self.nodes[id as usize].left = left;
        self.nodes[id as usize].right = right;
        id
    }

    #[inline]
    fn box_distance(node: &KdNode, p: &Point3) -> f64 {
        let d = (node.lo - p.coords).sup(&(p.coords - node.hi)).sup(&Vector3::zeros());
        d.norm()
    }

    fn search(&self, node: u32, p: &Point3, prices: &[f64], top: &mut TopTwo) {
        let n = &self.nodes[node as usize];
        if n.left == u32::MAX {
            for &j in &self.order[n.start as usize..n.end as usize] {
                let j = j as usize;
                top.offer(j, (self.dst[j] - p).norm() + prices[j]);
            }
            return;
        }
        let bound = |c: u32| {
            let c = &self.nodes[c as usize];
            Self::box_distance(c, p) + c.min_price
        };
        let (bl, br) = (bound(n.left), bound(n.right));
        let ordered = if bl <= br {
            [(n.left, bl), (n.right, br)]
        } else {
            [(n.right, br), (n.left, bl)]
        };
        for (child, b) in ordered {
            if b < top.second {
                self.search(child, p, prices, top);
            }
        }
    }
}

impl BidCosts for KdCosts<'_> {
    fn rows(&self) -> usize {
        self.src.len()
    }

    fn cols(&self) -> usize {
        self.dst.len() + self.virtual_cols.order.len()
    }

    fn max_cost(&self) -> f64 {
        self.scale
    }

    fn best_two(&self, row: usize, prices: &[f64]) -> (usize, f64, f64) {
        let p = &self.src[row];
        let mut top = TopTwo::new();
        self.virtual_cols.offer_cheapest(self.virtual_cost, &mut top);
        if !self.nodes.is_empty() {
            self.search(0, p, prices, &mut top);
        }
        top.result()
    }

    fn price_raised(&mut self, col: usize, old: f64, prices: &[f64]) {
        if self.virtual_cols.contains(col) {
            self.virtual_cols.raise(col, old, prices[col]);
            return;
        }
        let mut id = self.leaf_of[col];
        let leaf = &self.nodes[id as usize];
        let mut value = self.order[leaf.start as usize..leaf.end as usize]
            .iter()
            .map(|&j| prices[j as usize])
            .fold(f64::INFINITY, f64::min);
        loop {
            let node = &mut self.nodes[id as usize];
            if node.min_price == value {
                return;
            }
            node.min_price = value;
            if node.parent == u32::MAX {
                return;
            }
            id = node.parent;
            let parent = &self.nodes[id as usize];
            value = self.nodes[parent.left as usize]
                .min_price
                .min(self.nodes[parent.right as usize].min_price);
        }
    }
}

/// Per-source-point 3D motion. `source` holds the (possibly downsampled)
/// points the displacements start from.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFlow3D {
    pub source: PointCloud,
    pub displacement: Vec<Vector3<f64>>,
    pub valid: Vec<bool>,
    pub matches: Vec<Option<usize>>,
}

impl SceneFlow3D {
    pub fn len(&self) -> usize {
        self.displacement.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacement.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneFlowOptions {
    /// Voxel edge for centroid downsampling of both clouds; 0 disables.
    pub voxel_size: f64,
    /// Matches longer than this are flagged invalid; also the cost of the
    /// virtual columns added when the source has more points than the target.
    pub max_match_dist: f64,
    pub tolerance: f64,
}

impl Default for SceneFlowOptions {
    fn default() -> Self {
        SceneFlowOptions {
            voxel_size: 0.3,
            max_match_dist: 1.0,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// Replaces every occupied voxel by the centroid of its points. Output is
/// ordered by voxel index so results do not depend on input order.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> PointCloud {
    if !(voxel > 0.0) {
        return PointCloud::new(cloud.points.clone());
    }
    let mut cells: HashMap<[i64; 3], (Vector3<f64>, usize)> = HashMap::new();
    for p in &cloud.points {
        let key = [
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        ];
        let e = cells.entry(key).or_insert((Vector3::zeros(), 0));
        e.0 += p.coords;
        e.1 += 1;
    }
    let mut cells: Vec<_> = cells.into_iter().collect();
    cells.sort_unstable_by_key(|(k, _)| *k);
    cells
        .into_iter()
        .map(|(_, (sum, n))| Point3::from(sum / n as f64))
        .collect()
}

/// Assignment on explicit point sets, without materializing the distance
/// matrix, with total cost within `tol` of the optimum. Every row may take
/// one of `src.len()` virtual columns at `virtual_cost` instead of a real
/// target; such rows come back unmatched. This keeps the problem feasible
/// for any shapes and lets points without a counterpart drop out instead of
/// displacing their neighbours.
pub fn assign_points(
    src: &[Point3],
    dst: &[Point3],
    virtual_cost: f64,
    tol: f64,
) -> Result<Assignment> {
    if src.is_empty() || dst.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut costs = KdCosts::new(src, dst, src.len(), virtual_cost);
    let mut a = solve_rect(&mut costs, tol / src.len().max(dst.len()) as f64)?;
    for m in &mut a.matches {
        if matches!(m, Some(j) if *j >= dst.len()) {
            *m = None;
        }
    }
    Ok(a)
}

pub fn scene_flow(src: &PointCloud, dst: &PointCloud, opts: &SceneFlowOptions) -> Result<SceneFlow3D> {
    if src.is_empty() || dst.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let src = voxel_downsample(src, opts.voxel_size);
    let dst = voxel_downsample(dst, opts.voxel_size);
    let a = assign_points(&src.points, &dst.points, opts.max_match_dist, opts.tolerance)?;
    let mut displacement = Vec::with_capacity(src.len());
    let mut valid = Vec::with_capacity(src.len());
    for (p, m) in src.points.iter().zip(&a.matches) {
        match m {
            Some(j) => {
                let d = dst.points[*j] - p;
                valid.push(d.norm() <= opts.max_match_dist);
                displacement.push(d);
            }
            None => {
                valid.push(false);
                displacement.push(Vector3::zeros());
            }
        }
    }
    Ok(SceneFlow3D {
        source: src,
        displacement,
        valid,
        matches: a.matches,
    })
}
