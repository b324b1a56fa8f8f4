//! Graph partitioning into subdomains and the reordered block system
//! `[[B, E], [E^T, C]]` with `B = blkdiag(B_1, ..., B_p)`.

use std::io::Write;
use std::ops::Range;

use crate::error::{check_len, Result, SlrError};
use crate::sparse::{inverse_permutation, GridShape, SparseBlock, SymSparseMatrix};

/// Subdomain id and interface flag for every vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionLabels {
    p: usize,
    part: Vec<usize>,
    interface: Vec<bool>,
}

impl PartitionLabels {
    pub fn new(p: usize, part: Vec<usize>, interface: Vec<bool>) -> Result<Self> {
        check_len(part.len(), interface.len())?;
        if p == 0 {
            return Err(SlrError::InvalidPartition("p must be at least 1".into()));
        }
        if let Some(v) = part.iter().position(|&q| q >= p) {
            return Err(SlrError::InvalidPartition(format!(
                "vertex {v} has part {} outside 0..{p}",
                part[v]
            )));
        }
        Ok(Self { p, part, interface })
    }

    /// Labels with the interface set to every vertex adjacent to a vertex of
    /// another part.
    pub fn from_parts(a: &SymSparseMatrix, p: usize, part: Vec<usize>) -> Result<Self> {
        check_len(a.n(), part.len())?;
        let mut interface = vec![false; a.n()];
        for i in 0..a.n() {
            for &j in a.row(i).0 {
                if part[i] != part[j] {
                    interface[i] = true;
                    interface[j] = true;
                }
            }
        }
        Self::new(p, part, interface)
    }

    pub fn n(&self) -> usize {
        self.part.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn part(&self, v: usize) -> usize {
        self.part[v]
    }

    pub fn parts(&self) -> &[usize] {
        &self.part
    }

    pub fn is_interface(&self, v: usize) -> bool {
        self.interface[v]
    }

    pub fn interface_flags(&self) -> &[bool] {
        &self.interface
    }

    pub fn interface_count(&self) -> usize {
        self.interface.iter().filter(|&&f| f).count()
    }

    /// Vertices per part, interface vertices counted with their owner.
    pub fn part_sizes(&self) -> Vec<usize> {
        let mut sz = vec![0; self.p];
        for &q in &self.part {
            sz[q] += 1;
        }
        sz
    }

    /// One `vertex part interface_flag` line per vertex.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        for (v, (&q, &f)) in self.part.iter().zip(&self.interface).enumerate() {
            writeln!(w, "{v} {q} {}", u8::from(f))?;
        }
        Ok(())
    }
}

/// Axis-aligned recursive bisection of a regular grid into `p` boxes.
///
/// Each cut splits the longest axis (ties go to the later axis, so `y`
/// before `x` in 2-D) with the lower box taking `ceil(L/2)` layers. The layer
/// of each lower box that touches a higher-numbered box is its interface;
/// for a 2-D grid `nx x (2m+1)` and `p = 2` this is the middle grid line.
pub fn geometric_bisection_grid(shape: GridShape, p: usize) -> Result<PartitionLabels> {
    if p == 0 || !p.is_power_of_two() {
        return Err(SlrError::InvalidPartition(format!("p = {p} is not a power of two")));
    }
    let n = shape.len();
    if p > n {
        return Err(SlrError::InvalidPartition(format!("p = {p} exceeds {n} vertices")));
    }
    let mut part = vec![0usize; n];
    split_box(shape, [0, 0, 0], shape.dims(), p, 0, &mut part);

    let mut interface = vec![false; n];
    for v in 0..n {
        let c = shape.coords(v);
        let dims = shape.dims();
        for ax in 0..3 {
            if c[ax] + 1 < dims[ax] {
                let mut d = c;
                d[ax] += 1;
                let u = shape.index(d[0], d[1], d[2]);
                match part[v].cmp(&part[u]) {
                    std::cmp::Ordering::Less => interface[v] = true,
                    std::cmp::Ordering::Greater => interface[u] = true,
                    std::cmp::Ordering::Equal => {}
                }
            }
        }
    }
    PartitionLabels::new(p, part, interface)
}

fn split_box(
    shape: GridShape,
    lo: [usize; 3],
    hi: [usize; 3],
    q: usize,
    base: usize,
    part: &mut [usize],
) {
    if q == 1 {
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                for x in lo[0]..hi[0] {
                    part[shape.index(x, y, z)] = base;
                }
            }
        }
        return;
    }
    let ext = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let longest = *ext.iter().max().unwrap();
    let ax = (0..3).rev().find(|&a| ext[a] == longest).unwrap();
    let cut = lo[ax] + (ext[ax] + 1) / 2;
    let (mut hi1, mut lo2) = (hi, lo);
    hi1[ax] = cut;
    lo2[ax] = cut;
    split_box(shape, lo, hi1, q / 2, base, part);
    split_box(shape, lo2, hi, q / 2, base + q / 2, part);
}

/// Multilevel recursive bisection of the adjacency graph of `a`.
///
/// Each bisection coarsens by heavy-edge matching, grows an initial split
/// greedily on the coarsest graph, and refines greedily while projecting
/// back. Parts are split in proportion `floor(q/2) : ceil(q/2)` so any `p`
/// works. A vertex adjacent to another part is an interface vertex.
pub fn partition_graph(a: &SymSparseMatrix, p: usize) -> Result<PartitionLabels> {
    let n = a.n();
    if p == 0 {
        return Err(SlrError::InvalidPartition("p must be at least 1".into()));
    }
    if p > n {
        return Err(SlrError::InvalidPartition(format!("p = {p} exceeds {n} vertices")));
    }
    let (xadj, adj) = a.adjacency();
    let mut part = vec![0usize; n];
    let all: Vec<usize> = (0..n).collect();
    recursive_bisect(&xadj, &adj, &all, p, 0, &mut part);
    PartitionLabels::from_parts(a, p, part)
}

fn recursive_bisect(
    xadj: &[usize],
    adj: &[usize],
    verts: &[usize],
    q: usize,
    base: usize,
    part: &mut [usize],
) {
    if q == 1 {
        for &v in verts {
            part[v] = base;
        }
        return;
    }
    let q0 = q / 2;
    let g = Graph::induced(xadj, adj, verts, part.len());
    let side = multilevel_bisect(&g, q0, q - q0);
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (k, &v) in verts.iter().enumerate() {
        if side[k] == 0 {
            left.push(v);
        } else {
            right.push(v);
        }
    }
    recursive_bisect(xadj, adj, &left, q0, base, part);
    recursive_bisect(xadj, adj, &right, q - q0, base + q0, part);
}

#[derive(Debug, Clone)]
struct Graph {
    xadj: Vec<usize>,
    adj: Vec<usize>,
    ew: Vec<i64>,
    vw: Vec<i64>,
}

impl Graph {
    fn n(&self) -> usize {
        self.vw.len()
    }

    fn nbrs(&self, v: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        let r = self.xadj[v]..self.xadj[v + 1];
        self.adj[r.clone()].iter().copied().zip(self.ew[r].iter().copied())
    }

    /// Subgraph induced by `verts`, with unit weights.
    fn induced(xadj: &[usize], adj: &[usize], verts: &[usize], n: usize) -> Self {
        let mut pos = vec![usize::MAX; n];
        for (k, &v) in verts.iter().enumerate() {
            pos[v] = k;
        }
        let mut g = Graph {
            xadj: vec![0],
            adj: Vec::new(),
            ew: Vec::new(),
            vw: vec![1; verts.len()],
        };
        for &v in verts {
            for &u in &adj[xadj[v]..xadj[v + 1]] {
                if pos[u] != usize::MAX {
                    g.adj.push(pos[u]);
                    g.ew.push(1);
                }
            }
            g.xadj.push(g.adj.len());
        }
        g
    }

    /// Heavy-edge matching; returns the coarse graph and the fine-to-coarse map.
    fn coarsen(&self) -> (Graph, Vec<usize>) {
        let n = self.n();
        let mut mate = vec![usize::MAX; n];
        for v in 0..n {
            if mate[v] != usize::MAX {
                continue;
            }
            let mut best = v;
            let mut best_w = 0;
            for (u, w) in self.nbrs(v) {
                if u != v && mate[u] == usize::MAX && w > best_w {
                    best = u;
                    best_w = w;
                }
            }
            mate[v] = best;
            mate[best] = v;
        }
        let mut cmap = vec![usize::MAX; n];
        let mut nc = 0;
        for v in 0..n {
            if v <= mate[v] {
                cmap[v] = nc;
                cmap[mate[v]] = nc;
                nc += 1;
            }
        }
        let mut coarse = Graph {
            xadj: vec![0],
            adj: Vec::new(),
            ew: Vec::new(),
            vw: vec![0; nc],
        };
        let mut slot = vec![usize::MAX; nc];
        for v in 0..n {
            if v > mate[v] {
                continue;
            }
            let c = cmap[v];
            let start = coarse.adj.len();
            let members = if mate[v] == v { vec![v] } else { vec![v, mate[v]] };
            for &m in &members {
                coarse.vw[c] += self.vw[m];
                for (u, w) in self.nbrs(m) {
                    let cu = cmap[u];
                    if cu == c {
                        continue;
                    }
                    if slot[cu] == usize::MAX || slot[cu] < start {
                        slot[cu] = coarse.adj.len();
                        coarse.adj.push(cu);
                        coarse.ew.push(w);
                    } else {
                        coarse.ew[slot[cu]] += w;
                    }
                }
            }
            // sorted neighbour lists keep tie-breaking index-ordered
            let mut row: Vec<(usize, i64)> = coarse.adj[start..]
                .iter()
                .copied()
                .zip(coarse.ew[start..].iter().copied())
                .collect();
            row.sort_unstable_by_key(|x| x.0);
            for (k, (u, w)) in row.into_iter().enumerate() {
                coarse.adj[start + k] = u;
                coarse.ew[start + k] = w;
                slot[u] = usize::MAX;
            }
            coarse.xadj.push(coarse.adj.len());
        }
        (coarse, cmap)
    }

    fn cut(&self, side: &[u8]) -> i64 {
        let mut c = 0;
        for v in 0..self.n() {
            for (u, w) in self.nbrs(v) {
                if u > v && side[u] != side[v] {
                    c += w;
                }
            }
        }
        c
    }
}

const COARSEST: usize = 64;

struct Balance {
    target0: i64,
    slack: i64,
    min_count: [usize; 2],
}

fn multilevel_bisect(g: &Graph, q0: usize, q1: usize) -> Vec<u8> {
    let total: i64 = g.vw.iter().sum();
    let bal = Balance {
        target0: total * q0 as i64 / (q0 + q1) as i64,
        slack: ((total as f64) * 0.02).ceil() as i64,
        min_count: [q0, q1],
    };
    let mut levels: Vec<(Graph, Vec<usize>)> = Vec::new();
    let mut cur = g.clone();
    while cur.n() > COARSEST {
        let (coarse, cmap) = cur.coarsen();
        if coarse.n() * 10 > cur.n() * 9 {
            break;
        }
        levels.push((cur, cmap));
        cur = coarse;
    }
    let mut side = initial_bisect(&cur, &bal);
    while let Some((fine, cmap)) = levels.pop() {
        side = cmap.iter().map(|&c| side[c]).collect();
        refine(&fine, &mut side, &bal);
    }
    enforce_counts(g, &mut side, &bal);
    side
}

/// Greedy graph growing from several seeds; keeps the best refined cut.
fn initial_bisect(g: &Graph, bal: &Balance) -> Vec<u8> {
    let n = g.n();
    let tries = n.min(6);
    let mut best: Option<(i64, i64, Vec<u8>)> = None;
    for t in 0..tries {
        let seed = t * n / tries;
        let mut side = grow_from(g, seed, bal.target0);
        refine(g, &mut side, bal);
        let w0: i64 = (0..n).filter(|&v| side[v] == 0).map(|v| g.vw[v]).sum();
        let key = (g.cut(&side), (w0 - bal.target0).abs());
        if best.as_ref().map_or(true, |b| key < (b.0, b.1)) {
            best = Some((key.0, key.1, side));
        }
    }
    best.map(|b| b.2).unwrap_or_default()
}

/// Region of side 0 grown from `seed`, repeatedly adding the frontier
/// vertex with the largest cut gain (lowest index on ties).
fn grow_from(g: &Graph, seed: usize, target0: i64) -> Vec<u8> {
    let n = g.n();
    let mut side = vec![1u8; n];
    let mut gain = vec![0i64; n];
    let mut on_frontier = vec![false; n];
    let mut frontier: Vec<usize> = Vec::new();
    let mut w0 = 0;
    let mut next_unvisited = 0;
    let mut pick = Some(seed);
    while w0 < target0 {
        let v = match pick.take() {
            Some(v) => v,
            None => {
                if let Some((k, _)) = frontier
                    .iter()
                    .enumerate()
                    .max_by(|a, b| gain[*a.1].cmp(&gain[*b.1]).then(b.1.cmp(a.1)))
                {
                    frontier.swap_remove(k)
                } else {
                    // disconnected remainder: restart from the lowest free vertex
                    while next_unvisited < n && side[next_unvisited] == 0 {
                        next_unvisited += 1;
                    }
                    if next_unvisited == n {
                        break;
                    }
                    next_unvisited
                }
            }
        };
        if side[v] == 0 {
            continue;
        }
        side[v] = 0;
        on_frontier[v] = false;
        w0 += g.vw[v];
        for (u, w) in g.nbrs(v) {
            if side[u] == 1 {
                gain[u] += 2 * w;
                if !on_frontier[u] {
                    on_frontier[u] = true;
                    gain[u] -= g.nbrs(u).map(|x| x.1).sum::<i64>();
                    frontier.push(u);
                }
            }
        }
    }
    side
}

/// Greedy boundary refinement: sweep vertices in index order, moving any
/// whose move lowers the cut without breaking balance, or keeps the cut and
/// improves balance.
fn refine(g: &Graph, side: &mut [u8], bal: &Balance) {
    let n = g.n();
    let mut w0: i64 = (0..n).filter(|&v| side[v] == 0).map(|v| g.vw[v]).sum();
    let lo = bal.target0 - bal.slack;
    let hi = bal.target0 + bal.slack;

    // restore balance first, moving the best-gain vertices off the heavy side
    let mut guard = n;
    while (w0 < lo || w0 > hi) && guard > 0 {
        guard -= 1;
        let from = if w0 > hi { 0u8 } else { 1u8 };
        let mut best: Option<(i64, usize)> = None;
        for v in 0..n {
            if side[v] != from {
                continue;
            }
            let gv = move_gain(g, side, v);
            if best.map_or(true, |(bg, _)| gv > bg) {
                best = Some((gv, v));
            }
        }
        let Some((_, v)) = best else { break };
        side[v] = 1 - from;
        w0 += if from == 0 { -g.vw[v] } else { g.vw[v] };
    }

    for _ in 0..10 {
        let mut moved = false;
        for v in 0..n {
            let gv = move_gain(g, side, v);
            if gv < 0 {
                continue;
            }
            let nw0 = if side[v] == 0 { w0 - g.vw[v] } else { w0 + g.vw[v] };
            let in_window = nw0 >= lo && nw0 <= hi;
            let better_balance = (nw0 - bal.target0).abs() < (w0 - bal.target0).abs();
            if (gv > 0 && in_window) || (gv == 0 && better_balance) {
                side[v] = 1 - side[v];
                w0 = nw0;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

fn move_gain(g: &Graph, side: &[u8], v: usize) -> i64 {
    let mut gain = 0;
    for (u, w) in g.nbrs(v) {
        if side[u] == side[v] {
            gain -= w;
        } else {
            gain += w;
        }
    }
    gain
}

/// Each side must hold at least as many vertices as parts it will be split into.
fn enforce_counts(g: &Graph, side: &mut [u8], bal: &Balance) {
    for s in [0u8, 1u8] {
        let mut count = side.iter().filter(|&&x| x == s).count();
        let mut v = 0;
        while count < bal.min_count[s as usize] && v < g.n() {
            if side[v] != s {
                side[v] = s;
                count += 1;
            }
            v += 1;
        }
    }
}

/// The permuted block system. Unknowns are renumbered as the interiors of
/// subdomains `0..p` in turn, then the interface sorted by
/// `(owning subdomain, original index)`.
#[derive(Debug, Clone)]
pub struct DomainDecomposition {
    n: usize,
    p: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `inv_perm[old] = new`
    inv_perm: Vec<usize>,
    ranges: Vec<Range<usize>>,
    blocks: Vec<SymSparseMatrix>,
    e: SparseBlock,
    c: SymSparseMatrix,
    iface_owner: Vec<usize>,
}

pub fn build_dd(a: &SymSparseMatrix, labels: &PartitionLabels) -> Result<DomainDecomposition> {
    let n = a.n();
    if labels.n() != n {
        return Err(SlrError::InvalidPartition(format!(
            "{} labels for a matrix of order {n}",
            labels.n()
        )));
    }
    let p = labels.p();
    for i in 0..n {
        for &j in a.row(i).0 {
            if !labels.is_interface(i)
                && !labels.is_interface(j)
                && labels.part(i) != labels.part(j)
            {
                return Err(SlrError::InvalidPartition(format!(
                    "interior vertices {j} and {i} of different subdomains are coupled"
                )));
            }
        }
    }

    let mut perm = Vec::with_capacity(n);
    let mut ranges = Vec::with_capacity(p);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); p];
    let mut iface: Vec<Vec<usize>> = vec![Vec::new(); p];
    for v in 0..n {
        if labels.is_interface(v) {
            iface[labels.part(v)].push(v);
        } else {
            buckets[labels.part(v)].push(v);
        }
    }
    for b in &buckets {
        let start = perm.len();
        perm.extend_from_slice(b);
        ranges.push(start..perm.len());
    }
    let nb = perm.len();
    let mut iface_owner = Vec::new();
    for (q, list) in iface.iter().enumerate() {
        perm.extend_from_slice(list);
        iface_owner.extend(std::iter::repeat(q).take(list.len()));
    }
    let s = n - nb;
    let inv_perm = inverse_permutation(&perm)?;

    // block of each interior row in the new numbering
    let mut owner = vec![0usize; nb];
    for (q, r) in ranges.iter().enumerate() {
        for slot in &mut owner[r.clone()] {
            *slot = q;
        }
    }
    let mut bt: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); p];
    let mut et = Vec::new();
    let mut ct = Vec::new();
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let (ni, nj) = (inv_perm[i], inv_perm[j]);
            match (ni < nb, nj < nb) {
                (true, true) => {
                    let q = owner[ni];
                    let off = ranges[q].start;
                    bt[q].push((ni - off, nj - off, v));
                }
                (true, false) => et.push((ni, nj - nb, v)),
                (false, true) => et.push((nj, ni - nb, v)),
                (false, false) => ct.push((ni - nb, nj - nb, v)),
            }
        }
    }
    let blocks = bt
        .into_iter()
        .zip(&ranges)
        .map(|(t, r)| SymSparseMatrix::from_triplets(r.len(), t))
        .collect::<Result<Vec<_>>>()?;
    Ok(DomainDecomposition {
        n,
        p,
        perm,
        inv_perm,
        ranges,
        blocks,
        e: SparseBlock::from_triplets(nb, s, et)?,
        c: SymSparseMatrix::from_triplets(s, ct)?,
        iface_owner,
    })
}

impl DomainDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Interface size.
    pub fn s(&self) -> usize {
        self.n - self.n_interior()
    }

    pub fn n_interior(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    /// `perm[new] = old`
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// `inv_perm[old] = new`
    pub fn inv_perm(&self) -> &[usize] {
        &self.inv_perm
    }

    /// Interior rows of each subdomain in the new numbering.
    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn blocks(&self) -> &[SymSparseMatrix] {
        &self.blocks
    }

    /// Coupling block, interior rows by interface columns.
    pub fn e(&self) -> &SparseBlock {
        &self.e
    }

    pub fn c(&self) -> &SymSparseMatrix {
        &self.c
    }

    /// Owning subdomain of each interface unknown.
    pub fn interface_owner(&self) -> &[usize] {
        &self.iface_owner
    }

    /// `x` in the new numbering.
    pub fn permute_vec(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&o| x[o]).collect()
    }

    /// Inverse of [`Self::permute_vec`].
    pub fn unpermute_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (&o, &v) in self.perm.iter().zip(y) {
            x[o] = v;
        }
        x
    }

    /// The matrix in original numbering rebuilt from `B_i`, `E` and `C`.
    pub fn reassemble(&self) -> Result<SymSparseMatrix> {
        let nb = self.n_interior();
        let mut t = Vec::new();
        for (b, r) in self.blocks.iter().zip(&self.ranges) {
            for i in 0..b.n() {
                let (cols, vals) = b.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    t.push((self.perm[r.start + i], self.perm[r.start + j], v));
                }
            }
        }
        for i in 0..self.e.nrows() {
            let (cols, vals) = self.e.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push((self.perm[i], self.perm[nb + j], v));
            }
        }
        for i in 0..self.c.n() {
            let (cols, vals) = self.c.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push((self.perm[nb + i], self.perm[nb + j], v));
            }
        }
        SymSparseMatrix::from_triplets(self.n, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{gen_laplacian_2d, gen_laplacian_3d};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::VecDeque;

    fn random_spd(n: usize, seed: u64) -> SymSparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        let mut diag = vec![0.5; n];
        for i in 0..n {
            for _ in 0..2 {
                let j = rng.gen_range(0..n);
                if j != i {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    t.push((i, j, v));
                    diag[i] += v.abs();
                    diag[j] += v.abs();
                }
            }
        }
        t.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
        SymSparseMatrix::from_triplets(n, t).unwrap()
    }

    /// Interiors reachable from each interior vertex without crossing the
    /// interface all share its subdomain.
    fn assert_separator(a: &SymSparseMatrix, l: &PartitionLabels) {
        let (xadj, adj) = a.adjacency();
        let mut seen = vec![false; a.n()];
        for s in 0..a.n() {
            if seen[s] || l.is_interface(s) {
                continue;
            }
            let mut q = VecDeque::from([s]);
            seen[s] = true;
            while let Some(v) = q.pop_front() {
                assert_eq!(l.part(v), l.part(s), "path {s} -> {v} avoids the interface");
                for &u in &adj[xadj[v]..xadj[v + 1]] {
                    if !seen[u] && !l.is_interface(u) {
                        seen[u] = true;
                        q.push_back(u);
                    }
                }
            }
        }
    }

    #[test]
    fn single_domain() {
        let a = gen_laplacian_2d(5, 4, 0.0).unwrap();
        for l in [partition_graph(&a, 1).unwrap(), geometric_bisection_grid(GridShape::new_2d(5, 4), 1).unwrap()] {
            assert_eq!(l.interface_count(), 0);
            let dd = build_dd(&a, &l).unwrap();
            assert_eq!(dd.s(), 0);
            assert_eq!(dd.blocks()[0], a);
            assert_eq!(dd.e().nnz(), 0);
            assert_eq!(dd.c().n(), 0);
        }
    }

    #[test]
    fn grid_3x5_middle_row() {
        let l = geometric_bisection_grid(GridShape::new_2d(3, 5), 2).unwrap();
        let iface: Vec<usize> = (0..15).filter(|&v| l.is_interface(v)).collect();
        assert_eq!(iface, vec![6, 7, 8]);
        let a = gen_laplacian_2d(3, 5, 0.0).unwrap();
        let dd = build_dd(&a, &l).unwrap();
        assert_eq!(dd.ranges(), &[0..6, 6..12]);
        for b in dd.blocks() {
            assert_eq!(*b, gen_laplacian_2d(3, 2, 0.0).unwrap());
        }
    }

    #[test]
    fn cube_plane_separator() {
        let l = geometric_bisection_grid(GridShape::new_3d(4, 4, 4), 2).unwrap();
        let g = GridShape::new_3d(4, 4, 4);
        let iface: Vec<usize> = (0..64).filter(|&v| l.is_interface(v)).collect();
        assert_eq!(iface.len(), 16);
        assert!(iface.iter().all(|&v| g.coords(v)[2] == 1));
    }

    #[test]
    fn geometric_rejects_bad_p() {
        assert!(geometric_bisection_grid(GridShape::new_2d(4, 4), 3).is_err());
        assert!(geometric_bisection_grid(GridShape::new_2d(4, 4), 0).is_err());
        assert!(geometric_bisection_grid(GridShape::new_2d(2, 2), 8).is_err());
    }

    #[test]
    fn separator_block_is_shifted_tridiagonal() {
        let a = gen_laplacian_2d(8, 8, 0.0).unwrap();
        let dd = build_dd(&a, &geometric_bisection_grid(GridShape::new_2d(8, 8), 2).unwrap()).unwrap();
        let mut tx = DMatrix::zeros(8, 8);
        for i in 0..8 {
            tx[(i, i)] = 2.0 + 2.0;
            if i > 0 {
                tx[(i, i - 1)] = -1.0;
                tx[(i - 1, i)] = -1.0;
            }
        }
        assert_eq!(dd.c().to_dense(), tx);
    }

    #[test]
    fn grid_8x8_four_parts() {
        let a = gen_laplacian_2d(8, 8, 0.0).unwrap();
        for l in [
            partition_graph(&a, 4).unwrap(),
            geometric_bisection_grid(GridShape::new_2d(8, 8), 4).unwrap(),
        ] {
            assert!(l.part_sizes().iter().all(|&c| c > 0));
            assert_eq!(l.part_sizes().iter().sum::<usize>(), 64);
            assert_separator(&a, &l);
            // every interface vertex touches another part
            let (xadj, adj) = a.adjacency();
            for v in (0..64).filter(|&v| l.is_interface(v)) {
                assert!(adj[xadj[v]..xadj[v + 1]].iter().any(|&u| l.part(u) != l.part(v)));
            }
        }
        // the two-sided rule makes the interface exactly the part boundary
        let l = partition_graph(&a, 4).unwrap();
        let (xadj, adj) = a.adjacency();
        for v in 0..64 {
            let touches = adj[xadj[v]..xadj[v + 1]].iter().any(|&u| l.part(u) != l.part(v));
            assert_eq!(touches, l.is_interface(v));
        }
    }

    #[test]
    fn random_spd_reassembles_exactly() {
        let a = random_spd(50, 5);
        let l = partition_graph(&a, 3).unwrap();
        assert_separator(&a, &l);
        let dd = build_dd(&a, &l).unwrap();
        assert_eq!(dd.reassemble().unwrap(), a);
        assert_eq!(dd.ranges().iter().map(|r| r.len()).sum::<usize>() + dd.s(), 50);
    }

    #[test]
    fn permuted_matrix_has_block_form() {
        let a = gen_laplacian_3d(6, 5, 4, 0.0).unwrap();
        let dd = build_dd(&a, &partition_graph(&a, 5).unwrap()).unwrap();
        let ap = a.permute(dd.perm()).unwrap();
        let nb = dd.n_interior();
        for i in 0..nb {
            let q = dd.ranges().iter().position(|r| r.contains(&i)).unwrap();
            for &j in ap.row(i).0 {
                assert!(dd.ranges()[q].contains(&j), "B couples {i} and {j}");
            }
        }
        assert_eq!(dd.reassemble().unwrap(), a);
        let x: Vec<f64> = (0..a.n()).map(|i| i as f64).collect();
        assert_eq!(dd.unpermute_vec(&dd.permute_vec(&x)), x);
    }

    #[test]
    fn interface_sorted_by_owner_then_index() {
        let a = gen_laplacian_2d(12, 12, 0.0).unwrap();
        let l = partition_graph(&a, 4).unwrap();
        let dd = build_dd(&a, &l).unwrap();
        let nb = dd.n_interior();
        let keys: Vec<(usize, usize)> = dd.perm()[nb..].iter().map(|&v| (l.part(v), v)).collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn multilevel_balance_on_grids() {
        for (a, p) in [
            (gen_laplacian_2d(32, 32, 0.0).unwrap(), 4),
            (gen_laplacian_2d(40, 25, 0.0).unwrap(), 7),
            (gen_laplacian_3d(12, 12, 12, 0.0).unwrap(), 8),
            (gen_laplacian_2d(64, 64, 0.0).unwrap(), 16),
        ] {
            let l = partition_graph(&a, p).unwrap();
            let sz = l.part_sizes();
            let (mn, mx) = (*sz.iter().min().unwrap(), *sz.iter().max().unwrap());
            assert!(mx as f64 <= 1.5 * mn as f64, "p={p}: sizes {sz:?}");
            assert_separator(&a, &l);
        }
    }

    #[test]
    fn disconnected_graph() {
        // two disjoint paths plus isolated vertices
        let mut t: Vec<(usize, usize, f64)> = (0..30).map(|i| (i, i, 3.0)).collect();
        for i in 1..10 {
            t.push((i, i - 1, -1.0));
            t.push((i + 12, i + 11, -1.0));
        }
        let a = SymSparseMatrix::from_triplets(30, t).unwrap();
        let l = partition_graph(&a, 4).unwrap();
        assert!(l.part_sizes().iter().all(|&c| c > 0));
        assert_separator(&a, &l);
        assert_eq!(build_dd(&a, &l).unwrap().reassemble().unwrap(), a);
    }

    #[test]
    fn partition_errors() {
        let a = gen_laplacian_2d(2, 2, 0.0).unwrap();
        assert!(partition_graph(&a, 5).is_err());
        assert!(partition_graph(&a, 0).is_err());
        let bad = PartitionLabels::new(2, vec![0, 1, 0, 1], vec![false; 4]).unwrap();
        assert!(matches!(build_dd(&a, &bad), Err(SlrError::InvalidPartition(_))));
        assert!(PartitionLabels::new(2, vec![0, 2, 0, 1], vec![false; 4]).is_err());
        let short = PartitionLabels::new(1, vec![0; 3], vec![false; 3]).unwrap();
        assert!(build_dd(&a, &short).is_err());
    }

    #[test]
    fn label_dump() {
        let l = geometric_bisection_grid(GridShape::new_2d(1, 3), 2).unwrap();
        let mut buf = Vec::new();
        l.write_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 0 0\n1 0 1\n2 1 0\n");
    }

    #[test]
    fn partitioning_is_deterministic() {
        let a = gen_laplacian_3d(9, 8, 7, 0.0).unwrap();
        assert_eq!(partition_graph(&a, 6).unwrap(), partition_graph(&a, 6).unwrap());
    }
}
