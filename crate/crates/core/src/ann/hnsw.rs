use std::cell::RefCell;
use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_query, rank_cmp, HnswParams, IndexError, IndexedPoint, Payload, PayloadFilter, SearchHit};
use crate::embedding::{dot, EmbeddingVector};
use crate::DefinitionId;

type NodeId = u32;

/// Level cap; with m >= 2 the chance of drawing a level this high is nil.
const MAX_LEVEL: usize = 24;

/// Filtered searches widen the beam by this factor.
const FILTER_EF_FACTOR: usize = 4;

/// A node scored against some query. `Ord` is "better than": higher score,
/// then lower definition id.
#[derive(Debug, Clone, Copy)]
struct Scored {
    score: f32,
    key: DefinitionId,
    node: NodeId,
}

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_cmp(other.score, other.key, self.score, self.key)
    }
}

/// Epoch-stamped visited marks, reusable across searches without clearing.
struct VisitedSet {
    marks: Vec<u32>,
    epoch: u32,
}

impl VisitedSet {
    fn new() -> Self {
        Self {
            marks: Vec::new(),
            epoch: 0,
        }
    }

    fn reset(&mut self, n: usize) {
        if self.marks.len() < n {
            self.marks.resize(n, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
    }

    /// Returns `true` if `node` was not yet visited.
    #[inline]
    fn insert(&mut self, node: NodeId) -> bool {
        let slot = &mut self.marks[node as usize];
        if *slot == self.epoch {
            false
        } else {
            *slot = self.epoch;
            true
        }
    }
}

thread_local! {
    static VISITED: RefCell<VisitedSet> = RefCell::new(VisitedSet::new());
}

/// Hierarchical navigable small-world graph over unit vectors.
///
/// Built once from a batch of points, then immutable: searches take `&self`
/// and may run concurrently.
#[derive(Debug, Clone)]
pub struct HnswIndex {
    pub(super) params: HnswParams,
    pub(super) dim: usize,
    /// Row-major, `dim` floats per node.
    pub(super) vectors: Vec<f32>,
    pub(super) payloads: Vec<Payload>,
    /// `payloads[node].definition_id`, kept flat for the search loop.
    pub(super) keys: Vec<DefinitionId>,
    /// `links[node][level]` lists out-neighbours; `links[node].len()` is the
    /// node's top level plus one.
    pub(super) links: Vec<Vec<Vec<NodeId>>>,
    /// Layer 0 of `links` packed with stride `2m + 1`: a count, then the
    /// neighbours. Filled once the graph is final; empty during construction.
    pub(super) base: Vec<NodeId>,
    pub(super) entry_point: Option<NodeId>,
    pub(super) max_level: usize,
    pub(super) by_definition: HashMap<DefinitionId, NodeId>,
}

impl HnswIndex {
    pub(super) fn empty(params: HnswParams, dim: usize) -> Self {
        Self {
            params,
            dim,
            vectors: Vec::new(),
            payloads: Vec::new(),
            keys: Vec::new(),
            links: Vec::new(),
            base: Vec::new(),
            entry_point: None,
            max_level: 0,
            by_definition: HashMap::new(),
        }
    }

    /// Builds an index over `points`, inserted in the given order.
    ///
    /// Deterministic for a fixed seed and insertion order. All vectors must
    /// share one dimension and be unit length.
    pub fn build(points: &[IndexedPoint], params: HnswParams) -> Result<Self, IndexError> {
        params.validate()?;
        let dim = points.first().map_or(0, |p| p.vector.dim());
        let mut index = Self::empty(params, dim);
        index.vectors.reserve(points.len() * dim);
        index.payloads.reserve(points.len());
        index.links.reserve(points.len());

        for p in points {
            if p.vector.dim() != dim {
                return Err(IndexError::DimMismatch {
                    expected: dim,
                    found: p.vector.dim(),
                });
            }
            if !p.vector.is_normalized() {
                return Err(IndexError::UnnormalizedVector {
                    definition_id: Some(p.payload.definition_id),
                    norm: p.vector.norm(),
                });
            }
            let node = index.payloads.len() as NodeId;
            if index
                .by_definition
                .insert(p.payload.definition_id, node)
                .is_some()
            {
                return Err(IndexError::DuplicateDefinitionId(p.payload.definition_id));
            }
            index.vectors.extend_from_slice(p.vector.as_slice());
            index.payloads.push(p.payload.clone());
            index.keys.push(p.payload.definition_id);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let level_mult = 1.0 / (params.m as f64).ln();
        let mut visited = VisitedSet::new();
        for node in 0..points.len() {
            let u: f64 = rng.random();
            let level = ((-(1.0 - u).ln() * level_mult).floor() as usize).min(MAX_LEVEL);
            index.links.push(vec![Vec::new(); level + 1]);
            index.insert(node as NodeId, level, &mut visited);
        }
        index.repair_connectivity(&mut visited);
        index.pack_base_layer();
        Ok(index)
    }

    pub fn params(&self) -> &HnswParams {
        &self.params
    }

    /// Vector dimension; 0 for an index built from no points.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn payloads(&self) -> &[Payload] {
        &self.payloads
    }

    pub fn contains_definition(&self, id: DefinitionId) -> bool {
        self.by_definition.contains_key(&id)
    }

    /// Stored vector of a definition.
    pub fn vector_of(&self, id: DefinitionId) -> Option<&[f32]> {
        self.by_definition.get(&id).map(|&n| self.vector(n))
    }

    /// Copies the stored points back out, in insertion order.
    pub fn points(&self) -> Vec<IndexedPoint> {
        (0..self.len() as NodeId)
            .map(|n| IndexedPoint {
                vector: EmbeddingVector::new(self.vector(n).to_vec())
                    .expect("stored vectors are finite"),
                payload: self.payloads[n as usize].clone(),
            })
            .collect()
    }

    #[inline]
    fn vector(&self, node: NodeId) -> &[f32] {
        let start = node as usize * self.dim;
        &self.vectors[start..start + self.dim]
    }

    pub(super) fn pack_base_layer(&mut self) {
        let stride = self.params.max_degree(0) + 1;
        let mut base = vec![0; self.links.len() * stride];
        for (row, node_links) in base.chunks_exact_mut(stride).zip(&self.links) {
            let nbs = &node_links[0];
            row[0] = nbs.len() as NodeId;
            row[1..=nbs.len()].copy_from_slice(nbs);
        }
        self.base = base;
    }

    #[inline]
    fn neighbors(&self, node: NodeId, level: usize) -> &[NodeId] {
        if level == 0 && !self.base.is_empty() {
            let start = node as usize * (self.params.max_degree(0) + 1);
            let count = self.base[start] as usize;
            &self.base[start + 1..start + 1 + count]
        } else {
            &self.links[node as usize][level]
        }
    }

    /// Hints a node's vector into cache.
    #[inline]
    fn prefetch(&self, node: NodeId) {
        #[cfg(target_arch = "x86_64")]
        {
            use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
            let v = self.vector(node);
            for line in v.chunks(16) {
                // SAFETY: prefetch is a hint and never faults; SSE is baseline on x86_64.
                unsafe { _mm_prefetch(line.as_ptr().cast(), _MM_HINT_T0) };
            }
        }
        #[cfg(not(target_arch = "x86_64"))]
        let _ = node;
    }

    #[inline]
    fn scored(&self, query: &[f32], node: NodeId) -> Scored {
        Scored {
            score: dot(query, self.vector(node)),
            key: self.keys[node as usize],
            node,
        }
    }

    /// Beam search on one layer. Returns up to `ef` nodes, best first.
    ///
    /// With a filter, every reachable node may be expanded but only matching
    /// nodes enter the result beam, so the stopping bound tracks the worst
    /// matching result.
    fn search_layer(
        &self,
        query: &[f32],
        entry: &[Scored],
        ef: usize,
        level: usize,
        filter: Option<PayloadFilter<'_>>,
        visited: &mut VisitedSet,
    ) -> Vec<Scored> {
        visited.reset(self.len());
        let accepts = |s: &Scored| filter.is_none_or(|f| f(&self.payloads[s.node as usize]));

        let mut candidates: BinaryHeap<Scored> = BinaryHeap::new();
        let mut results: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        let mut fresh: Vec<NodeId> = Vec::with_capacity(2 * self.params.m);
        for &e in entry {
            if visited.insert(e.node) {
                candidates.push(e);
                if accepts(&e) {
                    results.push(Reverse(e));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }

        while let Some(current) = candidates.pop() {
            if results.len() >= ef {
                if let Some(Reverse(worst)) = results.peek() {
                    if current < *worst {
                        break;
                    }
                }
            }
            fresh.clear();
            fresh.extend(
                self.neighbors(current.node, level)
                    .iter()
                    .copied()
                    .filter(|&nb| visited.insert(nb)),
            );
            for &nb in &fresh {
                self.prefetch(nb);
            }
            for &nb in &fresh {
                let s = self.scored(query, nb);
                let admit = results.len() < ef || results.peek().is_some_and(|Reverse(w)| s > *w);
                if admit {
                    candidates.push(s);
                    if accepts(&s) {
                        results.push(Reverse(s));
                        if results.len() > ef {
                            results.pop();
                        }
                    }
                }
            }
        }

        let mut out: Vec<Scored> = results.into_iter().map(|Reverse(s)| s).collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }

    /// Diversity heuristic: walk candidates best-first and keep one only if
    /// it is closer to the base than to every neighbour already kept.
    fn select_neighbors(&self, candidates: &[Scored], limit: usize) -> Vec<Scored> {
        let mut kept: Vec<Scored> = Vec::with_capacity(limit);
        for &c in candidates {
            if kept.len() >= limit {
                break;
            }
            let cv = self.vector(c.node);
            let diverse = kept.iter().all(|k| dot(cv, self.vector(k.node)) <= c.score);
            if diverse {
                kept.push(c);
            }
        }
        kept
    }

    fn insert(&mut self, node: NodeId, level: usize, visited: &mut VisitedSet) {
        let Some(entry) = self.entry_point else {
            self.entry_point = Some(node);
            self.max_level = level;
            return;
        };
        let query = self.vector(node).to_vec();
        let mut eps = vec![self.scored(&query, entry)];
        for lc in (level + 1..=self.max_level).rev() {
            eps = self.search_layer(&query, &eps, 1, lc, None, visited);
        }
        for lc in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(&query, &eps, self.params.ef_construction, lc, None, visited);
            let chosen = self.select_neighbors(&found, self.params.m);
            self.links[node as usize][lc] = chosen.iter().map(|s| s.node).collect();
            for s in &chosen {
                self.link(s.node, node, lc);
            }
            eps = found;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry_point = Some(node);
        }
    }

    /// Adds the edge `from -> to` at `level`, re-pruning `from`'s list with
    /// the diversity heuristic when it overflows.
    fn link(&mut self, from: NodeId, to: NodeId, level: usize) {
        let cap = self.params.max_degree(level);
        let list = &self.links[from as usize][level];
        if list.len() < cap {
            self.links[from as usize][level].push(to);
            return;
        }
        let base = self.vector(from);
        let mut candidates: Vec<Scored> = list
            .iter()
            .chain(std::iter::once(&to))
            .map(|&n| self.scored(base, n))
            .collect();
        candidates.sort_unstable_by(|a, b| b.cmp(a));
        let kept = self.select_neighbors(&candidates, cap);
        self.links[from as usize][level] = kept.into_iter().map(|s| s.node).collect();
    }

    fn level_of(&self, node: NodeId) -> usize {
        self.links[node as usize].len() - 1
    }

    fn reachable(&self, level: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        if let Some(ep) = self.entry_point {
            self.extend_reach(ep, level, &mut seen);
        }
        seen
    }

    fn extend_reach(&self, from: NodeId, level: usize, seen: &mut [bool]) {
        if seen[from as usize] {
            return;
        }
        seen[from as usize] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(n) = queue.pop_front() {
            for &nb in &self.links[n as usize][level] {
                if !seen[nb as usize] {
                    seen[nb as usize] = true;
                    queue.push_back(nb);
                }
            }
        }
    }

    /// BFS parent of every node reachable from the entry point at `level`.
    fn bfs_parents(&self, level: usize) -> Vec<Option<NodeId>> {
        let mut parent = vec![None; self.len()];
        let Some(ep) = self.entry_point else {
            return parent;
        };
        parent[ep as usize] = Some(ep);
        let mut queue = VecDeque::from([ep]);
        while let Some(n) = queue.pop_front() {
            for &nb in &self.links[n as usize][level] {
                if parent[nb as usize].is_none() {
                    parent[nb as usize] = Some(n);
                    queue.push_back(nb);
                }
            }
        }
        parent
    }

    /// Pruning can leave nodes without in-edges. Attach every node that is
    /// unreachable from the entry point at a level it belongs to, preferring
    /// its nearest reachable node with a free slot. When every reachable node
    /// is full, an edge outside a BFS spanning tree is redirected instead, so
    /// no node loses reachability and each step grows the reachable set.
    fn repair_connectivity(&mut self, visited: &mut VisitedSet) {
        let Some(entry) = self.entry_point else {
            return;
        };
        for level in (0..=self.max_level).rev() {
            let cap = self.params.max_degree(level);
            let mut seen = self.reachable(level);
            for u in 0..self.len() as NodeId {
                if self.level_of(u) < level || seen[u as usize] {
                    continue;
                }
                let query = self.vector(u).to_vec();
                let ep = [self.scored(&query, entry)];
                let near = self.search_layer(&query, &ep, self.params.ef_construction, level, None, visited);
                let has_room = |n: NodeId| self.links[n as usize][level].len() < cap;
                let mut by_distance: Vec<Scored> = near.clone();
                let host = near.iter().map(|s| s.node).find(|&n| has_room(n)).or_else(|| {
                    by_distance = (0..self.len() as NodeId)
                        .filter(|&n| seen[n as usize] && self.level_of(n) >= level)
                        .map(|n| self.scored(&query, n))
                        .collect();
                    by_distance.sort_unstable_by(|a, b| b.cmp(a));
                    by_distance.iter().map(|s| s.node).find(|&n| has_room(n))
                });
                match host {
                    Some(h) => self.links[h as usize][level].push(u),
                    None => {
                        let parent = self.bfs_parents(level);
                        let (h, slot) = by_distance
                            .iter()
                            .find_map(|s| {
                                let base = self.vector(s.node);
                                self.links[s.node as usize][level]
                                    .iter()
                                    .enumerate()
                                    .filter(|&(_, &x)| parent[x as usize] != Some(s.node))
                                    .min_by(|a, b| self.scored(base, *a.1).cmp(&self.scored(base, *b.1)))
                                    .map(|(i, _)| (s.node, i))
                            })
                            .expect("a full reachable layer has edges outside its spanning tree");
                        self.links[h as usize][level][slot] = u;
                    }
                }
                self.extend_reach(u, level, &mut seen);
            }
        }
    }

    /// Top-`k` neighbours of `query` with beam width `ef` (raised to at least
    /// `k`). With a filter, only matching points are returned and the beam is
    /// widened four-fold.
    pub fn search(
        &self,
        query: &EmbeddingVector,
        k: usize,
        ef: usize,
        filter: Option<PayloadFilter<'_>>,
    ) -> Result<Vec<SearchHit>, IndexError> {
        let Some(entry) = self.entry_point else {
            return Ok(Vec::new());
        };
        if k == 0 {
            return Ok(Vec::new());
        }
        check_query(query, self.dim)?;
        let q = query.as_slice();
        let mut ef = ef.max(k);
        if filter.is_some() {
            ef = ef.saturating_mul(FILTER_EF_FACTOR);
        }

        let found = VISITED.with(|cell| {
            let visited = &mut cell.borrow_mut();
            let mut eps = vec![self.scored(q, entry)];
            for lc in (1..=self.max_level).rev() {
                eps = self.search_layer(q, &eps, 1, lc, None, visited);
            }
            self.search_layer(q, &eps, ef, 0, filter, visited)
        });

        Ok(found
            .into_iter()
            .take(k)
            .map(|s| SearchHit {
                payload: self.payloads[s.node as usize].clone(),
                score: s.score,
            })
            .collect())
    }

    /// Search with the index's configured `ef_search`.
    pub fn search_default(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filter: Option<PayloadFilter<'_>>,
    ) -> Result<Vec<SearchHit>, IndexError> {
        self.search(query, k, self.params.ef_search, filter)
    }

    /// Exact scan over the stored vectors. Same scores and order as
    /// [`super::brute_force_search`] on the same points.
    pub fn exact_search(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filter: Option<PayloadFilter<'_>>,
    ) -> Result<Vec<SearchHit>, IndexError> {
        if self.is_empty() || k == 0 {
            return Ok(Vec::new());
        }
        check_query(query, self.dim)?;
        let q = query.as_slice();
        let mut heap: BinaryHeap<Reverse<Scored>> = BinaryHeap::with_capacity(k + 1);
        for node in 0..self.len() as NodeId {
            if let Some(f) = filter {
                if !f(&self.payloads[node as usize]) {
                    continue;
                }
            }
            let s = self.scored(q, node);
            if heap.len() < k {
                heap.push(Reverse(s));
            } else if heap.peek().is_some_and(|Reverse(w)| s > *w) {
                heap.pop();
                heap.push(Reverse(s));
            }
        }
        let mut out: Vec<Scored> = heap.into_iter().map(|Reverse(s)| s).collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        Ok(out
            .into_iter()
            .map(|s| SearchHit {
                payload: self.payloads[s.node as usize].clone(),
                score: s.score,
            })
            .collect())
    }

    /// Checks the structural invariants: degree caps, layer nesting, edge
    /// validity and reachability of every node from the entry point on each
    /// layer it belongs to.
    pub fn audit(&self) -> Result<(), String> {
        let n = self.len();
        if n == 0 {
            return match self.entry_point {
                None => Ok(()),
                Some(_) => Err("empty index has an entry point".into()),
            };
        }
        let entry = self.entry_point.ok_or("non-empty index without entry point")?;
        if self.links.len() != n || self.vectors.len() != n * self.dim {
            return Err("node tables have inconsistent lengths".into());
        }
        if self.level_of(entry) != self.max_level {
            return Err(format!(
                "entry point level {} differs from max level {}",
                self.level_of(entry),
                self.max_level
            ));
        }
        for (node, layers) in self.links.iter().enumerate() {
            if layers.is_empty() || layers.len() - 1 > self.max_level {
                return Err(format!("node {node} has invalid level count {}", layers.len()));
            }
            for (level, list) in layers.iter().enumerate() {
                if list.len() > self.params.max_degree(level) {
                    return Err(format!(
                        "node {node} has degree {} at level {level} (cap {})",
                        list.len(),
                        self.params.max_degree(level)
                    ));
                }
                let mut sorted = list.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(format!("node {node} has duplicate edges at level {level}"));
                }
                for &nb in list {
                    if nb as usize >= n {
                        return Err(format!("node {node} links to missing node {nb}"));
                    }
                    if nb as usize == node {
                        return Err(format!("node {node} links to itself at level {level}"));
                    }
                    if self.level_of(nb) < level {
                        return Err(format!(
                            "node {node} links at level {level} to node {nb} of level {}",
                            self.level_of(nb)
                        ));
                    }
                }
            }
        }
        for level in 0..=self.max_level {
            let seen = self.reachable(level);
            if let Some(u) = (0..n).find(|&u| self.links[u].len() > level && !seen[u]) {
                return Err(format!("node {u} unreachable at level {level}"));
            }
        }
        Ok(())
    }
}
