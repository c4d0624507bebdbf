//! Concept hierarchy: loading, depth pruning, information content, Resnik similarity.
//!
//! The hierarchy is a rooted DAG of is-a edges (child -> parent). Nodes are
//! re-indexed densely in BFS order from the root, so internal index 0 is
//! always the root and indexing is deterministic for a given edge set.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::vocab::{ConceptId, Vocabulary};

/// Rooted DAG of is-a relationships, immutable after construction.
#[derive(Debug, Clone)]
pub struct Ontology {
    vocab: Vocabulary,
    parents: Vec<Vec<u32>>,
    children: Vec<Vec<u32>>,
    min_depth: Vec<u32>,
    /// Ancestor closure (self-inclusive) as one bitset row per node.
    ancestor_bits: BitMatrix,
}

/// Result of loading an edge list: the validated ontology plus the nodes
/// dropped because they cannot reach the root.
#[derive(Debug)]
pub struct OntologyLoad {
    pub ontology: Ontology,
    pub unreachable: Vec<ConceptId>,
}

/// Mapping from each depth-excluded concept to its nearest retained ancestors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RollUpMap {
    map: BTreeMap<ConceptId, BTreeSet<ConceptId>>,
}

/// Per-concept information content in nats, indexed by internal index.
#[derive(Debug, Clone)]
pub struct InformationContentTable {
    values: Vec<f64>,
}

impl InformationContentTable {
    pub fn get(&self, index: u32) -> f64 {
        self.values[index as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Ontology {
    /// Builds a validated ontology from child -> parent pairs.
    ///
    /// Rejects cycles (reporting one offending edge) and a missing root;
    /// nodes that cannot reach the root via is-a edges are dropped and
    /// reported instead.
    pub fn from_edges(
        edges: &[(ConceptId, ConceptId)],
        root: ConceptId,
        labels: &HashMap<ConceptId, String>,
    ) -> Result<OntologyLoad> {
        // Collect the node set and deduplicated adjacency over external ids.
        let mut nodes: BTreeSet<ConceptId> = BTreeSet::new();
        for &(c, p) in edges {
            nodes.insert(c);
            nodes.insert(p);
        }
        if !nodes.contains(&root) {
            return Err(Error::RootMissing(root));
        }
        let ids: Vec<ConceptId> = nodes.iter().copied().collect();
        let pos: HashMap<ConceptId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();

        let n = ids.len();
        let mut parent_adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut child_adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(c, p) in edges {
            if c == p {
                return Err(Error::Cycle { child: c, parent: p });
            }
            let ci = pos[&c];
            let pi = pos[&p];
            parent_adj[ci].insert(pi);
            child_adj[pi].insert(ci);
        }

        detect_cycle(&parent_adj, &ids)?;

        // BFS from the root over parent -> child edges. Visit order fixes the
        // dense indexing; distance is the minimum hop depth.
        let root_pos = pos[&root];
        let mut order: Vec<usize> = Vec::with_capacity(n);
        let mut depth_of: Vec<Option<u32>> = vec![None; n];
        let mut queue = VecDeque::new();
        depth_of[root_pos] = Some(0);
        queue.push_back(root_pos);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let d = depth_of[u].unwrap();
            for &c in &child_adj[u] {
                if depth_of[c].is_none() {
                    depth_of[c] = Some(d + 1);
                    queue.push_back(c);
                }
            }
        }

        let unreachable: Vec<ConceptId> = (0..n)
            .filter(|&i| depth_of[i].is_none())
            .map(|i| ids[i])
            .collect();

        let index_of: HashMap<usize, u32> = order
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new as u32))
            .collect();
        let external: Vec<ConceptId> = order.iter().map(|&i| ids[i]).collect();
        let node_labels: Vec<Option<String>> =
            external.iter().map(|id| labels.get(id).cloned()).collect();
        let vocab = Vocabulary::new(external, node_labels)?;

        let v = order.len();
        let mut parents: Vec<Vec<u32>> = vec![Vec::new(); v];
        let mut children: Vec<Vec<u32>> = vec![Vec::new(); v];
        let mut min_depth: Vec<u32> = vec![0; v];
        for (new, &old) in order.iter().enumerate() {
            min_depth[new] = depth_of[old].unwrap();
            parents[new] = parent_adj[old]
                .iter()
                .filter_map(|p| index_of.get(p).copied())
                .collect();
            children[new] = child_adj[old]
                .iter()
                .filter_map(|c| index_of.get(c).copied())
                .collect();
            parents[new].sort_unstable();
            children[new].sort_unstable();
        }

        let ancestor_bits = ancestor_closure(&parents, &children);
        Ok(OntologyLoad {
            ontology: Ontology {
                vocab,
                parents,
                children,
                min_depth,
                ancestor_bits,
            },
            unreachable,
        })
    }

    /// Loads a `child\tparent` TSV edge list; lines starting with `#` are ignored.
    pub fn load_edge_list_path(path: &Path, root: ConceptId) -> Result<OntologyLoad> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut edges = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let child: u64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(path, lineno + 1, "bad child id"))?;
            let parent: u64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(path, lineno + 1, "bad parent id"))?;
            edges.push((ConceptId(child), ConceptId(parent)));
        }
        Ontology::from_edges(&edges, root, &HashMap::new())
    }

    /// Writes the edge list as `child\tparent` TSV, sorted by external ids.
    pub fn write_edge_list_path(&self, path: &Path) -> Result<()> {
        let mut pairs: Vec<(u64, u64)> = Vec::new();
        for i in 0..self.len() as u32 {
            for &p in self.parents(i) {
                pairs.push((self.vocab.external(i).0, self.vocab.external(p).0));
            }
        }
        pairs.sort_unstable();
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        for (c, p) in pairs {
            writeln!(out, "{c}\t{p}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.min_depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Internal index of the root; 0 by construction.
    pub fn root(&self) -> u32 {
        0
    }

    pub fn parents(&self, index: u32) -> &[u32] {
        &self.parents[index as usize]
    }

    pub fn children(&self, index: u32) -> &[u32] {
        &self.children[index as usize]
    }

    /// Minimum hop distance from the root.
    pub fn min_depth(&self, index: u32) -> u32 {
        self.min_depth[index as usize]
    }

    pub fn max_min_depth(&self) -> u32 {
        self.min_depth.iter().copied().max().unwrap_or(0)
    }

    pub fn is_ancestor(&self, ancestor: u32, of: u32) -> bool {
        self.ancestor_bits.get(of as usize, ancestor as usize)
    }

    /// All descendants of `index` (self excluded), in ascending index order.
    pub fn descendants(&self, index: u32) -> Vec<u32> {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::new();
        queue.push_back(index);
        seen[index as usize] = true;
        let mut out = Vec::new();
        while let Some(u) = queue.pop_front() {
            for &c in self.children(u) {
                if !seen[c as usize] {
                    seen[c as usize] = true;
                    out.push(c);
                    queue.push_back(c);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Merged parent+child adjacency, treating is-a edges as undirected.
    pub fn undirected_adjacency(&self) -> Vec<Vec<u32>> {
        (0..self.len())
            .map(|i| {
                let mut adj: Vec<u32> = self.parents[i]
                    .iter()
                    .chain(self.children[i].iter())
                    .copied()
                    .collect();
                adj.sort_unstable();
                adj.dedup();
                adj
            })
            .collect()
    }

    /// Information content per concept: `-ln((|descendants| + self) / V)`.
    pub fn information_content(&self) -> InformationContentTable {
        let v = self.len();
        let order = topo_parents_first(&self.parents, &self.children);
        let words = BitMatrix::words_for(v);
        let mut desc = BitMatrix::zeros(v, words);
        let mut counts = vec![0u64; v];
        // Children before parents: descendant sets accumulate bottom-up.
        for &u in order.iter().rev() {
            desc.set(u as usize, u as usize);
            // Split-borrow via raw row copies: rows are disjoint.
            for &c in &self.children[u as usize] {
                desc.or_row_into(c as usize, u as usize);
            }
            counts[u as usize] = desc.popcount_row(u as usize);
        }
        let total = v as f64;
        let values = counts
            .iter()
            .map(|&c| -((c as f64 / total).ln()))
            .collect();
        InformationContentTable { values }
    }

    /// Resnik similarity: maximum information content over common ancestors.
    pub fn resnik(&self, ic: &InformationContentTable, a: u32, b: u32) -> Result<f64> {
        let mut best: Option<f64> = None;
        let ra = self.ancestor_bits.row(a as usize);
        let rb = self.ancestor_bits.row(b as usize);
        for (w, (&x, &y)) in ra.iter().zip(rb.iter()).enumerate() {
            let mut common = x & y;
            while common != 0 {
                let bit = common.trailing_zeros() as usize;
                let node = w * 64 + bit;
                let v = ic.get(node as u32);
                best = Some(best.map_or(v, |b: f64| b.max(v)));
                common &= common - 1;
            }
        }
        best.ok_or_else(|| {
            Error::NoCommonAncestor(self.vocab.external(a), self.vocab.external(b))
        })
    }

    /// Resnik similarity between two external concept ids.
    pub fn resnik_by_id(
        &self,
        ic: &InformationContentTable,
        a: ConceptId,
        b: ConceptId,
    ) -> Result<f64> {
        let ia = self.vocab.index_of(a).ok_or(Error::UnknownConcept(a))?;
        let ib = self.vocab.index_of(b).ok_or(Error::UnknownConcept(b))?;
        self.resnik(ic, ia, ib)
    }

    /// Keeps nodes with `min_depth <= max_depth` and maps every excluded node
    /// to its nearest retained ancestors along each upward path.
    pub fn prune_to_depth(&self, max_depth: u32) -> (Ontology, RollUpMap) {
        let retained: Vec<bool> = self.min_depth.iter().map(|&d| d <= max_depth).collect();

        let mut edges = Vec::new();
        let mut labels = HashMap::new();
        for i in 0..self.len() {
            if !retained[i] {
                continue;
            }
            let ci = self.vocab.external(i as u32);
            if let Some(l) = self.vocab.label(i as u32) {
                labels.insert(ci, l.to_owned());
            }
            for &p in &self.parents[i] {
                if retained[p as usize] {
                    edges.push((ci, self.vocab.external(p)));
                }
            }
        }
        let root_id = self.vocab.external(self.root());
        let load = Ontology::from_edges(&edges, root_id, &labels)
            .expect("induced subgraph of a valid ontology is valid");
        debug_assert!(load.unreachable.is_empty());

        let mut memo: HashMap<u32, BTreeSet<ConceptId>> = HashMap::new();
        let mut map = BTreeMap::new();
        for i in 0..self.len() as u32 {
            if !retained[i as usize] {
                let targets = self.rollup_targets(i, &retained, &mut memo);
                map.insert(self.vocab.external(i), targets);
            }
        }
        (load.ontology, RollUpMap { map })
    }

    fn rollup_targets(
        &self,
        node: u32,
        retained: &[bool],
        memo: &mut HashMap<u32, BTreeSet<ConceptId>>,
    ) -> BTreeSet<ConceptId> {
        if let Some(t) = memo.get(&node) {
            return t.clone();
        }
        let mut out = BTreeSet::new();
        for &p in self.parents(node) {
            if retained[p as usize] {
                out.insert(self.vocab.external(p));
            } else {
                out.extend(self.rollup_targets(p, retained, memo));
            }
        }
        memo.insert(node, out.clone());
        out
    }
}

impl RollUpMap {
    pub fn new(map: BTreeMap<ConceptId, BTreeSet<ConceptId>>) -> Self {
        RollUpMap { map }
    }

    pub fn targets(&self, id: ConceptId) -> Option<&BTreeSet<ConceptId>> {
        self.map.get(&id)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ConceptId, &BTreeSet<ConceptId>)> {
        self.map.iter()
    }

    /// Writes `source\ttarget` TSV, one pair per line.
    pub fn write_tsv_path(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        for (src, targets) in &self.map {
            for t in targets {
                writeln!(out, "{src}\t{t}")?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_tsv_path(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut map: BTreeMap<ConceptId, BTreeSet<ConceptId>> = BTreeMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let src: u64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(path, lineno + 1, "bad source id"))?;
            let dst: u64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(path, lineno + 1, "bad target id"))?;
            map.entry(ConceptId(src)).or_default().insert(ConceptId(dst));
        }
        Ok(RollUpMap { map })
    }
}

/// DFS three-color cycle detection over child -> parent edges.
fn detect_cycle(parent_adj: &[BTreeSet<usize>], ids: &[ConceptId]) -> Result<()> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let n = parent_adj.len();
    let mut color = vec![Color::White; n];
    for start in 0..n {
        if color[start] != Color::White {
            continue;
        }
        // Iterative DFS; each frame tracks the next parent to explore.
        let mut stack: Vec<(usize, std::collections::btree_set::Iter<usize>)> =
            vec![(start, parent_adj[start].iter())];
        color[start] = Color::Gray;
        while let Some((u, iter)) = stack.last_mut() {
            let u = *u;
            match iter.next() {
                Some(&p) => match color[p] {
                    Color::Gray => {
                        return Err(Error::Cycle {
                            child: ids[u],
                            parent: ids[p],
                        });
                    }
                    Color::White => {
                        color[p] = Color::Gray;
                        stack.push((p, parent_adj[p].iter()));
                    }
                    Color::Black => {}
                },
                None => {
                    color[u] = Color::Black;
                    stack.pop();
                }
            }
        }
    }
    Ok(())
}

/// Kahn topological order with parents before children.
fn topo_parents_first(parents: &[Vec<u32>], children: &[Vec<u32>]) -> Vec<u32> {
    let n = parents.len();
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut queue: VecDeque<u32> = (0..n as u32).filter(|&i| indeg[i as usize] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &c in &children[u as usize] {
            indeg[c as usize] -= 1;
            if indeg[c as usize] == 0 {
                queue.push_back(c);
            }
        }
    }
    debug_assert_eq!(order.len(), n);
    order
}

/// Self-inclusive ancestor closure, computed parents-first.
fn ancestor_closure(parents: &[Vec<u32>], children: &[Vec<u32>]) -> BitMatrix {
    let n = parents.len();
    let words = BitMatrix::words_for(n);
    let mut bits = BitMatrix::zeros(n, words);
    for u in topo_parents_first(parents, children) {
        bits.set(u as usize, u as usize);
        for &p in &parents[u as usize] {
            bits.or_row_into(p as usize, u as usize);
        }
    }
    bits
}

/// Row-major bitset matrix used for ancestor/descendant closures.
#[derive(Debug, Clone)]
struct BitMatrix {
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    fn words_for(cols: usize) -> usize {
        cols.div_ceil(64)
    }

    fn zeros(rows: usize, words_per_row: usize) -> Self {
        BitMatrix {
            words_per_row,
            bits: vec![0; rows * words_per_row],
        }
    }

    fn row(&self, r: usize) -> &[u64] {
        &self.bits[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    fn set(&mut self, r: usize, c: usize) {
        self.bits[r * self.words_per_row + c / 64] |= 1u64 << (c % 64);
    }

    fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.words_per_row + c / 64] & (1u64 << (c % 64)) != 0
    }

    /// `row[dst] |= row[src]` for distinct rows.
    fn or_row_into(&mut self, src: usize, dst: usize) {
        debug_assert_ne!(src, dst);
        let w = self.words_per_row;
        let (a, b) = if src < dst {
            let (lo, hi) = self.bits.split_at_mut(dst * w);
            (&lo[src * w..src * w + w], &mut hi[..w])
        } else {
            let (lo, hi) = self.bits.split_at_mut(src * w);
            (&hi[..w], &mut lo[dst * w..dst * w + w])
        };
        for (d, s) in b.iter_mut().zip(a.iter()) {
            *d |= s;
        }
    }

    fn popcount_row(&self, r: usize) -> u64 {
        self.row(r).iter().map(|w| w.count_ones() as u64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(v: u64) -> ConceptId {
        ConceptId(v)
    }

    fn load(edges: &[(u64, u64)], root: u64) -> Result<OntologyLoad> {
        let edges: Vec<_> = edges.iter().map(|&(c, p)| (id(c), id(p))).collect();
        Ontology::from_edges(&edges, id(root), &HashMap::new())
    }

    /// Two-level binary tree: 1 <- {2,3}, 2 <- {4,5}, 3 <- {6,7}.
    fn seven_node_tree() -> Ontology {
        load(&[(2, 1), (3, 1), (4, 2), (5, 2), (6, 3), (7, 3)], 1)
            .unwrap()
            .ontology
    }

    #[test]
    fn two_leaf_star() {
        let ont = load(&[(10, 1), (11, 1)], 1).unwrap().ontology;
        assert_eq!(ont.len(), 3);
        assert_eq!(ont.min_depth(ont.root()), 0);
        let a = ont.vocab().index_of(id(10)).unwrap();
        let b = ont.vocab().index_of(id(11)).unwrap();
        assert_eq!(ont.min_depth(a), 1);
        assert_eq!(ont.min_depth(b), 1);
    }

    #[test]
    fn two_cycle_rejected() {
        let err = load(&[(2, 1), (1, 2)], 1).unwrap_err();
        assert!(matches!(err, Error::Cycle { .. }));
    }

    #[test]
    fn self_loop_rejected() {
        assert!(matches!(load(&[(1, 1)], 1), Err(Error::Cycle { .. })));
    }

    #[test]
    fn missing_root_rejected() {
        assert!(matches!(load(&[(2, 1)], 99), Err(Error::RootMissing(_))));
    }

    #[test]
    fn seven_node_tree_depths() {
        let ont = seven_node_tree();
        assert_eq!(ont.len(), 7);
        assert_eq!(ont.max_min_depth(), 2);
    }

    #[test]
    fn unreachable_nodes_dropped_and_reported() {
        // 8 <- 9 is disconnected from the root component.
        let load = load(&[(2, 1), (9, 8)], 1).unwrap();
        assert_eq!(load.ontology.len(), 2);
        assert_eq!(load.unreachable, vec![id(8), id(9)]);
    }

    #[test]
    fn prune_chain() {
        // r(1) <- a(2) <- b(3) <- c(4), limit 2.
        let ont = load(&[(2, 1), (3, 2), (4, 3)], 1).unwrap().ontology;
        let (pruned, rollup) = ont.prune_to_depth(2);
        assert_eq!(pruned.len(), 3);
        assert!(pruned.vocab().contains(id(3)));
        assert!(!pruned.vocab().contains(id(4)));
        let targets = rollup.targets(id(4)).unwrap();
        assert_eq!(targets.iter().copied().collect::<Vec<_>>(), vec![id(3)]);
    }

    #[test]
    fn prune_uses_min_depth_across_parents() {
        // Chain to depth 5 plus a short branch: node 100 has parents at
        // depths 5 and 3, so min_depth(100) = 4 and it survives limit 5.
        let ont = load(
            &[
                (2, 1),
                (3, 2),
                (4, 3),
                (5, 4),
                (6, 5),      // depth 5
                (30, 1),
                (31, 30),
                (32, 31),    // depth 3
                (100, 6),
                (100, 32),   // min depth 4
            ],
            1,
        )
        .unwrap()
        .ontology;
        let n100 = ont.vocab().index_of(id(100)).unwrap();
        assert_eq!(ont.min_depth(n100), 4);
        let (pruned, rollup) = ont.prune_to_depth(5);
        assert!(pruned.vocab().contains(id(100)));
        assert!(rollup.is_empty());
    }

    #[test]
    fn prune_is_idempotent() {
        let ont = load(&[(2, 1), (3, 2), (4, 3), (5, 4), (6, 1), (7, 6)], 1)
            .unwrap()
            .ontology;
        let (once, _) = ont.prune_to_depth(2);
        let (twice, rollup) = once.prune_to_depth(2);
        assert!(rollup.is_empty());
        assert_eq!(once.vocab().ids(), twice.vocab().ids());
    }

    #[test]
    fn rollup_recurses_through_excluded_parents() {
        // r <- a <- b <- c <- d with limit 1: both b and c and d roll to a.
        let ont = load(&[(2, 1), (3, 2), (4, 3), (5, 4)], 1).unwrap().ontology;
        let (_, rollup) = ont.prune_to_depth(1);
        for excluded in [3u64, 4, 5] {
            let t = rollup.targets(id(excluded)).unwrap();
            assert_eq!(t.iter().copied().collect::<Vec<_>>(), vec![id(2)]);
        }
    }

    #[test]
    fn information_content_examples() {
        let ont = seven_node_tree();
        let ic = ont.information_content();
        assert_eq!(ic.get(ont.root()), 0.0);
        let leaf = ont.vocab().index_of(id(4)).unwrap();
        assert!((ic.get(leaf) - (7.0f64).ln()).abs() < 1e-12);
        let a = ont.vocab().index_of(id(2)).unwrap();
        assert!((ic.get(a) - -(3.0f64 / 7.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn resnik_examples() {
        let ont = seven_node_tree();
        let ic = ont.information_content();
        // Self-similarity equals own IC.
        let c = ont.vocab().index_of(id(4)).unwrap();
        assert_eq!(ont.resnik(&ic, c, c).unwrap(), ic.get(c));
        // Siblings meet at their parent.
        let s = ont.resnik_by_id(&ic, id(4), id(5)).unwrap();
        assert!((s - -(3.0f64 / 7.0).ln()).abs() < 1e-12);
        // Disjoint subtrees meet only at the root.
        assert_eq!(ont.resnik_by_id(&ic, id(4), id(6)).unwrap(), 0.0);
    }

    #[test]
    fn resnik_unknown_concept() {
        let ont = seven_node_tree();
        let ic = ont.information_content();
        assert!(matches!(
            ont.resnik_by_id(&ic, id(4), id(99)),
            Err(Error::UnknownConcept(_))
        ));
    }

    #[test]
    fn descendants_are_transitive() {
        let ont = seven_node_tree();
        let a = ont.vocab().index_of(id(2)).unwrap();
        let desc: Vec<ConceptId> = ont
            .descendants(a)
            .into_iter()
            .map(|i| ont.vocab().external(i))
            .collect();
        assert_eq!(desc, vec![id(4), id(5)]);
        assert_eq!(ont.descendants(ont.root()).len(), 6);
    }
}
