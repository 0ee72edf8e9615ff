//! Undirected contact networks, the family-cluster generator, and extraction
//! of alter-ego pairs whose zones are mutually disjoint and non-adjacent.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("node index {index} out of range for network of {node_count} nodes")]
    InvalidNode { index: usize, node_count: usize },
    #[error("self-tie on node {0}")]
    SelfTie(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Undirected simple graph on nodes `0..node_count`.
///
/// Adjacency lists are kept sorted; each tie appears in both endpoint lists
/// and once in [`Network::ties`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    adj: Vec<Vec<usize>>,
    tie_count: usize,
}

impl Network {
    pub fn empty(node_count: usize) -> Self {
        Network {
            adj: vec![Vec::new(); node_count],
            tie_count: 0,
        }
    }

    /// Builds a network from a list of ties. Duplicates are collapsed.
    pub fn from_ties(
        node_count: usize,
        ties: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, NetError> {
        let mut set = BTreeSet::new();
        for (i, j) in ties {
            for k in [i, j] {
                if k >= node_count {
                    return Err(NetError::InvalidNode {
                        index: k,
                        node_count,
                    });
                }
            }
            if i == j {
                return Err(NetError::SelfTie(i));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let mut adj = vec![Vec::new(); node_count];
        for &(i, j) in &set {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Network {
            adj,
            tie_count: set.len(),
        })
    }

    /// Complete graph on `n` nodes.
    pub fn complete(n: usize) -> Self {
        let adj = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect();
        Network {
            adj,
            tie_count: n * n.saturating_sub(1) / 2,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn tie_count(&self) -> usize {
        self.tie_count
    }

    /// Neighbours of `i`, sorted ascending.
    pub fn contacts(&self, i: usize) -> Result<&[usize], NetError> {
        self.adj
            .get(i)
            .map(Vec::as_slice)
            .ok_or(NetError::InvalidNode {
                index: i,
                node_count: self.adj.len(),
            })
    }

    /// Unchecked neighbour access for hot loops; panics on a bad index.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn has_tie(&self, i: usize, j: usize) -> bool {
        i < self.adj.len() && self.adj[i].binary_search(&j).is_ok()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// Every tie once, as `(i, j)` with `i < j`, in lexicographic order.
    pub fn ties(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    fn add_tie_unchecked(&mut self, i: usize, j: usize) {
        self.adj[i].push(j);
        self.adj[j].push(i);
        self.tie_count += 1;
    }
}

/// Fully connected groups of `group_size` consecutive nodes, plus random
/// ties between groups.
///
/// Each unordered out-of-group pair is tied independently with probability
/// `out_tie_prob`. At 0.0001 and 10000 nodes that is about one out-of-group
/// tie per node.
pub fn generate_family_network<R: Rng + ?Sized>(
    num_groups: usize,
    group_size: usize,
    out_tie_prob: f64,
    rng: &mut R,
) -> Result<Network, NetError> {
    if !(0.0..=1.0).contains(&out_tie_prob) {
        return Err(NetError::BadProbability(out_tie_prob));
    }
    let n = num_groups * group_size;
    let mut net = Network::empty(n);
    for g in 0..num_groups {
        let base = g * group_size;
        for i in base..base + group_size {
            for j in i + 1..base + group_size {
                net.add_tie_unchecked(i, j);
            }
        }
    }
    if out_tie_prob > 0.0 {
        // Skip ahead over the upper triangle row by row.
        let skip = Geometric::new(out_tie_prob).expect("probability in (0, 1]");
        for i in 0..n {
            let group_end = (i / group_size + 1) * group_size;
            let mut j = group_end;
            loop {
                let gap = skip.sample(rng);
                j = match usize::try_from(gap).ok().and_then(|g| j.checked_add(g)) {
                    Some(j) => j,
                    None => break,
                };
                if j >= n {
                    break;
                }
                net.add_tie_unchecked(i, j);
                j += 1;
            }
        }
    }
    for list in &mut net.adj {
        list.sort_unstable();
    }
    Ok(net)
}

/// Out-of-group tie probability that keeps the expected number of out-of-group ties
/// per node equal to that of a reference network.
pub fn scaled_out_tie_prob(
    reference_prob: f64,
    reference_nodes: usize,
    nodes: usize,
    group_size: usize,
) -> f64 {
    reference_prob * (reference_nodes - group_size) as f64 / (nodes - group_size) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlterEgoPair {
    pub pair_id: usize,
    pub alter: usize,
    pub ego: usize,
}

/// The pair plus every node tied to either member, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Zone {
    pub pair_id: usize,
    pub members: Vec<usize>,
}

pub fn zone_of(net: &Network, pair: &AlterEgoPair) -> Zone {
    let mut members: Vec<usize> = [pair.alter, pair.ego]
        .into_iter()
        .chain(net.neighbors(pair.alter).iter().copied())
        .chain(net.neighbors(pair.ego).iter().copied())
        .collect();
    members.sort_unstable();
    members.dedup();
    Zone {
        pair_id: pair.pair_id,
        members,
    }
}

/// Randomised greedy maximal selection of tied pairs with pairwise disjoint,
/// non-adjacent zones.
///
/// Ties are visited in a random order; a tie is accepted when no member of
/// its zone lies in, or is adjacent to, an already accepted zone. Alter and
/// ego roles are then assigned by a fair coin.
pub fn extract_independent_pairs<R: Rng + ?Sized>(
    net: &Network,
    rng: &mut R,
) -> Vec<(AlterEgoPair, Zone)> {
    let mut ties: Vec<(usize, usize)> = net.ties().collect();
    ties.shuffle(rng);

    // near[v]: v is in an accepted zone or tied to one.
    let mut near = vec![false; net.node_count()];
    let mut out = Vec::new();
    for (u, v) in ties {
        let candidate = zone_of(
            net,
            &AlterEgoPair {
                pair_id: 0,
                alter: u,
                ego: v,
            },
        );
        if candidate.members.iter().any(|&m| near[m]) {
            continue;
        }
        for &m in &candidate.members {
            near[m] = true;
            for &w in net.neighbors(m) {
                near[w] = true;
            }
        }
        let (alter, ego) = if rng.random::<bool>() { (u, v) } else { (v, u) };
        let pair = AlterEgoPair {
            pair_id: out.len(),
            alter,
            ego,
        };
        out.push((
            pair,
            Zone {
                pair_id: pair.pair_id,
                members: candidate.members,
            },
        ));
    }
    out
}

/// Reason a pair selection fails the independence condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NotATie { pair_id: usize },
    WrongZone { pair_id: usize },
    SharedNode { first: usize, second: usize, node: usize },
    CrossTie { first: usize, second: usize, tie: (usize, usize) },
}

/// Exhaustive zone check: every pair is a tie, zones match their
/// definition, and no two zones share a node or a tie.
pub fn check_zone_independence(
    net: &Network,
    selection: &[(AlterEgoPair, Zone)],
) -> Result<(), Violation> {
    for (pair, zone) in selection {
        if pair.alter == pair.ego || !net.has_tie(pair.alter, pair.ego) {
            return Err(Violation::NotATie {
                pair_id: pair.pair_id,
            });
        }
        if zone_of(net, pair).members != zone.members {
            return Err(Violation::WrongZone {
                pair_id: pair.pair_id,
            });
        }
    }
    for (a, (pa, za)) in selection.iter().enumerate() {
        for (pb, zb) in &selection[a + 1..] {
            for &x in &za.members {
                if zb.members.binary_search(&x).is_ok() {
                    return Err(Violation::SharedNode {
                        first: pa.pair_id,
                        second: pb.pair_id,
                        node: x,
                    });
                }
                for &y in net.neighbors(x) {
                    if zb.members.binary_search(&y).is_ok() {
                        return Err(Violation::CrossTie {
                            first: pa.pair_id,
                            second: pb.pair_id,
                            tie: (x, y),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Graph-distance formulation of the same condition: the member sets of any
/// two pairs are at distance at least `min_distance`.
pub fn pairs_at_distance(net: &Network, pairs: &[AlterEgoPair], min_distance: usize) -> bool {
    let mut owner = vec![usize::MAX; net.node_count()];
    for (k, p) in pairs.iter().enumerate() {
        for v in [p.alter, p.ego] {
            if owner[v] != usize::MAX && owner[v] != k {
                return false;
            }
            owner[v] = k;
        }
    }
    let mut dist = vec![usize::MAX; net.node_count()];
    let mut touched = Vec::new();
    let mut queue = VecDeque::new();
    for (k, p) in pairs.iter().enumerate() {
        for &v in &touched {
            dist[v] = usize::MAX;
        }
        touched.clear();
        for v in [p.alter, p.ego] {
            dist[v] = 0;
            touched.push(v);
            queue.push_back(v);
        }
        while let Some(v) = queue.pop_front() {
            if owner[v] != usize::MAX && owner[v] != k {
                queue.clear();
                return false;
            }
            if dist[v] + 1 >= min_distance {
                continue;
            }
            for &w in net.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    touched.push(w);
                    queue.push_back(w);
                }
            }
        }
    }
    true
}

/// True when every tie of the network conflicts with some selected zone.
pub fn is_maximal(net: &Network, selection: &[(AlterEgoPair, Zone)]) -> bool {
    let mut near = vec![false; net.node_count()];
    for (_, zone) in selection {
        for &m in &zone.members {
            near[m] = true;
            for &w in net.neighbors(m) {
                near[w] = true;
            }
        }
    }
    net.ties().all(|(u, v)| {
        let zone = zone_of(
            net,
            &AlterEgoPair {
                pair_id: 0,
                alter: u,
                ego: v,
            },
        );
        zone.members.iter().any(|&m| near[m])
    })
}

/// Writes the edge-list format: node count on the first line, then one
/// `i j` line per tie with `i < j`.
pub fn save_edge_list(net: &Network, path: impl AsRef<Path>) -> Result<(), NetError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_edge_list(net, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_edge_list<W: Write>(net: &Network, w: &mut W) -> io::Result<()> {
    writeln!(w, "{}", net.node_count())?;
    for (i, j) in net.ties() {
        writeln!(w, "{i} {j}")?;
    }
    Ok(())
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Network, NetError> {
    parse_edge_list(&fs::read_to_string(path)?)
}

pub fn parse_edge_list(text: &str) -> Result<Network, NetError> {
    let mut node_count = None;
    let mut ties = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| NetError::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some(n) = node_count else {
            if fields.len() != 1 {
                return Err(parse_err("expected node count".into()));
            }
            node_count = Some(
                fields[0]
                    .parse::<usize>()
                    .map_err(|e| parse_err(format!("bad node count: {e}")))?,
            );
            continue;
        };
        if fields.len() != 2 {
            return Err(parse_err(format!("expected `i j`, got `{line}`")));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|e| parse_err(format!("bad index `{}`: {e}", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|e| parse_err(format!("bad index `{}`: {e}", fields[1])))?;
        if i >= n || j >= n {
            return Err(parse_err(format!(
                "index out of range for {n} nodes"
            )));
        }
        if i == j {
            return Err(parse_err(format!("self-tie on node {i}")));
        }
        if !ties.insert((i.min(j), i.max(j))) {
            return Err(parse_err(format!("duplicate tie {i} {j}")));
        }
    }
    let n = node_count.ok_or(NetError::Parse {
        line: 0,
        msg: "missing node count".into(),
    })?;
    Network::from_ties(n, ties)
}
