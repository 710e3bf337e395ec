//! Undirected graphs with CSR adjacency and plain-text I/O.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Largest node count accepted by loaders and generators.
pub const MAX_NODES: usize = 1_000_000;

/// All-pairs metrics run BFS from every node; larger graphs are rejected.
pub const MAX_METRIC_NODES: usize = 5_000;

/// Simple undirected graph. Edges are stored once as `(u, v)` with `u < v`, sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    features: Option<Tensor>,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Builds a graph on `n` nodes; duplicate and reversed edges collapse.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n > MAX_NODES {
            return Err(Error::invalid(format!(
                "{n} nodes exceeds the limit of {MAX_NODES}"
            )));
        }
        let mut list = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop on node {u}")));
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        list.dedup();

        let mut degree = vec![0usize; n];
        for &(u, v) in &list {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut targets = vec![0; offsets[n]];
        for &(u, v) in &list {
            targets[fill[u]] = v;
            fill[u] += 1;
            targets[fill[v]] = u;
            fill[v] += 1;
        }
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Ok(Self {
            n,
            edges: list,
            offsets,
            targets,
            features: None,
            labels: None,
        })
    }

    pub fn with_features(mut self, features: Tensor) -> Result<Self> {
        if features.ndim() != 2 || features.shape()[0] != self.n {
            return Err(Error::shape(
                "graph",
                format!("features {:?} for {} nodes", features.shape(), self.n),
            ));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::shape(
                "graph",
                format!("{} labels for {} nodes", labels.len(), self.n),
            ));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> Option<&Tensor> {
        self.features.as_ref()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |m| m + 1)
    }

    /// CSR arrays: neighbors of `i` are `targets[offsets[i]..offsets[i + 1]]`.
    pub fn csr(&self) -> (&[usize], &[usize]) {
        (&self.offsets, &self.targets)
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && v < self.n && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Hop counts from `src`; `None` for unreachable nodes.
    pub fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::from([src]);
        dist[src] = Some(0);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap() + 1;
            for &v in self.neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(d);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Row-major `n * n` hop counts, `usize::MAX` where unreachable.
    pub fn all_pairs_distances(&self) -> Result<Vec<usize>> {
        if self.n > MAX_METRIC_NODES {
            return Err(Error::invalid(format!(
                "all-pairs distances capped at {MAX_METRIC_NODES} nodes, graph has {}",
                self.n
            )));
        }
        let mut out = Vec::with_capacity(self.n * self.n);
        for s in 0..self.n {
            out.extend(self.bfs(s).into_iter().map(|d| d.unwrap_or(usize::MAX)));
        }
        Ok(out)
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.bfs(0).iter().all(Option::is_some)
    }

    /// Same nodes, features and labels with a different edge set.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Graph::new(self.n, edges)?;
        g.features = self.features.clone();
        g.labels = self.labels.clone();
        Ok(g)
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_index(tok: &str, line: usize) -> Result<usize> {
    let v: usize = tok.parse().map_err(|_| Error::Parse {
        line,
        detail: format!("{tok:?} is not a node index"),
    })?;
    if v >= MAX_NODES {
        return Err(Error::Parse {
            line,
            detail: format!("node index {v} exceeds the limit of {MAX_NODES}"),
        });
    }
    Ok(v)
}

fn fields<const N: usize>(l: &str, line: usize) -> Result<[&str; N]> {
    let toks: Vec<&str> = l.split_whitespace().collect();
    toks.try_into().map_err(|t: Vec<&str>| Error::Parse {
        line,
        detail: format!("expected {N} fields, found {}", t.len()),
    })
}

/// Parses "u<TAB>v" lines; the node count is one past the largest index.
pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut edges = Vec::new();
    for (line, l) in data_lines(text) {
        let [a, b] = fields::<2>(l, line)?;
        let (u, v) = (parse_index(a, line)?, parse_index(b, line)?);
        if u == v {
            return Err(Error::Parse {
                line,
                detail: format!("self-loop on node {u}"),
            });
        }
        edges.push((u, v));
    }
    if edges.is_empty() {
        return Err(Error::invalid("no edges"));
    }
    let n = edges.iter().map(|&(u, v)| u.max(v)).max().unwrap() + 1;
    Graph::new(n, edges)
}

/// Parses "node<TAB>label" lines for a graph with `n` nodes; every node needs a label.
pub fn parse_labels(text: &str, n: usize) -> Result<Vec<usize>> {
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for (line, l) in data_lines(text) {
        let [a, b] = fields::<2>(l, line)?;
        let node = parse_index(a, line)?;
        if node >= n {
            return Err(Error::Parse {
                line,
                detail: format!("node {node} out of range for {n} nodes"),
            });
        }
        let label: usize = b.parse().map_err(|_| Error::Parse {
            line,
            detail: format!("{b:?} is not a class label"),
        })?;
        if let Some(&prev) = seen.get(&node) {
            if prev != label {
                return Err(Error::Parse {
                    line,
                    detail: format!("node {node} labeled both {prev} and {label}"),
                });
            }
        }
        seen.insert(node, label);
    }
    (0..n)
        .map(|i| {
            seen.get(&i)
                .copied()
                .ok_or_else(|| Error::invalid(format!("node {i} has no label")))
        })
        .collect()
}

/// Parses a header "N D" followed by `N` rows of `D` decimals.
pub fn parse_features(text: &str) -> Result<Tensor> {
    let mut lines = data_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::invalid("empty feature file"))?;
    let [a, b] = fields::<2>(header, hline)?;
    let n = parse_index(a, hline)?;
    let d = parse_index(b, hline)?;
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (line, l) in lines {
        let before = data.len();
        for tok in l.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line,
                detail: format!("{tok:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    detail: format!("non-finite feature {tok}"),
                });
            }
            data.push(v);
        }
        if data.len() - before != d {
            return Err(Error::Parse {
                line,
                detail: format!("expected {d} features, found {}", data.len() - before),
            });
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::invalid(format!(
            "header promises {n} rows, file has {rows}"
        )));
    }
    Tensor::new(&[n, d], data)
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

pub fn load_labels(path: impl AsRef<Path>, n: usize) -> Result<Vec<usize>> {
    parse_labels(&std::fs::read_to_string(path)?, n)
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Tensor> {
    parse_features(&std::fs::read_to_string(path)?)
}

pub fn format_edge_list(g: &Graph) -> String {
    let mut s = String::new();
    for &(u, v) in g.edges() {
        let _ = writeln!(s, "{u}\t{v}");
    }
    s
}

pub fn format_labels(labels: &[usize]) -> String {
    let mut s = String::new();
    for (i, l) in labels.iter().enumerate() {
        let _ = writeln!(s, "{i}\t{l}");
    }
    s
}

/// Writes features with round-trip precision.
pub fn format_features(features: &Tensor) -> Result<String> {
    if features.ndim() != 2 {
        return Err(Error::shape("features", format!("{:?}", features.shape())));
    }
    let mut s = format!("{} {}\n", features.shape()[0], features.shape()[1]);
    for row in features.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    Ok(s)
}

pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, format_edge_list(g))?)
}

pub fn save_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, format_labels(labels))?)
}

pub fn save_features(features: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, format_features(features)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_line_file_is_a_path() {
        let g = parse_edge_list("0\t1\n1\t2\n").unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert!(g.has_edge(2, 1) && !g.has_edge(0, 2));
        assert_eq!(g.bfs(0), vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn comments_only_is_an_error() {
        let err = parse_edge_list("# header\n\n# more\n").unwrap_err();
        assert!(err.to_string().contains("no edges"), "{err}");
    }

    #[test]
    fn malformed_lines_report_their_line_number() {
        let cases = [
            ("0 1\n1 x\n", 2),
            ("# c\n0 1 2\n", 2),
            ("0 1\n3 3\n", 2),
            ("0 99999999999\n", 1),
            ("0 -1\n", 1),
        ];
        for (text, want) in cases {
            match parse_edge_list(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = parse_edge_list("0 1\n1 0\n0 1\n").unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn label_errors() {
        assert_eq!(parse_labels("0 1\n1 0\n0 1\n", 2).unwrap(), vec![1, 0]);
        assert!(matches!(
            parse_labels("0 1\n0 2\n", 1),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_labels("5 1\n", 2),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_labels("0 1\n", 2).is_err());
    }

    #[test]
    fn feature_errors() {
        assert!(matches!(
            parse_features("2 2\n1 2\n3 abc\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_features("1 2\n1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_features("3 1\n1\n").is_err());
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let g = Graph::new(5, [(0, 1), (3, 1), (4, 2), (2, 0)]).unwrap();
        save_edge_list(&g, dir.path().join("e.txt")).unwrap();
        assert_eq!(load_edge_list(dir.path().join("e.txt")).unwrap(), g);

        let labels = vec![0, 2, 1, 1, 0];
        save_labels(&labels, dir.path().join("l.txt")).unwrap();
        assert_eq!(load_labels(dir.path().join("l.txt"), 5).unwrap(), labels);

        let f = Tensor::new(&[2, 3], vec![0.1, -1e-300, 3.0, 1.0 / 3.0, 2e10, -0.0]).unwrap();
        save_features(&f, dir.path().join("f.txt")).unwrap();
        assert_eq!(load_features(dir.path().join("f.txt")).unwrap(), f);
    }

    #[test]
    fn graph_validation() {
        assert!(Graph::new(2, [(0, 2)]).is_err());
        assert!(Graph::new(2, [(1, 1)]).is_err());
        let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!g.is_connected());
        let d = g.all_pairs_distances().unwrap();
        assert_eq!(d[1], 1);
        assert_eq!(d[2], usize::MAX);
        assert!(g.clone().with_labels(vec![0; 3]).is_err());
        assert!(g.with_features(Tensor::zeros(&[4, 2])).is_ok());
    }
}
