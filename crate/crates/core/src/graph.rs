//! Agent network topology and the Laplacian spectral data derived from it.
//!
//! Edge convention: `a_ij = 1` means agent `i` receives information from
//! agent `j`, so information flows along `j -> i`. The Laplacian is
//! `L = D - A` with `D` the diagonal of row sums (in-degrees).

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues closer than this to the structural zero are treated as zero.
pub const ZERO_EIG_TOL: f64 = 1e-8;

const SCHUR_MAX_ITER: usize = 10_000;

/// Directed graph with `{0,1}` adjacency weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    adj: Vec<bool>,
}

impl Digraph {
    /// Graph on `n_agents` nodes with no edges.
    pub fn empty(n_agents: usize) -> Result<Self> {
        if n_agents < 2 {
            return Err(Error::InvalidGraph(format!("need at least 2 agents, got {n_agents}")));
        }
        Ok(Self {
            n: n_agents,
            adj: vec![false; n_agents * n_agents],
        })
    }

    /// Builds a graph from zero-based `(i, j)` pairs, each setting `a_ij = 1`.
    pub fn from_edges(n_agents: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n_agents)?;
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    /// Undirected graph: every pair is inserted in both directions.
    pub fn undirected(n_agents: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n_agents)?;
        for &(i, j) in pairs {
            g.add_edge(i, j)?;
            g.add_edge(j, i)?;
        }
        Ok(g)
    }

    /// Sets `a_ij = 1` (zero-based).
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidGraph(format!(
                "edge ({i}, {j}) out of range for {} agents",
                self.n
            )));
        }
        if i == j {
            return Err(Error::InvalidGraph(format!("self-loop at agent {i}")));
        }
        self.adj[i * self.n + j] = true;
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if self.has_edge(i, j) {
            1.0
        } else {
            0.0
        }
    }

    /// Neighbor set `N_i = { j : a_ij = 1 }`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.has_edge(i, j)).collect()
    }

    /// In-degree `deg_i`, the number of agents `i` listens to.
    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.has_edge(i, j)).count()
    }

    fn out_degree(&self, j: usize) -> usize {
        (0..self.n).filter(|&i| self.has_edge(i, j)).count()
    }

    /// Active noise channels as `(j, i)` pairs: `j` transmits, `i` receives.
    pub fn channels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.has_edge(i, j) {
                    out.push((j, i));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&e| e).count()
    }

    pub fn is_undirected(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.has_edge(i, j) == self.has_edge(j, i)))
    }

    /// In-degree equals out-degree at every node.
    pub fn is_balanced(&self) -> bool {
        (0..self.n).all(|i| self.degree(i) == self.out_degree(i))
    }

    /// `reach[r][v]` is true when information from `r` reaches `v`.
    fn reachability(&self) -> Vec<Vec<bool>> {
        let mut reach = vec![vec![false; self.n]; self.n];
        let mut queue = VecDeque::new();
        for r in 0..self.n {
            let row = &mut reach[r];
            row[r] = true;
            queue.push_back(r);
            while let Some(j) = queue.pop_front() {
                for (i, seen) in row.iter_mut().enumerate() {
                    if !*seen && self.has_edge(i, j) {
                        *seen = true;
                        queue.push_back(i);
                    }
                }
            }
        }
        reach
    }

    /// Strongly connected classes that receive no information from outside
    /// themselves. A spanning tree exists iff there is exactly one.
    fn closed_classes(&self) -> Vec<Vec<usize>> {
        let reach = self.reachability();
        let mut assigned = vec![false; self.n];
        let mut classes = Vec::new();
        for v in 0..self.n {
            if assigned[v] {
                continue;
            }
            let class: Vec<usize> = (0..self.n).filter(|&u| reach[v][u] && reach[u][v]).collect();
            for &u in &class {
                assigned[u] = true;
            }
            let closed = class
                .iter()
                .all(|&i| (0..self.n).all(|j| !self.has_edge(i, j) || class.contains(&j)));
            if closed {
                classes.push(class);
            }
        }
        classes
    }
}

impl fmt::Display for Digraph {
    /// Writes the plain-text edge-list format accepted by [`Digraph::from_str`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "agents {}", self.n)?;
        for i in 0..self.n {
            for j in 0..self.n {
                if self.has_edge(i, j) {
                    writeln!(f, "{} {}", i + 1, j + 1)?;
                }
            }
        }
        Ok(())
    }
}

impl FromStr for Digraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_edge_list(s, "graph")
    }
}

/// Parses the edge-list format: a header `agents N`, then one `i j` line per
/// edge (1-based, meaning `a_ij = 1`). `#` starts a comment.
pub fn parse_edge_list(text: &str, source_name: &str) -> Result<Digraph> {
    let mut graph: Option<Digraph> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = tokens_with_columns(content);
        let Some((col, first)) = tokens.next() else {
            continue;
        };
        match graph.as_mut() {
            None => {
                if first != "agents" {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        col,
                        format!("expected header 'agents N', found '{first}'"),
                    ));
                }
                let (col, tok) = tokens
                    .next()
                    .ok_or_else(|| Error::parse(source_name, line_no, col + first.len(), "missing agent count"))?;
                let n: usize = tok
                    .parse()
                    .map_err(|_| Error::parse(source_name, line_no, col, format!("invalid agent count '{tok}'")))?;
                if n < 2 {
                    return Err(Error::parse(source_name, line_no, col, "at least 2 agents required"));
                }
                if n > 4096 {
                    return Err(Error::parse(source_name, line_no, col, "too many agents"));
                }
                if let Some((col, extra)) = tokens.next() {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        col,
                        format!("unexpected token '{extra}'"),
                    ));
                }
                graph = Some(Digraph::empty(n)?);
            }
            Some(g) => {
                let n = g.n_agents();
                let parse_index = |col: usize, tok: &str| -> Result<usize> {
                    let v: usize = tok
                        .parse()
                        .map_err(|_| Error::parse(source_name, line_no, col, format!("invalid agent index '{tok}'")))?;
                    if v == 0 || v > n {
                        return Err(Error::parse(
                            source_name,
                            line_no,
                            col,
                            format!("agent index {v} outside 1..={n}"),
                        ));
                    }
                    Ok(v - 1)
                };
                let i = parse_index(col, first)?;
                let (col_j, tok_j) = tokens
                    .next()
                    .ok_or_else(|| Error::parse(source_name, line_no, col + first.len(), "edge needs two indices"))?;
                let j = parse_index(col_j, tok_j)?;
                if let Some((col, extra)) = tokens.next() {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        col,
                        format!("unexpected token '{extra}'"),
                    ));
                }
                if i == j {
                    return Err(Error::parse(source_name, line_no, col, "self-loops are not allowed"));
                }
                g.add_edge(i, j)?;
            }
        }
    }
    graph.ok_or_else(|| Error::parse(source_name, 1, 1, "missing 'agents N' header"))
}

/// Whitespace-separated tokens paired with their 1-based column.
pub(crate) fn tokens_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (pos, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..pos]));
            }
        } else if start.is_none() {
            start = Some(pos);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out.into_iter()
}

/// `L = D - A`.
pub fn build_laplacian(g: &Digraph) -> DMatrix<f64> {
    let n = g.n_agents();
    DMatrix::from_fn(n, n, |i, j| if i == j { g.degree(i) as f64 } else { -g.weight(i, j) })
}

/// Reachability test: some root's information reaches every agent.
pub fn has_spanning_tree(g: &Digraph) -> bool {
    g.reachability().iter().any(|row| row.iter().all(|&r| r))
}

/// Laplacian, stationary distribution and spectrum of a digraph.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub laplacian: DMatrix<f64>,
    /// Probability vector with `pi^T L = 0`.
    pub pi: Vec<f64>,
    /// `sqrt(N) * pi`, present only when a spanning tree exists.
    pub nu: Option<Vec<f64>>,
    /// Eigenvalues of `L` with one structural zero removed, sorted by real part.
    pub nonzero_eigs: Vec<Complex64>,
    pub has_spanning_tree: bool,
    pub is_balanced: bool,
    pub is_undirected: bool,
    /// Smallest / largest of `nonzero_eigs` (undirected graphs only).
    pub lambda2: Option<f64>,
    pub lambda_n: Option<f64>,
}

impl SpectralData {
    pub fn n_agents(&self) -> usize {
        self.pi.len()
    }

    /// Spanning-tree verdict read off the spectrum: `Re(lambda) > 1e-8` for every nonzero eigenvalue.
    pub fn spectral_spanning_tree(&self) -> bool {
        self.nonzero_eigs.iter().all(|l| l.re > ZERO_EIG_TOL)
    }

    /// `max_j |lambda_j|^2 / Re(lambda_j)` over the nonzero eigenvalues.
    pub fn delay_sensitivity(&self) -> f64 {
        self.nonzero_eigs
            .iter()
            .map(|l| l.norm_sqr() / l.re)
            .fold(0.0, f64::max)
    }

    /// `max_j Re(lambda_j)`.
    pub fn max_real_eig(&self) -> f64 {
        self.nonzero_eigs.iter().map(|l| l.re).fold(0.0, f64::max)
    }

    /// `||pi^T L||_inf`.
    pub fn pi_residual(&self) -> f64 {
        let pi = DVector::from_column_slice(&self.pi);
        (pi.transpose() * &self.laplacian).amax()
    }

    /// `pi^T x` for scalar agent states.
    pub fn centroid(&self, x: &[f64]) -> f64 {
        self.pi.iter().zip(x).map(|(p, v)| p * v).sum()
    }
}

/// Full spectral decomposition of the Laplacian of `g`.
pub fn spectral_decompose(g: &Digraph) -> Result<SpectralData> {
    let laplacian = build_laplacian(g);
    let n = g.n_agents();
    let tree = has_spanning_tree(g);
    let undirected = g.is_undirected();
    let balanced = g.is_balanced();

    let mut eigs: Vec<Complex64> = if undirected {
        SymmetricEigen::try_new(laplacian.clone(), f64::EPSILON, SCHUR_MAX_ITER)
            .ok_or_else(|| Error::DegenerateSpectrum("symmetric eigensolver did not converge".into()))?
            .eigenvalues
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect()
    } else {
        Schur::try_new(laplacian.clone(), f64::EPSILON, SCHUR_MAX_ITER)
            .ok_or_else(|| Error::DegenerateSpectrum("QR iteration did not converge".into()))?
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect()
    };

    let zero_idx = eigs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .expect("n >= 2");
    let zero = eigs.remove(zero_idx);
    if zero.norm() > ZERO_EIG_TOL * (1.0 + laplacian.amax()) {
        return Err(Error::DegenerateSpectrum(format!(
            "no eigenvalue near zero (closest {zero})"
        )));
    }
    if tree {
        if let Some(close) = eigs.iter().find(|l| (**l - zero).norm() < ZERO_EIG_TOL) {
            return Err(Error::DegenerateSpectrum(format!(
                "second eigenvalue {close} within {ZERO_EIG_TOL:e} of the structural zero"
            )));
        }
    }
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let pi = stationary_distribution(g)?;
    let nu = tree.then(|| {
        let scale = (n as f64).sqrt();
        pi.iter().map(|p| p * scale).collect()
    });
    let (lambda2, lambda_n) = if undirected {
        (eigs.first().map(|l| l.re), eigs.last().map(|l| l.re))
    } else {
        (None, None)
    };

    Ok(SpectralData {
        laplacian,
        pi,
        nu,
        nonzero_eigs: eigs,
        has_spanning_tree: tree,
        is_balanced: balanced,
        is_undirected: undirected,
        lambda2,
        lambda_n,
    })
}

/// Probability vector in the left null space of `L`.
///
/// Each closed class `C` carries a unique positive solution of
/// `pi_C^T L_CC = 0`; with several closed classes (no spanning tree) their
/// uniform mixture is returned.
pub fn stationary_distribution(g: &Digraph) -> Result<Vec<f64>> {
    let n = g.n_agents();
    let laplacian = build_laplacian(g);
    let classes = g.closed_classes();
    let mut pi = vec![0.0; n];
    let weight = 1.0 / classes.len() as f64;
    for class in &classes {
        let m = class.len();
        if m == 1 {
            pi[class[0]] += weight;
            continue;
        }
        // Rows of L_CC^T, with the last replaced by the normalisation constraint.
        let mut system = DMatrix::from_fn(m, m, |r, c| laplacian[(class[c], class[r])]);
        for c in 0..m {
            system[(m - 1, c)] = 1.0;
        }
        let mut rhs = DVector::zeros(m);
        rhs[m - 1] = 1.0;
        let sol = system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::DegenerateSpectrum("singular stationary system".into()))?;
        for (k, &node) in class.iter().enumerate() {
            pi[node] += weight * sol[k].max(0.0);
        }
    }
    let total: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= total;
    }
    Ok(pi)
}

/// Orthonormal Laplacian eigenbasis of an undirected graph, restricted to the
/// disagreement subspace (the direction `1_N` is dropped).
#[derive(Clone, Debug)]
pub struct ModalBasis {
    /// `lambda_2 <= ... <= lambda_N`.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the unit eigenvector for `eigenvalues[k]`.
    pub vectors: DMatrix<f64>,
}

impl ModalBasis {
    pub fn new(g: &Digraph) -> Result<Self> {
        if !g.is_undirected() {
            return Err(Error::GraphNotUndirected);
        }
        let lap = build_laplacian(g);
        let eig = SymmetricEigen::try_new(lap, f64::EPSILON, SCHUR_MAX_ITER)
            .ok_or_else(|| Error::DegenerateSpectrum("symmetric eigensolver did not converge".into()))?;
        let mut order: Vec<usize> = (0..g.n_agents()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        if eig.eigenvalues[order[1]] <= ZERO_EIG_TOL {
            return Err(Error::NotConnected);
        }
        let kept = &order[1..];
        let eigenvalues = kept.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(g.n_agents(), kept.len(), |r, c| eig.eigenvectors[(r, kept[c])]);
        Ok(Self { eigenvalues, vectors })
    }

    /// Modal coordinates `phi^T x` of an agent vector (scalar agents, `n = 1`).
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (self.vectors.transpose() * x).iter().copied().collect()
    }
}

/// The four-agent topology of the worked example with
/// `a_12 = a_23 = a_32 = a_34 = a_43 = 1`.
pub fn example_directed() -> Digraph {
    Digraph::from_edges(4, &[(0, 1), (1, 2), (2, 1), (2, 3), (3, 2)]).expect("valid")
}

/// The undirected path `1 - 2 - 3 - 4` (the directed example plus `a_21 = 1`).
pub fn example_undirected() -> Digraph {
    Digraph::from_edges(4, &[(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn laplacian_of_two_node_cycle() {
        let g = Digraph::undirected(2, &[(0, 1)]).unwrap();
        let l = build_laplacian(&g);
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn laplacian_of_empty_graph_is_zero() {
        let g = Digraph::empty(5).unwrap();
        assert_eq!(build_laplacian(&g), DMatrix::zeros(5, 5));
    }

    #[test]
    fn laplacian_of_directed_example() {
        let l = build_laplacian(&example_directed());
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            1.0, -1.0, 0.0, 0.0,
            0.0, 1.0, -1.0, 0.0,
            0.0, -1.0, 2.0, -1.0,
            0.0, 0.0, -1.0, 1.0,
        ]);
        assert_eq!(l, expected);
    }

    #[test]
    fn directed_example_spectrum() {
        let s = spectral_decompose(&example_directed()).unwrap();
        assert!(s.has_spanning_tree);
        assert!(!s.is_undirected);
        let re: Vec<f64> = s.nonzero_eigs.iter().map(|l| l.re).collect();
        assert_abs_diff_eq!(re[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(re[1], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(re[2], 3.0, epsilon = 1e-9);
        // Agent 1 only listens, so it carries no weight in the centroid.
        assert_abs_diff_eq!(s.pi[0], 0.0, epsilon = 1e-15);
        for p in &s.pi[1..] {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-12);
        }
        assert!(s.pi_residual() < 1e-12);
    }

    #[test]
    fn undirected_example_spectrum() {
        let s = spectral_decompose(&example_undirected()).unwrap();
        assert!(s.is_undirected && s.is_balanced);
        assert_abs_diff_eq!(s.lambda2.unwrap(), 2.0 - 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.lambda_n.unwrap(), 2.0 + 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn complete_graph_on_three_nodes() {
        // char poly of [[2,-1,-1],[-1,2,-1],[-1,-1,2]] is -x(x-3)^2.
        let g = Digraph::undirected(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let s = spectral_decompose(&g).unwrap();
        for l in &s.nonzero_eigs {
            assert_abs_diff_eq!(l.re, 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(l.im, 0.0);
        }
        for p in &s.pi {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn disconnected_cycles_have_no_spanning_tree() {
        let g = Digraph::undirected(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!has_spanning_tree(&g));
        let s = spectral_decompose(&g).unwrap();
        assert!(!s.has_spanning_tree);
        assert!(!s.spectral_spanning_tree());
        assert!(s.nu.is_none());
        assert_abs_diff_eq!(s.pi.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(s.pi_residual() < 1e-12);
    }

    #[test]
    fn inward_star_has_no_spanning_tree() {
        // Every leaf feeds the center; leaves hear nobody, so no root reaches them all.
        let g = Digraph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert!(!has_spanning_tree(&g));
        let s = spectral_decompose(&g).unwrap();
        assert_eq!(s.spectral_spanning_tree(), has_spanning_tree(&g));
    }

    #[test]
    fn outward_star_has_spanning_tree() {
        let g = Digraph::from_edges(4, &[(1, 0), (2, 0), (3, 0)]).unwrap();
        assert!(has_spanning_tree(&g));
        let s = spectral_decompose(&g).unwrap();
        assert!(s.spectral_spanning_tree());
        assert_eq!(s.pi, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let text = "# comment\nagents 4\n1 2\n2 3 # trailing\n3 2\n3 4\n4 3\n";
        let g: Digraph = text.parse().unwrap();
        assert_eq!(g, example_directed());
        assert_eq!(g.to_string().parse::<Digraph>().unwrap(), g);

        let err = "agents 3\n1 4\n".parse::<Digraph>().unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, column: 3, .. }), "{err}");
        let err = "1 2\n".parse::<Digraph>().unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, column: 1, .. }));
        let err = "agents 3\n2 2\n".parse::<Digraph>().unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = "agents 3\n1 x\n".parse::<Digraph>().unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, column: 3, .. }));
        assert!("".parse::<Digraph>().is_err());
        assert!("agents 1\n".parse::<Digraph>().is_err());
    }

    #[test]
    fn modal_basis_is_orthonormal() {
        let b = ModalBasis::new(&example_undirected()).unwrap();
        let gram = b.vectors.transpose() * &b.vectors;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-12);
        // Projection kills consensus vectors.
        let p = b.project(&[2.0, 2.0, 2.0, 2.0]);
        assert!(p.iter().all(|v| v.abs() < 1e-12));
        assert!(matches!(
            ModalBasis::new(&example_directed()),
            Err(Error::GraphNotUndirected)
        ));
    }
}
