//! Curve lengths, grid-graph distances and the dilation estimator.

use nalgebra::DVector;
use petgraph::algo::{astar, dijkstra};
use petgraph::graph::{NodeIndex, UnGraph};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::field::MetricField;
use crate::quadrature::gauss_legendre;

/// Gauss order used along each edge and segment.
pub const EDGE_GAUSS_ORDER: usize = 6;

/// `int_0^1 sqrt(d^T g(a + t d) d) dt` for the chord `d = b - a`.
pub fn segment_length(
    a: &DVector<f64>,
    b: &DVector<f64>,
    g: &dyn MetricField,
    order: usize,
) -> Result<f64> {
    let (t, w) = gauss_legendre(order);
    let d = b - a;
    let mut acc = 0.0;
    for (ti, wi) in t.iter().zip(&w) {
        let x = a + &d * (0.5 * (ti + 1.0));
        let q = (d.transpose() * g.value(&x)? * &d)[0];
        acc += 0.5 * wi * q.max(0.0).sqrt();
    }
    Ok(acc)
}

/// Length of a polyline: the sum of Gauss-quadrature segment lengths.
pub fn curve_length(polyline: &[DVector<f64>], g: &dyn MetricField) -> Result<f64> {
    polyline
        .windows(2)
        .map(|w| segment_length(&w[0], &w[1], g, EDGE_GAUSS_ORDER))
        .sum()
}

/// Regular grid graph on a box with all diagonal neighbors (8 in the plane, 26 in space).
#[derive(Debug, Clone)]
pub struct SampleGraph {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: usize,
    pub nodes: Vec<DVector<f64>>,
    graph: UnGraph<(), f64>,
}

fn neighbor_offsets(n: usize) -> Vec<Vec<i64>> {
    // Half of the full stencil: the first non-zero offset is positive, so each edge appears once.
    let mut out = Vec::new();
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let off: Vec<i64> = (0..n)
            .map(|_| {
                let v = (c % 3) as i64 - 1;
                c /= 3;
                v
            })
            .collect();
        if let Some(first) = off.iter().find(|v| **v != 0) {
            if *first > 0 {
                out.push(off);
            }
        }
    }
    out
}

impl SampleGraph {
    /// Builds the graph with edge lengths measured in `g`.
    pub fn build(
        g: &dyn MetricField,
        lower: Vec<f64>,
        upper: Vec<f64>,
        resolution: usize,
    ) -> Result<Self> {
        let n = lower.len();
        if !(2..=3).contains(&n) || upper.len() != n {
            return Err(Error::UnsupportedDimension(n, "2 or 3"));
        }
        if resolution < 2 {
            return Err(Error::Domain("graph resolution must be at least 2".into()));
        }
        let m = resolution;
        let h: Vec<f64> = (0..n)
            .map(|i| (upper[i] - lower[i]) / (m - 1) as f64)
            .collect();
        let count = m.pow(n as u32);
        let index_of = |idx: &[i64]| -> Option<usize> {
            let mut k = 0usize;
            for i in (0..n).rev() {
                if idx[i] < 0 || idx[i] >= m as i64 {
                    return None;
                }
                k = k * m + idx[i] as usize;
            }
            Some(k)
        };
        let multi = |mut k: usize| -> Vec<i64> {
            (0..n)
                .map(|_| {
                    let v = (k % m) as i64;
                    k /= m;
                    v
                })
                .collect()
        };
        let nodes: Vec<DVector<f64>> = (0..count)
            .map(|k| {
                let idx = multi(k);
                DVector::from_fn(n, |i, _| {
                    if idx[i] == m as i64 - 1 {
                        upper[i]
                    } else {
                        lower[i] + h[i] * idx[i] as f64
                    }
                })
            })
            .collect();
        let offsets = neighbor_offsets(n);
        let mut pairs = Vec::new();
        for k in 0..count {
            let idx = multi(k);
            for off in &offsets {
                let nb: Vec<i64> = idx.iter().zip(off).map(|(a, b)| a + b).collect();
                if let Some(j) = index_of(&nb) {
                    pairs.push((k, j));
                }
            }
        }
        let lengths = pairs
            .par_iter()
            .map(|&(a, b)| segment_length(&nodes[a], &nodes[b], g, EDGE_GAUSS_ORDER))
            .collect::<Result<Vec<f64>>>()?;
        let mut graph = UnGraph::with_capacity(count, pairs.len());
        for _ in 0..count {
            graph.add_node(());
        }
        for (&(a, b), &w) in pairs.iter().zip(&lengths) {
            if !(w > 0.0) {
                return Err(Error::Degenerate(format!("edge {a}-{b} has length {w}")));
            }
            graph.add_edge(NodeIndex::new(a), NodeIndex::new(b), w);
        }
        Ok(Self {
            lower,
            upper,
            resolution,
            nodes,
            graph,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    /// Index of the grid node nearest to `p`.
    pub fn snap(&self, p: &DVector<f64>) -> usize {
        let n = self.lower.len();
        let m = self.resolution;
        let mut k = 0usize;
        for i in (0..n).rev() {
            let h = (self.upper[i] - self.lower[i]) / (m - 1) as f64;
            let idx = ((p[i] - self.lower[i]) / h)
                .round()
                .clamp(0.0, (m - 1) as f64) as usize;
            k = k * m + idx;
        }
        k
    }

    /// Shortest-path distances from `source` to every node.
    pub fn distances_from(&self, source: usize) -> Result<Vec<f64>> {
        let map = dijkstra(&self.graph, NodeIndex::new(source), None, |e| *e.weight());
        let mut out = vec![f64::INFINITY; self.nodes.len()];
        for (node, d) in map {
            out[node.index()] = d;
        }
        if out.iter().any(|d| d.is_infinite()) {
            return Err(Error::Disconnected(format!(
                "node {source} does not reach every node"
            )));
        }
        Ok(out)
    }

    /// Shortest-path length and node chain between node indices.
    pub fn shortest_path(&self, a: usize, b: usize) -> Result<(f64, Vec<usize>)> {
        let target = NodeIndex::new(b);
        astar(
            &self.graph,
            NodeIndex::new(a),
            |n| n == target,
            |e| *e.weight(),
            |_| 0.0,
        )
        .map(|(d, path)| (d, path.into_iter().map(|n| n.index()).collect()))
        .ok_or_else(|| Error::Disconnected(format!("no path between nodes {a} and {b}")))
    }
}

/// Graph distance between the nodes nearest to `p` and `q`.
pub fn graph_distance(graph: &SampleGraph, p: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    Ok(graph.shortest_path(graph.snap(p), graph.snap(q))?.0)
}

/// `count` distinct node pairs drawn with a fixed seed.
pub fn random_pairs(node_count: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(count);
    while out.len() < count {
        let s = sample(&mut rng, node_count, 2);
        let pair = (s.index(0), s.index(1));
        if !out.contains(&pair) {
            out.push(pair);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationReport {
    pub pairs: Vec<(usize, usize)>,
    /// `|d_eps / d_0 - 1|` per pair.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

/// `max_pairs |d_eps(p, q) / d_0(p, q) - 1|` on two graphs over the same nodes.
pub fn dilation_estimate(
    g0: &SampleGraph,
    g_eps: &SampleGraph,
    pairs: &[(usize, usize)],
) -> Result<DilationReport> {
    if g0.nodes != g_eps.nodes {
        return Err(Error::Domain(
            "dilation needs both graphs on the same node set".into(),
        ));
    }
    let mut sources: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    sources.sort_unstable();
    sources.dedup();
    let tables = sources
        .par_iter()
        .map(|&s| Ok((s, g0.distances_from(s)?, g_eps.distances_from(s)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut deviations = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        let (_, d0, de) = tables.iter().find(|t| t.0 == a).expect("source table");
        if d0[b] == 0.0 {
            return Err(Error::Degenerate(format!(
                "pair ({a}, {b}) has zero distance"
            )));
        }
        deviations.push((de[b] / d0[b] - 1.0).abs());
    }
    let max_deviation = deviations.iter().cloned().fold(0.0, f64::max);
    Ok(DilationReport {
        pairs: pairs.to_vec(),
        deviations,
        max_deviation,
    })
}

/// Numerical rendering of the arc-length comparison: for a polyline `gamma`, returns
/// `(|l_eps - l_0|, integral bound, coarse bound)` with the integral bound
/// `int sum_mq |g_eps - g_0|_mq |gamma'^m gamma'^q| dt` in `g_0` arc length and the coarse bound
/// `n max|g_eps - g_0| l_0 / a_nu`.
pub fn length_deviation_bound(
    polyline: &[DVector<f64>],
    g0: &dyn MetricField,
    g_eps: &dyn MetricField,
    a_nu: f64,
) -> Result<(f64, f64, f64)> {
    let l0 = curve_length(polyline, g0)?;
    let le = curve_length(polyline, g_eps)?;
    let (t, w) = gauss_legendre(EDGE_GAUSS_ORDER);
    let n = g0.dimension();
    let mut integral = 0.0;
    let mut max_dev = 0.0f64;
    for seg in polyline.windows(2) {
        let d = &seg[1] - &seg[0];
        for (ti, wi) in t.iter().zip(&w) {
            let x = &seg[0] + &d * (0.5 * (ti + 1.0));
            let a = g0.value(&x)?;
            let diff = g_eps.value(&x)? - &a;
            max_dev = max_dev.max(diff.amax());
            let speed = (d.transpose() * &a * &d)[0].sqrt();
            if speed == 0.0 {
                continue;
            }
            // Unit g_0-speed tangent; dt in arc length is speed * dtau.
            let u = &d / speed;
            let mut s = 0.0;
            for m in 0..n {
                for q in 0..n {
                    s += diff[(m, q)].abs() * (u[m] * u[q]).abs();
                }
            }
            integral += 0.5 * wi * speed * s;
        }
    }
    Ok(((le - l0).abs(), integral, n as f64 * max_dev * l0 / a_nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::field::ConstantMetric;

    fn v(a: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(a)
    }

    #[test]
    fn euclidean_lengths() {
        let g = ConstantMetric::euclidean(2);
        assert!((curve_length(&[v(&[0.0, 0.0]), v(&[1.0, 0.0])], &g).unwrap() - 1.0).abs() < 1e-14);
        let g4 = ConstantMetric::scaled_identity(2, 4.0);
        assert!(
            (curve_length(&[v(&[0.0, 0.0]), v(&[0.3, 0.4])], &g4).unwrap() - 1.0).abs() < 1e-14
        );
    }

    #[test]
    fn stencil_sizes() {
        assert_eq!(neighbor_offsets(2).len(), 4);
        assert_eq!(neighbor_offsets(3).len(), 13);
    }

    #[test]
    fn axis_aligned_grid_distance_is_exact() {
        let g = ConstantMetric::euclidean(2);
        let graph = SampleGraph::build(&g, vec![-1.0, -1.0], vec![1.0, 1.0], 11).unwrap();
        let d = graph_distance(&graph, &v(&[-1.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        let d = graph_distance(&graph, &v(&[-1.0, -1.0]), &v(&[1.0, 1.0])).unwrap();
        assert!((d - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn scaled_metric_doubles_distances() {
        let g = ConstantMetric::euclidean(2);
        let g4 = ConstantMetric::scaled_identity(2, 4.0);
        let a = SampleGraph::build(&g, vec![0.0, 0.0], vec![1.0, 1.0], 6).unwrap();
        let b = SampleGraph::build(&g4, vec![0.0, 0.0], vec![1.0, 1.0], 6).unwrap();
        let pairs = random_pairs(a.node_count(), 10, 42);
        let r = dilation_estimate(&a, &b, &pairs).unwrap();
        assert!((r.max_deviation - 1.0).abs() < 1e-12);
        let same = dilation_estimate(&a, &a, &pairs).unwrap();
        assert_eq!(same.max_deviation, 0.0);
    }
}
