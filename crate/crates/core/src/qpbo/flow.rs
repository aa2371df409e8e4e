//! Max-flow / min-cut on small networks with real capacities (Dinic).

use std::collections::VecDeque;
use std::io::{self, Write};

use crate::scalar::Scalar;

/// Residual capacities at or below this are treated as saturated.
pub const FLOW_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Arc<T> {
    pub from: usize,
    pub to: usize,
    pub capacity: T,
    /// Index of the paired reverse arc.
    pub rev: usize,
}

/// Directed network; every arc added through [`FlowNetwork::add_edge`] gets a
/// zero-capacity reverse partner.
#[derive(Debug, Clone)]
pub struct FlowNetwork<T> {
    nodes: usize,
    arcs: Vec<Arc<T>>,
    adj: Vec<Vec<usize>>,
    pub source: usize,
    pub sink: usize,
}

impl<T: Scalar> FlowNetwork<T> {
    /// `nodes` counts every node including source and sink.
    pub fn new(nodes: usize, source: usize, sink: usize) -> Self {
        assert!(source < nodes && sink < nodes && source != sink);
        FlowNetwork {
            nodes,
            arcs: Vec::new(),
            adj: vec![Vec::new(); nodes],
            source,
            sink,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn arcs(&self) -> &[Arc<T>] {
        &self.arcs
    }

    /// Adds `from -> to` with the given capacity; zero or negative capacities are ignored.
    pub fn add_edge(&mut self, from: usize, to: usize, capacity: T) {
        if capacity <= T::zero() || from == to {
            return;
        }
        let a = self.arcs.len();
        self.arcs.push(Arc {
            from,
            to,
            capacity,
            rev: a + 1,
        });
        self.arcs.push(Arc {
            from: to,
            to: from,
            capacity: T::zero(),
            rev: a,
        });
        self.adj[from].push(a);
        self.adj[to].push(a + 1);
    }

    /// Plain-text edge list, one `from to capacity` line per forward arc.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# nodes {} source {} sink {}", self.nodes, self.source, self.sink)?;
        for a in self.arcs.iter().step_by(2) {
            writeln!(w, "{} {} {}", a.from, a.to, a.capacity)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MinCut<T> {
    pub flow: T,
    /// True for nodes reachable from the source in the final residual graph.
    pub source_side: Vec<bool>,
    /// Sum of forward capacities crossing from the source side to the sink side.
    pub cut_capacity: T,
}

struct Dinic<'a, T> {
    net: &'a FlowNetwork<T>,
    residual: Vec<T>,
    level: Vec<usize>,
    next: Vec<usize>,
    eps: T,
}

impl<T: Scalar> Dinic<'_, T> {
    fn bfs(&mut self) -> bool {
        self.level.fill(usize::MAX);
        let mut q = VecDeque::new();
        self.level[self.net.source] = 0;
        q.push_back(self.net.source);
        while let Some(u) = q.pop_front() {
            for &a in &self.net.adj[u] {
                let v = self.net.arcs[a].to;
                if self.level[v] == usize::MAX && self.residual[a] > self.eps {
                    self.level[v] = self.level[u] + 1;
                    q.push_back(v);
                }
            }
        }
        self.level[self.net.sink] != usize::MAX
    }

    fn dfs(&mut self, u: usize, pushed: T) -> T {
        if u == self.net.sink {
            return pushed;
        }
        while self.next[u] < self.net.adj[u].len() {
            let a = self.net.adj[u][self.next[u]];
            let v = self.net.arcs[a].to;
            if self.residual[a] > self.eps && self.level[v] == self.level[u] + 1 {
                let got = self.dfs(v, pushed.min(self.residual[a]));
                if got > T::zero() {
                    self.residual[a] -= got;
                    let r = self.net.arcs[a].rev;
                    self.residual[r] += got;
                    return got;
                }
            }
            self.next[u] += 1;
        }
        T::zero()
    }
}

/// Exact max-flow with the min cut read off the residual graph.
pub fn max_flow<T: Scalar>(net: &FlowNetwork<T>) -> MinCut<T> {
    let mut d = Dinic {
        net,
        residual: net.arcs.iter().map(|a| a.capacity).collect(),
        level: vec![usize::MAX; net.nodes],
        next: vec![0; net.nodes],
        eps: T::of(FLOW_EPS),
    };
    let mut flow = T::zero();
    let inf = net
        .arcs
        .iter()
        .fold(T::one(), |acc, a| acc + a.capacity);
    while d.bfs() {
        d.next.fill(0);
        loop {
            let f = d.dfs(net.source, inf);
            if f <= T::zero() {
                break;
            }
            flow += f;
        }
    }
    // one last BFS after termination leaves the reachable set in `level`
    d.bfs();
    let source_side: Vec<bool> = d.level.iter().map(|&l| l != usize::MAX).collect();
    let cut_capacity = net
        .arcs
        .iter()
        .step_by(2)
        .filter(|a| source_side[a.from] && !source_side[a.to])
        .fold(T::zero(), |acc, a| acc + a.capacity);
    MinCut {
        flow,
        source_side,
        cut_capacity,
    }
}
