//! Quadratic pseudo-boolean minimization by roof duality.
//!
//! Each variable gets a literal node and a complement node in a doubled flow network.
//! Every term is split into non-negative costs and inserted twice at half weight: once
//! on the literal nodes and once, mirrored, on the complements. Submodular pair terms
//! become arcs between literals; supermodular ones connect a literal to a complement.
//! After a max-flow, a variable whose two copies land on opposite sides of the minimum
//! cut is labeled; the rest stay unlabeled. Labeled variables are weakly persistent:
//! some global minimizer agrees with all of them.

mod flow;

use std::collections::BTreeMap;

pub use flow::{max_flow, Arc, FlowNetwork, MinCut, FLOW_EPS};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hard limit for [`exhaustive_solve`].
pub const EXHAUSTIVE_LIMIT: usize = 25;

/// `constant + Σ unary[i][x_i] + Σ pairwise[(i,j)][x_i][x_j]` over binary `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoBooleanFunction<T> {
    n: usize,
    unary: Vec<[T; 2]>,
    pairwise: BTreeMap<(usize, usize), [[T; 2]; 2]>,
    constant: T,
}

impl<T: Scalar> PseudoBooleanFunction<T> {
    pub fn new(n: usize) -> Self {
        PseudoBooleanFunction {
            n,
            unary: vec![[T::zero(); 2]; n],
            pairwise: BTreeMap::new(),
            constant: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn constant(&self) -> T {
        self.constant
    }

    pub fn unary(&self, i: usize) -> [T; 2] {
        self.unary[i]
    }

    pub fn pairwise(&self) -> impl Iterator<Item = ((usize, usize), &[[T; 2]; 2])> {
        self.pairwise.iter().map(|(&k, v)| (k, v))
    }

    pub fn add_constant(&mut self, c: T) -> Result<()> {
        check_finite(&[c])?;
        self.constant += c;
        Ok(())
    }

    /// Adds `e0` to the cost of `x_i = 0` and `e1` to the cost of `x_i = 1`.
    pub fn add_unary(&mut self, i: usize, e0: T, e1: T) -> Result<()> {
        if i >= self.n {
            return Err(Error::InvalidTerm(format!("node {i} out of range {}", self.n)));
        }
        check_finite(&[e0, e1])?;
        self.unary[i][0] += e0;
        self.unary[i][1] += e1;
        Ok(())
    }

    /// Adds a 2x2 table indexed `[x_i][x_j]`. Keys are stored with `i < j`.
    pub fn add_pairwise(&mut self, i: usize, j: usize, table: [[T; 2]; 2]) -> Result<()> {
        if i == j || i >= self.n || j >= self.n {
            return Err(Error::InvalidTerm(format!("bad pair ({i}, {j}) for n = {}", self.n)));
        }
        check_finite(&[table[0][0], table[0][1], table[1][0], table[1][1]])?;
        let (key, t) = if i < j {
            ((i, j), table)
        } else {
            ((j, i), [[table[0][0], table[1][0]], [table[0][1], table[1][1]]])
        };
        let slot = self.pairwise.entry(key).or_insert([[T::zero(); 2]; 2]);
        for a in 0..2 {
            for b in 0..2 {
                slot[a][b] += t[a][b];
            }
        }
        Ok(())
    }

    pub fn energy(&self, x: &[bool]) -> Result<T> {
        if x.len() != self.n {
            return Err(Error::LabelingLength {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self.energy_unchecked(x))
    }

    fn energy_unchecked(&self, x: &[bool]) -> T {
        let mut e = self.constant;
        for (u, &xi) in self.unary.iter().zip(x) {
            e += u[xi as usize];
        }
        for (&(i, j), t) in &self.pairwise {
            e += t[x[i] as usize][x[j] as usize];
        }
        e
    }

    /// True when every pair term satisfies `θ(0,0) + θ(1,1) <= θ(0,1) + θ(1,0)`.
    pub fn is_submodular(&self) -> bool {
        self.pairwise
            .values()
            .all(|t| t[0][0] + t[1][1] <= t[0][1] + t[1][0])
    }
}

fn check_finite<T: Scalar>(vals: &[T]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidTerm("non-finite coefficient".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Zero,
    One,
    Unlabeled,
}

impl Label {
    pub fn value(self) -> Option<bool> {
        match self {
            Label::Zero => Some(false),
            Label::One => Some(true),
            Label::Unlabeled => None,
        }
    }
}

impl From<bool> for Label {
    fn from(b: bool) -> Self {
        if b {
            Label::One
        } else {
            Label::Zero
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialLabeling(pub Vec<Label>);

impl PartialLabeling {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn unlabeled(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Label::Unlabeled)
            .map(|(i, _)| i)
            .collect()
    }

    /// Overwrites `x` with every persistent label.
    pub fn apply(&self, x: &mut [bool]) {
        for (xi, l) in x.iter_mut().zip(&self.0) {
            if let Some(v) = l.value() {
                *xi = v;
            }
        }
    }
}

/// Enumerates all labelings in counting order (node `i` is bit `i`); ties go to the
/// first labeling found, so `(1, 0)` wins over `(0, 1)`.
pub fn exhaustive_solve<T: Scalar>(f: &PseudoBooleanFunction<T>) -> Result<(Vec<bool>, T)> {
    if f.n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooManyVariables(f.n, EXHAUSTIVE_LIMIT));
    }
    let free: Vec<usize> = (0..f.n).collect();
    let mut x = vec![false; f.n];
    let e = search_free(f, &mut x, &free);
    Ok((x, e))
}

/// Minimizes over the `free` positions of `x`, leaving the others untouched.
fn search_free<T: Scalar>(f: &PseudoBooleanFunction<T>, x: &mut [bool], free: &[usize]) -> T {
    let k = free.len();
    let mut best = T::infinity();
    let mut best_mask = 0u64;
    for mask in 0..(1u64 << k) {
        for (b, &i) in free.iter().enumerate() {
            x[i] = (mask >> b) & 1 == 1;
        }
        let e = f.energy_unchecked(x);
        if e < best {
            best = e;
            best_mask = mask;
        }
    }
    for (b, &i) in free.iter().enumerate() {
        x[i] = (best_mask >> b) & 1 == 1;
    }
    best
}

/// Builds the doubled roof-duality network. Node `i` is literal `x_i`, node `n + i`
/// its complement, then source `2n` and sink `2n + 1`. A literal on the source side
/// means `x_i = 0`.
pub fn build_network<T: Scalar>(f: &PseudoBooleanFunction<T>) -> FlowNetwork<T> {
    let n = f.n;
    let (s, t) = (2 * n, 2 * n + 1);
    let comp = |i: usize| n + i;
    let mut net = FlowNetwork::new(2 * n + 2, s, t);
    let half = T::of(0.5);

    // cost(x_i = 1) - cost(x_i = 0), after folding pair terms into linear parts
    let mut delta: Vec<T> = f.unary.iter().map(|u| u[1] - u[0]).collect();
    for (&(i, j), tab) in &f.pairwise {
        let (a, b, c, d) = (tab[0][0], tab[0][1], tab[1][0], tab[1][1]);
        let w = a - b - c + d;
        delta[i] += c - a;
        if w <= T::zero() {
            // a + (c-a) x_i + (d-c) x_j + (-w) [x_i=0][x_j=1]
            delta[j] += d - c;
            let cap = -w * half;
            net.add_edge(i, j, cap);
            net.add_edge(comp(j), comp(i), cap);
        } else {
            // a + (c-a) x_i + (b-a) x_j + w [x_i=1][x_j=1]
            delta[j] += b - a;
            let cap = w * half;
            net.add_edge(comp(j), i, cap);
            net.add_edge(comp(i), j, cap);
        }
    }
    for (i, &dl) in delta.iter().enumerate() {
        if dl > T::zero() {
            net.add_edge(s, i, dl * half);
            net.add_edge(comp(i), t, dl * half);
        } else if dl < T::zero() {
            net.add_edge(i, t, -dl * half);
            net.add_edge(s, comp(i), -dl * half);
        }
    }
    net
}

/// Roof-duality partial labeling.
pub fn solve_roof_duality<T: Scalar>(f: &PseudoBooleanFunction<T>) -> PartialLabeling {
    let n = f.n;
    if n == 0 {
        return PartialLabeling(Vec::new());
    }
    let net = build_network(f);
    let cut = max_flow(&net);
    PartialLabeling(
        (0..n)
            .map(|i| match (cut.source_side[i], cut.source_side[n + i]) {
                (true, false) => Label::Zero,
                (false, true) => Label::One,
                _ => Label::Unlabeled,
            })
            .collect(),
    )
}

/// How unlabeled variables are filled in after roof duality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompletionStrategy {
    /// Up to this many unlabeled variables are searched exhaustively; beyond it a
    /// greedy pass is used.
    pub exhaustive_limit: usize,
}

impl Default for CompletionStrategy {
    fn default() -> Self {
        CompletionStrategy {
            exhaustive_limit: 20,
        }
    }
}

/// Fills unlabeled variables, keeping every persistent label.
///
/// Greedy mode visits unlabeled nodes by descending `|θ_i(0) - θ_i(1)|` and picks the
/// label with the lower energy given the labels fixed so far; pair terms with
/// not-yet-visited nodes are ignored.
pub fn complete_labeling<T: Scalar>(
    f: &PseudoBooleanFunction<T>,
    partial: &PartialLabeling,
    strategy: CompletionStrategy,
) -> Result<Vec<bool>> {
    if partial.len() != f.n {
        return Err(Error::LabelingLength {
            expected: f.n,
            got: partial.len(),
        });
    }
    let mut x: Vec<bool> = partial.0.iter().map(|l| l.value().unwrap_or(false)).collect();
    let free = partial.unlabeled();
    if free.is_empty() {
        return Ok(x);
    }
    if free.len() <= strategy.exhaustive_limit.min(63) {
        search_free(f, &mut x, &free);
        return Ok(x);
    }

    let mut order = free.clone();
    order.sort_by(|&a, &b| {
        let da = (f.unary[a][0] - f.unary[a][1]).abs();
        let db = (f.unary[b][0] - f.unary[b][1]).abs();
        db.partial_cmp(&da).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let mut fixed: Vec<bool> = partial.0.iter().map(|l| *l != Label::Unlabeled).collect();
    let mut neighbors: Vec<Vec<(usize, bool, [[T; 2]; 2])>> = vec![Vec::new(); f.n];
    for (&(i, j), t) in &f.pairwise {
        neighbors[i].push((j, true, *t));
        neighbors[j].push((i, false, *t));
    }
    for i in order {
        let mut cost = f.unary[i];
        for &(j, i_first, t) in &neighbors[i] {
            if !fixed[j] {
                continue;
            }
            let xj = x[j] as usize;
            for (v, c) in cost.iter_mut().enumerate() {
                *c += if i_first { t[v][xj] } else { t[xj][v] };
            }
        }
        x[i] = cost[1] < cost[0];
        fixed[i] = true;
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub labeling: Vec<bool>,
    pub energy: T,
    pub partial: PartialLabeling,
}

/// Roof duality followed by completion.
pub fn minimize<T: Scalar>(f: &PseudoBooleanFunction<T>, strategy: CompletionStrategy) -> Solution<T> {
    let partial = solve_roof_duality(f);
    let labeling = complete_labeling(f, &partial, strategy).expect("partial labeling has length n");
    let energy = f.energy_unchecked(&labeling);
    Solution {
        labeling,
        energy,
        partial,
    }
}
