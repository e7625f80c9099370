//! Layered acyclic digraph over partial weight sums. Layer `i` holds one
//! vertex per reachable weight coordinate after players `1..=i` have chosen
//! to join or stay out; `A_0` arcs skip a player (length 0), `A_i` arcs add
//! player `i`'s weight vector (length `x_i`). Winning coalitions are in
//! bijection with source-to-target paths, so the minimum payoff over winning
//! coalitions is a one-pass shortest-path DP.

use std::fmt::Write as _;

use thiserror::Error;

use crate::games::{Coalition, Combine, VectorVotingGame, WeightedVotingGame};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DagError {
    #[error("vertex count {vertices} exceeds cap {cap}")]
    SizeCapExceeded { vertices: u128, cap: u64 },
    #[error("payoff vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct DagOptions {
    /// Upper bound on `(n+1) * prod(W_k + 1)`.
    pub vertex_cap: u64,
}

impl Default for DagOptions {
    fn default() -> Self {
        Self { vertex_cap: 50_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct LayeredDag {
    n: usize,
    /// `W_k` per rule; length is the game dimension `k`.
    dims: Vec<u64>,
    quotas: Vec<u64>,
    combine: Combine,
    /// Per player, per rule weight (the shift applied by that player's arcs).
    weights: Vec<Vec<u64>>,
    /// Linearized shift per player: `sum_k w_ki * strides[k]`.
    shift_index: Vec<usize>,
    strides: Vec<usize>,
    layer_len: usize,
    /// Liveness bitset over `(n+1) * layer_len` vertices.
    live: Vec<u64>,
    pruned: bool,
}

impl LayeredDag {
    pub fn build(game: &WeightedVotingGame, opts: &DagOptions) -> Result<Self, DagError> {
        Self::build_parts(
            game.n(),
            vec![game.total_weight()],
            vec![game.quota()],
            Combine::Intersection,
            game.weights().iter().map(|&w| vec![w]).collect(),
            opts,
        )
    }

    pub fn build_vector(vg: &VectorVotingGame, opts: &DagOptions) -> Result<Self, DagError> {
        let dims: Vec<u64> = vg.rules().iter().map(|g| g.total_weight()).collect();
        let quotas: Vec<u64> = vg.rules().iter().map(|g| g.quota()).collect();
        let weights: Vec<Vec<u64>> = (0..vg.n())
            .map(|i| vg.rules().iter().map(|g| g.weights()[i]).collect())
            .collect();
        Self::build_parts(vg.n(), dims, quotas, vg.combine(), weights, opts)
    }

    fn build_parts(
        n: usize,
        dims: Vec<u64>,
        quotas: Vec<u64>,
        combine: Combine,
        weights: Vec<Vec<u64>>,
        opts: &DagOptions,
    ) -> Result<Self, DagError> {
        let mut layer_len: u128 = 1;
        for &d in &dims {
            layer_len *= d as u128 + 1;
        }
        let vertices = layer_len * (n as u128 + 1);
        if vertices > opts.vertex_cap as u128 {
            return Err(DagError::SizeCapExceeded { vertices, cap: opts.vertex_cap });
        }
        let layer_len = layer_len as usize;
        let mut strides = vec![0usize; dims.len()];
        let mut acc = 1usize;
        for k in (0..dims.len()).rev() {
            strides[k] = acc;
            acc *= dims[k] as usize + 1;
        }
        let shift_index = weights
            .iter()
            .map(|w| {
                w.iter()
                    .zip(&strides)
                    .map(|(&wk, &s)| wk as usize * s)
                    .sum()
            })
            .collect();
        let total_bits = (n + 1) * layer_len;
        let words = total_bits.div_ceil(64);
        let mut live = vec![u64::MAX; words];
        if total_bits % 64 != 0 {
            if let Some(last) = live.last_mut() {
                *last = (1u64 << (total_bits % 64)) - 1;
            }
        }
        Ok(Self {
            n,
            dims,
            quotas,
            combine,
            weights,
            shift_index,
            strides,
            layer_len,
            live,
            pruned: false,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.dims.len()
    }

    pub fn layer_len(&self) -> usize {
        self.layer_len
    }

    pub fn is_pruned(&self) -> bool {
        self.pruned
    }

    pub fn player_weight(&self, player: usize) -> &[u64] {
        &self.weights[player]
    }

    /// Decode a linear coordinate into its per-rule weight components.
    pub fn decode_coord(&self, coord: usize) -> Vec<u64> {
        let mut rest = coord;
        self.strides
            .iter()
            .zip(&self.dims)
            .map(|(&stride, &dim)| {
                let a = (rest / stride) as u64 % (dim + 1);
                rest %= stride;
                a
            })
            .collect()
    }

    fn vertex_bit(&self, layer: usize, coord: usize) -> usize {
        layer * self.layer_len + coord
    }

    pub fn is_live(&self, layer: usize, coord: usize) -> bool {
        let b = self.vertex_bit(layer, coord);
        self.live[b / 64] >> (b % 64) & 1 == 1
    }

    fn set_live(live: &mut [u64], bit: usize, value: bool) {
        if value {
            live[bit / 64] |= 1 << (bit % 64);
        } else {
            live[bit / 64] &= !(1 << (bit % 64));
        }
    }

    /// Walk layer coordinates in ascending linear order, keeping the decoded
    /// coordinate vector in step.
    fn for_each_coord(&self, mut f: impl FnMut(usize, &[u64])) {
        let mut alpha = vec![0u64; self.dims.len()];
        for c in 0..self.layer_len {
            f(c, &alpha);
            for k in (0..alpha.len()).rev() {
                if alpha[k] < self.dims[k] {
                    alpha[k] += 1;
                    break;
                }
                alpha[k] = 0;
            }
        }
    }

    fn is_target_alpha(&self, alpha: &[u64]) -> bool {
        match self.combine {
            Combine::Intersection => alpha
                .iter()
                .zip(&self.quotas)
                .all(|(&a, &q)| a >= q),
            Combine::Union => alpha
                .iter()
                .zip(&self.quotas)
                .any(|(&a, &q)| a >= q),
        }
    }

    /// Live target coordinates (layer `n`), ascending.
    pub fn target_coords(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_coord(|c, alpha| {
            if self.is_target_alpha(alpha) && self.is_live(self.n, c) {
                out.push(c);
            }
        });
        out
    }

    /// Whether player `i` (0-based) can be taken from tail coordinate `alpha`,
    /// i.e. the shifted head stays inside the grid.
    fn take_fits(&self, player: usize, alpha: &[u64]) -> bool {
        self.weights[player]
            .iter()
            .zip(alpha)
            .zip(&self.dims)
            .all(|((&w, &a), &d)| a + w <= d)
    }

    /// All `A_0` arcs between live endpoints: `(head_layer, coord)` denotes
    /// the arc `(head_layer-1, coord) -> (head_layer, coord)`. Layer-major,
    /// coordinate-ascending order.
    pub fn for_each_a0_arc(&self, mut f: impl FnMut(usize, usize)) {
        for layer in 1..=self.n {
            for c in 0..self.layer_len {
                if self.is_live(layer - 1, c) && self.is_live(layer, c) {
                    f(layer, c);
                }
            }
        }
    }

    /// All `A_i` arcs between live endpoints: `(player_layer, tail, head)`
    /// denotes `(player_layer-1, tail) -> (player_layer, head)` owned by
    /// player `player_layer` (1-based). Layer-major, tail-ascending order.
    pub fn for_each_ai_arc(&self, mut f: impl FnMut(usize, usize, usize)) {
        for layer in 1..=self.n {
            let player = layer - 1;
            let shift = self.shift_index[player];
            self.for_each_coord(|tail, alpha| {
                if self.take_fits(player, alpha) {
                    let head = tail + shift;
                    if self.is_live(layer - 1, tail) && self.is_live(layer, head) {
                        f(layer, tail, head);
                    }
                }
            });
        }
    }

    pub fn live_vertex_count(&self) -> u64 {
        self.live
            .iter()
            .map(|w| w.count_ones() as u64)
            .sum::<u64>()
            .min(((self.n + 1) * self.layer_len) as u64)
    }

    /// `(|A_0|, [|A_1|, ..., |A_n|])` over live endpoints.
    pub fn arc_group_sizes(&self) -> (u64, Vec<u64>) {
        let mut a0 = 0u64;
        self.for_each_a0_arc(|_, _| a0 += 1);
        let mut ai = vec![0u64; self.n];
        self.for_each_ai_arc(|layer, _, _| ai[layer - 1] += 1);
        (a0, ai)
    }

    /// Restrict liveness to vertices on at least one source-to-target path.
    /// The path set, and hence every DP value, is unchanged.
    pub fn prune(&self) -> LayeredDag {
        let total_bits = (self.n + 1) * self.layer_len;
        let words = total_bits.div_ceil(64);
        let mut forward = vec![0u64; words];
        Self::set_live(&mut forward, self.vertex_bit(0, 0), self.is_live(0, 0));
        for layer in 1..=self.n {
            let player = layer - 1;
            let shift = self.shift_index[player];
            let prev_base = (layer - 1) * self.layer_len;
            let base = layer * self.layer_len;
            self.for_each_coord(|tail, alpha| {
                let tail_bit = prev_base + tail;
                if forward[tail_bit / 64] >> (tail_bit % 64) & 1 == 0 {
                    return;
                }
                if self.is_live(layer, tail) {
                    Self::set_live(&mut forward, base + tail, true);
                }
                if self.take_fits(player, alpha) {
                    let head = tail + shift;
                    if self.is_live(layer, head) {
                        Self::set_live(&mut forward, base + head, true);
                    }
                }
            });
        }
        let mut backward = vec![0u64; words];
        {
            let base = self.n * self.layer_len;
            self.for_each_coord(|c, alpha| {
                if self.is_target_alpha(alpha) && self.is_live(self.n, c) {
                    Self::set_live(&mut backward, base + c, true);
                }
            });
        }
        for layer in (1..=self.n).rev() {
            let player = layer - 1;
            let shift = self.shift_index[player];
            let prev_base = (layer - 1) * self.layer_len;
            let base = layer * self.layer_len;
            self.for_each_coord(|tail, alpha| {
                if !self.is_live(layer - 1, tail) {
                    return;
                }
                let mut reaches = {
                    let b = base + tail;
                    self.is_live(layer, tail) && backward[b / 64] >> (b % 64) & 1 == 1
                };
                if !reaches && self.take_fits(player, alpha) {
                    let head = tail + shift;
                    let b = base + head;
                    reaches = self.is_live(layer, head) && backward[b / 64] >> (b % 64) & 1 == 1;
                }
                if reaches {
                    Self::set_live(&mut backward, prev_base + tail, true);
                }
            });
        }
        let live: Vec<u64> = self
            .live
            .iter()
            .zip(&forward)
            .zip(&backward)
            .map(|((&l, &f), &b)| l & f & b)
            .collect();
        LayeredDag { live, pruned: true, ..self.clone() }
    }

    /// Shortest source-to-target path length under arc lengths
    /// (`A_0` free, `A_i` costs `x_i`), with a coalition realizing it.
    /// Equals `min { sum_{i in S} x_i : S winning }`.
    pub fn min_winning_payoff<S: Scalar>(&self, x: &[S]) -> Result<(S, Coalition), DagError> {
        if x.len() != self.n {
            return Err(DagError::DimensionMismatch { expected: self.n, got: x.len() });
        }
        // took[layer * layer_len + coord] = arrived via the owning player's arc
        let total_bits = (self.n + 1) * self.layer_len;
        let mut took = vec![0u64; total_bits.div_ceil(64)];
        let mut dist: Vec<Option<S>> = vec![None; self.layer_len];
        if self.is_live(0, 0) {
            dist[0] = Some(S::zero());
        }
        let mut next: Vec<Option<S>> = vec![None; self.layer_len];
        for layer in 1..=self.n {
            let player = layer - 1;
            let shift = self.shift_index[player];
            for d in next.iter_mut() {
                *d = None;
            }
            self.for_each_coord(|tail, alpha| {
                let Some(prev) = dist[tail].clone() else { return };
                if !self.is_live(layer - 1, tail) {
                    return;
                }
                if self.is_live(layer, tail) {
                    // <= so the skip arc wins exact ties regardless of
                    // whether the competing take arc was scanned first
                    let better = match &next[tail] {
                        Some(cur) => prev <= *cur,
                        None => true,
                    };
                    if better {
                        next[tail] = Some(prev.clone());
                        Self::set_live(&mut took, layer * self.layer_len + tail, false);
                    }
                }
                if self.take_fits(player, alpha) {
                    let head = tail + shift;
                    if self.is_live(layer, head) {
                        let cand = prev + x[player].clone();
                        // strict improvement only: ties prefer the skip arc
                        let better = match &next[head] {
                            Some(cur) => cand < *cur,
                            None => true,
                        };
                        if better {
                            next[head] = Some(cand);
                            Self::set_live(&mut took, layer * self.layer_len + head, true);
                        }
                    }
                }
            });
            std::mem::swap(&mut dist, &mut next);
        }
        let mut best: Option<(S, usize)> = None;
        self.for_each_coord(|c, alpha| {
            if self.is_target_alpha(alpha) && self.is_live(self.n, c) {
                if let Some(d) = dist[c].clone() {
                    let better = match &best {
                        Some((cur, _)) => d < *cur,
                        None => true,
                    };
                    if better {
                        best = Some((d, c));
                    }
                }
            }
        });
        let (value, mut coord) = best.expect("target unreachable in a valid game");
        let mut witness = Coalition::empty(self.n);
        for layer in (1..=self.n).rev() {
            let player = layer - 1;
            let bit = layer * self.layer_len + coord;
            if took[bit / 64] >> (bit % 64) & 1 == 1 {
                witness.insert(player);
                coord -= self.shift_index[player];
            }
        }
        Ok((value, witness))
    }

    /// Number of source-to-target paths; equals the number of winning
    /// coalitions of the underlying game.
    pub fn count_paths(&self) -> u128 {
        let mut count = vec![0u128; self.layer_len];
        if self.is_live(0, 0) {
            count[0] = 1;
        }
        let mut next = vec![0u128; self.layer_len];
        for layer in 1..=self.n {
            let player = layer - 1;
            let shift = self.shift_index[player];
            for c in next.iter_mut() {
                *c = 0;
            }
            self.for_each_coord(|tail, alpha| {
                if count[tail] == 0 || !self.is_live(layer - 1, tail) {
                    return;
                }
                if self.is_live(layer, tail) {
                    next[tail] += count[tail];
                }
                if self.take_fits(player, alpha) {
                    let head = tail + shift;
                    if self.is_live(layer, head) {
                        next[head] += count[tail];
                    }
                }
            });
            std::mem::swap(&mut count, &mut next);
        }
        let mut total = 0u128;
        self.for_each_coord(|c, alpha| {
            if self.is_target_alpha(alpha) && self.is_live(self.n, c) {
                total += count[c];
            }
        });
        total
    }

    /// DOT dump for debugging small instances.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph layered {\n  rankdir=LR;\n");
        for layer in 0..=self.n {
            self.for_each_coord(|c, alpha| {
                if self.is_live(layer, c) {
                    let coords: Vec<String> = alpha.iter().map(|a| a.to_string()).collect();
                    let _ = writeln!(
                        out,
                        "  v{}_{} [label=\"{},{}\"];",
                        layer,
                        c,
                        layer,
                        coords.join(",")
                    );
                }
            });
        }
        self.for_each_a0_arc(|layer, c| {
            let _ = writeln!(out, "  v{}_{} -> v{}_{} [label=\"skip\"];", layer - 1, c, layer, c);
        });
        self.for_each_ai_arc(|layer, tail, head| {
            let _ = writeln!(
                out,
                "  v{}_{} -> v{}_{} [label=\"{}\"];",
                layer - 1,
                tail,
                layer,
                head,
                layer
            );
        });
        out.push_str("}\n");
        out
    }
}
