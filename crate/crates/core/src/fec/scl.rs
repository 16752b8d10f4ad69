//! CRC-aided successive-cancellation list decoding in the LLR domain.
//!
//! Path bookkeeping follows the classic lazy-copy layout: each layer of the
//! decoding tree keeps a pool of `n_list` arrays with reference counts, and
//! an array is only duplicated when a path that shares it has to write.

use crate::config::SclKernel;

use super::polar::PolarCode;

#[derive(Debug, Clone, PartialEq)]
pub struct SclOutput {
    /// Information bits of the selected path, CRC included.
    pub info: Vec<u8>,
    /// Leading payload bits of `info`.
    pub payload: Vec<u8>,
    /// Whether the selected path satisfies the CRC.
    pub pass: bool,
    pub path_metric: f64,
}

#[derive(Debug, Clone)]
pub struct SclDecoder {
    code: PolarCode,
    kernel: SclKernel,
}

impl SclDecoder {
    pub fn new(code: PolarCode, kernel: SclKernel) -> Self {
        SclDecoder { code, kernel }
    }

    pub fn code(&self) -> &PolarCode {
        &self.code
    }

    pub fn kernel(&self) -> SclKernel {
        self.kernel
    }

    /// Decodes channel LLRs (positive favours 0) with up to `n_list` paths.
    ///
    /// Returns the best CRC-passing survivor; when none passes, the best
    /// survivor is returned with `pass == false`.
    pub fn decode(&self, llr: &[f64], n_list: usize) -> SclOutput {
        assert_eq!(llr.len(), self.code.len(), "LLR block length");
        let mut state = ListState::new(self.code.len(), n_list.max(1), self.kernel);
        state.run(llr, self.code.frozen());

        let mut survivors: Vec<usize> = (0..state.list).filter(|&l| state.active[l]).collect();
        survivors.sort_by(|&a, &b| state.metric[a].total_cmp(&state.metric[b]).then(a.cmp(&b)));
        let extract = |l: usize| -> Vec<u8> {
            self.code
                .info_positions()
                .iter()
                .map(|&p| state.decisions[l][p])
                .collect()
        };
        let crc = self.code.crc();
        let chosen = survivors
            .iter()
            .map(|&l| (l, extract(l)))
            .find(|(_, info)| crc.check(info));
        let (path, info, pass) = match chosen {
            Some((l, info)) => (l, info, true),
            None => (survivors[0], extract(survivors[0]), false),
        };
        SclOutput {
            payload: info[..self.code.payload_len()].to_vec(),
            info,
            pass,
            path_metric: state.metric[path],
        }
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn check_node(kernel: SclKernel, a: f64, b: f64) -> f64 {
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    let min = a.abs().min(b.abs());
    match kernel {
        SclKernel::MinSum => sign * min,
        SclKernel::Exact => {
            sign * min + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
        }
    }
}

/// Metric increment for deciding `bit` on a bit channel with LLR `llr`.
#[inline]
fn penalty(kernel: SclKernel, llr: f64, bit: u8) -> f64 {
    let signed = if bit == 0 { llr } else { -llr };
    match kernel {
        SclKernel::MinSum => {
            if signed < 0.0 {
                -signed
            } else {
                0.0
            }
        }
        SclKernel::Exact => softplus(-signed),
    }
}

struct ListState {
    depth: usize,
    list: usize,
    kernel: SclKernel,
    /// `llr[layer]` holds `list` arrays of `2^(depth-layer)` entries; layer 0 is the channel.
    llr: Vec<Vec<f64>>,
    /// Partial sums, two per entry (left and right branch).
    bits: Vec<Vec<[u8; 2]>>,
    path_array: Vec<Vec<usize>>,
    refcount: Vec<Vec<usize>>,
    free_arrays: Vec<Vec<usize>>,
    free_paths: Vec<usize>,
    active: Vec<bool>,
    metric: Vec<f64>,
    decisions: Vec<Vec<u8>>,
}

impl ListState {
    fn new(len: usize, list: usize, kernel: SclKernel) -> Self {
        let depth = len.trailing_zeros() as usize;
        let layer_len = |layer: usize| 1usize << (depth - layer);
        let mut state = ListState {
            depth,
            list,
            kernel,
            llr: (0..=depth)
                .map(|l| {
                    if l == 0 {
                        Vec::new()
                    } else {
                        vec![0.0; list * layer_len(l)]
                    }
                })
                .collect(),
            bits: (0..=depth)
                .map(|l| {
                    if l == 0 {
                        Vec::new()
                    } else {
                        vec![[0, 0]; list * layer_len(l)]
                    }
                })
                .collect(),
            path_array: vec![vec![0; list]; depth + 1],
            refcount: vec![vec![0; list]; depth + 1],
            free_arrays: (0..=depth).map(|_| (0..list).rev().collect()).collect(),
            free_paths: (0..list).rev().collect(),
            active: vec![false; list],
            metric: vec![0.0; list],
            decisions: vec![vec![0; len]; list],
        };
        let first = state.free_paths.pop().expect("list is non-empty");
        state.active[first] = true;
        for layer in 1..=depth {
            let s = state.free_arrays[layer].pop().expect("pool sized to list");
            state.path_array[layer][first] = s;
            state.refcount[layer][s] = 1;
        }
        state
    }

    fn layer_len(&self, layer: usize) -> usize {
        1 << (self.depth - layer)
    }

    fn clone_path(&mut self, from: usize) -> usize {
        let to = self
            .free_paths
            .pop()
            .expect("kill before clone keeps a free path");
        self.active[to] = true;
        for layer in 1..=self.depth {
            let s = self.path_array[layer][from];
            self.path_array[layer][to] = s;
            self.refcount[layer][s] += 1;
        }
        self.metric[to] = self.metric[from];
        let (src, dst) = if from < to {
            let (lo, hi) = self.decisions.split_at_mut(to);
            (&lo[from], &mut hi[0])
        } else {
            let (lo, hi) = self.decisions.split_at_mut(from);
            (&hi[0], &mut lo[to])
        };
        dst.copy_from_slice(src);
        to
    }

    fn kill_path(&mut self, path: usize) {
        self.active[path] = false;
        self.free_paths.push(path);
        for layer in 1..=self.depth {
            let s = self.path_array[layer][path];
            self.refcount[layer][s] -= 1;
            if self.refcount[layer][s] == 0 {
                self.free_arrays[layer].push(s);
            }
        }
    }

    /// Array index of `path` at `layer`, made private to the path.
    fn writable(&mut self, layer: usize, path: usize) -> usize {
        let s = self.path_array[layer][path];
        if self.refcount[layer][s] == 1 {
            return s;
        }
        let fresh = self.free_arrays[layer].pop().expect("pool sized to list");
        let len = self.layer_len(layer);
        self.llr[layer].copy_within(s * len..(s + 1) * len, fresh * len);
        self.bits[layer].copy_within(s * len..(s + 1) * len, fresh * len);
        self.refcount[layer][s] -= 1;
        self.refcount[layer][fresh] = 1;
        self.path_array[layer][path] = fresh;
        fresh
    }

    fn calc_llr(&mut self, channel: &[f64], layer: usize, phase: usize) {
        if layer == 0 {
            return;
        }
        if phase.is_multiple_of(2) {
            self.calc_llr(channel, layer - 1, phase / 2);
        }
        let len = self.layer_len(layer);
        let kernel = self.kernel;
        for path in 0..self.list {
            if !self.active[path] {
                continue;
            }
            let dst = self.writable(layer, path);
            let (lower, upper) = self.llr.split_at_mut(layer);
            let parent: &[f64] = if layer == 1 {
                channel
            } else {
                let s = self.path_array[layer - 1][path];
                &lower[layer - 1][s * 2 * len..(s + 1) * 2 * len]
            };
            let out = &mut upper[0][dst * len..(dst + 1) * len];
            if phase.is_multiple_of(2) {
                for (beta, o) in out.iter_mut().enumerate() {
                    *o = check_node(kernel, parent[beta], parent[beta + len]);
                }
            } else {
                let partial = &self.bits[layer][dst * len..(dst + 1) * len];
                for (beta, o) in out.iter_mut().enumerate() {
                    let a = parent[beta];
                    *o = parent[beta + len] + if partial[beta][0] == 0 { a } else { -a };
                }
            }
        }
    }

    fn update_bits(&mut self, layer: usize, phase: usize) {
        debug_assert!(phase % 2 == 1);
        if layer <= 1 {
            return;
        }
        let half = phase / 2;
        let len = self.layer_len(layer);
        for path in 0..self.list {
            if !self.active[path] {
                continue;
            }
            let src = self.path_array[layer][path];
            let dst = self.writable(layer - 1, path);
            let (lower, upper) = self.bits.split_at_mut(layer);
            let child = &upper[0][src * len..(src + 1) * len];
            let parent = &mut lower[layer - 1][dst * 2 * len..(dst + 1) * 2 * len];
            for beta in 0..len {
                parent[beta][half % 2] = child[beta][0] ^ child[beta][1];
                parent[beta + len][half % 2] = child[beta][1];
            }
        }
        if half % 2 == 1 {
            self.update_bits(layer - 1, half);
        }
    }

    fn decide(&mut self, path: usize, phase: usize, bit: u8) {
        let s = self.writable(self.depth, path);
        self.bits[self.depth][s][phase % 2] = bit;
        self.decisions[path][phase] = bit;
    }

    fn leaf_llr(&self, path: usize) -> f64 {
        self.llr[self.depth][self.path_array[self.depth][path]]
    }

    fn run(&mut self, channel: &[f64], frozen: &[bool]) {
        let n = channel.len();
        if self.depth == 0 {
            // Length-1 code: the channel LLR is the bit-channel LLR.
            let llr = channel[0];
            if frozen[0] {
                self.metric[0] += penalty(self.kernel, llr, 0);
            } else {
                let bit = (llr < 0.0) as u8;
                self.metric[0] += penalty(self.kernel, llr, bit);
                self.decisions[0][0] = bit;
            }
            return;
        }
        let mut candidates: Vec<(f64, usize, u8)> = Vec::with_capacity(2 * self.list);
        for phase in 0..n {
            self.calc_llr(channel, self.depth, phase);
            if frozen[phase] {
                for path in 0..self.list {
                    if self.active[path] {
                        let llr = self.leaf_llr(path);
                        self.metric[path] += penalty(self.kernel, llr, 0);
                        self.decide(path, phase, 0);
                    }
                }
            } else {
                candidates.clear();
                for path in 0..self.list {
                    if self.active[path] {
                        let llr = self.leaf_llr(path);
                        for bit in [0u8, 1] {
                            candidates.push((
                                self.metric[path] + penalty(self.kernel, llr, bit),
                                path,
                                bit,
                            ));
                        }
                    }
                }
                candidates
                    .sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
                candidates.truncate(self.list);
                let mut keep = vec![[None::<f64>; 2]; self.list];
                for &(pm, path, bit) in &candidates {
                    keep[path][bit as usize] = Some(pm);
                }
                for path in 0..self.list {
                    if self.active[path] && keep[path] == [None, None] {
                        self.kill_path(path);
                    }
                }
                for path in 0..self.list {
                    if !self.active[path] {
                        continue;
                    }
                    match keep[path] {
                        [Some(pm0), Some(pm1)] => {
                            let twin = self.clone_path(path);
                            self.metric[path] = pm0;
                            self.decide(path, phase, 0);
                            self.metric[twin] = pm1;
                            self.decide(twin, phase, 1);
                        }
                        [Some(pm0), None] => {
                            self.metric[path] = pm0;
                            self.decide(path, phase, 0);
                        }
                        [None, Some(pm1)] => {
                            self.metric[path] = pm1;
                            self.decide(path, phase, 1);
                        }
                        [None, None] => {}
                    }
                }
            }
            if phase % 2 == 1 {
                self.update_bits(self.depth, phase);
            }
        }
    }
}
