//! The conditional of one segment's story assignment given everything else,
//! and a Markov approximation of it that admits exact forward filtering and
//! backward sampling. The approximation drops the no-revisit constraint and
//! gives new stories a fixed per-token emission in place of the collapsed
//! predictive; the sampler corrects for both with a Metropolis-Hastings step.

use alloc::borrow::Cow;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::corpus::TopicId;
use crate::math;

/// A story label inside one segment: an existing topic, or the `j`-th new
/// topic in order of first appearance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Label {
    Old(TopicId),
    New(u32),
}

pub struct SegmentModel<'a> {
    pub ids: Vec<TopicId>,
    pub w: Vec<f64>,
    pub total: f64,
    pub alpha_new: f64,
    pub rho: f64,
    pub beta: f64,
    pub vocab: usize,
    pub rows: Vec<Cow<'a, [f64]>>,
    /// Whether a story is barred from recurring once left.
    pub masked: bool,
    lookup: BTreeMap<TopicId, usize>,
}

impl<'a> SegmentModel<'a> {
    pub fn new(
        entries: Vec<(TopicId, f64, Cow<'a, [f64]>)>,
        alpha_new: f64,
        rho: f64,
        beta: f64,
        vocab: usize,
    ) -> Self {
        let mut ids = Vec::with_capacity(entries.len());
        let mut w = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        let mut lookup = BTreeMap::new();
        for (i, (k, wk, row)) in entries.into_iter().enumerate() {
            lookup.insert(k, i);
            ids.push(k);
            w.push(wk);
            rows.push(row);
        }
        let total = w.iter().sum();
        SegmentModel {
            ids,
            w,
            total,
            alpha_new,
            rho,
            beta,
            vocab,
            rows,
            masked: true,
            lookup,
        }
    }

    /// The same model without the story mask: innovations may pick any topic,
    /// including the current one and earlier ones.
    pub fn unmasked(mut self) -> Self {
        self.masked = false;
        self
    }

    pub fn num_existing(&self) -> usize {
        self.ids.len()
    }

    fn new_state(&self) -> usize {
        self.ids.len()
    }

    fn n_states(&self) -> usize {
        self.ids.len() + 1
    }

    pub fn index_of(&self, k: TopicId) -> Option<usize> {
        self.lookup.get(&k).copied()
    }

    /// Whether a story can start at all.
    pub fn feasible(&self) -> bool {
        !self.ids.is_empty() || self.alpha_new > 0.0
    }

    fn others(&self, c: usize) -> f64 {
        if !self.masked {
            self.total
        } else if self.ids.len() == 1 {
            0.0
        } else {
            (self.total - self.w[c]).max(0.0)
        }
    }

    fn d_existing(&self, c: usize) -> f64 {
        self.others(c) + self.alpha_new
    }

    fn d_new(&self) -> f64 {
        self.total + self.alpha_new
    }

    fn emit(&self, x: usize, y: u32, e: f64) -> f64 {
        if x == self.new_state() {
            e
        } else {
            self.rows[x][y as usize]
        }
    }

    fn init(&self, x: usize) -> f64 {
        let d = self.d_new();
        if x == self.new_state() {
            self.alpha_new / d
        } else {
            self.w[x] / d
        }
    }

    fn stay_existing(&self, c: usize, rho: f64) -> f64 {
        if !self.masked {
            rho + (1.0 - rho) * self.w[c] / self.d_new()
        } else if self.d_existing(c) > 0.0 {
            rho
        } else {
            1.0
        }
    }

    /// Transition mass between states, lumping new-to-new moves.
    fn trans(&self, x: usize, x2: usize, rho: f64) -> f64 {
        let nw = self.new_state();
        if x == nw {
            let d = self.d_new();
            if x2 == nw {
                rho + (1.0 - rho) * self.alpha_new / d
            } else {
                (1.0 - rho) * self.w[x2] / d
            }
        } else if x == x2 {
            self.stay_existing(x, rho)
        } else {
            let d = self.d_existing(x);
            if d <= 0.0 {
                return 0.0;
            }
            let wt = if x2 == nw { self.alpha_new } else { self.w[x2] };
            (1.0 - rho) * wt / d
        }
    }

    fn step_rho(&self, forced: bool) -> f64 {
        if forced {
            0.0
        } else {
            self.rho
        }
    }

    /// Scaled forward messages (row per token) and the cumulative log
    /// evidence of the prefix ending at each token.
    pub fn forward(&self, y: &[u32], e: &[f64], forced: &[bool]) -> (Vec<f64>, Vec<f64>) {
        let n = y.len();
        let ns = self.n_states();
        let nw = self.new_state();
        let mut f = vec![0.0; n * ns];
        let mut cum = vec![0.0; n];
        if n == 0 {
            return (f, cum);
        }
        for x in 0..ns {
            f[x] = self.init(x) * self.emit(x, y[0], e[0]);
        }
        let mut log_z = normalize(&mut f[0..ns]);
        cum[0] = log_z;
        let d_new = self.d_new();
        let mut pred = vec![0.0; ns];
        for t in 1..n {
            let rho = self.step_rho(forced[t]);
            let (prev, cur) = f.split_at_mut(t * ns);
            let prev = &prev[(t - 1) * ns..];
            let mut a = 0.0;
            for c in 0..nw {
                let d = self.d_existing(c);
                if d > 0.0 {
                    a += prev[c] / d;
                }
            }
            let from_new = prev[nw] * (1.0 - rho) / d_new;
            for c in 0..nw {
                let d = self.d_existing(c);
                let own = if d > 0.0 { prev[c] / d } else { 0.0 };
                let switch_in = (a - own).max(0.0) * (1.0 - rho) * self.w[c];
                pred[c] = prev[c] * self.stay_existing(c, rho) + switch_in + from_new * self.w[c];
            }
            pred[nw] = (1.0 - rho) * self.alpha_new * a
                + prev[nw] * (rho + (1.0 - rho) * self.alpha_new / d_new);
            let row = &mut cur[..ns];
            for x in 0..ns {
                row[x] = pred[x] * self.emit(x, y[t], e[t]);
            }
            log_z += normalize(row);
            cum[t] = log_z;
        }
        (f, cum)
    }

    /// Scaled backward messages and their log scale: the true message at
    /// token `t` is `b[t] * exp(scale[t])`.
    pub fn backward(&self, y: &[u32], e: &[f64], forced: &[bool]) -> (Vec<f64>, Vec<f64>) {
        let n = y.len();
        let ns = self.n_states();
        let nw = self.new_state();
        let mut b = vec![0.0; n * ns];
        let mut scale = vec![0.0; n];
        if n == 0 {
            return (b, scale);
        }
        b[(n - 1) * ns..]
            .iter_mut()
            .for_each(|v| *v = 1.0 / ns as f64);
        scale[n - 1] = math::ln(ns as f64);
        let d_new = self.d_new();
        let mut g = vec![0.0; ns];
        for t in (0..n - 1).rev() {
            let rho = self.step_rho(forced[t + 1]);
            let (cur, next) = b.split_at_mut((t + 1) * ns);
            let next = &next[..ns];
            for x in 0..ns {
                g[x] = self.emit(x, y[t + 1], e[t + 1]) * next[x];
            }
            let big_g: f64 = (0..nw).map(|c| self.w[c] * g[c]).sum();
            let row = &mut cur[t * ns..];
            for c in 0..nw {
                let d = self.d_existing(c);
                row[c] = if d > 0.0 {
                    self.stay_existing(c, rho) * g[c]
                        + (1.0 - rho) / d
                            * ((big_g - self.w[c] * g[c]).max(0.0) + self.alpha_new * g[nw])
                } else {
                    g[c]
                };
            }
            row[nw] =
                (rho + (1.0 - rho) * self.alpha_new / d_new) * g[nw] + (1.0 - rho) * big_g / d_new;
            scale[t] = scale[t + 1] + normalize(row);
        }
        (b, scale)
    }

    /// Log evidence of a segment starting at token `t0`, from backward messages.
    pub fn start_evidence(&self, y: &[u32], e: &[f64], b: &[f64], scale: &[f64], t0: usize) -> f64 {
        let ns = self.n_states();
        let s: f64 = (0..ns)
            .map(|x| self.init(x) * self.emit(x, y[t0], e[t0]) * b[t0 * ns + x])
            .sum();
        math::ln(s) + scale[t0]
    }

    /// Sample states for tokens `0..m` by backward sampling over forward messages.
    pub fn sample_backward<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        f: &[f64],
        forced: &[bool],
        m: usize,
    ) -> Vec<usize> {
        let ns = self.n_states();
        let mut xs = vec![0; m];
        if m == 0 {
            return xs;
        }
        xs[m - 1] =
            math::sample_weighted(rng, &f[(m - 1) * ns..m * ns]).expect("forward message has mass");
        let mut p = vec![0.0; ns];
        for t in (0..m - 1).rev() {
            let rho = self.step_rho(forced[t + 1]);
            let next = xs[t + 1];
            for x in 0..ns {
                p[x] = f[t * ns + x] * self.trans(x, next, rho);
            }
            xs[t] = math::sample_weighted(rng, &p).expect("backward step has mass");
        }
        xs
    }

    /// Sample states for tokens `t0..n` forward, using backward messages.
    pub fn sample_forward<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        y: &[u32],
        e: &[f64],
        b: &[f64],
        forced: &[bool],
        t0: usize,
    ) -> Vec<usize> {
        let n = y.len();
        let ns = self.n_states();
        let mut p: Vec<f64> = (0..ns)
            .map(|x| self.init(x) * self.emit(x, y[t0], e[t0]) * b[t0 * ns + x])
            .collect();
        let mut xs = Vec::with_capacity(n - t0);
        xs.push(math::sample_weighted(rng, &p).expect("start has mass"));
        for t in t0 + 1..n {
            let rho = self.step_rho(forced[t]);
            let prev = *xs.last().unwrap();
            for x in 0..ns {
                p[x] = self.trans(prev, x, rho) * self.emit(x, y[t], e[t]) * b[t * ns + x];
            }
            xs.push(math::sample_weighted(rng, &p).expect("forward step has mass"));
        }
        xs
    }

    /// Turn a state path into labels, splitting new-to-new transitions into
    /// continuations and fresh stories in proportion to their mass.
    pub fn label<R: Rng + ?Sized>(&self, rng: &mut R, xs: &[usize], forced: &[bool]) -> Vec<Label> {
        let nw = self.new_state();
        let mut out = Vec::with_capacity(xs.len());
        let mut next_new = 0u32;
        for (t, &x) in xs.iter().enumerate() {
            let l = if x != nw {
                Label::Old(self.ids[x])
            } else if t > 0 && xs[t - 1] == nw {
                let rho = self.step_rho(forced[t]);
                let fresh = (1.0 - rho) * self.alpha_new / self.d_new();
                if rng.random::<f64>() * (rho + fresh) < rho {
                    out[t - 1]
                } else {
                    next_new += 1;
                    Label::New(next_new - 1)
                }
            } else {
                next_new += 1;
                Label::New(next_new - 1)
            };
            out.push(l);
        }
        out
    }

    /// Log probability of a labeled path under the Markov approximation.
    pub fn approx_log_prob(&self, labels: &[Label], y: &[u32], e: &[f64], forced: &[bool]) -> f64 {
        let nw = self.new_state();
        let state = |l: Label| match l {
            Label::Old(k) => self.index_of(k),
            Label::New(_) => Some(nw),
        };
        let mut lp = 0.0;
        let mut prev: Option<(Label, usize)> = None;
        let mut next_new = 0;
        for (t, &l) in labels.iter().enumerate() {
            let Some(x) = state(l) else {
                return f64::NEG_INFINITY;
            };
            if let Label::New(j) = l {
                if prev.map(|(pl, _)| pl) != Some(l) {
                    if j != next_new {
                        return f64::NEG_INFINITY;
                    }
                    next_new += 1;
                }
            }
            let p = match prev {
                None => self.init(x),
                Some((pl, px)) => {
                    let rho = self.step_rho(forced[t]);
                    if px == nw && x == nw {
                        if pl == l {
                            rho
                        } else {
                            (1.0 - rho) * self.alpha_new / self.d_new()
                        }
                    } else {
                        self.trans(px, x, rho)
                    }
                }
            };
            lp += math::ln_prob(p) + math::ln_prob(self.emit(x, y[t], e[t]));
            prev = Some((l, x));
        }
        lp
    }

    /// Exact conditional log probability (up to a constant shared by all
    /// paths) of a labeled path: sticky continuation, innovations weighted by
    /// the rest of the corpus and barred from revisiting a story, existing
    /// topics emitting through their rows and new topics through the
    /// collapsed Dirichlet-multinomial predictive.
    pub fn target_log_prob(&self, labels: &[Label], y: &[u32], forced: &[bool]) -> f64 {
        if !self.masked {
            return self.target_unmasked(labels, y, forced);
        }
        let mut used = vec![false; self.ids.len()];
        let mut unused_left = self.ids.len();
        let mut remaining = self.total;
        let mut next_new = 0u32;
        let mut bags: Vec<BTreeMap<u32, u32>> = Vec::new();
        let mut sizes: Vec<u32> = Vec::new();
        let vb = self.vocab as f64 * self.beta;
        let mut lp = 0.0;
        for (t, &l) in labels.iter().enumerate() {
            let options = if unused_left > 0 || self.alpha_new > 0.0 {
                remaining.max(0.0) + self.alpha_new
            } else {
                0.0
            };
            let rho = if t == 0 {
                0.0
            } else {
                self.step_rho(forced[t])
            };
            let prior = if t > 0 && labels[t - 1] == l {
                if options > 0.0 {
                    rho
                } else {
                    1.0
                }
            } else {
                if options <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                match l {
                    Label::Old(k) => {
                        let Some(c) = self.index_of(k) else {
                            return f64::NEG_INFINITY;
                        };
                        if used[c] {
                            return f64::NEG_INFINITY;
                        }
                        used[c] = true;
                        unused_left -= 1;
                        let p = (1.0 - rho) * self.w[c] / options;
                        remaining = if unused_left == 0 {
                            0.0
                        } else {
                            remaining - self.w[c]
                        };
                        p
                    }
                    Label::New(j) => {
                        if j != next_new {
                            return f64::NEG_INFINITY;
                        }
                        next_new += 1;
                        bags.push(BTreeMap::new());
                        sizes.push(0);
                        (1.0 - rho) * self.alpha_new / options
                    }
                }
            };
            lp += math::ln_prob(prior);
            let e = match l {
                Label::Old(k) => self.rows[self.index_of(k).unwrap()][y[t] as usize],
                Label::New(j) => {
                    let j = j as usize;
                    let n = bags[j].entry(y[t]).or_insert(0);
                    let e = (*n as f64 + self.beta) / (sizes[j] as f64 + vb);
                    *n += 1;
                    sizes[j] += 1;
                    e
                }
            };
            lp += math::ln_prob(e);
        }
        lp
    }
}

impl SegmentModel<'_> {
    /// Unmasked conditional: every innovation draws from the category's
    /// restaurant, whose counts grow with the runs entered so far.
    fn target_unmasked(&self, labels: &[Label], y: &[u32], forced: &[bool]) -> f64 {
        let mut local = vec![0.0; self.ids.len()];
        let mut local_new: Vec<f64> = Vec::new();
        let mut entered = 0.0;
        let mut bags: Vec<BTreeMap<u32, u32>> = Vec::new();
        let mut sizes: Vec<u32> = Vec::new();
        let vb = self.vocab as f64 * self.beta;
        let mut lp = 0.0;
        for (t, &l) in labels.iter().enumerate() {
            let d = self.total + entered + self.alpha_new;
            let weight = match l {
                Label::Old(k) => match self.index_of(k) {
                    Some(c) => self.w[c] + local[c],
                    None => return f64::NEG_INFINITY,
                },
                Label::New(j) => match local_new.get(j as usize) {
                    Some(&u) => u,
                    None if j as usize == local_new.len() => self.alpha_new,
                    None => return f64::NEG_INFINITY,
                },
            };
            let rho = if t == 0 {
                0.0
            } else {
                self.step_rho(forced[t])
            };
            let stays = t > 0 && labels[t - 1] == l;
            let prior = if stays {
                rho + (1.0 - rho) * weight / d
            } else {
                (1.0 - rho) * weight / d
            };
            lp += math::ln_prob(prior);
            if !stays {
                entered += 1.0;
                match l {
                    Label::Old(k) => local[self.index_of(k).unwrap()] += 1.0,
                    Label::New(j) => {
                        if j as usize == local_new.len() {
                            local_new.push(0.0);
                            bags.push(BTreeMap::new());
                            sizes.push(0);
                        }
                        local_new[j as usize] += 1.0;
                    }
                }
            }
            let e = match l {
                Label::Old(k) => self.rows[self.index_of(k).unwrap()][y[t] as usize],
                Label::New(j) => {
                    let j = j as usize;
                    let n = bags[j].entry(y[t]).or_insert(0);
                    let e = (*n as f64 + self.beta) / (sizes[j] as f64 + vb);
                    *n += 1;
                    sizes[j] += 1;
                    e
                }
            };
            lp += math::ln_prob(e);
        }
        lp
    }
}

/// Normalize to unit sum and return the log of the old sum.
fn normalize(xs: &mut [f64]) -> f64 {
    let s: f64 = xs.iter().sum();
    if s > 0.0 {
        xs.iter_mut().for_each(|x| *x /= s);
    }
    math::ln(s)
}

/// Per-token emission for the new-story state: leave-one-out word frequency
/// within `half` tokens on either side, smoothed by `beta`. Depends on the
/// tokens alone, so the proposal built on it stays independent of the
/// current assignment.
pub fn new_story_emission(y: &[u32], vocab: usize, beta: f64, half: usize) -> Vec<f64> {
    let n = y.len();
    let vb = vocab as f64 * beta;
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    let mut out = Vec::with_capacity(n);
    let (mut lo, mut hi) = (0, 0);
    for t in 0..n {
        let (a, b) = (t.saturating_sub(half), (t + half + 1).min(n));
        while hi < b {
            *counts.entry(y[hi]).or_insert(0) += 1;
            hi += 1;
        }
        while lo < a {
            *counts.get_mut(&y[lo]).expect("word in window") -= 1;
            lo += 1;
        }
        let c = counts[&y[t]] - 1;
        out.push((c as f64 + beta) / ((b - a - 1) as f64 + vb));
    }
    out
}

/// Map topic ids of an existing assignment to labels, numbering topics the
/// model does not know as new in order of appearance.
pub fn labels_from_ids(model: &SegmentModel<'_>, z: &[TopicId]) -> Vec<Label> {
    let mut fresh: Vec<TopicId> = Vec::new();
    z.iter()
        .map(|&k| {
            if model.index_of(k).is_some() {
                Label::Old(k)
            } else {
                let j = match fresh.iter().position(|&f| f == k) {
                    Some(j) => j,
                    None => {
                        fresh.push(k);
                        fresh.len() - 1
                    }
                };
                Label::New(j as u32)
            }
        })
        .collect()
}
