//! k-best distinct word-sequence search over the lexicon x HMM x n-gram space.
//!
//! Every search state keeps up to `k` partial hypotheses with pairwise
//! distinct word histories (per language-model context for trigrams). Word
//! histories are hash-consed in a prefix tree so equality is an id compare.
//!
//! Exact mode prunes with an admissible bound: a backward 1-best pass gives
//! the best possible completion score from every (frame, state), and a
//! partial hypothesis survives only if it can still finish within `margin` of
//! the global optimum. If fewer than `k` complete hypotheses survive, the
//! search is repeated with a wider margin, ending with no pruning at all, so
//! the returned list is always the true top-k.

use std::cmp::Ordering;

use rustc_hash::FxHashMap;

use crate::am::{AcousticModel, LanguageModel};
use crate::corpus::{Lexicon, Symbol, WordId};

const ROOT: u32 = 0;
const NO_WORD: u32 = u32::MAX;
const EXACT_MARGINS: [f64; 5] = [5.0, 10.0, 20.0, 80.0, f64::INFINITY];

#[derive(Debug, Clone, Copy)]
struct Entry {
    score: f64,
    hist: u32,
}

/// Prefix tree of word histories.
struct Histories {
    nodes: Vec<(u32, u32)>,
    index: FxHashMap<(u32, u32), u32>,
}

impl Histories {
    fn new() -> Self {
        Self {
            nodes: vec![(ROOT, NO_WORD)],
            index: FxHashMap::default(),
        }
    }

    fn intern(&mut self, parent: u32, word: u32) -> u32 {
        let next = self.nodes.len() as u32;
        *self.index.entry((parent, word)).or_insert_with(|| {
            self.nodes.push((parent, word));
            next
        })
    }

    /// The word before the last word of `h`.
    #[inline]
    fn prev_word(&self, h: u32) -> Option<WordId> {
        let parent = self.nodes[h as usize].0;
        (parent != ROOT).then(|| self.nodes[parent as usize].1)
    }

    fn words(&self, mut h: u32) -> Vec<WordId> {
        let mut out = Vec::new();
        while h != ROOT {
            let (p, w) = self.nodes[h as usize];
            out.push(w);
            h = p;
        }
        out.reverse();
        out
    }

    fn cmp(&self, a: u32, b: u32) -> Ordering {
        if a == b {
            Ordering::Equal
        } else {
            self.words(a).cmp(&self.words(b))
        }
    }

    /// Higher score first; equal scores in lexicographic word order.
    fn rank(&self, a: &Entry, b: &Entry) -> Ordering {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| self.cmp(a.hist, b.hist))
    }
}

/// The flattened search graph: every word's phone states laid end to end.
pub(crate) struct Graph<'a> {
    am: &'a AcousticModel,
    lm: &'a LanguageModel,
    model_state: Vec<usize>,
    word: Vec<u32>,
    first: Vec<bool>,
    last: Vec<bool>,
    word_first: Vec<usize>,
    word_last: Vec<usize>,
    vocab: usize,
    start_lm: Vec<f64>,
    /// Upper bounds over any older history: `[v * V + w]`, and the sentence end.
    /// For bigram and unigram models these are the exact transition scores.
    trans_bound: Vec<f64>,
    end_bound: Vec<f64>,
}

impl<'a> Graph<'a> {
    pub(crate) fn new(am: &'a AcousticModel, lm: &'a LanguageModel, lexicon: &Lexicon) -> Self {
        let vocab = lexicon.len();
        let mut g = Graph {
            am,
            lm,
            model_state: Vec::new(),
            word: Vec::new(),
            first: Vec::new(),
            last: Vec::new(),
            word_first: Vec::with_capacity(vocab),
            word_last: Vec::with_capacity(vocab),
            vocab,
            start_lm: Vec::with_capacity(vocab),
            trans_bound: vec![f64::NEG_INFINITY; vocab * vocab],
            end_bound: vec![f64::NEG_INFINITY; vocab],
        };
        for w in 0..vocab {
            g.word_first.push(g.model_state.len());
            for &p in lexicon.pronunciation(w as WordId) {
                for s in 0..am.states_per_phone() {
                    g.model_state.push(am.state_index(p, s));
                    g.word.push(w as u32);
                    g.first.push(false);
                    g.last.push(false);
                }
            }
            let (f, l) = (g.word_first[w], g.model_state.len() - 1);
            g.first[f] = true;
            g.last[l] = true;
            g.word_last.push(l);
        }

        let start_ctx = lm.context(None, None);
        g.start_lm = (0..vocab).map(|w| lm.log_prob_in(start_ctx, w)).collect();
        let older: Vec<Option<WordId>> = if lm.order >= 3 {
            std::iter::once(None).chain((0..vocab as WordId).map(Some)).collect()
        } else {
            vec![None]
        };
        for v in 0..vocab {
            for &u in &older {
                let ctx = lm.context(u, Some(v as WordId));
                for w in 0..vocab {
                    let b = &mut g.trans_bound[v * vocab + w];
                    *b = b.max(lm.log_prob_in(ctx, w));
                }
                g.end_bound[v] = g.end_bound[v].max(lm.log_prob_in(ctx, lm.end_symbol()));
            }
        }
        g
    }

    fn len(&self) -> usize {
        self.model_state.len()
    }

    #[inline]
    fn emit(&self, g: usize, x: Symbol) -> f64 {
        self.am.log_emission(self.model_state[g], x)
    }

    #[inline]
    fn log_self(&self, g: usize) -> f64 {
        self.am.log_self(self.model_state[g])
    }

    #[inline]
    fn log_adv(&self, g: usize) -> f64 {
        self.am.log_advance(self.model_state[g])
    }

    /// LM context reached once word `w` follows history `h` (whose last word is `v`).
    #[inline]
    fn ctx_after(&self, hists: &Histories, h: u32, v: WordId) -> usize {
        self.lm.context(hists.prev_word(h), Some(v))
    }

    /// Best completion score from every (frame, state), flattened `[t * G + g]`.
    /// The score at (t, g) covers frames after `t` plus the exit and sentence end.
    fn backward(&self, frames: &[Symbol]) -> (Vec<f64>, f64) {
        let n = self.len();
        let t_len = frames.len();
        let v_len = self.vocab;
        let mut beta = vec![f64::NEG_INFINITY; t_len * n];
        {
            let row = &mut beta[(t_len - 1) * n..];
            for v in 0..v_len {
                let l = self.word_last[v];
                row[l] = self.log_adv(l) + self.end_bound[v];
            }
        }
        let mut entry = vec![0.0; v_len];
        let mut exit = vec![0.0; v_len];
        for t in (0..t_len - 1).rev() {
            let x = frames[t + 1];
            let (head, tail) = beta.split_at_mut((t + 1) * n);
            let next = &tail[..n];
            let row = &mut head[t * n..];
            for (w, e) in entry.iter_mut().enumerate() {
                let f = self.word_first[w];
                *e = self.emit(f, x) + next[f];
            }
            for (v, ex) in exit.iter_mut().enumerate() {
                let bounds = &self.trans_bound[v * v_len..(v + 1) * v_len];
                *ex = bounds
                    .iter()
                    .zip(&entry)
                    .fold(f64::NEG_INFINITY, |m, (b, e)| m.max(b + e));
            }
            for g in 0..n {
                let stay = self.log_self(g) + self.emit(g, x) + next[g];
                let adv = if self.last[g] {
                    self.log_adv(g) + exit[self.word[g] as usize]
                } else {
                    self.log_adv(g) + self.emit(g + 1, x) + next[g + 1]
                };
                row[g] = stay.max(adv);
            }
        }
        let x0 = frames[0];
        let best = (0..v_len)
            .map(|w| {
                let f = self.word_first[w];
                self.start_lm[w] + self.emit(f, x0) + beta[f]
            })
            .fold(f64::NEG_INFINITY, f64::max);
        (beta, best)
    }
}

enum Pruning<'b> {
    Exact { beta: &'b [f64], threshold: f64 },
    Beam(f64),
}

/// A complete hypothesis: combined (acoustic + LM) log score and its words.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Scored {
    pub score: f64,
    pub words: Vec<WordId>,
}

/// Returns up to `k` best distinct word sequences, best first, or `None` when
/// no complete path exists.
pub(crate) fn search(graph: &Graph<'_>, frames: &[Symbol], k: usize, exact: bool, beam: f64) -> Option<Vec<Scored>> {
    if exact {
        let (beta, best) = graph.backward(frames);
        if !best.is_finite() {
            return None;
        }
        for margin in EXACT_MARGINS {
            let threshold = best - margin;
            let found = run(graph, frames, k, &Pruning::Exact { beta: &beta, threshold });
            if found.len() >= k || margin.is_infinite() {
                return (!found.is_empty()).then_some(found);
            }
        }
        unreachable!("last margin is unbounded")
    } else {
        let found = run(graph, frames, k, &Pruning::Beam(beam));
        (!found.is_empty()).then_some(found)
    }
}

/// Keeps the best `k` distinct histories (per LM context when `ctx_of` is set).
fn select(
    hists: &Histories,
    cands: &mut Vec<Entry>,
    k: usize,
    ctx_of: Option<&dyn Fn(u32) -> u32>,
    out: &mut Vec<Entry>,
) {
    out.clear();
    if cands.is_empty() {
        return;
    }
    cands.sort_unstable_by(|a, b| hists.rank(a, b));
    let mut per_ctx: Vec<(u32, usize)> = Vec::new();
    for c in cands.iter() {
        if out.iter().any(|e| e.hist == c.hist) {
            continue;
        }
        match ctx_of {
            None => {
                out.push(*c);
                if out.len() == k {
                    break;
                }
            }
            Some(f) => {
                let key = f(c.hist);
                match per_ctx.iter_mut().find(|(kk, _)| *kk == key) {
                    Some((_, n)) if *n >= k => continue,
                    Some((_, n)) => *n += 1,
                    None => per_ctx.push((key, 1)),
                }
                out.push(*c);
            }
        }
    }
}

/// Merges two rank-sorted lists (each already offset by its transition
/// score) into `out`, adding `emit`, dropping entries below `floor`, and
/// keeping at most `k` distinct histories (per LM context when `ctx_of` is set).
#[allow(clippy::too_many_arguments)]
fn merge_into(
    hists: &Histories,
    a: &[Entry],
    a_off: f64,
    b: &[Entry],
    b_off: f64,
    emit: f64,
    floor: f64,
    k: usize,
    ctx_of: Option<&dyn Fn(u32) -> u32>,
    out: &mut Vec<Entry>,
) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    let mut per_ctx: Vec<(u32, usize)> = Vec::new();
    loop {
        let ea = a.get(i).map(|e| Entry {
            score: e.score + a_off + emit,
            hist: e.hist,
        });
        let eb = b.get(j).map(|e| Entry {
            score: e.score + b_off + emit,
            hist: e.hist,
        });
        let next = match (ea, eb) {
            (None, None) => break,
            (Some(x), None) => {
                i += 1;
                x
            }
            (None, Some(y)) => {
                j += 1;
                y
            }
            (Some(x), Some(y)) => {
                if hists.rank(&x, &y) != Ordering::Greater {
                    i += 1;
                    x
                } else {
                    j += 1;
                    y
                }
            }
        };
        if next.score < floor {
            break;
        }
        if out.iter().any(|e| e.hist == next.hist) {
            continue;
        }
        match ctx_of {
            None => {
                out.push(next);
                if out.len() == k {
                    break;
                }
            }
            Some(f) => {
                let key = f(next.hist);
                match per_ctx.iter_mut().find(|(kk, _)| *kk == key) {
                    Some((_, n)) if *n >= k => continue,
                    Some((_, n)) => *n += 1,
                    None => per_ctx.push((key, 1)),
                }
                out.push(next);
            }
        }
    }
}

/// Heap item for merging the per-word exit lists into one word entry.
#[derive(Clone, Copy, PartialEq)]
struct Head {
    score: f64,
    v: usize,
    idx: usize,
}

impl Eq for Head {}

impl PartialOrd for Head {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Head {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.v.cmp(&self.v))
    }
}

fn run(graph: &Graph<'_>, frames: &[Symbol], k: usize, pruning: &Pruning<'_>) -> Vec<Scored> {
    let n = graph.len();
    let v_len = graph.vocab;
    let trigram = graph.lm.order >= 3;
    let mut hists = Histories::new();
    let mut prev: Vec<Vec<Entry>> = vec![Vec::new(); n];
    let mut cur: Vec<Vec<Entry>> = vec![Vec::new(); n];
    let mut cands: Vec<Entry> = Vec::new();
    let mut kept: Vec<Entry> = Vec::new();
    let mut exits: Vec<(Entry, WordId)> = Vec::new();
    let mut entries: Vec<Vec<Entry>> = vec![Vec::new(); v_len];
    let mut parents: Vec<Entry> = Vec::new();
    let mut heap: std::collections::BinaryHeap<Head> = std::collections::BinaryHeap::new();
    let mut live: Vec<usize> = Vec::new();

    let bound = |t: usize, g: usize| -> f64 {
        match pruning {
            Pruning::Exact { beta, .. } => beta[t * n + g],
            Pruning::Beam(_) => 0.0,
        }
    };
    let threshold = match pruning {
        Pruning::Exact { threshold, .. } => *threshold,
        Pruning::Beam(_) => f64::NEG_INFINITY,
    };

    for (t, &x) in frames.iter().enumerate() {
        // word entries: candidates for the first state of every word
        if t == 0 {
            for w in 0..v_len {
                entries[w].clear();
                let f = graph.word_first[w];
                let score = graph.start_lm[w];
                if score >= threshold - graph.emit(f, x) - bound(t, f) {
                    entries[w].push(Entry { score, hist: ROOT });
                }
            }
        } else if trigram {
            exits.clear();
            for v in 0..v_len {
                let l = graph.word_last[v];
                let adv = graph.log_adv(l);
                exits.extend(prev[l].iter().map(|e| {
                    (
                        Entry {
                            score: e.score + adv,
                            hist: e.hist,
                        },
                        v as WordId,
                    )
                }));
            }
            for w in 0..v_len {
                entries[w].clear();
                if exits.is_empty() {
                    continue;
                }
                let f = graph.word_first[w];
                let floor = threshold - graph.emit(f, x) - bound(t, f);
                parents.clear();
                for (e, v) in &exits {
                    let score = e.score + graph.lm.log_prob_in(graph.ctx_after(&hists, e.hist, *v), w);
                    if score >= floor {
                        parents.push(Entry { score, hist: e.hist });
                    }
                }
                // the new context is (last word of parent, w): group by the parent's word
                let parent_word = |h: u32| hists.nodes[h as usize].1;
                select(&hists, &mut parents, k, Some(&parent_word), &mut kept);
                entries[w].extend_from_slice(&kept);
            }
        } else {
            // the LM score depends only on the exiting word, so every exit
            // list stays sorted and the entry is a k-way merge
            live.clear();
            live.extend((0..v_len).filter(|&v| !prev[graph.word_last[v]].is_empty()));
            for w in 0..v_len {
                entries[w].clear();
                if live.is_empty() {
                    continue;
                }
                let f = graph.word_first[w];
                let floor = threshold - graph.emit(f, x) - bound(t, f);
                heap.clear();
                for &v in &live {
                    let l = graph.word_last[v];
                    let score = prev[l][0].score + graph.log_adv(l) + graph.trans_bound[v * v_len + w];
                    if score >= floor {
                        heap.push(Head { score, v, idx: 0 });
                    }
                }
                while let Some(h) = heap.pop() {
                    let l = graph.word_last[h.v];
                    entries[w].push(Entry {
                        score: h.score,
                        hist: prev[l][h.idx].hist,
                    });
                    if entries[w].len() == k {
                        break;
                    }
                    if let Some(e) = prev[l].get(h.idx + 1) {
                        let score = e.score + graph.log_adv(l) + graph.trans_bound[h.v * v_len + w];
                        if score >= floor {
                            heap.push(Head {
                                score,
                                v: h.v,
                                idx: h.idx + 1,
                            });
                        }
                    }
                }
            }
        }
        for w in 0..v_len {
            for e in entries[w].iter_mut() {
                e.hist = hists.intern(e.hist, w as u32);
            }
        }

        // within-word propagation
        let mut frame_best = f64::NEG_INFINITY;
        let prev_word = |h: u32| hists.prev_word(h).unwrap_or(NO_WORD);
        let ctx: Option<&dyn Fn(u32) -> u32> = if trigram { Some(&prev_word) } else { None };
        for g in 0..n {
            let (from, off): (&[Entry], f64) = if graph.first[g] {
                (&entries[graph.word[g] as usize], 0.0)
            } else {
                (&prev[g - 1], graph.log_adv(g - 1))
            };
            if prev[g].is_empty() && from.is_empty() {
                cur[g].clear();
                continue;
            }
            let floor = threshold - bound(t, g);
            merge_into(
                &hists,
                &prev[g],
                graph.log_self(g),
                from,
                off,
                graph.emit(g, x),
                floor,
                k,
                ctx,
                &mut cur[g],
            );
            if let Some(e) = cur[g].first() {
                frame_best = frame_best.max(e.score);
            }
        }
        if let Pruning::Beam(width) = pruning {
            let floor = frame_best - width;
            for list in cur.iter_mut() {
                list.retain(|e| e.score >= floor);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    cands.clear();
    for v in 0..v_len {
        let l = graph.word_last[v];
        let adv = graph.log_adv(l);
        for e in &prev[l] {
            let ctx = graph.ctx_after(&hists, e.hist, v as WordId);
            let score = e.score + adv + graph.lm.log_prob_in(ctx, graph.lm.end_symbol());
            if score >= threshold {
                cands.push(Entry { score, hist: e.hist });
            }
        }
    }
    select(&hists, &mut cands, k, None, &mut kept);
    kept.iter()
        .map(|e| Scored {
            score: e.score,
            words: hists.words(e.hist),
        })
        .collect()
}
