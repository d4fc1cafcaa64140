//! Three-tier hierarchical decoding, logical-failure adjudication, and the
//! throughput and rate arithmetic.
//!
//! Tier 1 is sum-product belief propagation with a flooding schedule on the
//! mechanism-detector graph (min-sum available as a config flag). Tier 2 is
//! relay BP: an ensemble of legs with randomized per-variable memory
//! strengths, each leg seeded from the previous leg's messages. Tier 3 is an
//! exact most-likely-error solver: weight-capped branch and bound minimizing
//! `sum_i w_i e_i` with `w_i = log((1-p_i)/p_i)` subject to `H e = s` over
//! GF(2).
//!
//! Non-convergence is the escalation trigger. A converged-but-wrong outcome
//! at any tier is counted as a logical failure by the adjudication helpers,
//! never re-decoded.

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVec};
use crate::sim::{MemoryExperiment, ShotBatch};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TierConfig {
    pub bp_max_iters: usize,
    pub min_sum: bool,
    /// Message clamp in log-likelihood units.
    pub clamp_llr: f32,
    pub relay_legs: usize,
    pub relay_leg_iters: usize,
    pub relay_gamma_min: f64,
    pub relay_gamma_max: f64,
    /// Iterative-deepening caps on the number of chosen mechanisms.
    pub mle_weight_caps: Vec<usize>,
    pub mle_time_budget_ms: u64,
}

impl Default for TierConfig {
    fn default() -> Self {
        TierConfig {
            bp_max_iters: 200,
            min_sum: false,
            clamp_llr: 20.0,
            relay_legs: 30,
            relay_leg_iters: 60,
            relay_gamma_min: -0.25,
            relay_gamma_max: 0.85,
            mle_weight_caps: vec![4, 8, 16, 32, 64],
            mle_time_budget_ms: 2_000,
        }
    }
}

impl TierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clamp_llr <= 0.0 {
            return Err(Error::BadConfig("clamp_llr must be positive".into()));
        }
        if self.relay_gamma_min > self.relay_gamma_max {
            return Err(Error::BadConfig("empty relay memory range".into()));
        }
        if self.mle_weight_caps.is_empty() {
            return Err(Error::BadConfig("mle weight-cap schedule is empty".into()));
        }
        Ok(())
    }
}

/// Result of one decode call.
#[derive(Clone, Debug)]
pub struct DecodeOutcome {
    /// Error-mechanism indicator vector.
    pub correction: BitVec,
    /// True iff the correction reproduces the input syndrome exactly.
    pub converged: bool,
    pub tier_used: u8,
    pub iterations: usize,
    /// For the MLE tier: whether optimality was proven within budget.
    pub exact: Option<bool>,
}

/// Flattened mechanism-detector Tanner graph shared by the BP tiers.
struct Graph {
    nvars: usize,
    nchecks: usize,
    prior_llr: Vec<f32>,
    var_edge_start: Vec<u32>,
    var_edge_chk: Vec<u32>,
    chk_edge_start: Vec<u32>,
    chk_edge_ids: Vec<u32>, // indices into the var-major edge arrays
}

impl Graph {
    fn new(exp: &MemoryExperiment) -> Graph {
        let nvars = exp.num_mechanisms;
        let nchecks = exp.num_detectors;
        let mut var_edge_start = Vec::with_capacity(nvars + 1);
        let mut var_edge_chk = Vec::new();
        var_edge_start.push(0u32);
        for m in 0..nvars {
            for &d in &exp.det_of_mech[m] {
                var_edge_chk.push(d);
            }
            var_edge_start.push(var_edge_chk.len() as u32);
        }
        let mut chk_edge_start = Vec::with_capacity(nchecks + 1);
        let mut chk_edge_ids = Vec::with_capacity(var_edge_chk.len());
        let mut per_chk: Vec<Vec<u32>> = vec![Vec::new(); nchecks];
        for (eid, &d) in var_edge_chk.iter().enumerate() {
            per_chk[d as usize].push(eid as u32);
        }
        chk_edge_start.push(0);
        for d in 0..nchecks {
            chk_edge_ids.extend_from_slice(&per_chk[d]);
            chk_edge_start.push(chk_edge_ids.len() as u32);
        }
        let prior_llr = exp
            .priors
            .iter()
            .map(|&p| {
                let p = p.clamp(1e-12, 0.5 - 1e-9);
                (((1.0 - p) / p) as f32).ln()
            })
            .collect();
        Graph {
            nvars,
            nchecks,
            prior_llr,
            var_edge_start,
            var_edge_chk,
            chk_edge_start,
            chk_edge_ids,
        }
    }

    fn var_edges(&self, v: usize) -> std::ops::Range<usize> {
        self.var_edge_start[v] as usize..self.var_edge_start[v + 1] as usize
    }

    fn chk_edges(&self, c: usize) -> std::ops::Range<usize> {
        self.chk_edge_start[c] as usize..self.chk_edge_start[c + 1] as usize
    }
}

/// Per-thread scratch buffers reused across shots.
struct Workspace {
    v2c: Vec<f32>,
    c2v: Vec<f32>,
    posterior: Vec<f32>,
    hard: BitVec,
    resid: BitVec,
    gammas: Vec<f32>,
}

impl Workspace {
    fn new(g: &Graph) -> Workspace {
        let ne = g.var_edge_chk.len();
        Workspace {
            v2c: vec![0.0; ne],
            c2v: vec![0.0; ne],
            posterior: vec![0.0; g.nvars],
            hard: BitVec::zeros(g.nvars),
            resid: BitVec::zeros(g.nchecks),
            gammas: Vec::new(),
        }
    }
}

/// One flooding iteration; returns true when the hard decision reproduces the
/// syndrome.
fn bp_iteration(
    g: &Graph,
    syndrome: &BitVec,
    ws: &mut Workspace,
    clamp: f32,
    min_sum: bool,
) -> bool {
    // check pass
    for c in 0..g.nchecks {
        let range = g.chk_edges(c);
        let sgn_target = if syndrome.get(c) { -1.0f32 } else { 1.0 };
        if min_sum {
            // two smallest magnitudes and the overall sign product
            let (mut min1, mut min2) = (f32::INFINITY, f32::INFINITY);
            let mut argmin = usize::MAX;
            let mut sign_all = sgn_target;
            for i in range.clone() {
                let m = ws.v2c[g.chk_edge_ids[i] as usize];
                let a = m.abs();
                if a < min1 {
                    min2 = min1;
                    min1 = a;
                    argmin = i;
                } else if a < min2 {
                    min2 = a;
                }
                if m < 0.0 {
                    sign_all = -sign_all;
                }
            }
            for i in range {
                let eid = g.chk_edge_ids[i] as usize;
                let m = ws.v2c[eid];
                let mag = if i == argmin { min2 } else { min1 };
                let mut s = sign_all;
                if m < 0.0 {
                    s = -s;
                }
                ws.c2v[eid] = (s * mag.min(clamp)).clamp(-clamp, clamp);
            }
        } else {
            // product of tanh(m/2) via forward/backward partials
            let len = range.len();
            if len == 0 {
                continue;
            }
            let mut fwd = [1.0f32; 32];
            let mut tanhs = [0.0f32; 32];
            let mut use_heap = None;
            if len > 32 {
                use_heap = Some((vec![1.0f32; len], vec![0.0f32; len]));
            }
            {
                let (fwd, tanhs): (&mut [f32], &mut [f32]) = match use_heap.as_mut() {
                    Some((f, t)) => (f, t),
                    None => (&mut fwd[..len], &mut tanhs[..len]),
                };
                let mut acc = 1.0f32;
                for (j, i) in range.clone().enumerate() {
                    fwd[j] = acc;
                    let t = (ws.v2c[g.chk_edge_ids[i] as usize] * 0.5).tanh();
                    tanhs[j] = t;
                    acc *= t;
                }
                let mut back = 1.0f32;
                for (j, i) in range.clone().enumerate().rev() {
                    let eid = g.chk_edge_ids[i] as usize;
                    let prod = (fwd[j] * back * sgn_target).clamp(-0.999_999_9, 0.999_999_9);
                    ws.c2v[eid] = (2.0 * prod.atanh()).clamp(-clamp, clamp);
                    back *= tanhs[j];
                }
            }
        }
    }
    // variable pass and hard decision
    for v in 0..g.nvars {
        let range = g.var_edges(v);
        let mut total = g.prior_llr[v];
        for i in range.clone() {
            total += ws.c2v[i];
        }
        ws.posterior[v] = total;
        for i in range {
            ws.v2c[i] = (total - ws.c2v[i]).clamp(-clamp, clamp);
        }
        ws.hard.set(v, total < 0.0);
    }
    syndrome_matches(g, &ws.hard, syndrome, &mut ws.resid)
}

fn syndrome_matches(g: &Graph, hard: &BitVec, syndrome: &BitVec, resid: &mut BitVec) -> bool {
    resid.words_mut().copy_from_slice(syndrome.words());
    for v in hard.iter_ones() {
        for i in g.var_edges(v) {
            resid.flip(g.var_edge_chk[i] as usize);
        }
    }
    resid.is_zero()
}

fn bp_core(
    g: &Graph,
    syndrome: &BitVec,
    ws: &mut Workspace,
    config: &TierConfig,
) -> (bool, usize) {
    for v in 0..g.nvars {
        for i in g.var_edges(v) {
            ws.v2c[i] = g.prior_llr[v];
        }
    }
    ws.c2v.iter_mut().for_each(|m| *m = 0.0);
    if syndrome.is_zero() {
        // the all-zero correction already satisfies the syndrome
        ws.hard.words_mut().iter_mut().for_each(|w| *w = 0);
        return (true, 0);
    }
    for it in 1..=config.bp_max_iters {
        if bp_iteration(g, syndrome, ws, config.clamp_llr, config.min_sum) {
            return (true, it);
        }
    }
    (false, config.bp_max_iters)
}

/// Tier-1 sum-product decoding.
pub fn bp_decode(
    exp: &MemoryExperiment,
    syndrome: &BitVec,
    config: &TierConfig,
) -> Result<DecodeOutcome> {
    config.validate()?;
    check_dims(exp, syndrome)?;
    let g = Graph::new(exp);
    let mut ws = Workspace::new(&g);
    let (converged, iterations) = bp_core(&g, syndrome, &mut ws, config);
    Ok(DecodeOutcome {
        correction: ws.hard.clone(),
        converged,
        tier_used: 1,
        iterations,
        exact: None,
    })
}

fn relay_core(
    g: &Graph,
    syndrome: &BitVec,
    ws: &mut Workspace,
    config: &TierConfig,
    seed: u64,
) -> (bool, usize) {
    // seed the message state with one plain BP attempt so leg 1 relays it
    let (ok, mut iters) = bp_core(g, syndrome, ws, config);
    if ok {
        return (true, iters);
    }
    let mut rng = StdRng::seed_from_u64(seed);
    ws.gammas.resize(g.nvars, 0.0);
    for _leg in 0..config.relay_legs {
        for gamma in ws.gammas.iter_mut() {
            *gamma = rng.gen_range(config.relay_gamma_min..=config.relay_gamma_max) as f32;
        }
        for _ in 0..config.relay_leg_iters {
            // check pass reuses the plain rule; the memory enters the variable pass
            relay_iteration(g, syndrome, ws, config);
            iters += 1;
            if syndrome_matches(g, &ws.hard, syndrome, &mut ws.resid) {
                return (true, iters);
            }
        }
    }
    (false, iters)
}

fn relay_iteration(g: &Graph, syndrome: &BitVec, ws: &mut Workspace, config: &TierConfig) {
    let clamp = config.clamp_llr;
    // check pass identical to plain BP
    for c in 0..g.nchecks {
        let range = g.chk_edges(c);
        let len = range.len();
        if len == 0 {
            continue;
        }
        let sgn_target = if syndrome.get(c) { -1.0f32 } else { 1.0 };
        let mut fwd_s = [1.0f32; 32];
        let mut tanh_s = [0.0f32; 32];
        let mut heap = None;
        if len > 32 {
            heap = Some((vec![1.0f32; len], vec![0.0f32; len]));
        }
        let (fwd, tanhs): (&mut [f32], &mut [f32]) = match heap.as_mut() {
            Some((f, t)) => (f, t),
            None => (&mut fwd_s[..len], &mut tanh_s[..len]),
        };
        let mut acc = 1.0f32;
        for (j, i) in range.clone().enumerate() {
            fwd[j] = acc;
            let t = (ws.v2c[g.chk_edge_ids[i] as usize] * 0.5).tanh();
            tanhs[j] = t;
            acc *= t;
        }
        let mut back = 1.0f32;
        for (j, i) in range.clone().enumerate().rev() {
            let eid = g.chk_edge_ids[i] as usize;
            let prod = (fwd[j] * back * sgn_target).clamp(-0.999_999_9, 0.999_999_9);
            ws.c2v[eid] = (2.0 * prod.atanh()).clamp(-clamp, clamp);
            back *= tanhs[j];
        }
    }
    // variable pass with per-variable memory strength
    for v in 0..g.nvars {
        let range = g.var_edges(v);
        let mut total = g.prior_llr[v];
        for i in range.clone() {
            total += ws.c2v[i];
        }
        ws.posterior[v] = total;
        let gamma = ws.gammas[v];
        for i in range {
            let fresh = total - ws.c2v[i];
            ws.v2c[i] = ((1.0 - gamma) * fresh + gamma * ws.v2c[i]).clamp(-clamp, clamp);
        }
        ws.hard.set(v, total < 0.0);
    }
}

/// Tier-2 relay BP: legs of memory-BP with randomized per-variable memory
/// strengths, message state carried across legs, stopping at the first
/// converging leg.
pub fn relay_bp_decode(
    exp: &MemoryExperiment,
    syndrome: &BitVec,
    config: &TierConfig,
    seed: u64,
) -> Result<DecodeOutcome> {
    config.validate()?;
    check_dims(exp, syndrome)?;
    let g = Graph::new(exp);
    let mut ws = Workspace::new(&g);
    let (converged, iterations) = relay_core(&g, syndrome, &mut ws, config, seed);
    Ok(DecodeOutcome {
        correction: ws.hard.clone(),
        converged,
        tier_used: 2,
        iterations,
        exact: None,
    })
}

fn check_dims(exp: &MemoryExperiment, syndrome: &BitVec) -> Result<()> {
    if syndrome.len() != exp.num_detectors {
        return Err(Error::DimensionMismatch(format!(
            "syndrome has {} bits, experiment has {} detectors",
            syndrome.len(),
            exp.num_detectors
        )));
    }
    Ok(())
}

struct MleProblem<'a> {
    exp: &'a MemoryExperiment,
    weights: Vec<f64>,
    min_weight: f64,
    max_mech_degree: usize,
    deadline: std::time::Instant,
    /// mechanisms ordered by prior descending (cheapest first) per detector
    mech_order: Vec<Vec<u32>>,
}

struct MleSearch {
    best_cost: f64,
    best: Option<Vec<u32>>,
    chosen: Vec<u32>,
    banned: Vec<bool>,
    cap: usize,
    cap_hit: bool,
    timed_out: bool,
    nodes: u64,
}

impl MleProblem<'_> {
    fn lower_bound(&self, unresolved: usize) -> f64 {
        (unresolved as f64 / self.max_mech_degree as f64).ceil() * self.min_weight
    }

    fn dfs(&self, s: &mut MleSearch, resid: &mut BitVec, n_flipped: usize, cost: f64) {
        s.nodes += 1;
        if s.nodes % 4096 == 0 && std::time::Instant::now() >= self.deadline {
            s.timed_out = true;
        }
        if s.timed_out {
            return;
        }
        if n_flipped == 0 {
            if cost < s.best_cost {
                s.best_cost = cost;
                s.best = Some(s.chosen.clone());
            }
            return;
        }
        if cost + self.lower_bound(n_flipped) >= s.best_cost {
            return;
        }
        if s.chosen.len() >= s.cap {
            s.cap_hit = true;
            return;
        }
        // branch on the first unresolved detector: some incident mechanism
        // must be chosen, and we designate the branch mechanism as the
        // lowest-ordered chosen one (earlier candidates get banned)
        let d = resid.iter_ones().next().expect("n_flipped > 0");
        let cands = &self.mech_order[d];
        let mut newly_banned: Vec<u32> = Vec::new();
        for &m in cands {
            if s.banned[m as usize] {
                continue;
            }
            // m is decided inside its own subtree and excluded from later
            // siblings: each solution set is enumerated exactly once
            s.banned[m as usize] = true;
            newly_banned.push(m);
            let w = self.weights[m as usize];
            if cost + w < s.best_cost {
                s.chosen.push(m);
                let mut delta = 0isize;
                for &dd in &self.exp.det_of_mech[m as usize] {
                    if resid.get(dd as usize) {
                        delta -= 1;
                    } else {
                        delta += 1;
                    }
                    resid.flip(dd as usize);
                }
                self.dfs(s, resid, (n_flipped as isize + delta) as usize, cost + w);
                for &dd in &self.exp.det_of_mech[m as usize] {
                    resid.flip(dd as usize);
                }
                s.chosen.pop();
                if s.timed_out {
                    break;
                }
            }
        }
        for m in newly_banned {
            s.banned[m as usize] = false;
        }
    }
}

/// Tier-3 exact most-likely-error decoding by weight-capped branch and bound
/// with the admissible bound
/// `ceil(unresolved detectors / max mechanism degree) * min weight`.
/// `exact = Some(true)` when the returned solution is provably minimum.
pub fn mle_decode(
    exp: &MemoryExperiment,
    syndrome: &BitVec,
    config: &TierConfig,
) -> Result<DecodeOutcome> {
    config.validate()?;
    check_dims(exp, syndrome)?;
    let weights: Vec<f64> = exp
        .priors
        .iter()
        .map(|&p| {
            let p = p.clamp(1e-12, 0.5 - 1e-9);
            ((1.0 - p) / p).ln()
        })
        .collect();
    let min_weight = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let max_mech_degree = exp
        .det_of_mech
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(1)
        .max(1);
    // branch candidates per detector in fixed (weight, index) order
    let mut mech_order: Vec<Vec<u32>> = exp.mech_of_det.clone();
    for cands in &mut mech_order {
        cands.sort_by(|&a, &b| {
            weights[a as usize]
                .partial_cmp(&weights[b as usize])
                .unwrap()
                .then(a.cmp(&b))
        });
    }
    let problem = MleProblem {
        exp,
        weights,
        min_weight,
        max_mech_degree,
        deadline: std::time::Instant::now()
            + std::time::Duration::from_millis(config.mle_time_budget_ms),
        mech_order,
    };
    let mut search = MleSearch {
        best_cost: f64::INFINITY,
        best: None,
        chosen: Vec::new(),
        banned: vec![false; exp.num_mechanisms],
        cap: 0,
        cap_hit: false,
        timed_out: false,
        nodes: 0,
    };
    let mut proven = false;
    for &cap in &config.mle_weight_caps {
        search.cap = cap;
        search.cap_hit = false;
        let mut resid = syndrome.clone();
        let n_flipped = resid.weight();
        problem.dfs(&mut search, &mut resid, n_flipped, 0.0);
        if search.timed_out {
            break;
        }
        // a completed pass without cap cuts has explored the whole space
        if !search.cap_hit {
            proven = true;
            break;
        }
        // optimality proof via the cap: any solution deeper than the cap
        // costs at least (cap+1) * min_weight
        if let Some(_) = &search.best {
            if search.best_cost <= (cap + 1) as f64 * problem.min_weight {
                proven = true;
                break;
            }
        }
    }
    match search.best {
        Some(chosen) => {
            let mut correction = BitVec::zeros(exp.num_mechanisms);
            for m in chosen {
                correction.set(m as usize, true);
            }
            debug_assert!(!proven || exp.syndrome_of(&correction) == *syndrome);
            Ok(DecodeOutcome {
                correction,
                converged: true,
                tier_used: 3,
                iterations: search.nodes as usize,
                exact: Some(proven),
            })
        }
        None => {
            if !search.timed_out && !search.cap_hit {
                // complete exploration found no solution at all
                return Err(Error::InfeasibleSyndrome);
            }
            Ok(DecodeOutcome {
                correction: BitVec::zeros(exp.num_mechanisms),
                converged: false,
                tier_used: 3,
                iterations: search.nodes as usize,
                exact: Some(false),
            })
        }
    }
}

/// Per-tier escalation statistics from a batch decode.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TierStats {
    pub shots: u64,
    pub reached_tier2: u64,
    pub reached_tier3: u64,
    pub converged_tier1: u64,
    pub converged_tier2: u64,
    pub converged_tier3: u64,
    pub mean_iters_tier1: f64,
    pub mean_iters_tier2: f64,
    pub mean_iters_tier3: f64,
}

impl TierStats {
    pub fn q2(&self) -> f64 {
        self.reached_tier2 as f64 / self.shots.max(1) as f64
    }

    pub fn q3(&self) -> f64 {
        self.reached_tier3 as f64 / self.shots.max(1) as f64
    }
}

/// How many tiers to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TierDepth {
    Tier1,
    Tier12,
    Tier123,
}

/// Decodes every shot, escalating on non-convergence; shots run in parallel
/// and relay seeds derive from the shot index.
pub fn hierarchical_decode(
    exp: &MemoryExperiment,
    batch: &ShotBatch,
    config: &TierConfig,
    depth: TierDepth,
    seed: u64,
) -> Result<(Vec<DecodeOutcome>, TierStats)> {
    config.validate()?;
    if batch.syndromes.cols() != exp.num_detectors {
        return Err(Error::DimensionMismatch(
            "shot batch does not match experiment".into(),
        ));
    }
    let g = Graph::new(exp);
    let outcomes: Vec<DecodeOutcome> = (0..batch.shots)
        .into_par_iter()
        .map_init(
            || Workspace::new(&g),
            |ws, i| {
                let syndrome = batch.syndromes.row_vec(i);
                let (c1, it1) = bp_core(&g, &syndrome, ws, config);
                if c1 || depth == TierDepth::Tier1 {
                    return DecodeOutcome {
                        correction: ws.hard.clone(),
                        converged: c1,
                        tier_used: 1,
                        iterations: it1,
                        exact: None,
                    };
                }
                let leg_seed = crate::distance::splitmix64(seed ^ (i as u64).wrapping_mul(0x9e37));
                let (c2, it2) = relay_core(&g, &syndrome, ws, config, leg_seed);
                if c2 || depth == TierDepth::Tier12 {
                    return DecodeOutcome {
                        correction: ws.hard.clone(),
                        converged: c2,
                        tier_used: 2,
                        iterations: it2,
                        exact: None,
                    };
                }
                mle_decode(exp, &syndrome, config).unwrap_or(DecodeOutcome {
                    correction: BitVec::zeros(exp.num_mechanisms),
                    converged: false,
                    tier_used: 3,
                    iterations: 0,
                    exact: Some(false),
                })
            },
        )
        .collect();
    let mut stats = TierStats {
        shots: batch.shots as u64,
        ..Default::default()
    };
    let mut iters = [0u64; 3];
    let mut counts = [0u64; 3];
    for o in &outcomes {
        let t = o.tier_used as usize - 1;
        iters[t] += o.iterations as u64;
        counts[t] += 1;
        match o.tier_used {
            1 => {
                if o.converged {
                    stats.converged_tier1 += 1;
                }
            }
            2 => {
                stats.reached_tier2 += 1;
                if o.converged {
                    stats.converged_tier2 += 1;
                }
            }
            _ => {
                stats.reached_tier2 += 1;
                stats.reached_tier3 += 1;
                if o.converged {
                    stats.converged_tier3 += 1;
                }
            }
        }
    }
    stats.mean_iters_tier1 = iters[0] as f64 / counts[0].max(1) as f64;
    stats.mean_iters_tier2 = iters[1] as f64 / counts[1].max(1) as f64;
    stats.mean_iters_tier3 = iters[2] as f64 / counts[2].max(1) as f64;
    Ok((outcomes, stats))
}

/// Failure bit per logical: `observable(correction) XOR observable(truth)`.
/// `true_observable` is the sampled observable vector of the actual error.
pub fn logical_failure(
    correction: &BitVec,
    true_observable: &BitVec,
    exp: &MemoryExperiment,
) -> BitVec {
    let mut obs = exp.observable_of(correction);
    obs.xor_assign(true_observable);
    obs
}

/// A shot fails when the decoder did not converge or any logical flipped.
/// Converged-but-wrong outcomes count as failures; they are not heralded.
pub fn shot_failed(outcome: &DecodeOutcome, true_observable: &BitVec, exp: &MemoryExperiment) -> bool {
    !outcome.converged || !logical_failure(&outcome.correction, true_observable, exp).is_zero()
}

/// Inputs to the sustained-throughput arithmetic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThroughputModel {
    /// Mean decode time per invocation, nanoseconds, one entry per tier.
    pub tier_time_ns: Vec<f64>,
    /// Fraction of syndrome rounds reaching each tier; `q[0] = 1`.
    pub q: Vec<f64>,
    /// Sliding-window width in rounds (usually the distance bound).
    pub window: u32,
    /// Data qubits of the target code.
    pub n: u32,
    /// Data-qubit degree of the target code and of the reference fabric.
    pub check_degree: f64,
    pub reference_degree: f64,
    /// Rounds spanned by one final-tier solve, for the backlog estimate.
    pub rounds_spanned: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThroughputReport {
    /// Average decoding work per syndrome round.
    pub t_bar_ns: f64,
    /// Fabric scale factor relative to the 144-qubit, window-12 baseline.
    pub f_factor: f64,
    /// Probability that another final-tier solve lands while one is running.
    pub backlog_probability: f64,
}

/// `t_bar = sum q_i t_i`, `F = n W d / (144 * 12 d_ref)`, and
/// `backlog = 1 - (1 - q_last)^rounds`.
pub fn throughput(model: &ThroughputModel) -> Result<ThroughputReport> {
    if model.q.len() != model.tier_time_ns.len() || model.q.is_empty() {
        return Err(Error::BadConfig("q and tier_time_ns must align".into()));
    }
    if (model.q[0] - 1.0).abs() > 1e-12 {
        return Err(Error::BadConfig("q_1 must be 1".into()));
    }
    if model.q.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::BadConfig("q must be nonincreasing".into()));
    }
    let t_bar_ns = model
        .q
        .iter()
        .zip(&model.tier_time_ns)
        .map(|(q, t)| q * t)
        .sum();
    let f_factor = model.n as f64 * model.window as f64 * model.check_degree
        / (144.0 * 12.0 * model.reference_degree);
    let q_last = *model.q.last().unwrap();
    let backlog_probability = -((model.rounds_spanned as f64) * (-q_last).ln_1p()).exp_m1();
    Ok(ThroughputReport {
        t_bar_ns,
        f_factor,
        backlog_probability,
    })
}

/// A rate with its 95% Clopper-Pearson interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RateEstimate {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateMetrics {
    pub failures: u64,
    pub shots: u64,
    pub rounds: u64,
    pub logicals: u64,
    pub block_per_shot: RateEstimate,
    pub block_per_round: RateEstimate,
    pub per_logical_per_round: RateEstimate,
}

/// Beta quantile by bisection in log space; the library quantile only
/// bisects to a fixed absolute precision, useless for rates near 1e-8.
fn beta_quantile(a: f64, b: f64, target: f64) -> f64 {
    use statrs::function::beta::beta_reg;
    let (mut lo, mut hi) = (-300.0f64, 0.0f64); // log10 bounds
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = 10f64.powf(mid);
        if beta_reg(a, b, p) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    10f64.powf(0.5 * (lo + hi))
}

fn clopper_pearson(failures: u64, shots: u64, alpha: f64) -> (f64, f64) {
    let n = shots as f64;
    let x = failures as f64;
    let lower = if failures == 0 {
        0.0
    } else {
        beta_quantile(x, n - x + 1.0, alpha / 2.0)
    };
    let upper = if failures == shots {
        1.0
    } else {
        beta_quantile(x + 1.0, n - x, 1.0 - alpha / 2.0)
    };
    (lower, upper)
}

/// `1 - (1 - p)^(1/m)`, computed stably for tiny rates.
pub fn per_unit_rate(p: f64, m: u64) -> f64 {
    -((-p).ln_1p() / m as f64).exp_m1()
}

/// Inverse of [`per_unit_rate`]: `1 - (1 - p)^m`.
pub fn compound_rate(p: f64, m: u64) -> f64 {
    -((m as f64) * (-p).ln_1p()).exp_m1()
}

/// Block failure rate per shot, per round, and per logical per round, with
/// 95% Clopper-Pearson intervals propagated through the compounding
/// transforms (which are monotone).
pub fn rate_metrics(failures: u64, shots: u64, rounds: u64, logicals: u64) -> Result<RateMetrics> {
    if shots == 0 {
        return Err(Error::BadConfig("shots must be positive".into()));
    }
    if failures > shots {
        return Err(Error::BadConfig("failures exceed shots".into()));
    }
    let point = failures as f64 / shots as f64;
    let (lo, hi) = clopper_pearson(failures, shots, 0.05);
    let per_round = |p: f64| per_unit_rate(p, rounds.max(1));
    let per_logical = |p: f64| per_unit_rate(p, logicals.max(1));
    let block_per_shot = RateEstimate {
        point,
        lower: lo,
        upper: hi,
    };
    let block_per_round = RateEstimate {
        point: per_round(point),
        lower: per_round(lo),
        upper: per_round(hi),
    };
    let per_logical_per_round = RateEstimate {
        point: per_logical(block_per_round.point),
        lower: per_logical(block_per_round.lower),
        upper: per_logical(block_per_round.upper),
    };
    Ok(RateMetrics {
        failures,
        shots,
        rounds,
        logicals,
        block_per_shot,
        block_per_round,
        per_logical_per_round,
    })
}
