//! Memory experiments and phenomenological noise sampling.
//!
//! A memory experiment tracks one basis: initialize, measure the same-basis
//! stabilizers for `r` rounds, then read out all data qubits transversally.
//! Detectors are the first-round syndrome, the round-to-round syndrome
//! differences, and a final layer comparing the last round against the
//! perfect readout. Error mechanisms are per-round data flips (a depolarizing
//! channel of strength `p` flips the measured basis with probability `2p/3`)
//! and per-round measurement flips. A data flip before round `t` fires only
//! detector layer `t`; a measurement flip at round `t` fires layers `t` and
//! `t+1`.

use crate::code::CssCode;
use crate::distance::stream_rng;
use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVec, SparseGf2Matrix};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Read, Write};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKind {
    Phenomenological,
    CodeCapacity,
}

/// Phenomenological noise couples the two strengths as
/// `p_data / p_meas = 6 / (12 * 2/3) = 3/4`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub p_data: f64,
    pub p_meas: f64,
}

impl NoiseModel {
    pub fn phenomenological(p: f64) -> Self {
        NoiseModel {
            kind: NoiseKind::Phenomenological,
            p_data: p,
            p_meas: 4.0 / 3.0 * p,
        }
    }

    pub fn code_capacity(p: f64) -> Self {
        NoiseModel {
            kind: NoiseKind::CodeCapacity,
            p_data: p,
            p_meas: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.p_data, self.p_meas] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::BadConfig(format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Space-time decoding problem: detector/mechanism incidence, mechanism
/// priors, and the observable map.
#[derive(Clone, Debug)]
pub struct MemoryExperiment {
    pub rounds: usize,
    pub basis: Basis,
    pub num_detectors: usize,
    pub num_mechanisms: usize,
    pub num_observables: usize,
    /// mechanism -> sorted detector indices
    pub det_of_mech: Vec<Vec<u32>>,
    /// detector -> sorted mechanism indices
    pub mech_of_det: Vec<Vec<u32>>,
    pub priors: Vec<f64>,
    /// mechanism -> sorted observable indices
    pub obs_of_mech: Vec<Vec<u32>>,
    /// number of data qubits (mechanism layout metadata)
    pub num_data: usize,
}

impl MemoryExperiment {
    pub fn syndrome_of(&self, error: &BitVec) -> BitVec {
        let mut s = BitVec::zeros(self.num_detectors);
        for m in error.iter_ones() {
            for &d in &self.det_of_mech[m] {
                s.flip(d as usize);
            }
        }
        s
    }

    pub fn observable_of(&self, error: &BitVec) -> BitVec {
        let mut o = BitVec::zeros(self.num_observables);
        for m in error.iter_ones() {
            for &l in &self.obs_of_mech[m] {
                o.flip(l as usize);
            }
        }
        o
    }

    /// Detector-by-mechanism incidence as a sparse matrix.
    pub fn check_matrix(&self) -> SparseGf2Matrix {
        SparseGf2Matrix::from_rows(self.mech_of_det.clone(), self.num_mechanisms)
            .expect("sorted by construction")
    }

    /// Line-oriented text export: priors with detector and observable
    /// supports, one mechanism per line.
    pub fn to_dem_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# apm-qec detector error model v1\n");
        s.push_str(&format!(
            "dem {} {} {} {} {}\n",
            self.num_detectors,
            self.num_mechanisms,
            self.num_observables,
            self.rounds,
            match self.basis {
                Basis::X => "X",
                Basis::Z => "Z",
            }
        ));
        s.push_str(&format!("data {}\n", self.num_data));
        for m in 0..self.num_mechanisms {
            s.push_str(&format!("error {:.17e}", self.priors[m]));
            for &d in &self.det_of_mech[m] {
                s.push_str(&format!(" D{d}"));
            }
            for &l in &self.obs_of_mech[m] {
                s.push_str(&format!(" L{l}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_dem_text(text: &str) -> Result<MemoryExperiment> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });
        let parse_err = |line: usize, msg: String| Error::AlistParse { line, msg };
        let (ln, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty model".into()))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 6 || toks[0] != "dem" {
            return Err(parse_err(ln + 1, "expected: dem D M K rounds basis".into()));
        }
        let nums: Vec<usize> = toks[1..5]
            .iter()
            .map(|t| {
                t.parse()
                    .map_err(|_| parse_err(ln + 1, format!("bad integer {t}")))
            })
            .collect::<Result<_>>()?;
        let basis = match toks[5] {
            "X" => Basis::X,
            "Z" => Basis::Z,
            other => return Err(parse_err(ln + 1, format!("bad basis {other}"))),
        };
        let (num_detectors, num_mechanisms, num_observables, rounds) =
            (nums[0], nums[1], nums[2], nums[3]);
        let (ln, data_line) = lines
            .next()
            .ok_or_else(|| parse_err(0, "missing data line".into()))?;
        let num_data: usize = data_line
            .strip_prefix("data ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| parse_err(ln + 1, "expected: data <n>".into()))?;
        let mut det_of_mech = Vec::with_capacity(num_mechanisms);
        let mut obs_of_mech = Vec::with_capacity(num_mechanisms);
        let mut priors = Vec::with_capacity(num_mechanisms);
        for (ln, line) in lines {
            let mut toks = line.split_whitespace();
            if toks.next() != Some("error") {
                return Err(parse_err(ln + 1, "expected an error line".into()));
            }
            let p: f64 = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(ln + 1, "missing prior".into()))?;
            let mut dets = Vec::new();
            let mut obs = Vec::new();
            for t in toks {
                if let Some(d) = t.strip_prefix('D') {
                    dets.push(
                        d.parse::<u32>()
                            .map_err(|_| parse_err(ln + 1, format!("bad detector {t}")))?,
                    );
                } else if let Some(l) = t.strip_prefix('L') {
                    obs.push(
                        l.parse::<u32>()
                            .map_err(|_| parse_err(ln + 1, format!("bad observable {t}")))?,
                    );
                } else {
                    return Err(parse_err(ln + 1, format!("unexpected token {t}")));
                }
            }
            dets.sort_unstable();
            obs.sort_unstable();
            priors.push(p);
            det_of_mech.push(dets);
            obs_of_mech.push(obs);
        }
        if det_of_mech.len() != num_mechanisms {
            return Err(parse_err(
                0,
                format!(
                    "expected {num_mechanisms} mechanisms, found {}",
                    det_of_mech.len()
                ),
            ));
        }
        let mut mech_of_det = vec![Vec::new(); num_detectors];
        for (m, dets) in det_of_mech.iter().enumerate() {
            for &d in dets {
                if d as usize >= num_detectors {
                    return Err(parse_err(0, format!("detector {d} out of range")));
                }
                mech_of_det[d as usize].push(m as u32);
            }
        }
        Ok(MemoryExperiment {
            rounds,
            basis,
            num_detectors,
            num_mechanisms,
            num_observables,
            det_of_mech,
            mech_of_det,
            priors,
            obs_of_mech,
            num_data,
        })
    }
}

/// Builds the space-time decoding problem for an `r`-round memory experiment
/// in the given basis. With `p_meas = 0` the measurement mechanisms and the
/// vacuous final difference layer are omitted, so one round reduces exactly
/// to code-capacity decoding.
pub fn build_memory_experiment(
    code: &CssCode,
    rounds: usize,
    basis: Basis,
    noise: &NoiseModel,
) -> Result<MemoryExperiment> {
    if rounds < 1 {
        return Err(Error::BadConfig("rounds must be >= 1".into()));
    }
    noise.validate()?;
    let (checks, logicals) = match basis {
        // Z-basis memory tracks bit flips caught by the Z stabilizers
        Basis::Z => (code.h_z(), code.logical_z()),
        Basis::X => (code.h_x(), code.logical_x()),
    };
    let n = code.n();
    let c = checks.rows();
    let k = code.k();
    let with_meas = noise.p_meas > 0.0;
    let layers = if with_meas { rounds + 1 } else { rounds };
    let num_detectors = layers * c;
    let data_prior = 2.0 / 3.0 * noise.p_data;

    let checks_of_qubit = checks.transpose();
    let mut logicals_of_qubit = vec![Vec::new(); n];
    for li in 0..k {
        for q in logicals.row_vec(li).iter_ones() {
            logicals_of_qubit[q].push(li as u32);
        }
    }

    let num_mechanisms = rounds * n + if with_meas { rounds * c } else { 0 };
    let mut det_of_mech = Vec::with_capacity(num_mechanisms);
    let mut obs_of_mech = Vec::with_capacity(num_mechanisms);
    let mut priors = Vec::with_capacity(num_mechanisms);
    for t in 0..rounds {
        for q in 0..n {
            let dets: Vec<u32> = checks_of_qubit
                .row(q)
                .iter()
                .map(|&j| (t * c) as u32 + j)
                .collect();
            det_of_mech.push(dets);
            obs_of_mech.push(logicals_of_qubit[q].clone());
            priors.push(data_prior);
        }
    }
    if with_meas {
        for t in 0..rounds {
            for j in 0..c {
                let mut dets = vec![(t * c + j) as u32];
                if t + 1 < layers {
                    dets.push(((t + 1) * c + j) as u32);
                }
                det_of_mech.push(dets);
                obs_of_mech.push(Vec::new());
                priors.push(noise.p_meas);
            }
        }
    }
    let mut mech_of_det = vec![Vec::new(); num_detectors];
    for (m, dets) in det_of_mech.iter().enumerate() {
        for &d in dets {
            mech_of_det[d as usize].push(m as u32);
        }
    }
    Ok(MemoryExperiment {
        rounds,
        basis,
        num_detectors,
        num_mechanisms,
        num_observables: k,
        det_of_mech,
        mech_of_det,
        priors,
        obs_of_mech,
        num_data: n,
    })
}

/// One perfect syndrome round under i.i.d. depolarizing data noise.
pub fn code_capacity_experiment(code: &CssCode, basis: Basis, p: f64) -> Result<MemoryExperiment> {
    build_memory_experiment(code, 1, basis, &NoiseModel::code_capacity(p))
}

/// Gate-by-gate circuit-level propagation is not implemented; the interface
/// exists so callers can detect the capability.
pub fn build_circuit_level_experiment(
    _code: &CssCode,
    _rounds: usize,
    _basis: Basis,
    _p: f64,
) -> Result<MemoryExperiment> {
    Err(Error::Unsupported(
        "circuit-level noise is not modeled; use the phenomenological experiment".into(),
    ))
}

/// Sampled syndromes and observable flips, one row per shot.
#[derive(Clone, Debug)]
pub struct ShotBatch {
    pub shots: usize,
    pub syndromes: BitMatrix,
    pub observables: BitMatrix,
}

/// Deterministic mechanism vector for one shot: Bernoulli per mechanism,
/// drawn with geometric skips over each run of equal priors.
pub fn sample_error(exp: &MemoryExperiment, seed: u64, shot: u64) -> BitVec {
    let mut rng = stream_rng(seed, shot);
    let mut error = BitVec::zeros(exp.num_mechanisms);
    let mut start = 0usize;
    while start < exp.num_mechanisms {
        let p = exp.priors[start];
        let mut end = start + 1;
        while end < exp.num_mechanisms && exp.priors[end] == p {
            end += 1;
        }
        if p >= 1.0 {
            for m in start..end {
                error.set(m, true);
            }
        } else if p > 0.0 {
            let ln1p = (1.0 - p).ln();
            let mut idx = start;
            loop {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let skip = (u.ln() / ln1p).floor() as usize;
                idx = idx.saturating_add(skip);
                if idx >= end {
                    break;
                }
                error.set(idx, true);
                idx += 1;
            }
        }
        start = end;
    }
    error
}

/// Samples a batch of shots; reproducible under a fixed seed, parallel over
/// shot indices.
pub fn sample(exp: &MemoryExperiment, shots: usize, seed: u64) -> ShotBatch {
    let rows: Vec<(BitVec, BitVec)> = (0..shots as u64)
        .into_par_iter()
        .map(|shot| {
            let e = sample_error(exp, seed, shot);
            (exp.syndrome_of(&e), exp.observable_of(&e))
        })
        .collect();
    let mut syndromes = BitMatrix::zeros(shots, exp.num_detectors);
    let mut observables = BitMatrix::zeros(shots, exp.num_observables);
    for (i, (s, o)) in rows.into_iter().enumerate() {
        syndromes.row_mut(i).copy_from_slice(s.words());
        observables.row_mut(i).copy_from_slice(o.words());
    }
    ShotBatch {
        shots,
        syndromes,
        observables,
    }
}

#[derive(Serialize, Deserialize)]
struct ShotHeader {
    shots: usize,
    detectors: usize,
    observables: usize,
}

impl ShotBatch {
    /// Packed-bit binary with a JSON header line: per shot, the syndrome bits
    /// then the observable bits, each padded to a byte boundary, LSB first.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let header = serde_json::to_string(&ShotHeader {
            shots: self.shots,
            detectors: self.syndromes.cols(),
            observables: self.observables.cols(),
        })
        .expect("serializable");
        writeln!(w, "{header}")?;
        let sb = self.syndromes.cols().div_ceil(8);
        let ob = self.observables.cols().div_ceil(8);
        for i in 0..self.shots {
            let mut buf = vec![0u8; sb + ob];
            for (j, byte) in buf[..sb].iter_mut().enumerate() {
                for bit in 0..8 {
                    let col = j * 8 + bit;
                    if col < self.syndromes.cols() && self.syndromes.get(i, col) {
                        *byte |= 1 << bit;
                    }
                }
            }
            for (j, byte) in buf[sb..].iter_mut().enumerate() {
                for bit in 0..8 {
                    let col = j * 8 + bit;
                    if col < self.observables.cols() && self.observables.get(i, col) {
                        *byte |= 1 << bit;
                    }
                }
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<ShotBatch> {
        let mut reader = std::io::BufReader::new(r);
        let mut header = String::new();
        reader
            .read_line(&mut header)
            .map_err(|e| Error::BadConfig(format!("shot file: {e}")))?;
        let h: ShotHeader = serde_json::from_str(header.trim())
            .map_err(|e| Error::BadConfig(format!("shot header: {e}")))?;
        let sb = h.detectors.div_ceil(8);
        let ob = h.observables.div_ceil(8);
        let mut syndromes = BitMatrix::zeros(h.shots, h.detectors);
        let mut observables = BitMatrix::zeros(h.shots, h.observables);
        let mut buf = vec![0u8; sb + ob];
        for i in 0..h.shots {
            reader
                .read_exact(&mut buf)
                .map_err(|e| Error::BadConfig(format!("shot file truncated: {e}")))?;
            for col in 0..h.detectors {
                if buf[col / 8] >> (col % 8) & 1 == 1 {
                    syndromes.set(i, col, true);
                }
            }
            for col in 0..h.observables {
                if buf[sb + col / 8] >> (col % 8) & 1 == 1 {
                    observables.set(i, col, true);
                }
            }
        }
        Ok(ShotBatch {
            shots: h.shots,
            syndromes,
            observables,
        })
    }
}

/// Proper edge coloring of the bipartite Tanner graph with `max degree`
/// colors, by alternating-path recoloring. Each color class is one CNOT layer
/// touching every check and every qubit at most once.
pub fn edge_coloring_schedule(h: &SparseGf2Matrix) -> Vec<Vec<(u32, u32)>> {
    let nch = h.rows();
    let ncol = h.cols();
    let mut deg: usize = h.row_weights().into_iter().max().unwrap_or(0);
    deg = deg.max(h.col_weights().into_iter().max().unwrap_or(0));
    if deg == 0 {
        return Vec::new();
    }
    let mut ccol: Vec<Vec<Option<u32>>> = vec![vec![None; deg]; nch];
    let mut qcol: Vec<Vec<Option<u32>>> = vec![vec![None; deg]; ncol];
    for u in 0..nch {
        for &v in h.row(u) {
            let v = v as usize;
            let fu = (0..deg)
                .find(|&c| ccol[u][c].is_none())
                .expect("degree bound");
            let fv = (0..deg)
                .find(|&c| qcol[v][c].is_none())
                .expect("degree bound");
            if fu != fv {
                // flip the alternating fu/fv path starting at v
                let mut chain: Vec<(usize, usize, usize)> = Vec::new();
                let mut node = v;
                let mut on_check = false;
                let mut col = fu;
                loop {
                    let nxt = if on_check {
                        ccol[node][col]
                    } else {
                        qcol[node][col]
                    };
                    let Some(nxt) = nxt else { break };
                    let nxt = nxt as usize;
                    if on_check {
                        chain.push((node, nxt, col));
                    } else {
                        chain.push((nxt, node, col));
                    }
                    node = nxt;
                    on_check = !on_check;
                    col = if col == fu { fv } else { fu };
                }
                for &(cu, cv, cc) in &chain {
                    ccol[cu][cc] = None;
                    qcol[cv][cc] = None;
                }
                for &(cu, cv, cc) in &chain {
                    let nc = if cc == fu { fv } else { fu };
                    ccol[cu][nc] = Some(cv as u32);
                    qcol[cv][nc] = Some(cu as u32);
                }
            }
            ccol[u][fu] = Some(v as u32);
            qcol[v][fu] = Some(u as u32);
        }
    }
    let mut layers: Vec<Vec<(u32, u32)>> = vec![Vec::new(); deg];
    for (u, colors) in ccol.iter().enumerate() {
        for (c, slot) in colors.iter().enumerate() {
            if let Some(v) = slot {
                layers[c].push((u as u32, *v));
            }
        }
    }
    layers.retain(|l| !l.is_empty());
    layers
}
