//! GUB cover inequalities for the SIR rows.
//!
//! A cut for terminal `t` names a serving set `Δ` with level caps `λ`
//! (0 meaning off) and an interfering set `Γ` with level floors `q`, chosen
//! so that the *witness* (each serving base at exactly its cap inside the
//! cluster, each interferer at exactly its floor outside it, every other
//! base off, cluster = `Δ`) leaves `t` uncovered. Its row is
//!
//! ```text
//! x_t + sum_{b in Δ} (y_tb - sum_{l > λ_b} v_tbl)
//!     + sum_{g in Γ} sum_{l >= q_g} (z_gl - v_tgl)
//!     - sum_{b not in Δ ∪ Γ} y_tb               <= |Δ| + |Γ|
//! ```
//!
//! The left side reaches `|Δ| + |Γ| + 1` only when `t` is served by
//! exactly the cluster `Δ`, every serving base emits at most its cap and
//! every interferer emits at least its floor from outside the cluster.
//! Lower serving power and higher interference only lower the SIR, so any
//! such configuration is dominated by the witness and the cut is valid.
//! The `- v_tgl` and `- y_tb` terms keep the row valid when an
//! interferer, or any other base, joins the cluster.
//!
//! The empty cluster never serves; [`cluster_row`] states `x_t <= sum_b
//! y_tb` separately.
//!
//! [`PowerCoverCut`] is the cover form of the signal requirement alone: a
//! served terminal needs `sum_b a_tb P_b >= δ_t N` from its cluster. If
//! caps `λ` keep that sum short even with every base in the cluster, then
//! some cluster base must exceed its cap:
//!
//! ```text
//! x_t <= sum_b sum_{l > λ_b} v_tbl
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::formulation::{derive_full_solution, is_served, powers, SpcapVars};
use crate::instance::Instance;
use crate::model::{Row, RowTag, Sense};

/// Minimum violation for a separated cut to be reported.
pub const TOL_CUT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GubCoverCut {
    pub terminal: usize,
    /// `(base, level cap)`, levels 1-based, 0 for off.
    pub serving: Vec<(usize, usize)>,
    /// `(base, level floor)`, levels 1-based.
    pub interfering: Vec<(usize, usize)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CutError {
    #[error("malformed cut: {0}")]
    Malformed(&'static str),
    #[error("exhaustive check needs {0} configurations, above the cap")]
    TooLarge(u128),
    #[error("cannot parse cut: {0}")]
    Parse(String),
}

impl GubCoverCut {
    pub fn rhs(&self) -> f64 {
        (self.serving.len() + self.interfering.len()) as f64
    }

    pub fn check_shape(&self, inst: &Instance) -> Result<(), CutError> {
        if self.serving.is_empty() {
            return Err(CutError::Malformed("empty serving set"));
        }
        if self.terminal >= inst.num_terminals() {
            return Err(CutError::Malformed("unknown terminal"));
        }
        let n_l = inst.num_levels();
        let mut seen = vec![false; inst.num_bases()];
        for (i, &(b, l)) in self.serving.iter().chain(&self.interfering).enumerate() {
            if b >= inst.num_bases() {
                return Err(CutError::Malformed("unknown base"));
            }
            let lowest = if i < self.serving.len() { 0 } else { 1 };
            if l < lowest || l > n_l {
                return Err(CutError::Malformed("level outside the ladder"));
            }
            if std::mem::replace(&mut seen[b], true) {
                return Err(CutError::Malformed("serving and interfering sets overlap"));
            }
        }
        Ok(())
    }

    fn involves(&self, b: usize) -> bool {
        self.serving.iter().chain(&self.interfering).any(|&(x, _)| x == b)
    }

    pub fn row(&self, inst: &Instance) -> Row {
        let vars = SpcapVars::of(inst);
        let t = self.terminal;
        let mut coeffs = vec![(vars.x(t), 1.0)];
        for &(b, cap) in &self.serving {
            coeffs.push((vars.y(t, b), 1.0));
            coeffs.extend((cap..vars.n_l).map(|l| (vars.v(t, b, l), -1.0)));
        }
        for &(g, floor) in &self.interfering {
            for l in floor - 1..vars.n_l {
                coeffs.push((vars.z(g, l), 1.0));
                coeffs.push((vars.v(t, g, l), -1.0));
            }
        }
        for b in (0..vars.n_b).filter(|&b| !self.involves(b)) {
            coeffs.push((vars.y(t, b), -1.0));
        }
        Row {
            coeffs,
            sense: Sense::Le,
            rhs: self.rhs(),
            tag: RowTag::Cut { terminal: t },
        }
    }

    /// Power levels and cluster of the witness configuration.
    pub fn witness(&self, inst: &Instance) -> (Vec<usize>, Vec<usize>) {
        let mut levels = vec![0; inst.num_bases()];
        for &(b, l) in self.serving.iter().chain(&self.interfering) {
            levels[b] = l;
        }
        let mut cluster: Vec<usize> = self.serving.iter().map(|&(b, _)| b).collect();
        cluster.sort_unstable();
        (levels, cluster)
    }

    pub fn witness_fails(&self, inst: &Instance) -> bool {
        let (levels, cluster) = self.witness(inst);
        !is_served(inst, &powers(inst, &levels), &cluster, self.terminal)
    }

    /// `lhs - rhs` at `point`; positive means violated.
    pub fn violation(&self, inst: &Instance, point: &[f64]) -> f64 {
        self.row(inst).activity(point) - self.rhs()
    }

    /// `GCI t | b1:λ1 b2:λ2 | g1:q1 ...`
    pub fn to_text(&self, inst: &Instance) -> String {
        let mut s = format!("GCI {} |", inst.terminals[self.terminal]);
        for &(b, l) in &self.serving {
            let _ = write!(s, " {}:{l}", inst.bases[b]);
        }
        s.push_str(" |");
        for &(g, q) in &self.interfering {
            let _ = write!(s, " {}:{q}", inst.bases[g]);
        }
        s
    }

    pub fn parse(inst: &Instance, line: &str) -> Result<Self, CutError> {
        let bad = |m: &str| CutError::Parse(format!("{m} in {line:?}"));
        let rest = line.trim().strip_prefix("GCI").ok_or_else(|| bad("missing GCI"))?;
        let parts: Vec<&str> = rest.split('|').collect();
        if parts.len() != 3 {
            return Err(bad("expected three |-separated fields"));
        }
        let terminal = inst
            .terminals
            .iter()
            .position(|t| t == parts[0].trim())
            .ok_or_else(|| bad("unknown terminal"))?;
        let pairs = |field: &str| -> Result<Vec<(usize, usize)>, CutError> {
            field
                .split_whitespace()
                .map(|tok| {
                    let (b, l) = tok.split_once(':').ok_or_else(|| bad("expected base:level"))?;
                    let b = inst.bases.iter().position(|x| x == b).ok_or_else(|| bad("unknown base"))?;
                    let l = l.parse().map_err(|_| bad("bad level"))?;
                    Ok((b, l))
                })
                .collect()
        };
        let cut = GubCoverCut {
            terminal,
            serving: pairs(parts[1])?,
            interfering: pairs(parts[2])?,
        };
        cut.check_shape(inst)?;
        Ok(cut)
    }
}

fn single(t: usize, server: (usize, usize), interferer: Option<(usize, usize)>) -> GubCoverCut {
    GubCoverCut {
        terminal: t,
        serving: vec![server],
        interfering: interferer.into_iter().collect(),
    }
}

/// `x_t - sum_b y_tb <= 0`: a served terminal has a nonempty cluster.
pub fn cluster_row(inst: &Instance, t: usize) -> Row {
    let vars = SpcapVars::of(inst);
    let mut coeffs = vec![(vars.x(t), 1.0)];
    coeffs.extend((0..vars.n_b).map(|b| (vars.y(t, b), -1.0)));
    Row {
        coeffs,
        sense: Sense::Le,
        rhs: 0.0,
        tag: RowTag::Cut { terminal: t },
    }
}

/// Single-server / single-interferer family. For every `(t, β)` the
/// interferer-free cut uses the largest cap `λ*` whose witness fails (at
/// least 0, since an off server never serves). For every interferer `b`
/// and cap `λ > λ*` the smallest floor `q` whose witness fails is kept,
/// and a pair is dropped when the next cap needs the same floor. Caps up
/// to `λ*` are left out: the interferer-free cut implies them.
pub fn enumerate_relaxed_gcis(inst: &Instance) -> Vec<GubCoverCut> {
    let n_l = inst.num_levels();
    let mut out = Vec::new();
    for t in 0..inst.num_terminals() {
        for beta in 0..inst.num_bases() {
            let lone = (0..=n_l)
                .rev()
                .find(|&cap| single(t, (beta, cap), None).witness_fails(inst))
                .expect("an off server never serves");
            out.push(single(t, (beta, lone), None));
            for b in (0..inst.num_bases()).filter(|&b| b != beta) {
                let floor = |cap: usize| {
                    (1..=n_l).find(|&q| single(t, (beta, cap), Some((b, q))).witness_fails(inst))
                };
                for cap in lone + 1..=n_l {
                    let Some(q) = floor(cap) else { continue };
                    let dominated = cap < n_l && floor(cap + 1) == Some(q);
                    if !dominated {
                        out.push(single(t, (beta, cap), Some((b, q))));
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationConfig {
    pub max_cluster_size: usize,
    pub max_interferers: usize,
    pub tol_cut: f64,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig {
            max_cluster_size: 2,
            max_interferers: 2,
            tol_cut: TOL_CUT,
        }
    }
}

fn subsets_up_to(items: &[usize], max: usize, min: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &it in items {
        let n = out.len();
        for i in 0..n {
            if out[i].len() < max {
                let mut s = out[i].clone();
                s.push(it);
                out.push(s);
            }
        }
    }
    out.retain(|s| s.len() >= min);
    out.sort();
    out
}

/// All vectors in `[lo, hi]^len`, lexicographic.
fn level_vectors(len: usize, lo: usize, hi: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v| {
                (lo..=hi).map(move |l| {
                    let mut v = v.clone();
                    v.push(l);
                    v
                })
            })
            .collect();
    }
    out
}

/// Minimal elements (componentwise) of a set of level vectors.
fn pareto_minimal(vs: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    vs.iter()
        .filter(|v| {
            !vs.iter()
                .any(|w| w != *v && w.iter().zip(v.iter()).all(|(a, b)| a <= b))
        })
        .cloned()
        .collect()
}

/// Bounded-enumeration separation. Serving sets range over bases with
/// positive `y_tb` (up to `max_cluster_size`), interfering sets
/// over bases with positive `z - v` mass (up to `max_interferers`), and
/// interferer floors over the minimal failing level vectors. Returns the
/// cuts violated by more than `tol_cut`, most violated first.
pub fn separate_gci(
    inst: &Instance,
    point: &[f64],
    config: &SeparationConfig,
) -> Vec<(GubCoverCut, f64)> {
    let vars = SpcapVars::of(inst);
    let n_l = vars.n_l;
    let mut found = Vec::new();
    for t in 0..vars.n_t {
        if point[vars.x(t)] <= config.tol_cut {
            continue;
        }
        let servers: Vec<usize> = (0..vars.n_b)
            .filter(|&b| point[vars.y(t, b)] > 1e-9)
            .collect();
        let jammers: Vec<usize> = (0..vars.n_b)
            .filter(|&b| {
                (0..n_l)
                    .map(|l| point[vars.z(b, l)] - point[vars.v(t, b, l)])
                    .sum::<f64>()
                    > 1e-9
            })
            .collect();
        for delta in subsets_up_to(&servers, config.max_cluster_size, 1) {
            let free: Vec<usize> = jammers.iter().copied().filter(|b| !delta.contains(b)).collect();
            let gammas = subsets_up_to(&free, config.max_interferers, 0);
            for caps in level_vectors(delta.len(), 0, n_l) {
                let serving: Vec<(usize, usize)> = delta.iter().copied().zip(caps).collect();
                for gamma in &gammas {
                    let failing: Vec<Vec<usize>> = level_vectors(gamma.len(), 1, n_l)
                        .into_iter()
                        .filter(|q| {
                            GubCoverCut {
                                terminal: t,
                                serving: serving.clone(),
                                interfering: gamma.iter().copied().zip(q.iter().copied()).collect(),
                            }
                            .witness_fails(inst)
                        })
                        .collect();
                    for q in pareto_minimal(failing) {
                        let cut = GubCoverCut {
                            terminal: t,
                            serving: serving.clone(),
                            interfering: gamma.iter().copied().zip(q).collect(),
                        };
                        let viol = cut.violation(inst, point);
                        if viol > config.tol_cut {
                            found.push((cut, viol));
                        }
                    }
                }
            }
        }
    }
    found.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    found
}

/// Cover of the signal requirement for one terminal: `caps[b]` is the
/// highest level of base `b` left out of the right-hand side.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PowerCoverCut {
    pub terminal: usize,
    pub caps: Vec<usize>,
}

impl PowerCoverCut {
    pub fn check_shape(&self, inst: &Instance) -> Result<(), CutError> {
        if self.terminal >= inst.num_terminals()
            || self.caps.len() != inst.num_bases()
            || self.caps.iter().any(|&c| c > inst.num_levels())
        {
            return Err(CutError::Malformed("caps must give a level in 0..=L for every base"));
        }
        Ok(())
    }

    /// True when every base at its cap, all in the cluster, leaves the
    /// terminal uncovered.
    pub fn witness_fails(&self, inst: &Instance) -> bool {
        let all: Vec<usize> = (0..inst.num_bases()).collect();
        !is_served(inst, &powers(inst, &self.caps), &all, self.terminal)
    }

    pub fn row(&self, inst: &Instance) -> Row {
        let vars = SpcapVars::of(inst);
        let t = self.terminal;
        let mut coeffs = vec![(vars.x(t), 1.0)];
        for (b, &cap) in self.caps.iter().enumerate() {
            coeffs.extend((cap..vars.n_l).map(|l| (vars.v(t, b, l), -1.0)));
        }
        Row {
            coeffs,
            sense: Sense::Le,
            rhs: 0.0,
            tag: RowTag::Cut { terminal: t },
        }
    }

    pub fn violation(&self, inst: &Instance, point: &[f64]) -> f64 {
        self.row(inst).violation(point)
    }

    /// Raises caps in `order`, each as far as the witness keeps failing.
    fn lifted(inst: &Instance, t: usize, mut caps: Vec<usize>, order: &[usize]) -> Self {
        for &b in order {
            while caps[b] < inst.num_levels() {
                caps[b] += 1;
                if (PowerCoverCut { terminal: t, caps: caps.clone() }).witness_fails(inst) {
                    continue;
                }
                caps[b] -= 1;
                break;
            }
        }
        PowerCoverCut { terminal: t, caps }
    }
}

/// Two lifted covers per terminal (strongest bases first, then weakest
/// first), deduplicated.
pub fn enumerate_relaxed_covers(inst: &Instance) -> Vec<PowerCoverCut> {
    let mut out = Vec::new();
    for t in 0..inst.num_terminals() {
        let mut order: Vec<usize> = (0..inst.num_bases()).collect();
        order.sort_by(|&a, &b| inst.atten[t][b].total_cmp(&inst.atten[t][a]).then(a.cmp(&b)));
        let zero = vec![0; inst.num_bases()];
        let strong = PowerCoverCut::lifted(inst, t, zero.clone(), &order);
        order.reverse();
        let weak = PowerCoverCut::lifted(inst, t, zero, &order);
        out.push(strong.clone());
        if weak != strong {
            out.push(weak);
        }
    }
    out
}

/// Greedy separation of [`PowerCoverCut`]s: caps grow by the step with the
/// best ratio of `v` mass removed from the right-hand side to signal
/// added, while the witness keeps failing, and are then lifted.
pub fn separate_power_covers(
    inst: &Instance,
    point: &[f64],
    config: &SeparationConfig,
) -> Vec<(PowerCoverCut, f64)> {
    let vars = SpcapVars::of(inst);
    let mut found = Vec::new();
    for t in 0..vars.n_t {
        if point[vars.x(t)] <= config.tol_cut {
            continue;
        }
        let mut caps = vec![0; vars.n_b];
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for b in 0..vars.n_b {
                for to in caps[b] + 1..=vars.n_l {
                    let mut trial = caps.clone();
                    trial[b] = to;
                    if !(PowerCoverCut { terminal: t, caps: trial }).witness_fails(inst) {
                        break;
                    }
                    let gain: f64 = (caps[b]..to).map(|l| point[vars.v(t, b, l)]).sum();
                    let cost = inst.atten[t][b] * (inst.power(to) - inst.power(caps[b]));
                    let ratio = gain / cost.max(f64::MIN_POSITIVE);
                    if gain > 1e-12 && best.is_none_or(|(r, _, _)| ratio > r) {
                        best = Some((ratio, b, to));
                    }
                }
            }
            let Some((_, b, to)) = best else { break };
            caps[b] = to;
        }
        let order: Vec<usize> = (0..vars.n_b).collect();
        let cut = PowerCoverCut::lifted(inst, t, caps, &order);
        let viol = cut.violation(inst, point);
        if viol > config.tol_cut {
            found.push((cut, viol));
        }
    }
    found.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    found
}

/// Configurations above this are refused by [`is_valid_cut`].
pub const VALIDITY_CAP: u128 = 1 << 24;

/// Exhaustive validity check. The row involves only the power variables
/// and terminal `t`'s own cluster variables, so enumerating every power
/// vector and every cluster of `t`, with the derived `x_t` and `v`, covers
/// every complete `(z, y)` as far as the row is concerned.
pub fn is_valid_cut(inst: &Instance, cut: &GubCoverCut) -> Result<bool, CutError> {
    cut.check_shape(inst)?;
    row_is_valid(inst, cut.terminal, &cut.row(inst))
}

/// As [`is_valid_cut`] for a [`PowerCoverCut`].
pub fn is_valid_power_cover(inst: &Instance, cut: &PowerCoverCut) -> Result<bool, CutError> {
    cut.check_shape(inst)?;
    row_is_valid(inst, cut.terminal, &cut.row(inst))
}

/// Exhaustive check of a row over terminal `t`'s own variables and the
/// power variables.
pub fn row_is_valid(inst: &Instance, t: usize, row: &Row) -> Result<bool, CutError> {
    let (n_b, n_l) = (inst.num_bases(), inst.num_levels());
    let radix = n_l as u128 + 1;
    let configs = radix.pow(n_b as u32) << n_b;
    if configs > VALIDITY_CAP {
        return Err(CutError::TooLarge(configs));
    }
    let mut clusters = vec![Vec::new(); inst.num_terminals()];
    let mut levels = vec![0; n_b];
    for code in 0..radix.pow(n_b as u32) as usize {
        let mut rest = code;
        for lvl in levels.iter_mut() {
            *lvl = rest % (n_l + 1);
            rest /= n_l + 1;
        }
        for mask in 0..1usize << n_b {
            clusters[t] = (0..n_b).filter(|b| mask >> b & 1 == 1).collect();
            let point = derive_full_solution(inst, &levels, &clusters).to_vector(inst);
            if row.activity(&point) > row.rhs + 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
