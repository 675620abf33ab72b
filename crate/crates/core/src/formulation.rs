//! SIR arithmetic, the big-M model and solution bookkeeping.
//!
//! A terminal `t` served by cluster `C` is covered when
//!
//! ```text
//! sum_{b in C} a_tb p_b - delta_t * sum_{b not in C} a_tb p_b >= delta_t * N
//! ```
//!
//! The big-M model linearizes `z_bl * y_tb` with `v_tbl` and switches the
//! SIR row off through `M_t (1 - x_t)`.

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::instance::Instance;
use crate::model::{MipModel, Row, RowTag, Sense, VarKind};

/// Relative tolerance on the SIR inequality.
pub const TOL_FEAS: f64 = 1e-9;

/// Index layout of the `(x, z, y, v)` variable vector shared by every
/// SPCAP model. Level arguments are 0-based (`l = 0` is `P_1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpcapVars {
    pub n_t: usize,
    pub n_b: usize,
    pub n_l: usize,
}

impl SpcapVars {
    pub fn of(inst: &Instance) -> Self {
        SpcapVars {
            n_t: inst.num_terminals(),
            n_b: inst.num_bases(),
            n_l: inst.num_levels(),
        }
    }

    pub fn x(&self, t: usize) -> usize {
        t
    }

    pub fn z(&self, b: usize, l: usize) -> usize {
        self.n_t + b * self.n_l + l
    }

    pub fn y(&self, t: usize, b: usize) -> usize {
        self.n_t + self.n_b * self.n_l + t * self.n_b + b
    }

    pub fn v(&self, t: usize, b: usize, l: usize) -> usize {
        self.n_t + self.n_b * self.n_l + self.n_t * self.n_b + (t * self.n_b + b) * self.n_l + l
    }

    pub fn count(&self) -> usize {
        self.n_t + self.n_b * self.n_l + self.n_t * self.n_b * (1 + self.n_l)
    }

    pub fn kind(&self, j: usize) -> VarKind {
        let mut j = j;
        if j < self.n_t {
            return VarKind::X(j);
        }
        j -= self.n_t;
        if j < self.n_b * self.n_l {
            return VarKind::Z(j / self.n_l, j % self.n_l);
        }
        j -= self.n_b * self.n_l;
        if j < self.n_t * self.n_b {
            return VarKind::Y(j / self.n_b, j % self.n_b);
        }
        j -= self.n_t * self.n_b;
        let (tb, l) = (j / self.n_l, j % self.n_l);
        VarKind::V(tb / self.n_b, tb % self.n_b, l)
    }
}

/// Emitted power of every base for a level assignment.
pub fn powers(inst: &Instance, power_level: &[usize]) -> Vec<f64> {
    power_level.iter().map(|&l| inst.power(l)).collect()
}

/// Useful and interfering received power at `t`.
fn received(inst: &Instance, powers: &[f64], cluster: &[usize], t: usize) -> (f64, f64) {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (b, (&a, &p)) in inst.atten[t].iter().zip(powers).enumerate() {
        if cluster.contains(&b) {
            signal += a * p;
        } else {
            interference += a * p;
        }
    }
    (signal, interference)
}

/// Signal-to-interference ratio of `t` when served by `cluster`.
pub fn sir_value(inst: &Instance, powers: &[f64], cluster: &[usize], t: usize) -> f64 {
    let (signal, interference) = received(inst, powers, cluster, t);
    signal / (inst.noise + interference)
}

/// SIR inequality with relative tolerance [`TOL_FEAS`]. The tolerance is
/// scaled by `max(delta N, signal)`, which never grows when the signal
/// shrinks or interference grows, so coverage stays monotone.
pub fn is_served(inst: &Instance, powers: &[f64], cluster: &[usize], t: usize) -> bool {
    let (signal, interference) = received(inst, powers, cluster, t);
    let delta = inst.delta[t];
    let target = delta * inst.noise;
    let tol = TOL_FEAS * target.max(signal);
    signal - delta * interference >= target - tol
}

/// Per-row big-M: `delta_t * sum_b a_tb P_max + delta_t * N`.
pub fn big_m_value(inst: &Instance, t: usize) -> f64 {
    let delta = inst.delta[t];
    delta * inst.atten[t].iter().sum::<f64>() * inst.p_max() + delta * inst.noise
}

/// Variables and objective shared by all SPCAP formulations, plus the GUB
/// and linearization rows.
pub(crate) fn base_model(inst: &Instance) -> MipModel {
    let vars = SpcapVars::of(inst);
    let mut m = MipModel::default();
    for j in 0..vars.count() {
        let kind = vars.kind(j);
        let obj = match kind {
            VarKind::X(t) => inst.revenue[t] + inst.coop_cost[t],
            VarKind::Y(t, _) => -inst.coop_cost[t],
            VarKind::Z(..) | VarKind::V(..) => 0.0,
        };
        m.add_var(kind, obj);
    }
    for b in 0..vars.n_b {
        m.add_row(Row {
            coeffs: (0..vars.n_l).map(|l| (vars.z(b, l), 1.0)).collect(),
            sense: Sense::Le,
            rhs: 1.0,
            tag: RowTag::Gub { base: b },
        });
    }
    for t in 0..vars.n_t {
        for b in 0..vars.n_b {
            for l in 0..vars.n_l {
                let (v, z, y) = (vars.v(t, b, l), vars.z(b, l), vars.y(t, b));
                let (terminal, base, level) = (t, b, l);
                m.add_row(Row {
                    coeffs: vec![(v, 1.0), (z, -1.0)],
                    sense: Sense::Le,
                    rhs: 0.0,
                    tag: RowTag::LinZ { terminal, base, level },
                });
                m.add_row(Row {
                    coeffs: vec![(v, 1.0), (y, -1.0)],
                    sense: Sense::Le,
                    rhs: 0.0,
                    tag: RowTag::LinY { terminal, base, level },
                });
                m.add_row(Row {
                    coeffs: vec![(v, 1.0), (z, -1.0), (y, -1.0)],
                    sense: Sense::Ge,
                    rhs: -1.0,
                    tag: RowTag::LinZy { terminal, base, level },
                });
            }
        }
    }
    m
}

/// The big-M SIR row of terminal `t`:
/// `(1+d) sum a P v - d sum a P z + M (1 - x) >= d N`, with the constant
/// `M` moved to the right-hand side.
pub fn sir_row(inst: &Instance, t: usize) -> Row {
    let vars = SpcapVars::of(inst);
    let delta = inst.delta[t];
    let big_m = big_m_value(inst, t);
    let mut coeffs = Vec::with_capacity(1 + 2 * vars.n_b * vars.n_l);
    for b in 0..vars.n_b {
        let a = inst.atten[t][b];
        if a == 0.0 {
            continue;
        }
        for (l, &p) in inst.levels.iter().enumerate() {
            coeffs.push((vars.v(t, b, l), (1.0 + delta) * a * p));
            coeffs.push((vars.z(b, l), -delta * a * p));
        }
    }
    coeffs.push((vars.x(t), -big_m));
    Row {
        coeffs,
        sense: Sense::Ge,
        rhs: delta * inst.noise - big_m,
        tag: RowTag::Sir { terminal: t },
    }
}

/// The pure binary big-M formulation with
/// `|T| + |B||L| + |T||B| + |T||B||L|` variables and
/// `|T| + |B| + 3|T||B||L|` rows.
pub fn build_big_m_model(inst: &Instance) -> MipModel {
    let mut m = base_model(inst);
    let sir: Vec<Row> = (0..inst.num_terminals()).map(|t| sir_row(inst, t)).collect();
    // SIR rows first, matching the textbook row order.
    let rest = std::mem::take(&mut m.rows);
    m.rows = sir;
    m.rows.extend(rest);
    m
}

/// Power level per base (0 = off) and serving cluster per terminal, with
/// the service flags they imply.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CandidateSolution {
    pub power_level: Vec<usize>,
    /// Sorted, duplicate-free base indices.
    pub cluster: Vec<Vec<usize>>,
    pub served: Vec<bool>,
}

impl CandidateSolution {
    /// All bases off, no clusters, nobody served.
    pub fn empty(inst: &Instance) -> Self {
        CandidateSolution {
            power_level: vec![0; inst.num_bases()],
            cluster: vec![Vec::new(); inst.num_terminals()],
            served: vec![false; inst.num_terminals()],
        }
    }

    pub fn num_served(&self) -> usize {
        self.served.iter().filter(|&&s| s).count()
    }

    /// Largest cluster among served terminals.
    pub fn max_cluster_size(&self) -> usize {
        self.cluster
            .iter()
            .zip(&self.served)
            .filter(|(_, &s)| s)
            .map(|(c, _)| c.len())
            .max()
            .unwrap_or(0)
    }

    /// Materializes `(x, z, y, v)` in [`SpcapVars`] order.
    pub fn to_vector(&self, inst: &Instance) -> Vec<f64> {
        let vars = SpcapVars::of(inst);
        let mut out = vec![0.0; vars.count()];
        for (t, &s) in self.served.iter().enumerate() {
            if s {
                out[vars.x(t)] = 1.0;
            }
        }
        for (b, &lvl) in self.power_level.iter().enumerate() {
            if lvl > 0 {
                out[vars.z(b, lvl - 1)] = 1.0;
            }
        }
        for (t, c) in self.cluster.iter().enumerate() {
            for &b in c {
                out[vars.y(t, b)] = 1.0;
                let lvl = self.power_level[b];
                if lvl > 0 {
                    out[vars.v(t, b, lvl - 1)] = 1.0;
                }
            }
        }
        out
    }

    /// Reads `(z, y)` from a 0/1 vector and re-derives the service flags.
    pub fn from_vector(inst: &Instance, values: &[f64]) -> Self {
        let vars = SpcapVars::of(inst);
        let power_level = (0..vars.n_b)
            .map(|b| {
                (0..vars.n_l)
                    .find(|&l| values[vars.z(b, l)] > 0.5)
                    .map_or(0, |l| l + 1)
            })
            .collect::<Vec<_>>();
        let cluster = (0..vars.n_t)
            .map(|t| (0..vars.n_b).filter(|&b| values[vars.y(t, b)] > 0.5).collect())
            .collect::<Vec<_>>();
        derive_full_solution(inst, &power_level, &cluster)
    }
}

/// Completes `(z, y)` with the service flags that maximize the objective:
/// a terminal is served exactly when its SIR inequality holds.
pub fn derive_full_solution(
    inst: &Instance,
    power_level: &[usize],
    cluster: &[Vec<usize>],
) -> CandidateSolution {
    let p = powers(inst, power_level);
    let cluster: Vec<Vec<usize>> = cluster
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.sort_unstable();
            c.dedup();
            c
        })
        .collect();
    let served = (0..inst.num_terminals())
        .map(|t| !cluster[t].is_empty() && is_served(inst, &p, &cluster[t], t))
        .collect();
    CandidateSolution {
        power_level: power_level.to_vec(),
        cluster,
        served,
    }
}

/// `sum_t r_t x_t - sum_t c_t (|C_t| - x_t)`.
pub fn objective_value(inst: &Instance, sol: &CandidateSolution) -> f64 {
    (0..inst.num_terminals())
        .map(|t| {
            let x = if sol.served[t] { 1.0 } else { 0.0 };
            inst.revenue[t] * x - inst.coop_cost[t] * (sol.cluster[t].len() as f64 - x)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolutionViolation {
    WrongLength { field: &'static str, expected: usize, found: usize },
    LevelOutOfRange { base: usize, level: usize },
    UnknownBase { terminal: usize, base: usize },
    UnsortedCluster { terminal: usize },
    ServedWithoutSir { terminal: usize, sir: f64 },
}

impl fmt::Display for SolutionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolutionViolation::WrongLength { field, expected, found } => {
                write!(f, "{field} has {found} entries, expected {expected}")
            }
            SolutionViolation::LevelOutOfRange { base, level } => {
                write!(f, "base {base} uses level {level} outside the ladder")
            }
            SolutionViolation::UnknownBase { terminal, base } => {
                write!(f, "cluster of terminal {terminal} names unknown base {base}")
            }
            SolutionViolation::UnsortedCluster { terminal } => {
                write!(f, "cluster of terminal {terminal} is not sorted and duplicate-free")
            }
            SolutionViolation::ServedWithoutSir { terminal, sir } => {
                write!(f, "terminal {terminal} marked served with SIR {sir:.6}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<SolutionViolation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-verifies a solution from the physics, independently of any model
/// matrix: structural invariants first, then the SIR of every served
/// terminal.
pub fn check_feasibility(inst: &Instance, sol: &CandidateSolution) -> FeasibilityReport {
    let mut violations = Vec::new();
    let (n_t, n_b) = (inst.num_terminals(), inst.num_bases());
    for (field, found, expected) in [
        ("power_level", sol.power_level.len(), n_b),
        ("cluster", sol.cluster.len(), n_t),
        ("served", sol.served.len(), n_t),
    ] {
        if found != expected {
            violations.push(SolutionViolation::WrongLength { field, expected, found });
        }
    }
    if !violations.is_empty() {
        return FeasibilityReport { violations };
    }
    for (b, &lvl) in sol.power_level.iter().enumerate() {
        if lvl > inst.num_levels() {
            violations.push(SolutionViolation::LevelOutOfRange { base: b, level: lvl });
        }
    }
    for (t, c) in sol.cluster.iter().enumerate() {
        if let Some(&b) = c.iter().find(|&&b| b >= n_b) {
            violations.push(SolutionViolation::UnknownBase { terminal: t, base: b });
        }
        if c.windows(2).any(|w| w[0] >= w[1]) {
            violations.push(SolutionViolation::UnsortedCluster { terminal: t });
        }
    }
    if !violations.is_empty() {
        return FeasibilityReport { violations };
    }
    let p = powers(inst, &sol.power_level);
    for t in 0..n_t {
        if sol.served[t] && !is_served(inst, &p, &sol.cluster[t], t) {
            violations.push(SolutionViolation::ServedWithoutSir {
                terminal: t,
                sir: sir_value(inst, &p, &sol.cluster[t], t),
            });
        }
    }
    FeasibilityReport { violations }
}

#[derive(Debug, Error)]
pub enum SolutionFileError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Text form: `P <base> <level>` per base, `C <terminal> <bases...>` per
/// terminal with a nonempty cluster, and an `OBJ <value>` footer.
pub fn save_solution(inst: &Instance, sol: &CandidateSolution) -> String {
    let mut s = String::new();
    for (b, &lvl) in sol.power_level.iter().enumerate() {
        let _ = writeln!(s, "P {} {lvl}", inst.bases[b]);
    }
    for (t, c) in sol.cluster.iter().enumerate() {
        if c.is_empty() {
            continue;
        }
        let _ = write!(s, "C {}", inst.terminals[t]);
        for &b in c {
            let _ = write!(s, " {}", inst.bases[b]);
        }
        s.push('\n');
    }
    let _ = writeln!(s, "OBJ {:e}", objective_value(inst, sol));
    s
}

/// Parses the solution text, re-deriving service flags. Returns the
/// solution and the `OBJ` footer value, if present.
pub fn load_solution(
    inst: &Instance,
    text: &str,
) -> Result<(CandidateSolution, Option<f64>), SolutionFileError> {
    let base_index = |id: &str, line: usize| {
        inst.bases.iter().position(|b| b == id).ok_or(SolutionFileError::Parse {
            line,
            message: format!("unknown base {id:?}"),
        })
    };
    let mut levels = vec![0; inst.num_bases()];
    let mut clusters = vec![Vec::new(); inst.num_terminals()];
    let mut obj = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let bad = |message: String| SolutionFileError::Parse { line, message };
        match toks.as_slice() {
            [] => {}
            ["P", b, lvl] => {
                let lvl: usize = lvl.parse().map_err(|_| bad(format!("bad level {lvl:?}")))?;
                if lvl > inst.num_levels() {
                    return Err(bad(format!("level {lvl} outside the ladder")));
                }
                levels[base_index(b, line)?] = lvl;
            }
            ["C", t, rest @ ..] => {
                let t = inst
                    .terminals
                    .iter()
                    .position(|x| x == t)
                    .ok_or_else(|| bad(format!("unknown terminal {t:?}")))?;
                clusters[t] = rest
                    .iter()
                    .map(|b| base_index(b, line))
                    .collect::<Result<_, _>>()?;
            }
            ["OBJ", v] => obj = Some(v.parse().map_err(|_| bad(format!("bad objective {v:?}")))?),
            _ => return Err(bad(format!("unrecognized line {raw:?}"))),
        }
    }
    Ok((derive_full_solution(inst, &levels, &clusters), obj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::tiny1;

    #[test]
    fn sir_of_lone_server() {
        let inst = Instance::new(
            vec!["b".into()],
            vec!["t".into()],
            vec![2.0],
            vec![vec![0.6]],
            vec![1.0],
            0.1,
            vec![1.0],
            vec![0.1],
        )
        .unwrap();
        assert!((sir_value(&inst, &[2.0], &[0], 0) - 12.0).abs() < 1e-12);
        assert_eq!(sir_value(&inst, &[2.0], &[], 0), 0.0);
        assert_eq!(sir_value(&inst, &[0.0], &[0], 0), 0.0);
    }

    #[test]
    fn tiny1_service() {
        let inst = tiny1();
        assert!(is_served(&inst, &[2.0, 0.0], &[0], 0));
        let sir = sir_value(&inst, &[2.0, 2.0], &[0], 0);
        assert!((sir - 1.2 / 0.7).abs() < 1e-12);
        assert!(is_served(&inst, &[2.0, 2.0], &[0], 0));
        assert!(!is_served(&inst, &[2.0, 2.0], &[], 0));
        // Exactly at the threshold counts as served.
        assert!(is_served(&inst, &[1.0, 1.0], &[0], 0));
    }

    #[test]
    fn big_m_values() {
        let inst = tiny1();
        assert!((big_m_value(&inst, 0) - 2.85).abs() < 1e-12);
        let mut dark = tiny1();
        dark.atten[0] = vec![0.0, 0.0];
        assert!((big_m_value(&dark, 0) - 0.15).abs() < 1e-15);
        let mut doubled = tiny1();
        doubled.levels = vec![2.0, 4.0];
        let m1 = big_m_value(&inst, 0);
        let m2 = big_m_value(&doubled, 0);
        assert!((m2 - (2.0 * m1 - 1.5 * 0.1)).abs() < 1e-12);
    }

    #[test]
    fn tiny1_model_shape() {
        let inst = tiny1();
        let m = build_big_m_model(&inst);
        assert_eq!(m.num_vars(), 11);
        assert_eq!(m.num_rows(), 15);
        let vars = SpcapVars::of(&inst);
        let sir = &m.rows[0];
        for b in 0..2 {
            for l in 0..2 {
                let coef = sir
                    .coeffs
                    .iter()
                    .find(|&&(j, _)| j == vars.v(0, b, l))
                    .unwrap()
                    .1;
                assert!((coef - 2.5 * inst.atten[0][b] * inst.levels[l]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layout_round_trip() {
        let vars = SpcapVars { n_t: 3, n_b: 2, n_l: 4 };
        for j in 0..vars.count() {
            let back = match vars.kind(j) {
                VarKind::X(t) => vars.x(t),
                VarKind::Z(b, l) => vars.z(b, l),
                VarKind::Y(t, b) => vars.y(t, b),
                VarKind::V(t, b, l) => vars.v(t, b, l),
            };
            assert_eq!(back, j);
        }
    }

    #[test]
    fn derived_objectives_on_tiny1() {
        let inst = tiny1();
        let s = derive_full_solution(&inst, &[2, 0], &[vec![0]]);
        assert!(s.served[0]);
        assert_eq!(objective_value(&inst, &s), 10.0);
        let s = derive_full_solution(&inst, &[2, 2], &[vec![0, 1]]);
        assert!(s.served[0]);
        assert_eq!(objective_value(&inst, &s), 9.0);
        let s = derive_full_solution(&inst, &[0, 0], &[vec![]]);
        assert!(!s.served[0]);
        assert_eq!(objective_value(&inst, &s), 0.0);
    }

    #[test]
    fn single_server_pays_no_cooperation() {
        let inst = tiny1();
        let s = derive_full_solution(&inst, &[1, 0], &[vec![0]]);
        assert!(s.served[0]);
        assert_eq!(objective_value(&inst, &s), inst.revenue[0]);
    }

    #[test]
    fn checker_flags_false_service() {
        let inst = tiny1();
        let good = derive_full_solution(&inst, &[2, 0], &[vec![0]]);
        assert!(check_feasibility(&inst, &good).is_feasible());
        let bad = CandidateSolution {
            power_level: vec![0, 2],
            cluster: vec![vec![0]],
            served: vec![true],
        };
        let report = check_feasibility(&inst, &bad);
        assert!(matches!(
            report.violations[..],
            [SolutionViolation::ServedWithoutSir { terminal: 0, .. }]
        ));
    }

    #[test]
    fn derived_point_satisfies_model() {
        let inst = tiny1();
        let m = build_big_m_model(&inst);
        for p0 in 0..=2 {
            for p1 in 0..=2 {
                for mask in 0..4usize {
                    let c: Vec<usize> = (0..2).filter(|b| mask >> b & 1 == 1).collect();
                    let s = derive_full_solution(&inst, &[p0, p1], &[c]);
                    let v = s.to_vector(&inst);
                    assert!(m.violated_rows(&v, 1e-9).is_empty());
                    assert!((m.objective_value(&v) - objective_value(&inst, &s)).abs() < 1e-12);
                    assert_eq!(CandidateSolution::from_vector(&inst, &v), s);
                }
            }
        }
    }

    #[test]
    fn solution_text_round_trip() {
        let inst = tiny1();
        let s = derive_full_solution(&inst, &[2, 1], &[vec![0, 1]]);
        let text = save_solution(&inst, &s);
        assert!(text.contains("P b1 2\nP b2 1\nC t1 b1 b2\nOBJ"));
        let (back, obj) = load_solution(&inst, &text).unwrap();
        assert_eq!(back, s);
        assert_eq!(obj, Some(objective_value(&inst, &s)));
        assert!(load_solution(&inst, "P b9 1\n").is_err());
    }
}
