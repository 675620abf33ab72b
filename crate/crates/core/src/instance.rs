//! Problem data: base stations, terminals, power ladder and propagation.
//!
//! An [`Instance`] is immutable once validated. It can be generated from a
//! [`GenConfig`] (power-law path loss with log-uniform shadowing) or read
//! from the line-oriented `SPCAP v1` text format.

use std::fmt;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// A broken [`Instance`] invariant. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoBases,
    NoTerminals,
    NoLevels,
    NonPositiveLevel { index: usize, value: f64 },
    LevelsNotAscending { index: usize },
    DimensionMismatch { field: &'static str, expected: usize, found: usize },
    AttenuationOutOfRange { terminal: usize, base: usize, value: f64 },
    NonPositiveDelta { terminal: usize },
    NonPositiveNoise { value: f64 },
    NonPositiveRevenue { terminal: usize },
    NonPositiveCoopCost { terminal: usize },
    DuplicateId { id: String },
    MalformedId { id: String },
}

impl Violation {
    /// Short name of the invariant this violation breaks.
    pub fn invariant(&self) -> &'static str {
        match self {
            Violation::NoBases | Violation::NoTerminals | Violation::NoLevels => "nonempty",
            Violation::NonPositiveLevel { .. } | Violation::LevelsNotAscending { .. } => "levels",
            Violation::DimensionMismatch { .. } => "dimensions",
            Violation::AttenuationOutOfRange { .. } => "attenuation range",
            Violation::NonPositiveDelta { .. } => "delta",
            Violation::NonPositiveNoise { .. } => "noise",
            Violation::NonPositiveRevenue { .. } => "revenue",
            Violation::NonPositiveCoopCost { .. } => "cooperation cost",
            Violation::DuplicateId { .. } | Violation::MalformedId { .. } => "ids",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.invariant())?;
        match self {
            Violation::NoBases => write!(f, "no base stations"),
            Violation::NoTerminals => write!(f, "no terminals"),
            Violation::NoLevels => write!(f, "no power levels"),
            Violation::NonPositiveLevel { index, value } => {
                write!(f, "P_{} = {value} is not positive", index + 1)
            }
            Violation::LevelsNotAscending { index } => {
                write!(f, "P_{} does not exceed P_{}", index + 1, index)
            }
            Violation::DimensionMismatch { field, expected, found } => {
                write!(f, "{field} has {found} entries, expected {expected}")
            }
            Violation::AttenuationOutOfRange { terminal, base, value } => {
                write!(f, "a[{terminal}][{base}] = {value} outside [0, 1]")
            }
            Violation::NonPositiveDelta { terminal } => {
                write!(f, "SIR threshold of terminal {terminal} is not positive")
            }
            Violation::NonPositiveNoise { value } => write!(f, "noise {value} is not positive"),
            Violation::NonPositiveRevenue { terminal } => {
                write!(f, "revenue of terminal {terminal} is not positive")
            }
            Violation::NonPositiveCoopCost { terminal } => {
                write!(f, "cooperation cost of terminal {terminal} is not positive")
            }
            Violation::DuplicateId { id } => write!(f, "duplicate id {id:?}"),
            Violation::MalformedId { id } => write!(f, "id {id:?} is empty or contains whitespace"),
        }
    }
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("line {line}, {field}: {message}")]
    Parse {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("invalid instance: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid generator config: {0}")]
    Config(&'static str),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Problem data. Attenuation is indexed `atten[terminal][base]`; power
/// levels are the ascending ladder `P_1 < ... < P_|L|` and level index 0
/// in solutions means "off".
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub bases: Vec<String>,
    pub terminals: Vec<String>,
    pub levels: Vec<f64>,
    pub atten: Vec<Vec<f64>>,
    pub delta: Vec<f64>,
    pub noise: f64,
    pub revenue: Vec<f64>,
    pub coop_cost: Vec<f64>,
}

impl Instance {
    /// Builds an instance and rejects it if any invariant fails.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        bases: Vec<String>,
        terminals: Vec<String>,
        levels: Vec<f64>,
        atten: Vec<Vec<f64>>,
        delta: Vec<f64>,
        noise: f64,
        revenue: Vec<f64>,
        coop_cost: Vec<f64>,
    ) -> Result<Self, InstanceError> {
        let inst = Instance {
            bases,
            terminals,
            levels,
            atten,
            delta,
            noise,
            revenue,
            coop_cost,
        };
        let violations = validate_instance(&inst);
        if violations.is_empty() {
            Ok(inst)
        } else {
            Err(InstanceError::Invalid(violations))
        }
    }

    pub fn num_terminals(&self) -> usize {
        self.terminals.len()
    }

    pub fn num_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn p_max(&self) -> f64 {
        self.levels.last().copied().unwrap_or(0.0)
    }

    /// Emitted power for a level index (0 = off, 1..=|L| = P_1..P_|L|).
    pub fn power(&self, level: usize) -> f64 {
        if level == 0 {
            0.0
        } else {
            self.levels[level - 1]
        }
    }
}

/// Lists every broken invariant; empty iff the instance is valid.
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let n_t = inst.terminals.len();
    let n_b = inst.bases.len();
    if n_b == 0 {
        out.push(Violation::NoBases);
    }
    if n_t == 0 {
        out.push(Violation::NoTerminals);
    }
    if inst.levels.is_empty() {
        out.push(Violation::NoLevels);
    }
    for (i, &p) in inst.levels.iter().enumerate() {
        if !(p > 0.0) || !p.is_finite() {
            out.push(Violation::NonPositiveLevel { index: i, value: p });
        }
        if i > 0 && !(p > inst.levels[i - 1]) {
            out.push(Violation::LevelsNotAscending { index: i });
        }
    }
    let mut seen = std::collections::HashSet::new();
    for id in inst.bases.iter().chain(&inst.terminals) {
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            out.push(Violation::MalformedId { id: id.clone() });
        }
    }
    for id in &inst.bases {
        if !seen.insert(("B", id.as_str())) {
            out.push(Violation::DuplicateId { id: id.clone() });
        }
    }
    for id in &inst.terminals {
        if !seen.insert(("T", id.as_str())) {
            out.push(Violation::DuplicateId { id: id.clone() });
        }
    }
    for (field, len) in [
        ("delta", inst.delta.len()),
        ("revenue", inst.revenue.len()),
        ("coop_cost", inst.coop_cost.len()),
        ("atten", inst.atten.len()),
    ] {
        if len != n_t {
            out.push(Violation::DimensionMismatch { field, expected: n_t, found: len });
        }
    }
    for (t, row) in inst.atten.iter().enumerate() {
        if row.len() != n_b {
            out.push(Violation::DimensionMismatch {
                field: "atten row",
                expected: n_b,
                found: row.len(),
            });
            continue;
        }
        for (b, &a) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&a) {
                out.push(Violation::AttenuationOutOfRange { terminal: t, base: b, value: a });
            }
        }
    }
    for (t, &d) in inst.delta.iter().enumerate() {
        if !(d > 0.0) || !d.is_finite() {
            out.push(Violation::NonPositiveDelta { terminal: t });
        }
    }
    if !(inst.noise > 0.0) || !inst.noise.is_finite() {
        out.push(Violation::NonPositiveNoise { value: inst.noise });
    }
    for (t, &r) in inst.revenue.iter().enumerate() {
        if !(r > 0.0) || !r.is_finite() {
            out.push(Violation::NonPositiveRevenue { terminal: t });
        }
    }
    for (t, &c) in inst.coop_cost.iter().enumerate() {
        if !(c > 0.0) || !c.is_finite() {
            out.push(Violation::NonPositiveCoopCost { terminal: t });
        }
    }
    out
}

/// Synthetic instance generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub num_terminals: usize,
    pub num_bases: usize,
    pub num_levels: usize,
    /// Side of the square service area (metres).
    pub area_side: f64,
    pub path_loss_exponent: f64,
    pub p_max: f64,
    /// Shadowing is a log-uniform factor in `±shadowing_db` decibels.
    pub shadowing_db: f64,
    pub delta: f64,
    pub noise: f64,
    pub revenue: f64,
    pub coop_cost: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(num_terminals: usize, num_bases: usize, num_levels: usize, seed: u64) -> Self {
        GenConfig {
            num_terminals,
            num_bases,
            num_levels,
            seed,
            ..GenConfig::default()
        }
    }

    /// Path-loss reference distance: 1% of the area side.
    pub fn reference_distance(&self) -> f64 {
        0.01 * self.area_side
    }

    fn check(&self) -> Result<(), InstanceError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.num_terminals == 0 || self.num_bases == 0 || self.num_levels == 0 {
            return Err(InstanceError::Config("all counts must be at least 1"));
        }
        if !positive(self.path_loss_exponent) {
            return Err(InstanceError::Config("path-loss exponent must be positive"));
        }
        if !positive(self.p_max) {
            return Err(InstanceError::Config("maximum power must be positive"));
        }
        if !positive(self.area_side) {
            return Err(InstanceError::Config("area side must be positive"));
        }
        if !(self.shadowing_db >= 0.0) {
            return Err(InstanceError::Config("shadowing spread must be non-negative"));
        }
        if !positive(self.delta) || !positive(self.noise) {
            return Err(InstanceError::Config("delta and noise must be positive"));
        }
        if !positive(self.revenue) || !positive(self.coop_cost) {
            return Err(InstanceError::Config("revenue and cooperation cost must be positive"));
        }
        Ok(())
    }
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            num_terminals: 100,
            num_bases: 9,
            num_levels: 4,
            area_side: 1000.0,
            path_loss_exponent: 3.5,
            p_max: 1.0,
            shadowing_db: 6.0,
            delta: 2.0,
            noise: 1e-6,
            revenue: 1.0,
            coop_cost: 0.2,
            seed: 1,
        }
    }
}

/// Attenuation for one link: 1 inside the reference distance, otherwise
/// `min(1, (d_ref / dist)^gamma * shadow)`.
pub fn path_gain(dist: f64, d_ref: f64, gamma: f64, shadow: f64) -> f64 {
    if dist <= d_ref {
        1.0
    } else {
        ((d_ref / dist).powf(gamma) * shadow).min(1.0)
    }
}

/// Geometric ladder `P_max / 2^(n-1), ..., P_max / 2, P_max`.
pub fn geometric_levels(p_max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| p_max / f64::powi(2.0, (n - 1 - i) as i32)).collect()
}

pub fn generate_instance(config: &GenConfig) -> Result<Instance, InstanceError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let side = config.area_side;
    let mut place = |n: usize| -> Vec<(f64, f64)> {
        (0..n)
            .map(|_| (rng.gen_range(0.0..side), rng.gen_range(0.0..side)))
            .collect()
    };
    let base_pos = place(config.num_bases);
    let term_pos = place(config.num_terminals);
    let d_ref = config.reference_distance();
    let atten = term_pos
        .iter()
        .map(|&(tx, ty)| {
            base_pos
                .iter()
                .map(|&(bx, by)| {
                    let dist = (tx - bx).hypot(ty - by);
                    let db = if config.shadowing_db > 0.0 {
                        rng.gen_range(-config.shadowing_db..=config.shadowing_db)
                    } else {
                        0.0
                    };
                    path_gain(dist, d_ref, config.path_loss_exponent, 10f64.powf(db / 10.0))
                })
                .collect()
        })
        .collect();
    let n_t = config.num_terminals;
    Instance::new(
        (1..=config.num_bases).map(|b| format!("b{b}")).collect(),
        (1..=n_t).map(|t| format!("t{t}")).collect(),
        geometric_levels(config.p_max, config.num_levels),
        atten,
        vec![config.delta; n_t],
        config.noise,
        vec![config.revenue; n_t],
        vec![config.coop_cost; n_t],
    )
}

/// Serializes to the `SPCAP v1` text format. Numbers use Rust's shortest
/// round-trip scientific notation, so `load_instance(save_instance(i)) == i`.
pub fn save_instance(inst: &Instance) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "SPCAP v1 {} {} {}",
        inst.num_terminals(),
        inst.num_bases(),
        inst.num_levels()
    );
    s.push_str("LEVELS");
    for p in &inst.levels {
        let _ = write!(s, " {p:e}");
    }
    s.push('\n');
    let _ = writeln!(s, "NOISE {:e}", inst.noise);
    for (t, id) in inst.terminals.iter().enumerate() {
        let _ = writeln!(
            s,
            "T {id} {:e} {:e} {:e}",
            inst.delta[t], inst.revenue[t], inst.coop_cost[t]
        );
    }
    for id in &inst.bases {
        let _ = writeln!(s, "B {id}");
    }
    for row in &inst.atten {
        let line: Vec<String> = row.iter().map(|a| format!("{a:e}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank, non-comment line with its 1-based number.
    fn next_line(&mut self, what: &'static str) -> Result<(usize, Vec<&'a str>), InstanceError> {
        for (i, raw) in self.inner.by_ref() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok((i + 1, line.split_whitespace().collect()));
        }
        Err(InstanceError::Parse {
            line: 0,
            field: what,
            message: "unexpected end of file".into(),
        })
    }
}

fn parse_num<T: std::str::FromStr>(
    tok: Option<&&str>,
    line: usize,
    field: &'static str,
) -> Result<T, InstanceError> {
    let tok = tok.ok_or_else(|| InstanceError::Parse {
        line,
        field,
        message: "missing value".into(),
    })?;
    tok.parse().map_err(|_| InstanceError::Parse {
        line,
        field,
        message: format!("cannot parse {tok:?}"),
    })
}

fn expect_keyword(
    toks: &[&str],
    line: usize,
    keyword: &'static str,
    arity: Option<usize>,
) -> Result<(), InstanceError> {
    if toks.first() != Some(&keyword) {
        return Err(InstanceError::Parse {
            line,
            field: keyword,
            message: format!("expected {keyword} line"),
        });
    }
    if let Some(n) = arity {
        if toks.len() != n + 1 {
            return Err(InstanceError::Parse {
                line,
                field: keyword,
                message: format!("expected {n} fields, found {}", toks.len() - 1),
            });
        }
    }
    Ok(())
}

/// Parses the `SPCAP v1` text format and validates the result.
pub fn load_instance(text: &str) -> Result<Instance, InstanceError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (ln, toks) = lines.next_line("header")?;
    if toks.len() != 5 || toks[0] != "SPCAP" || toks[1] != "v1" {
        return Err(InstanceError::Parse {
            line: ln,
            field: "header",
            message: "expected `SPCAP v1 |T| |B| |L|`".into(),
        });
    }
    let n_t: usize = parse_num(toks.get(2), ln, "|T|")?;
    let n_b: usize = parse_num(toks.get(3), ln, "|B|")?;
    let n_l: usize = parse_num(toks.get(4), ln, "|L|")?;

    let (ln, toks) = lines.next_line("LEVELS")?;
    expect_keyword(&toks, ln, "LEVELS", Some(n_l))?;
    let levels = (1..=n_l)
        .map(|i| parse_num(toks.get(i), ln, "LEVELS"))
        .collect::<Result<Vec<f64>, _>>()?;

    let (ln, toks) = lines.next_line("NOISE")?;
    expect_keyword(&toks, ln, "NOISE", Some(1))?;
    let noise = parse_num(toks.get(1), ln, "NOISE")?;

    let mut terminals = Vec::with_capacity(n_t);
    let (mut delta, mut revenue, mut coop_cost) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n_t {
        let (ln, toks) = lines.next_line("T")?;
        expect_keyword(&toks, ln, "T", Some(4))?;
        terminals.push(toks[1].to_string());
        delta.push(parse_num(toks.get(2), ln, "delta")?);
        revenue.push(parse_num(toks.get(3), ln, "revenue")?);
        coop_cost.push(parse_num(toks.get(4), ln, "coop_cost")?);
    }
    let mut bases = Vec::with_capacity(n_b);
    for _ in 0..n_b {
        let (ln, toks) = lines.next_line("B")?;
        expect_keyword(&toks, ln, "B", Some(1))?;
        bases.push(toks[1].to_string());
    }
    let mut atten = Vec::with_capacity(n_t);
    for _ in 0..n_t {
        let (ln, toks) = lines.next_line("attenuation")?;
        if toks.len() != n_b {
            return Err(InstanceError::Parse {
                line: ln,
                field: "attenuation",
                message: format!("expected {n_b} entries, found {}", toks.len()),
            });
        }
        atten.push(
            toks.iter()
                .map(|t| parse_num(Some(t), ln, "attenuation"))
                .collect::<Result<Vec<f64>, _>>()?,
        );
    }
    if let Ok((ln, _)) = lines.next_line("trailing") {
        return Err(InstanceError::Parse {
            line: ln,
            field: "trailing",
            message: "unexpected content after attenuation block".into(),
        });
    }
    Instance::new(bases, terminals, levels, atten, delta, noise, revenue, coop_cost)
}

/// Small hand-made instances for examples and tests.
pub mod fixtures {
    use super::*;

    /// Two bases, one terminal: a = (0.6, 0.3), delta = 1.5, N = 0.1,
    /// P = (1, 2), r = 10, c = 1.
    pub fn tiny1() -> Instance {
        Instance::new(
            vec!["b1".into(), "b2".into()],
            vec!["t1".into()],
            vec![1.0, 2.0],
            vec![vec![0.6, 0.3]],
            vec![1.5],
            0.1,
            vec![10.0],
            vec![1.0],
        )
        .unwrap()
    }
}
