//! Binary linear models with kind-tagged variables.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, Write};

/// Variable families of the SPCAP formulations. Level indices are 0-based
/// here (`l = 0` is `P_1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    /// Terminal served.
    X(usize),
    /// Base `b` emits at level `l`.
    Z(usize, usize),
    /// Base `b` belongs to the serving cluster of terminal `t`.
    Y(usize, usize),
    /// Linearization of `z[b][l] * y[t][b]`, stored as `(t, b, l)`.
    V(usize, usize, usize),
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarKind::X(t) => write!(f, "x_{t}"),
            VarKind::Z(b, l) => write!(f, "z_{b}_{}", l + 1),
            VarKind::Y(t, b) => write!(f, "y_{t}_{b}"),
            VarKind::V(t, b, l) => write!(f, "v_{t}_{b}_{}", l + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Provenance of a row, used to slice models per terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowTag {
    Sir { terminal: usize },
    Gub { base: usize },
    /// `v <= z`
    LinZ { terminal: usize, base: usize, level: usize },
    /// `v <= y`
    LinY { terminal: usize, base: usize, level: usize },
    /// `v >= z + y - 1`
    LinZy { terminal: usize, base: usize, level: usize },
    Cut { terminal: usize },
    Other,
}

impl RowTag {
    pub fn terminal(&self) -> Option<usize> {
        match *self {
            RowTag::Sir { terminal }
            | RowTag::Cut { terminal }
            | RowTag::LinZ { terminal, .. }
            | RowTag::LinY { terminal, .. }
            | RowTag::LinZy { terminal, .. } => Some(terminal),
            RowTag::Gub { .. } | RowTag::Other => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: RowTag,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    /// Magnitude used to make tolerances relative: `|rhs| + sum |a_j x_j|`.
    pub fn scale(&self, values: &[f64]) -> f64 {
        self.rhs.abs() + self.coeffs.iter().map(|&(j, a)| (a * values[j]).abs()).sum::<f64>()
    }

    pub fn is_satisfied(&self, values: &[f64], rel_tol: f64) -> bool {
        self.violation(values) <= rel_tol * self.scale(values).max(1e-300)
    }
}

/// Binary linear model, always maximized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MipModel {
    pub kinds: Vec<VarKind>,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

impl MipModel {
    pub fn add_var(&mut self, kind: VarKind, obj: f64) -> usize {
        self.kinds.push(kind);
        self.objective.push(obj);
        self.kinds.len() - 1
    }

    pub fn add_row(&mut self, row: Row) {
        debug_assert!(row.coeffs.iter().all(|&(j, _)| j < self.kinds.len()));
        self.rows.push(row);
    }

    pub fn num_vars(&self) -> usize {
        self.kinds.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, v)| c * v).sum()
    }

    /// Indices of rows not satisfied within `rel_tol`.
    pub fn violated_rows(&self, values: &[f64], rel_tol: f64) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_satisfied(values, rel_tol))
            .map(|(i, _)| i)
            .collect()
    }

    /// Substitutes the fixed variables out. Rows left without free
    /// variables are dropped, or reported when the fixings violate them.
    /// Rows the `[0, 1]` bounds already imply and repeated rows are dropped
    /// as well.
    pub fn restrict(&self, fixings: &Fixings) -> Result<Restricted, RestrictionInfeasible> {
        let mut keep = Vec::new();
        let mut index = vec![usize::MAX; self.num_vars()];
        let mut base = vec![0.0; self.num_vars()];
        for j in 0..self.num_vars() {
            match fixings.get(j) {
                Some(v) => base[j] = if v { 1.0 } else { 0.0 },
                None => {
                    index[j] = keep.len();
                    keep.push(j);
                }
            }
        }
        let mut model = MipModel::default();
        for &j in &keep {
            model.add_var(self.kinds[j], self.objective[j]);
        }
        let mut seen = HashSet::new();
        for (i, row) in self.rows.iter().enumerate() {
            let mut rhs = row.rhs;
            let mut coeffs = Vec::new();
            for &(j, a) in &row.coeffs {
                if index[j] == usize::MAX {
                    rhs -= a * base[j];
                } else {
                    coeffs.push((index[j], a));
                }
            }
            if coeffs.is_empty() {
                if !row.is_satisfied(&base, 1e-9) {
                    return Err(RestrictionInfeasible { row: i });
                }
                continue;
            }
            let lo: f64 = coeffs.iter().map(|&(_, a)| a.min(0.0)).sum();
            let hi: f64 = coeffs.iter().map(|&(_, a)| a.max(0.0)).sum();
            let slack = 1e-12 * rhs.abs().max(1.0);
            let implied = match row.sense {
                Sense::Le => hi <= rhs + slack,
                Sense::Ge => lo >= rhs - slack,
                Sense::Eq => false,
            };
            if implied {
                continue;
            }
            let mut key: Vec<(usize, u64)> = coeffs.iter().map(|&(j, a)| (j, a.to_bits())).collect();
            key.sort_unstable();
            if !seen.insert((key, row.sense as u8, rhs.to_bits())) {
                continue;
            }
            model.add_row(Row {
                coeffs,
                sense: row.sense,
                rhs,
                tag: row.tag,
            });
        }
        let offset = self.objective_value(&base);
        Ok(Restricted {
            model,
            keep,
            base,
            offset,
        })
    }

    /// Dumps the model in CPLEX LP text format.
    pub fn write_lp<W: Write>(&self, mut w: W) -> io::Result<()> {
        fn terms(coeffs: &[(usize, f64)], kinds: &[VarKind]) -> String {
            let mut s = String::new();
            for &(j, a) in coeffs {
                if a == 0.0 {
                    continue;
                }
                let sign = if a < 0.0 { "-" } else { "+" };
                s.push_str(&format!(" {sign} {:e} {}", a.abs(), kinds[j]));
            }
            if s.is_empty() {
                s.push_str(" 0");
            }
            s
        }
        writeln!(w, "Maximize")?;
        let obj: Vec<(usize, f64)> = self.objective.iter().copied().enumerate().collect();
        writeln!(w, " obj:{}", terms(&obj, &self.kinds))?;
        writeln!(w, "Subject To")?;
        for (i, r) in self.rows.iter().enumerate() {
            let op = match r.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            writeln!(w, " r{i}:{} {op} {:e}", terms(&r.coeffs, &self.kinds), r.rhs)?;
        }
        writeln!(w, "Binaries")?;
        for k in &self.kinds {
            writeln!(w, " {k}")?;
        }
        writeln!(w, "End")
    }
}

/// A model with its fixed variables substituted out.
#[derive(Debug, Clone, PartialEq)]
pub struct Restricted {
    pub model: MipModel,
    /// Original index of each remaining variable.
    pub keep: Vec<usize>,
    /// Full-length vector holding the fixed values (free entries 0).
    pub base: Vec<f64>,
    /// Objective contribution of the fixed variables.
    pub offset: f64,
}

impl Restricted {
    pub fn expand(&self, values: &[f64]) -> Vec<f64> {
        let mut full = self.base.clone();
        for (&j, &v) in self.keep.iter().zip(values) {
            full[j] = v;
        }
        full
    }

    pub fn compress(&self, full: &[f64]) -> Vec<f64> {
        self.keep.iter().map(|&j| full[j]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("fixings violate row {row}")]
pub struct RestrictionInfeasible {
    pub row: usize,
}

/// Variable fixings for binary variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fixings(BTreeMap<usize, bool>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("variable {var} already fixed to the opposite value")]
pub struct FixingConflict {
    pub var: usize,
}

impl Fixings {
    pub fn new() -> Self {
        Fixings::default()
    }

    pub fn fix(&mut self, var: usize, value: bool) -> Result<(), FixingConflict> {
        match self.0.insert(var, value) {
            Some(prev) if prev != value => {
                self.0.insert(var, prev);
                Err(FixingConflict { var })
            }
            _ => Ok(()),
        }
    }

    pub fn get(&self, var: usize) -> Option<bool> {
        self.0.get(&var).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.0.iter().map(|(&j, &v)| (j, v))
    }

    /// True when `values` agrees with every fixing.
    pub fn respected_by(&self, values: &[f64]) -> bool {
        self.iter()
            .all(|(j, v)| (values[j] - if v { 1.0 } else { 0.0 }).abs() < 1e-9)
    }
}

impl FromIterator<(usize, bool)> for Fixings {
    fn from_iter<I: IntoIterator<Item = (usize, bool)>>(iter: I) -> Self {
        Fixings(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_mip, BnbConfig};

    #[test]
    fn conflicting_fixings_are_rejected() {
        let mut f = Fixings::new();
        f.fix(3, true).unwrap();
        f.fix(3, true).unwrap();
        assert_eq!(f.fix(3, false), Err(FixingConflict { var: 3 }));
        assert_eq!(f.get(3), Some(true));
    }

    #[test]
    fn restriction_substitutes_fixed_variables() {
        let mut m = MipModel::default();
        for j in 0..3 {
            m.add_var(VarKind::X(j), (j + 1) as f64);
        }
        m.add_row(Row {
            coeffs: vec![(0, 1.0), (1, 1.0), (2, 1.0)],
            sense: Sense::Le,
            rhs: 2.0,
            tag: RowTag::Other,
        });
        m.add_row(Row {
            coeffs: vec![(0, 1.0)],
            sense: Sense::Le,
            rhs: 1.0,
            tag: RowTag::Other,
        });
        let r = m.restrict(&[(0, true)].into_iter().collect()).unwrap();
        assert_eq!(r.keep, vec![1, 2]);
        assert_eq!(r.offset, 1.0);
        assert_eq!(r.model.num_rows(), 1);
        assert_eq!(r.model.rows[0].rhs, 1.0);
        assert_eq!(r.expand(&[0.0, 1.0]), vec![1.0, 0.0, 1.0]);
        assert_eq!(r.compress(&[1.0, 0.0, 1.0]), vec![0.0, 1.0]);
        let bad: Fixings = [(0, true), (1, true), (2, true)].into_iter().collect();
        assert_eq!(m.restrict(&bad), Err(RestrictionInfeasible { row: 0 }));
    }

    #[test]
    fn restriction_drops_implied_and_repeated_rows() {
        let mut m = MipModel::default();
        for j in 0..3 {
            m.add_var(VarKind::X(j), 1.0);
        }
        let row = |coeffs: Vec<(usize, f64)>, sense, rhs| Row {
            coeffs,
            sense,
            rhs,
            tag: RowTag::Other,
        };
        // x1 + x2 <= 1, twice once x0 = 0.
        m.add_row(row(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 1.0));
        m.add_row(row(vec![(1, 1.0), (2, 1.0)], Sense::Le, 1.0));
        // x1 - x2 <= 1 holds on the box.
        m.add_row(row(vec![(1, 1.0), (2, -1.0)], Sense::Le, 1.0));
        // x1 + x2 >= -1 + x0 holds on the box once x0 = 0.
        m.add_row(row(vec![(1, 1.0), (2, 1.0), (0, -1.0)], Sense::Ge, -1.0));
        let r = m.restrict(&[(0, false)].into_iter().collect()).unwrap();
        assert_eq!(r.model.num_rows(), 1);
        assert_eq!(r.model.rows[0].coeffs, vec![(0, 1.0), (1, 1.0)]);
        // The restricted optimum still respects every original row.
        let best = solve_mip(&r.model, &BnbConfig::default()).unwrap();
        assert!(m.violated_rows(&r.expand(best.incumbent.as_ref().unwrap()), 1e-9).is_empty());
        assert_eq!(best.objective, 1.0);
    }

    #[test]
    fn relative_row_tolerance() {
        let row = Row {
            coeffs: vec![(0, 1e-6)],
            sense: Sense::Ge,
            rhs: 1e-6,
            tag: RowTag::Other,
        };
        assert!(row.is_satisfied(&[1.0], 1e-9));
        assert!(!row.is_satisfied(&[0.999], 1e-9));
    }

    #[test]
    fn lp_dump_lists_rows_and_binaries() {
        let mut m = MipModel::default();
        let x = m.add_var(VarKind::X(0), 1.0);
        let z = m.add_var(VarKind::Z(0, 0), 0.0);
        m.add_row(Row {
            coeffs: vec![(x, 1.0), (z, -1.0)],
            sense: Sense::Le,
            rhs: 0.0,
            tag: RowTag::Other,
        });
        let mut buf = Vec::new();
        m.write_lp(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("r0: + 1e0 x_0 - 1e0 z_0_1 <= 0e0"));
        assert!(text.contains("Binaries\n x_0\n z_0_1\nEnd"));
    }
}
