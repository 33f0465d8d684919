use std::collections::BTreeMap;

use super::entropy::{eta, unnormalized_entropy};
use super::operator::{CMatrix, DenseOperator, PSD_TOL};
use crate::error::{domain, Error, Result};

/// A named classical register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub size: usize,
}

#[derive(Debug, Clone)]
struct Entry {
    weight: f64,
    /// `P(c) ρ^c`, present when the state has a quantum part.
    op: Option<CMatrix>,
}

/// Classical registers jointly distributed with a quantum system `E`.
///
/// Entries are stored as weighted operators `P(c) ρ_E^c`, so marginalizing a
/// register is a plain sum.
#[derive(Debug, Clone)]
pub struct CcqState {
    registers: Vec<Register>,
    eve_dim: usize,
    entries: BTreeMap<Vec<usize>, Entry>,
}

impl CcqState {
    /// Empty state; `eve_dim == 0` means purely classical.
    pub fn new(registers: &[(&str, usize)], eve_dim: usize) -> Self {
        Self {
            registers: registers.iter().map(|&(n, s)| Register { name: n.to_string(), size: s }).collect(),
            eve_dim,
            entries: BTreeMap::new(),
        }
    }

    /// Adds a classical outcome with probability `weight`.
    pub fn add_classical(&mut self, outcome: &[usize], weight: f64) -> Result<()> {
        if self.eve_dim != 0 {
            return domain("state has a quantum part; use add_weighted");
        }
        self.check_outcome(outcome)?;
        if weight == 0.0 {
            return Ok(());
        }
        self.entries.entry(outcome.to_vec()).or_insert(Entry { weight: 0.0, op: None }).weight += weight;
        Ok(())
    }

    /// Adds `P(c) ρ_E^c` for outcome `c`; the weight is read off the trace.
    pub fn add_weighted(&mut self, outcome: &[usize], op: CMatrix) -> Result<()> {
        if op.nrows() != self.eve_dim || op.ncols() != self.eve_dim {
            return Err(Error::Dimension(format!(
                "conditional operator is {}x{}, expected {}",
                op.nrows(),
                op.ncols(),
                self.eve_dim
            )));
        }
        self.check_outcome(outcome)?;
        let w = op.trace().re;
        if w <= 0.0 {
            return Ok(());
        }
        let dim = self.eve_dim;
        let e = self
            .entries
            .entry(outcome.to_vec())
            .or_insert_with(|| Entry { weight: 0.0, op: Some(CMatrix::zeros(dim, dim)) });
        e.weight += w;
        if let Some(acc) = e.op.as_mut() {
            *acc += op;
        }
        Ok(())
    }

    fn check_outcome(&self, outcome: &[usize]) -> Result<()> {
        if outcome.len() != self.registers.len() {
            return Err(Error::Dimension(format!(
                "outcome has {} registers, state has {}",
                outcome.len(),
                self.registers.len()
            )));
        }
        for (v, r) in outcome.iter().zip(&self.registers) {
            if *v >= r.size {
                return domain(format!("value {v} out of range for register {}", r.name));
            }
        }
        Ok(())
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn eve_dim(&self) -> usize {
        self.eve_dim
    }

    pub fn is_classical(&self) -> bool {
        self.eve_dim == 0
    }

    /// Outcomes with non-zero probability, in lexicographic order.
    pub fn joint(&self) -> Vec<(Vec<usize>, f64)> {
        self.entries.iter().map(|(k, e)| (k.clone(), e.weight)).collect()
    }

    pub fn probability(&self, outcome: &[usize]) -> f64 {
        self.entries.get(outcome).map_or(0.0, |e| e.weight)
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.values().map(|e| e.weight).sum()
    }

    /// Normalized conditional operator for an outcome of non-zero probability.
    pub fn conditional(&self, outcome: &[usize]) -> Option<DenseOperator> {
        let e = self.entries.get(outcome)?;
        e.op.as_ref().map(|m| DenseOperator::wrap(m.unscale(e.weight)))
    }

    /// Eve's reduced operator.
    pub fn eve_operator(&self) -> Option<DenseOperator> {
        if self.is_classical() {
            return None;
        }
        let mut acc = CMatrix::zeros(self.eve_dim, self.eve_dim);
        for e in self.entries.values() {
            if let Some(m) = &e.op {
                acc += m;
            }
        }
        Some(DenseOperator::wrap(acc))
    }

    /// Block-diagonal operator `Σ_c |c><c| ⊗ P(c) ρ^c` (classical registers first).
    pub fn total_operator(&self) -> DenseOperator {
        let nc: usize = self.registers.iter().map(|r| r.size).product();
        let de = self.eve_dim.max(1);
        let mut out = CMatrix::zeros(nc * de, nc * de);
        for (k, e) in &self.entries {
            let idx = self.flat_index(k);
            match &e.op {
                Some(m) => out.view_mut((idx * de, idx * de), (de, de)).copy_from(m),
                None => out[(idx, idx)] = num_complex::Complex64::new(e.weight, 0.0),
            }
        }
        DenseOperator::wrap(out)
    }

    fn flat_index(&self, outcome: &[usize]) -> usize {
        outcome.iter().zip(&self.registers).fold(0, |acc, (&v, r)| acc * r.size + v)
    }

    pub fn register_index(&self, name: &str) -> Result<usize> {
        self.registers.iter().position(|r| r.name == name).ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    fn indices(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut idx = Vec::with_capacity(names.len());
        for n in names {
            let i = self.register_index(n)?;
            if !idx.contains(&i) {
                idx.push(i);
            }
        }
        Ok(idx)
    }

    /// Joint entropy of the named registers, together with `E` when `with_eve`.
    pub fn entropy(&self, names: &[&str], with_eve: bool) -> Result<f64> {
        let idx = self.indices(names)?;
        Ok(self.entropy_idx(&idx, with_eve))
    }

    fn entropy_idx(&self, idx: &[usize], with_eve: bool) -> f64 {
        if !with_eve || self.is_classical() {
            let mut groups: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
            for (k, e) in &self.entries {
                let key: Vec<usize> = idx.iter().map(|&i| k[i]).collect();
                *groups.entry(key).or_insert(0.0) += e.weight;
            }
            return groups.values().map(|&w| eta(w)).sum();
        }
        let mut groups: BTreeMap<Vec<usize>, CMatrix> = BTreeMap::new();
        for (k, e) in &self.entries {
            let key: Vec<usize> = idx.iter().map(|&i| k[i]).collect();
            let m = e.op.as_ref().expect("quantum entry");
            groups.entry(key).and_modify(|acc| *acc += m).or_insert_with(|| m.clone());
        }
        groups.values().map(unnormalized_entropy).sum()
    }

    /// `H(target | given [E])`.
    pub fn conditional_entropy(&self, target: &[&str], given: &[&str], given_eve: bool) -> Result<f64> {
        let g = self.indices(given)?;
        let mut all = g.clone();
        for i in self.indices(target)? {
            if !all.contains(&i) {
                all.push(i);
            }
        }
        Ok(self.entropy_idx(&all, given_eve) - self.entropy_idx(&g, given_eve))
    }

    /// Keeps only the named registers (and `E`).
    pub fn marginal(&self, keep: &[&str]) -> Result<CcqState> {
        let idx = self.indices(keep)?;
        let mut out = CcqState {
            registers: idx.iter().map(|&i| self.registers[i].clone()).collect(),
            eve_dim: self.eve_dim,
            entries: BTreeMap::new(),
        };
        for (k, e) in &self.entries {
            let key: Vec<usize> = idx.iter().map(|&i| k[i]).collect();
            match out.entries.get_mut(&key) {
                Some(acc) => {
                    acc.weight += e.weight;
                    if let (Some(a), Some(m)) = (acc.op.as_mut(), e.op.as_ref()) {
                        *a += m;
                    }
                }
                None => {
                    out.entries.insert(key, e.clone());
                }
            }
        }
        Ok(out)
    }

    /// Passes a binary register through a binary symmetric channel with flip probability `q`.
    pub fn bit_flip(&self, name: &str, q: f64) -> Result<CcqState> {
        let i = self.register_index(name)?;
        if self.registers[i].size != 2 {
            return domain(format!("register {name} is not binary"));
        }
        if !(0.0..=1.0).contains(&q) {
            return domain(format!("flip probability {q} outside [0,1]"));
        }
        let mut out = CcqState { registers: self.registers.clone(), eve_dim: self.eve_dim, entries: BTreeMap::new() };
        for (k, e) in &self.entries {
            for (flip, f) in [(0usize, 1.0 - q), (1usize, q)] {
                if f == 0.0 {
                    continue;
                }
                let mut key = k.clone();
                key[i] ^= flip;
                let slot = out.entries.entry(key).or_insert_with(|| Entry {
                    weight: 0.0,
                    op: e.op.as_ref().map(|m| CMatrix::zeros(m.nrows(), m.ncols())),
                });
                slot.weight += f * e.weight;
                if let (Some(a), Some(m)) = (slot.op.as_mut(), e.op.as_ref()) {
                    *a += m.scale(f);
                }
            }
        }
        Ok(out)
    }

    /// Checks the joint distribution and every conditional operator.
    pub fn validate(&self) -> Result<()> {
        let w = self.total_weight();
        if (w - 1.0).abs() > PSD_TOL {
            return domain(format!("joint distribution sums to {w}"));
        }
        for k in self.entries.keys() {
            if let Some(c) = self.conditional(k) {
                c.validate_density()?;
            }
        }
        Ok(())
    }
}
