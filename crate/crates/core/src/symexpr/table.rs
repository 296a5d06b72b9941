use std::collections::HashMap;
use std::fmt;

use super::SymbolError;

/// Index of a symbol inside its [`SymbolTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymId(pub u32);

impl SymId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// What a symbol stands for. Indices are 1-based, as in `x1`, `psi1`, `u1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    State(usize),
    Costate(usize),
    Control(usize),
    Time,
    Parameter,
    /// Placeholder for the true Hamiltonian inside family components.
    Hamiltonian,
    /// The conjugate of time in the extended (autonomized) phase space.
    Autonomization,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    pub name: String,
    pub role: Role,
}

/// Ordered, frozen collection of symbols.
///
/// Layout is fixed: `x_1..x_n`, `psi_1..psi_n`, `t`, the Hamiltonian
/// placeholder, controls, parameters, and optionally the autonomization
/// symbol last. Phase coordinates therefore occupy ids `0..2n` and time is
/// id `2n`, so a phase point `(x, psi, t)` can be used directly as an
/// evaluation environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: Vec<Symbol>,
    by_name: HashMap<String, SymId>,
    n: usize,
    m_ctl: usize,
}

impl SymbolTable {
    /// Builds a table from state, control, and parameter names. Costates are
    /// named `psi1..psiN`.
    pub fn new(
        states: &[&str],
        controls: &[&str],
        time: &str,
        parameters: &[&str],
    ) -> Result<Self, SymbolError> {
        let n = states.len();
        let mut symbols = Vec::new();
        for (i, s) in states.iter().enumerate() {
            symbols.push(Symbol { name: s.to_string(), role: Role::State(i + 1) });
        }
        for i in 0..n {
            symbols.push(Symbol { name: format!("psi{}", i + 1), role: Role::Costate(i + 1) });
        }
        symbols.push(Symbol { name: time.to_string(), role: Role::Time });
        symbols.push(Symbol { name: "H".to_string(), role: Role::Hamiltonian });
        for (j, u) in controls.iter().enumerate() {
            symbols.push(Symbol { name: u.to_string(), role: Role::Control(j + 1) });
        }
        for p in parameters {
            symbols.push(Symbol { name: p.to_string(), role: Role::Parameter });
        }
        let mut by_name = HashMap::new();
        for (k, s) in symbols.iter().enumerate() {
            if !is_identifier(&s.name) {
                return Err(SymbolError::InvalidName(s.name.clone()));
            }
            if by_name.insert(s.name.clone(), SymId(k as u32)).is_some() {
                return Err(SymbolError::Duplicate(s.name.clone()));
            }
        }
        Ok(SymbolTable { symbols, by_name, n, m_ctl: controls.len() })
    }

    /// Convenience table with states `x1..xn`, controls `u1..um`, time `t`.
    pub fn standard(n: usize, m_ctl: usize) -> Self {
        let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let us: Vec<String> = (1..=m_ctl).map(|j| format!("u{j}")).collect();
        let xs: Vec<&str> = xs.iter().map(String::as_str).collect();
        let us: Vec<&str> = us.iter().map(String::as_str).collect();
        SymbolTable::new(&xs, &us, "t", &[]).expect("standard names are valid")
    }

    /// Returns a copy extended with the autonomization symbol `theta`.
    pub fn with_autonomization(&self, name: &str) -> Result<Self, SymbolError> {
        if self.autonomization().is_some() {
            return Err(SymbolError::Duplicate(name.to_string()));
        }
        if self.by_name.contains_key(name) {
            return Err(SymbolError::Duplicate(name.to_string()));
        }
        let mut out = self.clone();
        let id = SymId(out.symbols.len() as u32);
        out.symbols.push(Symbol { name: name.to_string(), role: Role::Autonomization });
        out.by_name.insert(name.to_string(), id);
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Phase-space dimension `n` (number of states).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m_ctl(&self) -> usize {
        self.m_ctl
    }

    pub fn lookup(&self, name: &str) -> Option<SymId> {
        self.by_name.get(name).copied()
    }

    pub fn symbol(&self, id: SymId) -> &Symbol {
        &self.symbols[id.index()]
    }

    pub fn name(&self, id: SymId) -> &str {
        &self.symbols[id.index()].name
    }

    pub fn role(&self, id: SymId) -> Role {
        self.symbols[id.index()].role
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    /// State `x_i`, 1-based.
    pub fn state(&self, i: usize) -> SymId {
        assert!(i >= 1 && i <= self.n, "state index out of range");
        SymId((i - 1) as u32)
    }

    /// Costate `psi_i`, 1-based.
    pub fn costate(&self, i: usize) -> SymId {
        assert!(i >= 1 && i <= self.n, "costate index out of range");
        SymId((self.n + i - 1) as u32)
    }

    pub fn time(&self) -> SymId {
        SymId((2 * self.n) as u32)
    }

    pub fn hamiltonian(&self) -> SymId {
        SymId((2 * self.n + 1) as u32)
    }

    /// Control `u_j`, 1-based.
    pub fn control(&self, j: usize) -> SymId {
        assert!(j >= 1 && j <= self.m_ctl, "control index out of range");
        SymId((2 * self.n + 1 + j) as u32)
    }

    pub fn controls(&self) -> impl Iterator<Item = SymId> + '_ {
        (1..=self.m_ctl).map(|j| self.control(j))
    }

    pub fn parameters(&self) -> impl Iterator<Item = SymId> + '_ {
        self.symbols
            .iter()
            .enumerate()
            .filter(|(_, s)| s.role == Role::Parameter)
            .map(|(k, _)| SymId(k as u32))
    }

    pub fn autonomization(&self) -> Option<SymId> {
        self.symbols
            .iter()
            .position(|s| s.role == Role::Autonomization)
            .map(|k| SymId(k as u32))
    }

    /// Phase coordinates `(x_1..x_n, psi_1..psi_n)` in fixed order.
    pub fn phase_coordinates(&self) -> impl Iterator<Item = SymId> {
        (0..2 * self.n as u32).map(SymId)
    }

    /// Length of a phase point `(x, psi, t)`.
    pub fn phase_len(&self) -> usize {
        2 * self.n + 1
    }

    pub fn is_phase_or_time(&self, id: SymId) -> bool {
        id.index() <= 2 * self.n
    }
}

impl fmt::Display for SymbolTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.symbols.iter().map(|s| s.name.as_str()).collect();
        write!(f, "[{}]", names.join(", "))
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
