use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cone for a block of consecutive slack rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "dim", rename_all = "snake_case")]
pub enum Cone {
    /// All entries zero.
    Zero(usize),
    /// All entries nonnegative.
    Nonnegative(usize),
    /// `(t, v)` with `‖v‖₂ ≤ t`.
    SecondOrder(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::Nonnegative(d) | Cone::SecondOrder(d) => d,
        }
    }
}

/// Affine expression `Σ coef · v[index] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(i: usize) -> Self {
        Self::term(i, 1.0)
    }

    pub fn term(i: usize, coef: f64) -> Self {
        Self { terms: vec![(i, coef)], constant: 0.0 }
    }

    pub fn add(mut self, i: usize, coef: f64) -> Self {
        self.terms.push((i, coef));
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, f: f64) -> Self {
        self.terms.iter_mut().for_each(|t| t.1 *= f);
        self.constant *= f;
        self
    }

    pub fn sum(mut self, other: &LinExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * v[i]).sum::<f64>() + self.constant
    }
}

/// Where each block of decision variables lives in a program built for the
/// beamforming problem. Beamformer entries are interleaved `(re, im)` pairs,
/// column-major by user; link-indexed blocks use `b * K + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarLayout {
    pub aggregate_len: usize,
    pub num_users: usize,
    pub num_links: usize,
    pub w: usize,
    pub x: Option<usize>,
    pub u: usize,
    pub z: Option<usize>,
    pub total: usize,
}

impl VarLayout {
    pub fn new(aggregate_len: usize, num_users: usize, num_links: usize, with_xz: bool) -> Self {
        let w = 0;
        let after_w = 2 * aggregate_len * num_users;
        let (x, u, z, total) = if with_xz {
            (Some(after_w), after_w + num_links, Some(after_w + 2 * num_links), after_w + 2 * num_links + num_users)
        } else {
            (None, after_w, None, after_w + num_links)
        };
        Self { aggregate_len, num_users, num_links, w, x, u, z, total }
    }

    /// Index of `Re w_k[i]`; the imaginary part follows it.
    pub fn w_re(&self, k: usize, i: usize) -> usize {
        self.w + 2 * (k * self.aggregate_len + i)
    }

    pub fn label(&self, idx: usize) -> String {
        let w_end = self.w + 2 * self.aggregate_len * self.num_users;
        if idx < w_end {
            let off = idx - self.w;
            let (pair, part) = (off / 2, if off % 2 == 0 { "re" } else { "im" });
            return format!("w[{}][{}].{part}", pair / self.aggregate_len, pair % self.aggregate_len);
        }
        if let Some(x) = self.x {
            if (x..x + self.num_links).contains(&idx) {
                return format!("x[{}]", idx - x);
            }
        }
        if (self.u..self.u + self.num_links).contains(&idx) {
            return format!("u[{}]", idx - self.u);
        }
        if let Some(z) = self.z {
            if (z..z + self.num_users).contains(&idx) {
                return format!("z[{}]", idx - z);
            }
        }
        format!("v[{idx}]")
    }
}

/// Conic program in the form
///
/// ```text
/// minimize    cᵀv
/// subject to  b − A v ∈ K₁ × … × Kₘ
/// ```
///
/// with `A` kept as `(row, col, value)` triplets (duplicates are summed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    #[serde(rename = "a")]
    pub triplets: Vec<(usize, usize, f64)>,
    #[serde(rename = "b")]
    pub offset: Vec<f64>,
    pub cones: Vec<Cone>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<VarLayout>,
}

impl ConeProgram {
    pub fn num_rows(&self) -> usize {
        self.offset.len()
    }

    pub fn validate(&self) -> Result<()> {
        let cone_rows: usize = self.cones.iter().map(Cone::dim).sum();
        if cone_rows != self.offset.len() {
            return Err(Error::Solver(format!(
                "cone dimensions sum to {cone_rows} but the program has {} rows",
                self.offset.len()
            )));
        }
        if self.objective.len() != self.num_vars {
            return Err(Error::Solver("objective length differs from the variable count".into()));
        }
        if let Some(&(r, c, _)) = self.triplets.iter().find(|&&(r, c, _)| r >= self.offset.len() || c >= self.num_vars)
        {
            return Err(Error::Solver(format!("constraint entry ({r}, {c}) out of range")));
        }
        if self.cones.iter().any(|c| c.dim() == 0) {
            return Err(Error::Solver("empty cone".into()));
        }
        Ok(())
    }

    /// Slack `b − A v` evaluated at `v`.
    pub fn slack(&self, v: &[f64]) -> Vec<f64> {
        let mut s = self.offset.clone();
        for &(r, c, a) in &self.triplets {
            s[r] -= a * v[c];
        }
        s
    }

    /// Largest cone violation of `b − A v` at `v`.
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        let s = self.slack(v);
        let mut worst = 0.0f64;
        let mut row = 0;
        for cone in &self.cones {
            let block = &s[row..row + cone.dim()];
            let viol = match cone {
                Cone::Zero(_) => block.iter().fold(0.0f64, |m, x| m.max(x.abs())),
                Cone::Nonnegative(_) => block.iter().fold(0.0f64, |m, x| m.max(-x)),
                Cone::SecondOrder(_) => {
                    let tail = block[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                    (tail - block[0]).max(0.0)
                }
            };
            worst = worst.max(viol);
            row += cone.dim();
        }
        worst
    }

    pub fn objective_value(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let prog: Self = serde_json::from_str(text)?;
        prog.validate()?;
        Ok(prog)
    }
}

/// Incremental construction of a [`ConeProgram`]. Each pushed expression
/// becomes one slack row that must lie in the given cone.
#[derive(Debug, Clone)]
pub struct ProgramBuilder {
    prog: ConeProgram,
}

impl ProgramBuilder {
    pub fn new(num_vars: usize) -> Self {
        Self {
            prog: ConeProgram {
                num_vars,
                objective: vec![0.0; num_vars],
                triplets: Vec::new(),
                offset: Vec::new(),
                cones: Vec::new(),
                layout: None,
            },
        }
    }

    pub fn with_layout(mut self, layout: VarLayout) -> Self {
        self.prog.layout = Some(layout);
        self
    }

    pub fn set_objective(&mut self, i: usize, coef: f64) {
        self.prog.objective[i] = coef;
    }

    fn push_row(&mut self, expr: &LinExpr) {
        let row = self.prog.offset.len();
        for &(col, coef) in &expr.terms {
            if coef != 0.0 {
                self.prog.triplets.push((row, col, -coef));
            }
        }
        self.prog.offset.push(expr.constant);
    }

    /// `expr == 0`.
    pub fn zero(&mut self, expr: LinExpr) {
        self.push_row(&expr);
        match self.prog.cones.last_mut() {
            Some(Cone::Zero(d)) => *d += 1,
            _ => self.prog.cones.push(Cone::Zero(1)),
        }
    }

    /// `expr >= 0`.
    pub fn nonneg(&mut self, expr: LinExpr) {
        self.push_row(&expr);
        match self.prog.cones.last_mut() {
            Some(Cone::Nonnegative(d)) => *d += 1,
            _ => self.prog.cones.push(Cone::Nonnegative(1)),
        }
    }

    /// `‖tail‖₂ <= head`.
    pub fn soc(&mut self, head: LinExpr, tail: &[LinExpr]) {
        self.push_row(&head);
        for e in tail {
            self.push_row(e);
        }
        self.prog.cones.push(Cone::SecondOrder(1 + tail.len()));
    }

    pub fn finish(self) -> ConeProgram {
        self.prog
    }
}
