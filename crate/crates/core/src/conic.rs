//! Convex subproblem model and its interior-point solve.
//!
//! A [`ConicProgram`] is written in terms of named complex and real blocks.
//! [`canonicalize`] realifies it into the standard form
//! `min ½vᵀPv + qᵀv  s.t.  b − Av ∈ K` with `K` a product of a nonnegative
//! orthant and second-order cones; [`solve`] hands that to Clarabel, a
//! primal-dual interior-point method with Nesterov-Todd scaling over a
//! homogeneous self-dual embedding.
//!
//! Rank-one quadratic constraints `|aᴴx|² ≤ r` (with `r` affine in real
//! blocks) become the rotated-cone embedding
//! `‖(r/ρ − ρ, 2Re aᴴx, 2Im aᴴx)‖ ≤ r/ρ + ρ` for a fixed scale `ρ > 0`.
//! Squared norms go straight into `P`; ℓ1 terms get one epigraph variable per
//! entry with a 3-dimensional cone `|x_k| ≤ t_k`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{inner, Cplx, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Complex,
    Real,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub kind: BlockKind,
    pub len: usize,
}

/// Which real scalar of a block entry a coefficient multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    /// Real part of a complex entry, or the entry of a real block.
    Re,
    Im,
}

/// `constant + Σ coef · var`, where each `var` is a real scalar of a block.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr<T> {
    pub terms: Vec<(BlockId, usize, Part, T)>,
    pub constant: T,
}

impl<T: Real> AffineExpr<T> {
    pub fn constant(c: T) -> Self {
        AffineExpr { terms: Vec::new(), constant: c }
    }

    /// Adds `coef · block[index]` for a real block.
    pub fn real(mut self, block: BlockId, index: usize, coef: T) -> Self {
        self.terms.push((block, index, Part::Re, coef));
        self
    }

    /// Adds `scale · Re{gᴴx}` for a complex block `x`.
    pub fn re_inner(mut self, block: BlockId, g: &[Cplx<T>], scale: T) -> Self {
        for (k, gk) in g.iter().enumerate() {
            if gk.re != T::zero() {
                self.terms.push((block, k, Part::Re, scale * gk.re));
            }
            if gk.im != T::zero() {
                self.terms.push((block, k, Part::Im, scale * gk.im));
            }
        }
        self
    }

    pub fn eval(&self, values: &BlockValues<T>) -> T {
        self.terms.iter().fold(self.constant, |acc, &(b, i, part, c)| acc + c * values.scalar(b, i, part))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint<T> {
    /// `|aᴴx|² ≤ rhs` for the complex block `x`.
    SocRank1 { block: BlockId, a: Vec<Cplx<T>>, rhs: AffineExpr<T> },
    /// `expr ≥ 0`.
    Linear(AffineExpr<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveTerm<T> {
    /// `weight · ‖block‖²`.
    SquaredNorm {
        block: BlockId,
        weight: T,
    },
    /// `weight · Σ_k |block_k|` (modulus for complex entries).
    L1 {
        block: BlockId,
        weight: T,
    },
    Linear(AffineExpr<T>),
}

/// Convex program over complex and real blocks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram<T> {
    blocks: Vec<Block>,
    objective: Vec<ObjectiveTerm<T>>,
    constraints: Vec<Constraint<T>>,
}

impl<T: Real> ConicProgram<T> {
    pub fn new() -> Self {
        ConicProgram { blocks: Vec::new(), objective: Vec::new(), constraints: Vec::new() }
    }

    pub fn complex_block(&mut self, name: &str, len: usize) -> BlockId {
        self.push_block(name, BlockKind::Complex, len)
    }

    pub fn real_block(&mut self, name: &str, len: usize) -> BlockId {
        self.push_block(name, BlockKind::Real, len)
    }

    fn push_block(&mut self, name: &str, kind: BlockKind, len: usize) -> BlockId {
        self.blocks.push(Block { name: name.to_string(), kind, len });
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_objective(&mut self, term: ObjectiveTerm<T>) {
        self.objective.push(term);
    }

    pub fn add_constraint(&mut self, c: Constraint<T>) {
        self.constraints.push(c);
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.0]
    }

    pub fn block_by_name(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name).map(BlockId)
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    pub fn objective(&self) -> &[ObjectiveTerm<T>] {
        &self.objective
    }

    /// Checks that every reference points at a declared block entry with the
    /// right kind and that all data are finite.
    pub fn validate(&self) -> Result<()> {
        let check_ref = |b: BlockId, i: usize, part: Part| -> Result<()> {
            let blk = self.blocks.get(b.0).ok_or_else(|| Error::InvalidProgram(format!("unknown block {}", b.0)))?;
            if i >= blk.len {
                return Err(Error::InvalidProgram(format!("index {i} out of range for block '{}'", blk.name)));
            }
            if blk.kind == BlockKind::Real && part == Part::Im {
                return Err(Error::InvalidProgram(format!("imaginary part of real block '{}'", blk.name)));
            }
            Ok(())
        };
        let check_expr = |e: &AffineExpr<T>| -> Result<()> {
            if !e.constant.is_finite() {
                return Err(Error::InvalidProgram("non-finite constant".into()));
            }
            for &(b, i, p, c) in &e.terms {
                check_ref(b, i, p)?;
                if !c.is_finite() {
                    return Err(Error::InvalidProgram("non-finite coefficient".into()));
                }
            }
            Ok(())
        };
        for term in &self.objective {
            match term {
                ObjectiveTerm::SquaredNorm { block, weight } | ObjectiveTerm::L1 { block, weight } => {
                    if block.0 >= self.blocks.len() {
                        return Err(Error::InvalidProgram(format!("unknown block {}", block.0)));
                    }
                    if !(*weight >= T::zero()) || !weight.is_finite() {
                        return Err(Error::InvalidProgram("objective weights must be finite and nonnegative".into()));
                    }
                }
                ObjectiveTerm::Linear(e) => check_expr(e)?,
            }
        }
        for c in &self.constraints {
            match c {
                Constraint::SocRank1 { block, a, rhs } => {
                    let blk = self
                        .blocks
                        .get(block.0)
                        .ok_or_else(|| Error::InvalidProgram(format!("unknown block {}", block.0)))?;
                    if blk.kind != BlockKind::Complex {
                        return Err(Error::InvalidProgram("rank-one cone needs a complex block".into()));
                    }
                    if a.len() != blk.len {
                        return Err(Error::InvalidProgram(format!(
                            "rank-one cone vector has length {}, block '{}' has {}",
                            a.len(),
                            blk.name,
                            blk.len
                        )));
                    }
                    if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                        return Err(Error::InvalidProgram("non-finite cone vector".into()));
                    }
                    check_expr(rhs)?;
                    if rhs.terms.iter().any(|&(b, ..)| self.blocks[b.0].kind != BlockKind::Real) {
                        return Err(Error::InvalidProgram("rank-one cone bound must be affine in real blocks".into()));
                    }
                }
                Constraint::Linear(e) => check_expr(e)?,
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, v: &BlockValues<T>) -> T {
        self.objective.iter().fold(T::zero(), |acc, term| {
            acc + match term {
                ObjectiveTerm::SquaredNorm { block, weight } => *weight * v.norm_sqr(*block),
                ObjectiveTerm::L1 { block, weight } => *weight * v.l1(*block),
                ObjectiveTerm::Linear(e) => e.eval(v),
            }
        })
    }

    /// Per-constraint slack: `rhs − |aᴴx|²` or `expr`; nonnegative iff satisfied.
    pub fn residuals(&self, v: &BlockValues<T>) -> Vec<T> {
        self.constraints
            .iter()
            .map(|c| match c {
                Constraint::SocRank1 { block, a, rhs } => rhs.eval(v) - inner(a, v.complex(*block)).norm_sqr(),
                Constraint::Linear(e) => e.eval(v),
            })
            .collect()
    }

    /// Largest constraint violation (zero when feasible).
    pub fn max_violation(&self, v: &BlockValues<T>) -> T {
        self.residuals(v).into_iter().fold(T::zero(), |m, r| m.max(-r))
    }

    /// Zero-valued assignment with the right shapes.
    pub fn zero_values(&self) -> BlockValues<T> {
        BlockValues {
            blocks: self
                .blocks
                .iter()
                .map(|b| match b.kind {
                    BlockKind::Complex => BlockValue::Complex(vec![Cplx::new(T::zero(), T::zero()); b.len]),
                    BlockKind::Real => BlockValue::Real(vec![T::zero(); b.len]),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockValue<T> {
    Complex(Vec<Cplx<T>>),
    Real(Vec<T>),
}

/// Values for every block of a program.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockValues<T> {
    blocks: Vec<BlockValue<T>>,
}

impl<T: Real> BlockValues<T> {
    pub fn complex(&self, id: BlockId) -> &[Cplx<T>] {
        match &self.blocks[id.0] {
            BlockValue::Complex(v) => v,
            BlockValue::Real(_) => panic!("block {} is real", id.0),
        }
    }

    pub fn real(&self, id: BlockId) -> &[T] {
        match &self.blocks[id.0] {
            BlockValue::Real(v) => v,
            BlockValue::Complex(_) => panic!("block {} is complex", id.0),
        }
    }

    pub fn set_complex(&mut self, id: BlockId, v: Vec<Cplx<T>>) {
        assert!(matches!(&self.blocks[id.0], BlockValue::Complex(old) if old.len() == v.len()));
        self.blocks[id.0] = BlockValue::Complex(v);
    }

    pub fn set_real(&mut self, id: BlockId, v: Vec<T>) {
        assert!(matches!(&self.blocks[id.0], BlockValue::Real(old) if old.len() == v.len()));
        self.blocks[id.0] = BlockValue::Real(v);
    }

    fn scalar(&self, id: BlockId, i: usize, part: Part) -> T {
        match (&self.blocks[id.0], part) {
            (BlockValue::Complex(v), Part::Re) => v[i].re,
            (BlockValue::Complex(v), Part::Im) => v[i].im,
            (BlockValue::Real(v), Part::Re) => v[i],
            (BlockValue::Real(_), Part::Im) => T::zero(),
        }
    }

    fn norm_sqr(&self, id: BlockId) -> T {
        match &self.blocks[id.0] {
            BlockValue::Complex(v) => v.iter().map(|c| c.norm_sqr()).sum(),
            BlockValue::Real(v) => v.iter().map(|&c| c * c).sum(),
        }
    }

    fn l1(&self, id: BlockId) -> T {
        match &self.blocks[id.0] {
            BlockValue::Complex(v) => v.iter().map(|c| c.norm()).sum(),
            BlockValue::Real(v) => v.iter().map(|c| c.abs()).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Nonnegative(usize),
    SecondOrder(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Nonnegative(d) | Cone::SecondOrder(d) => d,
        }
    }
}

/// Realified standard form `min ½vᵀPv + qᵀv + c₀  s.t.  b − Av ∈ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm<T> {
    pub num_vars: usize,
    /// Upper-triangular entries of `P`.
    pub p: Vec<(usize, usize, T)>,
    pub q: Vec<T>,
    pub objective_constant: T,
    /// Entries `(row, col, value)` of `A`, duplicates merged.
    pub a: Vec<(usize, usize, T)>,
    pub b: Vec<T>,
    pub cones: Vec<Cone>,
    layout: Vec<(BlockKind, usize, usize)>,
    l1_aux: Vec<(BlockId, usize)>,
}

struct RowBuilder<T> {
    entries: BTreeMap<(usize, usize), T>,
    b: Vec<T>,
}

impl<T: Real> RowBuilder<T> {
    fn push_row(&mut self, coefs: impl IntoIterator<Item = (usize, T)>, b: T) {
        let row = self.b.len();
        for (col, v) in coefs {
            if v != T::zero() {
                *self.entries.entry((row, col)).or_insert(T::zero()) += v;
            }
        }
        self.b.push(b);
    }
}

/// Realifies a program into [`StandardForm`].
///
/// Complex block entries occupy two consecutive ranges: all real parts, then
/// all imaginary parts. ℓ1 epigraph variables follow the declared blocks.
pub fn canonicalize<T: Real>(program: &ConicProgram<T>) -> Result<StandardForm<T>> {
    program.validate()?;
    let mut layout = Vec::with_capacity(program.blocks.len());
    let mut offset = 0;
    for b in &program.blocks {
        layout.push((b.kind, offset, b.len));
        offset += match b.kind {
            BlockKind::Complex => 2 * b.len,
            BlockKind::Real => b.len,
        };
    }
    let col_of = |b: BlockId, i: usize, part: Part| -> usize {
        let (kind, off, len) = layout[b.0];
        match (kind, part) {
            (BlockKind::Complex, Part::Im) => off + len + i,
            _ => off + i,
        }
    };

    let mut l1_aux = Vec::new();
    for term in &program.objective {
        if let ObjectiveTerm::L1 { block, .. } = term {
            if !l1_aux.iter().any(|(b, _)| b == block) {
                l1_aux.push((*block, offset));
                offset += program.blocks[block.0].len;
            }
        }
    }
    let num_vars = offset;

    let mut pdiag = vec![T::zero(); num_vars];
    let mut q = vec![T::zero(); num_vars];
    let mut objective_constant = T::zero();
    for term in &program.objective {
        match term {
            ObjectiveTerm::SquaredNorm { block, weight } => {
                let (_, off, len) = layout[block.0];
                let width = match program.blocks[block.0].kind {
                    BlockKind::Complex => 2 * len,
                    BlockKind::Real => len,
                };
                for v in &mut pdiag[off..off + width] {
                    *v += T::lit(2.0) * *weight;
                }
            }
            ObjectiveTerm::L1 { block, weight } => {
                let (_, aux) = l1_aux.iter().find(|(b, _)| b == block).copied().expect("aux registered");
                for v in &mut q[aux..aux + program.blocks[block.0].len] {
                    *v += *weight;
                }
            }
            ObjectiveTerm::Linear(e) => {
                objective_constant += e.constant;
                for &(b, i, part, c) in &e.terms {
                    q[col_of(b, i, part)] += c;
                }
            }
        }
    }
    let p = pdiag.iter().enumerate().filter(|(_, &v)| v != T::zero()).map(|(i, &v)| (i, i, v)).collect();

    // s = b − A v.  Linear `expr ≥ 0`: A row = −coefs, b = constant.
    let mut lin = RowBuilder { entries: BTreeMap::new(), b: Vec::new() };
    let mut soc = RowBuilder { entries: BTreeMap::new(), b: Vec::new() };
    let mut soc_dims = Vec::new();
    let neg_expr =
        |e: &AffineExpr<T>| -> Vec<(usize, T)> { e.terms.iter().map(|&(b, i, p, c)| (col_of(b, i, p), -c)).collect() };
    for c in &program.constraints {
        match c {
            Constraint::Linear(e) => lin.push_row(neg_expr(e), e.constant),
            Constraint::SocRank1 { block, a, rhs } => {
                let two = T::lit(2.0);
                // (r/ρ + ρ, r/ρ − ρ, 2Re aᴴx, 2Im aᴴx) with aᴴx = Σ conj(a_k) x_k;
                // ρ ≈ √r keeps all four entries on the same scale.
                let rho = if rhs.constant > T::zero() { rhs.constant.sqrt() } else { T::one() };
                let scaled: Vec<(usize, T)> = neg_expr(rhs).into_iter().map(|(c, v)| (c, v / rho)).collect();
                soc.push_row(scaled.clone(), rhs.constant / rho + rho);
                soc.push_row(scaled, rhs.constant / rho - rho);
                let re_row: Vec<(usize, T)> = a
                    .iter()
                    .enumerate()
                    .flat_map(|(k, ak)| {
                        [(col_of(*block, k, Part::Re), -two * ak.re), (col_of(*block, k, Part::Im), -two * ak.im)]
                    })
                    .collect();
                soc.push_row(re_row, T::zero());
                let im_row: Vec<(usize, T)> = a
                    .iter()
                    .enumerate()
                    .flat_map(|(k, ak)| {
                        [(col_of(*block, k, Part::Re), two * ak.im), (col_of(*block, k, Part::Im), -two * ak.re)]
                    })
                    .collect();
                soc.push_row(im_row, T::zero());
                soc_dims.push(4);
            }
        }
    }
    for &(block, aux) in &l1_aux {
        let blk = &program.blocks[block.0];
        for k in 0..blk.len {
            match blk.kind {
                BlockKind::Complex => {
                    soc.push_row([(aux + k, -T::one())], T::zero());
                    soc.push_row([(col_of(block, k, Part::Re), -T::one())], T::zero());
                    soc.push_row([(col_of(block, k, Part::Im), -T::one())], T::zero());
                    soc_dims.push(3);
                }
                BlockKind::Real => {
                    let x = col_of(block, k, Part::Re);
                    lin.push_row([(aux + k, T::one()), (x, -T::one())], T::zero());
                    lin.push_row([(aux + k, T::one()), (x, T::one())], T::zero());
                }
            }
        }
    }

    let n_lin = lin.b.len();
    let mut a: Vec<(usize, usize, T)> = lin.entries.into_iter().map(|((r, c), v)| (r, c, v)).collect();
    a.extend(soc.entries.into_iter().map(|((r, c), v)| (r + n_lin, c, v)));
    let mut b = lin.b;
    b.extend(soc.b);
    let mut cones = Vec::new();
    if n_lin > 0 {
        cones.push(Cone::Nonnegative(n_lin));
    }
    cones.extend(soc_dims.into_iter().map(Cone::SecondOrder));

    Ok(StandardForm { num_vars, p, q, objective_constant, a, b, cones, layout, l1_aux })
}

impl<T: Real> StandardForm<T> {
    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// True when there are no cones beyond the orthant and no quadratic term.
    pub fn is_lp(&self) -> bool {
        self.p.is_empty() && self.cones.iter().all(|c| matches!(c, Cone::Nonnegative(_)))
    }

    /// Maps block values to a standard-form point (ℓ1 epigraph variables are
    /// set to the entry magnitudes).
    pub fn embed(&self, values: &BlockValues<T>) -> Vec<T> {
        let mut v = vec![T::zero(); self.num_vars];
        for (bi, &(kind, off, len)) in self.layout.iter().enumerate() {
            match (&values.blocks[bi], kind) {
                (BlockValue::Complex(x), BlockKind::Complex) => {
                    for k in 0..len {
                        v[off + k] = x[k].re;
                        v[off + len + k] = x[k].im;
                    }
                }
                (BlockValue::Real(x), BlockKind::Real) => v[off..off + len].copy_from_slice(x),
                _ => panic!("block values do not match program layout"),
            }
        }
        for &(block, aux) in &self.l1_aux {
            match &values.blocks[block.0] {
                BlockValue::Complex(x) => x.iter().enumerate().for_each(|(k, c)| v[aux + k] = c.norm()),
                BlockValue::Real(x) => x.iter().enumerate().for_each(|(k, c)| v[aux + k] = c.abs()),
            }
        }
        v
    }

    /// Recovers block values from a standard-form point.
    pub fn extract(&self, v: &[T]) -> BlockValues<T> {
        BlockValues {
            blocks: self
                .layout
                .iter()
                .map(|&(kind, off, len)| match kind {
                    BlockKind::Complex => {
                        BlockValue::Complex((0..len).map(|k| Cplx::new(v[off + k], v[off + len + k])).collect())
                    }
                    BlockKind::Real => BlockValue::Real(v[off..off + len].to_vec()),
                })
                .collect(),
        }
    }

    /// Cone slack `b − Av`.
    pub fn slack(&self, v: &[T]) -> Vec<T> {
        let mut s = self.b.clone();
        for &(r, c, val) in &self.a {
            s[r] -= val * v[c];
        }
        s
    }

    /// Distance-like violation of `b − Av ∈ K` (zero when inside).
    pub fn cone_violation(&self, v: &[T]) -> T {
        let s = self.slack(v);
        let mut off = 0;
        let mut worst = T::zero();
        for cone in &self.cones {
            let d = cone.dim();
            let seg = &s[off..off + d];
            worst = worst.max(match cone {
                Cone::Nonnegative(_) => seg.iter().fold(T::zero(), |m, &x| m.max(-x)),
                Cone::SecondOrder(_) => {
                    let tail: T = seg[1..].iter().map(|&x| x * x).sum::<T>().sqrt();
                    (tail - seg[0]).max(T::zero())
                }
            });
            off += d;
        }
        worst
    }

    pub fn objective(&self, v: &[T]) -> T {
        let half = T::lit(0.5);
        let quad = self.p.iter().fold(T::zero(), |acc, &(i, j, val)| {
            let w = if i == j { half } else { T::one() };
            acc + w * val * v[i] * v[j]
        });
        quad + self.q.iter().zip(v).map(|(&a, &b)| a * b).sum::<T>() + self.objective_constant
    }

    /// Plain-text dump (dimensions, cone list, nonzeros) for cross-checking
    /// with external solvers.
    pub fn dump(&self, mut w: impl io::Write) -> io::Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "vars {}", self.num_vars);
        let _ = writeln!(s, "rows {}", self.num_rows());
        let _ = writeln!(s, "objective_constant {:e}", self.objective_constant);
        let cones: Vec<String> = self
            .cones
            .iter()
            .map(|c| match c {
                Cone::Nonnegative(d) => format!("l{d}"),
                Cone::SecondOrder(d) => format!("q{d}"),
            })
            .collect();
        let _ = writeln!(s, "cones {}", cones.join(" "));
        let _ = writeln!(s, "P {}", self.p.len());
        for (i, j, v) in &self.p {
            let _ = writeln!(s, "{i} {j} {v:e}");
        }
        let nz_q: Vec<_> = self.q.iter().enumerate().filter(|(_, v)| **v != T::zero()).collect();
        let _ = writeln!(s, "q {}", nz_q.len());
        for (i, v) in nz_q {
            let _ = writeln!(s, "{i} {v:e}");
        }
        let _ = writeln!(s, "A {}", self.a.len());
        for (i, j, v) in &self.a {
            let _ = writeln!(s, "{i} {j} {v:e}");
        }
        let _ = writeln!(s, "b {}", self.b.len());
        for v in &self.b {
            let _ = writeln!(s, "{v:e}");
        }
        w.write_all(s.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConicStatus {
    Optimal,
    MaxIter,
    Infeasible,
    NumericalFailure,
}

impl std::fmt::Display for ConicStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConicStatus::Optimal => "optimal",
            ConicStatus::MaxIter => "max_iter",
            ConicStatus::Infeasible => "infeasible",
            ConicStatus::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution<T> {
    pub values: BlockValues<T>,
    /// Objective of the original program at `values`.
    pub objective_value: T,
    /// Absolute primal-dual gap reported by the interior-point method.
    pub gap: T,
    pub status: ConicStatus,
    pub iterations: u32,
    /// Largest violation of the original constraints at `values`.
    pub max_violation: T,
    /// Termination reason as reported by the interior-point method.
    pub raw_status: String,
}

/// Interior-point settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub tol: T,
    pub max_iter: u32,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions { tol: T::lit(1e-8), max_iter: 100 }
    }
}

/// Solves `program` to the requested gap tolerance.
///
/// Infeasible or failed solves are reported through
/// [`ConicSolution::status`]; only malformed programs return `Err`.
pub fn solve<T: Real>(program: &ConicProgram<T>, opts: SolverOptions<T>) -> Result<ConicSolution<T>> {
    if !(opts.tol > T::zero()) {
        return Err(Error::invalid("solver tolerance must be positive"));
    }
    let sf = canonicalize(program)?;
    solve_standard(program, &sf, opts)
}

fn solve_standard<T: Real>(
    program: &ConicProgram<T>,
    sf: &StandardForm<T>,
    opts: SolverOptions<T>,
) -> Result<ConicSolution<T>> {
    // The interior-point iteration always runs in double precision; its
    // regularization and refinement thresholds do not fit single precision.
    let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
    let lift = |t: &[(usize, usize, T)]| -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let (i, j, v) = split_triplets(t);
        (i, j, v.into_iter().map(f).collect())
    };
    let n = sf.num_vars;
    let m = sf.num_rows();
    let (pi, pj, pv) = lift(&sf.p);
    let pmat = CscMatrix::new_from_triplets(n, n, pi, pj, pv);
    let (ai, aj, av) = lift(&sf.a);
    let amat = CscMatrix::new_from_triplets(m, n, ai, aj, av);
    let q: Vec<f64> = sf.q.iter().map(|&v| f(v)).collect();
    let b: Vec<f64> = sf.b.iter().map(|&v| f(v)).collect();
    let cones: Vec<SupportedConeT<f64>> = sf
        .cones
        .iter()
        .map(|c| match *c {
            Cone::Nonnegative(d) => SupportedConeT::NonnegativeConeT(d),
            Cone::SecondOrder(d) => SupportedConeT::SecondOrderConeT(d),
        })
        .collect();

    // Linearized subproblems pair nearly tangent cones and half-spaces; row
    // equilibration and the default static regularization both cost accuracy
    // on those, so run unscaled with a small regularizer.
    let tol = f(opts.tol);
    let settings = DefaultSettings::<f64> {
        verbose: false,
        max_iter: opts.max_iter,
        tol_gap_abs: tol,
        tol_gap_rel: tol,
        tol_feas: tol,
        presolve_enable: false,
        equilibrate_enable: false,
        static_regularization_constant: 1e-12,
        ..DefaultSettings::default()
    };
    let mut solver =
        DefaultSolver::new(&pmat, &q, &amat, &b, &cones, settings).map_err(|e| Error::InvalidProgram(e.to_string()))?;
    solver.solve();
    let sol = &solver.solution;
    let x: Vec<T> = sol.x.iter().map(|&v| T::from_f64(v).unwrap_or(T::nan())).collect();

    let values = sf.extract(&x);
    let objective_value = program.objective_value(&values);
    let max_violation = program.max_violation(&values);
    let gap = T::from_f64((sol.obj_val - sol.obj_val_dual).abs()).unwrap_or(T::nan());
    let status = match sol.status {
        SolverStatus::Solved => ConicStatus::Optimal,
        SolverStatus::AlmostSolved => {
            // Accept reduced-accuracy termination only when it checks out
            // against the original program.
            let scale = T::one() + objective_value.abs();
            if gap <= T::lit(10.0) * opts.tol * scale && max_violation <= T::lit(10.0) * opts.tol * scale {
                ConicStatus::Optimal
            } else {
                ConicStatus::NumericalFailure
            }
        }
        SolverStatus::PrimalInfeasible
        | SolverStatus::DualInfeasible
        | SolverStatus::AlmostPrimalInfeasible
        | SolverStatus::AlmostDualInfeasible => ConicStatus::Infeasible,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => ConicStatus::MaxIter,
        _ => ConicStatus::NumericalFailure,
    };
    Ok(ConicSolution {
        values,
        objective_value,
        gap,
        status,
        iterations: sol.iterations,
        max_violation,
        raw_status: format!("{:?}", sol.status),
    })
}

fn split_triplets<T: Copy>(t: &[(usize, usize, T)]) -> (Vec<usize>, Vec<usize>, Vec<T>) {
    let mut i = Vec::with_capacity(t.len());
    let mut j = Vec::with_capacity(t.len());
    let mut v = Vec::with_capacity(t.len());
    for &(a, b, c) in t {
        i.push(a);
        j.push(b);
        v.push(c);
    }
    (i, j, v)
}
