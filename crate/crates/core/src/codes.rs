//! The two modulation codes.
//!
//! Both are pure transformers on [`CellState`]: decoding reads only the
//! current levels, and encoding raises at most one level by one. When the
//! cell a write needs is already at `q - 1` the encoder reports
//! [`WriteOutcome::EraseRequired`] and leaves the state untouched.

use thiserror::Error;

use crate::cell::{CellState, CodeKind, CodeParams, WriteOutcome};
use crate::field::{FieldElem, FieldSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("expected a {expected} configuration, got {got}")]
    KindMismatch { expected: CodeKind, got: CodeKind },
    #[error("field has degree {got}, the code needs degree {expected}")]
    FieldDegree { expected: u32, got: u32 },
}

/// Common contract of a rewriting code.
pub trait ModulationCode {
    fn params(&self) -> &CodeParams;

    /// The value currently stored in `state`, in `0..l^k`.
    fn decode(&self, state: &CellState) -> u64;

    /// Stores `x` by raising at most one cell of `state`.
    fn encode(&self, state: &mut CellState, x: u64) -> WriteOutcome;

    fn zero_state(&self) -> CellState {
        self.params().zero_state()
    }
}

fn check_kind(params: &CodeParams, expected: CodeKind) -> Result<(), CodeError> {
    if params.kind() != expected {
        return Err(CodeError::KindMismatch {
            expected,
            got: params.kind(),
        });
    }
    Ok(())
}

fn check_state(params: &CodeParams, state: &CellState) {
    assert_eq!(
        state.len(),
        params.n(),
        "state has {} cells, code needs {}",
        state.len(),
        params.n()
    );
}

fn check_value(params: &CodeParams, x: u64) {
    assert!(
        x < params.alphabet_size(),
        "value {x} is outside 0..{}",
        params.alphabet_size()
    );
}

/// `n = l^k` cells; the cell index is shifted by the running write count so
/// that writes of any fixed value rotate over all cells.
#[derive(Debug, Clone)]
pub struct SelfRandomized {
    params: CodeParams,
}

impl SelfRandomized {
    pub fn new(params: CodeParams) -> Result<Self, CodeError> {
        check_kind(&params, CodeKind::SelfRandomized)?;
        Ok(Self { params })
    }

    /// Decoded value, given the l1 norm `r` and the weighted sum mod `l^k`.
    fn decode_parts(&self, r: u64, weighted: u64) -> u64 {
        let modulus = self.params.alphabet_size();
        let r = r as u128;
        let triangular = ((r * (r + 1) / 2) % modulus as u128) as u64;
        (weighted + modulus - triangular) % modulus
    }
}

impl ModulationCode for SelfRandomized {
    fn params(&self) -> &CodeParams {
        &self.params
    }

    fn decode(&self, state: &CellState) -> u64 {
        check_state(&self.params, state);
        let modulus = self.params.alphabet_size();
        self.decode_parts(state.l1_norm(), state.weighted_sum(modulus))
    }

    fn encode(&self, state: &mut CellState, x: u64) -> WriteOutcome {
        check_value(&self.params, x);
        let current = self.decode(state);
        if current == x {
            return WriteOutcome::NoOp;
        }
        let modulus = self.params.alphabet_size();
        let delta = (x + modulus - current) % modulus;
        let r = state.l1_norm() % modulus;
        let target = (delta + r + 1) % modulus;
        state.increment(target as usize)
    }
}

/// `n = l^(k+1)` cells. Each write maps the value and its `l` lifts through
/// an affine permutation of GF(l^(k+1)) keyed by the write count, which
/// gives `l` candidate cells; the least charged candidate is raised.
#[derive(Debug, Clone)]
pub struct LoadBalancing {
    params: CodeParams,
    field: FieldSpec,
}

impl LoadBalancing {
    /// Uses the default irreducible polynomial of degree `k + 1`.
    pub fn new(params: CodeParams) -> Result<Self, CodeError> {
        check_kind(&params, CodeKind::LoadBalancing)?;
        let field = FieldSpec::with_default_poly(params.k() + 1)
            .expect("validated parameters always have a default field");
        Ok(Self { params, field })
    }

    pub fn with_field(params: CodeParams, field: FieldSpec) -> Result<Self, CodeError> {
        check_kind(&params, CodeKind::LoadBalancing)?;
        if field.degree() != params.k() + 1 {
            return Err(CodeError::FieldDegree {
                expected: params.k() + 1,
                got: field.degree(),
            });
        }
        Ok(Self { params, field })
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    /// Affine coefficients `(a, b)` for write count `r`. `a` is never zero.
    pub fn coefficients(&self, r: u64) -> (FieldElem, FieldElem) {
        let lk = self.params.alphabet_size();
        let a = self.field.h(r % (lk - 1) + 1);
        let b = self.field.h(r % lk);
        (a, b)
    }

    /// Undoes the affine map for write count `r` and reduces mod `l^k`.
    fn unmask(&self, r: u64, lifted: u64) -> u64 {
        let (a, b) = self.coefficients(r);
        let a_inv = self.field.inv(a).expect("a is nonzero by construction");
        let y = self
            .field
            .mul(a_inv, self.field.sub(self.field.h(lifted), b));
        self.field.h_inv(y) % self.params.alphabet_size()
    }

    /// The `l` cells a write of `x` may raise, in candidate order.
    pub fn candidate_cells(&self, state: &CellState, x: u64) -> Vec<usize> {
        check_state(&self.params, state);
        check_value(&self.params, x);
        let n = self.params.n() as u64;
        let lk = self.params.alphabet_size();
        let current_lifted = state.weighted_sum(n);
        let r = state.l1_norm() + 1;
        let (a, b) = self.coefficients(r);
        (0..self.params.l() as u64)
            .map(|i| {
                let masked = self
                    .field
                    .add(self.field.mul(a, self.field.h(x + i * lk)), b);
                ((self.field.h_inv(masked) + n - current_lifted) % n) as usize
            })
            .collect()
    }
}

impl ModulationCode for LoadBalancing {
    fn params(&self) -> &CodeParams {
        &self.params
    }

    fn decode(&self, state: &CellState) -> u64 {
        check_state(&self.params, state);
        let lifted = state.weighted_sum(self.params.n() as u64);
        self.unmask(state.l1_norm(), lifted)
    }

    fn encode(&self, state: &mut CellState, x: u64) -> WriteOutcome {
        if self.decode(state) == x {
            return WriteOutcome::NoOp;
        }
        let candidates = self.candidate_cells(state, x);
        // min_by_key keeps the first minimum, so ties go to the lowest candidate.
        let target = candidates
            .into_iter()
            .min_by_key(|&c| state.level(c))
            .expect("l >= 2 candidates");
        state.increment(target)
    }
}

/// Either code, chosen at runtime from [`CodeParams::kind`].
#[derive(Debug, Clone)]
pub enum Code {
    SelfRandomized(SelfRandomized),
    LoadBalancing(LoadBalancing),
}

impl Code {
    pub fn new(params: CodeParams) -> Self {
        match params.kind() {
            CodeKind::SelfRandomized => {
                Code::SelfRandomized(SelfRandomized::new(params).expect("kind checked"))
            }
            CodeKind::LoadBalancing => {
                Code::LoadBalancing(LoadBalancing::new(params).expect("kind checked"))
            }
        }
    }
}

impl ModulationCode for Code {
    fn params(&self) -> &CodeParams {
        match self {
            Code::SelfRandomized(c) => c.params(),
            Code::LoadBalancing(c) => c.params(),
        }
    }

    fn decode(&self, state: &CellState) -> u64 {
        match self {
            Code::SelfRandomized(c) => c.decode(state),
            Code::LoadBalancing(c) => c.decode(state),
        }
    }

    fn encode(&self, state: &mut CellState, x: u64) -> WriteOutcome {
        match self {
            Code::SelfRandomized(c) => c.encode(state, x),
            Code::LoadBalancing(c) => c.encode(state, x),
        }
    }
}
