use std::cell::RefCell;
use std::collections::BTreeMap;

use colsod_autograd::{BatchStats, Gradients, Tape, Tensor, Var};

use crate::error::Result;
use crate::params::ParamStore;

/// Momentum of the running batch-norm statistics.
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in normalization layers; parameters are tape leaves
    /// unless frozen.
    Train,
    /// Running statistics; parameters are constants.
    Eval,
}

/// One forward pass: binds stored parameters onto a tape and collects the
/// normalization statistics observed along the way.
pub struct Session<'s, 't> {
    tape: &'t Tape,
    store: &'s ParamStore,
    mode: Mode,
    frozen: bool,
    bound: RefCell<BTreeMap<String, Var<'t>>>,
    stats: RefCell<Vec<(String, BatchStats)>>,
}

impl<'s, 't> Session<'s, 't> {
    pub fn new(tape: &'t Tape, store: &'s ParamStore, mode: Mode) -> Self {
        Self {
            tape,
            store,
            mode,
            frozen: mode == Mode::Eval,
            bound: RefCell::new(BTreeMap::new()),
            stats: RefCell::new(Vec::new()),
        }
    }

    /// Binds parameters as constants even in training mode, so the pass
    /// records no gradient graph for them.
    pub fn with_frozen_params(mut self) -> Self {
        self.frozen = true;
        self
    }

    /// Binds parameters as tape leaves even in evaluation mode.
    pub fn with_tracked_params(mut self) -> Self {
        self.frozen = false;
        self
    }

    /// Uses `var` for the named parameter instead of the stored value.
    pub fn bind(&self, name: &str, var: Var<'t>) {
        self.bound.borrow_mut().insert(name.to_string(), var);
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    /// The named parameter, bound once per session.
    pub fn param(&self, name: &str) -> Result<Var<'t>> {
        if let Some(v) = self.bound.borrow().get(name) {
            return Ok(v.clone());
        }
        let value = self.store.param(name)?.clone();
        let var = if self.frozen {
            self.tape.constant(value)
        } else {
            self.tape.leaf(value)
        };
        self.bound.borrow_mut().insert(name.to_string(), var.clone());
        Ok(var)
    }

    pub fn buffer(&self, name: &str) -> Result<&'s Tensor> {
        self.store.buffer(name)
    }

    pub(crate) fn record_stats(&self, prefix: &str, stats: BatchStats) {
        self.stats.borrow_mut().push((prefix.to_string(), stats));
    }

    /// Gradients of every parameter bound in this session; parameters the
    /// loss does not reach get zeros.
    pub fn gradients(&self, grads: &Gradients) -> BTreeMap<String, Tensor> {
        self.bound
            .borrow()
            .iter()
            .map(|(k, v)| (k.clone(), grads.get_or_zeros(v)))
            .collect()
    }

    /// Names of the parameters touched by the forward pass.
    pub fn bound_names(&self) -> Vec<String> {
        self.bound.borrow().keys().cloned().collect()
    }

    /// Ends the pass, keeping the normalization statistics it observed.
    pub fn into_batch_stats(self) -> ObservedStats {
        ObservedStats(self.stats.into_inner())
    }
}

/// Batch statistics of one training pass, keyed by normalization layer.
#[derive(Debug, Clone, Default)]
pub struct ObservedStats(Vec<(String, BatchStats)>);

impl ObservedStats {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Folds the statistics into the running averages of `store`.
    pub fn apply(&self, store: &mut ParamStore) -> Result<()> {
        for (prefix, s) in &self.0 {
            blend(store.buffer_mut(&format!("{prefix}.running_mean"))?, &s.mean);
            blend(store.buffer_mut(&format!("{prefix}.running_var"))?, &s.var_unbiased);
        }
        Ok(())
    }
}

fn blend(running: &mut Tensor, observed: &[f64]) {
    for (r, o) in running.data_mut().iter_mut().zip(observed) {
        *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * o;
    }
}
