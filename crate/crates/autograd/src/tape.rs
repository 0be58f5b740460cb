//! Define-by-run gradient tape.
//!
//! Every differentiable operation that has at least one input requiring a
//! gradient appends a node to the [`Tape`]. Values are owned by the [`Var`]
//! handles (and by whatever backward closures captured them), so operations
//! on constants leave nothing behind on the tape and inference passes do not
//! accumulate activations.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::tensor::Tensor;

/// Computes the gradient for each parent given the output gradient.
/// The mask says which parents actually need one.
pub(crate) type BackwardFn = Box<dyn Fn(&Tensor, &[bool]) -> Vec<Option<Tensor>>>;

struct Node {
    parents: Vec<Option<usize>>,
    backward: Option<BackwardFn>,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value, optionally tracked on a tape.
#[derive(Clone)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: Option<usize>,
    value: Rc<Tensor>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A leaf whose gradient is requested.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            parents: Vec::new(),
            backward: None,
        });
        Var {
            tape: self,
            id: Some(nodes.len() - 1),
            value: Rc::new(value),
        }
    }

    /// An untracked value.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        Var {
            tape: self,
            id: None,
            value: Rc::new(value),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn record<'t>(
        &'t self,
        value: Tensor,
        parents: &[&Var<'t>],
        backward: impl Fn(&Tensor, &[bool]) -> Vec<Option<Tensor>> + 'static,
    ) -> Var<'t> {
        let ids: Vec<Option<usize>> = parents.iter().map(|p| p.id).collect();
        if ids.iter().all(Option::is_none) {
            return self.constant(value);
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            parents: ids,
            backward: Some(Box::new(backward)),
        });
        Var {
            tape: self,
            id: Some(nodes.len() - 1),
            value: Rc::new(value),
        }
    }

    /// Back-propagates from a single-element `root`.
    pub fn backward(&self, root: &Var<'_>) -> Gradients {
        let mut grads: HashMap<usize, Tensor> = HashMap::new();
        let Some(root_id) = root.id else {
            return Gradients { grads };
        };
        let nodes = self.nodes.borrow();
        let mut pending: Vec<Option<Tensor>> = Vec::with_capacity(nodes.len());
        pending.resize_with(nodes.len(), || None);
        pending[root_id] = Some(Tensor::ones(root.value.shape()));

        for id in (0..=root_id).rev() {
            let Some(grad) = pending[id].take() else {
                continue;
            };
            let node = &nodes[id];
            match &node.backward {
                None => {
                    grads.insert(id, grad);
                }
                Some(backward) => {
                    let mask: Vec<bool> = node.parents.iter().map(Option::is_some).collect();
                    let parent_grads = backward(&grad, &mask);
                    for (parent, g) in node.parents.iter().zip(parent_grads) {
                        if let (Some(pid), Some(g)) = (parent, g) {
                            match &mut pending[*pid] {
                                Some(acc) => acc.add_assign(&g),
                                slot @ None => *slot = Some(g),
                            }
                        }
                    }
                }
            }
        }
        Gradients { grads }
    }
}

/// Gradients of leaves, keyed by their tape position.
pub struct Gradients {
    grads: HashMap<usize, Tensor>,
}

impl Gradients {
    /// Gradient of `leaf`; `None` when it did not influence the root.
    pub fn get(&self, leaf: &Var<'_>) -> Option<&Tensor> {
        leaf.id.and_then(|id| self.grads.get(&id))
    }

    /// Gradient of `leaf`, with zeros when it did not influence the root.
    pub fn get_or_zeros(&self, leaf: &Var<'_>) -> Tensor {
        self.get(leaf)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(leaf.value.shape()))
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn requires_grad(&self) -> bool {
        self.id.is_some()
    }

    pub(crate) fn rc(&self) -> Rc<Tensor> {
        Rc::clone(&self.value)
    }

    /// Shares the value without tracking it.
    pub fn detach(&self) -> Var<'t> {
        Var {
            tape: self.tape,
            id: None,
            value: self.rc(),
        }
    }
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("value", &self.value)
            .finish()
    }
}
