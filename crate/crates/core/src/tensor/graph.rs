use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use super::{Result, Tensor, TensorError};
use crate::scalar::Scalar;

/// Vector-Jacobian product of one recorded operation.
///
/// `needs[i]` is false when input `i` does not lead to any leaf that
/// requires a gradient; implementations may return `None` for it.
pub trait Backward<S: Scalar> {
    fn name(&self) -> &'static str;

    fn backward(
        &self,
        inputs: &[&Tensor<S>],
        output: &Tensor<S>,
        grad: &Tensor<S>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<S>>>;
}

struct Recorded<S: Scalar> {
    inputs: Vec<usize>,
    rule: Box<dyn Backward<S>>,
}

struct Node<S: Scalar> {
    value: Rc<Tensor<S>>,
    requires_grad: bool,
    op: Option<Recorded<S>>,
}

/// Append-only tape. Node ids are assigned in creation order, which is a
/// topological order because an op can only reference existing nodes.
pub struct Graph<S: Scalar> {
    nodes: RefCell<Vec<Node<S>>>,
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g, S: Scalar> {
    pub(crate) graph: &'g Graph<S>,
    pub(crate) id: usize,
}

impl<S: Scalar> fmt::Debug for Var<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<S>, requires_grad: bool, op: Option<Recorded<S>>) -> Var<'_, S> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            requires_grad,
            op,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    /// Trainable leaf.
    pub fn param(&self, value: Tensor<S>) -> Var<'_, S> {
        self.push(value, true, None)
    }

    pub fn constant(&self, value: Tensor<S>) -> Var<'_, S> {
        self.push(value, false, None)
    }

    pub fn leaf(&self, value: Tensor<S>, requires_grad: bool) -> Var<'_, S> {
        self.push(value, requires_grad, None)
    }

    /// Records `output = op(inputs)`. The rule is dropped when no input
    /// requires a gradient.
    pub fn record<'g>(
        &'g self,
        inputs: &[Var<'g, S>],
        output: Tensor<S>,
        rule: impl Backward<S> + 'static,
    ) -> Var<'g, S> {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            inputs.iter().any(|v| {
                assert!(std::ptr::eq(v.graph, self), "variable from another graph");
                nodes[v.id].requires_grad
            })
        };
        let op = requires_grad.then(|| Recorded {
            inputs: inputs.iter().map(|v| v.id).collect(),
            rule: Box::new(rule),
        });
        self.push(output, requires_grad, op)
    }

    pub(crate) fn value(&self, id: usize) -> Rc<Tensor<S>> {
        self.nodes.borrow()[id].value.clone()
    }

    pub(crate) fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Reverse sweep from a scalar loss. Gradients of intermediate nodes
    /// are released as soon as they have been propagated; leaf gradients
    /// are returned.
    pub fn backward(&self, loss: Var<'_, S>) -> Result<Gradients<S>> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.len() != 1 {
            return Err(TensorError::NonScalarLoss(root.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..nodes.len()).map(|_| None).collect();
        if !root.requires_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.id] = Some(Tensor::ones(root.value.shape()));
        for id in (0..=loss.id).rev() {
            let Some(op) = &nodes[id].op else { continue };
            let Some(grad) = grads[id].take() else { continue };
            let inputs: Vec<&Tensor<S>> = op.inputs.iter().map(|&i| nodes[i].value.as_ref()).collect();
            let needs: Vec<bool> = op.inputs.iter().map(|&i| nodes[i].requires_grad).collect();
            let local = op.rule.backward(&inputs, &nodes[id].value, &grad, &needs);
            debug_assert_eq!(local.len(), op.inputs.len(), "{} returned wrong arity", op.rule.name());
            for ((&input, g), need) in op.inputs.iter().zip(local).zip(needs) {
                let Some(g) = g else { continue };
                if !need {
                    continue;
                }
                debug_assert_eq!(
                    g.shape(),
                    nodes[input].value.shape(),
                    "{} produced a gradient of the wrong shape",
                    op.rule.name()
                );
                match &mut grads[input] {
                    Some(acc) => acc.add_assign(&g),
                    slot => *slot = Some(g),
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Leaf gradients produced by [`Graph::backward`].
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, var: Var<'_, S>) -> Option<&Tensor<S>> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, var: Var<'_, S>) -> Option<Tensor<S>> {
        self.grads.get_mut(var.id).and_then(|g| g.take())
    }

    /// Gradient of `var`, or zeros of its shape when nothing reached it.
    pub fn get_or_zeros(&self, var: Var<'_, S>) -> Tensor<S> {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(var.value().shape()))
    }
}

impl<'g, S: Scalar> Var<'g, S> {
    pub fn graph(&self) -> &'g Graph<S> {
        self.graph
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor<S>> {
        self.graph.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.requires_grad(self.id)
    }

    /// Same value, cut from the tape.
    pub fn detach(&self) -> Var<'g, S> {
        let value = (*self.value()).clone();
        self.graph.constant(value)
    }
}
