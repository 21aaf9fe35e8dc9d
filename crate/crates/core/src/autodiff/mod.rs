//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Graph`] records every op executed on it, together with a closure
//! that maps the output gradient to gradients of the op's inputs.
//! [`Graph::backward`] walks the record in exact reverse order and
//! accumulates (`+=`) into each input, so a value used twice receives the
//! sum of both path gradients.
//!
//! ```
//! use vologan_core::autodiff::Graph;
//! use vologan_core::tensor::Tensor;
//!
//! let g = Graph::<f64>::new();
//! let x = g.leaf(Tensor::from_vec([1, 1, 1, 2], vec![1.0, 2.0]).unwrap());
//! let y = g.sum(g.square(x));
//! let grads = g.backward(y).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0]);
//! ```

mod check;
mod conv;
mod elementwise;
mod matmul;
mod reduce;
mod shape_ops;

use std::cell::RefCell;
use std::rc::Rc;

pub use check::{finite_diff_check, CheckReport};
pub use conv::Padding;

use crate::error::{Error, Result};
use crate::tensor::{Float, Shape, Tensor};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Maps the output gradient to per-parent gradients. The flag slice says
/// which parents actually need one; the rest may be returned as `None`.
pub(crate) type BackwardFn<T> = Box<dyn FnOnce(&Tensor<T>, &[bool]) -> Vec<Option<Tensor<T>>>>;

struct Node<T> {
    value: Rc<Tensor<T>>,
    requires_grad: bool,
    is_leaf: bool,
    parents: Vec<Var>,
    backward: Option<BackwardFn<T>>,
}

pub struct Graph<T = f32> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Float> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Float> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, node: Node<T>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var(nodes.len() - 1)
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Tensor<T>) -> Var {
        self.push(Node {
            value: Rc::new(value),
            requires_grad: true,
            is_leaf: true,
            parents: Vec::new(),
            backward: None,
        })
    }

    /// A value that never receives a gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var {
        self.push(Node {
            value: Rc::new(value),
            requires_grad: false,
            is_leaf: true,
            parents: Vec::new(),
            backward: None,
        })
    }

    /// Same value, cut off from differentiation.
    pub fn detach(&self, v: Var) -> Var {
        let value = self.value(v);
        self.push(Node {
            value,
            requires_grad: false,
            is_leaf: true,
            parents: Vec::new(),
            backward: None,
        })
    }

    pub fn value(&self, v: Var) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes.borrow()[v.0].value.shape()
    }

    /// Value of a one-element var.
    pub fn item(&self, v: Var) -> T {
        self.nodes.borrow()[v.0].value.item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    /// Records an op. The backward closure is dropped when no parent
    /// requires a gradient.
    pub(crate) fn record(
        &self,
        value: Tensor<T>,
        parents: &[Var],
        backward: impl FnOnce(&Tensor<T>, &[bool]) -> Vec<Option<Tensor<T>>> + 'static,
    ) -> Var {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.0].requires_grad)
        };
        self.push(Node {
            value: Rc::new(value),
            requires_grad,
            is_leaf: false,
            parents: parents.to_vec(),
            backward: if requires_grad {
                Some(Box::new(backward))
            } else {
                None
            },
        })
    }

    /// Reverse pass from a one-element `root`. Gradients are returned for
    /// differentiable leaves only.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        let mut nodes = self.nodes.borrow_mut();
        let root_shape = nodes[root.0].value.shape();
        if root_shape.numel() != 1 {
            return Err(Error::Graph(format!("backward root must be a scalar, got {root_shape}")));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        if !nodes[root.0].requires_grad {
            return Ok(Gradients { grads });
        }
        grads[root.0] = Some(Tensor::ones(root_shape));

        for id in (0..=root.0).rev() {
            let Some(grad) = grads[id].take() else { continue };
            let node = &mut nodes[id];
            if node.is_leaf {
                if node.requires_grad {
                    grads[id] = Some(grad);
                }
                continue;
            }
            let Some(backward) = node.backward.take() else {
                if node.requires_grad {
                    return Err(Error::Graph(format!(
                        "node {id} was already differentiated; one backward pass per forward record"
                    )));
                }
                continue;
            };
            let parents = node.parents.clone();
            let needs: Vec<bool> = parents.iter().map(|p| nodes[p.0].requires_grad).collect();
            let parent_grads = backward(&grad, &needs);
            debug_assert_eq!(parent_grads.len(), parents.len());
            for ((parent, pg), need) in parents.iter().zip(parent_grads).zip(&needs) {
                let Some(pg) = pg else { continue };
                if !need {
                    continue;
                }
                debug_assert_eq!(pg.shape(), nodes[parent.0].value.shape());
                match &mut grads[parent.0] {
                    Some(acc) => acc.add_assign(&pg),
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Leaf gradients from one backward pass.
pub struct Gradients<T = f32> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Float> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}
