//! Named parameter storage and per-graph binding.

use std::collections::HashMap;

use indexmap::IndexMap;
use rand_chacha::ChaCha8Rng;

use super::spectral;
use crate::autodiff::{Gradients, Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Float, Shape, Tensor};

/// Suffix of a spectral-norm left singular vector; the matching weight is
/// `<layer>.weight`.
pub const SN_U_SUFFIX: &str = ".sn_u";

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T: Float> {
    pub value: Tensor<T>,
    pub trainable: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParamCount {
    pub total: usize,
    pub trainable: usize,
    pub non_trainable: usize,
}

impl std::ops::Add for ParamCount {
    type Output = ParamCount;
    fn add(self, o: ParamCount) -> ParamCount {
        ParamCount {
            total: self.total + o.total,
            trainable: self.trainable + o.trainable,
            non_trainable: self.non_trainable + o.non_trainable,
        }
    }
}

/// Ordered map from stable names to parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T: Float> {
    params: IndexMap<String, Param<T>>,
}

impl<T: Float> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: IndexMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>, trainable: bool) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter name {name}")));
        }
        self.params.insert(name, Param { value, trainable });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.get_mut(name)
    }

    pub fn value(&self, name: &str) -> Result<&Tensor<T>> {
        self.params
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<T>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn count(&self) -> ParamCount {
        let mut c = ParamCount::default();
        for p in self.params.values() {
            let n = p.value.numel();
            c.total += n;
            if p.trainable {
                c.trainable += n;
            } else {
                c.non_trainable += n;
            }
        }
        c
    }

    /// Replaces a value, keeping its shape.
    pub fn set(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter {name}")))?;
        if p.value.shape() != value.shape() {
            return Err(Error::ShapeMismatch {
                op: "ParamStore::set",
                lhs: p.value.shape(),
                rhs: value.shape(),
            });
        }
        p.value = value;
        Ok(())
    }

    /// Names of spectrally normalized weights with their `u` vectors.
    pub fn spectral_pairs(&self) -> Vec<(String, String)> {
        self.params
            .keys()
            .filter_map(|k| k.strip_suffix(SN_U_SUFFIX).map(|layer| (format!("{layer}.weight"), k.clone())))
            .collect()
    }

    /// Runs `iterations` power-iteration steps on every spectral-norm `u`
    /// and stores the result.
    pub fn power_iterate(&mut self, iterations: usize) -> Result<()> {
        for (w_name, u_name) in self.spectral_pairs() {
            let w = self.value(&w_name)?.clone();
            let u = self.get_mut(&u_name).expect("sn pair");
            for _ in 0..iterations {
                u.value = spectral::power_step(&w, &u.value).0;
            }
        }
        Ok(())
    }

    /// Creates vars for every parameter on `graph`. Trainable values become
    /// differentiable leaves when `track` is set; spectrally normalized
    /// weights are replaced by their normalized form.
    pub fn bind<'g>(&self, graph: &'g Graph<T>, track: bool) -> Result<Bound<'g, T>> {
        let mut given = HashMap::new();
        if track {
            for (name, p) in &self.params {
                if p.trainable {
                    given.insert(name.clone(), graph.leaf(p.value.clone()));
                }
            }
        }
        self.bind_with(graph, given)
    }

    /// Like [`bind`](Self::bind), but takes the raw vars of some parameters
    /// from `given`; those become the binding's leaves. Everything else is
    /// bound as a constant.
    pub fn bind_with<'g>(&self, graph: &'g Graph<T>, mut given: HashMap<String, Var>) -> Result<Bound<'g, T>> {
        let mut vars = HashMap::with_capacity(self.params.len());
        let mut leaves = Vec::new();
        for (name, p) in &self.params {
            let v = match given.remove(name) {
                Some(v) => {
                    if graph.shape(v) != p.value.shape() {
                        return Err(Error::ShapeMismatch {
                            op: "ParamStore::bind_with",
                            lhs: p.value.shape(),
                            rhs: graph.shape(v),
                        });
                    }
                    leaves.push((name.clone(), v));
                    v
                }
                None => graph.constant(p.value.clone()),
            };
            vars.insert(name.clone(), v);
        }
        if let Some(name) = given.keys().next() {
            return Err(Error::InvalidArgument(format!("unknown parameter {name}")));
        }
        for (w_name, u_name) in self.spectral_pairs() {
            let w = *vars
                .get(&w_name)
                .ok_or_else(|| Error::InvalidArgument(format!("{u_name} has no weight {w_name}")))?;
            let normalized = spectral::normalize(graph, w, &self.params[&u_name].value)?;
            vars.insert(w_name, normalized);
        }
        Ok(Bound { graph, vars, leaves })
    }
}

/// A [`ParamStore`] materialized on one graph.
pub struct Bound<'g, T> {
    graph: &'g Graph<T>,
    vars: HashMap<String, Var>,
    leaves: Vec<(String, Var)>,
}

impl<'g, T: Float> Bound<'g, T> {
    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("parameter {name} is not bound")))
    }

    /// Differentiable leaves, by parameter name.
    pub fn leaves(&self) -> &[(String, Var)] {
        &self.leaves
    }

    /// Pulls this binding's gradients out of a backward result.
    pub fn gradients(&self, grads: &Gradients<T>) -> HashMap<String, Tensor<T>> {
        self.leaves
            .iter()
            .filter_map(|(name, v)| grads.get(*v).map(|g| (name.clone(), g.clone())))
            .collect()
    }
}

/// Per-forward state shared by every layer call.
pub struct Ctx<'a, 'g, T> {
    pub bound: &'a Bound<'g, T>,
    pub training: bool,
    pub rng: &'a mut ChaCha8Rng,
}

impl<'a, 'g, T: Float> Ctx<'a, 'g, T> {
    pub fn g(&self) -> &'g Graph<T> {
        self.bound.graph
    }

    pub fn param(&self, name: &str) -> Result<Var> {
        self.bound.var(name)
    }
}

/// Shape check used by checkpoint loading.
pub fn check_shape(name: &str, expected: Shape, got: Shape) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Checkpoint(format!("{name}: expected shape {expected}, found {got}")))
    }
}
