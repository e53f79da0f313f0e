use std::collections::HashMap;

use crate::numcore::Tensor2;

/// A collection of named parameter tensors.
///
/// Implementations must visit tensors in a fixed order; that order is the
/// checkpoint manifest order and the order optimizers walk.
pub trait Parameters {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor2));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor2));

    fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = Vec::new();
        self.visit("", &mut |n, t| out.push((n, t)));
        out
    }

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, t| n += t.len());
        n
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Gradients keyed by parameter name, in parameter visiting order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradStore {
    entries: Vec<(String, Tensor2)>,
    index: HashMap<String, usize>,
}

impl GradStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Takes every tensor of a gradient-shaped parameter set.
    pub fn from_params(grads: &impl Parameters) -> Self {
        let mut store = Self::new();
        grads.visit("", &mut |name, t| store.insert(name, t.clone()));
        store
    }

    /// Zero gradients mirroring every tensor of `params`.
    pub fn zeros_like(params: &impl Parameters) -> Self {
        let mut store = Self::new();
        params.visit("", &mut |name, t| store.insert(name, Tensor2::zeros(t.rows(), t.cols())));
        store
    }

    pub fn insert(&mut self, name: String, grad: Tensor2) {
        if let Some(&i) = self.index.get(&name) {
            self.entries[i].1 = grad;
        } else {
            self.index.insert(name.clone(), self.entries.len());
            self.entries.push((name, grad));
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor2> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor2> {
        self.index.get(name).map(|&i| &mut self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor2)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor2)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Global L2 norm over all entries.
    pub fn global_norm(&self) -> f64 {
        self.entries.iter().map(|(_, t)| t.sum_squares()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for (_, t) in &mut self.entries {
            t.scale_in_place(k);
        }
    }

    /// Checks that names and shapes mirror `params` exactly.
    pub fn matches(&self, params: &impl Parameters) -> Result<(), String> {
        let named = params.named_tensors();
        if named.len() != self.entries.len() {
            return Err(format!(
                "{} gradient entries for {} parameter tensors",
                self.entries.len(),
                named.len()
            ));
        }
        for ((pn, pt), (gn, gt)) in named.iter().zip(&self.entries) {
            if pn != gn || pt.shape() != gt.shape() {
                return Err(format!(
                    "parameter {pn} {:?} paired with gradient {gn} {:?}",
                    pt.shape(),
                    gt.shape()
                ));
            }
        }
        Ok(())
    }
}
