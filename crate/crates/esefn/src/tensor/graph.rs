//! The recorded compute graph and its backward pass.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};

use crate::error::{shape_str, Error, Result};

use super::{Tensor, TensorId};

/// Per-backward-pass gradient table for tensors inside the graph.
///
/// Leaf tensors with persistent gradient buffers are flushed from here at
/// the end of a pass, so repeated backward calls accumulate into the leaves
/// while intermediate gradients stay local to each pass.
pub(crate) struct GradStore {
    map: HashMap<TensorId, Vec<f64>>,
}

impl GradStore {
    fn new() -> Self {
        GradStore {
            map: HashMap::new(),
        }
    }

    fn seed(&mut self, id: TensorId) {
        self.map.insert(id, vec![1.0]);
    }

    fn take(&mut self, id: TensorId) -> Option<Vec<f64>> {
        self.map.remove(&id)
    }

    /// Adds `delta` to the stored gradient of `t`, creating it as zero first.
    pub(crate) fn accumulate(&mut self, t: &Tensor, delta: &[f64]) {
        let entry = self
            .map
            .entry(t.id())
            .or_insert_with(|| vec![0.0; delta.len()]);
        debug_assert_eq!(entry.len(), delta.len());
        for (e, d) in entry.iter_mut().zip(delta) {
            *e += d;
        }
    }
}

struct Node {
    output: TensorId,
    backward: Box<dyn Fn(&[f64], &mut GradStore)>,
}

struct GraphState {
    nodes: Vec<Node>,
    /// Gradient-tracking leaves seen as inputs, in first-use order.
    params: Vec<Tensor>,
    param_ids: HashSet<TensorId>,
    /// Outputs produced by this graph; their gradients are wanted even
    /// though they carry no persistent buffer.
    produced: HashSet<TensorId>,
}

/// Records every operation applied through it, in execution order, and
/// replays them in reverse to propagate gradients.
///
/// A graph is single-threaded: build the forward pass, call
/// [`Graph::backward`], then drop it. Parameters live outside the graph and
/// can be reused across many graphs (one per batch, typically).
#[derive(Default)]
pub struct Graph {
    state: RefCell<GraphState>,
}

impl Default for GraphState {
    fn default() -> Self {
        GraphState {
            nodes: Vec::new(),
            params: Vec::new(),
            param_ids: HashSet::new(),
            produced: HashSet::new(),
        }
    }
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    /// Number of operations recorded so far.
    pub fn op_count(&self) -> usize {
        self.state.borrow().nodes.len()
    }

    /// True if a gradient for `t` is of any use: either `t` has a
    /// persistent buffer or it was produced by an earlier node here.
    pub(crate) fn wants_grad(&self, t: &Tensor) -> bool {
        t.requires_grad() || self.state.borrow().produced.contains(&t.id())
    }

    /// Records one operation. `backward` receives the output gradient and
    /// accumulates into the inputs' store entries.
    pub(crate) fn record(
        &self,
        output: &Tensor,
        inputs: &[&Tensor],
        backward: impl Fn(&[f64], &mut GradStore) + 'static,
    ) {
        let mut state = self.state.borrow_mut();
        for input in inputs {
            if input.requires_grad() && !state.param_ids.contains(&input.id()) {
                state.param_ids.insert(input.id());
                state.params.push((*input).clone());
            }
        }
        state.produced.insert(output.id());
        state.nodes.push(Node {
            output: output.id(),
            backward: Box::new(backward),
        });
    }

    /// Propagates `d loss / d tensor` from a scalar `loss` into the
    /// gradient buffer of every tracked leaf this graph touched.
    ///
    /// Visits each recorded operation exactly once, in reverse execution
    /// order. Leaf gradients accumulate across calls; zero them between
    /// passes if that is not wanted.
    pub fn backward(&self, loss: &Tensor) -> Result<()> {
        if loss.len() != 1 {
            return Err(Error::Usage(format!(
                "backward seed must be scalar, got dims {}",
                shape_str(loss.dims())
            )));
        }
        let state = self.state.borrow();
        let mut store = GradStore::new();
        store.seed(loss.id());
        for node in state.nodes.iter().rev() {
            if let Some(gout) = store.take(node.output) {
                (node.backward)(&gout, &mut store);
            }
        }
        for param in &state.params {
            if let Some(g) = store.take(param.id()) {
                param.accumulate_grad(&g);
            }
        }
        // A tracked leaf used directly as the loss: d loss / d loss = 1.
        if loss.requires_grad() {
            if let Some(g) = store.take(loss.id()) {
                loss.accumulate_grad(&g);
            }
        }
        Ok(())
    }
}
