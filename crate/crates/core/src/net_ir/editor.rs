use std::collections::BTreeMap;

use super::graph::{DenseMatrix, DenseVector, Layer, LayerId, LayerKind, Network};

/// Mutable working copy of a layer graph used inside rewriting passes.
/// Public operations only ever hand out immutable [`Network`]s.
#[derive(Debug, Clone)]
pub(crate) struct GraphEditor {
    layers: BTreeMap<LayerId, Layer>,
    pub input: LayerId,
    pub output: LayerId,
    next: u32,
}

impl GraphEditor {
    pub fn from_network(net: &Network) -> Self {
        let layers: BTreeMap<LayerId, Layer> =
            net.layers().iter().map(|l| (l.id, l.clone())).collect();
        let next = layers.keys().next_back().map_or(0, |id| id.0 + 1);
        GraphEditor {
            layers,
            input: net.input(),
            output: net.output(),
            next,
        }
    }

    pub fn to_network(&self) -> Network {
        Network::from_parts_unchecked(
            self.layers.values().cloned().collect(),
            self.input,
            self.output,
        )
    }

    pub fn ids(&self) -> Vec<LayerId> {
        self.layers.keys().copied().collect()
    }

    pub fn layer(&self, id: LayerId) -> &Layer {
        &self.layers[&id]
    }

    pub fn layer_mut(&mut self, id: LayerId) -> &mut Layer {
        self.layers.get_mut(&id).expect("known layer")
    }

    pub fn kind(&self, id: LayerId) -> &LayerKind {
        &self.layers[&id].kind
    }

    pub fn width(&self, id: LayerId) -> usize {
        self.layers[&id].width
    }

    pub fn linear(&self, id: LayerId) -> (&DenseMatrix, &DenseVector) {
        self.layers[&id]
            .linear_parts()
            .expect("layer is Linear")
    }

    pub fn successors(&self, id: LayerId) -> Vec<LayerId> {
        self.layers
            .values()
            .filter(|l| l.inputs.contains(&id))
            .map(|l| l.id)
            .collect()
    }

    pub fn add(&mut self, kind: LayerKind, width: usize, inputs: Vec<LayerId>) -> LayerId {
        let id = LayerId(self.next);
        self.next += 1;
        self.layers.insert(
            id,
            Layer {
                id,
                kind,
                width,
                inputs,
            },
        );
        id
    }

    pub fn add_linear(&mut self, pred: LayerId, weight: DenseMatrix, bias: DenseVector) -> LayerId {
        let width = weight.nrows();
        self.add(LayerKind::Linear { weight, bias }, width, vec![pred])
    }

    pub fn remove(&mut self, id: LayerId) {
        self.layers.remove(&id);
    }

    /// Points every arc into `old` at `new` instead, and moves the output
    /// designation along.
    pub fn redirect_successors(&mut self, old: LayerId, new: LayerId) {
        for layer in self.layers.values_mut() {
            if layer.id == new {
                continue;
            }
            for p in layer.inputs.iter_mut() {
                if *p == old {
                    *p = new;
                }
            }
        }
        if self.output == old {
            self.output = new;
        }
    }

    /// True if `to` is reachable from `from` along arcs.
    pub fn reaches(&self, from: LayerId, to: LayerId) -> bool {
        let mut stack = vec![from];
        let mut seen = std::collections::BTreeSet::new();
        while let Some(id) = stack.pop() {
            if id == to {
                return true;
            }
            if seen.insert(id) {
                stack.extend(self.successors(id));
            }
        }
        false
    }

    /// Drops every layer that cannot reach the output (the input is kept).
    pub fn prune_dead(&mut self) {
        let mut live = std::collections::BTreeSet::new();
        let mut stack = vec![self.output];
        while let Some(id) = stack.pop() {
            if live.insert(id) {
                stack.extend(self.layers[&id].inputs.iter().copied());
            }
        }
        live.insert(self.input);
        self.layers.retain(|id, _| live.contains(id));
    }
}
