//! The KG encoder: stacked graph-attention layers over the merged entity
//! set, directional relation aggregation, and weighted concatenation of all
//! intermediate features into the final entity embeddings.
//!
//! Both graphs live in one embedding matrix: source entities keep their
//! local ids, target entities are offset by the source entity count.

use std::sync::Arc;

use crate::diff::{xavier_init, DiffError, GradientTape, NodeId, Tensor};
use crate::kg::AlignmentDataset;

/// Attention-logit nonlinearity inside the GAT softmax; the aggregation
/// nonlinearity itself is ELU.
const ATTENTION_LEAKY_SLOPE: f64 = 0.2;

/// Encoder hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    /// Entity embedding dimension.
    pub entity_dim: usize,
    /// Relation embedding dimension.
    pub relation_dim: usize,
    /// Number of stacked GAT layers.
    pub layers: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            entity_dim: 256,
            relation_dim: 128,
            layers: 2,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), DiffError> {
        if self.entity_dim == 0 || self.relation_dim == 0 || self.layers == 0 {
            return Err(DiffError::invalid(
                "encoder_config",
                "dimensions and layer count must be positive",
            ));
        }
        Ok(())
    }

    /// Width of the fused output embedding.
    pub fn output_dim(&self, use_relations: bool) -> usize {
        if use_relations {
            self.layers * self.entity_dim + 2 * self.relation_dim
        } else {
            self.layers * self.entity_dim
        }
    }
}

/// All trainable tensors of one encoder. The student owns one copy, the
/// teacher another with identical shapes.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// `(|E_s| + |E_t|) x d_e` entity embeddings.
    pub entity_emb: Tensor,
    /// `|R_s ∪ R_t| x d_r` relation embeddings.
    pub relation_emb: Tensor,
    /// Per-layer `d_e x d_e` transformation.
    pub gat_weights: Vec<Tensor>,
    /// Per-layer `2 d_e x 1` attention vector.
    pub attn_vectors: Vec<Tensor>,
    /// `(L + 2) x 1` fusion logits, softmaxed over the used features.
    pub fusion_logits: Tensor,
}

impl ModelParams {
    /// Xavier-initializes every tensor deterministically from `seed`
    /// (fusion logits start at zero, i.e. uniform feature weights).
    pub fn init(
        cfg: &EncoderConfig,
        entity_count: usize,
        relation_count: usize,
        seed: u64,
    ) -> Result<Self, DiffError> {
        cfg.validate()?;
        if entity_count == 0 {
            return Err(DiffError::invalid("model_params", "no entities"));
        }
        let mut next_seed = {
            let mut s = seed;
            move || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                s
            }
        };
        let entity_emb = xavier_init(entity_count, cfg.entity_dim, next_seed())?;
        let relation_emb = if relation_count == 0 {
            Tensor::zeros(0, cfg.relation_dim)
        } else {
            xavier_init(relation_count, cfg.relation_dim, next_seed())?
        };
        let mut gat_weights = Vec::with_capacity(cfg.layers);
        let mut attn_vectors = Vec::with_capacity(cfg.layers);
        for _ in 0..cfg.layers {
            gat_weights.push(xavier_init(cfg.entity_dim, cfg.entity_dim, next_seed())?);
            attn_vectors.push(xavier_init(2 * cfg.entity_dim, 1, next_seed())?);
        }
        Ok(Self {
            entity_emb,
            relation_emb,
            gat_weights,
            attn_vectors,
            fusion_logits: Tensor::zeros(cfg.layers + 2, 1),
        })
    }

    pub fn layer_count(&self) -> usize {
        self.gat_weights.len()
    }

    /// Named tensors in canonical order (checkpoints, diagnostics).
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("entity_emb".to_string(), &self.entity_emb),
            ("relation_emb".to_string(), &self.relation_emb),
        ];
        for (l, (w, a)) in self.gat_weights.iter().zip(&self.attn_vectors).enumerate() {
            out.push((format!("gat_weight_{l}"), w));
            out.push((format!("attn_vector_{l}"), a));
        }
        out.push(("fusion_logits".to_string(), &self.fusion_logits));
        out
    }

    /// Mutable tensors in the same canonical order as [`Self::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![&mut self.entity_emb, &mut self.relation_emb];
        for (w, a) in self.gat_weights.iter_mut().zip(self.attn_vectors.iter_mut()) {
            out.push(w);
            out.push(a);
        }
        out.push(&mut self.fusion_logits);
        out
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.named_tensors().iter().map(|(_, t)| t.shape()).collect()
    }
}

/// Tape handles for one registered parameter set.
pub struct ParamNodes {
    pub entity_emb: NodeId,
    pub relation_emb: NodeId,
    pub gat_weights: Vec<NodeId>,
    pub attn_vectors: Vec<NodeId>,
    pub fusion_logits: NodeId,
}

impl ParamNodes {
    /// Node ids in the canonical tensor order.
    pub fn all(&self) -> Vec<NodeId> {
        let mut out = vec![self.entity_emb, self.relation_emb];
        for (w, a) in self.gat_weights.iter().zip(&self.attn_vectors) {
            out.push(*w);
            out.push(*a);
        }
        out.push(self.fusion_logits);
        out
    }
}

/// Puts every parameter tensor on the tape as a leaf.
pub fn register_params(tape: &mut GradientTape, params: &ModelParams) -> ParamNodes {
    ParamNodes {
        entity_emb: tape.leaf(params.entity_emb.clone()),
        relation_emb: tape.leaf(params.relation_emb.clone()),
        gat_weights: params.gat_weights.iter().map(|t| tape.leaf(t.clone())).collect(),
        attn_vectors: params.attn_vectors.iter().map(|t| tape.leaf(t.clone())).collect(),
        fusion_logits: tape.leaf(params.fusion_logits.clone()),
    }
}

/// Edge-list view of the merged KG pair, precomputed once per dataset.
///
/// Edges are grouped by destination entity in ascending id order with
/// sources ascending inside each group, so aggregation order is canonical
/// and independent of input triple order.
#[derive(Debug, Clone)]
pub struct GraphIndices {
    pub entity_count: usize,
    pub source_count: usize,
    pub relation_count: usize,
    /// Neighbor (source end) of each edge, grouped by destination.
    pub edge_src: Arc<Vec<usize>>,
    /// Destination of each edge; ascending.
    pub edge_dst: Arc<Vec<usize>>,
    /// `entity_count + 1` boundaries into the edge arrays.
    pub edge_offsets: Arc<Vec<usize>>,
    /// Outward relation incidence per entity, duplicates kept.
    pub out_rel: Arc<Vec<Vec<usize>>>,
    /// Inward relation incidence per entity, duplicates kept.
    pub in_rel: Arc<Vec<Vec<usize>>>,
}

impl GraphIndices {
    pub fn build(dataset: &AlignmentDataset) -> Self {
        let n_s = dataset.source_kg.entity_count();
        let n_t = dataset.target_kg.entity_count();
        let n = n_s + n_t;

        let mut edge_src = Vec::new();
        let mut edge_dst = Vec::new();
        let mut edge_offsets = Vec::with_capacity(n + 1);
        edge_offsets.push(0);
        let mut out_rel = Vec::with_capacity(n);
        let mut in_rel = Vec::with_capacity(n);

        for (kg, offset) in [(&dataset.source_kg, 0), (&dataset.target_kg, n_s)] {
            for e in 0..kg.entity_count() {
                let neighbors = &kg.neighbor_index[e];
                assert!(
                    neighbors.contains(&e),
                    "self-loop invariant violated for entity {e}"
                );
                for &j in neighbors {
                    edge_src.push(offset + j);
                    edge_dst.push(offset + e);
                }
                edge_offsets.push(edge_src.len());
                out_rel.push(kg.out_relations[e].clone());
                in_rel.push(kg.in_relations[e].clone());
            }
        }

        Self {
            entity_count: n,
            source_count: n_s,
            relation_count: dataset.relation_count(),
            edge_src: Arc::new(edge_src),
            edge_dst: Arc::new(edge_dst),
            edge_offsets: Arc::new(edge_offsets),
            out_rel: Arc::new(out_rel),
            in_rel: Arc::new(in_rel),
        }
    }

    /// Global embedding row of a target-KG entity.
    pub fn global_target(&self, local: usize) -> usize {
        self.source_count + local
    }
}

/// One GAT layer: per-entity attention over its neighborhood followed by
/// an ELU-activated weighted aggregation.
pub fn gat_layer(
    tape: &mut GradientTape,
    h_prev: NodeId,
    idx: &GraphIndices,
    weight: NodeId,
    attn: NodeId,
) -> Result<NodeId, DiffError> {
    let dim = tape.value(weight).rows();
    if tape.value(attn).shape() != (2 * dim, 1) {
        return Err(DiffError::shape(
            "gat_layer",
            format!("attention vector must be {}x1", 2 * dim),
        ));
    }
    let w_t = tape.transpose(weight);
    let wh = tape.matmul(h_prev, w_t)?;

    // Attention logit for edge (j -> i) splits into a center term and a
    // neighbor term: a^T [W h_i ⊕ W h_j] = a_c^T W h_i + a_n^T W h_j.
    let a_center = tape.gather_rows(attn, Arc::new((0..dim).collect()))?;
    let a_neighbor = tape.gather_rows(attn, Arc::new((dim..2 * dim).collect()))?;
    let center_scores = tape.matmul(wh, a_center)?;
    let neighbor_scores = tape.matmul(wh, a_neighbor)?;
    let per_edge_center = tape.gather_rows(center_scores, idx.edge_dst.clone())?;
    let per_edge_neighbor = tape.gather_rows(neighbor_scores, idx.edge_src.clone())?;
    let raw = tape.add(per_edge_center, per_edge_neighbor)?;
    let logits = tape.leaky_relu(raw, ATTENTION_LEAKY_SLOPE);
    let alpha = tape.segment_softmax(logits, idx.edge_offsets.clone())?;

    let neighbor_values = tape.gather_rows(wh, idx.edge_src.clone())?;
    let aggregated = tape.weighted_segment_sum(neighbor_values, alpha, idx.edge_offsets.clone())?;
    Ok(tape.elu(aggregated))
}

/// Per-entity means of the embeddings of outward and inward relations.
/// Entities that never head (or never tail) a triple get a zero row.
pub fn relation_features(
    tape: &mut GradientTape,
    relation_emb: NodeId,
    idx: &GraphIndices,
) -> Result<(NodeId, NodeId), DiffError> {
    let outward = tape.segment_mean(relation_emb, idx.out_rel.clone())?;
    let inward = tape.segment_mean(relation_emb, idx.in_rel.clone())?;
    Ok((outward, inward))
}

/// Concatenates the features left to right, each scaled by its softmaxed
/// fusion weight. `logits` must be a column vector with one entry per
/// feature.
pub fn fuse(
    tape: &mut GradientTape,
    features: &[NodeId],
    logits: NodeId,
) -> Result<NodeId, DiffError> {
    let k = features.len();
    if tape.value(logits).shape() != (k, 1) {
        return Err(DiffError::shape(
            "fuse",
            format!("{k} features but logits are {:?}", tape.value(logits).shape()),
        ));
    }
    let weights = tape.segment_softmax(logits, Arc::new(vec![0, k]))?;
    let scaled: Vec<NodeId> = features
        .iter()
        .enumerate()
        .map(|(i, &f)| tape.scale_by_entry(f, weights, i))
        .collect::<Result<_, _>>()?;
    tape.concat_cols(&scaled)
}

/// Full encoder: `L` stacked GAT layers, optional relation features, and
/// weighted concatenation. Output rows follow the global entity ids.
pub fn encode(
    tape: &mut GradientTape,
    nodes: &ParamNodes,
    idx: &GraphIndices,
    use_relations: bool,
) -> Result<NodeId, DiffError> {
    let mut h = nodes.entity_emb;
    let mut features = Vec::with_capacity(nodes.gat_weights.len() + 2);
    for (w, a) in nodes.gat_weights.iter().zip(&nodes.attn_vectors) {
        h = gat_layer(tape, h, idx, *w, *a)?;
        features.push(h);
    }
    if use_relations {
        let (outward, inward) = relation_features(tape, nodes.relation_emb, idx)?;
        features.push(outward);
        features.push(inward);
        fuse(tape, &features, nodes.fusion_logits)
    } else {
        let layer_rows = Arc::new((0..nodes.gat_weights.len()).collect());
        let layer_logits = tape.gather_rows(nodes.fusion_logits, layer_rows)?;
        fuse(tape, &features, layer_logits)
    }
}

/// Runs the encoder on a throwaway tape and returns the embedding values.
/// Used for the teacher model and for inference, where no gradients flow.
pub fn encode_values(
    params: &ModelParams,
    idx: &GraphIndices,
    use_relations: bool,
) -> Result<Tensor, DiffError> {
    let mut tape = GradientTape::new();
    let nodes = register_params(&mut tape, params);
    let out = encode(&mut tape, &nodes, idx, use_relations)?;
    Ok(tape.value(out).clone())
}
