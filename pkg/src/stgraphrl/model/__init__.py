"""Two-stage graph encoder and residual decoder."""

from stgraphrl.model.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from stgraphrl.model.decoder import decode
from stgraphrl.model.encoder import (
    GraphTensors,
    fusion_layer,
    head_spatial,
    head_temporal,
    readout,
    spatial_block,
    temporal_block,
)
from stgraphrl.model.forward import (
    ForwardState,
    ModelInputError,
    edge_embedding,
    forward,
    infer,
    node_embedding,
    user_embedding,
)
from stgraphrl.model.params import ModelDims, ModelParams, init_params

__all__ = [
    "CheckpointError",
    "ForwardState",
    "GraphTensors",
    "ModelDims",
    "ModelInputError",
    "ModelParams",
    "decode",
    "edge_embedding",
    "forward",
    "fusion_layer",
    "head_spatial",
    "head_temporal",
    "infer",
    "init_params",
    "load_checkpoint",
    "node_embedding",
    "readout",
    "save_checkpoint",
    "spatial_block",
    "temporal_block",
    "user_embedding",
]
