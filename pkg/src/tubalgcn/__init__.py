"""Spatial-temporal graph convolution over dynamic graphs via the tensor
M-product, with interchangeable DFT/DCT/Haar temporal transforms and
their ensemble, trained end-to-end for link-weight estimation."""

from .tensor3 import (
    DimensionMismatchError,
    facewise_product,
    fold3,
    m_inverse_transform,
    m_product,
    m_transform,
    mode_n_product,
    unfold3,
)
from .transforms import (
    TransformMatrix,
    build_dct,
    build_dft,
    build_haar,
    build_identity,
    build_transform,
)
from .gtcn import (
    AdjacencyTensor,
    EnsembleWeights,
    GtcnLayerParams,
    ensemble_combine,
    gtcn_forward,
    message_passing_oracle,
    preprocess_adjacency,
)
from .head_loss import LinkObservation, RegressionHead, estimate_weight, loss, mae, rmse
from .data import (
    DynamicGraphDataset,
    SynthSpec,
    build_adjacency,
    generate_synthetic,
    parse_dataset,
    serialize_dataset,
    split_dataset,
)
from .training import (
    EarlyStopping,
    ModelParams,
    TrainConfig,
    adam_step,
    compute_gradients,
    grad_check,
    init_params,
    train,
)

__version__ = "0.1.0"
