"""Pair- and triplet-based weighting losses for deep metric learning.

Mining, weighting, losses with analytic gradients, a small numpy embedder
trained with Adam, and leave-one-out Recall@K evaluation.
"""
from .data import Dataset, gen_synthetic_clusters, load_csv_dataset, save_csv_dataset
from .errors import *  # noqa: F401,F403
from .evaluation import RetrievalReport, recall_at_k, zero_shot_split
from .geometry import (
    EmbeddingBatch,
    PairMask,
    distance_backward,
    l2_normalize,
    l2_normalize_backward,
    pair_mask,
    pairwise_distances,
)
from .kernels import BACKEND
from .losses import (
    LossConfig,
    LossResult,
    contrastive_loss,
    general_pair_loss,
    general_triplet_loss,
    lifted_structured_loss,
    multi_similarity_loss,
    npair_loss,
    square_contrastive_loss,
    square_pair_loss,
    square_triplet_loss,
    triplet_loss,
)
from .mining import (
    MinedPairs,
    MinedTriplets,
    Sampler,
    SamplerConfig,
    all_triplets,
    mine_hardest_triplets,
    mine_ms,
    mine_thresholds,
    mine_triplet_margin,
    pk_sample,
    random_sample,
)
from .model import Adam, MlpEmbedder, adam_step, finite_diff_gradient
from .objective import Objective, batch_loss, evaluate, make_plan
from .trainer import ModelConfig, TrainConfig, TrainHistory, train, train_step
from .weighting import (
    PairWeights,
    TripletWeights,
    WeightScheme,
    emit_weight_curves,
    normalize_weights,
    pair_weights,
    triplet_weights,
)

__version__ = "0.1.0"
