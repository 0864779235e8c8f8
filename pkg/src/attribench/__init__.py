"""Benchmark post-hoc attributions on low signal-to-noise synthetic data and
select features with attribution-driven recursive elimination."""
from .attribution import (
    AttributionVector,
    FeatureGroup,
    aggregate_group_importance,
    attribute,
    deeplift_rescale,
    feature_ablation,
    integrated_gradients,
    saliency,
    topk_features,
)
from .metrics import basic_metrics, consistency, convergence_auc, fprec, uscore
from .nn import MLP, TrainConfig, TrainReport, train
from .rfe import RfeConfig, RfeResult, bi_module_eval, rfe_linear, rfewna
from .symfunc import NoiseSpec, TabularDataset, generate_dataset

__version__ = "0.1.0"
