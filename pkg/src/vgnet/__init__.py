"""Time series classification via directed visibility graphs and a
mean-aggregation graph network trained with hand-written backpropagation."""

from .features import in_degree, node_feature_matrix, pagerank
from .neural import (
    AdamState,
    BatchedGraph,
    ModelParams,
    adam_step,
    backward,
    forward,
    init_params,
    leaky_relu,
    mean_readout,
    mlpp_forward,
    nll_loss,
    sage_forward,
)
from .pipeline import (
    Corpus,
    MetricsReport,
    RunSummary,
    TrainConfig,
    evaluate,
    multi_seed_run,
    prepare_corpus,
    random_search,
    train,
)
from .series_io import Dataset, ParseError, TimeSeries, load_dataset, parse_ucr_tsv, znormalize
from .visibility import (
    VisGraph,
    brute_oracle,
    build_nvg_dc,
    build_nvg_sweep,
    degree_distribution,
    visible,
)

__version__ = "0.1.0"
