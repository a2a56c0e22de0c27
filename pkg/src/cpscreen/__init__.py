"""Corresponding-projections transfer learning for orphan-target screening."""

from .baselines import (
    BaselineSpec,
    TlkModel,
    avg_clo_weights,
    avg_weights,
    select_extreme,
    supervised_fraction_eval,
    tlk_predict,
    tlk_predict_batch,
    tlk_train,
)
from .cp import (
    CpConfig,
    CpSolution,
    CpSystem,
    assemble_system,
    objective,
    predict_orphan,
    predict_orphan_batch,
    solve_cp_beta,
    solve_kcp,
    solve_lcp,
    solve_scp,
)
from .data import (
    SimilarityMatrix,
    SynthConfig,
    TargetBenchmark,
    TargetData,
    kmer_similarity,
    load_benchmark,
    load_model,
    normalize_for_orphan,
    save_benchmark,
    save_model,
    synth_generate,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    CpScreenError,
    DegenerateInputError,
    FormatError,
    InvalidInputError,
)
from .evaluation import (
    ProtocolConfig,
    draw_subsample,
    loo_orphan,
    orphan_fold_predictions,
    rmse,
    supervised_bounds,
)
from .kernels import FeatureVector, GramMatrix, KernelSpec, gram, gram_matrix, kernel_eval, tlk_eval
from .numerics import is_psd, pinv, solve_spd
from .report import EvaluationReport, TargetReport, load_report, save_report, summary_table
from .svr import (
    LabelledDataset,
    SvrModel,
    SvrParams,
    grid_search,
    linear_weights,
    model_inner,
    model_norm,
    predict,
    predict_batch,
    train_svr,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
