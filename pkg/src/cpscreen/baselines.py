"""Comparison methods for the orphan-screening protocol.

Weight-producing baselines (Avg, Closest/Farthest Protein, Avg-Clo-k)
return beta vectors over the supervised models and share the CP
prediction path.  TLK trains one joint model over (target, ligand) pairs
with the product kernel sim(t,t') * k_L(x,x').  The supervised-fraction
bound trains on part of the orphan's own data, an upper reference no
transfer method can use.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import SimilarityMatrix
from .errors import InvalidInputError
from .kernels import FeatureVector, KernelSpec, gram_matrix
from .rng import rng_from_seed, stable_int
from .svr import (
    LabelledDataset,
    SvrParams,
    _optimize_dual,
    grid_search,
    predict_batch,
    train_svr,
)

_KINDS = (
    "avg",
    "closest",
    "farthest",
    "avg_clo",
    "tlk",
    "tlk_clo",
    "scp",
    "cp",
    "supervised_fraction",
)


@dataclass(frozen=True)
class BaselineSpec:
    """One method to evaluate; parsed from tokens like ``avg_clo:3``."""

    kind: str
    k: int | None = None
    fraction: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidInputError(f"unknown method kind {self.kind!r}")
        if self.kind in ("avg_clo", "tlk_clo"):
            if self.k is None or self.k < 1:
                raise InvalidInputError(f"{self.kind} requires k >= 1")
        elif self.k is not None:
            raise InvalidInputError(f"{self.kind} takes no k parameter")
        if self.kind == "supervised_fraction":
            if self.fraction is None or not (0 < self.fraction < 1):
                raise InvalidInputError("supervised_fraction requires fraction in (0,1)")
        elif self.fraction is not None:
            raise InvalidInputError(f"{self.kind} takes no fraction parameter")

    @classmethod
    def parse(cls, token: str) -> "BaselineSpec":
        """Parse ``cp``, ``avg_clo:3``, ``supervised:0.5`` style tokens."""
        name, _, arg = token.partition(":")
        if name in ("avg_clo", "tlk_clo"):
            if not arg:
                raise InvalidInputError(f"method {name!r} needs ':k'")
            try:
                return cls(kind=name, k=int(arg))
            except ValueError:
                raise InvalidInputError(f"bad k in method token {token!r}") from None
        if name in ("supervised", "supervised_fraction"):
            if not arg:
                raise InvalidInputError(f"method {name!r} needs ':fraction'")
            try:
                return cls(kind="supervised_fraction", fraction=float(arg))
            except ValueError:
                raise InvalidInputError(f"bad fraction in method token {token!r}") from None
        if arg:
            raise InvalidInputError(f"method {name!r} takes no argument")
        if name not in _KINDS:
            raise InvalidInputError(f"unknown method token {token!r}")
        return cls(kind=name)

    def token(self) -> str:
        if self.kind in ("avg_clo", "tlk_clo"):
            return f"{self.kind}:{self.k}"
        if self.kind == "supervised_fraction":
            return f"supervised:{self.fraction:g}"
        return self.kind


def avg_weights(n: int) -> np.ndarray:
    """Uniform weights 1/n over the supervised models."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    return np.full(n, 1.0 / n)


def select_extreme(orphan_sims, mode: str) -> int:
    """Index of the most (closest) or least (farthest) similar target."""
    sims = np.asarray(orphan_sims, dtype=float)
    if sims.ndim != 1 or sims.shape[0] == 0:
        raise InvalidInputError("orphan_sims must be a non-empty vector")
    if mode == "closest":
        return int(np.argmax(sims))  # argmax takes the first of ties
    if mode == "farthest":
        return int(np.argmin(sims))
    raise InvalidInputError(f"mode must be 'closest' or 'farthest', got {mode!r}")


def avg_clo_weights(orphan_sims, k: int) -> np.ndarray:
    """Weights 1/k on the k most similar targets, ties to the smallest index."""
    sims = np.asarray(orphan_sims, dtype=float)
    n = sims.shape[0]
    if not 1 <= k <= n:
        raise InvalidInputError(f"k must be in [1, {n}], got {k}")
    # sort by (-sim, index): stable ranking with index tie-break
    order = np.lexsort((np.arange(n), -sims))
    weights = np.zeros(n)
    weights[order[:k]] = 1.0 / k
    return weights


@dataclass(frozen=True, eq=False)
class TlkModel:
    """Joint model over (target, ligand) pairs.

    Prediction for an orphan needs the orphan-to-target similarities,
    supplied at call time: h(o, x) = sum_j pi_j sim(o, t_j) k_L(x_j, x).
    """

    coefficients: np.ndarray
    pair_ids: tuple[str, ...]
    pair_inputs: tuple[FeatureVector, ...]
    ligand_kernel: KernelSpec


def _pair_sim_block(
    ids_a: Sequence[str], ids_b: Sequence[str], sim: SimilarityMatrix
) -> np.ndarray:
    ia = [sim.index(t) for t in ids_a]
    ib = [sim.index(t) for t in ids_b]
    return sim.values[np.ix_(ia, ib)]


def _pool_pairs(
    datasets: Sequence[LabelledDataset],
    target_ids: Sequence[str],
    restrict_to=None,
) -> tuple[list[str], list[FeatureVector], np.ndarray]:
    if len(datasets) != len(target_ids):
        raise InvalidInputError("one target id per dataset required")
    chosen = range(len(datasets)) if restrict_to is None else sorted(restrict_to)
    pair_ids: list[str] = []
    pair_inputs: list[FeatureVector] = []
    labels: list[np.ndarray] = []
    for i in chosen:
        ds = datasets[i]
        pair_ids.extend([target_ids[i]] * ds.size)
        pair_inputs.extend(ds.inputs)
        labels.append(ds.labels)
    if not pair_ids:
        raise InvalidInputError("no training pairs selected")
    return pair_ids, pair_inputs, np.concatenate(labels)


def tlk_grid_search(
    datasets: Sequence[LabelledDataset],
    target_ids: Sequence[str],
    sim: SimilarityMatrix,
    c_grid,
    eps_grid,
    ligand_kernel: KernelSpec,
    folds: int,
    seed: int,
    restrict_to=None,
) -> tuple[float, float]:
    """(C, eps) minimizing seeded k-fold RMSE under the joint pair kernel."""
    c_grid = sorted({float(c) for c in c_grid})
    eps_grid = sorted({float(e) for e in eps_grid}, reverse=True)
    if not c_grid or not eps_grid:
        raise InvalidInputError("hyperparameter grids must be non-empty")
    pair_ids, pair_inputs, y = _pool_pairs(datasets, target_ids, restrict_to)
    m = len(pair_ids)
    if folds < 2 or folds > m:
        raise InvalidInputError(f"folds must be in [2, {m}]")
    k_full = gram_matrix(ligand_kernel, pair_inputs) * _pair_sim_block(
        pair_ids, pair_ids, sim
    )
    perm = rng_from_seed(seed).permutation(m)
    blocks = np.array_split(perm, folds)
    splits = []
    for b in range(folds):
        val = blocks[b]
        train = np.concatenate([blocks[j] for j in range(folds) if j != b])
        splits.append((k_full[np.ix_(train, train)], k_full[np.ix_(val, train)], train, val))
    warm: list[np.ndarray | None] = [None] * folds
    best_key = None
    best = None
    for c in c_grid:
        for eps in eps_grid:
            errs = []
            for b, (k_tr, k_val, train, val) in enumerate(splits):
                pi, _, _ = _optimize_dual(
                    k_tr, y[train], c, eps, 1e-4, 10 * train.shape[0],
                    pi0=warm[b], best_effort=True,
                )
                warm[b] = pi
                pred = k_val @ pi
                errs.append(float(np.sqrt(np.mean((pred - y[val]) ** 2))))
            key = (float(np.mean(errs)), float(c), -float(eps))
            if best_key is None or key < best_key:
                best_key, best = key, (float(c), float(eps))
    assert best is not None
    return best


def tlk_train(
    datasets: Sequence[LabelledDataset],
    target_ids: Sequence[str],
    sim: SimilarityMatrix,
    params: SvrParams,
    restrict_to=None,
) -> TlkModel:
    """Train the joint SVR over pooled (target, ligand) pairs.

    ``restrict_to`` limits the pool to the given dataset indices (the
    k-closest variant).  ``params.kernel`` is the ligand kernel; the
    target part comes from ``sim``.
    """
    pair_ids, pair_inputs, y = _pool_pairs(datasets, target_ids, restrict_to)
    k = gram_matrix(params.kernel, pair_inputs) * _pair_sim_block(
        pair_ids, pair_ids, sim
    )
    max_passes = params.max_passes if params.max_passes is not None else 10 * len(y)
    pi, _, _ = _optimize_dual(k, y, params.c, params.epsilon, params.tol, max_passes)
    nz = np.flatnonzero(pi)
    return TlkModel(
        coefficients=pi[nz],
        pair_ids=tuple(pair_ids[j] for j in nz),
        pair_inputs=tuple(pair_inputs[j] for j in nz),
        ligand_kernel=params.kernel,
    )


def tlk_predict_batch(model: TlkModel, orphan_sims: dict, xs) -> np.ndarray:
    """Predict for orphan ligands given orphan-to-target similarities."""
    xs = list(xs)
    if len(model.pair_ids) == 0:
        return np.zeros(len(xs))
    try:
        s = np.asarray([orphan_sims[t] for t in model.pair_ids], dtype=float)
    except KeyError as exc:
        raise InvalidInputError(f"missing similarity entry for target {exc}") from None
    k_l = gram_matrix(model.ligand_kernel, xs, model.pair_inputs)
    return k_l @ (s * model.coefficients)


def tlk_predict(model: TlkModel, orphan_sims: dict, x: FeatureVector) -> float:
    return float(tlk_predict_batch(model, orphan_sims, [x])[0])


def supervised_fraction_eval(
    orphan_data: LabelledDataset,
    fraction: float,
    c_grid,
    eps_grid,
    kernel: KernelSpec,
    folds: int,
    seed: int,
) -> float:
    """Upper-bound reference: grid-searched SVR on a seeded fraction of the
    orphan's own ligands, RMSE on the remainder."""
    if not 0 < fraction < 1:
        raise InvalidInputError("fraction must be in (0, 1)")
    m = orphan_data.size
    n_train = int(round(fraction * m))
    if n_train < folds:
        raise InvalidInputError(
            f"fraction {fraction} of {m} ligands gives {n_train} training points, "
            f"fewer than {folds} folds"
        )
    if n_train >= m:
        raise InvalidInputError("fraction leaves no evaluation ligands")
    perm = rng_from_seed(seed).permutation(m)
    train_ds = orphan_data.subset(perm[:n_train])
    test_ds = orphan_data.subset(perm[n_train:])
    params = grid_search(
        train_ds, c_grid, eps_grid, kernel, folds, seed=stable_int(seed, "cv")
    )
    model = train_svr(train_ds, params)
    pred = predict_batch(model, test_ds.inputs)
    return float(np.sqrt(np.mean((pred - test_ds.labels) ** 2)))
